use std::fmt;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bundle::{Divisor, DivisorPoint};
use crate::eigen;
use crate::sphere::RhoTerm;

/// Largest supported grid bandwidth.
pub const MAX_L_MAX: usize = 255;

/// Divisors to visit: an explicit list or `"random:<count>"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DivisorSpec {
    Random(String),
    Explicit(Vec<Vec<DivisorPoint>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Vortex number.
    pub n: usize,
    /// Band-limited conformal exponent `ρ` as `(l, m, value)` terms.
    pub rho_coeffs: Vec<RhoTerm>,
    pub eps_list: Vec<f64>,
    pub l_max: usize,
    /// Random divisors drawn when `divisor_spec` is absent.
    pub moduli_samples: usize,
    pub divisor_spec: Option<DivisorSpec>,
    /// Append coincident and antipodal clusters to the divisor list.
    pub adversarial: bool,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub eigensolver: String,
    /// Bandwidth of the moduli-sphere grid used by `spectrum`.
    pub moduli_l_max: usize,
    /// Highest eigenvalue cluster compared by `spectrum`.
    pub k_max: usize,
    pub laxmilgram_instances: usize,
    /// Bandwidth of the random coefficients in `check-laxmilgram`, capped at
    /// `l_max/2`.
    pub laxmilgram_band: usize,
    pub alpha_samples: usize,
    /// Write binary dumps of solved fields.
    pub dump_fields: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 1,
            rho_coeffs: Vec::new(),
            eps_list: vec![0.4, 0.2, 0.1, 0.05, 0.025],
            l_max: 63,
            moduli_samples: 10,
            divisor_spec: None,
            adversarial: false,
            seed: 42,
            output_dir: None,
            eigensolver: eigen::DEFAULT_SOLVER.to_string(),
            moduli_l_max: 23,
            k_max: 3,
            laxmilgram_instances: 100,
            laxmilgram_band: 8,
            alpha_samples: 1000,
            dump_fields: false,
        }
    }
}

/// A rejected configuration, reported against a single field.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = self.message.replace(['\n', '\r'], " ");
        write!(f, "config error in field `{}`: {}", self.field, msg)
    }
}

impl std::error::Error for ConfigError {}

fn field_of_unknown(message: &str) -> Option<String> {
    let rest = message.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let message = e.inner().to_string();
            let path = e.path().to_string();
            let field = field_of_unknown(&message).unwrap_or_else(|| {
                if path == "." || path == "?" || path.is_empty() {
                    "<root>".to_string()
                } else {
                    path
                }
            });
            ConfigError::new(field, message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::new("--config", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.eps_list.is_empty() {
            return Err(ConfigError::new("eps_list", "must not be empty"));
        }
        for (i, &e) in self.eps_list.iter().enumerate() {
            if !(e > 0.0 && e < 1.0) {
                return Err(ConfigError::new(
                    format!("eps_list[{i}]"),
                    format!("{e} is not in (0, 1)"),
                ));
            }
            if i > 0 && e >= self.eps_list[i - 1] {
                return Err(ConfigError::new(
                    format!("eps_list[{i}]"),
                    "eps_list must be strictly decreasing",
                ));
            }
        }
        if !(4..=MAX_L_MAX).contains(&self.l_max) {
            return Err(ConfigError::new(
                "l_max",
                format!("must lie in 4..={MAX_L_MAX}"),
            ));
        }
        if self.n > 8 {
            return Err(ConfigError::new(
                "n",
                "vortex numbers above 8 are not supported",
            ));
        }
        if 2 * self.n + 2 > self.l_max {
            return Err(ConfigError::new(
                "n",
                format!("degree {} is too large for l_max = {}", self.n, self.l_max),
            ));
        }
        for (i, t) in self.rho_coeffs.iter().enumerate() {
            if t.l > self.l_max / 2 || t.m.unsigned_abs() as usize > t.l || !t.value.is_finite() {
                return Err(ConfigError::new(
                    format!("rho_coeffs[{i}]"),
                    format!(
                        "term ({}, {}, {}) needs |m| <= l <= l_max/2 and a finite value",
                        t.l, t.m, t.value
                    ),
                ));
            }
        }
        match &self.divisor_spec {
            None => {
                if self.moduli_samples == 0 {
                    return Err(ConfigError::new("moduli_samples", "must be positive"));
                }
            }
            Some(DivisorSpec::Random(s)) => {
                random_count(s)?;
            }
            Some(DivisorSpec::Explicit(list)) => {
                if list.is_empty() {
                    return Err(ConfigError::new(
                        "divisor_spec",
                        "explicit divisor list is empty",
                    ));
                }
                for (i, pts) in list.iter().enumerate() {
                    let d = Divisor::new(pts.clone()).map_err(|e| {
                        ConfigError::new(format!("divisor_spec[{i}]"), e.to_string())
                    })?;
                    if d.degree() != self.n {
                        return Err(ConfigError::new(
                            format!("divisor_spec[{i}]"),
                            format!("degree {} does not match n = {}", d.degree(), self.n),
                        ));
                    }
                }
            }
        }
        eigen::solver(&self.eigensolver)
            .map_err(|e| ConfigError::new("eigensolver", e.to_string()))?;
        if !(3..=63).contains(&self.moduli_l_max) {
            return Err(ConfigError::new("moduli_l_max", "must lie in 3..=63"));
        }
        if self.k_max == 0
            || (self.k_max + 1) * (self.k_max + 1)
                > (self.moduli_l_max + 1) * (self.moduli_l_max + 1) / 4
        {
            return Err(ConfigError::new(
                "k_max",
                "must be positive and well resolved by moduli_l_max",
            ));
        }
        if self.laxmilgram_instances == 0 {
            return Err(ConfigError::new("laxmilgram_instances", "must be positive"));
        }
        if self.laxmilgram_band == 0 {
            return Err(ConfigError::new("laxmilgram_band", "must be positive"));
        }
        if self.alpha_samples < 100 {
            return Err(ConfigError::new("alpha_samples", "must be at least 100"));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON, ignoring
    /// `output_dir`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    /// The divisors visited by sweeps, in a fixed order.
    pub fn resolve_divisors(&self) -> Vec<Divisor> {
        if self.n == 0 {
            return vec![Divisor::empty()];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out: Vec<Divisor> = match &self.divisor_spec {
            Some(DivisorSpec::Explicit(list)) => list
                .iter()
                .map(|p| Divisor::new(p.clone()).expect("validated divisor"))
                .collect(),
            Some(DivisorSpec::Random(s)) => {
                let count = random_count(s).expect("validated divisor spec");
                (0..count)
                    .map(|_| Divisor::random(self.n, &mut rng))
                    .collect()
            }
            None => (0..self.moduli_samples)
                .map(|_| Divisor::random(self.n, &mut rng))
                .collect(),
        };
        if self.adversarial {
            let p = Divisor::random(1, &mut rng).points()[0];
            let mut all = p;
            all.multiplicity = self.n;
            out.push(Divisor::new(vec![all]).expect("valid point"));
            if self.n >= 2 {
                let mut a = p;
                a.multiplicity = self.n - self.n / 2;
                let mut b = p.antipode();
                b.multiplicity = self.n / 2;
                out.push(Divisor::new(vec![a, b]).expect("valid points"));
            }
        }
        out
    }
}

fn random_count(spec: &str) -> Result<usize, ConfigError> {
    spec.strip_prefix("random:")
        .and_then(|c| c.parse::<usize>().ok())
        .filter(|&c| c > 0)
        .ok_or_else(|| {
            ConfigError::new(
                "divisor_spec",
                format!("expected \"random:<count>\" with count > 0, got {spec:?}"),
            )
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.resolve_divisors().len(), 10);
        assert_eq!(c.hash().len(), 16);
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            (r#"{"eps_list": [0.1, 0.2]}"#, "eps_list[1]"),
            (r#"{"eps_list": [1.5]}"#, "eps_list[0]"),
            (r#"{"l_max": "big"}"#, "l_max"),
            (r#"{"bogus": 1}"#, "bogus"),
            (r#"{"divisor_spec": "random:x"}"#, "divisor_spec"),
            (r#"{"divisor_spec": [[[0.5, 0.0, 2]]]}"#, "divisor_spec[0]"),
            (r#"{"eigensolver": "lanczos"}"#, "eigensolver"),
            (r#"{"rho_coeffs": [[1, 2, 0.1]]}"#, "rho_coeffs[0]"),
            (r#"{"seed": -1}"#, "seed"),
            ("{", "<root>"),
        ];
        for (text, field) in cases {
            let e = ExperimentConfig::from_json(text).unwrap_err();
            assert_eq!(e.field, field, "{text}: {e}");
            assert!(!e.to_string().contains('\n'));
        }
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output_dir = Some("/tmp/x".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = 7;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn divisor_resolution() {
        let mut c = ExperimentConfig {
            n: 3,
            divisor_spec: Some(DivisorSpec::Random("random:4".into())),
            adversarial: true,
            ..Default::default()
        };
        let d = c.resolve_divisors();
        assert_eq!(d.len(), 6);
        assert!(d.iter().all(|x| x.degree() == 3));
        assert_eq!(d, c.resolve_divisors());
        c.n = 0;
        assert_eq!(c.resolve_divisors(), vec![Divisor::empty()]);
    }
}
