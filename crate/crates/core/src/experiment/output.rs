use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::sphere::{GridFunction, SphereGrid};

/// Columns prepended to every CSV row.
pub const PROVENANCE_COLUMNS: [(&str, &str); 2] = [
    (
        "config_hash",
        "first 16 hex digits of the SHA-256 of the run configuration",
    ),
    ("l_max", "bandwidth of the surface grid"),
];

/// A CSV table with a fixed, documented column set.
#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    columns: Vec<(&'static str, &'static str)>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[(&'static str, &'static str)]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width for table {}",
            self.name
        );
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.0 == name)
    }

    fn schema(&self) -> serde_json::Value {
        let cols: Vec<_> = PROVENANCE_COLUMNS
            .iter()
            .chain(&self.columns)
            .map(|(n, d)| json!({ "name": n, "description": d }))
            .collect();
        json!({ "table": self.name, "file": format!("{}.csv", self.name), "columns": cols })
    }
}

/// Formats a float so that it round-trips exactly.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Where a run writes its artifacts.
#[derive(Clone, Debug)]
pub struct Sink {
    dir: PathBuf,
    config_hash: String,
    l_max: usize,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path, config_hash: &str, l_max: usize) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config_hash: config_hash.to_string(),
            l_max,
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Writes `<name>.csv` and `<name>.schema.json`.
    pub fn table(&mut self, t: &Table) -> std::io::Result<()> {
        let path = self.dir.join(format!("{}.csv", t.name));
        let mut w = csv::Writer::from_path(&path)?;
        let header: Vec<&str> = PROVENANCE_COLUMNS
            .iter()
            .chain(&t.columns)
            .map(|c| c.0)
            .collect();
        w.write_record(&header)?;
        let l = self.l_max.to_string();
        for row in &t.rows {
            let full = [self.config_hash.as_str(), l.as_str()]
                .into_iter()
                .chain(row.iter().map(String::as_str));
            w.write_record(full)?;
        }
        w.flush()?;
        self.written.push(path);
        self.json(&format!("{}.schema", t.name), &t.schema())
    }

    /// Writes pretty JSON to `<name>.json`.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let path = self.dir.join(format!("{name}.json"));
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }

    /// Dumps grid values as row-major `(n_theta, n_phi)` little-endian `f64`
    /// to `<name>.bin`, with a JSON sidecar `<name>.bin.json`.
    pub fn grid_function(
        &mut self,
        name: &str,
        grid: &SphereGrid,
        f: &GridFunction,
        description: &str,
    ) -> std::io::Result<()> {
        let path = self.dir.join(format!("{name}.bin"));
        let mut bytes = Vec::with_capacity(8 * f.len());
        for v in f.values() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::File::create(&path)?.write_all(&bytes)?;
        self.written.push(path);
        let sidecar = json!({
            "file": format!("{name}.bin"),
            "description": description,
            "dtype": "f64",
            "endianness": "little",
            "layout": "row-major",
            "shape": [grid.n_theta(), grid.n_phi()],
            "axes": ["theta (Gauss-Legendre, north to south)", "phi (uniform from 0)"],
            "theta": grid.theta(),
            "l_max": grid.l_max(),
            "config_hash": self.config_hash,
        });
        self.json(&format!("{name}.bin"), &sidecar)
    }
}

/// Reads a dump written by [`Sink::grid_function`].
pub fn read_grid_dump(path: &Path) -> std::io::Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_and_schema() {
        let dir = tempfile::tempdir().unwrap();
        let mut sink = Sink::new(dir.path(), "abc", 7).unwrap();
        let mut t = Table::new("demo", &[("x", "a value"), ("note", "text")]);
        t.push(vec![num(0.1), "a,b".into()]);
        sink.table(&t).unwrap();
        let text = fs::read_to_string(dir.path().join("demo.csv")).unwrap();
        assert_eq!(text, "config_hash,l_max,x,note\nabc,7,0.1,\"a,b\"\n");
        let schema: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("demo.schema.json")).unwrap())
                .unwrap();
        assert_eq!(schema["columns"].as_array().unwrap().len(), 4);
        assert_eq!(sink.written().len(), 2);
    }

    #[test]
    fn grid_dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = SphereGrid::new(5).unwrap();
        let f = GridFunction::from_fn(&g, |t, p| t.cos() + 0.1 * p);
        let mut sink = Sink::new(dir.path(), "h", 5).unwrap();
        sink.grid_function("f", &g, &f, "test").unwrap();
        let back = read_grid_dump(&dir.path().join("f.bin")).unwrap();
        assert_eq!(back, f.values());
        // row-major: second value is the next phi on the first ring
        let (t, p) = g.node(1);
        assert_eq!(back[1], t.cos() + 0.1 * p);
        assert!((p - g.phi()[1]).abs() == 0.0 && t == g.theta()[0]);
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1e-300, -3.5, 1.0 / 3.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }
}
