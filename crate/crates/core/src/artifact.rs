//! Run-artifact persistence: canonical CSV/JSON writers and the per-run
//! directory layout `runs/<id>/{config.json, meta.json, *.csv}`.
//!
//! Output is byte-stable: fixed column order, '.'-decimal floats printed with
//! 17 significant digits, '\n' line endings, and no timestamps or absolute
//! paths in any artifact, so identical configs reproduce identical bytes.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Environment variable overriding the artifact root (default `./runs`).
pub const ARTIFACT_ROOT_ENV: &str = "GEOMINT_RUNS";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(v) => {
                debug_assert!(!v.contains(',') && !v.contains('\n'));
                v.clone()
            }
        }
    }
}

/// 17 significant digits, '.' decimal separator.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Write a table as CSV. An empty row list produces a header-only file.
pub fn write_csv(table: &Table, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        let rendered: Vec<String> = row.iter().map(Cell::render).collect();
        out.push_str(&rendered.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_json(value: &serde_json::Value, path: &Path) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Schema(format!("serialization failed: {e}")))?;
    body.push('\n');
    write_atomic(path, body.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Deserialize a JSON config; serde's message names the offending keys.
pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&body).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Everything needed to reproduce a run, written beside its outputs.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunArtifact {
    pub run_id: String,
    pub command: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub fingerprint: String,
    pub seed: u64,
}

impl RunArtifact {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        let run_id = format!("{command}-{:08x}", fnv1a(config.to_string().as_bytes()));
        RunArtifact {
            run_id,
            command: command.to_string(),
            config,
            outputs: Vec::new(),
            fingerprint: format!("geomint {}", env!("CARGO_PKG_VERSION")),
            seed,
        }
    }

    pub fn dir(&self, root: &Path) -> PathBuf {
        root.join(&self.run_id)
    }

    /// Write config.json and meta.json into the run directory.
    pub fn write(&self, root: &Path) -> Result<PathBuf> {
        let dir = self.dir(root);
        write_json(&self.config, &dir.join("config.json"))?;
        let meta = serde_json::to_value(self).map_err(|e| Error::Schema(e.to_string()))?;
        write_json(&meta, &dir.join("meta.json"))?;
        Ok(dir)
    }
}

fn fnv1a(bytes: &[u8]) -> u32 {
    let mut hash: u32 = 0x811c9dc5;
    for b in bytes {
        hash ^= *b as u32;
        hash = hash.wrapping_mul(0x01000193);
    }
    hash
}

/// Artifact root: `$GEOMINT_RUNS` or `./runs`.
pub fn artifact_root() -> PathBuf {
    std::env::var_os(ARTIFACT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("geomint-artifact-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn empty_table_writes_header_only() {
        let dir = tmpdir("header");
        let table = Table::new(&["step", "value"]);
        let path = dir.join("empty.csv");
        write_csv(&table, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "step,value\n");
    }

    #[test]
    fn floats_carry_seventeen_significant_digits() {
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
        assert_eq!(format_float(-0.1), "-1.0000000000000001e-1");
        let mut table = Table::new(&["x"]);
        table.push(vec![Cell::Float(std::f64::consts::PI)]);
        let dir = tmpdir("floats");
        let path = dir.join("pi.csv");
        write_csv(&table, &path).unwrap();
        let body = fs::read_to_string(&path).unwrap();
        assert_eq!(body, "x\n3.1415926535897931e0\n");
        // Round trip preserves the bits.
        let parsed: f64 = body.lines().nth(1).unwrap().parse().unwrap();
        assert_eq!(parsed, std::f64::consts::PI);
    }

    #[test]
    fn config_round_trip_preserves_fields() {
        use crate::resnet::{IntegratorTag, TrainConfig};
        let config = TrainConfig {
            layers: 50,
            dt: 0.075,
            gamma: 12.5,
            iterations: 5000,
            learning_rate: 0.05,
            integrator: IntegratorTag::Symplectic,
            tol: 1e-12,
            max_iter: 400,
            seed: 7,
        };
        let dir = tmpdir("config");
        let path = dir.join("config.json");
        write_json(&serde_json::to_value(&config).unwrap(), &path).unwrap();
        let back: TrainConfig = load_config(&path).unwrap();
        assert_eq!(serde_json::to_value(&config).unwrap(), serde_json::to_value(&back).unwrap());
    }

    #[test]
    fn malformed_config_reports_offending_key() {
        use crate::resnet::TrainConfig;
        let dir = tmpdir("schema");
        let path = dir.join("bad.json");
        fs::write(&path, b"{\"layers\": 50}").unwrap();
        let err = load_config::<TrainConfig>(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("missing field") && msg.contains("dt"), "got: {msg}");
    }

    #[test]
    fn rewriting_identical_content_is_byte_identical() {
        let dir = tmpdir("determinism");
        let mut table = Table::new(&["step", "value", "tag"]);
        for k in 0..10 {
            table.push(vec![
                Cell::Int(k),
                Cell::Float((k as f64).sin()),
                Cell::Text("run".into()),
            ]);
        }
        let a = dir.join("a.csv");
        let b = dir.join("b.csv");
        write_csv(&table, &a).unwrap();
        write_csv(&table, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn artifact_ids_depend_only_on_config() {
        let a = RunArtifact::new("rigid-body", serde_json::json!({"dt": 0.01, "steps": 100}), 1);
        let b = RunArtifact::new("rigid-body", serde_json::json!({"dt": 0.01, "steps": 100}), 1);
        let c = RunArtifact::new("rigid-body", serde_json::json!({"dt": 0.02, "steps": 100}), 1);
        assert_eq!(a.run_id, b.run_id);
        assert_ne!(a.run_id, c.run_id);
    }
}
