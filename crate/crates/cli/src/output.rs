use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use crate::config::RunConfig;
use crate::{CliError, TOOL_NAME, VERSION};

pub const MANIFEST: &str = "manifest.json";

/// In-memory artifacts of one command, written together once everything
/// has been computed so a failing run leaves no partial output.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

/// Wrapper giving every JSON artifact the resolved config.
#[derive(Serialize)]
struct WithConfig<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    files: Vec<&'a str>,
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    #[cfg(test)]
    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    pub fn raw(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.retain(|(n, _)| n != name);
        self.files.push((name.to_string(), bytes));
    }

    pub fn json<T: Serialize>(&mut self, name: &str, cfg: &RunConfig, body: &T) -> Result<(), CliError> {
        let doc = WithConfig {
            tool: TOOL_NAME,
            version: VERSION,
            config: cfg,
            body,
        };
        let mut bytes = serde_json::to_vec_pretty(&doc)?;
        bytes.push(b'\n');
        self.raw(name, bytes);
        Ok(())
    }

    /// Header and rows as CSV. Headers name the unit in brackets.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        self.raw(name, bytes);
        Ok(())
    }

    /// Writes all files and the manifest into `cfg.out`.
    pub fn write(&self, cfg: &RunConfig, command: &str) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(&cfg.out)?;
        let mut written = Vec::with_capacity(self.files.len() + 1);
        for (name, bytes) in &self.files {
            let path = cfg.out.join(name);
            fs::write(&path, bytes)?;
            written.push(path);
        }
        let manifest = Manifest {
            tool: TOOL_NAME,
            version: VERSION,
            command,
            config: cfg,
            files: self.names().collect(),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        let path = cfg.out.join(MANIFEST);
        fs::write(&path, bytes)?;
        written.push(path);
        Ok(written)
    }
}

/// Shortest round-tripping decimal form, so CSV values parse back exactly.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.0, -2.5e-17, std::f64::consts::PI, 1.0 / 3.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut a = Artifacts::new();
        a.csv("t.csv", &["x [1]", "y [rad]"], &[vec![num(1.0), num(2.0)]]).unwrap();
        let text = String::from_utf8(a.get("t.csv").unwrap().to_vec()).unwrap();
        assert_eq!(text, "x [1],y [rad]\n1e0,2e0\n");
    }

    #[test]
    fn json_embeds_config() {
        let cfg = RunConfig::default();
        let mut a = Artifacts::new();
        a.json("r.json", &cfg, &serde_json::json!({"value": 3})).unwrap();
        let v: serde_json::Value = serde_json::from_slice(a.get("r.json").unwrap()).unwrap();
        assert_eq!(v["value"], 3);
        assert_eq!(v["config"]["seed"], 1);
        assert_eq!(v["tool"], TOOL_NAME);
    }

    #[test]
    fn later_files_replace_earlier_ones() {
        let mut a = Artifacts::new();
        a.raw("x", vec![1]);
        a.raw("x", vec![2]);
        assert_eq!(a.get("x"), Some(&[2u8][..]));
        assert_eq!(a.names().count(), 1);
    }
}
