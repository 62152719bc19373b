//! JSON documents with a metadata block, and CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use wcc_core::Result;

/// `{"metadata": …, "result": …}` with the config and its hash.
pub fn document<T: Serialize>(command: &str, config: &Value, complete: Option<bool>, result: &T) -> Result<Value> {
    let canonical = serde_json::to_string(&json!({ "command": command, "config": config }))?;
    let hash = hex::encode(Sha256::digest(canonical.as_bytes()));
    Ok(json!({
        "metadata": {
            "tool": "wcc",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": config,
            "config_hash": hash,
            "complete": complete,
        },
        "result": result,
    }))
}

pub fn json_text(v: &Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// A CSV table with a header row and LF line endings.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let line = |cells: &[String]| cells.iter().map(|c| escape(c)).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "{}", line(&self.header));
        for r in &self.rows {
            let _ = writeln!(out, "{}", line(r));
        }
        out
    }
}

fn escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Shortest round-tripping representation.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quoting() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        assert_eq!(t.render(), "a,b\n1,\"x,y\"\n");
    }

    #[test]
    fn hash_depends_on_config_only() {
        let a = document("volume", &json!({"t": 1.0}), None, &1).unwrap();
        let b = document("volume", &json!({"t": 1.0}), None, &2).unwrap();
        let c = document("volume", &json!({"t": 2.0}), None, &1).unwrap();
        assert_eq!(a["metadata"]["config_hash"], b["metadata"]["config_hash"]);
        assert_ne!(a["metadata"]["config_hash"], c["metadata"]["config_hash"]);
    }
}
