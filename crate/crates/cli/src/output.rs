//! Report rendering and atomic output.

use std::io::Write;
use std::path::Path;

use fbmlab_core::{Error, Result};
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    /// Binary path dump, `simulate` only.
    Bin,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Bin => "bin",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "bin" => Ok(Format::Bin),
            other => Err(Error::Config(format!("unknown format '{other}' (csv|json|bin)"))),
        }
    }
}

/// `{"operation": op, ..fields of body}`.
pub fn tagged<T: Serialize>(op: &str, body: &T) -> Result<Value> {
    let mut v = serde_json::to_value(body).map_err(|e| Error::Format(e.to_string()))?;
    match &mut v {
        Value::Object(map) => {
            map.insert("operation".into(), Value::String(op.into()));
            Ok(v)
        }
        _ => Err(Error::Format(format!("{op} report is not an object"))),
    }
}

pub fn json_bytes(v: &Value) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v).map_err(|e| Error::Format(e.to_string()))?;
    s.push(b'\n');
    Ok(s)
}

/// Rows of plain numbers/strings; floats use shortest round-trip formatting.
pub struct Csv {
    out: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv { out: header.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.out.push_str(&cells.join(","));
        self.out.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.out.into_bytes()
    }
}

/// Writes through a temp file in the target directory, then renames over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_objects() {
        let v = tagged("mean", &serde_json::json!({ "value": 1.0 })).unwrap();
        assert_eq!(v["operation"], "mean");
        assert!(tagged("x", &[1, 2]).is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn csv_rows() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(&["1".into(), "0.5".into()]);
        assert_eq!(String::from_utf8(c.into_bytes()).unwrap(), "a,b\n1,0.5\n");
    }
}
