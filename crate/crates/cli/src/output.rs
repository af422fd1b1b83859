//! Output directory handling. Every file goes through a temp file in the
//! same directory and is renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

pub struct OutDir {
    pub root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| io(root, e))?;
        Ok(OutDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(rel);
        let dir = path.parent().unwrap_or(&self.root).to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| io(&dir, e))?;
        tmp.write_all(bytes).map_err(|e| io(&path, e))?;
        tmp.as_file().sync_all().map_err(|e| io(&path, e))?;
        tmp.persist(&path).map_err(|e| io(&path, e.error))?;
        if !self.written.iter().any(|w| w == rel) {
            self.written.push(rel.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, v: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(v).expect("outputs serialize");
        s.push('\n');
        self.write(rel, s.as_bytes())
    }

    pub fn write_ndjson<T: Serialize>(&mut self, rel: &str, rows: &[T]) -> Result<(), CliError> {
        let mut s = String::new();
        for r in rows {
            s.push_str(&serde_json::to_string(r).expect("outputs serialize"));
            s.push('\n');
        }
        self.write(rel, s.as_bytes())
    }

    pub fn write_csv<T: Serialize>(&mut self, rel: &str, rows: &[T]) -> Result<(), CliError> {
        let bytes = csv_bytes(rows)?;
        self.write(rel, &bytes)
    }

    /// Files written so far, in order.
    pub fn files(&self) -> &[String] {
        &self.written
    }

    /// `manifest.json` listing the tool version, the resolved inputs and
    /// every file written before it.
    pub fn manifest(&mut self, verb: &str, argv: &[String], inputs: Value, fitted: Value) -> Result<(), CliError> {
        let m = json!({
            "tool": "serfati",
            "version": env!("CARGO_PKG_VERSION"),
            "verb": verb,
            "argv": argv,
            "inputs": inputs,
            "fitted_constants": fitted,
            "outputs": self.written,
        });
        self.write_json("manifest.json", &m)
    }
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn io(p: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", p.display()))
}

/// gnuplot script drawing the vorticity and a velocity quiver of one
/// snapshot CSV (columns x1,x2,u1,u2,omega,label1,label2).
pub fn gnuplot_script(csv_name: &str, title: &str, arrow_scale: f64) -> String {
    format!(
        "set datafile separator ','\n\
         set key off\n\
         set size ratio -1\n\
         set title '{title}'\n\
         set palette rgbformulae 33,13,10\n\
         plot '{csv_name}' every ::1 using 1:2:5 with points pt 5 ps 0.5 palette, \\\n\
         \x20    '{csv_name}' every 4::1 using 1:2:($3*{arrow_scale}):($4*{arrow_scale}) with vectors lc rgb 'black'\n"
    )
}
