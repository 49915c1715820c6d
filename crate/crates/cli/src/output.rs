//! Artifact writers. Floats are printed with Rust's shortest round-trip
//! formatting, so identical results give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use nlwpi_core::SCHEMA_VERSION;

pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn text(&mut self, name: &str, body: &str) -> std::io::Result<()> {
        fs::write(self.dir.join(name), body)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let body = serde_json::to_string_pretty(value).map_err(std::io::Error::other)? + "\n";
        self.text(name, &body)
    }

    /// CSV with a `# nlwpi <kind> schema N` comment line before the header.
    pub fn csv(&mut self, name: &str, kind: &str, header: &[&str], rows: &[Vec<f64>]) -> std::io::Result<()> {
        let mut out = format!("# nlwpi {kind} schema {SCHEMA_VERSION}\n");
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(std::io::Error::other)?;
        for r in rows {
            w.write_record(r.iter().map(|v| v.to_string())).map_err(std::io::Error::other)?;
        }
        out.push_str(&String::from_utf8(w.into_inner().map_err(std::io::Error::other)?).expect("csv output is utf-8"));
        self.text(name, &out)
    }
}

/// [re, im] pair for JSON.
pub fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// gnuplot matrix block: `x y z` lines, a blank line after each x.
pub fn gnuplot_blocks(xs: &[f64], ys: &[f64], z: impl Fn(usize, usize) -> f64) -> String {
    let mut s = String::new();
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            let _ = writeln!(s, "{x} {y} {}", z(i, j));
        }
        s.push('\n');
    }
    s
}
