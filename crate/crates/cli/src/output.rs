//! Artifact writers: array files, PGM previews, text tables, manifests.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use manifold_recon::array::{read_array, write_array, NdArray};
use nalgebra::DMatrix;
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Output directory that records every file it writes and refuses to
/// write the same name twice.
pub struct Stage {
    dir: PathBuf,
    name: String,
    written: BTreeSet<String>,
}

impl Stage {
    pub fn new(dir: &Path, name: &str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            name: name.to_string(),
            written: BTreeSet::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn claim(&mut self, file: &str) -> Result<PathBuf> {
        if !self.written.insert(file.to_string()) {
            return Err(CliError::PathCollision(format!("{file} written twice in stage {}", self.name)));
        }
        Ok(self.dir.join(file))
    }

    pub fn complex(&mut self, file: &str, m: &DMatrix<Complex64>) -> Result<()> {
        let path = self.claim(file)?;
        write_array(path, &NdArray::from_complex_matrix(m)?)?;
        Ok(())
    }

    pub fn real(&mut self, file: &str, m: &DMatrix<f64>) -> Result<()> {
        let path = self.claim(file)?;
        write_array(path, &NdArray::from_real_matrix(m)?)?;
        Ok(())
    }

    pub fn vector(&mut self, file: &str, v: &[f64]) -> Result<()> {
        let path = self.claim(file)?;
        write_array(path, &NdArray::from_real_vec(v)?)?;
        Ok(())
    }

    pub fn text(&mut self, file: &str, body: &str) -> Result<()> {
        let path = self.claim(file)?;
        fs::write(path, body)?;
        Ok(())
    }

    /// Magnitude preview windowed to `[lo, hi]` (min-max when `None`), with
    /// the window in `<file>.window.txt`.
    pub fn pgm(&mut self, file: &str, img: &[Complex64], grid: usize, window: Option<(f64, f64)>) -> Result<()> {
        let mag: Vec<f64> = img.iter().map(|v| v.norm()).collect();
        let (lo, hi) = window.unwrap_or_else(|| {
            mag.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
        });
        let path = self.claim(file)?;
        fs::write(path, encode_pgm(&mag, grid, lo, hi))?;
        let side = self.claim(&format!("{file}.window.txt"))?;
        fs::write(side, format!("min {lo:e}\nmax {hi:e}\n"))?;
        Ok(())
    }

    /// Writes `manifest_<stage>.txt` with the config echo and a SHA-256 line
    /// per output, sorted by file name.
    pub fn finish(mut self, config_echo: &str) -> Result<PathBuf> {
        let mut body = String::new();
        let _ = writeln!(body, "tool {TOOL_VERSION}");
        let _ = writeln!(body, "stage {}", self.name);
        body.push_str("\n[config]\n");
        body.push_str(config_echo);
        body.push_str("\n[outputs]\n");
        for f in &self.written {
            let bytes = fs::read(self.dir.join(f))?;
            let _ = writeln!(body, "{}  {f}", sha256_hex(&bytes));
        }
        let file = format!("manifest_{}.txt", self.name);
        let path = self.claim(&file)?;
        fs::write(&path, body)?;
        Ok(path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode_pgm(mag: &[f64], grid: usize, lo: f64, hi: f64) -> Vec<u8> {
    let mut out = format!("P5\n{grid} {grid}\n255\n").into_bytes();
    let span = hi - lo;
    out.extend(mag.iter().map(|&v| {
        if !(span > 0.0) {
            0
        } else {
            (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8
        }
    }));
    out
}

pub fn read_complex(dir: &Path, file: &str, stage: &'static str) -> Result<DMatrix<Complex64>> {
    Ok(load(dir, file, stage)?.to_complex_matrix()?)
}

pub fn read_real(dir: &Path, file: &str, stage: &'static str) -> Result<DMatrix<f64>> {
    Ok(load(dir, file, stage)?.to_real_matrix()?)
}

pub fn read_vector(dir: &Path, file: &str, stage: &'static str) -> Result<Vec<f64>> {
    Ok(load(dir, file, stage)?.to_real_vec()?)
}

fn load(dir: &Path, file: &str, stage: &'static str) -> Result<NdArray> {
    let path = dir.join(file);
    if !path.exists() {
        return Err(CliError::MissingInput {
            path: path.display().to_string(),
            stage,
        });
    }
    Ok(read_array(path)?)
}

/// Comma-separated table with a header row.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_layout_and_window() {
        let p = encode_pgm(&[0.0, 1.0, 2.0, 4.0], 2, 0.0, 2.0);
        assert!(p.starts_with(b"P5\n2 2\n255\n"));
        assert_eq!(&p[p.len() - 4..], &[0, 128, 255, 255]);
        let flat = encode_pgm(&[3.0; 4], 2, 3.0, 3.0);
        assert_eq!(&flat[flat.len() - 4..], &[0; 4]);
    }

    #[test]
    fn stage_refuses_duplicates_and_hashes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Stage::new(dir.path(), "demo").unwrap();
        s.text("a.txt", "hello").unwrap();
        assert!(matches!(s.text("a.txt", "again"), Err(CliError::PathCollision(_))));
        let m = s.finish("x = 1\n").unwrap();
        let body = fs::read_to_string(m).unwrap();
        assert!(body.contains("2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824  a.txt"));
        assert!(body.contains("x = 1"));
    }

    #[test]
    fn missing_inputs_name_the_stage() {
        let dir = tempfile::tempdir().unwrap();
        let e = read_complex(dir.path(), "nope.bstm", "simulate").unwrap_err();
        assert!(e.to_string().contains("simulate"));
    }
}
