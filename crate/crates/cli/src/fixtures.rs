//! Committed fixture datasets: a null sample (bivariate standard normal)
//! and a planted alternative (one column replaced by cubed normals, a
//! heavily skewed and kurtotic direction). Regeneration is byte-exact:
//! stream 0 of the seed drives the null file, stream 1 the planted file,
//! rows drawn row-major, values written in shortest round-trip form.

use pptube::mc::rep_rng;
use rand::Rng;
use rand_distr::StandardNormal;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const FIXTURE_SEED: u64 = 7_031_962;
pub const FIXTURE_N: usize = 500;

pub const NULL_NAME: &str = "null_n500_q2.csv";
pub const PLANTED_NAME: &str = "planted_n500_q2.csv";

pub fn render_null(seed: u64) -> String {
    let mut rng = rep_rng(seed, 0);
    let mut out = String::from("x1,x2\n");
    for _ in 0..FIXTURE_N {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        out.push_str(&format!("{a},{b}\n"));
    }
    out
}

pub fn render_planted(seed: u64) -> String {
    let mut rng = rep_rng(seed, 1);
    let mut out = String::from("x1,x2\n");
    for _ in 0..FIXTURE_N {
        let z: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        let cubed = z * z * z;
        out.push_str(&format!("{cubed},{b}\n"));
    }
    out
}

pub fn write_fixtures(dir: &Path, seed: u64) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, content) in [
        (NULL_NAME, render_null(seed)),
        (PLANTED_NAME, render_planted(seed)),
    ] {
        let path = dir.join(name);
        let mut file = std::fs::File::create(&path)?;
        file.write_all(content.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
