//! CSV and manifest output. Numbers are written with 17 significant digits
//! and a '.' decimal separator so every f64 round-trips exactly.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Format one f64 for CSV. `{:e}` prints the shortest exact form; padding
/// to a fixed width would only bloat the files.
pub fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Write one CSV file: a header row, then one row per record.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len(), "row width must match header");
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()
}

/// Sigma tag for file names: 0.01 -> "1", 0.005 -> "0p5", 0.03 -> "3".
/// Percent with 'p' for the decimal point keeps names portable.
pub fn sigma_tag(sigma: f64) -> String {
    let percent = sigma * 100.0;
    if (percent - percent.round()).abs() < 1e-9 {
        format!("{}", percent.round() as i64)
    } else {
        format!("{}", percent).replace('.', "p")
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool_version: &'static str,
    config_sha256: String,
    seed: u64,
    unit_convention: &'static str,
    integrator: IntegratorRecord,
    files: &'a [String],
    config: &'a serde_json::Value,
}

#[derive(Serialize)]
pub struct IntegratorRecord {
    pub method: &'static str,
    pub step_divisor: f64,
    pub time_samples: usize,
}

/// Write `manifest.json` next to the data files. The manifest pins
/// everything needed to reproduce the run: the resolved config (with its
/// hash), the seed, the unit convention, and the integrator settings.
pub fn write_manifest(
    dir: &Path,
    config: &serde_json::Value,
    seed: u64,
    integrator: IntegratorRecord,
    files: &[String],
) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let config_text = serde_json::to_string_pretty(config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(config_text.as_bytes());
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        config_sha256: format!("{:x}", hasher.finalize()),
        seed,
        unit_convention: "angular frequencies in rad/ns; configs in MHz; spectra in GHz; \
                          times in ns; flux in units of Phi_0",
        integrator: IntegratorRecord { method: "rk4", ..integrator },
        files,
        config,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_round_trips_exactly() {
        for v in [
            0.1,
            -3.0e-17,
            2.549587441775,
            f64::MIN_POSITIVE,
            1.0 / 3.0,
            123456789.123456789,
        ] {
            let s = fmt_f64(v);
            assert!(!s.contains(','), "decimal separator must be '.'");
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v, "{s} lost bits");
        }
    }

    #[test]
    fn sigma_tags() {
        assert_eq!(sigma_tag(0.01), "1");
        assert_eq!(sigma_tag(0.005), "0p5");
        assert_eq!(sigma_tag(0.03), "3");
        assert_eq!(sigma_tag(0.10), "10");
    }

    #[test]
    fn csv_and_manifest_round_trip() {
        let dir = std::env::temp_dir().join(format!("fluxsr-io-{}", std::process::id()));
        let csv = dir.join("curve.csv");
        write_csv(&csv, &["t", "y"], &[vec![0.0, 1.0], vec![0.5, 0.25]]).unwrap();
        let text = fs::read_to_string(&csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,y");
        assert_eq!(text.lines().count(), 3);

        let config = serde_json::json!({"seed": 42, "sigma": 0.01});
        let path = write_manifest(
            &dir,
            &config,
            42,
            IntegratorRecord { method: "rk4", step_divisor: 16.0, time_samples: 2000 },
            &["curve.csv".to_string()],
        )
        .unwrap();
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(manifest["seed"], 42);
        assert_eq!(manifest["config"]["sigma"], 0.01);
        assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
        assert!(manifest["unit_convention"].as_str().unwrap().contains("rad/ns"));
        fs::remove_dir_all(&dir).unwrap();
    }
}
