//! JSON run configuration: one flat schema shared by every subcommand.
//!
//! Keys carry their unit in the name (`_mhz`, `_ghz`); internally every
//! dynamics frequency becomes angular rad/ns (multiply MHz by 2 pi 1e-3)
//! while circuit energies stay in plain GHz. Unknown keys are rejected so a
//! typo cannot silently fall back to a default, and the fully resolved
//! values are echoed into the run manifest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{CircuitError, JunctionSet};
use crate::dynamics::{DriveSpec, DynamicsError, SpinModel};
use crate::ensemble::{EnsembleError, KdeConfig, SamplingConfig};

/// MHz (plain frequency) to rad/ns (angular).
pub const MHZ_TO_RAD_NS: f64 = 2.0 * std::f64::consts::PI * 1e-3;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_MEAN_ALPHA: f64 = 0.7;
pub const DEFAULT_ENSEMBLE_SIZE: usize = 10_000;
pub const DEFAULT_BANDWIDTH_GHZ: f64 = 0.1;
pub const DEFAULT_EJ_GHZ: f64 = 200.0;
pub const DEFAULT_EJ_OVER_EC: f64 = 75.0;
pub const DEFAULT_BASIS_CUTOFF: usize = 12;
pub const DEFAULT_FLUX_MIN: f64 = 0.494;
pub const DEFAULT_FLUX_MAX: f64 = 0.506;
pub const DEFAULT_FLUX_GRID: usize = 121;
pub const DEFAULT_N_QUBITS: usize = 10;
pub const DEFAULT_OMEGA_BAR_MHZ: f64 = 5000.0;
pub const DEFAULT_DELTA_OMEGA_MHZ: f64 = 25.0;
pub const DEFAULT_PHOTON_CUTOFF: usize = 10;
pub const DEFAULT_REALIZATIONS: usize = 100;
pub const DEFAULT_TIME_SAMPLES: usize = 2000;
/// Fastest dynamical scale divided by this gives the RK4 step. Eight
/// resolves the sharpest collective burst at N = 10 to about 2e-3 in the
/// peak (quartering the step moves it by that much), far inside the
/// realization scatter anything downstream consumes.
pub const DEFAULT_STEP_DIVISOR: f64 = 8.0;
/// Decay window in units of the single-excitation superradiance time. The
/// emission peak sits at a small fraction of one unit (t = 0 below half
/// filling), so two units bracket it with an order-of-magnitude margin;
/// the subradiant remainder trickles out over far longer than any
/// practical window and carries no further information about the peak.
pub const DEFAULT_DECAY_WINDOW_SR: f64 = 2.0;
pub const DEFAULT_LAMBDA_SWEEP_MHZ: [f64; 7] =
    [10.0, 25.0, 50.0, 100.0, 200.0, 400.0, 800.0];
/// Fabrication-spread settings covered by the broadening suite.
pub const DEFAULT_SIGMA_SUITE: [f64; 3] = [0.005, 0.01, 0.02];

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("missing required field `{field}` for {context}")]
    Missing { field: &'static str, context: &'static str },
    #[error("field `{field}` = {value} violates {requirement}")]
    Invalid { field: &'static str, value: f64, requirement: &'static str },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Raw key-value document; every field optional so one file can serve any
/// subcommand, with requiredness enforced per accessor.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<String>,
    pub threads: Option<usize>,

    // single-circuit spectrum
    pub alpha: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub ej_ghz: Option<f64>,
    pub ej_over_ec: Option<f64>,
    pub basis_cutoff: Option<usize>,
    pub n_levels: Option<usize>,

    // ensemble sampling and flux optimization
    /// Shorthand setting sigma_s, sigma_l1 and sigma_l2 at once.
    pub sigma: Option<f64>,
    /// Spread settings for the broadening suite (each applied to all three
    /// junction parameters); defaults to 0.5%, 1% and 2%.
    pub sigmas: Option<Vec<f64>>,
    pub sigma_s: Option<f64>,
    pub sigma_l1: Option<f64>,
    pub sigma_l2: Option<f64>,
    pub mean_alpha: Option<f64>,
    pub ensemble_size: Option<usize>,
    pub kde_bandwidth_ghz: Option<f64>,
    pub flux_min: Option<f64>,
    pub flux_max: Option<f64>,
    pub flux_grid: Option<usize>,

    // cavity dynamics
    pub n_qubits: Option<usize>,
    pub omega_bar_mhz: Option<f64>,
    pub delta_omega_mhz: Option<f64>,
    pub g_mhz: Option<f64>,
    pub kappa_mhz: Option<f64>,
    pub cavity_detuning_mhz: Option<f64>,
    pub photon_cutoff: Option<usize>,
    pub m_values: Option<Vec<usize>>,
    pub lambda_max_mhz: Option<Vec<f64>>,
    pub drive_detuning_mhz: Option<f64>,
    pub realizations: Option<usize>,
    pub step_divisor: Option<f64>,
    pub time_samples: Option<usize>,
}

/// Spin-model template: everything but the per-realization frequency draws.
#[derive(Clone, Debug, Serialize)]
pub struct SpinTemplate {
    pub n: usize,
    /// rad/ns
    pub omega_bar: f64,
    /// rad/ns
    pub delta_omega: f64,
    /// rad/ns
    pub omega_c: f64,
    /// rad/ns
    pub g: f64,
    /// rad/ns
    pub kappa: f64,
}

impl SpinTemplate {
    /// Bind concrete qubit frequencies (rad/ns) drawn for one realization.
    pub fn realize(&self, omegas: Vec<f64>) -> Result<SpinModel, DynamicsError> {
        SpinModel::new(omegas, self.omega_bar, self.delta_omega, self.omega_c, self.g, self.kappa)
    }

    /// The homogeneous model with every qubit at the ensemble mean.
    pub fn homogeneous(&self) -> Result<SpinModel, DynamicsError> {
        self.realize(vec![self.omega_bar; self.n])
    }
}

/// Integration controls resolved from the config.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StepPolicy {
    pub divisor: f64,
    pub time_samples: usize,
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text, &path.display().to_string())
}

pub fn parse_config(text: &str, label: &str) -> Result<RunConfig, ConfigError> {
    serde_json::from_str(text).map_err(|source| ConfigError::Parse {
        path: label.to_string(),
        source,
    })
}

fn require(field: &'static str, v: Option<f64>, context: &'static str) -> Result<f64, ConfigError> {
    v.ok_or(ConfigError::Missing { field, context })
}

fn positive(field: &'static str, value: f64) -> Result<f64, ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ConfigError::Invalid { field, value, requirement: "finite and positive" })
    }
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn out_dir(&self) -> &str {
        self.out_dir.as_deref().unwrap_or("out")
    }

    pub fn basis_cutoff(&self) -> usize {
        self.basis_cutoff.unwrap_or(DEFAULT_BASIS_CUTOFF)
    }

    /// Junction sampling section; needs at least one sigma key.
    pub fn sampling(&self) -> Result<SamplingConfig, ConfigError> {
        let any = self.sigma.or(self.sigma_s).or(self.sigma_l1).or(self.sigma_l2);
        if any.is_none() {
            return Err(ConfigError::Missing { field: "sigma", context: "ensemble sampling" });
        }
        let base = self.sigma.unwrap_or(0.0);
        let cfg = SamplingConfig {
            mean_alpha: self.mean_alpha.unwrap_or(DEFAULT_MEAN_ALPHA),
            sigma_s: self.sigma_s.unwrap_or(base),
            sigma_l1: self.sigma_l1.unwrap_or(base),
            sigma_l2: self.sigma_l2.unwrap_or(base),
            n_qubits: self.ensemble_size.unwrap_or(DEFAULT_ENSEMBLE_SIZE),
            seed: self.seed(),
            ej_ghz: self.ej_ghz.unwrap_or(DEFAULT_EJ_GHZ),
            ej_over_ec: self.ej_over_ec.unwrap_or(DEFAULT_EJ_OVER_EC),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Junction parameters for single-device spectra.
    pub fn junctions(&self) -> Result<JunctionSet, ConfigError> {
        Ok(JunctionSet::new(
            self.alpha.unwrap_or(DEFAULT_MEAN_ALPHA),
            self.beta1.unwrap_or(1.0),
            self.beta2.unwrap_or(1.0),
            self.ej_ghz.unwrap_or(DEFAULT_EJ_GHZ),
            self.ej_over_ec.unwrap_or(DEFAULT_EJ_OVER_EC),
        )?)
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels.unwrap_or(2)
    }

    /// Spread settings for the broadening suite, most to least uniform.
    pub fn sigma_suite(&self) -> Result<Vec<f64>, ConfigError> {
        let mut sigmas = match (&self.sigmas, self.sigma) {
            (Some(list), _) => list.clone(),
            (None, Some(one)) => vec![one],
            (None, None) => DEFAULT_SIGMA_SUITE.to_vec(),
        };
        if sigmas.is_empty() {
            return Err(ConfigError::Invalid {
                field: "sigmas",
                value: 0.0,
                requirement: "at least one spread setting",
            });
        }
        for &s in &sigmas {
            if !(s.is_finite() && s > 0.0) {
                return Err(ConfigError::Invalid {
                    field: "sigmas",
                    value: s,
                    requirement: "finite and positive",
                });
            }
        }
        sigmas.sort_by(|a, b| a.partial_cmp(b).expect("finite sigmas"));
        Ok(sigmas)
    }

    /// Sampling config with one common spread on all three parameters; the
    /// seed is shared across settings so they differ only in the spread.
    pub fn sampling_for(&self, sigma: f64) -> Result<SamplingConfig, ConfigError> {
        let cfg = SamplingConfig {
            mean_alpha: self.mean_alpha.unwrap_or(DEFAULT_MEAN_ALPHA),
            sigma_s: sigma,
            sigma_l1: sigma,
            sigma_l2: sigma,
            n_qubits: self.ensemble_size.unwrap_or(DEFAULT_ENSEMBLE_SIZE),
            seed: self.seed(),
            ej_ghz: self.ej_ghz.unwrap_or(DEFAULT_EJ_GHZ),
            ej_over_ec: self.ej_over_ec.unwrap_or(DEFAULT_EJ_OVER_EC),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn kde(&self) -> Result<KdeConfig, ConfigError> {
        let bandwidth =
            positive("kde_bandwidth_ghz", self.kde_bandwidth_ghz.unwrap_or(DEFAULT_BANDWIDTH_GHZ))?;
        Ok(KdeConfig { bandwidth })
    }

    pub fn flux_scan(&self) -> Result<((f64, f64), usize), ConfigError> {
        let lo = self.flux_min.unwrap_or(DEFAULT_FLUX_MIN);
        let hi = self.flux_max.unwrap_or(DEFAULT_FLUX_MAX);
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(ConfigError::Invalid {
                field: "flux_min/flux_max",
                value: hi - lo,
                requirement: "flux_min < flux_max, both finite",
            });
        }
        let grid = self.flux_grid.unwrap_or(DEFAULT_FLUX_GRID);
        if grid < 3 {
            return Err(ConfigError::Invalid {
                field: "flux_grid",
                value: grid as f64,
                requirement: "at least 3 points",
            });
        }
        Ok(((lo, hi), grid))
    }

    /// Cavity-dynamics section; `g_mhz` and `kappa_mhz` have no defaults.
    pub fn spin_template(&self, context: &'static str) -> Result<SpinTemplate, ConfigError> {
        let g = positive("g_mhz", require("g_mhz", self.g_mhz, context)?)?;
        let kappa = positive("kappa_mhz", require("kappa_mhz", self.kappa_mhz, context)?)?;
        let omega_bar =
            positive("omega_bar_mhz", self.omega_bar_mhz.unwrap_or(DEFAULT_OMEGA_BAR_MHZ))?;
        let delta_omega = self.delta_omega_mhz.unwrap_or(DEFAULT_DELTA_OMEGA_MHZ);
        if !(delta_omega.is_finite() && delta_omega >= 0.0) {
            return Err(ConfigError::Invalid {
                field: "delta_omega_mhz",
                value: delta_omega,
                requirement: "finite and nonnegative",
            });
        }
        let detuning = self.cavity_detuning_mhz.unwrap_or(0.0);
        if !detuning.is_finite() {
            return Err(ConfigError::Invalid {
                field: "cavity_detuning_mhz",
                value: detuning,
                requirement: "finite",
            });
        }
        let n = self.n_qubits.unwrap_or(DEFAULT_N_QUBITS);
        Ok(SpinTemplate {
            n,
            omega_bar: omega_bar * MHZ_TO_RAD_NS,
            delta_omega: delta_omega * MHZ_TO_RAD_NS,
            omega_c: (omega_bar + detuning) * MHZ_TO_RAD_NS,
            g: g * MHZ_TO_RAD_NS,
            kappa: kappa * MHZ_TO_RAD_NS,
        })
    }

    /// Drive pulses for the sweep, one per requested peak amplitude.
    pub fn drive_sweep(&self, template: &SpinTemplate) -> Result<Vec<DriveSpec>, ConfigError> {
        let detuning = self.drive_detuning_mhz.unwrap_or(0.0);
        if !detuning.is_finite() {
            return Err(ConfigError::Invalid {
                field: "drive_detuning_mhz",
                value: detuning,
                requirement: "finite",
            });
        }
        let omega_d = template.omega_bar + detuning * MHZ_TO_RAD_NS;
        let lambdas = self
            .lambda_max_mhz
            .clone()
            .unwrap_or_else(|| DEFAULT_LAMBDA_SWEEP_MHZ.to_vec());
        if lambdas.is_empty() {
            return Err(ConfigError::Invalid {
                field: "lambda_max_mhz",
                value: 0.0,
                requirement: "at least one amplitude",
            });
        }
        lambdas
            .iter()
            .map(|&l| {
                let l = positive("lambda_max_mhz", l)?;
                Ok(DriveSpec::new(l * MHZ_TO_RAD_NS, omega_d)?)
            })
            .collect()
    }

    pub fn m_values(&self, n: usize) -> Result<Vec<usize>, ConfigError> {
        let ms = self.m_values.clone().unwrap_or_else(|| (1..=n).collect());
        for &m in &ms {
            if m == 0 || m > n {
                return Err(ConfigError::Invalid {
                    field: "m_values",
                    value: m as f64,
                    requirement: "1 <= M <= n_qubits",
                });
            }
        }
        Ok(ms)
    }

    pub fn realizations(&self) -> Result<usize, ConfigError> {
        let r = self.realizations.unwrap_or(DEFAULT_REALIZATIONS);
        if r == 0 {
            return Err(ConfigError::Invalid {
                field: "realizations",
                value: 0.0,
                requirement: "at least 1",
            });
        }
        Ok(r)
    }

    pub fn step_policy(&self) -> Result<StepPolicy, ConfigError> {
        let divisor = positive("step_divisor", self.step_divisor.unwrap_or(DEFAULT_STEP_DIVISOR))?;
        let time_samples = self.time_samples.unwrap_or(DEFAULT_TIME_SAMPLES);
        if time_samples < 2 {
            return Err(ConfigError::Invalid {
                field: "time_samples",
                value: time_samples as f64,
                requirement: "at least 2",
            });
        }
        Ok(StepPolicy { divisor, time_samples })
    }

    pub fn photon_cutoff(&self) -> usize {
        self.photon_cutoff.unwrap_or(DEFAULT_PHOTON_CUTOFF)
    }

    /// Fully resolved view for the manifest: what this run actually used.
    pub fn resolved(&self) -> serde_json::Value {
        serde_json::json!({
            "seed": self.seed(),
            "out_dir": self.out_dir(),
            "basis_cutoff": self.basis_cutoff(),
            "sampling": self.sampling().ok(),
            "kde_bandwidth_ghz": self.kde_bandwidth_ghz.unwrap_or(DEFAULT_BANDWIDTH_GHZ),
            "flux_scan": self.flux_scan().ok(),
            "spin_template": self.spin_template("manifest").ok(),
            "m_values": self.n_qubits.map(|n| self.m_values(n).ok()),
            "lambda_max_mhz": self.lambda_max_mhz.clone()
                .unwrap_or_else(|| DEFAULT_LAMBDA_SWEEP_MHZ.to_vec()),
            "realizations": self.realizations().ok(),
            "step_policy": self.step_policy().ok(),
            "photon_cutoff": self.photon_cutoff(),
            "unit_convention": "inputs MHz/GHz as suffixed; dynamics in rad/ns",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_sigma_config_fills_documented_defaults() {
        let cfg = parse_config(r#"{"sigma": 0.01}"#, "test").unwrap();
        let s = cfg.sampling().unwrap();
        assert_eq!(s.mean_alpha, 0.7);
        assert_eq!(s.n_qubits, 10_000);
        assert_eq!(s.sigma_s, 0.01);
        assert_eq!(s.sigma_l1, 0.01);
        assert_eq!(s.sigma_l2, 0.01);
        assert_eq!(s.ej_ghz, 200.0);
        assert_eq!(cfg.kde().unwrap().bandwidth, 0.1);
        let ((lo, hi), grid) = cfg.flux_scan().unwrap();
        assert_eq!((lo, hi, grid), (0.494, 0.506, 121));
    }

    #[test]
    fn individual_sigmas_override_the_shorthand() {
        let cfg = parse_config(r#"{"sigma": 0.01, "sigma_l2": 0.02}"#, "test").unwrap();
        let s = cfg.sampling().unwrap();
        assert_eq!(s.sigma_s, 0.01);
        assert_eq!(s.sigma_l2, 0.02);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config(r#"{"sigma": 0.01, "sgima_s": 0.02}"#, "test").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sgima_s"), "unhelpful message: {msg}");
    }

    #[test]
    fn missing_kappa_is_named() {
        let cfg = parse_config(r#"{"g_mhz": 50.0}"#, "test").unwrap();
        let err = cfg.spin_template("superradiance").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("kappa_mhz") && msg.contains("superradiance"), "{msg}");
    }

    #[test]
    fn negative_g_is_rejected() {
        let cfg = parse_config(r#"{"g_mhz": -50.0, "kappa_mhz": 400.0}"#, "test").unwrap();
        let err = cfg.spin_template("superradiance").unwrap_err();
        assert!(err.to_string().contains("g_mhz"));
    }

    #[test]
    fn angular_conversion_applies_to_every_rate() {
        let cfg = parse_config(
            r#"{"g_mhz": 50.0, "kappa_mhz": 400.0, "delta_omega_mhz": 25.0,
                "omega_bar_mhz": 5000.0, "cavity_detuning_mhz": 100.0, "n_qubits": 4}"#,
            "test",
        )
        .unwrap();
        let t = cfg.spin_template("test").unwrap();
        let k = MHZ_TO_RAD_NS;
        assert!((t.g - 50.0 * k).abs() < 1e-15);
        assert!((t.kappa - 400.0 * k).abs() < 1e-15);
        assert!((t.delta_omega - 25.0 * k).abs() < 1e-15);
        assert!((t.omega_c - t.omega_bar - 100.0 * k).abs() < 1e-12);
        let model = t.homogeneous().unwrap();
        assert_eq!(model.n_qubits(), 4);
        assert!((model.chi() - 100.0 * k).abs() < 1e-12);
    }

    #[test]
    fn drive_sweep_defaults_cover_twenty_linewidths() {
        let cfg = parse_config(r#"{"g_mhz": 50.0, "kappa_mhz": 400.0}"#, "test").unwrap();
        let t = cfg.spin_template("test").unwrap();
        let drives = cfg.drive_sweep(&t).unwrap();
        assert_eq!(drives.len(), DEFAULT_LAMBDA_SWEEP_MHZ.len());
        let strongest = drives.last().unwrap();
        assert!(strongest.lambda_max >= 20.0 * t.delta_omega);
        assert_eq!(strongest.omega_d, t.omega_bar);
    }

    #[test]
    fn m_values_validated_against_qubit_count() {
        let cfg = parse_config(r#"{"m_values": [1, 11]}"#, "test").unwrap();
        assert!(cfg.m_values(10).is_err());
        let cfg = parse_config("{}", "test").unwrap();
        assert_eq!(cfg.m_values(3).unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn parse_error_carries_position() {
        let err = parse_config("{\n  \"sigma\": oops\n}", "bad.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.json") && msg.contains("line"), "{msg}");
    }
}
