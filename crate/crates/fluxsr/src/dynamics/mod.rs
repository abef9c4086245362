//! Collective spin dynamics of the qubit ensemble coupled to a lossy cavity.
//!
//! Everything in here works in angular frequency, rad/ns. With that
//! convention `1/rate` is a time in ns and `exp(-i H t)` needs no extra
//! factors; the config layer converts laboratory MHz values on the way in.
//!
//! Computational basis: row/column index is a bitstring, bit `j` is qubit
//! `j`, set bits are excited. The cavity, where present, is the trailing
//! tensor factor.

pub mod drive;
pub mod lindblad;
pub mod model;
pub mod ops;
pub mod sector;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::sparse::CsrMatrix;

/// Sparse operator on the qubit (or qubit-cavity) Hilbert space.
pub type OperatorMatrix = CsrMatrix;
/// Dense density matrix.
pub type StateMatrix = Array2<C64>;

/// Beyond this the dense density matrix alone passes a gigabyte.
pub const MAX_QUBITS: usize = 14;

#[derive(Error, Debug)]
pub enum DynamicsError {
    #[error("{what}: {field} = {value} violates {requirement}")]
    BadModel { what: &'static str, field: &'static str, value: f64, requirement: &'static str },
    #[error("qubit count {n} outside supported range 1..={max}")]
    QubitCount { n: usize, max: usize },
    #[error("full qubit-cavity model limited to {max_qubits} qubits and {max_photons} photons, got N={n}, cutoff={cutoff}")]
    CavityGuard { n: usize, cutoff: usize, max_qubits: usize, max_photons: usize },
    #[error("operator dimension {got} does not match state dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dispersive model undefined on resonance (cavity detuning is zero)")]
    ZeroDetuning,
    #[error("trace drifted to |tr rho - 1| = {drift:.3e} at t = {t} ns with step {step} ns; halve the step")]
    TraceDrift { t: f64, drift: f64, step: f64 },
    #[error("hermiticity drifted to max|rho - rho^dag| = {drift:.3e} at t = {t} ns with step {step} ns; halve the step")]
    HermiticityDrift { t: f64, drift: f64, step: f64 },
    #[error("step refinement exhausted after {attempts} halvings (last step {step} ns)")]
    RefinementExhausted { attempts: usize, step: f64 },
}

/// Ensemble-plus-cavity parameters, all angular frequencies in rad/ns.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpinModel {
    pub omegas: Vec<f64>,
    /// Configured ensemble mean (the rotating-frame reference), not
    /// recomputed from `omegas`.
    pub omega_bar: f64,
    /// Configured frequency spread (standard deviation).
    pub delta_omega: f64,
    pub omega_c: f64,
    pub g: f64,
    pub kappa: f64,
    /// Whether the adiabatic elimination is comfortably justified:
    /// kappa at least 10x both delta_omega and g^2 N / kappa. Recorded at
    /// construction; callers may warn but nothing is forbidden.
    pub bad_cavity_regime: bool,
}

impl SpinModel {
    pub fn new(
        omegas: Vec<f64>,
        omega_bar: f64,
        delta_omega: f64,
        omega_c: f64,
        g: f64,
        kappa: f64,
    ) -> Result<Self, DynamicsError> {
        if omegas.is_empty() || omegas.len() > MAX_QUBITS {
            return Err(DynamicsError::QubitCount { n: omegas.len(), max: MAX_QUBITS });
        }
        let positive = |field: &'static str, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(DynamicsError::BadModel {
                    what: "spin model",
                    field,
                    value,
                    requirement: "finite and positive",
                })
            }
        };
        positive("g", g)?;
        positive("kappa", kappa)?;
        if delta_omega < 0.0 || !delta_omega.is_finite() {
            return Err(DynamicsError::BadModel {
                what: "spin model",
                field: "delta_omega",
                value: delta_omega,
                requirement: "finite and nonnegative",
            });
        }
        let n = omegas.len() as f64;
        let bad_cavity_regime =
            kappa >= 10.0 * delta_omega && kappa * kappa >= 10.0 * g * g * n;
        Ok(SpinModel { omegas, omega_bar, delta_omega, omega_c, g, kappa, bad_cavity_regime })
    }

    pub fn n_qubits(&self) -> usize {
        self.omegas.len()
    }

    /// Cavity detuning from the ensemble mean.
    pub fn chi(&self) -> f64 {
        self.omega_c - self.omega_bar
    }

    /// Qubit detunings from the ensemble mean.
    pub fn detunings(&self) -> Vec<f64> {
        self.omegas.iter().map(|w| w - self.omega_bar).collect()
    }
}

/// Gaussian drive pulse. The width is tied to the amplitude so the pulse
/// area is pi: sigma = sqrt(pi)/lambda_max, centered at b = 4 sigma
/// sqrt(2 ln 2) so the envelope is negligible at the window edges.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DriveSpec {
    pub lambda_max: f64,
    pub omega_d: f64,
    pub sigma: f64,
    pub b: f64,
}

impl DriveSpec {
    pub fn new(lambda_max: f64, omega_d: f64) -> Result<Self, DynamicsError> {
        if !(lambda_max.is_finite() && lambda_max > 0.0) {
            return Err(DynamicsError::BadModel {
                what: "drive",
                field: "lambda_max",
                value: lambda_max,
                requirement: "finite and positive",
            });
        }
        let sigma = PI.sqrt() / lambda_max;
        let b = 4.0 * sigma * (2.0 * (2.0f64).ln()).sqrt();
        Ok(DriveSpec { lambda_max, omega_d, sigma, b })
    }

    /// Envelope amplitude at time `t`.
    pub fn envelope(&self, t: f64) -> f64 {
        let x = (t - self.b) / self.sigma;
        self.lambda_max * (-x * x).exp()
    }

    /// Duration of the simulated drive window `[0, 2b]`; the envelope at the
    /// edges is below 1e-9 of the peak.
    pub fn window(&self) -> f64 {
        2.0 * self.b
    }
}

/// Scalar observables sampled on a common time grid.
#[derive(Clone, Debug, Default)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub channels: Vec<(String, Vec<f64>)>,
}

impl TimeSeries {
    pub fn new(names: &[&str]) -> Self {
        TimeSeries {
            times: Vec::new(),
            channels: names.iter().map(|n| (n.to_string(), Vec::new())).collect(),
        }
    }

    /// Append one sample; `values` must follow the channel order.
    /// Panics on non-increasing time, which is a caller bug.
    pub fn push(&mut self, t: f64, values: &[f64]) {
        if let Some(&last) = self.times.last() {
            assert!(t > last, "time series not strictly increasing: {t} after {last}");
        }
        assert_eq!(values.len(), self.channels.len(), "channel count mismatch");
        self.times.push(t);
        for (chan, &v) in self.channels.iter_mut().zip(values) {
            chan.1.push(v);
        }
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}
