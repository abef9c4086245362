//! Fabrication spread across a qubit ensemble: Monte-Carlo sampling of
//! junction areas, the resulting frequency statistics, and the search for the
//! common flux bias that minimizes inhomogeneous broadening.
//!
//! Sampling is counter-based: every qubit's parameters are a pure function of
//! `(seed, index)`, so building an ensemble in parallel, in any order, or one
//! qubit at a time yields identical devices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::circuit::{
    extract_qubit_params, CircuitError, FluxBias, JunctionSet, QubitParams,
};

#[derive(Error, Debug)]
pub enum EnsembleError {
    #[error("sampling config: {field} = {value} violates {requirement}")]
    BadConfig { field: &'static str, value: f64, requirement: &'static str },
    #[error("qubit {index}: rejected {attempts} consecutive draws; the distribution sits almost entirely in the unphysical region")]
    ResamplingExhausted { index: usize, attempts: usize },
    #[error("qubit {index}: {source}")]
    Circuit {
        index: usize,
        #[source]
        source: CircuitError,
    },
    #[error("no balancing flux: need (delta1 - delta2)(ip2 - ip1) > 0")]
    NoBalancingFlux,
    #[error("flux grid needs at least 3 points, got {0}")]
    GridTooSmall(usize),
    #[error("operation needs at least {need} qubits, got {got}")]
    TooFewQubits { need: usize, got: usize },
}

/// How junction areas scatter around their design values. Sigmas are
/// relative standard deviations of the normalized areas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub mean_alpha: f64,
    pub sigma_s: f64,
    pub sigma_l1: f64,
    pub sigma_l2: f64,
    pub n_qubits: usize,
    pub seed: u64,
    /// Josephson energy of a nominal large junction, GHz.
    pub ej_ghz: f64,
    pub ej_over_ec: f64,
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        let sigma_ok = |field: &'static str, v: f64| -> Result<(), EnsembleError> {
            if (0.0..0.2).contains(&v) {
                Ok(())
            } else {
                Err(EnsembleError::BadConfig { field, value: v, requirement: "0 <= sigma < 0.2" })
            }
        };
        sigma_ok("sigma_s", self.sigma_s)?;
        sigma_ok("sigma_l1", self.sigma_l1)?;
        sigma_ok("sigma_l2", self.sigma_l2)?;
        if !(self.mean_alpha.is_finite() && self.mean_alpha > 0.0) {
            return Err(EnsembleError::BadConfig {
                field: "mean_alpha",
                value: self.mean_alpha,
                requirement: "finite and positive",
            });
        }
        if self.n_qubits < 1 {
            return Err(EnsembleError::BadConfig {
                field: "n_qubits",
                value: self.n_qubits as f64,
                requirement: "n_qubits >= 1",
            });
        }
        if !(self.ej_ghz.is_finite() && self.ej_ghz > 0.0) {
            return Err(EnsembleError::BadConfig {
                field: "ej_ghz",
                value: self.ej_ghz,
                requirement: "finite and positive",
            });
        }
        if !(self.ej_over_ec.is_finite() && self.ej_over_ec > 0.0) {
            return Err(EnsembleError::BadConfig {
                field: "ej_over_ec",
                value: self.ej_over_ec,
                requirement: "finite and positive",
            });
        }
        Ok(())
    }
}

/// Kernel density estimator settings; the kernel itself is fixed Gaussian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeConfig {
    /// Bandwidth in the units of the estimated values (GHz for spectra).
    pub bandwidth: f64,
}

impl KdeConfig {
    pub fn new(bandwidth: f64) -> Result<Self, EnsembleError> {
        if bandwidth.is_finite() && bandwidth > 0.0 {
            Ok(KdeConfig { bandwidth })
        } else {
            Err(EnsembleError::BadConfig {
                field: "bandwidth",
                value: bandwidth,
                requirement: "finite and positive",
            })
        }
    }
}

/// A sampled ensemble: the drawn junction sets, their two-level reductions,
/// and the configuration that generated them.
#[derive(Clone, Debug)]
pub struct EnsembleSample {
    pub junctions: Vec<JunctionSet>,
    pub qubits: Vec<QubitParams>,
    pub config: SamplingConfig,
}

const MAX_REDRAWS: usize = 1000;

/// One standard normal per uniform pair; the antithetic partner is discarded
/// to keep the stream layout independent of acceptance decisions elsewhere.
pub(crate) fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos()
}

fn draw_truncated<R: Rng>(
    rng: &mut R,
    mean: f64,
    sd: f64,
    floor: f64,
    index: usize,
) -> Result<f64, EnsembleError> {
    for _ in 0..=MAX_REDRAWS {
        let v = mean + sd * standard_normal(rng);
        if v > floor {
            return Ok(v);
        }
    }
    Err(EnsembleError::ResamplingExhausted { index, attempts: MAX_REDRAWS })
}

/// Junction areas for qubit `index`, a pure function of `(config.seed,
/// index)`. Draws below the physical floor (alpha <= 0.55, beta <= 0.5) are
/// redrawn; at the few-percent spreads of interest this is a vanishing tail.
pub fn sample_junctions(cfg: &SamplingConfig, index: usize) -> Result<JunctionSet, EnsembleError> {
    cfg.validate()?;
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&cfg.seed.to_le_bytes());
    key[8..16].copy_from_slice(&(index as u64).to_le_bytes());
    key[16..24].copy_from_slice(b"fluxsamp");
    let mut rng = ChaCha12Rng::from_seed(key);
    let alpha = draw_truncated(&mut rng, cfg.mean_alpha, cfg.sigma_s * cfg.mean_alpha, 0.55, index)?;
    let beta1 = draw_truncated(&mut rng, 1.0, cfg.sigma_l1, 0.5, index)?;
    let beta2 = draw_truncated(&mut rng, 1.0, cfg.sigma_l2, 0.5, index)?;
    JunctionSet::new(alpha, beta1, beta2, cfg.ej_ghz, cfg.ej_over_ec)
        .map_err(|source| EnsembleError::Circuit { index, source })
}

/// Sample and characterize the whole ensemble. Qubits are independent, so
/// the work fans out across threads; the result is ordered by index and
/// identical to a sequential build.
pub fn build_ensemble(
    cfg: &SamplingConfig,
    basis_cutoff: usize,
) -> Result<EnsembleSample, EnsembleError> {
    cfg.validate()?;
    let results: Result<Vec<(JunctionSet, QubitParams)>, EnsembleError> = (0..cfg.n_qubits)
        .into_par_iter()
        .map(|index| {
            let junctions = sample_junctions(cfg, index)?;
            let qubit = extract_qubit_params(&junctions, basis_cutoff)
                .map_err(|source| EnsembleError::Circuit { index, source })?;
            Ok((junctions, qubit))
        })
        .collect();
    let (junctions, qubits) = results?.into_iter().unzip();
    Ok(EnsembleSample { junctions, qubits, config: *cfg })
}

/// Unnormalized kernel density estimate `sum_j K((query - v_j) / h)` with the
/// Gaussian kernel `K(x) = exp(-x^2/2) / sqrt(2 pi)`. Divide by `N h` for a
/// probability density.
pub fn kde(values: &[f64], cfg: KdeConfig, query: f64) -> f64 {
    let norm = 1.0 / (2.0 * PI).sqrt();
    values
        .iter()
        .map(|v| {
            let x = (query - v) / cfg.bandwidth;
            norm * (-0.5 * x * x).exp()
        })
        .sum()
}

/// Transition frequency of one device at a common flux bias, GHz.
pub fn qubit_frequency(q: &QubitParams, f: FluxBias) -> f64 {
    q.frequency_ghz(f)
}

/// Population standard deviation of the ensemble frequencies at flux `f`.
pub fn ensemble_std(e: &EnsembleSample, f: FluxBias) -> Result<f64, EnsembleError> {
    let n = e.qubits.len();
    if n < 2 {
        return Err(EnsembleError::TooFewQubits { need: 2, got: n });
    }
    let freqs: Vec<f64> = e.qubits.iter().map(|q| qubit_frequency(q, f)).collect();
    let mean = freqs.iter().sum::<f64>() / n as f64;
    let var = freqs.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / n as f64;
    Ok(var.sqrt())
}

/// Flux offset `df >= 0` at which two devices share a transition frequency:
/// the gap-dominant qubit must have the smaller slope for the curves to
/// cross.
pub fn balancing_flux(q1: &QubitParams, q2: &QubitParams) -> Result<f64, EnsembleError> {
    if q1.delta_ghz == q2.delta_ghz {
        return Ok(0.0);
    }
    let num = q1.delta_ghz * q1.delta_ghz - q2.delta_ghz * q2.delta_ghz;
    let den = q2.ip_slope_ghz * q2.ip_slope_ghz - q1.ip_slope_ghz * q1.ip_slope_ghz;
    if den == 0.0 || num / den <= 0.0 {
        return Err(EnsembleError::NoBalancingFlux);
    }
    Ok((num / den).sqrt())
}

fn golden_section_min(mut a: f64, mut b: f64, f: &dyn Fn(f64) -> f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    const INVPHI2: f64 = 1.0 - INVPHI;
    let mut c = a + INVPHI2 * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > 1e-6 * (a.abs() + b.abs()).max(1e-3) / 2.0 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = a + INVPHI2 * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Flux bias minimizing the ensemble frequency spread over `f_range`: a
/// uniform scan of `n_grid` points picks the bracket, golden-section search
/// refines it to a relative width of 1e-6. Ties take the lowest flux; an
/// exactly flat landscape returns the range midpoint.
pub fn optimal_flux(
    e: &EnsembleSample,
    f_range: (f64, f64),
    n_grid: usize,
) -> Result<(FluxBias, f64), EnsembleError> {
    if n_grid < 3 {
        return Err(EnsembleError::GridTooSmall(n_grid));
    }
    let n = e.qubits.len();
    if n < 2 {
        return Err(EnsembleError::TooFewQubits { need: 2, got: n });
    }
    let (lo, hi) = f_range;
    let objective = |f: f64| {
        ensemble_std(e, FluxBias(f)).expect("length checked above")
    };
    let xs: Vec<f64> = (0..n_grid)
        .map(|i| lo + (hi - lo) * i as f64 / (n_grid - 1) as f64)
        .collect();
    let ys: Vec<f64> = xs.iter().map(|&x| objective(x)).collect();
    let ymin = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let ymax = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if ymin == ymax {
        let mid = 0.5 * (lo + hi);
        return Ok((FluxBias(mid), objective(mid)));
    }
    let best = ys.iter().position(|&y| y == ymin).expect("nonempty grid");
    let a = if best == 0 { xs[0] } else { xs[best - 1] };
    let b = if best == n_grid - 1 { xs[n_grid - 1] } else { xs[best + 1] };
    let (x, y) = golden_section_min(a, b, &objective);
    if y <= ymin {
        Ok((FluxBias(x), y))
    } else {
        Ok((FluxBias(xs[best]), ymin))
    }
}

/// Pearson correlation coefficient of two equal-length samples.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "pearson: length mismatch");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

/// Full width at half maximum of a sampled curve, by linear interpolation on
/// each side of the peak. Returns None when either half-crossing lies
/// outside the grid.
pub fn fwhm_on_grid(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len(), "fwhm_on_grid: length mismatch");
    if xs.len() < 3 {
        return None;
    }
    let (peak, &ymax) = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite densities"))?;
    let half = ymax / 2.0;
    let mut left = None;
    for i in (1..=peak).rev() {
        if ys[i - 1] <= half && ys[i] > half {
            let t = (half - ys[i - 1]) / (ys[i] - ys[i - 1]);
            left = Some(xs[i - 1] + t * (xs[i] - xs[i - 1]));
            break;
        }
    }
    let mut right = None;
    for i in peak..xs.len() - 1 {
        if ys[i] > half && ys[i + 1] <= half {
            let t = (ys[i] - half) / (ys[i] - ys[i + 1]);
            right = Some(xs[i] + t * (xs[i + 1] - xs[i]));
            break;
        }
    }
    Some(right? - left?)
}
