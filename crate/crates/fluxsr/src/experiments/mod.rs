//! Figure-reproduction pipelines: broadening statistics, flux optimization,
//! discrete-M and driven superradiance sweeps with realization averaging.
//!
//! Every sweep is a pure function of (config, seed): frequency draws are
//! counter-based per realization, the (grid point, realization) jobs fan out
//! over a thread pool, and results are sorted back into submission order
//! before any reduction, so thread scheduling cannot leak into the output.

pub mod io;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{SpinTemplate, StepPolicy};
use crate::dynamics::lindblad::{
    evolve, CollapseChannel, EvolveOptions, Hamiltonian, Observable, policy_step,
};
use crate::dynamics::model::{h_ae, h_full_tavis_cummings, intensity, sr_time, superradiant_rate};
use crate::dynamics::drive::{drive_product_state, drive_step, DriveOutcome};
use crate::dynamics::ops::collective_ops;
use crate::dynamics::sector::{DecayOptions, SectorEngine, SectorState};
use crate::dynamics::{DriveSpec, DynamicsError, SpinModel, TimeSeries};
use crate::ensemble::{
    build_ensemble, ensemble_std, fwhm_on_grid, kde, optimal_flux, pearson, standard_normal,
    EnsembleError, EnsembleSample, KdeConfig, SamplingConfig,
};
use crate::circuit::FluxBias;

#[derive(Error, Debug)]
pub enum ExperimentError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("sweep config: {0}")]
    BadSweep(&'static str),
}

/// Discrete-M sweep parameters. Frequencies are angular (rad/ns).
#[derive(Clone, Debug, Serialize)]
pub struct SweepConfig {
    pub template: SpinTemplate,
    pub m_values: Vec<usize>,
    pub realizations: usize,
    pub seed: u64,
    pub steps: StepPolicy,
    /// Decay window in units of the single-excitation superradiance time.
    /// The default of 2 leaves the peak (never later than a fraction of one
    /// unit) a wide margin while keeping 50-realization sweeps affordable.
    pub window_sr: f64,
}

impl SweepConfig {
    fn validate(&self) -> Result<(), ExperimentError> {
        if self.realizations == 0 {
            return Err(ExperimentError::BadSweep("realizations must be at least 1"));
        }
        if self.m_values.is_empty() {
            return Err(ExperimentError::BadSweep("m_values must not be empty"));
        }
        if self.m_values.iter().any(|&m| m == 0 || m > self.template.n) {
            return Err(ExperimentError::BadSweep("every M must satisfy 1 <= M <= n"));
        }
        if !(self.window_sr > 0.0 && self.window_sr.is_finite()) {
            return Err(ExperimentError::BadSweep("window_sr must be finite and positive"));
        }
        Ok(())
    }
}

/// One grid point of a scaling curve: statistics of max <J+J-> over
/// realizations.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingPoint {
    /// Prepared excitation: the integer M for discrete sweeps, the measured
    /// realization-mean M for driven ones.
    pub m: f64,
    pub mean_max_jpjm: f64,
    pub std_max_jpjm: f64,
    pub stderr_max_jpjm: f64,
    pub mean_t_at_max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingResult {
    pub points: Vec<ScalingPoint>,
}

impl ScalingResult {
    fn new(points: Vec<ScalingPoint>) -> Self {
        debug_assert!(
            points.windows(2).all(|w| w[0].m < w[1].m),
            "scaling grid must be strictly increasing in M"
        );
        ScalingResult { points }
    }

    /// Least-squares slope of log(mean max) against log(M) over the points
    /// with M in `[lo, hi]`; None with fewer than two such points.
    pub fn log_log_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|p| p.m >= lo - 1e-9 && p.m <= hi + 1e-9 && p.mean_max_jpjm > 0.0)
            .map(|p| (p.m.ln(), p.mean_max_jpjm.ln()))
            .collect();
        fit_slope(&pts)
    }
}

fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for &(x, y) in pts {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

fn mean_std_stderr(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    (mean, std, std / n.sqrt())
}

/// Qubit frequencies for one realization, a pure function of
/// (template, seed, realization).
pub fn draw_omegas(template: &SpinTemplate, seed: u64, realization: usize) -> Vec<f64> {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(realization as u64).to_le_bytes());
    key[16..24].copy_from_slice(b"omegadrw");
    let mut rng = ChaCha12Rng::from_seed(key);
    (0..template.n)
        .map(|_| template.omega_bar + template.delta_omega * standard_normal(&mut rng))
        .collect()
}

/// Decay-phase RK4 step: the shortest of the collective emission time at
/// full inversion and the fastest detuning beat, over the policy divisor.
pub fn decay_step(model: &SpinModel, divisor: f64) -> f64 {
    let max_det = model
        .detunings()
        .iter()
        .fold(0.0f64, |acc, d| acc.max(d.abs()));
    policy_step(
        sr_time(model, model.n_qubits() as f64),
        None,
        Some(max_det),
        divisor,
    )
}

/// Decay window: `window_sr` times the single-excitation superradiance
/// time.
pub fn decay_window(model: &SpinModel, window_sr: f64) -> f64 {
    window_sr * sr_time(model, 1.0)
}

struct DecayJobResult {
    max_jpjm: f64,
    t_at_max: f64,
    series: Option<TimeSeries>,
}

/// Run one decay from `state0`, keeping the full series only when asked
/// (realization 0 feeds the time-series figures; the rest may stop early).
fn decay_job(
    model: &SpinModel,
    state0: &SectorState,
    steps: &StepPolicy,
    window_sr: f64,
    keep_series: bool,
) -> Result<DecayJobResult, ExperimentError> {
    let engine = SectorEngine::new(model)?;
    let mut opts = DecayOptions::with_step(decay_step(model, steps.divisor));
    opts.early_exit = !keep_series;
    let run =
        engine.evolve_decay(state0, decay_window(model, window_sr), steps.time_samples, &opts)?;
    Ok(DecayJobResult {
        max_jpjm: run.max_jpjm,
        t_at_max: run.t_at_max,
        series: keep_series.then_some(run.series),
    })
}

/// Output of the discrete-M sweep.
#[derive(Debug)]
pub struct DiscreteMOutput {
    pub scaling: ScalingResult,
    /// Realization-0 trajectory per M, for the time-series figures.
    pub representative: Vec<(usize, TimeSeries)>,
    /// The realization-0 model, whose rates convert <J+J-> to intensity.
    pub reference_model: SpinModel,
}

/// Prepare M of N qubits excited, decay through the cavity, repeat over
/// realizations of the frequency draws, and collect max <J+J-> statistics.
pub fn run_discrete_m(cfg: &SweepConfig) -> Result<DiscreteMOutput, ExperimentError> {
    cfg.validate()?;
    let mut m_values = cfg.m_values.clone();
    m_values.sort_unstable();
    m_values.dedup();

    let jobs: Vec<(usize, usize)> = m_values
        .iter()
        .enumerate()
        .flat_map(|(mi, _)| (0..cfg.realizations).map(move |r| (mi, r)))
        .collect();
    let mut results: Vec<((usize, usize), DecayJobResult)> = jobs
        .into_par_iter()
        .map(|(mi, r)| {
            let model = cfg.template.realize(draw_omegas(&cfg.template, cfg.seed, r))?;
            let m = m_values[mi];
            let state0 = SectorState::from_excited_mask(cfg.template.n, (1usize << m) - 1);
            let out = decay_job(&model, &state0, &cfg.steps, cfg.window_sr, r == 0)?;
            Ok(((mi, r), out))
        })
        .collect::<Result<_, ExperimentError>>()?;
    results.sort_by_key(|(key, _)| *key);

    let mut points = Vec::with_capacity(m_values.len());
    let mut representative = Vec::with_capacity(m_values.len());
    for (mi, &m) in m_values.iter().enumerate() {
        let group: Vec<&DecayJobResult> =
            results.iter().filter(|((i, _), _)| *i == mi).map(|(_, out)| out).collect();
        let maxima: Vec<f64> = group.iter().map(|g| g.max_jpjm).collect();
        let (mean, std, stderr) = mean_std_stderr(&maxima);
        let mean_t = group.iter().map(|g| g.t_at_max).sum::<f64>() / group.len() as f64;
        points.push(ScalingPoint {
            m: m as f64,
            mean_max_jpjm: mean,
            std_max_jpjm: std,
            stderr_max_jpjm: stderr,
            mean_t_at_max: mean_t,
        });
        let series = results
            .iter()
            .find(|((i, r), _)| *i == mi && *r == 0)
            .and_then(|(_, out)| out.series.clone());
        if let Some(s) = series {
            representative.push((m, s));
        }
    }
    let reference_model = cfg.template.realize(draw_omegas(&cfg.template, cfg.seed, 0))?;
    Ok(DiscreteMOutput { scaling: ScalingResult::new(points), representative, reference_model })
}

/// Driven sweep parameters.
#[derive(Clone, Debug, Serialize)]
pub struct DriveSweepConfig {
    pub template: SpinTemplate,
    pub drives: Vec<DriveSpec>,
    pub realizations: usize,
    pub seed: u64,
    pub steps: StepPolicy,
    /// Decay window in units of the single-excitation superradiance time.
    pub window_sr: f64,
    /// Drive-phase RK4 divisor; the two-level integration is cheap, so this
    /// is deliberately conservative.
    pub drive_divisor: f64,
}

/// Per-amplitude row of the driven sweep.
#[derive(Clone, Debug, Serialize)]
pub struct LambdaRow {
    /// Peak Rabi amplitude, rad/ns.
    pub lambda_max: f64,
    pub mean_m: f64,
    pub std_m: f64,
    /// Analytic estimate sum_j lambda^2/(detuning_j^2 + lambda^2), averaged
    /// over realizations; a cross-check column, not used in the dynamics.
    pub mean_m_eff: f64,
    pub mean_max_jpjm: f64,
    pub std_max_jpjm: f64,
    pub stderr_max_jpjm: f64,
}

#[derive(Debug)]
pub struct DrivenOutput {
    pub rows: Vec<LambdaRow>,
    /// Scaling curve against the measured (realization-mean) M.
    pub scaling: ScalingResult,
    /// Largest decrease of mean M between consecutive amplitudes; zero for
    /// a perfectly monotone sweep.
    pub monotone_defect: f64,
}

/// Effective number of excited spins after a pulse of amplitude `lambda`
/// (rad/ns) at drive frequency `omega_d`.
pub fn m_eff_estimate(omegas: &[f64], omega_d: f64, lambda: f64) -> f64 {
    assert!(lambda > 0.0, "m_eff_estimate needs a positive amplitude");
    omegas
        .iter()
        .map(|w| {
            let d = w - omega_d;
            lambda * lambda / (d * d + lambda * lambda)
        })
        .sum()
}

/// Ground-state ensemble, Gaussian pi-area pulse, then cavity decay; one row
/// per amplitude.
pub fn run_driven(cfg: &DriveSweepConfig) -> Result<DrivenOutput, ExperimentError> {
    if cfg.realizations == 0 {
        return Err(ExperimentError::BadSweep("realizations must be at least 1"));
    }
    if cfg.drives.is_empty() {
        return Err(ExperimentError::BadSweep("drive sweep must not be empty"));
    }
    if !(cfg.window_sr > 0.0 && cfg.window_sr.is_finite()) {
        return Err(ExperimentError::BadSweep("window_sr must be finite and positive"));
    }
    let mut order: Vec<usize> = (0..cfg.drives.len()).collect();
    order.sort_by(|&a, &b| {
        cfg.drives[a].lambda_max.partial_cmp(&cfg.drives[b].lambda_max).expect("finite amplitudes")
    });

    struct DriveJobResult {
        m_measured: f64,
        m_eff: f64,
        max_jpjm: f64,
    }

    let jobs: Vec<(usize, usize)> = order
        .iter()
        .enumerate()
        .flat_map(|(li, _)| (0..cfg.realizations).map(move |r| (li, r)))
        .collect();
    let mut results: Vec<((usize, usize), DriveJobResult)> = jobs
        .into_par_iter()
        .map(|(li, r)| {
            let drive = &cfg.drives[order[li]];
            let model = cfg.template.realize(draw_omegas(&cfg.template, cfg.seed, r))?;
            let pulsed: DriveOutcome = drive_product_state(
                &model,
                drive,
                drive_step(&model, drive, cfg.drive_divisor),
            )?;
            let state0 = SectorState::from_amplitudes(&pulsed.amplitudes);
            let out = decay_job(&model, &state0, &cfg.steps, cfg.window_sr, false)?;
            Ok((
                (li, r),
                DriveJobResult {
                    m_measured: pulsed.m_measured,
                    m_eff: m_eff_estimate(&model.omegas, drive.omega_d, drive.lambda_max),
                    max_jpjm: out.max_jpjm,
                },
            ))
        })
        .collect::<Result<_, ExperimentError>>()?;
    results.sort_by_key(|(key, _)| *key);

    let mut rows = Vec::with_capacity(order.len());
    for (li, &di) in order.iter().enumerate() {
        let group: Vec<&DriveJobResult> =
            results.iter().filter(|((i, _), _)| *i == li).map(|(_, out)| out).collect();
        let ms: Vec<f64> = group.iter().map(|g| g.m_measured).collect();
        let maxima: Vec<f64> = group.iter().map(|g| g.max_jpjm).collect();
        let (mean_m, std_m, _) = mean_std_stderr(&ms);
        let (mean_max, std_max, stderr_max) = mean_std_stderr(&maxima);
        let mean_m_eff = group.iter().map(|g| g.m_eff).sum::<f64>() / group.len() as f64;
        rows.push(LambdaRow {
            lambda_max: cfg.drives[di].lambda_max,
            mean_m,
            std_m,
            mean_m_eff,
            mean_max_jpjm: mean_max,
            std_max_jpjm: std_max,
            stderr_max_jpjm: stderr_max,
        });
    }

    let monotone_defect = rows
        .windows(2)
        .map(|w| (w[0].mean_m - w[1].mean_m).max(0.0))
        .fold(0.0f64, f64::max);

    // The scaling curve wants strictly increasing M; amplitudes deep in
    // saturation can repeat M within noise, so keep the first of any pair
    // closer than 1e-9.
    let mut points: Vec<ScalingPoint> = Vec::new();
    for row in &rows {
        let point = ScalingPoint {
            m: row.mean_m,
            mean_max_jpjm: row.mean_max_jpjm,
            std_max_jpjm: row.std_max_jpjm,
            stderr_max_jpjm: row.stderr_max_jpjm,
            mean_t_at_max: 0.0,
        };
        if points.last().is_none_or(|last| point.m > last.m + 1e-9) {
            points.push(point);
        }
    }
    Ok(DrivenOutput { rows, scaling: ScalingResult::new(points), monotone_defect })
}

/// The collective emission rate scale M g^2 / kappa of an ensemble, used to
/// transfer the measured scaling law to parameter sets too large to
/// simulate. Plain scalars rather than a full model: the interesting
/// ensembles (thousands of qubits) are far beyond the simulable range.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RatePoint {
    pub m: f64,
    /// rad/ns (any consistent unit cancels in the ratio)
    pub g: f64,
    pub kappa: f64,
}

impl RatePoint {
    pub fn rate_scale(&self) -> f64 {
        self.m * self.g * self.g / self.kappa
    }
}

/// Ratio of collective rate scales; 1.0 certifies that the two parameter
/// sets sit on the same superradiance curve.
pub fn extrapolate_equivalence(target: RatePoint, reference: RatePoint) -> f64 {
    target.rate_scale() / reference.rate_scale()
}

/// Broadening statistics for one fabrication-spread setting.
#[derive(Clone, Debug, Serialize)]
pub struct BroadeningCurve {
    /// Common relative spread of this setting (sigma_s as configured).
    pub sigma: f64,
    pub kde_grid: Vec<f64>,
    pub kde_values: Vec<f64>,
    pub kde_fwhm: Option<f64>,
    /// Per-qubit tunneling gaps, GHz.
    pub deltas: Vec<f64>,
    /// Per-qubit persistent currents, amperes.
    pub ips: Vec<f64>,
    pub pearson_delta_ip: f64,
    pub flux_grid: Vec<f64>,
    /// Ensemble frequency spread at each grid flux, GHz.
    pub std_vs_flux: Vec<f64>,
    pub optimal_flux: f64,
    pub std_at_optimal: f64,
    pub std_at_center: f64,
}

/// The distribution/scatter/spread-vs-flux pipeline for a set of sampling
/// configs (one per sigma).
pub fn run_broadening_suite(
    configs: &[SamplingConfig],
    basis_cutoff: usize,
    kde_cfg: KdeConfig,
    f_range: (f64, f64),
    n_grid: usize,
) -> Result<Vec<BroadeningCurve>, ExperimentError> {
    configs
        .iter()
        .map(|cfg| {
            let sample = build_ensemble(cfg, basis_cutoff)?;
            Ok(broadening_curve(cfg.sigma_s, &sample, kde_cfg, f_range, n_grid)?)
        })
        .collect()
}

fn broadening_curve(
    sigma: f64,
    sample: &EnsembleSample,
    kde_cfg: KdeConfig,
    f_range: (f64, f64),
    n_grid: usize,
) -> Result<BroadeningCurve, EnsembleError> {
    let deltas: Vec<f64> = sample.qubits.iter().map(|q| q.delta_ghz).collect();
    let ips: Vec<f64> = sample.qubits.iter().map(|q| q.ip_amperes()).collect();

    let lo = deltas.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * kde_cfg.bandwidth;
    let hi = deltas.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * kde_cfg.bandwidth;
    let kde_points = 401;
    let kde_grid: Vec<f64> = (0..kde_points)
        .map(|i| lo + (hi - lo) * i as f64 / (kde_points - 1) as f64)
        .collect();
    let kde_values: Vec<f64> = kde_grid.iter().map(|&x| kde(&deltas, kde_cfg, x)).collect();
    let kde_fwhm = fwhm_on_grid(&kde_grid, &kde_values);

    let flux_grid: Vec<f64> = (0..n_grid)
        .map(|i| f_range.0 + (f_range.1 - f_range.0) * i as f64 / (n_grid - 1) as f64)
        .collect();
    let std_vs_flux = flux_grid
        .iter()
        .map(|&f| ensemble_std(sample, FluxBias(f)))
        .collect::<Result<Vec<f64>, EnsembleError>>()?;

    let (best, std_at_optimal) = optimal_flux(sample, f_range, n_grid)?;
    let std_at_center = ensemble_std(sample, FluxBias::SYMMETRY_POINT)?;

    let pearson_delta_ip = pearson(&deltas, &ips);
    Ok(BroadeningCurve {
        sigma,
        kde_grid,
        kde_values,
        kde_fwhm,
        deltas,
        ips,
        pearson_delta_ip,
        flux_grid,
        std_vs_flux,
        optimal_flux: best.0,
        std_at_optimal,
        std_at_center,
    })
}

/// Side-by-side <J+J->(t) from the full qubit-cavity model and from the
/// cavity-eliminated one.
#[derive(Clone, Debug, Serialize)]
pub struct EliminationReport {
    pub times: Vec<f64>,
    pub full: Vec<f64>,
    pub eliminated: Vec<f64>,
    /// max_t |full - eliminated| / max_t |full|
    pub max_rel_deviation: f64,
}

/// Evolve the all-excited state under the full Tavis-Cummings model with a
/// lossy cavity and under the eliminated description, in the frame rotating
/// at the ensemble mean, and compare <J+J->(t) over ten superradiance
/// times. Qubit frequencies are drawn from the configured spread
/// (realization 0 of `seed`).
pub fn validate_elimination(
    template: &SpinTemplate,
    seed: u64,
    photon_cutoff: usize,
    divisor: f64,
    samples: usize,
) -> Result<EliminationReport, ExperimentError> {
    let n = template.n;
    // Rotating frame at the ensemble mean: qubit detunings and the cavity
    // detuning are what survive; <J+J-> is excitation-diagonal, hence
    // frame-invariant. Integrating in the lab frame at several GHz would
    // buy nothing but a hundredfold finer step.
    let omegas: Vec<f64> = draw_omegas(template, seed, 0)
        .into_iter()
        .map(|w| w - template.omega_bar)
        .collect();
    let model = SpinModel::new(
        omegas,
        0.0,
        template.delta_omega,
        template.omega_c - template.omega_bar,
        template.g,
        template.kappa,
    )?;
    let t_end = decay_window(&model, 10.0);
    let ops = collective_ops(n)?;
    let jpjm_q = ops.jp.matmul(&ops.jm);

    // Full model: qubits tensor cavity, photon loss at kappa.
    let tc = h_full_tavis_cummings(&model, photon_cutoff)?;
    let jpjm_full = jpjm_q.kron(&crate::sparse::CsrMatrix::identity(photon_cutoff + 1));
    let mut rho0_full = ndarray::Array2::zeros((tc.dim, tc.dim));
    let idx = ((1usize << n) - 1) * (photon_cutoff + 1);
    rho0_full[(idx, idx)] = num_complex::Complex64::new(1.0, 0.0);
    let max_det = model
        .detunings()
        .iter()
        .fold(model.chi().abs(), |acc, d| acc.max(d.abs()));
    let step_full = policy_step(1.0 / model.kappa, None, Some(max_det), divisor);
    let (full_series, _) = evolve(
        &rho0_full,
        &Hamiltonian::Constant(&tc.h),
        &[CollapseChannel { rate: model.kappa, op: tc.a.clone() }],
        (0.0, t_end),
        samples,
        &[Observable::Operator("jpjm", &jpjm_full)],
        &EvolveOptions::with_step(step_full),
    )?;

    // Eliminated model on the qubits alone.
    let h_elim = h_ae(&model, &ops);
    let step_elim = decay_step(&model, divisor);
    let (elim_series, _) = evolve(
        &crate::dynamics::ops::basis_state_density(n, (1 << n) - 1),
        &Hamiltonian::Constant(&h_elim),
        &[CollapseChannel { rate: superradiant_rate(&model), op: ops.jm.clone() }],
        (0.0, t_end),
        samples,
        &[Observable::Operator("jpjm", &jpjm_q)],
        &EvolveOptions::with_step(step_elim),
    )?;

    let times: Vec<f64> = (0..samples)
        .map(|i| t_end * i as f64 / (samples - 1) as f64)
        .collect();
    let full = full_series.channel("jpjm").expect("recorded").to_vec();
    let eliminated = elim_series.channel("jpjm").expect("recorded").to_vec();
    let peak = full.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let max_abs = full
        .iter()
        .zip(&eliminated)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    Ok(EliminationReport {
        times,
        full,
        eliminated,
        max_rel_deviation: max_abs / peak,
    })
}

/// Intensity trace derived from a <J+J-> series.
pub fn intensity_channel(model: &SpinModel, jpjm: &[f64]) -> Vec<f64> {
    jpjm.iter().map(|&v| intensity(model, v.max(0.0))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MHZ_TO_RAD_NS;

    fn small_template(n: usize) -> SpinTemplate {
        SpinTemplate {
            n,
            omega_bar: 5000.0 * MHZ_TO_RAD_NS,
            delta_omega: 25.0 * MHZ_TO_RAD_NS,
            omega_c: 5000.0 * MHZ_TO_RAD_NS,
            g: 50.0 * MHZ_TO_RAD_NS,
            kappa: 400.0 * MHZ_TO_RAD_NS,
        }
    }

    fn quick_steps() -> StepPolicy {
        StepPolicy { divisor: 16.0, time_samples: 400 }
    }

    #[test]
    fn omega_draws_are_deterministic_and_spread() {
        let t = small_template(10);
        let a = draw_omegas(&t, 7, 3);
        let b = draw_omegas(&t, 7, 3);
        assert_eq!(a, b);
        let c = draw_omegas(&t, 7, 4);
        assert_ne!(a, c);
        // crude sanity on the scale of the draws
        let dev = a
            .iter()
            .map(|w| (w - t.omega_bar).abs())
            .fold(0.0f64, f64::max);
        assert!(dev > 0.0 && dev < 6.0 * t.delta_omega);
    }

    #[test]
    fn single_emitter_cannot_superradiate() {
        let cfg = SweepConfig {
            template: small_template(3),
            m_values: vec![1],
            realizations: 2,
            seed: 11,
            steps: quick_steps(),
            window_sr: 2.0,
        };
        let out = run_discrete_m(&cfg).unwrap();
        let p = &out.scaling.points[0];
        // max <J+J-> = 1 exactly, attained at t = 0
        assert!((p.mean_max_jpjm - 1.0).abs() < 1e-9, "mean {}", p.mean_max_jpjm);
        assert_eq!(p.mean_t_at_max, 0.0);
    }

    #[test]
    fn homogeneous_pair_peaks_at_or_after_zero() {
        let mut t = small_template(2);
        t.delta_omega = 0.0;
        let cfg = SweepConfig {
            template: t,
            m_values: vec![2],
            realizations: 1,
            seed: 1,
            steps: quick_steps(),
            window_sr: 2.0,
        };
        let out = run_discrete_m(&cfg).unwrap();
        let p = &out.scaling.points[0];
        assert!(p.mean_max_jpjm >= 2.0 - 1e-9, "max {}", p.mean_max_jpjm);
        assert!(p.mean_t_at_max >= 0.0);
        // the representative series exists and starts at <J+J-> = 2
        let (m, series) = &out.representative[0];
        assert_eq!(*m, 2);
        assert!((series.channel("jpjm").unwrap()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn m_eff_estimate_reference_points() {
        // all on resonance -> N
        assert!((m_eff_estimate(&[5.0, 5.0, 5.0], 5.0, 0.3) - 3.0).abs() < 1e-12);
        // |detuning| = lambda -> N/2
        assert!((m_eff_estimate(&[5.2, 4.8], 5.0, 0.2) - 1.0).abs() < 1e-12);
        // lambda small against every detuning -> ~0
        assert!(m_eff_estimate(&[5.2, 4.8], 5.0, 1e-6) < 1e-10);
    }

    #[test]
    fn extrapolation_identity_and_scaling() {
        // Units cancel in the ratio; in MHz both rate scales are exactly
        // 62.5 and the ratio is exactly 1.
        let target = RatePoint { m: 4300.0, g: 5.0, kappa: 1720.0 };
        let reference = RatePoint { m: 10.0, g: 50.0, kappa: 400.0 };
        assert_eq!(target.rate_scale(), 62.5);
        assert_eq!(reference.rate_scale(), 62.5);
        assert_eq!(extrapolate_equivalence(target, reference), 1.0);
        let doubled = RatePoint { g: 2.0 * reference.g, ..reference };
        assert!((extrapolate_equivalence(doubled, reference) - 4.0).abs() < 1e-12);
        assert_eq!(extrapolate_equivalence(reference, reference), 1.0);
    }

    #[test]
    fn driven_sweep_saturates_and_stays_monotone() {
        let template = small_template(3);
        let drives: Vec<DriveSpec> = [0.5, 4.0, 20.0]
            .iter()
            .map(|&x| DriveSpec::new(x * template.delta_omega, template.omega_bar).unwrap())
            .collect();
        let cfg = DriveSweepConfig {
            template,
            drives,
            realizations: 3,
            seed: 5,
            steps: quick_steps(),
            window_sr: 2.0,
            drive_divisor: 400.0,
        };
        let out = run_driven(&cfg).unwrap();
        assert_eq!(out.rows.len(), 3);
        assert!(out.monotone_defect < 0.2, "defect {}", out.monotone_defect);
        let strongest = out.rows.last().unwrap();
        assert!(strongest.mean_m > 0.95 * 3.0, "M = {}", strongest.mean_m);
        assert!(strongest.mean_m_eff > 0.95 * 3.0);
        let weakest = &out.rows[0];
        assert!(weakest.mean_m < strongest.mean_m);
    }

    #[test]
    fn stderr_shrinks_with_realizations() {
        // N = 4 fully inverted bursts after t = 0, and the burst height
        // depends on the drawn detunings, so the maxima genuinely vary
        // (N = 2 would not: its decay is monotone and every realization
        // peaks at exactly 2).
        let template = small_template(4);
        let base = SweepConfig {
            template: template.clone(),
            m_values: vec![4],
            realizations: 4,
            seed: 3,
            steps: quick_steps(),
            window_sr: 2.0,
        };
        let more = SweepConfig { realizations: 16, ..base.clone() };
        let a = run_discrete_m(&base).unwrap().scaling.points[0].stderr_max_jpjm;
        let b = run_discrete_m(&more).unwrap().scaling.points[0].stderr_max_jpjm;
        assert!(a > 0.0, "burst maxima should vary across realizations");
        // 4x realizations should roughly halve the standard error; allow
        // slack for the draw-to-draw variance estimate itself
        assert!(b < a, "stderr did not shrink: {a} vs {b}");
    }

    #[test]
    fn elimination_report_on_a_tiny_system() {
        let mut template = small_template(2);
        template.delta_omega = 0.0;
        let report = validate_elimination(&template, 1, 6, 48.0, 201).unwrap();
        assert_eq!(report.full.len(), 201);
        assert!((report.full[0] - 2.0).abs() < 1e-10);
        assert!((report.eliminated[0] - 2.0).abs() < 1e-10);
        assert!(report.max_rel_deviation < 0.05, "deviation {}", report.max_rel_deviation);
    }
}
