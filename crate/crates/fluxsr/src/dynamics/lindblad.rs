//! Lindblad master equation integration with a fixed-step RK4.
//!
//! The right-hand side is `-i[H, rho] + sum_k rate_k (2 L rho L^dag -
//! L^dag L rho - rho L^dag L)`; note the factor 2 inside the dissipator, so
//! a lone qubit with collapse `sigma_-` at rate `r` decays as `exp(-2 r t)`.
//!
//! Fixed steps keep runs bit-reproducible. The integrator refuses to hand
//! back garbage: trace and hermiticity are checked at every sample point and
//! a drifting run aborts with the step size in the error.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::ops::excited_count;
use super::{DynamicsError, StateMatrix, TimeSeries};
use crate::sparse::CsrMatrix;

const I: C64 = C64::new(0.0, 1.0);

/// One collapse channel `rate * D[op]`.
#[derive(Clone, Debug)]
pub struct CollapseChannel {
    pub rate: f64,
    pub op: CsrMatrix,
}

/// Hamiltonian source for `evolve`: either one constant matrix or a builder
/// called at the times RK4 needs.
pub enum Hamiltonian<'a> {
    Constant(&'a CsrMatrix),
    TimeDependent(&'a dyn Fn(f64) -> CsrMatrix),
}

/// What to record at each sample time.
pub enum Observable<'a> {
    /// `Re tr(op rho)` under the given channel name.
    Operator(&'a str, &'a CsrMatrix),
    /// Diagonal excitation count (qubit-only spaces).
    ExcitedCount(&'a str),
}

impl Observable<'_> {
    fn name(&self) -> &str {
        match self {
            Observable::Operator(n, _) => n,
            Observable::ExcitedCount(n) => n,
        }
    }

    fn measure(&self, rho: &StateMatrix) -> f64 {
        match self {
            Observable::Operator(_, op) => op.expectation(rho).re,
            Observable::ExcitedCount(_) => excited_count(rho),
        }
    }
}

struct PreparedChannel {
    rate: f64,
    l: CsrMatrix,
    ldag: CsrMatrix,
    ldagl: CsrMatrix,
}

fn prepare(channels: &[CollapseChannel]) -> Vec<PreparedChannel> {
    channels
        .iter()
        .map(|c| {
            let ldag = c.op.dagger();
            let ldagl = ldag.matmul(&c.op);
            PreparedChannel { rate: c.rate, l: c.op.clone(), ldag, ldagl }
        })
        .collect()
}

fn rhs_into(
    out: &mut StateMatrix,
    scratch: &mut StateMatrix,
    rho: &StateMatrix,
    h: &CsrMatrix,
    channels: &[PreparedChannel],
) {
    out.fill(C64::new(0.0, 0.0));
    h.spmm_acc(rho, -I, out);
    h.spmm_right_acc(rho, I, out);
    for c in channels {
        let r = C64::new(c.rate, 0.0);
        c.ldagl.spmm_acc(rho, -r, out);
        c.ldagl.spmm_right_acc(rho, -r, out);
        scratch.fill(C64::new(0.0, 0.0));
        c.l.spmm_acc(rho, C64::new(1.0, 0.0), scratch);
        c.ldag.spmm_right_acc(scratch, 2.0 * r, out);
    }
}

/// Master-equation derivative at one instant. The building block `evolve`
/// iterates; public because the derivative itself has testable structure
/// (zero trace, hermiticity preservation).
pub fn lindblad_rhs(
    rho: &StateMatrix,
    h: &CsrMatrix,
    channels: &[CollapseChannel],
) -> Result<StateMatrix, DynamicsError> {
    let dim = rho.nrows();
    if h.nrows() != dim || h.ncols() != dim {
        return Err(DynamicsError::DimensionMismatch { expected: dim, got: h.nrows() });
    }
    for c in channels {
        if c.op.nrows() != dim || c.op.ncols() != dim {
            return Err(DynamicsError::DimensionMismatch { expected: dim, got: c.op.nrows() });
        }
    }
    let prepared = prepare(channels);
    let mut out = Array2::zeros((dim, dim));
    let mut scratch = Array2::zeros((dim, dim));
    rhs_into(&mut out, &mut scratch, rho, h, &prepared);
    Ok(out)
}

/// Integration controls. `step` is a target: each inter-sample interval is
/// subdivided evenly into steps no longer than this.
#[derive(Clone, Copy, Debug)]
pub struct EvolveOptions {
    pub step: f64,
    pub trace_tol: f64,
    pub herm_tol: f64,
}

impl EvolveOptions {
    pub fn with_step(step: f64) -> Self {
        EvolveOptions { step, trace_tol: 1e-6, herm_tol: 1e-8 }
    }
}

fn trace(rho: &StateMatrix) -> C64 {
    (0..rho.nrows()).map(|i| rho[(i, i)]).sum()
}

fn hermiticity_defect(rho: &StateMatrix) -> f64 {
    let n = rho.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (rho[(i, j)] - rho[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

/// Integrate the master equation over `[t0, t1]`, recording `observables` at
/// `n_samples` evenly spaced times (including both endpoints). Returns the
/// series and the final state.
pub fn evolve(
    rho0: &StateMatrix,
    h: &Hamiltonian,
    channels: &[CollapseChannel],
    t_span: (f64, f64),
    n_samples: usize,
    observables: &[Observable],
    opts: &EvolveOptions,
) -> Result<(TimeSeries, StateMatrix), DynamicsError> {
    let (t0, t1) = t_span;
    assert!(t1 > t0 && t1.is_finite() && t0.is_finite(), "bad time span [{t0}, {t1}]");
    assert!(n_samples >= 2, "need at least the two endpoint samples");
    assert!(opts.step > 0.0, "step must be positive");
    let dim = rho0.nrows();
    let prepared = prepare(channels);

    let names: Vec<&str> = observables.iter().map(|o| o.name()).collect();
    let mut series = TimeSeries::new(&names);
    let mut rho = rho0.clone();

    let mut k1: StateMatrix = Array2::zeros((dim, dim));
    let mut k2: StateMatrix = Array2::zeros((dim, dim));
    let mut k3: StateMatrix = Array2::zeros((dim, dim));
    let mut k4: StateMatrix = Array2::zeros((dim, dim));
    let mut stage: StateMatrix = Array2::zeros((dim, dim));
    let mut scratch: StateMatrix = Array2::zeros((dim, dim));

    let record = |series: &mut TimeSeries, t: f64, rho: &StateMatrix| {
        let vals: Vec<f64> = observables.iter().map(|o| o.measure(rho)).collect();
        series.push(t, &vals);
    };
    let check = |t: f64, rho: &StateMatrix| -> Result<(), DynamicsError> {
        // `!(x <= tol)` so a NaN state aborts instead of passing the test.
        let drift = (trace(rho) - C64::new(1.0, 0.0)).norm();
        if !(drift <= opts.trace_tol) {
            return Err(DynamicsError::TraceDrift { t, drift, step: opts.step });
        }
        let herm = hermiticity_defect(rho);
        if !(herm <= opts.herm_tol) {
            return Err(DynamicsError::HermiticityDrift { t, drift: herm, step: opts.step });
        }
        Ok(())
    };

    record(&mut series, t0, &rho);
    check(t0, &rho)?;

    let sample_dt = (t1 - t0) / (n_samples - 1) as f64;
    for s in 1..n_samples {
        let seg_start = t0 + sample_dt * (s - 1) as f64;
        let seg_end = if s == n_samples - 1 { t1 } else { t0 + sample_dt * s as f64 };
        let n_sub = ((seg_end - seg_start) / opts.step).ceil().max(1.0) as usize;
        let dt = (seg_end - seg_start) / n_sub as f64;
        for sub in 0..n_sub {
            let t = seg_start + dt * sub as f64;
            let half = C64::new(dt / 2.0, 0.0);
            let sixth = C64::new(dt / 6.0, 0.0);
            let third = C64::new(dt / 3.0, 0.0);
            match h {
                Hamiltonian::Constant(hm) => {
                    rhs_into(&mut k1, &mut scratch, &rho, hm, &prepared);
                    stage.assign(&rho);
                    stage.scaled_add(half, &k1);
                    rhs_into(&mut k2, &mut scratch, &stage, hm, &prepared);
                    stage.assign(&rho);
                    stage.scaled_add(half, &k2);
                    rhs_into(&mut k3, &mut scratch, &stage, hm, &prepared);
                    stage.assign(&rho);
                    stage.scaled_add(C64::new(dt, 0.0), &k3);
                    rhs_into(&mut k4, &mut scratch, &stage, hm, &prepared);
                }
                Hamiltonian::TimeDependent(build) => {
                    let h_start = build(t);
                    let h_mid = build(t + dt / 2.0);
                    let h_end = build(t + dt);
                    rhs_into(&mut k1, &mut scratch, &rho, &h_start, &prepared);
                    stage.assign(&rho);
                    stage.scaled_add(half, &k1);
                    rhs_into(&mut k2, &mut scratch, &stage, &h_mid, &prepared);
                    stage.assign(&rho);
                    stage.scaled_add(half, &k2);
                    rhs_into(&mut k3, &mut scratch, &stage, &h_mid, &prepared);
                    stage.assign(&rho);
                    stage.scaled_add(C64::new(dt, 0.0), &k3);
                    rhs_into(&mut k4, &mut scratch, &stage, &h_end, &prepared);
                }
            }
            rho.scaled_add(sixth, &k1);
            rho.scaled_add(third, &k2);
            rho.scaled_add(third, &k3);
            rho.scaled_add(sixth, &k4);
        }
        record(&mut series, seg_end, &rho);
        check(seg_end, &rho)?;
    }
    Ok((series, rho))
}

/// `evolve`, halving the step until the drift checks pass (at most
/// `max_halvings` times). The spec's step policy gives a sensible starting
/// step; this wrapper guarantees the result honors the tolerances.
pub fn evolve_auto(
    rho0: &StateMatrix,
    h: &Hamiltonian,
    channels: &[CollapseChannel],
    t_span: (f64, f64),
    n_samples: usize,
    observables: &[Observable],
    opts: &EvolveOptions,
    max_halvings: usize,
) -> Result<(TimeSeries, StateMatrix), DynamicsError> {
    let mut current = *opts;
    for _ in 0..=max_halvings {
        match evolve(rho0, h, channels, t_span, n_samples, observables, &current) {
            Err(DynamicsError::TraceDrift { .. }) | Err(DynamicsError::HermiticityDrift { .. }) => {
                current.step /= 2.0;
            }
            other => return other,
        }
    }
    Err(DynamicsError::RefinementExhausted { attempts: max_halvings, step: current.step })
}

/// Step policy: the shortest relevant timescale over `divisor`. `None`
/// entries are timescales that do not apply (no drive, no detuning).
pub fn policy_step(
    tau_sr: f64,
    lambda_max: Option<f64>,
    max_detuning: Option<f64>,
    divisor: f64,
) -> f64 {
    let mut scale = tau_sr;
    if let Some(l) = lambda_max {
        scale = scale.min(1.0 / l);
    }
    if let Some(d) = max_detuning {
        if d > 0.0 {
            scale = scale.min(1.0 / d);
        }
    }
    scale / divisor
}
