//! Product-state propagation through the drive window.
//!
//! While the drive is on the cavity stays empty and dissipation is switched
//! off, so the Hamiltonian is a plain sum of single-qubit terms. A product
//! state therefore stays a product state for the whole window and each qubit
//! can be integrated as an independent two-level Schrodinger equation. That
//! replaces a 4^N master-equation solve with N trivial 2x2 ones, and the
//! result is exact rather than an approximation: `drive_product_state`
//! agrees with the full-space propagator to integrator accuracy.

use num_complex::Complex64 as C64;

use super::{DriveSpec, DynamicsError, SpinModel};

/// Per-qubit state after the pulse plus the derived excitation count.
#[derive(Clone, Debug)]
pub struct DriveOutcome {
    /// `(ground, excited)` amplitude pair for each qubit, in the drive frame.
    pub amplitudes: Vec<(C64, C64)>,
    /// Total excited population `sum_j |e_j|^2`, the measured M.
    pub m_measured: f64,
    /// Worst per-qubit deviation of `|g|^2 + |e|^2` from 1.
    pub norm_defect: f64,
}

/// Single-qubit Schrodinger derivative in the frame rotating at the drive
/// frequency: H = (detuning/2) sigma_z + (lambda/2) sigma_x with the ground
/// component first.
#[inline]
fn deriv(detuning: f64, lambda: f64, psi: (C64, C64)) -> (C64, C64) {
    let (g, e) = psi;
    let half_d = 0.5 * detuning;
    let half_l = 0.5 * lambda;
    // d psi / dt = -i H psi
    let hg = -half_d * g + half_l * e;
    let he = half_l * g + half_d * e;
    (C64::new(0.0, -1.0) * hg, C64::new(0.0, -1.0) * he)
}

/// Drive every qubit from its ground state through the full `[0, 2b]`
/// window with fixed-step RK4.
///
/// The returned amplitudes feed straight into
/// [`product_state_density`](super::ops::product_state_density) or the
/// sector engine for the decay phase. The change of rotating frame between
/// the drive (at `omega_d`) and the decay analysis (at the ensemble mean)
/// multiplies every excited amplitude by one common phase, which cancels in
/// every excitation-diagonal observable, so no frame correction is applied
/// here.
pub fn drive_product_state(
    model: &SpinModel,
    drive: &DriveSpec,
    step: f64,
) -> Result<DriveOutcome, DynamicsError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(DynamicsError::BadModel {
            what: "drive integration",
            field: "step",
            value: step,
            requirement: "finite and positive",
        });
    }
    let window = drive.window();
    let n_steps = (window / step).ceil().max(1.0) as usize;
    let dt = window / n_steps as f64;

    let mut amplitudes = Vec::with_capacity(model.n_qubits());
    let mut m_measured = 0.0;
    let mut norm_defect = 0.0f64;
    for &omega in &model.omegas {
        let detuning = omega - drive.omega_d;
        let mut psi = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        let mut t = 0.0;
        for _ in 0..n_steps {
            let lam_0 = drive.envelope(t);
            let lam_h = drive.envelope(t + 0.5 * dt);
            let lam_1 = drive.envelope(t + dt);

            let k1 = deriv(detuning, lam_0, psi);
            let k2 = deriv(detuning, lam_h, (psi.0 + 0.5 * dt * k1.0, psi.1 + 0.5 * dt * k1.1));
            let k3 = deriv(detuning, lam_h, (psi.0 + 0.5 * dt * k2.0, psi.1 + 0.5 * dt * k2.1));
            let k4 = deriv(detuning, lam_1, (psi.0 + dt * k3.0, psi.1 + dt * k3.1));

            let w = dt / 6.0;
            psi.0 += w * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            psi.1 += w * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            t += dt;
        }
        let norm = psi.0.norm_sqr() + psi.1.norm_sqr();
        norm_defect = norm_defect.max((norm - 1.0).abs());
        m_measured += psi.1.norm_sqr();
        amplitudes.push(psi);
    }
    Ok(DriveOutcome { amplitudes, m_measured, norm_defect })
}

/// Default drive step: the fastest competing timescale (Rabi at peak
/// amplitude or the largest detuning beat) divided by `divisor`.
pub fn drive_step(model: &SpinModel, drive: &DriveSpec, divisor: f64) -> f64 {
    assert!(divisor > 0.0, "divisor must be positive");
    let max_det = model
        .omegas
        .iter()
        .map(|w| (w - drive.omega_d).abs())
        .fold(0.0f64, f64::max);
    let mut scale = 1.0 / drive.lambda_max;
    if max_det > 0.0 {
        scale = scale.min(1.0 / max_det);
    }
    scale / divisor
}
