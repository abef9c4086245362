//! Three-junction flux qubit: classical potential landscape and the charge
//! basis Hamiltonian whose two lowest levels define the qubit.
//!
//! The loop holds two nominally identical junctions (Josephson energies
//! `beta1 * ej`, `beta2 * ej`) and one smaller junction (`alpha * ej`). With
//! half a flux quantum threading the loop the potential forms a double well
//! in the phase coordinates and the two lowest eigenstates are symmetric and
//! antisymmetric combinations of opposite persistent currents.
//!
//! Quantization happens on the integer charge lattice conjugate to the two
//! independent junction phases. In those variables the external flux `f`
//! enters as a phase on the small-junction hop and the kinetic form is the
//! inverse of the capacitance matrix, so every matrix element is an exact
//! closed form; no discretized derivatives are involved.

pub mod eigen;

use ndarray::Array1;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::sparse::CsrMatrix;
use eigen::{lowest_eigenpairs, EigenError, EigenPairs};

/// Charge states per quadrature run from `-cutoff` to `+cutoff`; 12 keeps the
/// truncation error orders of magnitude below the fit residuals at the
/// default charging ratio.
pub const DEFAULT_CUTOFF: usize = 12;

pub const PLANCK_H: f64 = 6.62607015e-34;
pub const FLUX_QUANTUM: f64 = 2.067833848e-15;

/// Flux offsets (in units of the flux quantum) used for the persistent
/// current fit around the symmetry point.
pub const IP_FIT_OFFSETS: [f64; 3] = [1e-3, 3e-3, 5e-3];

#[derive(Error, Debug)]
pub enum CircuitError {
    #[error("junction parameter {name} = {value} must be positive and finite")]
    BadParameter { name: &'static str, value: f64 },
    #[error("alpha = {0} gives no double well; need alpha > 0.5")]
    NoDoubleWell(f64),
    #[error("basis cutoff {0} is too small; need at least 2")]
    CutoffTooSmall(usize),
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// External flux through the loop, in units of the flux quantum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxBias(pub f64);

impl FluxBias {
    /// Half a flux quantum, where the double well is symmetric.
    pub const SYMMETRY_POINT: FluxBias = FluxBias(0.5);

    pub fn value(self) -> f64 {
        self.0
    }

    /// Detuning from the symmetry point.
    pub fn detuning(self) -> f64 {
        self.0 - 0.5
    }
}

/// One qubit's junction parameters. `beta1`, `beta2` scale the two large
/// junctions (unity when fabricated perfectly), `alpha` the small one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JunctionSet {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Josephson energy of a nominal large junction, GHz.
    pub ej_ghz: f64,
    /// Ratio of Josephson to charging energy of a nominal large junction.
    pub ej_over_ec: f64,
}

impl JunctionSet {
    pub fn new(
        alpha: f64,
        beta1: f64,
        beta2: f64,
        ej_ghz: f64,
        ej_over_ec: f64,
    ) -> Result<Self, CircuitError> {
        let check = |name: &'static str, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(CircuitError::BadParameter { name, value })
            }
        };
        check("alpha", alpha)?;
        check("beta1", beta1)?;
        check("beta2", beta2)?;
        check("ej_ghz", ej_ghz)?;
        check("ej_over_ec", ej_over_ec)?;
        Ok(JunctionSet { alpha, beta1, beta2, ej_ghz, ej_over_ec })
    }

    /// Ideal device: both large junctions at their design value.
    pub fn symmetric(alpha: f64, ej_ghz: f64, ej_over_ec: f64) -> Result<Self, CircuitError> {
        JunctionSet::new(alpha, 1.0, 1.0, ej_ghz, ej_over_ec)
    }

    /// Charging energy of a nominal large junction, GHz.
    pub fn ec_ghz(&self) -> f64 {
        self.ej_ghz / self.ej_over_ec
    }
}

/// Potential energy in units of `ej` for an ideal device (`beta1 = beta2
/// = 1`), as a function of the sum and difference phases.
pub fn potential(phi_p: f64, phi_m: f64, f: FluxBias, alpha: f64) -> f64 {
    2.0 + alpha
        - (phi_p + phi_m).cos()
        - (phi_p - phi_m).cos()
        - alpha * (2.0 * PI * f.0 - 2.0 * phi_m).cos()
}

/// Locations `(+phi_m*, -phi_m*)` of the two degenerate minima along the
/// difference phase at the symmetry point (`phi_p = 0` there).
pub fn potential_minima(alpha: f64) -> Result<(f64, f64), CircuitError> {
    if !(alpha > 0.5) || !alpha.is_finite() {
        return Err(CircuitError::NoDoubleWell(alpha));
    }
    let phi = (1.0 / (2.0 * alpha)).acos();
    Ok((phi, -phi))
}

/// Height of the barrier between the two wells at the symmetry point, in
/// units of `ej`: the saddle sits at the origin.
pub fn barrier_height(alpha: f64) -> Result<f64, CircuitError> {
    if !(alpha > 0.5) || !alpha.is_finite() {
        return Err(CircuitError::NoDoubleWell(alpha));
    }
    Ok(2.0 * alpha - 2.0 + 1.0 / (2.0 * alpha))
}

/// Sensitivity of the well energy to flux at the symmetry point,
/// `|dU/df|` in units of `ej` per flux quantum. This classical slope is the
/// persistent current in natural units and anchors the quantum fit.
pub fn potential_gradient(alpha: f64) -> Result<f64, CircuitError> {
    if !(alpha > 0.5) || !alpha.is_finite() {
        return Err(CircuitError::NoDoubleWell(alpha));
    }
    Ok(2.0 * PI * (1.0 - 1.0 / (4.0 * alpha * alpha)).sqrt())
}

fn lattice_index(n1: i64, n2: i64, cutoff: i64) -> usize {
    let side = (2 * cutoff + 1) as usize;
    ((n1 + cutoff) as usize) * side + ((n2 + cutoff) as usize)
}

/// Hamiltonian on the charge lattice `(n1, n2)`, both charges within
/// `[-cutoff, cutoff]`, in GHz. Hermitian by construction; complex off the
/// symmetry point because the flux phase on the small-junction hop cannot be
/// gauged away.
pub fn charge_basis_hamiltonian(
    junctions: &JunctionSet,
    f: FluxBias,
    cutoff: usize,
) -> Result<CsrMatrix, CircuitError> {
    if cutoff < 2 {
        return Err(CircuitError::CutoffTooSmall(cutoff));
    }
    let JunctionSet { alpha, beta1, beta2, ej_ghz: ej, .. } = *junctions;
    let ec4 = 4.0 * junctions.ec_ghz();
    let det = beta1 * beta2 + alpha * (beta1 + beta2);
    // inverse capacitance matrix (per 4 Ec), exact for the three-junction loop
    let m11 = (beta2 + alpha) / det;
    let m12 = alpha / det;
    let m22 = (beta1 + alpha) / det;
    let josephson_offset = ej * (beta1 + beta2 + alpha);
    let phase = C64::from_polar(1.0, 2.0 * PI * f.0);

    let k = cutoff as i64;
    let side = 2 * cutoff + 1;
    let dim = side * side;
    let mut trips: Vec<(usize, usize, C64)> = Vec::with_capacity(5 * dim);
    for n1 in -k..=k {
        for n2 in -k..=k {
            let i = lattice_index(n1, n2, k);
            let x1 = n1 as f64;
            let x2 = n2 as f64;
            let kinetic = ec4 * (m11 * x1 * x1 + 2.0 * m12 * x1 * x2 + m22 * x2 * x2);
            trips.push((i, i, C64::new(kinetic + josephson_offset, 0.0)));
            if n1 < k {
                let j = lattice_index(n1 + 1, n2, k);
                let v = C64::new(-ej * beta1 / 2.0, 0.0);
                trips.push((i, j, v));
                trips.push((j, i, v));
            }
            if n2 < k {
                let j = lattice_index(n1, n2 + 1, k);
                let v = C64::new(-ej * beta2 / 2.0, 0.0);
                trips.push((i, j, v));
                trips.push((j, i, v));
            }
            if n1 > -k && n2 < k {
                // small junction moves one charge across both nodes and
                // picks up the loop flux
                let j = lattice_index(n1 - 1, n2 + 1, k);
                let v = -ej * alpha / 2.0 * phase;
                trips.push((j, i, v));
                trips.push((i, j, v.conj()));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(dim, dim, trips))
}

/// Lowest levels of one device at one flux bias. Energies in GHz, ascending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub f: FluxBias,
    pub levels_ghz: Vec<f64>,
    pub dim: usize,
    pub iterations: usize,
}

impl Spectrum {
    /// Splitting of the two lowest levels, GHz.
    pub fn gap_ghz(&self) -> f64 {
        self.levels_ghz[1] - self.levels_ghz[0]
    }
}

const EIGEN_TOL: f64 = 1e-11;
const EIGEN_MAX_ITER: usize = 2000;

fn solve(
    junctions: &JunctionSet,
    f: FluxBias,
    cutoff: usize,
    nev: usize,
    warm: Option<&EigenPairs>,
) -> Result<(Spectrum, EigenPairs), CircuitError> {
    let h = charge_basis_hamiltonian(junctions, f, cutoff)?;
    let pairs = lowest_eigenpairs(&h, nev, EIGEN_TOL, EIGEN_MAX_ITER, warm)?;
    let spectrum = Spectrum {
        f,
        levels_ghz: pairs.values[..nev].to_vec(),
        dim: h.nrows(),
        iterations: pairs.iterations,
    };
    Ok((spectrum, pairs))
}

/// Lowest `nev` levels at flux `f`.
pub fn diagonalize(
    junctions: &JunctionSet,
    f: FluxBias,
    cutoff: usize,
    nev: usize,
) -> Result<Spectrum, CircuitError> {
    solve(junctions, f, cutoff, nev, None).map(|(s, _)| s)
}

/// Two-level reduction of one device: gap at the symmetry point plus the
/// persistent-current slope from a quadratic fit of the transition frequency
/// against flux detuning.
#[derive(Clone, Copy, Debug)]
pub struct QubitParams {
    /// Tunnel splitting at the symmetry point, GHz.
    pub delta_ghz: f64,
    /// Persistent-current slope `d(hf)/d(flux)` expressed in GHz per flux
    /// quantum; enters the spectrum as `sqrt((slope * (f - 1/2))^2 + delta^2)`.
    pub ip_slope_ghz: f64,
    /// Root-mean-square misfit of the two-level form over the fit window,
    /// GHz.
    pub fit_rms_ghz: f64,
}

impl QubitParams {
    /// Persistent current in amperes: `slope * h / (2 Phi_0)`.
    pub fn ip_amperes(&self) -> f64 {
        self.ip_slope_ghz * 1e9 * PLANCK_H / (2.0 * FLUX_QUANTUM)
    }

    /// Transition frequency at flux `f`, GHz.
    pub fn frequency_ghz(&self, f: FluxBias) -> f64 {
        let eps = self.ip_slope_ghz * f.detuning();
        (eps * eps + self.delta_ghz * self.delta_ghz).sqrt()
    }
}

/// Extract `QubitParams` by diagonalizing at the symmetry point and at small
/// flux offsets to both sides.
///
/// The spectrum is exactly symmetric under `f -> 1 - f` (complex conjugation
/// of the Hamiltonian), so only the positive offsets are solved and each gap
/// is counted for both signs. The slope comes from a through-origin least
/// squares fit of `gap^2 - delta^2` against `(f - 1/2)^2`.
pub fn extract_qubit_params(
    junctions: &JunctionSet,
    cutoff: usize,
) -> Result<QubitParams, CircuitError> {
    let (center, mut warm) = solve(junctions, FluxBias::SYMMETRY_POINT, cutoff, 2, None)?;
    let delta = center.gap_ghz();
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut gaps = Vec::with_capacity(IP_FIT_OFFSETS.len());
    for &off in IP_FIT_OFFSETS.iter() {
        let (s, pairs) = solve(junctions, FluxBias(0.5 + off), cutoff, 2, Some(&warm))?;
        warm = pairs;
        let gap = s.gap_ghz();
        gaps.push(gap);
        let x = off * off;
        let y = gap * gap - delta * delta;
        // mirrored offset contributes the identical point; weight it twice
        sxx += 2.0 * x * x;
        sxy += 2.0 * x * y;
    }
    let slope_sq = (sxy / sxx).max(0.0);
    let ip_slope = slope_sq.sqrt();
    let params = QubitParams { delta_ghz: delta, ip_slope_ghz: ip_slope, fit_rms_ghz: 0.0 };
    let mut sq_err = 0.0;
    let mut count = 1.0; // the center point fits exactly by construction
    for (off, gap) in IP_FIT_OFFSETS.iter().zip(gaps.iter()) {
        let model = params.frequency_ghz(FluxBias(0.5 + off));
        sq_err += 2.0 * (model - gap) * (model - gap);
        count += 2.0;
    }
    Ok(QubitParams { fit_rms_ghz: (sq_err / count).sqrt(), ..params })
}

/// Ground-state expectation of the charge-lattice occupation spread;
/// diagnostic for the basis truncation (a converged state has negligible
/// weight at the boundary).
pub fn boundary_weight(vector: &Array1<C64>, cutoff: usize) -> f64 {
    let k = cutoff as i64;
    let mut w = 0.0;
    for n1 in -k..=k {
        for n2 in -k..=k {
            if n1.abs() == k || n2.abs() == k {
                w += vector[lattice_index(n1, n2, k)].norm_sqr();
            }
        }
    }
    w
}
