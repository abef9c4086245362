//! The ensemble Hamiltonians: cavity adiabatically eliminated (the
//! production model), the dispersive approximation, and the full
//! qubit-cavity model kept for validation.

use num_complex::Complex64 as C64;

use super::ops::{collective_ops, CollectiveOps};
use super::{DriveSpec, DynamicsError, SpinModel};
use crate::sparse::CsrMatrix;

/// Coefficients the elimination produces: a collective shift on `J+J-` and a
/// collective decay rate for `D[J-]`. The raw elimination delivers
/// `kappa g^2 / Gamma^2` with complex `Gamma = kappa + i chi`; a decay rate
/// must be real, so the modulus-squared splits it into a rate and a shift.
#[derive(Clone, Copy, Debug)]
pub struct EliminationCoefficients {
    /// Hermitian J+J- coefficient, rad/ns.
    pub collective_shift: f64,
    /// D[J-] rate, rad/ns; `g^2/kappa` on resonance.
    pub collective_rate: f64,
}

pub fn elimination_coefficients(m: &SpinModel) -> EliminationCoefficients {
    let chi = m.chi();
    let gamma = C64::new(m.kappa, chi);
    let gamma2 = gamma * gamma;
    let shift = (C64::new(chi * m.g * m.g, 0.0) / gamma2).re;
    EliminationCoefficients {
        collective_shift: shift,
        collective_rate: m.kappa * m.g * m.g / gamma.norm_sqr(),
    }
}

/// Collective emission rate `kappa g^2 / |Gamma|^2`, rad/ns.
pub fn superradiant_rate(m: &SpinModel) -> f64 {
    elimination_coefficients(m).collective_rate
}

/// Ensemble Hamiltonian after the cavity is eliminated, in the frame
/// rotating at the configured mean frequency:
/// `sum_j (omega_j - omega_bar)/2 sigma_z_j + shift J+J-`.
pub fn h_ae(m: &SpinModel, ops: &CollectiveOps) -> CsrMatrix {
    assert_eq!(ops.n, m.n_qubits(), "operator set built for a different qubit count");
    let dim = 1usize << ops.n;
    let detunings = m.detunings();
    let mut trips: Vec<(usize, usize, C64)> = Vec::with_capacity(dim);
    for i in 0..dim {
        let e: f64 = detunings
            .iter()
            .enumerate()
            .map(|(j, d)| if i & (1 << j) != 0 { d / 2.0 } else { -d / 2.0 })
            .sum();
        if e != 0.0 {
            trips.push((i, i, C64::new(e, 0.0)));
        }
    }
    let diag = CsrMatrix::from_triplets(dim, dim, trips);
    let shift = elimination_coefficients(m).collective_shift;
    if shift == 0.0 {
        diag
    } else {
        let jpjm = ops.jp.matmul(&ops.jm);
        diag.linear_combination(C64::new(1.0, 0.0), &jpjm, C64::new(shift, 0.0))
    }
}

/// Drive-phase Hamiltonian at time `t`:
/// `sum_j (omega_j - omega_d)/2 sigma_z_j + lambda(t)/2 sum_j sigma_x_j`.
/// The cavity terms are absent; during the drive the ensemble is far
/// detuned from the cavity.
pub fn drive_hamiltonian(m: &SpinModel, d: &DriveSpec, ops: &CollectiveOps, t: f64) -> CsrMatrix {
    assert_eq!(ops.n, m.n_qubits(), "operator set built for a different qubit count");
    let dim = 1usize << ops.n;
    let lam = d.envelope(t);
    let mut trips: Vec<(usize, usize, C64)> = Vec::with_capacity(dim * (ops.n + 1));
    for i in 0..dim {
        let e: f64 = m
            .omegas
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let dj = w - d.omega_d;
                if i & (1 << j) != 0 {
                    dj / 2.0
                } else {
                    -dj / 2.0
                }
            })
            .sum();
        if e != 0.0 {
            trips.push((i, i, C64::new(e, 0.0)));
        }
        if lam != 0.0 {
            for j in 0..ops.n {
                trips.push((i ^ (1 << j), i, C64::new(lam / 2.0, 0.0)));
            }
        }
    }
    CsrMatrix::from_triplets(dim, dim, trips)
}

/// Emitted energy flux in units where `omega_c` carries the photon energy:
/// `(2 g^2 / kappa) omega_c <J+J->`.
pub fn intensity(m: &SpinModel, jpjm_expectation: f64) -> f64 {
    debug_assert!(jpjm_expectation >= -1e-9, "negative <J+J-> = {jpjm_expectation}");
    2.0 * m.g * m.g / m.kappa * m.omega_c * jpjm_expectation
}

/// Expected peak time of the superradiant burst for `mm` initially excited
/// qubits: `kappa / (g^2 mm)`, ns.
pub fn sr_time(m: &SpinModel, mm: f64) -> f64 {
    assert!(mm > 0.0, "sr_time needs a positive excitation count");
    m.kappa / (m.g * m.g * mm)
}

/// Superradiance visibility `M g^2 / (kappa delta_omega)`: collective gain of
/// the brightest pulse against inhomogeneous dephasing. Above one the burst
/// outruns the dephasing.
pub fn visibility(m: &SpinModel, mm: f64) -> f64 {
    mm * m.g * m.g / (m.kappa * m.delta_omega)
}

/// Dispersive-regime reduction: Hamiltonian with the cavity replaced by a
/// mean photon number, the companion collective decay rate, and the
/// small-parameter check.
#[derive(Clone, Debug)]
pub struct DispersiveModel {
    pub hamiltonian: CsrMatrix,
    /// D[J-] rate `kappa g^2 / chi^2`, rad/ns.
    pub rate: f64,
    /// `(g/chi)^2`, which must be small for the expansion to hold.
    pub expansion_parameter: f64,
    /// True when `(g/chi)^2 < 0.1`.
    pub valid: bool,
}

/// Dispersive Hamiltonian `sum_j (omega_j/2 + beta n_bar) sigma_z_j +
/// (beta/2) J+J-` with `beta = 2 g^2 / chi`.
pub fn h_dispersive(
    m: &SpinModel,
    ops: &CollectiveOps,
    photon_number: f64,
) -> Result<DispersiveModel, DynamicsError> {
    assert_eq!(ops.n, m.n_qubits(), "operator set built for a different qubit count");
    let chi = m.chi();
    if chi == 0.0 {
        return Err(DynamicsError::ZeroDetuning);
    }
    let beta = 2.0 * m.g * m.g / chi;
    let dim = 1usize << ops.n;
    let mut trips: Vec<(usize, usize, C64)> = Vec::with_capacity(dim);
    for i in 0..dim {
        let e: f64 = m
            .omegas
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let coeff = w / 2.0 + beta * photon_number;
                if i & (1 << j) != 0 {
                    coeff
                } else {
                    -coeff
                }
            })
            .sum();
        if e != 0.0 {
            trips.push((i, i, C64::new(e, 0.0)));
        }
    }
    let diag = CsrMatrix::from_triplets(dim, dim, trips);
    let jpjm = ops.jp.matmul(&ops.jm);
    let hamiltonian =
        diag.linear_combination(C64::new(1.0, 0.0), &jpjm, C64::new(beta / 2.0, 0.0));
    let expansion_parameter = (m.g / chi) * (m.g / chi);
    Ok(DispersiveModel {
        hamiltonian,
        rate: m.kappa * m.g * m.g / (chi * chi),
        expansion_parameter,
        valid: expansion_parameter < 0.1,
    })
}

/// Dispersive visibility `g^2 N kappa / (chi^2 delta_omega)`.
pub fn dispersive_visibility(m: &SpinModel) -> Result<f64, DynamicsError> {
    let chi = m.chi();
    if chi == 0.0 {
        return Err(DynamicsError::ZeroDetuning);
    }
    Ok(m.g * m.g * m.n_qubits() as f64 * m.kappa / (chi * chi * m.delta_omega))
}

/// Full qubit-cavity model for validating the elimination: Hamiltonian plus
/// the cavity annihilation operator (the `D[a]` collapse channel at rate
/// `kappa`). Qubits are the leading tensor factor, the cavity Fock space
/// (dimension `photon_cutoff + 1`) the trailing one.
#[derive(Clone, Debug)]
pub struct TavisCummingsModel {
    pub h: CsrMatrix,
    pub a: CsrMatrix,
    pub dim: usize,
}

const MAX_TC_QUBITS: usize = 4;
const MAX_TC_PHOTONS: usize = 20;

pub fn h_full_tavis_cummings(
    m: &SpinModel,
    photon_cutoff: usize,
) -> Result<TavisCummingsModel, DynamicsError> {
    let n = m.n_qubits();
    if n > MAX_TC_QUBITS || photon_cutoff > MAX_TC_PHOTONS {
        return Err(DynamicsError::CavityGuard {
            n,
            cutoff: photon_cutoff,
            max_qubits: MAX_TC_QUBITS,
            max_photons: MAX_TC_PHOTONS,
        });
    }
    let ops = collective_ops(n)?;
    let nph = photon_cutoff + 1;
    let qdim = 1usize << n;

    let a_cav = CsrMatrix::from_triplets(
        nph,
        nph,
        (1..nph).map(|k| (k - 1, k, C64::new((k as f64).sqrt(), 0.0))).collect(),
    );
    let number_cav = CsrMatrix::from_triplets(
        nph,
        nph,
        (1..nph).map(|k| (k, k, C64::new(k as f64, 0.0))).collect(),
    );
    let id_cav = CsrMatrix::identity(nph);
    let id_q = CsrMatrix::identity(qdim);

    // sum_j omega_j/2 sigma_z_j as a diagonal on the qubit factor
    let qdiag = CsrMatrix::from_triplets(
        qdim,
        qdim,
        (0..qdim)
            .filter_map(|i| {
                let e: f64 = m
                    .omegas
                    .iter()
                    .enumerate()
                    .map(|(j, w)| if i & (1 << j) != 0 { w / 2.0 } else { -w / 2.0 })
                    .sum();
                (e != 0.0).then_some((i, i, C64::new(e, 0.0)))
            })
            .collect(),
    );

    let one = C64::new(1.0, 0.0);
    let h = qdiag
        .kron(&id_cav)
        .linear_combination(one, &id_q.kron(&number_cav), C64::new(m.omega_c, 0.0))
        .linear_combination(one, &ops.jm.kron(&a_cav.dagger()), C64::new(m.g, 0.0))
        .linear_combination(one, &ops.jp.kron(&a_cav), C64::new(m.g, 0.0));
    Ok(TavisCummingsModel { h, a: id_q.kron(&a_cav), dim: qdim * nph })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    fn mhz(v: f64) -> f64 {
        // plain MHz to angular rad/ns
        v * 2.0 * PI * 1e-3
    }

    fn resonant_model(n: usize, g: f64, kappa: f64) -> SpinModel {
        SpinModel::new(vec![0.0; n], 0.0, 0.0, 0.0, g, kappa).unwrap()
    }

    #[test]
    fn rate_on_resonance_and_limits() {
        let m = resonant_model(2, 0.05, 0.4);
        assert_relative_eq!(superradiant_rate(&m), 0.05 * 0.05 / 0.4, max_relative = 1e-15);
        // detuned by exactly kappa: half the resonant rate
        let det = SpinModel::new(vec![0.0; 2], 0.0, 0.0, 0.4, 0.05, 0.4).unwrap();
        assert_relative_eq!(
            superradiant_rate(&det),
            0.05 * 0.05 / (2.0 * 0.4),
            max_relative = 1e-15
        );
        // huge kappa kills the rate
        let lossy = SpinModel::new(vec![0.0; 2], 0.0, 0.0, 0.0, 0.05, 4e6).unwrap();
        assert!(superradiant_rate(&lossy) < 1e-9);
    }

    #[test]
    fn paper_unit_arithmetic() {
        // g = 50 MHz, kappa = 400 MHz: rate g^2/kappa = 6.25 MHz
        let m = SpinModel::new(vec![0.0; 2], 0.0, 0.0, 0.0, mhz(50.0), mhz(400.0)).unwrap();
        assert_relative_eq!(superradiant_rate(&m), mhz(6.25), max_relative = 1e-12);
        // M = 10 burst peaks at kappa/(g^2 M); in plain-frequency arithmetic
        // 400/(50^2 * 10) MHz^-1 = 16 ns, and the 2 pi conversions cancel all
        // but one factor
        assert_relative_eq!(sr_time(&m, 10.0), 16.0 / (2.0 * PI), max_relative = 1e-12);
        // intensity prefactor: 2 g^2/kappa = 12.5 MHz at <J+J-> = 1
        let mc = SpinModel::new(vec![0.0; 2], 0.0, 0.0, 1.0, mhz(50.0), mhz(400.0)).unwrap();
        assert_relative_eq!(intensity(&mc, 1.0), mhz(12.5) * 1.0, max_relative = 1e-12);
        // visibility 1.0 at M = 4 with delta_omega = 25 MHz
        let mv =
            SpinModel::new(vec![0.0; 2], 0.0, mhz(25.0), 0.0, mhz(50.0), mhz(400.0)).unwrap();
        assert_relative_eq!(visibility(&mv, 4.0), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn h_ae_vanishes_on_resonance_homogeneous() {
        let m = resonant_model(3, 0.05, 0.4);
        let ops = collective_ops(3).unwrap();
        let h = h_ae(&m, &ops);
        assert_eq!(h.nnz(), 0);
    }

    #[test]
    fn h_ae_diagonal_detunings_on_resonance() {
        let m = SpinModel::new(vec![0.1, -0.1], 0.0, 0.1, 0.0, 0.05, 0.4).unwrap();
        let ops = collective_ops(2).unwrap();
        let h = h_ae(&m, &ops).to_dense();
        // basis order: |gg>, |eg>, |ge>, |ee> (bit 0 = qubit 0)
        assert_abs_diff_eq!(h[(0, 0)].re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h[(1, 1)].re, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(h[(2, 2)].re, -0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(h[(3, 3)].re, 0.0, epsilon = 1e-15);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(h[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn h_ae_shift_sign_below_kappa() {
        // omega_c above the ensemble with chi << kappa: positive shift
        let m = SpinModel::new(vec![0.0; 2], 0.0, 0.0, 0.04, 0.05, 0.4).unwrap();
        let c = elimination_coefficients(&m);
        assert!(c.collective_shift > 0.0);
        let m2 = SpinModel::new(vec![0.0; 2], 0.0, 0.0, -0.04, 0.05, 0.4).unwrap();
        assert!(elimination_coefficients(&m2).collective_shift < 0.0);
    }

    #[test]
    fn h_ae_is_hermitian() {
        let m = SpinModel::new(vec![0.11, -0.07, 0.02], 0.0, 0.07, 0.3, 0.05, 0.4).unwrap();
        let ops = collective_ops(3).unwrap();
        assert!(h_ae(&m, &ops).is_hermitian(1e-14));
    }

    #[test]
    fn drive_hamiltonian_shape() {
        let m = SpinModel::new(vec![0.1, 0.2], 0.15, 0.05, 0.0, 0.05, 0.4).unwrap();
        let d = DriveSpec::new(1.5, 0.15).unwrap();
        let ops = collective_ops(2).unwrap();
        // far from the pulse center the envelope is gone
        let h0 = drive_hamiltonian(&m, &d, &ops, 0.0).to_dense();
        assert!(h0[(1, 0)].norm() < 1e-9);
        assert_abs_diff_eq!(h0[(1, 1)].re, (0.1 - 0.15) / 2.0 - (0.2 - 0.15) / 2.0, epsilon = 1e-12);
        // at the center the sigma_x coefficient peaks at lambda_max / 2
        let hb = drive_hamiltonian(&m, &d, &ops, d.b).to_dense();
        assert_abs_diff_eq!(hb[(1, 0)].re, 1.5 / 2.0, epsilon = 1e-12);
        assert!(drive_hamiltonian(&m, &d, &ops, d.b).is_hermitian(1e-14));
    }

    #[test]
    fn dispersive_model_reference() {
        // paper check: g=50, N=10, kappa=400, chi=500, delta_omega=25 MHz
        // -> visibility 1.6 (the 2 pi factors cancel in the ratio)
        let m = SpinModel::new(
            vec![0.0; 10],
            0.0,
            mhz(25.0),
            mhz(500.0),
            mhz(50.0),
            mhz(400.0),
        )
        .unwrap();
        assert_relative_eq!(dispersive_visibility(&m).unwrap(), 1.6, max_relative = 1e-12);
        let ops = collective_ops(10).unwrap();
        let disp = h_dispersive(&m, &ops, 0.0).unwrap();
        assert_relative_eq!(
            disp.rate,
            mhz(400.0) * mhz(50.0).powi(2) / mhz(500.0).powi(2),
            max_relative = 1e-12
        );
        assert!(disp.valid, "(g/chi)^2 = {}", disp.expansion_parameter);
    }

    #[test]
    fn dispersive_beta_sign_follows_chi() {
        let ops = collective_ops(1).unwrap();
        let above = SpinModel::new(vec![1.0], 1.0, 0.0, 1.5, 0.05, 0.4).unwrap();
        let below = SpinModel::new(vec![1.0], 1.0, 0.0, 0.5, 0.05, 0.4).unwrap();
        // J+J- entry on |e><e| carries beta/2 + the sigma_z part
        let ha = h_dispersive(&above, &ops, 0.0).unwrap().hamiltonian.to_dense();
        let hb = h_dispersive(&below, &ops, 0.0).unwrap().hamiltonian.to_dense();
        let beta_a = 2.0 * 0.05 * 0.05 / 0.5;
        assert_abs_diff_eq!(ha[(1, 1)].re, 1.0 / 2.0 + beta_a / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hb[(1, 1)].re, 1.0 / 2.0 - beta_a / 2.0, epsilon = 1e-12);
        let resonant = SpinModel::new(vec![1.0], 1.0, 0.0, 1.0, 0.05, 0.4).unwrap();
        assert!(matches!(
            h_dispersive(&resonant, &ops, 0.0),
            Err(DynamicsError::ZeroDetuning)
        ));
    }

    #[test]
    fn tavis_cummings_conserves_excitation() {
        let m = SpinModel::new(vec![1.0, 1.1], 1.05, 0.05, 1.0, 0.05, 0.4).unwrap();
        let tc = h_full_tavis_cummings(&m, 3).unwrap();
        assert!(tc.h.is_hermitian(1e-13));
        // total excitation sum sigma_z/2 + a^dag a commutes with H
        let (qdim, nph) = (4usize, 4usize);
        let mut trips = Vec::new();
        for q in 0..qdim {
            for p in 0..nph {
                let idx = q * nph + p;
                let exc = (q as u32).count_ones() as f64 + p as f64;
                trips.push((idx, idx, C64::new(exc, 0.0)));
            }
        }
        let total = CsrMatrix::from_triplets(tc.dim, tc.dim, trips);
        let comm = tc.h.matmul(&total).linear_combination(
            C64::new(1.0, 0.0),
            &total.matmul(&tc.h),
            C64::new(-1.0, 0.0),
        );
        assert!(comm.max_abs_diff(&CsrMatrix::zeros(tc.dim, tc.dim)) < 1e-13);
    }

    #[test]
    fn tavis_cummings_coupling_is_linear_in_g() {
        // the g -> 0 limit is the decoupled qubit + cavity Hamiltonian;
        // since the coupling enters linearly, two builds at different g pin
        // the entire interaction term
        let make = |g: f64| {
            let m = SpinModel::new(vec![1.0, 1.3], 1.15, 0.15, 0.9, g, 0.4).unwrap();
            h_full_tavis_cummings(&m, 2).unwrap()
        };
        let tc1 = make(0.07);
        let tc2 = make(0.11);
        let diff = tc2.h.linear_combination(C64::new(1.0, 0.0), &tc1.h, C64::new(-1.0, 0.0));
        let ops = collective_ops(2).unwrap();
        let a_cav = CsrMatrix::from_triplets(
            3,
            3,
            (1..3).map(|k| (k - 1, k, C64::new((k as f64).sqrt(), 0.0))).collect(),
        );
        let coupling = ops.jm.kron(&a_cav.dagger()).linear_combination(
            C64::new(1.0, 0.0),
            &ops.jp.kron(&a_cav),
            C64::new(1.0, 0.0),
        );
        assert!(diff.max_abs_diff(&coupling.scale(C64::new(0.04, 0.0))) < 1e-14);
        // excitations swap between register and cavity but are never created:
        // [H, N_qubits] = -[H, N_cavity]
        let mut qn = Vec::new();
        let mut cn = Vec::new();
        for q in 0..4usize {
            for p in 0..3usize {
                let idx = q * 3 + p;
                qn.push((idx, idx, C64::new((q as u32).count_ones() as f64, 0.0)));
                cn.push((idx, idx, C64::new(p as f64, 0.0)));
            }
        }
        let qn = CsrMatrix::from_triplets(tc1.dim, tc1.dim, qn);
        let cn = CsrMatrix::from_triplets(tc1.dim, tc1.dim, cn);
        let comm = |a: &CsrMatrix, b: &CsrMatrix| {
            a.matmul(b).linear_combination(C64::new(1.0, 0.0), &b.matmul(a), C64::new(-1.0, 0.0))
        };
        let comm_q = comm(&tc1.h, &qn);
        let comm_c = comm(&tc1.h, &cn);
        let sum = comm_q.linear_combination(C64::new(1.0, 0.0), &comm_c, C64::new(1.0, 0.0));
        assert!(sum.max_abs_diff(&CsrMatrix::zeros(tc1.dim, tc1.dim)) < 1e-13);
        assert!(comm_q.nnz() > 0);
    }

    #[test]
    fn tavis_cummings_size_guard() {
        let m = SpinModel::new(vec![0.0; 5], 0.0, 0.0, 0.0, 0.05, 0.4).unwrap();
        assert!(matches!(
            h_full_tavis_cummings(&m, 3),
            Err(DynamicsError::CavityGuard { .. })
        ));
        let m2 = SpinModel::new(vec![0.0; 2], 0.0, 0.0, 0.0, 0.05, 0.4).unwrap();
        assert!(matches!(
            h_full_tavis_cummings(&m2, 21),
            Err(DynamicsError::CavityGuard { .. })
        ));
    }

    #[test]
    fn cavity_annihilation_matrix_elements() {
        let m = SpinModel::new(vec![0.0], 0.0, 0.0, 0.0, 0.05, 0.4).unwrap();
        let tc = h_full_tavis_cummings(&m, 2).unwrap();
        let a = tc.a.to_dense();
        // qubit ground block: a|1> = |0>, a|2> = sqrt(2)|1>
        assert_abs_diff_eq!(a[(0, 1)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[(1, 2)].re, 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(a[(0, 2)], C64::new(0.0, 0.0));
    }
}
