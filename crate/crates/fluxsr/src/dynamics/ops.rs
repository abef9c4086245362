//! Pauli and collective angular-momentum operators on the N-qubit space.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::{DynamicsError, StateMatrix, MAX_QUBITS};
use crate::sparse::CsrMatrix;

const ONE: C64 = C64::new(1.0, 0.0);

/// Pauli z on qubit `j` of `n`: +1 on excited basis states.
pub fn sigma_z(n: usize, j: usize) -> CsrMatrix {
    assert!(j < n, "qubit index {j} out of range for {n} qubits");
    let dim = 1usize << n;
    let bit = 1usize << j;
    let trips = (0..dim)
        .map(|i| (i, i, if i & bit != 0 { ONE } else { -ONE }))
        .collect();
    CsrMatrix::from_triplets(dim, dim, trips)
}

/// Pauli x on qubit `j`: flips that bit.
pub fn sigma_x(n: usize, j: usize) -> CsrMatrix {
    assert!(j < n, "qubit index {j} out of range for {n} qubits");
    let dim = 1usize << n;
    let bit = 1usize << j;
    let trips = (0..dim).map(|i| (i ^ bit, i, ONE)).collect();
    CsrMatrix::from_triplets(dim, dim, trips)
}

/// Raising operator on qubit `j`: |e><g|.
pub fn sigma_plus(n: usize, j: usize) -> CsrMatrix {
    assert!(j < n, "qubit index {j} out of range for {n} qubits");
    let dim = 1usize << n;
    let bit = 1usize << j;
    let trips = (0..dim).filter(|i| i & bit == 0).map(|i| (i | bit, i, ONE)).collect();
    CsrMatrix::from_triplets(dim, dim, trips)
}

/// Lowering operator on qubit `j`: |g><e|.
pub fn sigma_minus(n: usize, j: usize) -> CsrMatrix {
    assert!(j < n, "qubit index {j} out of range for {n} qubits");
    let dim = 1usize << n;
    let bit = 1usize << j;
    let trips = (0..dim).filter(|i| i & bit != 0).map(|i| (i & !bit, i, ONE)).collect();
    CsrMatrix::from_triplets(dim, dim, trips)
}

/// The collective operator set used throughout the dynamics.
#[derive(Clone, Debug)]
pub struct CollectiveOps {
    pub n: usize,
    pub jp: CsrMatrix,
    pub jm: CsrMatrix,
    /// Sum of sigma_z over qubits (twice the conventional Jz).
    pub jz: CsrMatrix,
    pub sigma_z: Vec<CsrMatrix>,
    pub sigma_x: Vec<CsrMatrix>,
}

/// Build J+, J-, Jz and the per-qubit Paulis for `n` qubits.
pub fn collective_ops(n: usize) -> Result<CollectiveOps, DynamicsError> {
    if n == 0 || n > MAX_QUBITS {
        return Err(DynamicsError::QubitCount { n, max: MAX_QUBITS });
    }
    let dim = 1usize << n;
    let mut jp_trips = Vec::with_capacity(n * dim / 2);
    let mut jm_trips = Vec::with_capacity(n * dim / 2);
    let mut jz_trips = Vec::with_capacity(dim);
    for i in 0..dim {
        for j in 0..n {
            let bit = 1usize << j;
            if i & bit == 0 {
                jp_trips.push((i | bit, i, ONE));
            } else {
                jm_trips.push((i & !bit, i, ONE));
            }
        }
        let z = 2 * (i as u32).count_ones() as i64 - n as i64;
        if z != 0 {
            jz_trips.push((i, i, C64::new(z as f64, 0.0)));
        }
    }
    Ok(CollectiveOps {
        n,
        jp: CsrMatrix::from_triplets(dim, dim, jp_trips),
        jm: CsrMatrix::from_triplets(dim, dim, jm_trips),
        jz: CsrMatrix::from_triplets(dim, dim, jz_trips),
        sigma_z: (0..n).map(|j| sigma_z(n, j)).collect(),
        sigma_x: (0..n).map(|j| sigma_x(n, j)).collect(),
    })
}

/// Number of excited qubits in `rho`, `sum_j (1 + <sigma_z_j>)/2`; reads the
/// diagonal, so it costs nothing compared to an operator expectation.
pub fn excited_count(rho: &StateMatrix) -> f64 {
    let dim = rho.nrows();
    debug_assert!(dim.is_power_of_two(), "state dimension must be 2^N");
    (0..dim).map(|i| rho[(i, i)].re * (i as u32).count_ones() as f64).sum()
}

/// Density matrix of one computational basis state given as an excitation
/// bitmask.
pub fn basis_state_density(n: usize, excited_mask: usize) -> StateMatrix {
    let dim = 1usize << n;
    assert!(excited_mask < dim, "mask {excited_mask:#x} outside {n}-qubit space");
    let mut rho = Array2::zeros((dim, dim));
    rho[(excited_mask, excited_mask)] = ONE;
    rho
}

/// Density matrix of a product of single-qubit pure states
/// `(ground, excited)` amplitudes per qubit.
pub fn product_state_density(amplitudes: &[(C64, C64)]) -> StateMatrix {
    let n = amplitudes.len();
    let dim = 1usize << n;
    let mut psi = vec![ONE; dim];
    for (s, amp) in psi.iter_mut().enumerate() {
        for (j, &(g, e)) in amplitudes.iter().enumerate() {
            *amp *= if s & (1 << j) != 0 { e } else { g };
        }
    }
    let mut rho = Array2::zeros((dim, dim));
    for s in 0..dim {
        for t in 0..dim {
            rho[(s, t)] = psi[s] * psi[t].conj();
        }
    }
    rho
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Projector onto the symmetric (maximum total spin) Dicke ladder,
/// `sum_m |D_m><D_m|`. Test-scale construction: nnz grows like C(2N, N).
pub fn symmetric_projector(n: usize) -> Result<CsrMatrix, DynamicsError> {
    if n == 0 || n > 10 {
        return Err(DynamicsError::QubitCount { n, max: 10 });
    }
    let dim = 1usize << n;
    let mut by_count: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for s in 0..dim {
        by_count[(s as u32).count_ones() as usize].push(s);
    }
    let mut trips = Vec::new();
    for (m, states) in by_count.iter().enumerate() {
        let w = 1.0 / binomial(n, m) as f64;
        for &s in states {
            for &t in states {
                trips.push((s, t, C64::new(w, 0.0)));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(dim, dim, trips))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_qubit_raising_matrix() {
        let ops = collective_ops(1).unwrap();
        let d = ops.jp.to_dense();
        assert_eq!(d[(1, 0)], ONE);
        assert_eq!(d[(0, 0)], C64::new(0.0, 0.0));
        assert_eq!(d[(0, 1)], C64::new(0.0, 0.0));
        assert_eq!(d[(1, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn jp_is_dagger_of_jm() {
        for n in 1..=4 {
            let ops = collective_ops(n).unwrap();
            assert_eq!(ops.jm.dagger().max_abs_diff(&ops.jp), 0.0);
        }
    }

    #[test]
    fn commutator_identity() {
        // [J+, J-] = sum sigma_z, exactly (integer entries)
        for n in 1..=4 {
            let ops = collective_ops(n).unwrap();
            let comm =
                ops.jp.matmul(&ops.jm).linear_combination(ONE, &ops.jm.matmul(&ops.jp), -ONE);
            assert_eq!(comm.max_abs_diff(&ops.jz), 0.0);
        }
    }

    #[test]
    fn doubly_excited_pair_has_jpjm_two() {
        let ops = collective_ops(2).unwrap();
        let rho = basis_state_density(2, 0b11);
        let jpjm = ops.jp.matmul(&ops.jm);
        let val = jpjm.expectation(&rho);
        assert_abs_diff_eq!(val.re, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(val.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn excited_count_reference_states() {
        assert_abs_diff_eq!(excited_count(&basis_state_density(3, 0)), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(excited_count(&basis_state_density(3, 0b111)), 3.0, epsilon = 1e-15);
        let half = 1.0 / 2f64.sqrt();
        let rho = product_state_density(&[(C64::new(half, 0.0), C64::new(half, 0.0))]);
        assert_abs_diff_eq!(excited_count(&rho), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn excited_count_matches_operator_form() {
        let n = 3;
        let ops = collective_ops(n).unwrap();
        let amp: Vec<(C64, C64)> = (0..n)
            .map(|j| {
                let th = 0.3 + 0.4 * j as f64;
                (C64::new(th.cos(), 0.0), C64::new(th.sin() * 0.8, th.sin() * 0.6))
            })
            .collect();
        let rho = product_state_density(&amp);
        let via_ops: f64 = ops
            .sigma_z
            .iter()
            .map(|sz| (1.0 + sz.expectation(&rho).re) / 2.0)
            .sum();
        assert_abs_diff_eq!(excited_count(&rho), via_ops, epsilon = 1e-12);
    }

    #[test]
    fn qubit_count_guard() {
        assert!(matches!(collective_ops(0), Err(DynamicsError::QubitCount { .. })));
        assert!(matches!(collective_ops(15), Err(DynamicsError::QubitCount { .. })));
        assert!(collective_ops(14).is_ok());
    }

    #[test]
    fn sigma_algebra() {
        let n = 2;
        for j in 0..n {
            // sigma_+ sigma_- + sigma_- sigma_+ = I
            let sum = sigma_plus(n, j)
                .matmul(&sigma_minus(n, j))
                .linear_combination(ONE, &sigma_minus(n, j).matmul(&sigma_plus(n, j)), ONE);
            assert_eq!(sum.max_abs_diff(&CsrMatrix::identity(4)), 0.0);
            // sigma_x = sigma_+ + sigma_-
            let x = sigma_plus(n, j).linear_combination(ONE, &sigma_minus(n, j), ONE);
            assert_eq!(x.max_abs_diff(&sigma_x(n, j)), 0.0);
        }
    }

    #[test]
    fn symmetric_projector_is_projector() {
        for n in 1..=4 {
            let p = symmetric_projector(n).unwrap();
            assert!(p.is_hermitian(1e-15));
            let p2 = p.matmul(&p);
            assert!(p2.max_abs_diff(&p) < 1e-14);
            // trace = N + 1 Dicke states
            let tr: f64 = p.diagonal().iter().map(|v| v.re).sum();
            assert_abs_diff_eq!(tr, (n + 1) as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn symmetric_projector_fixes_dicke_states() {
        let n = 3;
        let p = symmetric_projector(n).unwrap();
        // fully excited state is symmetric
        let rho = basis_state_density(n, 0b111);
        assert_abs_diff_eq!(p.expectation(&rho).re, 1.0, epsilon = 1e-14);
        // a single computational state with one excitation has overlap 1/3
        let rho1 = basis_state_density(n, 0b001);
        assert_abs_diff_eq!(p.expectation(&rho1).re, 1.0 / 3.0, epsilon = 1e-14);
    }
}
