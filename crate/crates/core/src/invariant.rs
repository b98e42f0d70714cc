//! The adiabatic invariant `J_z'` and its band projectors.
//!
//! In the eigenbasis `{|φ_k⟩}` of the truncated position operator `q̂`, the
//! quantum invariant is block diagonal: on the block of `q_k` it equals
//! `cos θ_k J_z + sin θ_k J_x` with `θ_k = atan2(2γ q_k / √j, ω0)`. Its
//! spectral projectors are therefore
//!
//! ```text
//! P_m' = Σ_k |φ_k⟩⟨φ_k| ⊗ R(θ_k)|j,m'⟩⟨j,m'|R(θ_k)ᵀ,   R(θ) = exp(-iθJ_y)
//! ```
//!
//! and are never stored densely: every product is applied in factored form.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{DickeError, Result};
use crate::linalg::{band_eigen, SymBand};
use crate::operators::{coupling_prefactor, spin_matrices, BasisSpec, SparseOperator};
use crate::params::ModelParams;
use crate::spectrum::{PeresPoint, SpectrumResult};

/// States with `band_confidence` below this cannot be given a band label.
pub const ASSIGNABLE_CONFIDENCE: f64 = 0.5;
const WEIGHT_BATCH: usize = 48;

#[derive(Clone, Debug)]
pub struct BandProjectorSet {
    pub two_j: u32,
    pub n_max: usize,
    /// Eigenvalues of `q̂`, ascending.
    pub q_values: Vec<f64>,
    /// Column `k` is the Fock expansion of `|φ_k⟩`.
    pub q_vectors: DMatrix<f64>,
    pub thetas: Vec<f64>,
    /// `R(θ_k)`; column `m' + j` is the rotated spin state `R(θ_k)|j,m'⟩`.
    pub rotations: Vec<DMatrix<f64>>,
}

/// `exp(-θ K)` with `K = i J_y`.
pub fn y_rotation(two_j: u32, theta: f64) -> DMatrix<f64> {
    let (_, k, _) = spin_matrices(two_j);
    (k * (-theta)).exp()
}

pub fn build_band_projectors(params: &ModelParams, basis: &BasisSpec) -> Result<BandProjectorSet> {
    params.validate()?;
    if params.two_j != basis.two_j {
        return Err(DickeError::DimensionMismatch("projector basis and parameters disagree on j".into()));
    }
    let j = params.j();
    let prefactor = (params.omega / (2.0 * j * params.omega0)).sqrt() * params.f() * params.omega0;
    let direct = coupling_prefactor(params);
    if (prefactor - direct).abs() > 1e-13 * direct.abs().max(f64::MIN_POSITIVE) {
        return Err(DickeError::InvalidParameter(format!(
            "coupling prefactor mismatch: {prefactor} vs {direct}"
        )));
    }

    let dim = basis.boson_dim();
    let diag = vec![0.0; dim];
    let off: Vec<f64> = (1..dim).map(|n| (n as f64 / 2.0).sqrt()).collect();
    let eig = band_eigen(&SymBand::from_tridiagonal(&diag, &off), Some(f64::INFINITY))
        .map_err(|e| DickeError::Eigensolver { block: "q".into(), reason: e.to_string() })?;
    let mut q_vectors = DMatrix::zeros(dim, dim);
    for (k, v) in eig.vectors.iter().enumerate() {
        q_vectors.set_column(k, &DVector::from_column_slice(v));
    }
    let thetas: Vec<f64> =
        eig.values.iter().map(|&q| (2.0 * params.gamma * q / j.sqrt()).atan2(params.omega0)).collect();
    let (_, k_gen, _) = spin_matrices(params.two_j);
    let rotations = thetas.par_iter().map(|&t| (&k_gen * (-t)).exp()).collect();
    Ok(BandProjectorSet { two_j: params.two_j, n_max: basis.n_max, q_values: eig.values, q_vectors, thetas, rotations })
}

/// Bounds on how far the factored projectors are from an exact resolution
/// of the identity.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProjectorAlgebraReport {
    /// Bound on `‖Σ P_m' - I‖₂`.
    pub completeness: f64,
    /// Bound on `max ‖P_m' P_m'' - δ P_m'‖₂`.
    pub orthogonality: f64,
    /// Bound on the distance of every eigenvalue of `J_z'` from its `m'`.
    pub spectrum_deviation: f64,
    /// `max |tr P_m' - (n_max + 1)|`.
    pub trace_error: f64,
}

impl BandProjectorSet {
    pub fn spin_dim(&self) -> usize {
        self.two_j as usize + 1
    }

    pub fn boson_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn j(&self) -> f64 {
        0.5 * self.two_j as f64
    }

    pub fn m_prime(&self, band_index: usize) -> f64 {
        band_index as f64 - self.j()
    }

    /// All projectors are `V_m' V_m'ᵀ` with the columns of `V` the vectors
    /// `φ_k ⊗ R_k|m'⟩`. With `G = VᵀV`, every identity follows from
    /// `‖G - I‖₂`, which is bounded through the two orthogonality defects.
    pub fn algebra_report(&self) -> ProjectorAlgebraReport {
        let phi = &self.q_vectors;
        let gram = phi.tr_mul(phi) - DMatrix::identity(self.boson_dim(), self.boson_dim());
        let phi_defect = gram.norm();
        let rot_defect = self
            .rotations
            .iter()
            .map(|r| (r.tr_mul(r) - DMatrix::identity(self.spin_dim(), self.spin_dim())).norm())
            .fold(0.0, f64::max);
        let rot_norm2 = self.rotations.iter().map(|r| r.norm_squared()).fold(0.0, f64::max);
        // ‖G - I‖ <= max‖R_k‖² ‖ΦᵀΦ - I‖ + max ‖R_kᵀR_k - I‖ (Frobenius bounds the 2-norm)
        let g_defect = rot_norm2.min(self.spin_dim() as f64 * (1.0 + rot_defect)) * phi_defect + rot_defect;
        let v_norm2 = 1.0 + g_defect;
        let trace_error = (0..self.spin_dim())
            .map(|mi| {
                let tr: f64 = (0..self.boson_dim())
                    .map(|k| phi.column(k).norm_squared() * self.rotations[k].column(mi).norm_squared())
                    .sum();
                (tr - self.boson_dim() as f64).abs()
            })
            .fold(0.0, f64::max);
        ProjectorAlgebraReport {
            completeness: g_defect,
            orthogonality: v_norm2 * g_defect,
            spectrum_deviation: self.j().max(0.5) * g_defect,
            trace_error,
        }
    }

    /// Coefficients `c[n][m + j]` of a full-basis vector viewed as a
    /// `(n_max+1) × (2j+1)` matrix.
    fn as_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.boson_dim(), self.spin_dim(), x)
    }

    fn to_vector(m: &DMatrix<f64>) -> Vec<f64> {
        m.transpose().as_slice().to_vec()
    }

    /// Rotated-frame amplitudes `D[k, m'] = ⟨φ_k, R_k m' | x⟩`.
    fn rotated_amplitudes(&self, x: &[f64]) -> DMatrix<f64> {
        let t = self.q_vectors.tr_mul(&self.as_matrix(x));
        let mut d = DMatrix::zeros(self.boson_dim(), self.spin_dim());
        for k in 0..self.boson_dim() {
            let row = t.row(k) * &self.rotations[k];
            d.set_row(k, &row);
        }
        d
    }

    fn from_rotated(&self, d: &DMatrix<f64>) -> Vec<f64> {
        let mut t = DMatrix::zeros(self.boson_dim(), self.spin_dim());
        for k in 0..self.boson_dim() {
            let row = d.row(k) * self.rotations[k].transpose();
            t.set_row(k, &row);
        }
        Self::to_vector(&(&self.q_vectors * t))
    }

    /// `P_m' x` for the band `m' = band_index - j`.
    pub fn apply_projector(&self, band_index: usize, x: &[f64]) -> Vec<f64> {
        let mut d = self.rotated_amplitudes(x);
        for mi in 0..self.spin_dim() {
            if mi != band_index {
                d.column_mut(mi).fill(0.0);
            }
        }
        self.from_rotated(&d)
    }

    /// `J_z' x = Σ m' P_m' x`.
    pub fn apply_jzprime(&self, x: &[f64]) -> Vec<f64> {
        let mut d = self.rotated_amplitudes(x);
        for mi in 0..self.spin_dim() {
            let m = self.m_prime(mi);
            d.column_mut(mi).scale_mut(m);
        }
        self.from_rotated(&d)
    }

    /// Dense `P_m'` over the full basis (small systems only).
    pub fn projector_dense(&self, band_index: usize) -> DMatrix<f64> {
        let dim = self.boson_dim() * self.spin_dim();
        let mut out = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut e = vec![0.0; dim];
            e[col] = 1.0;
            out.set_column(col, &DVector::from_vec(self.apply_projector(band_index, &e)));
        }
        out
    }

    /// Dense `J_z'` assembled from the projectors (small systems only).
    pub fn jzprime_dense(&self) -> DMatrix<f64> {
        let mut out = self.projector_dense(0) * self.m_prime(0);
        for mi in 1..self.spin_dim() {
            out += self.projector_dense(mi) * self.m_prime(mi);
        }
        out
    }

    /// `‖[H, J_z']‖_F / ‖H‖_F`.
    ///
    /// In the `q̂` eigenbasis the spin part of `H` on block `k` is
    /// `ω_P(q_k) J_z'`, so only the boson energy `ω a†a` fails to commute:
    /// `‖[H, J_z']‖_F² = ω² tr(J_z²) Σ_kl N_kl² · 2(1 - cos(θ_k - θ_l))`
    /// with `N = Φᵀ (a†a) Φ`.
    pub fn commutator_ratio(&self, params: &ModelParams, h: &SparseOperator) -> f64 {
        let dim = self.boson_dim();
        let mut n_phi = self.q_vectors.clone();
        for (n, mut row) in n_phi.row_iter_mut().enumerate() {
            row *= n as f64;
        }
        let big_n = self.q_vectors.tr_mul(&n_phi);
        let j = self.j();
        let tr_jz2 = j * (j + 1.0) * (2.0 * j + 1.0) / 3.0;
        let mut s = 0.0;
        for l in 0..dim {
            for k in 0..dim {
                let nkl = big_n[(k, l)];
                s += nkl * nkl * 2.0 * (1.0 - (self.thetas[k] - self.thetas[l]).cos());
            }
        }
        params.omega * (tr_jz2 * s).sqrt() / h.frobenius_norm()
    }
}

/// Distribution of one eigenstate over the `J_z'` eigenspaces.
#[derive(Clone, Debug, Serialize)]
pub struct BandWeights {
    pub state_index: usize,
    /// `p_m'` ordered by `m' = -j..=j`.
    pub weights: Vec<f64>,
    /// `1 / Σ p_m'²`.
    pub npc: f64,
    /// `argmax p_m'` as `m' + j`; ties go to the lower `m'`.
    pub band_index: usize,
    pub m_prime: f64,
    pub band_confidence: f64,
    pub assignable: bool,
}

impl BandWeights {
    pub fn from_weights(state_index: usize, weights: Vec<f64>, j: f64) -> Self {
        let sum_sq: f64 = weights.iter().map(|p| p * p).sum();
        let (band_index, &band_confidence) = weights
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, (i, p)| if *p > *best.1 { (i, p) } else { best });
        Self {
            state_index,
            npc: 1.0 / sum_sq,
            band_index,
            m_prime: band_index as f64 - j,
            band_confidence,
            assignable: band_confidence >= ASSIGNABLE_CONFIDENCE,
            weights,
        }
    }

    /// `⟨J_z'⟩ = Σ m' p_m'`.
    pub fn jzprime(&self, j: f64) -> f64 {
        self.weights.iter().enumerate().map(|(i, p)| (i as f64 - j) * p).sum()
    }
}

/// Band weights `p_m' = ⟨E_i|P_m'|E_i⟩` for every converged eigenstate.
pub fn band_weights(spectrum: &SpectrumResult, projectors: &BandProjectorSet) -> Vec<BandWeights> {
    let indices = spectrum.converged_indices();
    let (bd, sd) = (projectors.boson_dim(), projectors.spin_dim());
    assert_eq!(spectrum.basis.n_max, projectors.n_max, "projectors built for a different cutoff");
    let j = projectors.j();
    let batches: Vec<Vec<BandWeights>> = indices
        .par_chunks(WEIGHT_BATCH)
        .map(|chunk| {
            // stack the coefficient matrices side by side: (n_max+1) × (batch · (2j+1))
            let mut stacked = DMatrix::zeros(bd, chunk.len() * sd);
            for (b, &i) in chunk.iter().enumerate() {
                let level = &spectrum.levels[i];
                let v = level.vector.as_ref().expect("converged levels carry vectors");
                for (&s, &c) in spectrum.block_states(level.parity).iter().zip(v) {
                    let (n, mi) = spectrum.basis.decompose(s);
                    stacked[(n, b * sd + mi)] = c;
                }
            }
            let t = projectors.q_vectors.tr_mul(&stacked);
            chunk
                .iter()
                .enumerate()
                .map(|(b, &i)| {
                    let mut w = vec![0.0; sd];
                    for k in 0..bd {
                        let r = &projectors.rotations[k];
                        for mp in 0..sd {
                            let amp: f64 = (0..sd).map(|mi| t[(k, b * sd + mi)] * r[(mi, mp)]).sum();
                            w[mp] += amp * amp;
                        }
                    }
                    BandWeights::from_weights(i, w, j)
                })
                .collect()
        })
        .collect();
    batches.into_iter().flatten().collect()
}

/// Peres lattice of `J_z'`: `Σ m' p_m'` against `E/(jω0)`.
pub fn jzprime_peres(spectrum: &SpectrumResult, weights: &[BandWeights]) -> Vec<PeresPoint> {
    let j = spectrum.params.j();
    weights
        .iter()
        .map(|w| PeresPoint {
            state_index: w.state_index,
            parity: spectrum.levels[w.state_index].parity,
            energy_norm: spectrum.energy_norm(w.state_index),
            value: w.jzprime(j),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_hamiltonian, build_spin_ops};
    use crate::spectrum::{certify_convergence, diagonalize, DiagonalizeOptions};
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;

    fn small() -> (ModelParams, BasisSpec) {
        let p = ModelParams::with_coupling_ratio(1.0, 1.0, 2.0, 1.0).unwrap();
        (p, BasisSpec::for_params(&p, 5))
    }

    #[test]
    fn rotation_diagonalizes_tilted_spin() {
        for two_j in [1, 2, 5] {
            let (jx, _, jz) = spin_matrices(two_j);
            for theta in [-1.2, 0.0, 0.4, 1.5] {
                let r = y_rotation(two_j, theta);
                let tilted = &jz * theta.cos() + &jx * theta.sin();
                let back = r.transpose() * tilted * &r;
                assert!((back - &jz).abs().max() < 1e-12);
                assert!((r.transpose() * &r - DMatrix::identity(two_j as usize + 1, two_j as usize + 1)).abs().max() < 1e-13);
            }
        }
        // spin-1/2 closed form
        let r = y_rotation(1, 0.8);
        assert_relative_eq!(r[(0, 0)], 0.4f64.cos(), epsilon = 1e-14);
        assert_relative_eq!(r[(1, 0)].abs(), 0.4f64.sin(), epsilon = 1e-14);
    }

    #[test]
    fn decoupled_limit_is_jz() {
        let p = ModelParams::new(1.0, 1.0, 0.0, 1.5).unwrap();
        let basis = BasisSpec::for_params(&p, 4);
        let set = build_band_projectors(&p, &basis).unwrap();
        assert!(set.thetas.iter().all(|&t| t == 0.0));
        let jz = build_spin_ops(&basis).jz.to_dense();
        assert!((set.jzprime_dense() - jz).abs().max() < 1e-12);
    }

    #[test]
    fn continuity_at_small_coupling() {
        let p = ModelParams::new(1.0, 1.0, 1e-8, 1.0).unwrap();
        let basis = BasisSpec::for_params(&p, 5);
        let set = build_band_projectors(&p, &basis).unwrap();
        let jz = build_spin_ops(&basis).jz.to_dense();
        assert!((set.jzprime_dense() - jz).abs().max() < 1e-7);
    }

    #[test]
    fn projector_identities_dense() {
        let (p, basis) = small();
        let set = build_band_projectors(&p, &basis).unwrap();
        let dim = basis.full_dim();
        let ps: Vec<_> = (0..3).map(|mi| set.projector_dense(mi)).collect();
        let sum = ps.iter().fold(DMatrix::zeros(dim, dim), |a, b| a + b);
        assert!((sum - DMatrix::identity(dim, dim)).abs().max() < 1e-10);
        for a in 0..3 {
            assert_relative_eq!(ps[a].trace(), 6.0, epsilon = 1e-10);
            for b in 0..3 {
                let prod = &ps[a] * &ps[b];
                let expect = if a == b { ps[a].clone() } else { DMatrix::zeros(dim, dim) };
                assert!((prod - expect).abs().max() < 1e-10);
            }
        }
        let report = set.algebra_report();
        assert!(report.completeness < 1e-10 && report.orthogonality < 1e-10 && report.trace_error < 1e-10);
    }

    #[test]
    fn jzprime_spectrum_is_integer() {
        let (p, basis) = small();
        let set = build_band_projectors(&p, &basis).unwrap();
        let mut ev: Vec<f64> = SymmetricEigen::new(set.jzprime_dense()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (i, e) in ev.iter().enumerate() {
            let m = (i / 6) as f64 - 1.0;
            assert!((e - m).abs() < 1e-8, "{e} vs {m}");
        }
    }

    /// Second route: the operator written directly as a function of `q̂`,
    /// `(J_z + c√2 q̂ J_x) / √(1 + 2c² q̂²)` with `c = √(ω/(2jω0)) f`,
    /// evaluated through a dense eigendecomposition of `q̂`.
    #[test]
    fn matches_operator_function_of_q() {
        let p = ModelParams::with_coupling_ratio(1.0, 2.0, 3.0, 1.5).unwrap();
        let basis = BasisSpec::for_params(&p, 6);
        let set = build_band_projectors(&p, &basis).unwrap();
        let c = (p.omega / (2.0 * p.j() * p.omega0)).sqrt() * p.f();
        let q = SymmetricEigen::new(DMatrix::from_fn(7, 7, |a, b| {
            if a + 1 == b || b + 1 == a { (a.max(b) as f64 / 2.0).sqrt() } else { 0.0 }
        }));
        let (jx, _, jz) = spin_matrices(p.two_j);
        let (bd, sd) = (7, 4);
        let mut direct = DMatrix::zeros(bd * sd, bd * sd);
        for k in 0..bd {
            let qk = q.eigenvalues[k];
            let block = (&jz + &jx * (c * 2f64.sqrt() * qk)) / (1.0 + 2.0 * c * c * qk * qk).sqrt();
            let phi = q.eigenvectors.column(k);
            for n1 in 0..bd {
                for n2 in 0..bd {
                    let w = phi[n1] * phi[n2];
                    for a in 0..sd {
                        for b in 0..sd {
                            direct[(n1 * sd + a, n2 * sd + b)] += w * block[(a, b)];
                        }
                    }
                }
            }
        }
        assert!((set.jzprime_dense() - direct).abs().max() < 1e-10);
    }

    #[test]
    fn commutator_ratio_matches_dense() {
        let (p, basis) = small();
        let set = build_band_projectors(&p, &basis).unwrap();
        let h = build_hamiltonian(&p, &basis).unwrap();
        let hd = h.to_dense();
        let jp = set.jzprime_dense();
        let comm = &hd * &jp - &jp * &hd;
        assert_relative_eq!(set.commutator_ratio(&p, &h), comm.norm() / hd.norm(), epsilon = 1e-9);
    }

    #[test]
    fn decoupled_states_have_unit_npc() {
        let p = ModelParams::new(1.0, 1.3, 0.0, 2.0).unwrap();
        let basis = BasisSpec::for_params(&p, 10);
        let r = certify_convergence(diagonalize(&p, &basis, &DiagonalizeOptions::default()).unwrap(), 0.1, 1e-8);
        let set = build_band_projectors(&p, &basis).unwrap();
        let w = band_weights(&r, &set);
        assert_eq!(w.len(), r.converged_indices().len());
        for bw in &w {
            assert!((bw.npc - 1.0).abs() < 1e-10);
            assert!((bw.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
        let lattice = jzprime_peres(&r, &w);
        for pt in lattice {
            assert!((pt.value - pt.value.round()).abs() < 1e-10);
        }
    }

    #[test]
    fn weights_match_dense_projectors() {
        let p = ModelParams::with_coupling_ratio(1.0, 1.0, 2.5, 1.0).unwrap();
        let basis = BasisSpec::for_params(&p, 8);
        let r = certify_convergence(diagonalize(&p, &basis, &DiagonalizeOptions::default()).unwrap(), 0.1, 1.0);
        let set = build_band_projectors(&p, &basis).unwrap();
        let w = band_weights(&r, &set);
        let dense: Vec<_> = (0..3).map(|mi| set.projector_dense(mi)).collect();
        for bw in &w {
            let v = DVector::from_vec(r.full_vector(bw.state_index).unwrap());
            for mi in 0..3 {
                assert_relative_eq!(bw.weights[mi], v.dot(&(&dense[mi] * &v)), epsilon = 1e-10);
            }
            assert!(bw.npc >= 1.0 - 1e-12 && bw.npc <= 3.0 + 1e-12);
        }
    }

    #[test]
    fn tie_breaks_to_lower_band() {
        let bw = BandWeights::from_weights(0, vec![0.5, 0.5, 0.0], 1.0);
        assert_eq!(bw.band_index, 0);
        assert_eq!(bw.m_prime, -1.0);
        assert!(bw.assignable);
        assert_relative_eq!(bw.npc, 2.0);
        let spread = BandWeights::from_weights(0, vec![0.4, 0.3, 0.3], 1.0);
        assert!(!spread.assignable);
    }
}
