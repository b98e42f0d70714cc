//! Exact spectrum of the truncated Dicke Hamiltonian, convergence
//! certification and Peres-lattice data.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{DickeError, Result};
use crate::linalg::{band_eigen, SymBand};
use crate::operators::{build_hamiltonian, parity_blocks, BasisSpec, Parity, ParitySector, SparseOperator};
use crate::params::ModelParams;

pub const DEFAULT_GUARD_FRACTION: f64 = 0.1;
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-8;
/// Residual bound `‖Hv - Ev‖ <= RESIDUAL_TOLERANCE · ‖H‖` for spot checks.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
const SPOT_CHECKS: usize = 20;

/// One eigenstate of the truncated Hamiltonian.
#[derive(Clone, Debug)]
pub struct Level {
    pub energy: f64,
    pub parity: Parity,
    /// Rank of this level inside its parity block.
    pub block_rank: usize,
    /// Coefficients over the parity block (see [`SpectrumResult::block_states`]);
    /// `None` above the eigenvector ceiling.
    pub vector: Option<Vec<f64>>,
    /// Weight in the top `guard_fraction` of Fock states; `None` until
    /// certified or when no eigenvector was computed.
    pub tail_weight: Option<f64>,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct SpectrumResult {
    pub params: ModelParams,
    pub basis: BasisSpec,
    /// All levels of the solved sectors, energy ascending.
    pub levels: Vec<Level>,
    even_states: Vec<usize>,
    odd_states: Vec<usize>,
    /// Infinity norm of the Hamiltonian.
    pub norm: f64,
    /// Largest residual among the spot-checked eigenpairs.
    pub max_residual: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct DiagonalizeOptions {
    /// Eigenvectors are computed for energies at or below this value.
    pub vector_ceiling: Option<f64>,
}

impl Default for DiagonalizeOptions {
    fn default() -> Self {
        Self { vector_ceiling: Some(f64::INFINITY) }
    }
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Full-basis indices of a parity block.
    pub fn block_states(&self, parity: Parity) -> &[usize] {
        match parity {
            Parity::Even => &self.even_states,
            Parity::Odd => &self.odd_states,
        }
    }

    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }

    /// `E / (j ω0)`.
    pub fn energy_norm(&self, index: usize) -> f64 {
        self.levels[index].energy / self.params.energy_scale()
    }

    /// Eigenvector expanded over the full boson-major basis.
    pub fn full_vector(&self, index: usize) -> Option<Vec<f64>> {
        let level = &self.levels[index];
        let v = level.vector.as_ref()?;
        let mut out = vec![0.0; self.basis.full_dim()];
        for (&s, &c) in self.block_states(level.parity).iter().zip(v) {
            out[s] = c;
        }
        Some(out)
    }

    /// Indices of converged levels.
    pub fn converged_indices(&self) -> Vec<usize> {
        (0..self.levels.len()).filter(|&i| self.levels[i].converged).collect()
    }

    /// Lowest energy among unconverged levels (`+∞` if none).
    pub fn convergence_edge(&self) -> f64 {
        self.levels.iter().filter(|l| !l.converged).map(|l| l.energy).fold(f64::INFINITY, f64::min)
    }
}

/// Diagonalize the Hamiltonian block by block.
pub fn diagonalize(params: &ModelParams, basis: &BasisSpec, opts: &DiagonalizeOptions) -> Result<SpectrumResult> {
    let h = build_hamiltonian(params, basis)?;
    let blocks = parity_blocks(&h, basis)?;
    let selected: Vec<_> = blocks.iter().filter(|b| basis.sector.contains(b.parity)).collect();
    let solved: Vec<_> = selected
        .par_iter()
        .map(|block| {
            let band = SymBand::from_sparse(&block.operator);
            band_eigen(&band, opts.vector_ceiling)
                .map_err(|e| DickeError::Eigensolver { block: format!("{:?}", block.parity), reason: e.to_string() })
                .map(|eig| (block.parity, eig))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut levels = Vec::new();
    let mut norm: f64 = 0.0;
    for (parity, eig) in solved {
        norm = norm.max(eig.norm);
        let mut vectors = eig.vectors.into_iter();
        for (rank, &energy) in eig.values.iter().enumerate() {
            levels.push(Level { energy, parity, block_rank: rank, vector: vectors.next(), tail_weight: None, converged: false });
        }
    }
    levels.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.parity.cmp(&b.parity)));

    let mut result = SpectrumResult {
        params: *params,
        basis: *basis,
        levels,
        even_states: blocks.even.full_index.clone(),
        odd_states: blocks.odd.full_index.clone(),
        norm,
        max_residual: 0.0,
    };

    // residual spot checks on evenly spaced states that carry eigenvectors
    let with_vectors: Vec<usize> = (0..result.levels.len()).filter(|&i| result.levels[i].vector.is_some()).collect();
    if !with_vectors.is_empty() {
        let step = (with_vectors.len() as f64 / SPOT_CHECKS as f64).max(1.0);
        let mut max_res: f64 = 0.0;
        let mut k = 0.0;
        while (k as usize) < with_vectors.len() {
            let i = with_vectors[k as usize];
            let level = &result.levels[i];
            let block = if level.parity == Parity::Even { &blocks.even } else { &blocks.odd };
            let v = level.vector.as_ref().expect("filtered");
            let hv = block.operator.apply(v);
            let r = hv.iter().zip(v).map(|(a, b)| (a - level.energy * b).powi(2)).sum::<f64>().sqrt();
            max_res = max_res.max(r);
            k += step;
        }
        if max_res > RESIDUAL_TOLERANCE * norm {
            return Err(DickeError::Eigensolver {
                block: "spot check".into(),
                reason: format!("residual {max_res:e} exceeds {:e}", RESIDUAL_TOLERANCE * norm),
            });
        }
        result.max_residual = max_res;
    }
    Ok(result)
}

/// Fill `tail_weight` and `converged` for every level.
pub fn certify_convergence(mut result: SpectrumResult, guard_fraction: f64, tail_tolerance: f64) -> SpectrumResult {
    let n_max = result.basis.n_max;
    let threshold = (1.0 - guard_fraction) * n_max as f64;
    let basis = result.basis;
    let even_tail: Vec<bool> = result.even_states.iter().map(|&s| basis.decompose(s).0 as f64 > threshold).collect();
    let odd_tail: Vec<bool> = result.odd_states.iter().map(|&s| basis.decompose(s).0 as f64 > threshold).collect();
    for level in &mut result.levels {
        let mask = if level.parity == Parity::Even { &even_tail } else { &odd_tail };
        level.tail_weight = level
            .vector
            .as_ref()
            .map(|v| v.iter().zip(mask).filter(|(_, &m)| m).map(|(c, _)| c * c).sum::<f64>().min(1.0));
        level.converged = level.tail_weight.is_some_and(|t| t < tail_tolerance);
    }
    result
}

/// Tolerances and cutoffs controlling exact-spectrum runs.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConvergenceSettings {
    pub guard_fraction: f64,
    pub tail_tolerance: f64,
    /// Growth factor applied to `n_max` when a retry is needed.
    pub growth: f64,
    pub max_attempts: usize,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        Self { guard_fraction: DEFAULT_GUARD_FRACTION, tail_tolerance: DEFAULT_TAIL_TOLERANCE, growth: 1.25, max_attempts: 4 }
    }
}

/// Diagonalize with an increasing boson cutoff until every level at or
/// below `analysis_ceiling` is certified converged.
///
/// Eigenvectors are computed up to `vector_ceiling` (which must not be
/// below `analysis_ceiling`).
pub fn diagonalize_converged(
    params: &ModelParams,
    n_max_start: usize,
    analysis_ceiling: f64,
    vector_ceiling: f64,
    settings: &ConvergenceSettings,
) -> Result<SpectrumResult> {
    let mut n_max = n_max_start;
    let opts = DiagonalizeOptions { vector_ceiling: Some(vector_ceiling.max(analysis_ceiling)) };
    for attempt in 0..settings.max_attempts {
        let basis = BasisSpec { sector: ParitySector::Both, ..BasisSpec::for_params(params, n_max) };
        let raw = diagonalize(params, &basis, &opts)?;
        let result = certify_convergence(raw, settings.guard_fraction, settings.tail_tolerance);
        if result.convergence_edge() > analysis_ceiling {
            return Ok(result);
        }
        log::info!(
            "n_max={n_max}: unconverged level at E={:.4} below ceiling {analysis_ceiling:.4} (attempt {attempt})",
            result.convergence_edge()
        );
        n_max = (n_max as f64 * settings.growth).ceil() as usize;
    }
    Err(DickeError::Eigensolver {
        block: "convergence".into(),
        reason: format!("levels below {analysis_ceiling} still unconverged at n_max={n_max}; raise n_max"),
    })
}

/// A level identified independently of the cutoff: parity block and rank.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LevelKey {
    pub parity: Parity,
    pub block_rank: usize,
    pub energy: f64,
}

impl SpectrumResult {
    pub fn key(&self, index: usize) -> LevelKey {
        let l = &self.levels[index];
        LevelKey { parity: l.parity, block_rank: l.block_rank, energy: l.energy }
    }
}

/// Largest relative energy change of the given levels between the cutoff
/// they were computed with and a larger one.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CutoffShift {
    pub n_max: usize,
    pub compared: usize,
    pub max_relative_change: f64,
    pub worst: Option<LevelKey>,
}

/// Eigenvalues only at `n_max`, compared against `keys` by parity and rank.
pub fn cutoff_shift(params: &ModelParams, n_max: usize, keys: &[LevelKey]) -> Result<CutoffShift> {
    let basis = BasisSpec::for_params(params, n_max);
    let top = keys.iter().map(|k| k.energy).fold(f64::NEG_INFINITY, f64::max);
    let raw = diagonalize(params, &basis, &DiagonalizeOptions { vector_ceiling: None })?;
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for l in &raw.levels {
        if l.energy > top + 1.0 {
            break;
        }
        match l.parity {
            Parity::Even => even.push(l.energy),
            Parity::Odd => odd.push(l.energy),
        }
    }
    let mut shift = CutoffShift { n_max, compared: 0, max_relative_change: 0.0, worst: None };
    for key in keys {
        let block = if key.parity == Parity::Even { &even } else { &odd };
        let Some(&e) = block.get(key.block_rank) else {
            return Err(DickeError::DimensionMismatch(format!(
                "level {} of the {:?} block is missing at n_max={n_max}",
                key.block_rank, key.parity
            )));
        };
        let change = ((e - key.energy) / key.energy).abs();
        shift.compared += 1;
        if change > shift.max_relative_change || shift.worst.is_none() {
            shift.max_relative_change = shift.max_relative_change.max(change);
            shift.worst = Some(*key);
        }
    }
    Ok(shift)
}

/// `⟨ψ_i| O |ψ_i⟩` for a converged state.
pub fn expectation(result: &SpectrumResult, op: &SparseOperator, index: usize) -> Result<f64> {
    let level = &result.levels[index];
    if !level.converged {
        return Err(DickeError::Unconverged { index, tail_weight: level.tail_weight });
    }
    let block_op = op.restrict(result.block_states(level.parity));
    Ok(block_op.quadratic_form(level.vector.as_ref().expect("converged levels carry vectors")))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeresPoint {
    pub state_index: usize,
    pub parity: Parity,
    /// `E / (j ω0)`.
    pub energy_norm: f64,
    pub value: f64,
}

/// Expectation values of `op` over every converged eigenstate.
pub fn peres_lattice(result: &SpectrumResult, op: &SparseOperator) -> Vec<PeresPoint> {
    let even = op.restrict(result.block_states(Parity::Even));
    let odd = op.restrict(result.block_states(Parity::Odd));
    result
        .levels
        .par_iter()
        .enumerate()
        .filter(|(_, l)| l.converged)
        .map(|(i, l)| {
            let block = if l.parity == Parity::Even { &even } else { &odd };
            PeresPoint {
                state_index: i,
                parity: l.parity,
                energy_norm: result.energy_norm(i),
                value: block.quadratic_form(l.vector.as_ref().expect("converged levels carry vectors")),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_boson_ops, build_spin_ops};
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;

    fn certified(p: &ModelParams, n_max: usize) -> SpectrumResult {
        let basis = BasisSpec::for_params(p, n_max);
        certify_convergence(diagonalize(p, &basis, &DiagonalizeOptions::default()).unwrap(), 0.1, 1e-8)
    }

    #[test]
    fn cutoff_shift_of_converged_levels() {
        let p = ModelParams::with_coupling_ratio(1.0, 1.0, 2.0, 1.0).unwrap();
        let r = certified(&p, 60);
        let keys: Vec<LevelKey> = r.converged_indices().into_iter().take(20).map(|i| r.key(i)).collect();
        let shift = cutoff_shift(&p, 120, &keys).unwrap();
        assert_eq!(shift.compared, 20);
        assert!(shift.max_relative_change < 1e-12, "{shift:?}");
        // a cutoff too small to hold the levels shifts them visibly
        let coarse = cutoff_shift(&p, 8, &keys[..4]).unwrap();
        assert!(coarse.max_relative_change > 1e-6);
    }

    #[test]
    fn decoupled_limit_exact() {
        let p = ModelParams::new(1.0, 1.3, 0.0, 2.0).unwrap();
        let r = certified(&p, 12);
        let mut expect: Vec<f64> =
            (0..=12).flat_map(|n| (0..5).map(move |mi| n as f64 + 1.3 * (mi as f64 - 2.0))).collect();
        expect.sort_by(f64::total_cmp);
        for (l, e) in r.levels.iter().zip(&expect) {
            assert!((l.energy - e).abs() < 1e-12);
        }
        assert!(r.levels[0].tail_weight.unwrap() < 1e-30);
        assert!(r.levels[0].converged);
    }

    #[test]
    fn rabi_limit_matches_dense() {
        let p = ModelParams::with_coupling_ratio(1.0, 2.0, 1.5, 0.5).unwrap();
        let basis = BasisSpec::for_params(&p, 30);
        let r = diagonalize(&p, &basis, &DiagonalizeOptions::default()).unwrap();
        let h = build_hamiltonian(&p, &basis).unwrap().to_dense();
        let mut dense: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        dense.sort_by(f64::total_cmp);
        assert_eq!(dense.len(), r.len());
        for (l, d) in r.levels.iter().zip(&dense) {
            assert!((l.energy - d).abs() < 1e-11 * r.norm);
        }
    }

    #[test]
    fn orthonormal_within_blocks() {
        let p = ModelParams::with_coupling_ratio(1.0, 1.0, 2.0, 2.0).unwrap();
        let r = certified(&p, 25);
        for parity in [Parity::Even, Parity::Odd] {
            let vs: Vec<&Vec<f64>> = r.levels.iter().filter(|l| l.parity == parity).map(|l| l.vector.as_ref().unwrap()).collect();
            for i in 0..vs.len() {
                for k in 0..=i {
                    let d: f64 = vs[i].iter().zip(vs[k]).map(|(a, b)| a * b).sum();
                    let e = if i == k { 1.0 } else { 0.0 };
                    assert!((d - e).abs() < 1e-10);
                }
            }
        }
        assert!(r.levels.windows(2).all(|w| w[0].energy <= w[1].energy));
    }

    #[test]
    fn expectations_and_sum_rule() {
        let p = ModelParams::with_coupling_ratio(1.0, 1.0, 1.4, 1.5).unwrap();
        let r = certified(&p, 20);
        let basis = r.basis;
        let spin = build_spin_ops(&basis);
        let h = build_hamiltonian(&p, &basis).unwrap();
        let j = p.j();
        for i in 0..r.len() {
            if r.levels[i].converged {
                assert_relative_eq!(expectation(&r, &spin.j2, i).unwrap(), j * (j + 1.0), epsilon = 1e-10);
                assert!((expectation(&r, &h, i).unwrap() - r.levels[i].energy).abs() < 1e-9);
            } else {
                assert!(expectation(&r, &spin.j2, i).is_err());
            }
        }
        // sum rule over a full block (needs every vector, ignore convergence)
        let n = build_boson_ops(&basis).n_hat;
        for parity in [Parity::Even, Parity::Odd] {
            let block = n.restrict(r.block_states(parity));
            let sum: f64 = r.levels.iter().filter(|l| l.parity == parity).map(|l| block.quadratic_form(l.vector.as_ref().unwrap())).sum();
            assert_relative_eq!(sum, block.trace(), epsilon = 1e-9);
        }
    }

    #[test]
    fn decoupled_ground_state_expectations() {
        let p = ModelParams::new(1.0, 1.0, 0.0, 3.0).unwrap();
        let r = certified(&p, 8);
        let ops = build_boson_ops(&r.basis);
        let spin = build_spin_ops(&r.basis);
        assert!(expectation(&r, &ops.n_hat, 0).unwrap().abs() < 1e-14);
        assert_relative_eq!(expectation(&r, &spin.jz, 0).unwrap(), -3.0, epsilon = 1e-14);
        let lattice = peres_lattice(&r, &spin.j2);
        assert!(lattice.iter().all(|pt| (pt.value - 12.0).abs() < 1e-10));
        assert_eq!(lattice.len(), r.converged_indices().len());
    }

    #[test]
    fn threshold_logic() {
        let p = ModelParams::with_coupling_ratio(1.0, 1.0, 3.0, 1.0).unwrap();
        // far too small a cutoff: the upper states live on the truncation edge
        let r = certified(&p, 6);
        assert!(r.levels.iter().any(|l| !l.converged && l.tail_weight.unwrap() > 1e-8));
        let mut lv = r.levels[0].clone();
        lv.tail_weight = Some(0.3);
        assert!(!(lv.tail_weight.unwrap() < DEFAULT_TAIL_TOLERANCE));
    }

    #[test]
    fn ground_energy_is_variational_in_cutoff() {
        let p = ModelParams::with_coupling_ratio(1.0, 1.0, 2.0, 2.0).unwrap();
        let mut last = f64::INFINITY;
        for n_max in [5, 10, 20, 40, 80] {
            let basis = BasisSpec::for_params(&p, n_max);
            let r = diagonalize(&p, &basis, &DiagonalizeOptions { vector_ceiling: None }).unwrap();
            assert!(r.levels[0].energy <= last + 1e-12);
            last = r.levels[0].energy;
        }
    }

    #[test]
    fn doubling_cutoff_leaves_converged_levels() {
        let p = ModelParams::with_coupling_ratio(1.0, 1.0, 2.0, 2.0).unwrap();
        let small = certified(&p, 60);
        let big = diagonalize(&p, &BasisSpec::for_params(&p, 120), &DiagonalizeOptions { vector_ceiling: None }).unwrap();
        for parity in [Parity::Even, Parity::Odd] {
            let s: Vec<_> = small.levels.iter().filter(|l| l.parity == parity).collect();
            let b: Vec<_> = big.levels.iter().filter(|l| l.parity == parity).collect();
            for l in s.iter().filter(|l| l.converged) {
                let other = b[l.block_rank].energy;
                assert!((l.energy - other).abs() <= 1e-8 * l.energy.abs());
            }
        }
    }

    #[test]
    fn parity_sector_selection() {
        let p = ModelParams::with_coupling_ratio(1.0, 1.0, 1.2, 1.0).unwrap();
        let mut basis = BasisSpec::for_params(&p, 10);
        basis.sector = ParitySector::Odd;
        let r = diagonalize(&p, &basis, &DiagonalizeOptions::default()).unwrap();
        assert!(r.levels.iter().all(|l| l.parity == Parity::Odd));
        assert_eq!(r.len(), basis.dim());
    }
}
