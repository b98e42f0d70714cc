//! Truncated Fock ⊗ pseudospin basis, sparse real operators, the Dicke
//! Hamiltonian and its parity decomposition.
//!
//! Basis states are `|n⟩ ⊗ |j, m⟩` with `n = 0..=n_max` and `m = -j..=j`,
//! stored boson-major: `index = n * (2j + 1) + (m + j)`. Every operator used
//! here is real in this basis.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DickeError, Result};
use crate::params::ModelParams;

/// Largest magnitude tolerated between the two parity blocks.
pub const PARITY_LEAK_TOLERANCE: f64 = 1e-12;

/// Eigenvalue of `exp[iπ(a†a + J_z + j)]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(n: usize, m_index: usize) -> Self {
        if (n + m_index) % 2 == 0 { Parity::Even } else { Parity::Odd }
    }

    pub fn sign(self) -> i32 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParitySector {
    Even,
    Odd,
    #[default]
    Both,
}

impl ParitySector {
    pub fn contains(self, p: Parity) -> bool {
        match self {
            ParitySector::Both => true,
            ParitySector::Even => p == Parity::Even,
            ParitySector::Odd => p == Parity::Odd,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub two_j: u32,
    pub n_max: usize,
    pub sector: ParitySector,
}

impl BasisSpec {
    pub fn new(two_j: u32, n_max: usize) -> Self {
        Self { two_j, n_max, sector: ParitySector::Both }
    }

    pub fn for_params(params: &ModelParams, n_max: usize) -> Self {
        Self::new(params.two_j, n_max)
    }

    pub fn j(&self) -> f64 {
        0.5 * self.two_j as f64
    }

    pub fn spin_dim(&self) -> usize {
        self.two_j as usize + 1
    }

    pub fn boson_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn full_dim(&self) -> usize {
        self.spin_dim() * self.boson_dim()
    }

    /// Dimension of the selected sector.
    pub fn dim(&self) -> usize {
        match self.sector {
            ParitySector::Both => self.full_dim(),
            ParitySector::Even => self.block_states(Parity::Even).len(),
            ParitySector::Odd => self.block_states(Parity::Odd).len(),
        }
    }

    pub fn index(&self, n: usize, m_index: usize) -> usize {
        n * self.spin_dim() + m_index
    }

    /// `(n, m + j)` of a full-basis index.
    pub fn decompose(&self, index: usize) -> (usize, usize) {
        (index / self.spin_dim(), index % self.spin_dim())
    }

    pub fn parity_of(&self, index: usize) -> Parity {
        let (n, mi) = self.decompose(index);
        Parity::of(n, mi)
    }

    /// Full-basis indices of one parity block, in increasing order.
    pub fn block_states(&self, parity: Parity) -> Vec<usize> {
        (0..self.full_dim()).filter(|&i| self.parity_of(i) == parity).collect()
    }

    fn check_params(&self, params: &ModelParams) -> Result<()> {
        if params.two_j != self.two_j {
            return Err(DickeError::DimensionMismatch(format!(
                "parameters have 2j={} but basis has 2j={}",
                params.two_j, self.two_j
            )));
        }
        Ok(())
    }
}

/// Initial boson cutoff: `ceil(2 q_min^2) + 150`, where `q_min` is the
/// superradiant displacement of the lowest band.
pub fn suggest_n_max(params: &ModelParams) -> usize {
    (2.0 * params.q_min_squared()).ceil() as usize + 150
}

/// Real sparse matrix in sorted triplet form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    triplets: Vec<(usize, usize, f64)>,
    symmetric: bool,
}

impl SparseOperator {
    /// Build from unsorted triplets; duplicates are summed and exact zeros
    /// dropped. The symmetry flag is computed, not trusted.
    pub fn from_triplets(dim: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (r, c, v) in entries {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
            *map.entry((r, c)).or_insert(0.0) += v;
        }
        let triplets: Vec<_> = map.into_iter().filter(|&(_, v)| v != 0.0).map(|((r, c), v)| (r, c, v)).collect();
        let mut op = Self { dim, triplets, symmetric: false };
        op.symmetric = op.max_asymmetry() == 0.0;
        op
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, 1.0)))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_triplets(values.len(), values.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    pub fn nnz(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        match self.triplets.binary_search_by(|&(r, c, _)| (r, c).cmp(&(row, col))) {
            Ok(k) => self.triplets[k].2,
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets.iter().map(|&(r, c, v)| (c, r, v)))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_triplets(self.dim, self.triplets.iter().map(|&(r, c, v)| (r, c, s * v)))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self::from_triplets(self.dim, self.triplets.iter().chain(other.triplets.iter()).copied())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.dim];
        for &(r, c, v) in &other.triplets {
            rows[r].push((c, v));
        }
        let mut out = Vec::new();
        for &(r, k, v) in &self.triplets {
            for &(c, w) in &rows[k] {
                out.push((r, c, v * w));
            }
        }
        Self::from_triplets(self.dim, out)
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let mut y = vec![0.0; self.dim];
        for &(r, c, v) in &self.triplets {
            y[r] += v * x[c];
        }
        y
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.triplets.iter().map(|&(r, c, v)| x[r] * v * x[c]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.triplets.iter().fold(0.0, |m, &(_, _, v)| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.triplets.iter().map(|&(_, _, v)| v * v).sum::<f64>().sqrt()
    }

    /// `max |A - Aᵀ|`.
    pub fn max_asymmetry(&self) -> f64 {
        self.triplets.iter().fold(0.0, |m, &(r, c, v)| m.max((v - self.get(c, r)).abs()))
    }

    pub fn trace(&self) -> f64 {
        self.triplets.iter().filter(|t| t.0 == t.1).map(|t| t.2).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.triplets {
            m[(r, c)] += v;
        }
        m
    }

    /// Restrict to the rows and columns listed in `states`.
    pub fn restrict(&self, states: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.dim];
        for (k, &s) in states.iter().enumerate() {
            local[s] = k;
        }
        Self::from_triplets(
            states.len(),
            self.triplets.iter().filter_map(|&(r, c, v)| {
                let (lr, lc) = (local[r], local[c]);
                (lr != usize::MAX && lc != usize::MAX).then_some((lr, lc, v))
            }),
        )
    }

    /// Largest `|row - col|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.triplets.iter().map(|&(r, c, _)| r.abs_diff(c)).max().unwrap_or(0)
    }

    /// Dump as `row,col,value` CSV for debugging.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "row,col,value")?;
        for &(r, c, v) in &self.triplets {
            writeln!(w, "{r},{c},{v:e}")?;
        }
        Ok(())
    }
}

fn kron_boson(basis: &BasisSpec, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> SparseOperator {
    let sd = basis.spin_dim();
    let mut out = Vec::new();
    for (n1, n2, v) in entries {
        for mi in 0..sd {
            out.push((basis.index(n1, mi), basis.index(n2, mi), v));
        }
    }
    SparseOperator::from_triplets(basis.full_dim(), out)
}

fn kron_spin(basis: &BasisSpec, entries: &[(usize, usize, f64)]) -> SparseOperator {
    let mut out = Vec::new();
    for n in 0..basis.boson_dim() {
        for &(m1, m2, v) in entries {
            out.push((basis.index(n, m1), basis.index(n, m2), v));
        }
    }
    SparseOperator::from_triplets(basis.full_dim(), out)
}

/// Boson operators tensored with the spin identity.
#[derive(Clone, Debug)]
pub struct BosonOps {
    pub a: SparseOperator,
    pub a_dag: SparseOperator,
    /// `(a + a†) / √2`.
    pub q_hat: SparseOperator,
    pub n_hat: SparseOperator,
}

pub fn build_boson_ops(basis: &BasisSpec) -> BosonOps {
    assert!(basis.n_max >= 1, "n_max must be at least 1");
    let lower: Vec<_> = (1..=basis.n_max).map(|n| (n - 1, n, (n as f64).sqrt())).collect();
    let a = kron_boson(basis, lower.iter().copied());
    let a_dag = kron_boson(basis, lower.iter().map(|&(r, c, v)| (c, r, v)));
    let q_hat = a.add(&a_dag).scale(std::f64::consts::FRAC_1_SQRT_2);
    let n_hat = kron_boson(basis, (0..=basis.n_max).map(|n| (n, n, n as f64)));
    BosonOps { a, a_dag, q_hat, n_hat }
}

/// Matrix elements of `J_+` in the `|j, m⟩` basis: `(m + j + 1, m + j, value)`.
pub(crate) fn raising_elements(two_j: u32) -> Vec<(usize, usize, f64)> {
    let j = 0.5 * two_j as f64;
    (0..two_j as usize)
        .map(|mi| {
            let m = mi as f64 - j;
            (mi + 1, mi, (j * (j + 1.0) - m * (m + 1.0)).sqrt())
        })
        .collect()
}

/// Dense `(2j+1)`-dimensional spin matrices `(J_x, K, J_z)` where
/// `K = (J_+ - J_-)/2 = i J_y` is the real generator of y-rotations.
pub fn spin_matrices(two_j: u32) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let d = two_j as usize + 1;
    let j = 0.5 * two_j as f64;
    let mut jx = DMatrix::zeros(d, d);
    let mut k = DMatrix::zeros(d, d);
    let mut jz = DMatrix::zeros(d, d);
    for (r, c, v) in raising_elements(two_j) {
        jx[(r, c)] = 0.5 * v;
        jx[(c, r)] = 0.5 * v;
        k[(r, c)] = 0.5 * v;
        k[(c, r)] = -0.5 * v;
    }
    for mi in 0..d {
        jz[(mi, mi)] = mi as f64 - j;
    }
    (jx, k, jz)
}

/// Spin operators tensored with the boson identity.
#[derive(Clone, Debug)]
pub struct SpinOps {
    pub jx: SparseOperator,
    /// `K = i J_y`, real antisymmetric; `exp(-iθJ_y) = exp(-θK)`.
    pub jy_factor: SparseOperator,
    pub jz: SparseOperator,
    /// `J_x² + J_y² + J_z²` assembled from the products.
    pub j2: SparseOperator,
}

pub fn build_spin_ops(basis: &BasisSpec) -> SpinOps {
    let jp = raising_elements(basis.two_j);
    let j = basis.j();
    let mut jx_e = Vec::new();
    let mut k_e = Vec::new();
    for &(r, c, v) in &jp {
        jx_e.push((r, c, 0.5 * v));
        jx_e.push((c, r, 0.5 * v));
        k_e.push((r, c, 0.5 * v));
        k_e.push((c, r, -0.5 * v));
    }
    let jz_e: Vec<_> = (0..basis.spin_dim()).map(|mi| (mi, mi, mi as f64 - j)).collect();
    let jx = kron_spin(basis, &jx_e);
    let jy_factor = kron_spin(basis, &k_e);
    let jz = kron_spin(basis, &jz_e);
    // J_y² = -K²
    let j2 = jx.matmul(&jx).sub(&jy_factor.matmul(&jy_factor)).add(&jz.matmul(&jz));
    SpinOps { jx, jy_factor, jz, j2 }
}

/// Coupling prefactor `2γ/√(2j)` of `J_x (a† + a)`.
pub fn coupling_prefactor(params: &ModelParams) -> f64 {
    2.0 * params.gamma / (params.two_j as f64).sqrt()
}

/// `H = ω a†a + ω0 J_z + (2γ/√(2j)) J_x (a† + a)`.
pub fn build_hamiltonian(params: &ModelParams, basis: &BasisSpec) -> Result<SparseOperator> {
    params.validate()?;
    basis.check_params(params)?;
    let g = coupling_prefactor(params);
    let j = basis.j();
    let sd = basis.spin_dim();
    let jp = raising_elements(basis.two_j);
    let mut entries = Vec::with_capacity(basis.full_dim() * 5);
    for n in 0..=basis.n_max {
        for mi in 0..sd {
            let i = basis.index(n, mi);
            entries.push((i, i, params.omega * n as f64 + params.omega0 * (mi as f64 - j)));
        }
        if n < basis.n_max && g != 0.0 {
            // ⟨n+1| a† |n⟩ = √(n+1); J_x couples m ↔ m±1
            let bos = ((n + 1) as f64).sqrt();
            for &(hi, lo, v) in &jp {
                let x = g * bos * 0.5 * v;
                for (m1, m2) in [(hi, lo), (lo, hi)] {
                    let r = basis.index(n + 1, m1);
                    let c = basis.index(n, m2);
                    entries.push((r, c, x));
                    entries.push((c, r, x));
                }
            }
        }
    }
    Ok(SparseOperator::from_triplets(basis.full_dim(), entries))
}

/// Diagonal parity operator `Π = exp[iπ(a†a + J_z + j)]`.
pub fn parity_operator(basis: &BasisSpec) -> SparseOperator {
    let v: Vec<f64> = (0..basis.full_dim()).map(|i| basis.parity_of(i).sign() as f64).collect();
    SparseOperator::diagonal(&v)
}

/// One parity block: the restricted operator plus its map back to the full basis.
#[derive(Clone, Debug)]
pub struct ParityBlock {
    pub parity: Parity,
    pub operator: SparseOperator,
    /// `full_index[local]`.
    pub full_index: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ParityBlocks {
    pub even: ParityBlock,
    pub odd: ParityBlock,
}

impl ParityBlocks {
    pub fn iter(&self) -> impl Iterator<Item = &ParityBlock> {
        [&self.even, &self.odd].into_iter()
    }
}

pub fn parity_blocks(h: &SparseOperator, basis: &BasisSpec) -> Result<ParityBlocks> {
    if h.dim() != basis.full_dim() {
        return Err(DickeError::DimensionMismatch(format!(
            "operator dimension {} vs basis dimension {}",
            h.dim(),
            basis.full_dim()
        )));
    }
    for &(r, c, v) in h.triplets() {
        if basis.parity_of(r) != basis.parity_of(c) && v.abs() > PARITY_LEAK_TOLERANCE {
            return Err(DickeError::ParityViolation { row: r, col: c, value: v });
        }
    }
    let make = |parity| {
        let full_index = basis.block_states(parity);
        ParityBlock { parity, operator: h.restrict(&full_index), full_index }
    };
    Ok(ParityBlocks { even: make(Parity::Even), odd: make(Parity::Odd) })
}
