//! Symmetric band eigensolver.
//!
//! The Dicke Hamiltonian is banded in the boson-major basis, so the full
//! spectrum is obtained without ever forming a dense matrix:
//!
//! 1. Givens bulge-chasing reduction of the band to tridiagonal form,
//!    `O(n² b)` work and `O(n b)` memory.
//! 2. Implicit QL iteration for all tridiagonal eigenvalues.
//! 3. Inverse iteration on the original band (banded LU with partial
//!    pivoting) for the requested low-lying eigenvectors, with modified
//!    Gram-Schmidt inside clusters of close eigenvalues.
//!
//! Every step is deterministic: the starting vectors come from a seeded
//! generator keyed by the eigenvalue index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::operators::SparseOperator;

/// Relative gap (in units of the matrix norm) below which two eigenvalues
/// are treated as a cluster during inverse iteration.
const CLUSTER_RELATIVE_GAP: f64 = 1e-5;
const MAX_INVERSE_ITERATIONS: usize = 8;
const QL_MAX_SWEEPS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub enum BandSolveError {
    NoConvergence { index: usize },
    Residual { index: usize, residual: f64 },
}

impl std::fmt::Display for BandSolveError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BandSolveError::NoConvergence { index } => write!(f, "QL iteration did not converge at eigenvalue {index}"),
            BandSolveError::Residual { index, residual } => {
                write!(f, "inverse iteration for eigenvalue {index} stalled at residual {residual:e}")
            }
        }
    }
}

/// Symmetric band matrix, lower storage with one spare diagonal for bulges.
///
/// Column `c` holds `A[c + d, c]` for `d = 0..=stored` at
/// `data[c * (stored + 1) + d]`.
#[derive(Clone, Debug)]
pub struct SymBand {
    n: usize,
    /// Semi-bandwidth of the matrix itself.
    b: usize,
    /// Stored semi-bandwidth (`b + 1`).
    stored: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, b: usize) -> Self {
        let stored = b + 1;
        Self { n, b, stored, data: vec![0.0; n * (stored + 1)] }
    }

    /// Lower triangle of a symmetric sparse operator.
    pub fn from_sparse(op: &SparseOperator) -> Self {
        let mut m = Self::zeros(op.dim(), op.bandwidth());
        for &(r, c, v) in op.triplets() {
            if r >= c {
                m.set(r, c, v);
            }
        }
        m
    }

    pub fn from_tridiagonal(diag: &[f64], off: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), 1);
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        for (i, &e) in off.iter().enumerate() {
            m.set(i + 1, i, e);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.b
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> usize {
        debug_assert!(r >= c && r - c <= self.stored);
        c * (self.stored + 1) + (r - c)
    }

    /// `A[r, c]` for any `r, c` (zero outside the stored band).
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        if r - c > self.stored {
            0.0
        } else {
            self.data[self.at(r, c)]
        }
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        assert!(r - c <= self.b, "entry ({r}, {c}) outside bandwidth {}", self.b);
        let k = self.at(r, c);
        self.data[k] = v;
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|r| {
                let lo = r.saturating_sub(self.b);
                let hi = (r + self.b).min(self.n - 1);
                (lo..=hi).map(|c| self.get(r, c).abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for c in 0..self.n {
            let col = &self.data[c * (self.stored + 1)..];
            y[c] += col[0] * x[c];
            for d in 1..=self.b.min(self.n - 1 - c) {
                let v = col[d];
                y[c + d] += v * x[c];
                y[c] += v * x[c + d];
            }
        }
        y
    }

    /// `A <- G A Gᵀ` with `G` acting on rows/columns `(p, p+1)` as
    /// `[[c, s], [-s, c]]`.
    fn rotate(&mut self, p: usize, c: f64, s: f64) {
        let q = p + 1;
        let w = self.stored;
        let ld = w + 1;
        // rows above p: entries (p, k) and (q, k) live in column k
        for k in q.saturating_sub(w)..p {
            let base = k * ld;
            let x = self.data[base + p - k];
            let y = self.data[base + q - k];
            self.data[base + p - k] = c * x + s * y;
            self.data[base + q - k] = -s * x + c * y;
        }
        if p >= w {
            // (q, p-w) is outside storage, so (p, p-w) must already be zero
            let k = p - w;
            let x = self.data[k * ld + w];
            debug_assert!(x == 0.0, "band overflow above");
            self.data[k * ld + w] = c * x;
        }
        // 2x2 diagonal block
        let app = self.data[p * ld];
        let aqq = self.data[q * ld];
        let apq = self.data[p * ld + 1];
        let cs = c * s;
        self.data[p * ld] = c * c * app + 2.0 * cs * apq + s * s * aqq;
        self.data[q * ld] = s * s * app - 2.0 * cs * apq + c * c * aqq;
        self.data[p * ld + 1] = cs * (aqq - app) + (c * c - s * s) * apq;
        // rows below q: (k, p) in column p, (k, q) in column q
        let hi = (p + w).min(self.n - 1);
        for k in (q + 1)..=hi {
            let x = self.data[p * ld + (k - p)];
            let y = self.data[q * ld + (k - q)];
            self.data[p * ld + (k - p)] = c * x + s * y;
            self.data[q * ld + (k - q)] = -s * x + c * y;
        }
        if q + w < self.n {
            // (q + w, q) pairs with (q + w, p), which is outside storage
            let y = self.data[q * ld + w];
            debug_assert!(y == 0.0, "band overflow below");
            self.data[q * ld + w] = c * y;
        }
    }

    /// Reduce to tridiagonal form; returns `(diagonal, off-diagonal)`.
    pub fn tridiagonalize(mut self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let b = self.b;
        if b > 1 {
            for k in 0..n.saturating_sub(2) {
                for d in (2..=b).rev() {
                    let i = k + d;
                    if i >= n {
                        continue;
                    }
                    if !self.annihilate(i, k) {
                        continue;
                    }
                    // chase the bulge created at (i + b, i - 1)
                    let mut r = i;
                    while r + b < n {
                        let row = r + b;
                        if !self.annihilate(row, r - 1) {
                            break;
                        }
                        r = row;
                    }
                }
            }
        }
        let ld = self.stored + 1;
        let diag = (0..n).map(|i| self.data[i * ld]).collect();
        let off = (0..n.saturating_sub(1)).map(|i| self.data[i * ld + 1]).collect();
        (diag, off)
    }

    /// Zero `A[i, col]` by rotating in the plane `(i-1, i)`.
    fn annihilate(&mut self, i: usize, col: usize) -> bool {
        let y = self.data[self.at(i, col)];
        if y == 0.0 {
            return false;
        }
        let x = self.data[self.at(i - 1, col)];
        let rho = x.hypot(y);
        let (c, s) = (x / rho, y / rho);
        self.rotate(i - 1, c, s);
        let k = self.at(i, col);
        self.data[k] = 0.0;
        true
    }
}

/// All eigenvalues of a symmetric tridiagonal matrix, ascending.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>, BandSolveError> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > QL_MAX_SWEEPS {
                return Err(BandSolveError::NoConvergence { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let bb = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * bb;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - bb;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// LU factorisation with partial pivoting of `A - σI` for a band matrix.
struct BandLu {
    n: usize,
    kl: usize,
    /// Upper bandwidth of `U` (`2 b`).
    ku: usize,
    width: usize,
    /// Row `i` holds columns `i - kl ..= i + ku` at `rows[i * width + (c + kl - i)]`.
    rows: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    fn factor(a: &SymBand, shift: f64, tiny: f64) -> Self {
        let n = a.n;
        let kl = a.b;
        let ku = 2 * a.b;
        let width = kl + ku + 1;
        let mut rows = vec![0.0; n * width];
        for r in 0..n {
            let lo = r.saturating_sub(kl);
            let hi = (r + kl).min(n - 1);
            for c in lo..=hi {
                let mut v = a.get(r, c);
                if r == c {
                    v -= shift;
                }
                rows[r * width + (c + kl - r)] = v;
            }
        }
        let mut pivots = vec![0; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut piv = k;
            let mut best = rows[k * width + kl].abs();
            for r in (k + 1)..=last {
                let v = rows[r * width + (k + kl - r)].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            pivots[k] = piv;
            let cmax = (k + ku).min(n - 1);
            if piv != k {
                for c in k..=cmax {
                    rows.swap(k * width + (c + kl - k), piv * width + (c + kl - piv));
                }
            }
            let mut pivot = rows[k * width + kl];
            if pivot.abs() < tiny {
                pivot = if pivot < 0.0 { -tiny } else { tiny };
                rows[k * width + kl] = pivot;
            }
            for r in (k + 1)..=last {
                let idx = r * width + (k + kl - r);
                let l = rows[idx] / pivot;
                rows[idx] = l;
                if l != 0.0 {
                    for c in (k + 1)..=cmax {
                        let u = rows[k * width + (c + kl - k)];
                        rows[r * width + (c + kl - r)] -= l * u;
                    }
                }
            }
        }
        Self { n, kl, ku, width, rows, pivots }
    }

    fn solve(&self, x: &mut [f64]) {
        let (n, kl, w) = (self.n, self.kl, self.width);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            for r in (k + 1)..=(k + kl).min(n - 1) {
                x[r] -= self.rows[r * w + (k + kl - r)] * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for c in (k + 1)..=(k + self.ku).min(n - 1) {
                s -= self.rows[k * w + (c + kl - k)] * x[c];
            }
            x[k] = s / self.rows[k * w + kl];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) -> f64 {
    let nrm = dot(x, x).sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
    nrm
}

/// Eigenvalues and the low-lying eigenvectors of a symmetric band matrix.
#[derive(Clone, Debug)]
pub struct BandEigen {
    /// All eigenvalues, ascending.
    pub values: Vec<f64>,
    /// Eigenvectors of `values[0..vectors.len()]`.
    pub vectors: Vec<Vec<f64>>,
    /// `‖A v - λ v‖` of each computed eigenvector.
    pub residuals: Vec<f64>,
    /// Infinity norm of the matrix.
    pub norm: f64,
}

/// Solve the band eigenproblem. Eigenvectors are computed for every
/// eigenvalue `<= vector_ceiling` (none when `None`).
pub fn band_eigen(a: &SymBand, vector_ceiling: Option<f64>) -> Result<BandEigen, BandSolveError> {
    let n = a.dim();
    let norm = a.norm_inf();
    if n == 0 {
        return Ok(BandEigen { values: vec![], vectors: vec![], residuals: vec![], norm });
    }
    let (d, e) = a.clone().tridiagonalize();
    let values = tridiagonal_eigenvalues(&d, &e)?;
    let count = match vector_ceiling {
        None => 0,
        Some(ceiling) => values.partition_point(|&v| v <= ceiling),
    };
    let scale = norm.max(f64::MIN_POSITIVE);
    let cluster_gap = CLUSTER_RELATIVE_GAP * scale;
    let tol = 1e-12 * scale;
    let tiny = f64::EPSILON * scale;
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    let mut cluster_start = 0;
    for i in 0..count {
        if i == 0 || values[i] - values[i - 1] > cluster_gap {
            cluster_start = i;
        }
        let mut shift = values[i];
        // separate exactly coincident shifts inside a cluster
        if i > cluster_start && shift - values[i - 1] < 10.0 * f64::EPSILON * scale {
            shift = values[i - 1] + 10.0 * f64::EPSILON * scale;
        }
        let lu = BandLu::factor(a, shift, tiny);
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        normalize(&mut x);
        let mut residual = f64::INFINITY;
        for it in 0..MAX_INVERSE_ITERATIONS {
            lu.solve(&mut x);
            for prev in &vectors[cluster_start..i] {
                let proj = dot(&x, prev);
                x.iter_mut().zip(prev).for_each(|(v, p)| *v -= proj * p);
            }
            normalize(&mut x);
            if it >= 1 {
                let ax = a.matvec(&x);
                residual = ax.iter().zip(&x).map(|(y, v)| (y - values[i] * v).powi(2)).sum::<f64>().sqrt();
                if residual <= tol {
                    break;
                }
            }
        }
        if !(residual <= 1e3 * tol) {
            return Err(BandSolveError::Residual { index: i, residual });
        }
        vectors.push(x);
        residuals.push(residual);
    }
    Ok(BandEigen { values, vectors, residuals, norm })
}
