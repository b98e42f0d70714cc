//! Quadratic baselines: the in-band expansion of the lowest band and the
//! two-mode normal-mode approximation of the full classical energy surface.

use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use crate::bands::BandPotential;
use crate::error::{DickeError, Result};
use crate::params::{derive_scales, ModelParams};

/// `E_n = V_min + ω_B (n + 1/2)` for the lowest band, `n < n_count`.
pub fn band_harmonic_levels(params: &ModelParams, n_count: usize) -> Result<Vec<f64>> {
    let omega_b = derive_scales(params)?
        .omega_b
        .ok_or_else(|| DickeError::InvalidParameter("the in-band expansion needs f > 1".into()))?;
    let (_, v_min) = BandPotential::ground(params)?.minimum();
    Ok((0..n_count).map(|n| v_min + omega_b * (n as f64 + 0.5)).collect())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NormalModes {
    pub epsilon_minus: f64,
    pub epsilon_plus: f64,
    /// Classical energy at the minimum.
    pub e0: f64,
    /// `-(ω + ω_P(q_min)) / 2`: the classical surface uses `(q² + p²)/2` for
    /// `a†a` and `(Q² + P²)/2` for the spin excitation number about the local
    /// axis, each of which exceeds its normal-ordered operator by `1/2`.
    pub ordering_shift: f64,
    /// `(q, Q, p, P)` at the minimum.
    pub minimum: [f64; 4],
}

/// Classical energy with the boson pair `(q, p)` and the spin mapped onto the
/// canonical pair `(Q, P)`: `J_z = (Q² + P²)/2 - j`, `J_x = Q √(j - (Q² + P²)/4)`.
fn classical_energy(params: &ModelParams, x: &Vector4<f64>) -> f64 {
    let (q, big_q, p, big_p) = (x[0], x[1], x[2], x[3]);
    let j = params.j();
    let rho = 0.5 * (big_q * big_q + big_p * big_p);
    let jx = big_q * (j - 0.5 * rho).max(0.0).sqrt();
    0.5 * params.omega * (q * q + p * p) + params.omega0 * (rho - j) + 2.0 * params.gamma / j.sqrt() * q * jx
}

fn gradient(params: &ModelParams, x: &Vector4<f64>) -> Vector4<f64> {
    let (q, big_q, p, big_p) = (x[0], x[1], x[2], x[3]);
    let j = params.j();
    let c = 2.0 * params.gamma / j.sqrt();
    let rho = 0.5 * (big_q * big_q + big_p * big_p);
    let s = (j - 0.5 * rho).max(f64::MIN_POSITIVE).sqrt();
    Vector4::new(
        params.omega * q + c * big_q * s,
        params.omega0 * big_q + c * q * (s - big_q * big_q / (4.0 * s)),
        params.omega * p,
        params.omega0 * big_p - c * q * big_q * big_p / (4.0 * s),
    )
}

/// Central differences of the analytic gradient, symmetrized.
fn hessian(params: &ModelParams, x: &Vector4<f64>, h: f64) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for i in 0..4 {
        let mut a = *x;
        let mut b = *x;
        a[i] += h;
        b[i] -= h;
        m.set_column(i, &((gradient(params, &a) - gradient(params, &b)) / (2.0 * h)));
    }
    (m + m.transpose()) * 0.5
}

/// Starting point on the `q ≥ 0` branch: the best point of a coarse scan of
/// the `(q, Q)` plane at `p = P = 0`.
fn coarse_minimum(params: &ModelParams) -> Vector4<f64> {
    let j = params.j();
    let q_range = 2.0 * (2.0 * j * (1.0 + params.f().powi(4))).sqrt() + 1.0;
    let big_q_range = 2.0 * j.sqrt();
    let mut best = (f64::INFINITY, Vector4::zeros());
    let steps = 200;
    for a in 0..=steps {
        for b in 0..=steps {
            let x = Vector4::new(
                q_range * a as f64 / steps as f64,
                big_q_range * (2.0 * b as f64 / steps as f64 - 1.0),
                0.0,
                0.0,
            );
            let e = classical_energy(params, &x);
            if e < best.0 {
                best = (e, x);
            }
        }
    }
    best.1
}

pub fn normal_mode_frequencies(params: &ModelParams) -> Result<NormalModes> {
    params.validate()?;
    let mut x = if params.f() > 1.0 { coarse_minimum(params) } else { Vector4::zeros() };
    let scale = |x: &Vector4<f64>| x.norm().max(1.0);
    for _ in 0..100 {
        let h = 1e-5 * scale(&x);
        let g = gradient(params, &x);
        let step = hessian(params, &x, h).lu().solve(&g).ok_or_else(|| DickeError::NotAMinimum("singular Hessian".into()))?;
        x -= step;
        if step.norm() < 1e-13 * scale(&x) {
            break;
        }
    }
    let h = 1e-5 * scale(&x);
    let g = gradient(params, &x);
    if g.norm() > 1e-9 * scale(&x) {
        return Err(DickeError::Fit(format!("classical minimum not located, |grad| = {:e}", g.norm())));
    }
    let hess = hessian(params, &x, h);
    let curvatures = hess.symmetric_eigenvalues();
    if curvatures.min() <= 1e-10 * curvatures.abs().max() {
        return Err(DickeError::NotAMinimum("Hessian is not positive definite".into()));
    }
    // J·Hess has eigenvalues ±iε for the symplectic form J in (q, Q | p, P) order
    let mut symplectic = Matrix4::zeros();
    symplectic[(0, 2)] = 1.0;
    symplectic[(1, 3)] = 1.0;
    symplectic[(2, 0)] = -1.0;
    symplectic[(3, 1)] = -1.0;
    let mut eps: Vec<f64> =
        (symplectic * hess).complex_eigenvalues().iter().map(|z| z.im).filter(|&im| im > 0.0).collect();
    if eps.len() != 2 {
        return Err(DickeError::NotAMinimum("normal-mode frequencies are not real".into()));
    }
    eps.sort_by(f64::total_cmp);
    let precession = BandPotential::ground(params)?.omega_p(x[0]);
    Ok(NormalModes {
        epsilon_minus: eps[0],
        epsilon_plus: eps[1],
        e0: classical_energy(params, &x),
        ordering_shift: -0.5 * (params.omega + precession),
        minimum: [x[0], x[1], x[2], x[3]],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HarmonicLevel {
    pub n_minus: usize,
    pub n_plus: usize,
    pub energy: f64,
}

impl NormalModes {
    /// Quantum ground energy of the two-oscillator approximation.
    pub fn ground_energy(&self) -> f64 {
        self.e0 + self.ordering_shift + 0.5 * (self.epsilon_minus + self.epsilon_plus)
    }

    pub fn level(&self, n_minus: usize, n_plus: usize) -> f64 {
        self.ground_energy() + self.epsilon_minus * n_minus as f64 + self.epsilon_plus * n_plus as f64
    }
}

/// Every `E_0 + ε_- n_- + ε_+ n_+` up to `e_ceiling`, ascending.
pub fn harmonic_spectrum(modes: &NormalModes, e_ceiling: f64) -> Vec<HarmonicLevel> {
    let mut out = Vec::new();
    let base = modes.ground_energy();
    let mut n_plus = 0;
    while base + modes.epsilon_plus * n_plus as f64 <= e_ceiling {
        let mut n_minus = 0;
        loop {
            let energy = base + modes.epsilon_plus * n_plus as f64 + modes.epsilon_minus * n_minus as f64;
            if energy > e_ceiling {
                break;
            }
            out.push(HarmonicLevel { n_minus, n_plus, energy });
            n_minus += 1;
        }
        n_plus += 1;
    }
    out.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.n_plus.cmp(&b.n_plus)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Closed-form normal modes of the superradiant minimum, derived by hand
    /// from the quadratic expansion (used only as an oracle here).
    fn superradiant_oracle(p: &ModelParams) -> (f64, f64) {
        let (w, w0, f) = (p.omega, p.omega0, p.f());
        let a = w0 * w0 * f.powi(4);
        let root = ((a - w * w).powi(2) + 4.0 * w * w * w0 * w0).sqrt();
        ((0.5 * (a + w * w - root)).sqrt(), (0.5 * (a + w * w + root)).sqrt())
    }

    fn normal_oracle(p: &ModelParams) -> (f64, f64) {
        let (w, w0, g) = (p.omega, p.omega0, p.gamma);
        let root = ((w0 * w0 - w * w).powi(2) + 16.0 * g * g * w * w0).sqrt();
        ((0.5 * (w * w + w0 * w0 - root)).sqrt(), (0.5 * (w * w + w0 * w0 + root)).sqrt())
    }

    #[test]
    fn decoupled_frequencies() {
        let p = ModelParams::new(1.0, 1.7, 0.0, 15.0).unwrap();
        let m = normal_mode_frequencies(&p).unwrap();
        assert_relative_eq!(m.epsilon_minus, 1.0, epsilon = 1e-6);
        assert_relative_eq!(m.epsilon_plus, 1.7, epsilon = 1e-6);
        assert_relative_eq!(m.e0, -15.0 * 1.7, epsilon = 1e-12);
        // the decoupled ground state is exact
        assert_relative_eq!(m.ground_energy(), -15.0 * 1.7, epsilon = 1e-6);
    }

    #[test]
    fn normal_phase_matches_oracle() {
        let p = ModelParams::with_coupling_ratio(1.0, 2.0, 0.6, 10.0).unwrap();
        let m = normal_mode_frequencies(&p).unwrap();
        let (lo, hi) = normal_oracle(&p);
        assert_relative_eq!(m.epsilon_minus, lo, epsilon = 1e-6);
        assert_relative_eq!(m.epsilon_plus, hi, epsilon = 1e-6);
    }

    #[test]
    fn superradiant_modes() {
        for (w0, f) in [(1.0, 5.0), (5.0, 3.0), (1.0, 1.5)] {
            let p = ModelParams::with_coupling_ratio(1.0, w0, f, 15.0).unwrap();
            let m = normal_mode_frequencies(&p).unwrap();
            let (lo, hi) = superradiant_oracle(&p);
            assert_relative_eq!(m.epsilon_minus, lo, max_relative = 1e-6);
            assert_relative_eq!(m.epsilon_plus, hi, max_relative = 1e-6);
            let s = derive_scales(&p).unwrap();
            assert_relative_eq!(m.e0, 15.0 * w0 * s.e_gs_classical, max_relative = 1e-8);
            assert_relative_eq!(m.minimum[0].powi(2), p.q_min_squared(), max_relative = 1e-6);
            // slow mode against the in-band frequency, fast mode against the precession frequency
            assert_relative_eq!(m.epsilon_minus, s.omega_b.unwrap(), max_relative = (1.0 / (w0 * f * f)).powi(2).max(1e-6));
            assert_relative_eq!(m.epsilon_plus, s.omega_a, max_relative = 2.0 / (w0 * f * f).powi(2));
            assert_relative_eq!(m.ordering_shift, -0.5 * (1.0 + s.omega_a), max_relative = 1e-9);
        }
    }

    #[test]
    fn gradient_matches_differences() {
        let p = ModelParams::with_coupling_ratio(1.0, 2.0, 3.0, 4.0).unwrap();
        let x = Vector4::new(1.3, -0.7, 0.4, 0.9);
        let g = gradient(&p, &x);
        for i in 0..4 {
            let mut a = x;
            let mut b = x;
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let fd = (classical_energy(&p, &a) - classical_energy(&p, &b)) / 2e-6;
            assert_relative_eq!(g[i], fd, epsilon = 1e-7);
        }
    }

    #[test]
    fn critical_point_is_rejected() {
        let p = ModelParams::with_coupling_ratio(1.0, 1.0, 1.0, 15.0).unwrap();
        assert!(normal_mode_frequencies(&p).is_err());
    }

    #[test]
    fn band_levels() {
        let p = ModelParams::with_coupling_ratio(1.0, 1.0, 5.0, 15.0).unwrap();
        let levels = band_harmonic_levels(&p, 3).unwrap();
        assert_relative_eq!(levels[0], -12.52 * 15.0 + 0.5 * (1.0 - 1.0 / 625.0f64).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(levels[1] - levels[0], (624.0f64 / 625.0).sqrt(), epsilon = 1e-12);
        let normal = ModelParams::with_coupling_ratio(1.0, 1.0, 0.5, 15.0).unwrap();
        assert!(band_harmonic_levels(&normal, 3).is_err());
    }

    #[test]
    fn spectrum_lattice() {
        let modes = NormalModes { epsilon_minus: 1.0, epsilon_plus: 2.5, e0: -10.0, ordering_shift: 0.0, minimum: [0.0; 4] };
        let levels = harmonic_spectrum(&modes, -10.0 + 1.75 + 0.01);
        assert_eq!(levels.len(), 1);
        assert_relative_eq!(levels[0].energy, -10.0 + 1.75);
        // count grows quadratically: N(E) ≈ E² / (2 ε_- ε_+)
        let count = |h: f64| harmonic_spectrum(&modes, -10.0 + 1.75 + h).len() as f64;
        let ratio = count(400.0) / count(200.0);
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
        let all = harmonic_spectrum(&modes, 0.0);
        assert!(all.windows(2).all(|w| w[0].energy <= w[1].energy));
    }
}
