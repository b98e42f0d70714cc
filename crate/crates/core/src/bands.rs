//! Born–Oppenheimer bands: the one-dimensional potentials
//! `V_m'(q) = (ω/2)q² + m' ω_P(q)` with kinetic term `ωp²/2`, their action
//! quantization and microcanonical averages.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{DickeError, Result};
use crate::params::ModelParams;
use crate::quadrature::tanh_sinh;

/// Half-width of the energy window around a barrier that is never integrated.
pub const SEPARATRIX_FRACTION: f64 = 1e-9;
const QUAD_TOL: f64 = 1e-12;
const QUAD_MAX_LEVEL: u32 = 14;
/// Below this distance from the band minimum (in units of `jω0`) the orbit is
/// treated as harmonic.
const HARMONIC_CORE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionKind {
    LeftWell,
    RightWell,
    AboveBarrier,
    SingleWell,
}

impl RegionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionKind::LeftWell => "left-well",
            RegionKind::RightWell => "right-well",
            RegionKind::AboveBarrier => "above-barrier",
            RegionKind::SingleWell => "single-well",
        }
    }
}

/// A classically allowed interval `[lo, hi]` of the boson coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Region {
    pub lo: f64,
    pub hi: f64,
    pub kind: RegionKind,
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    lo: f64,
    hi: f64,
    lo_turning: bool,
    hi_turning: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TurningPoints {
    pub regions: Vec<Region>,
    pub near_separatrix: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BarrierInfo {
    pub has_barrier: bool,
    /// `E_barrier / (jω0)`, present only for double wells.
    pub e_barrier_norm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuantizedLevel {
    pub m_prime: f64,
    pub n: usize,
    pub energy: f64,
    pub region: RegionKind,
    pub doublet: bool,
    pub near_separatrix: bool,
    pub matched_exact: Option<usize>,
    pub delta_e: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct BandPotential {
    pub m_prime: f64,
    omega: f64,
    omega0: f64,
    j: f64,
    /// `(ω / (jω0)) f²`
    c2: f64,
}

impl BandPotential {
    pub fn new(params: &ModelParams, m_prime: f64) -> Result<Self> {
        params.validate()?;
        let j = params.j();
        let offset = m_prime + j;
        if !(0.0..=2.0 * j).contains(&offset) || (offset - offset.round()).abs() > 1e-12 {
            return Err(DickeError::InvalidParameter(format!("m' = {m_prime} is not a level of spin j = {j}")));
        }
        let f = params.f();
        Ok(Self {
            m_prime: offset.round() - j,
            omega: params.omega,
            omega0: params.omega0,
            j,
            c2: params.omega / (j * params.omega0) * f * f,
        })
    }

    /// The lowest band, `m' = -j`.
    pub fn ground(params: &ModelParams) -> Result<Self> {
        Self::new(params, -params.j())
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn energy_scale(&self) -> f64 {
        self.j * self.omega0
    }

    pub fn separatrix_window(&self) -> f64 {
        SEPARATRIX_FRACTION * self.energy_scale()
    }

    /// Larmor frequency `ω_P(q) = ω0 √(1 + c² q²)`.
    pub fn omega_p(&self, q: f64) -> f64 {
        self.omega0 * (1.0 + self.c2 * q * q).sqrt()
    }

    pub fn value(&self, q: f64) -> f64 {
        0.5 * self.omega * q * q + self.m_prime * self.omega_p(q)
    }

    pub fn second_derivative(&self, q: f64) -> f64 {
        self.omega + self.m_prime * self.omega0 * self.c2 * (1.0 + self.c2 * q * q).powf(-1.5)
    }

    /// `E_m'(p, q)`.
    pub fn energy(&self, q: f64, p: f64) -> f64 {
        0.5 * self.omega * p * p + self.value(q)
    }

    pub fn has_barrier(&self) -> bool {
        self.omega + self.m_prime * self.omega0 * self.c2 < 0.0
    }

    pub fn barrier_energy(&self) -> Option<f64> {
        self.has_barrier().then(|| self.omega0 * self.m_prime)
    }

    pub fn barrier_diagnostics(&self) -> BarrierInfo {
        BarrierInfo {
            has_barrier: self.has_barrier(),
            e_barrier_norm: self.barrier_energy().map(|e| e / self.energy_scale()),
        }
    }

    /// `(q_min, V_min)` with `q_min ≥ 0`.
    pub fn minimum(&self) -> (f64, f64) {
        if !self.has_barrier() {
            return (0.0, self.value(0.0));
        }
        let s = -self.m_prime * self.omega0 * self.c2 / self.omega;
        let q = ((s * s - 1.0) / self.c2).sqrt();
        (q, self.value(q))
    }

    /// Small-oscillation frequency `√(ω V''(q_min))`.
    pub fn well_frequency(&self) -> f64 {
        (self.omega * self.second_derivative(self.minimum().0)).sqrt()
    }

    pub fn momentum(&self, q: f64, e: f64) -> f64 {
        (2.0 * (e - self.value(q)) / self.omega).max(0.0).sqrt()
    }

    pub fn near_separatrix(&self, e: f64) -> bool {
        self.barrier_energy().is_some_and(|eb| (e - eb).abs() < self.separatrix_window())
    }

    pub fn turning_points(&self, e: f64) -> TurningPoints {
        let (q_min, v_min) = self.minimum();
        let near_separatrix = self.near_separatrix(e);
        if e <= v_min {
            return TurningPoints { regions: Vec::new(), near_separatrix };
        }
        let g = |q: f64| self.value(q) - e;
        let mut upper = q_min + 1.0;
        while g(upper) < 0.0 {
            upper = 2.0 * upper + 1.0;
        }
        let outer = bisect(g, q_min, upper);
        let regions = match self.barrier_energy() {
            Some(eb) if e < eb => {
                let inner = bisect(|q| -g(q), 0.0, q_min);
                vec![
                    Region { lo: -outer, hi: -inner, kind: RegionKind::LeftWell },
                    Region { lo: inner, hi: outer, kind: RegionKind::RightWell },
                ]
            }
            Some(_) => vec![Region { lo: -outer, hi: outer, kind: RegionKind::AboveBarrier }],
            None => vec![Region { lo: -outer, hi: outer, kind: RegionKind::SingleWell }],
        };
        TurningPoints { regions, near_separatrix }
    }

    fn is_harmonic_core(&self, e: f64) -> bool {
        e - self.minimum().1 < HARMONIC_CORE * self.energy_scale()
    }

    /// `E - V(q)` on a segment, given the distances of `q` from both ends.
    ///
    /// Differences of `V` are written as `V(t) - V(q) = (t - q)(t + q) K(t, q)`
    /// about the nearer end `t`: a turning point (where `E = V(t)`), or the
    /// symmetry point `q = 0`. Both forms stay accurate where the gap is small.
    fn gap(&self, e: f64, seg: &Segment, d_lo: f64, d_hi: f64) -> (f64, f64) {
        let s = |t: f64| (1.0 + self.c2 * t * t).sqrt();
        let k = |t: f64, q: f64| 0.5 * self.omega + self.m_prime * self.omega0 * self.c2 / (s(t) + s(q));
        let (q, gap) = if d_hi <= d_lo {
            let q = seg.hi - d_hi;
            let gap = if seg.hi_turning {
                d_hi * (seg.hi + q) * k(seg.hi, q)
            } else {
                e - self.value(0.0) - q * q * k(0.0, q)
            };
            (q, gap)
        } else {
            let q = seg.lo + d_lo;
            let gap = if seg.lo_turning {
                -d_lo * (seg.lo + q) * k(seg.lo, q)
            } else {
                e - self.value(0.0) - q * q * k(0.0, q)
            };
            (q, gap)
        };
        (q, gap.max(0.0))
    }

    /// A region cut at `q = 0` when it contains it, so that the slow passage
    /// over a barrier top sits at a segment end.
    fn segments(&self, r: &Region) -> Vec<Segment> {
        if r.lo < 0.0 && r.hi > 0.0 {
            vec![
                Segment { lo: r.lo, hi: 0.0, lo_turning: true, hi_turning: false },
                Segment { lo: 0.0, hi: r.hi, lo_turning: false, hi_turning: true },
            ]
        } else {
            vec![Segment { lo: r.lo, hi: r.hi, lo_turning: true, hi_turning: true }]
        }
    }

    /// `∫_r h(q, E - V(q)) dq`.
    fn integrate<H: Fn(f64, f64) -> f64>(&self, e: f64, r: &Region, h: H) -> Result<f64> {
        let mut total = 0.0;
        for seg in self.segments(r) {
            let half = 0.5 * (seg.hi - seg.lo);
            let v = tanh_sinh(
                |a, b| {
                    let (q, gap) = self.gap(e, &seg, half * a, half * b);
                    if gap > 0.0 { h(q, gap) } else { 0.0 }
                },
                QUAD_TOL,
                0.0,
                QUAD_MAX_LEVEL,
            )
            .ok_or_else(|| self.quadrature_failure(e))?;
            total += half * v;
        }
        Ok(total)
    }

    /// `∫_r g(q, p) / (ω p) dq`.
    fn inverse_momentum_integral<F: Fn(f64, f64) -> f64>(&self, e: f64, r: &Region, g: F) -> Result<f64> {
        let omega = self.omega;
        self.integrate(e, r, |q, gap| {
            let p = (2.0 * gap / omega).sqrt();
            g(q, p) / (omega * p)
        })
    }

    fn quadrature_failure(&self, e: f64) -> DickeError {
        match self.barrier_energy() {
            Some(eb) => DickeError::NearSeparatrix { energy: e, barrier: eb },
            None => DickeError::Fit(format!("orbit quadrature did not converge at E = {e}")),
        }
    }

    fn check_energy(&self, e: f64) -> Result<()> {
        let (_, v_min) = self.minimum();
        if e < v_min {
            return Err(DickeError::Forbidden { energy: e, minimum: v_min });
        }
        if let Some(eb) = self.barrier_energy().filter(|_| self.near_separatrix(e)) {
            return Err(DickeError::NearSeparatrix { energy: e, barrier: eb });
        }
        Ok(())
    }

    /// `S = ∮ p dq = 2 ∫_r p dq` over one allowed region.
    pub fn action_integral(&self, e: f64, r: &Region) -> Result<f64> {
        self.check_energy(e)?;
        if self.is_harmonic_core(e) {
            return Ok(2.0 * PI * (e - self.minimum().1) / self.well_frequency());
        }
        let omega = self.omega;
        Ok(2.0 * self.integrate(e, r, |_, gap| (2.0 * gap / omega).sqrt())?)
    }

    /// Classical period `T = dS/dE = 2 ∫_r dq / (ω p)`.
    pub fn period(&self, e: f64, r: &Region) -> Result<f64> {
        self.check_energy(e)?;
        if self.is_harmonic_core(e) {
            return Ok(2.0 * PI / self.well_frequency());
        }
        Ok(2.0 * self.inverse_momentum_integral(e, r, |_, _| 1.0)?)
    }

    /// Action of the closed orbit through one connected region: a single well
    /// below the barrier, the merged region above it.
    pub fn orbit_action(&self, e: f64) -> Result<(f64, f64)> {
        self.check_energy(e)?;
        let tp = self.turning_points(e);
        let r = tp.regions.last().expect("allowed energy has a region");
        Ok((self.action_integral(e, r)?, self.period(e, r)?))
    }

    /// Solves `S(E) = target` on `[lo, hi]` where `S(lo) ≤ target ≤ S(hi)`.
    fn solve_action(&self, target: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
        if target <= 0.0 {
            return Ok(self.minimum().1);
        }
        let (s_lo, _) = if lo <= self.minimum().1 { (0.0, 0.0) } else { self.orbit_action(lo)? };
        let (s_hi, _) = self.orbit_action(hi)?;
        let mut e = lo + (hi - lo) * ((target - s_lo) / (s_hi - s_lo)).clamp(0.0, 1.0);
        if e <= lo || e >= hi {
            e = 0.5 * (lo + hi);
        }
        let tol = 4.0 * f64::EPSILON * self.energy_scale().max(e.abs());
        for _ in 0..200 {
            let (s, t) = self.orbit_action(e)?;
            let resid = s - target;
            if resid < 0.0 {
                lo = e;
            } else {
                hi = e;
            }
            let mut next = e - resid / t;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - e).abs() <= tol || hi - lo <= tol {
                return Ok(next);
            }
            e = next;
        }
        Ok(e)
    }

    /// Energies with `S(E) = 2π(n + maslov/4)` up to `e_ceiling`.
    ///
    /// Below a barrier each solution of the single-well condition is emitted
    /// twice, one per well, as the two members of a parity doublet. Above it
    /// the merged orbit carries the action of both wells.
    pub fn requantize(&self, maslov_index: u32, e_ceiling: f64) -> Result<Vec<QuantizedLevel>> {
        let (_, v_min) = self.minimum();
        let phase = maslov_index as f64 / 4.0;
        let target = |n: usize| 2.0 * PI * (n as f64 + phase);
        let level = |n, energy, region, doublet, near_separatrix| QuantizedLevel {
            m_prime: self.m_prime,
            n,
            energy,
            region,
            doublet,
            near_separatrix,
            matched_exact: None,
            delta_e: None,
        };
        let mut out = Vec::new();
        if e_ceiling <= v_min {
            return Ok(out);
        }
        let Some(eb) = self.barrier_energy() else {
            let s_max = self.orbit_action(e_ceiling)?.0;
            let mut n = 0;
            while target(n) <= s_max {
                out.push(level(n, self.solve_action(target(n), v_min, e_ceiling)?, RegionKind::SingleWell, false, false));
                n += 1;
            }
            return Ok(out);
        };

        let sep = 2.0 * self.separatrix_window();
        let below_top = e_ceiling.min(eb - sep);
        let s_well_max = self.orbit_action(below_top)?.0;
        let mut n = 0;
        while target(n) <= s_well_max {
            let e = self.solve_action(target(n), v_min, below_top)?;
            out.push(level(n, e, RegionKind::LeftWell, true, false));
            out.push(level(n, e, RegionKind::RightWell, true, false));
            n += 1;
        }
        if e_ceiling <= eb + sep {
            return Ok(out);
        }
        // merged orbits continue the counting of the doublets: 2 S_well(E_b) = S_merged(E_b)
        let s_merge_min = self.orbit_action(eb + sep)?.0;
        let s_below = 2.0 * self.orbit_action(eb - sep)?.0;
        let mut n = 0;
        while target(n) < s_below {
            n += 1;
        }
        while target(n) < s_merge_min {
            out.push(level(n, eb, RegionKind::AboveBarrier, false, true));
            n += 1;
        }
        let s_max = self.orbit_action(e_ceiling)?.0;
        while target(n) <= s_max {
            let e = self.solve_action(target(n), eb + sep, e_ceiling)?;
            out.push(level(n, e, RegionKind::AboveBarrier, false, false));
            n += 1;
        }
        Ok(out)
    }

    /// Microcanonical average of a phase-space function on the energy shell.
    pub fn average_with<F: Fn(f64, f64) -> f64>(&self, e: f64, observable: F) -> Result<f64> {
        self.check_energy(e)?;
        let symmetrized = |q: f64, p: f64| 0.5 * (observable(q, p) + observable(q, -p));
        if self.is_harmonic_core(e) {
            let (q_min, _) = self.minimum();
            return Ok(0.5 * (symmetrized(q_min, 0.0) + symmetrized(-q_min, 0.0)));
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for r in &self.turning_points(e).regions {
            num += self.inverse_momentum_integral(e, r, symmetrized)?;
            den += self.inverse_momentum_integral(e, r, |_, _| 1.0)?;
        }
        Ok(num / den)
    }

    pub fn average(&self, e: f64, observable: Observable) -> Result<f64> {
        self.average_with(e, |q, p| observable.symbol(self, q, p))
    }
}

/// Phase-space symbols with a built-in meaning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Observable {
    /// `a†a ↦ (p² + q² - 1) / 2`
    BosonNumber,
    /// `J_z ↦ m' ω0 / ω_P(q)`
    Jz,
    /// `J_z' ↦ m'`
    JzPrime,
    BandEnergy,
}

impl Observable {
    pub const ALL: [Observable; 4] = [Observable::BosonNumber, Observable::Jz, Observable::JzPrime, Observable::BandEnergy];

    pub fn name(self) -> &'static str {
        match self {
            Observable::BosonNumber => "adag_a",
            Observable::Jz => "jz",
            Observable::JzPrime => "jz_prime",
            Observable::BandEnergy => "energy",
        }
    }

    pub fn symbol(self, band: &BandPotential, q: f64, p: f64) -> f64 {
        match self {
            Observable::BosonNumber => 0.5 * (p * p + q * q - 1.0),
            Observable::Jz => band.m_prime * band.omega0 / band.omega_p(q),
            Observable::JzPrime => band.m_prime,
            Observable::BandEnergy => band.energy(q, p),
        }
    }
}

/// Bisection to machine precision for a sign change of `g` on `[lo, hi]`,
/// with `g(lo) ≤ 0 ≤ g(hi)`.
fn bisect<F: Fn(f64) -> f64>(g: F, mut lo: f64, mut hi: f64) -> f64 {
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// All bands of a spin-j system, lowest first.
pub fn all_bands(params: &ModelParams) -> Result<Vec<BandPotential>> {
    (0..=params.two_j).map(|k| BandPotential::new(params, k as f64 - params.j())).collect()
}

/// Requantized levels of every band below `e_ceiling`, sorted by energy.
pub fn requantize_all(params: &ModelParams, maslov_index: u32, e_ceiling: f64) -> Result<Vec<QuantizedLevel>> {
    let mut levels = Vec::new();
    for band in all_bands(params)? {
        levels.extend(band.requantize(maslov_index, e_ceiling)?);
    }
    levels.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.m_prime.total_cmp(&b.m_prime)));
    Ok(levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn case_b(j: f64) -> ModelParams {
        ModelParams::with_coupling_ratio(1.0, 1.0, 5.0, j).unwrap()
    }

    fn case_a() -> ModelParams {
        ModelParams::with_coupling_ratio(1.0, 5.0, 3.0, 15.0).unwrap()
    }

    #[test]
    fn harmonic_band() {
        let band = BandPotential::new(&case_b(15.0), 0.0).unwrap();
        assert!(!band.has_barrier());
        let tp = band.turning_points(0.5);
        assert_eq!(tp.regions.len(), 1);
        assert_relative_eq!(tp.regions[0].hi, 1.0, epsilon = 1e-15);
        assert_relative_eq!(tp.regions[0].lo, -1.0, epsilon = 1e-15);
        for e in [0.3, 2.0, 17.5] {
            let (s, t) = band.orbit_action(e).unwrap();
            assert_relative_eq!(s, 2.0 * PI * e, epsilon = 1e-12 * s);
            assert_relative_eq!(t, 2.0 * PI, epsilon = 1e-12);
        }
        let levels = band.requantize(2, 50.9).unwrap();
        assert_eq!(levels.len(), 51);
        for l in &levels {
            assert!((l.energy - (l.n as f64 + 0.5)).abs() < 1e-9);
            assert_eq!(l.region, RegionKind::SingleWell);
        }
        // the literal rule puts n = 0 at the bottom of the band
        let literal = band.requantize(0, 3.5).unwrap();
        for (n, l) in literal.iter().enumerate() {
            assert!((l.energy - n as f64).abs() < 1e-9);
        }
        assert_eq!(literal.len(), 4);
    }

    #[test]
    fn ground_band_minimum_matches_analytic() {
        let p = case_b(15.0);
        let band = BandPotential::ground(&p).unwrap();
        let (q, v) = band.minimum();
        assert_relative_eq!(q * q, p.q_min_squared(), epsilon = 1e-10);
        assert_relative_eq!(q * q, 374.4, epsilon = 1e-10);
        assert_relative_eq!(v / band.energy_scale(), -12.52, epsilon = 1e-13);
        // golden-section oracle
        let (mut a, mut b) = (0.0, 40.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let (c, d) = (b - g * (b - a), a + g * (b - a));
            if band.value(c) < band.value(d) { b = d } else { a = c }
        }
        assert!((0.5 * (a + b) - q).abs() < 1e-6);
        assert_relative_eq!(band.well_frequency(), (1.0 - 5f64.powi(-4)).sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn barrier_structure() {
        let p = case_b(15.0);
        let g = BandPotential::ground(&p).unwrap().barrier_diagnostics();
        assert!(g.has_barrier);
        assert_eq!(g.e_barrier_norm, Some(-1.0));
        assert!(!BandPotential::new(&p, 0.0).unwrap().has_barrier());
        // m' = -j/2 with f² > 2 has its barrier at -1/2
        let half = BandPotential::new(&case_b(2.0), -1.0).unwrap();
        assert_eq!(half.barrier_diagnostics().e_barrier_norm, Some(-0.5));
        let vmax = (-200..=200).map(|i| half.value(i as f64 * 1e-3)).fold(f64::MIN, f64::max);
        assert_relative_eq!(vmax, half.value(0.0));
        // threshold m' < -j/f² = -0.6
        assert!(BandPotential::new(&p, -1.0).unwrap().has_barrier());
        assert!(!BandPotential::new(&p, 0.0).unwrap().has_barrier());
    }

    #[test]
    fn turning_points_at_barrier_coalesce() {
        let band = BandPotential::ground(&case_b(15.0)).unwrap();
        let eb = band.barrier_energy().unwrap();
        let tp = band.turning_points(eb - 1e-6);
        assert_eq!(tp.regions.len(), 2);
        assert!(tp.regions[1].lo < 1e-2 && tp.regions[1].lo > 0.0);
        assert_relative_eq!(tp.regions[0].hi, -tp.regions[1].lo);
        assert!(band.turning_points(eb).near_separatrix);
        assert!(matches!(band.orbit_action(eb), Err(DickeError::NearSeparatrix { .. })));
        assert!(band.turning_points(band.minimum().1 - 1.0).regions.is_empty());
    }

    #[test]
    fn period_is_action_derivative() {
        let band = BandPotential::ground(&case_b(15.0)).unwrap();
        for e in [-180.0, -150.0, -100.0, -20.0, 30.0] {
            let (_, t) = band.orbit_action(e).unwrap();
            let h = 1e-4;
            let fd = (band.orbit_action(e + h).unwrap().0 - band.orbit_action(e - h).unwrap().0) / (2.0 * h);
            assert!((fd - t).abs() < 1e-6 * t, "E={e}: {fd} vs {t}");
        }
    }

    #[test]
    fn period_tends_to_well_frequency() {
        let band = BandPotential::ground(&case_b(15.0)).unwrap();
        let (_, v) = band.minimum();
        let omega_b = (1.0 - 5f64.powi(-4)).sqrt();
        let (_, t) = band.orbit_action(v + 1e-4).unwrap();
        assert_relative_eq!(t, 2.0 * PI / omega_b, epsilon = 1e-5);
    }

    #[test]
    fn period_diverges_logarithmically_at_barrier() {
        let band = BandPotential::ground(&case_a()).unwrap();
        let eb = band.barrier_energy().unwrap();
        for side in [-1.0, 1.0] {
            let ts: Vec<f64> = (2..8).map(|k| band.orbit_action(eb + side * 10f64.powi(-k)).unwrap().1).collect();
            let steps: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
            assert!(steps.iter().all(|&s| s > 0.0));
            let mean = steps.iter().sum::<f64>() / steps.len() as f64;
            assert!(steps.iter().all(|s| (s - mean).abs() < 0.05 * mean), "{steps:?}");
        }
    }

    #[test]
    fn levels_increase_and_doublets_pair() {
        let p = case_b(15.0);
        let band = BandPotential::ground(&p).unwrap();
        let levels = band.requantize(2, -0.5 * band.energy_scale()).unwrap();
        let (_, v) = band.minimum();
        assert_relative_eq!(levels[0].energy, v + 0.5 * band.well_frequency(), epsilon = 1e-3);
        let wells: Vec<_> = levels.iter().filter(|l| l.doublet).collect();
        assert!(wells.chunks(2).all(|c| c[0].energy == c[1].energy && c[0].region != c[1].region));
        let above: Vec<_> = levels.iter().filter(|l| l.region == RegionKind::AboveBarrier).collect();
        assert!(!above.is_empty());
        for group in [wells.iter().step_by(2).copied().collect::<Vec<_>>(), above] {
            assert!(group.windows(2).all(|w| w[0].energy < w[1].energy && w[0].n + 1 == w[1].n));
        }
        // the merged count continues the doublet count
        let n_doublets = wells.len() / 2;
        let first_above = levels.iter().find(|l| l.region == RegionKind::AboveBarrier).unwrap();
        assert!((first_above.n as i64 - 2 * n_doublets as i64).abs() <= 1);
    }

    #[test]
    fn averages() {
        let band = BandPotential::ground(&case_a()).unwrap();
        for e in [-4.0 * 75.0, -1.5 * 75.0, -0.5 * 75.0] {
            assert_relative_eq!(band.average(e, Observable::BandEnergy).unwrap(), e, epsilon = 1e-9 * e.abs());
            assert_relative_eq!(band.average(e, Observable::JzPrime).unwrap(), -15.0, epsilon = 1e-13);
            let jz = band.average(e, Observable::Jz).unwrap();
            assert!(jz > -15.0 && jz < 0.0);
        }
        // harmonic band: <n> = E/ω - 1/2
        let flat = BandPotential::new(&case_a(), 0.0).unwrap();
        assert_relative_eq!(flat.average(7.0, Observable::BosonNumber).unwrap(), 6.5, epsilon = 1e-10);
        // odd observables vanish on the symmetric shell
        assert!(band.average_with(-100.0, |q, _| q).unwrap().abs() < 1e-9);
        assert!(band.average_with(-100.0, |_, p| p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn boson_number_dips_at_barrier() {
        let band = BandPotential::ground(&case_a()).unwrap();
        let scale = band.energy_scale();
        let n = |x: f64| band.average(x * scale, Observable::BosonNumber).unwrap();
        assert!(n(-1.0 - 1e-6) < n(-1.05) && n(-1.0 - 1e-6) < n(-1.0 + 0.05));
        assert!(n(-1.0 + 1e-6) < n(-1.0 + 0.05));
    }

    #[test]
    fn rejects_invalid_labels() {
        let p = case_b(15.0);
        assert!(BandPotential::new(&p, 15.5).is_err());
        assert!(BandPotential::new(&p, 0.5).is_err());
        assert!(BandPotential::new(&case_b(1.5), 0.5).is_ok());
        assert_eq!(all_bands(&p).unwrap().len(), 31);
    }
}
