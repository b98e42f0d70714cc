//! End-to-end experiments: exact spectrum plus band analysis, requantization
//! against the exact levels, the harmonic baseline and the size scaling of
//! the requantization error.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::bands::{all_bands, BandPotential, Observable, QuantizedLevel, RegionKind};
use crate::error::{DickeError, Result};
use crate::harmonic::{harmonic_spectrum, normal_mode_frequencies, HarmonicLevel, NormalModes};
use crate::invariant::{band_weights, build_band_projectors, jzprime_peres, BandWeights, ProjectorAlgebraReport};
use crate::operators::{build_boson_ops, build_hamiltonian, build_spin_ops, suggest_n_max};
use crate::params::ModelParams;
use crate::spectrum::{diagonalize_converged, peres_lattice, ConvergenceSettings, LevelKey, PeresPoint, SpectrumResult};

/// Default NPC below which a state counts as regular.
pub const DEFAULT_NPC_THRESHOLD: f64 = 1.1;
/// Minimum number of compared levels for a system size to enter a fit.
pub const MIN_WINDOW_LEVELS: usize = 5;

/// The two parameter sets studied in detail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CanonicalCase {
    /// `ω = 1, ω0 = 5, f = 3`
    A,
    /// `ω = ω0 = 1, f = 5`
    B,
}

impl CanonicalCase {
    /// Default analysis ceiling in units of `jω0`, a little past the end
    /// of the regular region.
    pub fn default_ceiling(self) -> f64 {
        match self {
            CanonicalCase::A => -0.8,
            CanonicalCase::B => -3.0,
        }
    }

    pub fn params(self, j: f64) -> ModelParams {
        let (omega0, f) = match self {
            CanonicalCase::A => (5.0, 3.0),
            CanonicalCase::B => (1.0, 5.0),
        };
        ModelParams::with_coupling_ratio(1.0, omega0, f, j).expect("canonical parameters are valid")
    }
}

/// Exact spectrum with band weights for every converged state.
#[derive(Clone, Debug)]
pub struct ExactAnalysis {
    pub spectrum: SpectrumResult,
    pub weights: Vec<BandWeights>,
    /// Position of each state's weights in `weights`.
    weight_index: Vec<Option<usize>>,
    pub algebra: ProjectorAlgebraReport,
    /// `‖[H, J_z']‖_F / ‖H‖_F`
    pub commutator_ratio: f64,
}

impl ExactAnalysis {
    pub fn weights_of(&self, state_index: usize) -> Option<&BandWeights> {
        self.weight_index[state_index].map(|k| &self.weights[k])
    }

    pub fn npc_of(&self, state_index: usize) -> Option<f64> {
        self.weights_of(state_index).map(|w| w.npc)
    }

    pub fn energy_scale(&self) -> f64 {
        self.spectrum.params.energy_scale()
    }

    /// Energy below which every state is converged and carries a band label:
    /// the lowest unconverged or unassignable state (`+∞` if none).
    pub fn regular_ceiling(&self) -> f64 {
        let unassignable = self
            .weights
            .iter()
            .filter(|w| !w.assignable)
            .map(|w| self.spectrum.levels[w.state_index].energy)
            .fold(f64::INFINITY, f64::min);
        unassignable.min(self.spectrum.convergence_edge())
    }

    /// Fraction of converged states below `energy_norm` with `npc < threshold`.
    pub fn regular_fraction(&self, energy_norm: f64, npc_threshold: f64) -> (usize, usize) {
        let below: Vec<&BandWeights> =
            self.weights.iter().filter(|w| self.spectrum.energy_norm(w.state_index) < energy_norm).collect();
        (below.iter().filter(|w| w.npc < npc_threshold).count(), below.len())
    }

    /// Converged, assignable states of each band below `ceiling`, by energy.
    pub fn band_members(&self, ceiling: f64) -> BTreeMap<usize, Vec<usize>> {
        let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for w in &self.weights {
            if w.assignable && self.spectrum.levels[w.state_index].energy < ceiling {
                out.entry(w.band_index).or_default().push(w.state_index);
            }
        }
        for members in out.values_mut() {
            members.sort_by(|&a, &b| self.spectrum.levels[a].energy.total_cmp(&self.spectrum.levels[b].energy));
        }
        out
    }
}

/// Exact spectrum converged up to `ceiling_norm · jω0`, with projectors and
/// band weights. `n_max = None` uses the suggested starting cutoff.
pub fn analyze_exact(
    params: &ModelParams,
    n_max: Option<usize>,
    ceiling_norm: f64,
    settings: &ConvergenceSettings,
) -> Result<ExactAnalysis> {
    let ceiling = ceiling_norm * params.energy_scale();
    let start = n_max.unwrap_or_else(|| suggest_n_max(params));
    let spectrum = diagonalize_converged(params, start, ceiling, ceiling, settings)?;
    let projectors = build_band_projectors(params, &spectrum.basis)?;
    let weights = band_weights(&spectrum, &projectors);
    let mut weight_index = vec![None; spectrum.len()];
    for (k, w) in weights.iter().enumerate() {
        weight_index[w.state_index] = Some(k);
    }
    let h = build_hamiltonian(params, &spectrum.basis)?;
    Ok(ExactAnalysis {
        algebra: projectors.algebra_report(),
        commutator_ratio: projectors.commutator_ratio(params, &h),
        spectrum,
        weights,
        weight_index,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRecord {
    pub m_prime: f64,
    pub n: usize,
    pub state_index: usize,
    pub region: RegionKind,
    pub doublet: bool,
    pub e_exact_norm: f64,
    pub e_boa_norm: f64,
    pub delta_e: f64,
    pub npc: f64,
    pub maslov_index: u32,
}

/// Per-band level counts below the pairing ceiling.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandCount {
    pub m_prime: f64,
    pub exact: usize,
    pub boa: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RequantComparison {
    pub maslov_index: u32,
    /// Pairing ceiling, `E / (jω0)`.
    pub ceiling_norm: f64,
    /// Every requantized level below the ceiling, with its exact partner if paired.
    pub levels: Vec<QuantizedLevel>,
    /// Pairs whose exact partner is regular (`npc` below threshold).
    pub records: Vec<ComparisonRecord>,
    pub counts: Vec<BandCount>,
    /// Requantized levels below the ceiling without an exact partner.
    pub unpaired: Vec<QuantizedLevel>,
}

fn relative_error(approx: f64, exact: f64) -> f64 {
    ((approx - exact) / exact).abs()
}

/// Pairs exact states with requantized levels band by band: within a band
/// both lists are ordered by energy and matched by rank, so parity doublets
/// meet the two copies of their doublet level.
pub fn compare_requantization(
    analysis: &ExactAnalysis,
    maslov_index: u32,
    ceiling: f64,
    npc_threshold: f64,
) -> Result<RequantComparison> {
    let params = &analysis.spectrum.params;
    let scale = params.energy_scale();
    let members = analysis.band_members(ceiling);
    let per_band: Vec<(BandPotential, Vec<QuantizedLevel>)> = all_bands(params)?
        .into_par_iter()
        .map(|band| band.requantize(maslov_index, ceiling).map(|levels| (band, levels)))
        .collect::<Result<Vec<_>>>()?;

    let mut levels = Vec::new();
    let mut records = Vec::new();
    let mut counts = Vec::new();
    let mut unpaired = Vec::new();
    for (band_index, (band, mut boa)) in per_band.into_iter().enumerate() {
        let exact = members.get(&band_index).map(Vec::as_slice).unwrap_or(&[]);
        counts.push(BandCount { m_prime: band.m_prime, exact: exact.len(), boa: boa.len() });
        for (k, level) in boa.iter_mut().enumerate() {
            let Some(&state) = exact.get(k) else {
                unpaired.push(level.clone());
                continue;
            };
            let e_exact = analysis.spectrum.levels[state].energy;
            let delta = relative_error(level.energy, e_exact);
            level.matched_exact = Some(state);
            level.delta_e = Some(delta);
            let npc = analysis.npc_of(state).expect("band members carry weights");
            if npc < npc_threshold && !level.near_separatrix {
                records.push(ComparisonRecord {
                    m_prime: level.m_prime,
                    n: level.n,
                    state_index: state,
                    region: level.region,
                    doublet: level.doublet,
                    e_exact_norm: e_exact / scale,
                    e_boa_norm: level.energy / scale,
                    delta_e: delta,
                    npc,
                    maslov_index,
                });
            }
        }
        levels.extend(boa);
    }
    levels.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.m_prime.total_cmp(&b.m_prime)));
    records.sort_by(|a, b| a.e_exact_norm.total_cmp(&b.e_exact_norm));
    Ok(RequantComparison { maslov_index, ceiling_norm: ceiling / scale, levels, records, counts, unpaired })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarmonicRecord {
    pub n_minus: usize,
    pub n_plus: usize,
    pub state_index: usize,
    pub e_exact_norm: f64,
    pub e_harmonic_norm: f64,
    pub delta_e: f64,
    pub npc: f64,
}

/// Harmonic levels against exact states inside `(lo, hi)` (absolute
/// energies): both lists are sorted and paired by rank within the window.
/// Every harmonic level is counted twice, once per parity, because the
/// oscillator describes one of the two symmetric minima.
pub fn compare_harmonic_window(
    analysis: &ExactAnalysis,
    modes: &NormalModes,
    lo: f64,
    hi: f64,
    npc_threshold: f64,
) -> Vec<HarmonicRecord> {
    let scale = analysis.energy_scale();
    let doubled: Vec<HarmonicLevel> = harmonic_spectrum(modes, hi)
        .into_iter()
        .filter(|l| l.energy > lo)
        .flat_map(|l| [l, l])
        .collect();
    let exact: Vec<usize> = analysis
        .weights
        .iter()
        .map(|w| w.state_index)
        .filter(|&i| {
            let e = analysis.spectrum.levels[i].energy;
            e > lo && e < hi
        })
        .collect();
    let mut exact = exact;
    exact.sort_by(|&a, &b| analysis.spectrum.levels[a].energy.total_cmp(&analysis.spectrum.levels[b].energy));
    exact
        .iter()
        .zip(&doubled)
        .filter_map(|(&state, h)| {
            let npc = analysis.npc_of(state)?;
            (npc < npc_threshold).then(|| {
                let e = analysis.spectrum.levels[state].energy;
                HarmonicRecord {
                    n_minus: h.n_minus,
                    n_plus: h.n_plus,
                    state_index: state,
                    e_exact_norm: e / scale,
                    e_harmonic_norm: h.energy / scale,
                    delta_e: relative_error(h.energy, e),
                    npc,
                }
            })
        })
        .collect()
}

/// Harmonic levels matched by quantum numbers: `n_+` is the band index above
/// the lowest band and `n_-` the rank of the doublet inside the band.
pub fn compare_harmonic_quantum_numbers(
    analysis: &ExactAnalysis,
    modes: &NormalModes,
    ceiling: f64,
    npc_threshold: f64,
) -> Vec<HarmonicRecord> {
    let scale = analysis.energy_scale();
    let mut out = Vec::new();
    for (band_index, members) in analysis.band_members(ceiling) {
        for (rank, &state) in members.iter().enumerate() {
            let npc = analysis.npc_of(state).expect("band members carry weights");
            if npc >= npc_threshold {
                continue;
            }
            let (n_plus, n_minus) = (band_index, rank / 2);
            let e_h = modes.level(n_minus, n_plus);
            let e = analysis.spectrum.levels[state].energy;
            out.push(HarmonicRecord {
                n_minus,
                n_plus,
                state_index: state,
                e_exact_norm: e / scale,
                e_harmonic_norm: e_h / scale,
                delta_e: relative_error(e_h, e),
                npc,
            });
        }
    }
    out.sort_by(|a, b| a.e_exact_norm.total_cmp(&b.e_exact_norm));
    out
}

/// Observables shown on Peres lattices, in output order.
pub const PERES_OBSERVABLES: [Observable; 3] = [Observable::JzPrime, Observable::BosonNumber, Observable::Jz];

/// Exact Peres lattice of one observable over the converged states.
pub fn exact_peres(analysis: &ExactAnalysis, observable: Observable) -> Result<Vec<PeresPoint>> {
    let basis = &analysis.spectrum.basis;
    Ok(match observable {
        Observable::JzPrime => jzprime_peres(&analysis.spectrum, &analysis.weights),
        Observable::BosonNumber => peres_lattice(&analysis.spectrum, &build_boson_ops(basis).n_hat),
        Observable::Jz => peres_lattice(&analysis.spectrum, &build_spin_ops(basis).jz),
        Observable::BandEnergy => analysis
            .spectrum
            .converged_indices()
            .into_iter()
            .map(|i| {
                let e = analysis.spectrum.energy_norm(i);
                PeresPoint { state_index: i, parity: analysis.spectrum.levels[i].parity, energy_norm: e, value: e }
            })
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemiclassicalPoint {
    pub m_prime: f64,
    pub energy_norm: f64,
    pub observable: Observable,
    pub value: f64,
}

/// `points` energies evenly spaced over `[lo, hi]` (units of `jω0`).
pub fn energy_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect(),
    }
}

/// Semiclassical curves of every band and observable on a shared grid.
pub fn semiclassical_overlay(
    params: &ModelParams,
    observables: &[Observable],
    grid_norm: &[f64],
) -> Result<Vec<SemiclassicalPoint>> {
    let bands = all_bands(params)?;
    Ok(bands
        .par_iter()
        .flat_map_iter(|band| {
            observables.iter().flat_map(move |&obs| {
                semiclassical_curve(band, obs, grid_norm).into_iter().map(move |(energy_norm, value)| {
                    SemiclassicalPoint { m_prime: band.m_prime, energy_norm, observable: obs, value }
                })
            })
        })
        .collect())
}

/// One exact Peres point of a band against the semiclassical average at
/// the same energy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrackingPoint {
    pub state_index: usize,
    pub energy_norm: f64,
    pub exact: f64,
    /// `None` where the average is undefined (separatrix or forbidden energy).
    pub semiclassical: Option<f64>,
    /// `|exact - semiclassical| / (|semiclassical| + 1)`
    pub deviation: Option<f64>,
}

/// Regular states assigned to `band_index` below `ceiling` compared with the
/// band's microcanonical average of `observable`. Energies below the band
/// minimum (the lowest state can sit a fraction of `|ω_B - ω|` under it)
/// use the curve's end point.
pub fn track_band(
    analysis: &ExactAnalysis,
    peres: &[PeresPoint],
    band_index: usize,
    observable: Observable,
    ceiling: f64,
    npc_threshold: f64,
) -> Result<Vec<TrackingPoint>> {
    let band = BandPotential::new(&analysis.spectrum.params, band_index as f64 - analysis.spectrum.params.j())?;
    let floor = band.minimum().1;
    let value_of: BTreeMap<usize, f64> = peres.iter().map(|p| (p.state_index, p.value)).collect();
    let members = analysis.band_members(ceiling);
    let states = members.get(&band_index).map(Vec::as_slice).unwrap_or(&[]);
    Ok(states
        .par_iter()
        .filter(|&&i| analysis.npc_of(i).is_some_and(|npc| npc < npc_threshold))
        .filter_map(|&i| {
            let exact = *value_of.get(&i)?;
            let semiclassical = band.average(analysis.spectrum.levels[i].energy.max(floor), observable).ok();
            Some(TrackingPoint {
                state_index: i,
                energy_norm: analysis.spectrum.energy_norm(i),
                exact,
                semiclassical,
                deviation: semiclassical.map(|s| (exact - s).abs() / (s.abs() + 1.0)),
            })
        })
        .collect())
}

/// Local minima of a sampled curve: interior samples lower than both
/// neighbours, as `(x, y)`.
pub fn local_minima(curve: &[(f64, f64)]) -> Vec<(f64, f64)> {
    curve.windows(3).filter(|w| w[1].1 < w[0].1 && w[1].1 < w[2].1).map(|w| w[1]).collect()
}

/// Mean of `delta_e` over records with `E/(jω0)` strictly inside the window.
pub fn window_mean<I>(records: I, window: (f64, f64)) -> Option<(f64, usize)>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let mut sum = 0.0;
    let mut n = 0;
    for (e_norm, delta) in records {
        if e_norm > window.0 && e_norm < window.1 {
            sum += delta;
            n += 1;
        }
    }
    (n > 0).then(|| (sum / n as f64, n))
}

/// Semiclassical curve of one observable along a band, on an energy grid in
/// units of `jω0`. Grid points the band cannot reach are skipped.
pub fn semiclassical_curve(band: &BandPotential, observable: Observable, grid_norm: &[f64]) -> Vec<(f64, f64)> {
    let scale = band.energy_scale();
    grid_norm
        .iter()
        .filter_map(|&x| band.average(x * scale, observable).ok().map(|v| (x, v)))
        .collect()
}

/// Power-law fit `y ∝ x^{-α}` by least squares on logarithms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub prefactor: f64,
    /// Root-mean-square residual of `ln y`.
    pub residual: f64,
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(DickeError::Fit(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(DickeError::Fit(format!("non-positive point ({x}, {y})")));
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(DickeError::Fit("all abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    Ok(PowerLawFit { alpha: -slope, prefactor: intercept.exp(), residual })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingPoint {
    pub j: f64,
    pub n_max: usize,
    pub maslov_index: u32,
    pub mean_delta_e: f64,
    pub n_levels: usize,
    pub mean_delta_e_harmonic: Option<f64>,
    pub n_levels_harmonic: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingResult {
    pub window: (f64, f64),
    pub points: Vec<ScalingPoint>,
    pub fit: Option<PowerLawFit>,
    pub harmonic_fit: Option<PowerLawFit>,
    pub dropped: Vec<(f64, String)>,
}

/// Everything the scaling study needs from one system size.
#[derive(Clone, Debug)]
pub struct SizeRun {
    pub j: f64,
    pub n_max: usize,
    /// `(maslov, mean ΔE, count)` for each requantization rule.
    pub boa: Vec<(u32, Option<(f64, usize)>)>,
    pub harmonic: Option<(f64, usize)>,
    /// Every exact level entering a window mean.
    pub used: Vec<LevelKey>,
}

/// Exact spectrum, requantization and harmonic comparison for one size.
pub fn run_size(
    params: &ModelParams,
    window: (f64, f64),
    maslov_indices: &[u32],
    npc_threshold: f64,
    settings: &ConvergenceSettings,
) -> Result<SizeRun> {
    let scale = params.energy_scale();
    let analysis = analyze_exact(params, None, window.1, settings)?;
    let ceiling = analysis.regular_ceiling().min(window.1 * scale);
    let inside = |e: f64| e > window.0 && e < window.1;
    let mut used = std::collections::BTreeSet::new();
    let mut boa = Vec::new();
    for &m in maslov_indices {
        let cmp = compare_requantization(&analysis, m, ceiling, npc_threshold)?;
        used.extend(cmp.records.iter().filter(|r| inside(r.e_exact_norm)).map(|r| r.state_index));
        boa.push((m, window_mean(cmp.records.iter().map(|r| (r.e_exact_norm, r.delta_e)), window)));
    }
    let harmonic = normal_mode_frequencies(params).ok().and_then(|modes| {
        let recs = compare_harmonic_window(&analysis, &modes, window.0 * scale, window.1 * scale, npc_threshold);
        used.extend(recs.iter().map(|r| r.state_index));
        window_mean(recs.iter().map(|r| (r.e_exact_norm, r.delta_e)), window)
    });
    let used = used.into_iter().map(|i| analysis.spectrum.key(i)).collect();
    Ok(SizeRun { j: params.j(), n_max: analysis.spectrum.basis.n_max, boa, harmonic, used })
}

/// Scaling of the window-averaged error with `j` for one requantization rule.
pub fn scaling_from_runs(runs: &[SizeRun], maslov_index: u32, window: (f64, f64)) -> ScalingResult {
    let mut points = Vec::new();
    let mut dropped = Vec::new();
    for run in runs {
        let boa = run.boa.iter().find(|(m, _)| *m == maslov_index).and_then(|(_, v)| *v);
        match boa {
            Some((mean, n)) if n >= MIN_WINDOW_LEVELS => points.push(ScalingPoint {
                j: run.j,
                n_max: run.n_max,
                maslov_index,
                mean_delta_e: mean,
                n_levels: n,
                mean_delta_e_harmonic: run.harmonic.map(|h| h.0),
                n_levels_harmonic: run.harmonic.map_or(0, |h| h.1),
            }),
            other => {
                let reason = format!("{} regular levels in window", other.map_or(0, |v| v.1));
                log::warn!("dropping j={} from the scaling fit: {reason}", run.j);
                dropped.push((run.j, reason));
            }
        }
    }
    let fit = fit_power_law(&points.iter().map(|p| (p.j, p.mean_delta_e)).collect::<Vec<_>>()).ok();
    let harmonic_points: Vec<(f64, f64)> =
        points.iter().filter_map(|p| p.mean_delta_e_harmonic.map(|h| (p.j, h))).collect();
    let harmonic_fit = fit_power_law(&harmonic_points).ok();
    ScalingResult { window, points, fit, harmonic_fit, dropped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn power_law_exact_and_flat() {
        let exact: Vec<(f64, f64)> = (5..=15).map(|j| (j as f64, 1.0 / j as f64)).collect();
        let fit = fit_power_law(&exact).unwrap();
        assert_relative_eq!(fit.alpha, 1.0, epsilon = 1e-12);
        assert!(fit.residual < 1e-12);
        let flat: Vec<(f64, f64)> = (5..=15).map(|j| (j as f64, 0.3)).collect();
        assert!(fit_power_law(&flat).unwrap().alpha.abs() < 1e-12);
    }

    #[test]
    fn power_law_noisy() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<(f64, f64)> = (5..=24)
            .map(|j| {
                let noise: f64 = rng.gen_range(-0.03..0.03);
                (j as f64, 0.2 * (j as f64).powf(-1.03) * noise.exp())
            })
            .collect();
        let fit = fit_power_law(&pts).unwrap();
        assert!((fit.alpha - 1.03).abs() < 0.05, "{}", fit.alpha);
    }

    #[test]
    fn power_law_rejects_bad_input() {
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 0.5)]).is_err());
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(fit_power_law(&[(2.0, 1.0), (2.0, 0.5), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn window_mean_is_open_interval() {
        let recs = [(-8.0, 1.0), (-7.0, 2.0), (-6.5, 4.0), (-6.0, 8.0)];
        assert_eq!(window_mean(recs, (-8.0, -6.0)), Some((3.0, 2)));
        assert_eq!(window_mean(recs, (0.0, 1.0)), None);
    }

    #[test]
    fn decoupled_requantization_is_exact() {
        // γ = 0 with the literal rule: the m' bands are exact oscillators
        let p = ModelParams::new(1.0, 1.3, 0.0, 1.0).unwrap();
        let settings = ConvergenceSettings::default();
        let analysis = analyze_exact(&p, Some(40), 10.0, &settings).unwrap();
        assert!(analysis.weights.iter().all(|w| (w.npc - 1.0).abs() < 1e-10));
        let ceiling = analysis.regular_ceiling().min(10.0 * p.energy_scale());
        let cmp = compare_requantization(&analysis, 0, ceiling, DEFAULT_NPC_THRESHOLD).unwrap();
        let flat: Vec<_> = cmp.records.iter().filter(|r| r.m_prime == 0.0 && r.e_exact_norm != 0.0).collect();
        assert!(flat.len() > 10);
        assert!(flat.iter().all(|r| r.delta_e < 1e-8));
        for c in &cmp.counts {
            assert!((c.exact as i64 - c.boa as i64).abs() <= 1, "{c:?}");
        }
    }

    #[test]
    fn small_superradiant_pairing() {
        let p = CanonicalCase::B.params(2.0);
        let analysis = analyze_exact(&p, None, -4.0, &ConvergenceSettings::default()).unwrap();
        let ceiling = analysis.regular_ceiling().min(-4.0 * p.energy_scale());
        let lowest = |m| {
            let cmp = compare_requantization(&analysis, m, ceiling, DEFAULT_NPC_THRESHOLD).unwrap();
            cmp.records.iter().find(|r| r.m_prime == -2.0).unwrap().clone()
        };
        // the band Hamiltonian carries no zero-point shift, so the literal rule wins
        assert!(lowest(0).delta_e < 1e-4);
        let shifted = lowest(2);
        assert_relative_eq!(shifted.e_boa_norm - lowest(0).e_boa_norm, 0.5 * p.omega / p.energy_scale(), epsilon = 1e-3);
        assert!(analysis.commutator_ratio > 0.0 && analysis.commutator_ratio < 1.0);
    }
}
