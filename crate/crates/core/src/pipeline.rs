//! Experiment stages shared by the command line and the integration tests.
//! Each stage writes its CSV files into an output directory and returns a
//! JSON summary that ends up in the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::bands::BandPotential;
use crate::config::RunConfig;
use crate::error::Result;
use crate::experiments::{
    analyze_exact, compare_harmonic_window, compare_requantization, energy_grid, exact_peres, run_size,
    scaling_from_runs, semiclassical_overlay, window_mean, ExactAnalysis, ScalingResult, SizeRun, PERES_OBSERVABLES,
};
use crate::harmonic::{band_harmonic_levels, harmonic_spectrum, normal_mode_frequencies};
use crate::output::*;
use crate::params::{derive_scales, regime_report, ModelParams};

/// Exact spectrum and band weights up to the configured ceiling.
pub fn exact_stage(cfg: &RunConfig) -> Result<ExactAnalysis> {
    let params = cfg.params()?;
    let report = regime_report(&params, cfg.tolerances.validity_threshold)?;
    if !report.boa_valid {
        log::warn!("validity ratio {:?} is below {}: band picture not expected to hold", report.validity_ratio, report.threshold);
    }
    analyze_exact(&params, cfg.n_max, cfg.e_ceiling, &cfg.convergence())
}

pub fn write_diag(analysis: &ExactAnalysis, cfg: &RunConfig, out: &Path) -> Result<Value> {
    let spectrum = &analysis.spectrum;
    write_csv(&out.join(SPECTRUM_CSV), &SPECTRUM_HEADER, &spectrum_rows(spectrum))?;
    let params = &spectrum.params;
    Ok(json!({
        "n_max": spectrum.basis.n_max,
        "levels": spectrum.len(),
        "converged": spectrum.converged_indices().len(),
        "convergence_edge_norm": spectrum.convergence_edge() / params.energy_scale(),
        "ground_energy_norm": spectrum.energy_norm(0),
        "max_residual": spectrum.max_residual,
        "scales": derive_scales(params)?,
        "regime": regime_report(params, cfg.tolerances.validity_threshold)?,
    }))
}

pub fn write_npc(analysis: &ExactAnalysis, cfg: &RunConfig, out: &Path) -> Result<Value> {
    write_csv(&out.join(BANDS_CSV), &BANDS_HEADER, &band_rows(analysis))?;
    let (regular, total) = analysis.regular_fraction(cfg.e_ceiling, cfg.tolerances.npc_threshold);
    Ok(json!({
        "regular_ceiling_norm": analysis.regular_ceiling() / analysis.energy_scale(),
        "regular_below_ceiling": regular,
        "converged_below_ceiling": total,
        "npc_threshold": cfg.tolerances.npc_threshold,
        "commutator_ratio": analysis.commutator_ratio,
        "projector_algebra": analysis.algebra,
    }))
}

pub fn write_peres(analysis: &ExactAnalysis, cfg: &RunConfig, out: &Path) -> Result<Value> {
    let mut rows = Vec::new();
    for obs in PERES_OBSERVABLES {
        rows.extend(peres_rows(analysis, obs.name(), &exact_peres(analysis, obs)?));
    }
    write_csv(&out.join(PERES_CSV), &PERES_HEADER, &rows)?;
    write_csv(&out.join(BANDS_CSV), &BANDS_HEADER, &band_rows(analysis))?;

    let params = &analysis.spectrum.params;
    let bottom = BandPotential::ground(params)?.minimum().1 / params.energy_scale();
    let grid = energy_grid(bottom, cfg.e_ceiling, cfg.grid_points);
    let curves = semiclassical_overlay(params, &PERES_OBSERVABLES, &grid)?;
    write_csv(&out.join(SEMICLASSICAL_CSV), &SEMICLASSICAL_HEADER, &semiclassical_rows(&curves))?;
    Ok(json!({ "peres_rows": rows.len(), "semiclassical_rows": curves.len() }))
}

#[derive(Serialize)]
struct RequantSummary {
    maslov_index: u32,
    ceiling_norm: f64,
    window_mean_delta_e: Option<f64>,
    window_levels: usize,
    mean_delta_e: Option<f64>,
    compared: usize,
    /// Bands whose exact and requantized counts differ by more than one.
    count_mismatches: Vec<(f64, usize, usize)>,
    unpaired: usize,
}

pub fn write_requant(analysis: &ExactAnalysis, cfg: &RunConfig, out: &Path) -> Result<Value> {
    let scale = analysis.energy_scale();
    let ceiling = analysis.regular_ceiling().min(cfg.e_ceiling * scale);
    let window = cfg.window();
    let mut level_table = Vec::new();
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for m in cfg.maslov_indices() {
        let cmp = compare_requantization(analysis, m, ceiling, cfg.tolerances.npc_threshold)?;
        let pairs = || cmp.records.iter().map(|r| (r.e_exact_norm, r.delta_e));
        let in_window = window_mean(pairs(), window);
        let all = window_mean(pairs(), (f64::NEG_INFINITY, f64::INFINITY));
        summaries.push(RequantSummary {
            maslov_index: m,
            ceiling_norm: cmp.ceiling_norm,
            window_mean_delta_e: in_window.map(|v| v.0),
            window_levels: in_window.map_or(0, |v| v.1),
            mean_delta_e: all.map(|v| v.0),
            compared: cmp.records.len(),
            count_mismatches: cmp
                .counts
                .iter()
                .filter(|c| c.exact.abs_diff(c.boa) > 1)
                .map(|c| (c.m_prime, c.exact, c.boa))
                .collect(),
            unpaired: cmp.unpaired.len(),
        });
        if !cmp.unpaired.is_empty() {
            log::warn!("maslov {m}: {} requantized levels without an exact partner", cmp.unpaired.len());
        }
        level_table.extend(level_rows(&analysis.spectrum, &cmp.levels, m));
        records.extend(cmp.records);
    }
    write_csv(&out.join(LEVELS_CSV), &LEVELS_HEADER, &level_table)?;
    write_csv(&out.join(COMPARISON_CSV), &COMPARISON_HEADER, &records)?;
    let best = summaries
        .iter()
        .filter_map(|s| s.window_mean_delta_e.or(s.mean_delta_e).map(|v| (s.maslov_index, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|b| b.0);
    Ok(json!({ "rules": summaries, "best_maslov_index": best }))
}

/// Harmonic levels up to the ceiling, and their window error when an exact
/// spectrum is available.
pub fn write_harmonic(analysis: Option<&ExactAnalysis>, cfg: &RunConfig, out: &Path) -> Result<Value> {
    let params = cfg.params()?;
    let scale = params.energy_scale();
    let modes = normal_mode_frequencies(&params)?;
    let levels = harmonic_spectrum(&modes, cfg.e_ceiling * scale);
    write_csv(&out.join(HARMONIC_CSV), &HARMONIC_HEADER, &harmonic_rows(&levels, scale))?;
    let window = cfg.window();
    let comparison = analysis.and_then(|a| {
        let recs =
            compare_harmonic_window(a, &modes, window.0 * scale, window.1 * scale, cfg.tolerances.npc_threshold);
        window_mean(recs.iter().map(|r| (r.e_exact_norm, r.delta_e)), window)
    });
    let band = band_harmonic_levels(&params, 3)?;
    Ok(json!({
        "modes": modes,
        "ground_energy_norm": modes.ground_energy() / scale,
        "band_levels_norm": band.iter().map(|e| e / scale).collect::<Vec<_>>(),
        "levels": levels.len(),
        "window_mean_delta_e": comparison.map(|c| c.0),
        "window_levels": comparison.map_or(0, |c| c.1),
    }))
}

/// Per-size runs for the scaling study. Sizes that fail are dropped with a
/// warning and reported in the summary.
pub fn scaling_runs(cfg: &RunConfig) -> (Vec<SizeRun>, Vec<(f64, String)>) {
    let mut runs = Vec::new();
    let mut failed = Vec::new();
    for &j in &cfg.j_list {
        let started = Instant::now();
        let run = cfg
            .params_at(j)
            .and_then(|p| run_size(&p, cfg.window(), &cfg.maslov_indices(), cfg.tolerances.npc_threshold, &cfg.convergence()));
        match run {
            Ok(r) => {
                log::info!("j={j}: n_max={} in {:.1?}", r.n_max, started.elapsed());
                runs.push(r);
            }
            Err(e) => {
                log::warn!("dropping j={j}: {e}");
                failed.push((j, e.to_string()));
            }
        }
    }
    (runs, failed)
}

pub fn write_scaling(runs: &[SizeRun], failed: &[(f64, String)], cfg: &RunConfig, out: &Path) -> Result<(Vec<ScalingResult>, Value)> {
    let mut results = Vec::new();
    let mut points = Vec::new();
    let mut fits = Vec::new();
    for m in cfg.maslov_indices() {
        let mut r = scaling_from_runs(runs, m, cfg.window());
        r.dropped.extend(failed.iter().cloned());
        points.extend(r.points.iter().cloned());
        fits.extend(fit_rows(&r, m));
        results.push(r);
    }
    write_csv(&out.join(SCALING_CSV), &SCALING_HEADER, &points)?;
    // the harmonic fit does not depend on the rule; keep one copy
    let mut seen_harmonic = false;
    fits.retain(|f| f.series != "harmonic" || !std::mem::replace(&mut seen_harmonic, true));
    fits.sort_by_key(|f| f.series == "harmonic");
    write_csv(&out.join(SCALING_FIT_CSV), &SCALING_FIT_HEADER, &fits)?;
    let summary = serde_json::to_value(&results)?;
    Ok((results, summary))
}

/// Peres lattices, band table and semiclassical curves in one call.
pub fn run_peres_experiment(cfg: &RunConfig, out: &Path) -> Result<Value> {
    write_peres(&exact_stage(cfg)?, cfg, out)
}

/// Requantized levels against the exact spectrum for every configured rule.
pub fn run_requant_comparison(cfg: &RunConfig, out: &Path) -> Result<Value> {
    write_requant(&exact_stage(cfg)?, cfg, out)
}

/// Window-averaged error over `cfg.j_list` with its power-law fits.
pub fn run_scaling_study(cfg: &RunConfig, out: &Path) -> Result<Vec<ScalingResult>> {
    let (runs, failed) = scaling_runs(cfg);
    Ok(write_scaling(&runs, &failed, cfg, out)?.0)
}

#[derive(Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: RunConfig,
    pub params: ModelParams,
    pub versions: Map<String, Value>,
    pub wall_time_seconds: f64,
    pub files: Vec<String>,
    pub summary: Map<String, Value>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig) -> Result<Self> {
        let mut versions = Map::new();
        versions.insert(env!("CARGO_PKG_NAME").into(), env!("CARGO_PKG_VERSION").into());
        versions.insert("target".into(), format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS).into());
        Ok(Self {
            command: command.into(),
            config: cfg.clone(),
            params: cfg.params()?,
            versions,
            wall_time_seconds: 0.0,
            files: Vec::new(),
            summary: Map::new(),
        })
    }

    /// Writes `run.json` after listing the CSV files present in `out`.
    pub fn write(mut self, out: &Path, started: Instant) -> Result<PathBuf> {
        self.wall_time_seconds = started.elapsed().as_secs_f64();
        let mut files: Vec<String> = std::fs::read_dir(out)?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".csv"))
            .collect();
        files.sort();
        self.files = files;
        let path = out.join(MANIFEST_JSON);
        std::fs::write(&path, serde_json::to_string_pretty(&self)?)?;
        Ok(path)
    }
}
