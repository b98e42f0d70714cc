//! CSV artifacts. Column names and order are part of the interface read by
//! the plotting scripts; every writer goes through [`write_csv`].

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::bands::QuantizedLevel;
use crate::error::Result;
use crate::experiments::{ExactAnalysis, ScalingResult, SemiclassicalPoint};
use crate::harmonic::HarmonicLevel;
use crate::spectrum::{PeresPoint, SpectrumResult};

pub const SPECTRUM_CSV: &str = "spectrum.csv";
pub const PERES_CSV: &str = "peres.csv";
pub const BANDS_CSV: &str = "bands.csv";
pub const LEVELS_CSV: &str = "levels.csv";
pub const COMPARISON_CSV: &str = "comparison.csv";
pub const SEMICLASSICAL_CSV: &str = "semiclassical.csv";
pub const HARMONIC_CSV: &str = "harmonic.csv";
pub const SCALING_CSV: &str = "scaling.csv";
pub const SCALING_FIT_CSV: &str = "scaling_fit.csv";
pub const MANIFEST_JSON: &str = "run.json";

/// Writes `rows` with a header row, creating parent directories.
/// An empty table still gets its header.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SpectrumRow {
    pub state_index: usize,
    pub parity: i32,
    pub energy: f64,
    pub energy_norm: f64,
    pub converged: bool,
    pub tail_weight: Option<f64>,
}

pub const SPECTRUM_HEADER: [&str; 6] = ["state_index", "parity", "energy", "energy_norm", "converged", "tail_weight"];

pub fn spectrum_rows(spectrum: &SpectrumResult) -> Vec<SpectrumRow> {
    spectrum
        .levels
        .iter()
        .enumerate()
        .map(|(i, l)| SpectrumRow {
            state_index: i,
            parity: l.parity.sign(),
            energy: l.energy,
            energy_norm: spectrum.energy_norm(i),
            converged: l.converged,
            tail_weight: l.tail_weight,
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct PeresRow {
    pub state_index: usize,
    pub parity: i32,
    pub energy_norm: f64,
    pub observable_name: &'static str,
    pub value: f64,
    pub npc: Option<f64>,
    pub converged: bool,
}

pub const PERES_HEADER: [&str; 7] =
    ["state_index", "parity", "energy_norm", "observable_name", "value", "npc", "converged"];

pub fn peres_rows(analysis: &ExactAnalysis, observable_name: &'static str, points: &[PeresPoint]) -> Vec<PeresRow> {
    points
        .iter()
        .map(|p| PeresRow {
            state_index: p.state_index,
            parity: p.parity.sign(),
            energy_norm: p.energy_norm,
            observable_name,
            value: p.value,
            npc: analysis.npc_of(p.state_index),
            converged: analysis.spectrum.levels[p.state_index].converged,
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct BandRow {
    pub state_index: usize,
    pub energy_norm: f64,
    /// `m'` of the dominant band.
    pub band: f64,
    pub band_confidence: f64,
    pub npc: f64,
}

pub const BANDS_HEADER: [&str; 5] = ["state_index", "energy_norm", "band", "band_confidence", "npc"];

pub fn band_rows(analysis: &ExactAnalysis) -> Vec<BandRow> {
    let mut rows: Vec<BandRow> = analysis
        .weights
        .iter()
        .map(|w| BandRow {
            state_index: w.state_index,
            energy_norm: analysis.spectrum.energy_norm(w.state_index),
            band: w.m_prime,
            band_confidence: w.band_confidence,
            npc: w.npc,
        })
        .collect();
    rows.sort_by_key(|r| r.state_index);
    rows
}

#[derive(Debug, Serialize)]
pub struct LevelRow {
    pub m_prime: f64,
    pub n: usize,
    pub region: &'static str,
    pub doublet: bool,
    pub e_boa_norm: f64,
    pub e_exact_norm: Option<f64>,
    pub delta_e: Option<f64>,
    pub maslov_index: u32,
}

pub const LEVELS_HEADER: [&str; 8] =
    ["m_prime", "n", "region", "doublet", "E_boa_norm", "E_exact_norm", "delta_e", "maslov_index"];

pub fn level_rows(spectrum: &SpectrumResult, levels: &[QuantizedLevel], maslov_index: u32) -> Vec<LevelRow> {
    let scale = spectrum.params.energy_scale();
    levels
        .iter()
        .map(|l| LevelRow {
            m_prime: l.m_prime,
            n: l.n,
            region: l.region.as_str(),
            doublet: l.doublet,
            e_boa_norm: l.energy / scale,
            e_exact_norm: l.matched_exact.map(|i| spectrum.energy_norm(i)),
            delta_e: l.delta_e,
            maslov_index,
        })
        .collect()
}

pub const COMPARISON_HEADER: [&str; 10] = [
    "m_prime",
    "n",
    "state_index",
    "region",
    "doublet",
    "E_exact_norm",
    "E_boa_norm",
    "delta_e",
    "npc",
    "maslov_index",
];

#[derive(Debug, Serialize)]
pub struct SemiclassicalRow {
    pub m_prime: f64,
    pub energy_norm: f64,
    pub observable_name: &'static str,
    pub value: f64,
}

pub const SEMICLASSICAL_HEADER: [&str; 4] = ["m_prime", "energy_norm", "observable_name", "value"];

pub fn semiclassical_rows(points: &[SemiclassicalPoint]) -> Vec<SemiclassicalRow> {
    points
        .iter()
        .map(|p| SemiclassicalRow {
            m_prime: p.m_prime,
            energy_norm: p.energy_norm,
            observable_name: p.observable.name(),
            value: p.value,
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct HarmonicRow {
    pub n_minus: usize,
    pub n_plus: usize,
    pub energy_norm: f64,
}

pub const HARMONIC_HEADER: [&str; 3] = ["n_minus", "n_plus", "energy_norm"];

pub fn harmonic_rows(levels: &[HarmonicLevel], energy_scale: f64) -> Vec<HarmonicRow> {
    levels
        .iter()
        .map(|l| HarmonicRow { n_minus: l.n_minus, n_plus: l.n_plus, energy_norm: l.energy / energy_scale })
        .collect()
}

pub const SCALING_HEADER: [&str; 7] = [
    "j",
    "n_max",
    "maslov_index",
    "mean_delta_e",
    "n_levels",
    "mean_delta_e_harmonic",
    "n_levels_harmonic",
];

#[derive(Debug, Serialize)]
pub struct FitRow {
    pub series: &'static str,
    pub maslov_index: Option<u32>,
    pub alpha: f64,
    pub prefactor: f64,
    pub residual: f64,
}

pub const SCALING_FIT_HEADER: [&str; 5] = ["series", "maslov_index", "alpha", "prefactor", "residual"];

pub fn fit_rows(result: &ScalingResult, maslov_index: u32) -> Vec<FitRow> {
    let boa = result.fit.map(|f| FitRow {
        series: "boa",
        maslov_index: Some(maslov_index),
        alpha: f.alpha,
        prefactor: f.prefactor,
        residual: f.residual,
    });
    let harmonic = result.harmonic_fit.map(|f| FitRow {
        series: "harmonic",
        maslov_index: None,
        alpha: f.alpha,
        prefactor: f.prefactor,
        residual: f.residual,
    });
    boa.into_iter().chain(harmonic).collect()
}
