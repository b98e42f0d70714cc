//! Run configuration: a flat TOML file whose keys the command line can
//! override one by one.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DickeError, Result};
use crate::experiments::{CanonicalCase, DEFAULT_NPC_THRESHOLD};
use crate::params::{ModelParams, DEFAULT_VALIDITY_THRESHOLD};
use crate::spectrum::{ConvergenceSettings, DEFAULT_GUARD_FRACTION, DEFAULT_TAIL_TOLERANCE};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub npc_threshold: f64,
    pub guard_fraction: f64,
    pub tail_tolerance: f64,
    pub validity_threshold: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            npc_threshold: DEFAULT_NPC_THRESHOLD,
            guard_fraction: DEFAULT_GUARD_FRACTION,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
            validity_threshold: DEFAULT_VALIDITY_THRESHOLD,
        }
    }
}

fn default_window() -> [f64; 2] {
    [-8.0, -6.0]
}

fn default_j_list() -> Vec<f64> {
    (5..=15).map(f64::from).collect()
}

fn default_ceiling() -> f64 {
    -1.0
}

fn default_grid_points() -> usize {
    400
}

/// Physical parameters are required; everything else has a default.
/// Exactly one of `coupling_ratio_f` and `gamma` must be given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub omega: f64,
    pub omega0: f64,
    #[serde(default)]
    pub coupling_ratio_f: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    pub j: f64,
    /// Starting boson cutoff; the convergence loop may raise it.
    #[serde(default)]
    pub n_max: Option<usize>,
    /// Requantization rule; unset runs both 0 and 2.
    #[serde(default)]
    pub maslov_index: Option<u32>,
    /// Highest energy analysed, in units of `jω0`.
    #[serde(default = "default_ceiling")]
    pub e_ceiling: f64,
    /// Energy window of the error statistics, in units of `jω0`.
    #[serde(default = "default_window")]
    pub window: [f64; 2],
    #[serde(default = "default_j_list")]
    pub j_list: Vec<f64>,
    /// Energy samples per semiclassical curve.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl RunConfig {
    pub fn canonical(case: CanonicalCase) -> Self {
        let p = case.params(15.0);
        Self {
            omega: p.omega,
            omega0: p.omega0,
            coupling_ratio_f: Some(p.f()),
            gamma: None,
            j: 15.0,
            n_max: None,
            maslov_index: None,
            e_ceiling: case.default_ceiling(),
            window: default_window(),
            j_list: default_j_list(),
            grid_points: default_grid_points(),
            tolerances: Tolerances::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| DickeError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn params(&self) -> Result<ModelParams> {
        self.params_at(self.j)
    }

    pub fn params_at(&self, j: f64) -> Result<ModelParams> {
        match (self.coupling_ratio_f, self.gamma) {
            (Some(f), None) => ModelParams::with_coupling_ratio(self.omega, self.omega0, f, j),
            (None, Some(g)) => ModelParams::new(self.omega, self.omega0, g, j),
            (Some(_), Some(_)) => Err(DickeError::Config("give coupling_ratio_f or gamma, not both".into())),
            (None, None) => Err(DickeError::Config("one of coupling_ratio_f and gamma is required".into())),
        }
    }

    pub fn maslov_indices(&self) -> Vec<u32> {
        self.maslov_index.map_or_else(|| vec![0, 2], |m| vec![m])
    }

    pub fn window(&self) -> (f64, f64) {
        (self.window[0], self.window[1])
    }

    pub fn convergence(&self) -> ConvergenceSettings {
        ConvergenceSettings {
            guard_fraction: self.tolerances.guard_fraction,
            tail_tolerance: self.tolerances.tail_tolerance,
            ..ConvergenceSettings::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if !(self.window[0] < self.window[1]) {
            return Err(DickeError::Config(format!("window {:?} is empty", self.window)));
        }
        if let Some(m) = self.maslov_index.filter(|m| *m > 3) {
            return Err(DickeError::Config(format!("maslov_index {m} outside 0..=3")));
        }
        let t = &self.tolerances;
        if !(t.guard_fraction > 0.0 && t.guard_fraction < 1.0) {
            return Err(DickeError::Config(format!("guard_fraction {} outside (0, 1)", t.guard_fraction)));
        }
        if !(t.tail_tolerance > 0.0 && t.npc_threshold >= 1.0) {
            return Err(DickeError::Config("tail_tolerance must be positive and npc_threshold at least 1".into()));
        }
        for &j in &self.j_list {
            self.params_at(j)?;
        }
        Ok(())
    }
}
