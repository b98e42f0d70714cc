//! Physical parameters of the Dicke model and the scales derived from them.
//!
//! Energies are in the units of the inputs (ℏ = 1). The coupling is stored as
//! the bare `gamma`; the dimensionless ratio `f = gamma / gamma_c` is derived.

use serde::{Deserialize, Serialize};

use crate::error::{DickeError, Result};

/// Default cutoff on `omega_A / omega_B` above which the adiabatic band
/// picture is considered reliable.
pub const DEFAULT_VALIDITY_THRESHOLD: f64 = 5.0;

/// The four physical inputs of the Dicke Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Boson frequency.
    pub omega: f64,
    /// Atomic level splitting.
    pub omega0: f64,
    /// Coupling constant.
    pub gamma: f64,
    /// Twice the total pseudospin, `2j = N`.
    pub two_j: u32,
}

impl ModelParams {
    pub fn new(omega: f64, omega0: f64, gamma: f64, j: f64) -> Result<Self> {
        let two_j = two_j_from(j)?;
        let p = Self { omega, omega0, gamma, two_j };
        p.validate()?;
        Ok(p)
    }

    /// Build parameters from the coupling ratio `f = gamma / gamma_c`.
    pub fn with_coupling_ratio(omega: f64, omega0: f64, f: f64, j: f64) -> Result<Self> {
        if !(omega > 0.0 && omega0 > 0.0) {
            return Err(DickeError::InvalidParameter(format!(
                "frequencies must be positive (omega={omega}, omega0={omega0})"
            )));
        }
        let gamma = f * critical_coupling(omega, omega0);
        Self::new(omega, omega0, gamma, j)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(DickeError::InvalidParameter(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(DickeError::InvalidParameter(format!("omega0 must be positive, got {}", self.omega0)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(DickeError::InvalidParameter(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if self.two_j == 0 {
            return Err(DickeError::InvalidParameter("j must be positive".into()));
        }
        Ok(())
    }

    pub fn j(&self) -> f64 {
        0.5 * self.two_j as f64
    }

    /// Number of spin states, `2j + 1`.
    pub fn spin_dim(&self) -> usize {
        self.two_j as usize + 1
    }

    pub fn gamma_c(&self) -> f64 {
        critical_coupling(self.omega, self.omega0)
    }

    /// Coupling ratio `f = gamma / gamma_c`.
    pub fn f(&self) -> f64 {
        self.gamma / self.gamma_c()
    }

    /// Energy scale `j * omega0` used to normalise every energy axis.
    pub fn energy_scale(&self) -> f64 {
        self.j() * self.omega0
    }

    /// Same parameters at a different pseudospin.
    pub fn with_j(&self, j: f64) -> Result<Self> {
        Self::new(self.omega, self.omega0, self.gamma, j)
    }

    /// Squared position of the superradiant minimum of the lowest band,
    /// `q_min^2 = (j omega0 / omega) (f^4 - 1) / f^2`; zero in the normal phase.
    pub fn q_min_squared(&self) -> f64 {
        let f2 = self.f().powi(2);
        if f2 <= 1.0 {
            0.0
        } else {
            self.energy_scale() / self.omega * (f2 * f2 - 1.0) / f2
        }
    }
}

/// `gamma_c = sqrt(omega * omega0) / 2`.
pub fn critical_coupling(omega: f64, omega0: f64) -> f64 {
    (omega * omega0).sqrt() / 2.0
}

pub(crate) fn two_j_from(j: f64) -> Result<u32> {
    let two_j = 2.0 * j;
    if !(two_j >= 1.0) || (two_j - two_j.round()).abs() > 1e-9 || two_j > u32::MAX as f64 {
        return Err(DickeError::InvalidParameter(format!(
            "j must be a positive integer or half-integer, got {j}"
        )));
    }
    Ok(two_j.round() as u32)
}

/// Scales derived from [`ModelParams`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedScales {
    pub gamma_c: f64,
    pub f: f64,
    /// Precession frequency of the pseudospin at the classical minimum.
    pub omega_a: f64,
    /// Small-oscillation frequency of the lowest band; `None` for `f <= 1`.
    pub omega_b: Option<f64>,
    /// `omega_a / omega_b`; `None` for `f <= 1`.
    pub validity_ratio: Option<f64>,
    /// Classical ground energy divided by `j * omega0`.
    pub e_gs_classical: f64,
}

pub fn derive_scales(params: &ModelParams) -> Result<DerivedScales> {
    params.validate()?;
    let gamma_c = params.gamma_c();
    let f = params.gamma / gamma_c;
    let f2 = f * f;
    if f > 1.0 {
        let omega_b = params.omega * (1.0 - 1.0 / (f2 * f2)).sqrt();
        let omega_a = params.omega0 * f2;
        Ok(DerivedScales {
            gamma_c,
            f,
            omega_a,
            omega_b: Some(omega_b),
            validity_ratio: Some(omega_a / omega_b),
            e_gs_classical: -0.5 * (f2 + 1.0 / f2),
        })
    } else {
        Ok(DerivedScales {
            gamma_c,
            f,
            omega_a: params.omega0,
            omega_b: None,
            validity_ratio: None,
            e_gs_classical: -1.0,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Normal,
    Superradiant,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub phase: Phase,
    pub validity_ratio: Option<f64>,
    pub threshold: f64,
    /// True when `validity_ratio >= threshold`.
    pub boa_valid: bool,
}

pub fn regime_report(params: &ModelParams, threshold: f64) -> Result<RegimeReport> {
    let scales = derive_scales(params)?;
    let phase = if scales.f > 1.0 { Phase::Superradiant } else { Phase::Normal };
    let boa_valid = scales.validity_ratio.is_some_and(|r| r >= threshold);
    Ok(RegimeReport { phase, validity_ratio: scales.validity_ratio, threshold, boa_valid })
}
