//! Czirok interaction model: speed-alignment nonlinearity, finite-range
//! kernel and the spatially homogeneous equilibria.

use num_complex::Complex64;
use serde::Serialize;

use crate::config::{Branch, ModelConfig};
use crate::error::{Error, Result};

use std::f64::consts::PI;

/// `G(u) = (h+1)u/5 - h u^3/125`.
pub fn g(h: f64, u: f64) -> f64 {
    (h + 1.0) * u / 5.0 - h * u.powi(3) / 125.0
}

pub fn g_prime(h: f64, u: f64) -> f64 {
    (h + 1.0) / 5.0 - 3.0 * h * u * u / 125.0
}

/// Fourier coefficient `phi_k = (1/l) int phi(|x|) e^{-i 2 pi k x / l} dx`
/// of the kernel `phi = (l/2) 1_{[0,1]}`.
pub fn kernel_fourier(k: i32, l: f64) -> Result<f64> {
    if !(l > 2.0) {
        return Err(Error::DomainTooSmall(l));
    }
    if k == 0 {
        return Ok(1.0);
    }
    let w = 2.0 * PI * k as f64;
    Ok(l * (w / l).sin() / w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EquilibriumKind {
    Disordered,
    Ordered,
}

/// Homogeneous equilibrium `rho = F_xi / l` with Gaussian `F_xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equilibrium {
    pub xi: f64,
    pub kind: EquilibriumKind,
    /// Variance of `F_xi`: `sigma^2/2` (forward) or `sqrt(r) sigma^2/2` (MFG).
    pub variance: f64,
    /// Minimum average cost `sigma^2 sqrt(r)`; MFG only.
    pub chi: Option<f64>,
}

impl Equilibrium {
    pub fn density(&self, u: f64) -> f64 {
        (-(u - self.xi).powi(2) / (2.0 * self.variance)).exp() / (2.0 * PI * self.variance).sqrt()
    }

    pub fn sqrt_density(&self, u: f64) -> f64 {
        self.density(u).sqrt()
    }

    /// Analytic continuation of `sqrt(F)` to complex `u`.
    pub fn sqrt_density_at(&self, u: Complex64) -> Complex64 {
        let d = u - self.xi;
        (-d * d / (4.0 * self.variance)).exp() / (2.0 * PI * self.variance).powf(0.25)
    }
}

/// Roots of `G(xi) = xi`: `{0}` for `h <= 4`, `{0, +-5 sqrt((h-4)/h)}` otherwise.
pub fn mean_speed_equilibria(h: f64) -> Vec<f64> {
    if h <= 4.0 {
        vec![0.0]
    } else {
        let xi = 5.0 * ((h - 4.0) / h).sqrt();
        vec![0.0, xi, -xi]
    }
}

pub fn branch_speed(h: f64, branch: Branch) -> Result<f64> {
    match branch {
        Branch::Disordered => Ok(0.0),
        _ if h <= 4.0 => Err(Error::InvalidConfig(format!("no ordered equilibrium for h = {h} <= 4"))),
        Branch::Positive => Ok(5.0 * ((h - 4.0) / h).sqrt()),
        Branch::Negative => Ok(-5.0 * ((h - 4.0) / h).sqrt()),
    }
}

fn kind_of(xi: f64) -> EquilibriumKind {
    if xi == 0.0 {
        EquilibriumKind::Disordered
    } else {
        EquilibriumKind::Ordered
    }
}

/// Equilibrium of the forward (Czirok) model on the configured branch.
pub fn forward_equilibrium(cfg: &ModelConfig) -> Result<Equilibrium> {
    let xi = branch_speed(cfg.h, cfg.branch)?;
    Ok(Equilibrium { xi, kind: kind_of(xi), variance: cfg.sigma * cfg.sigma / 2.0, chi: None })
}

/// Stationary pair of the mean-field game: `F` of variance
/// `sqrt(r) sigma^2 / 2`, `h_xi(u) = sqrt(r) (u - xi)^2`, `chi = sigma^2 sqrt(r)`.
pub fn mfg_equilibrium(cfg: &ModelConfig) -> Result<Equilibrium> {
    let xi = branch_speed(cfg.h, cfg.branch)?;
    Ok(Equilibrium {
        xi,
        kind: kind_of(xi),
        variance: cfg.r.sqrt() * cfg.sigma * cfg.sigma / 2.0,
        chi: Some(cfg.sigma * cfg.sigma * cfg.r.sqrt()),
    })
}

/// Stationary relative value function `sqrt(r) (u - xi)^2`.
pub fn stationary_value(r: f64, xi: f64, u: f64) -> f64 {
    r.sqrt() * (u - xi).powi(2)
}
