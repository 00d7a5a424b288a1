use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which spatially homogeneous equilibrium the analysis linearizes around.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Ordered state with positive mean speed.
    #[default]
    Positive,
    /// Ordered state with negative mean speed.
    Negative,
    /// Disordered state, mean speed zero.
    Disordered,
}

/// Physical and numerical parameters shared by every analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Length of the periodic domain.
    pub l: f64,
    /// Interaction strength in `G(u) = (h+1)u/5 - h u^3/125`.
    pub h: f64,
    /// Noise intensity.
    pub sigma: f64,
    /// Unit control cost (mean-field game only).
    pub r: f64,
    /// Number of local eigenfunctions per Fourier mode.
    pub p: usize,
    /// Largest Fourier mode index considered by sweeps.
    pub k_max: i32,
    /// Gauss-Hermite node count used for inner products.
    pub quad_nodes: usize,
    pub branch: Branch,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            l: 10.0,
            h: 5.0,
            sigma: 2.0,
            r: 1.0,
            p: 20,
            k_max: 4,
            quad_nodes: default_quad_nodes(20),
            branch: Branch::Positive,
        }
    }
}

pub fn default_quad_nodes(p: usize) -> usize {
    (4 * p).max(80)
}

impl ModelConfig {
    /// Builder-style setter that also resets the quadrature to its default.
    pub fn with_truncation(mut self, p: usize) -> Self {
        self.p = p;
        self.quad_nodes = default_quad_nodes(p);
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.r = r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.l.is_finite() && self.l > 0.0) {
            return bad(format!("l must be positive, got {}", self.l));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return bad(format!("r must be positive, got {}", self.r));
        }
        if self.p < 2 {
            return bad(format!("truncation order P must be at least 2, got {}", self.p));
        }
        if self.quad_nodes < 2 * self.p {
            return bad(format!("quad_nodes = {} must be at least 2P = {}", self.quad_nodes, 2 * self.p));
        }
        if self.k_max < 0 {
            return bad(format!("k_max must be non-negative, got {}", self.k_max));
        }
        if self.branch != Branch::Disordered && self.h <= 4.0 {
            return bad(format!("ordered equilibria need h > 4, got h = {}", self.h));
        }
        Ok(())
    }

    /// Wavenumber `2 pi k / l`.
    pub fn wavenumber(&self, k: i32) -> f64 {
        2.0 * std::f64::consts::PI * k as f64 / self.l
    }
}
