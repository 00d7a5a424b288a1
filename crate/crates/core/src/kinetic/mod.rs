//! Pseudo-spectral solvers for the nonlinear kinetic equations: Fourier
//! modes in `x`, Hermite modes in `u`.
//!
//! A density is stored as `rho = (1/s) sum_n d_n(x) He_n(v) w(v) / sqrt(n!)`
//! with `v = (u - xi)/s` and `w` the standard normal density, so `d_0` is the
//! marginal and the homogeneous equilibrium is `d = e_0 / l`. A value
//! perturbation is stored as `sum_n e_n(x) He_n(v) / sqrt(n!)`. Only the
//! Fourier modes `0..=nx/3` are kept; negative modes follow from reality.

mod forward;
mod hjb;
mod picard;
mod wave;

pub use forward::{growth_rate, simulate_forward, ForwardRun};
pub use hjb::solve_hjb_backward;
pub use picard::{picard_solve, PicardOptions, PicardOutcome, PicardResult};
pub use wave::{wave_speed, WaveResult, NO_WAVE_AMPLITUDE};

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::basis::{hermite_functions, GaussHermite};
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::model;

/// Growth of the state norm treated as a blow-up.
pub const BLOW_UP_GROWTH: f64 = 1e6;

/// Smallest `W e^{-v^2/4}` at which the Hopf-Cole control is trusted.
const TRANSFORM_FLOOR: f64 = 1e-10;

/// Space-time resolution of a kinetic run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub nu: usize,
    /// Step actually used: the requested step shrunk so that it divides `t_final`.
    pub dt: f64,
    pub t_final: f64,
}

impl Grid {
    pub fn new(nx: usize, nu: usize, dt: f64, t_final: f64) -> Result<Self> {
        if nx < 8 || !nx.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!("nx must be even and >= 8, got {nx}")));
        }
        if nu < 16 {
            return Err(Error::InvalidConfig(format!("nu must be >= 16, got {nu}")));
        }
        if !(dt.is_finite() && dt > 0.0) || !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidConfig(format!("dt and t_final must be positive, got {dt} and {t_final}")));
        }
        let steps = (t_final / dt - 1e-9).ceil().max(1.0);
        Ok(Self { nx, nu, dt: t_final / steps, t_final })
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Highest retained Fourier mode (2/3 rule).
    pub fn kmax(&self) -> usize {
        self.nx / 3
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|i| i as f64 * self.dt).collect()
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self { nx: 64, nu: 48, dt: 0.02, t_final: 100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Czirok model: drift `G(<u>) - u`.
    Forward,
    /// Mean-field game: drift `-(1/2r) dh/du`.
    Mfg,
}

/// Velocity drift used by [`fp_rhs`].
#[derive(Debug, Clone, Copy)]
pub enum Drift<'a> {
    /// `G(<u>) - u`.
    Alignment,
    /// `-(1/2r) d(h_xi + h~)/du` for a value perturbation `h~`.
    Control(&'a CMat),
    /// No drift; only transport and diffusion.
    None,
}

/// Coefficient arrays of density and value perturbation at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    /// `(kmax+1) x nu`, row `k` holds Fourier mode `k >= 0`.
    pub rho: CMat,
    pub h: CMat,
}

impl FieldState {
    /// Coefficients over all `nx` Fourier indices in FFT order, with the
    /// negative modes filled in by conjugate symmetry.
    pub fn full_spectrum(&self, nx: usize) -> CMat {
        let (rows, nu) = self.rho.shape();
        let mut out = CMat::zeros(nx, nu);
        for k in 0..rows.min(nx / 2) {
            for n in 0..nu {
                out[(k, n)] = self.rho[(k, n)];
                if k > 0 {
                    out[(nx - k, n)] = self.rho[(k, n)].conj();
                }
            }
        }
        out
    }
}

/// FFTs between retained half spectra and a padded physical grid.
pub(crate) struct Fourier {
    m: usize,
    kmax: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fourier {
    fn new(nx: usize, kmax: usize) -> Self {
        // Products of up to seven retained fields are alias-free.
        let m = 3 * nx;
        let mut planner = FftPlanner::new();
        Self { m, kmax, fwd: planner.plan_fft_forward(m), inv: planner.plan_fft_inverse(m) }
    }

    fn physical_into(&self, coeffs: impl Iterator<Item = Complex64>, buf: &mut [Complex64], out: &mut [f64]) {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for (k, c) in coeffs.enumerate().take(self.kmax + 1) {
            if k == 0 {
                buf[0] = Complex64::new(c.re, 0.0);
            } else {
                buf[k] = c;
                buf[self.m - k] = c.conj();
            }
        }
        self.inv.process(buf);
        for (o, b) in out.iter_mut().zip(buf.iter()) {
            *o = b.re;
        }
    }

    fn spectral_into(&self, vals: &[f64], buf: &mut [Complex64], out: &mut [Complex64]) {
        for (b, v) in buf.iter_mut().zip(vals) {
            *b = Complex64::new(*v, 0.0);
        }
        self.fwd.process(buf);
        let scale = 1.0 / self.m as f64;
        for (o, b) in out.iter_mut().zip(buf.iter()) {
            *o = b * scale;
        }
    }

    /// Field values on the padded grid for a single coefficient column.
    pub(crate) fn to_physical(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.m];
        let mut out = vec![0.0; self.m];
        self.physical_into(coeffs.iter().copied(), &mut buf, &mut out);
        out
    }

    #[cfg(test)]
    pub(crate) fn to_spectral(&self, vals: &[f64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.m];
        let mut out = vec![Complex64::new(0.0, 0.0); self.kmax + 1];
        self.spectral_into(vals, &mut buf, &mut out);
        out
    }

    /// Column-wise transform of a `(kmax+1) x nu` array to `m x nu`.
    fn matrix_to_physical(&self, a: &CMat) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.m, a.ncols());
        let mut buf = vec![Complex64::new(0.0, 0.0); self.m];
        let mut col = vec![0.0; self.m];
        for n in 0..a.ncols() {
            self.physical_into(a.column(n).iter().copied(), &mut buf, &mut col);
            out.column_mut(n).copy_from_slice(&col);
        }
        out
    }

    fn matrix_to_spectral(&self, a: &DMatrix<f64>) -> CMat {
        let mut out = CMat::zeros(self.kmax + 1, a.ncols());
        let mut buf = vec![Complex64::new(0.0, 0.0); self.m];
        let mut col = vec![Complex64::new(0.0, 0.0); self.kmax + 1];
        for n in 0..a.ncols() {
            self.spectral_into(a.column(n).as_slice(), &mut buf, &mut col);
            out.column_mut(n).copy_from_slice(&col);
        }
        out
    }
}

/// Discretized kinetic equation around a homogeneous equilibrium.
pub struct KineticModel {
    pub cfg: ModelConfig,
    pub grid: Grid,
    pub variant: Variant,
    pub xi: f64,
    /// Hermite scale `s`; the equilibrium has variance `s^2`.
    pub width: f64,
    /// Relaxation rate of the equilibrium drift: 1 (forward) or `1/sqrt(r)`.
    pub gamma: f64,
    kernel: Vec<f64>,
    fourier: Fourier,
    /// `phi[(j, n)] = He_n(v_j) e^{-v_j^2/4} / sqrt(n!)` at quadrature nodes.
    phi: DMatrix<f64>,
    /// `sqrt(n) phi[(j, n-1)]`, the scaled `v`-derivative.
    dphi: DMatrix<f64>,
    /// Gauss-Hermite weights for `w` times `e^{v_j^2/2}`; products of two
    /// `phi`-scaled expansions need no further factors.
    weights: Vec<f64>,
    nodes: Vec<f64>,
}

impl KineticModel {
    /// Model with the Hermite basis matched to the stationary Gaussian.
    pub fn new(cfg: &ModelConfig, grid: Grid, variant: Variant) -> Result<Self> {
        cfg.validate()?;
        let eq = match variant {
            Variant::Forward => model::forward_equilibrium(cfg)?,
            Variant::Mfg => model::mfg_equilibrium(cfg)?,
        };
        let gamma = match variant {
            Variant::Forward => 1.0,
            Variant::Mfg => 1.0 / cfg.r.sqrt(),
        };
        Self::with_basis(cfg, grid, variant, eq.xi, eq.variance.sqrt(), gamma)
    }

    /// Model with an explicit basis center and width.
    pub fn with_basis(
        cfg: &ModelConfig,
        grid: Grid,
        variant: Variant,
        xi: f64,
        width: f64,
        gamma: f64,
    ) -> Result<Self> {
        if !(cfg.l > 2.0) {
            return Err(Error::DomainTooSmall(cfg.l));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidConfig(format!("Hermite width must be positive, got {width}")));
        }
        let kmax = grid.kmax();
        let kernel = (0..=kmax).map(|k| model::kernel_fourier(k as i32, cfg.l)).collect::<Result<Vec<_>>>()?;
        let nq = 2 * grid.nu;
        let gh = GaussHermite::new(nq);
        let nu = grid.nu;
        let mut phi = DMatrix::zeros(nq, nu);
        let mut dphi = DMatrix::zeros(nq, nu);
        let mut weights = Vec::with_capacity(nq);
        for (j, &v) in gh.nodes.iter().enumerate() {
            let f = hermite_functions(v, nu);
            for n in 0..nu {
                phi[(j, n)] = f[n];
                if n > 0 {
                    dphi[(j, n)] = (n as f64).sqrt() * f[n - 1];
                }
            }
            weights.push(gh.weights[j] / (2.0 * PI).sqrt());
        }
        Ok(Self {
            cfg: cfg.clone(),
            grid,
            variant,
            xi,
            width,
            gamma,
            kernel,
            fourier: Fourier::new(grid.nx, kmax),
            phi,
            dphi,
            weights,
            nodes: gh.nodes,
        })
    }

    pub fn kmax(&self) -> usize {
        self.grid.kmax()
    }

    pub fn kappa(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.cfg.l
    }

    pub(crate) fn fourier(&self) -> &Fourier {
        &self.fourier
    }

    pub fn zeros(&self) -> CMat {
        CMat::zeros(self.kmax() + 1, self.grid.nu)
    }

    /// Homogeneous equilibrium `F_xi / l`.
    pub fn equilibrium(&self) -> CMat {
        let mut d = self.zeros();
        d[(0, 0)] = Complex64::new(1.0 / self.cfg.l, 0.0);
        d
    }

    /// Equilibrium with the marginal modulated by `1 + eps cos(2 pi k x / l)`.
    pub fn perturbed_equilibrium(&self, k: usize, eps: f64) -> Result<CMat> {
        if k == 0 || k > self.kmax() {
            return Err(Error::InvalidConfig(format!("perturbation mode must lie in 1..={}, got {k}", self.kmax())));
        }
        let mut d = self.equilibrium();
        d[(k, 0)] = Complex64::new(eps / (2.0 * self.cfg.l), 0.0);
        Ok(d)
    }

    /// `int int rho dx du`.
    pub fn mass(&self, rho: &CMat) -> f64 {
        self.cfg.l * rho[(0, 0)].re
    }

    /// Weighted L2 norm `(l sum_k c_k sum_n |d_kn|^2)^{1/2}` over the full
    /// spectrum (`c_0 = 1`, `c_k = 2`).
    pub fn norm(&self, a: &CMat) -> f64 {
        let mut acc = 0.0;
        for k in 0..a.nrows() {
            let c = if k == 0 { 1.0 } else { 2.0 };
            acc += c * a.row(k).iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        (self.cfg.l * acc).sqrt()
    }

    /// Norm of the spatially inhomogeneous part.
    pub fn inhomogeneity(&self, a: &CMat) -> f64 {
        let mut b = a.clone();
        b.row_mut(0).fill(Complex64::new(0.0, 0.0));
        self.norm(&b)
    }

    /// Spatial mean of the local mean velocity `int u rho du / int rho du`.
    pub fn mean_velocity(&self, rho: &CMat) -> f64 {
        (self.xi * rho[(0, 0)].re + self.width * rho[(0, 1)].re) / rho[(0, 0)].re
    }

    /// Marginal density `int rho du` at the `nx` grid points `x_j = j l / nx`.
    pub fn marginal(&self, rho: &CMat) -> Vec<f64> {
        self.evaluate(rho.column(0).iter().copied())
    }

    fn evaluate(&self, coeffs: impl Iterator<Item = Complex64> + Clone) -> Vec<f64> {
        let nx = self.grid.nx;
        (0..nx)
            .map(|j| {
                let x = j as f64 * self.cfg.l / nx as f64;
                coeffs
                    .clone()
                    .enumerate()
                    .map(|(k, c)| {
                        let z = c * Complex64::from_polar(1.0, self.kappa(k) * x);
                        if k == 0 {
                            z.re
                        } else {
                            2.0 * z.re
                        }
                    })
                    .sum()
            })
            .collect()
    }

    /// Fourier coefficients of `<u>`: `l phi_k (xi d_k0 + s d_k1)`.
    fn mean_speed_coeffs(&self, rho: &CMat) -> Vec<Complex64> {
        (0..=self.kmax())
            .map(|k| self.cfg.l * self.kernel[k] * (rho[(k, 0)] * self.xi + rho[(k, 1)] * self.width))
            .collect()
    }

    /// Shift every field by `dx` in space.
    pub fn translate(&self, a: &CMat, dx: f64) -> CMat {
        let mut out = a.clone();
        for k in 0..a.nrows() {
            let phase = Complex64::from_polar(1.0, -self.kappa(k) * dx);
            out.row_mut(k).iter_mut().for_each(|z| *z *= phase);
        }
        out
    }

    /// Linear part of the density equation at mode `k` for drift relaxation
    /// rate `gamma`: `-i kappa (xi + s T) - gamma n + (sigma^2/(2 s^2) - gamma) S2`,
    /// `T` the Jacobi matrix of `v`, `S2` the shift `d_{n-2} -> n`.
    pub fn fp_linear(&self, k: usize, gamma: f64) -> CMat {
        let nu = self.grid.nu;
        let kap = self.kappa(k);
        let s = self.width;
        let mismatch = self.cfg.sigma * self.cfg.sigma / (2.0 * s * s) - gamma;
        CMat::from_fn(nu, nu, |n, m| {
            let mut z = Complex64::new(0.0, 0.0);
            if n == m {
                z += Complex64::new(-gamma * n as f64, -kap * self.xi);
            }
            if m + 1 == n || n + 1 == m {
                z += Complex64::new(0.0, -kap * s * (n.max(m) as f64).sqrt());
            }
            if m + 2 == n {
                z += mismatch * ((n * (n - 1)) as f64).sqrt();
            }
            z
        })
    }

    /// Linear part of the backward value equation in reversed time:
    /// `i kappa (xi + s T) - gamma n + (sigma^2/(2 s^2) - gamma) S2^T`.
    pub fn hjb_linear(&self, k: usize) -> CMat {
        let nu = self.grid.nu;
        let kap = self.kappa(k);
        let s = self.width;
        let gamma = self.gamma;
        let mismatch = self.cfg.sigma * self.cfg.sigma / (2.0 * s * s) - gamma;
        CMat::from_fn(nu, nu, |n, m| {
            let mut z = Complex64::new(0.0, 0.0);
            if n == m {
                z += Complex64::new(-gamma * n as f64, kap * self.xi);
            }
            if m + 1 == n || n + 1 == m {
                z += Complex64::new(0.0, kap * s * (n.max(m) as f64).sqrt());
            }
            if n + 2 == m {
                z += mismatch * ((m * (m - 1)) as f64).sqrt();
            }
            z
        })
    }

    /// `exp(op(k) dt)` for every retained mode.
    pub(crate) fn propagators(&self, op: impl Fn(usize) -> CMat, dt: f64) -> Vec<CMat> {
        (0..=self.kmax()).map(|k| linalg::expm(&(op(k) * Complex64::new(dt, 0.0)))).collect()
    }

    /// Alignment forcing `A(x) = G(<u>) - xi` on the padded grid.
    pub(crate) fn alignment_field(&self, rho: &CMat) -> Vec<f64> {
        let m = self.fourier.to_physical(&self.mean_speed_coeffs(rho));
        m.iter().map(|&u| model::g(self.cfg.h, u) - self.xi).collect()
    }

    /// `-d/du (A rho)` for a velocity-independent forcing `A(x)`.
    pub(crate) fn forcing_term(&self, rho: &CMat, a: &[f64]) -> CMat {
        let nu = self.grid.nu;
        let mut phys = self.fourier.matrix_to_physical(&rho.columns(0, nu - 1).into_owned());
        for mut col in phys.column_iter_mut() {
            col.iter_mut().zip(a).for_each(|(z, a)| *z *= a);
        }
        let prod = self.fourier.matrix_to_spectral(&phys);
        let mut out = self.zeros();
        for n in 1..nu {
            let f = (n as f64).sqrt() / self.width;
            for k in 0..=self.kmax() {
                out[(k, n)] = prod[(k, n - 1)] * f;
            }
        }
        out
    }

    /// Control `a~ = -(1/2r) dh~/du` at `(x, v_j)` for value-perturbation
    /// coefficients `h`.
    pub(crate) fn control_from_value(&self, h: &CMat) -> DMatrix<f64> {
        let mut a = self.fourier.matrix_to_physical(h) * self.dphi.transpose();
        let c = -1.0 / (2.0 * self.cfg.r * self.width);
        for (j, mut col) in a.column_iter_mut().enumerate() {
            let f = c * (self.nodes[j] * self.nodes[j] / 4.0).exp();
            col.iter_mut().for_each(|z| *z *= f);
        }
        a
    }

    /// Control `a~ = sigma^2 dW/du / W` for Hopf-Cole coefficients `W` of
    /// `e^{-h~/lambda}`, `lambda = 2 r sigma^2`. Far nodes, where
    /// `W e^{-v^2/4}` drops into round-off, carry no control.
    pub(crate) fn control_from_transform(&self, w: &CMat) -> DMatrix<f64> {
        let phys = self.fourier.matrix_to_physical(w);
        let num = &phys * self.dphi.transpose();
        let den = phys * self.phi.transpose();
        let c = self.cfg.sigma * self.cfg.sigma / self.width;
        DMatrix::from_fn(num.nrows(), num.ncols(), |x, j| {
            let d = den[(x, j)];
            if d > TRANSFORM_FLOOR {
                c * num[(x, j)] / d
            } else {
                0.0
            }
        })
    }

    /// Value perturbation `h~ = -lambda ln W` projected onto the dual basis.
    pub fn value_from_transform(&self, w: &CMat) -> CMat {
        let lambda = 2.0 * self.cfg.r * self.cfg.sigma * self.cfg.sigma;
        let den = self.fourier.matrix_to_physical(w) * self.phi.transpose();
        let vals = DMatrix::from_fn(den.nrows(), den.ncols(), |x, j| {
            let v = self.nodes[j];
            let d = den[(x, j)];
            if d > TRANSFORM_FLOOR {
                // W = d e^{v^2/4}; weight e^{-v^2/2} and He_n = phi_n e^{v^2/4}
                -lambda * (d.ln() + v * v / 4.0) * self.weights[j] * (-v * v / 4.0).exp()
            } else {
                0.0
            }
        });
        self.fourier.matrix_to_spectral(&(vals * &self.phi))
    }

    /// Hopf-Cole coefficients of `e^{-h~/lambda}` for value-perturbation
    /// coefficients `h`.
    pub fn transform_of_value(&self, h: &CMat) -> CMat {
        let lambda = 2.0 * self.cfg.r * self.cfg.sigma * self.cfg.sigma;
        let vals = self.fourier.matrix_to_physical(h) * self.phi.transpose();
        let prod = DMatrix::from_fn(vals.nrows(), vals.ncols(), |x, j| {
            let v = self.nodes[j];
            // h~(v) = vals e^{v^2/4}
            self.weights[j] * (-vals[(x, j)] * (v * v / 4.0).exp() / lambda - v * v / 4.0).exp()
        });
        self.fourier.matrix_to_spectral(&(prod * &self.phi))
    }

    /// Hopf-Cole coefficients of the stationary value, `W = 1`.
    pub fn transform_identity(&self) -> CMat {
        let mut w = self.zeros();
        w[(0, 0)] = Complex64::new(1.0, 0.0);
        w
    }

    /// `-d/du (a~ rho)` for a control sampled at `(x, v_j)`.
    pub(crate) fn control_term(&self, rho: &CMat, control: &DMatrix<f64>) -> CMat {
        let nu = self.grid.nu;
        let vals = self.fourier.matrix_to_physical(rho) * self.phi.transpose();
        let prod =
            DMatrix::from_fn(vals.nrows(), vals.ncols(), |x, j| self.weights[j] * vals[(x, j)] * control[(x, j)]);
        let q = self.fourier.matrix_to_spectral(&(prod * &self.phi));
        let mut out = self.zeros();
        for n in 1..nu {
            let f = (n as f64).sqrt() / self.width;
            for k in 0..=self.kmax() {
                out[(k, n)] = q[(k, n - 1)] * f;
            }
        }
        out
    }

    /// Largest control speed over the bulk `|v| <= 4`.
    pub(crate) fn control_speed(&self, control: &DMatrix<f64>) -> f64 {
        let mut m = 0.0f64;
        for (j, &v) in self.nodes.iter().enumerate() {
            if v.abs() <= 4.0 {
                m = control.column(j).iter().fold(m, |a, g| a.max(g.abs()));
            }
        }
        m
    }

    /// Explicit drift rate bound used by the step controller.
    pub(crate) fn explicit_rate(&self, forcing: f64) -> f64 {
        forcing * (self.grid.nu as f64).sqrt() / self.width
    }
}

/// `<u>(x) = int int u' phi(|x'|) rho(x - x', u') du' dx'` at the `nx` grid points.
pub fn local_mean_speed(model: &KineticModel, rho: &CMat) -> Vec<f64> {
    model.evaluate(model.mean_speed_coeffs(rho).into_iter())
}

/// Time derivative of the density coefficients,
/// `-u d_x rho - d_u(drift rho) + (sigma^2/2) d_u^2 rho`.
pub fn fp_rhs(model: &KineticModel, rho: &CMat, drift: Drift) -> CMat {
    let gamma = match drift {
        Drift::None => 0.0,
        Drift::Alignment => 1.0,
        Drift::Control(_) => 1.0 / model.cfg.r.sqrt(),
    };
    let mut out = model.zeros();
    for k in 0..=model.kmax() {
        let row = model.fp_linear(k, gamma) * rho.row(k).transpose();
        out.row_mut(k).copy_from(&row.transpose());
    }
    match drift {
        Drift::Alignment => out += model.forcing_term(rho, &model.alignment_field(rho)),
        Drift::Control(h) => out += model.control_term(rho, &model.control_from_value(h)),
        Drift::None => {}
    }
    out
}

/// Linearization of the alignment dynamics at mode `k` around the
/// equilibrium, in the kinetic Hermite basis.
pub fn linearized_forward_matrix(model: &KineticModel, k: usize) -> CMat {
    let mut m = model.fp_linear(k, 1.0);
    let gp = model::g_prime(model.cfg.h, model.xi);
    let c = gp * model.kernel[k] / model.width;
    m[(1, 0)] += c * model.xi;
    m[(1, 1)] += c * model.width;
    m
}

/// Apply a per-mode propagator to every row.
pub(crate) fn apply_rows(props: &[CMat], a: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows(), a.ncols());
    for (k, e) in props.iter().enumerate() {
        let row = e * a.row(k).transpose();
        out.row_mut(k).copy_from(&row.transpose());
    }
    out
}
