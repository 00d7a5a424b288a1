//! Linear stability of the stationary mean-field game pair.
//!
//! The linearized forward-backward system for Fourier mode `k`, projected
//! onto the biorthogonal basis, is `d/dt [Y1; Y2] = N [Y1; Y2]` with
//! `N = [[A1, B1], [A2, B2]]`. Its Hamiltonian symmetrization `N_s` replaces
//! `A2` by its Hermitian part and is similar to `N`.

mod bvp;
mod riccati;

pub use bvp::{bvp_solve, BvpTrajectory};
pub use riccati::{stabilizing_solution, RiccatiSolution};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::BasisFamily;
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::forward::{project_checked, ResidualCheck, Spectrum, POLE_GUARD};
use crate::linalg::{self, CMat};
use crate::model::{self, Equilibrium};

/// Relative tolerance between the two independent evaluations of `B1`.
pub const B1_CROSS_CHECK: f64 = 1e-7;

/// Distance from the imaginary axis below which `stabilizing_solution`
/// refuses to split the spectrum.
pub const EPS_IM: f64 = 1e-8;

/// Condition number of `P11 + P12 X_+` above which the invertibility
/// assumption is considered violated.
pub const COND_LIMIT: f64 = 1e10;

#[derive(Debug, Clone)]
pub struct LinearizedBlocks {
    pub k: i32,
    pub basis: BasisFamily,
    pub equilibrium: Equilibrium,
    pub a1: CMat,
    pub a2: CMat,
    pub b1: CMat,
    pub b2: CMat,
    pub n: CMat,
    pub n_s: CMat,
    pub j: CMat,
    /// `a'_q = -<eta_q, g>`, so that `A2 = a' b^T`.
    pub left: Vec<Complex64>,
    /// `b_p = <s, eta_p>`.
    pub right: Vec<Complex64>,
    /// Relative difference between the quadrature and the recurrence
    /// evaluations of `B1`.
    pub b1_mismatch: f64,
}

impl LinearizedBlocks {
    pub fn dim(&self) -> usize {
        self.a1.nrows()
    }

    pub fn alpha(&self) -> Vec<Complex64> {
        (0..self.dim()).map(|i| self.a1[(i, i)]).collect()
    }

    pub fn beta(&self) -> Vec<Complex64> {
        (0..self.dim()).map(|i| self.b2[(i, i)]).collect()
    }

    /// Scaling `d` of the symplectic similarity `T = diag(D, D^{-1})` that
    /// brings `B1` and `C_s = (A2 + A2^*)/2` to comparable size.
    pub fn symplectic_scaling(&self) -> Vec<f64> {
        let c = (&self.a2 + self.a2.adjoint()) * Complex64::new(0.5, 0.0);
        riccati::symplectic_scaling(&self.b1, &c)
    }

    /// `T^{-1} M T` for a 2x2 block matrix `M`.
    pub fn scale(&self, m: &CMat) -> CMat {
        let d = self.symplectic_scaling();
        let n = self.dim();
        let t = |i: usize| if i < n { d[i] } else { 1.0 / d[i - n] };
        CMat::from_fn(2 * n, 2 * n, |i, j| m[(i, j)] * (t(j) / t(i)))
    }

    /// Eigenvalues of `N`, computed after the symplectic scaling (the raw
    /// matrix has `|B1|` many orders of magnitude above `|A2|`).
    pub fn eigenvalues_n(&self) -> Result<Vec<Complex64>> {
        linalg::eigenvalues(&self.scale(&self.n))
    }

    pub fn eigenvalues_n_s(&self) -> Result<Vec<Complex64>> {
        linalg::eigenvalues(&self.scale(&self.n_s))
    }

    /// Eigenpairs of `M` (`N` or `N_s`) through the scaled matrix.
    pub fn eigen(&self, m: &CMat) -> Result<(Vec<Complex64>, CMat)> {
        let d = self.symplectic_scaling();
        let n = self.dim();
        let (vals, mut v) = linalg::eigen(&self.scale(m))?;
        for i in 0..2 * n {
            let t = if i < n { d[i] } else { 1.0 / d[i - n] };
            for j in 0..2 * n {
                v[(i, j)] *= t;
            }
        }
        Ok((vals, v))
    }

    /// `||J N_s + N_s^* J||`.
    pub fn hamiltonian_defect(&self) -> f64 {
        linalg::max_abs(&(&self.j * &self.n_s + self.n_s.adjoint() * &self.j))
    }

    /// `1 - b^T (A1 - lambda)^{-1} B1 (B2 - lambda)^{-1} a'`, which equals the
    /// double-sum form of the characteristic function.
    pub fn characteristic_residual(&self, lambda: Complex64) -> Result<Complex64> {
        let alpha = self.alpha();
        let beta = self.beta();
        for pole in alpha.iter().chain(&beta) {
            let d = (lambda - pole).norm();
            if d < POLE_GUARD {
                return Err(Error::Pole { lambda, pole: *pole, distance: d });
            }
        }
        let mut sum = Complex64::new(0.0, 0.0);
        for (p, bp) in self.right.iter().enumerate() {
            let mut row = Complex64::new(0.0, 0.0);
            for (q, aq) in self.left.iter().enumerate() {
                row += self.b1[(p, q)] * aq / (beta[q] - lambda);
            }
            sum += bp * row / (alpha[p] - lambda);
        }
        Ok(Complex64::new(1.0, 0.0) - sum)
    }
}

fn block2(a: &CMat, b: &CMat, c: &CMat, d: &CMat) -> CMat {
    let n = a.nrows();
    let mut m = CMat::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, n)).copy_from(b);
    m.view_mut((n, 0), (n, n)).copy_from(c);
    m.view_mut((n, n), (n, n)).copy_from(d);
    m
}

/// Closed-form Gram matrix `G_qp = <psi_q, psi_p> = int eta_q psi_p du` for
/// `q, p < count`. With `y = kappa r sigma^2 / a1` every term of the sum
/// shares the phase `i^{q-p}`, so there is no cancellation.
pub fn gram_matrix(basis: &BasisFamily, count: usize) -> CMat {
    let y = basis.kappa() * basis.r * basis.sigma * basis.sigma / basis.a1;
    let lf: Vec<f64> = (0..count).map(crate::basis::ln_factorial).collect();
    CMat::from_fn(count, count, |q, p| {
        let mut total = 0.0;
        for j in 0..=q.min(p) {
            let pow = (q + p - 2 * j) as i32;
            if y == 0.0 && pow > 0 {
                continue;
            }
            let ln = y * y / 2.0 + 0.5 * (lf[q] + lf[p]) - lf[j] - lf[q - j] - lf[p - j]
                + if pow > 0 { pow as f64 * y.abs().ln() } else { 0.0 };
            let sign = if y < 0.0 && pow % 2 == 1 { -1.0 } else { 1.0 };
            total += sign * ln.exp();
        }
        let phase = match (q as i64 - p as i64).rem_euclid(4) {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        phase * total
    })
}

/// `B1` from the quadratic form of the self-adjoint part:
/// `-(1/(r sigma^2)) [ (sigma^2/2) int conj(psi_q') psi_p' + int V conj(psi_q) psi_p ]`.
fn b1_quadrature(basis: &BasisFamily, idx: &[usize], nodes: usize) -> CMat {
    let quad = basis.quadrature(nodes);
    let count = basis.p + 1;
    let n = idx.len();
    let s2 = basis.sigma * basis.sigma;
    let mut out = CMat::zeros(n, n);
    for (&u, &w) in quad.nodes.iter().zip(&quad.weights) {
        let eta = basis.eta_table(u, count + 1);
        // psi_p = conj(eta_p) on the real line; derivative by the ladder relation.
        let psi: Vec<Complex64> = eta.iter().map(|z| z.conj()).collect();
        let dpsi: Vec<Complex64> = (0..count)
            .map(|p| {
                let lower = if p > 0 { psi[p - 1] * (p as f64).sqrt() } else { Complex64::new(0.0, 0.0) };
                (lower - psi[p + 1] * ((p + 1) as f64).sqrt()) / (2.0 * basis.a1)
            })
            .collect();
        let v = basis.confining_potential(u);
        for (i, &q) in idx.iter().enumerate() {
            for (j, &p) in idx.iter().enumerate() {
                out[(i, j)] += (dpsi[q].conj() * dpsi[p] * (s2 / 2.0) + psi[q].conj() * psi[p] * v) * w;
            }
        }
    }
    out * Complex64::new(-1.0 / (basis.r * s2), 0.0)
}

/// `B1` from `L psi_p = beta_p psi_p + i kappa u psi_p`, the three-term
/// relation for `u psi_p` and the closed-form Gram matrix.
fn b1_recurrence(basis: &BasisFamily, idx: &[usize]) -> CMat {
    let count = basis.p + 1;
    let gram = gram_matrix(basis, count);
    let kappa = basis.kappa();
    let a2c = basis.a2.conj();
    let n = idx.len();
    let s2 = basis.sigma * basis.sigma;
    CMat::from_fn(n, n, |i, j| {
        let (q, p) = (idx[i], idx[j]);
        let mut u_psi = gram[(q, p)] * a2c + gram[(q, p + 1)] * (basis.a1 * ((p + 1) as f64).sqrt());
        if p > 0 {
            u_psi += gram[(q, p - 1)] * (basis.a1 * (p as f64).sqrt());
        }
        let l = gram[(q, p)] * basis.beta(p) + Complex64::new(0.0, kappa) * u_psi;
        l * (-1.0 / (basis.r * s2))
    })
}

/// Assemble with an explicit coupling strength `G'(xi) phi_k`.
pub fn assemble_blocks_with_coupling(
    cfg: &ModelConfig,
    eq: &Equilibrium,
    k: i32,
    coupling: f64,
) -> Result<LinearizedBlocks> {
    let basis = BasisFamily::mfg(cfg.l, cfg.sigma, cfg.r, eq.xi, k, cfg.p);
    // For k = 0 the mass direction eta_0 and its dual are conserved
    // quantities and are removed from both blocks.
    let idx: Vec<usize> = if k == 0 { (1..cfg.p).collect() } else { (0..cfg.p).collect() };
    let n = idx.len();
    let xi = eq.xi;

    let g_proj = project_checked(&basis, cfg.quad_nodes, true, |u| {
        (Complex64::new(xi, 0.0) - u) * (2.0 * coupling) * eq.sqrt_density_at(u)
    })?;
    let s_proj = project_checked(&basis, cfg.quad_nodes, false, |u| u * eq.sqrt_density_at(u))?;
    let left: Vec<Complex64> = idx.iter().map(|&q| -g_proj[q]).collect();
    let right: Vec<Complex64> = idx.iter().map(|&p| s_proj[p]).collect();

    let alpha: Vec<Complex64> = idx.iter().map(|&p| basis.alpha(p)).collect();
    let a1 = CMat::from_diagonal(&crate::linalg::CVec::from_vec(alpha));
    let b2 = -a1.adjoint();
    let a2 = CMat::from_fn(n, n, |q, p| left[q] * right[p]);

    let b1 = b1_quadrature(&basis, &idx, cfg.quad_nodes);
    let b1_alt = b1_recurrence(&basis, &idx);
    let b1_mismatch = linalg::max_abs(&(&b1 - &b1_alt)) / linalg::max_abs(&b1_alt).max(f64::MIN_POSITIVE);
    if !(b1_mismatch <= B1_CROSS_CHECK) {
        return Err(Error::BasisScaling { mismatch: b1_mismatch });
    }

    let c = (&a2 + a2.adjoint()) * Complex64::new(0.5, 0.0);
    let zero = CMat::zeros(n, n);
    let ident = CMat::identity(n, n);
    Ok(LinearizedBlocks {
        k,
        n: block2(&a1, &b1, &a2, &b2),
        n_s: block2(&a1, &b1, &c, &b2),
        j: block2(&zero, &ident, &(-&ident), &zero),
        basis,
        equilibrium: *eq,
        a1,
        a2,
        b1,
        b2,
        left,
        right,
        b1_mismatch,
    })
}

pub fn assemble_blocks(cfg: &ModelConfig, eq: &Equilibrium, k: i32) -> Result<LinearizedBlocks> {
    let coupling = model::g_prime(cfg.h, eq.xi) * model::kernel_fourier(k, cfg.l)?;
    assemble_blocks_with_coupling(cfg, eq, k, coupling)
}

pub fn blocks_spectrum(blocks: &LinearizedBlocks) -> Result<Spectrum> {
    Ok(Spectrum::from_eigenvalues(blocks.k, blocks.eigenvalues_n()?))
}

pub fn mfg_spectrum(cfg: &ModelConfig, eq: &Equilibrium, k: i32) -> Result<Spectrum> {
    blocks_spectrum(&assemble_blocks(cfg, eq, k)?)
}

pub fn mfg_characteristic_residual(
    lambda: Complex64,
    cfg: &ModelConfig,
    eq: &Equilibrium,
    k: i32,
) -> Result<Complex64> {
    assemble_blocks(cfg, eq, k)?.characteristic_residual(lambda)
}

/// Characteristic residual at every eigenvalue of `N` farther than
/// `min_pole_distance` from the poles `alpha_p`, `beta_q`.
pub fn check_characteristic(
    blocks: &LinearizedBlocks,
    eigenvalues: &[Complex64],
    min_pole_distance: f64,
) -> ResidualCheck {
    let poles: Vec<Complex64> = blocks.alpha().into_iter().chain(blocks.beta()).collect();
    let mut out = ResidualCheck { max_residual: 0.0, checked: 0, skipped: 0 };
    for &lam in eigenvalues {
        let dist = poles.iter().map(|p| (lam - p).norm()).fold(f64::INFINITY, f64::min);
        if dist <= min_pole_distance {
            out.skipped += 1;
            continue;
        }
        match blocks.characteristic_residual(lam) {
            Ok(r) => {
                out.max_residual = out.max_residual.max(r.norm());
                out.checked += 1;
            }
            Err(_) => out.skipped += 1,
        }
    }
    out
}

/// `1e-6 (1 + spectral radius)`.
pub fn axis_tolerance(eigenvalues: &[Complex64]) -> f64 {
    let radius = eigenvalues.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    1e-6 * (1.0 + radius)
}

pub fn on_axis_count(eigenvalues: &[Complex64], tol: f64) -> usize {
    eigenvalues.iter().filter(|z| z.re.abs() < tol).count()
}

/// Largest distance from an eigenvalue `lambda` to the nearest `-conj(lambda)`.
pub fn reflection_defect(eigenvalues: &[Complex64]) -> f64 {
    eigenvalues
        .iter()
        .map(|z| eigenvalues.iter().map(|w| (w + z.conj()).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Largest distance from an element of `a` to the nearest element of `b`,
/// symmetrized.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let one = |x: &[Complex64], y: &[Complex64]| {
        x.iter().map(|z| y.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

/// Summary of the on-axis test for one `(cfg, k)`.
#[derive(Debug, Clone, Serialize)]
pub struct AxisReport {
    pub r: f64,
    pub on_axis: usize,
    pub tolerance: f64,
    /// Eigenvalue of smallest `|Re|`.
    pub closest: Complex64,
    pub reflection_defect: f64,
}

/// On-axis count for one `(cfg, k)`. Fails when the computed spectrum is
/// not reflection symmetric to within the axis tolerance, since the count is
/// then meaningless (this happens once `kappa r^{3/4} sigma` is so large that
/// `B1` outgrows double precision).
pub fn axis_report(cfg: &ModelConfig, k: i32) -> Result<AxisReport> {
    let eq = model::mfg_equilibrium(cfg)?;
    let vals = mfg_spectrum(cfg, &eq, k)?.eigenvalues;
    let tol = axis_tolerance(&vals);
    let reflection_defect = reflection_defect(&vals);
    if !(reflection_defect <= tol) {
        return Err(Error::Eigensolver(format!(
            "spectrum of N at r = {} is not reflection symmetric (defect {reflection_defect:.2e} > {tol:.2e})",
            cfg.r
        )));
    }
    let closest = *vals.iter().min_by(|a, b| a.re.abs().total_cmp(&b.re.abs())).expect("non-empty spectrum");
    Ok(AxisReport { r: cfg.r, on_axis: on_axis_count(&vals, tol), tolerance: tol, closest, reflection_defect })
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalR {
    pub r_c: f64,
    pub bracket: (f64, f64),
    pub at_lo: AxisReport,
    pub at_hi: AxisReport,
    pub evaluations: usize,
}

/// Bisection on the presence of on-axis eigenvalues of `N` to `|dr| < 1e-3`.
pub fn critical_r(cfg: &ModelConfig, k: i32, r_lo: f64, r_hi: f64) -> Result<CriticalR> {
    critical_r_tol(cfg, k, r_lo, r_hi, 1e-3)
}

pub fn critical_r_tol(cfg: &ModelConfig, k: i32, r_lo: f64, r_hi: f64, tol: f64) -> Result<CriticalR> {
    cfg.validate()?;
    if !(r_lo > 0.0 && r_hi > r_lo) {
        return Err(Error::InvalidBracket { lo: r_lo, hi: r_hi });
    }
    let at = |r: f64| axis_report(&cfg.clone().with_r(r), k);
    let at_lo = at(r_lo)?;
    let at_hi = at(r_hi)?;
    let flag_lo = at_lo.on_axis > 0;
    if flag_lo == (at_hi.on_axis > 0) {
        return Err(Error::InvalidBracket { lo: r_lo, hi: r_hi });
    }
    let (mut a, mut b) = (r_lo, r_hi);
    let mut evaluations = 2;
    while b - a >= tol {
        let mid = 0.5 * (a + b);
        evaluations += 1;
        if (at(mid)?.on_axis > 0) == flag_lo {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(CriticalR { r_c: 0.5 * (a + b), bracket: (r_lo, r_hi), at_lo, at_hi, evaluations })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub sigma: f64,
    pub r_c: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub k: i32,
    pub bracket: (f64, f64),
    pub points: Vec<SweepPoint>,
    /// Whether the successfully computed `r_c` values strictly decrease with
    /// `sigma` (after sorting by `sigma`).
    pub strictly_decreasing: bool,
}

/// Number of geometrically spaced probes used by `rc_sweep` to localize the
/// first on-axis to off-axis transition before bisecting.
pub const SWEEP_PROBES: usize = 12;

/// Localizes the transition on a geometric grid over `[r_lo, r_hi]`, then
/// bisects inside the first bracketing cell. Probes past the transition may
/// fail (see `axis_report`) without affecting the result.
pub fn critical_r_scan(cfg: &ModelConfig, k: i32, r_lo: f64, r_hi: f64) -> Result<CriticalR> {
    if !(r_lo > 0.0 && r_hi > r_lo) {
        return Err(Error::InvalidBracket { lo: r_lo, hi: r_hi });
    }
    let ratio = (r_hi / r_lo).powf(1.0 / (SWEEP_PROBES - 1) as f64);
    let mut prev: Option<(f64, bool)> = None;
    for i in 0..SWEEP_PROBES {
        let r = if i + 1 == SWEEP_PROBES { r_hi } else { r_lo * ratio.powi(i as i32) };
        let on = axis_report(&cfg.clone().with_r(r), k)?.on_axis > 0;
        if let Some((r_prev, on_prev)) = prev {
            if on_prev != on {
                return critical_r(cfg, k, r_prev, r);
            }
        }
        prev = Some((r, on));
    }
    Err(Error::InvalidBracket { lo: r_lo, hi: r_hi })
}

/// `r_c` for each noise level, evaluated in parallel with `critical_r_scan`.
/// Failures are recorded per point and do not abort the sweep.
pub fn rc_sweep(cfg: &ModelConfig, sigmas: &[f64], k: i32, r_lo: f64, r_hi: f64) -> SweepResult {
    let points: Vec<SweepPoint> = sigmas
        .par_iter()
        .map(|&sigma| match critical_r_scan(&cfg.clone().with_sigma(sigma), k, r_lo, r_hi) {
            Ok(c) => SweepPoint { sigma, r_c: Some(c.r_c), error: None },
            Err(e) => SweepPoint { sigma, r_c: None, error: Some(e.to_string()) },
        })
        .collect();
    let mut ok: Vec<(f64, f64)> = points.iter().filter_map(|p| p.r_c.map(|r| (p.sigma, r))).collect();
    ok.sort_by(|a, b| a.0.total_cmp(&b.0));
    let strictly_decreasing = ok.windows(2).all(|w| w[1].1 < w[0].1);
    SweepResult { k, bracket: (r_lo, r_hi), points, strictly_decreasing }
}

/// Outcome of the linear stability test for one Fourier mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    /// No eigenvalue of `N` on the axis and `P11 + P12 X_+` invertible.
    Stable { cond_init: f64 },
    /// On-axis eigenvalues present: the decoupling does not exist and
    /// neutral oscillations persist.
    OnAxis { count: usize, tolerance: f64 },
    /// The invertibility assumption fails.
    NotInvertible { cond_init: f64 },
    /// The Riccati construction itself failed.
    Undecidable { reason: String },
}

impl Verdict {
    pub fn is_stable(&self) -> bool {
        matches!(self, Verdict::Stable { .. })
    }
}

/// Applies the decision procedure to assembled blocks.
pub fn classify(blocks: &LinearizedBlocks) -> Result<(Verdict, Option<RiccatiSolution>)> {
    let vals = blocks.eigenvalues_n()?;
    let tol = axis_tolerance(&vals);
    let defect = reflection_defect(&vals);
    if !(defect <= tol) {
        // same guard as `axis_report`: the computed spectrum is not a
        // spectrum of a Hamiltonian matrix, so no count can be trusted
        let reason = format!("spectrum of N is not reflection symmetric (defect {defect:.2e} > {tol:.2e})");
        return Ok((Verdict::Undecidable { reason }, None));
    }
    let count = on_axis_count(&vals, tol);
    if count > 0 {
        return Ok((Verdict::OnAxis { count, tolerance: tol }, None));
    }
    match stabilizing_solution(blocks) {
        Ok(sol) if sol.cond_init < COND_LIMIT => Ok((Verdict::Stable { cond_init: sol.cond_init }, Some(sol))),
        Ok(sol) => Ok((Verdict::NotInvertible { cond_init: sol.cond_init }, Some(sol))),
        Err(e) => Ok((Verdict::Undecidable { reason: e.to_string() }, None)),
    }
}
