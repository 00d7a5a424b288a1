//! Biorthogonal eigenfunction families of the local linearized operators.
//!
//! For Fourier mode `k` the local operator
//! `(sigma^2/2) f'' - [ i kappa u + ((u - xi)^2 - sqrt(r) sigma^2) / (2 r sigma^2) ] f`
//! (with `r = 1` for the forward model) is diagonalized by parabolic cylinder
//! functions of the complex-shifted argument `v = (u - a2) / a1`:
//! `eta_p(u) = z(p) D_p(v)`, `psi_p = conj(eta_p)`, `<eta_p, psi_q> = delta_pq`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Largest log-magnitude we accept before reporting overflow.
const LOG_MAX: f64 = 709.0;

/// Probabilists' Hermite polynomial `He_p(v)` by the three-term recurrence.
pub fn hermite_eval(p: usize, v: Complex64) -> Complex64 {
    let mut prev = Complex64::new(0.0, 0.0);
    let mut cur = Complex64::new(1.0, 0.0);
    for n in 0..p {
        let next = v * cur - prev * n as f64;
        prev = cur;
        cur = next;
    }
    cur
}

/// `He_p(v)` as (mantissa, log-scale) so that the value is `mantissa * e^scale`.
fn hermite_scaled(p: usize, v: Complex64) -> (Complex64, f64) {
    let mut prev = Complex64::new(0.0, 0.0);
    let mut cur = Complex64::new(1.0, 0.0);
    let mut scale = 0.0;
    for n in 0..p {
        let next = v * cur - prev * n as f64;
        prev = cur;
        cur = next;
        let m = cur.norm();
        if m > 1e150 {
            prev /= m;
            cur /= m;
            scale += m.ln();
        }
    }
    (cur, scale)
}

/// Parabolic cylinder function `D_p(v) = e^{-v^2/4} He_p(v)`.
///
/// Large imaginary parts make the Gaussian factor grow like `e^{(Im v)^2/4}`;
/// beyond `|Im v| > 20` the product is formed from log-magnitude and phase.
pub fn parabolic_cylinder_d(p: usize, v: Complex64) -> Result<Complex64> {
    let gauss = -v * v / 4.0;
    if v.im.abs() <= 20.0 {
        let val = gauss.exp() * hermite_eval(p, v);
        if val.re.is_finite() && val.im.is_finite() {
            return Ok(val);
        }
    }
    let (mant, scale) = hermite_scaled(p, v);
    if mant == Complex64::new(0.0, 0.0) {
        return Ok(mant);
    }
    let log_mag = gauss.re + scale + mant.norm().ln();
    if log_mag > LOG_MAX {
        return Err(Error::Overflow { order: p, log_magnitude: log_mag });
    }
    let phase = gauss.im + mant.arg();
    Ok(Complex64::from_polar(log_mag.exp(), phase))
}

pub fn ln_factorial(p: usize) -> f64 {
    (2..=p).map(|k| (k as f64).ln()).sum()
}

/// Gauss-Hermite rule for the weight `e^{-x^2/2}` with the weight folded
/// back into `weights`, so `sum w_i f(x_i) ~ int f(x) dx` for functions with
/// Gaussian decay.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let jacobi =
            DMatrix::from_fn(n, n, |i, j| if i + 1 == j || j + 1 == i { (i.max(j) as f64).sqrt() } else { 0.0 });
        let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        nodes.sort_by(f64::total_cmp);
        let mut weights = Vec::with_capacity(n);
        for x in nodes.iter_mut() {
            // Newton polish on the normalized Hermite function of order n.
            for _ in 0..3 {
                let phi = hermite_functions(*x, n + 1);
                let step = phi[n] / ((n as f64).sqrt() * phi[n - 1]);
                if step.is_finite() {
                    *x -= step;
                }
            }
            let phi = hermite_functions(*x, n);
            let sum: f64 = phi.iter().map(|p| p * p).sum();
            weights.push((2.0 * std::f64::consts::PI).sqrt() / sum);
        }
        Self { nodes, weights }
    }
}

/// Normalized Hermite functions `He_m(x) e^{-x^2/4} / sqrt(m!)` for `m < count`.
pub fn hermite_functions(x: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut prev = 0.0;
    let mut cur = (-x * x / 4.0).exp();
    for m in 0..count {
        out.push(cur);
        let next = (x * cur - (m as f64).sqrt() * prev) / ((m + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    out
}

/// Gauss-Hermite quadrature on the real line centered at `center` with
/// Gaussian scale `width`.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub center: f64,
    pub width: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn new(center: f64, width: f64, n: usize) -> Self {
        let rule = GaussHermite::new(n);
        Self {
            center,
            width,
            nodes: rule.nodes.iter().map(|x| center + width * x).collect(),
            weights: rule.weights.iter().map(|w| w * width).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> Complex64) -> Complex64 {
        self.nodes.iter().zip(&self.weights).map(|(&u, &w)| f(u) * w).sum()
    }

    /// `<f, g> = int conj(f) g du`.
    pub fn inner(&self, f: impl Fn(f64) -> Complex64, g: impl Fn(f64) -> Complex64) -> Complex64 {
        self.integrate(|u| f(u).conj() * g(u))
    }

    /// The same rule with twice the nodes.
    pub fn doubled(&self) -> Self {
        Self::new(self.center, self.width, 2 * self.len())
    }
}

/// `<f, g>` with a doubling-node consistency check.
pub fn inner_product(
    quad: &Quadrature,
    f: impl Fn(f64) -> Complex64,
    g: impl Fn(f64) -> Complex64,
    tol: f64,
) -> Result<Complex64> {
    let coarse = quad.inner(&f, &g);
    let fine_rule = quad.doubled();
    let fine = fine_rule.inner(&f, &g);
    let diff = (coarse - fine).norm();
    if !(diff <= tol * fine.norm().max(1.0)) {
        return Err(Error::QuadratureDivergence { nodes: quad.len(), doubled: fine_rule.len(), difference: diff });
    }
    Ok(fine)
}

/// Gauss-Hermite rule on the horizontal line `Im u = center.im`. For an
/// entire integrand with Gaussian decay in the strip, Cauchy's theorem makes
/// this equal to the real-line integral.
#[derive(Debug, Clone)]
pub struct Contour {
    pub center: Complex64,
    pub width: f64,
    rule: GaussHermite,
}

impl Contour {
    pub fn new(center: Complex64, width: f64, n: usize) -> Self {
        Self { center, width, rule: GaussHermite::new(n) }
    }

    pub fn points(&self) -> impl Iterator<Item = (Complex64, f64)> + '_ {
        self.rule.nodes.iter().zip(&self.rule.weights).map(|(&x, &w)| (self.center + self.width * x, w * self.width))
    }

    pub fn integrate(&self, f: impl Fn(Complex64) -> Complex64) -> Complex64 {
        self.points().map(|(u, w)| f(u) * w).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Forward,
    Mfg,
}

/// Eigenbasis of the local operator for one Fourier mode.
#[derive(Debug, Clone, Serialize)]
pub struct BasisFamily {
    pub k: i32,
    pub xi: f64,
    pub sigma: f64,
    pub l: f64,
    /// Control cost; `1` for the forward model, whose local operator
    /// coincides with the MFG one at `r = 1`.
    pub r: f64,
    pub p: usize,
    pub a1: f64,
    pub a2: Complex64,
    pub variant: Variant,
}

impl BasisFamily {
    pub fn forward(l: f64, sigma: f64, xi: f64, k: i32, p: usize) -> Self {
        Self::build(l, sigma, 1.0, xi, k, p, Variant::Forward)
    }

    pub fn mfg(l: f64, sigma: f64, r: f64, xi: f64, k: i32, p: usize) -> Self {
        Self::build(l, sigma, r, xi, k, p, Variant::Mfg)
    }

    fn build(l: f64, sigma: f64, r: f64, xi: f64, k: i32, p: usize, variant: Variant) -> Self {
        let kappa = 2.0 * std::f64::consts::PI * k as f64 / l;
        // Completing the square in the local operator gives the same
        // shift direction for both variants; the forward one is r = 1.
        let a1 = sigma * r.powf(0.25) / std::f64::consts::SQRT_2;
        let a2 = Complex64::new(xi, -kappa * r * sigma * sigma);
        Self { k, xi, sigma, l, r, p, a1, a2, variant }
    }

    pub fn kappa(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.k as f64 / self.l
    }

    /// Variance of the stationary Gaussian the basis is built around.
    pub fn variance(&self) -> f64 {
        self.a1 * self.a1
    }

    /// `c2(k) = -kappa^2 r sigma^2 / 2 - i kappa xi`.
    pub fn c2(&self) -> Complex64 {
        let kappa = self.kappa();
        Complex64::new(-kappa * kappa * self.r * self.sigma * self.sigma / 2.0, -kappa * self.xi)
    }

    /// Eigenvalue `alpha_{k,p}` of the forward local operator.
    pub fn alpha(&self, p: usize) -> Complex64 {
        self.c2() - p as f64 / self.r.sqrt()
    }

    /// Eigenvalue `beta_{k,p} = -conj(alpha_{k,p})` of the backward local operator.
    pub fn beta(&self, p: usize) -> Complex64 {
        -self.alpha(p).conj()
    }

    /// Normalizing factor `z(p) = (sqrt(2 pi) a1 p!)^{-1/2}`.
    pub fn z(&self, p: usize) -> f64 {
        let ln = 0.5 * (2.0 * std::f64::consts::PI).sqrt().ln() + 0.5 * self.a1.ln() + 0.5 * ln_factorial(p);
        (-ln).exp()
    }

    pub fn argument(&self, u: f64) -> Complex64 {
        (Complex64::new(u, 0.0) - self.a2) / self.a1
    }

    pub fn eta(&self, p: usize, u: f64) -> Result<Complex64> {
        let v = self.argument(u);
        let d = parabolic_cylinder_d(p, v)?;
        if d.norm() == 0.0 {
            return Ok(d);
        }
        // Combine in log form so z(p) never overflows on its own.
        let ln = d.norm().ln() + self.z(p).ln();
        if ln > LOG_MAX {
            return Err(Error::Overflow { order: p, log_magnitude: ln });
        }
        Ok(Complex64::from_polar(ln.exp(), d.arg()))
    }

    pub fn psi(&self, p: usize, u: f64) -> Result<Complex64> {
        Ok(self.eta(p, u)?.conj())
    }

    /// `eta_0(u) .. eta_{count-1}(u)` via the normalized recurrence.
    pub fn eta_table(&self, u: f64, count: usize) -> Vec<Complex64> {
        self.eta_table_at(Complex64::new(u, 0.0), count)
    }

    /// Analytic continuation of the table to complex `u`.
    pub fn eta_table_at(&self, u: Complex64, count: usize) -> Vec<Complex64> {
        let v = (u - self.a2) / self.a1;
        let pref = -v * v / 4.0 - 0.5 * ((2.0 * std::f64::consts::PI).sqrt() * self.a1).ln();
        let mut out = Vec::with_capacity(count);
        let mut prev = Complex64::new(0.0, 0.0);
        let mut cur = Complex64::new(1.0, 0.0);
        let mut scale = 0.0;
        for n in 0..count {
            let e = Complex64::new(pref.re + scale, pref.im).exp();
            out.push(e * cur);
            let next = (v * cur - prev * (n as f64).sqrt()) / ((n + 1) as f64).sqrt();
            prev = cur;
            cur = next;
            let m = cur.norm();
            if m > 1e100 {
                prev /= m;
                cur /= m;
                scale += m.ln();
            }
        }
        out
    }

    /// Analytic continuation of `psi_q`, i.e. `conj(eta_q(conj u))`.
    pub fn psi_table_at(&self, u: Complex64, count: usize) -> Vec<Complex64> {
        self.eta_table_at(u.conj(), count).into_iter().map(|z| z.conj()).collect()
    }

    /// Contour through the center of `eta` (`Im u = Im a2`), where the
    /// family reduces to real Hermite functions. On the real axis the same
    /// integrals cancel from magnitudes of order `e^{y^2/2}`,
    /// `y = kappa r sigma^2 / a1`.
    pub fn eta_contour(&self, nodes: usize) -> Contour {
        Contour::new(Complex64::new(self.xi, self.a2.im), self.a1, nodes)
    }

    /// Contour through the center of `psi` (`Im u = -Im a2`).
    pub fn psi_contour(&self, nodes: usize) -> Contour {
        Contour::new(Complex64::new(self.xi, -self.a2.im), self.a1, nodes)
    }

    /// `int eta_q(u) f(u) du` for `q < P`, for `f` entire with Gaussian decay,
    /// evaluated on `eta_contour`.
    pub fn project_eta(&self, nodes: usize, f: impl Fn(Complex64) -> Complex64) -> Vec<Complex64> {
        self.project(&self.eta_contour(nodes), f, |u| self.eta_table_at(u, self.p))
    }

    /// `int psi_q(u) f(u) du` for `q < P`, evaluated on `psi_contour`.
    pub fn project_psi(&self, nodes: usize, f: impl Fn(Complex64) -> Complex64) -> Vec<Complex64> {
        self.project(&self.psi_contour(nodes), f, |u| self.psi_table_at(u, self.p))
    }

    fn project(
        &self,
        contour: &Contour,
        f: impl Fn(Complex64) -> Complex64,
        table: impl Fn(Complex64) -> Vec<Complex64>,
    ) -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); self.p];
        for (u, w) in contour.points() {
            let fu = f(u) * w;
            for (a, e) in acc.iter_mut().zip(table(u)) {
                *a += e * fu;
            }
        }
        acc
    }

    /// Real potential of the self-adjoint part,
    /// `((u - xi)^2 - sqrt(r) sigma^2) / (2 r sigma^2)`.
    pub fn confining_potential(&self, u: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        ((u - self.xi).powi(2) - self.r.sqrt() * s2) / (2.0 * self.r * s2)
    }

    /// Quadrature centered at `xi` with the basis width.
    pub fn quadrature(&self, nodes: usize) -> Quadrature {
        Quadrature::new(self.xi, self.a1, nodes)
    }

    /// Largest `|<eta_p, psi_q> - delta_pq|` over the basis. The pairing is
    /// `int psi_p psi_q du` and is evaluated on `psi_contour`.
    pub fn biorthogonality_error(&self, nodes: usize) -> f64 {
        let contour = self.psi_contour(nodes);
        let pts: Vec<(Complex64, f64)> = contour.points().collect();
        let tables: Vec<Vec<Complex64>> = pts.iter().map(|&(u, _)| self.psi_table_at(u, self.p)).collect();
        let mut worst: f64 = 0.0;
        for p in 0..self.p {
            for q in 0..self.p {
                let val: Complex64 = tables.iter().zip(&pts).map(|(t, &(_, w))| t[p] * t[q] * w).sum();
                let target = if p == q { 1.0 } else { 0.0 };
                worst = worst.max((val - target).norm());
            }
        }
        worst
    }

    /// Relative residual `||L eta_p - alpha_p eta_p|| / ||eta_p||` with the
    /// second derivative taken by Hermite-function collocation (independent
    /// of the closed-form eigenfunction).
    pub fn verify_local_eigenpair(&self, p: usize, nodes: usize) -> Result<f64> {
        if p >= self.p {
            return Err(Error::InvalidConfig(format!("order {p} outside basis of size {}", self.p)));
        }
        let rule = GaussHermite::new(nodes);
        let w0 = self.a1;
        let modes = nodes / 2;
        let norm = ((2.0 * std::f64::consts::PI).sqrt() * w0).powf(-0.5);
        let chi: Vec<Vec<f64>> = rule
            .nodes
            .iter()
            .map(|&x| hermite_functions(x, modes + 2).into_iter().map(|v| v * norm).collect())
            .collect();
        let us: Vec<f64> = rule.nodes.iter().map(|x| self.xi + w0 * x).collect();
        let ws: Vec<f64> = rule.weights.iter().map(|w| w * w0).collect();
        let eta: Vec<Complex64> = us.iter().map(|&u| self.eta(p, u)).collect::<Result<_>>()?;

        let mut coef = vec![Complex64::new(0.0, 0.0); modes];
        for (i, e) in eta.iter().enumerate() {
            for (m, cm) in coef.iter_mut().enumerate() {
                *cm += *e * chi[i][m] * ws[i];
            }
        }
        let d1 = differentiate(&coef);
        let d2 = differentiate(&d1);
        let scale = 1.0 / (w0 * w0);
        let kappa = self.kappa();
        let lambda = self.alpha(p);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..us.len() {
            let second: Complex64 = d2.iter().enumerate().map(|(m, cm)| *cm * chi[i][m]).sum::<Complex64>() * scale;
            let pot = Complex64::new(-self.confining_potential(us[i]), -kappa * us[i]);
            let applied = second * (self.sigma * self.sigma / 2.0) + pot * eta[i];
            num += (applied - lambda * eta[i]).norm_sqr() * ws[i];
            den += eta[i].norm_sqr() * ws[i];
        }
        Ok((num / den).sqrt())
    }
}

/// Coefficients of `d/dx` in the Hermite-function basis:
/// `phi_m' = (sqrt(m) phi_{m-1} - sqrt(m+1) phi_{m+1}) / 2`.
fn differentiate(coef: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); coef.len() + 1];
    for (m, &cm) in coef.iter().enumerate() {
        if m > 0 {
            out[m - 1] += cm * (m as f64).sqrt() * 0.5;
        }
        out[m + 1] -= cm * ((m + 1) as f64).sqrt() * 0.5;
    }
    out
}
