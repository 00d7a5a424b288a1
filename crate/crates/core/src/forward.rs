//! Linear stability of the homogeneous equilibria of the forward kinetic model.

use num_complex::Complex64;
use serde::Serialize;

use crate::basis::BasisFamily;
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::model::{self, Equilibrium};

/// Real parts below `-STABILITY_MARGIN` count as decaying.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Distance to a pole of the resolvent below which the characteristic
/// function is not evaluated.
pub const POLE_GUARD: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub k: i32,
    /// Sorted by descending real part.
    pub eigenvalues: Vec<Complex64>,
    pub leading: Complex64,
    pub stable: bool,
}

impl Spectrum {
    pub fn from_eigenvalues(k: i32, mut eigenvalues: Vec<Complex64>) -> Self {
        eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        let leading = eigenvalues[0];
        Self { k, stable: leading.re < -STABILITY_MARGIN, leading, eigenvalues }
    }
}

/// Galerkin matrix of the linearized forward operator in the biorthogonal
/// basis: `M = diag(alpha) + left right^T` where `left_q = <psi_q, g0>` and
/// `right_p = <s, eta_p>`.
#[derive(Debug, Clone)]
pub struct ForwardOperator {
    pub basis: BasisFamily,
    pub equilibrium: Equilibrium,
    pub alpha: Vec<Complex64>,
    pub left: Vec<Complex64>,
    pub right: Vec<Complex64>,
    pub matrix: CMat,
}

/// `int eta_q(u) f(u) du` for `q < P` with a doubled-rule consistency check.
pub(crate) fn project_checked(
    basis: &BasisFamily,
    nodes: usize,
    dual: bool,
    f: impl Fn(Complex64) -> Complex64,
) -> Result<Vec<Complex64>> {
    let eval = |n: usize| {
        if dual {
            basis.project_psi(n, &f)
        } else {
            basis.project_eta(n, &f)
        }
    };
    let coarse = eval(nodes);
    let fine = eval(2 * nodes);
    let scale = fine.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    let diff = coarse.iter().zip(&fine).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    if diff > 1e-9 * scale {
        return Err(Error::QuadratureDivergence { nodes, doubled: 2 * nodes, difference: diff });
    }
    Ok(coarse)
}

impl ForwardOperator {
    /// Assemble with an explicit coupling strength `G'(xi) phi_k`.
    pub fn with_coupling(cfg: &ModelConfig, eq: &Equilibrium, k: i32, coupling: f64) -> Result<Self> {
        let basis = BasisFamily::forward(cfg.l, cfg.sigma, eq.xi, k, cfg.p);
        let s2 = cfg.sigma * cfg.sigma;
        let xi = eq.xi;
        let left = project_checked(&basis, cfg.quad_nodes, false, |u| {
            (u - xi) * (2.0 / s2 * coupling) * eq.sqrt_density_at(u)
        })?;
        let right = project_checked(&basis, cfg.quad_nodes, false, |u| u * eq.sqrt_density_at(u))?;
        let alpha: Vec<Complex64> = (0..cfg.p).map(|p| basis.alpha(p)).collect();
        let matrix = CMat::from_fn(cfg.p, cfg.p, |q, p| {
            let diag = if p == q { alpha[p] } else { Complex64::new(0.0, 0.0) };
            diag + left[q] * right[p]
        });
        Ok(Self { basis, equilibrium: *eq, alpha, left, right, matrix })
    }

    /// `1 - sum_p <conj eta_p, g0> <conj eta_p, s> / (lambda - alpha_p)`.
    pub fn characteristic_residual(&self, lambda: Complex64) -> Result<Complex64> {
        let mut sum = Complex64::new(0.0, 0.0);
        for ((a, l), r) in self.alpha.iter().zip(&self.left).zip(&self.right) {
            let d = lambda - a;
            if d.norm() < POLE_GUARD {
                return Err(Error::Pole { lambda, pole: *a, distance: d.norm() });
            }
            sum += l * r / d;
        }
        Ok(Complex64::new(1.0, 0.0) - sum)
    }

    /// Matrix restricted to the dynamically relevant subspace; for `k = 0`
    /// the mass direction (`eta_0`, proportional to `sqrt(F)`) is removed.
    pub fn relevant_matrix(&self) -> CMat {
        if self.basis.k == 0 {
            let n = self.matrix.nrows();
            self.matrix.view((1, 1), (n - 1, n - 1)).into_owned()
        } else {
            self.matrix.clone()
        }
    }
}

pub fn assemble_forward_operator(cfg: &ModelConfig, eq: &Equilibrium, k: i32) -> Result<ForwardOperator> {
    let coupling = model::g_prime(cfg.h, eq.xi) * model::kernel_fourier(k, cfg.l)?;
    ForwardOperator::with_coupling(cfg, eq, k, coupling)
}

pub fn forward_characteristic_residual(
    lambda: Complex64,
    cfg: &ModelConfig,
    eq: &Equilibrium,
    k: i32,
) -> Result<Complex64> {
    assemble_forward_operator(cfg, eq, k)?.characteristic_residual(lambda)
}

pub fn operator_spectrum(op: &ForwardOperator) -> Result<Spectrum> {
    let vals = linalg::eigenvalues(&op.relevant_matrix())?;
    Ok(Spectrum::from_eigenvalues(op.basis.k, vals))
}

pub fn forward_spectrum(cfg: &ModelConfig, eq: &Equilibrium, k: i32) -> Result<Spectrum> {
    operator_spectrum(&assemble_forward_operator(cfg, eq, k)?)
}

/// Spectrum at noise `sigma`, rebuilding the equilibrium for that noise.
pub fn spectrum_at_sigma(cfg: &ModelConfig, k: i32, sigma: f64) -> Result<Spectrum> {
    let cfg = cfg.clone().with_sigma(sigma);
    let eq = model::forward_equilibrium(&cfg)?;
    forward_spectrum(&cfg, &eq, k)
}

/// Agreement between matrix eigenvalues and the resolvent form of the
/// characteristic equation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResidualCheck {
    pub max_residual: f64,
    pub checked: usize,
    /// Eigenvalues within `min_pole_distance` of a pole, where the residual
    /// is dominated by eigenvalue round-off.
    pub skipped: usize,
}

/// Evaluates the characteristic residual at every eigenvalue farther than
/// `min_pole_distance` from all poles.
pub fn check_characteristic(op: &ForwardOperator, spectrum: &Spectrum, min_pole_distance: f64) -> ResidualCheck {
    let mut out = ResidualCheck { max_residual: 0.0, checked: 0, skipped: 0 };
    for &lam in &spectrum.eigenvalues {
        let dist = op.alpha.iter().map(|a| (lam - a).norm()).fold(f64::INFINITY, f64::min);
        if dist <= min_pole_distance {
            out.skipped += 1;
            continue;
        }
        match op.characteristic_residual(lam) {
            Ok(r) => {
                out.max_residual = out.max_residual.max(r.norm());
                out.checked += 1;
            }
            Err(_) => out.skipped += 1,
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalSigma {
    pub sigma_c: f64,
    pub bracket: (f64, f64),
    pub leading_at_lo: Complex64,
    pub leading_at_hi: Complex64,
    pub leading_at_critical: Complex64,
    pub evaluations: usize,
}

/// Bisection on the stability flag of the leading eigenvalue to `|dsigma| < tol`.
pub fn critical_sigma(cfg: &ModelConfig, k: i32, sigma_lo: f64, sigma_hi: f64) -> Result<CriticalSigma> {
    critical_sigma_tol(cfg, k, sigma_lo, sigma_hi, 1e-3)
}

pub fn critical_sigma_tol(cfg: &ModelConfig, k: i32, sigma_lo: f64, sigma_hi: f64, tol: f64) -> Result<CriticalSigma> {
    cfg.validate()?;
    let lo_spec = spectrum_at_sigma(cfg, k, sigma_lo)?;
    let hi_spec = spectrum_at_sigma(cfg, k, sigma_hi)?;
    if lo_spec.stable == hi_spec.stable {
        return Err(Error::InvalidBracket { lo: sigma_lo, hi: sigma_hi });
    }
    let (mut a, mut b) = (sigma_lo, sigma_hi);
    let flag_a = lo_spec.stable;
    let mut evaluations = 2;
    while (b - a).abs() >= tol {
        let mid = 0.5 * (a + b);
        let s = spectrum_at_sigma(cfg, k, mid)?;
        evaluations += 1;
        if s.stable == flag_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    let sigma_c = 0.5 * (a + b);
    let at = spectrum_at_sigma(cfg, k, sigma_c)?;
    Ok(CriticalSigma {
        sigma_c,
        bracket: (sigma_lo, sigma_hi),
        leading_at_lo: lo_spec.leading,
        leading_at_hi: hi_spec.leading,
        leading_at_critical: at.leading,
        evaluations: evaluations + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Branch;

    fn cfg(sigma: f64) -> ModelConfig {
        ModelConfig::default().with_sigma(sigma).with_truncation(20)
    }

    #[test]
    fn zero_coupling_is_diagonal() {
        let c = cfg(1.5);
        let eq = model::forward_equilibrium(&c).unwrap();
        let op = ForwardOperator::with_coupling(&c, &eq, 1, 0.0).unwrap();
        for q in 0..c.p {
            for p in 0..c.p {
                let expect = if p == q { op.alpha[p] } else { Complex64::new(0.0, 0.0) };
                assert_eq!(op.matrix[(q, p)], expect);
            }
        }
        let res = op.characteristic_residual(Complex64::new(0.3, 0.1)).unwrap();
        assert_eq!(res, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn off_diagonal_part_has_rank_one() {
        let c = cfg(1.8);
        let eq = model::forward_equilibrium(&c).unwrap();
        for k in [0, 1, 2] {
            let op = assemble_forward_operator(&c, &eq, k).unwrap();
            let mut off = op.matrix.clone();
            for i in 0..c.p {
                off[(i, i)] = Complex64::new(0.0, 0.0);
            }
            // Restore the diagonal of the outer product before checking rank.
            for i in 0..c.p {
                off[(i, i)] = op.left[i] * op.right[i];
            }
            let s = linalg::singular_values(&off);
            assert!(s[1] < 1e-10 * s[0], "k={k}: {:?}", &s[..2]);
        }
    }

    #[test]
    fn pole_is_rejected() {
        let c = cfg(2.0);
        let eq = model::forward_equilibrium(&c).unwrap();
        let op = assemble_forward_operator(&c, &eq, 1).unwrap();
        assert!(matches!(op.characteristic_residual(op.alpha[2]), Err(Error::Pole { .. })));
    }

    #[test]
    fn stability_on_either_side_of_threshold() {
        assert!(spectrum_at_sigma(&cfg(2.0), 1, 2.0).unwrap().stable);
        assert!(!spectrum_at_sigma(&cfg(0.8), 1, 0.8).unwrap().stable);
        let at = spectrum_at_sigma(&cfg(1.8), 1, 1.8).unwrap();
        assert!(at.leading.re.abs() < 1e-2, "{}", at.leading);
    }

    #[test]
    fn k0_mass_direction_removed() {
        let c = cfg(2.0);
        let eq = model::forward_equilibrium(&c).unwrap();
        let s = forward_spectrum(&c, &eq, 0).unwrap();
        assert_eq!(s.eigenvalues.len(), c.p - 1);
        assert!(s.stable);
        // Without the restriction the neutral mass mode sits at zero.
        let op = assemble_forward_operator(&c, &eq, 0).unwrap();
        let full = linalg::eigenvalues(&op.matrix).unwrap();
        assert!(full.iter().any(|z| z.norm() < 1e-10));
    }

    #[test]
    fn characteristic_residual_vanishes_at_eigenvalues() {
        for (sigma, k) in [(0.8, 1), (1.8, 1), (2.0, 1), (1.0, 2), (2.0, 0)] {
            let c = cfg(sigma);
            let eq = model::forward_equilibrium(&c).unwrap();
            let op = assemble_forward_operator(&c, &eq, k).unwrap();
            let spec = operator_spectrum(&op).unwrap();
            let chk = check_characteristic(&op, &spec, 1e-6);
            assert!(chk.checked >= 1);
            assert!(chk.max_residual < 1e-5, "sigma={sigma} k={k}: {chk:?}");
        }
    }

    #[test]
    fn threshold_root_of_characteristic_function() {
        let c = cfg(1.8);
        let eq = model::forward_equilibrium(&c).unwrap();
        let op = assemble_forward_operator(&c, &eq, 1).unwrap();
        let lead = operator_spectrum(&op).unwrap().leading;
        assert!(lead.re.abs() < 1e-3);
        assert!(op.characteristic_residual(lead).unwrap().norm() < 1e-6);
    }

    #[test]
    fn truncation_robust_leading_eigenvalue() {
        for sigma in [0.8, 1.8, 2.0] {
            let a = spectrum_at_sigma(&cfg(sigma), 1, sigma).unwrap().leading;
            let b = spectrum_at_sigma(&cfg(sigma).with_truncation(28), 1, sigma).unwrap().leading;
            assert!((a - b).norm() < 1e-4, "sigma={sigma}: {a} vs {b}");
        }
    }

    #[test]
    fn mirrored_mode_has_conjugate_spectrum() {
        let c = cfg(1.5);
        let eq = model::forward_equilibrium(&c).unwrap();
        let plus = forward_spectrum(&c, &eq, 1).unwrap();
        let minus = forward_spectrum(&c, &eq, -1).unwrap();
        for z in &plus.eigenvalues {
            let near = minus.eigenvalues.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min);
            assert!(near < 1e-8, "{z}");
        }
    }

    #[test]
    fn opposite_branch_has_conjugate_spectrum() {
        let c = cfg(1.5);
        let neg = ModelConfig { branch: Branch::Negative, ..c.clone() };
        let sp = forward_spectrum(&c, &model::forward_equilibrium(&c).unwrap(), 1).unwrap();
        let sn = forward_spectrum(&neg, &model::forward_equilibrium(&neg).unwrap(), 1).unwrap();
        for z in &sp.eigenvalues {
            let near = sn.eigenvalues.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min);
            assert!(near < 1e-8, "{z}");
        }
    }

    #[test]
    fn second_mode_destabilizes_at_lower_noise() {
        let c = cfg(1.0);
        let s1 = critical_sigma(&c, 1, 0.2, 2.5).unwrap().sigma_c;
        let s2 = critical_sigma(&c, 2, 0.2, 2.5).unwrap().sigma_c;
        assert!((s1 - 1.8).abs() < 0.05, "{s1}");
        assert!(s2 < s1, "{s2} vs {s1}");
    }

    #[test]
    fn disordered_state_is_unstable_everywhere() {
        let c = ModelConfig { branch: Branch::Disordered, ..cfg(1.0) };
        for sigma in [0.2, 1.0, 1.8, 2.5] {
            let s = spectrum_at_sigma(&c, 0, sigma).unwrap();
            assert!(!s.stable, "sigma={sigma}");
        }
        assert!(matches!(critical_sigma(&c, 0, 0.2, 2.5), Err(Error::InvalidBracket { .. })));
    }
}
