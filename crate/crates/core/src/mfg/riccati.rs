use num_complex::Complex64;

use super::{LinearizedBlocks, EPS_IM};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// Stabilizing Hermitian solution of `X A1 - B2 X + X B1 X - C_s = 0` and
/// the transformations that decouple the forward-backward system.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub x_plus: CMat,
    /// `N_s = P_sim^{-1} N P_sim`.
    pub p_sim: CMat,
    /// `[[I, 0], [X_+, I]]`, so `U^{-1} N_s U = [[A_c, B1], [0, -A_c^*]]`.
    pub u: CMat,
    pub a_c: CMat,
    /// Condition number of `P11 + P12 X_+`.
    pub cond_init: f64,
    /// Frobenius norm of the CARE residual.
    pub care_residual: f64,
    /// `max |X_+ - X_+^*|`; `X_+` is not symmetrized after the solve.
    pub hermitian_deviation: f64,
    /// `||P_sim^{-1} N P_sim - N_s|| / ||N_s||`.
    pub similarity_error: f64,
    pub max_re_closed_loop: f64,
}

impl RiccatiSolution {
    pub fn dim(&self) -> usize {
        self.x_plus.nrows()
    }

    /// `P11 + P12 X_+`.
    pub fn m1(&self) -> CMat {
        let n = self.dim();
        self.p_sim.view((0, 0), (n, n)) + self.p_sim.view((0, n), (n, n)) * &self.x_plus
    }

    /// `P21 + P22 X_+`.
    pub fn m2(&self) -> CMat {
        let n = self.dim();
        self.p_sim.view((n, 0), (n, n)) + self.p_sim.view((n, n), (n, n)) * &self.x_plus
    }

    /// Largest entry of the lower-left block of `U^{-1} N_s U`.
    pub fn off_block_defect(&self, blocks: &LinearizedBlocks) -> Result<f64> {
        let n = self.dim();
        let u_inv = linalg::inverse(&self.u, "U")?;
        let t = u_inv * &blocks.n_s * &self.u;
        Ok(linalg::max_abs(&t.view((n, 0), (n, n)).into_owned()))
    }
}

pub fn care_residual(x: &CMat, blocks: &LinearizedBlocks) -> CMat {
    let c = (&blocks.a2 + blocks.a2.adjoint()) * Complex64::new(0.5, 0.0);
    x * &blocks.a1 - &blocks.b2 * x + x * &blocks.b1 * x - c
}

/// Power-of-two diagonal `d` equalizing `|B1_pp| / d_p^2` and `|C_pp| d_p^2`.
/// The congruence `diag(D, D^{-1})` preserves the Hamiltonian structure and
/// the stable-subspace graph maps `X -> D X D`.
pub(super) fn symplectic_scaling(b1: &CMat, c: &CMat) -> Vec<f64> {
    (0..b1.nrows())
        .map(|p| {
            let (b, cc) = (b1[(p, p)].norm(), c[(p, p)].norm());
            if b == 0.0 || cc == 0.0 {
                return 1.0;
            }
            2f64.powi(((b / cc).powf(0.25)).log2().round() as i32)
        })
        .collect()
}

/// Pair eigenvalues of `N` with those of `N_s` greedily by distance; returns,
/// for each eigenvalue of `N`, the index of its partner.
fn match_eigenvalues(from: &[Complex64], to: &[Complex64]) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(from.len() * to.len());
    for (i, a) in from.iter().enumerate() {
        for (j, b) in to.iter().enumerate() {
            pairs.push(((a - b).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = vec![usize::MAX; from.len()];
    let mut used = vec![false; to.len()];
    for (_, i, j) in pairs {
        if out[i] == usize::MAX && !used[j] {
            out[i] = j;
            used[j] = true;
        }
    }
    out
}

/// Ordered Schur solution of the CARE associated with `N_s`.
pub fn stabilizing_solution(blocks: &LinearizedBlocks) -> Result<RiccatiSolution> {
    let n = blocks.dim();
    let vals_n = blocks.eigenvalues_n()?;
    let near = vals_n.iter().filter(|z| z.re.abs() < EPS_IM).count();
    if near > 0 {
        return Err(Error::OnAxisEigenvalue { count: near, tolerance: EPS_IM });
    }

    let d = blocks.symplectic_scaling();
    let h = blocks.scale(&blocks.n_s);

    let (mut q, mut t) = linalg::schur(&h)?;
    let found = linalg::reorder_schur(&mut q, &mut t, |z| z.re < 0.0);
    if found != n {
        return Err(Error::StableDimension { found, expected: n });
    }
    let v11 = q.view((0, 0), (n, n)).into_owned();
    let v21 = q.view((n, 0), (n, n)).into_owned();
    let cond = linalg::condition_number(&v11);
    if cond > 1e10 {
        return Err(Error::NearSingular { what: "V11", condition: cond });
    }
    let xs = v21 * linalg::inverse(&v11, "V11")?;
    let x_plus = CMat::from_fn(n, n, |i, j| xs[(i, j)] / (d[i] * d[j]));

    let a_c = &blocks.a1 + &blocks.b1 * &x_plus;
    let max_re_closed_loop = linalg::eigenvalues(&a_c)?.iter().fold(f64::NEG_INFINITY, |m, z| m.max(z.re));

    let (ln, v) = blocks.eigen(&blocks.n)?;
    let (ls, w) = blocks.eigen(&blocks.n_s)?;
    let perm = match_eigenvalues(&ln, &ls);
    let w_matched = CMat::from_fn(2 * n, 2 * n, |i, j| w[(i, perm[j])]);
    let p_sim = v * linalg::inverse(&w_matched, "matched eigenvectors of N_s")?;
    let p_inv = linalg::inverse(&p_sim, "P_sim")?;
    let similarity_error = linalg::fro(&(&p_inv * &blocks.n * &p_sim - &blocks.n_s)) / linalg::fro(&blocks.n_s);

    let mut u = CMat::identity(2 * n, 2 * n);
    u.view_mut((n, 0), (n, n)).copy_from(&x_plus);

    let m1 = p_sim.view((0, 0), (n, n)) + p_sim.view((0, n), (n, n)) * &x_plus;
    Ok(RiccatiSolution {
        care_residual: linalg::fro(&care_residual(&x_plus, blocks)),
        hermitian_deviation: linalg::hermitian_deviation(&x_plus),
        cond_init: linalg::condition_number(&m1),
        x_plus,
        p_sim,
        u,
        a_c,
        similarity_error,
        max_re_closed_loop,
    })
}
