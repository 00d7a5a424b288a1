//! Dense complex linear algebra on top of `nalgebra`.
//!
//! `nalgebra` supplies the Hessenberg/QR Schur iteration, LU, SVD and the
//! Pade matrix exponential. Balancing, reordering of the triangular Schur
//! form and eigenvector back-substitution live here.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

const SCHUR_MAX_ITER: usize = 10_000;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn fro(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest deviation from Hermitian symmetry, `max |M - M^*|`.
pub fn hermitian_deviation(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Diagonal similarity `D^{-1} A D` with power-of-two entries that equalizes
/// row and column norms (Parlett-Reinsch). Returns the balanced matrix and `D`.
pub fn balance(a: &CMat) -> (CMat, Vec<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut d = vec![1.0; n];
    let radix = 2.0_f64;
    let radix_sq = radix * radix;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += m[(j, i)].l1_norm();
                    row += m[(i, j)].l1_norm();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let total = col + row;
            let mut f = 1.0;
            let mut g = row / radix;
            while col < g {
                f *= radix;
                col *= radix_sq;
            }
            g = row * radix;
            while col > g {
                f /= radix;
                col /= radix_sq;
            }
            if (col + row) / f < 0.95 * total {
                converged = false;
                d[i] *= f;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
    (m, d)
}

/// Complex Schur factorization `A = Q T Q^*`.
pub fn schur(a: &CMat) -> Result<(CMat, CMat)> {
    let s = Schur::try_new(a.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Eigensolver("Schur iteration did not converge".into()))?;
    let (q, mut t) = s.unpack();
    for j in 0..t.ncols() {
        for i in (j + 1)..t.nrows() {
            t[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    Ok((q, t))
}

/// Swap the adjacent diagonal entries `i` and `i+1` of the triangular `t`,
/// updating the unitary factor `q`.
fn swap_adjacent(q: &mut CMat, t: &mut CMat, i: usize) {
    let t11 = t[(i, i)];
    let t22 = t[(i + 1, i + 1)];
    let t12 = t[(i, i + 1)];
    let v1 = t12;
    let v2 = t22 - t11;
    let nrm = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    if nrm == 0.0 {
        return;
    }
    let (v1, v2) = (v1 / nrm, v2 / nrm);
    // Z = [v, w], w = [-conj(v2), conj(v1)]
    let z = [[v1, -v2.conj()], [v2, v1.conj()]];
    let n = t.nrows();
    for j in 0..n {
        let a = t[(i, j)];
        let b = t[(i + 1, j)];
        t[(i, j)] = z[0][0].conj() * a + z[1][0].conj() * b;
        t[(i + 1, j)] = z[0][1].conj() * a + z[1][1].conj() * b;
    }
    for r in 0..n {
        let a = t[(r, i)];
        let b = t[(r, i + 1)];
        t[(r, i)] = a * z[0][0] + b * z[1][0];
        t[(r, i + 1)] = a * z[0][1] + b * z[1][1];
        let a = q[(r, i)];
        let b = q[(r, i + 1)];
        q[(r, i)] = a * z[0][0] + b * z[1][0];
        q[(r, i + 1)] = a * z[0][1] + b * z[1][1];
    }
    t[(i + 1, i)] = Complex64::new(0.0, 0.0);
}

/// Reorder a complex Schur form so that every diagonal entry satisfying
/// `select` comes first. Returns the size of the selected leading block.
pub fn reorder_schur(q: &mut CMat, t: &mut CMat, select: impl Fn(Complex64) -> bool) -> usize {
    let n = t.nrows();
    let mut placed = 0;
    for j in 0..n {
        if select(t[(j, j)]) {
            let mut pos = j;
            while pos > placed {
                swap_adjacent(q, t, pos - 1);
                pos -= 1;
            }
            placed += 1;
        }
    }
    placed
}

/// Eigenvalues of a general complex matrix (balanced Schur).
pub fn eigenvalues(a: &CMat) -> Result<Vec<Complex64>> {
    let (b, _) = balance(a);
    let (_, t) = schur(&b)?;
    let vals: Vec<Complex64> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    if vals.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    Ok(vals)
}

/// Eigenvectors of an upper triangular matrix by back-substitution; column
/// `j` belongs to `t[(j, j)]`.
fn triangular_eigenvectors(t: &CMat) -> CMat {
    let n = t.nrows();
    let small = f64::EPSILON * max_abs(t).max(f64::MIN_POSITIVE);
    let mut y = CMat::zeros(n, n);
    for j in 0..n {
        let lambda = t[(j, j)];
        y[(j, j)] = Complex64::new(1.0, 0.0);
        for k in (0..j).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in (k + 1)..=j {
                acc += t[(k, m)] * y[(m, j)];
            }
            let mut denom = t[(k, k)] - lambda;
            if denom.norm() < small {
                denom = Complex64::new(small, 0.0);
            }
            y[(k, j)] = -acc / denom;
        }
    }
    y
}

/// Eigenvalues and unit-norm eigenvectors (columns) of a general complex matrix.
pub fn eigen(a: &CMat) -> Result<(Vec<Complex64>, CMat)> {
    let (b, d) = balance(a);
    let (q, t) = schur(&b)?;
    let vals: Vec<Complex64> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    let y = triangular_eigenvectors(&t);
    let mut v = &q * y;
    for (i, di) in d.iter().enumerate() {
        for j in 0..v.ncols() {
            v[(i, j)] *= *di;
        }
    }
    for mut col in v.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 {
            col /= Complex64::new(nrm, 0.0);
        }
    }
    Ok((vals, v))
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    let svd = a.clone().svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// 2-norm condition number; infinite for exactly singular input.
pub fn condition_number(a: &CMat) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

pub fn inverse(a: &CMat, what: &'static str) -> Result<CMat> {
    a.clone().lu().try_inverse().ok_or(Error::NearSingular { what, condition: f64::INFINITY })
}

pub fn expm(a: &CMat) -> CMat {
    a.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn schur_reconstructs() {
        let a = random(12, 1);
        let (q, t) = schur(&a).unwrap();
        let err = fro(&(&q * &t * q.adjoint() - &a));
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn reorder_puts_left_half_plane_first() {
        let a = random(16, 2);
        let (mut q, mut t) = schur(&a).unwrap();
        let m = reorder_schur(&mut q, &mut t, |z| z.re < 0.0);
        for i in 0..16 {
            assert_eq!(t[(i, i)].re < 0.0, i < m);
        }
        let err = fro(&(&q * &t * q.adjoint() - &a));
        assert!(err < 1e-12, "{err}");
        let unitary = fro(&(q.adjoint() * &q - CMat::identity(16, 16)));
        assert!(unitary < 1e-12);
    }

    #[test]
    fn eigenpairs_of_badly_scaled_matrix() {
        let mut a = random(10, 3);
        for i in 0..10 {
            let s = 10f64.powi(i as i32 - 5);
            for j in 0..10 {
                a[(i, j)] *= s;
                a[(j, i)] /= s;
            }
        }
        let (vals, vecs) = eigen(&a).unwrap();
        for (j, lam) in vals.iter().enumerate() {
            let v = vecs.column(j);
            let r = (&a * v - v * *lam).norm();
            assert!(r < 1e-8 * fro(&a), "residual {r}");
        }
    }

    #[test]
    fn balance_is_a_similarity() {
        let a = random(8, 4);
        let (b, d) = balance(&a);
        for i in 0..8 {
            for j in 0..8 {
                let expect = a[(i, j)] * d[j] / d[i];
                assert!((b[(i, j)] - expect).norm() < 1e-14);
            }
        }
    }
}
