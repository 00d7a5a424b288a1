use num_complex::Complex64;

use super::{LinearizedBlocks, RiccatiSolution, COND_LIMIT};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};

/// Explicit solution of the linearized forward-backward problem with
/// prescribed initial density coefficients.
#[derive(Debug, Clone)]
pub struct BvpTrajectory {
    pub times: Vec<f64>,
    pub y1: Vec<CVec>,
    pub y2: Vec<CVec>,
    pub z1: Vec<CVec>,
    pub z2: Vec<CVec>,
}

impl BvpTrajectory {
    pub fn norms(&self) -> Vec<(f64, f64, f64)> {
        self.times.iter().zip(self.y1.iter().zip(&self.y2)).map(|(&t, (a, b))| (t, a.norm(), b.norm())).collect()
    }

    pub fn max_z2(&self) -> f64 {
        self.z2.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// `e^{A t}` evaluator: eigendecomposition when the eigenvector matrix is
/// well conditioned, Pade scaling-and-squaring otherwise.
enum Propagator {
    Diagonal { v: CMat, v_inv: CMat, lambda: Vec<Complex64> },
    Pade(CMat),
}

impl Propagator {
    fn new(a: &CMat) -> Result<Self> {
        let (lambda, v) = linalg::eigen(a)?;
        if linalg::condition_number(&v) < 1e8 {
            let v_inv = linalg::inverse(&v, "eigenvectors of A_c")?;
            return Ok(Self::Diagonal { v, v_inv, lambda });
        }
        Ok(Self::Pade(a.clone()))
    }

    fn apply(&self, t: f64, x: &CVec) -> CVec {
        match self {
            Self::Diagonal { v, v_inv, lambda } => {
                let mut y = v_inv * x;
                for (yi, l) in y.iter_mut().zip(lambda) {
                    *yi *= (l * t).exp();
                }
                v * y
            }
            Self::Pade(a) => linalg::expm(&(a * Complex64::new(t, 0.0))) * x,
        }
    }
}

/// `Y1(t) = M1 e^{A_c t} M1^{-1} Y10`, `Y2(t) = M2 e^{A_c t} M1^{-1} Y10` with
/// `M1 = P11 + P12 X_+`, `M2 = P21 + P22 X_+`.
pub fn bvp_solve(blocks: &LinearizedBlocks, sol: &RiccatiSolution, y10: &CVec, times: &[f64]) -> Result<BvpTrajectory> {
    let n = blocks.dim();
    if y10.len() != n {
        return Err(Error::InvalidConfig(format!("initial coefficient vector has length {}, expected {n}", y10.len())));
    }
    if !(sol.cond_init < COND_LIMIT) {
        return Err(Error::NearSingular { what: "P11 + P12 X_+", condition: sol.cond_init });
    }
    let m1 = sol.m1();
    let m2 = sol.m2();
    let z0 =
        m1.clone().lu().solve(y10).ok_or(Error::NearSingular { what: "P11 + P12 X_+", condition: sol.cond_init })?;
    let back = linalg::inverse(&(&sol.p_sim * &sol.u), "P U")?;
    let prop = Propagator::new(&sol.a_c)?;

    let mut out = BvpTrajectory {
        times: times.to_vec(),
        y1: Vec::with_capacity(times.len()),
        y2: Vec::with_capacity(times.len()),
        z1: Vec::with_capacity(times.len()),
        z2: Vec::with_capacity(times.len()),
    };
    for &t in times {
        let z = prop.apply(t, &z0);
        let y1 = &m1 * &z;
        let y2 = &m2 * &z;
        let mut y = CVec::zeros(2 * n);
        y.rows_mut(0, n).copy_from(&y1);
        y.rows_mut(n, n).copy_from(&y2);
        let zz = &back * y;
        out.z1.push(zz.rows(0, n).into_owned());
        out.z2.push(zz.rows(n, n).into_owned());
        out.y1.push(y1);
        out.y2.push(y2);
    }
    Ok(out)
}
