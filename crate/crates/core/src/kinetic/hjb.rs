use nalgebra::DMatrix;
use num_complex::Complex64;

use super::forward::if_rk4_step;
use super::{KineticModel, BLOW_UP_GROWTH};
use crate::error::{Error, Result};
use crate::linalg::CMat;

/// Multiplication by `v` in the Hermite basis.
fn times_v(w: &CMat) -> CMat {
    let nu = w.ncols();
    let mut out = CMat::zeros(w.nrows(), nu);
    for n in 0..nu {
        let mut col = out.column(n).into_owned();
        if n > 0 {
            col += w.column(n - 1) * Complex64::new((n as f64).sqrt(), 0.0);
        }
        if n + 1 < nu {
            col += w.column(n + 1) * Complex64::new(((n + 1) as f64).sqrt(), 0.0);
        }
        out.set_column(n, &col);
    }
    out
}

/// Backward sweep for the Hopf-Cole variable `W = exp(-h~/lambda)`,
/// `lambda = 2 r sigma^2`, where `h~ = h - sqrt(r)(u - xi)^2`. In reversed
/// time `W` solves the linear equation
/// `W_tau = u W_x - (u - xi) W_u / sqrt(r) + (sigma^2/2) W_uu - (A^2 - 2 A (u - xi)) W / lambda`
/// with `A(t, x) = G(<u>) - xi`. `forcing[n]` is `A` at `t_n` on the padded
/// grid; returns `W(t_n)` for `n = 0..=steps`.
pub(crate) fn sweep(model: &KineticModel, forcing: &[Vec<f64>], terminal: &CMat) -> Result<Vec<CMat>> {
    let steps = model.grid.steps();
    if forcing.len() != steps + 1 {
        return Err(Error::InvalidConfig(format!(
            "density trajectory has {} samples, expected {}",
            forcing.len(),
            steps + 1
        )));
    }
    let dt = model.grid.dt;
    let half = model.propagators(|k| model.hjb_linear(k), dt / 2.0);
    let s = model.width;
    let lambda = 2.0 * model.cfg.r * model.cfg.sigma * model.cfg.sigma;
    let fourier = model.fourier();
    let scale = model.norm(terminal).max(1.0);
    let root_nu = (model.grid.nu as f64).sqrt();

    let mut out = vec![model.zeros(); steps + 1];
    out[steps] = terminal.clone();
    let mut w = terminal.clone();
    for m in 0..steps {
        let (hi, lo) = (steps - m, steps - m - 1);
        let mid: Vec<f64> = forcing[hi].iter().zip(&forcing[lo]).map(|(a, b)| 0.5 * (a + b)).collect();
        let amax = forcing[hi].iter().chain(&forcing[lo]).fold(0.0f64, |a, v| a.max(v.abs()));
        let cfl = (amax * amax + 2.0 * s * amax * root_nu) / lambda * dt;
        if cfl > 1.0 {
            return Err(Error::Cfl(cfl));
        }
        w = if_rk4_step(&half, &w, dt, |stage, y| {
            let a = match stage {
                0 => &forcing[hi],
                1 => &mid,
                _ => &forcing[lo],
            };
            let wp = fourier.matrix_to_physical(y);
            let vp = fourier.matrix_to_physical(&times_v(y));
            let prod = DMatrix::from_fn(wp.nrows(), wp.ncols(), |x, n| {
                -(a[x] * a[x] * wp[(x, n)] - 2.0 * s * a[x] * vp[(x, n)]) / lambda
            });
            Ok(fourier.matrix_to_spectral(&prod))
        })?;
        let nrm = model.norm(&w);
        if !nrm.is_finite() || nrm > BLOW_UP_GROWTH * scale {
            return Err(Error::BlowUp { time: lo as f64 * dt, growth: nrm / scale });
        }
        out[lo] = w.clone();
    }
    Ok(out)
}

/// Solve `d_t h = chi - c[rho] - u d_x h + (d_u h)^2/(4r) - (sigma^2/2) d_u^2 h`
/// backward from `h(T) = h_xi + terminal`, with `chi = sigma^2 sqrt(r)` held
/// fixed. `rho_traj` holds the density at every grid time; the result holds
/// the perturbation `h - h_xi` at the same times.
pub fn solve_hjb_backward(model: &KineticModel, rho_traj: &[CMat], terminal: &CMat) -> Result<Vec<CMat>> {
    let forcing: Vec<Vec<f64>> = rho_traj.iter().map(|rho| model.alignment_field(rho)).collect();
    let w_end = model.transform_of_value(terminal);
    let w = sweep(model, &forcing, &w_end)?;
    Ok(w.iter().map(|w| model.value_from_transform(w)).collect())
}
