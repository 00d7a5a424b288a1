use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::forward::if_rk4_step;
use super::hjb::sweep;
use super::{wave_speed, FieldState, KineticModel, Variant, WaveResult, BLOW_UP_GROWTH};
use crate::error::{Error, Result};
use crate::linalg::CMat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PicardOptions {
    /// Relaxation factor on the value (control) field, `0 < damping <= 1`.
    pub damping: f64,
    pub max_iters: usize,
    /// Stop when the time-integrated distance between the transform and its
    /// image under one forward-backward sweep falls below this.
    pub tol: f64,
    /// Snapshot stride in time steps.
    pub record_every: usize,
    /// Inhomogeneity, relative to the equilibrium norm, below which the
    /// ergodic slice counts as homogeneous.
    pub homogeneous_tol: f64,
    /// Number of previous iterates used by Anderson mixing; 0 gives plain
    /// damped Picard.
    pub anderson_depth: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { damping: 0.5, max_iters: 500, tol: 1e-6, record_every: 10, homogeneous_tol: 1e-3, anderson_depth: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PicardOutcome {
    TravellingWave(WaveResult),
    Homogeneous { mean_velocity: f64, inhomogeneity: f64 },
    Undetermined { reason: String },
}

#[derive(Debug, Clone)]
pub struct PicardResult {
    pub iterations: usize,
    /// Fixed-point residual per iteration.
    pub residual_history: Vec<f64>,
    pub final_damping: f64,
    /// `(t, ||rho - rho_xi||, ||h~||)` at every grid time of the last iterate.
    pub norms: Vec<(f64, f64, f64)>,
    pub snapshots: Vec<FieldState>,
    /// Middle half of the horizon.
    pub ergodic_window: (f64, f64),
    pub outcome: PicardOutcome,
    pub mass_drift: f64,
}

impl PicardResult {
    pub fn ergodic_snapshots(&self) -> &[FieldState] {
        let (a, b) = self.ergodic_window;
        let lo = self.snapshots.iter().position(|s| s.t >= a - 1e-12).unwrap_or(0);
        let hi = self.snapshots.iter().rposition(|s| s.t <= b + 1e-12).unwrap_or(self.snapshots.len() - 1);
        &self.snapshots[lo..=hi]
    }
}

/// Density trajectory under the control encoded by Hopf-Cole coefficients.
fn controlled_density(model: &KineticModel, rho0: &CMat, values: &[CMat], half: &[CMat]) -> Result<Vec<CMat>> {
    let dt = model.grid.dt;
    let norm0 = model.norm(rho0);
    let mut out = Vec::with_capacity(values.len());
    out.push(rho0.clone());
    let mut y = rho0.clone();
    let mut ctrl_lo = model.control_from_transform(&values[0]);
    for n in 0..values.len() - 1 {
        let ctrl_hi = model.control_from_transform(&values[n + 1]);
        let ctrl_mid: DMatrix<f64> = (&ctrl_lo + &ctrl_hi) * 0.5;
        let mut cfl = 0.0f64;
        y = if_rk4_step(half, &y, dt, |stage, s| {
            let g = match stage {
                0 => &ctrl_lo,
                1 => &ctrl_mid,
                _ => &ctrl_hi,
            };
            cfl = cfl.max(model.explicit_rate(model.control_speed(g)) * dt);
            Ok(model.control_term(s, g))
        })?;
        if cfl > 1.0 {
            return Err(Error::Cfl(cfl));
        }
        let nrm = model.norm(&y);
        if !nrm.is_finite() || nrm > BLOW_UP_GROWTH * norm0 {
            return Err(Error::BlowUp { time: (n + 1) as f64 * dt, growth: nrm / norm0 });
        }
        out.push(y.clone());
        ctrl_lo = ctrl_hi;
    }
    Ok(out)
}

/// Real part of the time-integrated inner product matching `KineticModel::norm`.
fn trajectory_dot(model: &KineticModel, a: &[CMat], b: &[CMat]) -> f64 {
    let l = model.cfg.l;
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        for k in 0..x.nrows() {
            let c = if k == 0 { 1.0 } else { 2.0 };
            let row: f64 = x.row(k).iter().zip(y.row(k).iter()).map(|(p, q)| (p * q.conj()).re).sum();
            total += c * row;
        }
    }
    total * l * model.grid.dt
}

fn trajectory_norm(model: &KineticModel, a: &[CMat]) -> f64 {
    trajectory_dot(model, a, a).sqrt()
}

fn axpy(y: &mut [CMat], alpha: f64, x: &[CMat]) {
    let a = Complex64::new(alpha, 0.0);
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi * a;
    }
}

fn difference(a: &[CMat], b: &[CMat]) -> Vec<CMat> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Anderson mixing on trajectories with real coefficients, which keeps the
/// zero mode real.
struct Anderson {
    depth: usize,
    dx: VecDeque<Vec<CMat>>,
    df: VecDeque<Vec<CMat>>,
    last: Option<(Vec<CMat>, Vec<CMat>)>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Self { depth, dx: VecDeque::new(), df: VecDeque::new(), last: None }
    }

    fn reset(&mut self) {
        self.dx.clear();
        self.df.clear();
        self.last = None;
    }

    /// Next iterate from `x` and its residual `f = G(x) - x`.
    fn step(&mut self, model: &KineticModel, x: Vec<CMat>, f: Vec<CMat>, theta: f64) -> Vec<CMat> {
        if self.depth > 0 {
            if let Some((px, pf)) = self.last.take() {
                if self.dx.len() == self.depth {
                    self.dx.pop_front();
                    self.df.pop_front();
                }
                self.dx.push_back(difference(&x, &px));
                self.df.push_back(difference(&f, &pf));
            }
        }
        let mut next = x.clone();
        axpy(&mut next, theta, &f);
        let m = self.df.len();
        if m > 0 {
            let gram = DMatrix::from_fn(m, m, |i, j| trajectory_dot(model, &self.df[i], &self.df[j]));
            let rhs = DVector::from_fn(m, |i, _| trajectory_dot(model, &self.df[i], &f));
            let ridge = 1e-12 * gram.trace().max(f64::MIN_POSITIVE);
            let gamma = (gram + DMatrix::identity(m, m) * ridge).svd(true, true).solve(&rhs, 1e-14);
            if let Ok(gamma) = gamma {
                for (i, g) in gamma.iter().enumerate() {
                    axpy(&mut next, -g, &self.dx[i]);
                    axpy(&mut next, -g * theta, &self.df[i]);
                }
            }
        }
        if self.depth > 0 {
            self.last = Some((x, f));
        }
        next
    }
}

/// Fixed-point iteration for the finite-horizon forward-backward system
/// with `h(T) = h_xi`. Starts from the equilibrium control; damping and
/// Anderson mixing act on the Hopf-Cole transform of the value perturbation.
pub fn picard_solve(model: &KineticModel, rho0: &CMat, opts: &PicardOptions) -> Result<PicardResult> {
    if model.variant != Variant::Mfg {
        return Err(Error::InvalidConfig("Picard iteration needs the mean-field game variant".into()));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidConfig(format!("damping must lie in (0, 1], got {}", opts.damping)));
    }
    if opts.max_iters == 0 {
        return Err(Error::InvalidConfig("max_iters must be positive".into()));
    }
    if rho0.shape() != (model.kmax() + 1, model.grid.nu) {
        return Err(Error::InvalidConfig(format!("initial state has shape {:?}", rho0.shape())));
    }
    let steps = model.grid.steps();
    let dt = model.grid.dt;
    let half = model.propagators(|k| model.fp_linear(k, model.gamma), dt / 2.0);

    let mut values = vec![model.transform_identity(); steps + 1];
    let mut density = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut theta = opts.damping;
    let mut mixer = Anderson::new(opts.anderson_depth);
    let mut converged = None;
    for it in 1..=opts.max_iters {
        density = controlled_density(model, rho0, &values, &half)?;
        let forcing: Vec<Vec<f64>> = density.iter().map(|rho| model.alignment_field(rho)).collect();
        let target = sweep(model, &forcing, &model.transform_identity())?;
        let f = difference(&target, &values);
        let res = trajectory_norm(model, &f);
        if history.last().is_some_and(|&last| res > last) {
            if opts.anderson_depth == 0 {
                theta *= 0.5;
            } else if history.iter().fold(f64::INFINITY, |m, &r| m.min(r)) * 10.0 < res {
                // mixing has wandered off: restart from plain damping
                mixer.reset();
            }
        }
        history.push(res);
        if res < opts.tol {
            converged = Some(it);
            break;
        }
        values = mixer.step(model, values, f, theta);
    }
    let Some(iterations) = converged else {
        return Err(Error::NoConvergence { iterations: opts.max_iters, residual: *history.last().unwrap(), history });
    };

    let eq = model.equilibrium();
    let mass0 = model.mass(rho0);
    let stride = opts.record_every.max(1);
    let mut result = PicardResult {
        iterations,
        residual_history: history,
        final_damping: theta,
        norms: Vec::with_capacity(steps + 1),
        snapshots: Vec::new(),
        ergodic_window: (0.25 * model.grid.t_final, 0.75 * model.grid.t_final),
        outcome: PicardOutcome::Undetermined { reason: String::new() },
        mass_drift: 0.0,
    };
    for (n, (rho, w)) in density.iter().zip(&values).enumerate() {
        let t = n as f64 * dt;
        let h = model.value_from_transform(w);
        result.norms.push((t, model.norm(&(rho - &eq)), model.norm(&h)));
        result.mass_drift = result.mass_drift.max((model.mass(rho) - mass0).abs());
        if n % stride == 0 || n == steps {
            result.snapshots.push(FieldState { t, rho: rho.clone(), h });
        }
    }
    result.outcome = classify(model, result.ergodic_snapshots(), opts.homogeneous_tol);
    Ok(result)
}

fn classify(model: &KineticModel, slice: &[FieldState], homogeneous_tol: f64) -> PicardOutcome {
    let scale = model.norm(&model.equilibrium());
    let inhom = slice.iter().fold(0.0f64, |m, s| m.max(model.inhomogeneity(&s.rho))) / scale;
    if inhom < homogeneous_tol {
        let last = &slice[slice.len() - 1].rho;
        return PicardOutcome::Homogeneous { mean_velocity: model.mean_velocity(last), inhomogeneity: inhom };
    }
    match wave_speed(model, slice) {
        Ok(w) if w.accepted() => PicardOutcome::TravellingWave(w),
        Ok(w) => PicardOutcome::Undetermined {
            reason: format!("co-moving residual {:.3e} too large for a travelling wave", w.residual),
        },
        Err(e) => PicardOutcome::Undetermined { reason: e.to_string() },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use crate::kinetic::Grid;

    #[test]
    fn stationary_pair_is_a_fixed_point() {
        let cfg = ModelConfig::default().with_r(1.4);
        let m = KineticModel::new(&cfg, Grid::new(16, 16, 0.05, 5.0).unwrap(), Variant::Mfg).unwrap();
        let res = picard_solve(&m, &m.equilibrium(), &PicardOptions::default()).unwrap();
        assert_eq!(res.iterations, 1);
        assert!(res.residual_history[0] < 1e-6);
        assert!(matches!(res.outcome, PicardOutcome::Homogeneous { .. }));
    }

    #[test]
    fn rejects_bad_options() {
        let cfg = ModelConfig::default();
        let g = Grid::new(16, 16, 0.05, 1.0).unwrap();
        let m = KineticModel::new(&cfg, g, Variant::Mfg).unwrap();
        let bad = PicardOptions { damping: 0.0, ..Default::default() };
        assert!(picard_solve(&m, &m.equilibrium(), &bad).is_err());
        let f = KineticModel::new(&cfg, g, Variant::Forward).unwrap();
        assert!(picard_solve(&f, &f.equilibrium(), &PicardOptions::default()).is_err());
    }
}
