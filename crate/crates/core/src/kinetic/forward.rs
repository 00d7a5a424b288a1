use num_complex::Complex64;

use super::{apply_rows, wave_speed, FieldState, KineticModel, WaveResult, BLOW_UP_GROWTH};
use crate::error::{Error, Result};
use crate::linalg::CMat;

/// Output of a forward kinetic run.
#[derive(Debug, Clone)]
pub struct ForwardRun {
    /// `(t, ||rho - rho_xi||, ||mode 1||)` after every step.
    pub norms: Vec<(f64, f64, f64)>,
    /// States every `record_every` steps, including both endpoints.
    pub snapshots: Vec<FieldState>,
    pub final_state: CMat,
    /// `max_t |mass(t) - mass(0)|`.
    pub mass_drift: f64,
    /// Largest explicit rate times `dt` seen by the step controller.
    pub max_cfl: f64,
}

impl ForwardRun {
    /// Wave fit on the last third of the recorded snapshots.
    pub fn wave(&self, model: &KineticModel) -> Result<WaveResult> {
        let start = self.snapshots.len() - self.snapshots.len() / 3 - 1;
        wave_speed(model, &self.snapshots[start..])
    }
}

/// Integrating-factor RK4 for `y' = L y + N(t, y)` with `half = exp(L h / 2)`.
pub(crate) fn if_rk4_step(
    half: &[CMat],
    y: &CMat,
    h: f64,
    mut nonlinear: impl FnMut(usize, &CMat) -> Result<CMat>,
) -> Result<CMat> {
    let c = |x: f64| Complex64::new(x, 0.0);
    let k1 = nonlinear(0, y)?;
    let ey = apply_rows(half, y);
    let k2 = nonlinear(1, &apply_rows(half, &(y + &k1 * c(h / 2.0))))?;
    let k3 = nonlinear(1, &(&ey + &k2 * c(h / 2.0)))?;
    let k4 = nonlinear(2, &apply_rows(half, &(&ey + &k3 * c(h))))?;
    let inner = apply_rows(half, &(y + &k1 * c(h / 6.0))) + (k2 + k3) * c(h / 3.0);
    Ok(apply_rows(half, &inner) + k4 * c(h / 6.0))
}

/// Integrate the nonlinear alignment model from `rho0` over the grid horizon.
pub fn simulate_forward(model: &KineticModel, rho0: &CMat, record_every: usize) -> Result<ForwardRun> {
    if rho0.shape() != (model.kmax() + 1, model.grid.nu) {
        return Err(Error::InvalidConfig(format!(
            "initial state has shape {:?}, expected {:?}",
            rho0.shape(),
            (model.kmax() + 1, model.grid.nu)
        )));
    }
    let record_every = record_every.max(1);
    let dt = model.grid.dt;
    let steps = model.grid.steps();
    let half = model.propagators(|k| model.fp_linear(k, 1.0), dt / 2.0);
    let eq = model.equilibrium();
    let mass0 = model.mass(rho0);
    let norm0 = model.norm(rho0);

    let measure = |t: f64, y: &CMat| (t, model.norm(&(y - &eq)), y.row(1).norm());
    let mut run = ForwardRun {
        norms: vec![measure(0.0, rho0)],
        snapshots: vec![FieldState { t: 0.0, rho: rho0.clone(), h: model.zeros() }],
        final_state: rho0.clone(),
        mass_drift: 0.0,
        max_cfl: 0.0,
    };
    let mut y = rho0.clone();
    for step in 1..=steps {
        let t = step as f64 * dt;
        let mut cfl = 0.0f64;
        y = if_rk4_step(&half, &y, dt, |_, s| {
            let a = model.alignment_field(s);
            let amax = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            cfl = cfl.max(model.explicit_rate(amax) * dt);
            Ok(model.forcing_term(s, &a))
        })?;
        run.max_cfl = run.max_cfl.max(cfl);
        if cfl > 1.0 {
            return Err(Error::Cfl(cfl));
        }
        let nrm = model.norm(&y);
        if !nrm.is_finite() || nrm > BLOW_UP_GROWTH * norm0 {
            return Err(Error::BlowUp { time: t, growth: nrm / norm0 });
        }
        run.mass_drift = run.mass_drift.max((model.mass(&y) - mass0).abs());
        run.norms.push(measure(t, &y));
        if step % record_every == 0 || step == steps {
            run.snapshots.push(FieldState { t, rho: y.clone(), h: model.zeros() });
        }
    }
    run.final_state = y;
    Ok(run)
}

/// Least-squares slope of `ln(value)` against `t` over `[t0, t1]`.
pub fn growth_rate(samples: &[(f64, f64)], t0: f64, t1: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        samples.iter().filter(|(t, v)| *t >= t0 && *t <= t1 && *v > 0.0).map(|&(t, v)| (t, v.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Some(sxy / sxx)
}
