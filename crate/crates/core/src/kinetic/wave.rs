use std::f64::consts::PI;

use serde::Serialize;

use super::{FieldState, KineticModel};
use crate::error::{Error, Result};

/// Mode-1 marginal amplitude below which a state counts as homogeneous.
pub const NO_WAVE_AMPLITUDE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveResult {
    /// Wave speed in position units per unit time.
    pub omega: f64,
    /// Marginal density at the last sample, on the `nx` grid.
    pub profile: Vec<f64>,
    /// `||rho~(t_end) - rho~(t_mid)|| / ||rho~(t_end)||` in the co-moving frame.
    pub residual: f64,
    /// Modulus of the mode-1 marginal coefficient at the last sample.
    pub amplitude: f64,
    /// `(max - min) / mean` of the profile.
    pub nonuniformity: f64,
}

impl WaveResult {
    pub fn accepted(&self) -> bool {
        self.residual < 1e-3
    }
}

/// Fit `rho(t, x, u) = rho~(x - omega t, u)` to a sampled trajectory from
/// the phase of the mode-1 marginal coefficient.
pub fn wave_speed(model: &KineticModel, samples: &[FieldState]) -> Result<WaveResult> {
    if samples.len() < 3 {
        return Err(Error::InvalidConfig(format!("wave fit needs at least 3 samples, got {}", samples.len())));
    }
    let last = samples.last().unwrap();
    let amplitude = last.rho[(1, 0)].norm();
    if !(amplitude >= NO_WAVE_AMPLITUDE) {
        return Err(Error::NoWave(amplitude));
    }

    let mut phases = Vec::with_capacity(samples.len());
    let mut prev = 0.0;
    let mut offset = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let p = s.rho[(1, 0)].arg();
        if i > 0 {
            let d = p - prev;
            if d > PI {
                offset -= 2.0 * PI;
            } else if d < -PI {
                offset += 2.0 * PI;
            }
        }
        prev = p;
        phases.push((s.t, p + offset));
    }
    let n = phases.len() as f64;
    let mt = phases.iter().map(|p| p.0).sum::<f64>() / n;
    let mp = phases.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = phases.iter().map(|p| (p.0 - mt) * (p.1 - mp)).sum();
    let sxx: f64 = phases.iter().map(|p| (p.0 - mt).powi(2)).sum();
    // mode-1 coefficient of f(x - omega t) carries the phase -kappa omega t
    let omega = -(sxy / sxx) / model.kappa(1);

    let mid = &samples[samples.len() / 2];
    let end = model.translate(&last.rho, -omega * last.t);
    let middle = model.translate(&mid.rho, -omega * mid.t);
    let residual = model.norm(&(&end - &middle)) / model.norm(&end);

    let profile = model.marginal(&last.rho);
    let (lo, hi) = profile.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mean = profile.iter().sum::<f64>() / profile.len() as f64;
    Ok(WaveResult { omega, residual, amplitude, nonuniformity: (hi - lo) / mean, profile })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use crate::kinetic::{Grid, Variant};
    use num_complex::Complex64;

    fn model() -> KineticModel {
        KineticModel::new(&ModelConfig::default(), Grid::new(32, 16, 0.1, 1.0).unwrap(), Variant::Forward).unwrap()
    }

    #[test]
    fn homogeneous_trajectory_has_no_wave() {
        let m = model();
        let s: Vec<FieldState> =
            (0..5).map(|i| FieldState { t: i as f64, rho: m.equilibrium(), h: m.zeros() }).collect();
        assert!(matches!(wave_speed(&m, &s), Err(Error::NoWave(_))));
    }

    #[test]
    fn manufactured_wave() {
        let m = model();
        let mut base = m.perturbed_equilibrium(1, 0.3).unwrap();
        base[(2, 0)] = Complex64::new(0.004, 0.002);
        base[(1, 3)] = Complex64::new(-0.001, 0.0005);
        let s: Vec<FieldState> = (0..60)
            .map(|i| {
                let t = 20.0 + i as f64 * 0.25;
                FieldState { t, rho: m.translate(&base, 1.7 * t), h: m.zeros() }
            })
            .collect();
        let w = wave_speed(&m, &s).unwrap();
        assert!((w.omega - 1.7).abs() < 1e-3, "{}", w.omega);
        assert!(w.residual < 1e-12);
        assert!(w.accepted());
        assert!((w.nonuniformity - 0.6).abs() < 0.1);
    }
}
