use kmfg_core::kinetic::{simulate_forward, Grid, KineticModel, Variant};
use kmfg_core::{Complex64, ModelConfig};

fn forward_model(sigma: f64, dt: f64, t: f64) -> KineticModel {
    let cfg = ModelConfig::default().with_sigma(sigma);
    KineticModel::new(&cfg, Grid::new(32, 32, dt, t).unwrap(), Variant::Forward).unwrap()
}

/// A large, asymmetric perturbation touching several modes and velocity
/// moments, so the nonlinearity is exercised.
fn rough_state(m: &KineticModel) -> kmfg_core::linalg::CMat {
    let mut rho = m.perturbed_equilibrium(1, 0.3).unwrap();
    let l = m.cfg.l;
    rho[(2, 0)] += Complex64::new(0.02, -0.01) / l;
    rho[(1, 1)] += Complex64::new(-0.01, 0.015) / l;
    rho[(3, 2)] += Complex64::new(0.005, 0.0) / l;
    rho
}

#[test]
fn mass_is_conserved_in_the_nonlinear_regime() {
    let m = forward_model(0.8, 0.02, 20.0);
    let run = simulate_forward(&m, &rough_state(&m), 50).unwrap();
    assert!(run.mass_drift < 1e-8, "{:e}", run.mass_drift);
}

#[test]
fn shifted_initial_data_gives_shifted_solution() {
    let m = forward_model(0.8, 0.02, 10.0);
    let rho0 = rough_state(&m);
    let dx = 1.2345;
    let a = simulate_forward(&m, &rho0, 100).unwrap();
    let b = simulate_forward(&m, &m.translate(&rho0, dx), 100).unwrap();
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        let diff = m.norm(&(m.translate(&sa.rho, dx) - &sb.rho));
        assert!(diff < 1e-12 * m.norm(&sa.rho), "t={}: {diff:e}", sa.t);
    }
}

#[test]
fn halving_dt_converges_at_least_first_order() {
    let horizon = 2.0;
    let finals: Vec<_> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&dt| {
            let m = forward_model(0.8, dt, horizon);
            simulate_forward(&m, &rough_state(&m), 1000).unwrap().final_state
        })
        .collect();
    let m = forward_model(0.8, 0.1, horizon);
    let e1 = m.norm(&(&finals[0] - &finals[1]));
    let e2 = m.norm(&(&finals[1] - &finals[2]));
    let order = (e1 / e2).log2();
    assert!(order >= 1.0, "observed order {order} ({e1:e}, {e2:e})");
}
