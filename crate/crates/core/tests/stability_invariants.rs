use kmfg_core::basis::BasisFamily;
use kmfg_core::config::default_quad_nodes;
use kmfg_core::forward::{self, critical_sigma_tol};
use kmfg_core::mfg::{self, critical_r_tol, reflection_defect};
use kmfg_core::{model, ModelConfig};
use proptest::prelude::*;

fn forward_cfg(p: usize) -> ModelConfig {
    ModelConfig::default().with_truncation(p)
}

fn mfg_cfg(p: usize, r: f64) -> ModelConfig {
    ModelConfig::default().with_truncation(p).with_r(r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn forward_basis_is_biorthogonal(sigma in 0.8f64..2.5, k in 1i32..=2) {
        let cfg = forward_cfg(20).with_sigma(sigma);
        let eq = model::forward_equilibrium(&cfg).unwrap();
        let b = BasisFamily::forward(cfg.l, sigma, eq.xi, k, cfg.p);
        let err = b.biorthogonality_error(cfg.quad_nodes);
        prop_assert!(err < 1e-8, "sigma={sigma} k={k}: {err:e}");
    }

    #[test]
    fn mfg_basis_is_biorthogonal(r in 0.5f64..1.5, k in 1i32..=2) {
        let cfg = mfg_cfg(22, r);
        let eq = model::mfg_equilibrium(&cfg).unwrap();
        let b = BasisFamily::mfg(cfg.l, cfg.sigma, r, eq.xi, k, cfg.p);
        let err = b.biorthogonality_error(cfg.quad_nodes);
        prop_assert!(err < 1e-8, "r={r} k={k}: {err:e}");
    }

    #[test]
    fn mfg_spectrum_is_reflection_symmetric(r in 0.5f64..1.0) {
        let cfg = mfg_cfg(22, r);
        let eq = model::mfg_equilibrium(&cfg).unwrap();
        let blocks = mfg::assemble_blocks(&cfg, &eq, 1).unwrap();
        let vals = blocks.eigenvalues_n().unwrap();
        prop_assert!(reflection_defect(&vals) < 1e-7);
        prop_assert!(blocks.hamiltonian_defect() < 1e-8 * (1.0 + kmfg_core::linalg::max_abs(&blocks.n_s)));
    }

    #[test]
    fn forward_eigenvalues_solve_the_characteristic_equation(sigma in 0.8f64..2.5) {
        let cfg = forward_cfg(20).with_sigma(sigma);
        let eq = model::forward_equilibrium(&cfg).unwrap();
        let op = forward::assemble_forward_operator(&cfg, &eq, 1).unwrap();
        let spec = forward::operator_spectrum(&op).unwrap();
        let chk = forward::check_characteristic(&op, &spec, 1e-6);
        prop_assert!(chk.max_residual < 1e-5, "{chk:?}");
    }
}

#[test]
fn critical_noise_is_robust_to_truncation() {
    let a = critical_sigma_tol(&forward_cfg(20), 1, 1.0, 2.5, 1e-6).unwrap().sigma_c;
    let b = critical_sigma_tol(&forward_cfg(28), 1, 1.0, 2.5, 1e-6).unwrap().sigma_c;
    assert!((a - b).abs() < 1e-3, "{a} vs {b}");
}

#[test]
fn critical_cost_is_robust_to_truncation() {
    let a = critical_r_tol(&mfg_cfg(22, 1.0), 1, 0.5, 1.4, 1e-6).unwrap().r_c;
    let b = critical_r_tol(&mfg_cfg(30, 1.0), 1, 0.5, 1.4, 1e-6).unwrap().r_c;
    assert!((a - b).abs() < 1e-3, "{a} vs {b}");
}

#[test]
fn default_quadrature_grows_with_truncation() {
    assert_eq!(default_quad_nodes(10), 80);
    assert_eq!(default_quad_nodes(30), 120);
}
