use std::path::{Path, PathBuf};

use kmfg_core::forward::{self, check_characteristic, critical_sigma_tol};
use kmfg_core::kinetic::{
    growth_rate, picard_solve, simulate_forward, FieldState, Grid, KineticModel, PicardOptions, PicardOutcome, Variant,
};
use kmfg_core::mfg::{self, bvp_solve, Verdict};
use kmfg_core::{linalg, model, Complex64, Error, ModelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    BvpArgs, Command, Common, GridArgs, PicardArgs, RcArgs, RcSweepArgs, SigmaCArgs, SimulateArgs, SpectrumArgs,
};
use crate::report::{Artifacts, Csv, Failure};

/// Eigenvalues closer than this to a pole of the local operator are not
/// checked against the characteristic function.
pub const POLE_DISTANCE: f64 = 1e-6;

/// The growth-rate fit stops once `||rho - rho_xi||` exceeds this fraction
/// of `||rho_xi||`.
pub const LINEAR_REGIME: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct GridSpec {
    pub nx: usize,
    pub nu: usize,
    pub dt: f64,
    pub t_final: f64,
    pub record_every: usize,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum JobKind {
    ForwardSpectrum { model: ModelConfig, k: Vec<i32> },
    ForwardSigmaC { model: ModelConfig, k: i32, sigma_lo: f64, sigma_hi: f64, tol: f64 },
    ForwardSimulate { model: ModelConfig, grid: GridSpec, k: usize, eps: f64, fit_start: f64, fit_end: f64 },
    MfgSpectrum { model: ModelConfig, k: Vec<i32> },
    MfgRc { model: ModelConfig, k: i32, r_lo: f64, r_hi: f64, tol: f64 },
    MfgRcSweep { model: ModelConfig, k: i32, sigmas: Vec<f64>, r_lo: f64, r_hi: f64 },
    MfgBvp { model: ModelConfig, k: i32, t_final: Option<f64>, samples: usize, seed: u64 },
    MfgPicard { model: ModelConfig, grid: GridSpec, k: usize, eps: f64, options: PicardOptions },
}

#[derive(Debug, Clone)]
pub struct Job {
    pub out_flag: Option<PathBuf>,
    pub kind: JobKind,
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T, String> {
    v.ok_or_else(|| format!("missing required flag --{flag}"))
}

fn model_config(c: &Common) -> Result<ModelConfig, String> {
    let mut cfg = ModelConfig::default();
    if let Some(p) = c.p {
        cfg = cfg.with_truncation(p);
    }
    cfg.l = c.l.unwrap_or(cfg.l);
    cfg.h = c.h.unwrap_or(cfg.h);
    cfg.sigma = c.sigma.unwrap_or(cfg.sigma);
    cfg.r = c.r.unwrap_or(cfg.r);
    cfg.quad_nodes = c.quad_nodes.unwrap_or(cfg.quad_nodes);
    if let Some(b) = c.branch {
        cfg.branch = b.into();
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn grid_spec(g: &GridArgs, dt: f64, t_final: f64, record_every: usize) -> Result<GridSpec, String> {
    let spec = GridSpec {
        nx: g.nx.unwrap_or(64),
        nu: g.nu.unwrap_or(48),
        dt: g.dt.unwrap_or(dt),
        t_final: g.t_final.unwrap_or(t_final),
        record_every: g.record_every.unwrap_or(record_every),
    };
    if spec.record_every == 0 {
        return Err("record-every must be positive".into());
    }
    // same checks the solver applies, done before anything runs
    let grid = Grid::new(spec.nx, spec.nu, spec.dt, spec.t_final).map_err(|e| e.to_string())?;
    Ok(GridSpec { dt: grid.dt, ..spec })
}

fn bracket(lo: f64, hi: f64, what: &str) -> Result<(), String> {
    if lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo {
        Ok(())
    } else {
        Err(format!("{what} bracket must satisfy 0 < lo < hi, got [{lo}, {hi}]"))
    }
}

fn positive(v: f64, what: &str) -> Result<f64, String> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{what} must be positive, got {v}"))
    }
}

fn check_k(ks: &[i32], cfg: &ModelConfig) -> Result<(), String> {
    match ks.iter().find(|&&k| k <= 0 || k > cfg.k_max) {
        Some(k) => Err(format!("mode k = {k} outside 1..={}", cfg.k_max)),
        None => Ok(()),
    }
}

fn mode(k: usize, grid: &GridSpec) -> Result<usize, String> {
    if k == 0 || k > grid.nx / 3 {
        return Err(format!("perturbed mode k = {k} outside 1..={}", grid.nx / 3));
    }
    Ok(k)
}

pub fn resolve(cmd: Command) -> Result<Job, String> {
    let (out_flag, kind) = match cmd {
        Command::ForwardSpectrum(SpectrumArgs { common, k }) => {
            let model = model_config(&common)?;
            let k = required(k, "k")?;
            check_k(&k, &model)?;
            (common.out, JobKind::ForwardSpectrum { model, k })
        }
        Command::MfgSpectrum(SpectrumArgs { common, k }) => {
            let model = model_config(&common)?;
            let k = required(k, "k")?;
            check_k(&k, &model)?;
            (common.out, JobKind::MfgSpectrum { model, k })
        }
        Command::ForwardSigmaC(SigmaCArgs { common, k, sigma_lo, sigma_hi, tol }) => {
            let model = model_config(&common)?;
            let k = required(k, "k")?;
            check_k(&[k], &model)?;
            let (lo, hi) = (sigma_lo.unwrap_or(1.0), sigma_hi.unwrap_or(2.5));
            bracket(lo, hi, "sigma")?;
            let tol = positive(tol.unwrap_or(1e-3), "tol")?;
            (common.out, JobKind::ForwardSigmaC { model, k, sigma_lo: lo, sigma_hi: hi, tol })
        }
        Command::MfgRc(RcArgs { common, k, r_lo, r_hi, tol }) => {
            let model = model_config(&common)?;
            let k = required(k, "k")?;
            check_k(&[k], &model)?;
            let (lo, hi) = (r_lo.unwrap_or(0.5), r_hi.unwrap_or(1.4));
            bracket(lo, hi, "r")?;
            let tol = positive(tol.unwrap_or(1e-3), "tol")?;
            (common.out, JobKind::MfgRc { model, k, r_lo: lo, r_hi: hi, tol })
        }
        Command::MfgRcSweep(RcSweepArgs { common, sigmas, k, r_lo, r_hi }) => {
            let model = model_config(&common)?;
            let k = required(k, "k")?;
            check_k(&[k], &model)?;
            let sigmas = sigmas.unwrap_or_else(|| vec![1.5, 2.0, 2.5]);
            for &s in &sigmas {
                positive(s, "sigma")?;
            }
            let (lo, hi) = (r_lo.unwrap_or(0.3), r_hi.unwrap_or(2.5));
            bracket(lo, hi, "r")?;
            (common.out, JobKind::MfgRcSweep { model, k, sigmas, r_lo: lo, r_hi: hi })
        }
        Command::MfgBvp(BvpArgs { common, k, t_final, samples, seed }) => {
            let model = model_config(&common)?;
            let k = required(k, "k")?;
            check_k(&[k], &model)?;
            if let Some(t) = t_final {
                positive(t, "t-final")?;
            }
            let samples = samples.unwrap_or(201);
            if samples < 2 {
                return Err(format!("samples must be at least 2, got {samples}"));
            }
            (common.out, JobKind::MfgBvp { model, k, t_final, samples, seed: seed.unwrap_or(0) })
        }
        Command::ForwardSimulate(SimulateArgs { common, grid, k, eps, fit_start, fit_end }) => {
            let model = model_config(&common)?;
            let grid = grid_spec(&grid, 0.02, 100.0, 25)?;
            let k = mode(k.unwrap_or(1), &grid)?;
            let eps = positive(eps.unwrap_or(1e-6), "eps")?;
            let (fit_start, fit_end) = (fit_start.unwrap_or(5.0), fit_end.unwrap_or(30.0));
            if !(fit_start >= 0.0 && fit_end > fit_start) {
                return Err(format!("fit window [{fit_start}, {fit_end}] is empty"));
            }
            (common.out, JobKind::ForwardSimulate { model, grid, k, eps, fit_start, fit_end })
        }
        Command::MfgPicard(PicardArgs { common, grid, k, eps, damping, max_iters, tol, anderson_depth }) => {
            let model = model_config(&common)?;
            let horizon = 40.0 * model.r.sqrt();
            let grid = grid_spec(&grid, 0.05, horizon, 10)?;
            let k = mode(k.unwrap_or(1), &grid)?;
            let eps = positive(eps.unwrap_or(0.05), "eps")?;
            let defaults = PicardOptions::default();
            let options = PicardOptions {
                damping: damping.unwrap_or(defaults.damping),
                max_iters: max_iters.unwrap_or(defaults.max_iters),
                tol: positive(tol.unwrap_or(defaults.tol), "tol")?,
                record_every: grid.record_every,
                anderson_depth: anderson_depth.unwrap_or(defaults.anderson_depth),
                ..defaults
            };
            if !(options.damping > 0.0 && options.damping <= 1.0) {
                return Err(format!("damping must lie in (0, 1], got {}", options.damping));
            }
            if options.max_iters == 0 {
                return Err("max-iters must be positive".into());
            }
            (common.out, JobKind::MfgPicard { model, grid, k, eps, options })
        }
    };
    Ok(Job { out_flag, kind })
}

impl Job {
    /// The fully resolved configuration embedded in every report.
    pub fn config_json(&self, out_dir: &Path) -> Value {
        let mut v = serde_json::to_value(&self.kind).expect("config serializes");
        v["out_dir"] = json!(out_dir.display().to_string());
        v
    }

    pub fn execute(&self) -> Result<Artifacts, Failure> {
        match &self.kind {
            JobKind::ForwardSpectrum { model, k } => forward_spectrum(model, k),
            JobKind::ForwardSigmaC { model, k, sigma_lo, sigma_hi, tol } => {
                forward_sigma_c(model, *k, *sigma_lo, *sigma_hi, *tol)
            }
            JobKind::ForwardSimulate { model, grid, k, eps, fit_start, fit_end } => {
                forward_simulate(model, grid, *k, *eps, (*fit_start, *fit_end))
            }
            JobKind::MfgSpectrum { model, k } => mfg_spectrum(model, k),
            JobKind::MfgRc { model, k, r_lo, r_hi, tol } => mfg_rc(model, *k, *r_lo, *r_hi, *tol),
            JobKind::MfgRcSweep { model, k, sigmas, r_lo, r_hi } => mfg_rc_sweep(model, *k, sigmas, *r_lo, *r_hi),
            JobKind::MfgBvp { model, k, t_final, samples, seed } => mfg_bvp(model, *k, *t_final, *samples, *seed),
            JobKind::MfgPicard { model, grid, k, eps, options } => mfg_picard(model, grid, *k, *eps, options),
        }
    }
}

fn forward_mode_report(cfg: &ModelConfig, k: i32) -> Result<(Value, Vec<Complex64>), Error> {
    let eq = model::forward_equilibrium(cfg)?;
    let op = forward::assemble_forward_operator(cfg, &eq, k)?;
    let spec = forward::operator_spectrum(&op)?;
    let check = check_characteristic(&op, &spec, POLE_DISTANCE);
    let v = json!({
        "k": k,
        "leading": spec.leading,
        "stable": spec.stable,
        "eigenvalue_count": spec.eigenvalues.len(),
        "characteristic_residual": check,
    });
    Ok((v, spec.eigenvalues))
}

fn forward_spectrum(cfg: &ModelConfig, ks: &[i32]) -> Result<Artifacts, Failure> {
    let eq = model::forward_equilibrium(cfg)?;
    let mut modes = Vec::new();
    let mut spectra = Vec::new();
    for &k in ks {
        let (v, vals) = forward_mode_report(cfg, k)?;
        modes.push(v);
        spectra.push((k, vals));
    }
    Ok(Artifacts {
        result: json!({ "equilibrium": eq, "modes": modes }),
        csv: vec![Csv::spectrum(spectra.iter().map(|(k, v)| (*k, v.as_slice())))],
    })
}

fn forward_sigma_c(cfg: &ModelConfig, k: i32, lo: f64, hi: f64, tol: f64) -> Result<Artifacts, Failure> {
    let crit = critical_sigma_tol(cfg, k, lo, hi, tol)?;
    let at = cfg.clone().with_sigma(crit.sigma_c);
    let (mode, vals) = forward_mode_report(&at, k)?;
    Ok(Artifacts {
        result: json!({ "critical": crit, "spectrum_at_critical": mode }),
        csv: vec![Csv::spectrum([(k, vals.as_slice())])],
    })
}

fn marginal_rows(km: &KineticModel, snaps: &[FieldState]) -> Vec<(f64, f64, f64)> {
    let dx = km.cfg.l / km.grid.nx as f64;
    snaps
        .iter()
        .flat_map(|s| km.marginal(&s.rho).into_iter().enumerate().map(move |(i, v)| (s.t, i as f64 * dx, v)))
        .collect()
}

fn kinetic_model(cfg: &ModelConfig, g: &GridSpec, variant: Variant) -> Result<KineticModel, Failure> {
    let grid = Grid::new(g.nx, g.nu, g.dt, g.t_final)?;
    Ok(KineticModel::new(cfg, grid, variant)?)
}

fn forward_simulate(
    cfg: &ModelConfig,
    g: &GridSpec,
    k: usize,
    eps: f64,
    fit: (f64, f64),
) -> Result<Artifacts, Failure> {
    let km = kinetic_model(cfg, g, Variant::Forward)?;
    let rho0 = km.perturbed_equilibrium(k, eps)?;
    let run = simulate_forward(&km, &rho0, g.record_every)?;

    let scale = km.norm(&km.equilibrium());
    let linear_end =
        run.norms.iter().find(|s| s.0 >= fit.0 && s.1 > LINEAR_REGIME * scale).map_or(fit.1, |s| s.0.min(fit.1));
    let samples: Vec<(f64, f64)> = run.norms.iter().map(|s| (s.0, s.1)).collect();
    let rate = growth_rate(&samples, fit.0, linear_end);
    let predicted = forward::spectrum_at_sigma(cfg, k as i32, cfg.sigma).map(|s| s.leading);
    let linear = json!({
        "fit_window": [fit.0, linear_end],
        "growth_rate": rate,
        "predicted": predicted.as_ref().ok(),
        "relative_error": match (&rate, &predicted) {
            (Some(g), Ok(p)) => Some(((g - p.re) / p.re).abs()),
            _ => None,
        },
    });
    let wave = match run.wave(&km) {
        Ok(w) => json!({ "accepted": w.accepted(), "fit": w }),
        Err(e) => json!({ "accepted": false, "reason": e.to_string() }),
    };
    Ok(Artifacts {
        result: json!({
            "mass_drift": run.mass_drift,
            "max_cfl": run.max_cfl,
            "final_norm": run.norms.last().map(|s| s.1),
            "linear_regime": linear,
            "wave": wave,
        }),
        csv: vec![Csv::trajectory(run.norms.iter().copied()), Csv::marginals(marginal_rows(&km, &run.snapshots))],
    })
}

fn riccati_json(sol: &mfg::RiccatiSolution, blocks: &mfg::LinearizedBlocks) -> Value {
    json!({
        "care_residual": sol.care_residual,
        "hermitian_deviation": sol.hermitian_deviation,
        "similarity_error": sol.similarity_error,
        "max_re_closed_loop": sol.max_re_closed_loop,
        "cond_init": sol.cond_init,
        "off_block_defect": sol.off_block_defect(blocks).ok(),
    })
}

fn mfg_spectrum(cfg: &ModelConfig, ks: &[i32]) -> Result<Artifacts, Failure> {
    let eq = model::mfg_equilibrium(cfg)?;
    let mut modes = Vec::new();
    let mut spectra = Vec::new();
    for &k in ks {
        let blocks = mfg::assemble_blocks(cfg, &eq, k)?;
        let spec = mfg::blocks_spectrum(&blocks)?;
        let (verdict, sol) = mfg::classify(&blocks)?;
        let check = mfg::check_characteristic(&blocks, &spec.eigenvalues, POLE_DISTANCE);
        modes.push(json!({
            "k": k,
            "verdict": verdict,
            "leading": spec.leading,
            "axis_tolerance": mfg::axis_tolerance(&spec.eigenvalues),
            "reflection_defect": mfg::reflection_defect(&spec.eigenvalues),
            "hamiltonian_defect": blocks.hamiltonian_defect(),
            "b1_mismatch": blocks.b1_mismatch,
            "characteristic_residual": check,
            "riccati": sol.as_ref().map(|s| riccati_json(s, &blocks)),
        }));
        spectra.push((k, spec.eigenvalues));
    }
    Ok(Artifacts {
        result: json!({ "equilibrium": eq, "modes": modes }),
        csv: vec![Csv::spectrum(spectra.iter().map(|(k, v)| (*k, v.as_slice())))],
    })
}

fn mfg_rc(cfg: &ModelConfig, k: i32, lo: f64, hi: f64, tol: f64) -> Result<Artifacts, Failure> {
    let crit = mfg::critical_r_tol(cfg, k, lo, hi, tol)?;
    let at = cfg.clone().with_r(crit.r_c);
    let eq = model::mfg_equilibrium(&at)?;
    let vals = mfg::mfg_spectrum(&at, &eq, k)?.eigenvalues;
    Ok(Artifacts {
        result: json!({
            "critical": crit,
            "at_critical": {
                "reflection_defect": mfg::reflection_defect(&vals),
                "axis_tolerance": mfg::axis_tolerance(&vals),
            },
        }),
        csv: vec![Csv::spectrum([(k, vals.as_slice())])],
    })
}

fn mfg_rc_sweep(cfg: &ModelConfig, k: i32, sigmas: &[f64], lo: f64, hi: f64) -> Result<Artifacts, Failure> {
    let sweep = mfg::rc_sweep(cfg, sigmas, k, lo, hi);
    let rows: Vec<(f64, Option<f64>)> = sweep.points.iter().map(|p| (p.sigma, p.r_c)).collect();
    let failed = sweep.points.iter().find_map(|p| p.error.clone());
    let a = Artifacts { result: json!(sweep), csv: vec![Csv::new("rc", &["sigma", "r_c"], rows)] };
    match failed {
        None => Ok(a),
        Some(msg) => Err(Failure::Numerical { error: Error::Eigensolver(msg), partial: Some(Box::new(a)) }),
    }
}

/// Unit-box random complex coefficients from a seeded ChaCha stream.
pub fn random_coefficients(n: usize, seed: u64) -> linalg::CVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    linalg::CVec::from_fn(n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn mfg_bvp(cfg: &ModelConfig, k: i32, t_final: Option<f64>, samples: usize, seed: u64) -> Result<Artifacts, Failure> {
    let eq = model::mfg_equilibrium(cfg)?;
    let blocks = mfg::assemble_blocks(cfg, &eq, k)?;
    let (verdict, sol) = mfg::classify(&blocks)?;
    let sol = match (&verdict, sol) {
        (Verdict::Stable { .. }, Some(sol)) => sol,
        (Verdict::OnAxis { count, tolerance }, _) => {
            return Err(Error::OnAxisEigenvalue { count: *count, tolerance: *tolerance }.into())
        }
        (Verdict::NotInvertible { cond_init }, _) => {
            return Err(Error::NearSingular { what: "P11 + P12 X_+", condition: *cond_init }.into())
        }
        (v, _) => return Err(Error::Eigensolver(format!("no decoupling: {v:?}")).into()),
    };
    let horizon = t_final.unwrap_or(10.0 / sol.max_re_closed_loop.abs());
    let times: Vec<f64> = (0..samples).map(|i| horizon * i as f64 / (samples - 1) as f64).collect();
    let y10 = random_coefficients(blocks.dim(), seed);
    let traj = bvp_solve(&blocks, &sol, &y10, &times)?;
    let norms = traj.norms();
    let (_, y1_0, _) = norms[0];
    let (_, y1_t, y2_t) = norms[norms.len() - 1];
    Ok(Artifacts {
        result: json!({
            "verdict": verdict,
            "riccati": riccati_json(&sol, &blocks),
            "t_final": horizon,
            "closed_loop_eigenvalues": linalg::eigenvalues(&sol.a_c)?,
            "y1_ratio": y1_t / y1_0,
            "y2_ratio": y2_t / y1_0,
            "max_z2": traj.max_z2(),
        }),
        csv: vec![Csv::trajectory(norms)],
    })
}

fn mfg_picard(cfg: &ModelConfig, g: &GridSpec, k: usize, eps: f64, opts: &PicardOptions) -> Result<Artifacts, Failure> {
    let km = kinetic_model(cfg, g, Variant::Mfg)?;
    let rho0 = km.perturbed_equilibrium(k, eps)?;
    let res = picard_solve(&km, &rho0, opts)?;
    let outcome_kind = match &res.outcome {
        PicardOutcome::TravellingWave(_) => "travelling_wave",
        PicardOutcome::Homogeneous { .. } => "homogeneous",
        PicardOutcome::Undetermined { .. } => "undetermined",
    };
    let residuals: Vec<(usize, f64)> =
        res.residual_history.iter().copied().enumerate().map(|(i, r)| (i + 1, r)).collect();
    Ok(Artifacts {
        result: json!({
            "iterations": res.iterations,
            "final_damping": res.final_damping,
            "residual_history": res.residual_history,
            "ergodic_window": res.ergodic_window,
            "mass_drift": res.mass_drift,
            "outcome_kind": outcome_kind,
            "outcome": res.outcome,
        }),
        csv: vec![
            Csv::trajectory(res.norms.iter().copied()),
            Csv::marginals(marginal_rows(&km, &res.snapshots)),
            Csv::new("residuals", &["iteration", "residual"], residuals),
        ],
    })
}
