//! Built-in cross-checks of the solver backends on one-dimensional setups.

use sac_core::diagnostics::energy;
use sac_core::flow::{flow_property_defect, solve_transformed};
use sac_core::grid::{Closure, Grid, ScalarField};
use sac_core::initial::InitialData;
use sac_core::noise::{ModeField, Mutations, NoiseModel};
use sac_core::potential::DoubleWell;
use sac_core::rng::{BrownianPath, StreamKey};
use sac_core::solver::{self, DiffusionTreatment, Scheme, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

type Outcome = Result<(bool, String), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// The default transport noise: one bump mode.
pub fn default_model() -> NoiseModel {
    NoiseModel::new(1, None, vec![ModeField::bump([0.5, 0.0], 0.35, 0.5, [1.0, 0.0])], 0.05)
        .expect("valid built-in model")
}

/// Pure transport by a constant mode on the torus: the exact solution is a
/// rigid shift by `σW_T`, and the error must fall at first order in `h`.
fn transport_exactness(mutations: Mutations) -> Outcome {
    let w = DoubleWell::standard();
    let (sigma, dt, t_end): (f64, f64, f64) = (0.1, 1e-4, 0.1);
    let model = NoiseModel::new(1, None, vec![ModeField::constant(sigma, [1.0, 0.0])], 0.0)
        .map_err(err)?
        .with_mutations(mutations);
    let steps = (t_end / dt).round() as usize;
    let path = BrownianPath::generate(StreamKey::new(3, 0), 1, dt, steps).map_err(err)?;
    let shift = sigma * path.increments().iter().sum::<f64>();
    let bump = |x: f64| -> f64 {
        let s = (x - 0.5).powi(2) / 0.0625;
        if s < 1.0 {
            (1.0 - 1.0 / (1.0 - s)).exp()
        } else {
            0.0
        }
    };
    let mut errors = Vec::new();
    for m in [64usize, 128, 256] {
        let g = Grid::new(1, m, Closure::Periodic).map_err(err)?;
        let u0 = ScalarField::from_fn(g, |x| bump(x[0]));
        let cfg = SolverConfig::new(0.05, dt, t_end).with_stride(steps).with_scheme(Scheme::StratonovichHeun);
        let r = solver::run_transport(g, &w, &model, &cfg, &u0, path.clone()).map_err(err)?;
        let exact = ScalarField::from_fn(g, |x| bump((x[0] + shift).rem_euclid(1.0)));
        errors.push(r.final_field.l1_distance(&exact));
    }
    let orders: Vec<f64> = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    Ok((
        errors[2] < 1e-2 && orders.iter().all(|&p| p >= 0.9),
        format!("L1 error {:.2e} at m = 256 (< 1e-2), orders {orders:.2?} (>= 0.9)", errors[2]),
    ))
}

/// Shared-path L¹ gaps between the Itô and Heun schemes must shrink like
/// `√dt`; a wrong Itô correction leaves a gap that does not shrink.
fn ito_heun_agreement(model: &NoiseModel) -> Outcome {
    let w = DoubleWell::standard();
    let (eps, t_end, base, paths) = (0.1, 0.05, 1e-5, 32u64);
    let g = Grid::new(1, 128, Closure::Neumann).map_err(err)?;
    let u0 = InitialData::Kink { center: 0.45 }.build(&g, eps, &w).map_err(err)?;
    let mut gaps = vec![0.0; 3];
    for sample in 0..paths {
        let fine = BrownianPath::generate(StreamKey::new(4, sample), model.n_modes(), base, (t_end / base).round() as usize)
            .map_err(err)?;
        for (i, &factor) in [8usize, 4, 2].iter().enumerate() {
            let path = fine.coarsen(factor).map_err(err)?;
            let cfg = SolverConfig::new(eps, path.dt(), t_end)
                .with_stride(1_000_000)
                .with_diffusion(DiffusionTreatment::SemiImplicit);
            let ito = solver::run(g, &w, model, &cfg, &u0, path.clone()).map_err(err)?;
            let heun = solver::run(g, &w, model, &cfg.clone().with_scheme(Scheme::StratonovichHeun), &u0, path)
                .map_err(err)?;
            gaps[i] += ito.final_field.l1_distance(&heun.final_field) / paths as f64;
        }
    }
    let ratios: Vec<f64> = gaps.windows(2).map(|p| p[0] / p[1]).collect();
    Ok((
        ratios.iter().all(|&r| (1.2..=3.0).contains(&r)),
        format!("gaps {}, ratios per halving {ratios:.3?} (in [1.2, 3])", sci(&gaps)),
    ))
}

/// `φ_{s,T} ∘ φ_{0,s} = φ_{0,T}` for the discrete flow: the defect must
/// fall as the step count doubles.
fn flow_defect(model: &NoiseModel) -> Outcome {
    let g = Grid::new(1, 256, Closure::Neumann).map_err(err)?;
    let (t_end, paths, fine_steps) = (0.05, 64u64, 24000usize);
    let counts = [100usize, 200, 400, 800];
    let mut defects = vec![0.0; counts.len()];
    for s in 0..paths {
        let fine = BrownianPath::generate(StreamKey::new(5, s), model.n_modes(), t_end / fine_steps as f64, fine_steps)
            .map_err(err)?;
        for (i, &n) in counts.iter().enumerate() {
            defects[i] += flow_property_defect(model, &g, &fine, n).map_err(err)? / paths as f64;
        }
    }
    let ratios: Vec<f64> = defects.windows(2).map(|d| d[0] / d[1]).collect();
    Ok((
        ratios.iter().all(|&r| r >= 1.5),
        format!("defects {}, ratios per halving {ratios:.2?} (>= 1.5)", sci(&defects)),
    ))
}

/// The direct and flow-transformed solvers converge to each other as space
/// and time are refined together.
fn backend_l1(model: &NoiseModel) -> Outcome {
    let w = DoubleWell::standard();
    let (eps, t_end, paths, fine_dt) = (0.05, 0.05, 3u64, 2e-5);
    let fine: Vec<BrownianPath> = (0..paths)
        .map(|s| BrownianPath::generate(StreamKey::new(10, s), model.n_modes(), fine_dt, (t_end / fine_dt).round() as usize))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let mut gaps = Vec::new();
    for (m, factor) in [(128usize, 2usize), (256, 1)] {
        let g = Grid::new(1, m, Closure::Neumann).map_err(err)?;
        let u0 = InitialData::TwoKinks { left: 0.3, right: 0.7 }.build(&g, eps, &w).map_err(err)?;
        let cfg = SolverConfig::new(eps, fine_dt * factor as f64, t_end)
            .with_stride(1_000_000)
            .with_diffusion(DiffusionTreatment::SemiImplicit);
        let mut gap = 0.0;
        for f in &fine {
            let path = f.coarsen(factor).map_err(err)?;
            let direct = solver::run(g, &w, model, &cfg, &u0, path.clone()).map_err(err)?;
            let flow = solve_transformed(g, &w, model, &cfg, &u0, path).map_err(err)?;
            gap += direct.final_field.l1_distance(&flow.final_field) / paths as f64;
        }
        gaps.push(gap);
    }
    Ok((
        gaps[1] <= 5e-2 && gaps[1] < gaps[0],
        format!("L1 gaps {} at (m, dt) = (128, 4e-5), (256, 2e-5) (decreasing, last <= 5e-2)", sci(&gaps)),
    ))
}

/// Without noise the energy is non-increasing along the discrete flow.
fn deterministic_decay() -> Outcome {
    let w = DoubleWell::standard();
    let eps = 0.05;
    let g = Grid::new(1, 128, Closure::Neumann).map_err(err)?;
    let u0 = InitialData::TwoKinks { left: 0.3, right: 0.7 }.build(&g, eps, &w).map_err(err)?;
    let cfg = SolverConfig::new(eps, 2e-5, 0.02).with_stride(50);
    let r = solver::run(g, &w, &NoiseModel::none(1), &cfg, &u0, BrownianPath::silent(cfg.dt)).map_err(err)?;
    let e: Vec<f64> = r.reports.iter().map(|x| x.energy).collect();
    let worst = e.windows(2).map(|p| p[1] - p[0]).fold(f64::NEG_INFINITY, f64::max);
    let start = energy(&u0, eps, &w);
    Ok((
        worst <= 1e-12 * start,
        format!("largest energy increase between snapshots {worst:.2e} over {} snapshots", e.len()),
    ))
}

fn run_check(name: &'static str, active: bool, f: impl FnOnce() -> Outcome) -> CheckResult {
    if !active {
        return CheckResult {
            name,
            status: Status::Skipped,
            detail: "no transport modes".into(),
        };
    }
    let (status, detail) = match f() {
        Ok((true, d)) => (Status::Pass, d),
        Ok((false, d)) => (Status::Fail, d),
        Err(e) => (Status::Fail, format!("error: {e}")),
    };
    CheckResult { name, status, detail }
}

/// Runs the suite on `model` (one-dimensional). A model without modes skips
/// the transport checks.
pub fn suite(model: &NoiseModel) -> Vec<CheckResult> {
    let transport = model.n_modes() > 0;
    let m = model.mutations();
    vec![
        run_check("transport exactness", transport, || transport_exactness(m)),
        run_check("Ito/Heun agreement", transport, || ito_heun_agreement(model)),
        run_check("flow-property defect", transport, || flow_defect(model)),
        run_check("backend L1 equivalence", transport, || backend_l1(model)),
        run_check("deterministic energy decay", true, deterministic_decay),
    ]
}
