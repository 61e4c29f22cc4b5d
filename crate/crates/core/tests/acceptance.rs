//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p sac-core --test acceptance -- --nocapture` to see
//! the table.

use std::time::{Duration, Instant};

use sac_core::diagnostics::{self, circle_radius, TestFunction};
use sac_core::ensemble::{run_ensemble, EnsembleConfig, EnsembleStats};
use sac_core::flow::{flow_property_defect, solve_transformed};
use sac_core::grid::{Closure, Grid, ScalarField};
use sac_core::initial::InitialData;
use sac_core::noise::{ModeField, Mutations, NoiseModel};
use sac_core::potential::DoubleWell;
use sac_core::report;
use sac_core::rng::{BrownianPath, StreamKey};
use sac_core::solver::{self, DiffusionTreatment, Scheme, SolverConfig};

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

type Check = std::result::Result<(bool, String), String>;

fn check(id: usize, name: &'static str, f: impl FnOnce() -> Check) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let o = Outcome {
        id,
        name,
        pass,
        detail: format!("{detail} [{:.1}s]", start.elapsed().as_secs_f64()),
    };
    println!("{} #{:<2} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.name, o.detail);
    o
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn bump_model() -> NoiseModel {
    NoiseModel::new(1, None, vec![ModeField::bump([0.5, 0.0], 0.35, 0.5, [1.0, 0.0])], 0.05).unwrap()
}

fn within(elapsed: Duration, minutes: f64) -> bool {
    elapsed.as_secs_f64() <= minutes * 60.0
}

fn sharp_interface_circle() -> Check {
    let w = DoubleWell::standard();
    let (eps, r0, dt) = (0.02, 0.3, 1e-5);
    let g = Grid::new(2, 256, Closure::Neumann).map_err(err)?;
    let u0 = InitialData::Circle { center: [0.5, 0.5], radius: r0 }.build(&g, eps, &w).map_err(err)?;
    let mut cfg = SolverConfig::new(eps, dt, 0.03)
        .with_stride(300)
        .with_diffusion(DiffusionTreatment::SemiImplicit);
    cfg.store_fields = true;
    let start = Instant::now();
    let r = solver::run(g, &w, &NoiseModel::none(2), &cfg, &u0, BrownianPath::silent(dt)).map_err(err)?;
    let elapsed = start.elapsed();
    let mut worst: f64 = 0.0;
    for (t, f) in &r.fields {
        let radius = circle_radius(f, [0.5, 0.5]).ok_or("no interface")?;
        let exact = (r0 * r0 - 2.0 * t).sqrt();
        worst = worst.max((radius - exact).abs() / exact);
    }
    Ok((
        worst <= 0.02 && r.fields.len() == 11 && within(elapsed, 5.0),
        format!("max relative radius error {worst:.4} over {} snapshots (≤ 0.02)", r.fields.len()),
    ))
}

fn kink_energy() -> Check {
    let w = DoubleWell::standard();
    let eps = 0.01;
    // surface tension by composite Simpson on [-1, 1]
    let n = 20_000;
    let hq = 2.0 / n as f64;
    let mut c0 = 0.0;
    for i in 0..=n {
        let r = -1.0 + i as f64 * hq;
        let wgt = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        c0 += wgt * (2.0 * w.f(r)).sqrt();
    }
    c0 *= hq / 3.0;
    let g = Grid::new(1, 4096, Closure::Neumann).map_err(err)?;
    let u = InitialData::Kink { center: 0.5 }.build(&g, eps, &w).map_err(err)?;
    let e = diagnostics::energy(&u, eps, &w);
    let rel = (e - c0).abs() / c0;
    Ok((
        rel <= 0.01 && (c0 - 0.9428).abs() < 1e-4,
        format!("E = {e:.5}, c0 = {c0:.5}, relative gap {rel:.2e} (≤ 0.01)"),
    ))
}

fn transport_exactness() -> Check {
    let w = DoubleWell::standard();
    let (sigma, dt, t_end): (f64, f64, f64) = (0.1, 1e-4, 0.1);
    let model = NoiseModel::new(2, None, vec![ModeField::constant(sigma, [1.0, 0.0])], 0.0).map_err(err)?;
    let steps = (t_end / dt).round() as usize;
    let path = BrownianPath::generate(StreamKey::new(3, 0), 1, dt, steps).map_err(err)?;
    let shift = sigma * path.increments().iter().sum::<f64>();
    let bump = |x: [f64; 2]| -> f64 {
        let s = ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)) / 0.0625;
        if s < 1.0 {
            (1.0 - 1.0 / (1.0 - s)).exp()
        } else {
            0.0
        }
    };
    let start = Instant::now();
    let mut errors = Vec::new();
    for m in [64usize, 128, 256] {
        let g = Grid::new(2, m, Closure::Periodic).map_err(err)?;
        let u0 = ScalarField::from_fn(g, bump);
        let cfg = SolverConfig::new(0.05, dt, t_end).with_stride(steps).with_scheme(Scheme::StratonovichHeun);
        let r = solver::run_transport(g, &w, &model, &cfg, &u0, path.clone()).map_err(err)?;
        let exact = ScalarField::from_fn(g, |x| bump([(x[0] + shift).rem_euclid(1.0), x[1]]));
        errors.push(r.final_field.l1_distance(&exact));
    }
    let orders: Vec<f64> = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    Ok((
        errors[2] < 1e-2 && orders.iter().all(|&p| p >= 0.9) && within(start.elapsed(), 1.0),
        format!("L1 error at m=256 {:.2e} (< 1e-2), observed orders {orders:.2?} (≥ 0.9)", errors[2]),
    ))
}

/// Mean shared-path L¹ gap between the Itô and Heun schemes at
/// `dt = 8, 4, 2, 1 × 1e-5`.
fn ito_heun_gaps(model: &NoiseModel) -> Result<Vec<f64>, String> {
    let w = DoubleWell::standard();
    let (eps, t_end, base, paths) = (0.1, 0.1, 1e-5, 32u64);
    let g = Grid::new(1, 128, Closure::Neumann).map_err(err)?;
    let u0 = InitialData::Kink { center: 0.45 }.build(&g, eps, &w).map_err(err)?;
    let mut gaps = vec![0.0; 4];
    for sample in 0..paths {
        let fine = BrownianPath::generate(StreamKey::new(4, sample), 1, base, (t_end / base).round() as usize)
            .map_err(err)?;
        for (i, &factor) in [8usize, 4, 2, 1].iter().enumerate() {
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
    Ok(gaps)
}

fn ito_stratonovich() -> Check {
    let ratios = |g: &[f64]| -> Vec<f64> { g.windows(2).map(|p| p[0] / p[1]).collect() };
    let gate = |r: &[f64]| r.iter().all(|&x| (1.3..=3.0).contains(&x));
    let stock = ratios(&ito_heun_gaps(&bump_model())?);
    let mutated = ratios(&ito_heun_gaps(&bump_model().with_mutations(Mutations {
        zero_c: true,
        ..Default::default()
    }))?);
    Ok((
        gate(&stock) && !gate(&mutated),
        format!("gap ratios {stock:.3?} in [1.3, 3]; zero-c mutation ratios {mutated:.3?} fail the gate"),
    ))
}

struct IdentityRun {
    stats: EnsembleStats,
    deterministic: (f64, f64),
}

fn identity_run() -> Result<IdentityRun, String> {
    let g = Grid::new(1, 160, Closure::Neumann).map_err(err)?;
    let template = SolverConfig::new(0.05, 1e-5, 0.1).with_stride(100);
    let init = InitialData::TwoKinks { left: 0.3, right: 0.7 };
    let mut cfg = EnsembleConfig::new(g, bump_model(), init.clone(), template.clone());
    cfg.samples = 200;
    cfg.master_seed = 2024;
    cfg.workers = 4;
    cfg.residual_windows = vec![(0.0, 0.1)];
    cfg.residual_probes = vec![TestFunction::ConstantOne, TestFunction::Bump { center: [0.5, 0.0], radius: 0.3 }];
    cfg.increment_probe = Some(TestFunction::Bump { center: [0.5, 0.0], radius: 0.3 });
    cfg.increment_lags = vec![1, 2, 4, 8, 16];
    let stats = run_ensemble(&cfg).map_err(err)?;

    let mut det = cfg.clone();
    det.model = NoiseModel::none(1);
    det.samples = 1;
    det.increment_probe = None;
    let d = run_ensemble(&det).map_err(err)?;
    let e = &d.per_eps[0];
    let res = e.residuals[0].mean;
    Ok(IdentityRun {
        stats,
        deterministic: (res, e.initial_energy),
    })
}

fn global_identity(run: &IdentityRun) -> Check {
    let e = &run.stats.per_eps[0];
    let s = &e.residuals[0];
    let (det, e0) = run.deterministic;
    let det_rate = det.abs() / 0.1;
    let pass = s.probe.is_none()
        && e.accepted() == 200
        && s.mean.abs() <= 2.0 * s.qv_stderr
        && det_rate <= 1e-3 * (1.0 + e0);
    Ok((
        pass,
        format!(
            "mean residual {:.3e}, QV standard error {:.3e} (band 2×), sample stderr {:.3e}; deterministic rate {det_rate:.2e} (≤ {:.2e})",
            s.mean,
            s.qv_stderr,
            s.stderr,
            1e-3 * (1.0 + e0)
        ),
    ))
}

fn localized_identity(run: &IdentityRun) -> Check {
    let e = &run.stats.per_eps[0];
    let mut bitwise = true;
    for r in &e.records {
        let global = r.residuals.iter().find(|x| x.probe.is_none()).ok_or("missing global row")?;
        let one = r.residuals.iter().find(|x| x.probe == Some(0)).ok_or("missing η≡1 row")?;
        bitwise &= global.value.residual.to_bits() == one.value.residual.to_bits();
    }
    let bump = &e.residuals[2];
    Ok((
        bitwise && bump.mean.abs() <= 2.0 * bump.qv_stderr,
        format!(
            "η≡1 equals global bitwise on all {} samples: {bitwise}; bump mean {:.3e}, QV standard error {:.3e}",
            e.records.len(),
            bump.mean,
            bump.qv_stderr
        ),
    ))
}

fn uniform_run() -> Result<EnsembleStats, String> {
    let g = Grid::new(1, 256, Closure::Neumann).map_err(err)?;
    let template = SolverConfig::new(0.08, 1e-5, 0.1)
        .with_stride(100)
        .with_diffusion(DiffusionTreatment::SemiImplicit);
    let mut cfg = EnsembleConfig::new(g, bump_model(), InitialData::TwoKinks { left: 0.2, right: 0.8 }, template);
    cfg.samples = 200;
    cfg.master_seed = 7;
    cfg.workers = 4;
    cfg.eps_list = vec![0.08, 0.04, 0.02];
    run_ensemble(&cfg).map_err(err)
}

fn uniform_bounds(stats: &EnsembleStats, elapsed: Duration) -> Check {
    let sup: Vec<f64> = stats.per_eps.iter().map(|e| e.mean_sup_energy()).collect();
    let diss: Vec<f64> = stats.per_eps.iter().map(|e| e.mean_dissipation()).collect();
    let ok = |v: &[f64]| {
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let rising = v.windows(2).all(|p| p[1] > p[0]);
        min > 0.0 && max / min <= 1.5 && !rising
    };
    Ok((
        ok(&sup) && ok(&diss) && stats.per_eps.iter().all(|e| e.accepted() == 200) && within(elapsed, 30.0),
        format!("E[sup E] {sup:.4?}, E[∫∫w²/ε] {diss:.4?} for ε = 0.08, 0.04, 0.02 (spread ≤ 1.5, no rising trend)"),
    ))
}

fn containment(runs: &[&EnsembleStats]) -> Check {
    let mut snapshots = 0;
    let mut violations = 0;
    for s in runs {
        for e in &s.per_eps {
            violations += e.containment_violations;
            snapshots += e.records.iter().map(|r| r.times.len()).sum::<usize>();
        }
    }
    Ok((
        violations == 0 && snapshots > 0,
        format!("{violations} violations of ∫|∇G(u)| ≤ E + 20h over {snapshots} snapshots"),
    ))
}

fn increment_scaling(run: &IdentityRun) -> Check {
    let bump = run.stats.per_eps[0].increment_fit.as_ref().ok_or("no increment fit")?.slope;
    let g = Grid::new(1, 256, Closure::Periodic).map_err(err)?;
    let model = NoiseModel::new(1, None, vec![ModeField::constant(0.1, [1.0, 0.0])], 0.0).map_err(err)?;
    let mut template = SolverConfig::new(0.05, 1e-4, 0.1)
        .with_stride(5)
        .with_scheme(Scheme::StratonovichHeun);
    template.transport_only = true;
    let init = InitialData::SmoothBump { center: [0.5, 0.0], radius: 0.2, height: 0.8 };
    let mut cfg = EnsembleConfig::new(g, model, init, template);
    cfg.samples = 200;
    cfg.master_seed = 11;
    cfg.workers = 4;
    cfg.increment_probe = Some(TestFunction::CoordinateWindow { axis: 0, center: 0.5 });
    cfg.increment_lags = vec![1, 2, 4, 8, 16];
    let s = run_ensemble(&cfg).map_err(err)?;
    let transport = s.per_eps[0].increment_fit.as_ref().ok_or("no increment fit")?.slope;
    Ok((
        (0.7..=1.5).contains(&bump) && (transport - 1.0).abs() <= 0.1,
        format!("bump-mode slope {bump:.3} in [0.7, 1.5]; pure-transport slope {transport:.3} within 1 ± 0.1"),
    ))
}

fn backend_equivalence() -> Check {
    let w = DoubleWell::standard();
    let model = bump_model();
    let (eps, t_end, paths) = (0.05, 0.05, 6u64);
    let mut gaps = Vec::new();
    // space and time refined together on coarsenings of one fine path;
    // m = 256 runs at dt = 2e-5
    let fine_dt = 1e-5;
    let fine: Vec<BrownianPath> = (0..paths)
        .map(|s| BrownianPath::generate(StreamKey::new(10, s), 1, fine_dt, (t_end / fine_dt).round() as usize))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    for (m, factor) in [(128usize, 4usize), (256, 2), (512, 1)] {
        let g = Grid::new(1, m, Closure::Neumann).map_err(err)?;
        let u0 = InitialData::TwoKinks { left: 0.3, right: 0.7 }.build(&g, eps, &w).map_err(err)?;
        let cfg = SolverConfig::new(eps, fine_dt * factor as f64, t_end)
            .with_stride(1_000_000)
            .with_diffusion(DiffusionTreatment::SemiImplicit);
        let mut gap = 0.0;
        for f in &fine {
            let path = f.coarsen(factor).map_err(err)?;
            let direct = solver::run(g, &w, &model, &cfg, &u0, path.clone()).map_err(err)?;
            let flow = solve_transformed(g, &w, &model, &cfg, &u0, path).map_err(err)?;
            gap += direct.final_field.l1_distance(&flow.final_field) / paths as f64;
        }
        gaps.push(gap);
    }
    let g = Grid::new(1, 256, Closure::Neumann).map_err(err)?;
    let mut defects = vec![0.0; 4];
    for s in 0..64 {
        let fine = BrownianPath::generate(StreamKey::new(5, s), 1, t_end / 24000.0, 24000).map_err(err)?;
        for (i, &n) in [100usize, 200, 400, 800].iter().enumerate() {
            defects[i] += flow_property_defect(&model, &g, &fine, n).map_err(err)? / 64.0;
        }
    }
    let ratios: Vec<f64> = defects.windows(2).map(|d| d[0] / d[1]).collect();
    let gaps_text: Vec<String> = gaps.iter().map(|g| format!("{g:.2e}")).collect();
    Ok((
        gaps[1] <= 5e-2 && gaps.windows(2).all(|p| p[1] < p[0]) && ratios.iter().all(|&r| r >= 1.5),
        format!("backend L1 gaps at (m, dt) = (128, 4e-5), (256, 2e-5), (512, 1e-5): [{}]; flow defect ratios per halving {ratios:.2?} (≥ 1.5)",
            gaps_text.join(", ")
        ),
    ))
}

fn ensemble_bytes(workers: usize) -> Result<Vec<u8>, String> {
    let g = Grid::new(1, 64, Closure::Neumann).map_err(err)?;
    let template = SolverConfig::new(0.1, 5e-5, 0.01).with_stride(20);
    let mut cfg = EnsembleConfig::new(g, bump_model(), InitialData::TwoKinks { left: 0.3, right: 0.7 }, template);
    cfg.samples = 12;
    cfg.master_seed = 99;
    cfg.workers = workers;
    cfg.eps_list = vec![0.1, 0.08];
    cfg.moment_orders = vec![1.0, 2.0, 4.0];
    cfg.tail_thresholds = vec![1.0, 1.8, 2.5];
    cfg.residual_windows = vec![(0.0, 0.005), (0.0, 0.01)];
    cfg.residual_probes = vec![TestFunction::Bump { center: [0.5, 0.0], radius: 0.3 }];
    let stats = run_ensemble(&cfg).map_err(err)?;
    let mut out = Vec::new();
    report::write_summary(&mut out, &stats, &[]).map_err(err)?;
    report::write_moments(&mut out, &stats).map_err(err)?;
    report::write_tails(&mut out, &stats).map_err(err)?;
    report::write_mean_series(&mut out, &stats).map_err(err)?;
    for e in &stats.per_eps {
        report::write_residuals(&mut out, e, None).map_err(err)?;
        report::write_residuals(&mut out, e, Some(0)).map_err(err)?;
    }
    Ok(out)
}

fn reproducibility() -> Check {
    let one = ensemble_bytes(1)?;
    let four = ensemble_bytes(4)?;
    Ok((
        one == four && !one.is_empty(),
        format!("{} report bytes with 1 and 4 workers, identical: {}", one.len(), one == four),
    ))
}

#[test]
fn acceptance() {
    let mut outcomes = vec![
        check(1, "deterministic sharp-interface limit", sharp_interface_circle),
        check(2, "kink energy constant", kink_energy),
        check(3, "transport exactness", transport_exactness),
        check(4, "Itô–Stratonovich consistency", ito_stratonovich),
    ];
    let identity = identity_run();
    let uniform_start = Instant::now();
    let uniform = uniform_run();
    let uniform_elapsed = uniform_start.elapsed();
    match &identity {
        Ok(run) => {
            outcomes.push(check(5, "global energy identity", || global_identity(run)));
            outcomes.push(check(6, "localized identity consistency", || localized_identity(run)));
        }
        Err(e) => {
            outcomes.push(check(5, "global energy identity", || Err(e.clone())));
            outcomes.push(check(6, "localized identity consistency", || Err(e.clone())));
        }
    }
    outcomes.push(check(7, "uniform-in-ε bounds", || {
        uniform.as_ref().map_err(Clone::clone).and_then(|s| uniform_bounds(s, uniform_elapsed))
    }));
    outcomes.push(check(8, "compact containment", || match (&identity, &uniform) {
        (Ok(a), Ok(b)) => containment(&[&a.stats, b]),
        _ => Err("ensembles did not complete".into()),
    }));
    outcomes.push(check(9, "increment scaling", || {
        identity.as_ref().map_err(Clone::clone).and_then(increment_scaling)
    }));
    outcomes.push(check(10, "backend equivalence", backend_equivalence));
    outcomes.push(check(11, "reproducibility", reproducibility));

    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!("{} of {} criteria pass", outcomes.len() - failed.len(), outcomes.len());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
