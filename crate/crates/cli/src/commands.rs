//! The `run`, `ensemble` and `sweep` subcommands.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use sac_core::diagnostics::circle_radius;
use sac_core::ensemble::{self, run_ensemble, sample_key, sharp_interface_sweep, EnsembleStats};
use sac_core::flow::solve_transformed;
use sac_core::report;
use sac_core::rng::BrownianPath;
use sac_core::solver::TrajectoryResult;

use crate::config::{Backend, Experiment};
use crate::error::{io_at, CliError, CliResult};
use crate::plots;

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| io_at(path, e))?))
}

fn prepare_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_at(dir, e))
}

/// Sample 0 of the ensemble at `solver.eps`, on the configured backend.
fn trajectory(exp: &Experiment, store_fields: bool) -> CliResult<TrajectoryResult> {
    let mut cfg = exp.ensemble.clone();
    cfg.template.store_fields = store_fields;
    let eps = cfg.template.eps;
    Ok(match exp.backend {
        Backend::Direct => ensemble::run_sample(&cfg, eps, 0)?,
        Backend::Flow => {
            let steps = cfg.template.steps()?;
            let path = if cfg.model.n_modes() == 0 {
                BrownianPath::silent(cfg.template.dt)
            } else {
                BrownianPath::generate(sample_key(cfg.master_seed, 0), cfg.model.n_modes(), cfg.template.dt, steps)?
            };
            let u0 = cfg.initial.build(&cfg.grid, eps, &cfg.well)?;
            solve_transformed(cfg.grid, &cfg.well, &cfg.model, &cfg.template, &u0, path)?
        }
    })
}

pub fn cmd_run(exp: &Experiment) -> CliResult<Vec<PathBuf>> {
    let circle = exp.circle_center();
    let out = &exp.out_dir;
    prepare_dir(out)?;
    let result = trajectory(exp, exp.raw.output.snapshots || circle.is_some())?;
    let mut written = Vec::new();

    let radius: Option<Vec<f64>> = circle.map(|c| {
        result
            .fields
            .iter()
            .map(|(_, u)| circle_radius(u, c).unwrap_or(f64::NAN))
            .collect()
    });
    let path = out.join("trajectory.csv");
    report::write_trajectory(create(&path)?, &result.reports, radius.as_deref().map(|r| ("radius", r)))?;
    written.push(path);

    if exp.raw.output.snapshots {
        let dir = out.join("snapshots");
        prepare_dir(&dir)?;
        for (k, (t, u)) in result.fields.iter().enumerate() {
            let path = dir.join(format!("snap_{k:05}.sacf"));
            u.write_snapshot(create(&path)?, *t)?;
            written.push(path);
        }
    }
    if exp.raw.output.svg {
        written.extend(plots::render_dir(out)?);
    }
    Ok(written)
}

/// Named pass/fail gates over ensemble statistics.
fn ensemble_gates(exp: &Experiment, stats: &EnsembleStats) -> Vec<(String, bool)> {
    let band = exp.raw.ensemble.residual_band;
    let mut gates = Vec::new();
    for (i, e) in stats.per_eps.iter().enumerate() {
        gates.push((format!("eps{i}_containment"), e.containment_violations == 0));
        let windows = &exp.ensemble.residual_windows;
        for r in &e.residuals {
            // deterministic runs have no martingale band to test against
            if !(r.qv_stderr > 0.0) {
                continue;
            }
            let w = windows.iter().position(|&(a, b)| a == r.t0 && b == r.t1).unwrap_or(0);
            let probe = match &r.probe {
                None => "global".to_string(),
                Some(p) => {
                    let k = exp.ensemble.residual_probes.iter().position(|q| q == p).unwrap_or(0);
                    format!("probe{k}")
                }
            };
            if exp.raw.ensemble.residual_gates.as_ref().is_some_and(|names| !names.contains(&probe)) {
                continue;
            }
            gates.push((format!("eps{i}_residual_{probe}_w{w}"), r.mean.abs() <= band * r.qv_stderr));
        }
    }
    gates
}

fn write_tables(exp: &Experiment, stats: &EnsembleStats, gates: &[(String, bool)]) -> CliResult<Vec<PathBuf>> {
    let out = &exp.out_dir;
    let mut written = Vec::new();
    let mut table = |name: &str, f: &dyn Fn(BufWriter<File>) -> sac_core::error::Result<()>| -> CliResult<()> {
        let path = out.join(name);
        f(create(&path)?)?;
        written.push(path);
        Ok(())
    };
    table("moments.csv", &|w| report::write_moments(w, stats))?;
    table("tails.csv", &|w| report::write_tails(w, stats))?;
    table("series.csv", &|w| report::write_mean_series(w, stats))?;
    if stats.per_eps.iter().any(|e| e.increment_fit.is_some()) {
        table("increments.csv", &|w| report::write_increments(w, stats))?;
    }
    if !exp.ensemble.residual_windows.is_empty() {
        for (i, e) in stats.per_eps.iter().enumerate() {
            table(&format!("residuals_eps{i}_global.csv"), &|w| report::write_residuals(w, e, None))?;
            for k in 0..exp.ensemble.residual_probes.len() {
                table(&format!("residuals_eps{i}_probe{k}.csv"), &|w| report::write_residuals(w, e, Some(k)))?;
            }
        }
    }
    table("summary.toml", &|w| report::write_summary(w, stats, gates))?;
    if exp.raw.output.trajectories {
        let dir = out.join("trajectories");
        prepare_dir(&dir)?;
        for (i, e) in stats.per_eps.iter().enumerate() {
            for r in &e.records {
                let path = dir.join(format!("eps{i}_s{:04}.csv", r.sample));
                report::write_trajectory(create(&path)?, &r.reports, None)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

fn finish(exp: &Experiment, gates: &[(String, bool)], mut written: Vec<PathBuf>) -> CliResult<Vec<PathBuf>> {
    if exp.raw.output.svg {
        written.extend(plots::render_dir(&exp.out_dir)?);
    }
    let failed: Vec<&str> = gates.iter().filter(|(_, ok)| !ok).map(|(n, _)| n.as_str()).collect();
    if exp.raw.ensemble.gates && !failed.is_empty() {
        return Err(CliError::Gate(failed.join(", ")));
    }
    Ok(written)
}

pub fn cmd_ensemble(exp: &Experiment) -> CliResult<Vec<PathBuf>> {
    prepare_dir(&exp.out_dir)?;
    let stats = run_ensemble(&exp.ensemble)?;
    let gates = ensemble_gates(exp, &stats);
    let written = write_tables(exp, &stats, &gates)?;
    finish(exp, &gates, written)
}

pub fn cmd_sweep(exp: &Experiment) -> CliResult<Vec<PathBuf>> {
    prepare_dir(&exp.out_dir)?;
    let (sweep, stats) = sharp_interface_sweep(&exp.ensemble)?;
    let mut gates = ensemble_gates(exp, &stats);
    gates.push(("separation_monotone".to_string(), sweep.separation_monotone));
    let mut written = write_tables(exp, &stats, &gates)?;
    let path = exp.out_dir.join("sweep.csv");
    report::write_sweep(create(&path)?, &sweep)?;
    written.push(path);
    let path = exp.out_dir.join("coupling.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    let io = |e: csv::Error| io_at(&path, e);
    w.write_record(["eps_a", "eps_b", "mean_l1"]).map_err(io)?;
    for &(a, b, d) in &sweep.coupling_l1 {
        w.write_record([report::fmt_f64(a), report::fmt_f64(b), report::fmt_f64(d)]).map_err(io)?;
    }
    w.flush().map_err(|e| io_at(&path, e))?;
    written.push(path);
    finish(exp, &gates, written)
}
