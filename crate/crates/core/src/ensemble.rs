//! Monte Carlo orchestration over samples and `ε`.
//!
//! Sample `s` is driven by the stream `(master_seed, s)` for every `ε`, so
//! the same Brownian increments drive each `ε` of a sample. Tasks run on a
//! dedicated pool of the configured size; results are collected in task
//! order and reduced pairwise, so statistics do not depend on the number of
//! workers.

use rayon::prelude::*;

use crate::diagnostics::{self, EnergyReport, IdentityResidual, IncrementFit, TestFunction};
use crate::error::{Result, SacError};
use crate::grid::{Grid, ScalarField};
use crate::initial::InitialData;
use crate::noise::NoiseModel;
use crate::potential::DoubleWell;
use crate::rng::{hash_words, BrownianPath, StreamKey};
use crate::solver::{self, SolverConfig, TrajectoryResult};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailurePolicy {
    /// Any failed sample fails the ensemble.
    FailLoud,
    /// Failed samples are reported and excluded from the statistics.
    Exclude,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub grid: Grid,
    pub well: DoubleWell,
    pub model: NoiseModel,
    pub initial: InitialData,
    /// Solver settings; `eps` is replaced by each entry of `eps_list`.
    pub template: SolverConfig,
    pub eps_list: Vec<f64>,
    pub samples: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub moment_orders: Vec<f64>,
    pub tail_thresholds: Vec<f64>,
    pub residual_windows: Vec<(f64, f64)>,
    /// Test functions for localized residuals (the global one is always
    /// computed when windows are requested).
    pub residual_probes: Vec<TestFunction>,
    pub increment_probe: Option<TestFunction>,
    /// Lags in snapshot units.
    pub increment_lags: Vec<usize>,
    pub failure_policy: FailurePolicy,
    pub keep_final_fields: bool,
}

impl EnsembleConfig {
    pub fn new(grid: Grid, model: NoiseModel, initial: InitialData, template: SolverConfig) -> Self {
        let eps = template.eps;
        EnsembleConfig {
            grid,
            well: DoubleWell::standard(),
            model,
            initial,
            template,
            eps_list: vec![eps],
            samples: 1,
            master_seed: 0,
            workers: 1,
            moment_orders: vec![1.0, 2.0],
            tail_thresholds: Vec::new(),
            residual_windows: Vec::new(),
            residual_probes: Vec::new(),
            increment_probe: None,
            increment_lags: Vec::new(),
            failure_policy: FailurePolicy::FailLoud,
            keep_final_fields: false,
        }
    }

    /// Checks the configuration; returns warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if self.samples == 0 {
            return Err(SacError::Config("an ensemble needs at least one sample".into()));
        }
        if self.eps_list.is_empty() {
            return Err(SacError::Config("eps_list is empty".into()));
        }
        if self.eps_list.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(SacError::Config(format!(
                "eps_list must be strictly decreasing, got {:?}",
                self.eps_list
            )));
        }
        if self.workers == 0 {
            return Err(SacError::Config("workers must be at least 1".into()));
        }
        if self.moment_orders.iter().any(|p| !(*p > 0.0)) {
            return Err(SacError::Config("moment orders must be positive".into()));
        }
        for &(t0, t1) in &self.residual_windows {
            if !(t0 >= 0.0 && t0 < t1 && t1 <= self.template.t_end * (1.0 + 1e-12)) {
                return Err(SacError::Config(format!("residual window [{t0}, {t1}] is not inside [0, t_end]")));
            }
        }
        for p in self.residual_probes.iter().chain(&self.increment_probe) {
            p.validate(self.grid.dim())?;
        }
        self.model.validate_for(&self.grid)?;
        let sampled = self.model.sample(&self.grid, 0.0)?;
        for &eps in &self.eps_list {
            let cfg = SolverConfig { eps, ..self.template.clone() };
            warnings.extend(cfg.validate(&self.grid, sampled.lambda_max(), &self.well)?);
        }
        Ok(warnings)
    }

    fn solver_config(&self, eps: f64) -> SolverConfig {
        let mut cfg = SolverConfig { eps, ..self.template.clone() };
        if !self.residual_windows.is_empty() {
            cfg.record_identity = true;
            cfg.identity_probes = self.residual_probes.clone();
        }
        cfg.g_probes = self.increment_probe.iter().cloned().collect();
        cfg
    }
}

/// The stream key of sample `s`, shared by all `ε`.
pub fn sample_key(master_seed: u64, sample: usize) -> StreamKey {
    StreamKey::new(master_seed, sample as u64)
}

/// A compact seed identifying a sample's stream in reports.
pub fn sample_seed(master_seed: u64, sample: usize) -> u64 {
    hash_words(&[master_seed, sample as u64])
}

/// The residual of one window for one test function (`None`: global).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRow {
    pub window: usize,
    pub t0: f64,
    pub t1: f64,
    pub probe: Option<usize>,
    pub value: IdentityResidual,
}

/// Per-sample summary of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub sample: usize,
    pub seed: u64,
    pub initial_energy: f64,
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub willmore: Vec<f64>,
    pub bv_g: Vec<f64>,
    pub phase_fraction: Vec<f64>,
    /// `∫G(u)η` for the increment probe.
    pub g_eta: Vec<f64>,
    pub sup_energy: f64,
    /// `∫∫ w²/ε` by the trapezoid rule on snapshots.
    pub dissipation: f64,
    pub residuals: Vec<ResidualRow>,
    /// Snapshots violating `∫|∇G(u)| ≤ E_ε(u) + 20h`.
    pub containment_violations: usize,
    /// The full diagnostic series, in snapshot order.
    pub reports: Vec<EnergyReport>,
    pub final_field: Option<ScalarField>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleFailure {
    pub sample: usize,
    pub seed: u64,
    pub error: SacError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSummary {
    pub t0: f64,
    pub t1: f64,
    pub probe: Option<TestFunction>,
    pub mean: f64,
    /// Sample standard error.
    pub stderr: f64,
    /// `sqrt(mean qv / M)`: the standard error predicted by the quadratic
    /// variation of the martingale term.
    pub qv_stderr: f64,
    pub mean_martingale: f64,
    pub mean_correction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsStats {
    pub eps: f64,
    pub records: Vec<SampleRecord>,
    pub failures: Vec<SampleFailure>,
    /// `(p, E[sup_t E_ε^p])`.
    pub sup_energy_moments: Vec<(f64, f64)>,
    /// `(p, E[(∫∫w²/ε)^p])`.
    pub dissipation_moments: Vec<(f64, f64)>,
    /// `(λ, P[sup_t E_ε > λ])`.
    pub tail: Vec<(f64, f64)>,
    pub residuals: Vec<ResidualSummary>,
    pub increment_fit: Option<IncrementFit>,
    pub times: Vec<f64>,
    pub mean_energy: Vec<f64>,
    pub mean_phase_fraction: Vec<f64>,
    pub mean_bv_g: Vec<f64>,
    /// Slope of `log E[E_ε(t)]` against `t`.
    pub c_est: f64,
    /// `Λ`, the energy of the initial data.
    pub initial_energy: f64,
    pub containment_violations: usize,
}

impl EpsStats {
    pub fn accepted(&self) -> usize {
        self.records.len()
    }

    pub fn sup_energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.sup_energy).collect()
    }

    pub fn mean_sup_energy(&self) -> f64 {
        stats::mean(&self.sup_energies())
    }

    pub fn mean_dissipation(&self) -> f64 {
        stats::mean(&self.records.iter().map(|r| r.dissipation).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub per_eps: Vec<EpsStats>,
    pub samples: usize,
}

fn time_trapezoid(t: &[f64], v: &[f64]) -> f64 {
    let terms: Vec<f64> = t.windows(2).zip(v.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).collect();
    stats::pairwise_sum(&terms)
}

fn summarize(cfg: &EnsembleConfig, sample: usize, r: &TrajectoryResult) -> Result<SampleRecord> {
    let h = cfg.grid.spacing();
    let times: Vec<f64> = r.reports.iter().map(|x| x.t).collect();
    let energy: Vec<f64> = r.reports.iter().map(|x| x.energy).collect();
    let willmore: Vec<f64> = r.reports.iter().map(|x| x.willmore).collect();
    let mut residuals = Vec::new();
    for (wi, &(t0, t1)) in cfg.residual_windows.iter().enumerate() {
        residuals.push(ResidualRow {
            window: wi,
            t0,
            t1,
            probe: None,
            value: diagnostics::global_identity_residual(r, t0, t1)?,
        });
        for (k, p) in cfg.residual_probes.iter().enumerate() {
            residuals.push(ResidualRow {
                window: wi,
                t0,
                t1,
                probe: Some(k),
                value: diagnostics::localized_identity_residual(r, t0, t1, p)?,
            });
        }
    }
    Ok(SampleRecord {
        sample,
        seed: sample_seed(cfg.master_seed, sample),
        initial_energy: r.initial_energy,
        sup_energy: energy.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        dissipation: time_trapezoid(&times, &willmore),
        containment_violations: r.reports.iter().filter(|x| !(x.bv_g <= x.energy + 20.0 * h)).count(),
        bv_g: r.reports.iter().map(|x| x.bv_g).collect(),
        phase_fraction: r.reports.iter().map(|x| x.phase_fraction).collect(),
        g_eta: r.reports.iter().filter_map(|x| x.g_eta.first().copied()).collect(),
        times,
        energy,
        willmore,
        residuals,
        reports: r.reports.clone(),
        final_field: cfg.keep_final_fields.then(|| r.final_field.clone()),
    })
}

/// Runs one sample at one `ε`.
pub fn run_sample(cfg: &EnsembleConfig, eps: f64, sample: usize) -> Result<TrajectoryResult> {
    let solver_cfg = cfg.solver_config(eps);
    let steps = solver_cfg.steps()?;
    let path = if cfg.model.n_modes() == 0 {
        BrownianPath::silent(solver_cfg.dt)
    } else {
        BrownianPath::generate(sample_key(cfg.master_seed, sample), cfg.model.n_modes(), solver_cfg.dt, steps)?
    };
    let u0 = cfg.initial.build(&cfg.grid, eps, &cfg.well)?;
    solver::run(cfg.grid, &cfg.well, &cfg.model, &solver_cfg, &u0, path)
}

fn column_mean(records: &[SampleRecord], f: impl Fn(&SampleRecord) -> &Vec<f64>) -> Vec<f64> {
    let len = records.iter().map(|r| f(r).len()).min().unwrap_or(0);
    (0..len)
        .map(|j| stats::mean(&records.iter().map(|r| f(r)[j]).collect::<Vec<_>>()))
        .collect()
}

fn reduce_eps(cfg: &EnsembleConfig, eps: f64, records: Vec<SampleRecord>, failures: Vec<SampleFailure>) -> Result<EpsStats> {
    let sup: Vec<f64> = records.iter().map(|r| r.sup_energy).collect();
    let diss: Vec<f64> = records.iter().map(|r| r.dissipation).collect();
    let moments = |xs: &[f64]| -> Vec<(f64, f64)> {
        cfg.moment_orders
            .iter()
            .map(|&p| (p, stats::mean(&xs.iter().map(|x| x.powf(p)).collect::<Vec<_>>())))
            .collect()
    };
    let tail = cfg
        .tail_thresholds
        .iter()
        .map(|&l| (l, tail_probability(&sup, l)))
        .collect();
    let mut residuals = Vec::new();
    for (wi, &(t0, t1)) in cfg.residual_windows.iter().enumerate() {
        let probes = std::iter::once(None).chain((0..cfg.residual_probes.len()).map(Some));
        for probe in probes {
            let vals: Vec<IdentityResidual> = records
                .iter()
                .filter_map(|r| r.residuals.iter().find(|x| x.window == wi && x.probe == probe).map(|x| x.value))
                .collect();
            let res: Vec<f64> = vals.iter().map(|v| v.residual).collect();
            let qv: Vec<f64> = vals.iter().map(|v| v.qv).collect();
            residuals.push(ResidualSummary {
                t0,
                t1,
                probe: probe.map(|k| cfg.residual_probes[k].clone()),
                mean: stats::mean(&res),
                stderr: stats::stderr(&res),
                qv_stderr: (stats::mean(&qv) / vals.len() as f64).sqrt(),
                mean_martingale: stats::mean(&vals.iter().map(|v| v.martingale).collect::<Vec<_>>()),
                mean_correction: stats::mean(&vals.iter().map(|v| v.correction).collect::<Vec<_>>()),
            });
        }
    }
    let increment_fit = match &cfg.increment_probe {
        Some(_) if !cfg.increment_lags.is_empty() => {
            let series: Vec<Vec<f64>> = records.iter().map(|r| r.g_eta.clone()).collect();
            let snap_dt = cfg.template.dt * cfg.template.snapshot_stride as f64;
            Some(diagnostics::increment_statistic(&series, snap_dt, &cfg.increment_lags)?)
        }
        _ => None,
    };
    let times = records.first().map(|r| r.times.clone()).unwrap_or_default();
    let mean_energy = column_mean(&records, |r| &r.energy);
    let c_est = if times.len() >= 2 && mean_energy.iter().all(|&e| e > 0.0) {
        let logs: Vec<f64> = mean_energy.iter().map(|e| e.ln()).collect();
        stats::linear_fit(&times[..logs.len()], &logs).1
    } else {
        f64::NAN
    };
    Ok(EpsStats {
        eps,
        sup_energy_moments: moments(&sup),
        dissipation_moments: moments(&diss),
        tail,
        residuals,
        increment_fit,
        mean_phase_fraction: column_mean(&records, |r| &r.phase_fraction),
        mean_bv_g: column_mean(&records, |r| &r.bv_g),
        mean_energy,
        times,
        c_est,
        initial_energy: records.first().map_or(f64::NAN, |r| r.initial_energy),
        containment_violations: records.iter().map(|r| r.containment_violations).sum(),
        records,
        failures,
    })
}

fn tail_probability(sup: &[f64], lambda: f64) -> f64 {
    if sup.is_empty() {
        return f64::NAN;
    }
    sup.iter().filter(|&&s| s > lambda).count() as f64 / sup.len() as f64
}

/// Runs `samples` trajectories per `ε` on a pool of `workers` threads.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleStats> {
    cfg.validate()?;
    let tasks: Vec<(usize, usize)> = (0..cfg.eps_list.len())
        .flat_map(|e| (0..cfg.samples).map(move |s| (e, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| SacError::Config(format!("cannot build worker pool: {e}")))?;
    let outcomes: Vec<Result<SampleRecord>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(e, s)| run_sample(cfg, cfg.eps_list[e], s).and_then(|r| summarize(cfg, s, &r)))
            .collect()
    });
    let mut per_eps = Vec::with_capacity(cfg.eps_list.len());
    let mut it = outcomes.into_iter();
    for &eps in &cfg.eps_list {
        let mut records = Vec::new();
        let mut failures = Vec::new();
        for s in 0..cfg.samples {
            match it.next().expect("one outcome per task") {
                Ok(r) => records.push(r),
                Err(error) => {
                    let seed = sample_seed(cfg.master_seed, s);
                    if cfg.failure_policy == FailurePolicy::FailLoud {
                        return Err(SacError::SampleFailed {
                            sample: s,
                            seed,
                            source: Box::new(error),
                        });
                    }
                    failures.push(SampleFailure { sample: s, seed, error });
                }
            }
        }
        if records.is_empty() {
            return Err(SacError::Contract(format!("every sample failed at eps = {eps}")));
        }
        per_eps.push(reduce_eps(cfg, eps, records, failures)?);
    }
    Ok(EnsembleStats {
        per_eps,
        samples: cfg.samples,
    })
}

/// `P[sup_t E_ε > λ]` for every `ε` (rows) and `λ` (columns).
pub fn tail_table(stats: &EnsembleStats, lambdas: &[f64]) -> Vec<Vec<f64>> {
    stats
        .per_eps
        .iter()
        .map(|e| {
            let sup = e.sup_energies();
            lambdas.iter().map(|&l| tail_probability(&sup, l)).collect()
        })
        .collect()
}

/// Markov-type envelope `Λ^p exp(C T)/λ^p` with the fitted `C`.
pub fn tail_envelope(e: &EpsStats, lambda: f64, p: f64, horizon: f64) -> f64 {
    (e.initial_energy / lambda).powf(p) * (e.c_est * horizon).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    /// Time- and sample-averaged `|{|u| < 0.9}|`.
    pub phase_fraction: f64,
    /// Time- and sample-averaged `∫|∇G(u)|`.
    pub bv_g_mean: f64,
    pub bv_g_min: f64,
    pub bv_g_max: f64,
    pub mean_sup_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Mean `L¹(u_ε, u_ε')` at `T` between consecutive `ε`, same increments.
    pub coupling_l1: Vec<(f64, f64, f64)>,
    /// Whether the phase fraction decreases with `ε`.
    pub separation_monotone: bool,
}

fn time_average(t: &[f64], v: &[f64]) -> f64 {
    if t.len() < 2 || t[t.len() - 1] <= t[0] {
        return v.first().copied().unwrap_or(f64::NAN);
    }
    time_trapezoid(t, v) / (t[t.len() - 1] - t[0])
}

/// Sharp-interface study over `eps_list` (at least three values).
pub fn sharp_interface_sweep(cfg: &EnsembleConfig) -> Result<(SweepReport, EnsembleStats)> {
    if cfg.eps_list.len() < 3 {
        return Err(SacError::Config("a sweep needs at least three eps values".into()));
    }
    let mut cfg = cfg.clone();
    cfg.keep_final_fields = true;
    let stats = run_ensemble(&cfg)?;
    let rows: Vec<SweepRow> = stats
        .per_eps
        .iter()
        .map(|e| {
            let bv: Vec<f64> = e.records.iter().map(|r| time_average(&r.times, &r.bv_g)).collect();
            SweepRow {
                eps: e.eps,
                phase_fraction: time_average(&e.times, &e.mean_phase_fraction),
                bv_g_mean: stats::mean(&bv),
                bv_g_min: e.records.iter().flat_map(|r| r.bv_g.iter().copied()).fold(f64::INFINITY, f64::min),
                bv_g_max: e.records.iter().flat_map(|r| r.bv_g.iter().copied()).fold(f64::NEG_INFINITY, f64::max),
                mean_sup_energy: e.mean_sup_energy(),
            }
        })
        .collect();
    let mut coupling_l1 = Vec::new();
    for pair in stats.per_eps.windows(2) {
        let d: Vec<f64> = pair[0]
            .records
            .iter()
            .filter_map(|a| {
                let b = pair[1].records.iter().find(|b| b.sample == a.sample)?;
                Some(a.final_field.as_ref()?.l1_distance(b.final_field.as_ref()?))
            })
            .collect();
        coupling_l1.push((pair[0].eps, pair[1].eps, stats::mean(&d)));
    }
    let separation_monotone = rows.windows(2).all(|w| w[1].phase_fraction < w[0].phase_fraction);
    Ok((
        SweepReport {
            rows,
            coupling_l1,
            separation_monotone,
        },
        stats,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Closure;
    use crate::noise::ModeField;

    fn base(samples: usize) -> EnsembleConfig {
        let g = Grid::new(1, 64, Closure::Neumann).unwrap();
        let model = NoiseModel::new(1, None, vec![ModeField::bump([0.5, 0.0], 0.3, 0.4, [1.0, 0.0])], 0.05).unwrap();
        let mut cfg = EnsembleConfig::new(
            g,
            model,
            InitialData::TwoKinks { left: 0.3, right: 0.7 },
            SolverConfig::new(0.08, 5e-5, 5e-3).with_stride(10),
        );
        cfg.samples = samples;
        cfg.master_seed = 17;
        cfg
    }

    #[test]
    fn single_deterministic_sample_matches_trajectory() {
        let mut cfg = base(1);
        cfg.model = NoiseModel::none(1);
        cfg.tail_thresholds = vec![0.0, 1e9];
        let stats = run_ensemble(&cfg).unwrap();
        let e = &stats.per_eps[0];
        let u0 = cfg.initial.build(&cfg.grid, 0.08, &cfg.well).unwrap();
        let r = solver::run(cfg.grid, &cfg.well, &cfg.model, &cfg.template, &u0, BrownianPath::silent(5e-5)).unwrap();
        let sup = r.reports.iter().map(|x| x.energy).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(e.sup_energy_moments[0], (1.0, sup));
        assert_eq!(e.mean_energy, r.reports.iter().map(|x| x.energy).collect::<Vec<_>>());
        assert_eq!(e.tail, vec![(0.0, 1.0), (1e9, 0.0)]);
        assert_eq!(e.containment_violations, 0);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut cfg = base(6);
        cfg.eps_list = vec![0.1, 0.08];
        cfg.residual_windows = vec![(0.0, 5e-3)];
        cfg.residual_probes = vec![TestFunction::Bump { center: [0.5, 0.0], radius: 0.3 }];
        let a = run_ensemble(&cfg).unwrap();
        cfg.workers = 3;
        let b = run_ensemble(&cfg).unwrap();
        assert_eq!(a, b);
        // shared increments across eps: same seeds per sample
        assert_eq!(a.per_eps[0].records[2].seed, a.per_eps[1].records[2].seed);
        assert_eq!(a.per_eps[0].residuals.len(), 2);
    }

    #[test]
    fn moments_follow_power_means_and_tails_are_monotone() {
        let mut cfg = base(8);
        cfg.moment_orders = vec![1.0, 2.0, 3.0];
        let stats = run_ensemble(&cfg).unwrap();
        let e = &stats.per_eps[0];
        let norms: Vec<f64> = e.sup_energy_moments.iter().map(|(p, m)| m.powf(1.0 / p)).collect();
        assert!(norms.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)), "{norms:?}");
        let max = e.sup_energies().into_iter().fold(0.0, f64::max);
        let table = tail_table(&stats, &[0.0, 0.5 * max, max]);
        assert_eq!(table[0][0], 1.0);
        assert_eq!(table[0][2], 0.0);
        assert!(table[0].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn failures_are_loud_or_accounted() {
        let mut cfg = base(3);
        cfg.template.blowup_threshold = 1.0 + 1e-9;
        cfg.initial = InitialData::Constant(1.0 + 1e-3);
        cfg.model = NoiseModel::none(1);
        let err = run_ensemble(&cfg).unwrap_err();
        assert!(matches!(err, SacError::SampleFailed { sample: 0, .. }));
        cfg.failure_policy = FailurePolicy::Exclude;
        // every sample fails, which is still an error
        assert!(run_ensemble(&cfg).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = base(1);
        cfg.eps_list = vec![0.05, 0.08];
        assert!(matches!(cfg.validate(), Err(SacError::Config(_))));
        cfg.eps_list = vec![0.08];
        cfg.samples = 0;
        assert!(cfg.validate().is_err());
        cfg.samples = 1;
        cfg.eps_list = vec![0.02];
        let w = cfg.validate().unwrap();
        assert!(w.iter().any(|s| s.contains("under-resolved")));
    }

    #[test]
    fn sweep_of_deterministic_kink() {
        let g = Grid::new(1, 512, Closure::Neumann).unwrap();
        let mut cfg = EnsembleConfig::new(
            g,
            NoiseModel::none(1),
            InitialData::Kink { center: 0.5 },
            SolverConfig::new(0.04, 1e-6, 1e-4).with_stride(50),
        );
        cfg.eps_list = vec![0.04, 0.02, 0.01];
        let (rep, _) = sharp_interface_sweep(&cfg).unwrap();
        assert!(rep.separation_monotone);
        for w in rep.rows.windows(2) {
            let ratio = w[1].phase_fraction / w[0].phase_fraction;
            assert!((ratio - 0.5).abs() <= 0.1, "{ratio}");
        }
        let c0 = cfg.well.surface_tension();
        for r in &rep.rows {
            assert!(r.bv_g_min >= 0.5 * c0 && r.bv_g_max <= 1.5 * c0);
        }
        assert_eq!(rep.coupling_l1.len(), 2);
    }
}
