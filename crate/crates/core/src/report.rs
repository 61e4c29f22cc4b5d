//! CSV tables for trajectories and ensembles.
//!
//! Floats are written in Rust's shortest round-trip form, so a table is a
//! pure function of the numbers it holds.

use std::io::Write;

use crate::diagnostics::EnergyReport;
use crate::ensemble::{EnsembleStats, EpsStats, SweepReport};
use crate::error::{Result, SacError};

fn io_err(e: impl std::fmt::Display) -> SacError {
    SacError::Io(e.to_string())
}

/// Deterministic float formatting.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

struct Table<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> Table<W> {
    fn new(w: W, header: &[&str]) -> Result<Self> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(header).map_err(io_err)?;
        Ok(Table { out })
    }

    fn row(&mut self, cells: Vec<String>) -> Result<()> {
        self.out.write_record(&cells).map_err(io_err)
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(io_err)
    }
}

pub const TRAJECTORY_HEADER: [&str; 7] = ["t", "E", "willmore", "bv_g", "l1", "min", "max"];

/// Per-trajectory table; `l1` is `∫|G(u)|`. An optional extra column
/// (for example an extracted radius) is appended when given.
pub fn write_trajectory<W: Write>(w: W, reports: &[EnergyReport], extra: Option<(&str, &[f64])>) -> Result<()> {
    let mut header = TRAJECTORY_HEADER.to_vec();
    if let Some((name, values)) = extra {
        if values.len() != reports.len() {
            return Err(SacError::Contract(format!(
                "column {name} has {} entries for {} rows",
                values.len(),
                reports.len()
            )));
        }
        header.push(name);
    }
    let mut t = Table::new(w, &header)?;
    for (i, r) in reports.iter().enumerate() {
        let mut cells: Vec<String> = [r.t, r.energy, r.willmore, r.bv_g, r.l1_g, r.min, r.max]
            .iter()
            .map(|&x| fmt_f64(x))
            .collect();
        if let Some((_, values)) = extra {
            cells.push(fmt_f64(values[i]));
        }
        t.row(cells)?;
    }
    t.finish()
}

/// Residual rows of one `ε` for one test function (`None`: global).
pub fn write_residuals<W: Write>(w: W, stats: &EpsStats, probe: Option<usize>) -> Result<()> {
    let mut t = Table::new(w, &["sample", "t0", "t1", "residual", "martingale_term", "qv_estimate"])?;
    for rec in &stats.records {
        for row in rec.residuals.iter().filter(|r| r.probe == probe) {
            t.row(vec![
                rec.sample.to_string(),
                fmt_f64(row.t0),
                fmt_f64(row.t1),
                fmt_f64(row.value.residual),
                fmt_f64(row.value.martingale),
                fmt_f64(row.value.qv),
            ])?;
        }
    }
    t.finish()
}

/// `eps, p, sup_energy_moment, dissipation_moment`.
pub fn write_moments<W: Write>(w: W, stats: &EnsembleStats) -> Result<()> {
    let mut t = Table::new(w, &["eps", "p", "sup_energy_moment", "dissipation_moment"])?;
    for e in &stats.per_eps {
        for (&(p, a), &(_, b)) in e.sup_energy_moments.iter().zip(&e.dissipation_moments) {
            t.row(vec![fmt_f64(e.eps), fmt_f64(p), fmt_f64(a), fmt_f64(b)])?;
        }
    }
    t.finish()
}

/// `eps, lambda, probability`.
pub fn write_tails<W: Write>(w: W, stats: &EnsembleStats) -> Result<()> {
    let mut t = Table::new(w, &["eps", "lambda", "probability"])?;
    for e in &stats.per_eps {
        for &(l, p) in &e.tail {
            t.row(vec![fmt_f64(e.eps), fmt_f64(l), fmt_f64(p)])?;
        }
    }
    t.finish()
}

/// Sample-mean time series: `eps, t, energy, phase_fraction, bv_g`.
pub fn write_mean_series<W: Write>(w: W, stats: &EnsembleStats) -> Result<()> {
    let mut t = Table::new(w, &["eps", "t", "energy", "phase_fraction", "bv_g"])?;
    for e in &stats.per_eps {
        for (j, &time) in e.times.iter().enumerate().take(e.mean_energy.len()) {
            t.row(vec![
                fmt_f64(e.eps),
                fmt_f64(time),
                fmt_f64(e.mean_energy[j]),
                fmt_f64(e.mean_phase_fraction[j]),
                fmt_f64(e.mean_bv_g[j]),
            ])?;
        }
    }
    t.finish()
}

/// `eps, lag, mean_square` of the `∫G(u)η` increments.
pub fn write_increments<W: Write>(w: W, stats: &EnsembleStats) -> Result<()> {
    let mut t = Table::new(w, &["eps", "lag", "mean_square"])?;
    for e in &stats.per_eps {
        if let Some(fit) = &e.increment_fit {
            for (&l, &m) in fit.lags.iter().zip(&fit.mean_square) {
                t.row(vec![fmt_f64(e.eps), fmt_f64(l), fmt_f64(m)])?;
            }
        }
    }
    t.finish()
}

/// `eps, phase_fraction, bv_g_mean, bv_g_min, bv_g_max, mean_sup_energy`.
pub fn write_sweep<W: Write>(w: W, sweep: &SweepReport) -> Result<()> {
    let mut t = Table::new(
        w,
        &["eps", "phase_fraction", "bv_g_mean", "bv_g_min", "bv_g_max", "mean_sup_energy"],
    )?;
    for r in &sweep.rows {
        t.row(vec![
            fmt_f64(r.eps),
            fmt_f64(r.phase_fraction),
            fmt_f64(r.bv_g_mean),
            fmt_f64(r.bv_g_min),
            fmt_f64(r.bv_g_max),
            fmt_f64(r.mean_sup_energy),
        ])?;
    }
    t.finish()
}

/// Structured-text summary of an ensemble.
pub fn write_summary<W: Write>(mut w: W, stats: &EnsembleStats, gates: &[(String, bool)]) -> Result<()> {
    let mut s = String::new();
    s.push_str(&format!("samples = {}\n", stats.samples));
    for e in &stats.per_eps {
        s.push_str(&format!("\n[[eps]]\neps = {}\n", fmt_f64(e.eps)));
        s.push_str(&format!("accepted = {}\nfailed = {}\n", e.accepted(), e.failures.len()));
        for f in &e.failures {
            s.push_str(&format!("# failed sample {} seed {}: {}\n", f.sample, f.seed, f.error));
        }
        s.push_str(&format!("initial_energy = {}\n", fmt_f64(e.initial_energy)));
        s.push_str(&format!("mean_sup_energy = {}\n", fmt_f64(e.mean_sup_energy())));
        s.push_str(&format!("mean_dissipation = {}\n", fmt_f64(e.mean_dissipation())));
        s.push_str(&format!("c_est = {}\n", fmt_f64(e.c_est)));
        s.push_str(&format!("containment_violations = {}\n", e.containment_violations));
        if let Some(fit) = &e.increment_fit {
            s.push_str(&format!("increment_slope = {}\n", fmt_f64(fit.slope)));
        }
        for r in &e.residuals {
            let probe = r.probe.as_ref().map_or("global".to_string(), |p| format!("{p:?}"));
            s.push_str(&format!(
                "\n[[eps.residual]]\nt0 = {}\nt1 = {}\nprobe = \"{}\"\nmean = {}\nstderr = {}\nqv_stderr = {}\n",
                fmt_f64(r.t0),
                fmt_f64(r.t1),
                probe.replace('"', "'"),
                fmt_f64(r.mean),
                fmt_f64(r.stderr),
                fmt_f64(r.qv_stderr),
            ));
        }
    }
    if !gates.is_empty() {
        s.push_str("\n[gates]\n");
        for (name, ok) in gates {
            s.push_str(&format!("{name} = {ok}\n"));
        }
    }
    w.write_all(s.as_bytes()).map_err(io_err)
}
