//! Figures rebuilt from the CSV tables of an output directory, so a plot
//! never sees more than the written numbers.

use std::path::{Path, PathBuf};

use crate::error::{io_at, CliError, CliResult};
use crate::svg::{histogram, render, Figure, Mark, Series};

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Table> {
        let mut r = csv::Reader::from_path(path).map_err(|e| io_at(path, e))?;
        let header = r.headers().map_err(|e| io_at(path, e))?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| io_at(path, e))?;
            let row = rec
                .iter()
                .map(|c| c.parse::<f64>().map_err(|e| io_at(path, format!("cell {c:?}: {e}"))))
                .collect::<CliResult<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    fn need(&self, name: &str, path: &Path) -> CliResult<Vec<f64>> {
        self.column(name).ok_or_else(|| io_at(path, format!("missing column {name}")))
    }
}

fn write_svg(path: PathBuf, fig: &Figure) -> CliResult<PathBuf> {
    std::fs::write(&path, render(fig)).map_err(|e| io_at(&path, e))?;
    Ok(path)
}

/// Distinct values in order of first appearance.
fn distinct(v: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &x in v {
        if !out.iter().any(|y| y.to_bits() == x.to_bits()) {
            out.push(x);
        }
    }
    out
}

fn trajectory(dir: &Path, name: &str, out: &mut Vec<PathBuf>) -> CliResult<()> {
    let path = dir.join(name);
    let t = Table::read(&path)?;
    let time = t.need("t", &path)?;
    let stem = name.trim_end_matches(".csv");
    let prefix = if stem == "trajectory" { String::new() } else { format!("{stem}_") };
    let fig = Figure::new("Energy trace", "t", "E_eps")
        .with(Series::new("E_eps", time.clone(), t.need("E", &path)?, Mark::Line))
        .with(Series::new("BV(G(u))", time.clone(), t.need("bv_g", &path)?, Mark::Line));
    out.push(write_svg(dir.join(format!("{prefix}energy.svg")), &fig)?);
    if let Some(radius) = t.column("radius") {
        let r0 = radius.first().copied().unwrap_or(f64::NAN);
        let law: Vec<f64> = time.iter().map(|&s| (r0 * r0 - 2.0 * s).max(0.0).sqrt()).collect();
        let fig = Figure::new("Circle radius", "t", "radius")
            .with(Series::new("measured", time.clone(), radius, Mark::Points))
            .with(Series::new("sqrt(r0^2 - 2t)", time, law, Mark::Line));
        out.push(write_svg(dir.join(format!("{prefix}radius.svg")), &fig)?);
    }
    Ok(())
}

fn moments(dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    let path = dir.join("moments.csv");
    let t = Table::read(&path)?;
    let eps = t.need("eps", &path)?;
    let p = t.need("p", &path)?;
    let sup = t.need("sup_energy_moment", &path)?;
    let levels = distinct(&eps);
    let orders = distinct(&p);
    let width = 0.8 / orders.len().max(1) as f64;
    let mut fig = Figure::new("Moments of sup E_eps", "eps", "E[(sup E)^p]");
    for (k, &q) in orders.iter().enumerate() {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (i, (&e, &pp)) in eps.iter().zip(&p).enumerate() {
            if pp.to_bits() == q.to_bits() {
                let slot = levels.iter().position(|l| l.to_bits() == e.to_bits()).unwrap_or(0);
                xs.push(slot as f64 - 0.4 + width * (k as f64 + 0.5));
                ys.push(sup[i]);
            }
        }
        fig.series.push(Series::new(format!("p = {q}"), xs, ys, Mark::Bars(width)));
    }
    fig.x_ticks = Some(levels.iter().enumerate().map(|(i, e)| (i as f64, format!("{e}"))).collect());
    out.push(write_svg(dir.join("moments.svg"), &fig)?);
    Ok(())
}

fn residuals(dir: &Path, name: &str, out: &mut Vec<PathBuf>) -> CliResult<()> {
    let path = dir.join(name);
    let t = Table::read(&path)?;
    let t0 = t.need("t0", &path)?;
    let t1 = t.need("t1", &path)?;
    let res = t.need("residual", &path)?;
    let qv = t.need("qv_estimate", &path)?;
    let stem = name.trim_end_matches(".csv");
    let windows: Vec<(f64, f64)> = {
        let mut w: Vec<(f64, f64)> = Vec::new();
        for (&a, &b) in t0.iter().zip(&t1) {
            if !w.iter().any(|&(x, y)| x == a && y == b) {
                w.push((a, b));
            }
        }
        w
    };
    for (k, &(a, b)) in windows.iter().enumerate() {
        let idx: Vec<usize> = (0..res.len()).filter(|&i| t0[i] == a && t1[i] == b).collect();
        let vals: Vec<f64> = idx.iter().map(|&i| res[i]).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let band = 2.0 * (idx.iter().map(|&i| qv[i]).sum::<f64>() / n / n).sqrt();
        let bins = ((n.sqrt().ceil() as usize).clamp(5, 40)).min(vals.len().max(1));
        let (c, counts, w) = histogram(&vals, bins);
        let mut fig = Figure::new(&format!("Energy-identity residual on [{a}, {b}]"), "residual", "count")
            .with(Series::new("samples", c, counts, Mark::Bars(w)));
        fig.band = Some((-band, band));
        fig.band_label = "CLT band, 2 sd".into();
        fig.vlines = vec![mean];
        out.push(write_svg(dir.join(format!("{stem}_w{k}.svg")), &fig)?);
    }
    Ok(())
}

/// Least-squares slope and intercept of `y` on `x`.
fn fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn increments(dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    let path = dir.join("increments.csv");
    let t = Table::read(&path)?;
    let eps = t.need("eps", &path)?;
    let lag = t.need("lag", &path)?;
    let ms = t.need("mean_square", &path)?;
    let mut fig = Figure::new("Increments of <G(u), eta>", "lag", "mean square");
    fig.log_x = true;
    fig.log_y = true;
    for e in distinct(&eps) {
        let idx: Vec<usize> = (0..eps.len()).filter(|&i| eps[i] == e && lag[i] > 0.0 && ms[i] > 0.0).collect();
        let lx: Vec<f64> = idx.iter().map(|&i| lag[i].ln()).collect();
        let ly: Vec<f64> = idx.iter().map(|&i| ms[i].ln()).collect();
        let xs: Vec<f64> = idx.iter().map(|&i| lag[i]).collect();
        fig.series.push(Series::new(format!("eps = {e}"), xs.clone(), idx.iter().map(|&i| ms[i]).collect(), Mark::Points));
        if idx.len() >= 2 {
            let (slope, icpt) = fit(&lx, &ly);
            let line = lx.iter().map(|&x| (icpt + slope * x).exp()).collect();
            fig.series.push(Series::new(format!("fit, slope {slope:.3}"), xs, line, Mark::Line));
        }
    }
    out.push(write_svg(dir.join("increments.svg"), &fig)?);
    Ok(())
}

fn series(dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    let path = dir.join("series.csv");
    let t = Table::read(&path)?;
    let eps = t.need("eps", &path)?;
    let time = t.need("t", &path)?;
    let energy = t.need("energy", &path)?;
    let mut fig = Figure::new("Mean energy", "t", "E[E_eps]");
    for e in distinct(&eps) {
        let idx: Vec<usize> = (0..eps.len()).filter(|&i| eps[i] == e).collect();
        fig.series.push(Series::new(
            format!("eps = {e}"),
            idx.iter().map(|&i| time[i]).collect(),
            idx.iter().map(|&i| energy[i]).collect(),
            Mark::Line,
        ));
    }
    out.push(write_svg(dir.join("series.svg"), &fig)?);
    Ok(())
}

fn sweep(dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    let path = dir.join("sweep.csv");
    let t = Table::read(&path)?;
    let eps = t.need("eps", &path)?;
    let mut fig = Figure::new("Sharp-interface sweep", "eps", "time average")
        .with(Series::new("phase fraction", eps.clone(), t.need("phase_fraction", &path)?, Mark::Line))
        .with(Series::new("BV(G(u))", eps, t.need("bv_g_mean", &path)?, Mark::Line));
    fig.log_x = true;
    out.push(write_svg(dir.join("sweep.svg"), &fig)?);
    Ok(())
}

/// Renders every figure whose table is present in `dir`.
pub fn render_dir(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_at(dir, e))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    let mut out = Vec::new();
    for name in &names {
        match name.as_str() {
            "trajectory.csv" => trajectory(dir, name, &mut out)?,
            "moments.csv" => moments(dir, &mut out)?,
            "increments.csv" => increments(dir, &mut out)?,
            "series.csv" => series(dir, &mut out)?,
            "sweep.csv" => sweep(dir, &mut out)?,
            n if n.starts_with("residuals_") => residuals(dir, n, &mut out)?,
            _ => {}
        }
    }
    let traj = dir.join("trajectories");
    if traj.is_dir() {
        let mut inner: Vec<String> = std::fs::read_dir(&traj)
            .map_err(|e| io_at(&traj, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".csv"))
            .collect();
        inner.sort();
        for name in &inner {
            trajectory(&traj, name, &mut out)?;
        }
    }
    if out.is_empty() {
        return Err(CliError::Input(format!("{}: no known CSV tables to plot", dir.display())));
    }
    Ok(out)
}
