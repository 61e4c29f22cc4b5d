//! Functionals of a field or a trajectory: energy, localized surface
//! measure, diffuse mean curvature, normal direction, energy-identity
//! residuals, `G`-transform diagnostics, increment scaling and interface
//! extraction.

use std::collections::HashMap;

use crate::error::{Result, SacError};
use crate::grid::{Grid, ScalarField, VectorFieldSample};
use crate::noise::{radial_cutoff, ScalarJet, Vec2};
use crate::potential::DoubleWell;
use crate::solver::{ProbeSeries, TrajectoryResult};
use crate::stats;

/// Analytic test function `η ∈ C²(Ū)`.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    ConstantOne,
    /// `β(|x − c|²/R²)` with the smooth cutoff `β(s) = exp(1 − 1/(1 − s))`.
    Bump { center: Vec2, radius: f64 },
    /// `x_axis − center`: the affine coordinate window, so `∫G(u)η` tracks
    /// the first moment of `G(u)`.
    CoordinateWindow { axis: usize, center: f64 },
}

impl TestFunction {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            TestFunction::ConstantOne => Ok(()),
            TestFunction::Bump { radius, center } => {
                if !(*radius > 0.0 && radius.is_finite()) || !center.iter().all(|c| c.is_finite()) {
                    return Err(SacError::Config(format!("invalid bump test function {self:?}")));
                }
                Ok(())
            }
            TestFunction::CoordinateWindow { axis, center } => {
                if *axis >= dim || !center.is_finite() {
                    return Err(SacError::Config(format!(
                        "coordinate window axis {axis} invalid in dimension {dim}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn jet(&self, dim: usize, x: Vec2) -> ScalarJet {
        match self {
            TestFunction::ConstantOne => ScalarJet::ONE,
            TestFunction::Bump { center, radius } => {
                let (v, g, h) = radial_cutoff(dim, x, *center, *radius);
                ScalarJet { v, g, h }
            }
            TestFunction::CoordinateWindow { axis, center } => {
                let mut g = [0.0; 2];
                g[*axis] = 1.0;
                ScalarJet {
                    v: x[*axis] - center,
                    g,
                    h: [[0.0; 2]; 2],
                }
            }
        }
    }

    pub fn value(&self, dim: usize, x: Vec2) -> f64 {
        self.jet(dim, x).v
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.len()).map(|i| self.value(grid.dim(), grid.coord(i))).collect()
    }
}

/// Snapshot diagnostics of one field.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub t: f64,
    pub energy: f64,
    /// `∫ w_ε²/ε`.
    pub willmore: f64,
    /// `μ_ε(η)` per identity probe.
    pub mu_eta: Vec<f64>,
    /// `∫ |∇G(u)|`.
    pub bv_g: f64,
    /// `∫ |G(u)|`.
    pub l1_g: f64,
    pub l1_norm: f64,
    pub min: f64,
    pub max: f64,
    /// Measure of the diffuse region `{|u| < 0.9}`.
    pub phase_fraction: f64,
    /// `∫ G(u) η` per g-probe.
    pub g_eta: Vec<f64>,
}

/// `E_ε(u) = ∫ (ε/2)|∇u|² + F(u)/ε`, gradient on grid edges.
pub fn energy(u: &ScalarField, eps: f64, well: &DoubleWell) -> f64 {
    surface_measure(u, eps, well, &TestFunction::ConstantOne)
}

/// `μ_ε(η) = ∫ η [(ε/2)|∇u|² + F(u)/ε]`. The potential part is nodal; the
/// gradient part lives on edges with `η` averaged to the edge midpoint.
pub fn surface_measure(u: &ScalarField, eps: f64, well: &DoubleWell, eta: &TestFunction) -> f64 {
    let g = *u.grid();
    let n = g.len();
    let m = g.nodes_per_axis();
    let e = eta.sample(&g);
    let mut mu = 0.0;
    for idx in 0..n {
        mu += g.weight(idx) * e[idx] * well.f(u.values[idx]) / eps;
    }
    let mut fx = vec![0.0; n];
    let mut fy = vec![0.0; n];
    g.forward_gradient_into(&u.values, &mut fx, &mut fy);
    for (axis, comp) in [&fx, &fy].into_iter().enumerate().take(g.dim()) {
        let stride = if axis == 0 { 1 } else { m };
        for idx in 0..n {
            let we = g.edge_weight(axis, idx);
            if we == 0.0 {
                continue;
            }
            let (ix, iy) = g.unindex(idx);
            let along = if axis == 0 { ix } else { iy };
            let nb = if along + 1 < m { idx + stride } else { idx + stride - m * stride };
            let eta_e = 0.5 * (e[idx] + e[nb]);
            mu += we * eta_e * 0.5 * eps * comp[idx] * comp[idx];
        }
    }
    mu
}

/// `w_ε = −εΔu + F'(u)/ε`.
pub fn diffuse_mean_curvature(u: &ScalarField, eps: f64, well: &DoubleWell) -> ScalarField {
    let g = *u.grid();
    let lap = g.laplacian(u);
    let values = u
        .values
        .iter()
        .zip(&lap.values)
        .map(|(&v, &l)| -eps * l + well.f_prime(v) / eps)
        .collect();
    ScalarField::from_values(g, values)
}

/// `∫ w_ε²/ε`.
pub fn willmore(u: &ScalarField, eps: f64, well: &DoubleWell) -> f64 {
    let w = diffuse_mean_curvature(u, eps, well);
    w.grid().integrate(&w.map(|v| v * v / eps))
}

pub const NORMAL_TIE_THRESHOLD: f64 = 1e-12;

/// `∇u/|∇u|` (central gradient), `e₁` where `|∇u| ≤ 1e−12`.
pub fn normal_direction(u: &ScalarField) -> VectorFieldSample {
    let g = *u.grid();
    let grad = g.gradient(u);
    let mut nx = vec![0.0; g.len()];
    let mut ny = vec![0.0; g.len()];
    for idx in 0..g.len() {
        let v = grad.at(idx);
        let norm = v[0].hypot(v[1]);
        if norm > NORMAL_TIE_THRESHOLD {
            nx[idx] = v[0] / norm;
            ny[idx] = v[1] / norm;
        } else {
            nx[idx] = 1.0;
        }
    }
    let comps = if g.dim() == 1 { vec![nx] } else { vec![nx, ny] };
    VectorFieldSample::from_components(g, comps)
}

/// `(G(u), ∫|∇G(u)|, ∫|G(u)|)` with the central gradient.
pub fn g_diagnostics(u: &ScalarField, well: &DoubleWell) -> (ScalarField, f64, f64) {
    let gf = u.map(|v| well.g(v));
    let grid = *u.grid();
    let grad = grid.gradient(&gf);
    let norms: Vec<f64> = (0..grid.len())
        .map(|i| {
            let v = grad.at(i);
            v[0].hypot(v[1])
        })
        .collect();
    let bv = grid.integrate_slice(&norms);
    let l1 = grid.integrate(&gf.map(f64::abs));
    (gf, bv, l1)
}

/// Full snapshot report; `mu_eta` is supplied by the caller.
pub fn energy_report(
    u: &ScalarField,
    t: f64,
    eps: f64,
    well: &DoubleWell,
    mu_eta: Vec<f64>,
    g_probes: &[TestFunction],
) -> EnergyReport {
    let grid = *u.grid();
    let (gf, bv_g, l1_g) = g_diagnostics(u, well);
    let g_eta = g_probes
        .iter()
        .map(|p| {
            let e = p.sample(&grid);
            let prod: Vec<f64> = gf.values.iter().zip(&e).map(|(a, b)| a * b).collect();
            grid.integrate_slice(&prod)
        })
        .collect();
    EnergyReport {
        t,
        energy: energy(u, eps, well),
        willmore: willmore(u, eps, well),
        mu_eta,
        bv_g,
        l1_g,
        l1_norm: grid.integrate(&u.map(f64::abs)),
        min: u.min(),
        max: u.max(),
        phase_fraction: grid.integrate(&u.map(|v| if v.abs() < 0.9 { 1.0 } else { 0.0 })),
        g_eta,
    }
}

/// Terms of an energy identity over `[t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResidual {
    pub residual: f64,
    /// `Δμ` (or `ΔE`).
    pub delta: f64,
    pub dissipation: f64,
    pub curvature: f64,
    pub correction: f64,
    pub martingale: f64,
    /// Quadratic variation of the martingale term: its variance scale.
    pub qv: f64,
}

fn step_range(dt: f64, len: usize, t0: f64, t1: f64) -> Result<(usize, usize)> {
    let k0 = (t0 / dt).round();
    let k1 = (t1 / dt).round();
    let tol = 1e-9 * dt.max(t1.abs());
    if (k0 * dt - t0).abs() > tol || (k1 * dt - t1).abs() > tol {
        return Err(SacError::Contract(format!("[{t0}, {t1}] is not on the step grid dt = {dt}")));
    }
    let (k0, k1) = (k0 as usize, k1 as usize);
    if !(t0 < t1) || k1 >= len {
        return Err(SacError::Contract(format!("invalid identity window [{t0}, {t1}]")));
    }
    Ok((k0, k1))
}

fn trapezoid(v: &[f64], k0: usize, k1: usize, dt: f64) -> f64 {
    let inner: f64 = v[k0 + 1..k1].iter().sum();
    dt * (0.5 * (v[k0] + v[k1]) + inner)
}

/// `Δμ + ∫∫ηw²/ε − ∫∫w∇η·∇u − M − P` from one recorded series.
pub fn series_residual(s: &ProbeSeries, dt: f64, t0: f64, t1: f64) -> Result<IdentityResidual> {
    if s.martingale_increment.len() + 1 != s.mu.len() {
        return Err(SacError::Contract("identity record is incomplete".into()));
    }
    let (k0, k1) = step_range(dt, s.mu.len(), t0, t1)?;
    let delta = s.mu[k1] - s.mu[k0];
    let dissipation = trapezoid(&s.dissipation_rate, k0, k1, dt);
    let curvature = trapezoid(&s.curvature_rate, k0, k1, dt);
    let correction = trapezoid(&s.correction_rate, k0, k1, dt);
    let martingale: f64 = s.martingale_increment[k0..k1].iter().sum();
    let qv: f64 = s.qv_increment[k0..k1].iter().sum();
    Ok(IdentityResidual {
        residual: delta + dissipation - curvature - martingale - correction,
        delta,
        dissipation,
        curvature,
        correction,
        martingale,
        qv,
    })
}

/// Global identity `ΔE + ∫∫w²/ε − M − P` over `[t0, t1]`.
pub fn global_identity_residual(result: &TrajectoryResult, t0: f64, t1: f64) -> Result<IdentityResidual> {
    let ledger = result
        .ledger
        .as_ref()
        .ok_or_else(|| SacError::Contract("trajectory was run without identity recording".into()))?;
    series_residual(&ledger.global, ledger.dt, t0, t1)
}

/// Localized identity for a test function that was tracked during the run.
pub fn localized_identity_residual(
    result: &TrajectoryResult,
    t0: f64,
    t1: f64,
    eta: &TestFunction,
) -> Result<IdentityResidual> {
    let ledger = result
        .ledger
        .as_ref()
        .ok_or_else(|| SacError::Contract("trajectory was run without identity recording".into()))?;
    let k = ledger
        .probes
        .iter()
        .position(|p| p == eta)
        .ok_or_else(|| SacError::Contract(format!("test function {eta:?} was not tracked")))?;
    series_residual(&ledger.series[k], ledger.dt, t0, t1)
}

/// Mean squared increments per lag and their log-log slope.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementFit {
    pub lags: Vec<f64>,
    pub mean_square: Vec<f64>,
    /// `NaN` when some mean square vanishes.
    pub slope: f64,
}

pub const MIN_INCREMENT_SAMPLES: usize = 100;

/// `E|X(t+τ) − X(t)|²` averaged over `t` and samples, for series `X`
/// sampled every `snapshot_dt`; lags are in snapshot units.
pub fn increment_statistic(samples: &[Vec<f64>], snapshot_dt: f64, lags: &[usize]) -> Result<IncrementFit> {
    if samples.len() < MIN_INCREMENT_SAMPLES {
        return Err(SacError::Contract(format!(
            "increment statistic needs at least {MIN_INCREMENT_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let len = samples.iter().map(Vec::len).min().unwrap_or(0);
    if lags.is_empty() || lags.iter().any(|&l| l == 0 || l >= len) {
        return Err(SacError::Contract(format!("lags {lags:?} do not fit {len} snapshots")));
    }
    let mut mean_square = Vec::with_capacity(lags.len());
    for &lag in lags {
        let per_sample: Vec<f64> = samples
            .iter()
            .map(|s| {
                let sq: Vec<f64> = (0..len - lag).map(|j| (s[j + lag] - s[j]).powi(2)).collect();
                stats::mean(&sq)
            })
            .collect();
        mean_square.push(stats::mean(&per_sample));
    }
    let taus: Vec<f64> = lags.iter().map(|&l| l as f64 * snapshot_dt).collect();
    let slope = if mean_square.iter().all(|&v| v > 0.0) && taus.len() >= 2 {
        stats::log_log_slope(&taus, &mean_square)
    } else {
        f64::NAN
    };
    Ok(IncrementFit {
        lags: taus,
        mean_square,
        slope,
    })
}

/// Zero level set of a field.
#[derive(Debug, Clone, PartialEq)]
pub enum Interface {
    /// 1D crossing positions, increasing.
    Points(Vec<f64>),
    /// 2D polylines; closed loops repeat their first vertex at the end.
    Polylines(Vec<Vec<Vec2>>),
}

impl Interface {
    pub fn is_empty(&self) -> bool {
        match self {
            Interface::Points(p) => p.is_empty(),
            Interface::Polylines(p) => p.is_empty(),
        }
    }

    /// Mean distance of the vertices (or points) to `center`; `None` when
    /// empty.
    pub fn mean_distance(&self, center: Vec2) -> Option<f64> {
        let d: Vec<f64> = match self {
            Interface::Points(p) => p.iter().map(|x| (x - center[0]).abs()).collect(),
            Interface::Polylines(lines) => lines
                .iter()
                .flat_map(|l| {
                    let n = if l.len() > 1 && l.first() == l.last() { l.len() - 1 } else { l.len() };
                    l[..n].iter().map(|p| (p[0] - center[0]).hypot(p[1] - center[1]))
                })
                .collect(),
        };
        (!d.is_empty()).then(|| stats::mean(&d))
    }
}

fn crossing(a: f64, b: f64) -> f64 {
    a / (a - b)
}

/// Zero crossings by linear interpolation along grid edges; marching
/// squares (saddles resolved by the cell average) in 2D.
pub fn interface_extract(u: &ScalarField) -> Interface {
    let g = *u.grid();
    let m = g.nodes_per_axis();
    let h = g.spacing();
    let periodic = g.closure() == crate::grid::Closure::Periodic;
    let cells = if periodic { m } else { m - 1 };
    let v = &u.values;
    let pos = |x: f64| x > 0.0;
    if g.dim() == 1 {
        let mut pts = Vec::new();
        for i in 0..cells {
            let j = (i + 1) % m;
            if pos(v[i]) != pos(v[j]) {
                pts.push((i as f64 + crossing(v[i], v[j])) * h);
            }
        }
        return Interface::Points(pts);
    }
    // edge ids: (0, i, j) joins (i,j)-(i+1,j); (1, i, j) joins (i,j)-(i,j+1)
    let at = |i: usize, j: usize| v[(j % m) * m + (i % m)];
    let point = |e: (u8, usize, usize)| -> Vec2 {
        let (k, i, j) = e;
        if k == 0 {
            let t = crossing(at(i, j), at(i + 1, j));
            [(i as f64 + t) * h, j as f64 * h]
        } else {
            let t = crossing(at(i, j), at(i, j + 1));
            [i as f64 * h, (j as f64 + t) * h]
        }
    };
    let key = |e: (u8, usize, usize)| (e.0, e.1 % m, e.2 % m);
    let mut segs: Vec<[(u8, usize, usize); 2]> = Vec::new();
    for j in 0..cells {
        for i in 0..cells {
            let c = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let s = c.map(pos);
            let bottom = (0u8, i, j);
            let right = (1u8, i + 1, j);
            let top = (0u8, i, j + 1);
            let left = (1u8, i, j);
            let mut cut = Vec::with_capacity(4);
            if s[0] != s[1] {
                cut.push(bottom);
            }
            if s[1] != s[2] {
                cut.push(right);
            }
            if s[2] != s[3] {
                cut.push(top);
            }
            if s[3] != s[0] {
                cut.push(left);
            }
            match cut.len() {
                2 => segs.push([cut[0], cut[1]]),
                4 => {
                    let center = pos(0.25 * (c[0] + c[1] + c[2] + c[3]));
                    if center == s[0] {
                        segs.push([bottom, right]);
                        segs.push([top, left]);
                    } else {
                        segs.push([bottom, left]);
                        segs.push([right, top]);
                    }
                }
                _ => {}
            }
        }
    }
    let mut by_edge: HashMap<(u8, usize, usize), Vec<usize>> = HashMap::new();
    for (s, seg) in segs.iter().enumerate() {
        for e in seg {
            by_edge.entry(key(*e)).or_default().push(s);
        }
    }
    let mut used = vec![false; segs.len()];
    let mut lines = Vec::new();
    for start in 0..segs.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut chain: Vec<(u8, usize, usize)> = vec![segs[start][0], segs[start][1]];
        // extend forward, then backward
        for dir in 0..2 {
            loop {
                let end = if dir == 0 { *chain.last().unwrap() } else { chain[0] };
                let next = by_edge[&key(end)].iter().copied().find(|&s| !used[s]);
                let Some(s) = next else { break };
                used[s] = true;
                let other = if key(segs[s][0]) == key(end) { segs[s][1] } else { segs[s][0] };
                if dir == 0 {
                    chain.push(other);
                } else {
                    chain.insert(0, other);
                }
            }
        }
        let mut line: Vec<Vec2> = chain.iter().map(|&e| point(e)).collect();
        if chain.len() > 2 && key(chain[0]) == key(*chain.last().unwrap()) {
            let first = line[0];
            *line.last_mut().unwrap() = first;
        }
        lines.push(line);
    }
    Interface::Polylines(lines)
}

/// Mean distance of the extracted interface to `center`; `None` if `u`
/// does not change sign.
pub fn circle_radius(u: &ScalarField, center: Vec2) -> Option<f64> {
    interface_extract(u).mean_distance(center)
}
