//! Flow backend: the stochastic flow `φ_{0,t}` of `−X`, the transformed
//! random-coefficient equation
//! `∂_t v = R:D²v + S·∇v − F'(v)/ε²` for `v(t, y) = u(t, φ_{0,t}(y))`,
//! and the map back `u(t, x) = v(t, φ_{0,t}^{-1}(x))`.
//!
//! With `ψ = φ^{-1}` and `K(y) = Dψ(φ(y)) = Dφ(y)^{-1}`:
//! `R = K Kᵀ` and `S^j = Δψ^j(φ(y)) = Σ_{i,m} K_{mi} ∂_{y_m} K_{ji}`.
//! The second derivatives are taken by central differences of `K` on the
//! Lagrangian grid, where `v` lives, so no interpolation enters `S`.

use crate::diagnostics;
use crate::error::{Result, SacError};
use crate::grid::{Closure, Grid, ScalarField};
use crate::interp::interpolate;
use crate::noise::{Mat2, NoiseModel, Vec2};
use crate::potential::DoubleWell;
use crate::rng::BrownianPath;
use crate::solver::{DiffusionTreatment, SolverConfig, TrajectoryResult};

/// Forward positions and tangent maps of `φ_{0,t}` at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    grid: Grid,
    pub t: f64,
    /// `φ_{0,t}(y)`, unwrapped on the torus.
    pub forward: Vec<Vec2>,
    /// `Dφ_{0,t}(y)`, `tangent[idx][i][j] = ∂_j φ^i`.
    pub tangent: Vec<Mat2>,
}

fn det(m: &Mat2, dim: usize) -> f64 {
    if dim == 1 {
        m[0][0]
    } else {
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }
}

fn inverse(m: &Mat2, dim: usize) -> Mat2 {
    if dim == 1 {
        return [[1.0 / m[0][0], 0.0], [0.0, 1.0]];
    }
    let d = det(m, dim);
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

/// `(f(p), Df(p))` for the step field `f = −X⁰ dt − Σ_k X^k ΔW_k`, scaled
/// by `sign` (−1 runs the reversed flow).
fn step_field(model: &NoiseModel, grid: &Grid, p: Vec2, dt: f64, dw: &[f64], sign: f64) -> (Vec2, Mat2) {
    let q = if grid.closure() == Closure::Periodic {
        [p[0].rem_euclid(1.0), p[1].rem_euclid(1.0)]
    } else {
        p
    };
    let dim = grid.dim();
    let mut f = [0.0; 2];
    let mut df = [[0.0; 2]; 2];
    let mut add = |jet: crate::noise::Jet, w: f64| {
        for i in 0..dim {
            f[i] -= sign * jet.v[i] * w;
            for j in 0..dim {
                df[i][j] -= sign * jet.d[i][j] * w;
            }
        }
    };
    if model.drift().is_some() {
        add(model.drift_jet(0.0, q), dt);
    }
    for (jet, &w) in model.mode_jets(0.0, q).into_iter().zip(dw) {
        add(jet, w);
    }
    (f, df)
}

/// One Heun step of `dφ = −X(∘dt, φ)` from `p` (position only).
fn heun_point(model: &NoiseModel, grid: &Grid, p: Vec2, dt: f64, dw: &[f64], sign: f64) -> Vec2 {
    let (f0, _) = step_field(model, grid, p, dt, dw, sign);
    let pred = [p[0] + f0[0], p[1] + f0[1]];
    let (f1, _) = step_field(model, grid, pred, dt, dw, sign);
    [p[0] + 0.5 * (f0[0] + f1[0]), p[1] + 0.5 * (f0[1] + f1[1])]
}

impl FlowMap {
    pub fn identity(grid: Grid) -> Self {
        FlowMap {
            grid,
            t: 0.0,
            forward: (0..grid.len()).map(|i| grid.coord(i)).collect(),
            tangent: vec![IDENTITY; grid.len()],
        }
    }

    /// A synthetic map from given positions and tangents.
    pub fn from_parts(grid: Grid, t: f64, forward: Vec<Vec2>, tangent: Vec<Mat2>) -> Result<Self> {
        if forward.len() != grid.len() || tangent.len() != grid.len() {
            return Err(SacError::Contract("flow map sizes disagree with the grid".into()));
        }
        Ok(FlowMap {
            grid,
            t,
            forward,
            tangent,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn min_det(&self) -> f64 {
        self.tangent
            .iter()
            .map(|m| det(m, self.grid.dim()))
            .fold(f64::INFINITY, f64::min)
    }

    /// Heun step of positions and tangent maps with increments `dw` over
    /// `[t, t + dt]`; `step` labels errors.
    pub fn advance(&mut self, model: &NoiseModel, dt: f64, dw: &[f64], step: usize) -> Result<()> {
        let dim = self.grid.dim();
        for (p, j) in self.forward.iter_mut().zip(self.tangent.iter_mut()) {
            let (f0, d0) = step_field(model, &self.grid, *p, dt, dw, 1.0);
            let pred = [p[0] + f0[0], p[1] + f0[1]];
            let dj0 = mat_mul(&d0, j);
            let jp = [
                [j[0][0] + dj0[0][0], j[0][1] + dj0[0][1]],
                [j[1][0] + dj0[1][0], j[1][1] + dj0[1][1]],
            ];
            let (f1, d1) = step_field(model, &self.grid, pred, dt, dw, 1.0);
            let dj1 = mat_mul(&d1, &jp);
            for i in 0..dim {
                p[i] += 0.5 * (f0[i] + f1[i]);
                for l in 0..dim {
                    j[i][l] += 0.5 * (dj0[i][l] + dj1[i][l]);
                }
            }
            let d = det(j, dim);
            if !(d > 0.0) {
                return Err(SacError::DegenerateFlow { step, det: d });
            }
        }
        self.t += dt;
        Ok(())
    }
}

/// Advances `fm` over `[t, t + dt]` with the recorded increments.
pub fn advance_flow(fm: &FlowMap, model: &NoiseModel, dt: f64, increments: &[f64]) -> Result<FlowMap> {
    let mut next = fm.clone();
    let step = (fm.t / dt).round() as usize;
    next.advance(model, dt, increments, step)?;
    Ok(next)
}

/// Positions of `points` carried by the Heun flow over steps `[from, to)`
/// of `path`.
pub fn integrate_points(model: &NoiseModel, grid: &Grid, points: &[Vec2], path: &BrownianPath, from: usize, to: usize) -> Vec<Vec2> {
    let dt = path.dt();
    points
        .iter()
        .map(|&p0| {
            let mut p = p0;
            for s in from..to {
                p = heun_point(model, grid, p, dt, step_increments(path, s), 1.0);
            }
            p
        })
        .collect()
}

fn step_increments(path: &BrownianPath, s: usize) -> &[f64] {
    if path.n_modes() == 0 {
        &[]
    } else {
        path.step(s)
    }
}

/// Inverts one forward Heun step: solves `p = q + ½(f(q) + f(q + f(q)))`
/// by fixed-point iteration started from the reversed Heun step.
fn unstep_point(model: &NoiseModel, grid: &Grid, p: Vec2, dt: f64, dw: &[f64]) -> Vec2 {
    let mut q = heun_point(model, grid, p, dt, dw, -1.0);
    for _ in 0..50 {
        let image = heun_point(model, grid, q, dt, dw, 1.0);
        let r = [p[0] - image[0], p[1] - image[1]];
        q = [q[0] + r[0], q[1] + r[1]];
        if r[0].abs().max(r[1].abs()) <= 1e-15 {
            break;
        }
    }
    q
}

/// `φ_{0,t}^{-1}(x)` for arbitrary points, `t = steps·dt`: each point is
/// carried back to time 0 step by step on the same increments, each
/// backward step inverting the forward Heun step.
pub fn inverse_points(model: &NoiseModel, grid: &Grid, points: &[Vec2], path: &BrownianPath, steps: usize) -> Vec<Vec2> {
    let dt = path.dt();
    points
        .iter()
        .map(|&x| {
            let mut p = x;
            for s in (0..steps).rev() {
                p = unstep_point(model, grid, p, dt, step_increments(path, s));
            }
            p
        })
        .collect()
}

/// [`inverse_points`] at the grid nodes.
pub fn inverse_positions(model: &NoiseModel, grid: &Grid, path: &BrownianPath, steps: usize) -> Vec<Vec2> {
    let nodes: Vec<Vec2> = (0..grid.len()).map(|i| grid.coord(i)).collect();
    inverse_points(model, grid, &nodes, path, steps)
}

/// `(R, S)` at the nodes: `R` symmetric as `(xx, xy, yy)`.
pub fn transformed_coefficients(fm: &FlowMap) -> (Vec<[f64; 3]>, Vec<Vec2>) {
    let g = fm.grid;
    let dim = g.dim();
    let n = g.len();
    let k: Vec<Mat2> = fm.tangent.iter().map(|m| inverse(m, dim)).collect();
    let r = k
        .iter()
        .map(|k| {
            if dim == 1 {
                [k[0][0] * k[0][0], 0.0, 0.0]
            } else {
                [
                    k[0][0] * k[0][0] + k[0][1] * k[0][1],
                    k[0][0] * k[1][0] + k[0][1] * k[1][1],
                    k[1][0] * k[1][0] + k[1][1] * k[1][1],
                ]
            }
        })
        .collect();
    // ∂_{y_m} K_{ji} by central differences of each component
    let mut dk = [[[vec![0.0; n], vec![0.0; n]], [vec![0.0; n], vec![0.0; n]]], [
        [vec![0.0; n], vec![0.0; n]],
        [vec![0.0; n], vec![0.0; n]],
    ]];
    let mut comp = vec![0.0; n];
    for j in 0..dim {
        for i in 0..dim {
            for (c, kk) in comp.iter_mut().zip(&k) {
                *c = kk[j][i];
            }
            let [gx, gy] = &mut dk[j][i];
            g.gradient_into(&comp, gx, gy);
        }
    }
    let s = (0..n)
        .map(|idx| {
            let kk = &k[idx];
            let mut s = [0.0; 2];
            for j in 0..dim {
                for i in 0..dim {
                    for m in 0..dim {
                        s[j] += kk[m][i] * dk[j][i][m][idx];
                    }
                }
            }
            s
        })
        .collect();
    (r, s)
}

/// Flow backend solve on a recorded path. Explicit diffusion steps
/// `Δ_h v + (R − I):D²v + S·∇v − F'(v)/ε²`. Semi-implicit diffusion takes
/// `κΔ_h` implicitly with `κ = max(1, max_x λ_max(R))` and the remainder
/// `(R − κI):D²v + S·∇v − F'(v)/ε²` explicitly. Snapshots compose `v` with
/// the inverse map.
pub fn solve_transformed(
    grid: Grid,
    well: &DoubleWell,
    model: &NoiseModel,
    config: &SolverConfig,
    u0: &ScalarField,
    path: BrownianPath,
) -> Result<TrajectoryResult> {
    model.validate_for(&grid)?;
    if *u0.grid() != grid {
        return Err(SacError::Contract("initial field and grid disagree".into()));
    }
    let steps = config.steps()?;
    if path.n_modes() != model.n_modes() {
        return Err(SacError::Contract(format!(
            "path has {} modes, noise model has {}",
            path.n_modes(),
            model.n_modes()
        )));
    }
    if let Some(s) = path.steps() {
        if s < steps {
            return Err(SacError::Contract(format!("path has {s} steps, run needs {steps}")));
        }
    }
    if (path.dt() - config.dt).abs() > 1e-12 * config.dt {
        return Err(SacError::Contract("path step differs from solver step".into()));
    }
    // the explicit remainder is bounded like the direct solver's Itô part
    config.validate(&grid, model.sample(&grid, 0.0)?.lambda_max(), well)?;
    let n = grid.len();
    let dim = grid.dim();
    let eps2 = config.eps * config.eps;
    let dt = config.dt;
    let implicit = config.diffusion == DiffusionTreatment::SemiImplicit && !config.transport_only;
    let weights = grid.weights();
    let mut v = u0.values.clone();
    let mut fm = FlowMap::identity(grid);
    let (mut gx, mut gy) = (vec![0.0; n], vec![0.0; n]);
    let (mut hxx, mut hxy, mut hyy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut lap = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut reports = Vec::new();
    let mut fields = Vec::new();
    let compose = |v: &[f64], steps_done: usize| -> Result<ScalarField> {
        if steps_done == 0 || model.n_modes() == 0 && model.drift().is_none() {
            return Ok(ScalarField::from_values(grid, v.to_vec()));
        }
        let inv = inverse_positions(model, &grid, &path, steps_done);
        let vals = inv.iter().map(|&p| interpolate(&grid, v, p)).collect::<Result<Vec<f64>>>()?;
        Ok(ScalarField::from_values(grid, vals))
    };
    let snapshot = |u: ScalarField, t: f64, reports: &mut Vec<_>, fields: &mut Vec<_>| {
        reports.push(diagnostics::energy_report(&u, t, config.eps, well, Vec::new(), &config.g_probes));
        if config.store_fields {
            fields.push((t, u));
        }
    };
    snapshot(u0.clone(), 0.0, &mut reports, &mut fields);
    let mut final_field = u0.clone();
    for step in 0..steps {
        if !config.transport_only {
            let (r, s) = transformed_coefficients(&fm);
            // implicit coefficient κ ≥ λ_max(R) keeps the explicit part
            // (R − κI):D²v dissipative
            let kappa = if implicit {
                r.iter()
                    .map(|r| {
                        if dim == 1 {
                            r[0]
                        } else {
                            0.5 * (r[0] + r[2]) + (0.25 * (r[0] - r[2]).powi(2) + r[1] * r[1]).sqrt()
                        }
                    })
                    .fold(1.0, f64::max)
            } else {
                1.0
            };
            grid.gradient_into(&v, &mut gx, &mut gy);
            grid.hessian_from_gradient_into(&gx, &gy, &mut hxx, &mut hxy, &mut hyy);
            grid.laplacian_into(&v, &mut lap);
            for idx in 0..n {
                let r = r[idx];
                let s = s[idx];
                let mut rhs = if dim == 1 {
                    (r[0] - kappa) * hxx[idx] + s[0] * gx[idx]
                } else {
                    (r[0] - kappa) * hxx[idx]
                        + 2.0 * r[1] * hxy[idx]
                        + (r[2] - kappa) * hyy[idx]
                        + s[0] * gx[idx]
                        + s[1] * gy[idx]
                };
                rhs -= well.f_prime(v[idx]) / eps2;
                if !implicit {
                    rhs += lap[idx];
                }
                next[idx] = v[idx] + dt * rhs;
            }
            if implicit {
                v = crate::solver::solve_shifted_laplacian(&grid, &weights, kappa * dt, &next, config.cg_tolerance)?;
            } else {
                std::mem::swap(&mut v, &mut next);
            }
            let thr = config.blowup_threshold;
            if let Some((idx, x)) = v.iter().enumerate().find(|(_, x)| !(x.abs() <= thr)) {
                return Err(SacError::Blowup {
                    step: step + 1,
                    time: (step + 1) as f64 * dt,
                    reason: format!("|v| = {x} at node {idx} exceeds {thr}"),
                });
            }
        }
        fm.advance(model, dt, step_increments(&path, step), step + 1)?;
        let done = step + 1;
        if done % config.snapshot_stride == 0 || done == steps {
            let u = compose(&v, done)?;
            if done == steps {
                final_field = u.clone();
            }
            snapshot(u, done as f64 * dt, &mut reports, &mut fields);
        }
    }
    Ok(TrajectoryResult {
        grid,
        config: config.clone(),
        initial: u0.clone(),
        initial_energy: diagnostics::energy(u0, config.eps, well),
        final_field,
        t_final: steps as f64 * dt,
        steps,
        reports,
        fields,
        path,
        ledger: None,
    })
}

/// Flow-property defect `max_x |φ_{s,t}(φ_{r,s}(x)) − φ_{r,t}(x)|` with
/// `r = 0`, `s = T/3`, `t = T` (`T` the length of `fine`). Each of the three
/// flows takes `n_steps` Heun steps on increments aggregated from `fine`,
/// so the stages run at different step sizes on one Brownian path.
pub fn flow_property_defect(model: &NoiseModel, grid: &Grid, fine: &BrownianPath, n_steps: usize) -> Result<f64> {
    let total = fine
        .steps()
        .ok_or_else(|| SacError::Contract("flow-property defect needs noise modes".into()))?;
    if n_steps == 0 || total % (3 * n_steps) != 0 {
        return Err(SacError::Contract(format!(
            "{total} fine steps do not split into 3 × {n_steps}"
        )));
    }
    let third = total / 3;
    let first = BrownianPath::from_increments(
        fine.dt(),
        fine.n_modes(),
        fine.increments()[..third * fine.n_modes()].to_vec(),
    )?
    .coarsen(third / n_steps)?;
    let rest = BrownianPath::from_increments(
        fine.dt(),
        fine.n_modes(),
        fine.increments()[third * fine.n_modes()..].to_vec(),
    )?
    .coarsen(2 * third / n_steps)?;
    let whole = fine.coarsen(total / n_steps)?;
    let nodes: Vec<Vec2> = (0..grid.len()).map(|i| grid.coord(i)).collect();
    let mid = integrate_points(model, grid, &nodes, &first, 0, n_steps);
    let two_stage = integrate_points(model, grid, &mid, &rest, 0, n_steps);
    let one_stage = integrate_points(model, grid, &nodes, &whole, 0, n_steps);
    Ok(two_stage
        .iter()
        .zip(&one_stage)
        .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
        .fold(0.0, f64::max))
}

/// `max |Dφ(y)·Dψ(φ(y)) − I|` over probe nodes `y`, where `Dψ` is taken
/// by central differences of the backward sweep around `φ(y)`: the
/// variational tangent is checked against an independent computation.
pub fn tangent_consistency(
    fm: &FlowMap,
    model: &NoiseModel,
    path: &BrownianPath,
    steps: usize,
    probes: &[usize],
) -> Result<f64> {
    let g = fm.grid;
    let dim = g.dim();
    let d = 1e-5;
    let mut worst: f64 = 0.0;
    for &idx in probes {
        let x = fm.forward[idx];
        let mut pts = Vec::with_capacity(2 * dim);
        for l in 0..dim {
            let mut xp = x;
            let mut xm = x;
            xp[l] += d;
            xm[l] -= d;
            pts.push(xp);
            pts.push(xm);
        }
        let back = inverse_points(model, &g, &pts, path, steps);
        let mut k = [[0.0; 2]; 2];
        for l in 0..dim {
            for i in 0..dim {
                k[i][l] = (back[2 * l][i] - back[2 * l + 1][i]) / (2.0 * d);
            }
        }
        let prod = mat_mul(&fm.tangent[idx], &k);
        for i in 0..dim {
            for l in 0..dim {
                let e = prod[i][l] - if i == l { 1.0 } else { 0.0 };
                worst = worst.max(e.abs());
            }
        }
    }
    if !worst.is_finite() {
        return Err(SacError::DegenerateFlow { step: steps, det: f64::NAN });
    }
    Ok(worst)
}
