//! Pathwise time stepping of
//! `du = (Δu − F'(u)/ε²) dt + ∇u·X(∘dt)` with Neumann or periodic closure.
//!
//! [`Scheme::ItoEuler`] steps the Itô form with the explicit correction
//! `½A:D²u + ½c·∇u`; [`Scheme::StratonovichHeun`] steps the Stratonovich
//! form with a predictor–corrector on the noise term and no correction.
//! Noise increments come from a recorded [`BrownianPath`], so a run can be
//! replayed exactly by either scheme or by the flow backend.

use crate::diagnostics::{self, EnergyReport, TestFunction};
use crate::error::{Result, SacError};
use crate::grid::{Closure, Grid, ScalarField};
use crate::noise::{NoiseModel, SampledNoise};
use crate::potential::DoubleWell;
use crate::rng::BrownianPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ItoEuler,
    StratonovichHeun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffusionTreatment {
    Explicit,
    SemiImplicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub eps: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub diffusion: DiffusionTreatment,
    pub blowup_threshold: f64,
    pub snapshot_stride: usize,
    /// Drop the Laplacian and the reaction: `du = ∇u·X(∘dt)` only.
    pub transport_only: bool,
    /// Keep a copy of the field at every snapshot.
    pub store_fields: bool,
    /// Track the global energy identity at every step.
    pub record_identity: bool,
    /// Test functions whose localized identity is tracked at every step
    /// (implies `record_identity`).
    pub identity_probes: Vec<TestFunction>,
    /// Test functions `η` for which `∫G(u)η` is recorded at snapshots.
    pub g_probes: Vec<TestFunction>,
    pub cg_tolerance: f64,
}

impl SolverConfig {
    pub fn new(eps: f64, dt: f64, t_end: f64) -> Self {
        SolverConfig {
            eps,
            dt,
            t_end,
            scheme: Scheme::ItoEuler,
            diffusion: DiffusionTreatment::Explicit,
            blowup_threshold: 10.0,
            snapshot_stride: 100,
            transport_only: false,
            store_fields: false,
            record_identity: false,
            identity_probes: Vec::new(),
            g_probes: Vec::new(),
            cg_tolerance: 1e-10,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_diffusion(mut self, d: DiffusionTreatment) -> Self {
        self.diffusion = d;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn steps(&self) -> Result<usize> {
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(self.dt) {
            return Err(SacError::Config(format!(
                "t_end = {} is not a multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(n as usize)
    }

    /// Largest stable step for this configuration.
    ///
    /// Explicit diffusion: `min(h²/(2n(1+½λ)), ε²/max|F''|)` with `λ` the
    /// largest eigenvalue of `A` and `max|F''|` over `[−1.2, 1.2]`. With
    /// semi-implicit diffusion or pure transport only the explicit `½A:D²u`
    /// term constrains the grid part: `h²/(nλ)`.
    pub fn stability_bound(&self, grid: &Grid, lambda_max: f64, well: &DoubleWell) -> f64 {
        let h2 = grid.spacing() * grid.spacing();
        let n = grid.dim() as f64;
        let a_bound = if lambda_max > 0.0 {
            h2 / (n * lambda_max)
        } else {
            f64::INFINITY
        };
        let grid_bound = match (self.transport_only, self.diffusion) {
            (false, DiffusionTreatment::Explicit) => h2 / (2.0 * n * (1.0 + 0.5 * lambda_max)),
            _ => a_bound,
        };
        if self.transport_only {
            grid_bound
        } else {
            grid_bound.min(self.eps * self.eps / well.max_abs_f_second(1.2))
        }
    }

    /// Validates the configuration; returns non-fatal warnings.
    pub fn validate(&self, grid: &Grid, lambda_max: f64, well: &DoubleWell) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(SacError::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SacError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(SacError::Config(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if self.snapshot_stride == 0 {
            return Err(SacError::Config("snapshot_stride must be at least 1".into()));
        }
        if !(self.blowup_threshold > 1.0) {
            return Err(SacError::Config("blowup_threshold must exceed 1".into()));
        }
        self.steps()?;
        let bound = self.stability_bound(grid, lambda_max, well);
        if self.dt > bound * (1.0 + 1e-12) {
            return Err(SacError::Stability(format!(
                "dt = {:e} exceeds the stability bound {:e}; reduce dt or use semi-implicit diffusion",
                self.dt, bound
            )));
        }
        if self.eps < 2.0 * grid.spacing() {
            warnings.push(format!(
                "eps = {} is below 2h = {}; the interface is under-resolved",
                self.eps,
                2.0 * grid.spacing()
            ));
        }
        Ok(warnings)
    }
}

/// Energy-identity terms for one test function. Rates and `mu` are sampled
/// at every step boundary (`steps + 1` entries); increments are per step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProbeSeries {
    /// `μ_ε(η)`.
    pub mu: Vec<f64>,
    /// `∫ η w²/ε`.
    pub dissipation_rate: Vec<f64>,
    /// `∫ w ∇η·∇u`.
    pub curvature_rate: Vec<f64>,
    /// `∫ bracket : (ε∇u⊗∇u, F/ε)`.
    pub correction_rate: Vec<f64>,
    /// `∫ (ηw − ε∇η·∇u) ∇u·(Σ X^k ΔW_k + b dt)` with start-of-step integrand.
    pub martingale_increment: Vec<f64>,
    /// `Σ_k (∫ (ηw − ε∇η·∇u) ∇u·X^k)² dt`, the cross-variation density
    /// integrated over the step.
    pub qv_increment: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityLedger {
    pub dt: f64,
    /// Global identity, built from the sampled `(Ψ, ψ)` with `η ≡ 1`.
    pub global: ProbeSeries,
    pub probes: Vec<TestFunction>,
    pub series: Vec<ProbeSeries>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult {
    pub grid: Grid,
    pub config: SolverConfig,
    pub initial: ScalarField,
    /// `Λ = E_ε(u⁰)`.
    pub initial_energy: f64,
    pub final_field: ScalarField,
    pub t_final: f64,
    pub steps: usize,
    pub reports: Vec<EnergyReport>,
    pub fields: Vec<(f64, ScalarField)>,
    pub path: BrownianPath,
    pub ledger: Option<IdentityLedger>,
}

struct ProbeData {
    eta: Vec<f64>,
    grad_eta: [Vec<f64>; 2],
    bracket_mat: Vec<[f64; 3]>,
    bracket_scalar: Vec<f64>,
}

/// Single-owner state of one pathwise solution.
pub struct Trajectory<'a> {
    grid: Grid,
    well: &'a DoubleWell,
    noise: &'a SampledNoise,
    config: SolverConfig,
    path: BrownianPath,
    initial: ScalarField,
    initial_energy: f64,
    u: Vec<f64>,
    t: f64,
    step: usize,
    steps: usize,
    // workspace
    gx: Vec<f64>,
    gy: Vec<f64>,
    hxx: Vec<f64>,
    hxy: Vec<f64>,
    hyy: Vec<f64>,
    lap: Vec<f64>,
    xi: Vec<[f64; 2]>,
    next: Vec<f64>,
    pred: Vec<f64>,
    weights: Vec<f64>,
    // index 0 is the global identity when recording
    probes: Vec<ProbeData>,
    series: Vec<ProbeSeries>,
    reports: Vec<EnergyReport>,
    fields: Vec<(f64, ScalarField)>,
}

impl<'a> Trajectory<'a> {
    /// Sets up a trajectory. `path` must have at least as many steps as the
    /// run (mode-free paths have any length) and one increment per mode.
    pub fn new(
        grid: Grid,
        well: &'a DoubleWell,
        model: &NoiseModel,
        noise: &'a SampledNoise,
        config: SolverConfig,
        u0: &ScalarField,
        path: BrownianPath,
    ) -> Result<Self> {
        if *u0.grid() != grid || *noise.grid() != grid {
            return Err(SacError::Contract("initial field, noise samples and grid disagree".into()));
        }
        config.validate(&grid, noise.lambda_max(), well)?;
        let steps = config.steps()?;
        if path.n_modes() != noise.n_modes() {
            return Err(SacError::Contract(format!(
                "path has {} modes, noise model has {}",
                path.n_modes(),
                noise.n_modes()
            )));
        }
        if let Some(s) = path.steps() {
            if s < steps {
                return Err(SacError::Contract(format!("path has {s} steps, run needs {steps}")));
            }
        }
        if (path.dt() - config.dt).abs() > 1e-12 * config.dt {
            return Err(SacError::Contract(format!(
                "path step {} differs from solver step {}",
                path.dt(),
                config.dt
            )));
        }
        if let Some(v) = u0.values.iter().find(|v| !v.is_finite()) {
            return Err(SacError::Domain(format!("initial field has non-finite value {v}")));
        }
        let n = grid.len();
        let initial_energy = diagnostics::energy(u0, config.eps, well);
        let mut tr = Trajectory {
            grid,
            well,
            noise,
            path,
            initial: u0.clone(),
            initial_energy,
            u: u0.values.clone(),
            t: 0.0,
            step: 0,
            steps,
            gx: vec![0.0; n],
            gy: vec![0.0; n],
            hxx: vec![0.0; n],
            hxy: vec![0.0; n],
            hyy: vec![0.0; n],
            lap: vec![0.0; n],
            xi: vec![[0.0; 2]; n],
            next: vec![0.0; n],
            pred: vec![0.0; n],
            weights: grid.weights(),
            probes: Vec::new(),
            series: Vec::new(),
            reports: Vec::new(),
            fields: Vec::new(),
            config,
        };
        tr.init_probes(model);
        Ok(tr)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn field(&self) -> ScalarField {
        ScalarField::from_values(self.grid, self.u.clone())
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    fn init_probes(&mut self, model: &NoiseModel) {
        if !self.config.record_identity && self.config.identity_probes.is_empty() {
            return;
        }
        let g = self.grid;
        self.probes.push(ProbeData {
            eta: vec![1.0; g.len()],
            grad_eta: [vec![0.0; g.len()], vec![0.0; g.len()]],
            bracket_mat: self.noise.psi_mat.clone(),
            bracket_scalar: self.noise.psi.clone(),
        });
        for probe in &self.config.identity_probes {
            let br = model.sample_bracket(&g, 0.0, |x| probe.jet(g.dim(), x));
            let mut eta = vec![0.0; g.len()];
            let mut gex = vec![0.0; g.len()];
            let mut gey = vec![0.0; g.len()];
            for idx in 0..g.len() {
                let j = probe.jet(g.dim(), g.coord(idx));
                eta[idx] = j.v;
                gex[idx] = j.g[0];
                gey[idx] = j.g[1];
            }
            self.probes.push(ProbeData {
                eta,
                grad_eta: [gex, gey],
                bracket_mat: br.iter().map(|b| b.0).collect(),
                bracket_scalar: br.iter().map(|b| b.1).collect(),
            });
        }
        self.series = vec![ProbeSeries::default(); self.probes.len()];
    }

    /// Central gradient, nested-central Hessian (Itô only) and Laplacian of
    /// the current state.
    fn derivatives(&mut self, with_hessian: bool) {
        self.grid.gradient_into(&self.u, &mut self.gx, &mut self.gy);
        if with_hessian {
            self.grid
                .hessian_from_gradient_into(&self.gx, &self.gy, &mut self.hxx, &mut self.hxy, &mut self.hyy);
        }
        self.grid.laplacian_into(&self.u, &mut self.lap);
    }

    /// `ξ = Σ_k X^k ΔW_k` at every node.
    fn noise_field(&mut self, dw: &[f64]) {
        for v in self.xi.iter_mut() {
            *v = [0.0, 0.0];
        }
        for (mode, w) in self.noise.modes.iter().zip(dw) {
            for (x, m) in self.xi.iter_mut().zip(mode) {
                x[0] += m[0] * w;
                x[1] += m[1] * w;
            }
        }
    }

    #[inline]
    fn grad_dot(&self, idx: usize, v: [f64; 2]) -> f64 {
        if self.grid.dim() == 1 {
            self.gx[idx] * v[0]
        } else {
            self.gx[idx] * v[0] + self.gy[idx] * v[1]
        }
    }

    /// Records the identity terms at the current (start-of-step) state;
    /// `dw` is the increment of the step about to be taken, if any.
    /// Requires `derivatives` to be current.
    fn record_identity(&mut self, dw: Option<&[f64]>) {
        if self.probes.is_empty() {
            return;
        }
        let g = self.grid;
        let eps = self.config.eps;
        let dt = self.config.dt;
        let n = g.len();
        let dim = g.dim();
        let m = g.nodes_per_axis();
        let mut fx = vec![0.0; n];
        let mut fy = vec![0.0; n];
        g.forward_gradient_into(&self.u, &mut fx, &mut fy);
        for (p, s) in self.probes.iter().zip(self.series.iter_mut()) {
            let mut mu = 0.0;
            let mut diss = 0.0;
            let mut curv = 0.0;
            let mut corr = 0.0;
            let mut drift_m = 0.0;
            let mut mode_m = vec![0.0; self.noise.n_modes()];
            for idx in 0..n {
                let wgt = self.weights[idx];
                let u = self.u[idx];
                let f = self.well.f(u);
                let w = -eps * self.lap[idx] + self.well.f_prime(u) / eps;
                let grad = [self.gx[idx], if dim == 2 { self.gy[idx] } else { 0.0 }];
                let ge = [p.grad_eta[0][idx], p.grad_eta[1][idx]];
                let eta = p.eta[idx];
                let ge_gu = ge[0] * grad[0] + ge[1] * grad[1];
                mu += wgt * eta * f / eps;
                diss += wgt * eta * w * w / eps;
                curv += wgt * w * ge_gu;
                let b = p.bracket_mat[idx];
                let quad = b[0] * grad[0] * grad[0] + 2.0 * b[1] * grad[0] * grad[1] + b[2] * grad[1] * grad[1];
                corr += wgt * (eps * quad + p.bracket_scalar[idx] * f / eps);
                let coef = eta * w - eps * ge_gu;
                for (k, mode) in self.noise.modes.iter().enumerate() {
                    let x = mode[idx];
                    mode_m[k] += wgt * coef * (grad[0] * x[0] + grad[1] * x[1]);
                }
                if self.noise.has_drift {
                    let b = self.noise.drift[idx];
                    drift_m += wgt * coef * (grad[0] * b[0] + grad[1] * b[1]);
                }
            }
            // gradient part of μ_η on edges, η averaged to the edge midpoint
            for (axis, comp) in [&fx, &fy].into_iter().enumerate().take(dim) {
                let stride = if axis == 0 { 1 } else { m };
                for idx in 0..n {
                    let we = g.edge_weight(axis, idx);
                    if we == 0.0 {
                        continue;
                    }
                    let (ix, iy) = g.unindex(idx);
                    let along = if axis == 0 { ix } else { iy };
                    let nb = if along + 1 < m { idx + stride } else { idx + stride - m * stride };
                    let eta_e = 0.5 * (p.eta[idx] + p.eta[nb]);
                    mu += we * eta_e * 0.5 * eps * comp[idx] * comp[idx];
                }
            }
            s.mu.push(mu);
            s.dissipation_rate.push(diss);
            s.curvature_rate.push(curv);
            s.correction_rate.push(corr);
            if let Some(dw) = dw {
                let mart: f64 = mode_m.iter().zip(dw).map(|(a, w)| a * w).sum::<f64>() + drift_m * dt;
                let qv: f64 = mode_m.iter().map(|a| a * a).sum::<f64>() * dt;
                s.martingale_increment.push(mart);
                s.qv_increment.push(qv);
            }
        }
    }

    /// One Euler–Maruyama step of the Itô form.
    pub fn step_ito(&mut self) -> Result<()> {
        let dw = self.take_increments()?;
        self.derivatives(true);
        self.record_identity(Some(&dw));
        self.noise_field(&dw);
        let eps2 = self.config.eps * self.config.eps;
        let dt = self.config.dt;
        let dim = self.grid.dim();
        let implicit = self.config.diffusion == DiffusionTreatment::SemiImplicit;
        let transport = self.config.transport_only;
        for idx in 0..self.grid.len() {
            let u = self.u[idx];
            let a = self.noise.a[idx];
            let c = self.noise.c[idx];
            let a_hess = if dim == 1 {
                a[0] * self.hxx[idx]
            } else {
                a[0] * self.hxx[idx] + 2.0 * a[1] * self.hxy[idx] + a[2] * self.hyy[idx]
            };
            let mut drift = if transport {
                0.0
            } else {
                let diff = if implicit { 0.0 } else { self.lap[idx] };
                diff - self.well.f_prime(u) / eps2
            };
            drift += 0.5 * a_hess;
            drift += 0.5 * self.grad_dot(idx, c);
            if self.noise.has_drift {
                drift += self.grad_dot(idx, self.noise.drift[idx]);
            }
            self.next[idx] = u + dt * drift + self.grad_dot(idx, self.xi[idx]);
        }
        self.finish_step(implicit && !transport)
    }

    /// One Heun predictor–corrector step of the Stratonovich form.
    pub fn step_stratonovich_heun(&mut self) -> Result<()> {
        let dw = self.take_increments()?;
        self.derivatives(false);
        self.record_identity(Some(&dw));
        self.noise_field(&dw);
        let eps2 = self.config.eps * self.config.eps;
        let dt = self.config.dt;
        let implicit = self.config.diffusion == DiffusionTreatment::SemiImplicit;
        let transport = self.config.transport_only;
        let n = self.grid.len();
        let has_noise = self.noise.n_modes() > 0;
        // predictor: noise part only
        for idx in 0..n {
            let g0 = self.grad_dot(idx, self.xi[idx]);
            self.pred[idx] = g0;
        }
        for idx in 0..n {
            let u = self.u[idx];
            let mut drift = if transport {
                0.0
            } else {
                let diff = if implicit { 0.0 } else { self.lap[idx] };
                diff - self.well.f_prime(u) / eps2
            };
            if self.noise.has_drift {
                drift += self.grad_dot(idx, self.noise.drift[idx]);
            }
            self.next[idx] = u + dt * drift;
        }
        if has_noise {
            let mut tilde = vec![0.0; n];
            for idx in 0..n {
                tilde[idx] = self.u[idx] + self.pred[idx];
            }
            let mut tx = vec![0.0; n];
            let mut ty = vec![0.0; n];
            self.grid.gradient_into(&tilde, &mut tx, &mut ty);
            for idx in 0..n {
                let xi = self.xi[idx];
                let g1 = if self.grid.dim() == 1 {
                    tx[idx] * xi[0]
                } else {
                    tx[idx] * xi[0] + ty[idx] * xi[1]
                };
                self.next[idx] += 0.5 * (self.pred[idx] + g1);
            }
        }
        self.finish_step(implicit && !transport)
    }

    fn take_increments(&mut self) -> Result<Vec<f64>> {
        if self.step >= self.steps {
            return Err(SacError::Contract("trajectory already reached t_end".into()));
        }
        Ok(if self.path.n_modes() == 0 {
            Vec::new()
        } else {
            self.path.step(self.step).to_vec()
        })
    }

    fn finish_step(&mut self, implicit: bool) -> Result<()> {
        if implicit {
            let rhs = self.next.clone();
            self.solve_implicit(&rhs)?;
        }
        std::mem::swap(&mut self.u, &mut self.next);
        self.step += 1;
        self.t = self.step as f64 * self.config.dt;
        let thr = self.config.blowup_threshold;
        if let Some((idx, v)) = self.u.iter().enumerate().find(|(_, v)| !(v.abs() <= thr)) {
            return Err(SacError::Blowup {
                step: self.step,
                time: self.t,
                reason: format!("u = {v} at node {idx} exceeds the threshold {thr} in magnitude"),
            });
        }
        Ok(())
    }

    fn solve_implicit(&mut self, rhs: &[f64]) -> Result<()> {
        self.next = solve_shifted_laplacian(&self.grid, &self.weights, self.config.dt, rhs, self.config.cg_tolerance)?;
        Ok(())
    }

    /// Advances with the configured scheme.
    pub fn step(&mut self) -> Result<()> {
        match self.config.scheme {
            Scheme::ItoEuler => self.step_ito(),
            Scheme::StratonovichHeun => self.step_stratonovich_heun(),
        }
    }

    fn snapshot(&mut self) {
        let f = self.field();
        let mu: Vec<f64> = self
            .config
            .identity_probes
            .iter()
            .map(|p| diagnostics::surface_measure(&f, self.config.eps, self.well, p))
            .collect();
        let report = diagnostics::energy_report(&f, self.t, self.config.eps, self.well, mu, &self.config.g_probes);
        self.reports.push(report);
        if self.config.store_fields {
            self.fields.push((self.t, f));
        }
    }

    /// Runs to `t_end`, collecting snapshots every `snapshot_stride` steps
    /// and at the final time.
    pub fn run(mut self) -> Result<TrajectoryResult> {
        self.snapshot();
        while self.step < self.steps {
            self.step()?;
            if self.step % self.config.snapshot_stride == 0 || self.step == self.steps {
                self.snapshot();
            }
        }
        let ledger = if self.probes.is_empty() {
            None
        } else {
            self.derivatives(false);
            self.record_identity(None);
            let mut series = std::mem::take(&mut self.series);
            let global = series.remove(0);
            Some(IdentityLedger {
                dt: self.config.dt,
                global,
                probes: self.config.identity_probes.clone(),
                series,
            })
        };
        let final_field = self.field();
        Ok(TrajectoryResult {
            grid: self.grid,
            config: self.config,
            initial: self.initial,
            initial_energy: self.initial_energy,
            final_field,
            t_final: self.t,
            steps: self.steps,
            reports: self.reports,
            fields: self.fields,
            path: self.path,
            ledger,
        })
    }
}

/// Solves `(I − dt Δ_h) x = rhs` by conjugate gradients in the
/// quadrature-weighted inner product, where `Δ_h` is symmetric.
pub fn solve_shifted_laplacian(grid: &Grid, weights: &[f64], dt: f64, rhs: &[f64], tolerance: f64) -> Result<Vec<f64>> {
    let n = grid.len();
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(weights).map(|((x, y), z)| x * y * z).sum() };
    let apply = |v: &[f64], out: &mut [f64]| {
        grid.laplacian_into(v, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o = vi - dt * *o;
        }
    };
    let mut x = rhs.to_vec();
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = tolerance * tolerance * dot(rhs, rhs).max(1e-300);
    let mut ap = vec![0.0; n];
    let mut it = 0;
    while rr > target {
        it += 1;
        if it > 10_000 {
            return Err(SacError::Stability("conjugate gradients did not converge".into()));
        }
        apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Ok(x)
}

/// Convenience wrapper: samples the noise model, sets up and runs.
pub fn run(
    grid: Grid,
    well: &DoubleWell,
    model: &NoiseModel,
    config: &SolverConfig,
    u0: &ScalarField,
    path: BrownianPath,
) -> Result<TrajectoryResult> {
    let sampled = model.sample(&grid, 0.0)?;
    run_sampled(grid, well, model, &sampled, config, u0, path)
}

/// As [`run`] with pre-sampled noise (shared across many trajectories).
pub fn run_sampled(
    grid: Grid,
    well: &DoubleWell,
    model: &NoiseModel,
    sampled: &SampledNoise,
    config: &SolverConfig,
    u0: &ScalarField,
    path: BrownianPath,
) -> Result<TrajectoryResult> {
    Trajectory::new(grid, well, model, sampled, config.clone(), u0, path)?.run()
}

/// Pure transport `du = ∇u·X(∘dt)`: reaction and Laplacian disabled.
pub fn run_transport(
    grid: Grid,
    well: &DoubleWell,
    model: &NoiseModel,
    config: &SolverConfig,
    u0: &ScalarField,
    path: BrownianPath,
) -> Result<TrajectoryResult> {
    if model.n_modes() == 0 {
        return Err(SacError::Config("transport runs need at least one noise mode".into()));
    }
    if grid.closure() == Closure::Neumann {
        model.validate_for(&grid)?;
    }
    let mut cfg = config.clone();
    cfg.transport_only = true;
    run(grid, well, model, &cfg, u0, path)
}
