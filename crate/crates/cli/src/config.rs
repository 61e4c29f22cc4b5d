//! The experiment file: a TOML document with sections `[grid]`,
//! `[potential]`, `[noise]`, `[solver]`, `[ensemble]` and `[output]`.
//! Every key has a default and unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use sac_core::diagnostics::TestFunction;
use sac_core::ensemble::{EnsembleConfig, FailurePolicy};
use sac_core::grid::{Closure, Grid};
use sac_core::initial::InitialData;
use sac_core::noise::{ModeField, Mutations, NoiseModel};
use sac_core::potential::DoubleWell;
use sac_core::solver::{DiffusionTreatment, Scheme, SolverConfig};

use crate::error::{io_at, CliError, CliResult};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub grid: GridSection,
    pub potential: PotentialSection,
    pub noise: NoiseSection,
    pub solver: SolverSection,
    pub ensemble: EnsembleSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ClosureKind {
    Neumann,
    Periodic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub dim: usize,
    pub m: usize,
    pub closure: ClosureKind,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { dim: 2, m: 128, closure: ClosureKind::Neumann }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Standard,
    Custom,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSection {
    pub kind: PotentialKind,
    /// Coefficients of `F` in powers of `r²` (custom only).
    pub coeffs: Vec<f64>,
    pub growth_exponent: f64,
    pub growth_constant: f64,
}

impl Default for PotentialSection {
    fn default() -> Self {
        PotentialSection {
            kind: PotentialKind::Standard,
            coeffs: Vec::new(),
            growth_exponent: 2.0,
            growth_constant: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Bump,
    Rotation,
    Trig,
    Constant,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeSpec {
    pub kind: ModeKind,
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
    pub direction: [f64; 2],
    pub wavevector: [f64; 2],
    pub phase: f64,
}

impl Default for ModeSpec {
    fn default() -> Self {
        ModeSpec {
            kind: ModeKind::Bump,
            center: [0.5, 0.5],
            radius: 0.3,
            amplitude: 0.1,
            direction: [1.0, 0.0],
            wavevector: [0.0, 0.0],
            phase: 0.0,
        }
    }
}

impl ModeSpec {
    fn build(&self) -> ModeField {
        match self.kind {
            ModeKind::Bump => ModeField::bump(self.center, self.radius, self.amplitude, self.direction),
            ModeKind::Rotation => ModeField::Rotation {
                center: self.center,
                radius: self.radius,
                amplitude: self.amplitude,
            },
            ModeKind::Trig => ModeField::Trig {
                wavevector: self.wavevector,
                phase: self.phase,
                amplitude: self.amplitude,
                direction: self.direction,
            },
            ModeKind::Constant => ModeField::constant(self.amplitude, self.direction),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub modes: Vec<ModeSpec>,
    pub drift: Option<ModeSpec>,
    pub support_margin: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection { modes: Vec::new(), drift: None, support_margin: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    ItoEuler,
    StratonovichHeun,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionKind {
    Explicit,
    SemiImplicit,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// The Itô (or Heun) discretization of the SPDE itself.
    Direct,
    /// The random PDE obtained by composing with the stochastic flow.
    Flow,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Constant,
    Kink,
    TwoKinks,
    Circle,
    SmoothBump,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSpec {
    pub kind: InitialKind,
    /// Constant value.
    pub value: f64,
    /// Circle and bump centre; a kink sits at `center[0]`.
    pub center: [f64; 2],
    pub radius: f64,
    pub height: f64,
    pub left: f64,
    pub right: f64,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec {
            kind: InitialKind::Circle,
            value: 0.0,
            center: [0.5, 0.5],
            radius: 0.25,
            height: 1.0,
            left: 0.3,
            right: 0.7,
        }
    }
}

impl InitialSpec {
    fn build(&self) -> InitialData {
        match self.kind {
            InitialKind::Constant => InitialData::Constant(self.value),
            InitialKind::Kink => InitialData::Kink { center: self.center[0] },
            InitialKind::TwoKinks => InitialData::TwoKinks { left: self.left, right: self.right },
            InitialKind::Circle => InitialData::Circle { center: self.center, radius: self.radius },
            InitialKind::SmoothBump => InitialData::SmoothBump {
                center: self.center,
                radius: self.radius,
                height: self.height,
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub eps: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: SchemeKind,
    pub diffusion: DiffusionKind,
    pub backend: Backend,
    pub blowup_threshold: f64,
    pub snapshot_stride: usize,
    pub cg_tolerance: f64,
    pub transport_only: bool,
    pub initial: InitialSpec,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            eps: 0.04,
            dt: 1e-5,
            t_end: 0.01,
            scheme: SchemeKind::ItoEuler,
            diffusion: DiffusionKind::SemiImplicit,
            backend: Backend::Direct,
            blowup_threshold: 10.0,
            snapshot_stride: 100,
            cg_tolerance: 1e-10,
            transport_only: false,
            initial: InitialSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    ConstantOne,
    Bump,
    CoordinateWindow,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSpec {
    pub kind: ProbeKind,
    /// Bump centre; the coordinate window is `x_axis − center[axis]`.
    pub center: [f64; 2],
    pub radius: f64,
    pub axis: usize,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec { kind: ProbeKind::ConstantOne, center: [0.5, 0.5], radius: 0.3, axis: 0 }
    }
}

impl ProbeSpec {
    fn build(&self) -> CliResult<TestFunction> {
        Ok(match self.kind {
            ProbeKind::ConstantOne => TestFunction::ConstantOne,
            ProbeKind::Bump => TestFunction::Bump { center: self.center, radius: self.radius },
            ProbeKind::CoordinateWindow => {
                if self.axis > 1 {
                    return Err(CliError::Input(format!("[ensemble] probe axis must be 0 or 1, got {}", self.axis)));
                }
                TestFunction::CoordinateWindow { axis: self.axis, center: self.center[self.axis] }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    FailLoud,
    Exclude,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub samples: usize,
    pub master_seed: u64,
    pub workers: usize,
    /// Defaults to `[solver.eps]`.
    pub eps_list: Vec<f64>,
    pub moment_orders: Vec<f64>,
    pub tail_thresholds: Vec<f64>,
    pub residual_windows: Vec<[f64; 2]>,
    pub residual_probes: Vec<ProbeSpec>,
    pub increment_probe: Option<ProbeSpec>,
    pub increment_lags: Vec<usize>,
    pub failure_policy: PolicyKind,
    /// Residual gate: `|mean| ≤ band · qv_stderr`.
    pub residual_band: f64,
    /// Residuals subject to the gate, by name (`global`, `probe0`, ...);
    /// all of them when absent.
    pub residual_gates: Option<Vec<String>>,
    pub gates: bool,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            samples: 1,
            master_seed: 0,
            workers: 1,
            eps_list: Vec::new(),
            moment_orders: vec![1.0, 2.0],
            tail_thresholds: Vec::new(),
            residual_windows: Vec::new(),
            residual_probes: Vec::new(),
            increment_probe: None,
            increment_lags: Vec::new(),
            failure_policy: PolicyKind::FailLoud,
            residual_band: 2.0,
            residual_gates: None,
            gates: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub snapshots: bool,
    pub svg: bool,
    /// Per-sample trajectory tables in ensemble runs.
    pub trajectories: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            snapshots: true,
            svg: true,
            trajectories: false,
        }
    }
}

/// A parsed and validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub raw: ExperimentConfig,
    pub ensemble: EnsembleConfig,
    pub backend: Backend,
    /// Output directory, relative paths resolved against the config file.
    pub out_dir: PathBuf,
    pub warnings: Vec<String>,
}

impl Experiment {
    /// Centre of the initial circle, for the radius column.
    pub fn circle_center(&self) -> Option<[f64; 2]> {
        let init = &self.raw.solver.initial;
        (init.kind == InitialKind::Circle).then_some(init.center)
    }
}

pub fn parse(text: &str) -> CliResult<ExperimentConfig> {
    toml::from_str(text).map_err(|e| CliError::Input(e.to_string()))
}

/// Reads, parses and validates `path`. `threads` overrides the worker
/// count.
pub fn load(path: &Path, threads: Option<usize>, mutations: Mutations) -> CliResult<Experiment> {
    let text = std::fs::read_to_string(path).map_err(|e| io_at(path, e))?;
    let raw = parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    build(raw, base, threads, mutations)
}

pub fn build(raw: ExperimentConfig, base: &Path, threads: Option<usize>, mutations: Mutations) -> CliResult<Experiment> {
    let g = &raw.grid;
    let closure = match g.closure {
        ClosureKind::Neumann => Closure::Neumann,
        ClosureKind::Periodic => Closure::Periodic,
    };
    let grid = Grid::new(g.dim, g.m, closure)?;
    let well = match raw.potential.kind {
        PotentialKind::Standard => {
            if !raw.potential.coeffs.is_empty() {
                return Err(CliError::Input(
                    "[potential] coeffs are only read when kind = \"custom\"".into(),
                ));
            }
            DoubleWell::standard()
        }
        PotentialKind::Custom => DoubleWell::custom(
            raw.potential.coeffs.clone(),
            raw.potential.growth_exponent,
            raw.potential.growth_constant,
        )?,
    };
    let modes = raw.noise.modes.iter().map(ModeSpec::build).collect();
    let drift = raw.noise.drift.as_ref().map(ModeSpec::build);
    let model = NoiseModel::new(g.dim, drift, modes, raw.noise.support_margin)?.with_mutations(mutations);

    let s = &raw.solver;
    let mut template = SolverConfig::new(s.eps, s.dt, s.t_end)
        .with_stride(s.snapshot_stride)
        .with_scheme(match s.scheme {
            SchemeKind::ItoEuler => Scheme::ItoEuler,
            SchemeKind::StratonovichHeun => Scheme::StratonovichHeun,
        })
        .with_diffusion(match s.diffusion {
            DiffusionKind::Explicit => DiffusionTreatment::Explicit,
            DiffusionKind::SemiImplicit => DiffusionTreatment::SemiImplicit,
        });
    template.blowup_threshold = s.blowup_threshold;
    template.cg_tolerance = s.cg_tolerance;
    template.transport_only = s.transport_only;

    let e = &raw.ensemble;
    let mut cfg = EnsembleConfig::new(grid, model, s.initial.build(), template);
    cfg.well = well;
    if !e.eps_list.is_empty() {
        cfg.eps_list = e.eps_list.clone();
    }
    cfg.samples = e.samples;
    cfg.master_seed = e.master_seed;
    cfg.workers = threads.unwrap_or(e.workers);
    cfg.moment_orders = e.moment_orders.clone();
    cfg.tail_thresholds = e.tail_thresholds.clone();
    cfg.residual_windows = e.residual_windows.iter().map(|w| (w[0], w[1])).collect();
    cfg.residual_probes = e.residual_probes.iter().map(ProbeSpec::build).collect::<CliResult<_>>()?;
    cfg.increment_probe = e.increment_probe.as_ref().map(ProbeSpec::build).transpose()?;
    cfg.increment_lags = e.increment_lags.clone();
    cfg.failure_policy = match e.failure_policy {
        PolicyKind::FailLoud => FailurePolicy::FailLoud,
        PolicyKind::Exclude => FailurePolicy::Exclude,
    };
    if !(e.residual_band > 0.0) {
        return Err(CliError::Input(format!("[ensemble] residual_band must be positive, got {}", e.residual_band)));
    }
    if let Some(names) = &e.residual_gates {
        for n in names {
            let known = n == "global"
                || n.strip_prefix("probe").and_then(|k| k.parse::<usize>().ok()).is_some_and(|k| k < cfg.residual_probes.len());
            if !known {
                return Err(CliError::Input(format!(
                    "[ensemble] residual_gates: unknown residual {n:?}; use \"global\" or \"probe<k>\" with k < {}",
                    cfg.residual_probes.len()
                )));
            }
        }
    }
    if s.backend == Backend::Flow && (s.transport_only || !cfg.residual_windows.is_empty()) {
        return Err(CliError::Input(
            "the flow backend supports neither transport_only nor residual windows; use backend = \"direct\"".into(),
        ));
    }
    // cross-field checks: ε against h, dt against the stability bound
    let warnings = cfg.validate()?;
    let out_dir = if raw.output.dir.is_absolute() { raw.output.dir.clone() } else { base.join(&raw.output.dir) };
    Ok(Experiment {
        backend: s.backend,
        ensemble: cfg,
        out_dir,
        warnings,
        raw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build_text(text: &str) -> CliResult<Experiment> {
        build(parse(text)?, Path::new("."), None, Mutations::default())
    }

    #[test]
    fn empty_document_is_a_valid_experiment() {
        let exp = build_text("").unwrap();
        assert_eq!(exp.ensemble.grid.dim(), 2);
        assert_eq!(exp.ensemble.eps_list, vec![0.04]);
        assert_eq!(exp.circle_center(), Some([0.5, 0.5]));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = build_text("[solver]\nepsilon = 0.1\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("epsilon"), "{err}");
        assert!(build_text("[colour]\nx = 1\n").is_err());
    }

    #[test]
    fn unstable_time_step_is_reported_at_parse_time() {
        let err = build_text("[grid]\nm = 256\n[solver]\ndiffusion = \"explicit\"\ndt = 1e-4\n").unwrap_err();
        assert_eq!(err.exit_code(), 3, "{err}");
    }

    #[test]
    fn modes_and_probes_are_translated() {
        let exp = build_text(
            "[grid]\ndim = 1\nm = 64\n[noise]\nmodes = [{ kind = \"bump\", center = [0.4, 0.0], amplitude = 0.2 }]\n\
             [solver.initial]\nkind = \"two_kinks\"\n\
             [ensemble]\nresidual_windows = [[0.0, 0.005]]\nresidual_probes = [{ kind = \"coordinate_window\", center = [0.3, 0.0] }]\n",
        )
        .unwrap();
        assert_eq!(exp.ensemble.model.n_modes(), 1);
        assert_eq!(exp.ensemble.residual_probes, vec![TestFunction::CoordinateWindow { axis: 0, center: 0.3 }]);
        assert_eq!(exp.circle_center(), None);
    }

    #[test]
    fn residual_gate_names_are_checked() {
        let base = "[grid]\ndim = 1\nm = 64\n[solver.initial]\nkind = \"kink\"\n[ensemble]\nresidual_windows = [[0.0, 0.005]]\n";
        assert!(build_text(&format!("{base}residual_gates = [\"global\"]\n")).is_ok());
        let err = build_text(&format!("{base}residual_gates = [\"probe0\"]\n")).unwrap_err();
        assert!(err.to_string().contains("probe0"), "{err}");
    }

    #[test]
    fn threads_override_workers() {
        let exp = build(parse("[ensemble]\nworkers = 2\n").unwrap(), Path::new("."), Some(5), Mutations::default()).unwrap();
        assert_eq!(exp.ensemble.workers, 5);
    }
}
