//! Finite-mode vector-field Brownian motion `X(t,x) = X⁰(x) t + Σ_k X^k(x) W_k(t)`,
//! its local characteristic and the correction fields derived from it.
//!
//! Every mode is an analytic field with hand-coded first and second
//! derivatives; all correction fields are assembled from those closed forms.
//! Index conventions: `d[i][m] = ∂_m X_i`, `dd[i][m][l] = ∂_m ∂_l X_i`.
//! In 1D only the first components are used.

use crate::error::{Result, SacError};
use crate::grid::{Closure, Grid, VectorFieldSample};
use crate::rng::StreamKey;
use std::f64::consts::TAU;

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

/// Value and derivatives of a vector field at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub v: Vec2,
    pub d: Mat2,
    pub dd: [Mat2; 2],
}

/// `exp(1 − 1/(1 − s))` for `s < 1`, else 0, with its first two
/// derivatives in `s`.
fn smooth_cutoff(s: f64) -> (f64, f64, f64) {
    if s >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let q = 1.0 / (1.0 - s);
    let b = (1.0 - q).exp();
    let q2 = q * q;
    (b, -b * q2, b * (q2 * q2 - 2.0 * q2 * q))
}

/// Radial cutoff `β(|x − c|²/R²)` with gradient and Hessian.
pub(crate) fn radial_cutoff(dim: usize, x: Vec2, c: Vec2, r: f64) -> (f64, Vec2, Mat2) {
    let r2 = r * r;
    let mut s = 0.0;
    let mut ds = [0.0; 2];
    for m in 0..dim {
        let dx = x[m] - c[m];
        s += dx * dx / r2;
        ds[m] = 2.0 * dx / r2;
    }
    let (b, b1, b2) = smooth_cutoff(s);
    let mut g = [0.0; 2];
    let mut h = [[0.0; 2]; 2];
    for m in 0..dim {
        g[m] = b1 * ds[m];
        for l in 0..dim {
            h[m][l] = b2 * ds[m] * ds[l] + if m == l { 2.0 * b1 / r2 } else { 0.0 };
        }
    }
    (b, g, h)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModeField {
    /// `amplitude · β(|x−c|²/R²) · direction`, compactly supported.
    Bump {
        center: Vec2,
        radius: f64,
        amplitude: f64,
        direction: Vec2,
    },
    /// `amplitude · β(|x−c|²/R²) · (−(y−c_y), x−c_x)`, a divergence-free
    /// swirl (2D only).
    Rotation {
        center: Vec2,
        radius: f64,
        amplitude: f64,
    },
    /// `amplitude · cos(2π k·x + phase) · direction`; periodic grids only.
    /// A zero wavevector with zero phase is the constant field.
    Trig {
        wavevector: Vec2,
        phase: f64,
        amplitude: f64,
        direction: Vec2,
    },
}

impl ModeField {
    pub fn constant(amplitude: f64, direction: Vec2) -> Self {
        ModeField::Trig {
            wavevector: [0.0, 0.0],
            phase: 0.0,
            amplitude,
            direction,
        }
    }

    pub fn bump(center: Vec2, radius: f64, amplitude: f64, direction: Vec2) -> Self {
        ModeField::Bump {
            center,
            radius,
            amplitude,
            direction,
        }
    }

    pub fn amplitude(&self) -> f64 {
        match self {
            ModeField::Bump { amplitude, .. }
            | ModeField::Rotation { amplitude, .. }
            | ModeField::Trig { amplitude, .. } => *amplitude,
        }
    }

    /// Upper bound on `|X(x)|` over the domain.
    pub fn sup_norm(&self) -> f64 {
        match self {
            ModeField::Bump {
                amplitude,
                direction,
                ..
            }
            | ModeField::Trig {
                amplitude,
                direction,
                ..
            } => amplitude.abs() * direction[0].hypot(direction[1]),
            ModeField::Rotation {
                amplitude, radius, ..
            } => amplitude.abs() * radius,
        }
    }

    pub fn jet(&self, dim: usize, x: Vec2) -> Jet {
        let mut out = Jet::default();
        match *self {
            ModeField::Bump {
                center,
                radius,
                amplitude,
                direction,
            } => {
                let (b, g, h) = radial_cutoff(dim, x, center, radius);
                for i in 0..dim {
                    let a = amplitude * direction[i];
                    out.v[i] = a * b;
                    for m in 0..dim {
                        out.d[i][m] = a * g[m];
                        for l in 0..dim {
                            out.dd[i][m][l] = a * h[m][l];
                        }
                    }
                }
            }
            ModeField::Rotation {
                center,
                radius,
                amplitude,
            } => {
                let (b, g, h) = radial_cutoff(dim, x, center, radius);
                let r = [-(x[1] - center[1]), x[0] - center[0]];
                let j = [[0.0, -1.0], [1.0, 0.0]];
                for i in 0..2 {
                    out.v[i] = amplitude * b * r[i];
                    for m in 0..2 {
                        out.d[i][m] = amplitude * (g[m] * r[i] + b * j[i][m]);
                        for l in 0..2 {
                            out.dd[i][m][l] =
                                amplitude * (h[m][l] * r[i] + g[m] * j[i][l] + g[l] * j[i][m]);
                        }
                    }
                }
            }
            ModeField::Trig {
                wavevector,
                phase,
                amplitude,
                direction,
            } => {
                let mut theta = phase;
                for m in 0..dim {
                    theta += TAU * wavevector[m] * x[m];
                }
                let (s, c) = theta.sin_cos();
                for i in 0..dim {
                    let a = amplitude * direction[i];
                    out.v[i] = a * c;
                    for m in 0..dim {
                        let km = TAU * wavevector[m];
                        out.d[i][m] = -a * s * km;
                        for l in 0..dim {
                            out.dd[i][m][l] = -a * c * km * TAU * wavevector[l];
                        }
                    }
                }
            }
        }
        out
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            ModeField::Bump {
                center,
                radius,
                amplitude,
                direction,
            } => {
                if !(finite(center) && finite(direction) && amplitude.is_finite()) {
                    return Err(SacError::Config("non-finite bump parameter".into()));
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(SacError::Config(format!("bump radius must be positive, got {radius}")));
                }
                if dim == 1 && direction[1] != 0.0 {
                    return Err(SacError::Config("1D bump direction must lie on the x axis".into()));
                }
            }
            ModeField::Rotation {
                center,
                radius,
                amplitude,
            } => {
                if dim != 2 {
                    return Err(SacError::Config("rotation modes need dim = 2".into()));
                }
                if !(finite(center) && amplitude.is_finite() && *radius > 0.0 && radius.is_finite()) {
                    return Err(SacError::Config("invalid rotation mode parameters".into()));
                }
            }
            ModeField::Trig {
                wavevector,
                phase,
                amplitude,
                direction,
            } => {
                if !(finite(wavevector) && finite(direction) && phase.is_finite() && amplitude.is_finite()) {
                    return Err(SacError::Config("non-finite trig parameter".into()));
                }
                if wavevector.iter().any(|k| k.fract() != 0.0) {
                    return Err(SacError::Config("trig wavevector must be integer".into()));
                }
                if dim == 1 && (direction[1] != 0.0 || wavevector[1] != 0.0) {
                    return Err(SacError::Config("1D trig mode must lie on the x axis".into()));
                }
            }
        }
        Ok(())
    }

    /// Whether the support stays at least `margin` away from `∂(0,1)^dim`.
    fn support_inside(&self, dim: usize, margin: f64) -> bool {
        match self {
            ModeField::Bump {
                center,
                radius,
                amplitude,
                ..
            }
            | ModeField::Rotation {
                center,
                radius,
                amplitude,
            } => {
                *amplitude == 0.0
                    || (0..dim).all(|m| center[m] - radius >= margin && center[m] + radius <= 1.0 - margin)
            }
            ModeField::Trig { amplitude, .. } => *amplitude == 0.0,
        }
    }
}

/// Spatial characteristics at one point, assembled from mode jets.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LocalTerms {
    /// `A = ã(x,x)`.
    pub a: Mat2,
    /// `c_j = Σ_k Σ_i X_i ∂_i X_j`.
    pub c: Vec2,
    /// `grad_a[i][j][l] = ∂_l a_ij`.
    pub grad_a: [Mat2; 2],
    /// `(∇·A)_j = Σ_i ∂_i a_ij`.
    pub div_a: Vec2,
    /// `D(∇·A)[j][l] = ∂_l (∇·A)_j`.
    pub d_div_a: Mat2,
    /// `∇·∇·A = Σ_ij ∂_i ∂_j a_ij`.
    pub div_div_a: f64,
    /// `Dc[j][l] = ∂_l c_j`.
    pub dc: Mat2,
    pub div_c: f64,
    /// `(∂_k ∂'_k ã)(x,x)[i][j] = Σ_modes Σ_m ∂_m X_i ∂_m X_j`.
    pub dd_a_tilde: Mat2,
    /// `(∂_m ∂'_j ã_im)(x,x) = Σ_modes Σ_m ∂_m X_i ∂_j X_m`.
    pub dd_a_tilde_cross: Mat2,
    /// `(∂_m ∂'_j ã_mi)(x,x) = Σ_modes (∇·X) ∂_j X_i`.
    pub dd_a_tilde_trace: Mat2,
    /// `(∂'_l ã_ij)(x,x) = Σ_modes X_i ∂_l X_j`.
    pub d_a_tilde: [Mat2; 2],
}

/// Coefficients of the energy-identity correction: `mat : ε∇u⊗∇u + scalar · F(u)/ε`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Bracket {
    pub mat: Mat2,
    pub scalar: f64,
}

/// Value, gradient and Hessian of a test function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarJet {
    pub v: f64,
    pub g: Vec2,
    pub h: Mat2,
}

impl ScalarJet {
    pub const ONE: ScalarJet = ScalarJet {
        v: 1.0,
        g: [0.0; 2],
        h: [[0.0; 2]; 2],
    };
}

impl LocalTerms {
    /// `(Ψ, ψ)`:
    /// `Ψ = ½∂_k∂'_kã + ∂_m∂'_jã_im − ∂_m∂'_jã_mi − ½Dc + ¼(∇·∇·A − ∇·c)I`
    /// (only the symmetric part enters), `ψ = ½(∇·∇·A − ∇·c)`.
    pub fn psi(&self, dim: usize) -> (Mat2, f64) {
        let mut m = [[0.0; 2]; 2];
        let iso = -0.25 * self.div_c + 0.25 * self.div_div_a;
        for j in 0..dim {
            for l in 0..dim {
                m[j][l] = 0.5 * self.dd_a_tilde[j][l] + self.dd_a_tilde_cross[j][l]
                    - self.dd_a_tilde_trace[j][l]
                    - 0.5 * self.dc[j][l];
            }
            m[j][j] += iso;
        }
        (m, 0.5 * (self.div_div_a - self.div_c))
    }

    /// Localized bracket for a test function `η`. With `η ≡ 1` all gradient
    /// terms are exact zeros and the result equals [`LocalTerms::psi`]
    /// bitwise.
    pub fn bracket(&self, dim: usize, eta: &ScalarJet) -> Bracket {
        let (psi_m, psi_s) = self.psi(dim);
        let mut eta_c = 0.0;
        let mut eta_div_a = 0.0;
        let mut a_hess = 0.0;
        for i in 0..dim {
            eta_c += eta.g[i] * self.c[i];
            eta_div_a += eta.g[i] * self.div_a[i];
            for j in 0..dim {
                a_hess += self.a[i][j] * eta.h[i][j];
            }
        }
        let iso = -0.25 * eta_c + 0.25 * a_hess + 0.5 * eta_div_a;
        let mut mat = [[0.0; 2]; 2];
        for j in 0..dim {
            for l in 0..dim {
                let mut grad_term = 0.0;
                for i in 0..dim {
                    grad_term += eta.g[i] * self.d_a_tilde[i][j][l];
                }
                mat[j][l] = eta.v * psi_m[j][l] - grad_term;
            }
            mat[j][j] += iso;
        }
        let scalar = eta.v * psi_s + (-0.5 * eta_c + 0.5 * a_hess + eta_div_a);
        Bracket { mat, scalar }
    }
}

/// Debug switches that zero individual correction terms. They exist to
/// show that the validation suite can fail.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Mutations {
    pub zero_a: bool,
    pub zero_c: bool,
    pub zero_psi: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    dim: usize,
    drift: Option<ModeField>,
    modes: Vec<ModeField>,
    support_margin: f64,
    mutations: Mutations,
}

impl NoiseModel {
    pub fn new(dim: usize, drift: Option<ModeField>, modes: Vec<ModeField>, support_margin: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(SacError::Config(format!("dim must be 1 or 2, got {dim}")));
        }
        if !(support_margin >= 0.0 && support_margin.is_finite()) {
            return Err(SacError::Config(format!(
                "support_margin must be non-negative, got {support_margin}"
            )));
        }
        for f in drift.iter().chain(&modes) {
            f.validate(dim)?;
        }
        Ok(NoiseModel {
            dim,
            drift,
            modes,
            support_margin,
            mutations: Mutations::default(),
        })
    }

    /// The deterministic equation: no drift, no modes.
    pub fn none(dim: usize) -> Self {
        NoiseModel {
            dim,
            drift: None,
            modes: Vec::new(),
            support_margin: 0.0,
            mutations: Mutations::default(),
        }
    }

    pub fn with_mutations(mut self, mutations: Mutations) -> Self {
        self.mutations = mutations;
        self
    }

    pub fn mutations(&self) -> Mutations {
        self.mutations
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[ModeField] {
        &self.modes
    }

    pub fn drift(&self) -> Option<&ModeField> {
        self.drift.as_ref()
    }

    pub fn support_margin(&self) -> f64 {
        self.support_margin
    }

    /// Checks compatibility with a grid: same dimension, and under Neumann
    /// closure every field vanishes within `support_margin` of the boundary.
    pub fn validate_for(&self, grid: &Grid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(SacError::Config(format!(
                "noise model is {}D but grid is {}D",
                self.dim,
                grid.dim()
            )));
        }
        let margin = match grid.closure() {
            Closure::Neumann => self.support_margin,
            Closure::Periodic => return Ok(()),
        };
        for (k, f) in self.drift.iter().chain(&self.modes).enumerate() {
            if !f.support_inside(self.dim, margin) {
                return Err(SacError::Config(format!(
                    "field {k} is not supported at distance {margin} from the boundary; Neumann grids need compactly supported modes"
                )));
            }
        }
        Ok(())
    }

    /// Largest eigenvalue of `A` over a set of points, bounded above by
    /// `Σ_k sup|X^k|²`.
    pub fn lambda_max_bound(&self) -> f64 {
        self.modes.iter().map(|m| m.sup_norm().powi(2)).sum()
    }

    pub fn drift_jet(&self, _t: f64, x: Vec2) -> Jet {
        self.drift.as_ref().map_or_else(Jet::default, |f| f.jet(self.dim, x))
    }

    pub fn mode_jets(&self, _t: f64, x: Vec2) -> Vec<Jet> {
        self.modes.iter().map(|f| f.jet(self.dim, x)).collect()
    }

    pub fn a_tilde(&self, t: f64, x: Vec2, y: Vec2) -> Mat2 {
        let jx = self.mode_jets(t, x);
        let jy = self.mode_jets(t, y);
        let mut a = [[0.0; 2]; 2];
        for (p, q) in jx.iter().zip(&jy) {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    a[i][j] += p.v[i] * q.v[j];
                }
            }
        }
        a
    }

    pub fn correction_a(&self, t: f64, x: Vec2) -> Mat2 {
        self.local_terms(t, x).a
    }

    pub fn correction_c(&self, t: f64, x: Vec2) -> Vec2 {
        self.local_terms(t, x).c
    }

    pub fn psi_fields(&self, t: f64, x: Vec2) -> (Mat2, f64) {
        self.local_terms(t, x).psi(self.dim)
    }

    pub fn local_terms(&self, t: f64, x: Vec2) -> LocalTerms {
        let n = self.dim;
        let mut lt = LocalTerms::default();
        for jet in self.mode_jets(t, x) {
            let (v, d, dd) = (jet.v, jet.d, jet.dd);
            for i in 0..n {
                for j in 0..n {
                    lt.a[i][j] += v[i] * v[j];
                    for l in 0..n {
                        lt.grad_a[i][j][l] += d[i][l] * v[j] + v[i] * d[j][l];
                    }
                    for m in 0..n {
                        lt.dd_a_tilde[i][j] += d[i][m] * d[j][m];
                        lt.dd_a_tilde_cross[i][j] += d[i][m] * d[m][j];
                        lt.dd_a_tilde_trace[i][j] += d[m][m] * d[i][j];
                    }
                    for l in 0..n {
                        lt.d_a_tilde[i][j][l] += v[i] * d[j][l];
                    }
                }
            }
            for j in 0..n {
                for i in 0..n {
                    lt.c[j] += v[i] * d[j][i];
                    // ∂_i a_ij
                    lt.div_a[j] += d[i][i] * v[j] + v[i] * d[j][i];
                    for l in 0..n {
                        lt.dc[j][l] += d[i][l] * d[j][i] + v[i] * dd[j][i][l];
                        // ∂_l ∂_i a_ij
                        lt.d_div_a[j][l] +=
                            dd[i][i][l] * v[j] + d[i][i] * d[j][l] + d[i][l] * d[j][i] + v[i] * dd[j][i][l];
                    }
                }
            }
        }
        lt.div_c = (0..n).map(|j| lt.dc[j][j]).sum();
        lt.div_div_a = (0..n).map(|j| lt.d_div_a[j][j]).sum();
        lt
    }

    /// `Σ_k X^k(x) ΔW_k` at every node plus the raw increments, drawn from
    /// the counter-based stream at `step`.
    pub fn sample_noise_increment(
        &self,
        grid: &Grid,
        t: f64,
        dt: f64,
        key: StreamKey,
        step: u64,
    ) -> Result<(VectorFieldSample, Vec<f64>)> {
        if !(dt > 0.0) {
            return Err(SacError::Config(format!("dt must be positive, got {dt}")));
        }
        let sd = dt.sqrt();
        let dw: Vec<f64> = (0..self.modes.len())
            .map(|k| sd * key.normal(k as u64, step))
            .collect();
        let mut field = VectorFieldSample::zeros(*grid);
        for idx in 0..grid.len() {
            let x = grid.coord(idx);
            for (jet, w) in self.mode_jets(t, x).iter().zip(&dw) {
                for i in 0..self.dim {
                    field.comps[i][idx] += jet.v[i] * w;
                }
            }
        }
        Ok((field, dw))
    }

    /// Samples every per-node coefficient the solvers and diagnostics need.
    pub fn sample(&self, grid: &Grid, t: f64) -> Result<SampledNoise> {
        self.validate_for(grid)?;
        let n = grid.len();
        let mut s = SampledNoise {
            grid: *grid,
            modes: vec![vec![[0.0; 2]; n]; self.modes.len()],
            drift: vec![[0.0; 2]; n],
            has_drift: self.drift.is_some(),
            a: vec![[0.0; 3]; n],
            c: vec![[0.0; 2]; n],
            psi_mat: vec![[0.0; 3]; n],
            psi: vec![0.0; n],
        };
        for idx in 0..n {
            let x = grid.coord(idx);
            for (k, jet) in self.mode_jets(t, x).iter().enumerate() {
                s.modes[k][idx] = jet.v;
            }
            s.drift[idx] = self.drift_jet(t, x).v;
            let lt = self.local_terms(t, x);
            if !self.mutations.zero_a {
                s.a[idx] = [lt.a[0][0], lt.a[0][1], lt.a[1][1]];
            }
            if !self.mutations.zero_c {
                s.c[idx] = lt.c;
            }
            if !self.mutations.zero_psi {
                let (pm, ps) = lt.psi(self.dim);
                s.psi_mat[idx] = symmetric_part(&pm);
                s.psi[idx] = ps;
            }
        }
        Ok(s)
    }

    /// Per-node bracket coefficients for a test function.
    pub fn sample_bracket(&self, grid: &Grid, t: f64, eta: impl Fn(Vec2) -> ScalarJet) -> Vec<([f64; 3], f64)> {
        (0..grid.len())
            .map(|idx| {
                if self.mutations.zero_psi {
                    return ([0.0; 3], 0.0);
                }
                let x = grid.coord(idx);
                let b = self.local_terms(t, x).bracket(self.dim, &eta(x));
                (symmetric_part(&b.mat), b.scalar)
            })
            .collect()
    }
}

/// `(m_xx, (m_xy + m_yx)/2, m_yy)`.
pub fn symmetric_part(m: &Mat2) -> [f64; 3] {
    [m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]]
}

/// Nodal samples of a [`NoiseModel`] on one grid (autonomous fields).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledNoise {
    grid: Grid,
    /// `modes[k][idx]` is `X^k` at node `idx`.
    pub modes: Vec<Vec<Vec2>>,
    pub drift: Vec<Vec2>,
    pub has_drift: bool,
    /// Symmetric `A` as `(xx, xy, yy)`.
    pub a: Vec<[f64; 3]>,
    pub c: Vec<Vec2>,
    /// Symmetric part of `Ψ` as `(xx, xy, yy)`.
    pub psi_mat: Vec<[f64; 3]>,
    pub psi: Vec<f64>,
}

impl SampledNoise {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Largest eigenvalue of `A` over the nodes.
    pub fn lambda_max(&self) -> f64 {
        self.a
            .iter()
            .map(|a| {
                let tr = 0.5 * (a[0] + a[2]);
                let det = a[0] * a[2] - a[1] * a[1];
                tr + (tr * tr - det).max(0.0).sqrt()
            })
            .fold(0.0, f64::max)
    }
}
