//! Initial data families, built per `ε` so that interfaces start at the
//! optimal-profile width.

use crate::error::{Result, SacError};
use crate::grid::{Grid, ScalarField};
use crate::noise::Vec2;
use crate::potential::DoubleWell;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Constant(f64),
    /// Single kink along the first axis, `−1` left of `center`.
    Kink { center: f64 },
    /// `+1` on `(left, right)`, `−1` outside.
    TwoKinks { left: f64, right: f64 },
    /// `+1` inside the disc (interval in 1D), `−1` outside.
    Circle { center: Vec2, radius: f64 },
    /// `height · exp(1 − 1/(1 − |x − c|²/R²))` inside the ball, 0 outside.
    SmoothBump { center: Vec2, radius: f64, height: f64 },
    Values(Vec<f64>),
}

impl InitialData {
    pub fn build(&self, grid: &Grid, eps: f64, well: &DoubleWell) -> Result<ScalarField> {
        // tanh profile for the standard quartic, a smooth clamp otherwise
        let profile = |s: f64| -> f64 {
            if well.is_standard() {
                (s / (std::f64::consts::SQRT_2 * eps)).tanh()
            } else {
                (s / eps).tanh()
            }
        };
        let dim = grid.dim();
        let field = match self {
            InitialData::Constant(c) => ScalarField::constant(*grid, *c),
            InitialData::Kink { center } => ScalarField::from_fn(*grid, |x| profile(x[0] - center)),
            InitialData::TwoKinks { left, right } => {
                if !(left < right) {
                    return Err(SacError::Config(format!("two kinks need left < right, got {left}, {right}")));
                }
                ScalarField::from_fn(*grid, |x| profile(x[0] - left) * profile(right - x[0]))
            }
            InitialData::Circle { center, radius } => ScalarField::from_fn(*grid, |x| {
                let r = if dim == 1 {
                    (x[0] - center[0]).abs()
                } else {
                    (x[0] - center[0]).hypot(x[1] - center[1])
                };
                profile(radius - r)
            }),
            InitialData::SmoothBump { center, radius, height } => ScalarField::from_fn(*grid, |x| {
                let mut s = 0.0;
                for m in 0..dim {
                    s += (x[m] - center[m]).powi(2);
                }
                s /= radius * radius;
                if s < 1.0 {
                    height * (1.0 - 1.0 / (1.0 - s)).exp()
                } else {
                    0.0
                }
            }),
            InitialData::Values(v) => ScalarField::try_from_values(*grid, v.clone())?,
        };
        Ok(field)
    }
}
