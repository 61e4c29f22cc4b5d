//! Double-well potentials and the Modica–Mortola transform.
//!
//! A potential is an even polynomial `F(r) = Σ_j a_j r^{2j}` vanishing at
//! `±1`. The standard quartic `(1 − r²)²/4` is the default.

use crate::error::{Result, SacError};
use std::f64::consts::SQRT_2;

/// Which double well is in use.
#[derive(Debug, Clone, PartialEq)]
pub enum WellKind {
    StandardQuartic,
    /// Coefficients `a_j` of `F(r) = Σ_j a_j r^{2j}`.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoubleWell {
    kind: WellKind,
    /// Coefficients in powers of `r²`, shared by both kinds.
    coeffs: Vec<f64>,
    growth_exponent: f64,
    growth_constant: f64,
    growth_threshold: f64,
}

impl Default for DoubleWell {
    fn default() -> Self {
        Self::standard()
    }
}

const SIMPSON_TOL: f64 = 1e-12;

impl DoubleWell {
    pub fn standard() -> Self {
        DoubleWell {
            kind: WellKind::StandardQuartic,
            coeffs: vec![0.25, -0.5, 0.25],
            growth_exponent: 2.0,
            growth_constant: 0.1,
            growth_threshold: 2.0,
        }
    }

    /// Builds a custom even-polynomial potential and checks the structural
    /// invariants on a sampling grid.
    pub fn custom(
        coeffs: Vec<f64>,
        growth_exponent: f64,
        growth_constant: f64,
    ) -> Result<Self> {
        if coeffs.len() < 2 || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(SacError::Config(
                "custom potential needs at least two finite coefficients".into(),
            ));
        }
        if !(growth_exponent > 0.0) || !(growth_constant > 0.0) {
            return Err(SacError::Config(
                "growth exponent and constant must be positive".into(),
            ));
        }
        let w = DoubleWell {
            kind: WellKind::Custom(coeffs.clone()),
            coeffs,
            growth_exponent,
            growth_constant,
            growth_threshold: 2.0,
        };
        w.check_invariants()?;
        Ok(w)
    }

    pub fn kind(&self) -> &WellKind {
        &self.kind
    }

    pub fn is_standard(&self) -> bool {
        matches!(self.kind, WellKind::StandardQuartic)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn growth_exponent(&self) -> f64 {
        self.growth_exponent
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth_constant
    }

    /// Verifies the double-well assumptions on a sampling grid of `[-4, 4]`.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(SacError::Config(format!("potential: {msg}")));
        if self.f(1.0) != 0.0 || self.f(-1.0) != 0.0 {
            return fail(format!("F(±1) = {} must vanish exactly", self.f(1.0)));
        }
        if !(self.f_second(0.0) < 0.0) {
            return fail("F''(0) must be negative".into());
        }
        if !(self.f_second(1.0) > 0.0) {
            return fail("F''(±1) must be positive".into());
        }
        let n = 8001;
        let mut prev_sign = 0i8;
        let mut sign_changes = Vec::new();
        for i in 0..n {
            let r = -4.0 + 8.0 * i as f64 / (n - 1) as f64;
            let fr = self.f(r);
            if fr < 0.0 {
                return fail(format!("F({r}) = {fr} is negative"));
            }
            if fr == 0.0 && (r.abs() - 1.0).abs() > 1e-12 {
                return fail(format!("F vanishes at r = {r}"));
            }
            if (fr - self.f(-r)).abs() > 1e-12 * (1.0 + fr.abs()) {
                return fail(format!("F not even at r = {r}"));
            }
            if r.abs() >= self.growth_threshold
                && fr < self.growth_constant * r.abs().powf(2.0 + self.growth_exponent)
            {
                return fail(format!("growth condition fails at r = {r}"));
            }
            let fp = self.f_prime(r);
            let s = if fp > 0.0 { 1 } else if fp < 0.0 { -1 } else { 0 };
            if s != 0 {
                if prev_sign != 0 && s != prev_sign {
                    sign_changes.push(r);
                }
                prev_sign = s;
            }
        }
        if sign_changes.len() != 3 {
            return fail(format!(
                "F' must have exactly three zeros, found {} sign changes",
                sign_changes.len()
            ));
        }
        Ok(())
    }

    /// `F(r)`, unchecked.
    #[inline]
    pub fn f(&self, r: f64) -> f64 {
        if self.is_standard() {
            let s = 1.0 - r * r;
            return 0.25 * s * s;
        }
        let r2 = r * r;
        self.coeffs.iter().rev().fold(0.0, |acc, &a| acc * r2 + a)
    }

    /// `F'(r)`, unchecked.
    #[inline]
    pub fn f_prime(&self, r: f64) -> f64 {
        if self.is_standard() {
            return r * r * r - r;
        }
        // d/dr Σ a_j r^{2j} = Σ 2j a_j r^{2j-1}
        let r2 = r * r;
        let mut acc = 0.0;
        for (j, &a) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * r2 + 2.0 * j as f64 * a;
        }
        acc * r
    }

    /// `F''(r)`, unchecked.
    #[inline]
    pub fn f_second(&self, r: f64) -> f64 {
        if self.is_standard() {
            return 3.0 * r * r - 1.0;
        }
        let r2 = r * r;
        let mut acc = 0.0;
        for (j, &a) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * r2 + 2.0 * j as f64 * (2.0 * j as f64 - 1.0) * a;
        }
        acc
    }

    pub fn f_eval(&self, r: f64) -> Result<f64> {
        finite(r)?;
        Ok(self.f(r))
    }

    pub fn f_prime_eval(&self, r: f64) -> Result<f64> {
        finite(r)?;
        Ok(self.f_prime(r))
    }

    pub fn f_second_eval(&self, r: f64) -> Result<f64> {
        finite(r)?;
        Ok(self.f_second(r))
    }

    /// `√(2F(r))`, the derivative of `G`.
    #[inline]
    pub fn sqrt_2f(&self, r: f64) -> f64 {
        (2.0 * self.f(r)).max(0.0).sqrt()
    }

    /// Largest `|F''|` on `[-bound, bound]`, sampled.
    pub fn max_abs_f_second(&self, bound: f64) -> f64 {
        (0..=2000)
            .map(|i| self.f_second(-bound + 2.0 * bound * i as f64 / 2000.0).abs())
            .fold(0.0, f64::max)
    }

    /// `G(r) = ∫₀^r √(2F(s)) ds`, unchecked.
    pub fn g(&self, r: f64) -> f64 {
        if self.is_standard() && r.abs() <= 1.0 {
            return (r - r * r * r / 3.0) / SQRT_2;
        }
        let a = r.abs();
        // √(2F) has kinks at ±1 only; integrate each smooth piece separately.
        let val = if a <= 1.0 {
            self.integrate_sqrt_2f(0.0, a)
        } else {
            self.g_unit() + self.integrate_sqrt_2f(1.0, a)
        };
        val.copysign(r)
    }

    fn g_unit(&self) -> f64 {
        if self.is_standard() {
            SQRT_2 / 3.0
        } else {
            self.integrate_sqrt_2f(0.0, 1.0)
        }
    }

    fn integrate_sqrt_2f(&self, a: f64, b: f64) -> f64 {
        adaptive_simpson(&|s| self.sqrt_2f(s), a, b, SIMPSON_TOL)
    }

    pub fn g_transform(&self, r: f64) -> Result<f64> {
        finite(r)?;
        Ok(self.g(r))
    }

    /// Inverse of `G` by bracketing bisection followed by safeguarded Newton.
    pub fn g_inverse(&self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(SacError::Range(format!("{y} is outside the range of G")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let tol = 1e-12 * (1.0 + y.abs());
        let mut hi = 1.0f64;
        while self.g(hi) < y.abs() {
            hi *= 2.0;
            if hi > 1e8 {
                return Err(SacError::Range(format!("{y} is outside the range of G")));
            }
        }
        let target = y.abs();
        let mut lo = 0.0f64;
        // Bisection to 1e-6.
        while hi - lo > 1e-6 {
            let mid = 0.5 * (lo + hi);
            if self.g(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut r = 0.5 * (lo + hi);
        for _ in 0..200 {
            // polish until the bracket collapses, not just to the residual
            // tolerance: G is flat near ±1, so r needs the extra digits
            let gr = self.g(r) - target;
            if gr == 0.0 {
                break;
            }
            if gr < 0.0 {
                lo = r;
            } else {
                hi = r;
            }
            let d = self.sqrt_2f(r);
            let newton = r - gr / d;
            r = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 2.0 * f64::EPSILON * hi {
                break;
            }
        }
        if (self.g(r) - target).abs() > tol {
            return Err(SacError::Range(format!("G^-1({y}) did not converge")));
        }
        Ok(r.copysign(y))
    }

    /// `c₀ = ∫_{-1}^{1} √(2F)`.
    pub fn surface_tension(&self) -> f64 {
        self.g(1.0) - self.g(-1.0)
    }

    /// One-dimensional standing wave `ε u'' = F'(u)/ε` with `u(±∞) = ±1`.
    pub fn optimal_profile(&self, x: f64, eps: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(SacError::Domain(format!("eps = {eps} must be positive")));
        }
        finite(x)?;
        if !self.is_standard() {
            return Err(SacError::Domain(
                "closed-form optimal profile only exists for the standard quartic".into(),
            ));
        }
        Ok((x / (SQRT_2 * eps)).tanh())
    }
}

fn finite(r: f64) -> Result<()> {
    if r.is_finite() {
        Ok(())
    } else {
        Err(SacError::Domain(format!("non-finite argument {r}")))
    }
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Composite Gauss–Legendre oracle, independent of the Simpson path.
    fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let nodes = [
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (-0.538_469_310_105_683, 0.478_628_670_499_366_5),
            (0.0, 0.568_888_888_888_888_9),
            (0.538_469_310_105_683, 0.478_628_670_499_366_5),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ];
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let c = a + (p as f64 + 0.5) * h;
                nodes.iter().map(|(x, w)| w * f(c + 0.5 * h * x)).sum::<f64>() * 0.5 * h
            })
            .sum()
    }

    #[test]
    fn standard_values() {
        let w = DoubleWell::standard();
        assert_eq!(w.f_eval(0.0).unwrap(), 0.25);
        assert_eq!(w.f_prime_eval(1.0).unwrap(), 0.0);
        assert_eq!(w.f_prime_eval(-1.0).unwrap(), 0.0);
        assert_eq!(w.f_second_eval(0.0).unwrap(), -1.0);
        assert!(w.f_eval(f64::NAN).is_err());
        assert!(w.f_prime_eval(f64::INFINITY).is_err());
        w.check_invariants().unwrap();
    }

    #[test]
    fn g_matches_quadrature_oracle() {
        let w = DoubleWell::standard();
        let oracle = gauss_legendre(|s| (1.0 - s * s) / SQRT_2, 0.0, 1.0, 64);
        assert!((oracle - 0.471_404_52).abs() < 1e-8);
        assert!((w.g_transform(1.0).unwrap() - oracle).abs() < 1e-12);
        assert!((w.g_transform(-1.0).unwrap() + oracle).abs() < 1e-12);
        assert_eq!(w.g_transform(0.0).unwrap(), 0.0);
        // outside [-1, 1] the quadrature path is used
        let beyond = oracle + gauss_legendre(|s| (s * s - 1.0) / SQRT_2, 1.0, 1.7, 64);
        assert!((w.g(1.7) - beyond).abs() < 1e-11);
        assert!((w.g(-1.7) + beyond).abs() < 1e-11);
    }

    #[test]
    fn g_inverse_examples() {
        let w = DoubleWell::standard();
        assert_eq!(w.g_inverse(0.0).unwrap(), 0.0);
        let y = w.g(0.5);
        assert!((w.g_inverse(y).unwrap() - 0.5).abs() < 1e-10);
        // G' vanishes at 1, so the preimage is only determined to about √tol
        assert!((w.g_inverse(w.g(1.0)).unwrap() - 1.0).abs() < 1e-5);
        assert!(w.g_inverse(f64::NAN).is_err());
        assert!(w.g_inverse(f64::INFINITY).is_err());
        let r = w.g_inverse(3.0).unwrap();
        assert!((w.g(r) - 3.0).abs() <= 1e-12 * 4.0);
    }

    #[test]
    fn surface_tension_values() {
        let w = DoubleWell::standard();
        let oracle = gauss_legendre(|s| w.sqrt_2f(s), -1.0, 1.0, 128);
        assert!((w.surface_tension() - 0.942_809_04).abs() < 1e-8);
        assert!((w.surface_tension() - oracle).abs() < 1e-10);
        assert_eq!(w.surface_tension(), w.g(1.0) - w.g(-1.0));
        let scaled = DoubleWell::custom(vec![1.0, -2.0, 1.0], 2.0, 0.1).unwrap();
        assert!((scaled.surface_tension() - 2.0 * w.surface_tension()).abs() < 1e-10);
    }

    #[test]
    fn custom_matches_standard_coefficients() {
        let c = DoubleWell::custom(vec![0.25, -0.5, 0.25], 2.0, 0.1).unwrap();
        let s = DoubleWell::standard();
        for i in 0..41 {
            let r = -2.0 + 0.1 * i as f64;
            assert!((c.f(r) - s.f(r)).abs() < 1e-13);
            assert!((c.f_prime(r) - s.f_prime(r)).abs() < 1e-12);
            assert!((c.f_second(r) - s.f_second(r)).abs() < 1e-12);
        }
    }

    #[test]
    fn custom_rejects_bad_wells() {
        // single well r^2
        assert!(DoubleWell::custom(vec![0.0, 1.0], 2.0, 0.1).is_err());
        // wells not at ±1
        assert!(DoubleWell::custom(vec![1.0, -1.0, 0.1], 2.0, 0.1).is_err());
        // no super-quadratic growth
        assert!(DoubleWell::custom(vec![0.25, -0.5, 0.25], 2.0, 10.0).is_err());
    }

    #[test]
    fn optimal_profile_values() {
        let w = DoubleWell::standard();
        assert_eq!(w.optimal_profile(0.0, 0.3).unwrap(), 0.0);
        let eps = 0.02;
        let v = w.optimal_profile(10.0 * eps * SQRT_2, eps).unwrap();
        assert!((v - 1.0).abs() < 1e-8);
        assert!(w.optimal_profile(0.1, 0.0).is_err());
    }

    #[test]
    fn optimal_profile_annihilates_curvature() {
        // ODE residual oracle: ε u'' − F'(u)/ε with a three-point stencil.
        let w = DoubleWell::standard();
        let eps = 0.05;
        let mut prev = 0.0;
        for &n in &[400usize, 800] {
            let h = 1.0 / n as f64;
            let u: Vec<f64> = (0..=n)
                .map(|i| w.optimal_profile(i as f64 * h - 0.5, eps).unwrap())
                .collect();
            let res = (1..n)
                .map(|i| {
                    let lap = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
                    (eps * lap - w.f_prime(u[i]) / eps).abs()
                })
                .fold(0.0, f64::max);
            assert!(res < 2.0 * h * h / eps.powi(3), "res {res} at n {n}");
            if prev > 0.0 {
                assert!(prev / res > 3.5);
            }
            prev = res;
        }
    }

    #[test]
    fn g_derivative_is_sqrt_2f() {
        let w = DoubleWell::standard();
        let d = 1e-5;
        for i in 0..=80 {
            let r = -2.0 + 0.05 * i as f64;
            let fd = (w.g(r + d) - w.g(r - d)) / (2.0 * d);
            // skip the kinks of √(2F) at ±1, where the central difference is O(d)
            if (r.abs() - 1.0).abs() < 1e-9 {
                assert!((fd - w.sqrt_2f(r)).abs() < 1e-4);
            } else {
                assert!((fd - w.sqrt_2f(r)).abs() < 1e-8, "r = {r}");
            }
        }
    }

    proptest! {
        #[test]
        fn g_inverse_is_left_inverse(r in -1.5f64..1.5) {
            let w = DoubleWell::standard();
            let y = w.g(r);
            let back = w.g_inverse(y).unwrap();
            prop_assert!((w.g(back) - y).abs() <= 1e-12 * (1.0 + y.abs()));
            // G'(±1) = 0 makes the inverse ill-conditioned there: a rounding
            // error δ in G(r) moves r by about sqrt(δ)
            if (r.abs() - 1.0).abs() > 1e-3 {
                prop_assert!((back - r).abs() < 1e-10);
            } else {
                prop_assert!((back - r).abs() < 1e-7);
            }
        }

        #[test]
        fn young_inequality(r in -3.0f64..3.0, a in 0.0f64..100.0, eps in 0.001f64..1.0) {
            let w = DoubleWell::standard();
            let lhs = w.sqrt_2f(r) * a;
            let rhs = 0.5 * eps * a * a + w.f(r) / eps;
            prop_assert!(lhs <= rhs + 1e-14 * (1.0 + rhs));
        }

        #[test]
        fn potential_symmetry(r in -10.0f64..10.0) {
            let w = DoubleWell::standard();
            prop_assert_eq!(w.f(r), w.f(-r));
            prop_assert!(w.f(r) >= 0.0);
        }
    }
}
