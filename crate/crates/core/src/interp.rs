//! Cubic (Catmull–Rom) interpolation of nodal data at arbitrary points.
//!
//! Periodic grids wrap. On Neumann grids the point must lie in the closed
//! box; cells whose cubic stencil would leave the grid fall back to
//! (bi)linear interpolation.

use crate::error::{Result, SacError};
use crate::grid::{Closure, Grid};

#[inline]
fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Cell index and offsets plus the four stencil indices along one axis.
/// Returns `None` for the indices when only a linear stencil fits.
fn axis_stencil(grid: &Grid, x: f64) -> Result<(usize, f64, Option<[usize; 4]>)> {
    let m = grid.nodes_per_axis();
    let h = grid.spacing();
    match grid.closure() {
        Closure::Periodic => {
            let s = x.rem_euclid(1.0) / h;
            let i = (s.floor() as usize).min(m - 1);
            let t = s - i as f64;
            let w = |d: isize| (i as isize + d).rem_euclid(m as isize) as usize;
            Ok((i, t, Some([w(-1), i, w(1), w(2)])))
        }
        Closure::Neumann => {
            let slack = 1e-9;
            if !(x >= -slack && x <= 1.0 + slack) {
                return Err(SacError::Domain(format!(
                    "interpolation point {x} outside the domain"
                )));
            }
            let s = (x.clamp(0.0, 1.0)) / h;
            let i = (s.floor() as usize).min(m - 2);
            let t = s - i as f64;
            if i >= 1 && i + 2 < m {
                Ok((i, t, Some([i - 1, i, i + 1, i + 2])))
            } else {
                Ok((i, t, None))
            }
        }
    }
}

/// Interpolates `values` (nodal data on `grid`) at `p`.
pub fn interpolate(grid: &Grid, values: &[f64], p: [f64; 2]) -> Result<f64> {
    let m = grid.nodes_per_axis();
    let (ix, tx, sx) = axis_stencil(grid, p[0])?;
    if grid.dim() == 1 {
        return Ok(match sx {
            Some(s) => {
                let w = catmull_rom_weights(tx);
                (0..4).map(|a| w[a] * values[s[a]]).sum()
            }
            None => (1.0 - tx) * values[ix] + tx * values[ix + 1],
        });
    }
    let (iy, ty, sy) = axis_stencil(grid, p[1])?;
    match (sx, sy) {
        (Some(sx), Some(sy)) => {
            let wx = catmull_rom_weights(tx);
            let wy = catmull_rom_weights(ty);
            let mut acc = 0.0;
            for b in 0..4 {
                let row = sy[b] * m;
                let r: f64 = (0..4).map(|a| wx[a] * values[row + sx[a]]).sum();
                acc += wy[b] * r;
            }
            Ok(acc)
        }
        _ => {
            let ix1 = if grid.closure() == Closure::Periodic { (ix + 1) % m } else { ix + 1 };
            let iy1 = if grid.closure() == Closure::Periodic { (iy + 1) % m } else { iy + 1 };
            let v = |a: usize, b: usize| values[b * m + a];
            Ok((1.0 - ty) * ((1.0 - tx) * v(ix, iy) + tx * v(ix1, iy))
                + ty * ((1.0 - tx) * v(ix, iy1) + tx * v(ix1, iy1)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ScalarField;
    use std::f64::consts::TAU;

    #[test]
    fn reproduces_nodes_and_cubics() {
        let g = Grid::new(2, 33, Closure::Neumann).unwrap();
        let f = |x: [f64; 2]| 1.0 + x[0] - 2.0 * x[1] + x[0] * x[0] * x[0] + x[0] * x[1] * x[1];
        let u = ScalarField::from_fn(g, f);
        for idx in [0usize, 17, 500, g.len() - 1] {
            let p = g.coord(idx);
            assert!((interpolate(&g, &u.values, p).unwrap() - u.values[idx]).abs() < 1e-13);
        }
        // Catmull–Rom reproduces quadratics exactly in the interior
        let q = |x: [f64; 2]| x[0] * x[0] - 3.0 * x[0] * x[1] + 0.5 * x[1] * x[1];
        let uq = ScalarField::from_fn(g, q);
        let p = [0.4321, 0.6173];
        assert!((interpolate(&g, &uq.values, p).unwrap() - q(p)).abs() < 1e-12);
        let near = [0.01, 0.5];
        assert!((interpolate(&g, &u.values, near).unwrap() - f(near)).abs() < 1e-3);
        assert!(interpolate(&g, &u.values, [1.5, 0.5]).is_err());
    }

    #[test]
    fn third_order_on_torus() {
        let mut errs = Vec::new();
        for m in [32, 64, 128] {
            let g = Grid::new(1, m, Closure::Periodic).unwrap();
            let u = ScalarField::from_fn(g, |x| (TAU * x[0]).sin());
            let err = (0..200)
                .map(|k| {
                    let x = (k as f64 + 0.37) / 200.0;
                    (interpolate(&g, &u.values, [x, 0.0]).unwrap() - (TAU * x).sin()).abs()
                })
                .fold(0.0, f64::max);
            errs.push(err);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 2.7, "{errs:?}");
        }
        // wrapping
        let g = Grid::new(1, 32, Closure::Periodic).unwrap();
        let u = ScalarField::from_fn(g, |x| (TAU * x[0]).cos());
        let a = interpolate(&g, &u.values, [0.99, 0.0]).unwrap();
        let b = interpolate(&g, &u.values, [-0.01, 0.0]).unwrap();
        assert!((a - b).abs() < 1e-14);
    }
}
