//! Rectangular grids on the unit box, nodal fields and finite-difference
//! operators.
//!
//! Nodes are stored row-major with the first coordinate fastest:
//! `index = iy * m + ix`. Neumann closure reflects ghost nodes
//! (`u_{-1} = u_1`), periodic closure wraps.
//!
//! Two gradient discretizations are provided. [`Grid::gradient`] is the
//! nodal central difference used by transport and correction terms;
//! [`Grid::forward_gradient`] lives on edges (stored at the left node) and
//! pairs with [`Grid::divergence`] so that `divergence ∘ forward_gradient`
//! is exactly the compact Laplacian and summation by parts holds against
//! the trapezoidal weights.

use crate::error::{Result, SacError};
use std::io::{Read, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    Neumann,
    Periodic,
}

impl Closure {
    fn code(self) -> u8 {
        match self {
            Closure::Neumann => 0,
            Closure::Periodic => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Closure::Neumann),
            1 => Ok(Closure::Periodic),
            _ => Err(SacError::Format(format!("unknown closure code {c}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    m: usize,
    h: f64,
    closure: Closure,
}

impl Grid {
    pub fn new(dim: usize, m: usize, closure: Closure) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(SacError::Config(format!("dim must be 1 or 2, got {dim}")));
        }
        if m < 8 {
            return Err(SacError::Config(format!(
                "nodes_per_axis must be at least 8, got {m}"
            )));
        }
        let h = match closure {
            Closure::Neumann => 1.0 / (m - 1) as f64,
            Closure::Periodic => 1.0 / m as f64,
        };
        Ok(Grid { dim, m, h, closure })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.m
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn closure(&self) -> Closure {
        self.closure
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.m + ix
    }

    #[inline]
    pub fn unindex(&self, idx: usize) -> (usize, usize) {
        (idx % self.m, idx / self.m)
    }

    /// Physical coordinates of a node; the second entry is 0 in 1D.
    #[inline]
    pub fn coord(&self, idx: usize) -> [f64; 2] {
        let (ix, iy) = self.unindex(idx);
        [ix as f64 * self.h, iy as f64 * self.h]
    }

    /// Domain length along an axis (1 for both closures).
    pub fn period(&self) -> f64 {
        1.0
    }

    /// Neighbour index along one axis, after closure.
    #[inline]
    fn shift(&self, i: usize, delta: isize) -> usize {
        let m = self.m as isize;
        let j = i as isize + delta;
        match self.closure {
            Closure::Periodic => j.rem_euclid(m) as usize,
            Closure::Neumann => {
                if j < 0 {
                    (-j) as usize
                } else if j >= m {
                    (2 * (m - 1) - j) as usize
                } else {
                    j as usize
                }
            }
        }
    }

    /// Whether the shift crosses a reflecting boundary (odd parity for
    /// normal components).
    #[inline]
    fn reflects(&self, i: usize, delta: isize) -> bool {
        self.closure == Closure::Neumann && {
            let j = i as isize + delta;
            j < 0 || j >= self.m as isize
        }
    }

    /// One-dimensional quadrature weight along an axis.
    #[inline]
    pub fn axis_weight(&self, i: usize) -> f64 {
        match self.closure {
            Closure::Periodic => self.h,
            Closure::Neumann => {
                if i == 0 || i == self.m - 1 {
                    0.5 * self.h
                } else {
                    self.h
                }
            }
        }
    }

    /// Trapezoid (Neumann) or rectangle (periodic) weight of a node.
    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        let (ix, iy) = self.unindex(idx);
        if self.dim == 1 {
            self.axis_weight(ix)
        } else {
            self.axis_weight(ix) * self.axis_weight(iy)
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Quadrature weight of the edge stored at node `idx` along `axis`.
    #[inline]
    pub fn edge_weight(&self, axis: usize, idx: usize) -> f64 {
        let (ix, iy) = self.unindex(idx);
        let (along, across) = if axis == 0 { (ix, iy) } else { (iy, ix) };
        let w_along = match self.closure {
            Closure::Periodic => self.h,
            Closure::Neumann => {
                if along == self.m - 1 {
                    0.0
                } else {
                    self.h
                }
            }
        };
        if self.dim == 1 {
            w_along
        } else {
            w_along * self.axis_weight(across)
        }
    }

    fn check_len(&self, n: usize) {
        assert_eq!(n, self.len(), "field length does not match grid");
    }

    // ---- slice kernels -------------------------------------------------

    pub fn laplacian_into(&self, u: &[f64], out: &mut [f64]) {
        self.check_len(u.len());
        let m = self.m;
        let ih2 = 1.0 / (self.h * self.h);
        if self.dim == 1 {
            for i in 0..m {
                let l = u[self.shift(i, -1)];
                let r = u[self.shift(i, 1)];
                out[i] = (l - 2.0 * u[i] + r) * ih2;
            }
            return;
        }
        for iy in 0..m {
            let dn = self.shift(iy, -1) * m;
            let up = self.shift(iy, 1) * m;
            let row = iy * m;
            for ix in 0..m {
                let c = u[row + ix];
                let l = u[row + self.shift(ix, -1)];
                let r = u[row + self.shift(ix, 1)];
                let d = u[dn + ix];
                let t = u[up + ix];
                out[row + ix] = (l + r + d + t - 4.0 * c) * ih2;
            }
        }
    }

    /// Central-difference gradient; components written to `gx`, `gy`
    /// (`gy` untouched in 1D).
    pub fn gradient_into(&self, u: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        self.check_len(u.len());
        let m = self.m;
        let i2h = 0.5 / self.h;
        if self.dim == 1 {
            for i in 0..m {
                gx[i] = (u[self.shift(i, 1)] - u[self.shift(i, -1)]) * i2h;
            }
            return;
        }
        for iy in 0..m {
            let dn = self.shift(iy, -1) * m;
            let up = self.shift(iy, 1) * m;
            let row = iy * m;
            for ix in 0..m {
                gx[row + ix] = (u[row + self.shift(ix, 1)] - u[row + self.shift(ix, -1)]) * i2h;
                gy[row + ix] = (u[up + ix] - u[dn + ix]) * i2h;
            }
        }
    }

    /// Central difference of a gradient component along `axis`. `odd`
    /// marks a component normal to the boundaries crossed along `axis`,
    /// whose ghost values change sign under reflection.
    fn central_component_into(&self, v: &[f64], axis: usize, odd: bool, out: &mut [f64]) {
        let m = self.m;
        let i2h = 0.5 / self.h;
        let rows = if self.dim == 1 { 1 } else { m };
        for iy in 0..rows {
            for ix in 0..m {
                let idx = iy * m + ix;
                let (i, base, stride) = if axis == 0 {
                    (ix, iy * m, 1)
                } else {
                    (iy, ix, m)
                };
                let ip = self.shift(i, 1);
                let im = self.shift(i, -1);
                let mut vp = v[base + ip * stride];
                let mut vm = v[base + im * stride];
                if odd {
                    if self.reflects(i, 1) {
                        vp = -vp;
                    }
                    if self.reflects(i, -1) {
                        vm = -vm;
                    }
                }
                out[idx] = (vp - vm) * i2h;
            }
        }
    }

    /// Nested central-difference Hessian `(xx, xy, yy)` from a central
    /// gradient `(gx, gy)`.
    pub fn hessian_from_gradient_into(
        &self,
        gx: &[f64],
        gy: &[f64],
        xx: &mut [f64],
        xy: &mut [f64],
        yy: &mut [f64],
    ) {
        self.central_component_into(gx, 0, true, xx);
        if self.dim == 2 {
            self.central_component_into(gx, 1, false, xy);
            self.central_component_into(gy, 1, true, yy);
        }
    }

    pub fn forward_gradient_into(&self, u: &[f64], fx: &mut [f64], fy: &mut [f64]) {
        self.check_len(u.len());
        let m = self.m;
        let ih = 1.0 / self.h;
        let periodic = self.closure == Closure::Periodic;
        let rows = if self.dim == 1 { 1 } else { m };
        for iy in 0..rows {
            let row = iy * m;
            for ix in 0..m {
                fx[row + ix] = if ix + 1 < m {
                    (u[row + ix + 1] - u[row + ix]) * ih
                } else if periodic {
                    (u[row] - u[row + ix]) * ih
                } else {
                    0.0
                };
            }
        }
        if self.dim == 2 {
            for iy in 0..m {
                let row = iy * m;
                for ix in 0..m {
                    fy[row + ix] = if iy + 1 < m {
                        (u[row + m + ix] - u[row + ix]) * ih
                    } else if periodic {
                        (u[ix] - u[row + ix]) * ih
                    } else {
                        0.0
                    };
                }
            }
        }
    }

    /// Backward-difference divergence of an edge field; the negative
    /// adjoint of [`Grid::forward_gradient_into`].
    pub fn divergence_into(&self, vx: &[f64], vy: &[f64], out: &mut [f64]) {
        let m = self.m;
        let ih = 1.0 / self.h;
        let rows = if self.dim == 1 { 1 } else { m };
        let back = |v: &[f64], i: usize, base: usize, stride: usize| -> f64 {
            // v at edge i and at edge i-1 along the axis
            let here = if self.closure == Closure::Neumann && i == m - 1 {
                -v[base + (m - 2) * stride]
            } else {
                v[base + i * stride]
            };
            let prev = if i == 0 {
                match self.closure {
                    Closure::Periodic => v[base + (m - 1) * stride],
                    Closure::Neumann => -v[base],
                }
            } else {
                v[base + (i - 1) * stride]
            };
            (here - prev) * ih
        };
        for iy in 0..rows {
            for ix in 0..m {
                let idx = iy * m + ix;
                let mut d = back(vx, ix, iy * m, 1);
                if self.dim == 2 {
                    d += back(vy, iy, ix, m);
                }
                out[idx] = d;
            }
        }
    }

    pub fn integrate_slice(&self, f: &[f64]) -> f64 {
        self.check_len(f.len());
        if self.dim == 1 {
            return f.iter().enumerate().map(|(i, v)| self.axis_weight(i) * v).sum();
        }
        let m = self.m;
        (0..m)
            .map(|iy| {
                let row: f64 = (0..m).map(|ix| self.axis_weight(ix) * f[iy * m + ix]).sum();
                self.axis_weight(iy) * row
            })
            .sum()
    }

    // ---- field-level operations ---------------------------------------

    pub fn laplacian(&self, u: &ScalarField) -> ScalarField {
        let mut out = vec![0.0; self.len()];
        self.laplacian_into(&u.values, &mut out);
        ScalarField::from_values(*self, out)
    }

    pub fn gradient(&self, u: &ScalarField) -> VectorFieldSample {
        let n = self.len();
        let mut gx = vec![0.0; n];
        let mut gy = vec![0.0; n];
        self.gradient_into(&u.values, &mut gx, &mut gy);
        VectorFieldSample::from_components(*self, self.components(gx, gy))
    }

    pub fn hessian(&self, u: &ScalarField) -> HessianSample {
        let n = self.len();
        let mut gx = vec![0.0; n];
        let mut gy = vec![0.0; n];
        self.gradient_into(&u.values, &mut gx, &mut gy);
        let mut xx = vec![0.0; n];
        let mut xy = vec![0.0; n];
        let mut yy = vec![0.0; n];
        self.hessian_from_gradient_into(&gx, &gy, &mut xx, &mut xy, &mut yy);
        HessianSample {
            grid: *self,
            xx,
            xy,
            yy,
        }
    }

    pub fn forward_gradient(&self, u: &ScalarField) -> VectorFieldSample {
        let n = self.len();
        let mut fx = vec![0.0; n];
        let mut fy = vec![0.0; n];
        self.forward_gradient_into(&u.values, &mut fx, &mut fy);
        VectorFieldSample::from_components(*self, self.components(fx, fy))
    }

    pub fn divergence(&self, v: &VectorFieldSample) -> ScalarField {
        let mut out = vec![0.0; self.len()];
        let empty = Vec::new();
        let vy = v.comps.get(1).unwrap_or(&empty);
        self.divergence_into(&v.comps[0], vy, &mut out);
        ScalarField::from_values(*self, out)
    }

    pub fn integrate(&self, f: &ScalarField) -> f64 {
        self.integrate_slice(&f.values)
    }

    /// `Σ_edges w_e D⁺u D⁺v`, the discrete `∫ ∇u·∇v` paired with the
    /// compact Laplacian.
    pub fn dirichlet_form(&self, u: &ScalarField, v: &ScalarField) -> f64 {
        let du = self.forward_gradient(u);
        let dv = self.forward_gradient(v);
        let mut acc = 0.0;
        for axis in 0..self.dim {
            for i in 0..self.len() {
                acc += self.edge_weight(axis, i) * du.comps[axis][i] * dv.comps[axis][i];
            }
        }
        acc
    }

    fn components(&self, x: Vec<f64>, y: Vec<f64>) -> Vec<Vec<f64>> {
        if self.dim == 1 {
            vec![x]
        } else {
            vec![x, y]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        ScalarField {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coord(i))).collect();
        ScalarField { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn try_from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(SacError::Contract(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(SacError::Domain(format!("non-finite field value {v}")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `∫ |self − other|`.
    pub fn l1_distance(&self, other: &ScalarField) -> f64 {
        let diff: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .collect();
        self.grid.integrate_slice(&diff)
    }

    /// Writes the `SACF` binary snapshot.
    pub fn write_snapshot<W: Write>(&self, mut w: W, time: f64) -> Result<()> {
        w.write_all(b"SACF")?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&[self.grid.dim as u8])?;
        w.write_all(&(self.grid.m as u32).to_le_bytes())?;
        w.write_all(&[self.grid.closure.code()])?;
        w.write_all(&time.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads an `SACF` snapshot, returning the field and its time stamp.
    pub fn read_snapshot<R: Read>(mut r: R) -> Result<(ScalarField, f64)> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"SACF" {
            return Err(SacError::Format("bad snapshot magic".into()));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        let version = u16::from_le_bytes(b2);
        if version != SNAPSHOT_VERSION {
            return Err(SacError::Format(format!(
                "unsupported snapshot version {version}"
            )));
        }
        let mut b1 = [0u8; 1];
        r.read_exact(&mut b1)?;
        let dim = b1[0] as usize;
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let m = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b1)?;
        let closure = Closure::from_code(b1[0])?;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let time = f64::from_le_bytes(b8);
        let grid = Grid::new(dim, m, closure).map_err(|e| SacError::Format(e.to_string()))?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        Ok((ScalarField::try_from_values(grid, values)?, time))
    }
}

pub const SNAPSHOT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldSample {
    grid: Grid,
    pub comps: Vec<Vec<f64>>,
}

impl VectorFieldSample {
    pub fn zeros(grid: Grid) -> Self {
        VectorFieldSample {
            grid,
            comps: vec![vec![0.0; grid.len()]; grid.dim()],
        }
    }

    pub fn from_components(grid: Grid, comps: Vec<Vec<f64>>) -> Self {
        assert_eq!(comps.len(), grid.dim());
        assert!(comps.iter().all(|c| c.len() == grid.len()));
        VectorFieldSample { grid, comps }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [f64; 2] {
        let x = self.comps[0][idx];
        let y = self.comps.get(1).map_or(0.0, |c| c[idx]);
        [x, y]
    }
}

/// Per-node symmetric Hessian samples; `xy` and `yy` are zero in 1D.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianSample {
    grid: Grid,
    pub xx: Vec<f64>,
    pub xy: Vec<f64>,
    pub yy: Vec<f64>,
}

impl HessianSample {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [[f64; 2]; 2] {
        [[self.xx[idx], self.xy[idx]], [self.xy[idx], self.yy[idx]]]
    }
}
