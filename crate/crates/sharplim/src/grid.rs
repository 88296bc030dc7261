//! Uniform 1D/2D node grids on `[0, Lx] × [0, Ly]` and grid functions with
//! Neumann (reflected-ghost) boundary handling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane; 1D problems use `[x, 0]`.
pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
}

impl Grid {
    pub fn new_1d(lx: f64, nx: usize) -> Result<Self> {
        if nx < 3 || !(lx > 0.0) {
            return Err(Error::Config(format!("bad 1D grid: lx = {lx}, nx = {nx}")));
        }
        Ok(Grid { dim: 1, lx, ly: 0.0, nx, ny: 1, h: lx / (nx - 1) as f64 })
    }

    /// Square-celled 2D grid; `ly` must be a multiple of the spacing.
    pub fn new_2d(lx: f64, ly: f64, nx: usize) -> Result<Self> {
        if nx < 3 || !(lx > 0.0) || !(ly > 0.0) {
            return Err(Error::Config(format!("bad 2D grid: {lx} x {ly}, nx = {nx}")));
        }
        let h = lx / (nx - 1) as f64;
        let cells = ly / h;
        let ny = cells.round() as usize + 1;
        if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::Config(format!("ly = {ly} is not a multiple of h = {h}")));
        }
        Ok(Grid { dim: 2, lx, ly, nx, ny, h })
    }

    /// Grid on `[0, lx]` (or `[0, lx] × [0, ly]`) with the node count chosen so
    /// that the spacing does not exceed `h_max`.
    pub fn with_max_spacing(dim: usize, lx: f64, ly: f64, h_max: f64) -> Result<Self> {
        let cells = (lx / h_max - 1e-9).ceil().max(2.0) as usize;
        match dim {
            1 => Self::new_1d(lx, cells + 1),
            2 => {
                let ratio = ly / lx;
                let mut c = cells;
                while ((ratio * c as f64) - (ratio * c as f64).round()).abs() > 1e-9 {
                    c += 1;
                }
                Self::new_2d(lx, ly, c + 1)
            }
            _ => Err(Error::Config(format!("dimension {dim} not supported"))),
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point {
        [i as f64 * self.h, j as f64 * self.h]
    }

    pub fn node_of(&self, k: usize) -> Point {
        self.node(k % self.nx, k / self.nx)
    }

    pub fn center(&self) -> Point {
        [0.5 * self.lx, 0.5 * self.ly]
    }

    /// Explicit diffusion limit `h²/(2·dim)`.
    pub fn dt_limit(&self) -> f64 {
        self.h * self.h / (2.0 * self.dim as f64)
    }

    /// True for nodes at least `margin` nodes away from the boundary.
    pub fn is_interior(&self, i: usize, j: usize, margin: usize) -> bool {
        let ok_x = i >= margin && i + margin < self.nx;
        let ok_y = self.dim == 1 || (j >= margin && j + margin < self.ny);
        ok_x && ok_y
    }
}

/// Reflected-ghost neighbour index along one axis.
#[inline]
fn reflect(i: usize, n: usize, step: isize) -> usize {
    let k = i as isize + step;
    if k < 0 {
        (-k) as usize
    } else if k as usize >= n {
        2 * (n - 1) - k as usize
    } else {
        k as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn constant(grid: Grid, value: f64) -> Self {
        Field { grid, values: vec![value; grid.len()], time: 0.0 }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.node_of(k))).collect();
        Field { grid, values, time: 0.0 }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Five-point (three-point in 1D) Laplacian with reflected ghosts.
    pub fn laplacian_into(&self, out: &mut [f64]) {
        laplacian(&self.grid, &self.values, out);
    }

    /// Largest central normal difference at the boundary, using the reflected
    /// ghost values the solver uses; zero by construction.
    pub fn neumann_defect(&self) -> f64 {
        let g = &self.grid;
        let mut worst: f64 = 0.0;
        for j in 0..g.ny {
            for &i in &[0, g.nx - 1] {
                let ghost = self.values[g.idx(reflect(i, g.nx, if i == 0 { -1 } else { 1 }), j)];
                let inner = self.values[g.idx(reflect(i, g.nx, if i == 0 { 1 } else { -1 }), j)];
                worst = worst.max((ghost - inner).abs() / (2.0 * g.h));
            }
        }
        if g.dim == 2 {
            for i in 0..g.nx {
                for &j in &[0, g.ny - 1] {
                    let ghost = self.values[g.idx(i, reflect(j, g.ny, if j == 0 { -1 } else { 1 }))];
                    let inner = self.values[g.idx(i, reflect(j, g.ny, if j == 0 { 1 } else { -1 }))];
                    worst = worst.max((ghost - inner).abs() / (2.0 * g.h));
                }
            }
        }
        worst
    }

    /// Central-difference gradient magnitude at a node (one-sided at the edges).
    pub fn grad_norm(&self, i: usize, j: usize) -> f64 {
        let g = &self.grid;
        let d = |a: usize, b: usize, span: f64| (self.values[a] - self.values[b]) / span;
        let (il, ir) = (i.saturating_sub(1), (i + 1).min(g.nx - 1));
        let gx = d(g.idx(ir, j), g.idx(il, j), (ir - il) as f64 * g.h);
        let gy = if g.dim == 2 {
            let (jl, jr) = (j.saturating_sub(1), (j + 1).min(g.ny - 1));
            d(g.idx(i, jr), g.idx(i, jl), (jr - jl) as f64 * g.h)
        } else {
            0.0
        };
        gx.hypot(gy)
    }

    /// `‖u‖ + ‖∇u‖ + ‖Δu‖` in the sup norm by finite differences over
    /// nodes one cell away from the boundary.
    pub fn c0_bound(&self) -> f64 {
        let g = &self.grid;
        let mut lap = vec![0.0; g.len()];
        self.laplacian_into(&mut lap);
        let (mut nu, mut ngrad, mut nlap): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                nu = nu.max(self.values[k].abs());
                if g.is_interior(i, j, 1) {
                    ngrad = ngrad.max(self.grad_norm(i, j));
                    nlap = nlap.max(lap[k].abs());
                }
            }
        }
        nu + ngrad + nlap
    }

    /// Bilinear (linear in 1D) interpolation, clamped to the box.
    pub fn sample(&self, p: Point) -> f64 {
        let g = &self.grid;
        let sx = (p[0] / g.h).clamp(0.0, (g.nx - 1) as f64);
        let i = (sx.floor() as usize).min(g.nx - 2);
        let tx = sx - i as f64;
        if g.dim == 1 {
            return (1.0 - tx) * self.values[i] + tx * self.values[i + 1];
        }
        let sy = (p[1] / g.h).clamp(0.0, (g.ny - 1) as f64);
        let j = (sy.floor() as usize).min(g.ny - 2);
        let ty = sy - j as f64;
        let v00 = self.values[g.idx(i, j)];
        let v10 = self.values[g.idx(i + 1, j)];
        let v01 = self.values[g.idx(i, j + 1)];
        let v11 = self.values[g.idx(i + 1, j + 1)];
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
    }
}

/// Laplacian of `u` on `grid` with reflected ghosts, written into `out`.
pub fn laplacian(grid: &Grid, u: &[f64], out: &mut [f64]) {
    let nx = grid.nx;
    let inv = 1.0 / (grid.h * grid.h);
    if grid.dim == 1 {
        for i in 0..nx {
            let l = u[reflect(i, nx, -1)];
            let r = u[reflect(i, nx, 1)];
            out[i] = (l + r - 2.0 * u[i]) * inv;
        }
        return;
    }
    let ny = grid.ny;
    for j in 0..ny {
        let jd = reflect(j, ny, -1) * nx;
        let ju = reflect(j, ny, 1) * nx;
        let row = j * nx;
        // Interior of the row without reflection branches.
        for i in 1..nx - 1 {
            let k = row + i;
            out[k] = ((u[k - 1] + u[k + 1]) + (u[jd + i] + u[ju + i]) - 4.0 * u[k]) * inv;
        }
        for &i in &[0, nx - 1] {
            let k = row + i;
            let l = u[row + reflect(i, nx, -1)];
            let r = u[row + reflect(i, nx, 1)];
            out[k] = ((l + r) + (u[jd + i] + u[ju + i]) - 4.0 * u[k]) * inv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = Grid::new_2d(1.0, 0.5, 11).unwrap();
        assert_eq!(g.ny, 6);
        assert_eq!(g.node(10, 5), [1.0, 0.5]);
        assert!(Grid::new_2d(1.0, 0.33, 11).is_err());
        let g = Grid::with_max_spacing(2, 1.0, 1.0, 0.0025).unwrap();
        assert_eq!(g.nx, 401);
    }

    #[test]
    fn laplacian_of_quadratic() {
        let g = Grid::new_2d(1.0, 1.0, 21).unwrap();
        let f = Field::from_fn(g, |p| p[0] * p[0] + 3.0 * p[1] * p[1]);
        let mut out = vec![0.0; g.len()];
        f.laplacian_into(&mut out);
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                assert!((out[g.idx(i, j)] - 8.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn neumann_cosine_is_eigenfunction() {
        let g = Grid::new_1d(1.0, 41).unwrap();
        let k = std::f64::consts::PI;
        let f = Field::from_fn(g, |p| (k * p[0]).cos());
        let mut out = vec![0.0; g.len()];
        f.laplacian_into(&mut out);
        let eig = -4.0 / (g.h * g.h) * (0.5 * k * g.h).sin().powi(2);
        for i in 0..g.nx {
            assert!((out[i] - eig * f.values[i]).abs() < 1e-10);
        }
        assert_eq!(f.neumann_defect(), 0.0);
    }

    #[test]
    fn sample_is_exact_for_bilinear() {
        let g = Grid::new_2d(2.0, 1.0, 21).unwrap();
        let f = Field::from_fn(g, |p| 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[0] * p[1]);
        let p = [0.73, 0.41];
        assert!((f.sample(p) - (1.0 + 1.46 - 0.41 + 0.5 * 0.73 * 0.41)).abs() < 1e-12);
    }

    #[test]
    fn c0_of_ramp() {
        let g = Grid::new_1d(1.0, 101).unwrap();
        let f = Field::from_fn(g, |p| 2.0 * p[0] - 1.0);
        assert!((f.c0_bound() - 3.0).abs() < 1e-9);
    }
}
