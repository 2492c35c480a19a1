//! Cell-centered uniform grid on a rectangle, scalar fields, and the
//! homogeneous-Neumann discrete operators used throughout the solver.
//!
//! Cell `(i, j)` has center `((i + 1/2) hx, (j + 1/2) hy)` and lives at index
//! `j * nx + i` (x runs fastest). Zero-flux boundaries are imposed with mirrored
//! ghost cells, so boundary faces carry no flux and every discrete Laplacian
//! sums to zero.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

mod spectral;

pub use spectral::Spectral;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::Validation(format!(
                "grid needs at least 4x4 cells, got {nx}x{ny}"
            )));
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(Error::Validation(format!(
                "domain side lengths must be positive, got {lx} x {ly}"
            )));
        }
        Ok(Grid { nx, ny, lx, ly })
    }

    /// `n x n` cells on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Grid::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    /// Quadrature weight of a single cell.
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.hy()
    }

    pub fn min_spacing(&self) -> f64 {
        self.hx().min(self.hy())
    }
}

/// Scalar grid function. Every entry is finite when built through the
/// checked constructors; `values_mut` hands out raw access and callers that
/// use it are expected to re-check with [`Field::check_finite`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nx,
                grid.ny
            )));
        }
        let field = Field { grid, values };
        field.check_finite("field")?;
        Ok(field)
    }

    pub fn zeros(grid: Grid) -> Self {
        Field::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Field {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Samples `f(x, y)` at cell centers.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            let y = grid.y(j);
            for i in 0..grid.nx {
                values.push(f(grid.x(i), y));
            }
        }
        Field { grid, values }
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        if let Some(k) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "{what} at cell ({}, {})",
                k % self.grid.nx,
                k / self.grid.nx
            )));
        }
        Ok(())
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Shape(format!(
                "{}x{} field combined with {}x{} field",
                self.grid.nx, self.grid.ny, other.grid.nx, other.grid.ny
            )));
        }
        Ok(())
    }

    /// Arithmetic average of the entries; equals `(1/|Ω|) ∫ f` on the
    /// uniform grid.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete `L²(Ω)` norm.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Mirror image across the vertical midline `x = lx/2`.
    pub fn reflect_x(&self) -> Field {
        let g = self.grid;
        let mut values = vec![0.0; g.len()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                values[g.index(g.nx - 1 - i, j)] = self.values[g.index(i, j)];
            }
        }
        Field { grid: g, values }
    }

    /// Mirror image across the horizontal midline `y = ly/2`.
    pub fn reflect_y(&self) -> Field {
        let g = self.grid;
        let mut values = vec![0.0; g.len()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                values[g.index(i, g.ny - 1 - j)] = self.values[g.index(i, j)];
            }
        }
        Field { grid: g, values }
    }
}

/// 5-point Neumann Laplacian (mirrored ghost cells).
pub fn laplacian(f: &Field) -> Field {
    let mut out = vec![0.0; f.grid.len()];
    laplacian_slice(&f.grid, &f.values, &mut out);
    Field {
        grid: f.grid,
        values: out,
    }
}

/// Writes the Laplacian of `f` into `out`, which must share the grid.
pub fn laplacian_into(f: &Field, out: &mut Field) -> Result<()> {
    f.same_grid(out)?;
    laplacian_slice(&f.grid, &f.values, &mut out.values);
    Ok(())
}

pub(crate) fn laplacian_slice(grid: &Grid, f: &[f64], out: &mut [f64]) {
    let (nx, ny) = (grid.nx, grid.ny);
    let ax = 1.0 / (grid.hx() * grid.hx());
    let ay = 1.0 / (grid.hy() * grid.hy());
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let c = f[k];
            // a mirrored ghost equals the boundary cell, so its flux vanishes
            let mut acc = 0.0;
            if i > 0 {
                acc += ax * (f[k - 1] - c);
            }
            if i + 1 < nx {
                acc += ax * (f[k + 1] - c);
            }
            if j > 0 {
                acc += ay * (f[k - nx] - c);
            }
            if j + 1 < ny {
                acc += ay * (f[k + nx] - c);
            }
            out[k] = acc;
        }
    }
}

/// Arithmetic mean of a field.
pub fn mean(f: &Field) -> f64 {
    f.mean()
}

/// `∫ |∇f|²` by squared face differences. Boundary faces carry zero flux, so
/// this equals `-∫ f Δf` for the stencil of [`laplacian`].
pub fn dirichlet_energy(f: &Field) -> f64 {
    dirichlet_energy_slice(&f.grid, &f.values)
}

pub(crate) fn dirichlet_energy_slice(grid: &Grid, f: &[f64]) -> f64 {
    let (nx, ny) = (grid.nx, grid.ny);
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut sx = 0.0;
    let mut sy = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if i + 1 < nx {
                let d = f[k + 1] - f[k];
                sx += d * d;
            }
            if j + 1 < ny {
                let d = f[k + nx] - f[k];
                sy += d * d;
            }
        }
    }
    (sx / (hx * hx) + sy / (hy * hy)) * hx * hy
}

/// Writes a binary 8-bit PGM (P5). Values are mapped linearly from `[lo, hi]`
/// onto `0..=255` and clamped; the first row written is the top of the
/// domain (largest `y`).
pub fn write_pgm(field: &Field, path: &Path, lo: f64, hi: f64) -> Result<()> {
    let bytes = encode_pgm(field, lo, hi)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn encode_pgm(field: &Field, lo: f64, hi: f64) -> Result<Vec<u8>> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::Validation(format!(
            "PGM range must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    let g = field.grid;
    let mut out = format!("P5\n{} {}\n255\n", g.nx, g.ny).into_bytes();
    out.reserve(g.len());
    let scale = 255.0 / (hi - lo);
    for j in (0..g.ny).rev() {
        for i in 0..g.nx {
            let v = ((field.get(i, j) - lo) * scale).round().clamp(0.0, 255.0);
            out.push(v as u8);
        }
    }
    Ok(out)
}
