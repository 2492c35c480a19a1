//! Exact diagonalization of the Neumann 5-point Laplacian by a 2D DCT-II.
//!
//! The cosine modes `cos(π k (i + 1/2) / n)` are eigenvectors of the
//! mirrored-ghost stencil with eigenvalue `-(4/h²) sin²(π k / 2n)`, so shifted
//! operators such as `I - τΔ` and `(-Δ)⁻¹` on mean-zero data are applied
//! exactly (to roundoff) in spectral space.

use std::fmt;
use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use super::Grid;

pub struct Spectral {
    grid: Grid,
    dct_x: Arc<dyn TransformType2And3<f64>>,
    dct_y: Arc<dyn TransformType2And3<f64>>,
    /// Eigenvalues of `-Δ`, laid out like the field (`ky * nx + kx`).
    kappa: Vec<f64>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = DctPlanner::new();
        let dct_x = planner.plan_dct2(grid.nx());
        let dct_y = planner.plan_dct2(grid.ny());
        let (nx, ny) = (grid.nx(), grid.ny());
        let ax = 4.0 / (grid.hx() * grid.hx());
        let ay = 4.0 / (grid.hy() * grid.hy());
        let mut kappa = Vec::with_capacity(grid.len());
        for ky in 0..ny {
            let sy = (std::f64::consts::PI * ky as f64 / (2.0 * ny as f64)).sin();
            for kx in 0..nx {
                let sx = (std::f64::consts::PI * kx as f64 / (2.0 * nx as f64)).sin();
                kappa.push(ax * sx * sx + ay * sy * sy);
            }
        }
        Spectral {
            grid,
            dct_x,
            dct_y,
            kappa,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Eigenvalues of `-Δ`; entry 0 is the constant mode.
    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, data: &mut [f64]) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        for row in data.chunks_exact_mut(nx) {
            self.dct_x.process_dct2(row);
        }
        let mut col = vec![0.0; ny];
        for i in 0..nx {
            for j in 0..ny {
                col[j] = data[j * nx + i];
            }
            self.dct_y.process_dct2(&mut col);
            for j in 0..ny {
                data[j * nx + i] = col[j];
            }
        }
    }

    /// Inverse of [`Spectral::forward`], in place.
    pub fn inverse(&self, data: &mut [f64]) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut col = vec![0.0; ny];
        for i in 0..nx {
            for j in 0..ny {
                col[j] = data[j * nx + i];
            }
            self.dct_y.process_dct3(&mut col);
            for j in 0..ny {
                data[j * nx + i] = col[j];
            }
        }
        for row in data.chunks_exact_mut(nx) {
            self.dct_x.process_dct3(row);
        }
        let scale = 4.0 / (nx as f64 * ny as f64);
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Applies the Fourier multiplier `symbol(κ)` where `κ ≥ 0` is the
    /// eigenvalue of `-Δ`. The constant mode receives `symbol(0)`.
    pub fn apply(&self, data: &mut [f64], symbol: impl Fn(f64) -> f64) {
        self.forward(data);
        for (c, &k) in data.iter_mut().zip(&self.kappa) {
            *c *= symbol(k);
        }
        self.inverse(data);
    }

    /// Solves `(I - a Δ) u = f` in place for `a ≥ 0`.
    pub fn solve_shifted(&self, data: &mut [f64], a: f64) {
        self.apply(data, |k| 1.0 / (1.0 + a * k));
    }

    /// `(-Δ)⁻¹` on the mean-zero subspace; the mean of the input is dropped.
    pub fn inverse_neg_laplacian(&self, data: &mut [f64]) {
        self.apply(data, |k| if k > 0.0 { 1.0 / k } else { 0.0 });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{laplacian_slice, Field};

    fn sample(grid: Grid) -> Vec<f64> {
        Field::from_fn(grid, |x, y| (3.0 * x).sin() + x * y * y - (5.0 * y).cos())
            .into_values()
    }

    #[test]
    fn forward_inverse_round_trip() {
        let g = Grid::new(12, 10, 1.0, 2.0).unwrap();
        let sp = Spectral::new(g);
        let f = sample(g);
        let mut d = f.clone();
        sp.forward(&mut d);
        sp.inverse(&mut d);
        for (a, b) in d.iter().zip(&f) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn multiplier_matches_stencil() {
        let g = Grid::new(16, 8, 1.0, 0.5).unwrap();
        let sp = Spectral::new(g);
        let f = sample(g);
        let mut direct = vec![0.0; g.len()];
        laplacian_slice(&g, &f, &mut direct);
        let mut spec = f.clone();
        sp.apply(&mut spec, |k| -k);
        for (a, b) in spec.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn shifted_solve_inverts_operator() {
        let g = Grid::unit_square(16).unwrap();
        let sp = Spectral::new(g);
        let f = sample(g);
        let tau = 1e-3;
        let mut u = f.clone();
        sp.solve_shifted(&mut u, tau);
        let mut lap = vec![0.0; g.len()];
        laplacian_slice(&g, &u, &mut lap);
        for k in 0..g.len() {
            assert!((u[k] - tau * lap[k] - f[k]).abs() < 1e-12);
        }
        let mean_f: f64 = f.iter().sum::<f64>();
        let mean_u: f64 = u.iter().sum::<f64>();
        assert!((mean_f - mean_u).abs() < 1e-11);
    }
}
