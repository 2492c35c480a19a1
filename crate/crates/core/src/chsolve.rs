//! Newton–Krylov solver for one convex-splitting Cahn–Hilliard step with `K`
//! coupled components, shared by the multiphase stepper and the scalar
//! Oono model.
//!
//! With `b = φⁿ + τS` the step reads `φ - b = τΔμ`,
//! `μ = ε²(-Δ)φ + A·Y(φ) + E`, where `Y` is the (pointwise) Yosida gradient
//! and `E` collects every explicit term. Writing `φ = b + w` with `w` of mean
//! zero, `μ - mean(μ) = -(1/τ)(-Δ)⁻¹w`, so the step is the root of
//!
//! `ρ(w) = (1/τ)(-Δ)⁻¹w + P₀[ε²(-Δ)(b + w) + A·Y(b + w) + E]`
//!
//! on the mean-zero subspace. The Jacobian is symmetric positive definite
//! there, so each Newton correction comes from preconditioned CG.

use crate::error::{Error, Result};
use crate::grid::Spectral;

const CG_MAX_ITER: usize = 400;
const LINE_SEARCH_HALVINGS: usize = 30;

/// Pointwise convex part of the chemical potential.
pub(crate) trait CellConvex<const K: usize> {
    /// Yosida gradient and its Jacobian at cell `cell` with values `x`.
    fn eval(&mut self, cell: usize, x: [f64; K]) -> Result<([f64; K], [[f64; K]; K])>;
}

pub(crate) struct ChProblem<'a, const K: usize> {
    pub spectral: &'a Spectral,
    pub tau: f64,
    pub eps2: f64,
    pub big_a: f64,
    /// `φⁿ + τS` per component.
    pub base: &'a [Vec<f64>; K],
    /// Explicit chemical-potential contribution per component.
    pub explicit: &'a [Vec<f64>; K],
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct ChSolution<const K: usize> {
    pub phi: [Vec<f64>; K],
    pub mu: [Vec<f64>; K],
    pub newton_iterations: usize,
    pub cg_iterations: usize,
    pub residual: f64,
}

struct Linearization<const K: usize> {
    residual: [Vec<f64>; K],
    phi: [Vec<f64>; K],
    mu: [Vec<f64>; K],
    jac: Vec<[[f64; K]; K]>,
    norm: f64,
}

fn project(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= m;
    }
}

fn dot<const K: usize>(a: &[Vec<f64>; K], b: &[Vec<f64>; K]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .sum()
}

fn zeros<const K: usize>(n: usize) -> [Vec<f64>; K] {
    std::array::from_fn(|_| vec![0.0; n])
}

impl<'a, const K: usize> ChProblem<'a, K> {
    fn n(&self) -> usize {
        self.spectral.grid().len()
    }

    fn weighted_norm(&self, v: &[Vec<f64>; K]) -> f64 {
        (dot(v, v) * self.spectral.grid().cell_area()).sqrt()
    }

    /// `(1/τ)(-Δ)⁻¹v + ε²(-Δ)v`, exact in the cosine basis.
    fn linear_part(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        let (tau, eps2) = (self.tau, self.eps2);
        self.spectral
            .apply(&mut out, |k| if k > 0.0 { 1.0 / (tau * k) + eps2 * k } else { 0.0 });
        out
    }

    fn linearize(&self, w: &[Vec<f64>; K], convex: &mut impl CellConvex<K>) -> Result<Linearization<K>> {
        let n = self.n();
        let phi: [Vec<f64>; K] =
            std::array::from_fn(|k| self.base[k].iter().zip(&w[k]).map(|(b, x)| b + x).collect());
        let mut y = zeros::<K>(n);
        let mut jac = Vec::with_capacity(n);
        for cell in 0..n {
            let x = std::array::from_fn(|k| phi[k][cell]);
            let (yc, jc) = convex.eval(cell, x)?;
            for k in 0..K {
                y[k][cell] = yc[k];
            }
            jac.push(jc);
        }
        let mut mu = zeros::<K>(n);
        let mut residual = zeros::<K>(n);
        for k in 0..K {
            let mut lap = phi[k].clone();
            let eps2 = self.eps2;
            self.spectral.apply(&mut lap, |kap| eps2 * kap);
            for c in 0..n {
                mu[k][c] = lap[c] + self.big_a * y[k][c] + self.explicit[k][c];
            }
            let mut pm = mu[k].clone();
            project(&mut pm);
            let tau = self.tau;
            let mut inv = w[k].clone();
            self.spectral
                .apply(&mut inv, |kap| if kap > 0.0 { 1.0 / (tau * kap) } else { 0.0 });
            for c in 0..n {
                residual[k][c] = inv[c] + pm[c];
            }
            if residual[k].iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("Cahn–Hilliard residual".into()));
            }
        }
        let norm = self.weighted_norm(&residual);
        Ok(Linearization {
            residual,
            phi,
            mu,
            jac,
            norm,
        })
    }

    fn hessian_apply(&self, lin: &Linearization<K>, v: &[Vec<f64>; K]) -> [Vec<f64>; K] {
        let n = self.n();
        std::array::from_fn(|k| {
            let mut out = self.linear_part(&v[k]);
            let mut local: Vec<f64> = (0..n)
                .map(|c| {
                    let row = &lin.jac[c][k];
                    self.big_a * (0..K).map(|l| row[l] * v[l][c]).sum::<f64>()
                })
                .collect();
            project(&mut local);
            for (o, l) in out.iter_mut().zip(&local) {
                *o += l;
            }
            out
        })
    }

    fn precondition(&self, shift: &[f64; K], r: &[Vec<f64>; K]) -> [Vec<f64>; K] {
        let (tau, eps2) = (self.tau, self.eps2);
        std::array::from_fn(|k| {
            let mut z = r[k].clone();
            let s = shift[k];
            self.spectral.apply(&mut z, |kap| {
                if kap > 0.0 {
                    1.0 / (1.0 / (tau * kap) + eps2 * kap + s)
                } else {
                    0.0
                }
            });
            z
        })
    }

    /// Approximately solves `H δ = -ρ` to relative accuracy `eta`.
    fn newton_direction(&self, lin: &Linearization<K>, eta: f64) -> ([Vec<f64>; K], usize) {
        let n = self.n();
        let shift: [f64; K] = std::array::from_fn(|k| {
            self.big_a * lin.jac.iter().map(|j| j[k][k]).sum::<f64>() / n as f64
        });
        let mut x = zeros::<K>(n);
        let mut r: [Vec<f64>; K] = std::array::from_fn(|k| lin.residual[k].iter().map(|v| -v).collect());
        for rk in r.iter_mut() {
            project(rk);
        }
        let target = eta * dot(&r, &r).sqrt();
        let mut z = self.precondition(&shift, &r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for it in 0..CG_MAX_ITER {
            let ap = self.hessian_apply(lin, &p);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return (x, it);
            }
            let alpha = rz / pap;
            for k in 0..K {
                for c in 0..n {
                    x[k][c] += alpha * p[k][c];
                    r[k][c] -= alpha * ap[k][c];
                }
            }
            if dot(&r, &r).sqrt() <= target {
                return (x, it + 1);
            }
            z = self.precondition(&shift, &r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..K {
                for c in 0..n {
                    p[k][c] = z[k][c] + beta * p[k][c];
                }
            }
        }
        (x, CG_MAX_ITER)
    }

    /// Runs damped inexact Newton from the mean-zero guess `w`.
    pub fn solve(&self, convex: &mut impl CellConvex<K>, mut w: [Vec<f64>; K]) -> Result<ChSolution<K>> {
        for wk in w.iter_mut() {
            project(wk);
        }
        let mut lin = self.linearize(&w, convex)?;
        let mut cg_total = 0;
        for it in 0..=self.max_iter {
            if lin.norm <= self.tol {
                return Ok(ChSolution {
                    phi: lin.phi,
                    mu: lin.mu,
                    newton_iterations: it,
                    cg_iterations: cg_total,
                    residual: lin.norm,
                });
            }
            if it == self.max_iter {
                break;
            }
            let eta = lin.norm.min(1e-2);
            let (dir, cg) = self.newton_direction(&lin, eta);
            cg_total += cg;
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..LINE_SEARCH_HALVINGS {
                let trial: [Vec<f64>; K] = std::array::from_fn(|k| {
                    let mut t: Vec<f64> = w[k].iter().zip(&dir[k]).map(|(a, d)| a + alpha * d).collect();
                    project(&mut t);
                    t
                });
                match self.linearize(&trial, convex) {
                    Ok(next) if next.norm < (1.0 - 1e-4 * alpha) * lin.norm => {
                        accepted = Some((trial, next));
                        break;
                    }
                    Ok(_) | Err(Error::Convergence { .. }) => alpha *= 0.5,
                    Err(e) => return Err(e),
                }
            }
            match accepted {
                Some((trial, next)) => {
                    w = trial;
                    lin = next;
                }
                None => {
                    return Err(Error::Convergence {
                        what: "Cahn–Hilliard Newton line search",
                        iterations: it + 1,
                        residual: lin.norm,
                    })
                }
            }
        }
        Err(Error::Convergence {
            what: "Cahn–Hilliard Newton",
            iterations: self.max_iter,
            residual: lin.norm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{laplacian_slice, Grid};

    /// `Y(x) = x³ + x`, a smooth convex stand-in.
    struct Cubic;

    impl CellConvex<1> for Cubic {
        fn eval(&mut self, _cell: usize, x: [f64; 1]) -> Result<([f64; 1], [[f64; 1]; 1])> {
            Ok(([x[0] * x[0] * x[0] + x[0]], [[3.0 * x[0] * x[0] + 1.0]]))
        }
    }

    /// Two components coupled through a symmetric linear map.
    struct Coupled;

    impl CellConvex<2> for Coupled {
        fn eval(&mut self, _cell: usize, x: [f64; 2]) -> Result<([f64; 2], [[f64; 2]; 2])> {
            let m = [[2.0, 0.5], [0.5, 1.0]];
            let y = [
                m[0][0] * x[0] + m[0][1] * x[1] + x[0].powi(3),
                m[1][0] * x[0] + m[1][1] * x[1],
            ];
            Ok((y, [[m[0][0] + 3.0 * x[0] * x[0], m[0][1]], [m[1][0], m[1][1]]]))
        }
    }

    fn smooth(grid: &Grid, a: f64, b: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = (grid.x(i), grid.y(j));
                v.push(a * (std::f64::consts::PI * x).cos() + b * (2.0 * std::f64::consts::PI * y).cos() * x);
            }
        }
        v
    }

    fn check_step<const K: usize>(convex: &mut impl CellConvex<K>, base: [Vec<f64>; K], grid: Grid) {
        let spectral = Spectral::new(grid);
        let n = grid.len();
        let explicit: [Vec<f64>; K] = std::array::from_fn(|k| smooth(&grid, 0.1 * (k as f64 + 1.0), 0.05));
        let tau = 1e-3;
        let problem = ChProblem {
            spectral: &spectral,
            tau,
            eps2: 0.01,
            big_a: 1.0,
            base: &base,
            explicit: &explicit,
            tol: 1e-11,
            max_iter: 50,
        };
        let sol = problem.solve(convex, zeros::<K>(n)).unwrap();
        assert!(sol.residual <= 1e-11);
        for k in 0..K {
            let mut lap = vec![0.0; n];
            laplacian_slice(&grid, &sol.mu[k], &mut lap);
            for c in 0..n {
                let lhs = sol.phi[k][c] - base[k][c];
                assert!((lhs - tau * lap[c]).abs() < 1e-9, "{lhs} vs {}", tau * lap[c]);
            }
            let mb: f64 = base[k].iter().sum::<f64>() / n as f64;
            let mp: f64 = sol.phi[k].iter().sum::<f64>() / n as f64;
            assert!((mb - mp).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_step_satisfies_scheme() {
        let g = Grid::unit_square(16).unwrap();
        check_step(&mut Cubic, [smooth(&g, 0.5, 0.3)], g);
    }

    #[test]
    fn coupled_step_satisfies_scheme() {
        let g = Grid::new(16, 12, 1.0, 0.75).unwrap();
        check_step(&mut Coupled, [smooth(&g, 0.5, 0.3), smooth(&g, -0.2, 0.4)], g);
    }

    #[test]
    fn hessian_is_symmetric() {
        let g = Grid::unit_square(8).unwrap();
        let spectral = Spectral::new(g);
        let n = g.len();
        let base = [smooth(&g, 0.5, 0.3), smooth(&g, 0.1, -0.2)];
        let explicit = zeros::<2>(n);
        let problem = ChProblem {
            spectral: &spectral,
            tau: 1e-2,
            eps2: 1.0,
            big_a: 1.0,
            base: &base,
            explicit: &explicit,
            tol: 1e-12,
            max_iter: 5,
        };
        let lin = problem.linearize(&zeros::<2>(n), &mut Coupled).unwrap();
        let mut u = [smooth(&g, 1.0, 0.0), smooth(&g, 0.0, 1.0)];
        let mut v = [smooth(&g, 0.3, 0.7), smooth(&g, -0.4, 0.2)];
        for x in u.iter_mut().chain(v.iter_mut()) {
            project(x);
        }
        let a = dot(&u, &problem.hessian_apply(&lin, &v));
        let b = dot(&v, &problem.hessian_apply(&lin, &u));
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }
}
