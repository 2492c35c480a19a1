//! Flory–Huggins mixing entropy on the Gibbs simplex, the quadratic demixing
//! energy, and the Moreau–Yosida machinery built on top of them.
//!
//! The resolvent `J_λ = (I + λ∇Ψ¹)⁻¹` is computed in gradient coordinates:
//! writing `g = ∇Ψ¹(p)`, the point is recovered as `p = ∇(Ψ¹)*(g)` (a softmax
//! against the solvent), and the defining equation becomes the optimality
//! condition of the strictly convex function `(Ψ¹)*(g) + λ|g|²/2 - r·g`.
//! Damped Newton on that function never leaves the domain and stays accurate
//! when `J_λ(r)` sits exponentially close to the simplex boundary.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

/// Target residual for `|J + λ∇Ψ¹(J) - r|`.
pub const RESOLVENT_TOL: f64 = 1e-13;
pub const RESOLVENT_MAX_ITER: usize = 100;

/// A point of the closed Gibbs simplex `{p1, p2 ≥ 0, p1 + p2 ≤ 1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexPoint {
    p1: f64,
    p2: f64,
}

impl SimplexPoint {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        if !(p1.is_finite() && p2.is_finite()) || p1 < 0.0 || p2 < 0.0 || p1 + p2 > 1.0 {
            return Err(Error::Domain(format!("({p1}, {p2}) is outside the simplex")));
        }
        Ok(SimplexPoint { p1, p2 })
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    /// Solvent fraction `1 - p1 - p2`.
    pub fn solvent(&self) -> f64 {
        1.0 - self.p1 - self.p2
    }

    pub fn is_interior(&self) -> bool {
        self.p1 > 0.0 && self.p2 > 0.0 && self.solvent() > 0.0
    }

    /// Smallest of the three barycentric coordinates.
    pub fn boundary_distance(&self) -> f64 {
        self.p1.min(self.p2).min(self.solvent())
    }

    pub fn to_array(self) -> Vec2 {
        [self.p1, self.p2]
    }
}

/// Which convex entropy is regularized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `Σ φᵢ ln φᵢ + S ln S` on the simplex.
    FloryHuggins,
    /// `Σ φᵢ ln φᵢ` on the unit box, with the solvent term moved into the
    /// quadratic part.
    Tilde,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::FloryHuggins => "flory_huggins",
            Variant::Tilde => "tilde",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "flory_huggins" => Ok(Variant::FloryHuggins),
            "tilde" => Ok(Variant::Tilde),
            other => Err(format!(
                "unknown potential variant `{other}` (expected flory_huggins or tilde)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialParams {
    pub chi12: f64,
    pub chi1s: f64,
    pub chi2s: f64,
    /// Yosida parameter.
    pub lambda: f64,
    pub variant: Variant,
    /// Interface width; multiplies the gradient energy as `eps²`.
    pub eps: f64,
    /// Scaling of the bulk potential.
    pub big_a: f64,
}

impl Default for PotentialParams {
    fn default() -> Self {
        PotentialParams {
            chi12: 1.0,
            chi1s: 1.0,
            chi2s: 1.0,
            lambda: 1e-3,
            variant: Variant::FloryHuggins,
            eps: 1.0,
            big_a: 1.0,
        }
    }
}

impl PotentialParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("chi12", self.chi12),
            ("chi1S", self.chi1s),
            ("chi2S", self.chi2s),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Validation(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::Validation(format!(
                "lambda must lie in (0, 1), got {}",
                self.lambda
            )));
        }
        if !(self.eps.is_finite() && self.eps > 0.0 && self.big_a.is_finite() && self.big_a > 0.0)
        {
            return Err(Error::Validation(format!(
                "eps and A must be positive, got eps = {}, A = {}",
                self.eps, self.big_a
            )));
        }
        Ok(())
    }
}

fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Mixing entropy `Ψ¹(p) = p1 ln p1 + p2 ln p2 + S ln S`, with `0 ln 0 = 0`.
pub fn psi1(p: SimplexPoint) -> f64 {
    xlnx(p.p1) + xlnx(p.p2) + xlnx(p.solvent())
}

fn require_interior(p: SimplexPoint) -> Result<()> {
    if !p.is_interior() {
        return Err(Error::Domain(format!(
            "({}, {}) lies on the simplex boundary where ∇Ψ¹ is singular",
            p.p1, p.p2
        )));
    }
    Ok(())
}

/// `∇Ψ¹(p) = (ln(p1/S), ln(p2/S))` on the open simplex.
pub fn grad_psi1(p: SimplexPoint) -> Result<Vec2> {
    require_interior(p)?;
    let ls = p.solvent().ln();
    Ok([p.p1.ln() - ls, p.p2.ln() - ls])
}

pub fn hess_psi1(p: SimplexPoint) -> Result<Mat2> {
    require_interior(p)?;
    let is = 1.0 / p.solvent();
    Ok([[1.0 / p.p1 + is, is], [is, 1.0 / p.p2 + is]])
}

/// Demixing energy `χ12 p1p2 + χ1S p1 S + χ2S p2 S` and its gradient,
/// defined on all of `ℝ²`.
pub fn psi2_eval(p: Vec2, params: &PotentialParams) -> (f64, Vec2) {
    let [p1, p2] = p;
    let s = 1.0 - p1 - p2;
    let value = params.chi12 * p1 * p2 + params.chi1s * p1 * s + params.chi2s * p2 * s;
    let g1 = params.chi12 * p2 + params.chi1s * (s - p1) - params.chi2s * p2;
    let g2 = params.chi12 * p1 - params.chi1s * p1 + params.chi2s * (s - p2);
    (value, [g1, g2])
}

/// Convex conjugate of the mixing entropy,
/// `sup_{r ∈ Δ} z·r - Ψ¹(r) = ln(1 + e^{z1} + e^{z2})`.
pub fn psi1_conjugate(z: Vec2) -> f64 {
    log_sum_exp(z)
}

/// Box entropy `p1 ln p1 + p2 ln p2` on `[0, 1]²`.
pub fn tilde_psi1(p: Vec2) -> Result<f64> {
    if !p.iter().all(|v| (0.0..=1.0).contains(v)) {
        return Err(Error::Domain(format!(
            "({}, {}) is outside the unit box",
            p[0], p[1]
        )));
    }
    Ok(xlnx(p[0]) + xlnx(p[1]))
}

/// `(ln p1 + 1, ln p2 + 1)` on the open box.
pub fn tilde_grad_psi1(p: Vec2) -> Result<Vec2> {
    if !p.iter().all(|&v| v > 0.0 && v < 1.0) {
        return Err(Error::Domain(format!(
            "({}, {}) is outside the open unit box",
            p[0], p[1]
        )));
    }
    Ok([p[0].ln() + 1.0, p[1].ln() + 1.0])
}

/// `Ψ²` plus the solvent correction `(1 - p1 - p2)(-p1 - p2)`.
pub fn tilde_psi2_eval(p: Vec2, params: &PotentialParams) -> (f64, Vec2) {
    let (v, g) = psi2_eval(p, params);
    let s = p[0] + p[1];
    let extra = (1.0 - s) * -s;
    let dextra = 2.0 * s - 1.0;
    (v + extra, [g[0] + dextra, g[1] + dextra])
}

/// Value and gradient of `Ψ̃ = Ψ̃¹ + Ψ̃²` on the open unit box.
pub fn tilde_psi_eval(p: Vec2, params: &PotentialParams) -> Result<(f64, Vec2)> {
    let g1 = tilde_grad_psi1(p)?;
    let v1 = tilde_psi1(p)?;
    let (v2, g2) = tilde_psi2_eval(p, params);
    Ok((v1 + v2, [g1[0] + g2[0], g1[1] + g2[1]]))
}

/// Quadratic part for the selected variant.
pub fn demixing(p: Vec2, params: &PotentialParams) -> (f64, Vec2) {
    match params.variant {
        Variant::FloryHuggins => psi2_eval(p, params),
        Variant::Tilde => tilde_psi2_eval(p, params),
    }
}

/// Cut-off `max{0, min{x, 1}}` applied to concentrations inside the sources.
pub fn truncate(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Output of the resolvent solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolvent {
    /// `J_λ(r)`.
    pub point: Vec2,
    /// `∇Ψ¹(J_λ(r))`, which is also the Yosida gradient at `r`.
    pub grad: Vec2,
    /// `ln` of the two components of `J_λ(r)`; finite exactly when the
    /// components are positive, even if they underflow as `f64`.
    pub ln_point: Vec2,
    /// `ln S` at `J_λ(r)` for the Flory–Huggins variant.
    pub ln_solvent: Option<f64>,
    /// Convex entropy evaluated at `J_λ(r)`.
    pub convex_value: f64,
    /// Components pinned at 1 (box variant only).
    pub clamped: [bool; 2],
    pub residual: f64,
    pub iterations: usize,
}

impl Resolvent {
    /// Moreau envelope `|r - J|²/(2λ) + Ψ¹(J)`.
    pub fn envelope(&self, r: Vec2, lambda: f64) -> f64 {
        let d0 = r[0] - self.point[0];
        let d1 = r[1] - self.point[1];
        (d0 * d0 + d1 * d1) / (2.0 * lambda) + self.convex_value
    }

    /// Jacobian of the Yosida gradient `r ↦ ∇Ψ¹(J_λ(r))`; symmetric with
    /// eigenvalues in `(0, 1/λ]`.
    pub fn yosida_jacobian(&self, lambda: f64, variant: Variant) -> Mat2 {
        let [p1, p2] = self.point;
        match variant {
            Variant::FloryHuggins => {
                let a = p1 * (1.0 - p1) + lambda;
                let d = p2 * (1.0 - p2) + lambda;
                let b = -p1 * p2;
                let det = a * d - b * b;
                [[d / det, -b / det], [-b / det, a / det]]
            }
            Variant::Tilde => {
                let diag = |p: f64, clamped: bool| {
                    if clamped {
                        1.0 / lambda
                    } else {
                        1.0 / (p + lambda)
                    }
                };
                [
                    [diag(p1, self.clamped[0]), 0.0],
                    [0.0, diag(p2, self.clamped[1])],
                ]
            }
        }
    }

    /// Strict interior membership, judged in log coordinates.
    pub fn is_interior(&self) -> bool {
        let logs_ok = self.ln_point.iter().all(|v| v.is_finite())
            && self.ln_solvent.is_none_or(f64::is_finite);
        logs_ok && !self.clamped[0] && !self.clamped[1]
    }
}

/// `ln(1 + e^{g1} + e^{g2})` without overflow.
fn log_sum_exp(g: Vec2) -> f64 {
    let m = g[0].max(g[1]).max(0.0);
    m + ((-m).exp() + (g[0] - m).exp() + (g[1] - m).exp()).ln()
}

/// Log-fractions `(ln p1, ln p2, ln S)`, renormalized so that they sum (after
/// exponentiation) to one. Keeping the logs rather than `g = ∇Ψ¹` preserves
/// the relative precision of the dominant components when `|g|` is large.
#[derive(Clone, Copy)]
struct LogFractions([f64; 3]);

impl LogFractions {
    fn normalized(mut q: [f64; 3]) -> Self {
        let m = q[0].max(q[1]).max(q[2]);
        let sum: f64 = q.iter().map(|v| (v - m).exp()).sum();
        let shift = m + sum.ln();
        for v in &mut q {
            *v -= shift;
        }
        LogFractions(q)
    }

    fn from_grad(g: Vec2) -> Self {
        Self::normalized([g[0], g[1], 0.0])
    }

    fn p(&self) -> Vec2 {
        [self.0[0].exp(), self.0[1].exp()]
    }

    fn grad(&self) -> Vec2 {
        [self.0[0] - self.0[2], self.0[1] - self.0[2]]
    }

    /// `F = p + λg - r` and the dual objective `lse(g) + λ|g|²/2 - r·g`.
    fn eval(&self, r: Vec2, lambda: f64) -> (Vec2, f64) {
        let p = self.p();
        let g = self.grad();
        let f = [p[0] + lambda * g[0] - r[0], p[1] + lambda * g[1] - r[1]];
        let phi = -self.0[2] + 0.5 * lambda * (g[0] * g[0] + g[1] * g[1]) - r[0] * g[0] - r[1] * g[1];
        (f, phi)
    }

    fn shifted(&self, d: Vec2) -> Self {
        Self::normalized([self.0[0] + d[0], self.0[1] + d[1], self.0[2]])
    }
}

fn effective_tol(r: Vec2) -> f64 {
    RESOLVENT_TOL.max(8.0 * f64::EPSILON * (1.0 + r[0].abs().max(r[1].abs())))
}

/// Euclidean projection onto the triangle with vertices `(δ,δ)`,
/// `(1-2δ,δ)`, `(δ,1-2δ)`.
fn project_shrunk_simplex(r: Vec2, delta: f64) -> Vec2 {
    let inside = r[0] >= delta && r[1] >= delta && r[0] + r[1] <= 1.0 - delta;
    if inside {
        return r;
    }
    let verts = [
        [delta, delta],
        [1.0 - 2.0 * delta, delta],
        [delta, 1.0 - 2.0 * delta],
    ];
    let mut best = verts[0];
    let mut best_d = f64::INFINITY;
    for k in 0..3 {
        let a = verts[k];
        let b = verts[(k + 1) % 3];
        let ab = [b[0] - a[0], b[1] - a[1]];
        let t = (((r[0] - a[0]) * ab[0] + (r[1] - a[1]) * ab[1]) / (ab[0] * ab[0] + ab[1] * ab[1]))
            .clamp(0.0, 1.0);
        let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
        let d = (q[0] - r[0]).powi(2) + (q[1] - r[1]).powi(2);
        if d < best_d {
            best_d = d;
            best = q;
        }
    }
    best
}

fn fh_start(r: Vec2, lambda: f64) -> LogFractions {
    let p = project_shrunk_simplex(r, lambda.min(1e-3));
    LogFractions::normalized([p[0].ln(), p[1].ln(), (1.0 - p[0] - p[1]).ln()])
}

fn fh_resolvent(r: Vec2, lambda: f64, mut q: LogFractions) -> Result<Resolvent> {
    let tol = effective_tol(r);
    let (mut f, mut phi) = q.eval(r, lambda);
    let mut iterations = 0;
    loop {
        let res = f[0].hypot(f[1]);
        if res <= tol {
            let p = q.p();
            let [l1, l2, ls] = q.0;
            return Ok(Resolvent {
                point: p,
                grad: q.grad(),
                ln_point: [l1, l2],
                ln_solvent: Some(ls),
                convex_value: p[0] * l1 + p[1] * l2 + ls.exp() * ls,
                clamped: [false, false],
                residual: res,
                iterations,
            });
        }
        if iterations >= RESOLVENT_MAX_ITER {
            return Err(Error::Convergence {
                what: "resolvent Newton",
                iterations,
                residual: res,
            });
        }
        iterations += 1;
        let [p1, p2] = q.p();
        let a = p1 * (1.0 - p1) + lambda;
        let d = p2 * (1.0 - p2) + lambda;
        let b = -p1 * p2;
        let det = a * d - b * b;
        let step = [-(d * f[0] - b * f[1]) / det, -(a * f[1] - b * f[0]) / det];
        let slope = f[0] * step[0] + f[1] * step[1];
        let mut alpha = 1.0;
        loop {
            let trial = q.shifted([alpha * step[0], alpha * step[1]]);
            let (f_t, phi_t) = trial.eval(r, lambda);
            let armijo = phi_t <= phi + 1e-4 * alpha * slope;
            // once the objective stalls at roundoff, accept residual decrease
            let flat = (phi_t - phi).abs() <= 64.0 * f64::EPSILON * (1.0 + phi.abs());
            if armijo || (flat && f_t[0].hypot(f_t[1]) < res) {
                q = trial;
                f = f_t;
                phi = phi_t;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                return Err(Error::Convergence {
                    what: "resolvent line search",
                    iterations,
                    residual: res,
                });
            }
        }
    }
}

/// Scalar resolvent of `x ↦ x ln x` on `[0, 1]`: returns `(p, g, clamped,
/// iterations, residual)` with `p + λ g = r`, `g = ln p + 1` unless `p = 1`.
fn box_scalar_resolvent(r: f64, lambda: f64, guess: f64) -> Result<(f64, f64, bool, usize, f64)> {
    if r >= 1.0 + lambda {
        return Ok((1.0, (r - 1.0) / lambda, true, 0, 0.0));
    }
    let tol = RESOLVENT_TOL.max(8.0 * f64::EPSILON * (1.0 + r.abs()));
    // F(g) = e^{g-1} + λg - r is convex increasing with its root below 1
    let mut g = if guess.is_finite() { guess.min(1.0) } else { 1.0 };
    for it in 0..RESOLVENT_MAX_ITER {
        let p = (g - 1.0).exp();
        let f = p + lambda * g - r;
        if f.abs() <= tol {
            return Ok((p, g, false, it, f.abs()));
        }
        g = (g - f / (p + lambda)).min(1.0);
    }
    let f = (g - 1.0).exp() + lambda * g - r;
    Err(Error::Convergence {
        what: "box resolvent Newton",
        iterations: RESOLVENT_MAX_ITER,
        residual: f.abs(),
    })
}

fn tilde_resolvent(r: Vec2, lambda: f64, guess: Vec2) -> Result<Resolvent> {
    let (p1, g1, c1, n1, e1) = box_scalar_resolvent(r[0], lambda, guess[0])?;
    let (p2, g2, c2, n2, e2) = box_scalar_resolvent(r[1], lambda, guess[1])?;
    let lnp = |g: f64, c: bool| if c { 0.0 } else { g - 1.0 };
    let ln_point = [lnp(g1, c1), lnp(g2, c2)];
    Ok(Resolvent {
        point: [p1, p2],
        grad: [g1, g2],
        ln_point,
        ln_solvent: None,
        convex_value: p1 * ln_point[0] + p2 * ln_point[1],
        clamped: [c1, c2],
        residual: e1.hypot(e2),
        iterations: n1.max(n2),
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// `J_λ(r)`: the unique `p` with `p + λ∇Ψ¹(p) = r`.
pub fn resolvent(r: Vec2, lambda: f64, variant: Variant) -> Result<Resolvent> {
    check_lambda(lambda)?;
    if !(r[0].is_finite() && r[1].is_finite()) {
        return Err(Error::Domain(format!("non-finite resolvent argument {r:?}")));
    }
    match variant {
        Variant::FloryHuggins => fh_resolvent(r, lambda, fh_start(r, lambda)),
        Variant::Tilde => tilde_resolvent(r, lambda, [f64::NAN, f64::NAN]),
    }
}

/// Like [`resolvent`] but starts Newton from a previous Yosida gradient.
pub fn resolvent_warm(r: Vec2, lambda: f64, variant: Variant, grad_guess: Vec2) -> Result<Resolvent> {
    check_lambda(lambda)?;
    if !(r[0].is_finite() && r[1].is_finite()) {
        return Err(Error::Domain(format!("non-finite resolvent argument {r:?}")));
    }
    match variant {
        Variant::FloryHuggins => {
            if grad_guess.iter().all(|v| v.is_finite()) {
                fh_resolvent(r, lambda, LogFractions::from_grad(grad_guess))
            } else {
                fh_resolvent(r, lambda, fh_start(r, lambda))
            }
        }
        Variant::Tilde => tilde_resolvent(r, lambda, grad_guess),
    }
}

/// Yosida approximation of `∇Ψ¹` at `r`.
pub fn yosida_grad(r: Vec2, lambda: f64, variant: Variant) -> Result<Vec2> {
    Ok(resolvent(r, lambda, variant)?.grad)
}

/// Moreau envelope `Ψ¹_λ(r)`.
pub fn yosida_value(r: Vec2, lambda: f64, variant: Variant) -> Result<f64> {
    Ok(resolvent(r, lambda, variant)?.envelope(r, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN3: f64 = 1.098_612_288_668_109_8;

    fn sp(a: f64, b: f64) -> SimplexPoint {
        SimplexPoint::new(a, b).unwrap()
    }

    fn random_interior(rng: &mut ChaCha8Rng, margin: f64) -> SimplexPoint {
        loop {
            let a = rng.gen_range(margin..1.0);
            let b = rng.gen_range(margin..1.0);
            if a + b <= 1.0 - margin {
                return sp(a, b);
            }
        }
    }

    #[test]
    fn psi1_examples() {
        assert!((psi1(sp(1.0 / 3.0, 1.0 / 3.0)) + LN3).abs() < 1e-15);
        assert_eq!(psi1(sp(0.0, 0.0)), 0.0);
        let expected = 2.0 * 0.25 * 0.25f64.ln() + 0.5 * 0.5f64.ln();
        assert!((psi1(sp(0.25, 0.25)) - expected).abs() < 1e-15);
        assert!((psi1(sp(0.25, 0.25)) + 1.039_720_770_839_917_9).abs() < 1e-12);
        assert!(SimplexPoint::new(0.7, 0.4).is_err());
        assert!(SimplexPoint::new(-0.1, 0.4).is_err());
    }

    #[test]
    fn grad_and_hessian_examples() {
        let c = sp(1.0 / 3.0, 1.0 / 3.0);
        let g = grad_psi1(c).unwrap();
        assert!(g[0].abs() < 1e-15 && g[1].abs() < 1e-15);
        let g = grad_psi1(sp(0.25, 0.25)).unwrap();
        assert!((g[0] - 0.5f64.ln()).abs() < 1e-15 && (g[1] - 0.5f64.ln()).abs() < 1e-15);
        let h = hess_psi1(c).unwrap();
        for (row, want) in h.iter().zip([[6.0, 3.0], [3.0, 6.0]]) {
            for (a, b) in row.iter().zip(want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(matches!(grad_psi1(sp(0.0, 0.5)), Err(Error::Domain(_))));
        assert!(matches!(hess_psi1(sp(0.5, 0.5)), Err(Error::Domain(_))));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = 1e-6;
        for _ in 0..100 {
            let p = random_interior(&mut rng, 0.01);
            let g = grad_psi1(p).unwrap();
            let fd1 = (psi1(sp(p.p1() + h, p.p2())) - psi1(sp(p.p1() - h, p.p2()))) / (2.0 * h);
            let fd2 = (psi1(sp(p.p1(), p.p2() + h)) - psi1(sp(p.p1(), p.p2() - h))) / (2.0 * h);
            assert!((g[0] - fd1).abs() <= 1e-6, "{g:?} vs {fd1}");
            assert!((g[1] - fd2).abs() <= 1e-6);
        }
    }

    #[test]
    fn hessian_matches_differences_of_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-6;
        for _ in 0..100 {
            let p = random_interior(&mut rng, 0.02);
            let hs = hess_psi1(p).unwrap();
            let gp = grad_psi1(sp(p.p1() + h, p.p2())).unwrap();
            let gm = grad_psi1(sp(p.p1() - h, p.p2())).unwrap();
            let col0 = [(gp[0] - gm[0]) / (2.0 * h), (gp[1] - gm[1]) / (2.0 * h)];
            let gp = grad_psi1(sp(p.p1(), p.p2() + h)).unwrap();
            let gm = grad_psi1(sp(p.p1(), p.p2() - h)).unwrap();
            let col1 = [(gp[0] - gm[0]) / (2.0 * h), (gp[1] - gm[1]) / (2.0 * h)];
            let scale = hs[0][0].max(hs[1][1]);
            assert!((hs[0][0] - col0[0]).abs() <= 1e-5 * scale);
            assert!((hs[1][0] - col0[1]).abs() <= 1e-5 * scale);
            assert!((hs[0][1] - col1[0]).abs() <= 1e-5 * scale);
            assert!((hs[1][1] - col1[1]).abs() <= 1e-5 * scale);
            assert_eq!(hs[0][1], hs[1][0]);
            let tr = hs[0][0] + hs[1][1];
            let det = hs[0][0] * hs[1][1] - hs[0][1] * hs[1][0];
            assert!(tr > 0.0 && det > 0.0);
        }
    }

    #[test]
    fn psi2_examples_and_gradient() {
        let ones = PotentialParams::default();
        let (v, _) = psi2_eval([0.25, 0.25], &ones);
        assert!((v - 0.3125).abs() < 1e-15);
        let zero = PotentialParams {
            chi12: 0.0,
            chi1s: 0.0,
            chi2s: 0.0,
            ..ones
        };
        assert_eq!(psi2_eval([0.7, -3.0], &zero), (0.0, [0.0, 0.0]));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = PotentialParams {
            chi12: 0.7,
            chi1s: 1.3,
            chi2s: 0.4,
            ..ones
        };
        let h = 1e-6;
        for _ in 0..100 {
            let p = [rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..2.0)];
            let (_, g) = psi2_eval(p, &params);
            let f = |q: Vec2| psi2_eval(q, &params).0;
            let fd1 = (f([p[0] + h, p[1]]) - f([p[0] - h, p[1]])) / (2.0 * h);
            let fd2 = (f([p[0], p[1] + h]) - f([p[0], p[1] - h])) / (2.0 * h);
            assert!((g[0] - fd1).abs() < 1e-6 && (g[1] - fd2).abs() < 1e-6);
        }
    }

    /// Brute-force `sup_{r ∈ Δ} z·r - Ψ¹(r)` on a fine barycentric lattice
    /// followed by local refinement.
    fn conjugate_by_search(z: Vec2) -> f64 {
        let n = 400;
        let mut best = f64::NEG_INFINITY;
        let mut arg = [0.0, 0.0];
        for a in 0..=n {
            for b in 0..=(n - a) {
                let r = sp(a as f64 / n as f64, b as f64 / n as f64);
                let v = z[0] * r.p1() + z[1] * r.p2() - psi1(r);
                if v > best {
                    best = v;
                    arg = r.to_array();
                }
            }
        }
        let mut step = 1.0 / n as f64;
        while step > 1e-12 {
            let mut improved = false;
            for d in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [1.0, -1.0], [-1.0, 1.0]] {
                let c = [arg[0] + step * d[0], arg[1] + step * d[1]];
                if let Ok(r) = SimplexPoint::new(c[0], c[1]) {
                    let v = z[0] * c[0] + z[1] * c[1] - psi1(r);
                    if v > best {
                        best = v;
                        arg = c;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best
    }

    #[test]
    fn conjugate_matches_search_oracle() {
        let at_zero = conjugate_by_search([0.0, 0.0]);
        assert!((at_zero - LN3).abs() < 1e-9);
        assert!((psi1_conjugate([0.0, 0.0]) - LN3).abs() < 1e-15);
        for z in [[1.0, -2.0], [3.0, 0.5], [-4.0, -1.0]] {
            assert!((psi1_conjugate(z) - conjugate_by_search(z)).abs() < 1e-9, "{z:?}");
        }
        let z = [10.0, -10.0];
        let r = sp(0.9, 0.05);
        let spot = 10.0 * 0.9 - 10.0 * 0.05 - psi1(r);
        assert!(psi1_conjugate(z) >= spot);
        assert!((psi1_conjugate(z) - conjugate_by_search(z)).abs() < 1e-8);
    }

    #[test]
    fn fenchel_young_equality() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let p = random_interior(&mut rng, 1e-4);
            let g = grad_psi1(p).unwrap();
            let lhs = psi1(p) + psi1_conjugate(g);
            let rhs = g[0] * p.p1() + g[1] * p.p2();
            assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn resolvent_examples() {
        for lambda in [1e-4, 1e-2, 0.5] {
            let j = resolvent([1.0 / 3.0, 1.0 / 3.0], lambda, Variant::FloryHuggins).unwrap();
            assert!((j.point[0] - 1.0 / 3.0).abs() < 1e-13);
            assert!((j.point[1] - 1.0 / 3.0).abs() < 1e-13);
        }
        let j = resolvent([0.2, 0.3], 1e-8, Variant::FloryHuggins).unwrap();
        assert!((j.point[0] - 0.2).abs() < 1e-6 && (j.point[1] - 0.3).abs() < 1e-6);

        let r = [-0.1, 0.5];
        let j = resolvent(r, 0.1, Variant::FloryHuggins).unwrap();
        assert!(j.is_interior());
        let p = sp(j.point[0], j.point[1]);
        assert!(p.is_interior());
        let g = grad_psi1(p).unwrap();
        let res = (j.point[0] + 0.1 * g[0] - r[0]).hypot(j.point[1] + 0.1 * g[1] - r[1]);
        assert!(res <= 1e-12, "{res}");
    }

    #[test]
    fn resolvent_survives_underflow() {
        let j = resolvent([-2.0, 2.0], 1e-4, Variant::FloryHuggins).unwrap();
        assert!(j.is_interior());
        assert!(j.ln_point[0] < -1e4);
        assert!(j.residual <= 1e-12);
        let j = resolvent([2.0, 2.0], 1e-4, Variant::FloryHuggins).unwrap();
        assert!(j.is_interior());
        assert!(j.ln_solvent.unwrap() < -1e4);
    }

    #[test]
    fn yosida_examples() {
        let c = [1.0 / 3.0, 1.0 / 3.0];
        let g = yosida_grad(c, 1e-2, Variant::FloryHuggins).unwrap();
        assert!(g[0].abs() < 1e-11 && g[1].abs() < 1e-11);
        let v = yosida_value(c, 1e-2, Variant::FloryHuggins).unwrap();
        assert!((v + LN3).abs() < 1e-12);
        assert!(yosida_value([0.0, 0.0], 0.01, Variant::FloryHuggins).unwrap() <= 0.0);
    }

    #[test]
    fn yosida_gradient_two_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lambda = 1e-3;
        for _ in 0..100 {
            let r = [rng.gen_range(-1.0..1.5), rng.gen_range(-1.0..1.5)];
            let j = resolvent(r, lambda, Variant::FloryHuggins).unwrap();
            let a = [(r[0] - j.point[0]) / lambda, (r[1] - j.point[1]) / lambda];
            assert!((a[0] - j.grad[0]).abs() <= 1e-9 && (a[1] - j.grad[1]).abs() <= 1e-9);
        }
    }

    #[test]
    fn envelope_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let lambda = 10f64.powf(rng.gen_range(-4.0..-1.0));
            let r = [rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..2.0)];
            let j = resolvent(r, lambda, Variant::FloryHuggins).unwrap();
            let v = j.envelope(r, lambda);
            let g2 = j.grad[0] * j.grad[0] + j.grad[1] * j.grad[1];
            assert!(0.5 * lambda * g2 <= v + LN3 + 1e-9 * (1.0 + v.abs()));
            if let Ok(p) = SimplexPoint::new(r[0], r[1]) {
                assert!(v <= psi1(p) + 1e-12);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-7;
        for variant in [Variant::FloryHuggins, Variant::Tilde] {
            for _ in 0..50 {
                let lambda = 10f64.powf(rng.gen_range(-3.0..-1.0));
                let r = [rng.gen_range(-0.5..1.0), rng.gen_range(-0.5..1.0)];
                let jac = resolvent(r, lambda, variant).unwrap().yosida_jacobian(lambda, variant);
                for k in 0..2 {
                    let mut rp = r;
                    let mut rm = r;
                    rp[k] += h;
                    rm[k] -= h;
                    let gp = yosida_grad(rp, lambda, variant).unwrap();
                    let gm = yosida_grad(rm, lambda, variant).unwrap();
                    for i in 0..2 {
                        let fd = (gp[i] - gm[i]) / (2.0 * h);
                        assert!(
                            (fd - jac[i][k]).abs() <= 1e-4 * (1.0 + jac[i][k].abs()),
                            "{variant}: {fd} vs {}",
                            jac[i][k]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(truncate(-0.5), 0.0);
        assert_eq!(truncate(0.3), 0.3);
        assert_eq!(truncate(2.0), 1.0);
    }

    #[test]
    fn tilde_examples() {
        let e = (-1.0f64).exp();
        let v = tilde_psi1([e, e]).unwrap();
        assert!((v + 2.0 / std::f64::consts::E).abs() < 1e-15);
        let g = tilde_grad_psi1([e, e]).unwrap();
        assert!(g[0].abs() < 1e-15 && g[1].abs() < 1e-15);
        let zero = PotentialParams {
            chi12: 0.0,
            chi1s: 0.0,
            chi2s: 0.0,
            ..PotentialParams::default()
        };
        assert_eq!(tilde_psi2_eval([0.5, 0.5], &zero).0, 0.0);
        assert!(tilde_psi1([1.2, 0.5]).is_err());
        assert!(tilde_psi_eval([0.0, 0.5], &zero).is_err());
    }

    #[test]
    fn tilde_gradient_matches_central_differences() {
        let params = PotentialParams {
            chi12: 0.5,
            chi1s: 1.5,
            chi2s: 0.25,
            ..PotentialParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = 1e-6;
        for _ in 0..100 {
            let p = [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)];
            let (_, g) = tilde_psi_eval(p, &params).unwrap();
            let f = |q: Vec2| tilde_psi_eval(q, &params).unwrap().0;
            let fd1 = (f([p[0] + h, p[1]]) - f([p[0] - h, p[1]])) / (2.0 * h);
            let fd2 = (f([p[0], p[1] + h]) - f([p[0], p[1] - h])) / (2.0 * h);
            assert!((g[0] - fd1).abs() < 1e-6 && (g[1] - fd2).abs() < 1e-6);
        }
    }

    #[test]
    fn tilde_resolvent_clamps_at_one() {
        let lambda = 0.01;
        let j = resolvent([1.5, 0.2], lambda, Variant::Tilde).unwrap();
        assert_eq!(j.point[0], 1.0);
        assert!(j.clamped[0] && !j.clamped[1]);
        assert!((j.grad[0] - 0.5 / lambda).abs() < 1e-12);
        let p = j.point[1];
        assert!((p + lambda * (p.ln() + 1.0) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn tilde_yosida_gradient_decouples() {
        let lambda = 1e-3;
        for r0 in [-0.3, 0.01, 0.4, 0.99] {
            let a = yosida_grad([r0, 0.1], lambda, Variant::Tilde).unwrap();
            let b = yosida_grad([r0, 0.8], lambda, Variant::Tilde).unwrap();
            assert_eq!(a[0], b[0]);
        }
    }

    #[test]
    fn boundary_singularity() {
        for d in [1e-6, 1e-9] {
            let g = grad_psi1(sp(d, 0.3)).unwrap();
            assert!(g[0].hypot(g[1]) >= 10.0);
            let g = grad_psi1(sp(0.3, 0.7 - d)).unwrap();
            assert!(g[0].hypot(g[1]) >= 10.0);
        }
    }

    #[test]
    fn params_validation() {
        assert!(PotentialParams::default().validate().is_ok());
        let bad = PotentialParams {
            lambda: 1.0,
            ..PotentialParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = PotentialParams {
            chi12: -1.0,
            ..PotentialParams::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!("tilde".parse::<Variant>().unwrap(), Variant::Tilde);
        assert!("quartic".parse::<Variant>().is_err());
    }

    proptest! {
        #[test]
        fn entropy_is_convex(
            a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.0..1.0f64, d in 0.0..1.0f64,
            theta in 0.0..1.0f64,
        ) {
            prop_assume!(a + b < 1.0 && c + d < 1.0);
            let p = sp(a, b);
            let q = sp(c, d);
            let m = sp(theta * a + (1.0 - theta) * c, theta * b + (1.0 - theta) * d);
            prop_assert!(psi1(m) <= theta * psi1(p) + (1.0 - theta) * psi1(q) + 1e-12);
        }

        #[test]
        fn yosida_gradient_is_monotone(
            r in prop::array::uniform2(-2.0..2.0f64),
            s in prop::array::uniform2(-2.0..2.0f64),
            k in 0usize..4,
        ) {
            let lambda = [1e-4, 1e-3, 1e-2, 1e-1][k];
            for variant in [Variant::FloryHuggins, Variant::Tilde] {
                let a = yosida_grad(r, lambda, variant).unwrap();
                let b = yosida_grad(s, lambda, variant).unwrap();
                let pair = (a[0] - b[0]) * (r[0] - s[0]) + (a[1] - b[1]) * (r[1] - s[1]);
                prop_assert!(pair >= -1e-9);
            }
        }
    }
}
