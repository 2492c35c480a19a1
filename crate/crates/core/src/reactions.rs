//! Complex formation/dissociation sources and the hypotheses the
//! coefficients and initial protein field must satisfy.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::potential::truncate;

/// Rates of `P + Rᵢ ⇌ φᵢ`: forward `c1`, `c3`, backward `c2`, `c4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionCoeffs {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl Default for ReactionCoeffs {
    fn default() -> Self {
        ReactionCoeffs {
            c1: 1.0,
            c2: 0.01,
            c3: 1.0,
            c4: 0.01,
        }
    }
}

impl ReactionCoeffs {
    /// Forward rate of complex `i ∈ {0, 1}` (`c1` or `c3`).
    pub fn forward(&self, i: usize) -> f64 {
        [self.c1, self.c3][i]
    }

    /// Backward rate of complex `i ∈ {0, 1}` (`c2` or `c4`).
    pub fn backward(&self, i: usize) -> f64 {
        [self.c2, self.c4][i]
    }

    /// `(c2 + c4) / min{c1, c3}`, the separation threshold.
    pub fn threshold(&self) -> f64 {
        (self.c2 + self.c4) / self.c1.min(self.c3)
    }

    pub fn sum(&self) -> f64 {
        self.c1 + self.c2 + self.c3 + self.c4
    }
}

/// Checks positivity of every rate and `min{c1, c3} > c2 + c4`.
pub fn validate_coeffs(c: &ReactionCoeffs) -> Result<()> {
    for (name, v) in [("c1", c.c1), ("c2", c.c2), ("c3", c.c3), ("c4", c.c4)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Validation(format!("{name} must be positive, got {v}")));
        }
    }
    let lhs = c.c1.min(c.c3);
    let rhs = c.c2 + c.c4;
    if lhs <= rhs {
        return Err(Error::Validation(format!(
            "min{{c1, c3}} > c2 + c4 fails: {lhs} <= {rhs}"
        )));
    }
    Ok(())
}

/// Checks `0 ≤ P0 ≤ 1` and `‖P0 - 1/2‖∞ ≤ (1 - threshold)/2`.
pub fn validate_initial(p0: &Field, c: &ReactionCoeffs) -> Result<()> {
    let g = p0.grid();
    let mut worst = 0.0f64;
    for (k, &v) in p0.values().iter().enumerate() {
        let (i, j) = (k % g.nx(), k / g.nx());
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Validation(format!(
                "P0 = {v} at cell ({i}, {j}) is outside [0, 1]"
            )));
        }
        worst = worst.max((v - 0.5).abs());
    }
    let bound = 0.5 * (1.0 - c.threshold());
    if worst > bound {
        return Err(Error::Validation(format!(
            "|P0 - 1/2|_inf = {worst} exceeds (1 - (c2 + c4)/min{{c1, c3}})/2 = {bound}"
        )));
    }
    Ok(())
}

/// Source terms of the five equations. `p` and `r` are built from `phi` by
/// negation, so `phi[i] + r[i]` and `p + (phi[0] + phi[1])` vanish exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Sources {
    pub phi: [Field; 2],
    pub p: Field,
    pub r: [Field; 2],
}

/// `S_φᵢ = c_{2i-1} h(P) h(Rᵢ) - c_{2i} Jᵢ`, with `h` the clamp to `[0, 1]`
/// when `truncated` is set and the identity otherwise.
pub fn sources(
    phi_j: [&Field; 2],
    p: &Field,
    r: [&Field; 2],
    c: &ReactionCoeffs,
    truncated: bool,
) -> Result<Sources> {
    for f in [phi_j[0], phi_j[1], r[0], r[1]] {
        p.same_grid(f)?;
    }
    let h = |x: f64| if truncated { truncate(x) } else { x };
    let mut phi_s = [Vec::with_capacity(p.values().len()), Vec::with_capacity(p.values().len())];
    for (i, out) in phi_s.iter_mut().enumerate() {
        let (a, b) = (c.forward(i), c.backward(i));
        out.extend(
            p.values()
                .iter()
                .zip(r[i].values())
                .zip(phi_j[i].values())
                .map(|((&pv, &rv), &jv)| a * h(pv) * h(rv) - b * jv),
        );
    }
    let sp: Vec<f64> = phi_s[0]
        .iter()
        .zip(&phi_s[1])
        .map(|(a, b)| -(a + b))
        .collect();
    let sr: [Vec<f64>; 2] = [
        phi_s[0].iter().map(|v| -v).collect(),
        phi_s[1].iter().map(|v| -v).collect(),
    ];
    let grid = *p.grid();
    let [s1, s2] = phi_s;
    let [r1, r2] = sr;
    Ok(Sources {
        phi: [
            Field::from_vec_unchecked(grid, s1),
            Field::from_vec_unchecked(grid, s2),
        ],
        p: Field::from_vec_unchecked(grid, sp),
        r: [
            Field::from_vec_unchecked(grid, r1),
            Field::from_vec_unchecked(grid, r2),
        ],
    })
}

/// Lower bound for `P` and `Rᵢ` from the min/max principle:
/// `(c2 + c4) / (2 min{c1, c3}) / max{4, e^{(c1 + c3) T} |Ω|^{1/2}}`.
pub fn c_star(c: &ReactionCoeffs, t_final: f64, area: f64) -> f64 {
    let denom = 4.0f64.max(((c.c1 + c.c3) * t_final).exp() * area.sqrt());
    (c.c2 + c.c4) / (2.0 * c.c1.min(c.c3)) / denom
}
