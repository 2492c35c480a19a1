//! Spatial-mean dynamics. Integrating the phase equations over the domain
//! kills the flux term, leaving `y_i' = c_{2i-1} f_i - c_{2i} j_i` with
//! `y_i = mean(φᵢ)`, `f_i = mean(h(P)h(Rᵢ))` and `j_i = mean(J_λ(φ)ᵢ)`.

use crate::error::{Error, Result};
use crate::reactions::ReactionCoeffs;

/// Means of one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSample {
    pub t: f64,
    pub y: [f64; 2],
    pub f: [f64; 2],
    pub jmean: [f64; 2],
    pub pmean: f64,
    pub rmean: [f64; 2],
    /// `λ·max|Y(φ)|` over the grid.
    pub yosida_gap: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeanSeries {
    samples: Vec<MeanSample>,
}

impl MeanSeries {
    pub fn from_samples(samples: Vec<MeanSample>) -> Result<Self> {
        let mut s = MeanSeries::default();
        for x in samples {
            s.push(x)?;
        }
        Ok(s)
    }

    /// Appends a sample; times must increase strictly.
    pub fn push(&mut self, sample: MeanSample) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if !(sample.t > last.t) {
                return Err(Error::Validation(format!(
                    "mean series times must increase: {} after {}",
                    sample.t, last.t
                )));
            }
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn samples(&self) -> &[MeanSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeResidual {
    /// Residual of both components on each interval.
    pub per_interval: Vec<[f64; 2]>,
    pub max_abs: f64,
}

/// `(y(t_{n+1}) - y(t_n))/Δt + c_{2i} j_i(t_n) - c_{2i-1} f_i(t_n)`.
pub fn mean_ode_residual(series: &MeanSeries, c: &ReactionCoeffs) -> Result<OdeResidual> {
    let s = series.samples();
    if s.len() < 2 {
        return Err(Error::Validation(
            "mean residual needs at least two samples".into(),
        ));
    }
    let mut per_interval = Vec::with_capacity(s.len() - 1);
    let mut max_abs = 0.0f64;
    for w in s.windows(2) {
        let dt = w[1].t - w[0].t;
        let r: [f64; 2] = std::array::from_fn(|i| {
            (w[1].y[i] - w[0].y[i]) / dt + c.backward(i) * w[0].jmean[i] - c.forward(i) * w[0].f[i]
        });
        max_abs = max_abs.max(r[0].abs()).max(r[1].abs());
        per_interval.push(r);
    }
    Ok(OdeResidual {
        per_interval,
        max_abs,
    })
}

/// Outcome of one inequality over the whole series: the smallest slack
/// `rhs - lhs` seen and where.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub passed: bool,
    pub min_slack: f64,
    pub worst_t: f64,
}

impl BoundCheck {
    fn new() -> Self {
        BoundCheck {
            passed: true,
            min_slack: f64::INFINITY,
            worst_t: 0.0,
        }
    }

    fn observe(&mut self, t: f64, slack: f64) {
        if slack < self.min_slack {
            self.min_slack = slack;
            self.worst_t = t;
        }
        if !(slack >= 0.0) {
            self.passed = false;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanBoundsReport {
    /// `y_i ≤ c_{2i-1} t`.
    pub upper: BoundCheck,
    /// `y_i > 0` for `t > 0`.
    pub positivity: BoundCheck,
    /// `y_i ≥ κ_i (1 - e^{-c_{2i} t})`.
    pub sandwich: BoundCheck,
    /// `y_1 + y_2 ≤ min{α0 - c*, 1 - α0 - 2c*}`.
    pub cap: BoundCheck,
    /// `y_i ≤ (1 - α0)/2 - c*`.
    pub component_cap: BoundCheck,
    /// `κ_i` at the final time.
    pub kappa: [f64; 2],
    pub alpha0: f64,
    pub c_star: f64,
    /// Whether `λ` lies in the range where the bounds are asserted.
    pub lambda_small: bool,
}

impl MeanBoundsReport {
    pub fn all_passed(&self) -> bool {
        self.upper.passed
            && self.positivity.passed
            && self.sandwich.passed
            && self.cap.passed
            && self.component_cap.passed
    }
}

pub const UPPER_TOL: f64 = 1e-9;
pub const SANDWICH_TOL: f64 = 1e-6;
pub const LAMBDA_SMALL: f64 = 1e-2;

/// Checks the mean bounds on a series starting from `φ ≡ 0`.
///
/// `κ_i = (c_{2i-1}/c_{2i})·min_{s ≤ t} f_i(s) - max_{s ≤ t} λ|Y|`: from
/// `j_i ≤ y_i + λ max|Y|` the mean obeys `y_i' ≥ c_{2i}(κ_i - y_i)`.
pub fn mean_bounds_check(
    series: &MeanSeries,
    c: &ReactionCoeffs,
    lambda: f64,
    c_star: f64,
) -> MeanBoundsReport {
    let s = series.samples();
    let alpha0 = s.first().map_or(0.0, |x| x.pmean);
    let mut upper = BoundCheck::new();
    let mut positivity = BoundCheck::new();
    let mut sandwich = BoundCheck::new();
    let mut cap = BoundCheck::new();
    let mut component_cap = BoundCheck::new();
    let mut fmin = [f64::INFINITY; 2];
    let mut gap = 0.0f64;
    let mut kappa = [0.0; 2];
    let cap_value = (alpha0 - c_star).min(1.0 - alpha0 - 2.0 * c_star);
    let comp_cap = 0.5 * (1.0 - alpha0) - c_star;
    for x in s {
        gap = gap.max(x.yosida_gap);
        for i in 0..2 {
            fmin[i] = fmin[i].min(x.f[i]);
            kappa[i] = c.forward(i) / c.backward(i) * fmin[i] - gap;
            upper.observe(x.t, c.forward(i) * x.t + UPPER_TOL - x.y[i]);
            if x.t > 0.0 {
                positivity.observe(x.t, x.y[i]);
            }
            let lower = kappa[i] * (1.0 - (-c.backward(i) * x.t).exp());
            sandwich.observe(x.t, x.y[i] - lower + SANDWICH_TOL);
            component_cap.observe(x.t, comp_cap + UPPER_TOL - x.y[i]);
        }
        cap.observe(x.t, cap_value + UPPER_TOL - (x.y[0] + x.y[1]));
    }
    MeanBoundsReport {
        upper,
        positivity,
        sandwich,
        cap,
        component_cap,
        kappa,
        alpha0,
        c_star,
        lambda_small: lambda <= LAMBDA_SMALL,
    }
}

/// Mean of the Oono model, `c + (y0 - c) e^{-m t}`.
pub fn analytic_cho_mean(y0: f64, m: f64, c_oono: f64, t: f64) -> Result<f64> {
    if !(m >= 0.0 && m.is_finite()) {
        return Err(Error::Domain(format!("relaxation rate must be nonnegative, got {m}")));
    }
    Ok(c_oono + (y0 - c_oono) * (-m * t).exp())
}
