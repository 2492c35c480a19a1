//! Scalar Cahn–Hilliard equation with the Oono relaxation source
//! `S(φ) = -m(φ - c)` and the logarithmic potential on `[-1, 1]`.
//!
//! The scheme mirrors the multiphase stepper: implicit Yosida-regularized
//! logarithmic force, explicit regular part `F2(r) = -θr²`, explicit source.
//! With an explicit source the mean obeys `y^{n+1} = y^n + τm(c - y^n)`
//! exactly, whatever the spatial dynamics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chsolve::{CellConvex, ChProblem};
use crate::diagnostics::{FamilyResult, InvariantReport, Status};
use crate::error::{Error, Result};
use crate::grid::{dirichlet_energy, Field, Grid, Spectral};
use crate::meanfield::analytic_cho_mean;

/// `F_log,1'(r) = ½ ln((1 + r)/(1 - r))`.
pub fn f_log_prime(r: f64) -> Result<f64> {
    if !(r.abs() < 1.0) {
        return Err(Error::Domain(format!("logarithmic potential needs |r| < 1, got {r}")));
    }
    Ok(r.atanh())
}

/// `F_log,1(r) = ((1+r)/2) ln((1+r)/2) + ((1-r)/2) ln((1-r)/2)` on `[-1, 1]`.
pub fn f_log1(r: f64) -> Result<f64> {
    if !(r.abs() <= 1.0) {
        return Err(Error::Domain(format!("logarithmic potential needs |r| <= 1, got {r}")));
    }
    let term = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() };
    Ok(term(0.5 * (1.0 + r)) + term(0.5 * (1.0 - r)))
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Scalar resolvent `p + λ F_log,1'(p) = r`, parametrized by `g = atanh(p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarResolvent {
    pub point: f64,
    /// Yosida gradient, `atanh(point)`.
    pub grad: f64,
    /// `F_log,1(point)`, from `ln((1 ± p)/2) = -softplus(∓2g)`.
    pub convex_value: f64,
    pub residual: f64,
    pub iterations: usize,
}

impl ScalarResolvent {
    pub fn envelope(&self, r: f64, lambda: f64) -> f64 {
        let d = r - self.point;
        d * d / (2.0 * lambda) + self.convex_value
    }

    /// `d grad / d r = 1 / (sech² g + λ)`.
    pub fn jacobian(&self, lambda: f64) -> f64 {
        let s = 1.0 / self.grad.cosh();
        1.0 / (s * s + lambda)
    }
}

const SCALAR_TOL: f64 = 1e-13;
const SCALAR_MAX_ITER: usize = 200;

fn scalar_solve(r: f64, lambda: f64, guess: f64) -> Result<ScalarResolvent> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    if !r.is_finite() {
        return Err(Error::Domain(format!("non-finite resolvent argument {r}")));
    }
    let tol = SCALAR_TOL.max(8.0 * f64::EPSILON * (1.0 + r.abs()));
    let f = |g: f64| g.tanh() + lambda * g - r;
    // F is increasing with its root inside [(r - 1)/λ, (r + 1)/λ]
    let (mut lo, mut hi) = ((r - 1.0) / lambda, (r + 1.0) / lambda);
    let mut g = if guess.is_finite() && guess > lo && guess < hi {
        guess
    } else {
        r.clamp(-0.999, 0.999).atanh().clamp(lo, hi)
    };
    for it in 0..SCALAR_MAX_ITER {
        let v = f(g);
        if v.abs() <= tol {
            let convex_value = {
                let lp = -softplus(-2.0 * g);
                let lm = -softplus(2.0 * g);
                lp.exp() * lp + lm.exp() * lm
            };
            return Ok(ScalarResolvent {
                point: g.tanh(),
                grad: g,
                convex_value,
                residual: v.abs(),
                iterations: it,
            });
        }
        if v > 0.0 {
            hi = g;
        } else {
            lo = g;
        }
        let s = 1.0 / g.cosh();
        let next = g - v / (s * s + lambda);
        g = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::Convergence {
        what: "scalar resolvent",
        iterations: SCALAR_MAX_ITER,
        residual: f(g).abs(),
    })
}

pub fn scalar_resolvent(r: f64, lambda: f64) -> Result<ScalarResolvent> {
    scalar_solve(r, lambda, f64::NAN)
}

struct LogConvex {
    lambda: f64,
    grads: Vec<f64>,
}

impl CellConvex<1> for LogConvex {
    fn eval(&mut self, cell: usize, x: [f64; 1]) -> Result<([f64; 1], [[f64; 1]; 1])> {
        let j = scalar_solve(x[0], self.lambda, self.grads[cell])?;
        self.grads[cell] = j.grad;
        Ok(([j.grad], [[j.jacobian(self.lambda)]]))
    }
}

/// Chemical-potential offset `g`.
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    Constant(f64),
    Field(Field),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoConfig {
    pub grid: Grid,
    /// Relaxation rate `m ≥ 0`.
    pub m_rate: f64,
    /// Relaxation target `c ∈ (-1, 1)`.
    pub c_oono: f64,
    pub lambda: f64,
    pub tau: f64,
    pub t_final: f64,
    /// `φ0 = phi0_const + phi0_amp·cos(πx/lx)cos(πy/ly) + phi0_noise·U(-1, 1)`.
    pub phi0_const: f64,
    pub phi0_amp: f64,
    pub phi0_noise: f64,
    /// Regular part `F2(r) = -θr²`.
    pub theta: f64,
    pub forcing: Forcing,
    pub eps: f64,
    pub big_a: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub output_every: usize,
    pub snapshot_every: usize,
    pub seed: u64,
}

impl Default for ChoConfig {
    fn default() -> Self {
        ChoConfig {
            grid: Grid::unit_square(32).expect("32×32 unit square"),
            m_rate: 1.0,
            c_oono: 0.3,
            lambda: 1e-3,
            tau: 1e-3,
            t_final: 1.0,
            phi0_const: -1.0,
            phi0_amp: 0.0,
            phi0_noise: 0.0,
            theta: 1.0,
            forcing: Forcing::Constant(0.0),
            eps: 1.0,
            big_a: 1.0,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            output_every: 1,
            snapshot_every: 0,
            seed: 0,
        }
    }
}

impl ChoConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::Validation(msg)) };
        check(
            self.m_rate.is_finite() && self.m_rate >= 0.0,
            format!("m must be nonnegative, got {}", self.m_rate),
        )?;
        check(
            self.c_oono.abs() < 1.0,
            format!("c must lie in (-1, 1), got {}", self.c_oono),
        )?;
        check(
            self.lambda > 0.0 && self.lambda < 1.0,
            format!("lambda must lie in (0, 1), got {}", self.lambda),
        )?;
        check(
            self.tau.is_finite() && self.tau > 0.0,
            format!("tau must be positive, got {}", self.tau),
        )?;
        check(
            self.t_final.is_finite() && self.t_final >= 0.0,
            format!("T_final must be nonnegative, got {}", self.t_final),
        )?;
        check(
            self.theta.is_finite() && self.theta >= 0.0,
            format!("theta must be nonnegative, got {}", self.theta),
        )?;
        check(
            self.eps > 0.0 && self.big_a > 0.0 && self.eps.is_finite() && self.big_a.is_finite(),
            "eps and A must be positive".into(),
        )?;
        check(
            self.newton_tol > 0.0 && self.newton_tol <= 1e-6,
            format!("newton_tol must lie in (0, 1e-6], got {}", self.newton_tol),
        )?;
        check(
            self.newton_max_iter > 0 && self.output_every > 0,
            "newton_max_iter and output_every must be at least 1".into(),
        )?;
        let phi0 = self.initial_phase();
        check(
            phi0.min() >= -1.0 && phi0.max() <= 1.0,
            format!("phi0 must lie in [-1, 1], got [{}, {}]", phi0.min(), phi0.max()),
        )?;
        check(
            phi0.mean() < 1.0,
            "phi0 must not be identically 1".into(),
        )?;
        match &self.forcing {
            Forcing::Constant(v) => check(v.is_finite(), format!("forcing must be finite, got {v}")),
            Forcing::Field(f) => {
                f.check_finite("forcing")?;
                check(*f.grid() == self.grid, "forcing field grid differs from the config".into())
            }
        }
    }

    pub fn initial_phase(&self) -> Field {
        let g = self.grid;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let pi = std::f64::consts::PI;
        let (lx, ly) = (g.lx(), g.ly());
        Field::from_fn(g, |x, y| {
            let noise = if self.phi0_noise != 0.0 {
                self.phi0_noise * rng.gen_range(-1.0..1.0)
            } else {
                0.0
            };
            self.phi0_const + self.phi0_amp * (pi * x / lx).cos() * (pi * y / ly).cos() + noise
        })
    }

    pub fn n_steps(&self) -> usize {
        let q = self.t_final / self.tau;
        let n = q.round();
        if (q - n).abs() <= 1e-9 * q.max(1.0) {
            n as usize
        } else {
            q.ceil() as usize
        }
    }

    /// Mean after `n` steps of the explicit-source rule.
    pub fn discrete_mean(&self, y0: f64, n: usize) -> f64 {
        let c = self.c_oono;
        c + (y0 - c) * (1.0 - self.m_rate * self.tau).powi(n as i32)
    }

    fn forcing_at(&self, cell: usize) -> f64 {
        match &self.forcing {
            Forcing::Constant(v) => *v,
            Forcing::Field(f) => f.values()[cell],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoState {
    pub t: f64,
    pub step_index: usize,
    pub phi: Field,
    pub mu: Field,
}

/// One diagnostics row of the scalar model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChoRecord {
    pub t: f64,
    pub mean: f64,
    /// Closed-form discrete mean `c + (y0 - c)(1 - mτ)^n`.
    pub mean_discrete: f64,
    /// Continuum mean `c + (y0 - c)e^{-mt}`.
    pub mean_continuum: f64,
    pub min: f64,
    pub max: f64,
    /// Extreme resolvent values; always inside `(-1, 1)`.
    pub j_min: f64,
    pub j_max: f64,
    pub energy: f64,
    pub grad_mu_l2: f64,
}

pub const CHO_COLUMNS: [&str; 10] = [
    "t",
    "phi_mean",
    "mean_discrete",
    "mean_continuum",
    "phi_min",
    "phi_max",
    "J_min",
    "J_max",
    "energy",
    "grad_mu_l2",
];

impl ChoRecord {
    pub fn to_row(&self) -> [f64; 10] {
        [
            self.t,
            self.mean,
            self.mean_discrete,
            self.mean_continuum,
            self.min,
            self.max,
            self.j_min,
            self.j_max,
            self.energy,
            self.grad_mu_l2,
        ]
    }
}

pub trait ChoSink {
    fn on_output(&mut self, state: &ChoState, record: &ChoRecord) -> Result<()>;

    fn on_snapshot(&mut self, _state: &ChoState) -> Result<()> {
        Ok(())
    }
}

impl ChoSink for Vec<ChoRecord> {
    fn on_output(&mut self, _state: &ChoState, record: &ChoRecord) -> Result<()> {
        self.push(*record);
        Ok(())
    }
}

pub struct ChoStepper {
    config: ChoConfig,
    spectral: Spectral,
    convex: LogConvex,
    y0: f64,
}

impl ChoStepper {
    pub fn new(config: ChoConfig) -> Result<Self> {
        config.validate()?;
        let spectral = Spectral::new(config.grid);
        let convex = LogConvex {
            lambda: config.lambda,
            grads: vec![f64::NAN; config.grid.len()],
        };
        Ok(ChoStepper {
            y0: config.initial_phase().mean(),
            config,
            spectral,
            convex,
        })
    }

    pub fn config(&self) -> &ChoConfig {
        &self.config
    }

    fn explicit(&self, phi: &Field) -> Vec<f64> {
        let cfg = &self.config;
        phi.values()
            .iter()
            .enumerate()
            .map(|(c, &v)| cfg.big_a * (-2.0 * cfg.theta * v) + cfg.forcing_at(c))
            .collect()
    }

    pub fn init_state(&mut self) -> Result<ChoState> {
        let phi = self.config.initial_phase();
        let e = self.explicit(&phi);
        let eps2 = self.config.eps * self.config.eps;
        let mut lap = vec![0.0; phi.values().len()];
        crate::grid::laplacian_slice(&self.config.grid, phi.values(), &mut lap);
        let mut mu = Vec::with_capacity(lap.len());
        for (c, &v) in phi.values().iter().enumerate() {
            // the resolvent keeps the pure phase ±1 away from the singularity
            let j = scalar_solve(v, self.config.lambda, self.convex.grads[c])?;
            self.convex.grads[c] = j.grad;
            mu.push(-eps2 * lap[c] + self.config.big_a * j.grad + e[c]);
        }
        let mu = Field::from_vec_unchecked(self.config.grid, mu);
        Ok(ChoState {
            t: 0.0,
            step_index: 0,
            phi,
            mu,
        })
    }

    pub fn step(&mut self, state: &ChoState) -> Result<ChoState> {
        let cfg = &self.config;
        let tau = cfg.tau;
        let src: Vec<f64> = state
            .phi
            .values()
            .iter()
            .map(|&v| -cfg.m_rate * v + cfg.m_rate * cfg.c_oono)
            .collect();
        let base = [state
            .phi
            .values()
            .iter()
            .zip(&src)
            .map(|(p, s)| p + tau * s)
            .collect::<Vec<f64>>()];
        let w0 = [src.iter().map(|s| -tau * s).collect::<Vec<f64>>()];
        let explicit = [self.explicit(&state.phi)];
        let problem = ChProblem {
            spectral: &self.spectral,
            tau,
            eps2: cfg.eps * cfg.eps,
            big_a: cfg.big_a,
            base: &base,
            explicit: &explicit,
            tol: cfg.newton_tol,
            max_iter: cfg.newton_max_iter,
        };
        let sol = problem.solve(&mut self.convex, w0)?;
        let [phi] = sol.phi;
        let [mu] = sol.mu;
        let phi = Field::from_vec_unchecked(cfg.grid, phi);
        let mu = Field::from_vec_unchecked(cfg.grid, mu);
        phi.check_finite("phi")?;
        mu.check_finite("mu")?;
        let step_index = state.step_index + 1;
        Ok(ChoState {
            t: step_index as f64 * tau,
            step_index,
            phi,
            mu,
        })
    }

    pub fn record(&self, state: &ChoState) -> Result<ChoRecord> {
        let cfg = &self.config;
        let mut bulk = 0.0;
        let mut j_min = f64::INFINITY;
        let mut j_max = f64::NEG_INFINITY;
        for (c, &v) in state.phi.values().iter().enumerate() {
            let j = scalar_resolvent(v, cfg.lambda)?;
            j_min = j_min.min(j.point);
            j_max = j_max.max(j.point);
            bulk += cfg.big_a * (j.envelope(v, cfg.lambda) - cfg.theta * v * v) + cfg.forcing_at(c) * v;
        }
        let eps2 = cfg.eps * cfg.eps;
        let energy = 0.5 * eps2 * dirichlet_energy(&state.phi) + bulk * cfg.grid.cell_area();
        Ok(ChoRecord {
            t: state.t,
            mean: state.phi.mean(),
            mean_discrete: cfg.discrete_mean(self.y0, state.step_index),
            mean_continuum: analytic_cho_mean(self.y0, cfg.m_rate, cfg.c_oono, state.t)?,
            min: state.phi.min(),
            max: state.phi.max(),
            j_min,
            j_max,
            energy,
            grad_mu_l2: dirichlet_energy(&state.mu).sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoOutcome {
    pub final_state: ChoState,
    pub final_record: ChoRecord,
    /// `max_n |mean(φⁿ) - (c + (y0 - c)(1 - mτ)^n)|` over every step.
    pub max_recursion_error: f64,
    /// Largest energy increase between consecutive steps.
    pub max_energy_increase: f64,
}

pub fn cho_step(stepper: &mut ChoStepper, state: &ChoState) -> Result<ChoState> {
    stepper.step(state)
}

/// Integrates the Oono model to `T_final`. The mean recursion is checked at
/// every step; the energy only at output steps when `m = 0`.
pub fn cho_run(config: &ChoConfig, sink: &mut dyn ChoSink) -> Result<ChoOutcome> {
    let mut stepper = ChoStepper::new(config.clone())?;
    let mut state = stepper.init_state()?;
    let n_steps = config.n_steps();
    let mut rec = stepper.record(&state)?;
    sink.on_output(&state, &rec)?;
    if config.snapshot_every > 0 {
        sink.on_snapshot(&state)?;
    }
    let y0 = stepper.y0;
    let mut max_err = 0.0f64;
    let mut max_inc = f64::NEG_INFINITY;
    let mut last_energy = rec.energy;
    for _ in 0..n_steps {
        state = stepper.step(&state)?;
        let n = state.step_index;
        max_err = max_err.max((state.phi.mean() - config.discrete_mean(y0, n)).abs());
        let last = n == n_steps;
        if n % config.output_every == 0 || last {
            rec = stepper.record(&state)?;
            max_inc = max_inc.max(rec.energy - last_energy);
            last_energy = rec.energy;
            sink.on_output(&state, &rec)?;
        }
        if config.snapshot_every > 0 && (n % config.snapshot_every == 0 || last) {
            sink.on_snapshot(&state)?;
        }
    }
    Ok(ChoOutcome {
        final_state: state,
        final_record: rec,
        max_recursion_error: max_err,
        max_energy_increase: max_inc,
    })
}

pub const RECURSION_TOL: f64 = 1e-12;
pub const CHO_ENERGY_SLACK: f64 = 1e-10;

/// Pass/fail summary of a scalar run. Conservation and energy apply only
/// without relaxation (`m = 0`).
pub fn cho_invariants(config: &ChoConfig, outcome: &ChoOutcome, records: &[ChoRecord]) -> InvariantReport {
    let mut families = Vec::new();
    let pass = |ok: bool| if ok { Status::Pass } else { Status::Fail };
    families.push(FamilyResult {
        name: "mean_recursion",
        status: pass(outcome.max_recursion_error <= RECURSION_TOL),
        detail: format!(
            "max deviation from the discrete mean {:e} (tolerance {RECURSION_TOL:e})",
            outcome.max_recursion_error
        ),
    });
    let later = records.iter().filter(|r| r.t > 0.0);
    let (lo, hi) = later.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r.min).min(r.j_min), hi.max(r.max).max(r.j_max))
    });
    families.push(FamilyResult {
        name: "open_interval",
        status: pass(!(lo <= -1.0 || hi >= 1.0)),
        detail: format!("phi and J(phi) in [{lo}, {hi}] after the first step"),
    });
    if config.m_rate == 0.0 {
        let y0 = records.first().map_or(0.0, |r| r.mean);
        let drift = records.iter().map(|r| (r.mean - y0).abs()).fold(0.0, f64::max);
        families.push(FamilyResult {
            name: "conservation",
            status: pass(drift <= RECURSION_TOL),
            detail: format!("max mean drift {drift:e}"),
        });
        families.push(FamilyResult {
            name: "energy",
            status: pass(outcome.max_energy_increase <= CHO_ENERGY_SLACK),
            detail: format!("largest increase between outputs {:e}", outcome.max_energy_increase),
        });
    } else {
        for name in ["conservation", "energy"] {
            families.push(FamilyResult {
                name,
                status: Status::Skipped,
                detail: "relaxation source active".into(),
            });
        }
    }
    InvariantReport { families }
}
