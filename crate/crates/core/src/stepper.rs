//! Time integration of the regularized coupled system.
//!
//! Each step freezes the reaction sources at level `n`, advances `φ` by one
//! convex-splitting backward-Euler Cahn–Hilliard step (implicit Yosida
//! gradient, explicit demixing force) and then advances `P`, `R` by
//! implicit diffusion with the same explicit sources. Because the sources
//! enter every equation with exactly cancelling signs, the mass balances hold
//! to roundoff.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chsolve::{CellConvex, ChProblem};
use crate::diagnostics::{self, DiagnosticsRecord, InvariantMonitor, InvariantReport};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Spectral};
use crate::meanfield::{MeanSample, MeanSeries};
use crate::potential::{demixing, resolvent_warm, Mat2, PotentialParams, Variant, Vec2};
use crate::reactions::{sources, validate_coeffs, validate_initial, ReactionCoeffs, Sources};

/// Initial phase field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseInit {
    /// Pure solvent, `φ ≡ 0`.
    Zero,
    /// `mean + amp·(random low cosine modes)`, the same pattern for both
    /// components up to an independent draw; `|φᵢ - mean| ≤ amp`.
    SmoothRandom { mean: f64, amp: f64 },
}

/// `P0 = p0_const + p0_amp·cos(πx/lx)cos(πy/ly) + p0_noise·U(-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialData {
    pub p0_const: f64,
    pub p0_amp: f64,
    pub p0_noise: f64,
    pub phase: PhaseInit,
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData {
            p0_const: 0.5,
            p0_amp: 0.0,
            p0_noise: 0.0,
            phase: PhaseInit::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub grid: Grid,
    pub coeffs: ReactionCoeffs,
    pub potential: PotentialParams,
    pub tau: f64,
    pub t_final: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Emit a diagnostics record every this many steps (and at the end).
    pub output_every: usize,
    /// Emit a snapshot every this many steps; 0 disables snapshots.
    pub snapshot_every: usize,
    pub seed: u64,
    /// `false` forces every source term to zero.
    pub sources_enabled: bool,
    /// Clamp `P`, `R` to `[0, 1]` inside the sources.
    pub truncated: bool,
    pub initial: InitialData,
    /// Exponent `α ∈ (0, 1)` of the weighted `μ` probe.
    pub probe_alpha: f64,
}

/// `min(hx, hy)² / 8`.
pub fn default_tau(grid: &Grid) -> f64 {
    let h = grid.min_spacing();
    h * h / 8.0
}

impl Default for SolverConfig {
    fn default() -> Self {
        let grid = Grid::unit_square(64).expect("64×64 unit square");
        SolverConfig {
            grid,
            coeffs: ReactionCoeffs::default(),
            potential: PotentialParams::default(),
            tau: default_tau(&grid),
            t_final: 0.02,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            output_every: 1,
            snapshot_every: 0,
            seed: 0,
            sources_enabled: true,
            truncated: true,
            initial: InitialData::default(),
            probe_alpha: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        validate_coeffs(&self.coeffs)?;
        self.potential.validate()?;
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Validation(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::Validation(format!(
                "T_final must be nonnegative, got {}",
                self.t_final
            )));
        }
        if !(self.newton_tol > 0.0 && self.newton_tol <= 1e-6) {
            return Err(Error::Validation(format!(
                "newton_tol must lie in (0, 1e-6], got {}",
                self.newton_tol
            )));
        }
        if self.newton_max_iter == 0 || self.output_every == 0 {
            return Err(Error::Validation(
                "newton_max_iter and output_every must be at least 1".into(),
            ));
        }
        if !(self.probe_alpha > 0.0 && self.probe_alpha < 1.0) {
            return Err(Error::Validation(format!(
                "probe_alpha must lie in (0, 1), got {}",
                self.probe_alpha
            )));
        }
        if let PhaseInit::SmoothRandom { mean, amp } = self.initial.phase {
            let ok = match self.potential.variant {
                Variant::FloryHuggins => mean - amp > 0.0 && 2.0 * (mean + amp) < 1.0,
                Variant::Tilde => mean - amp > 0.0 && mean + amp < 1.0,
            };
            if !(ok && amp >= 0.0) {
                return Err(Error::Validation(format!(
                    "phase initial data mean {mean} ± {amp} leaves the admissible set"
                )));
            }
        }
        validate_initial(&self.initial_protein(), &self.coeffs)
    }

    /// Number of steps taken by [`run`]: the least `n` with `nτ ≥ T_final`.
    pub fn n_steps(&self) -> usize {
        let q = self.t_final / self.tau;
        let n = q.round();
        if (q - n).abs() <= 1e-9 * q.max(1.0) {
            n as usize
        } else {
            q.ceil() as usize
        }
    }

    /// Step-size scale of the explicit reaction, `1 / (c1 + c2 + c3 + c4)`.
    pub fn tau_max(&self) -> f64 {
        1.0 / self.coeffs.sum()
    }

    pub fn c_star(&self) -> f64 {
        crate::reactions::c_star(&self.coeffs, self.t_final, self.grid.area())
    }

    pub fn initial_protein(&self) -> Field {
        let g = self.grid;
        let d = self.initial;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (lx, ly) = (g.lx(), g.ly());
        let pi = std::f64::consts::PI;
        Field::from_fn(g, |x, y| {
            let noise = if d.p0_noise != 0.0 {
                d.p0_noise * rng.gen_range(-1.0..1.0)
            } else {
                0.0
            };
            d.p0_const + d.p0_amp * (pi * x / lx).cos() * (pi * y / ly).cos() + noise
        })
    }

    pub fn initial_phase(&self) -> [Field; 2] {
        let g = self.grid;
        match self.initial.phase {
            PhaseInit::Zero => [Field::zeros(g), Field::zeros(g)],
            PhaseInit::SmoothRandom { mean, amp } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
                std::array::from_fn(|_| smooth_random(g, &mut rng, mean, amp))
            }
        }
    }
}

fn smooth_random(g: Grid, rng: &mut ChaCha8Rng, mean: f64, amp: f64) -> Field {
    const MODES: usize = 4;
    let mut coef = [[0.0f64; MODES]; MODES];
    let mut total = 0.0f64;
    for (m, row) in coef.iter_mut().enumerate() {
        for (n, c) in row.iter_mut().enumerate() {
            if m + n > 0 {
                *c = rng.gen_range(-1.0..1.0);
                total += c.abs();
            }
        }
    }
    let pi = std::f64::consts::PI;
    let (lx, ly) = (g.lx(), g.ly());
    Field::from_fn(g, |x, y| {
        let mut v = 0.0;
        for (m, row) in coef.iter().enumerate() {
            for (n, c) in row.iter().enumerate() {
                v += c * (m as f64 * pi * x / lx).cos() * (n as f64 * pi * y / ly).cos();
            }
        }
        mean + amp * v / total
    })
}

/// The four families of conserved spatial means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedTotals {
    /// `mean(2(φ1 + φ2) + R1 + R2 + P)`.
    pub total: f64,
    /// `mean(φᵢ + Rᵢ)`.
    pub phi_r: [f64; 2],
    /// `mean(φ1 + φ2 + P)`.
    pub phi_p: f64,
    /// `mean(R1 + R2 - P)`.
    pub r_minus_p: f64,
}

impl ConservedTotals {
    pub fn of(phi: &[Field; 2], p: &Field, r: &[Field; 2]) -> Self {
        let [y1, y2] = [phi[0].mean(), phi[1].mean()];
        let [r1, r2] = [r[0].mean(), r[1].mean()];
        let pm = p.mean();
        ConservedTotals {
            total: 2.0 * (y1 + y2) + r1 + r2 + pm,
            phi_r: [y1 + r1, y2 + r2],
            phi_p: y1 + y2 + pm,
            r_minus_p: r1 + r2 - pm,
        }
    }

    /// Largest absolute difference across all five entries.
    pub fn max_drift(&self, other: &ConservedTotals) -> f64 {
        [
            self.total - other.total,
            self.phi_r[0] - other.phi_r[0],
            self.phi_r[1] - other.phi_r[1],
            self.phi_p - other.phi_p,
            self.r_minus_p - other.r_minus_p,
        ]
        .iter()
        .fold(0.0, |m, d| m.max(d.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step_index: usize,
    pub phi: [Field; 2],
    pub mu: [Field; 2],
    pub p: Field,
    pub r: [Field; 2],
    pub totals: ConservedTotals,
    pub initial_totals: ConservedTotals,
}

impl SimState {
    pub fn check_finite(&self) -> Result<()> {
        for (name, f) in [
            ("phi1", &self.phi[0]),
            ("phi2", &self.phi[1]),
            ("mu1", &self.mu[0]),
            ("mu2", &self.mu[1]),
            ("P", &self.p),
            ("R1", &self.r[0]),
            ("R2", &self.r[1]),
        ] {
            f.check_finite(name)?;
        }
        Ok(())
    }
}

/// Solver effort and mean-field quantities of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub newton_iterations: usize,
    pub cg_iterations: usize,
    pub residual: f64,
    /// Means at the level the step started from.
    pub sample: MeanSample,
}

/// Pointwise Yosida gradient with per-cell warm starts.
pub(crate) struct PhaseConvex {
    lambda: f64,
    variant: Variant,
    grads: Vec<Vec2>,
}

impl PhaseConvex {
    pub(crate) fn new(n: usize, lambda: f64, variant: Variant) -> Self {
        PhaseConvex {
            lambda,
            variant,
            grads: vec![[f64::NAN; 2]; n],
        }
    }

    fn solve(&mut self, cell: usize, x: Vec2) -> Result<crate::potential::Resolvent> {
        let j = resolvent_warm(x, self.lambda, self.variant, self.grads[cell])?;
        self.grads[cell] = j.grad;
        Ok(j)
    }
}

impl CellConvex<2> for PhaseConvex {
    fn eval(&mut self, cell: usize, x: [f64; 2]) -> Result<([f64; 2], Mat2)> {
        let j = self.solve(cell, x)?;
        Ok((j.grad, j.yosida_jacobian(self.lambda, self.variant)))
    }
}

/// Resolvent-mapped phase field and related per-cell quantities.
pub(crate) struct PhaseImage {
    pub point: [Vec<f64>; 2],
    pub grad: [Vec<f64>; 2],
    /// `λ·max|Y(φ)|`.
    pub yosida_gap: f64,
}

pub(crate) fn phase_image(
    convex: &mut PhaseConvex,
    phi: &[Field; 2],
) -> Result<PhaseImage> {
    let n = phi[0].values().len();
    let mut point = [vec![0.0; n], vec![0.0; n]];
    let mut grad = [vec![0.0; n], vec![0.0; n]];
    let mut gmax = 0.0f64;
    for c in 0..n {
        let j = convex.solve(c, [phi[0].values()[c], phi[1].values()[c]])?;
        for k in 0..2 {
            point[k][c] = j.point[k];
            grad[k][c] = j.grad[k];
            gmax = gmax.max(j.grad[k].abs());
        }
    }
    Ok(PhaseImage {
        point,
        grad,
        yosida_gap: convex.lambda * gmax,
    })
}

pub struct Stepper {
    config: SolverConfig,
    spectral: Spectral,
    convex: PhaseConvex,
}

impl Stepper {
    pub fn new(config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let spectral = Spectral::new(config.grid);
        let convex = PhaseConvex::new(
            config.grid.len(),
            config.potential.lambda,
            config.potential.variant,
        );
        Ok(Stepper {
            config,
            spectral,
            convex,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// State at `t = 0` from the configured initial data.
    pub fn init_state(&mut self) -> Result<SimState> {
        let p0 = self.config.initial_protein();
        let phi0 = self.config.initial_phase();
        self.init_state_from(p0, phi0)
    }

    /// State at `t = 0` with `R = (1 - P0)/2` and the given phases.
    pub fn init_state_from(&mut self, p0: Field, phi0: [Field; 2]) -> Result<SimState> {
        let g = self.config.grid;
        for f in phi0.iter().chain(std::iter::once(&p0)) {
            if *f.grid() != g {
                return Err(Error::Shape("initial data grid differs from the config".into()));
            }
            f.check_finite("initial data")?;
        }
        validate_initial(&p0, &self.config.coeffs)?;
        let r0 = p0.map(|v| 0.5 * (1.0 - v));
        let image = phase_image(&mut self.convex, &phi0)?;
        let mu = self.chemical_potential(&phi0, &image.grad);
        let totals = ConservedTotals::of(&phi0, &p0, &[r0.clone(), r0.clone()]);
        Ok(SimState {
            t: 0.0,
            step_index: 0,
            phi: phi0,
            mu,
            p: p0,
            r: [r0.clone(), r0],
            totals,
            initial_totals: totals,
        })
    }

    fn explicit_force(&self, phi: &[Field; 2]) -> [Vec<f64>; 2] {
        let a = self.config.potential.big_a;
        let n = phi[0].values().len();
        let mut e = [vec![0.0; n], vec![0.0; n]];
        for c in 0..n {
            let (_, g) = demixing([phi[0].values()[c], phi[1].values()[c]], &self.config.potential);
            e[0][c] = a * g[0];
            e[1][c] = a * g[1];
        }
        e
    }

    /// `μ = -ε²Δφ + A·(Y(φ) + ∇Ψ²(φ))`.
    fn chemical_potential(&self, phi: &[Field; 2], grad: &[Vec<f64>; 2]) -> [Field; 2] {
        let e = self.explicit_force(phi);
        let eps2 = self.config.potential.eps * self.config.potential.eps;
        let a = self.config.potential.big_a;
        std::array::from_fn(|k| {
            let mut lap = vec![0.0; phi[k].values().len()];
            crate::grid::laplacian_slice(&self.config.grid, phi[k].values(), &mut lap);
            let v = (0..lap.len())
                .map(|c| -eps2 * lap[c] + a * grad[k][c] + e[k][c])
                .collect();
            Field::from_vec_unchecked(self.config.grid, v)
        })
    }

    fn frozen_sources(&self, state: &SimState, image: &PhaseImage) -> Result<Sources> {
        let g = self.config.grid;
        if !self.config.sources_enabled {
            let z = Field::zeros(g);
            return Ok(Sources {
                phi: [z.clone(), z.clone()],
                p: z.clone(),
                r: [z.clone(), z],
            });
        }
        let j1 = Field::from_vec_unchecked(g, image.point[0].clone());
        let j2 = Field::from_vec_unchecked(g, image.point[1].clone());
        sources(
            [&j1, &j2],
            &state.p,
            [&state.r[0], &state.r[1]],
            &self.config.coeffs,
            self.config.truncated,
        )
    }

    /// Means at the current level. `f` uses the (possibly truncated)
    /// formation term exactly as it enters the sources.
    fn sample(&self, state: &SimState, image: &PhaseImage) -> MeanSample {
        let cfg = &self.config;
        let h = |x: f64| if cfg.truncated { x.clamp(0.0, 1.0) } else { x };
        let n = state.p.values().len() as f64;
        let f: [f64; 2] = std::array::from_fn(|i| {
            state
                .p
                .values()
                .iter()
                .zip(state.r[i].values())
                .map(|(&p, &r)| h(p) * h(r))
                .sum::<f64>()
                / n
        });
        MeanSample {
            t: state.t,
            y: [state.phi[0].mean(), state.phi[1].mean()],
            f,
            jmean: std::array::from_fn(|i| image.point[i].iter().sum::<f64>() / n),
            pmean: state.p.mean(),
            rmean: [state.r[0].mean(), state.r[1].mean()],
            yosida_gap: image.yosida_gap,
        }
    }

    /// Mean-field sample of `state` (resolvent evaluated afresh).
    pub fn mean_sample(&mut self, state: &SimState) -> Result<MeanSample> {
        let image = phase_image(&mut self.convex, &state.phi)?;
        Ok(self.sample(state, &image))
    }

    /// One Cahn–Hilliard step with frozen sources; returns `(φ, μ)` at
    /// the new level plus solver effort.
    pub fn ch_step(
        &mut self,
        state: &SimState,
        src: &Sources,
    ) -> Result<([Field; 2], [Field; 2], usize, usize, f64)> {
        let cfg = &self.config;
        let tau = cfg.tau;
        let base: [Vec<f64>; 2] = std::array::from_fn(|k| {
            state.phi[k]
                .values()
                .iter()
                .zip(src.phi[k].values())
                .map(|(p, s)| p + tau * s)
                .collect()
        });
        let w0: [Vec<f64>; 2] =
            std::array::from_fn(|k| src.phi[k].values().iter().map(|s| -tau * s).collect());
        let explicit = self.explicit_force(&state.phi);
        let problem = ChProblem {
            spectral: &self.spectral,
            tau,
            eps2: cfg.potential.eps * cfg.potential.eps,
            big_a: cfg.potential.big_a,
            base: &base,
            explicit: &explicit,
            tol: cfg.newton_tol,
            max_iter: cfg.newton_max_iter,
        };
        let sol = problem.solve(&mut self.convex, w0)?;
        let g = cfg.grid;
        let [p1, p2] = sol.phi;
        let [m1, m2] = sol.mu;
        let phi = [Field::from_vec_unchecked(g, p1), Field::from_vec_unchecked(g, p2)];
        let mu = [Field::from_vec_unchecked(g, m1), Field::from_vec_unchecked(g, m2)];
        for f in phi.iter().chain(&mu) {
            f.check_finite("Cahn–Hilliard update")?;
        }
        Ok((phi, mu, sol.newton_iterations, sol.cg_iterations, sol.residual))
    }

    /// Implicit diffusion with explicit sources for `P`, `R1`, `R2`.
    pub fn rd_step(&self, state: &SimState, src: &Sources) -> Result<(Field, [Field; 2])> {
        let tau = self.config.tau;
        let advance = |u: &Field, s: &Field| -> Result<Field> {
            let mut v: Vec<f64> = u
                .values()
                .iter()
                .zip(s.values())
                .map(|(a, b)| a + tau * b)
                .collect();
            self.spectral.solve_shifted(&mut v, tau);
            let f = Field::from_vec_unchecked(self.config.grid, v);
            f.check_finite("reaction–diffusion update")?;
            Ok(f)
        };
        let p = advance(&state.p, &src.p)?;
        let r1 = advance(&state.r[0], &src.r[0])?;
        let r2 = advance(&state.r[1], &src.r[1])?;
        Ok((p, [r1, r2]))
    }

    /// Advances one step of size `τ`.
    pub fn step(&mut self, state: &SimState) -> Result<(SimState, StepReport)> {
        state.check_finite()?;
        let image = phase_image(&mut self.convex, &state.phi)?;
        let src = self.frozen_sources(state, &image)?;
        let sample = self.sample(state, &image);
        let (phi, mu, newton_iterations, cg_iterations, residual) = self.ch_step(state, &src)?;
        let (p, r) = self.rd_step(state, &src)?;
        let step_index = state.step_index + 1;
        let totals = ConservedTotals::of(&phi, &p, &r);
        let next = SimState {
            t: step_index as f64 * self.config.tau,
            step_index,
            phi,
            mu,
            p,
            r,
            totals,
            initial_totals: state.initial_totals,
        };
        Ok((
            next,
            StepReport {
                newton_iterations,
                cg_iterations,
                residual,
                sample,
            },
        ))
    }
}

/// Receives the output stream of [`run`].
pub trait Sink {
    fn on_output(&mut self, state: &SimState, record: &DiagnosticsRecord) -> Result<()>;

    fn on_snapshot(&mut self, _state: &SimState) -> Result<()> {
        Ok(())
    }

    fn on_step(&mut self, _report: &StepReport) -> Result<()> {
        Ok(())
    }
}

/// Sink that keeps every record in memory.
#[derive(Debug, Default, Clone)]
pub struct Collect {
    pub records: Vec<DiagnosticsRecord>,
}

impl Sink for Collect {
    fn on_output(&mut self, _state: &SimState, record: &DiagnosticsRecord) -> Result<()> {
        self.records.push(*record);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_state: SimState,
    /// One sample per time level, including the last.
    pub means: MeanSeries,
    pub invariants: InvariantReport,
    pub newton_iterations: usize,
    pub cg_iterations: usize,
}

/// Integrates from the configured initial data to `T_final`.
pub fn run(config: &SolverConfig, sink: &mut dyn Sink) -> Result<RunOutcome> {
    let mut stepper = Stepper::new(config.clone())?;
    let state = stepper.init_state()?;
    run_from(&mut stepper, state, sink)
}

/// Integrates `state` with `stepper` until `T_final`.
pub fn run_from(stepper: &mut Stepper, mut state: SimState, sink: &mut dyn Sink) -> Result<RunOutcome> {
    let config = stepper.config().clone();
    let n_steps = config.n_steps();
    let mut monitor = InvariantMonitor::new(&config, &state);
    let mut means = MeanSeries::default();
    let mut newton = 0;
    let mut cg = 0;

    let (first, ok) = diagnostics::evaluate(&state, &config)?;
    monitor.observe_output(&first, ok);
    sink.on_output(&state, &first)?;
    if config.snapshot_every > 0 {
        sink.on_snapshot(&state)?;
    }
    for _ in 0..n_steps {
        let (next, report) = stepper.step(&state)?;
        newton += report.newton_iterations;
        cg += report.cg_iterations;
        means.push(report.sample.clone())?;
        sink.on_step(&report)?;
        state = next;
        monitor.observe_state(&state);
        let n = state.step_index;
        let last = n == n_steps;
        if n % config.output_every == 0 || last {
            let (rec, ok) = diagnostics::evaluate(&state, &config)?;
            monitor.observe_output(&rec, ok);
            sink.on_output(&state, &rec)?;
        }
        if config.snapshot_every > 0 && (n % config.snapshot_every == 0 || last) {
            sink.on_snapshot(&state)?;
        }
    }
    means.push(stepper.mean_sample(&state)?)?;
    let invariants = monitor.finish(&means);
    Ok(RunOutcome {
        final_state: state,
        means,
        invariants,
        newton_iterations: newton,
        cg_iterations: cg,
    })
}
