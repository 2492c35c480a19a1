//! Per-output invariant diagnostics and the stand-alone probes built on the
//! stepper.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{dirichlet_energy, Field, Grid};
use crate::meanfield::{mean_bounds_check, mean_ode_residual, MeanSeries, LAMBDA_SMALL};
use crate::potential::{demixing, grad_psi1, resolvent, SimplexPoint, Variant};
use crate::stepper::{run_from, ConservedTotals, SimState, Sink, SolverConfig, Stepper};

/// Column names of [`DiagnosticsRecord::to_row`], in order.
pub const COLUMNS: [&str; 22] = [
    "t",
    "mass_total",
    "mass_phiR1",
    "mass_phiR2",
    "mass_phiP",
    "mass_RminusP",
    "Pmin",
    "Pmax",
    "R1min",
    "R1max",
    "R2min",
    "R2max",
    "phi1mean",
    "phi2mean",
    "sep",
    "energy",
    "grad_mu_l2",
    "mu1_mean",
    "mu2_mean",
    "yosida_gap",
    "w_half_gradmu",
    "w_alpha_mu",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub totals: ConservedTotals,
    pub p_range: [f64; 2],
    pub r1_range: [f64; 2],
    pub r2_range: [f64; 2],
    pub phi_mean: [f64; 2],
    /// Distance of `φ` from the boundary of its admissible set.
    pub sep: f64,
    pub energy: f64,
    /// `‖∇μ‖` summed over both components.
    pub grad_mu_l2: f64,
    pub mu_mean: [f64; 2],
    /// `λ·max|Y(φ)|`.
    pub yosida_gap: f64,
    /// `t^{1/2}·‖∇μ‖`.
    pub w_half_gradmu: f64,
    /// `t^{3/2-α}·(‖∇μ‖² + |Ω| Σ mean(μᵢ)²)^{1/2}`.
    pub w_alpha_mu: f64,
}

impl DiagnosticsRecord {
    pub fn to_row(&self) -> [f64; 22] {
        let c = &self.totals;
        [
            self.t,
            c.total,
            c.phi_r[0],
            c.phi_r[1],
            c.phi_p,
            c.r_minus_p,
            self.p_range[0],
            self.p_range[1],
            self.r1_range[0],
            self.r1_range[1],
            self.r2_range[0],
            self.r2_range[1],
            self.phi_mean[0],
            self.phi_mean[1],
            self.sep,
            self.energy,
            self.grad_mu_l2,
            self.mu_mean[0],
            self.mu_mean[1],
            self.yosida_gap,
            self.w_half_gradmu,
            self.w_alpha_mu,
        ]
    }

    pub fn from_row(r: &[f64; 22]) -> Self {
        DiagnosticsRecord {
            t: r[0],
            totals: ConservedTotals {
                total: r[1],
                phi_r: [r[2], r[3]],
                phi_p: r[4],
                r_minus_p: r[5],
            },
            p_range: [r[6], r[7]],
            r1_range: [r[8], r[9]],
            r2_range: [r[10], r[11]],
            phi_mean: [r[12], r[13]],
            sep: r[14],
            energy: r[15],
            grad_mu_l2: r[16],
            mu_mean: [r[17], r[18]],
            yosida_gap: r[19],
            w_half_gradmu: r[20],
            w_alpha_mu: r[21],
        }
    }
}

/// `min{φ1, φ2, 1 - φ1 - φ2}` (or `min{φᵢ, 1 - φᵢ}` for the box variant),
/// minimized over cells.
pub fn separation(phi: &[Field; 2], variant: Variant) -> f64 {
    phi[0]
        .values()
        .iter()
        .zip(phi[1].values())
        .map(|(&a, &b)| match variant {
            Variant::FloryHuggins => a.min(b).min(1.0 - a - b),
            Variant::Tilde => a.min(b).min(1.0 - a).min(1.0 - b),
        })
        .fold(f64::INFINITY, f64::min)
}

struct PhaseScan {
    bulk: f64,
    gmax: f64,
    admissible: bool,
}

fn scan_phase(phi: &[Field; 2], config: &SolverConfig) -> Result<PhaseScan> {
    let pp = &config.potential;
    let mut scan = PhaseScan {
        bulk: 0.0,
        gmax: 0.0,
        admissible: true,
    };
    for (&a, &b) in phi[0].values().iter().zip(phi[1].values()) {
        let r = [a, b];
        let j = resolvent(r, pp.lambda, pp.variant)?;
        scan.bulk += j.envelope(r, pp.lambda) + demixing(r, pp).0;
        scan.gmax = scan.gmax.max(j.grad[0].abs()).max(j.grad[1].abs());
        scan.admissible &= j.is_interior();
    }
    Ok(scan)
}

fn gradient_energy(phi: &[Field; 2], config: &SolverConfig) -> f64 {
    let eps = config.potential.eps;
    eps * eps * 0.5 * (dirichlet_energy(&phi[0]) + dirichlet_energy(&phi[1]))
}

/// `Σ ε²/2 ∫|∇φᵢ|² + A ∫ (Ψ¹_λ(φ) + Ψ²(φ))`.
pub fn energy(phi: &[Field; 2], config: &SolverConfig) -> Result<f64> {
    let scan = scan_phase(phi, config)?;
    Ok(gradient_energy(phi, config) + config.potential.big_a * scan.bulk * config.grid.cell_area())
}

/// Evaluates the diagnostics row of `state`; depends on nothing else.
pub fn record(state: &SimState, config: &SolverConfig) -> Result<DiagnosticsRecord> {
    Ok(evaluate(state, config)?.0)
}

/// The diagnostics row plus whether `J_λ(φ)` is interior at every cell.
pub fn evaluate(state: &SimState, config: &SolverConfig) -> Result<(DiagnosticsRecord, bool)> {
    let pp = &config.potential;
    let scan = scan_phase(&state.phi, config)?;
    let grad_mu_l2 = (dirichlet_energy(&state.mu[0]) + dirichlet_energy(&state.mu[1])).sqrt();
    let mu_mean = [state.mu[0].mean(), state.mu[1].mean()];
    let v_proxy = (grad_mu_l2 * grad_mu_l2
        + config.grid.area() * (mu_mean[0] * mu_mean[0] + mu_mean[1] * mu_mean[1]))
        .sqrt();
    let t = state.t;
    let rec = DiagnosticsRecord {
        t,
        totals: ConservedTotals::of(&state.phi, &state.p, &state.r),
        p_range: [state.p.min(), state.p.max()],
        r1_range: [state.r[0].min(), state.r[0].max()],
        r2_range: [state.r[1].min(), state.r[1].max()],
        phi_mean: [state.phi[0].mean(), state.phi[1].mean()],
        sep: separation(&state.phi, pp.variant),
        energy: gradient_energy(&state.phi, config)
            + pp.big_a * scan.bulk * config.grid.cell_area(),
        grad_mu_l2,
        mu_mean,
        yosida_gap: pp.lambda * scan.gmax,
        w_half_gradmu: t.sqrt() * grad_mu_l2,
        w_alpha_mu: t.powf(1.5 - config.probe_alpha) * v_proxy,
    };
    Ok((rec, scan.admissible))
}

/// True when `J_λ(φ)` lies strictly inside the admissible set at every cell.
pub fn phase_admissible(state: &SimState, config: &SolverConfig) -> Result<bool> {
    Ok(scan_phase(&state.phi, config)?.admissible)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSummary {
    pub sup_half_gradmu: f64,
    pub sup_alpha_mu: f64,
}

/// Suprema over the records of `t^{1/2}‖∇μ‖` and `t^{3/2-α}‖μ‖_V`.
pub fn weighted_probes(records: &[DiagnosticsRecord], alpha: f64, area: f64) -> Result<ProbeSummary> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Validation(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut out = ProbeSummary {
        sup_half_gradmu: 0.0,
        sup_alpha_mu: 0.0,
    };
    for r in records {
        let v = (r.grad_mu_l2 * r.grad_mu_l2
            + area * (r.mu_mean[0] * r.mu_mean[0] + r.mu_mean[1] * r.mu_mean[1]))
            .sqrt();
        out.sup_half_gradmu = out.sup_half_gradmu.max(r.t.sqrt() * r.grad_mu_l2);
        out.sup_alpha_mu = out.sup_alpha_mu.max(r.t.powf(1.5 - alpha) * v);
    }
    Ok(out)
}

/// Least-squares slope of `ln v` against `ln t` over points with `t, v > 0`.
pub fn power_law_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, v)| *t > 0.0 && *v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Source of random phase fields for [`verify_mz`].
pub trait PhaseSampler {
    fn sample(&mut self, grid: &Grid) -> [Field; 2];
}

/// Fields constant on a `blocks × blocks` partition. In half of the draws
/// blocks take independent log-uniform values in `[1e-9, 1e-1]` per
/// component, a few drawn uniformly from the simplex instead. The other half
/// perturb one log-uniform base point by a relative amount `10^U(-6, -0.5)`,
/// which is where the constant of the inequality is actually needed.
#[derive(Debug, Clone)]
pub struct PiecewiseConstantSampler {
    rng: ChaCha8Rng,
    blocks: usize,
    simplex_share: f64,
    near_constant_share: f64,
}

impl PiecewiseConstantSampler {
    pub fn new(seed: u64, blocks: usize) -> Self {
        PiecewiseConstantSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            blocks: blocks.max(1),
            simplex_share: 0.05,
            near_constant_share: 0.5,
        }
    }

    fn block_value(&mut self) -> [f64; 2] {
        if self.rng.gen_bool(self.simplex_share) {
            // uniform on the open simplex through sorted uniforms
            loop {
                let u: f64 = self.rng.gen();
                let v: f64 = self.rng.gen();
                let (a, b) = if u < v { (u, v) } else { (v, u) };
                let p = [a, b - a];
                if p[0] > 0.0 && p[1] > 0.0 && p[0] + p[1] < 1.0 {
                    return p;
                }
            }
        }
        let e1 = self.rng.gen_range(-9.0..-1.0);
        let e2 = self.rng.gen_range(-9.0..-1.0);
        [10f64.powf(e1), 10f64.powf(e2)]
    }
}

impl PhaseSampler for PiecewiseConstantSampler {
    fn sample(&mut self, grid: &Grid) -> [Field; 2] {
        let b = self.blocks;
        let values: Vec<[f64; 2]> = if self.rng.gen_bool(self.near_constant_share) {
            let base = [
                10f64.powf(self.rng.gen_range(-9.0..-1.0)),
                10f64.powf(self.rng.gen_range(-9.0..-1.0)),
            ];
            let delta = 10f64.powf(self.rng.gen_range(-6.0..-0.5));
            (0..b * b)
                .map(|_| {
                    let u: f64 = self.rng.gen_range(-1.0..1.0);
                    let v: f64 = self.rng.gen_range(-1.0..1.0);
                    [base[0] * (1.0 + delta * u), base[1] * (1.0 + delta * v)]
                })
                .collect()
        } else {
            (0..b * b).map(|_| self.block_value()).collect()
        };
        let at = |i: usize, j: usize| {
            let bi = i * b / grid.nx();
            let bj = j * b / grid.ny();
            values[bj * b + bi]
        };
        let mut f = [Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len())];
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let v = at(i, j);
                f[0].push(v[0]);
                f[1].push(v[1]);
            }
        }
        let [a, c] = f;
        [
            Field::from_vec_unchecked(*grid, a),
            Field::from_vec_unchecked(*grid, c),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MzParams {
    /// Multiplier of the left-hand side.
    pub c_psi: f64,
    /// Upper limit `R` of the admissible total mean.
    pub radius: f64,
    /// Required constants above this are counted as violations.
    pub ceiling: f64,
}

impl Default for MzParams {
    fn default() -> Self {
        MzParams {
            c_psi: 0.25,
            radius: 0.125,
            ceiling: 1e3,
        }
    }
}

/// Smallest constant `C` making
/// `c_Ψ m ∫|∇Ψ¹(φ)| ≤ ∫∇Ψ¹(φ)·(φ - φ_Ω) + C M (1 + |ln(m/2)|)` hold, where
/// `m` is the smaller component mean and `M` their sum. `None` when the
/// means violate `0 < m < M ≤ R`.
pub fn mz_required_constant(phi: &[Field; 2], params: &MzParams) -> Result<Option<f64>> {
    let means = [phi[0].mean(), phi[1].mean()];
    let m = means[0].min(means[1]);
    let big_m = means[0] + means[1];
    if !(m > 0.0 && m < big_m && big_m <= params.radius) {
        return Ok(None);
    }
    let dx = phi[0].grid().cell_area();
    let mut l1 = 0.0;
    let mut centered = 0.0;
    for (&a, &b) in phi[0].values().iter().zip(phi[1].values()) {
        let g = grad_psi1(SimplexPoint::new(a, b)?)?;
        l1 += g[0].hypot(g[1]);
        centered += g[0] * (a - means[0]) + g[1] * (b - means[1]);
    }
    let lhs = params.c_psi * m * l1 * dx;
    let scale = big_m * (1.0 + (m / 2.0).ln().abs());
    Ok(Some(((lhs - centered * dx) / scale).max(0.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MzReport {
    pub trials: usize,
    pub evaluated: usize,
    /// Trials whose means fall outside the admissible range.
    pub skipped: usize,
    /// Largest required constant over evaluated trials.
    pub required_c: f64,
    pub worst_trial: Option<usize>,
    /// Trials needing a constant above the ceiling.
    pub violations: Vec<usize>,
}

impl MzReport {
    pub fn passed(&self) -> bool {
        self.evaluated > 0 && self.violations.is_empty()
    }
}

pub fn verify_mz(
    sampler: &mut dyn PhaseSampler,
    grid: &Grid,
    n_trials: usize,
    params: &MzParams,
) -> Result<MzReport> {
    let mut rep = MzReport {
        trials: n_trials,
        evaluated: 0,
        skipped: 0,
        required_c: 0.0,
        worst_trial: None,
        violations: Vec::new(),
    };
    for trial in 0..n_trials {
        let phi = sampler.sample(grid);
        match mz_required_constant(&phi, params)? {
            None => rep.skipped += 1,
            Some(c) => {
                rep.evaluated += 1;
                if rep.worst_trial.is_none() || c > rep.required_c {
                    rep.required_c = c;
                    rep.worst_trial = Some(trial);
                }
                if c > params.ceiling {
                    rep.violations.push(trial);
                }
            }
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinReport {
    /// `(t, D(t))` for `t ≥ σ`.
    pub distance: Vec<(f64, f64)>,
    pub d_sigma: f64,
    /// `sup D(t) / D(σ)`; 1 when both runs agree.
    pub ratio: f64,
}

fn l2_distance(a: &Field, b: &Field) -> f64 {
    let s: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    (s * a.grid().cell_area()).sqrt()
}

/// `‖φ¹ - φ²‖ + ‖P¹ - P²‖ + ‖R¹ - R²‖` with vector norms over components.
pub fn state_distance(a: &SimState, b: &SimState) -> f64 {
    let pair = |x: &[Field; 2], y: &[Field; 2]| l2_distance(&x[0], &y[0]).hypot(l2_distance(&x[1], &y[1]));
    pair(&a.phi, &b.phi) + l2_distance(&a.p, &b.p) + pair(&a.r, &b.r)
}

/// Runs the configured problem from `P0` and from `P0 + δ` in lockstep,
/// where `δ` is seeded noise with `‖δ‖∞ = perturb_eps`.
pub fn twin_run_stability(config: &SolverConfig, sigma: f64, perturb_eps: f64) -> Result<TwinReport> {
    if config.potential.variant != Variant::Tilde {
        return Err(Error::Validation(
            "the twin-run probe requires the tilde potential".into(),
        ));
    }
    if !(perturb_eps >= 0.0 && perturb_eps.is_finite()) {
        return Err(Error::Validation(format!(
            "perturbation size must be nonnegative, got {perturb_eps}"
        )));
    }
    let mut a = Stepper::new(config.clone())?;
    let mut b = Stepper::new(config.clone())?;
    let p0 = config.initial_protein();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let noise: Vec<f64> = (0..p0.values().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let peak = noise.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { perturb_eps / peak } else { 0.0 };
    let p1 = Field::new(
        config.grid,
        p0.values().iter().zip(&noise).map(|(p, n)| p + scale * n).collect(),
    )?;
    let mut sa = a.init_state_from(p0, config.initial_phase())?;
    let mut sb = b.init_state_from(p1, config.initial_phase())?;
    let mut distance = Vec::new();
    let n_steps = config.n_steps();
    for n in 0..=n_steps {
        if sa.t >= sigma - 1e-12 {
            distance.push((sa.t, state_distance(&sa, &sb)));
        }
        if n == n_steps {
            break;
        }
        sa = a.step(&sa)?.0;
        sb = b.step(&sb)?.0;
    }
    let d_sigma = distance.first().map_or(0.0, |d| d.1);
    let sup = distance.iter().fold(0.0f64, |m, d| m.max(d.1));
    let ratio = if d_sigma > 0.0 {
        sup / d_sigma
    } else if sup == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    Ok(TwinReport {
        distance,
        d_sigma,
        ratio,
    })
}

/// Pass/fail status of one invariant family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// The hypothesis behind the check does not apply to this run.
    Skipped,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyResult {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    pub families: Vec<FamilyResult>,
}

impl InvariantReport {
    pub fn all_passed(&self) -> bool {
        self.families.iter().all(|f| f.status != Status::Fail)
    }

    pub fn failing(&self) -> Vec<&'static str> {
        self.families
            .iter()
            .filter(|f| f.status == Status::Fail)
            .map(|f| f.name)
            .collect()
    }
}

pub const CONSERVATION_TOL: f64 = 1e-10;
pub const BOUNDS_SLACK: f64 = 1e-3;
pub const ENERGY_SLACK_PER_STEP: f64 = 1e-10;
pub const MEAN_ODE_TOL: f64 = 1e-10;

/// Accumulates the run-level invariant checks.
#[derive(Debug, Clone)]
pub struct InvariantMonitor {
    config: SolverConfig,
    initial: ConservedTotals,
    c_star: f64,
    max_drift: f64,
    bounds: [f64; 2],
    bounds_ok: bool,
    admissible: bool,
    last_energy: Option<(usize, f64)>,
    energy_increase: f64,
    energy_ok: bool,
    step: usize,
}

impl InvariantMonitor {
    pub fn new(config: &SolverConfig, initial: &SimState) -> Self {
        InvariantMonitor {
            config: config.clone(),
            initial: initial.initial_totals,
            c_star: config.c_star(),
            max_drift: 0.0,
            bounds: [f64::INFINITY, f64::NEG_INFINITY],
            bounds_ok: true,
            admissible: true,
            last_energy: None,
            energy_increase: f64::NEG_INFINITY,
            energy_ok: true,
            step: initial.step_index,
        }
    }

    pub fn observe_state(&mut self, state: &SimState) {
        self.step = state.step_index;
        self.max_drift = self.max_drift.max(state.totals.max_drift(&self.initial));
    }

    pub fn observe_output(&mut self, rec: &DiagnosticsRecord, admissible: bool) {
        let lo = rec.p_range[0].min(rec.r1_range[0]).min(rec.r2_range[0]);
        let hi = rec.p_range[1].max(rec.r1_range[1]).max(rec.r2_range[1]);
        self.bounds = [self.bounds[0].min(lo), self.bounds[1].max(hi)];
        if !(lo >= self.c_star - BOUNDS_SLACK && hi <= 1.0 + BOUNDS_SLACK) {
            self.bounds_ok = false;
        }
        self.admissible &= admissible;
        if let Some((n0, e0)) = self.last_energy {
            let inc = rec.energy - e0;
            self.energy_increase = self.energy_increase.max(inc);
            if inc > ENERGY_SLACK_PER_STEP * (self.step - n0).max(1) as f64 {
                self.energy_ok = false;
            }
        }
        self.last_energy = Some((self.step, rec.energy));
    }

    pub fn finish(&self, means: &MeanSeries) -> InvariantReport {
        let cfg = &self.config;
        let mut families = Vec::new();
        let status = |ok: bool| if ok { Status::Pass } else { Status::Fail };
        families.push(FamilyResult {
            name: "conservation",
            status: status(self.max_drift <= CONSERVATION_TOL),
            detail: format!("max drift {:e} (tolerance {CONSERVATION_TOL:e})", self.max_drift),
        });
        families.push(FamilyResult {
            name: "min_max",
            status: status(self.bounds_ok),
            detail: format!(
                "P, R in [{}, {}], required [{}, {}]",
                self.bounds[0],
                self.bounds[1],
                self.c_star - BOUNDS_SLACK,
                1.0 + BOUNDS_SLACK
            ),
        });
        families.push(FamilyResult {
            name: "phase_admissible",
            status: status(self.admissible),
            detail: if self.admissible {
                "resolvent interior at every output".into()
            } else {
                "resolvent reached the boundary".into()
            },
        });
        families.push(if cfg.sources_enabled {
            FamilyResult {
                name: "energy",
                status: Status::Skipped,
                detail: "sources active; dissipation is not expected".into(),
            }
        } else {
            FamilyResult {
                name: "energy",
                status: status(self.energy_ok),
                detail: format!("largest increase between outputs {:e}", self.energy_increase),
            }
        });
        match mean_ode_residual(means, &cfg.coeffs) {
            Ok(r) => families.push(FamilyResult {
                name: "mean_ode",
                status: status(r.max_abs <= MEAN_ODE_TOL),
                detail: format!("max residual {:e}", r.max_abs),
            }),
            Err(_) => families.push(FamilyResult {
                name: "mean_ode",
                status: Status::Skipped,
                detail: "fewer than two time levels".into(),
            }),
        }
        let pure_start = matches!(cfg.initial.phase, crate::stepper::PhaseInit::Zero);
        if cfg.sources_enabled && pure_start && cfg.potential.lambda <= LAMBDA_SMALL {
            let rep = mean_bounds_check(means, &cfg.coeffs, cfg.potential.lambda, self.c_star);
            families.push(FamilyResult {
                name: "mean_bounds",
                status: status(rep.all_passed()),
                detail: format!(
                    "slack: upper {:e}, positivity {:e}, sandwich {:e}, cap {:e}",
                    rep.upper.min_slack, rep.positivity.min_slack, rep.sandwich.min_slack, rep.cap.min_slack
                ),
            });
        } else {
            families.push(FamilyResult {
                name: "mean_bounds",
                status: Status::Skipped,
                detail: "needs sources, a pure initial phase and lambda <= 1e-2".into(),
            });
        }
        InvariantReport { families }
    }
}

/// Runs `config` and returns the records alongside the outcome.
pub fn run_collect(config: &SolverConfig) -> Result<(Vec<DiagnosticsRecord>, crate::stepper::RunOutcome)> {
    let mut stepper = Stepper::new(config.clone())?;
    let state = stepper.init_state()?;
    let mut sink = crate::stepper::Collect::default();
    let out = run_from(&mut stepper, state, &mut sink as &mut dyn Sink)?;
    Ok((sink.records, out))
}
