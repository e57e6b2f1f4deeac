//! Continuous-time experiment on `[0, 1]`.
//!
//! Under a sampling rule π₁ (and π₀ = 1 - π₁) the state evolves as
//!
//! ```text
//! dx_a = μ_a π_a dt + σ_a √π_a dW_a,    dq_a = π_a dt,    a ∈ {0, 1}
//! ```
//!
//! with independent Wiener processes. The simulator advances both arms on a
//! uniform grid of `steps` intervals; each interval applies the exact Gaussian
//! increment for the fraction chosen at its left end, so constant and
//! grid-adapted rules are reproduced exactly in law at grid times.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::policy::{PolicySpec, SamplingRule, TwoPointPrior};
use crate::seed::replication_rng;

pub const DEFAULT_STEPS: u32 = 1000;

/// True means and standard deviations of both arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub mu1: f64,
    pub mu0: f64,
    pub sigma1: f64,
    pub sigma0: f64,
}

impl Environment {
    pub fn new(mu1: f64, mu0: f64, sigma1: f64, sigma0: f64) -> Result<Self> {
        ensure_finite("mu1", mu1)?;
        ensure_finite("mu0", mu0)?;
        ensure_positive("sigma1", sigma1)?;
        ensure_positive("sigma0", sigma0)?;
        Ok(Self { mu1, mu0, sigma1, sigma0 })
    }

    /// `μ₁ - μ₀`.
    pub fn gap(&self) -> f64 {
        self.mu1 - self.mu0
    }
}

/// Cumulative outcomes `x_a` and sampling times `q_a` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentState {
    pub t: f64,
    pub x1: f64,
    pub x0: f64,
    pub q1: f64,
    pub q0: f64,
}

impl ExperimentState {
    pub const INITIAL: ExperimentState = ExperimentState { t: 0.0, x1: 0.0, x0: 0.0, q1: 0.0, q0: 0.0 };
}

/// Euler grid size and seed for one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathConfig {
    pub steps: u32,
    pub seed: u64,
}

impl PathConfig {
    pub fn new(steps: u32, seed: u64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::domain("a path needs at least one step"));
        }
        Ok(Self { steps, seed })
    }
}

impl Default for PathConfig {
    fn default() -> Self {
        Self { steps: DEFAULT_STEPS, seed: 0 }
    }
}

/// Terminal state plus the standard deviations the implementation rule should use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatedPath {
    pub terminal: ExperimentState,
    /// Known `(σ₁, σ₀)` for constant rules, plug-in estimates otherwise.
    pub decision_sigmas: (f64, f64),
}

/// Running quadratic variation of each arm, used by the plug-in rules.
#[derive(Debug, Default, Clone, Copy)]
struct QuadraticVariation {
    squares: [f64; 2],
    time: [f64; 2],
}

impl QuadraticVariation {
    fn record(&mut self, arm: usize, increment: f64, dq: f64) {
        self.squares[arm] += increment * increment;
        self.time[arm] += dq;
    }

    /// `σ̂_a = sqrt(Σ (Δx_a)² / q_a)`, or `None` while either arm is unobserved.
    fn sigmas(&self) -> Option<(f64, f64)> {
        let est = |a: usize| (self.time[a] > 0.0).then(|| (self.squares[a] / self.time[a]).sqrt());
        match (est(1), est(0)) {
            (Some(s1), Some(s0)) if s1 > 0.0 && s0 > 0.0 => Some((s1, s0)),
            _ => None,
        }
    }
}

/// Plug-in Neyman fraction, falling back to an equal split when either estimate is degenerate.
pub(crate) fn plug_in_fraction(sigmas: Option<(f64, f64)>) -> f64 {
    match sigmas {
        Some((s1, s0)) if s1.is_finite() && s0.is_finite() => s1 / (s1 + s0),
        _ => 0.5,
    }
}

/// Simulates one path with a fresh generator derived from `config.seed`.
pub fn simulate_path(env: &Environment, policy: &PolicySpec, config: PathConfig) -> ExperimentState {
    let mut rng = replication_rng(config.seed, 0);
    simulate_path_with(env, policy, config.steps, &mut rng).terminal
}

/// Euler–Maruyama path driven by `rng`.
///
/// Every step consumes two standard normal draws (arm 1, then arm 0), even
/// when an arm receives no attention, so rules with different fractions see
/// the same noise sequence.
pub fn simulate_path_with<R: Rng + ?Sized>(
    env: &Environment,
    policy: &PolicySpec,
    steps: u32,
    rng: &mut R,
) -> SimulatedPath {
    let steps = steps.max(1);
    let h = 1.0 / steps as f64;
    let mut state = ExperimentState::INITIAL;
    let mut qv = QuadraticVariation::default();

    let (mut pi1, pilot_steps, batch) = match policy.sampling {
        SamplingRule::FixedFraction { gamma } => (gamma, None, None),
        SamplingRule::EqualSplit => (0.5, None, None),
        SamplingRule::TwoStage { rho } => (0.5, Some(((steps as f64).powf(rho).ceil() as u32).clamp(1, steps)), None),
        SamplingRule::AdaptivePlugIn { batch } => (0.5, None, Some(batch.max(1))),
    };
    let mut pilot_sigmas = None;

    for k in 0..steps {
        if let Some(pilot) = pilot_steps {
            if k == pilot {
                pilot_sigmas = qv.sigmas();
                pi1 = plug_in_fraction(pilot_sigmas);
            }
        }
        if let Some(batch) = batch {
            if k > 0 && k % batch == 0 {
                pi1 = plug_in_fraction(qv.sigmas());
            }
        }
        let pi0 = 1.0 - pi1;
        let z1: f64 = rng.sample(StandardNormal);
        let z0: f64 = rng.sample(StandardNormal);
        let (dq1, dq0) = (pi1 * h, pi0 * h);
        let dx1 = env.mu1 * dq1 + env.sigma1 * dq1.sqrt() * z1;
        let dx0 = env.mu0 * dq0 + env.sigma0 * dq0.sqrt() * z0;
        state.x1 += dx1;
        state.x0 += dx0;
        state.q1 += dq1;
        state.q0 += dq0;
        qv.record(1, dx1, dq1);
        qv.record(0, dx0, dq0);
        state.t = (k + 1) as f64 * h;
    }

    let decision_sigmas = match policy.sampling {
        SamplingRule::FixedFraction { .. } | SamplingRule::EqualSplit => (env.sigma1, env.sigma0),
        SamplingRule::TwoStage { .. } => pilot_sigmas.unwrap_or((1.0, 1.0)),
        SamplingRule::AdaptivePlugIn { .. } => qv.sigmas().unwrap_or((1.0, 1.0)),
    };
    SimulatedPath { terminal: state, decision_sigmas }
}

/// One exact draw of the terminal state under a constant sampling fraction:
/// `x_a(1) ~ N(μ_a π_a, σ_a² π_a)`, independent across arms.
pub fn exact_terminal_sample(env: &Environment, rule: &SamplingRule, seed: u64) -> Result<ExperimentState> {
    let gamma = rule
        .constant_fraction()
        .ok_or_else(|| Error::usage("the exact terminal sampler needs a constant sampling fraction"))?;
    Ok(exact_terminal_draw(env, gamma, &mut replication_rng(seed, 0)))
}

/// Exact terminal draw for fraction `gamma`; consumes two normals (arm 1, then arm 0).
pub fn exact_terminal_draw<R: Rng + ?Sized>(env: &Environment, gamma: f64, rng: &mut R) -> ExperimentState {
    let z1: f64 = rng.sample(StandardNormal);
    let z0: f64 = rng.sample(StandardNormal);
    let (q1, q0) = (gamma, 1.0 - gamma);
    ExperimentState {
        t: 1.0,
        x1: env.mu1 * q1 + env.sigma1 * q1.sqrt() * z1,
        x0: env.mu0 * q0 + env.sigma0 * q0.sqrt() * z0,
        q1,
        q0,
    }
}

/// `ln dP¹/dP⁰` of the data in `state` for the two states of `prior`.
pub fn log_likelihood_ratio(state: &ExperimentState, prior: &TwoPointPrior, sigma1: f64, sigma0: f64) -> f64 {
    let (a1, b1) = (prior.state1.mu1, prior.state1.mu0);
    let (a0, b0) = (prior.state0.mu1, prior.state0.mu0);
    let v1 = sigma1 * sigma1;
    let v0 = sigma0 * sigma0;
    (a1 - a0) * state.x1 / v1 + (b1 - b0) * state.x0 / v0
        - (a1 * a1 - a0 * a0) * state.q1 / (2.0 * v1)
        - (b1 * b1 - b0 * b0) * state.q0 / (2.0 * v0)
}

/// Posterior probability of θ = 1, `m₁φ / ((1 - m₁) + m₁φ)`, as a logistic in
/// `ln φ + logit(m₁)` so neither tail overflows.
pub fn posterior_belief(log_phi: f64, m1: f64) -> f64 {
    debug_assert!(m1 > 0.0 && m1 < 1.0);
    let z = log_phi + m1.ln() - (1.0 - m1).ln();
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
