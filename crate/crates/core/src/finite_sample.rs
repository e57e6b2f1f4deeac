//! Discrete experiments with a budget of `n` sequential draws.
//!
//! Arm means are local to zero: `h_a/√n` for a Gaussian family and
//! `1/2 + h_a/√n` for Bernoulli outcomes (centred by subtracting 1/2). The
//! terminal rule compares `x_a = n^{-1/2} Σ Y` on the standardized scale, and
//! every reported regret is multiplied by `√n`, so as `n` grows the numbers
//! approach their diffusion counterparts.

use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffusion::plug_in_fraction;
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::policy::{decide, standardized_difference, Arm, PolicySpec, SamplingRule};
use crate::regret::{realized_regret, RegretEstimate};
use crate::seed::{map_replications, ReplicationRng};
use crate::stats::{sample_std_dev, RunningMoments};

/// Standard deviation of a centred Bernoulli(1/2) outcome.
pub const BERNOULLI_SIGMA: f64 = 0.5;

/// Default pilot exponent for the two-stage rule.
pub const DEFAULT_RHO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Bernoulli,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Family::Gaussian),
            "bernoulli" => Ok(Family::Bernoulli),
            other => Err(Error::usage(format!("unknown family `{other}`"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Gaussian => "gaussian",
            Family::Bernoulli => "bernoulli",
        })
    }
}

/// Where a gap `h₁ - h₀` sits: `h₁ = w gap` and `h₀ = -(1 - w) gap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Placement {
    /// `w = σ₁/(σ₁+σ₀)`. Every sampling fraction has the same regret here.
    LeastFavorable,
    Weighted {
        w: f64,
    },
}

impl Placement {
    pub fn arm1_share(&self, sigma1: f64, sigma0: f64) -> Result<f64> {
        match *self {
            Placement::LeastFavorable => Ok(sigma1 / (sigma1 + sigma0)),
            Placement::Weighted { w } if (0.0..=1.0).contains(&w) => Ok(w),
            Placement::Weighted { w } => Err(Error::domain(format!("placement weight must lie in [0, 1], got {w}"))),
        }
    }
}

impl FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "lfp" {
            return Ok(Placement::LeastFavorable);
        }
        let w: f64 =
            s.parse().map_err(|_| Error::usage(format!("placement must be `lfp` or a weight in [0, 1], got `{s}`")))?;
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::usage(format!("placement weight must lie in [0, 1], got {w}")));
        }
        Ok(Placement::Weighted { w })
    }
}

impl std::fmt::Display for Placement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Placement::LeastFavorable => f.write_str("lfp"),
            Placement::Weighted { w } => write!(f, "{w}"),
        }
    }
}

/// Local alternative `(h₁, h₀)` for one outcome family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalEnvironment {
    pub family: Family,
    pub h1: f64,
    pub h0: f64,
    /// Outcome standard deviations; fixed at 1/2 for Bernoulli.
    pub base_sigma1: f64,
    pub base_sigma0: f64,
}

impl LocalEnvironment {
    pub fn gaussian(h1: f64, h0: f64, sigma1: f64, sigma0: f64) -> Result<Self> {
        ensure_finite("h1", h1)?;
        ensure_finite("h0", h0)?;
        ensure_positive("sigma1", sigma1)?;
        ensure_positive("sigma0", sigma0)?;
        Ok(Self { family: Family::Gaussian, h1, h0, base_sigma1: sigma1, base_sigma0: sigma0 })
    }

    pub fn bernoulli(h1: f64, h0: f64) -> Result<Self> {
        ensure_finite("h1", h1)?;
        ensure_finite("h0", h0)?;
        Ok(Self { family: Family::Bernoulli, h1, h0, base_sigma1: BERNOULLI_SIGMA, base_sigma0: BERNOULLI_SIGMA })
    }

    /// Places `gap` at the least-favorable location.
    pub fn at_gap(family: Family, gap: f64, sigma1: f64, sigma0: f64) -> Result<Self> {
        Self::place(family, gap, sigma1, sigma0, Placement::LeastFavorable)
    }

    /// Places `h₁ - h₀ = gap` as described by `placement`.
    pub fn place(family: Family, gap: f64, sigma1: f64, sigma0: f64, placement: Placement) -> Result<Self> {
        let (s1, s0) = match family {
            Family::Gaussian => (sigma1, sigma0),
            Family::Bernoulli => (BERNOULLI_SIGMA, BERNOULLI_SIGMA),
        };
        ensure_positive("sigma1", s1)?;
        ensure_positive("sigma0", s0)?;
        let w = placement.arm1_share(s1, s0)?;
        let (h1, h0) = (w * gap, -(1.0 - w) * gap);
        match family {
            Family::Gaussian => Self::gaussian(h1, h0, s1, s0),
            Family::Bernoulli => Self::bernoulli(h1, h0),
        }
    }

    pub fn sigmas(&self) -> (f64, f64) {
        (self.base_sigma1, self.base_sigma0)
    }

    /// Checks that a Bernoulli success probability stays in `[0, 1]` at budget `n`.
    pub fn validate_for(&self, n: u64) -> Result<()> {
        if self.family == Family::Bernoulli {
            let root = (n as f64).sqrt();
            for (name, h) in [("h1", self.h1), ("h0", self.h0)] {
                if h.abs() / root > 0.5 {
                    return Err(Error::domain(format!(
                        "{name}/sqrt(n) = {} leaves a Bernoulli success probability outside [0, 1]",
                        h / root
                    )));
                }
            }
        }
        Ok(())
    }

    /// Source of outcomes at budget `n` drawing from `rng`.
    pub fn source<'a>(&self, n: u64, rng: &'a mut ReplicationRng) -> LocalSource<'a> {
        let root = (n as f64).sqrt();
        LocalSource { env: *self, mean1: self.h1 / root, mean0: self.h0 / root, rng }
    }
}

/// Anything that can produce the next outcome of a chosen arm.
pub trait OutcomeSource {
    fn draw(&mut self, arm: Arm) -> f64;
}

/// Outcomes of a [`LocalEnvironment`] at a fixed budget.
pub struct LocalSource<'a> {
    env: LocalEnvironment,
    mean1: f64,
    mean0: f64,
    rng: &'a mut ReplicationRng,
}

impl OutcomeSource for LocalSource<'_> {
    fn draw(&mut self, arm: Arm) -> f64 {
        let (mean, sigma) = match arm {
            Arm::One => (self.mean1, self.env.base_sigma1),
            Arm::Zero => (self.mean0, self.env.base_sigma0),
        };
        match self.env.family {
            Family::Gaussian => {
                let z: f64 = self.rng.sample(StandardNormal);
                mean + sigma * z
            }
            Family::Bernoulli => {
                let success = self.rng.random::<f64>() < 0.5 + mean;
                if success {
                    0.5
                } else {
                    -0.5
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub n: u64,
    pub policy: PolicySpec,
    pub replications: u64,
    pub master_seed: u64,
}

impl TrialConfig {
    pub fn new(n: u64, policy: PolicySpec, replications: u64, master_seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("budget n must be at least 2, got {n}")));
        }
        if replications < 2 {
            return Err(Error::domain("a trial needs at least two replications"));
        }
        Ok(Self { n, policy, replications, master_seed })
    }
}

/// Result of one simulated experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub decision: Arm,
    /// `n^{-1/2} Σ Y` per arm.
    pub x1: f64,
    pub x0: f64,
    pub n1: u64,
    pub n0: u64,
    /// Standard deviations used by the terminal rule.
    pub decision_sigmas: (f64, f64),
}

/// Pilot length `ceil(n^ρ)` for the two-stage rule.
pub fn pilot_length(n: u64, rho: f64) -> u64 {
    ((n as f64).powf(rho).ceil() as u64).min(n)
}

/// Checks the preconditions of a policy at budget `n`.
pub fn validate_policy_for(policy: &PolicySpec, n: u64) -> Result<()> {
    if let SamplingRule::TwoStage { rho } = policy.sampling {
        let pilot = pilot_length(n, rho);
        if pilot < 4 {
            return Err(Error::usage(format!(
                "two-stage pilot of ceil({n}^{rho}) = {pilot} periods is too small; need at least 4"
            )));
        }
    }
    Ok(())
}

fn plug_in_sigmas(moments: &[RunningMoments; 2]) -> Option<(f64, f64)> {
    match (moments[1].std_dev(), moments[0].std_dev()) {
        (Some(s1), Some(s0)) if s1 > 0.0 && s0 > 0.0 => Some((s1, s0)),
        _ => None,
    }
}

/// Runs one experiment of `n` periods.
///
/// Period `i` (1-based) samples arm 1 exactly when `q₁ < γ i`, where `q₁`
/// counts earlier arm-1 periods and `γ` is the current target fraction. The
/// target is fixed for constant rules, 1/2 during a two-stage pilot and the
/// plug-in Neyman fraction afterwards; adaptive rules refresh it every
/// `batch` periods. Plug-in rules fall back to an equal split (and unit
/// weights in the terminal rule) when an estimated standard deviation is 0.
pub fn run_experiment<S: OutcomeSource>(
    n: u64,
    policy: &PolicySpec,
    known_sigmas: (f64, f64),
    source: &mut S,
) -> Result<ExperimentOutcome> {
    if n < 2 {
        return Err(Error::domain(format!("budget n must be at least 2, got {n}")));
    }
    validate_policy_for(policy, n)?;

    let mut sums = [0.0f64; 2];
    let mut counts = [0u64; 2];
    let mut moments = [RunningMoments::default(); 2];
    let mut pilot_sigmas = None;

    let (mut gamma, pilot, batch) = match policy.sampling {
        SamplingRule::FixedFraction { gamma } => (gamma, None, None),
        SamplingRule::EqualSplit => (0.5, None, None),
        SamplingRule::TwoStage { rho } => (0.5, Some(pilot_length(n, rho)), None),
        SamplingRule::AdaptivePlugIn { batch } => (0.5, None, Some(batch.max(1) as u64)),
    };

    for i in 1..=n {
        if pilot == Some(i - 1) {
            pilot_sigmas = plug_in_sigmas(&moments);
            gamma = plug_in_fraction(pilot_sigmas);
        }
        if let Some(batch) = batch {
            if i > 1 && (i - 1) % batch == 0 {
                gamma = plug_in_fraction(plug_in_sigmas(&moments));
            }
        }
        let arm = if (counts[1] as f64) < gamma * i as f64 { Arm::One } else { Arm::Zero };
        let a = arm_index(arm);
        let y = source.draw(arm);
        sums[a] += y;
        counts[a] += 1;
        if pilot.is_none_or(|p| i <= p) || batch.is_some() {
            moments[a].push(y);
        }
    }

    let decision_sigmas = match policy.sampling {
        SamplingRule::FixedFraction { .. } | SamplingRule::EqualSplit => known_sigmas,
        SamplingRule::TwoStage { .. } => pilot_sigmas.unwrap_or((1.0, 1.0)),
        SamplingRule::AdaptivePlugIn { .. } => plug_in_sigmas(&moments).unwrap_or((1.0, 1.0)),
    };
    let root = (n as f64).sqrt();
    let (x1, x0) = (sums[1] / root, sums[0] / root);
    let statistic = standardized_difference(x1, x0, decision_sigmas.0, decision_sigmas.1);
    Ok(ExperimentOutcome {
        decision: decide(statistic, policy.threshold_c),
        x1,
        x0,
        n1: counts[1],
        n0: counts[0],
        decision_sigmas,
    })
}

fn arm_index(arm: Arm) -> usize {
    match arm {
        Arm::One => 1,
        Arm::Zero => 0,
    }
}

/// Monte Carlo estimate of `√n` times expected regret.
pub fn run_trial(env: &LocalEnvironment, config: &TrialConfig) -> Result<RegretEstimate> {
    TrialConfig::new(config.n, config.policy, config.replications, config.master_seed)?;
    env.validate_for(config.n)?;
    validate_policy_for(&config.policy, config.n)?;
    let scaled_gap = env.h1 - env.h0;
    let n = config.n;
    let policy = config.policy;
    let samples = map_replications(config.master_seed, config.replications, |rng| {
        let mut source = env.source(n, rng);
        let outcome = run_experiment(n, &policy, env.sigmas(), &mut source).expect("validated above");
        realized_regret(scaled_gap, outcome.decision)
    });
    RegretEstimate::from_samples(&samples)
}

/// Sample standard deviations of two pilot samples.
pub fn estimate_sigmas(pilot_arm1: &[f64], pilot_arm0: &[f64]) -> Result<(f64, f64)> {
    Ok((sample_std_dev(pilot_arm1)?, sample_std_dev(pilot_arm0)?))
}

/// Two-stage unknown-variance procedure with pilot exponent `rho`.
pub fn two_stage_trial(
    env: &LocalEnvironment,
    n: u64,
    rho: f64,
    replications: u64,
    seed: u64,
) -> Result<RegretEstimate> {
    let policy = PolicySpec::new(SamplingRule::two_stage(rho)?, 0.0)?;
    run_trial(env, &TrialConfig::new(n, policy, replications, seed)?)
}

/// One cell of a scaled-regret table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveCell {
    pub n: u64,
    pub gap: f64,
    pub h1: f64,
    pub h0: f64,
    pub estimate: RegretEstimate,
}

/// Largest scaled regret over the gap grid at one budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSup {
    pub n: u64,
    pub gap: f64,
    pub estimate: RegretEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve {
    /// Cells in `n`-major order.
    pub cells: Vec<CurveCell>,
    pub sup_by_n: Vec<GridSup>,
}

/// Scaled regret over `n_grid × gap_grid`, gaps placed by `placement`.
///
/// All cells share `seed`, so a replication index draws from the same stream
/// in every cell.
#[allow(clippy::too_many_arguments)]
pub fn scaled_regret_curve(
    family: Family,
    sigmas: (f64, f64),
    placement: Placement,
    policy: &PolicySpec,
    gap_grid: &[f64],
    n_grid: &[u64],
    replications: u64,
    seed: u64,
) -> Result<RegretCurve> {
    if gap_grid.is_empty() || n_grid.is_empty() {
        return Err(Error::domain("gap and n grids must be nonempty"));
    }
    let mut cells = Vec::with_capacity(gap_grid.len() * n_grid.len());
    let mut sup_by_n = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let config = TrialConfig::new(n, *policy, replications, seed)?;
        let mut sup: Option<GridSup> = None;
        for &gap in gap_grid {
            let env = LocalEnvironment::place(family, gap, sigmas.0, sigmas.1, placement)?;
            let estimate = run_trial(&env, &config)?;
            cells.push(CurveCell { n, gap, h1: env.h1, h0: env.h0, estimate });
            if sup.is_none_or(|s| estimate.mean > s.estimate.mean) {
                sup = Some(GridSup { n, gap, estimate });
            }
        }
        sup_by_n.extend(sup);
    }
    Ok(RegretCurve { cells, sup_by_n })
}
