//! Sampling rules, implementation rules and two-point priors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diffusion::ExperimentState;
use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// One of the two treatments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
}

impl Arm {
    /// 1 for arm 1, 0 for arm 0.
    pub fn indicator(self) -> f64 {
        match self {
            Arm::One => 1.0,
            Arm::Zero => 0.0,
        }
    }
}

/// How attention is split between the two arms during the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingRule {
    /// Arm 1 receives a constant fraction `gamma` of the budget.
    FixedFraction { gamma: f64 },
    /// `FixedFraction { gamma: 0.5 }` under its own name.
    EqualSplit,
    /// Equal-split pilot of `ceil(n^rho)` periods, then plug-in Neyman.
    TwoStage { rho: f64 },
    /// Re-estimates both standard deviations every `batch` observations and
    /// re-targets the Neyman fraction.
    AdaptivePlugIn { batch: u32 },
}

impl SamplingRule {
    pub fn fixed(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::domain(format!("sampling fraction must lie in [0, 1], got {gamma}")));
        }
        Ok(SamplingRule::FixedFraction { gamma })
    }

    pub fn two_stage(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::domain(format!("pilot exponent rho must lie in (0, 1), got {rho}")));
        }
        Ok(SamplingRule::TwoStage { rho })
    }

    pub fn adaptive(batch: u32) -> Result<Self> {
        if batch == 0 {
            return Err(Error::domain("adaptive batch size must be positive"));
        }
        Ok(SamplingRule::AdaptivePlugIn { batch })
    }

    /// The sampling fraction when it does not depend on the data.
    pub fn constant_fraction(&self) -> Option<f64> {
        match *self {
            SamplingRule::FixedFraction { gamma } => Some(gamma),
            SamplingRule::EqualSplit => Some(0.5),
            SamplingRule::TwoStage { .. } | SamplingRule::AdaptivePlugIn { .. } => None,
        }
    }
}

/// A complete decision rule: sampling rule plus the threshold `c` of the
/// implementation rule `I{x₁/σ₁ - x₀/σ₀ ≥ c}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub sampling: SamplingRule,
    pub threshold_c: f64,
}

impl PolicySpec {
    pub fn new(sampling: SamplingRule, threshold_c: f64) -> Result<Self> {
        ensure_finite("threshold c", threshold_c)?;
        match sampling {
            SamplingRule::FixedFraction { gamma } => {
                SamplingRule::fixed(gamma)?;
            }
            SamplingRule::TwoStage { rho } => {
                SamplingRule::two_stage(rho)?;
            }
            SamplingRule::AdaptivePlugIn { batch } => {
                SamplingRule::adaptive(batch)?;
            }
            SamplingRule::EqualSplit => {}
        }
        Ok(Self { sampling, threshold_c })
    }

    /// Neyman fraction with the zero threshold.
    pub fn neyman(sigma1: f64, sigma0: f64) -> Result<Self> {
        Self::new(SamplingRule::fixed(neyman_gamma(sigma1, sigma0)?)?, 0.0)
    }

    pub fn equal_split() -> Self {
        Self { sampling: SamplingRule::EqualSplit, threshold_c: 0.0 }
    }
}

/// Policy names accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyName {
    Neyman,
    Equal,
    TwoStage,
    AdaptiveNeyman,
    Fixed(f64),
}

impl PolicyName {
    /// Builds the policy. `sigma1`/`sigma0` are only consulted by `neyman`.
    pub fn to_spec(self, sigma1: f64, sigma0: f64, rho: f64, batch: u32) -> Result<PolicySpec> {
        match self {
            PolicyName::Neyman => PolicySpec::neyman(sigma1, sigma0),
            PolicyName::Equal => Ok(PolicySpec::equal_split()),
            PolicyName::TwoStage => PolicySpec::new(SamplingRule::two_stage(rho)?, 0.0),
            PolicyName::AdaptiveNeyman => PolicySpec::new(SamplingRule::adaptive(batch)?, 0.0),
            PolicyName::Fixed(gamma) => PolicySpec::new(SamplingRule::fixed(gamma)?, 0.0),
        }
    }
}

impl FromStr for PolicyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neyman" => Ok(PolicyName::Neyman),
            "equal" => Ok(PolicyName::Equal),
            "two-stage" => Ok(PolicyName::TwoStage),
            "adaptive-neyman" => Ok(PolicyName::AdaptiveNeyman),
            other => {
                let gamma = other
                    .strip_prefix("fixed:")
                    .and_then(|g| g.parse::<f64>().ok())
                    .ok_or_else(|| Error::usage(format!("unknown policy `{other}`")))?;
                SamplingRule::fixed(gamma)?;
                Ok(PolicyName::Fixed(gamma))
            }
        }
    }
}

impl fmt::Display for PolicyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyName::Neyman => f.write_str("neyman"),
            PolicyName::Equal => f.write_str("equal"),
            PolicyName::TwoStage => f.write_str("two-stage"),
            PolicyName::AdaptiveNeyman => f.write_str("adaptive-neyman"),
            PolicyName::Fixed(g) => write!(f, "fixed:{g}"),
        }
    }
}

/// Mean rewards `(μ₁, μ₀)` in one state of nature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanPair {
    pub mu1: f64,
    pub mu0: f64,
}

/// Nature's two-point prior: `state1 = (a₁, b₁)` with arm 1 best, `state0 =
/// (a₀, b₀)` with arm 0 best, and `m1 = P(θ = 1)`.
///
/// Fields are public so degenerate priors can be built for testing the
/// likelihood ratio; [`TwoPointPrior::new`] enforces the invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointPrior {
    pub state1: MeanPair,
    pub state0: MeanPair,
    pub m1: f64,
}

impl TwoPointPrior {
    pub fn new(state1: MeanPair, state0: MeanPair, m1: f64) -> Result<Self> {
        let prior = Self { state1, state0, m1 };
        prior.validate()?;
        Ok(prior)
    }

    /// Support `(σ₁Δ/2, -σ₀Δ/2)` and `(-σ₁Δ/2, σ₀Δ/2)`.
    pub fn indifference(sigma1: f64, sigma0: f64, delta: f64, m1: f64) -> Result<Self> {
        ensure_positive("sigma1", sigma1)?;
        ensure_positive("sigma0", sigma0)?;
        ensure_positive("delta", delta)?;
        let half = 0.5 * delta;
        Self::new(
            MeanPair { mu1: sigma1 * half, mu0: -sigma0 * half },
            MeanPair { mu1: -sigma1 * half, mu0: sigma0 * half },
            m1,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let MeanPair { mu1: a1, mu0: b1 } = self.state1;
        let MeanPair { mu1: a0, mu0: b0 } = self.state0;
        if !(a1 > b1) {
            return Err(Error::domain(format!("state 1 must favour arm 1 (a1 > b1), got ({a1}, {b1})")));
        }
        if !(b0 > a0) {
            return Err(Error::domain(format!("state 0 must favour arm 0 (b0 > a0), got ({a0}, {b0})")));
        }
        if !(self.m1 > 0.0 && self.m1 < 1.0) {
            return Err(Error::domain(format!("prior mass m1 must lie in (0, 1), got {}", self.m1)));
        }
        Ok(())
    }

    /// The separation `Δ` when this is an indifference prior for `(σ₁, σ₀)`.
    pub fn indifference_delta(&self, sigma1: f64, sigma0: f64) -> Option<f64> {
        let delta = 2.0 * self.state1.mu1 / sigma1;
        if !(delta > 0.0) {
            return None;
        }
        let expected = [
            (self.state1.mu1, sigma1 * delta / 2.0),
            (self.state1.mu0, -sigma0 * delta / 2.0),
            (self.state0.mu1, -sigma1 * delta / 2.0),
            (self.state0.mu0, sigma0 * delta / 2.0),
        ];
        let scale = (sigma1 + sigma0) * delta;
        expected.iter().all(|(got, want)| (got - want).abs() <= 1e-12 * scale.max(1.0)).then_some(delta)
    }
}

/// Neyman fraction `σ₁ / (σ₁ + σ₀)`.
pub fn neyman_gamma(sigma1: f64, sigma0: f64) -> Result<f64> {
    ensure_positive("sigma1", sigma1)?;
    ensure_positive("sigma0", sigma0)?;
    Ok(sigma1 / (sigma1 + sigma0))
}

/// Standardized difference `x₁/σ₁ - x₀/σ₀`.
#[inline]
pub fn standardized_difference(x1: f64, x0: f64, sigma1: f64, sigma0: f64) -> f64 {
    x1 / sigma1 - x0 / sigma0
}

/// Implementation rule `I{x₁/σ₁ - x₀/σ₀ ≥ c}`; exact ties go to arm 1.
pub fn threshold_decision(state: &ExperimentState, sigma1: f64, sigma0: f64, c: f64) -> Arm {
    decide(standardized_difference(state.x1, state.x0, sigma1, sigma0), c)
}

#[inline]
pub(crate) fn decide(statistic: f64, c: f64) -> Arm {
    if statistic >= c {
        Arm::One
    } else {
        Arm::Zero
    }
}

/// Bayes implementation rule under a two-point prior.
pub fn bayes_decision(log_phi: f64, prior: &TwoPointPrior) -> Arm {
    let MeanPair { mu1: a1, mu0: b1 } = prior.state1;
    let MeanPair { mu1: a0, mu0: b0 } = prior.state0;
    let threshold = ((b0 - a0) * (1.0 - prior.m1) / ((a1 - b1) * prior.m1)).ln();
    decide(log_phi, threshold)
}

/// Threshold `c = Δ⁻¹ ln((1 - m₁)/m₁)` induced by an indifference prior.
pub fn bayes_threshold_c(delta: f64, m1: f64) -> Result<f64> {
    ensure_positive("delta", delta)?;
    if !(m1 > 0.0 && m1 < 1.0) {
        return Err(Error::domain(format!("prior mass m1 must lie in (0, 1), got {m1}")));
    }
    if m1 == 0.5 {
        return Ok(0.0);
    }
    Ok(((1.0 - m1) / m1).ln() / delta)
}
