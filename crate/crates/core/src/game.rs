//! The zero-sum game between the agent and nature.
//!
//! The agent picks a sampling fraction γ and a threshold c; nature picks mean
//! rewards (or a prior over them). Nature's response is unbounded unless
//! `γ/σ₁ = (1-γ)/σ₀`, and the agent is indifferent among sampling rules under
//! the symmetric two-point priors `(σ₁Δ/2, -σ₀Δ/2)`, `(-σ₁Δ/2, σ₀Δ/2)`.
//! [`solve_equilibrium`] recovers the saddle point numerically from these
//! best responses and reports how exploitable it is on a verification grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{exact_terminal_draw, Environment};
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::optimize::{bisect_decreasing, golden_section_min};
use crate::policy::{bayes_threshold_c, threshold_decision, MeanPair, TwoPointPrior};
use crate::regret::{max_gap_regret, max_regret_at_neyman, realized_regret, regret_unchecked, RegretEstimate};
use crate::seed::map_replications;

/// Magnitude of the best arm's mean, in units of the gap, along divergence probes.
pub const PROBE_MAGNITUDE: f64 = 10.0;

/// Probe depth used when nature's response is unbounded.
pub const PROBE_LEVELS: u32 = 5;

/// A fraction within this distance of the balanced fraction counts as balanced.
pub const BALANCE_TOLERANCE: f64 = 1e-8;

/// `γ/σ₁ - (1-γ)/σ₀`: positive when arm 1 is oversampled relative to its noise.
pub fn balance_deviation(gamma: f64, sigma1: f64, sigma0: f64) -> f64 {
    gamma / sigma1 - (1.0 - gamma) / sigma0
}

/// Distance from `gamma` to the unique balanced fraction, recovered from the deviation.
fn distance_to_balance(gamma: f64, sigma1: f64, sigma0: f64) -> f64 {
    balance_deviation(gamma, sigma1, sigma0).abs() / (1.0 / sigma1 + 1.0 / sigma0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NatureSide {
    /// Arm 1 best.
    Theta1,
    /// Arm 0 best.
    Theta0,
    /// Regret can be made arbitrarily large.
    Unbounded,
}

/// Nature's best response to a threshold policy `(γ, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NatureResponse {
    pub side: NatureSide,
    /// Gap `|ã - b̃|` nature chooses (last probe gap when unbounded).
    pub gap: f64,
    /// Regret attained (last probe value when unbounded).
    pub value: f64,
    /// Per-branch maxima; absent when unbounded.
    pub theta1_value: Option<f64>,
    pub theta0_value: Option<f64>,
}

/// Nature's best response. At the balanced fraction the regret of a gap δ is
/// `δ Φ(±c - δ/(σ₁+σ₀))` wherever the means sit; elsewhere it diverges and a
/// finite witness from [`divergence_probe`] is reported.
pub fn nature_best_response(gamma: f64, c: f64, sigma1: f64, sigma0: f64) -> Result<NatureResponse> {
    validate_game_args(gamma, c, sigma1, sigma0)?;
    if distance_to_balance(gamma, sigma1, sigma0) > BALANCE_TOLERANCE {
        let probe = divergence_probe(gamma, c, sigma1, sigma0, PROBE_LEVELS)?;
        return Ok(NatureResponse {
            side: NatureSide::Unbounded,
            gap: PROBE_LEVELS as f64,
            value: *probe.last().expect("levels > 0"),
            theta1_value: None,
            theta0_value: None,
        });
    }
    let r = max_regret_at_neyman(c, sigma1, sigma0)?;
    let side = if r.plus_value >= r.minus_value { NatureSide::Theta1 } else { NatureSide::Theta0 };
    Ok(NatureResponse {
        side,
        gap: r.argmax_delta,
        value: r.value,
        theta1_value: Some(r.plus_value),
        theta0_value: Some(r.minus_value),
    })
}

fn validate_game_args(gamma: f64, c: f64, sigma1: f64, sigma0: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::domain(format!("sampling fraction must lie in [0, 1], got {gamma}")));
    }
    ensure_finite("c", c)?;
    ensure_positive("sigma1", sigma1)?;
    ensure_positive("sigma0", sigma0)
}

/// Means used at probe level `k`: the best arm sits at `-M k`, the other arm `k` below it.
fn probe_point(k: f64, arm1_best: bool) -> MeanPair {
    let best = -PROBE_MAGNITUDE * k;
    if arm1_best {
        MeanPair { mu1: best, mu0: best - k }
    } else {
        MeanPair { mu1: best - k, mu0: best }
    }
}

/// Regret along gaps `k = 1..=levels` placed where an unbalanced fraction hurts.
///
/// When arm 1 is oversampled (`γ/σ₁ > (1-γ)/σ₀`) nature makes arm 1 best with
/// a large negative mean, which drags the standardized statistic below any
/// threshold; the mirrored construction handles undersampling.
pub fn divergence_probe(gamma: f64, c: f64, sigma1: f64, sigma0: f64, levels: u32) -> Result<Vec<f64>> {
    validate_game_args(gamma, c, sigma1, sigma0)?;
    if levels == 0 {
        return Err(Error::domain("a divergence probe needs at least one level"));
    }
    if distance_to_balance(gamma, sigma1, sigma0) <= BALANCE_TOLERANCE {
        return Err(Error::usage("regret is bounded at the balanced fraction; nothing to probe"));
    }
    let arm1_best = balance_deviation(gamma, sigma1, sigma0) > 0.0;
    Ok((1..=levels)
        .map(|k| {
            let p = probe_point(k as f64, arm1_best);
            let env = Environment { mu1: p.mu1, mu0: p.mu0, sigma1, sigma0 };
            regret_unchecked(gamma, c, &env)
        })
        .collect())
}

/// Prior-weighted regret of `(γ, c)`.
pub fn bayes_regret(prior: &TwoPointPrior, gamma: f64, c: f64, sigma1: f64, sigma0: f64) -> f64 {
    let at = |p: MeanPair| regret_unchecked(gamma, c, &Environment { mu1: p.mu1, mu0: p.mu0, sigma1, sigma0 });
    prior.m1 * at(prior.state1) + (1.0 - prior.m1) * at(prior.state0)
}

/// One row of the agent's best-response table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentResponseRow {
    pub gamma: f64,
    /// Closed-form Bayes regret at the Bayes threshold.
    pub bayes_regret: f64,
    /// Threshold on the supplied grid with the smallest Bayes regret.
    pub best_grid_c: f64,
    pub best_grid_regret: f64,
    /// Simulated Bayes regret at the Bayes threshold, when replications were requested.
    pub monte_carlo: Option<RegretEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub rows: Vec<AgentResponseRow>,
    /// Bayes-optimal threshold `Δ⁻¹ ln((1-m₁)/m₁)`.
    pub c_opt: f64,
    /// Spread `max - min` of the closed-form Bayes regret across the γ grid.
    pub flatness: f64,
}

/// The agent's response to an indifference prior: Bayes regret for each
/// sampling fraction, which should not depend on γ at all.
///
/// With `replications >= 2` each row also carries a simulated Bayes regret
/// (common random numbers across rows).
pub fn agent_best_response(
    prior: &TwoPointPrior,
    sigma1: f64,
    sigma0: f64,
    gamma_grid: &[f64],
    c_grid: &[f64],
    replications: u64,
    seed: u64,
) -> Result<AgentResponse> {
    ensure_positive("sigma1", sigma1)?;
    ensure_positive("sigma0", sigma0)?;
    prior.validate()?;
    let delta = prior
        .indifference_delta(sigma1, sigma0)
        .ok_or_else(|| Error::usage("agent best response is only defined for indifference priors"))?;
    if gamma_grid.is_empty() || c_grid.is_empty() {
        return Err(Error::domain("gamma and c grids must be nonempty"));
    }
    if let Some(g) = gamma_grid.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(Error::domain(format!("sampling fraction must lie in [0, 1], got {g}")));
    }
    if let Some(c) = c_grid.iter().find(|c| !c.is_finite()) {
        return Err(Error::domain(format!("threshold must be finite, got {c}")));
    }
    let c_opt = bayes_threshold_c(delta, prior.m1)?;

    let rows = gamma_grid
        .iter()
        .map(|&gamma| {
            let (best_grid_c, best_grid_regret) = c_grid
                .iter()
                .map(|&c| (c, bayes_regret(prior, gamma, c, sigma1, sigma0)))
                .fold((f64::NAN, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
            let monte_carlo = if replications >= 2 {
                Some(simulate_bayes_regret(prior, gamma, c_opt, sigma1, sigma0, replications, seed)?)
            } else {
                None
            };
            Ok(AgentResponseRow {
                gamma,
                bayes_regret: bayes_regret(prior, gamma, c_opt, sigma1, sigma0),
                best_grid_c,
                best_grid_regret,
                monte_carlo,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (lo, hi) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.bayes_regret), hi.max(r.bayes_regret)));
    Ok(AgentResponse { rows, c_opt, flatness: hi - lo })
}

fn simulate_bayes_regret(
    prior: &TwoPointPrior,
    gamma: f64,
    c: f64,
    sigma1: f64,
    sigma0: f64,
    replications: u64,
    seed: u64,
) -> Result<RegretEstimate> {
    use rand::Rng;
    let samples = map_replications(seed, replications, |rng| {
        let point = if rng.random::<f64>() < prior.m1 { prior.state1 } else { prior.state0 };
        let env = Environment { mu1: point.mu1, mu0: point.mu0, sigma1, sigma0 };
        let state = exact_terminal_draw(&env, gamma, rng);
        realized_regret(env.gap(), threshold_decision(&state, sigma1, sigma0, c))
    });
    RegretEstimate::from_samples(&samples)
}

/// Numerical residuals of an equilibrium solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResiduals {
    /// `γ*/σ₁ - (1-γ*)/σ₀`.
    pub balance: f64,
    /// Derivative of nature's objective at the reported gap.
    pub first_order: f64,
    /// Best improvement nature finds on the verification grid.
    pub nature_gain: f64,
    /// Best improvement the agent finds on the verification grid.
    pub agent_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub sigma1: f64,
    pub sigma0: f64,
    pub gamma_star: f64,
    pub c_star: f64,
    /// Nature's optimal gap.
    pub eta_star: f64,
    /// Separation Δ* of the least-favorable prior.
    pub delta_prior_star: f64,
    pub v_star: f64,
    /// Least-favorable prior.
    pub lfp: TwoPointPrior,
    /// `max(nature_gain, agent_gain)`.
    pub exploitability: f64,
    pub tolerance: f64,
    pub residuals: EquilibriumResiduals,
}

impl EquilibriumSolution {
    pub fn within_tolerance(&self) -> bool {
        self.exploitability <= self.tolerance
    }
}

/// Grid sizes used to certify an equilibrium.
pub const VERIFY_GAMMA_POINTS: usize = 21;
pub const VERIFY_C_POINTS: usize = 21;
pub const VERIFY_DELTA_POINTS: usize = 201;

/// Solves the game for `(σ₁, σ₀)`.
///
/// 1. γ*: bisection on the sign of `γ/σ₁ - (1-γ)/σ₀`, the only fraction at
///    which neither of nature's branches diverges.
/// 2. c*: golden-section minimisation of nature's best-response value over c.
/// 3. η*, V*: nature's best response to `(γ*, c*)`; `Δ* = 2η*/(σ₁+σ₀)`.
/// 4. Exploitability: best unilateral improvement on fixed verification grids.
pub fn solve_equilibrium(sigma1: f64, sigma0: f64, tolerance: f64) -> Result<EquilibriumSolution> {
    ensure_positive("sigma1", sigma1)?;
    ensure_positive("sigma0", sigma0)?;
    ensure_positive("tolerance", tolerance)?;
    let inner_tol = tolerance.min(1e-10);

    // The deviation rises from -1/σ₀ at γ=0 to 1/σ₁ at γ=1.
    let gamma_star = bisect_decreasing(|g| -balance_deviation(g, sigma1, sigma0), 0.0, 1.0, inner_tol);

    let worst = |c: f64| {
        let scale = sigma1 + sigma0;
        max_gap_regret(c, scale).1.max(max_gap_regret(-c, scale).1)
    };
    let c_star = golden_section_min(worst, -2.0, 2.0, inner_tol);

    let response = nature_best_response(gamma_star, c_star, sigma1, sigma0)?;
    if response.side == NatureSide::Unbounded {
        return Err(Error::domain("balanced fraction not recovered; nature's response is unbounded"));
    }
    let scale = sigma1 + sigma0;
    let eta_star = response.gap;
    let v_star = response.value;
    let delta_prior_star = 2.0 * eta_star / scale;
    let lfp = TwoPointPrior::indifference(sigma1, sigma0, delta_prior_star, 0.5)?;

    let first_order = {
        use crate::normal::{cdf, pdf};
        let shift = if response.side == NatureSide::Theta1 { c_star } else { -c_star };
        let u = shift - eta_star / scale;
        cdf(u) - (eta_star / scale) * pdf(u)
    };

    let nature_gain = nature_grid_gain(gamma_star, c_star, sigma1, sigma0, v_star);
    let agent_gain = agent_grid_gain(&lfp, gamma_star, c_star, sigma1, sigma0);

    Ok(EquilibriumSolution {
        sigma1,
        sigma0,
        gamma_star,
        c_star,
        eta_star,
        delta_prior_star,
        v_star,
        lfp,
        exploitability: nature_gain.max(agent_gain),
        tolerance,
        residuals: EquilibriumResiduals {
            balance: balance_deviation(gamma_star, sigma1, sigma0),
            first_order,
            nature_gain,
            agent_gain,
        },
    })
}

/// Largest regret nature finds against `(γ, c)` on gaps in `(0, 4(σ₁+σ₀)]`,
/// beyond `value`. Each gap is tried at three locations per branch to check
/// that only the gap matters at the balanced fraction.
fn nature_grid_gain(gamma: f64, c: f64, sigma1: f64, sigma0: f64, value: f64) -> f64 {
    let scale = sigma1 + sigma0;
    let upper = 4.0 * scale;
    let best = (1..=VERIFY_DELTA_POINTS)
        .into_par_iter()
        .map(|i| {
            let gap = upper * i as f64 / VERIFY_DELTA_POINTS as f64;
            let mut worst: f64 = 0.0;
            for centre in [-gap, 0.0, gap] {
                for (mu1, mu0) in [(centre + gap / 2.0, centre - gap / 2.0), (centre - gap / 2.0, centre + gap / 2.0)] {
                    let env = Environment { mu1, mu0, sigma1, sigma0 };
                    worst = worst.max(regret_unchecked(gamma, c, &env));
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    (best - value).max(0.0)
}

/// Largest reduction in Bayes regret under `prior` the agent finds on the
/// `(γ, c)` verification grid.
fn agent_grid_gain(prior: &TwoPointPrior, gamma: f64, c: f64, sigma1: f64, sigma0: f64) -> f64 {
    let current = bayes_regret(prior, gamma, c, sigma1, sigma0);
    let g_lo = (gamma - 0.1).max(0.0);
    let g_hi = (gamma + 0.1).min(1.0);
    let best = (0..VERIFY_GAMMA_POINTS)
        .into_par_iter()
        .map(|i| {
            let g = g_lo + (g_hi - g_lo) * i as f64 / (VERIFY_GAMMA_POINTS - 1) as f64;
            (0..VERIFY_C_POINTS)
                .map(|j| -1.0 + 2.0 * j as f64 / (VERIFY_C_POINTS - 1) as f64)
                .map(|c| bayes_regret(prior, g, c, sigma1, sigma0))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    (current - best).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::{solve_delta_star, v_star};
    use crate::policy::neyman_gamma;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nature_response_at_neyman() {
        let r = nature_best_response(0.5, 0.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(r.gap, 1.503_583_049_387_129, epsilon = 1e-8);
        assert_abs_diff_eq!(r.value, 0.339_942_414_959_807_3, epsilon = 1e-12);
        assert_eq!(r.theta1_value, r.theta0_value);
        assert_eq!(r.side, NatureSide::Theta1);
    }

    #[test]
    fn nature_response_off_neyman_is_unbounded() {
        let r = nature_best_response(0.6, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(r.side, NatureSide::Unbounded);
        assert!(r.value > v_star(1.0, 1.0).unwrap());
    }

    #[test]
    fn probes_increase_past_v_star() {
        let v = v_star(1.0, 1.0).unwrap();
        for gamma in [0.8, 0.2] {
            let seq = divergence_probe(gamma, 0.0, 1.0, 1.0, 5).unwrap();
            assert!(seq.windows(2).all(|w| w[1] > w[0]), "{seq:?}");
            assert!(*seq.last().unwrap() > v);
        }
        let err = divergence_probe(0.5, 0.0, 1.0, 1.0, 5).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn probe_construction_is_bounded_at_neyman() {
        // At γ* the probe points collapse to Eq.-(8)-type values δ Φ(c - δ/(σ₁+σ₀)).
        for (s1, s0, c) in [(1.0, 1.0, 0.0), (2.0, 1.0, 0.3), (1.0, 5.0, -0.2)] {
            let gamma = neyman_gamma(s1, s0).unwrap();
            let bound = max_regret_at_neyman(c, s1, s0).unwrap().value;
            for k in 1..=5 {
                let p = probe_point(k as f64, true);
                let r = regret_unchecked(gamma, c, &Environment { mu1: p.mu1, mu0: p.mu0, sigma1: s1, sigma0: s0 });
                let expected = k as f64 * crate::normal::cdf(c - k as f64 / (s1 + s0));
                assert_abs_diff_eq!(r, expected, epsilon = 1e-12);
                assert!(r <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn deviation_penalty_grows() {
        for (s1, s0) in [(1.0, 1.0), (2.0, 1.0)] {
            let gstar = neyman_gamma(s1, s0).unwrap();
            let v = v_star(s1, s0).unwrap();
            for d in [-0.1, -0.05, 0.05, 0.1] {
                let seq = divergence_probe(gstar + d, 0.0, s1, s0, 5).unwrap();
                assert!(seq.windows(2).all(|w| w[1] > w[0]));
                assert!(seq[4] > v, "gamma {} gives {seq:?}", gstar + d);
            }
        }
    }

    #[test]
    fn agent_is_indifferent_under_lfp() {
        let d = 2.0 * solve_delta_star(1e-12).unwrap().delta_star;
        let prior = TwoPointPrior::indifference(1.0, 1.0, d, 0.5).unwrap();
        let c_grid = [-1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0];
        let resp = agent_best_response(&prior, 1.0, 1.0, &[0.3, 0.5, 0.7], &c_grid, 0, 0).unwrap();
        assert_eq!(resp.c_opt, 0.0);
        assert!(resp.flatness <= 1e-10);
        assert!(resp.rows.iter().all(|r| r.best_grid_c == 0.0));
    }

    #[test]
    fn agent_threshold_tracks_prior_mass() {
        let prior = TwoPointPrior::indifference(1.0, 1.0, 1.0, 0.75).unwrap();
        let resp = agent_best_response(&prior, 1.0, 1.0, &[0.5], &[0.0], 0, 0).unwrap();
        assert_abs_diff_eq!(resp.c_opt, (1.0f64 / 3.0).ln(), epsilon = 1e-12);
    }

    #[test]
    fn agent_rejects_non_indifference_prior() {
        let prior = TwoPointPrior::new(MeanPair { mu1: 1.0, mu0: 0.0 }, MeanPair { mu1: 0.0, mu0: 1.0 }, 0.5).unwrap();
        let err = agent_best_response(&prior, 1.0, 1.0, &[0.5], &[0.0], 0, 0).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn simulated_bayes_regret_is_flat_too() {
        let prior = TwoPointPrior::indifference(2.0, 1.0, 1.5, 0.5).unwrap();
        let resp = agent_best_response(&prior, 2.0, 1.0, &[0.3, 0.7], &[0.0], 40_000, 4).unwrap();
        for row in &resp.rows {
            let mc = row.monte_carlo.unwrap();
            assert!((mc.mean - row.bayes_regret).abs() <= 3.5 * mc.std_error);
        }
    }

    #[test]
    fn equilibrium_examples() {
        let sol = solve_equilibrium(1.0, 1.0, 1e-9).unwrap();
        assert_eq!(sol.gamma_star, 0.5);
        assert!(sol.c_star.abs() <= 1e-6);
        assert_abs_diff_eq!(sol.delta_prior_star, 1.503_583_049_387_129, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.v_star, 0.339_942_414_959_807_3, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.lfp.state1.mu1, 0.7518, epsilon = 1e-4);
        assert_abs_diff_eq!(sol.lfp.state0.mu0, 0.7518, epsilon = 1e-4);
        assert_eq!(sol.lfp.m1, 0.5);

        let sol = solve_equilibrium(2.0, 1.0, 1e-9).unwrap();
        assert_abs_diff_eq!(sol.gamma_star, 2.0 / 3.0, epsilon = 1e-9);

        for (s1, s0) in [(1.0, 1.0), (2.0, 1.0), (1.0, 5.0)] {
            let sol = solve_equilibrium(s1, s0, 1e-9).unwrap();
            assert!(sol.within_tolerance(), "{sol:?}");
            assert_abs_diff_eq!(sol.v_star, v_star(s1, s0).unwrap(), epsilon = 1e-8);
        }
    }

    #[test]
    fn nature_value_matches_v_star_at_eta() {
        let sol = solve_equilibrium(0.3, 0.7, 1e-9).unwrap();
        let scale = 1.0;
        let at_eta = sol.eta_star * crate::normal::cdf(-sol.eta_star / scale);
        assert_abs_diff_eq!(at_eta, sol.v_star, epsilon = 1e-9);
        for d in [-0.05, 0.05] {
            let eta = sol.eta_star + d;
            assert!(eta * crate::normal::cdf(-eta / scale) < sol.v_star);
        }
    }
}
