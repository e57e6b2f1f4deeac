use bai_core::finite_sample::{
    run_trial, scaled_regret_curve, two_stage_trial, Family, LocalEnvironment, Placement, TrialConfig,
};
use bai_core::policy::{PolicySpec, SamplingRule};

const N: u64 = 10_000;

/// Φ by its power series, `1/2 + φ(x) Σ x^{2k+1}/(2k+1)!!`.
fn phi_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let mut k = 1.0;
    while term.abs() > 1e-18 * sum.abs() {
        term *= x * x / (2.0 * k + 1.0);
        sum += term;
        k += 1.0;
    }
    0.5 + sum * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn delta_star() -> f64 {
    let slope = |d: f64| phi_series(-d) - d * (-0.5 * d * d).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let (mut lo, mut hi) = (0.0, 3.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn value(s1: f64, s0: f64) -> f64 {
    let d = delta_star();
    (s1 + s0) * d * phi_series(-d)
}

/// Diffusion regret with arm-1 share `gamma` and threshold 0 on the standardized scale.
fn diffusion_regret(gamma: f64, h1: f64, h0: f64, s1: f64, s0: f64) -> f64 {
    let gap = h1 - h0;
    let drift = h1 * gamma / s1 - h0 * (1.0 - gamma) / s0;
    if gap >= 0.0 {
        gap * phi_series(-drift)
    } else {
        -gap * phi_series(drift)
    }
}

fn neyman(s1: f64, s0: f64) -> PolicySpec {
    PolicySpec::neyman(s1, s0).unwrap()
}

#[test]
fn gaussian_neyman_attains_value() {
    let v = value(1.0, 1.0);
    let env = LocalEnvironment::at_gap(Family::Gaussian, 2.0 * delta_star(), 1.0, 1.0).unwrap();
    let est = run_trial(&env, &TrialConfig::new(N, neyman(1.0, 1.0), 100_000, 11).unwrap()).unwrap();
    assert!((est.mean - v).abs() <= 0.05 * v, "{est:?} vs {v}");
    assert!((v - 0.33994).abs() < 1e-5);
}

#[test]
fn bernoulli_equal_split_attains_value() {
    let v = value(0.5, 0.5);
    assert!((v - 0.16997).abs() < 1e-5);
    let env = LocalEnvironment::at_gap(Family::Bernoulli, delta_star(), 0.5, 0.5).unwrap();
    let est = run_trial(&env, &TrialConfig::new(N, PolicySpec::equal_split(), 100_000, 12).unwrap()).unwrap();
    assert!((est.mean - v).abs() <= 0.07 * v, "{est:?} vs {v}");
}

#[test]
fn gaussian_cells_match_diffusion_closed_form() {
    // With deterministic rounding the Gaussian totals are exactly normal, so only Monte Carlo noise remains.
    let cases =
        [(0.3, 0.9, -0.4, 1.0, 2.0), (0.5, 2.0, 0.5, 1.5, 0.5), (0.8, -0.6, 0.2, 0.7, 0.7), (0.6, 0.0, 1.1, 1.0, 1.0)];
    for (i, (gamma, h1, h0, s1, s0)) in cases.into_iter().enumerate() {
        let policy = PolicySpec::new(SamplingRule::fixed(gamma).unwrap(), 0.0).unwrap();
        let env = LocalEnvironment::gaussian(h1, h0, s1, s0).unwrap();
        let est = run_trial(&env, &TrialConfig::new(1_000, policy, 40_000, 20 + i as u64).unwrap()).unwrap();
        let n1 = (gamma * 1_000.0_f64).ceil() / 1_000.0;
        let expected = diffusion_regret(n1, h1, h0, s1, s0);
        assert!((est.mean - expected).abs() <= 4.0 * est.std_error, "case {i}: {est:?} vs {expected}");
    }
}

#[test]
fn neyman_curve_peaks_at_least_favorable_gap() {
    let eta = 2.0 * delta_star();
    let gaps = [0.5 * eta, eta, 1.5 * eta, 2.0 * eta];
    let curve = scaled_regret_curve(
        Family::Gaussian,
        (1.0, 1.0),
        Placement::LeastFavorable,
        &neyman(1.0, 1.0),
        &gaps,
        &[N],
        20_000,
        13,
    )
    .unwrap();
    for cell in &curve.cells {
        let expected = cell.gap * phi_series(-cell.gap / 2.0);
        assert!((cell.estimate.mean - expected).abs() <= 4.0 * cell.estimate.std_error, "{cell:?} vs {expected}");
    }
    let sup = curve.sup_by_n[0];
    assert_eq!(sup.gap, eta);
    let v = value(1.0, 1.0);
    assert!((sup.estimate.mean - v).abs() <= 0.05 * v);
}

#[test]
fn equal_split_is_worse_than_neyman_under_unequal_variances() {
    let eta = 3.0 * delta_star();
    let gaps = [0.5 * eta, eta, 1.5 * eta, 2.0 * eta];
    // Only arm 1 moves, so an equal split under-samples the noisier arm.
    let placement = Placement::Weighted { w: 1.0 };
    let sup = |policy: PolicySpec| {
        scaled_regret_curve(Family::Gaussian, (2.0, 1.0), placement, &policy, &gaps, &[N], 10_000, 14).unwrap().sup_by_n
            [0]
    };
    let equal = sup(PolicySpec::equal_split());
    let ney = sup(neyman(2.0, 1.0));
    let closed_sup = |gamma: f64| gaps.iter().map(|&g| diffusion_regret(gamma, g, 0.0, 2.0, 1.0)).fold(0.0, f64::max);
    assert!(closed_sup(0.5) > closed_sup(2.0 / 3.0));
    let se = (equal.estimate.std_error.powi(2) + ney.estimate.std_error.powi(2)).sqrt();
    assert!(equal.estimate.mean - ney.estimate.mean > 3.0 * se, "{equal:?} vs {ney:?}");
}

#[test]
fn two_stage_tracks_known_variance_neyman() {
    let v = value(2.0, 1.0);
    assert!((v - 0.50991).abs() < 1e-5);
    let env = LocalEnvironment::at_gap(Family::Gaussian, 3.0 * delta_star(), 2.0, 1.0).unwrap();
    let reps = 20_000;
    let known = run_trial(&env, &TrialConfig::new(N, neyman(2.0, 1.0), reps, 15).unwrap()).unwrap();
    let plug_in = two_stage_trial(&env, N, 0.5, reps, 15).unwrap();
    assert!((known.mean - v).abs() <= 0.05 * v, "{known:?}");
    assert!((plug_in.mean - v).abs() <= 0.10 * v, "{plug_in:?}");
    let se = (known.std_error.powi(2) + plug_in.std_error.powi(2)).sqrt();
    assert!((plug_in.mean - known.mean).abs() <= 2.0 * se, "{plug_in:?} vs {known:?}");
}

#[test]
fn outcome_family_errors() {
    let env = LocalEnvironment::bernoulli(80.0, 0.0).unwrap();
    assert!(run_trial(&env, &TrialConfig::new(N, PolicySpec::equal_split(), 10, 1).unwrap()).is_err());
    assert!(TrialConfig::new(1, PolicySpec::equal_split(), 10, 1).is_err());
    assert!(two_stage_trial(&LocalEnvironment::gaussian(0.0, 0.0, 1.0, 1.0).unwrap(), 9, 0.5, 10, 1).is_err());
}
