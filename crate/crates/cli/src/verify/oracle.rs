//! Reference computations that share no code with the production solvers.

use std::f64::consts::PI;

pub fn density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Beyond this point the series loses relative accuracy to cancellation.
const TAIL: f64 = 2.0;

/// Standard normal CDF: power series near the centre, continued fraction in the tails.
pub fn cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < -TAIL {
        density(x) * mills_ratio(-x)
    } else if x > TAIL {
        1.0 - density(x) * mills_ratio(x)
    } else {
        // Φ(x) = 1/2 + φ(x) Σ x^{2k+1}/(2k+1)!!
        let mut term = x;
        let mut sum = x;
        let mut k = 1.0;
        while term.abs() > 1e-17 * sum.abs().max(1e-300) {
            term *= x * x / (2.0 * k + 1.0);
            sum += term;
            k += 1.0;
        }
        0.5 + density(x) * sum
    }
}

/// `(1 - Φ(x))/φ(x)` for `x > 0` by the Laplace continued fraction, evaluated with Lentz's method.
fn mills_ratio(x: f64) -> f64 {
    // R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...))))
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..10_000 {
        let a = k as f64;
        d = x + a * d;
        d = if d.abs() < tiny { 1.0 / tiny } else { 1.0 / d };
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        let step = c * d;
        f *= step;
        if (step - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// Root of `Φ(-δ) = δ φ(δ)` on `[0, 3]` by plain bisection.
pub fn delta_star_bisection() -> f64 {
    let slope = |d: f64| cdf(-d) - d * density(d);
    let (mut lo, mut hi) = (0.0_f64, 3.0_f64);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Maximizer and maximum of `δ Φ(-δ)` over `{0, step, 2 step, ...} ∩ [0, hi]`.
pub fn delta_star_grid(step: f64, hi: f64) -> (f64, f64) {
    let points = (hi / step).round() as u64;
    (0..=points)
        .map(|i| {
            let d = i as f64 * step;
            (d, d * cdf(-d))
        })
        .fold((0.0, f64::NEG_INFINITY), |best, p| if p.1 > best.1 { p } else { best })
}

/// `(σ₁+σ₀) δ* Φ(-δ*)`.
pub fn value(sigma1: f64, sigma0: f64) -> f64 {
    let d = delta_star_bisection();
    (sigma1 + sigma0) * d * cdf(-d)
}

/// Expected regret of `I{x₁/σ₁ - x₀/σ₀ ≥ c}` when arm 1 is sampled a fraction `gamma` of the time.
pub fn threshold_regret(gamma: f64, c: f64, mu1: f64, mu0: f64, sigma1: f64, sigma0: f64) -> f64 {
    let gap = mu1 - mu0;
    // x₁/σ₁ - x₀/σ₀ ~ N(m, 1)
    let m = mu1 * gamma / sigma1 - mu0 * (1.0 - gamma) / sigma0;
    let p_arm1 = 1.0 - cdf(c - m);
    gap.max(0.0) - gap * p_arm1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        // mpmath, 30 digits
        let cases = [
            (0.0, 0.5),
            (1.0, 0.841344746068542948585232545632),
            (-1.96, 0.0249978951482204341365842690408),
            (-0.75179, 0.226088678326929217268374697274),
            (3.0, 0.998650101968369905473348185232),
            (-5.9, 1.81750786309943237136193466009e-9),
            (-6.1, 5.30342326294882973732872680085e-10),
            (-10.0, 7.6198530241605260659733432516e-24),
            (-30.0, 4.90671392714818705953380925658e-198),
            (7.0, 0.999999999998720187456114164996),
            (-2.01, 0.0222155944294314747624313643144),
            (-2.5, 0.00620966532577613516697810457419),
            (2.5, 0.993790334674223864833021895426),
        ];
        for (x, expected) in cases {
            let got = cdf(x);
            let rel = ((got - expected) / expected).abs();
            assert!(rel < 1e-13, "Φ({x}) = {got:e}, expected {expected:e}");
        }
    }

    #[test]
    fn branches_meet() {
        for x in [-TAIL, TAIL] {
            let below = cdf(x - 1e-12);
            let above = cdf(x + 1e-12);
            assert!((above - below).abs() / below < 1e-10);
        }
    }

    #[test]
    fn delta_star_reference() {
        let d = delta_star_bisection();
        assert!((d - 0.751791524693564).abs() < 1e-12, "{d}");
        let (g, v) = delta_star_grid(1e-3, 3.0);
        assert!((g - 0.752).abs() < 1e-12);
        assert!((v - d * cdf(-d)).abs() < 1e-6);
    }

    #[test]
    fn regret_limits() {
        assert_eq!(threshold_regret(0.5, 0.0, 1.0, 1.0, 1.0, 1.0), 0.0);
        assert!((threshold_regret(0.5, 0.0, 100.0, 0.0, 1.0, 1.0)).abs() < 1e-12);
        assert!((threshold_regret(0.5, 0.0, 0.0, 100.0, 1.0, 1.0)).abs() < 1e-12);
    }
}
