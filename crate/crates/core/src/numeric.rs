//! Scalar quantities of the near-critical regime `p = (1+ε)/n`: the decay rate
//! δ, the dual parameter ε′, Poisson window intensities, order thresholds,
//! and the giant-component predictions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::{adaptive_simpson, exp_int_e1, CompensatedSum};

/// `n` vertices per class and the offset `ε` of `p = (1+ε)/n` from criticality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalParams {
    pub n: u64,
    pub eps: f64,
    pub p: f64,
}

impl CriticalParams {
    pub fn new(n: u64, eps: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("critical_params", "n must be positive"));
        }
        if !(eps > -1.0 && eps < 1.0) || eps == 0.0 {
            return Err(Error::domain(
                "critical_params",
                format!("eps must lie in (-1,1) \\ {{0}}, got {eps}"),
            ));
        }
        let p = (1.0 + eps) / n as f64;
        if p > 1.0 {
            return Err(Error::domain(
                "critical_params",
                format!("p = (1+eps)/n = {p} exceeds 1"),
            ));
        }
        Ok(Self { n, eps, p })
    }

    pub fn is_supercritical(&self) -> bool {
        self.eps > 0.0
    }

    /// `|ε|³ n`, the quantity every regime guard is phrased in.
    pub fn scaled_distance(&self) -> f64 {
        self.eps.abs().powi(3) * self.n as f64
    }
}

/// Quantities derived from a [`CriticalParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedScalars {
    pub delta: f64,
    /// Only defined above criticality.
    pub eps_prime: Option<f64>,
    pub giant_order_prediction: Option<f64>,
    pub giant_excess_prediction: Option<f64>,
}

impl DerivedScalars {
    pub fn compute(params: &CriticalParams) -> Result<Self> {
        let delta = delta(params.eps)?;
        if params.is_supercritical() && params.eps < 1.0 {
            Ok(Self {
                delta,
                eps_prime: Some(epsilon_prime(params.eps)?),
                giant_order_prediction: Some(giant_order_prediction(params.n, params.eps)?),
                giant_excess_prediction: Some(giant_excess_prediction(params.n, params.eps)?),
            })
        } else {
            Ok(Self {
                delta,
                eps_prime: None,
                giant_order_prediction: None,
                giant_excess_prediction: None,
            })
        }
    }
}

/// `δ = ε − ln(1+ε)`.
pub fn delta(eps: f64) -> Result<f64> {
    if !(eps > -1.0) || eps == 0.0 || !eps.is_finite() {
        return Err(Error::domain(
            "delta",
            format!("eps must satisfy eps > -1 and eps != 0, got {eps}"),
        ));
    }
    Ok(delta_unchecked(eps))
}

fn delta_unchecked(eps: f64) -> f64 {
    if eps.abs() < 0.01 {
        // Σ_{k≥2} (−1)^k ε^k / k; the direct difference cancels here.
        let mut acc = CompensatedSum::new();
        let mut pow = eps * eps;
        for k in 2..40 {
            let term = pow / k as f64;
            acc.add(if k % 2 == 0 { term } else { -term });
            pow *= eps;
            if term.abs() < 1e-22 {
                break;
            }
        }
        acc.value()
    } else {
        eps - eps.ln_1p()
    }
}

/// The `y ∈ (0,1)` with `(1−y)e^y = (1+ε)e^{−ε}`.
///
/// Bisection over `(0, 1 − 1e−15)` down to width `1e−14`. Taking logs turns
/// the equation into `δ(−y) = δ(ε)`, which is evaluated without cancellation;
/// the sign of the comparison is the sign of `(1−y)e^y − (1+ε)e^{−ε}`.
pub fn epsilon_prime(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(
            "epsilon_prime",
            format!("eps must lie in (0,1), got {eps}"),
        ));
    }
    let target = delta_unchecked(eps);
    let mut lo = 0.0f64;
    let mut hi = 1.0 - 1e-15;
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        // f(mid) > 0  ⇔  δ(−mid) < δ(ε)
        if delta_unchecked(-mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `(1−y)e^y − (1+ε)e^{−ε}`, the residual the ε′ solver drives to zero.
pub fn epsilon_prime_residual(eps: f64, y: f64) -> f64 {
    (1.0 - y) * y.exp() - (1.0 + eps) * (-eps).exp()
}

/// Poisson intensity for tree components in the window indexed by `[r1, r2]`:
/// `(e^{−r1} − e^{−r2}) / √π`. `r2` may be `+∞`.
pub fn poisson_lambda(r1: f64, r2: f64) -> Result<f64> {
    if r1.is_nan() || r2.is_nan() || r1 > r2 || r1 < 0.0 {
        return Err(Error::domain(
            "poisson_lambda",
            format!("require 0 <= r1 <= r2, got r1 = {r1}, r2 = {r2}"),
        ));
    }
    Ok(((-r1).exp() - (-r2).exp()) / std::f64::consts::PI.sqrt())
}

/// Poisson intensity for unicyclic components with orders in `[u1/δ, u2/δ]`:
/// `½ ∫_{u1}^{u2} e^{−t}/t dt`. `u2` may be `+∞`.
pub fn poisson_nu(u1: f64, u2: f64) -> Result<f64> {
    if u1.is_nan() || u2.is_nan() || u1 > u2 || u1 <= 0.0 {
        return Err(Error::domain(
            "poisson_nu",
            format!("require 0 < u1 <= u2, got u1 = {u1}, u2 = {u2}"),
        ));
    }
    if u1 == u2 {
        return Ok(0.0);
    }
    let via_e1 = 0.5 * (exp_int_e1(u1) - exp_int_e1(u2));
    let via_quad = poisson_nu_quadrature(u1, u2);
    if (via_e1 - via_quad).abs() > 1e-9 {
        return Ok(via_quad);
    }
    Ok(via_e1)
}

/// Independent quadrature route for [`poisson_nu`].
pub fn poisson_nu_quadrature(u1: f64, u2: f64) -> f64 {
    let f = |t: f64| (-t).exp() / t;
    // e^{-t}/t < 1e-30 beyond u1 + 70
    let upper = u2.min(u1 + 70.0);
    let mut acc = CompensatedSum::new();
    // Split so that the steep region near small u1 gets its own panels.
    let mut a = u1;
    while a < upper {
        let b = (a * 2.0).max(a + 0.5).min(upper);
        acc.add(adaptive_simpson(&f, a, b, 1e-14));
        a = b;
    }
    0.5 * acc.value()
}

/// `(1/δ)·(ln(|ε|³n) − (5/2)·ln ln(|ε|³n) + α)`.
pub fn tree_order_threshold(n: u64, eps: f64, alpha: f64) -> Result<f64> {
    let d = delta(eps)?;
    let x = eps.abs().powi(3) * n as f64;
    if !(x > std::f64::consts::E) {
        return Err(Error::domain(
            "tree_order_threshold",
            format!("|eps|^3 n = {x} must exceed e"),
        ));
    }
    Ok((x.ln() - 2.5 * x.ln().ln() + alpha) / d)
}

/// Predicted order of the largest component, `2(ε+ε′)n/(1+ε)`.
pub fn giant_order_prediction(n: u64, eps: f64) -> Result<f64> {
    let ep = epsilon_prime(eps)?;
    Ok(2.0 * (eps + ep) * n as f64 / (1.0 + eps))
}

/// Predicted excess of the largest component, `(4/3)ε³n`.
pub fn giant_excess_prediction(n: u64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::domain(
            "giant_excess_prediction",
            format!("eps must be positive, got {eps}"),
        ));
    }
    Ok(4.0 / 3.0 * eps.powi(3) * n as f64)
}

/// Predicted number of vertices outside the giant, `2(1−ε′)n/(1+ε)`.
pub fn small_tree_vertices_prediction(n: u64, eps: f64) -> Result<f64> {
    let ep = epsilon_prime(eps)?;
    Ok(2.0 * (1.0 - ep) * n as f64 / (1.0 + eps))
}

/// Predicted growth of the giant's excess when `ε` moves from `eps_i` to
/// `eps_next`: `(ε_i+ε′_i)² n (ε_{i+1}−ε_i) / (1+ε_i)²`.
pub fn excess_increment_prediction(n: u64, eps_i: f64, eps_next: f64) -> Result<f64> {
    let ep = epsilon_prime(eps_i)?;
    let ratio = (eps_i + ep) / (1.0 + eps_i);
    Ok(ratio * ratio * n as f64 * (eps_next - eps_i))
}

/// Exact sum, its `√(π/2)·k^{1/2−2m}` approximation, and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianSumCheck {
    pub exact_sum: f64,
    pub asymptotic: f64,
    pub ratio: f64,
}

/// Sums `(k²−d²)^{−m} ((k−d)/(k+d))^d exp(−d²/2n)` over `|d| ≤ L` and compares
/// with `√(π/2) k^{1/2−2m}`.
pub fn verify_gaussian_sum(k: u64, l: u64, m: u32, n: u64) -> Result<GaussianSumCheck> {
    if l >= k {
        return Err(Error::domain(
            "verify_gaussian_sum",
            format!("need L < k, got L = {l}, k = {k}"),
        ));
    }
    if k > n || l == 0 {
        return Err(Error::domain(
            "verify_gaussian_sum",
            format!("need 1 <= L, L + 1 <= k <= n; got L = {l}, k = {k}, n = {n}"),
        ));
    }
    let kf = k as f64;
    let nf = n as f64;
    let mf = m as f64;
    let mut acc = CompensatedSum::new();
    for d in -(l as i64)..=(l as i64) {
        let df = d as f64;
        // ln((k−d)/(k+d)) = ln1p(−2d/(k+d))
        let log_ratio = (-2.0 * df / (kf + df)).ln_1p();
        let log_term =
            -mf * ((kf - df).ln() + (kf + df).ln()) + df * log_ratio - df * df / (2.0 * nf);
        acc.add(log_term.exp());
    }
    let exact_sum = acc.value();
    let asymptotic = (std::f64::consts::PI / 2.0).sqrt() * kf.powf(0.5 - 2.0 * mf);
    Ok(GaussianSumCheck {
        exact_sum,
        asymptotic,
        ratio: exact_sum / asymptotic,
    })
}

/// Edge probability `q` of the independent round that lifts `G(p1)` to
/// `G(p2)`: `(p2 − p1)/(1 − p1)`.
pub fn sprinkle_probability(p1: f64, p2: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p1) || !(0.0..=1.0).contains(&p2) {
        return Err(Error::domain(
            "sprinkle_probability",
            format!("probabilities must lie in [0,1], got p1 = {p1}, p2 = {p2}"),
        ));
    }
    if p1 > p2 {
        return Err(Error::domain(
            "sprinkle_probability",
            format!("p1 = {p1} exceeds p2 = {p2}"),
        ));
    }
    if p1 >= 1.0 {
        return Err(Error::domain("sprinkle_probability", "p1 must be below 1"));
    }
    Ok(((p2 - p1) / (1.0 - p1)).clamp(0.0, 1.0))
}

/// Largest integer `m` with `m³ ≤ n²`, i.e. `⌊n^{2/3}⌋` without rounding error.
pub fn floor_two_thirds(n: u64) -> u64 {
    let target = (n as u128) * (n as u128);
    let mut m = (n as f64).powf(2.0 / 3.0).floor() as u128;
    while m * m * m > target {
        m -= 1;
    }
    while (m + 1) * (m + 1) * (m + 1) <= target {
        m += 1;
    }
    m as u64
}

/// `⌈n^{2/3}⌉`.
pub fn ceil_two_thirds(n: u64) -> u64 {
    let f = floor_two_thirds(n) as u128;
    if f * f * f == (n as u128) * (n as u128) {
        f as u64
    } else {
        f as u64 + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Plain bisection on `(1−y)e^y − (1+ε)e^{−ε}` with no log transform.
    fn eps_prime_oracle(eps: f64) -> f64 {
        let f = |y: f64| (1.0 - y) * y.exp() - (1.0 + eps) * (-eps).exp();
        let (mut lo, mut hi) = (1e-300, eps);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn delta_values() {
        // 0.05 − ln 1.05 and −0.05 − ln 0.95, 40-digit evaluations
        assert_abs_diff_eq!(delta(0.05).unwrap(), 0.001_209_835_830_567_997, epsilon = 1e-15);
        assert_abs_diff_eq!(delta(-0.05).unwrap(), 0.001_293_294_387_550_534, epsilon = 1e-15);
        assert!(delta(-0.05).unwrap() > delta(0.05).unwrap());
        assert!(delta(1e-9).unwrap() < 1e-17);
    }

    #[test]
    fn delta_domain() {
        assert!(delta(0.0).is_err());
        assert!(delta(-1.0).is_err());
        assert!(delta(-1.5).is_err());
        assert!(delta(f64::NAN).is_err());
    }

    #[test]
    fn delta_series_branch_is_continuous() {
        let below = delta(0.009_999_999).unwrap();
        let above = delta(0.010_000_001).unwrap();
        assert!(above > below);
        assert_abs_diff_eq!(delta(0.01).unwrap(), 0.01 - 0.01f64.ln_1p(), epsilon = 1e-16);
    }

    #[test]
    fn delta_invariant_band() {
        for step in 1..500 {
            let eps = step as f64 * 0.001;
            let d = delta(eps).unwrap();
            let half_sq = eps * eps / 2.0;
            assert!(d < half_sq, "eps = {eps}");
            assert!(d > 0.9 * half_sq * (1.0 - eps), "eps = {eps}");
        }
        let ratios: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&e| delta(e).unwrap() / (e * e / 2.0))
            .collect();
        for w in ratios.windows(2) {
            assert!((w[1] - 1.0).abs() < (w[0] - 1.0).abs());
        }
    }

    #[test]
    fn eps_prime_examples() {
        assert_abs_diff_eq!(epsilon_prime(0.05).unwrap(), 0.048388, epsilon = 1e-5);
        assert_abs_diff_eq!(epsilon_prime(0.05).unwrap(), eps_prime_oracle(0.05), epsilon = 1e-12);
        let e2 = epsilon_prime(0.2).unwrap();
        assert_abs_diff_eq!(e2, 0.2 - 2.0 / 3.0 * 0.04, epsilon = 0.004);
        assert_abs_diff_eq!(e2, eps_prime_oracle(0.2), epsilon = 1e-12);
        assert!(epsilon_prime(1e-6).unwrap() < 1.1e-6);
    }

    #[test]
    fn eps_prime_domain() {
        assert!(epsilon_prime(0.0).is_err());
        assert!(epsilon_prime(-0.1).is_err());
        assert!(epsilon_prime(1.0).is_err());
    }

    #[test]
    fn eps_prime_expansion_constant() {
        // the worst ratio |ε′ − (ε − 2ε²/3)| / ε³ over the grid stays under 1
        let mut worst: f64 = 0.0;
        for step in 1..=300 {
            let eps = step as f64 * 0.001;
            let y = epsilon_prime(eps).unwrap();
            worst = worst.max((y - (eps - 2.0 / 3.0 * eps * eps)).abs() / eps.powi(3));
        }
        assert!(worst <= 1.0, "worst constant {worst}");
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(poisson_lambda(0.7, 0.7).unwrap(), 0.0);
        assert_abs_diff_eq!(
            poisson_lambda(0.0, f64::INFINITY).unwrap(),
            0.564_189_583_547_756_3,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(poisson_lambda(0.0, 1.0).unwrap(), 0.356_635_834_837_459, epsilon = 1e-12);
        assert!(poisson_lambda(1.0, 0.5).is_err());
    }

    #[test]
    fn nu_examples() {
        assert_eq!(poisson_nu(1.3, 1.3).unwrap(), 0.0);
        assert_abs_diff_eq!(poisson_nu(1.0, 2.0).unwrap(), 0.085_241_711_843_729_58, epsilon = 1e-12);
        assert_abs_diff_eq!(
            poisson_nu(1.0, f64::INFINITY).unwrap(),
            0.109_691_967_197_760_1,
            epsilon = 1e-12
        );
        assert!(poisson_nu(2.0, 1.0).is_err());
        assert!(poisson_nu(0.0, 1.0).is_err());
    }

    #[test]
    fn nu_routes_agree() {
        for &(a, b) in &[(0.01, 0.02), (0.1, 3.0), (1.0, 2.0), (2.5, 40.0)] {
            let e1 = 0.5 * (exp_int_e1(a) - exp_int_e1(b));
            assert_abs_diff_eq!(e1, poisson_nu_quadrature(a, b), epsilon = 1e-10);
        }
    }

    #[test]
    fn threshold_examples() {
        let t = tree_order_threshold(1_000_000, 0.05, 0.0).unwrap();
        assert_abs_diff_eq!(t, 737.3, epsilon = 0.5);
        let t1 = tree_order_threshold(1_000_000, 0.05, 1.0).unwrap();
        let t3 = tree_order_threshold(1_000_000, 0.05, 3.0).unwrap();
        assert_abs_diff_eq!(t3 - t1, 2.0 / delta(0.05).unwrap(), epsilon = 1e-9);
        // (ln 125 − 2.5 ln ln 125) / δ(−0.05)
        let tm = tree_order_threshold(1_000_000, -0.05, 0.0).unwrap();
        assert_abs_diff_eq!(tm, 689.766, epsilon = 0.01);
        assert!(tree_order_threshold(10, 0.05, 0.0).is_err());
    }

    #[test]
    fn giant_predictions() {
        let g = giant_order_prediction(1_000_000, 0.05).unwrap();
        assert_abs_diff_eq!(g, 187_406.0, epsilon = 20.0);
        let tiny = giant_order_prediction(1_000_000, 1e-6).unwrap();
        assert!(tiny < 5.0);
        let ratio = giant_order_prediction(1_000_000_000, 1e-4).unwrap() / (4.0 * 1e-4 * 1e9);
        assert_abs_diff_eq!(ratio, 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(giant_excess_prediction(10_000_000, 0.05).unwrap(), 1666.667, epsilon = 1e-3);
        assert_abs_diff_eq!(giant_excess_prediction(1_000_000, 0.05).unwrap(), 166.6667, epsilon = 1e-4);
        let a = giant_excess_prediction(1000, 0.01).unwrap();
        let b = giant_excess_prediction(1000, 0.02).unwrap();
        assert_abs_diff_eq!(b / a, 8.0, epsilon = 1e-12);
        assert!(giant_excess_prediction(1000, -0.1).is_err());
        assert!(giant_order_prediction(1000, -0.1).is_err());
    }

    #[test]
    fn gaussian_sum_examples() {
        let c = verify_gaussian_sum(10_000, 9_999, 0, 1_000_000_000).unwrap();
        assert_abs_diff_eq!(c.asymptotic, 125.3314, epsilon = 1e-4);
        assert!((c.ratio - 1.0).abs() < 0.01, "ratio {}", c.ratio);
        let c = verify_gaussian_sum(100, 99, 0, 1_000_000_000).unwrap();
        assert!((c.ratio - 1.0).abs() < 0.1, "ratio {}", c.ratio);
        assert!(verify_gaussian_sum(100, 100, 0, 1000).is_err());
    }

    #[test]
    fn gaussian_sum_summand_symmetry() {
        let k = 37.0f64;
        for d in 1..37 {
            let d = d as f64;
            let lhs = ((k - d) / (k + d)).powf(d);
            let rhs = ((k + d) / (k - d)).powf(-d);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12 * lhs.max(1e-300));
        }
    }

    #[test]
    fn gaussian_sum_converges() {
        let errs: Vec<f64> = [100u64, 1000, 10_000]
            .iter()
            .map(|&k| (verify_gaussian_sum(k, k - 1, 0, k * k * k).unwrap().ratio - 1.0).abs())
            .collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    }

    #[test]
    fn sprinkle_examples() {
        assert_eq!(sprinkle_probability(0.3, 0.3).unwrap(), 0.0);
        let q = sprinkle_probability(0.4, 0.5).unwrap();
        assert_abs_diff_eq!(q, 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(0.4 + 0.6 * q, 0.5, epsilon = 1e-15);
        assert_eq!(sprinkle_probability(0.0, 0.37).unwrap(), 0.37);
        assert!(sprinkle_probability(0.5, 0.4).is_err());
        assert!(sprinkle_probability(1.0, 1.0).is_err());
    }

    #[test]
    fn two_thirds_powers() {
        assert_eq!(floor_two_thirds(1_000_000), 10_000);
        assert_eq!(ceil_two_thirds(1_000_000), 10_000);
        assert_eq!(floor_two_thirds(100_000), 2154);
        assert_eq!(ceil_two_thirds(100_000), 2155);
        assert_eq!(floor_two_thirds(8), 4);
        assert_eq!(floor_two_thirds(1), 1);
    }

    #[test]
    fn critical_params_validation() {
        let c = CriticalParams::new(1000, 0.1).unwrap();
        assert!((c.p - 1.1e-3).abs() < 1e-18);
        assert!(c.is_supercritical());
        assert!(CriticalParams::new(1, 0.5).is_err());
        assert!(CriticalParams::new(10, 0.0).is_err());
        let d = DerivedScalars::compute(&CriticalParams::new(1000, -0.1).unwrap()).unwrap();
        assert!(d.eps_prime.is_none() && d.delta > 0.0);
    }

    proptest! {
        #[test]
        fn eps_prime_residual_small(eps in 1e-3f64..0.3) {
            let y = epsilon_prime(eps).unwrap();
            prop_assert!(epsilon_prime_residual(eps, y).abs() <= 1e-12);
            prop_assert!(y > 0.0 && y < eps);
        }

        #[test]
        fn windows_are_additive(a in 0.01f64..3.0, b in 0.0f64..3.0, c in 0.0f64..3.0) {
            let (r1, r2, r3) = (a, a + b, a + b + c);
            let l = poisson_lambda(r1, r2).unwrap() + poisson_lambda(r2, r3).unwrap();
            prop_assert!((l - poisson_lambda(r1, r3).unwrap()).abs() <= 1e-12);
            let v = poisson_nu(r1, r2).unwrap() + poisson_nu(r2, r3).unwrap();
            prop_assert!((v - poisson_nu(r1, r3).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn sprinkle_composes(p1 in 0.0f64..0.99, extra in 0.0f64..1.0) {
            let p2 = p1 + (1.0 - p1) * extra * 0.999;
            let q = sprinkle_probability(p1, p2).unwrap();
            prop_assert!((p1 + (1.0 - p1) * q - p2).abs() < 1e-14);
        }
    }
}
