//! Deterministic consistency checks between closed forms, brute-force
//! enumeration, and the numeric routines.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::census::{census, CensusOptions};
use crate::enumeration::{
    complex_upper_bound, count_connected_oracle, count_forests, count_trees, count_unicyclic,
    expected_components, minimal_complex_constant, BipartiteShape, OracleBudget,
};
use crate::error::Result;
use crate::logreal::BigCount;
use crate::numeric::{epsilon_prime, epsilon_prime_residual, sprinkle_probability, verify_gaussian_sum};
use crate::sampler::GraphSample;

/// Outcome of one check, with a one-line human summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfTestLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl SelfTestLine {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        SelfTestLine { name: name.to_string(), passed, detail }
    }
}

/// Closed-form tree and unicyclic counts against exhaustive enumeration for
/// all `i + j ≤ max_order`, and `F(i,j,1,0) = C(i,j,−1)` for `i, j ≤ forest_max`.
pub fn oracle_equivalence(max_order: u64, forest_max: u64) -> Result<SelfTestLine> {
    let budget = OracleBudget::default();
    let mut mismatches = Vec::new();
    let mut shapes = 0;
    for i in 1..max_order {
        for j in 1..=max_order - i {
            let k = i + j;
            shapes += 1;
            if count_connected_oracle(i, j, k - 1, &budget)? != count_trees(i, j)? {
                mismatches.push(format!("trees({i},{j})"));
            }
            let cycles = if k <= i * j {
                count_connected_oracle(i, j, k, &budget)?
            } else {
                BigCount::zero()
            };
            if cycles != count_unicyclic(i, j) {
                mismatches.push(format!("unicyclic({i},{j})"));
            }
        }
    }
    for i in 1..=forest_max {
        for j in 1..=forest_max {
            if count_forests(i, j, 1, 0)? != count_trees(i, j)? {
                mismatches.push(format!("forest({i},{j},1,0)"));
            }
        }
    }
    let detail = if mismatches.is_empty() {
        format!("{shapes} class pairs, forests up to {forest_max}x{forest_max}")
    } else {
        format!("mismatches: {}", mismatches.join(", "))
    };
    Ok(SelfTestLine::new("oracle_equivalence", mismatches.is_empty(), detail))
}

/// Minimal constant of the complex-component bound for one shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexConstant {
    pub i: u64,
    pub j: u64,
    pub ell: i64,
    pub minimal_c: f64,
}

/// For every balanced `(i, j, ℓ)` with `i + j ≤ max_order` and `1 ≤ ℓ ≤ 3`,
/// the smallest `c` with `C(i,j,ℓ) ≤ bound(c)`; passes when one `c ≤ c_max`
/// covers them all.
pub fn complex_bound_sanity(max_order: u64, c_max: f64) -> Result<(SelfTestLine, Vec<ComplexConstant>)> {
    let budget = OracleBudget::default();
    let mut constants = Vec::new();
    for i in 1..max_order {
        for j in 1..=max_order - i {
            if 2 * i < j || 2 * j < i {
                continue;
            }
            for ell in 1..=3i64 {
                if ell > (i * j) as i64 - (i + j) as i64 {
                    continue;
                }
                let count = count_connected_oracle(i, j, (i + j) as u64 + ell as u64, &budget)?;
                let minimal_c = minimal_complex_constant(i, j, ell, &count)?;
                constants.push(ComplexConstant { i, j, ell, minimal_c });
            }
        }
    }
    let worst = constants.iter().map(|c| c.minimal_c).fold(0.0, f64::max);
    let mut dominated = true;
    for c in &constants {
        let count = count_connected_oracle(c.i, c.j, c.i + c.j + c.ell as u64, &budget)?;
        let bound = complex_upper_bound(c.i, c.j, c.ell, worst * (1.0 + 1e-12))?;
        dominated &= count.ln() <= bound.ln() + 1e-12;
    }
    let line = SelfTestLine::new(
        "complex_bound_sanity",
        dominated && worst <= c_max,
        format!("minimal c = {worst:.6} over {} shapes (limit {c_max})", constants.len()),
    );
    Ok((line, constants))
}

/// Largest deviation between `E X(i,j,ℓ)` and the probability-weighted census
/// over all `2^{n²}` graphs, for `n ≤ 3`.
pub fn exhaustive_expectation_error(n: u64, p: f64) -> Result<f64> {
    assert!(n <= 3, "exhaustive check is limited to n <= 3");
    let slots = n * n;
    let mut observed: BTreeMap<(u64, u64, i64), f64> = BTreeMap::new();
    for mask in 0u64..(1 << slots) {
        let present: Vec<u64> = (0..slots).filter(|s| mask >> s & 1 == 1).collect();
        let m = present.len() as i32;
        let weight = p.powi(m) * (1.0 - p).powi(slots as i32 - m);
        let g = GraphSample::from_slots(n, &present)?;
        let mut opts = CensusOptions::new(n, 1.0);
        opts.order_cap = 2 * n;
        for (&shape, &count) in &census(&g, opts).shape_map {
            *observed.entry(shape).or_default() += weight * count as f64;
        }
    }
    let budget = OracleBudget::default();
    let mut worst: f64 = 0.0;
    for i in 0..=n {
        for j in 0..=n {
            for ell in -1..=(i * j) as i64 {
                let Ok(shape) = BipartiteShape::new(i, j, ell) else { continue };
                let count = if i == 0 || j == 0 {
                    BigCount::from(1)
                } else {
                    count_connected_oracle(i, j, shape.edges(), &budget)?
                };
                let expected = expected_components(n, p, &shape, &count.to_log_real())?.to_f64();
                let seen = observed.get(&(i, j, ell)).copied().unwrap_or(0.0);
                worst = worst.max((expected - seen).abs());
            }
        }
    }
    Ok(worst)
}

pub fn exhaustive_expectation(tolerance: f64) -> Result<SelfTestLine> {
    let mut errors = Vec::new();
    for p in [0.25, 0.5, 0.75] {
        errors.push(exhaustive_expectation_error(2, p)?);
    }
    let worst = errors.iter().copied().fold(0.0, f64::max);
    Ok(SelfTestLine::new(
        "exhaustive_expectation",
        worst <= tolerance,
        format!("max |E X - census| = {worst:.3e} at n = 2, p in {{0.25, 0.5, 0.75}}"),
    ))
}

/// Residual and small-`ε` expansion of the ε′ solver on a log grid over
/// `[10⁻³, 0.3]`.
pub fn eps_prime_solver() -> Result<SelfTestLine> {
    let points = 200;
    let mut worst_residual: f64 = 0.0;
    let mut expansion_ok = true;
    for t in 0..=points {
        let eps = 1e-3 * 300f64.powf(t as f64 / points as f64);
        let ep = epsilon_prime(eps)?;
        worst_residual = worst_residual.max(epsilon_prime_residual(eps, ep).abs());
        expansion_ok &= (ep - (eps - 2.0 / 3.0 * eps * eps)).abs() <= eps.powi(3);
    }
    Ok(SelfTestLine::new(
        "eps_prime_solver",
        worst_residual <= 1e-12 && expansion_ok,
        format!("max residual {worst_residual:.3e}, expansion within eps^3: {expansion_ok}"),
    ))
}

pub fn gaussian_sum() -> Result<SelfTestLine> {
    let flat = verify_gaussian_sum(10_000, 9_999, 0, 1_000_000_000)?;
    let weighted = verify_gaussian_sum(10_000, 9_999, 1, 1_000_000_000)?;
    Ok(SelfTestLine::new(
        "gaussian_sum",
        (flat.ratio - 1.0).abs() <= 0.01 && (weighted.ratio - 1.0).abs() <= 0.05,
        format!("ratio m=0: {:.6}, m=1: {:.6}", flat.ratio, weighted.ratio),
    ))
}

/// `1 − (1−p₁)(1−q) = p₂` on a grid of probability pairs.
pub fn sprinkle_algebra() -> Result<SelfTestLine> {
    let mut worst: f64 = 0.0;
    for a in 0..=20 {
        for b in a..=20 {
            let (p1, p2) = (a as f64 / 20.0 * 0.999, b as f64 / 20.0 * 0.999);
            let q = sprinkle_probability(p1, p2)?;
            worst = worst.max((1.0 - (1.0 - p1) * (1.0 - q) - p2).abs());
        }
    }
    Ok(SelfTestLine::new(
        "sprinkle_algebra",
        worst <= 4.0 * f64::EPSILON,
        format!("max identity error {worst:.3e}"),
    ))
}

/// Every check above at its default size.
pub fn run_all() -> Result<Vec<SelfTestLine>> {
    Ok(vec![
        oracle_equivalence(8, 6)?,
        complex_bound_sanity(8, 100.0)?.0,
        exhaustive_expectation(1e-12)?,
        eps_prime_solver()?,
        gaussian_sum()?,
        sprinkle_algebra()?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_oracle_sweep_passes() {
        assert!(oracle_equivalence(6, 4).unwrap().passed);
    }

    #[test]
    fn exhaustive_n3_matches() {
        assert!(exhaustive_expectation_error(3, 0.3).unwrap() < 1e-12);
    }

    #[test]
    fn algebra_and_solver() {
        assert!(sprinkle_algebra().unwrap().passed);
        assert!(eps_prime_solver().unwrap().passed);
    }
}
