//! Exact counts of labelled connected bipartite graphs by class sizes and
//! excess, rooted bipartite forests, and the expected number of components of
//! a given shape in `G(n,n,p)`.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::logreal::{BigCount, LogReal};
use crate::special::ln_binomial;

/// Class sizes `i`, `j` and excess `ell` of a connected bipartite graph with
/// `i + j + ell` edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BipartiteShape {
    pub i: u64,
    pub j: u64,
    pub ell: i64,
}

impl BipartiteShape {
    /// A lone vertex is the only admissible shape with an empty class.
    pub fn new(i: u64, j: u64, ell: i64) -> Result<Self> {
        if i + j == 0 {
            return Err(Error::domain("shape", "a component needs at least one vertex"));
        }
        if ell < -1 {
            return Err(Error::domain("shape", format!("excess {ell} below -1")));
        }
        let edges = (i + j) as i128 + ell as i128;
        if edges > (i as i128) * (j as i128) {
            return Err(Error::domain(
                "shape",
                format!("{edges} edges exceed the {i}x{j} complete bipartite graph"),
            ));
        }
        Ok(Self { i, j, ell })
    }

    pub fn order(&self) -> u64 {
        self.i + self.j
    }

    pub fn edges(&self) -> u64 {
        (self.order() as i64 + self.ell) as u64
    }
}

fn pow_u(base: u64, exp: u64) -> BigUint {
    BigUint::from(base).pow(exp as u32)
}

/// `(n)_i = n (n−1) ⋯ (n−i+1)`.
pub fn falling_factorial(n: u64, i: u64) -> Result<BigCount> {
    if i > n {
        return Err(Error::domain(
            "falling_factorial",
            format!("i = {i} exceeds n = {n}"),
        ));
    }
    Ok(BigCount((0..i).fold(BigUint::one(), |acc, q| acc * (n - q))))
}

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> BigCount {
    if k > n {
        return BigCount::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for q in 0..k {
        acc = acc * (n - q) / (q + 1);
    }
    BigCount(acc)
}

/// Spanning trees of `K_{i,j}`: `i^{j−1} j^{i−1}`.
pub fn count_trees(i: u64, j: u64) -> Result<BigCount> {
    if i == 0 || j == 0 {
        return Err(Error::domain("count_trees", "both classes must be nonempty"));
    }
    Ok(BigCount(pow_u(i, j - 1) * pow_u(j, i - 1)))
}

/// Spanning forests of `K_{i,j}` with `s + t` trees in which the first `s`
/// left and first `t` right vertices lie in distinct trees:
/// `i^{j−t−1} j^{i−s−1} (sj + ti − st)`.
///
/// A `−1` exponent (when `t = j` or `s = i`) cancels exactly against the
/// trailing factor.
pub fn count_forests(i: u64, j: u64, s: u64, t: u64) -> Result<BigCount> {
    if s > i || t > j {
        return Err(Error::domain(
            "count_forests",
            format!("roots (s, t) = ({s}, {t}) exceed classes ({i}, {j})"),
        ));
    }
    if s + t == 0 {
        return Err(Error::domain("count_forests", "at least one root is required"));
    }
    let mut factor = BigUint::from(s * j + t * i - s * t);
    let mut value = BigUint::one();
    if t == j {
        // sj + ji − sj = ij, divisible by i
        let (q, r) = factor.div_rem(&BigUint::from(i));
        debug_assert!(r.is_zero());
        factor = q;
    } else {
        value *= pow_u(i, j - t - 1);
    }
    if s == i {
        let (q, r) = factor.div_rem(&BigUint::from(j));
        debug_assert!(r.is_zero());
        factor = q;
    } else {
        value *= pow_u(j, i - s - 1);
    }
    Ok(BigCount(value * factor))
}

/// Connected unicyclic bipartite graphs on classes of sizes `i`, `j`:
/// `½ i^{j−1} j^{i−1} Σ_{r=2}^{min(i,j)} (i)_r (j)_r / (i^r j^r) · (i+j−r)`.
///
/// Evaluated in exact rationals; the result is checked to be an integer.
pub fn count_unicyclic(i: u64, j: u64) -> BigCount {
    if i.min(j) < 2 {
        return BigCount::zero();
    }
    let ij = BigInt::from(i) * BigInt::from(j);
    let mut sum = BigRational::zero();
    // running (i)_r (j)_r and (ij)^r
    let mut falling = BigInt::from(i) * BigInt::from(j);
    let mut power = ij.clone();
    for r in 2..=i.min(j) {
        falling *= BigInt::from(i - r + 1) * BigInt::from(j - r + 1);
        power *= &ij;
        sum += BigRational::new(&falling * BigInt::from(i + j - r), power.clone());
    }
    let prefix = BigInt::from(pow_u(i, j - 1) * pow_u(j, i - 1));
    let total = sum * BigRational::from_integer(prefix) / BigRational::from_integer(BigInt::from(2));
    assert!(
        total.is_integer() && !total.is_negative(),
        "unicyclic count for ({i}, {j}) is not a nonnegative integer"
    );
    BigCount(total.to_integer().to_biguint().expect("nonnegative"))
}

/// `√(π/8) √(i+j) i^{j−½} j^{i−½}`, the large-class approximation of
/// [`count_unicyclic`].
pub fn unicyclic_asymptotic(i: u64, j: u64) -> Result<LogReal> {
    if i < 2 || j < 2 {
        return Err(Error::domain("unicyclic_asymptotic", "both classes need at least 2 vertices"));
    }
    let (fi, fj) = (i as f64, j as f64);
    let ln = 0.5 * (std::f64::consts::PI / 8.0).ln()
        + 0.5 * (fi + fj).ln()
        + (fj - 0.5) * fi.ln()
        + (fi - 0.5) * fj.ln();
    Ok(LogReal::from_ln(ln))
}

/// `ln` of [`count_trees`] in floating point, for shapes too large to expand.
pub fn ln_count_trees(i: u64, j: u64) -> Result<f64> {
    if i == 0 || j == 0 {
        return Err(Error::domain("ln_count_trees", "both classes must be nonempty"));
    }
    Ok((j - 1) as f64 * (i as f64).ln() + (i - 1) as f64 * (j as f64).ln())
}

/// `ln` of [`count_unicyclic`] in floating point; `−∞` when `min(i,j) < 2`.
pub fn ln_count_unicyclic(i: u64, j: u64) -> f64 {
    if i.min(j) < 2 {
        return f64::NEG_INFINITY;
    }
    let (fi, fj) = (i as f64, j as f64);
    let mut term = 1.0;
    let mut sum = 0.0;
    for r in 1..=i.min(j) {
        term *= ((i - r + 1) as f64 / fi) * ((j - r + 1) as f64 / fj);
        if r >= 2 {
            sum += term * (i + j - r) as f64;
        }
        if term < 1e-300 {
            break;
        }
    }
    0.5f64.ln() + (fj - 1.0) * fi.ln() + (fi - 1.0) * fj.ln() + sum.ln()
}

fn check_complex_shape(op: &'static str, i: u64, j: u64, ell: i64) -> Result<()> {
    if i == 0 || j == 0 {
        return Err(Error::domain(op, "both classes must be nonempty"));
    }
    if 2 * i < j || 2 * j < i {
        return Err(Error::domain(op, format!("classes ({i}, {j}) are not balanced")));
    }
    let max_ell = (i * j) as i64 - (i + j) as i64;
    if ell < 1 || ell > max_ell {
        return Err(Error::domain(
            op,
            format!("excess {ell} outside 1..={max_ell} for classes ({i}, {j})"),
        ));
    }
    Ok(())
}

fn ln_complex_prefactor(i: u64, j: u64, ell: i64) -> f64 {
    let (fi, fj, fl) = (i as f64, j as f64, ell as f64);
    fj * fi.ln() + fi * fj.ln() + (3.0 * fl - 1.0) / 2.0 * (fi + fj).ln()
}

/// `i^j j^i (i+j)^{(3ℓ−1)/2} (c/ℓ)^{ℓ/2}`, an upper bound on the number of
/// connected balanced bipartite graphs of excess `ℓ ≥ 1`, for a suitable `c`.
pub fn complex_upper_bound(i: u64, j: u64, ell: i64, c: f64) -> Result<LogReal> {
    check_complex_shape("complex_upper_bound", i, j, ell)?;
    if !(c > 0.0) {
        return Err(Error::domain("complex_upper_bound", format!("c must be positive, got {c}")));
    }
    let fl = ell as f64;
    Ok(LogReal::from_ln(
        ln_complex_prefactor(i, j, ell) + fl / 2.0 * (c / fl).ln(),
    ))
}

/// Smallest `c` for which [`complex_upper_bound`] dominates `count`.
pub fn minimal_complex_constant(i: u64, j: u64, ell: i64, count: &BigCount) -> Result<f64> {
    check_complex_shape("minimal_complex_constant", i, j, ell)?;
    if count.is_zero() {
        return Ok(0.0);
    }
    let fl = ell as f64;
    Ok(fl * ((count.ln() - ln_complex_prefactor(i, j, ell)) * 2.0 / fl).exp())
}

/// `binom(ij, i+j+ℓ)`: every edge set of the right size, connected or not.
pub fn naive_upper_bound(i: u64, j: u64, ell: i64) -> Result<BigCount> {
    let edges = (i + j) as i64 + ell;
    if edges < 0 {
        return Err(Error::domain("naive_upper_bound", "negative edge count"));
    }
    Ok(binomial(i * j, edges as u64))
}

/// `E X(i,j,ℓ) = C(n,i) C(n,j) · count · p^{k+ℓ} (1−p)^{kn − ij − k − ℓ}`,
/// where `count` is the exact number of connected graphs of the shape or any
/// bound on it.
pub fn expected_components(
    n: u64,
    p: f64,
    shape: &BipartiteShape,
    count: &LogReal,
) -> Result<LogReal> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("expected_components", format!("p must lie in (0,1), got {p}")));
    }
    if shape.i > n || shape.j > n {
        return Err(Error::domain(
            "expected_components",
            format!("shape ({}, {}) does not fit in classes of size {n}", shape.i, shape.j),
        ));
    }
    let k = shape.order() as i128;
    let absent = k * n as i128 - (shape.i as i128) * (shape.j as i128) - k - shape.ell as i128;
    if absent < 0 {
        return Err(Error::domain(
            "expected_components",
            format!("non-edge exponent {absent} is negative"),
        ));
    }
    if count.is_zero() {
        return Ok(LogReal::ZERO);
    }
    let ln = ln_binomial(n, shape.i)
        + ln_binomial(n, shape.j)
        + count.ln()
        + shape.edges() as f64 * p.ln()
        + absent as f64 * (-p).ln_1p();
    Ok(LogReal::from_ln(ln))
}

/// Exact number of connected graphs of a shape where a closed form exists
/// (trees, unicyclic, lone vertices).
pub fn exact_count(shape: &BipartiteShape) -> Option<BigCount> {
    match (shape.i, shape.j, shape.ell) {
        (1, 0, -1) | (0, 1, -1) => Some(BigCount::from(1)),
        (i, j, -1) if i > 0 && j > 0 => count_trees(i, j).ok(),
        (i, j, 0) => Some(count_unicyclic(i, j)),
        _ => None,
    }
}

/// Limits on the exhaustive oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OracleBudget {
    pub max_slots: u64,
    pub max_subsets: u128,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            max_slots: 24,
            max_subsets: 10_000_000,
        }
    }
}

/// Connected and disconnected spanning edge sets of a fixed size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OraclePartition {
    pub connected: BigCount,
    pub disconnected: BigCount,
}

/// Counts `m`-edge subsets of `K_{i,j}` that connect all `i + j` vertices,
/// by exhaustive enumeration.
pub fn count_connected_oracle(i: u64, j: u64, m: u64, budget: &OracleBudget) -> Result<BigCount> {
    Ok(oracle_partition(i, j, m, budget)?.connected)
}

/// Splits all `m`-edge subsets of `K_{i,j}` into connected-spanning and not.
pub fn oracle_partition(i: u64, j: u64, m: u64, budget: &OracleBudget) -> Result<OraclePartition> {
    let slots = i * j;
    let subsets = binomial(slots, m).0.to_u128().unwrap_or(u128::MAX);
    if slots > budget.max_slots.min(64) || subsets > budget.max_subsets {
        return Err(Error::BudgetExceeded {
            slots,
            subsets,
            max_slots: budget.max_slots.min(64),
            max_subsets: budget.max_subsets,
        });
    }
    let vertices = (i + j) as usize;
    if m > slots || vertices == 0 {
        return Ok(OraclePartition {
            connected: BigCount::zero(),
            disconnected: BigCount::zero(),
        });
    }
    let endpoints: Vec<(usize, usize)> = (0..slots)
        .map(|e| ((e / j) as usize, (i + e % j) as usize))
        .collect();
    let mut parent = vec![0usize; vertices];
    let mut connected = 0u64;
    let mut disconnected = 0u64;
    let mut visit = |mask: u64| {
        for (v, p) in parent.iter_mut().enumerate() {
            *p = v;
        }
        let mut components = vertices;
        let mut bits = mask;
        while bits != 0 {
            let e = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let (a, b) = endpoints[e];
            let ra = find(&mut parent, a);
            let rb = find(&mut parent, b);
            if ra != rb {
                parent[ra] = rb;
                components -= 1;
            }
        }
        if components == 1 {
            connected += 1;
        } else {
            disconnected += 1;
        }
    };
    if m == 0 {
        visit(0);
    } else {
        // Gosper's hack over m-bit masks of `slots` bits
        let limit: u128 = 1u128 << slots;
        let mut mask: u64 = (1u64 << m) - 1 | if m == 64 { u64::MAX } else { 0 };
        loop {
            visit(mask);
            let c = mask & mask.wrapping_neg();
            let r = mask as u128 + c as u128;
            if r >= limit {
                break;
            }
            let r = r as u64;
            mask = (((r ^ mask) >> 2) / c) | r;
        }
    }
    Ok(OraclePartition {
        connected: BigCount::from(connected),
        disconnected: BigCount::from(disconnected),
    })
}

fn find(parent: &mut [usize], mut v: usize) -> usize {
    while parent[v] != v {
        parent[v] = parent[parent[v]];
        v = parent[v];
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn budget() -> OracleBudget {
        OracleBudget::default()
    }

    /// Forests of K_{i,j} with s + t trees separating the designated roots.
    fn forest_oracle(i: u64, j: u64, s: u64, t: u64) -> u64 {
        let slots = i * j;
        let vertices = (i + j) as usize;
        let edges_needed = (i + j) - (s + t);
        let roots: Vec<usize> = (0..s as usize).chain((i as usize)..(i + t) as usize).collect();
        let mut count = 0;
        for mask in 0u64..(1u64 << slots) {
            if mask.count_ones() as u64 != edges_needed {
                continue;
            }
            let mut parent: Vec<usize> = (0..vertices).collect();
            let mut acyclic = true;
            for e in 0..slots {
                if mask >> e & 1 == 1 {
                    let a = find(&mut parent, (e / j) as usize);
                    let b = find(&mut parent, (i + e % j) as usize);
                    if a == b {
                        acyclic = false;
                        break;
                    }
                    parent[a] = b;
                }
            }
            if !acyclic {
                continue;
            }
            let mut seen: Vec<usize> = roots.iter().map(|&r| find(&mut parent, r)).collect();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() == roots.len() {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn tree_examples() {
        assert_eq!(count_trees(1, 1).unwrap(), BigCount::from(1));
        assert_eq!(count_trees(2, 2).unwrap(), BigCount::from(4));
        assert_eq!(count_trees(3, 2).unwrap(), BigCount::from(12));
        assert!(count_trees(0, 3).is_err());
    }

    #[test]
    fn forest_examples() {
        assert_eq!(count_forests(2, 2, 2, 2).unwrap(), BigCount::from(1));
        assert_eq!(count_forests(2, 2, 1, 1).unwrap(), BigCount::from(3));
        assert!(count_forests(3, 3, 0, 0).is_err());
        assert!(count_forests(2, 2, 3, 0).is_err());
        for i in 1..=6 {
            for j in 1..=6 {
                assert_eq!(count_forests(i, j, 1, 0).unwrap(), count_trees(i, j).unwrap());
            }
        }
    }

    #[test]
    fn forests_match_brute_force() {
        for i in 1..=3u64 {
            for j in 1..=3u64 {
                for s in 0..=i {
                    for t in 0..=j {
                        if s + t == 0 {
                            continue;
                        }
                        assert_eq!(
                            count_forests(i, j, s, t).unwrap(),
                            BigCount::from(forest_oracle(i, j, s, t)),
                            "F({i},{j},{s},{t})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn unicyclic_examples() {
        assert_eq!(count_unicyclic(2, 2), BigCount::from(1));
        assert_eq!(count_unicyclic(3, 3), BigCount::from(78));
        for j in 1..10 {
            assert!(count_unicyclic(1, j).is_zero());
        }
    }

    #[test]
    fn unicyclic_asymptotic_ratio() {
        let ratio = |i: u64, j: u64| {
            count_unicyclic(i, j).to_log_real().div(&unicyclic_asymptotic(i, j).unwrap()).to_f64()
        };
        // the gap closes like 1/sqrt(i): 0.7775 at 50, 0.9496 at 1000
        assert!((ratio(50, 50) - 0.777_454_159_563_762).abs() < 1e-9);
        assert!((ratio(1000, 1000) - 0.949_570_071_131_597).abs() < 1e-9);
        assert!((ratio(100, 100) - 1.0).abs() < (ratio(20, 20) - 1.0).abs());
        assert_eq!(unicyclic_asymptotic(7, 11).unwrap(), unicyclic_asymptotic(11, 7).unwrap());
        assert!(unicyclic_asymptotic(1, 5).is_err());
    }

    #[test]
    fn float_log_counts_track_exact() {
        for i in 1..=12 {
            for j in 1..=12 {
                let exact = count_trees(i, j).unwrap().ln();
                assert!((ln_count_trees(i, j).unwrap() - exact).abs() < 1e-10 * exact.max(1.0));
                let u = count_unicyclic(i, j);
                if u.is_zero() {
                    assert_eq!(ln_count_unicyclic(i, j), f64::NEG_INFINITY);
                } else {
                    assert!((ln_count_unicyclic(i, j) - u.ln()).abs() < 1e-10 * u.ln().max(1.0));
                }
            }
        }
        let big = count_unicyclic(40, 37).ln();
        assert!((ln_count_unicyclic(40, 37) - big).abs() < 1e-9 * big);
    }

    #[test]
    fn falling_factorial_examples() {
        assert_eq!(falling_factorial(5, 0).unwrap(), BigCount::from(1));
        assert_eq!(falling_factorial(5, 5).unwrap(), BigCount::from(120));
        assert_eq!(falling_factorial(10, 3).unwrap(), BigCount::from(720));
        assert!(falling_factorial(3, 4).is_err());
    }

    #[test]
    fn oracle_examples() {
        let b = budget();
        assert_eq!(count_connected_oracle(2, 2, 3, &b).unwrap(), count_trees(2, 2).unwrap());
        assert_eq!(count_connected_oracle(2, 2, 4, &b).unwrap(), count_unicyclic(2, 2));
        assert_eq!(count_connected_oracle(1, 1, 1, &b).unwrap(), BigCount::from(1));
        assert_eq!(count_connected_oracle(3, 3, 6, &b).unwrap(), BigCount::from(78));
        assert_eq!(count_connected_oracle(1, 0, 0, &b).unwrap(), BigCount::from(1));
    }

    #[test]
    fn oracle_budget_enforced() {
        let err = count_connected_oracle(5, 5, 12, &budget()).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { slots: 25, .. }));
        let tight = OracleBudget { max_slots: 24, max_subsets: 10 };
        assert!(matches!(
            count_connected_oracle(3, 3, 4, &tight),
            Err(Error::BudgetExceeded { subsets: 126, .. })
        ));
    }

    #[test]
    fn oracle_partitions_all_subsets() {
        for i in 1..=4u64 {
            for j in 1..=4u64 {
                for m in 0..=i * j {
                    let part = oracle_partition(i, j, m, &budget()).unwrap();
                    let total = BigCount(part.connected.0 + part.disconnected.0);
                    assert_eq!(total, binomial(i * j, m), "({i},{j},{m})");
                }
            }
        }
    }

    #[test]
    fn complex_bound_properties() {
        let lo = complex_upper_bound(3, 3, 2, 1.0).unwrap();
        let hi = complex_upper_bound(3, 3, 2, 10.0).unwrap();
        assert!(hi.ln() > lo.ln());
        assert!(complex_upper_bound(2, 5, 1, 1.0).is_err());
        assert!(complex_upper_bound(3, 3, 4, 1.0).is_err());
        assert!(complex_upper_bound(3, 3, 0, 1.0).is_err());
        assert!(complex_upper_bound(3, 3, 1, 0.0).is_err());
        // the minimal constant reproduces the count exactly
        let c = count_connected_oracle(3, 3, 7, &budget()).unwrap();
        let cmin = minimal_complex_constant(3, 3, 1, &c).unwrap();
        let at = complex_upper_bound(3, 3, 1, cmin).unwrap();
        assert!((at.ln() - c.ln()).abs() < 1e-12);
    }

    #[test]
    fn naive_bound_counts_edge_sets() {
        assert_eq!(naive_upper_bound(3, 3, 3).unwrap(), binomial(9, 9));
        assert_eq!(naive_upper_bound(4, 4, 1).unwrap(), BigCount::from(11_440));
    }

    #[test]
    fn expected_components_small() {
        let iso = BipartiteShape::new(1, 1, -1).unwrap();
        let v = expected_components(2, 0.5, &iso, &LogReal::ONE).unwrap();
        assert!((v.to_f64() - 0.5).abs() < 1e-14);
        let tree = BipartiteShape::new(2, 2, -1).unwrap();
        let c = count_trees(2, 2).unwrap().to_log_real();
        let v = expected_components(2, 0.5, &tree, &c).unwrap();
        assert!((v.to_f64() - 0.25).abs() < 1e-14);
        let tiny = expected_components(1000, 1e-12, &tree, &c).unwrap();
        assert!(tiny.to_f64() < 1e-20);
        assert!(expected_components(2, 0.0, &tree, &c).is_err());
        assert!(expected_components(1, 0.5, &tree, &c).is_err());
    }

    #[test]
    fn shape_validation() {
        assert!(BipartiteShape::new(1, 0, -1).is_ok());
        assert!(BipartiteShape::new(2, 0, -1).is_err());
        assert!(BipartiteShape::new(2, 2, 1).is_err());
        assert!(BipartiteShape::new(3, 3, -2).is_err());
        assert_eq!(BipartiteShape::new(3, 4, 2).unwrap().edges(), 9);
    }

    proptest! {
        #[test]
        fn counts_are_symmetric(i in 1u64..12, j in 1u64..12) {
            prop_assert_eq!(count_trees(i, j).unwrap(), count_trees(j, i).unwrap());
            prop_assert_eq!(count_unicyclic(i, j), count_unicyclic(j, i));
        }

        #[test]
        fn forests_are_symmetric(i in 1u64..9, j in 1u64..9, s in 0u64..9, t in 0u64..9) {
            prop_assume!(s <= i && t <= j && s + t > 0);
            prop_assert_eq!(count_forests(i, j, s, t).unwrap(), count_forests(j, i, t, s).unwrap());
        }
    }
}
