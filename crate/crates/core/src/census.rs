//! Classification and aggregation of the components of a finalised sample.

use std::collections::BTreeMap;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numeric::{delta, floor_two_thirds, tree_order_threshold, ceil_two_thirds};
use crate::sampler::GraphSample;

/// Class counts and edge count of one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ComponentRecord {
    pub n1: u64,
    pub n2: u64,
    pub edges: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentClass {
    Tree,
    Unicyclic,
    Complex,
}

impl ComponentClass {
    pub fn name(&self) -> &'static str {
        match self {
            ComponentClass::Tree => "tree",
            ComponentClass::Unicyclic => "unicyclic",
            ComponentClass::Complex => "complex",
        }
    }
}

impl ComponentRecord {
    pub fn order(&self) -> u64 {
        self.n1 + self.n2
    }

    pub fn excess(&self) -> i64 {
        self.edges as i64 - self.order() as i64
    }

    pub fn class(&self) -> ComponentClass {
        match self.excess() {
            e if e < 0 => ComponentClass::Tree,
            0 => ComponentClass::Unicyclic,
            _ => ComponentClass::Complex,
        }
    }

    /// Neither class holds more than twice the other.
    pub fn is_balanced(&self) -> bool {
        self.n1 <= 2 * self.n2 && self.n2 <= 2 * self.n1
    }

    /// `|n1 − n2| < ε^{1/4} √n`.
    pub fn is_eps_uniform(&self, n: u64, eps: f64) -> bool {
        (self.n1.abs_diff(self.n2) as f64) < eps.powf(0.25) * (n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub balanced: bool,
    pub eps_uniform: bool,
    /// Order at most `⌊n^{2/3}⌋`.
    pub small: bool,
}

pub fn classify(record: &ComponentRecord, n: u64, eps: f64) -> Result<Classification> {
    if !(eps > 0.0) {
        return Err(Error::domain("classify", format!("uniformity needs eps > 0, got {eps}")));
    }
    Ok(Classification {
        balanced: record.is_balanced(),
        eps_uniform: record.is_eps_uniform(n, eps),
        small: record.order() <= floor_two_thirds(n),
    })
}

/// Knobs for [`census`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CensusOptions {
    /// `ε`; its magnitude sets the uniformity width.
    pub eps: f64,
    /// Largest order kept in the `(i, j, ℓ)` shape map.
    pub order_cap: u64,
    /// Whether lone vertices count towards `Y(−1)`.
    pub include_singletons: bool,
    /// Unbalanced components at or above this order are counted.
    pub unbalanced_min_order: u64,
}

impl CensusOptions {
    /// `order_cap = ⌈n^{2/3}⌉`, singletons included, unbalanced threshold
    /// `⌈2000 ln n⌉`.
    pub fn new(n: u64, eps: f64) -> Self {
        CensusOptions {
            eps,
            order_cap: ceil_two_thirds(n),
            include_singletons: true,
            unbalanced_min_order: (2000.0 * (n as f64).ln()).ceil() as u64,
        }
    }
}

/// Per-sample component statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentCensus {
    pub n: u64,
    pub options: CensusOptions,
    pub components: u64,
    pub trees: u64,
    pub unicyclic: u64,
    pub complex: u64,
    pub l1: Option<ComponentRecord>,
    pub l2: Option<ComponentRecord>,
    /// Orders → counts, per class, over all components.
    pub histograms: BTreeMap<ComponentClass, BTreeMap<u64, u64>>,
    /// `(i, j, ℓ)` → count for components of order ≤ `order_cap`.
    pub shape_map: BTreeMap<(u64, u64, i64), u64>,
    /// Components of order > `order_cap`, largest first.
    pub large_components: Vec<ComponentRecord>,
    /// Vertices in tree components of order ≤ `⌊n^{2/3}⌋`.
    pub y_minus1: u64,
    /// Vertices in unicyclic components of order ≤ `⌊n^{2/3}⌋`.
    pub y_0: u64,
    pub singletons: u64,
    pub unbalanced_large: u64,
    pub non_uniform_small_trees: u64,
    /// Complex components of order ≤ `⌊n^{2/3}⌋`.
    pub small_complex: u64,
}

/// One pass over the roots of `sample`.
pub fn census(sample: &GraphSample, options: CensusOptions) -> ComponentCensus {
    let n = sample.n();
    let small_limit = floor_two_thirds(n);
    let uniform_eps = options.eps.abs();
    let mut c = ComponentCensus {
        n,
        options,
        components: 0,
        trees: 0,
        unicyclic: 0,
        complex: 0,
        l1: None,
        l2: None,
        histograms: BTreeMap::new(),
        shape_map: BTreeMap::new(),
        large_components: Vec::new(),
        y_minus1: 0,
        y_0: 0,
        singletons: 0,
        unbalanced_large: 0,
        non_uniform_small_trees: 0,
        small_complex: 0,
    };
    // (order, record) of the two largest, first seen wins ties
    let mut top: [Option<ComponentRecord>; 2] = [None, None];
    for root in sample.roots() {
        let (n1, n2, edges) = sample.root_counters(root);
        let rec = ComponentRecord { n1, n2, edges };
        let order = rec.order();
        let class = rec.class();
        c.components += 1;
        match class {
            ComponentClass::Tree => c.trees += 1,
            ComponentClass::Unicyclic => c.unicyclic += 1,
            ComponentClass::Complex => c.complex += 1,
        }
        *c.histograms.entry(class).or_default().entry(order).or_default() += 1;
        if order <= options.order_cap {
            *c.shape_map.entry((n1, n2, rec.excess())).or_default() += 1;
        } else {
            c.large_components.push(rec);
        }
        if order == 1 {
            c.singletons += 1;
        }
        if order <= small_limit {
            match class {
                ComponentClass::Tree => {
                    if order > 1 || options.include_singletons {
                        c.y_minus1 += order;
                    }
                    if !rec.is_eps_uniform(n, uniform_eps) {
                        c.non_uniform_small_trees += 1;
                    }
                }
                ComponentClass::Unicyclic => c.y_0 += order,
                ComponentClass::Complex => c.small_complex += 1,
            }
        }
        if order >= options.unbalanced_min_order && !rec.is_balanced() {
            c.unbalanced_large += 1;
        }
        match top {
            [None, _] => top[0] = Some(rec),
            [Some(a), _] if order > a.order() => {
                top[1] = top[0];
                top[0] = Some(rec);
            }
            [_, None] => top[1] = Some(rec),
            [_, Some(b)] if order > b.order() => top[1] = Some(rec),
            _ => {}
        }
    }
    c.l1 = top[0];
    c.l2 = top[1];
    c.large_components.sort_by(|a, b| b.order().cmp(&a.order()));
    c
}

/// Closed integer window `[⌈lo⌉, ⌊hi⌋]`, empty when `lo > hi` after rounding.
fn integer_window(lo: f64, hi: f64) -> Option<(u64, u64)> {
    let a = lo.ceil().max(1.0);
    let b = hi.floor();
    if a > b {
        None
    } else {
        Some((a as u64, b as u64))
    }
}

/// Integer orders covered by the tree window `[thr(r1), thr(r2)]`.
pub fn tree_window(n: u64, eps: f64, r1: f64, r2: f64) -> Result<Option<(u64, u64)>> {
    if r1 > r2 {
        return Err(Error::domain("tree_window", format!("r1 = {r1} exceeds r2 = {r2}")));
    }
    Ok(integer_window(
        tree_order_threshold(n, eps, r1)?,
        tree_order_threshold(n, eps, r2)?,
    ))
}

/// Integer orders covered by the unicyclic window `[u1/δ, u2/δ]`.
pub fn unicyclic_window(eps: f64, u1: f64, u2: f64) -> Result<Option<(u64, u64)>> {
    if u1 > u2 || u1 < 0.0 {
        return Err(Error::domain("unicyclic_window", format!("need 0 <= u1 <= u2, got ({u1}, {u2})")));
    }
    let d = delta(eps)?;
    Ok(integer_window(u1 / d, u2 / d))
}

impl ComponentCensus {
    fn count_in(&self, class: ComponentClass, window: Option<(u64, u64)>) -> Result<u64> {
        let Some((lo, hi)) = window else { return Ok(0) };
        if hi > self.options.order_cap {
            return Err(Error::domain(
                "window_count",
                format!("window upper edge {hi} exceeds order cap {}", self.options.order_cap),
            ));
        }
        Ok(self
            .histograms
            .get(&class)
            .map(|h| h.range(lo..=hi).map(|(_, c)| c).sum())
            .unwrap_or(0))
    }

    /// Vertices in components of order at least `order`.
    pub fn vertices_in_components_at_least(&self, order: u64) -> u64 {
        self.histograms
            .values()
            .flat_map(|h| h.range(order..))
            .map(|(k, c)| k * c)
            .sum()
    }

    /// Vertices in ε-uniform tree components of order ≤ `max_order`.
    pub fn uniform_tree_vertices(&self, max_order: u64) -> Result<u64> {
        if max_order > self.options.order_cap {
            return Err(Error::domain(
                "uniform_tree_vertices",
                format!("order {max_order} exceeds order cap {}", self.options.order_cap),
            ));
        }
        let eps = self.options.eps.abs();
        Ok(self
            .shape_map
            .iter()
            .filter(|(&(i, j, ell), _)| ell == -1 && i + j <= max_order)
            .filter(|(&(i, j, _), _)| {
                (i.abs_diff(j) as f64) < eps.powf(0.25) * (self.n as f64).sqrt()
            })
            .map(|(&(i, j, _), &c)| (i + j) * c)
            .sum())
    }

    /// `|L1 ∩ N1|` outside `(1 ± 2√ε)|L1 ∩ N2|`.
    pub fn giant_imbalanced(&self, eps: f64) -> bool {
        match self.l1 {
            None => false,
            Some(l1) => {
                let slack = 2.0 * eps.abs().sqrt();
                let (a, b) = (l1.n1 as f64, l1.n2 as f64);
                a < (1.0 - slack) * b || a > (1.0 + slack) * b
            }
        }
    }
}

/// Tree components with orders in the `(r1, r2)` window: the statistic `Y`.
pub fn window_count_trees(c: &ComponentCensus, n: u64, eps: f64, r1: f64, r2: f64) -> Result<u64> {
    c.count_in(ComponentClass::Tree, tree_window(n, eps, r1, r2)?)
}

/// Unicyclic components with orders in `[u1/δ, u2/δ]`: the statistic `Z`.
pub fn window_count_unicyclic(c: &ComponentCensus, eps: f64, u1: f64, u2: f64) -> Result<u64> {
    c.count_in(ComponentClass::Unicyclic, unicyclic_window(eps, u1, u2)?)
}

struct Histograms<'a>(&'a BTreeMap<ComponentClass, BTreeMap<u64, u64>>);

impl Serialize for Histograms<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (class, h) in self.0 {
            let rows: Vec<[u64; 2]> = h.iter().map(|(&k, &v)| [k, v]).collect();
            m.serialize_entry(class.name(), &rows)?;
        }
        m.end()
    }
}

impl Serialize for ComponentCensus {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(None)?;
        m.serialize_entry("n", &self.n)?;
        m.serialize_entry("components", &self.components)?;
        m.serialize_entry("trees", &self.trees)?;
        m.serialize_entry("unicyclic", &self.unicyclic)?;
        m.serialize_entry("complex", &self.complex)?;
        m.serialize_entry("L1", &self.l1)?;
        m.serialize_entry("L2", &self.l2)?;
        m.serialize_entry("histograms", &Histograms(&self.histograms))?;
        let shapes: Vec<(u64, u64, i64, u64)> =
            self.shape_map.iter().map(|(&(i, j, l), &c)| (i, j, l, c)).collect();
        m.serialize_entry("shape_map", &shapes)?;
        m.serialize_entry("large_components", &self.large_components)?;
        m.serialize_entry("Y_minus1", &self.y_minus1)?;
        m.serialize_entry("Y_0", &self.y_0)?;
        m.serialize_entry("singletons", &self.singletons)?;
        m.serialize_entry("unbalanced_large", &self.unbalanced_large)?;
        m.serialize_entry("non_uniform_small_trees", &self.non_uniform_small_trees)?;
        m.serialize_entry("small_complex", &self.small_complex)?;
        m.serialize_entry("options", &self.options)?;
        m.end()
    }
}
