//! Sparse `G(n,n,p)` sampling into a union-find with per-component counters.
//!
//! Vertices `[0, n)` form class 1 and `[n, 2n)` class 2. Edge slot `e` of the
//! `n²` possible cross edges joins `e / n` to `n + e % n`. Edges themselves
//! are never stored: each round remembers only its stream key, so the slot
//! set can be regenerated on demand.

use std::io::{self, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::sprinkle_probability;

/// Mixes a master seed and a trial index into an independent 64-bit seed
/// (SplitMix64 finaliser).
pub fn derive_seed(master: u64, trial: u64) -> u64 {
    let mut z = master ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifies the random edge stream of one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundKey {
    pub seed: u64,
    pub round: u32,
    pub q: f64,
}

/// Increasing slot indices of an independent `G(n,n,q)`, generated by
/// geometric skips.
#[derive(Debug, Clone)]
pub struct SlotStream {
    rng: ChaCha8Rng,
    ln_miss: f64,
    next: u64,
    total: u64,
    every_slot: bool,
}

impl SlotStream {
    pub fn new(key: &RoundKey, total: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(key.seed);
        rng.set_stream(key.round as u64);
        let empty = key.q <= 0.0;
        SlotStream {
            rng,
            ln_miss: (-key.q).ln_1p(),
            next: if empty { total } else { 0 },
            total,
            every_slot: key.q >= 1.0,
        }
    }

    /// Uniform on the open interval (0, 1).
    fn open_unit(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

impl Iterator for SlotStream {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        if self.next >= self.total {
            return None;
        }
        if self.every_slot {
            let s = self.next;
            self.next += 1;
            return Some(s);
        }
        let gap = (self.open_unit().ln() / self.ln_miss).floor();
        if gap >= (self.total - self.next) as f64 {
            self.next = self.total;
            return None;
        }
        let slot = self.next + gap as u64;
        self.next = slot + 1;
        Some(slot)
    }
}

/// Sorted union of several slot streams, without duplicates.
pub struct MergedSlots {
    heads: Vec<(Option<u64>, SlotStream)>,
}

impl MergedSlots {
    fn new(keys: &[RoundKey], total: u64) -> Self {
        let heads = keys
            .iter()
            .map(|k| {
                let mut s = SlotStream::new(k, total);
                (s.next(), s)
            })
            .collect();
        MergedSlots { heads }
    }

    /// Advances every stream past slots below `slot` and reports whether any
    /// of them contains `slot`.
    fn contains_advancing(&mut self, slot: u64) -> bool {
        let mut hit = false;
        for (head, stream) in &mut self.heads {
            while let Some(h) = *head {
                if h < slot {
                    *head = stream.next();
                } else {
                    hit |= h == slot;
                    break;
                }
            }
        }
        hit
    }
}

impl Iterator for MergedSlots {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let min = self.heads.iter().filter_map(|(h, _)| *h).min()?;
        for (head, stream) in &mut self.heads {
            if *head == Some(min) {
                *head = stream.next();
            }
        }
        Some(min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(C)]
struct Counters {
    n1: u32,
    n2: u32,
    edges: u64,
}

/// A realised `G(n,n,p)` held as component structure only.
#[derive(Debug, Clone)]
pub struct GraphSample {
    n: u64,
    p: f64,
    total_edges: u64,
    rounds: Vec<RoundKey>,
    /// Sorted slots of a graph built by [`GraphSample::from_slots`].
    explicit: Option<Vec<u64>>,
    parent: Vec<u32>,
    rank: Vec<u8>,
    counters: Vec<Counters>,
}

/// One sprinkling step from `p_prev` to `p_next`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SprinkleRound {
    pub p_prev: f64,
    pub p_next: f64,
    pub q: f64,
    /// Newly drawn slots that were not already occupied.
    pub new_edges: u64,
    /// Drawn slots that were already occupied and so left unchanged.
    pub collisions: u64,
    /// Excess change of the component holding the pre-round largest component.
    pub delta_excess_giant: i64,
}

/// Draws `G(n,n,p)` with the stream keyed by `seed`.
pub fn sample(n: u64, p: f64, seed: u64) -> Result<GraphSample> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain("sample", format!("p must lie in [0,1], got {p}")));
    }
    let mut g = GraphSample::empty(n)?;
    let key = RoundKey { seed, round: 0, q: p };
    for slot in SlotStream::new(&key, g.slot_count()) {
        g.insert_slot(slot);
    }
    g.rounds.push(key);
    g.p = p;
    Ok(g)
}

/// Unions an independent `G(n,n,q)` into `sample` so that it becomes
/// `G(n,n,p_next)`, with `q = (p_next − p)/(1 − p)`.
pub fn sprinkle(sample: &mut GraphSample, p_next: f64, seed: u64) -> Result<SprinkleRound> {
    if p_next < sample.p {
        return Err(Error::domain(
            "sprinkle",
            format!("p_next = {p_next} is below the current p = {}", sample.p),
        ));
    }
    if sample.explicit.is_some() {
        return Err(Error::domain("sprinkle", "cannot sprinkle onto an explicit edge set"));
    }
    let p_prev = sample.p;
    let q = if p_next == p_prev { 0.0 } else { sprinkle_probability(p_prev, p_next)? };
    let anchor = sample.largest_root();
    let before = sample.component_excess(anchor);

    let key = RoundKey {
        seed,
        round: sample.rounds.len() as u32,
        q,
    };
    let total = sample.slot_count();
    let mut previous = MergedSlots::new(&sample.rounds, total);
    let mut new_edges = 0;
    let mut collisions = 0;
    for slot in SlotStream::new(&key, total) {
        if previous.contains_advancing(slot) {
            collisions += 1;
        } else {
            sample.insert_slot(slot);
            new_edges += 1;
        }
    }
    sample.rounds.push(key);
    sample.p = p_next;

    let root = sample.find(anchor as u32) as usize;
    let after = sample.component_excess(root);
    Ok(SprinkleRound {
        p_prev,
        p_next,
        q,
        new_edges,
        collisions,
        delta_excess_giant: after - before,
    })
}

impl GraphSample {
    /// `2n` isolated vertices.
    pub fn empty(n: u64) -> Result<Self> {
        if n == 0 || 2 * n > u32::MAX as u64 {
            return Err(Error::domain(
                "sample",
                format!("n must lie in 1..={}, got {n}", u32::MAX / 2),
            ));
        }
        let vertices = 2 * n as usize;
        let counters = (0..vertices)
            .map(|v| {
                let first = (v as u64) < n;
                Counters {
                    n1: first as u32,
                    n2: (!first) as u32,
                    edges: 0,
                }
            })
            .collect();
        Ok(GraphSample {
            n,
            p: 0.0,
            total_edges: 0,
            rounds: Vec::new(),
            explicit: None,
            parent: (0..vertices as u32).collect(),
            rank: vec![0; vertices],
            counters,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn total_edges(&self) -> u64 {
        self.total_edges
    }

    pub fn rounds(&self) -> &[RoundKey] {
        &self.rounds
    }

    pub fn vertex_count(&self) -> usize {
        self.parent.len()
    }

    pub fn slot_count(&self) -> u64 {
        self.n * self.n
    }

    /// Endpoints of slot `e`.
    pub fn slot_endpoints(&self, slot: u64) -> (u64, u64) {
        (slot / self.n, self.n + slot % self.n)
    }

    fn insert_slot(&mut self, slot: u64) {
        let (u, v) = self.slot_endpoints(slot);
        self.add_edge(u as u32, v as u32);
    }

    fn add_edge(&mut self, u: u32, v: u32) {
        self.total_edges += 1;
        let ru = self.find(u);
        let rv = self.find(v);
        if ru == rv {
            self.counters[ru as usize].edges += 1;
            return;
        }
        let (hi, lo) = match self.rank[ru as usize].cmp(&self.rank[rv as usize]) {
            std::cmp::Ordering::Less => (rv, ru),
            std::cmp::Ordering::Greater => (ru, rv),
            std::cmp::Ordering::Equal => {
                self.rank[ru as usize] += 1;
                (ru, rv)
            }
        };
        self.parent[lo as usize] = hi;
        let absorbed = self.counters[lo as usize];
        let c = &mut self.counters[hi as usize];
        c.n1 += absorbed.n1;
        c.n2 += absorbed.n2;
        c.edges += absorbed.edges + 1;
    }

    fn find(&mut self, mut v: u32) -> u32 {
        // path halving
        while self.parent[v as usize] != v {
            let grand = self.parent[self.parent[v as usize] as usize];
            self.parent[v as usize] = grand;
            v = grand;
        }
        v
    }

    /// Root of the component holding `v`, compressing the path on the way.
    pub fn find_root(&mut self, v: usize) -> Result<usize> {
        if v >= self.vertex_count() {
            return Err(Error::Index {
                vertex: v,
                vertices: self.vertex_count(),
            });
        }
        Ok(self.find(v as u32) as usize)
    }

    /// Root of `v` without modifying the structure.
    pub fn root_of(&self, v: usize) -> Result<usize> {
        if v >= self.vertex_count() {
            return Err(Error::Index {
                vertex: v,
                vertices: self.vertex_count(),
            });
        }
        let mut v = v;
        while self.parent[v] as usize != v {
            v = self.parent[v] as usize;
        }
        Ok(v)
    }

    pub fn is_root(&self, v: usize) -> bool {
        self.parent[v] as usize == v
    }

    /// `(n1, n2, edges)` stored at a root.
    pub fn root_counters(&self, root: usize) -> (u64, u64, u64) {
        let c = self.counters[root];
        (c.n1 as u64, c.n2 as u64, c.edges)
    }

    /// Roots in increasing vertex order.
    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.vertex_count()).filter(move |&v| self.is_root(v))
    }

    fn component_excess(&self, root: usize) -> i64 {
        let c = self.counters[root];
        c.edges as i64 - (c.n1 + c.n2) as i64
    }

    /// Root of the largest component, smaller root id on ties.
    pub fn largest_root(&self) -> usize {
        let mut best = 0usize;
        let mut best_order = 0u32;
        for r in self.roots() {
            let c = self.counters[r];
            let order = c.n1 + c.n2;
            if order > best_order {
                best = r;
                best_order = order;
            }
        }
        best
    }

    /// A fixed graph given by its occupied slots (duplicates ignored).
    pub fn from_slots(n: u64, slots: &[u64]) -> Result<Self> {
        let mut g = GraphSample::empty(n)?;
        let mut sorted = slots.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if let Some(&last) = sorted.last() {
            if last >= g.slot_count() {
                return Err(Error::domain(
                    "from_slots",
                    format!("slot {last} outside 0..{}", g.slot_count()),
                ));
            }
        }
        for &slot in &sorted {
            g.insert_slot(slot);
        }
        g.explicit = Some(sorted);
        Ok(g)
    }

    /// Occupied slots in increasing order, regenerated from the round keys.
    pub fn slots(&self) -> Box<dyn Iterator<Item = u64> + '_> {
        match &self.explicit {
            Some(slots) => Box::new(slots.iter().copied()),
            None => Box::new(MergedSlots::new(&self.rounds, self.slot_count())),
        }
    }

    /// Writes one `u v` line per edge, sorted by slot index.
    pub fn dump_edges<W: Write>(&self, mut out: W) -> io::Result<()> {
        for slot in self.slots() {
            let (u, v) = self.slot_endpoints(slot);
            writeln!(out, "{u} {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeMap, BTreeSet};

    #[test]
    fn explicit_graphs() {
        let g = GraphSample::from_slots(2, &[3, 0, 3]).unwrap();
        assert_eq!(g.total_edges(), 2);
        assert_eq!(g.slots().collect::<Vec<_>>(), vec![0, 3]);
        assert_eq!(g.root_counters(g.largest_root()), (1, 1, 1));
        assert!(GraphSample::from_slots(2, &[4]).is_err());
        let mut g = g;
        assert!(sprinkle(&mut g, 0.5, 0).is_err());
    }

    fn component_multiset(g: &GraphSample) -> Vec<(u64, u64, u64)> {
        let mut v: Vec<_> = g.roots().map(|r| g.root_counters(r)).collect();
        v.sort_unstable();
        v
    }

    /// Components recomputed from the regenerated edge list with a fresh
    /// union-find.
    fn rebuild(g: &GraphSample) -> Vec<(u64, u64, u64)> {
        let n = g.n();
        let mut parent: Vec<usize> = (0..2 * n as usize).collect();
        fn find(p: &mut [usize], mut v: usize) -> usize {
            while p[v] != v {
                v = p[v];
            }
            v
        }
        let edges: Vec<(usize, usize)> = g
            .slots()
            .map(|s| {
                let (u, v) = g.slot_endpoints(s);
                (u as usize, v as usize)
            })
            .collect();
        for &(u, v) in &edges {
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            if a != b {
                parent[a] = b;
            }
        }
        let mut acc: BTreeMap<usize, (u64, u64, u64)> = BTreeMap::new();
        for v in 0..2 * n as usize {
            let r = find(&mut parent, v);
            let e = acc.entry(r).or_default();
            if (v as u64) < n {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
        for &(u, _) in &edges {
            let r = find(&mut parent, u);
            acc.get_mut(&r).unwrap().2 += 1;
        }
        let mut out: Vec<_> = acc.into_values().collect();
        out.sort_unstable();
        out
    }

    #[test]
    fn empty_and_complete() {
        let g = sample(50, 0.0, 1).unwrap();
        assert_eq!(g.total_edges(), 0);
        assert_eq!(g.roots().count(), 100);
        let g = sample(30, 1.0, 1).unwrap();
        assert_eq!(g.total_edges(), 900);
        let comps = component_multiset(&g);
        assert_eq!(comps, vec![(30, 30, 900)]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(sample(10, 1.5, 0).is_err());
        assert!(sample(0, 0.5, 0).is_err());
        let mut g = sample(10, 0.2, 0).unwrap();
        assert!(sprinkle(&mut g, 0.1, 1).is_err());
        assert!(matches!(g.find_root(20), Err(Error::Index { vertex: 20, vertices: 20 })));
    }

    #[test]
    fn deterministic_in_seed() {
        let a = sample(2000, 1.1e-3, 42).unwrap();
        let b = sample(2000, 1.1e-3, 42).unwrap();
        let c = sample(2000, 1.1e-3, 43).unwrap();
        assert_eq!(a.total_edges(), b.total_edges());
        assert_eq!(component_multiset(&a), component_multiset(&b));
        assert_ne!(component_multiset(&a), component_multiset(&c));
    }

    #[test]
    fn counters_match_rebuilt_components() {
        for seed in 0..5 {
            let mut g = sample(300, 1.3 / 300.0, seed).unwrap();
            assert_eq!(component_multiset(&g), rebuild(&g));
            sprinkle(&mut g, 2.0 / 300.0, seed).unwrap();
            sprinkle(&mut g, 0.05, seed).unwrap();
            assert_eq!(component_multiset(&g), rebuild(&g));
            assert_eq!(g.slots().count() as u64, g.total_edges());
        }
    }

    #[test]
    fn invariants_hold_after_rounds() {
        let mut g = sample(1000, 0.8e-3, 9).unwrap();
        for (i, p) in [1.0e-3, 1.2e-3, 1.5e-3].iter().enumerate() {
            sprinkle(&mut g, *p, 100 + i as u64).unwrap();
        }
        let comps = component_multiset(&g);
        assert_eq!(comps.iter().map(|c| c.0 + c.1).sum::<u64>(), 2000);
        assert_eq!(comps.iter().map(|c| c.2).sum::<u64>(), g.total_edges());
        for (n1, n2, e) in comps {
            assert!(e as i64 - (n1 + n2) as i64 >= -1);
            assert!(e <= n1 * n2);
        }
    }

    #[test]
    fn sprinkle_to_same_p_adds_nothing() {
        let mut g = sample(500, 2e-3, 3).unwrap();
        let before = g.total_edges();
        let r = sprinkle(&mut g, 2e-3, 4).unwrap();
        assert_eq!(r.q, 0.0);
        assert_eq!(r.new_edges, 0);
        assert_eq!(g.total_edges(), before);
        assert_eq!(r.delta_excess_giant, 0);
    }

    #[test]
    fn sprinkle_collisions_never_double_count() {
        // dense enough that collisions are certain
        let mut g = sample(40, 0.5, 5).unwrap();
        let r = sprinkle(&mut g, 0.75, 6).unwrap();
        assert!(r.collisions > 0);
        let distinct: BTreeSet<u64> = g.slots().collect();
        assert_eq!(distinct.len() as u64, g.total_edges());
        assert_eq!(g.slots().count(), distinct.len());
    }

    #[test]
    fn find_root_properties() {
        let mut g = sample(400, 2.0 / 400.0, 8).unwrap();
        let edges: Vec<u64> = g.slots().collect();
        for s in edges {
            let (u, v) = g.slot_endpoints(s);
            assert!(u < 400 && (400..800).contains(&v));
            assert_eq!(g.find_root(u as usize).unwrap(), g.find_root(v as usize).unwrap());
        }
        let mut sizes = 0;
        for r in g.roots().collect::<Vec<_>>() {
            assert_eq!(g.find_root(r).unwrap(), r);
            let (a, b, _) = g.root_counters(r);
            sizes += a + b;
        }
        assert_eq!(sizes, 800);
        let singleton = sample(10, 0.0, 0).unwrap();
        assert_eq!(singleton.root_of(7).unwrap(), 7);
    }

    #[test]
    fn edge_dump_format() {
        let g = sample(3, 1.0, 0).unwrap();
        let mut buf = Vec::new();
        g.dump_edges(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[0], "0 3");
        assert_eq!(lines[1], "0 4");
        assert_eq!(lines[8], "2 5");
    }

    #[test]
    fn edge_count_concentrates() {
        // Bin(1e6, 1.1e-3): mean 1100, sd 33.2; ±200 is ~6 sd
        let mut outside = 0;
        for seed in 0..1000 {
            let e = sample(1000, 1.1e-3, seed).unwrap().total_edges();
            if !(900..=1300).contains(&e) {
                outside += 1;
            }
        }
        assert!(outside <= 10, "{outside} seeds outside the band");
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: BTreeSet<u64> = (0..1000).map(|t| derive_seed(7, t)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }
}
