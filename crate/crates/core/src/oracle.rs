//! Ground truth for spread, revenue and regret.
//!
//! [`exact_spread`] enumerates possible worlds and is only usable on tiny
//! inputs; [`mc_spread`] simulates cascades at any scale. Both model the same
//! process: each seed clicks with its CTP, then clicks propagate over arcs
//! that are independently live with the ad's collapsed probability.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{ArcId, NodeId};
use crate::model::{AdEdgeView, Allocation, Instance};
use crate::rng;

/// Largest number of coins (uncertain reachable arcs plus seeds) the exact
/// oracle will enumerate.
pub const EXACT_COIN_CAP: usize = 24;

/// Expected number of clicks with its standard error. `runs == 0` marks an
/// exact value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub runs: u64,
}

impl SpreadEstimate {
    pub fn exact(mean: f64) -> Self {
        Self {
            mean,
            stderr: 0.0,
            runs: 0,
        }
    }
}

/// Exact expected clicks of `seeds` by possible-world enumeration.
///
/// Arc outcomes are enumerated explicitly. For each arc world the seed coins
/// are independent, so a node reachable from the seed subset `T` is clicked
/// with probability `1 - prod_{s in T} (1 - ctp(s))`; summing that over nodes
/// is the same as enumerating the seed coins jointly.
pub fn exact_spread(view: &AdEdgeView, ctps: &[f64], seeds: &[NodeId]) -> Result<SpreadEstimate> {
    let mut seeds: Vec<NodeId> = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    if seeds.is_empty() {
        return Ok(SpreadEstimate::exact(0.0));
    }

    // Nodes reachable from the seeds over arcs with p > 0, in compact ids.
    let mut compact = std::collections::HashMap::new();
    let mut nodes: Vec<NodeId> = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    for &s in &seeds {
        compact.insert(s, nodes.len());
        nodes.push(s);
        queue.push_back(s);
    }
    let mut certain: Vec<(usize, usize)> = Vec::new();
    let mut uncertain: Vec<(usize, usize, f64)> = Vec::new();
    while let Some(u) = queue.pop_front() {
        let cu = compact[&u];
        for (v, _, p) in view.out_edges(u) {
            if p <= 0.0 {
                continue;
            }
            let cv = *compact.entry(v).or_insert_with(|| {
                nodes.push(v);
                queue.push_back(v);
                nodes.len() - 1
            });
            if p >= 1.0 {
                certain.push((cu, cv));
            } else {
                uncertain.push((cu, cv, p));
            }
        }
        let coins = uncertain.len() + seeds.len();
        if coins > EXACT_COIN_CAP || nodes.len() > 64 {
            return Err(Error::CapExceeded {
                coins: coins.max(nodes.len()),
                cap: EXACT_COIN_CAP,
            });
        }
    }

    let fail: Vec<f64> = seeds.iter().map(|&s| 1.0 - ctps[s as usize]).collect();
    let mut base = vec![0u64; nodes.len()];
    for &(u, v) in &certain {
        base[u] |= 1 << v;
    }
    let mut enumerator = Worlds {
        uncertain: &uncertain,
        fail: &fail,
        seeds: seeds.len(),
        nodes: nodes.len(),
        adj: base,
        total: 0.0,
    };
    enumerator.walk(0, 1.0);
    Ok(SpreadEstimate::exact(enumerator.total))
}

struct Worlds<'a> {
    uncertain: &'a [(usize, usize, f64)],
    fail: &'a [f64],
    seeds: usize,
    nodes: usize,
    adj: Vec<u64>,
    total: f64,
}

impl Worlds<'_> {
    fn walk(&mut self, depth: usize, prob: f64) {
        if prob == 0.0 {
            return;
        }
        if depth == self.uncertain.len() {
            self.total += prob * self.expected_clicks();
            return;
        }
        let (u, v, p) = self.uncertain[depth];
        let bit = 1u64 << v;
        let had = self.adj[u] & bit != 0;
        self.adj[u] |= bit;
        self.walk(depth + 1, prob * p);
        if !had {
            self.adj[u] &= !bit;
        }
        self.walk(depth + 1, prob * (1.0 - p));
    }

    fn expected_clicks(&self) -> f64 {
        // seeds occupy compact ids 0..seeds
        let mut miss = vec![1.0f64; self.nodes];
        for s in 0..self.seeds {
            let mut reach = 1u64 << s;
            loop {
                let mut next = reach;
                let mut bits = reach;
                while bits != 0 {
                    let u = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    next |= self.adj[u];
                }
                if next == reach {
                    break;
                }
                reach = next;
            }
            let mut bits = reach;
            while bits != 0 {
                let w = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                miss[w] *= self.fail[s];
            }
        }
        miss.iter().map(|m| 1.0 - m).sum()
    }
}

/// One sampled possible world, addressed by `(seed, run)`. Coins are hashed
/// per arc and per node so every cascade in the same world sees the same
/// outcomes regardless of visiting order.
#[derive(Debug, Clone, Copy)]
pub struct World {
    key: u64,
}

impl World {
    pub fn new(seed: u64, run: u64) -> Self {
        Self {
            key: rng::key(&[rng::TAG_WORLD, seed, run]),
        }
    }

    #[inline]
    pub fn arc_live(&self, arc: ArcId, p: f64) -> bool {
        p >= 1.0
            || (p > 0.0
                && rng::to_unit(rng::mix64(
                    self.key ^ rng::mix64(rng::TAG_ARC ^ ((arc as u64) << 8)),
                )) < p)
    }

    #[inline]
    pub fn accepts(&self, u: NodeId, ctp: f64) -> bool {
        ctp >= 1.0
            || (ctp > 0.0
                && rng::to_unit(rng::mix64(
                    self.key ^ rng::mix64(rng::TAG_SEED ^ ((u as u64) << 8)),
                )) < ctp)
    }
}

/// Reusable visited-marks for cascades.
#[derive(Debug, Clone)]
pub struct CascadeScratch {
    stamp: Vec<u32>,
    epoch: u32,
    queue: Vec<NodeId>,
}

impl CascadeScratch {
    pub fn new(n: usize) -> Self {
        Self {
            stamp: vec![0; n],
            epoch: 0,
            queue: Vec::new(),
        }
    }

    fn reset(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        self.queue.clear();
    }
}

/// Number of clicks in world `w`: accepting seeds plus everything they reach
/// over live arcs.
pub fn cascade_in_world(
    view: &AdEdgeView,
    ctps: &[f64],
    seeds: &[NodeId],
    world: World,
    scratch: &mut CascadeScratch,
) -> u32 {
    scratch.reset();
    let epoch = scratch.epoch;
    for &s in seeds {
        if scratch.stamp[s as usize] != epoch && world.accepts(s, ctps[s as usize]) {
            scratch.stamp[s as usize] = epoch;
            scratch.queue.push(s);
        }
    }
    let mut head = 0;
    while head < scratch.queue.len() {
        let u = scratch.queue[head];
        head += 1;
        for (v, a, p) in view.out_edges(u) {
            if scratch.stamp[v as usize] != epoch && world.arc_live(a, p) {
                scratch.stamp[v as usize] = epoch;
                scratch.queue.push(v);
            }
        }
    }
    scratch.queue.len() as u32
}

/// Monte-Carlo estimate of expected clicks over `runs` sampled worlds.
///
/// World `r` is keyed by `(seed, r)`; runs are spread over the current rayon
/// pool and merged in run order, so the result does not depend on the number
/// of workers.
pub fn mc_spread(
    view: &AdEdgeView,
    ctps: &[f64],
    seeds: &[NodeId],
    runs: u64,
    seed: u64,
) -> SpreadEstimate {
    assert!(runs >= 1, "mc_spread needs at least one run");
    if seeds.is_empty() {
        return SpreadEstimate {
            mean: 0.0,
            stderr: 0.0,
            runs,
        };
    }
    let n = view.node_count();
    let counts: Vec<u32> = (0..runs as usize)
        .into_par_iter()
        .with_min_len(64)
        .map_init(
            || CascadeScratch::new(n),
            |scratch, r| cascade_in_world(view, ctps, seeds, World::new(seed, r as u64), scratch),
        )
        .collect();
    summarize(&counts)
}

fn summarize(counts: &[u32]) -> SpreadEstimate {
    let runs = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / runs;
    let stderr = if counts.len() > 1 {
        let var = counts
            .iter()
            .map(|&c| (c as f64 - mean).powi(2))
            .sum::<f64>()
            / (runs - 1.0);
        (var / runs).sqrt()
    } else {
        0.0
    };
    SpreadEstimate {
        mean,
        stderr,
        runs: counts.len() as u64,
    }
}

/// How spread is estimated by callers that need a point value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpreadOracle {
    Exact,
    MonteCarlo { runs: u64, seed: u64 },
}

impl SpreadOracle {
    pub fn estimate(
        &self,
        view: &AdEdgeView,
        ctps: &[f64],
        seeds: &[NodeId],
    ) -> Result<SpreadEstimate> {
        match *self {
            SpreadOracle::Exact => exact_spread(view, ctps, seeds),
            SpreadOracle::MonteCarlo { runs, seed } => Ok(mc_spread(view, ctps, seeds, runs, seed)),
        }
    }
}

/// Expected revenue `cpe * mean`.
pub fn revenue(spread: SpreadEstimate, cpe: f64) -> f64 {
    cpe * spread.mean
}

/// Regret of one ad: `|B' - revenue| + lambda * seeds`.
pub fn regret_single(budget: f64, revenue: f64, lambda: f64, seeds: usize) -> f64 {
    (budget - revenue).abs() + lambda * seeds as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdRegret {
    pub ad_id: u32,
    pub revenue: f64,
    pub budget: f64,
    pub budget_regret: f64,
    pub seeds: usize,
    pub seed_regret: f64,
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub per_ad: Vec<AdRegret>,
    pub total: f64,
}

/// Assembles per-ad and total regret from per-ad revenues.
pub fn regret_total(instance: &Instance, alloc: &Allocation, revenues: &[f64]) -> RegretReport {
    assert_eq!(revenues.len(), instance.ad_count());
    let lambda = instance.lambda();
    let per_ad: Vec<AdRegret> = revenues
        .iter()
        .enumerate()
        .map(|(i, &rev)| {
            let budget = instance.budget(i);
            let seeds = alloc.seeds(i).len();
            let budget_regret = (budget - rev).abs();
            let seed_regret = lambda * seeds as f64;
            AdRegret {
                ad_id: instance.ad(i).id,
                revenue: rev,
                budget,
                budget_regret,
                seeds,
                seed_regret,
                regret: budget_regret + seed_regret,
            }
        })
        .collect();
    let total = per_ad.iter().map(|r| r.regret).sum();
    RegretReport { per_ad, total }
}

/// Revenue of every ad's seed set under `oracle`.
pub fn allocation_revenues(
    instance: &Instance,
    alloc: &Allocation,
    oracle: SpreadOracle,
) -> Result<Vec<f64>> {
    (0..instance.ad_count())
        .map(|i| {
            let s = oracle.estimate(instance.view(i), instance.ctps(i), alloc.seeds(i))?;
            Ok(revenue(s, instance.cpe(i)))
        })
        .collect()
}

/// `Pi(S + x) - Pi(S)` for ad `ad`.
pub fn marginal_gain(
    instance: &Instance,
    ad: usize,
    seeds: &[NodeId],
    x: NodeId,
    oracle: SpreadOracle,
) -> Result<f64> {
    if seeds.contains(&x) {
        return Err(Error::invalid(format!("node {x} is already a seed")));
    }
    let (view, ctps, cpe) = (instance.view(ad), instance.ctps(ad), instance.cpe(ad));
    let before = oracle.estimate(view, ctps, seeds)?;
    let mut with = seeds.to_vec();
    with.push(x);
    let after = oracle.estimate(view, ctps, &with)?;
    Ok(cpe * (after.mean - before.mean))
}

/// Best single-node revenue of each ad as a fraction of its budget.
#[derive(Debug, Clone, PartialEq)]
pub struct PDiagnostics {
    pub p: Vec<f64>,
    pub p_max: f64,
    /// Ads whose `p_i` lies outside the open interval (0, 1).
    pub out_of_regime: Vec<usize>,
}

pub fn diagnostics_p(instance: &Instance, oracle: SpreadOracle) -> Result<PDiagnostics> {
    let mut p = Vec::with_capacity(instance.ad_count());
    for i in 0..instance.ad_count() {
        let (view, ctps) = (instance.view(i), instance.ctps(i));
        let mut best = 0.0f64;
        for u in 0..instance.node_count() as NodeId {
            best = best.max(oracle.estimate(view, ctps, &[u])?.mean);
        }
        p.push(best * instance.cpe(i) / instance.budget(i));
    }
    let p_max = p.iter().copied().fold(0.0, f64::max);
    let out_of_regime = p
        .iter()
        .enumerate()
        .filter(|(_, &pi)| !(pi > 0.0 && pi < 1.0))
        .map(|(i, _)| i)
        .collect();
    Ok(PDiagnostics {
        p,
        p_max,
        out_of_regime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{toy, toy_allocation_a, toy_allocation_b};
    use crate::graph::{parse_graph, TopicGraph};
    use crate::model::collapse;

    fn isolated(n: usize) -> AdEdgeView {
        collapse(&TopicGraph::new(n, 1, vec![]).unwrap(), &[1.0]).unwrap()
    }

    #[test]
    fn exact_on_toy_allocation_a() {
        let inst = toy(1, 0.0);
        let a = toy_allocation_a(&inst);
        let s = exact_spread(inst.view(0), inst.ctps(0), a.seeds(0)).unwrap();
        // 0.9 * (1 + 1 + ...) evaluated by hand from the arc structure
        assert!((s.mean - 5.5442).abs() < 5e-4, "{}", s.mean);
        assert_eq!(s.runs, 0);
    }

    #[test]
    fn exact_trivial_cases() {
        let inst = toy(1, 0.0);
        assert_eq!(
            exact_spread(inst.view(0), inst.ctps(0), &[]).unwrap().mean,
            0.0
        );
        let v = isolated(1);
        let s = exact_spread(&v, &[0.7], &[0]).unwrap();
        assert!((s.mean - 0.7).abs() < 1e-15);
    }

    #[test]
    fn exact_v3_singleton_matches_closed_form() {
        let inst = toy(1, 0.0);
        let s = exact_spread(inst.view(0), inst.ctps(0), &[2]).unwrap();
        let expected = 0.9 * (1.0 + 0.5 + 0.5 + (1.0 - 0.95f64.powi(2)));
        assert!((s.mean - expected).abs() < 1e-12);
        assert!((expected - 1.88775).abs() < 1e-12);
    }

    #[test]
    fn exact_refuses_large_inputs() {
        let mut text = String::from("nodes=30 topics=1\n");
        for u in 0..29 {
            text.push_str(&format!("{u} {} 0.5\n", u + 1));
        }
        let g = parse_graph(&text).unwrap();
        let v = collapse(&g, &[1.0]).unwrap();
        let err = exact_spread(&v, &[1.0; 30], &[0]).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { .. }));
    }

    #[test]
    fn mc_deterministic_world() {
        let v = isolated(5);
        let s = mc_spread(&v, &[1.0; 5], &[0, 2, 4], 100, 9);
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.stderr, 0.0);
        assert_eq!(mc_spread(&v, &[1.0; 5], &[], 10, 9).mean, 0.0);
    }

    #[test]
    fn mc_is_reproducible_and_close_to_exact() {
        let inst = toy(1, 0.0);
        let a = toy_allocation_a(&inst);
        let exact = exact_spread(inst.view(0), inst.ctps(0), a.seeds(0))
            .unwrap()
            .mean;
        let s1 = mc_spread(inst.view(0), inst.ctps(0), a.seeds(0), 50_000, 3);
        let s2 = mc_spread(inst.view(0), inst.ctps(0), a.seeds(0), 50_000, 3);
        assert_eq!(s1, s2);
        assert!(
            (s1.mean - exact).abs() <= 4.0 * s1.stderr,
            "{} vs {exact}",
            s1.mean
        );
    }

    #[test]
    fn regret_arithmetic() {
        assert!((regret_single(4.0, 5.55, 0.0, 6) - 1.55).abs() < 1e-12);
        assert_eq!(regret_single(2.0, 0.0, 0.0, 0), 2.0);
        assert!((regret_single(3.0, 3.0, 0.1, 3) - 0.3).abs() < 1e-12);
        assert!((revenue(SpreadEstimate::exact(6.3), 1.0) - 6.3).abs() < 1e-12);
        assert_eq!(revenue(SpreadEstimate::exact(0.0), 3.0), 0.0);
        assert_eq!(revenue(SpreadEstimate::exact(2.0), 5.5), 11.0);
    }

    #[test]
    fn regret_total_of_empty_allocation_is_total_budget() {
        let inst = toy(1, 0.3);
        let empty = Allocation::empty(4, 6);
        let report = regret_total(&inst, &empty, &[0.0; 4]);
        assert!((report.total - 9.0).abs() < 1e-12);
    }

    #[test]
    fn toy_regrets() {
        for (lambda, want_a, want_b) in [(0.0, 6.6, 2.7), (0.1, 7.2, 3.3)] {
            let inst = toy(1, lambda);
            for (alloc, want) in [
                (toy_allocation_a(&inst), want_a),
                (toy_allocation_b(&inst), want_b),
            ] {
                let rev = allocation_revenues(&inst, &alloc, SpreadOracle::Exact).unwrap();
                let rep = regret_total(&inst, &alloc, &rev);
                assert!(
                    (rep.total - want).abs() <= 0.15,
                    "lambda {lambda}: {} vs {want}",
                    rep.total
                );
                let sum: f64 = rep
                    .per_ad
                    .iter()
                    .map(|r| r.budget_regret + r.seed_regret)
                    .sum();
                assert!((sum - rep.total).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn marginal_gain_cases() {
        let inst = toy(1, 0.0);
        let g = marginal_gain(&inst, 0, &[], 2, SpreadOracle::Exact).unwrap();
        assert!((g - 1.88775).abs() < 1e-12);
        assert!(marginal_gain(&inst, 0, &[2], 2, SpreadOracle::Exact).is_err());
    }

    #[test]
    fn toy_p_diagnostics() {
        let inst = toy(1, 0.0);
        let d = diagnostics_p(&inst, SpreadOracle::Exact).unwrap();
        assert!((d.p[0] - 1.88775 / 4.0).abs() < 1e-12);
        assert!((d.p[3] - 0.6 * 2.0975).abs() < 1e-12);
        assert!(d.out_of_regime.contains(&3));
        assert!(!d.out_of_regime.contains(&0));
        assert!((d.p_max - d.p[3]).abs() < 1e-15);
    }

    #[test]
    fn zero_probability_graph_p_is_inverse_budget() {
        let g = parse_graph("nodes=3 topics=1\n0 1 0\n1 2 0\n").unwrap();
        let ad = crate::model::AdSpec {
            id: 0,
            gamma: vec![1.0],
            budget: 10.0,
            cpe: 1.0,
            ctp: crate::model::CtpSource::Constant { value: 1.0 },
            boost_beta: 0.0,
        };
        let inst = Instance::new(g, vec![ad], crate::model::Attention::Uniform(1), 0.0).unwrap();
        let d = diagnostics_p(&inst, SpreadOracle::Exact).unwrap();
        assert!((d.p[0] - 0.1).abs() < 1e-15);
    }
}
