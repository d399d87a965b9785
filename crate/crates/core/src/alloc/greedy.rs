use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{ad_regret, better, regret_drop, AllocatorResult, Step, Termination, MIN_DROP};
use crate::error::Result;
use crate::graph::NodeId;
use crate::model::{Allocation, Instance};
use crate::oracle::SpreadOracle;
use crate::rng;

// Slack on lazy upper bounds so rounding in the estimator never prunes the
// true best candidate.
const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
struct Entry {
    // marginal spread from the last evaluation; an upper bound afterwards
    gain: f64,
    node: NodeId,
    // seed count of the ad when `gain` was computed
    round: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.node.cmp(&self.node))
    }
}

struct AdState {
    oracle: SpreadOracle,
    spread: f64,
    heap: BinaryHeap<Entry>,
}

/// Best `(drop, node, new spread)` for ad `i`, evaluating lazily.
fn best_for_ad(
    instance: &Instance,
    alloc: &Allocation,
    i: usize,
    st: &mut AdState,
) -> Result<Option<(f64, NodeId, f64)>> {
    let seeds = alloc.seeds(i);
    let cpe = instance.cpe(i);
    let revenue = cpe * st.spread;
    let gap = instance.budget(i) - revenue;
    if gap <= 0.0 {
        return Ok(None);
    }
    let lambda = instance.lambda();
    let mut best: Option<(f64, NodeId, f64)> = None;
    let mut kept = Vec::new();
    let mut with = seeds.to_vec();
    with.push(0);
    while let Some(mut e) = st.heap.pop() {
        if alloc.usage(e.node) >= instance.kappa(e.node) || alloc.contains(i, e.node) {
            continue;
        }
        let bound = (cpe * e.gain).min(gap) - lambda;
        if let Some((d, _, _)) = best {
            if bound + BOUND_SLACK < d {
                kept.push(e);
                break;
            }
        }
        if e.round != seeds.len() {
            *with.last_mut().unwrap() = e.node;
            let s = st
                .oracle
                .estimate(instance.view(i), instance.ctps(i), &with)?
                .mean;
            e.gain = (s - st.spread).max(0.0);
            e.round = seeds.len();
        }
        let drop = regret_drop(instance, i, revenue, seeds.len(), cpe * e.gain);
        let wins = match best {
            None => true,
            Some((d, v, _)) => drop > d || (drop == d && e.node < v),
        };
        if wins {
            best = Some((drop, e.node, st.spread + e.gain));
        }
        kept.push(e);
    }
    st.heap.extend(kept);
    Ok(best.filter(|b| b.0 > MIN_DROP))
}

/// Repeatedly adds the feasible (user, ad) pair with the largest strict
/// regret decrease. Candidates are evaluated lazily: a stale marginal gain
/// bounds the current one, so it also bounds the achievable regret drop.
///
/// With a Monte-Carlo estimator every evaluation for ad `i` re-simulates the
/// candidate seed set over the same sampled worlds.
pub fn greedy(instance: &Instance, estimator: SpreadOracle) -> Result<AllocatorResult> {
    let (n, h) = (instance.node_count(), instance.ad_count());
    let mut alloc = Allocation::empty(h, n);
    let mut states: Vec<AdState> = (0..h)
        .map(|i| AdState {
            oracle: match estimator {
                SpreadOracle::Exact => SpreadOracle::Exact,
                SpreadOracle::MonteCarlo { runs, seed } => SpreadOracle::MonteCarlo {
                    runs,
                    seed: rng::key(&[seed, i as u64]),
                },
            },
            spread: 0.0,
            heap: (0..n as NodeId)
                .map(|node| Entry {
                    gain: f64::INFINITY,
                    node,
                    round: usize::MAX,
                })
                .collect(),
        })
        .collect();
    let mut steps = Vec::new();
    let mut total: f64 = (0..h).map(|i| ad_regret(instance, i, 0.0, 0)).sum();
    loop {
        let mut choice: Option<(f64, usize, NodeId, f64)> = None;
        for (i, st) in states.iter_mut().enumerate() {
            if let Some((drop, node, spread)) = best_for_ad(instance, &alloc, i, st)? {
                if better(instance, (drop, i), choice.map(|c| (c.0, c.1))) {
                    choice = Some((drop, i, node, spread));
                }
            }
        }
        let Some((drop, i, node, spread)) = choice else {
            break;
        };
        alloc.insert(i, node);
        states[i].spread = spread;
        steps.push(Step {
            ad: i,
            node,
            regret_before: total,
            regret_after: total - drop,
        });
        total -= drop;
    }
    let revenues = (0..h).map(|i| instance.cpe(i) * states[i].spread).collect();
    Ok(AllocatorResult::new(
        instance,
        alloc,
        revenues,
        steps,
        Termination::NoImprovingMove,
    ))
}
