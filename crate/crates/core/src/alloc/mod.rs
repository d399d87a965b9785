//! Allocators: Greedy, TIRM and the Myopic / Myopic+ baselines.

mod bounds;
mod greedy;
mod myopic;
mod tirm;

pub use bounds::{check_bounds, BoundCheck, BoundReport, BoundsCap, Verdict};
pub use greedy::greedy;
pub use myopic::{myopic, myopic_plus};
pub use tirm::{
    select_best_node, tirm, tirm_with, update_estimates, ResampleEvent, TirmAdState, TirmConfig,
};

use crate::graph::NodeId;
use crate::model::{Allocation, Instance};

/// Smallest regret decrease accepted as an improvement. Anything below is
/// floating-point noise.
pub(crate) const MIN_DROP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// No feasible (user, ad) pair strictly lowers regret.
    NoImprovingMove,
    /// Every ad reached its budget.
    BudgetsReached,
    /// Some ad still wants seeds but no feasible user is left.
    NoFeasibleUser,
    /// Every user received its share of ads.
    AttentionExhausted,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::NoImprovingMove => "no-improving-move",
            Termination::BudgetsReached => "budgets-reached",
            Termination::NoFeasibleUser => "no-feasible-user",
            Termination::AttentionExhausted => "attention-exhausted",
        }
    }
}

/// One allocation step with total internal regret around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub ad: usize,
    pub node: NodeId,
    pub regret_before: f64,
    pub regret_after: f64,
}

#[derive(Debug, Clone)]
pub struct AllocatorResult {
    pub allocation: Allocation,
    /// The allocator's own revenue estimate per ad.
    pub revenues: Vec<f64>,
    pub steps: Vec<Step>,
    pub termination: Termination,
    /// Final RR sample count per ad (TIRM only, zero otherwise).
    pub theta: Vec<u64>,
    /// Resampling snapshots (TIRM only, when tracing).
    pub resamples: Vec<ResampleEvent>,
}

impl AllocatorResult {
    fn new(
        instance: &Instance,
        allocation: Allocation,
        revenues: Vec<f64>,
        steps: Vec<Step>,
        termination: Termination,
    ) -> Self {
        Self {
            allocation,
            revenues,
            steps,
            termination,
            theta: vec![0; instance.ad_count()],
            resamples: Vec::new(),
        }
    }

    /// Total regret by the allocator's own estimates.
    pub fn internal_regret(&self, instance: &Instance) -> f64 {
        (0..instance.ad_count())
            .map(|i| {
                ad_regret(
                    instance,
                    i,
                    self.revenues[i],
                    self.allocation.seeds(i).len(),
                )
            })
            .sum()
    }
}

pub(crate) fn ad_regret(instance: &Instance, i: usize, revenue: f64, seeds: usize) -> f64 {
    crate::oracle::regret_single(instance.budget(i), revenue, instance.lambda(), seeds)
}

/// Regret decrease of ad `i` when its revenue grows by `gain`.
pub(crate) fn regret_drop(
    instance: &Instance,
    i: usize,
    revenue: f64,
    seeds: usize,
    gain: f64,
) -> f64 {
    ad_regret(instance, i, revenue, seeds) - ad_regret(instance, i, revenue + gain, seeds + 1)
}

/// True when candidate `(drop, ad)` beats the incumbent: larger drop, ties to
/// the lower ad id.
pub(crate) fn better(instance: &Instance, cand: (f64, usize), best: Option<(f64, usize)>) -> bool {
    match best {
        None => true,
        Some((d, i)) => cand.0 > d || (cand.0 == d && instance.ad(cand.1).id < instance.ad(i).id),
    }
}
