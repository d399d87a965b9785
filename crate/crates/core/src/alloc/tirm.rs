use std::collections::BinaryHeap;

use super::{ad_regret, better, regret_drop, AllocatorResult, Step, Termination, MIN_DROP};
use crate::error::Result;
use crate::graph::NodeId;
use crate::model::{Allocation, Instance};
use crate::sampling::{
    estimate_opt_lb, theta_bound, RrCollection, RrKind, RrStorage, SampleParams,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TirmConfig {
    pub params: SampleParams,
    pub seed: u64,
    /// RR sets drawn for each OPT lower-bound estimate.
    pub pilot_size: u64,
    /// Record a [`ResampleEvent`] whenever an ad's sample grows.
    pub trace: bool,
}

impl TirmConfig {
    pub fn new(params: SampleParams, seed: u64) -> Self {
        Self {
            params,
            seed,
            pilot_size: 10_000,
            trace: false,
        }
    }
}

/// State of one ad after a resampling round.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleEvent {
    pub ad: usize,
    pub seed_target: usize,
    pub theta: u64,
    pub opt_lb: f64,
    pub seeds: Vec<NodeId>,
    /// Fraction of all sampled sets covered by `seeds`.
    pub coverage: f64,
}

/// Per-ad TIRM bookkeeping.
#[derive(Debug, Clone)]
pub struct TirmAdState {
    pub ad: usize,
    pub seeds: Vec<NodeId>,
    /// Current seed-size estimate.
    pub target: usize,
    pub opt_lb: f64,
    pub rr: RrCollection,
    /// Seeds in selection order with the sets attributed to each.
    pub log: Vec<(NodeId, u64)>,
    pub revenue: f64,
    heap: BinaryHeap<(u32, std::cmp::Reverse<NodeId>)>,
}

impl TirmAdState {
    /// Fresh state with a sample sized for one seed.
    pub fn new(instance: &Instance, ad: usize, config: &TirmConfig) -> Result<Self> {
        let n = instance.node_count();
        let view = instance.view(ad);
        let id = instance.ad(ad).id as u64;
        let opt_lb = estimate_opt_lb(
            view,
            1,
            config.pilot_size,
            crate::rng::key(&[config.seed, id, 1]),
        )?;
        let theta = theta_bound(1, config.params, n, opt_lb)?;
        let mut rr =
            RrCollection::with_storage(RrKind::Rr, RrStorage::IndexOnly, n, config.seed, id);
        rr.extend(theta, view, None)?;
        let mut st = Self {
            ad,
            seeds: Vec::new(),
            target: 1,
            opt_lb,
            rr,
            log: Vec::new(),
            revenue: 0.0,
            heap: BinaryHeap::new(),
        };
        st.rebuild_heap();
        Ok(st)
    }

    pub fn theta(&self) -> u64 {
        self.rr.theta()
    }

    /// Revenue credited for `cov` sets when seeding `v`:
    /// `cpe * n * ctp(v) * cov / theta`.
    pub fn scaled(&self, instance: &Instance, v: NodeId, cov: u64) -> f64 {
        instance.cpe(self.ad) * instance.node_count() as f64 * instance.ctp(v, self.ad) * cov as f64
            / self.theta() as f64
    }

    fn rebuild_heap(&mut self) {
        let rr = &self.rr;
        self.heap = (0..rr.node_count() as NodeId)
            .map(|v| (rr.residual_coverage(v), std::cmp::Reverse(v)))
            .filter(|&(c, _)| c > 0)
            .collect();
    }

    fn recompute_revenue(&mut self, instance: &Instance) {
        self.revenue = self
            .log
            .iter()
            .map(|&(v, cov)| self.scaled(instance, v, cov))
            .sum();
    }
}

/// Feasible node with the largest residual coverage (ties to the lower node
/// id), or `None` when no feasible node covers a live set.
pub fn select_best_node(
    state: &mut TirmAdState,
    instance: &Instance,
    alloc: &Allocation,
) -> Option<(NodeId, u32)> {
    while let Some(&(cov, std::cmp::Reverse(v))) = state.heap.peek() {
        if alloc.usage(v) >= instance.kappa(v) || alloc.contains(state.ad, v) {
            state.heap.pop();
            continue;
        }
        let now = state.rr.residual_coverage(v);
        if now != cov {
            state.heap.pop();
            if now > 0 {
                state.heap.push((now, std::cmp::Reverse(v)));
            }
            continue;
        }
        return Some((v, cov));
    }
    None
}

/// Credits sets sampled since `old_theta` to existing seeds in selection
/// order, removing each set as it is attributed, then rescales revenue.
pub fn update_estimates(state: &mut TirmAdState, instance: &Instance, old_theta: u64) -> f64 {
    for k in 0..state.log.len() {
        let v = state.log[k].0;
        state.log[k].1 += state.rr.remove_containing(v, old_theta) as u64;
    }
    state.recompute_revenue(instance);
    state.rebuild_heap();
    state.revenue
}

/// Regret minimization over RR sets with iteratively grown sample sizes.
pub fn tirm(instance: &Instance, params: SampleParams, seed: u64) -> Result<AllocatorResult> {
    tirm_with(instance, &TirmConfig::new(params, seed))
}

pub fn tirm_with(instance: &Instance, config: &TirmConfig) -> Result<AllocatorResult> {
    let (n, h) = (instance.node_count(), instance.ad_count());
    let mut alloc = Allocation::empty(h, n);
    let mut states = (0..h)
        .map(|i| TirmAdState::new(instance, i, config))
        .collect::<Result<Vec<_>>>()?;
    let mut steps = Vec::new();
    let mut resamples = Vec::new();
    let mut total: f64 = (0..h).map(|i| ad_regret(instance, i, 0.0, 0)).sum();

    loop {
        let mut choice: Option<(f64, usize, NodeId, u32)> = None;
        for (i, st) in states.iter_mut().enumerate() {
            let Some((v, cov)) = select_best_node(st, instance, &alloc) else {
                continue;
            };
            let gain = st.scaled(instance, v, cov as u64);
            let drop = regret_drop(instance, i, st.revenue, st.seeds.len(), gain);
            if drop > MIN_DROP && better(instance, (drop, i), choice.map(|c| (c.0, c.1))) {
                choice = Some((drop, i, v, cov));
            }
        }
        let Some((_, i, v, cov)) = choice else { break };
        let st = &mut states[i];
        let before_ad = ad_regret(instance, i, st.revenue, st.seeds.len());
        alloc.insert(i, v);
        st.seeds.push(v);
        st.log.push((v, cov as u64));
        st.rr.remove_containing(v, 0);
        st.recompute_revenue(instance);
        let after_ad = ad_regret(instance, i, st.revenue, st.seeds.len());
        steps.push(Step {
            ad: i,
            node: v,
            regret_before: total,
            regret_after: total - before_ad + after_ad,
        });
        total += after_ad - before_ad;

        if st.seeds.len() >= st.target && st.target < n {
            let regret = ad_regret(instance, i, st.revenue, st.seeds.len());
            let per_seed = st.scaled(instance, v, cov as u64);
            let grow = if per_seed > 0.0 {
                (regret / per_seed).floor()
            } else {
                1.0
            };
            st.target = (st.target + (grow.max(1.0).min(n as f64) as usize)).min(n);
            let id = instance.ad(i).id as u64;
            st.opt_lb = estimate_opt_lb(
                instance.view(i),
                st.target,
                config.pilot_size,
                crate::rng::key(&[config.seed, id, st.target as u64]),
            )?;
            let old = st.theta();
            let want = theta_bound(st.target, config.params, n, st.opt_lb)?.max(old);
            st.rr.extend(want - old, instance.view(i), None)?;
            update_estimates(st, instance, old);
            if config.trace {
                resamples.push(ResampleEvent {
                    ad: i,
                    seed_target: st.target,
                    theta: st.theta(),
                    opt_lb: st.opt_lb,
                    seeds: st.seeds.clone(),
                    coverage: st.log.iter().map(|&(_, c)| c).sum::<u64>() as f64
                        / st.theta() as f64,
                });
            }
            // re-estimation moves the regret; the next step starts from here
            total += ad_regret(instance, i, st.revenue, st.seeds.len()) - after_ad;
        }
    }

    let revenues = states.iter().map(|s| s.revenue).collect();
    let mut result = AllocatorResult::new(
        instance,
        alloc,
        revenues,
        steps,
        Termination::NoImprovingMove,
    );
    result.theta = states.iter().map(TirmAdState::theta).collect();
    result.resamples = resamples;
    Ok(result)
}
