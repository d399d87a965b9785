use super::{AllocatorResult, Termination};
use crate::graph::NodeId;
use crate::model::{Allocation, Instance};

fn ad_order(instance: &Instance) -> Vec<usize> {
    let mut order: Vec<usize> = (0..instance.ad_count()).collect();
    order.sort_by_key(|&i| instance.ad(i).id);
    order
}

/// Gives every user its `kappa` best ads by `ctp * cpe`, ignoring budgets and
/// propagation.
pub fn myopic(instance: &Instance) -> AllocatorResult {
    let (n, h) = (instance.node_count(), instance.ad_count());
    let mut alloc = Allocation::empty(h, n);
    let mut direct = vec![0.0; h];
    let order = ad_order(instance);
    for u in 0..n as NodeId {
        let mut ranked = order.clone();
        // stable sort keeps lower ad ids first on ties
        ranked.sort_by(|&a, &b| {
            let va = instance.ctp(u, a) * instance.cpe(a);
            let vb = instance.ctp(u, b) * instance.cpe(b);
            vb.total_cmp(&va)
        });
        for &i in ranked.iter().take(instance.kappa(u) as usize) {
            alloc.insert(i, u);
            direct[i] += instance.ctp(u, i) * instance.cpe(i);
        }
    }
    AllocatorResult::new(
        instance,
        alloc,
        direct,
        Vec::new(),
        Termination::AttentionExhausted,
    )
}

/// Round-robin over ads by id; each ad takes its highest-CTP available user
/// until the accrued `ctp * cpe` reaches its budget.
pub fn myopic_plus(instance: &Instance) -> AllocatorResult {
    let (n, h) = (instance.node_count(), instance.ad_count());
    let mut alloc = Allocation::empty(h, n);
    let mut accrued = vec![0.0; h];
    let ranked: Vec<Vec<NodeId>> = (0..h)
        .map(|i| {
            let mut users: Vec<NodeId> = (0..n as NodeId).collect();
            users.sort_by(|&a, &b| instance.ctp(b, i).total_cmp(&instance.ctp(a, i)));
            users
        })
        .collect();
    let mut cursor = vec![0usize; h];
    let mut active = ad_order(instance);
    let mut starved = false;
    while !active.is_empty() {
        let mut still = Vec::with_capacity(active.len());
        for &i in &active {
            let pick = loop {
                let Some(&u) = ranked[i].get(cursor[i]) else {
                    break None;
                };
                cursor[i] += 1;
                if alloc.usage(u) < instance.kappa(u) && !alloc.contains(i, u) {
                    break Some(u);
                }
            };
            let Some(u) = pick else {
                starved = true;
                continue;
            };
            alloc.insert(i, u);
            accrued[i] += instance.ctp(u, i) * instance.cpe(i);
            if accrued[i] < instance.budget(i) {
                still.push(i);
            }
        }
        active = still;
    }
    let termination = if starved {
        Termination::NoFeasibleUser
    } else {
        Termination::BudgetsReached
    };
    AllocatorResult::new(instance, alloc, accrued, Vec::new(), termination)
}
