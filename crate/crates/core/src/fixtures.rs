//! The six-user, four-ad toy network used throughout the docs and tests.
//!
//! Users `v1..v6` are nodes `0..5`; ads `a, b, c, d` have ids `0..3`.
//! Arcs: `v1->v3`, `v2->v3` (0.2), `v3->v4`, `v3->v5` (0.5), `v4->v6`,
//! `v5->v6` (0.1), identical for every ad. CTPs are 0.9 / 0.8 / 0.7 / 0.6 for
//! every user, budgets 4 / 2 / 2 / 1, CPE 1.

use crate::graph::{Arc, TopicGraph};
use crate::model::{AdSpec, Allocation, Attention, CtpSource, Instance};

pub fn toy_graph() -> TopicGraph {
    let arcs = [
        (0, 2, 0.2),
        (1, 2, 0.2),
        (2, 3, 0.5),
        (2, 4, 0.5),
        (3, 5, 0.1),
        (4, 5, 0.1),
    ]
    .into_iter()
    .map(|(src, dst, p)| Arc {
        src,
        dst,
        probs: vec![p],
    })
    .collect();
    TopicGraph::new(6, 1, arcs).expect("fixture graph is valid")
}

pub fn toy_ads() -> Vec<AdSpec> {
    [(0.9, 4.0), (0.8, 2.0), (0.7, 2.0), (0.6, 1.0)]
        .into_iter()
        .enumerate()
        .map(|(id, (ctp, budget))| AdSpec {
            id: id as u32,
            gamma: vec![1.0],
            budget,
            cpe: 1.0,
            ctp: CtpSource::Constant { value: ctp },
            boost_beta: 0.0,
        })
        .collect()
}

pub fn toy(kappa: u32, lambda: f64) -> Instance {
    Instance::new(toy_graph(), toy_ads(), Attention::Uniform(kappa), lambda)
        .expect("fixture instance is valid")
}

/// Every user gets ad `a`.
pub fn toy_allocation_a(instance: &Instance) -> Allocation {
    Allocation::from_sets(
        instance.node_count(),
        vec![(0..6).collect(), vec![], vec![], vec![]],
    )
    .expect("valid")
}

/// `a -> {v1, v2}`, `b -> {v3}`, `c -> {v4, v5}`, `d -> {v6}`.
pub fn toy_allocation_b(instance: &Instance) -> Allocation {
    Allocation::from_sets(
        instance.node_count(),
        vec![vec![0, 1], vec![2], vec![3, 4], vec![5]],
    )
    .expect("valid")
}
