#![allow(dead_code)]

use adregret::graph::{Arc, NodeId, TopicGraph};
use adregret::model::{AdSpec, Attention, CtpSource, CtpTable, Instance};
use adregret::oracle::exact_spread;
use adregret::rng;
use rand::Rng;

/// Random tiny instance: up to `max_n` nodes, at most 10 arcs, one topic,
/// per-user CTPs, budgets a random fraction of the all-seeds revenue.
pub fn tiny_instance(
    r: &mut rng::Stream,
    max_n: usize,
    h: usize,
    kappa: u32,
    lambda: f64,
) -> Instance {
    let n = r.random_range(3..=max_n);
    let mut arcs = Vec::new();
    let mut used = std::collections::HashSet::new();
    let m = r.random_range(1..=10.min(n * (n - 1)));
    while arcs.len() < m {
        let (u, v) = (
            r.random_range(0..n as NodeId),
            r.random_range(0..n as NodeId),
        );
        if u != v && used.insert((u, v)) {
            arcs.push(Arc {
                src: u,
                dst: v,
                probs: vec![r.random_range(0.05..0.95)],
            });
        }
    }
    let graph = TopicGraph::new(n, 1, arcs).unwrap();
    let ads = (0..h)
        .map(|i| AdSpec {
            id: i as u32,
            gamma: vec![1.0],
            budget: 1.0,
            cpe: r.random_range(0.5..2.0),
            ctp: CtpSource::Table(CtpTable::Direct {
                values: (0..n).map(|_| r.random_range(0.2..1.0)).collect(),
            }),
            boost_beta: 0.0,
        })
        .collect();
    let probe = Instance::new(graph.clone(), ads, Attention::Uniform(kappa), lambda).unwrap();
    let all: Vec<NodeId> = (0..n as NodeId).collect();
    let ads = (0..h)
        .map(|i| {
            let full = probe.cpe(i)
                * exact_spread(probe.view(i), probe.ctps(i), &all)
                    .unwrap()
                    .mean;
            AdSpec {
                budget: full * r.random_range(0.15..0.7),
                ..probe.ad(i).clone()
            }
        })
        .collect();
    Instance::new(graph, ads, Attention::Uniform(kappa), lambda).unwrap()
}

pub fn random_subset(r: &mut rng::Stream, n: usize, exclude: NodeId) -> Vec<NodeId> {
    (0..n as NodeId)
        .filter(|&v| v != exclude && r.random_bool(0.3))
        .collect()
}

/// `ctps` with every node of `s` set to click surely.
pub fn sure_clicks(ctps: &[f64], s: &[NodeId]) -> Vec<f64> {
    let mut c = ctps.to_vec();
    s.iter().for_each(|&v| c[v as usize] = 1.0);
    c
}
