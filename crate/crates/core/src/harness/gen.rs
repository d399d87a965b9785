//! Synthetic graphs and campaigns.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Arc, NodeId, TopicGraph};
use crate::model::{AdSpec, CtpSource};
use crate::rng;

/// `m` distinct random arcs without self-loops, in generation order.
fn random_arcs(n: usize, m: usize, seed: u64) -> Result<Vec<(NodeId, NodeId)>> {
    if n < 2 && m > 0 {
        return Err(Error::invalid("need at least two nodes for arcs"));
    }
    let max = n as u128 * (n as u128).saturating_sub(1);
    if m as u128 > max {
        return Err(Error::invalid(format!(
            "{m} arcs do not fit in a simple graph on {n} nodes"
        )));
    }
    if n > u32::MAX as usize {
        return Err(Error::invalid("too many nodes"));
    }
    let mut rng = rng::stream(&[rng::TAG_GEN, seed, 0]);
    let mut seen = HashSet::with_capacity(m);
    let mut arcs = Vec::with_capacity(m);
    while arcs.len() < m {
        let u = rng.random_range(0..n as NodeId);
        let v = rng.random_range(0..n as NodeId);
        if u != v && seen.insert((u as u64) << 32 | v as u64) {
            arcs.push((u, v));
        }
    }
    Ok(arcs)
}

/// Random graph where every arc into `v` carries `1 / indegree(v)` in every
/// topic.
pub fn gen_weighted_cascade(n: usize, m: usize, topics: usize, seed: u64) -> Result<TopicGraph> {
    let pairs = random_arcs(n, m, seed)?;
    let mut indeg = vec![0u32; n];
    for &(_, v) in &pairs {
        indeg[v as usize] += 1;
    }
    let arcs = pairs
        .into_iter()
        .map(|(src, dst)| Arc {
            src,
            dst,
            probs: vec![1.0 / indeg[dst as usize] as f64; topics],
        })
        .collect();
    TopicGraph::new(n, topics, arcs)
}

/// Exponential variate with the given mean from a uniform `u` in `[0, 1)`.
pub fn exponential(mean: f64, u: f64) -> f64 {
    -mean * (1.0 - u).ln()
}

/// Random graph with per-topic probabilities drawn exponentially with
/// `mean`, clipped to `[0, 1]`.
pub fn gen_topical(n: usize, m: usize, topics: usize, mean: f64, seed: u64) -> Result<TopicGraph> {
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(Error::invalid(format!(
            "mean must be nonnegative, got {mean}"
        )));
    }
    let pairs = random_arcs(n, m, seed)?;
    let mut rng = rng::stream(&[rng::TAG_GEN, seed, 1]);
    let arcs = pairs
        .into_iter()
        .map(|(src, dst)| Arc {
            src,
            dst,
            probs: (0..topics)
                .map(|_| exponential(mean, rng.random::<f64>()).clamp(0.0, 1.0))
                .collect(),
        })
        .collect();
    TopicGraph::new(n, topics, arcs)
}

/// Recipe for a random campaign. Ranges are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSpec {
    pub ads: usize,
    pub budget: (f64, f64),
    #[serde(default = "unit_range")]
    pub cpe: (f64, f64),
    pub ctp: (f64, f64),
    /// Weight of each ad's home topic `i mod K`; the rest is spread randomly.
    #[serde(default = "default_focus")]
    pub focus: f64,
    #[serde(default)]
    pub boost_beta: f64,
}

fn unit_range() -> (f64, f64) {
    (1.0, 1.0)
}

fn default_focus() -> f64 {
    0.7
}

/// Ads `0..ads` with uniform budgets/CPEs in range and per-user CTPs drawn
/// uniformly from the CTP range.
pub fn gen_campaign(spec: &CampaignSpec, topics: usize, seed: u64) -> Result<Vec<AdSpec>> {
    if topics == 0 {
        return Err(Error::invalid("campaign needs at least one topic"));
    }
    if !(0.0..=1.0).contains(&spec.focus) {
        return Err(Error::invalid("focus must lie in [0, 1]"));
    }
    let mut rng = rng::stream(&[rng::TAG_GEN, seed, 2]);
    let mut pick = |(lo, hi): (f64, f64)| {
        if hi > lo {
            rng.random_range(lo..=hi)
        } else {
            lo
        }
    };
    let mut ads = Vec::with_capacity(spec.ads);
    for i in 0..spec.ads {
        let budget = pick(spec.budget);
        let cpe = pick(spec.cpe);
        let mut gamma: Vec<f64> = (0..topics).map(|_| pick((0.0, 1.0))).collect();
        let rest: f64 = gamma.iter().sum();
        let home = i % topics;
        if topics == 1 {
            gamma[0] = 1.0;
        } else {
            for (z, g) in gamma.iter_mut().enumerate() {
                let share = if rest > 0.0 {
                    *g / rest
                } else {
                    1.0 / topics as f64
                };
                *g = (1.0 - spec.focus) * share + if z == home { spec.focus } else { 0.0 };
            }
            let sum: f64 = gamma.iter().sum();
            gamma.iter_mut().for_each(|g| *g /= sum);
        }
        ads.push(AdSpec {
            id: i as u32,
            gamma,
            budget,
            cpe,
            ctp: CtpSource::Uniform {
                lo: spec.ctp.0,
                hi: spec.ctp.1,
                seed: rng::key(&[seed, 3]),
            },
            boost_beta: spec.boost_beta,
        });
    }
    Ok(ads)
}
