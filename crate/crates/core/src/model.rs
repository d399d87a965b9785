//! Advertisers, problem instances, per-ad edge views and allocations.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ArcId, NodeId, TopicGraph};
use crate::rng;

const MIXTURE_TOL: f64 = 1e-9;

/// Where an ad's click-through probabilities come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum CtpSource {
    /// Same CTP for every user.
    Constant { value: f64 },
    /// Explicit per-user data.
    Table(CtpTable),
    /// Per-user value in `[lo, hi]`, derived by hashing `(seed, user, ad id)`.
    Uniform { lo: f64, hi: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CtpTable {
    /// `values[u]` is the CTP of user `u` for this ad.
    Direct { values: Vec<f64> },
    /// `host_topics[u][z]` is user `u`'s click probability for topic `z`;
    /// the CTP is its average weighted by the ad's topic mixture.
    HostTopics { host_topics: Vec<Vec<f64>> },
}

/// One advertiser's campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdSpec {
    pub id: u32,
    pub gamma: Vec<f64>,
    pub budget: f64,
    pub cpe: f64,
    pub ctp: CtpSource,
    #[serde(default)]
    pub boost_beta: f64,
}

impl AdSpec {
    /// Budget after boosting: `(1 + beta) * B`.
    pub fn effective_budget(&self) -> f64 {
        (1.0 + self.boost_beta) * self.budget
    }

    fn validate(&self, n: usize, k: usize) -> Result<()> {
        let fail = |m: String| Err(Error::invalid(format!("ad {}: {m}", self.id)));
        check_mixture(&self.gamma, k)
            .map_err(|m| Error::invalid(format!("ad {}: {m}", self.id)))?;
        if !(self.budget > 0.0 && self.budget.is_finite()) {
            return fail(format!("budget must be positive, got {}", self.budget));
        }
        if !(self.cpe > 0.0 && self.cpe.is_finite()) {
            return fail(format!("cpe must be positive, got {}", self.cpe));
        }
        if !(self.boost_beta >= 0.0 && self.boost_beta.is_finite()) {
            return fail(format!(
                "boost_beta must be nonnegative, got {}",
                self.boost_beta
            ));
        }
        let in_unit = |p: f64| (0.0..=1.0).contains(&p);
        match &self.ctp {
            CtpSource::Constant { value } if !in_unit(*value) => {
                fail(format!("ctp {value} outside [0, 1]"))
            }
            CtpSource::Uniform { lo, hi, .. } if !(in_unit(*lo) && in_unit(*hi) && lo <= hi) => {
                fail(format!("uniform ctp range [{lo}, {hi}] invalid"))
            }
            CtpSource::Table(CtpTable::Direct { values }) => {
                if values.len() != n {
                    return fail(format!(
                        "ctp table has {} entries, graph has {n} nodes",
                        values.len()
                    ));
                }
                if let Some(p) = values.iter().find(|p| !in_unit(**p)) {
                    return fail(format!("ctp {p} outside [0, 1]"));
                }
                Ok(())
            }
            CtpSource::Table(CtpTable::HostTopics { host_topics }) => {
                if host_topics.len() != n {
                    return fail(format!(
                        "host topic table has {} rows, graph has {n} nodes",
                        host_topics.len()
                    ));
                }
                for row in host_topics {
                    if row.len() != k {
                        return fail(format!(
                            "host topic row has {} entries, expected {k}",
                            row.len()
                        ));
                    }
                    if let Some(p) = row.iter().find(|p| !in_unit(**p)) {
                        return fail(format!("host topic probability {p} outside [0, 1]"));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// CTP of user `u`; the source must already be validated.
    pub fn ctp_of(&self, u: NodeId) -> f64 {
        match &self.ctp {
            CtpSource::Constant { value } => *value,
            CtpSource::Table(CtpTable::Direct { values }) => values[u as usize],
            CtpSource::Table(CtpTable::HostTopics { host_topics }) => host_topics[u as usize]
                .iter()
                .zip(&self.gamma)
                .map(|(p, g)| p * g)
                .sum::<f64>()
                .clamp(0.0, 1.0),
            CtpSource::Uniform { lo, hi, seed } => {
                lo + (hi - lo) * rng::unit(&[rng::TAG_CTP, *seed, u as u64, self.id as u64])
            }
        }
    }
}

fn check_mixture(gamma: &[f64], k: usize) -> std::result::Result<(), String> {
    if gamma.len() != k {
        return Err(format!(
            "topic mixture has {} entries, graph has {k} topics",
            gamma.len()
        ));
    }
    if gamma.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
        return Err("topic mixture entries must be nonnegative".into());
    }
    let sum: f64 = gamma.iter().sum();
    if (sum - 1.0).abs() > MIXTURE_TOL {
        return Err(format!("topic mixture sums to {sum}, expected 1"));
    }
    Ok(())
}

/// Per-ad view of the graph: every arc carries the mixture-weighted
/// probability `sum_z gamma[z] * p[z]`, laid out in both CSR directions.
#[derive(Debug, Clone)]
pub struct AdEdgeView {
    n: usize,
    arc_p: Vec<f64>,
    in_offsets: Vec<usize>,
    in_src: Vec<NodeId>,
    in_p: Vec<f64>,
    out_offsets: Vec<usize>,
    out_dst: Vec<NodeId>,
    out_arc: Vec<ArcId>,
    out_p: Vec<f64>,
}

/// Collapses per-topic arc probabilities with the ad's topic mixture.
pub fn collapse(graph: &TopicGraph, gamma: &[f64]) -> Result<AdEdgeView> {
    if gamma.len() != graph.topic_count() {
        return Err(Error::invalid(format!(
            "topic mixture has {} entries, graph has {} topics",
            gamma.len(),
            graph.topic_count()
        )));
    }
    let arc_p: Vec<f64> = (0..graph.arc_count() as ArcId)
        .map(|a| {
            graph
                .arc_probs(a)
                .iter()
                .zip(gamma)
                .map(|(p, g)| p * g)
                .sum::<f64>()
                .clamp(0.0, 1.0)
        })
        .collect();
    Ok(AdEdgeView::with_arc_probs(graph, arc_p))
}

impl AdEdgeView {
    /// Builds a view from explicit per-arc probabilities (indexed by arc id).
    pub fn with_arc_probs(graph: &TopicGraph, arc_p: Vec<f64>) -> Self {
        assert_eq!(arc_p.len(), graph.arc_count());
        let n = graph.node_count();
        let mut in_offsets = Vec::with_capacity(n + 1);
        let mut out_offsets = Vec::with_capacity(n + 1);
        let m = graph.arc_count();
        let (mut in_src, mut in_p) = (Vec::with_capacity(m), Vec::with_capacity(m));
        let (mut out_dst, mut out_arc, mut out_p) = (
            Vec::with_capacity(m),
            Vec::with_capacity(m),
            Vec::with_capacity(m),
        );
        in_offsets.push(0);
        out_offsets.push(0);
        for v in 0..n as NodeId {
            for &a in graph.in_arcs(v) {
                in_src.push(graph.arc(a).0);
                in_p.push(arc_p[a as usize]);
            }
            in_offsets.push(in_src.len());
            for &a in graph.out_arcs(v) {
                out_dst.push(graph.arc(a).1);
                out_arc.push(a);
                out_p.push(arc_p[a as usize]);
            }
            out_offsets.push(out_dst.len());
        }
        Self {
            n,
            arc_p,
            in_offsets,
            in_src,
            in_p,
            out_offsets,
            out_dst,
            out_arc,
            out_p,
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn arc_count(&self) -> usize {
        self.arc_p.len()
    }

    /// Collapsed probability of arc `a`.
    #[inline]
    pub fn prob(&self, a: ArcId) -> f64 {
        self.arc_p[a as usize]
    }

    pub fn arc_probs(&self) -> &[f64] {
        &self.arc_p
    }

    /// `(source, probability)` of every arc entering `v`.
    #[inline]
    pub fn in_edges(&self, v: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        let r = self.in_offsets[v as usize]..self.in_offsets[v as usize + 1];
        self.in_src[r.clone()]
            .iter()
            .copied()
            .zip(self.in_p[r].iter().copied())
    }

    /// `(target, arc id, probability)` of every arc leaving `u`.
    #[inline]
    pub fn out_edges(&self, u: NodeId) -> impl Iterator<Item = (NodeId, ArcId, f64)> + '_ {
        let r = self.out_offsets[u as usize]..self.out_offsets[u as usize + 1];
        self.out_dst[r.clone()]
            .iter()
            .zip(&self.out_arc[r.clone()])
            .zip(&self.out_p[r])
            .map(|((&d, &a), &p)| (d, a, p))
    }
}

/// Per-user attention bounds.
#[derive(Debug, Clone, PartialEq)]
pub enum Attention {
    Uniform(u32),
    PerNode(Vec<u32>),
}

impl Attention {
    fn resolve(self, n: usize) -> Result<Vec<u32>> {
        match self {
            Attention::Uniform(k) => Ok(vec![k; n]),
            Attention::PerNode(v) if v.len() == n => Ok(v),
            Attention::PerNode(v) => Err(Error::invalid(format!(
                "attention vector has {} entries, graph has {n} nodes",
                v.len()
            ))),
        }
    }
}

/// Reads an attention file. The file is either a single integer (the bound
/// for every user) or lines `<node> <kappa>`; a leading `default <kappa>` line
/// sets the bound for unlisted users, otherwise `fallback` is used.
pub fn load_attention(path: impl AsRef<Path>, n: usize, fallback: u32) -> Result<Attention> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let rows: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i, l.split_whitespace().collect()))
        .collect();
    let parse_k = |line: usize, t: &str| {
        t.parse::<u32>()
            .map_err(|_| err(line, format!("malformed attention bound '{t}'")))
    };
    if let [(line, tok)] = rows.as_slice() {
        if tok.len() == 1 {
            return Ok(Attention::Uniform(parse_k(*line, tok[0])?));
        }
    }
    let mut default = fallback;
    let mut body = rows.as_slice();
    if let Some((line, tok)) = body.first() {
        if tok.len() == 2 && tok[0] == "default" {
            default = parse_k(*line, tok[1])?;
            body = &body[1..];
        }
    }
    let mut kappa = vec![default; n];
    for (line, tok) in body {
        if tok.len() != 2 {
            return Err(err(*line, "expected '<node> <kappa>'".into()));
        }
        let u: usize = tok[0]
            .parse()
            .map_err(|_| err(*line, format!("malformed node id '{}'", tok[0])))?;
        if u >= n {
            return Err(err(*line, format!("node id {u} out of range [0, {n})")));
        }
        kappa[u] = parse_k(*line, tok[1])?;
    }
    Ok(Attention::PerNode(kappa))
}

/// Reads a campaign file: a JSON array of ad records.
pub fn load_campaign(path: impl AsRef<Path>) -> Result<Vec<AdSpec>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ads: Vec<AdSpec> = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    Ok(ads)
}

pub fn save_campaign(ads: &[AdSpec], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(ads)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// A fully specified allocation problem. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Instance {
    graph: TopicGraph,
    ads: Vec<AdSpec>,
    budgets: Vec<f64>,
    kappa: Vec<u32>,
    lambda: f64,
    views: Vec<AdEdgeView>,
    ctps: Vec<Vec<f64>>,
}

impl Instance {
    pub fn new(
        graph: TopicGraph,
        ads: Vec<AdSpec>,
        attention: Attention,
        lambda: f64,
    ) -> Result<Self> {
        let n = graph.node_count();
        let k = graph.topic_count();
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        let mut ids = std::collections::HashSet::new();
        for ad in &ads {
            ad.validate(n, k)?;
            if !ids.insert(ad.id) {
                return Err(Error::invalid(format!("duplicate ad id {}", ad.id)));
            }
        }
        let kappa = attention.resolve(n)?;
        let views = ads
            .iter()
            .map(|ad| collapse(&graph, &ad.gamma))
            .collect::<Result<Vec<_>>>()?;
        let ctps = ads
            .iter()
            .map(|ad| (0..n as NodeId).map(|u| ad.ctp_of(u)).collect())
            .collect();
        let budgets = ads.iter().map(AdSpec::effective_budget).collect();
        Ok(Self {
            graph,
            ads,
            budgets,
            kappa,
            lambda,
            views,
            ctps,
        })
    }

    /// Same graph and ads with different attention bounds and penalty.
    pub fn with_constraints(&self, attention: Attention, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        let kappa = attention.resolve(self.node_count())?;
        Ok(Self {
            kappa,
            lambda,
            ..self.clone()
        })
    }

    pub fn graph(&self) -> &TopicGraph {
        &self.graph
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn ad_count(&self) -> usize {
        self.ads.len()
    }

    pub fn ads(&self) -> &[AdSpec] {
        &self.ads
    }

    pub fn ad(&self, i: usize) -> &AdSpec {
        &self.ads[i]
    }

    /// Index of the ad with the given id.
    pub fn ad_index(&self, id: u32) -> Option<usize> {
        self.ads.iter().position(|a| a.id == id)
    }

    /// Effective (boosted) budget of ad `i`.
    pub fn budget(&self, i: usize) -> f64 {
        self.budgets[i]
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    pub fn cpe(&self, i: usize) -> f64 {
        self.ads[i].cpe
    }

    pub fn kappa(&self, u: NodeId) -> u32 {
        self.kappa[u as usize]
    }

    pub fn kappas(&self) -> &[u32] {
        &self.kappa
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn view(&self, i: usize) -> &AdEdgeView {
        &self.views[i]
    }

    /// CTPs of every user for ad `i`.
    pub fn ctps(&self, i: usize) -> &[f64] {
        &self.ctps[i]
    }

    /// Click-through probability of user `u` for ad `i`.
    pub fn ctp(&self, u: NodeId, i: usize) -> f64 {
        self.ctps[i][u as usize]
    }
}

/// Seed sets `S_1..S_h` plus per-user usage counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    n: usize,
    seeds: Vec<Vec<NodeId>>,
    member: Vec<bool>,
    usage: Vec<u32>,
}

impl Allocation {
    pub fn empty(ad_count: usize, node_count: usize) -> Self {
        Self {
            n: node_count,
            seeds: vec![Vec::new(); ad_count],
            member: vec![false; ad_count * node_count],
            usage: vec![0; node_count],
        }
    }

    pub fn from_sets(node_count: usize, sets: Vec<Vec<NodeId>>) -> Result<Self> {
        let mut alloc = Self::empty(sets.len(), node_count);
        for (i, set) in sets.into_iter().enumerate() {
            for u in set {
                if u as usize >= node_count {
                    return Err(Error::invalid(format!(
                        "node {u} out of range [0, {node_count})"
                    )));
                }
                if !alloc.insert(i, u) {
                    return Err(Error::invalid(format!(
                        "node {u} listed twice for ad index {i}"
                    )));
                }
            }
        }
        Ok(alloc)
    }

    /// Adds `u` to ad `i`'s seed set; returns false if it was already there.
    pub fn insert(&mut self, i: usize, u: NodeId) -> bool {
        let slot = i * self.n + u as usize;
        if self.member[slot] {
            return false;
        }
        self.member[slot] = true;
        self.seeds[i].push(u);
        self.usage[u as usize] += 1;
        true
    }

    pub fn contains(&self, i: usize, u: NodeId) -> bool {
        self.member[i * self.n + u as usize]
    }

    /// Seeds of ad `i` in insertion order.
    pub fn seeds(&self, i: usize) -> &[NodeId] {
        &self.seeds[i]
    }

    pub fn ad_count(&self) -> usize {
        self.seeds.len()
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of ads `u` is a seed for.
    pub fn usage(&self, u: NodeId) -> u32 {
        self.usage[u as usize]
    }

    pub fn total_seeds(&self) -> usize {
        self.seeds.iter().map(Vec::len).sum()
    }

    /// Number of distinct users targeted by at least one ad.
    pub fn distinct_targeted(&self) -> usize {
        self.usage.iter().filter(|&&c| c > 0).count()
    }

    /// Renders one `ad_id: node node ...` line per ad.
    pub fn to_text(&self, instance: &Instance) -> String {
        let mut out = String::new();
        for (i, set) in self.seeds.iter().enumerate() {
            let _ = write!(out, "{}:", instance.ad(i).id);
            for u in set {
                let _ = write!(out, " {u}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text(instance)).map_err(|e| Error::io(path, e))
    }

    /// Parses the `ad_id: node node ...` format against an instance. Ads not
    /// mentioned get empty seed sets.
    pub fn parse(text: &str, instance: &Instance) -> std::result::Result<Self, (usize, String)> {
        let mut alloc = Self::empty(instance.ad_count(), instance.node_count());
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, rest) = line
                .split_once(':')
                .ok_or((lineno, "expected '<ad_id>: <node> ...'".to_string()))?;
            let id: u32 = id
                .trim()
                .parse()
                .map_err(|_| (lineno, format!("malformed ad id '{}'", id.trim())))?;
            let i = instance
                .ad_index(id)
                .ok_or((lineno, format!("unknown ad id {id}")))?;
            for tok in rest.split_whitespace() {
                let u: usize = tok
                    .parse()
                    .map_err(|_| (lineno, format!("malformed node id '{tok}'")))?;
                if u >= instance.node_count() {
                    return Err((lineno, format!("node id {u} out of range")));
                }
                if !alloc.insert(i, u as NodeId) {
                    return Err((lineno, format!("node {u} listed twice for ad {id}")));
                }
            }
        }
        Ok(alloc)
    }

    pub fn load(instance: &Instance, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, instance).map_err(|(line, msg)| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        })
    }
}

/// An attention-bound violation: `node` is a seed for `count > kappa` ads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub node: NodeId,
    pub count: u32,
    pub kappa: u32,
}

/// Lists every user promoted more ads than its attention bound allows.
pub fn validate_allocation(instance: &Instance, alloc: &Allocation) -> Vec<Violation> {
    (0..instance.node_count() as NodeId)
        .filter_map(|u| {
            let count = alloc.usage(u);
            let kappa = instance.kappa(u);
            (count > kappa).then_some(Violation {
                node: u,
                count,
                kappa,
            })
        })
        .collect()
}
