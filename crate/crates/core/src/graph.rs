//! Directed social graph with per-topic arc probabilities.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub type NodeId = u32;
pub type ArcId = u32;

/// Directed graph whose arcs carry one influence probability per topic.
///
/// Arcs keep their insertion (file) order and are addressed by [`ArcId`].
/// Both adjacency directions are stored in CSR form and list arc ids, so any
/// per-arc table (such as a collapsed probability vector) can be indexed from
/// either side.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicGraph {
    node_count: usize,
    topic_count: usize,
    src: Vec<NodeId>,
    dst: Vec<NodeId>,
    // arc-major, `topic_count` entries per arc
    probs: Vec<f64>,
    out_offsets: Vec<usize>,
    out_arcs: Vec<ArcId>,
    in_offsets: Vec<usize>,
    in_arcs: Vec<ArcId>,
}

/// One arc as supplied to [`TopicGraph::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub src: NodeId,
    pub dst: NodeId,
    pub probs: Vec<f64>,
}

impl TopicGraph {
    /// Builds and validates a graph. Fails on out-of-range ids, probabilities
    /// outside `[0, 1]`, wrong topic arity, or duplicate `(src, dst)` pairs.
    pub fn new(node_count: usize, topic_count: usize, arcs: Vec<Arc>) -> Result<Self> {
        if topic_count == 0 {
            return Err(Error::invalid("topic count must be at least 1"));
        }
        if node_count > NodeId::MAX as usize || arcs.len() > ArcId::MAX as usize {
            return Err(Error::invalid("graph too large for 32-bit ids"));
        }
        let mut seen = HashSet::with_capacity(arcs.len());
        let mut src = Vec::with_capacity(arcs.len());
        let mut dst = Vec::with_capacity(arcs.len());
        let mut probs = Vec::with_capacity(arcs.len() * topic_count);
        for (idx, arc) in arcs.into_iter().enumerate() {
            check_arc(node_count, topic_count, &arc).map_err(|msg| {
                Error::invalid(format!("arc #{idx} ({} -> {}): {msg}", arc.src, arc.dst))
            })?;
            if !seen.insert((arc.src, arc.dst)) {
                return Err(Error::invalid(format!(
                    "arc #{idx}: duplicate arc {} -> {}",
                    arc.src, arc.dst
                )));
            }
            src.push(arc.src);
            dst.push(arc.dst);
            probs.extend_from_slice(&arc.probs);
        }
        Ok(Self::from_parts(node_count, topic_count, src, dst, probs))
    }

    fn from_parts(
        node_count: usize,
        topic_count: usize,
        src: Vec<NodeId>,
        dst: Vec<NodeId>,
        probs: Vec<f64>,
    ) -> Self {
        let (out_offsets, out_arcs) = csr(node_count, &src);
        let (in_offsets, in_arcs) = csr(node_count, &dst);
        Self {
            node_count,
            topic_count,
            src,
            dst,
            probs,
            out_offsets,
            out_arcs,
            in_offsets,
            in_arcs,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn topic_count(&self) -> usize {
        self.topic_count
    }

    pub fn arc_count(&self) -> usize {
        self.src.len()
    }

    #[inline]
    pub fn arc(&self, a: ArcId) -> (NodeId, NodeId) {
        (self.src[a as usize], self.dst[a as usize])
    }

    /// Per-topic probabilities of arc `a`.
    #[inline]
    pub fn arc_probs(&self, a: ArcId) -> &[f64] {
        let k = self.topic_count;
        &self.probs[a as usize * k..(a as usize + 1) * k]
    }

    /// Arc ids leaving `u`, in insertion order.
    #[inline]
    pub fn out_arcs(&self, u: NodeId) -> &[ArcId] {
        &self.out_arcs[self.out_offsets[u as usize]..self.out_offsets[u as usize + 1]]
    }

    /// Arc ids entering `v`, in insertion order.
    #[inline]
    pub fn in_arcs(&self, v: NodeId) -> &[ArcId] {
        &self.in_arcs[self.in_offsets[v as usize]..self.in_offsets[v as usize + 1]]
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_offsets[v as usize + 1] - self.in_offsets[v as usize]
    }

    pub fn out_degree(&self, u: NodeId) -> usize {
        self.out_offsets[u as usize + 1] - self.out_offsets[u as usize]
    }

    pub fn arcs(&self) -> impl Iterator<Item = (ArcId, NodeId, NodeId)> + '_ {
        (0..self.arc_count() as ArcId).map(move |a| (a, self.src[a as usize], self.dst[a as usize]))
    }

    /// Renders the graph in the text edge-list format read by [`load_graph`].
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.arc_count() * 24);
        let _ = writeln!(out, "nodes={} topics={}", self.node_count, self.topic_count);
        for (a, s, d) in self.arcs() {
            let _ = write!(out, "{s} {d}");
            for p in self.arc_probs(a) {
                let _ = write!(out, " {p}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn check_arc(n: usize, k: usize, arc: &Arc) -> std::result::Result<(), String> {
    if arc.src as usize >= n || arc.dst as usize >= n {
        return Err(format!("node id out of range [0, {n})"));
    }
    if arc.probs.len() != k {
        return Err(format!(
            "expected {k} topic probabilities, found {}",
            arc.probs.len()
        ));
    }
    if arc.probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err("probability out of range [0, 1]".into());
    }
    Ok(())
}

fn csr(n: usize, keys: &[NodeId]) -> (Vec<usize>, Vec<ArcId>) {
    let mut offsets = vec![0usize; n + 1];
    for &k in keys {
        offsets[k as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut arcs = vec![0 as ArcId; keys.len()];
    for (a, &k) in keys.iter().enumerate() {
        arcs[cursor[k as usize]] = a as ArcId;
        cursor[k as usize] += 1;
    }
    (offsets, arcs)
}

/// Reads a graph in the text edge-list format:
///
/// ```text
/// nodes=<N> topics=<K>
/// <src> <dst> <p_1> ... <p_K>
/// ```
///
/// Blank lines and lines starting with `#` are ignored. Errors name the
/// offending line.
pub fn load_graph(path: impl AsRef<Path>) -> Result<TopicGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_graph(&text).map_err(|(line, msg)| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    })
}

/// Parses the text edge-list format; errors carry a 1-based line number.
pub fn parse_graph(text: &str) -> std::result::Result<TopicGraph, (usize, String)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or((1, "missing header line".to_string()))?;
    let (n, k) = parse_header(header).map_err(|m| (hline, m))?;
    if k == 0 {
        return Err((hline, "topics must be at least 1".into()));
    }

    let mut seen = HashSet::new();
    let mut src = Vec::new();
    let mut dst = Vec::new();
    let mut probs = Vec::new();
    for (lineno, line) in lines {
        let mut tok = line.split_whitespace();
        let s = parse_node(tok.next(), n).map_err(|m| (lineno, m))?;
        let d = parse_node(tok.next(), n).map_err(|m| (lineno, m))?;
        let mut count = 0;
        for t in tok {
            let p: f64 = t
                .parse()
                .map_err(|_| (lineno, format!("malformed probability '{t}'")))?;
            if !(0.0..=1.0).contains(&p) {
                return Err((lineno, format!("probability out of range: {t}")));
            }
            probs.push(p);
            count += 1;
        }
        if count != k {
            return Err((
                lineno,
                format!("topic count mismatch: expected {k} probabilities, found {count}"),
            ));
        }
        if !seen.insert((s, d)) {
            return Err((lineno, format!("duplicate arc {s} -> {d}")));
        }
        src.push(s);
        dst.push(d);
    }
    Ok(TopicGraph::from_parts(n, k, src, dst, probs))
}

fn parse_header(line: &str) -> std::result::Result<(usize, usize), String> {
    let mut nodes = None;
    let mut topics = None;
    for field in line.split_whitespace() {
        let (key, val) = field
            .split_once('=')
            .ok_or_else(|| format!("malformed header field '{field}'"))?;
        let val: usize = val
            .parse()
            .map_err(|_| format!("malformed header value '{field}'"))?;
        match key {
            "nodes" => nodes = Some(val),
            "topics" => topics = Some(val),
            _ => return Err(format!("unknown header field '{key}'")),
        }
    }
    match (nodes, topics) {
        (Some(n), Some(k)) if n <= NodeId::MAX as usize => Ok((n, k)),
        (Some(_), Some(_)) => Err("node count too large".into()),
        _ => Err("header must be 'nodes=<N> topics=<K>'".into()),
    }
}

fn parse_node(tok: Option<&str>, n: usize) -> std::result::Result<NodeId, String> {
    let tok =
        tok.ok_or_else(|| "malformed line: expected '<src> <dst> <p_1> ... <p_K>'".to_string())?;
    let id: u64 = tok
        .parse()
        .map_err(|_| format!("malformed node id '{tok}'"))?;
    if id as usize >= n {
        return Err(format!("node id {id} out of range [0, {n})"));
    }
    Ok(id as NodeId)
}

/// Dense-id mapping produced by [`load_labeled_edge_list`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeLabels {
    labels: Vec<String>,
}

impl NodeLabels {
    pub fn label(&self, id: NodeId) -> &str {
        &self.labels[id as usize]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Writes `<dense id> <label>` lines.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for (i, l) in self.labels.iter().enumerate() {
            let _ = writeln!(out, "{i} {l}");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Reads a raw edge list `<src label> <dst label> <p_1> ... <p_K>` with
/// arbitrary string labels and remaps them to dense ids in order of first
/// appearance.
pub fn load_labeled_edge_list(
    path: impl AsRef<Path>,
    topics: usize,
) -> Result<(TopicGraph, NodeLabels)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut ids: HashMap<String, NodeId> = HashMap::new();
    let mut labels = Vec::new();
    let mut intern = |s: &str| -> NodeId {
        *ids.entry(s.to_string()).or_insert_with(|| {
            labels.push(s.to_string());
            (labels.len() - 1) as NodeId
        })
    };
    let mut arcs = Vec::new();
    let mut lines_of = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 2 + topics {
            return Err(err(
                i + 1,
                format!(
                    "expected 2 labels and {topics} probabilities, found {} fields",
                    tok.len()
                ),
            ));
        }
        let probs = tok[2..]
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| err(i + 1, format!("malformed probability '{t}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let src = intern(tok[0]);
        let dst = intern(tok[1]);
        arcs.push(Arc { src, dst, probs });
        lines_of.push(i + 1);
    }
    let n = labels.len();
    for (arc, &line) in arcs.iter().zip(&lines_of) {
        check_arc(n, topics, arc).map_err(|m| err(line, m))?;
    }
    let graph = TopicGraph::new(n, topics, arcs)?;
    Ok((graph, NodeLabels { labels }))
}
