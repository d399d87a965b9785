//! Reverse-reachable sets: RR and RRC sampling, the coverage estimator, the
//! sample-size bound and a pilot lower bound on the optimal spread.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::model::AdEdgeView;
use crate::rng::{self, Stream};

/// One sampled set. For RRC sets `members` may be empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RrSet {
    pub root: NodeId,
    pub members: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RrKind {
    /// Plain reverse-reachable sets (every node accepts).
    Rr,
    /// Membership additionally needs the node's click coin.
    Rrc,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleParams {
    pub epsilon: f64,
    pub ell: f64,
}

impl SampleParams {
    pub fn new(epsilon: f64, ell: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::invalid(format!(
                "epsilon must lie in (0,1), got {epsilon}"
            )));
        }
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::invalid(format!("ell must be positive, got {ell}")));
        }
        Ok(Self { epsilon, ell })
    }
}

impl Default for SampleParams {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            ell: 1.0,
        }
    }
}

/// Visited marks reused across samples.
pub struct SampleScratch {
    stamp: Vec<u32>,
    epoch: u32,
    queue: Vec<NodeId>,
}

impl SampleScratch {
    pub fn new(n: usize) -> Self {
        Self {
            stamp: vec![0; n],
            epoch: 0,
            queue: Vec::new(),
        }
    }

    fn reset(&mut self) -> u32 {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        self.queue.clear();
        self.epoch
    }
}

#[inline]
fn flip(rng: &mut Stream, p: f64) -> bool {
    if p >= 1.0 {
        true
    } else if p <= 0.0 {
        false
    } else {
        rng.random::<f64>() < p
    }
}

/// Reverse BFS from a uniform root. Each in-arc of a dequeued node is flipped
/// once; arcs into nodes already reached are skipped without a flip.
/// With `ctps`, a reached node joins `out` only if its own coin succeeds, but
/// is traversed either way. Returns the root.
fn sample_into(
    view: &AdEdgeView,
    ctps: Option<&[f64]>,
    rng: &mut Stream,
    scratch: &mut SampleScratch,
    out: &mut Vec<NodeId>,
) -> NodeId {
    let epoch = scratch.reset();
    let root = rng.random_range(0..view.node_count() as NodeId);
    scratch.stamp[root as usize] = epoch;
    scratch.queue.push(root);
    let accept = |rng: &mut Stream, u: NodeId| ctps.is_none_or(|c| flip(rng, c[u as usize]));
    if accept(rng, root) {
        out.push(root);
    }
    let mut head = 0;
    while head < scratch.queue.len() {
        let u = scratch.queue[head];
        head += 1;
        for (v, p) in view.in_edges(u) {
            if scratch.stamp[v as usize] == epoch {
                continue;
            }
            if flip(rng, p) {
                scratch.stamp[v as usize] = epoch;
                scratch.queue.push(v);
                if accept(rng, v) {
                    out.push(v);
                }
            }
        }
    }
    root
}

/// One RR set drawn with `rng`.
pub fn sample_rr(view: &AdEdgeView, rng: &mut Stream) -> RrSet {
    let mut members = Vec::new();
    let root = sample_into(
        view,
        None,
        rng,
        &mut SampleScratch::new(view.node_count()),
        &mut members,
    );
    RrSet { root, members }
}

/// One RRC set drawn with `rng`.
pub fn sample_rrc(view: &AdEdgeView, ctps: &[f64], rng: &mut Stream) -> RrSet {
    let mut members = Vec::new();
    let root = sample_into(
        view,
        Some(ctps),
        rng,
        &mut SampleScratch::new(view.node_count()),
        &mut members,
    );
    RrSet { root, members }
}

const CHUNK: usize = 2048;
// chunks sampled in parallel before their sets are merged
const GROUP: usize = 64;
const DUMP_MAGIC: &[u8; 8] = b"ADRRSET\0";
const DUMP_VERSION: u32 = 1;

/// What a collection keeps per set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RrStorage {
    /// Member lists plus the inverted index.
    Full,
    /// Only the inverted index. Member lists, [`RrCollection::set`] and
    /// dumps are unavailable and residual coverage is counted on demand.
    IndexOnly,
}

/// Ascending set ids, stored as LEB128 gaps.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct IdList {
    bytes: Vec<u8>,
    last: u32,
    len: u32,
}

impl IdList {
    fn push(&mut self, id: u32) {
        debug_assert!(self.len == 0 || id > self.last);
        let mut gap = id - self.last;
        while gap >= 0x80 {
            self.bytes.push(gap as u8 | 0x80);
            gap >>= 7;
        }
        self.bytes.push(gap as u8);
        self.last = id;
        self.len += 1;
    }

    fn iter(&self) -> IdIter<'_> {
        IdIter {
            bytes: &self.bytes,
            pos: 0,
            cur: 0,
        }
    }
}

struct IdIter<'a> {
    bytes: &'a [u8],
    pos: usize,
    cur: u32,
}

impl Iterator for IdIter<'_> {
    type Item = u32;

    #[inline]
    fn next(&mut self) -> Option<u32> {
        let mut gap = 0u32;
        let mut shift = 0;
        loop {
            let b = *self.bytes.get(self.pos)?;
            self.pos += 1;
            gap |= ((b & 0x7f) as u32) << shift;
            if b < 0x80 {
                break;
            }
            shift += 7;
        }
        self.cur += gap;
        Some(self.cur)
    }
}

/// Sampled sets of one ad with an inverted index and per-set removal flags.
///
/// Set `k` is drawn from a stream addressed by `(kind, master seed, ad, k)`,
/// so contents never depend on how sampling was batched or parallelized.
#[derive(Debug, Clone, PartialEq)]
pub struct RrCollection {
    kind: RrKind,
    storage: RrStorage,
    tag: u64,
    master: u64,
    ad: u64,
    n: usize,
    roots: Vec<NodeId>,
    entries: u64,
    // Full storage only
    offsets: Vec<u64>,
    members: Vec<NodeId>,
    residual: Vec<u32>,
    removed: Vec<bool>,
    removed_count: usize,
    // Set ids per node; entries of removed sets are dropped lazily.
    index: Vec<IdList>,
}

impl RrCollection {
    pub fn new(kind: RrKind, n: usize, master_seed: u64, ad: u64) -> Self {
        Self::with_storage(kind, RrStorage::Full, n, master_seed, ad)
    }

    pub fn with_storage(
        kind: RrKind,
        storage: RrStorage,
        n: usize,
        master_seed: u64,
        ad: u64,
    ) -> Self {
        let tag = match kind {
            RrKind::Rr => rng::TAG_RR,
            RrKind::Rrc => rng::TAG_RRC,
        };
        Self::with_tag(kind, storage, tag, n, master_seed, ad)
    }

    fn with_tag(
        kind: RrKind,
        storage: RrStorage,
        tag: u64,
        n: usize,
        master: u64,
        ad: u64,
    ) -> Self {
        let full = storage == RrStorage::Full;
        Self {
            kind,
            storage,
            tag,
            master,
            ad,
            n,
            roots: Vec::new(),
            entries: 0,
            offsets: if full { vec![0] } else { Vec::new() },
            members: Vec::new(),
            residual: if full { vec![0; n] } else { Vec::new() },
            removed: Vec::new(),
            removed_count: 0,
            index: vec![IdList::default(); n],
        }
    }

    /// A collection with `theta` fresh sets.
    pub fn sample(
        kind: RrKind,
        view: &AdEdgeView,
        ctps: Option<&[f64]>,
        theta: u64,
        master_seed: u64,
        ad: u64,
    ) -> Result<Self> {
        let mut c = Self::new(kind, view.node_count(), master_seed, ad);
        c.extend(theta, view, ctps)?;
        Ok(c)
    }

    /// Appends `additional` sets of the collection's kind. Existing sets and
    /// their removal flags are untouched.
    pub fn extend(
        &mut self,
        additional: u64,
        view: &AdEdgeView,
        ctps: Option<&[f64]>,
    ) -> Result<()> {
        match (self.kind, ctps) {
            (RrKind::Rr, Some(_)) => return Err(Error::invalid("RR collection takes no CTPs")),
            (RrKind::Rrc, None) => return Err(Error::invalid("RRC collection needs CTPs")),
            _ => {}
        }
        if view.node_count() != self.n {
            return Err(Error::invalid(
                "view node count differs from the collection's",
            ));
        }
        if let Some(c) = ctps {
            if c.len() != self.n {
                return Err(Error::invalid("CTP vector length differs from node count"));
            }
        }
        if additional == 0 {
            return Ok(());
        }
        if self.n == 0 {
            return Err(Error::invalid("cannot sample from an empty graph"));
        }
        let start = self.roots.len() as u64;
        let end = start + additional;
        if end > u32::MAX as u64 {
            return Err(Error::invalid("too many sets for one collection"));
        }
        let chunks = (additional as usize).div_ceil(CHUNK);
        let (tag, master, ad, n) = (self.tag, self.master, self.ad, self.n);
        for group in (0..chunks).step_by(GROUP) {
            let batches: Vec<(Vec<NodeId>, Vec<u32>, Vec<NodeId>)> = (group
                ..(group + GROUP).min(chunks))
                .into_par_iter()
                .map_init(
                    || SampleScratch::new(n),
                    |scratch, c| {
                        let lo = start + (c * CHUNK) as u64;
                        let hi = (lo + CHUNK as u64).min(end);
                        let mut roots = Vec::with_capacity((hi - lo) as usize);
                        let mut lens = Vec::with_capacity((hi - lo) as usize);
                        let mut flat = Vec::new();
                        for k in lo..hi {
                            let mut rng = rng::stream(&[tag, master, ad, k]);
                            let before = flat.len();
                            roots.push(sample_into(view, ctps, &mut rng, scratch, &mut flat));
                            lens.push((flat.len() - before) as u32);
                        }
                        (roots, lens, flat)
                    },
                )
                .collect();
            for (roots, lens, flat) in batches {
                self.append(roots, lens, flat);
            }
        }
        if self.storage == RrStorage::IndexOnly {
            self.index.iter_mut().for_each(|l| l.bytes.shrink_to_fit());
        }
        Ok(())
    }

    fn append(&mut self, roots: Vec<NodeId>, lens: Vec<u32>, flat: Vec<NodeId>) {
        let full = self.storage == RrStorage::Full;
        let mut pos = 0usize;
        for (root, len) in roots.into_iter().zip(lens) {
            let id = self.roots.len() as u32;
            let set = &flat[pos..pos + len as usize];
            pos += len as usize;
            for &v in set {
                self.index[v as usize].push(id);
            }
            if full {
                for &v in set {
                    self.residual[v as usize] += 1;
                }
                self.members.extend_from_slice(set);
                self.offsets.push(self.members.len() as u64);
            }
            self.entries += len as u64;
            self.roots.push(root);
            self.removed.push(false);
        }
    }

    pub fn kind(&self) -> RrKind {
        self.kind
    }

    pub fn storage(&self) -> RrStorage {
        self.storage
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Total number of sets ever sampled, removed ones included.
    pub fn theta(&self) -> u64 {
        self.roots.len() as u64
    }

    pub fn root(&self, k: usize) -> NodeId {
        self.roots[k]
    }

    /// Panics on an index-only collection.
    pub fn set(&self, k: usize) -> RrSet {
        RrSet {
            root: self.roots[k],
            members: self.members_of(k).to_vec(),
        }
    }

    /// Panics on an index-only collection.
    pub fn members_of(&self, k: usize) -> &[NodeId] {
        assert!(
            self.storage == RrStorage::Full,
            "index-only collection keeps no member lists"
        );
        &self.members[self.offsets[k] as usize..self.offsets[k + 1] as usize]
    }

    pub fn is_removed(&self, k: usize) -> bool {
        self.removed[k]
    }

    pub fn removed_count(&self) -> usize {
        self.removed_count
    }

    /// Number of member entries across all sets.
    pub fn total_size(&self) -> usize {
        self.entries as usize
    }

    /// Approximate heap bytes held by the collection.
    pub fn heap_bytes(&self) -> usize {
        let index: usize = self.index.iter().map(|l| l.bytes.capacity()).sum();
        index
            + self.index.capacity() * std::mem::size_of::<IdList>()
            + self.roots.capacity() * 4
            + self.removed.capacity()
            + self.offsets.capacity() * 8
            + self.members.capacity() * 4
            + self.residual.capacity() * 4
    }

    /// Non-removed sets containing `v`.
    pub fn residual_coverage(&self, v: NodeId) -> u32 {
        match self.storage {
            RrStorage::Full => self.residual[v as usize],
            RrStorage::IndexOnly => self.live_sets_with(v).count() as u32,
        }
    }

    /// Ids of non-removed sets containing `v`, in sampling order.
    pub fn live_sets_with(&self, v: NodeId) -> impl Iterator<Item = u32> + '_ {
        self.index[v as usize]
            .iter()
            .filter(|&k| !self.removed[k as usize])
    }

    /// Marks set `k` removed. Returns false if it already was.
    pub fn remove(&mut self, k: usize) -> bool {
        if self.removed[k] {
            return false;
        }
        self.removed[k] = true;
        self.removed_count += 1;
        if self.storage == RrStorage::Full {
            let (lo, hi) = (self.offsets[k] as usize, self.offsets[k + 1] as usize);
            for &v in &self.members[lo..hi] {
                self.residual[v as usize] -= 1;
            }
        }
        true
    }

    /// Removes every non-removed set containing `v` with id `>= from`, and
    /// returns how many were removed.
    pub fn remove_containing(&mut self, v: NodeId, from: u64) -> u32 {
        let list = std::mem::take(&mut self.index[v as usize]);
        let mut count = 0;
        let mut keep = IdList::default();
        for k in list.iter() {
            if (k as u64) < from {
                if !self.removed[k as usize] {
                    keep.push(k);
                }
            } else if self.remove(k as usize) {
                count += 1;
            }
        }
        keep.bytes.shrink_to_fit();
        self.index[v as usize] = keep;
        count
    }

    /// Writes the collection in a versioned little-endian binary format.
    /// Index-only collections cannot be dumped.
    pub fn dump(&self, path: impl AsRef<Path>) -> Result<()> {
        if self.storage != RrStorage::Full {
            return Err(Error::invalid("index-only collections cannot be dumped"));
        }
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&[matches!(self.kind, RrKind::Rrc) as u8])?;
        for x in [self.tag, self.master, self.ad, self.n as u64, self.theta()] {
            w.write_all(&x.to_le_bytes())?;
        }
        for k in 0..self.roots.len() {
            let m = self.members_of(k);
            w.write_all(&self.roots[k].to_le_bytes())?;
            w.write_all(&[self.removed[k] as u8])?;
            w.write_all(&(m.len() as u32).to_le_bytes())?;
            for &v in m {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()
    }

    /// Reads a collection written by [`RrCollection::dump`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = std::io::BufReader::new(file);
        let bad = |msg: &str| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: msg.to_string(),
        };
        let io = |e| Error::io(path, e);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != DUMP_MAGIC {
            return Err(bad("not an RR collection dump"));
        }
        if read_u32(&mut r).map_err(io)? != DUMP_VERSION {
            return Err(bad("unsupported dump version"));
        }
        let kind = match read_u8(&mut r).map_err(io)? {
            0 => RrKind::Rr,
            1 => RrKind::Rrc,
            _ => return Err(bad("unknown collection kind")),
        };
        let mut head = [0u64; 5];
        for h in &mut head {
            *h = read_u64(&mut r).map_err(io)?;
        }
        let [tag, master, ad, n, theta] = head;
        if n > u32::MAX as u64 || theta > u32::MAX as u64 {
            return Err(bad("header out of range"));
        }
        let mut c = Self::with_tag(kind, RrStorage::Full, tag, n as usize, master, ad);
        for _ in 0..theta {
            let root = read_u32(&mut r).map_err(io)?;
            let removed = read_u8(&mut r).map_err(io)? != 0;
            let len = read_u32(&mut r).map_err(io)?;
            let id = c.roots.len() as u32;
            if root as u64 >= n {
                return Err(bad("root out of range"));
            }
            for _ in 0..len {
                let v = read_u32(&mut r).map_err(io)?;
                if v as u64 >= n {
                    return Err(bad("member out of range"));
                }
                c.members.push(v);
                if !removed {
                    c.index[v as usize].push(id);
                    c.residual[v as usize] += 1;
                }
            }
            c.entries += len as u64;
            c.offsets.push(c.members.len() as u64);
            c.roots.push(root);
            c.removed.push(removed);
            c.removed_count += removed as usize;
        }
        Ok(c)
    }
}

fn read_u8(r: &mut impl Read) -> std::io::Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn membership(n: usize, s: &[NodeId]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &u in s {
        m[u as usize] = true;
    }
    m
}

/// Fraction of all sampled sets (removal flags ignored) that intersect `s`.
pub fn coverage_fraction(coll: &RrCollection, s: &[NodeId]) -> Result<f64> {
    if coll.storage != RrStorage::Full {
        return Err(Error::invalid("coverage needs member lists"));
    }
    if coll.theta() == 0 {
        return Err(Error::invalid("coverage of an empty collection"));
    }
    let in_s = membership(coll.n, s);
    let hit = (0..coll.roots.len())
        .filter(|&k| coll.members_of(k).iter().any(|&v| in_s[v as usize]))
        .count();
    Ok(hit as f64 / coll.theta() as f64)
}

/// Fraction of all sampled sets that contain `u` but miss `s`.
pub fn marginal_coverage_fraction(coll: &RrCollection, s: &[NodeId], u: NodeId) -> Result<f64> {
    if coll.storage != RrStorage::Full {
        return Err(Error::invalid("coverage needs member lists"));
    }
    if coll.theta() == 0 {
        return Err(Error::invalid("coverage of an empty collection"));
    }
    let in_s = membership(coll.n, s);
    let hit = (0..coll.roots.len())
        .filter(|&k| {
            let m = coll.members_of(k);
            m.contains(&u) && !m.iter().any(|&v| in_s[v as usize])
        })
        .count();
    Ok(hit as f64 / coll.theta() as f64)
}

/// Number of sets needed so that every seed set of size up to `s` has its
/// spread estimated within the target accuracy:
/// `(8 + 2 eps) n (ell ln n + ln C(n, s) + ln 2) / (opt_lb eps^2)`, rounded up.
pub fn theta_bound(s: usize, params: SampleParams, n: usize, opt_lb: f64) -> Result<u64> {
    if opt_lb.is_nan() || opt_lb <= 0.0 {
        return Err(Error::invalid(format!(
            "OPT lower bound must be positive, got {opt_lb}"
        )));
    }
    if s == 0 || s > n {
        return Err(Error::invalid(format!("seed size {s} outside 1..={n}")));
    }
    let eps = params.epsilon;
    let nf = n as f64;
    let ln_binom =
        (ln_gamma(nf + 1.0) - ln_gamma(s as f64 + 1.0) - ln_gamma((n - s) as f64 + 1.0)).max(0.0);
    let l = (8.0 + 2.0 * eps) * nf * (params.ell * nf.ln() + ln_binom + 2f64.ln())
        / (opt_lb * eps * eps);
    Ok(l.ceil() as u64)
}

const PILOT_DEFLATION: f64 = 1.5;

/// A lower bound on the best `s`-seed spread under plain IC: greedy max-cover
/// over `pilot_size` RR sets, deflated by 1.5, floored at `s` and capped at `n`.
pub fn estimate_opt_lb(view: &AdEdgeView, s: usize, pilot_size: u64, seed: u64) -> Result<f64> {
    if pilot_size < 1 {
        return Err(Error::invalid("pilot size must be at least 1"));
    }
    let n = view.node_count();
    let s = s.min(n);
    let mut pilot = RrCollection::with_tag(RrKind::Rr, RrStorage::Full, rng::TAG_PILOT, n, seed, 0);
    pilot.extend(pilot_size, view, None)?;
    let mut covered = 0u64;
    let mut chosen = vec![false; n];
    for _ in 0..s {
        let best = (0..n as NodeId)
            .filter(|&v| !chosen[v as usize])
            .max_by_key(|&v| (pilot.residual_coverage(v), std::cmp::Reverse(v)));
        let Some(v) = best else { break };
        if pilot.residual_coverage(v) == 0 {
            break;
        }
        chosen[v as usize] = true;
        covered += pilot.remove_containing(v, 0) as u64;
    }
    let f = covered as f64 / pilot_size as f64;
    Ok((n as f64 * f / PILOT_DEFLATION).max(s as f64).min(n as f64))
}
