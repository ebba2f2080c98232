//! Incremental independence engines, one per matroid family.
//!
//! An engine absorbs elements one at a time and reports when the absorbed set
//! first becomes dependent. In tracking mode it can also name the unique
//! circuit inside a first dependent prefix, and it answers span-membership
//! probes against the currently absorbed (independent) set. All the batched
//! oracle fast paths (prefix scans, circuit extraction, span sweeps) reduce
//! to these primitives.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use crate::ElementId;

/// Epoch-stamped scratch map from ids to values: constant-time reset, no
/// per-probe allocation. One per thread serves every probe on it.
struct ProbeScratch {
    epoch: u32,
    stamp: Vec<u32>,
    val: Vec<u32>,
}

impl ProbeScratch {
    const fn new() -> Self {
        ProbeScratch { epoch: 0, stamp: Vec::new(), val: Vec::new() }
    }

    fn begin(&mut self, size: usize) {
        if self.stamp.len() < size {
            self.stamp.resize(size, 0);
            self.val.resize(size, 0);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
    }

    fn get(&self, i: u32) -> Option<u32> {
        (self.stamp[i as usize] == self.epoch).then(|| self.val[i as usize])
    }

    fn set(&mut self, i: u32, v: u32) {
        self.stamp[i as usize] = self.epoch;
        self.val[i as usize] = v;
    }
}

thread_local! {
    static SCRATCH: RefCell<ProbeScratch> = const { RefCell::new(ProbeScratch::new()) };
    static ROUTE_BUF: RefCell<(Vec<(u32, ElementId)>, Vec<ElementId>)> =
        const { RefCell::new((Vec::new(), Vec::new())) };
}

/// Outcome of pushing one element into an engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Push {
    Independent,
    /// The absorbed set just became dependent. In tracking mode, carries the
    /// unique circuit inside it (as base-matroid element ids).
    Dependent(Option<Vec<ElementId>>),
}

#[derive(Clone)]
pub enum Engine {
    Uniform(UniformEngine),
    Partition(PartitionEngine),
    Graphic(GraphicEngine),
    Linear(LinearEngine),
    DirectSum(DirectSumEngine),
}

impl Engine {
    /// Absorb `id`. On `Dependent` the engine state is unchanged (the failed
    /// element is not kept), so callers may continue pushing to run a greedy
    /// scan.
    pub fn push(&mut self, id: ElementId) -> Push {
        match self {
            Engine::Uniform(e) => e.push(id),
            Engine::Partition(e) => e.push(id),
            Engine::Graphic(e) => e.push(id),
            Engine::Linear(e) => e.push(id),
            Engine::DirectSum(e) => e.push(id),
        }
    }

    /// Would `id` leave the absorbed set's span unchanged? Probing does not
    /// modify the engine. Only meaningful while the absorbed set is
    /// independent.
    pub fn spans(&self, id: ElementId) -> bool {
        match self {
            Engine::Uniform(e) => e.spans(),
            Engine::Partition(e) => e.spans(id),
            Engine::Graphic(e) => e.spans(id),
            Engine::Linear(e) => e.spans(id),
            Engine::DirectSum(e) => e.spans(id),
        }
    }

    /// Number of elements absorbed so far that were independent additions.
    pub fn rank(&self) -> usize {
        match self {
            Engine::Uniform(e) => e.count,
            Engine::Partition(e) => e.count,
            Engine::Graphic(e) => e.count,
            Engine::Linear(e) => e.rows.len(),
            Engine::DirectSum(e) => e.count,
        }
    }

    /// Flatten internal structure so later read-only probes are O(1) per
    /// lookup. Called once after a context is fully absorbed.
    pub fn flatten(&mut self) {
        match self {
            Engine::Graphic(e) => {
                for v in 0..e.parent.len() as u32 {
                    let r = e.read_root(v);
                    let mut cur = v;
                    while e.parent[cur as usize] != r {
                        let next = e.parent[cur as usize];
                        e.parent[cur as usize] = r;
                        cur = next;
                    }
                }
            }
            Engine::DirectSum(e) => {
                for engine in e.engines.iter_mut().flatten() {
                    engine.flatten();
                }
            }
            _ => {}
        }
    }

    /// How many more elements could possibly be absorbed independently. An
    /// upper bound; probes larger than this are dependent without looking.
    pub fn free_capacity(&self) -> usize {
        match self {
            Engine::Uniform(e) => e.r - e.count,
            Engine::Partition(e) => e.free_cap,
            Engine::Graphic(e) => (e.parent.len().max(1) - 1).saturating_sub(e.count),
            Engine::Linear(e) => e.max_rank - e.rows.len(),
            Engine::DirectSum(e) => e.rank_bound - e.count,
        }
    }

    /// Is `absorbed ∪ set` independent? Non-mutating; the per-call state is
    /// sparse in |set|, so one prepared engine can serve millions of probes
    /// without cloning its context.
    pub fn probe_subset(&self, set: &[ElementId]) -> bool {
        if set.len() > self.free_capacity() {
            return false;
        }
        match self {
            Engine::Uniform(e) => e.count + set.len() <= e.r,
            Engine::Partition(e) => SCRATCH.with_borrow_mut(|scratch| {
                scratch.begin(e.caps.len());
                set.iter().all(|&x| {
                    let b = e.block_of[x as usize];
                    let extra = scratch.get(b).unwrap_or(0) + 1;
                    scratch.set(b, extra);
                    e.counts[b as usize] + extra <= e.caps[b as usize]
                })
            }),
            Engine::Graphic(e) => SCRATCH.with_borrow_mut(|scratch| {
                // Local union-find layered over the context's components.
                scratch.begin(e.parent.len());
                fn local_root(scratch: &ProbeScratch, mut v: u32) -> u32 {
                    while let Some(p) = scratch.get(v) {
                        if p == v {
                            break;
                        }
                        v = p;
                    }
                    v
                }
                set.iter().all(|&x| {
                    let (u, v) = e.edges[x as usize];
                    let (ru, rv) =
                        (local_root(scratch, e.read_root(u)), local_root(scratch, e.read_root(v)));
                    if ru == rv {
                        false
                    } else {
                        scratch.set(ru, rv);
                        scratch.set(rv, rv);
                        true
                    }
                })
            }),
            Engine::Linear(e) => e.probe_all(set),
            Engine::DirectSum(e) => {
                // Route each element through its part; parts are contiguous
                // id ranges, so a sort groups them. Buffers are reused across
                // probes (fresh ones only under nested direct sums).
                ROUTE_BUF.with(|cell| {
                    let fresh = &mut (Vec::new(), Vec::new());
                    let mut owned = cell.try_borrow_mut();
                    let (routed, locals) = match owned.as_deref_mut() {
                        Ok(bufs) => bufs,
                        Err(_) => fresh,
                    };
                    routed.clear();
                    routed.extend(set.iter().map(|&x| {
                        let (part, local) = e.locate(x);
                        (part as u32, local)
                    }));
                    routed.sort_unstable();
                    let mut at = 0usize;
                    while at < routed.len() {
                        let part = routed[at].0 as usize;
                        locals.clear();
                        while at < routed.len() && routed[at].0 as usize == part {
                            locals.push(routed[at].1);
                            at += 1;
                        }
                        let ok = match &e.engines[part] {
                            Some(engine) => engine.probe_subset(locals),
                            None => e.parts[part].engine(false).probe_subset(locals),
                        };
                        if !ok {
                            return false;
                        }
                    }
                    true
                })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Uniform
// ---------------------------------------------------------------------------

#[derive(Clone)]
pub struct UniformEngine {
    r: usize,
    count: usize,
    track: bool,
    pushed: Vec<ElementId>,
}

impl UniformEngine {
    pub fn new(r: usize, track: bool) -> Self {
        UniformEngine { r, count: 0, track, pushed: Vec::new() }
    }

    fn push(&mut self, id: ElementId) -> Push {
        if self.count < self.r {
            self.count += 1;
            if self.track {
                self.pushed.push(id);
            }
            Push::Independent
        } else if self.track {
            // Any (r+1)-subset is a circuit, so the circuit is the whole prefix.
            let mut c = self.pushed.clone();
            c.push(id);
            Push::Dependent(Some(c))
        } else {
            Push::Dependent(None)
        }
    }

    fn spans(&self) -> bool {
        self.count >= self.r
    }
}

// ---------------------------------------------------------------------------
// Partition
// ---------------------------------------------------------------------------

#[derive(Clone)]
pub struct PartitionEngine {
    block_of: Arc<Vec<u32>>,
    caps: Arc<Vec<u32>>,
    counts: Vec<u32>,
    count: usize,
    free_cap: usize,
    track: bool,
    by_block: Vec<Vec<ElementId>>,
}

impl PartitionEngine {
    pub fn new(block_of: Arc<Vec<u32>>, caps: Arc<Vec<u32>>, track: bool) -> Self {
        let nb = caps.len();
        let free_cap = caps.iter().map(|&c| c as usize).sum();
        PartitionEngine {
            block_of,
            caps,
            counts: vec![0; nb],
            count: 0,
            free_cap,
            track,
            by_block: if track { vec![Vec::new(); nb] } else { Vec::new() },
        }
    }

    fn push(&mut self, id: ElementId) -> Push {
        let b = self.block_of[id as usize] as usize;
        if self.counts[b] < self.caps[b] {
            self.counts[b] += 1;
            self.count += 1;
            self.free_cap -= 1;
            if self.track {
                self.by_block[b].push(id);
            }
            Push::Independent
        } else if self.track {
            // cap+1 elements of one block form a circuit.
            let mut c = self.by_block[b].clone();
            c.push(id);
            Push::Dependent(Some(c))
        } else {
            Push::Dependent(None)
        }
    }

    fn spans(&self, id: ElementId) -> bool {
        let b = self.block_of[id as usize] as usize;
        self.counts[b] >= self.caps[b]
    }
}

// ---------------------------------------------------------------------------
// Graphic (cycle matroid of a multigraph)
// ---------------------------------------------------------------------------

#[derive(Clone)]
pub struct GraphicEngine {
    edges: Arc<Vec<(u32, u32)>>,
    parent: Vec<u32>,
    count: usize,
    track: bool,
    // Forest adjacency, only in tracking mode: vertex -> (other endpoint, edge id).
    adj: Vec<Vec<(u32, ElementId)>>,
}

impl GraphicEngine {
    pub fn new(vertices: usize, edges: Arc<Vec<(u32, u32)>>, track: bool) -> Self {
        GraphicEngine {
            edges,
            parent: (0..vertices as u32).collect(),
            count: 0,
            track,
            adj: if track { vec![Vec::new(); vertices] } else { Vec::new() },
        }
    }

    fn root(&mut self, mut v: u32) -> u32 {
        while self.parent[v as usize] != v {
            let g = self.parent[self.parent[v as usize] as usize];
            self.parent[v as usize] = g;
            v = g;
        }
        v
    }

    fn push(&mut self, id: ElementId) -> Push {
        let (u, v) = self.edges[id as usize];
        let (ru, rv) = (self.root(u), self.root(v));
        if ru != rv {
            self.parent[ru as usize] = rv;
            self.count += 1;
            if self.track {
                self.adj[u as usize].push((v, id));
                self.adj[v as usize].push((u, id));
            }
            Push::Independent
        } else if self.track {
            Push::Dependent(Some(self.cycle_through(u, v, id)))
        } else {
            Push::Dependent(None)
        }
    }

    /// The unique circuit closed by edge `id = (u, v)`: the forest path from
    /// u to v plus the edge itself. A self-loop is a circuit on its own.
    fn cycle_through(&self, u: u32, v: u32, id: ElementId) -> Vec<ElementId> {
        if u == v {
            return vec![id];
        }
        // BFS in the forest from u to v recording parent edges.
        let mut prev: HashMap<u32, (u32, ElementId)> = HashMap::new();
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(u);
        prev.insert(u, (u, ElementId::MAX));
        while let Some(x) = queue.pop_front() {
            if x == v {
                break;
            }
            for &(y, e) in &self.adj[x as usize] {
                if !prev.contains_key(&y) {
                    prev.insert(y, (x, e));
                    queue.push_back(y);
                }
            }
        }
        let mut circuit = vec![id];
        let mut cur = v;
        while cur != u {
            let (p, e) = prev[&cur];
            circuit.push(e);
            cur = p;
        }
        circuit
    }

    /// Non-mutating root lookup.
    fn read_root(&self, mut v: u32) -> u32 {
        while self.parent[v as usize] != v {
            v = self.parent[v as usize];
        }
        v
    }

    fn spans(&self, id: ElementId) -> bool {
        let (u, v) = self.edges[id as usize];
        u == v || self.read_root(u) == self.read_root(v)
    }
}

// ---------------------------------------------------------------------------
// Linear over a prime field (bit-packed columns for GF(2))
// ---------------------------------------------------------------------------

#[derive(Clone)]
enum Column {
    Bits(Vec<u64>),
    Modular(Vec<u32>),
}

#[derive(Clone)]
struct EchelonRow {
    col: Column,
    lead: usize,
    /// Coefficients over the pushed-element index space; only in tracking mode.
    tag: Vec<u32>,
}

#[derive(Clone)]
pub struct LinearEngine {
    matrix: Arc<crate::oracle::LinearColumns>,
    modulus: u64,
    max_rank: usize,
    rows: Vec<EchelonRow>,
    track: bool,
    pushed: Vec<ElementId>,
}

impl LinearEngine {
    pub fn new(
        matrix: Arc<crate::oracle::LinearColumns>,
        modulus: u64,
        max_rank: usize,
        track: bool,
    ) -> Self {
        LinearEngine { matrix, modulus, max_rank, rows: Vec::new(), track, pushed: Vec::new() }
    }

    fn column(&self, id: ElementId) -> Column {
        match &*self.matrix {
            crate::oracle::LinearColumns::Bits { words, data } => {
                let w = *words;
                Column::Bits(data[id as usize * w..(id as usize + 1) * w].to_vec())
            }
            crate::oracle::LinearColumns::Modular { rows, data } => {
                let r = *rows;
                Column::Modular(data[id as usize * r..(id as usize + 1) * r].to_vec())
            }
        }
    }

    fn modinv(&self, a: u64) -> u64 {
        // Fermat: a^(p-2) mod p, p prime.
        let p = self.modulus;
        let mut base = a % p;
        let mut exp = p - 2;
        let mut acc = 1u64;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base % p;
            }
            base = base * base % p;
            exp >>= 1;
        }
        acc
    }

    /// Reduce `col` (and its tag) against the echelon rows. Returns the
    /// leading index if a nonzero residue remains.
    fn reduce(&self, col: &mut Column, tag: Option<&mut Vec<u32>>) -> Option<usize> {
        let p = self.modulus;
        let mut tag = tag;
        match col {
            Column::Bits(words) => {
                for row in &self.rows {
                    let Column::Bits(rw) = &row.col else { unreachable!() };
                    if words[row.lead / 64] >> (row.lead % 64) & 1 == 1 {
                        for (w, r) in words.iter_mut().zip(rw) {
                            *w ^= r;
                        }
                        if let Some(t) = tag.as_deref_mut() {
                            for (i, &c) in row.tag.iter().enumerate() {
                                t[i] ^= c;
                            }
                        }
                    }
                }
                words
                    .iter()
                    .enumerate()
                    .find(|(_, w)| **w != 0)
                    .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
            }
            Column::Modular(vals) => {
                for row in &self.rows {
                    let Column::Modular(rv) = &row.col else { unreachable!() };
                    let f = vals[row.lead] as u64;
                    if f != 0 {
                        for (v, r) in vals.iter_mut().zip(rv) {
                            let sub = f * *r as u64 % p;
                            *v = ((*v as u64 + p - sub) % p) as u32;
                        }
                        if let Some(t) = tag.as_deref_mut() {
                            for (i, &c) in row.tag.iter().enumerate() {
                                let sub = f * c as u64 % p;
                                t[i] = ((t[i] as u64 + p - sub) % p) as u32;
                            }
                        }
                    }
                }
                vals.iter().position(|v| *v != 0)
            }
        }
    }

    fn push(&mut self, id: ElementId) -> Push {
        let mut col = self.column(id);
        let k = self.pushed.len();
        let mut tag = if self.track {
            let mut t = vec![0u32; k + 1];
            t[k] = 1;
            Some(t)
        } else {
            None
        };
        // Existing tags are shorter than k+1; pad once here.
        if self.track {
            for row in &mut self.rows {
                row.tag.resize(k + 1, 0);
            }
        }
        let lead = self.reduce(&mut col, tag.as_mut());
        match lead {
            Some(lead) => {
                // Normalize so the leading coefficient is 1.
                if let Column::Modular(vals) = &mut col {
                    let inv = self.modinv(vals[lead] as u64);
                    let p = self.modulus;
                    for v in vals.iter_mut() {
                        *v = (*v as u64 * inv % p) as u32;
                    }
                    if let Some(t) = tag.as_mut() {
                        for c in t.iter_mut() {
                            *c = (*c as u64 * inv % p) as u32;
                        }
                    }
                }
                self.rows.push(EchelonRow { col, lead, tag: tag.unwrap_or_default() });
                if self.track {
                    self.pushed.push(id);
                }
                Push::Independent
            }
            None => {
                if let Some(t) = tag {
                    // Kernel vector support = the unique circuit in the prefix.
                    let mut circuit: Vec<ElementId> = t
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| **c != 0)
                        .map(|(i, _)| if i == k { id } else { self.pushed[i] })
                        .collect();
                    circuit.sort_unstable();
                    Push::Dependent(Some(circuit))
                } else {
                    Push::Dependent(None)
                }
            }
        }
    }

    fn spans(&self, id: ElementId) -> bool {
        let mut col = self.column(id);
        self.reduce(&mut col, None).is_none()
    }

    /// Non-mutating: does pushing all of `set` keep independence? Reduces
    /// each column against the context echelon plus a local echelon of the
    /// probe itself, leaving the engine untouched.
    fn probe_all(&self, set: &[ElementId]) -> bool {
        let p = self.modulus;
        let mut local: Vec<(usize, Column)> = Vec::with_capacity(set.len());
        'next: for &x in set {
            let mut col = self.column(x);
            let lead = self.reduce(&mut col, None);
            let Some(mut lead) = lead else { return false };
            loop {
                let hit = local.iter().find(|(l, _)| *l == lead);
                let Some((_, row)) = hit else {
                    // Normalize and adopt as a local pivot.
                    if let Column::Modular(vals) = &mut col {
                        let inv = self.modinv(vals[lead] as u64);
                        for v in vals.iter_mut() {
                            *v = (*v as u64 * inv % p) as u32;
                        }
                    }
                    local.push((lead, col));
                    continue 'next;
                };
                match (&mut col, row) {
                    (Column::Bits(words), Column::Bits(rw)) => {
                        for (w, r) in words.iter_mut().zip(rw) {
                            *w ^= r;
                        }
                    }
                    (Column::Modular(vals), Column::Modular(rv)) => {
                        let f = vals[lead] as u64;
                        for (v, r) in vals.iter_mut().zip(rv) {
                            let sub = f * *r as u64 % p;
                            *v = ((*v as u64 + p - sub) % p) as u32;
                        }
                    }
                    _ => unreachable!(),
                }
                lead = match &col {
                    Column::Bits(words) => {
                        match words.iter().enumerate().find(|(_, w)| **w != 0) {
                            Some((i, w)) => i * 64 + w.trailing_zeros() as usize,
                            None => return false,
                        }
                    }
                    Column::Modular(vals) => match vals.iter().position(|v| *v != 0) {
                        Some(i) => i,
                        None => return false,
                    },
                };
            }
        }
        true
    }
}

// ---------------------------------------------------------------------------
// Direct sum
// ---------------------------------------------------------------------------

#[derive(Clone)]
pub struct DirectSumEngine {
    parts: Arc<Vec<crate::oracle::MatroidInstance>>,
    offsets: Arc<Vec<u32>>,
    part_of: Arc<Vec<u32>>,
    engines: Vec<Option<Box<Engine>>>,
    count: usize,
    rank_bound: usize,
    track: bool,
}

impl DirectSumEngine {
    pub fn new(
        parts: Arc<Vec<crate::oracle::MatroidInstance>>,
        offsets: Arc<Vec<u32>>,
        part_of: Arc<Vec<u32>>,
        track: bool,
    ) -> Self {
        let n = parts.len();
        let rank_bound = parts.iter().map(|p| p.rank_upper_bound()).sum();
        DirectSumEngine {
            parts,
            offsets,
            part_of,
            engines: vec![None; n],
            count: 0,
            rank_bound,
            track,
        }
    }

    fn locate(&self, id: ElementId) -> (usize, ElementId) {
        let part = self.part_of[id as usize] as usize;
        (part, id - self.offsets[part])
    }

    fn part_engine(&mut self, part: usize) -> &mut Engine {
        if self.engines[part].is_none() {
            self.engines[part] = Some(Box::new(self.parts[part].engine(self.track)));
        }
        self.engines[part].as_mut().unwrap().as_mut()
    }

    fn push(&mut self, id: ElementId) -> Push {
        let (part, local) = self.locate(id);
        let offset = self.offsets[part];
        match self.part_engine(part).push(local) {
            Push::Independent => {
                self.count += 1;
                Push::Independent
            }
            Push::Dependent(c) => {
                Push::Dependent(c.map(|mut ids| {
                    for e in ids.iter_mut() {
                        *e += offset;
                    }
                    ids.sort_unstable();
                    ids
                }))
            }
        }
    }

    fn spans(&self, id: ElementId) -> bool {
        let (part, local) = self.locate(id);
        match &self.engines[part] {
            Some(e) => e.spans(local),
            None => self.parts[part].engine(false).spans(local),
        }
    }
}
