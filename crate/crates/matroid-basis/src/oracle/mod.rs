//! Matroid abstraction: concrete families, independence queries, and the
//! permutation/first-circuit primitives everything else builds on.
//!
//! Families are immutable and cheaply cloneable (`Arc` internals); all query
//! paths are pure, so one instance can serve many threads at once.

mod engine;
pub mod generate;
mod spec;
mod view;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ElementId;

pub use engine::{Engine, Push};
pub use spec::MatroidSpec;
pub use view::MatroidView;

/// A circuit: a minimal dependent set, stored with sorted element ids so that
/// replay output is deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circuit(Vec<ElementId>);

impl Circuit {
    pub fn new(mut members: Vec<ElementId>) -> Self {
        members.sort_unstable();
        members.dedup();
        Circuit(members)
    }

    pub fn members(&self) -> &[ElementId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: ElementId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    /// Number of members outside `barrier`.
    pub fn members_outside(&self, barrier: &fixedbitset::FixedBitSet) -> usize {
        self.0.iter().filter(|&&x| !barrier.contains(x as usize)).count()
    }
}

/// Column storage for linear matroids.
#[derive(Debug)]
pub enum LinearColumns {
    /// GF(2): each column is `words` packed u64 words.
    Bits { words: usize, data: Vec<u64> },
    /// GF(p), p an odd prime <= 2^16: column-major values.
    Modular { rows: usize, data: Vec<u32> },
}

/// A concrete matroid family answering independence queries on ground set
/// `[0, n)`.
#[derive(Clone)]
pub enum MatroidInstance {
    Uniform { n: usize, r: usize },
    Partition { block_of: Arc<Vec<u32>>, caps: Arc<Vec<u32>> },
    Graphic { vertices: usize, edges: Arc<Vec<(u32, u32)>> },
    Linear { modulus: u64, rows: usize, columns: Arc<LinearColumns>, n: usize },
    DirectSum {
        parts: Arc<Vec<MatroidInstance>>,
        offsets: Arc<Vec<u32>>,
        part_of: Arc<Vec<u32>>,
        n: usize,
    },
}

impl std::fmt::Debug for MatroidInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MatroidInstance::Uniform { n, r } => write!(f, "uniform(n={n}, r={r})"),
            MatroidInstance::Partition { caps, block_of } => {
                write!(f, "partition(n={}, blocks={})", block_of.len(), caps.len())
            }
            MatroidInstance::Graphic { vertices, edges } => {
                write!(f, "graphic(v={vertices}, edges={})", edges.len())
            }
            MatroidInstance::Linear { modulus, rows, n, .. } => {
                write!(f, "linear(gf={modulus}, rows={rows}, cols={n})")
            }
            MatroidInstance::DirectSum { parts, n, .. } => {
                write!(f, "direct_sum(parts={}, n={n})", parts.len())
            }
        }
    }
}

impl MatroidInstance {
    pub fn uniform(n: usize, r: usize) -> Self {
        MatroidInstance::Uniform { n, r: r.min(n) }
    }

    /// Partition matroid from a per-element block assignment and per-block caps.
    pub fn partition(block_of: Vec<u32>, caps: Vec<u32>) -> Result<Self> {
        for &b in &block_of {
            if b as usize >= caps.len() {
                return Err(Error::Parse(format!("block id {b} out of range")));
            }
        }
        Ok(MatroidInstance::Partition { block_of: Arc::new(block_of), caps: Arc::new(caps) })
    }

    pub fn graphic(vertices: usize, edges: Vec<(u32, u32)>) -> Result<Self> {
        for &(u, v) in &edges {
            if u as usize >= vertices || v as usize >= vertices {
                return Err(Error::Parse(format!("edge ({u},{v}) exceeds vertex count {vertices}")));
            }
        }
        Ok(MatroidInstance::Graphic { vertices, edges: Arc::new(edges) })
    }

    /// Linear matroid over GF(modulus) from a row-major matrix.
    pub fn linear(modulus: u64, rows: usize, row_major: &[u64]) -> Result<Self> {
        if modulus < 2 || modulus > 1 << 16 {
            return Err(Error::Parse(format!("modulus {modulus} out of range")));
        }
        if !is_prime(modulus) {
            return Err(Error::Parse(format!("modulus {modulus} is not prime")));
        }
        if rows == 0 || row_major.len() % rows != 0 {
            return Err(Error::Parse("matrix shape mismatch".into()));
        }
        let cols = row_major.len() / rows;
        let columns = if modulus == 2 {
            let words = rows.div_ceil(64);
            let mut data = vec![0u64; cols * words];
            for r in 0..rows {
                for c in 0..cols {
                    if row_major[r * cols + c] % 2 == 1 {
                        data[c * words + r / 64] |= 1 << (r % 64);
                    }
                }
            }
            LinearColumns::Bits { words, data }
        } else {
            let mut data = vec![0u32; cols * rows];
            for r in 0..rows {
                for c in 0..cols {
                    data[c * rows + r] = (row_major[r * cols + c] % modulus) as u32;
                }
            }
            LinearColumns::Modular { rows, data }
        };
        Ok(MatroidInstance::Linear { modulus, rows, columns: Arc::new(columns), n: cols })
    }

    pub fn direct_sum(parts: Vec<MatroidInstance>) -> Self {
        let mut offsets = Vec::with_capacity(parts.len());
        let mut part_of = Vec::new();
        let mut n = 0u32;
        for (i, p) in parts.iter().enumerate() {
            offsets.push(n);
            n += p.ground_size() as u32;
            part_of.extend(std::iter::repeat_n(i as u32, p.ground_size()));
        }
        MatroidInstance::DirectSum {
            parts: Arc::new(parts),
            offsets: Arc::new(offsets),
            part_of: Arc::new(part_of),
            n: n as usize,
        }
    }

    pub fn ground_size(&self) -> usize {
        match self {
            MatroidInstance::Uniform { n, .. } => *n,
            MatroidInstance::Partition { block_of, .. } => block_of.len(),
            MatroidInstance::Graphic { edges, .. } => edges.len(),
            MatroidInstance::Linear { n, .. } => *n,
            MatroidInstance::DirectSum { n, .. } => *n,
        }
    }

    /// Fresh incremental engine. Tracking mode additionally supports circuit
    /// extraction, at some per-push overhead.
    pub fn engine(&self, track: bool) -> Engine {
        match self {
            MatroidInstance::Uniform { r, .. } => {
                Engine::Uniform(engine::UniformEngine::new(*r, track))
            }
            MatroidInstance::Partition { block_of, caps } => {
                Engine::Partition(engine::PartitionEngine::new(block_of.clone(), caps.clone(), track))
            }
            MatroidInstance::Graphic { vertices, edges } => {
                Engine::Graphic(engine::GraphicEngine::new(*vertices, edges.clone(), track))
            }
            MatroidInstance::Linear { modulus, rows, columns, .. } => {
                Engine::Linear(engine::LinearEngine::new(columns.clone(), *modulus, *rows, track))
            }
            MatroidInstance::DirectSum { parts, offsets, part_of, .. } => {
                Engine::DirectSum(engine::DirectSumEngine::new(
                    parts.clone(),
                    offsets.clone(),
                    part_of.clone(),
                    track,
                ))
            }
        }
    }

    /// A cheap upper bound on the matroid's rank.
    pub fn rank_upper_bound(&self) -> usize {
        match self {
            MatroidInstance::Uniform { r, .. } => *r,
            MatroidInstance::Partition { caps, .. } => {
                caps.iter().map(|&c| c as usize).sum()
            }
            MatroidInstance::Graphic { vertices, .. } => vertices.max(&1) - 1,
            MatroidInstance::Linear { rows, .. } => *rows,
            MatroidInstance::DirectSum { parts, .. } => {
                parts.iter().map(|p| p.rank_upper_bound()).sum()
            }
        }
    }

    /// Raw independence query on a base-level subset.
    pub fn is_independent(&self, set: &[ElementId]) -> bool {
        let mut e = self.engine(false);
        set.iter().all(|&x| e.push(x) == Push::Independent)
    }

    /// Rank of a base-level subset.
    pub fn rank_of(&self, set: &[ElementId]) -> usize {
        let mut e = self.engine(false);
        let mut rank = 0;
        for &x in set {
            if e.push(x) == Push::Independent {
                rank += 1;
            }
        }
        rank
    }
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}
