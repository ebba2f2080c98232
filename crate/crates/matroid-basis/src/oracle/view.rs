//! Views of a matroid under deletion and contraction.
//!
//! A view never mutates in place: deleting or contracting produces a fresh
//! value. Queries against a view translate to base queries with the
//! contracted set joined in, which keeps every family fast path available.

use std::sync::{Arc, OnceLock};

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::oracle::{Circuit, Engine, MatroidInstance, Push};
use crate::ElementId;

#[derive(Clone)]
pub struct MatroidView {
    base: Arc<MatroidInstance>,
    deleted: FixedBitSet,
    contracted: Vec<ElementId>,
    // Engines with the contracted set already absorbed, built lazily once per
    // view and cloned per scan.
    prepared_plain: Arc<OnceLock<Engine>>,
    prepared_tracked: Arc<OnceLock<Engine>>,
}

impl std::fmt::Debug for MatroidView {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "view({:?}, live={}, deleted={}, contracted={})",
            self.base,
            self.live_count(),
            self.deleted.count_ones(..),
            self.contracted.len()
        )
    }
}

impl MatroidView {
    pub fn of(base: MatroidInstance) -> Self {
        let n = base.ground_size();
        MatroidView {
            base: Arc::new(base),
            deleted: FixedBitSet::with_capacity(n),
            contracted: Vec::new(),
            prepared_plain: Arc::new(OnceLock::new()),
            prepared_tracked: Arc::new(OnceLock::new()),
        }
    }

    pub fn base(&self) -> &MatroidInstance {
        &self.base
    }

    pub fn ground_size(&self) -> usize {
        self.base.ground_size()
    }

    pub fn contracted(&self) -> &[ElementId] {
        &self.contracted
    }

    pub fn is_live(&self, id: ElementId) -> bool {
        (id as usize) < self.ground_size()
            && !self.deleted.contains(id as usize)
            && self.contracted.binary_search(&id).is_err()
    }

    pub fn live_count(&self) -> usize {
        self.ground_size() - self.deleted.count_ones(..) - self.contracted.len()
    }

    pub fn live_elements(&self) -> Vec<ElementId> {
        (0..self.ground_size() as u32).filter(|&x| self.is_live(x)).collect()
    }

    pub fn check_live(&self, set: &[ElementId]) -> Result<()> {
        for &x in set {
            if !self.is_live(x) {
                return Err(Error::ElementOutOfRange { element: x });
            }
        }
        Ok(())
    }

    /// New view with `set` additionally deleted.
    pub fn delete_all(&self, set: &[ElementId]) -> Result<MatroidView> {
        self.check_live(set)?;
        let mut v = self.fresh();
        for &x in set {
            v.deleted.insert(x as usize);
        }
        Ok(v)
    }

    /// New view with `set` additionally contracted. The union of old and new
    /// contracted elements must be independent in the base matroid.
    pub fn contract_all(&self, set: &[ElementId]) -> Result<MatroidView> {
        self.check_live(set)?;
        let mut v = self.fresh();
        v.contracted.extend_from_slice(set);
        v.contracted.sort_unstable();
        v.contracted.dedup();
        if !self.base.is_independent(&v.contracted) {
            return Err(Error::InvalidView("contracted set is dependent in the base".into()));
        }
        Ok(v)
    }

    fn fresh(&self) -> MatroidView {
        MatroidView {
            base: self.base.clone(),
            deleted: self.deleted.clone(),
            contracted: self.contracted.clone(),
            prepared_plain: Arc::new(OnceLock::new()),
            prepared_tracked: Arc::new(OnceLock::new()),
        }
    }

    /// A fresh engine with the contracted set pre-absorbed, for incremental
    /// scans.
    pub fn scan_engine(&self, track: bool) -> Engine {
        self.prepared(track).clone()
    }

    /// Is `set ∪ contracted` independent in the base? `set` must be live.
    pub fn is_independent(&self, set: &[ElementId]) -> Result<bool> {
        self.check_live(set)?;
        Ok(self.prepared(false).probe_subset(set))
    }

    /// The lazily built context engine itself (contracted set absorbed),
    /// for non-mutating probes.
    pub fn prepared(&self, track: bool) -> &Engine {
        let cell = if track { &self.prepared_tracked } else { &self.prepared_plain };
        cell.get_or_init(|| {
            let mut e = self.base.engine(track);
            for &c in &self.contracted {
                let pushed = e.push(c);
                debug_assert_eq!(pushed, Push::Independent);
            }
            e.flatten();
            e
        })
    }

    /// Rank of a live subset in the view (contraction quotient applied).
    pub fn rank_of(&self, set: &[ElementId]) -> usize {
        let mut e = self.scan_engine(false);
        let mut rank = 0;
        for &x in set {
            if e.push(x) == Push::Independent {
                rank += 1;
            }
        }
        rank
    }

    /// Rank of the whole live ground set.
    pub fn live_rank(&self) -> usize {
        self.rank_of(&self.live_elements())
    }

    /// Least `j` such that the first `j` elements of `order` are dependent in
    /// the view, or `None` if the whole order is independent.
    pub fn first_dependent_prefix(&self, order: &[ElementId]) -> Option<usize> {
        let mut e = self.scan_engine(false);
        for (i, &x) in order.iter().enumerate() {
            if let Push::Dependent(_) = e.push(x) {
                return Some(i + 1);
            }
        }
        None
    }

    /// The unique circuit inside `order[..len]`, where `len` is the first
    /// dependent prefix length. Elements the view has contracted away are not
    /// part of the view-level circuit.
    pub fn circuit_in_first_prefix(&self, order: &[ElementId], len: usize) -> Result<Circuit> {
        let mut e = self.scan_engine(true);
        for (i, &x) in order[..len].iter().enumerate() {
            match e.push(x) {
                Push::Independent => {
                    if i + 1 == len {
                        return Err(Error::InvalidView(
                            "prefix is independent; no circuit to extract".into(),
                        ));
                    }
                }
                Push::Dependent(c) => {
                    if i + 1 != len {
                        return Err(Error::InvalidView(
                            "prefix dependent before its last element".into(),
                        ));
                    }
                    let members = c.expect("tracking engine returns circuits");
                    let live: Vec<ElementId> =
                        members.into_iter().filter(|&x| self.is_live(x)).collect();
                    return Ok(Circuit::new(live));
                }
            }
        }
        Err(Error::InvalidView("empty prefix".into()))
    }

    /// For an independent live set `prefix`, report which probe elements lie
    /// in its span (in the view).
    pub fn span_probes(&self, prefix: &[ElementId], probes: &[ElementId]) -> Vec<bool> {
        let mut e = self.scan_engine(false);
        for &x in prefix {
            // Skip dependent pushes so a not-quite-independent prefix still
            // yields the span of its maximal independent subset.
            let _ = e.push(x);
        }
        probes.iter().map(|&x| e.spans(x)).collect()
    }

    /// Greedy scan over `order`: keep an element iff it extends the kept set
    /// independently. Returns kept elements in order.
    pub fn greedy_scan(&self, order: &[ElementId]) -> Vec<ElementId> {
        let mut e = self.scan_engine(false);
        let mut kept = Vec::new();
        for &x in order {
            if e.push(x) == Push::Independent {
                kept.push(x);
            }
        }
        kept
    }
}
