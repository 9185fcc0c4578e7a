//! Linear-scaling dynamic program for 1D k-local Hamiltonians.
//!
//! Sites are addressed by a cursor `m` counted from 1 (site `m` is qubit
//! `m - 1`); `m = 0` and `m = n + 1` are the empty boundary cursors. The state
//! at cursor `m` lives on the frame `[m - k + 1, m]`, stored as a `k`-site
//! register whose local index `j` is site `m - k + 1 + j`. Sites outside the
//! chain carry no terms, so frames never need clipping.
//!
//! A state is `(s_proj, invalid, s_right)`:
//! - `s_proj`: elements of the committed group supported on `[m - k + 1, m - 1]`;
//! - `invalid`: terms ending at or after `m` that anticommute with the
//!   committed past, as `(last - m, index among terms ending there)`;
//! - `s_right`: elements of the future group supported on `[m - k + 1, m]`.
//!
//! All three are frame-relative, so equal keys at different cursors describe
//! translated copies of the same boundary.

use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use rayon::prelude::*;

use crate::hamiltonian::Hamiltonian;
use crate::pauli::{Letter, PauliOp, PauliSet};
use crate::solver_general::{e_stab, GroupWalk, SolveResult};
use crate::stabgroup::{MemberSign, StabGroup};

/// A term seen from the frame of its last site.
#[derive(Debug, Clone)]
pub struct FrameTerm {
    pub weight: f64,
    /// Operator on the `k`-site frame, phase 0, last letter at local `k - 1`.
    pub op: PauliOp,
    /// `truncs[d]`: unsigned truncation seen from the frame `d + 1` sites earlier
    /// (letters shifted right by `d`, those falling off the end dropped).
    pub truncs: Vec<PauliOp>,
    /// Caller-side identifier (term index of the source Hamiltonian).
    pub id: usize,
}

impl FrameTerm {
    pub fn new(weight: f64, op: PauliOp, id: usize) -> FrameTerm {
        let k = op.n_sites();
        let truncs = (0..k).map(|d| op.window_bits(0, k - d).unsigned().embed(k, d)).collect();
        FrameTerm { weight, op, truncs, id }
    }
}

/// Terms grouped by last site, in frame coordinates.
pub trait TermSource: Sync {
    fn k(&self) -> usize;
    fn ending_at(&self, m: i64) -> &[FrameTerm];
}

/// Finite open chain.
pub struct ChainTerms {
    k: usize,
    by_site: Vec<Vec<FrameTerm>>,
}

impl ChainTerms {
    pub fn new(h: &Hamiltonian) -> ChainTerms {
        let k = h.k().max(1);
        let by_site = h
            .by_last_site()
            .iter()
            .enumerate()
            .map(|(s, ids)| {
                ids.iter()
                    .map(|&i| {
                        let t = &h.terms()[i];
                        let letters: Vec<_> = t.pauli.letters().into_iter().map(|(q, l)| (q + k - 1 - s, l)).collect();
                        let op = PauliOp::from_letters(k, &letters, false).expect("term fits its frame");
                        FrameTerm::new(t.weight, op, i)
                    })
                    .collect()
            })
            .collect();
        ChainTerms { k, by_site }
    }
}

impl TermSource for ChainTerms {
    fn k(&self) -> usize {
        self.k
    }

    fn ending_at(&self, m: i64) -> &[FrameTerm] {
        if m >= 1 && (m as usize) <= self.by_site.len() {
            &self.by_site[m as usize - 1]
        } else {
            &[]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalState {
    pub s_proj: StabGroup,
    pub invalid: Vec<(u8, u16)>,
    pub s_right: StabGroup,
}

impl LocalState {
    pub fn initial(k: usize) -> LocalState {
        LocalState { s_proj: StabGroup::trivial(k), invalid: Vec::new(), s_right: StabGroup::trivial(k) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// A term picked up by the candidate anticommutes with the committed past.
    InvalidTerm,
    /// Joining the candidate with `s_proj` changes which next-site terms are members.
    Closure,
    /// The candidate is inconsistent with the current `s_right`.
    RightConsistency,
}

#[derive(Debug, Clone)]
pub struct RejectEvent {
    pub m: i64,
    pub from: LocalState,
    pub candidate: StabGroup,
    pub reason: RejectReason,
}

/// One outgoing edge: the next state, the energy of the terms committed at
/// `m`, and those terms as `(index among terms ending at m, negative)`.
pub struct Successor {
    pub state: LocalState,
    pub delta_e: f64,
    pub committed: Vec<(u16, bool)>,
}

struct CandidateSet {
    /// Candidates bucketed by their projection onto the overlap with the
    /// previous frame, already placed in previous-frame coordinates.
    buckets: HashMap<StabGroup, Vec<StabGroup>>,
    /// Bucket keys in first-seen order.
    order: Vec<StabGroup>,
}

/// Non-identity elements of the GF(2) span of `gens`, phases dropped, sorted.
fn unsigned_span(gens: &[PauliOp]) -> Vec<PauliOp> {
    let mut span: Vec<PauliOp> = Vec::new();
    let mut seen: HashSet<PauliOp> = HashSet::default();
    for g in gens {
        let g = g.unsigned();
        if g.is_identity() || seen.contains(&g) {
            continue;
        }
        let mut fresh = vec![g.clone()];
        for s in &span {
            fresh.push(s.multiply(&g).unsigned());
        }
        for f in fresh {
            if !f.is_identity() && seen.insert(f.clone()) {
                span.push(f);
            }
        }
    }
    span.sort_unstable();
    span
}

/// Memo tables for [`Engine`]. Everything here depends only on operators,
/// never on weights, so one cache can serve many chains with the same term layout.
#[derive(Default)]
pub struct Local1dCache {
    cache: RwLock<HashMap<Vec<PauliOp>, Arc<CandidateSet>>>,
    spans: RwLock<HashMap<Vec<PauliOp>, Arc<Span>>>,
    extensions: RwLock<HashMap<(Vec<PauliOp>, StabGroup), Arc<Vec<StabGroup>>>>,
    filtered: RwLock<HashMap<FilterKey, Arc<Vec<StabGroup>>>>,
    projections: RwLock<HashMap<(StabGroup, Vec<PauliOp>), Arc<Vec<StabGroup>>>>,
    states: RwLock<Interner<LocalState>>,
    layouts: RwLock<Interner<Vec<Vec<PauliOp>>>>,
    transitions: RwLock<HashMap<(u32, u32), Arc<Transition>>>,
}

impl Local1dCache {
    pub fn new() -> Arc<Local1dCache> {
        Arc::new(Local1dCache::default())
    }

    /// Drops every memo table (and its capacity) but keeps interned states valid.
    pub fn clear_memo(&self) {
        *self.cache.write().expect("cache lock") = HashMap::default();
        *self.spans.write().expect("span lock") = HashMap::default();
        *self.extensions.write().expect("ext lock") = HashMap::default();
        *self.filtered.write().expect("filter lock") = HashMap::default();
        *self.projections.write().expect("projection lock") = HashMap::default();
        *self.transitions.write().expect("transition lock") = HashMap::default();
    }

    /// Forgets every interned state except `keep`, which get ids `0..keep.len()`.
    /// Transitions refer to state ids, so they are dropped too.
    fn reset_states(&self, keep: &[Arc<LocalState>]) {
        let mut w = self.states.write().expect("state lock");
        *w = Interner::default();
        for (i, st) in keep.iter().enumerate() {
            w.items.push(st.clone());
            let prev = w.ids.insert(st.clone(), i as u32);
            assert!(prev.is_none(), "frontier states are distinct");
        }
        *self.transitions.write().expect("transition lock") = HashMap::default();
    }

    pub fn n_states(&self) -> usize {
        self.states.read().expect("state lock").items.len()
    }
}

struct Interner<T> {
    items: Vec<Arc<T>>,
    ids: HashMap<Arc<T>, u32>,
}

impl<T> Default for Interner<T> {
    fn default() -> Self {
        Interner { items: Vec::new(), ids: HashMap::default() }
    }
}

fn intern<T: Eq + std::hash::Hash>(lock: &RwLock<Interner<T>>, v: T) -> u32 {
    if let Some(&id) = lock.read().expect("intern lock").ids.get(&v) {
        return id;
    }
    let mut w = lock.write().expect("intern lock");
    if let Some(&id) = w.ids.get(&v) {
        return id;
    }
    let id = u32::try_from(w.items.len()).expect("fewer than 2^32 entries");
    let v = Arc::new(v);
    w.items.push(v.clone());
    w.ids.insert(v, id);
    id
}

/// Cached outgoing edges of one state under one term layout.
pub struct Transition {
    /// Interned successor states.
    pub next: Vec<u32>,
    /// Terms committed at this cursor, `(index among terms ending here, negative)`.
    pub committed: Vec<(u16, bool)>,
}

/// Transition function shared by the finite and periodic solvers.
pub struct Engine<'a, S: TermSource> {
    src: &'a S,
    k: usize,
    c: Arc<Local1dCache>,
}

#[derive(PartialEq, Eq, Hash)]
struct FilterKey {
    key: Vec<PauliOp>,
    next: Vec<PauliOp>,
    inv0: Vec<u16>,
    s_proj: StabGroup,
    p_next: StabGroup,
}

struct Span {
    elems: Vec<PauliOp>,
    set: HashSet<PauliOp>,
}

impl<'a, S: TermSource> Engine<'a, S> {
    pub fn new(src: &'a S) -> Self {
        Engine::with_cache(src, Local1dCache::new())
    }

    pub fn with_cache(src: &'a S, c: Arc<Local1dCache>) -> Self {
        Engine { src, k: src.k(), c }
    }

    pub fn state_id(&self, st: LocalState) -> u32 {
        intern(&self.c.states, st)
    }

    pub fn state(&self, id: u32) -> Arc<LocalState> {
        self.c.states.read().expect("state lock").items[id as usize].clone()
    }

    /// Identifies the operators a transition at cursor `m` can see.
    pub fn layout_id(&self, m: i64) -> u32 {
        let ops = (0..=self.k as i64).map(|d| self.src.ending_at(m + d).iter().map(|t| t.op.clone()).collect()).collect();
        intern(&self.c.layouts, ops)
    }

    /// Cached [`Engine::expand`] with interned states; `layout` must be `layout_id(m)`.
    pub fn transition(&self, m: i64, layout: u32, state: u32) -> Arc<Transition> {
        if let Some(t) = self.c.transitions.read().expect("transition lock").get(&(layout, state)) {
            return t.clone();
        }
        let st = self.state(state);
        let (succ, _) = self.expand(m, &st, false);
        let committed = self.committed(m, &st).1;
        let next = succ.into_iter().map(|s| self.state_id(s.state)).collect();
        let t = Arc::new(Transition { next, committed });
        self.c.transitions.write().expect("transition lock").entry((layout, state)).or_insert(t).clone()
    }

    /// Energy of the terms committed by a transition at cursor `m`.
    pub fn delta_e(&self, m: i64, committed: &[(u16, bool)]) -> f64 {
        let terms = self.src.ending_at(m);
        committed.iter().map(|&(i, neg)| if neg { -terms[i as usize].weight } else { terms[i as usize].weight }).sum()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn source(&self) -> &S {
        self.src
    }

    fn candidates(&self, key: Vec<PauliOp>) -> Arc<CandidateSet> {
        if let Some(c) = self.c.cache.read().expect("cache lock").get(&key) {
            return c.clone();
        }
        let k = self.k;
        // A right group is a projection of the future group, so its elements are
        // products of truncations; every stabilizer group inside their span is a candidate.
        let span = unsigned_span(&key);
        let moves: Vec<Vec<PauliOp>> = span.iter().map(|p| vec![p.clone()]).collect();
        let mut subspaces = Vec::new();
        GroupWalk::new(&moves).run(StabGroup::trivial(k), &mut |g| {
            subspaces.push(g.clone());
            true
        });
        // every sign pattern on the canonical generators is again canonical
        // subspaces differing only in signs expand to the same groups
        let mut groups = Vec::new();
        let mut seen: HashSet<StabGroup> = HashSet::default();
        for sub in &subspaces {
            let r = sub.rank();
            for signs in 0u32..(1u32 << r) {
                let g = sub.with_generator_signs(signs);
                if seen.insert(g.clone()) {
                    groups.push(g);
                }
            }
        }
        let mut buckets: HashMap<StabGroup, Vec<StabGroup>> = HashMap::default();
        let mut order: Vec<StabGroup> = Vec::new();
        for g in groups {
            let proj = self.overlap_projection(&g);
            let e = buckets.entry(proj.clone()).or_default();
            if e.is_empty() {
                order.push(proj);
            }
            e.push(g);
        }
        let set = Arc::new(CandidateSet { buckets, order });
        self.c.cache.write().expect("cache lock").entry(key).or_insert(set).clone()
    }

    fn span(&self, key: &[PauliOp]) -> Arc<Span> {
        if let Some(c) = self.c.spans.read().expect("span lock").get(key) {
            return c.clone();
        }
        let elems = unsigned_span(key);
        let set = elems.iter().cloned().collect();
        let sp = Arc::new(Span { elems, set });
        self.c.spans.write().expect("span lock").entry(key.to_vec()).or_insert(sp).clone()
    }

    /// Next-frame groups inside the span of `key` whose part off the new site
    /// is exactly `p` (given in next-frame coordinates). Same set as the
    /// matching bucket of `candidates`, built directly: beyond `p` such a group
    /// has at most two generators, with distinct letters on the new site.
    fn extensions(&self, key: &[PauliOp], p: &StabGroup) -> Arc<Vec<StabGroup>> {
        let ck = (key.to_vec(), p.clone());
        if let Some(c) = self.c.extensions.read().expect("ext lock").get(&ck) {
            return c.clone();
        }
        let k = self.k;
        let span = self.span(key);
        let mut out = Vec::new();
        if p.generators().iter().all(|g| span.set.contains(&g.unsigned())) {
            let ext: Vec<&PauliOp> =
                span.elems.iter().filter(|v| v.letter(k - 1) != Letter::I && p.commutes_with(v)).collect();
            let mut seen: HashSet<StabGroup> = HashSet::default();
            seen.insert(p.clone());
            out.push(p.clone());
            let mut singles = Vec::new();
            for v in &ext {
                for sv in [(*v).clone(), v.negated()] {
                    let g = p.extend(&sv).expect("commuting extension");
                    if seen.insert(g.clone()) {
                        singles.push((g.clone(), v.letter(k - 1)));
                        out.push(g);
                    }
                }
            }
            for (g, la) in &singles {
                for v in &ext {
                    let lb = v.letter(k - 1);
                    if lb == *la || lb < *la || !g.commutes_with(v) {
                        continue;
                    }
                    for sv in [(*v).clone(), v.negated()] {
                        let g2 = g.extend(&sv).expect("commuting extension");
                        if seen.insert(g2.clone()) {
                            out.push(g2);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        let out = Arc::new(out);
        self.c.extensions.write().expect("ext lock").entry(ck).or_insert(out).clone()
    }

    /// Part of a next-frame group on the sites shared with the current frame,
    /// in current-frame coordinates.
    fn overlap_projection(&self, g: &StabGroup) -> StabGroup {
        let k = self.k;
        if k == 1 {
            StabGroup::trivial(1)
        } else {
            g.project_window(0, k - 2).embed(k, 1)
        }
    }

    /// Subgroups `p` of `s_right` on the shared sites with `<p, q> == s_right`.
    fn consistent_projections(&self, s_right: &StabGroup, q: &[PauliOp]) -> Arc<Vec<StabGroup>> {
        let ck = (s_right.clone(), q.to_vec());
        if let Some(c) = self.c.projections.read().expect("projection lock").get(&ck) {
            return c.clone();
        }
        let k = self.k;
        let shared = if k == 1 { StabGroup::trivial(1) } else { s_right.project_window(1, k - 1).embed(k, 1) };
        let elems = shared.enumerate_elements().expect("frame groups are small");
        let moves: Vec<Vec<PauliOp>> = elems.iter().filter(|p| !p.is_identity()).map(|p| vec![p.clone()]).collect();
        let mut out = Vec::new();
        GroupWalk::new(&moves).run(StabGroup::trivial(k), &mut |p| {
            let mut j = p.clone();
            if q.iter().all(|x| j.extend_in_place(x).is_ok()) && j == *s_right {
                out.push(p.clone());
            }
            true
        });
        let out = Arc::new(out);
        self.c.projections.write().expect("projection lock").entry(ck).or_insert(out).clone()
    }

    /// Signed terms ending at `m` that are members of `s_right`.
    pub fn committed(&self, m: i64, st: &LocalState) -> (Vec<PauliOp>, Vec<(u16, bool)>, f64) {
        let mut ops = Vec::new();
        let mut ids = Vec::new();
        let mut de = 0.0;
        for (i, t) in self.src.ending_at(m).iter().enumerate() {
            match st.s_right.member_sign(&t.op) {
                MemberSign::Plus => {
                    ops.push(t.op.clone());
                    ids.push((i as u16, false));
                    de += t.weight;
                }
                MemberSign::Minus => {
                    ops.push(t.op.negated());
                    ids.push((i as u16, true));
                    de -= t.weight;
                }
                MemberSign::Absent => {}
            }
        }
        (ops, ids, de)
    }

    /// Why a next-frame candidate `r` cannot follow, if it cannot.
    fn check(&self, r: &StabGroup, s_proj: &StabGroup, invalid: &[(u8, u16)], next_terms: &[FrameTerm]) -> Option<RejectReason> {
        let k = self.k;
        let Ok(jn) = s_proj.join(r) else {
            return Some(RejectReason::Closure);
        };
        for (i, t) in next_terms.iter().enumerate() {
            let sr = r.member_sign(&t.op);
            if sr != MemberSign::Absent && invalid.binary_search(&(0, i as u16)).is_ok() {
                return Some(RejectReason::InvalidTerm);
            }
            if jn.member_sign(&t.op) != sr {
                return Some(RejectReason::Closure);
            }
        }
        // the step after needs r = <members ending there, part avoiding local 0>
        if k > 1 {
            let mut back = r.project_window(1, k - 1).embed(k, 1);
            for t in next_terms {
                match r.member_sign(&t.op) {
                    MemberSign::Plus => {
                        let _ = back.insert_unchecked(t.op.clone());
                    }
                    MemberSign::Minus => {
                        let _ = back.insert_unchecked(t.op.negated());
                    }
                    MemberSign::Absent => {}
                }
            }
            if back.rank() != r.rank() {
                return Some(RejectReason::RightConsistency);
            }
        }
        None
    }

    fn filtered(&self, fk: FilterKey, invalid: &[(u8, u16)]) -> Arc<Vec<StabGroup>> {
        if let Some(c) = self.c.filtered.read().expect("filter lock").get(&fk) {
            return c.clone();
        }
        let next_terms: Vec<FrameTerm> = fk.next.iter().map(|op| FrameTerm::new(0.0, op.clone(), 0)).collect();
        let ext = self.extensions(&fk.key, &fk.p_next);
        let kept: Vec<StabGroup> =
            ext.iter().filter(|r| self.check(r, &fk.s_proj, invalid, &next_terms).is_none()).cloned().collect();
        let kept = Arc::new(kept);
        self.c.filtered.write().expect("filter lock").entry(fk).or_insert(kept).clone()
    }

    /// All states reachable from `st` at cursor `m`.
    pub fn expand(&self, m: i64, st: &LocalState, trace: bool) -> (Vec<Successor>, Vec<RejectEvent>) {
        let k = self.k;
        let mut out = Vec::new();
        let mut rejects = Vec::new();
        let (q, q_ids, de) = self.committed(m, st);

        let mut joined = st.s_proj.clone();
        for p in &q {
            if joined.extend_in_place(p).is_err() {
                return (out, rejects);
            }
        }
        let s_proj = if k == 1 { StabGroup::trivial(1) } else { joined.project_window(1, k - 1).embed(k, 0) };

        let mut invalid: Vec<(u8, u16)> =
            st.invalid.iter().filter(|(d, _)| *d >= 1).map(|&(d, i)| (d - 1, i)).collect();
        if !q.is_empty() {
            for e in 1..k {
                for (i, t) in self.src.ending_at(m + e as i64).iter().enumerate() {
                    let tw = t.op.window_bits(0, k - e);
                    if q.iter().any(|a| !a.window_bits(e, k - e).commutes(&tw)) {
                        invalid.push(((e - 1) as u8, i as u16));
                    }
                }
            }
        }
        invalid.sort_unstable();
        invalid.dedup();

        let mut key: Vec<PauliOp> = Vec::new();
        for d in 0..k {
            for (i, t) in self.src.ending_at(m + 1 + d as i64).iter().enumerate() {
                if invalid.binary_search(&(d as u8, i as u16)).is_ok() {
                    continue;
                }
                let tr = &t.truncs[d];
                if !tr.is_identity() {
                    key.push(tr.clone());
                }
            }
        }
        key.sort_unstable();
        key.dedup();
        let next_terms = self.src.ending_at(m + 1);
        let push = |r: &StabGroup, out: &mut Vec<Successor>| {
            out.push(Successor {
                state: LocalState { s_proj: s_proj.clone(), invalid: invalid.clone(), s_right: r.clone() },
                delta_e: de,
                committed: q_ids.clone(),
            })
        };
        if !trace {
            let inv0: Vec<u16> = invalid.iter().take_while(|(d, _)| *d == 0).map(|&(_, i)| i).collect();
            for p in self.consistent_projections(&st.s_right, &q).iter() {
                let p_next = if k == 1 { StabGroup::trivial(1) } else { p.project_window(1, k - 1).embed(k, 0) };
                let fk = FilterKey {
                    key: key.clone(),
                    next: next_terms.iter().map(|t| t.op.clone()).collect(),
                    inv0: inv0.clone(),
                    s_proj: s_proj.clone(),
                    p_next,
                };
                for r in self.filtered(fk, &invalid).iter() {
                    push(r, &mut out);
                }
            }
            return (out, rejects);
        }
        let cands = self.candidates(key);
        for proj in &cands.order {
            let members = &cands.buckets[proj];
            let mut j = proj.clone();
            let consistent = q.iter().all(|p| j.extend_in_place(p).is_ok()) && j == st.s_right;
            for r in members {
                let verdict =
                    if consistent { self.check(r, &s_proj, &invalid, next_terms) } else { Some(RejectReason::RightConsistency) };
                match verdict {
                    None => push(r, &mut out),
                    Some(reason) => rejects.push(RejectEvent { m, from: st.clone(), candidate: r.clone(), reason }),
                }
            }
        }
        (out, rejects)
    }
}

#[derive(Clone)]
pub struct Node {
    pub state: u32,
    pub e: f64,
    /// Index into the previous frontier (`u32::MAX` at the start).
    pub parent: u32,
    /// Edge taken from the parent.
    pub via: Option<Arc<Transition>>,
}

/// Deterministic min-merge of expanded nodes into the next frontier.
/// On equal energies the smaller parent state wins.
pub fn merge_successors<S: TermSource>(
    engine: &Engine<'_, S>,
    m: i64,
    frontier: &[Node],
    edges: Vec<Arc<Transition>>,
) -> Vec<Node> {
    let mut next: Vec<Node> = Vec::new();
    let mut index: HashMap<u32, usize> = HashMap::default();
    for (pi, tr) in edges.into_iter().enumerate() {
        let e = frontier[pi].e + engine.delta_e(m, &tr.committed);
        for &sid in &tr.next {
            match index.get(&sid) {
                Some(&ni) => {
                    let old = &next[ni];
                    let better = e < old.e
                        || (e == old.e
                            && engine.state(frontier[pi].state) < engine.state(frontier[old.parent as usize].state));
                    if better {
                        next[ni] = Node { state: sid, e, parent: pi as u32, via: Some(tr.clone()) };
                    }
                }
                None => {
                    index.insert(sid, next.len());
                    next.push(Node { state: sid, e, parent: pi as u32, via: Some(tr.clone()) });
                }
            }
        }
    }
    next
}

#[derive(Debug, Clone, Default)]
pub struct Local1dOptions {
    /// Record every rejected candidate (sequential, for inspection).
    pub trace: bool,
    /// Forget memoized transitions before every cursor, so each site pays
    /// its full cost (used for timing).
    pub cold_sites: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SiteStats {
    pub m: usize,
    pub frontier: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Local1dOutput {
    pub result: SolveResult,
    /// Sum of energy differences along the winning path (plus identity terms).
    pub path_energy: f64,
    /// Winning path states for `m = 0 ..= n + 1`.
    pub path_states: Vec<LocalState>,
    /// Signed committed terms, indexed by qubit of their last site.
    pub committed_by_site: Vec<Vec<PauliOp>>,
    pub stats: Vec<SiteStats>,
    pub rejects: Vec<RejectEvent>,
}

pub const LOCAL1D_TIE_BREAK: &str =
    "frontier merges keep the lower energy, then the lexicographically smaller parent state; final state chosen the same way";

/// Exact stabilizer ground state of a finite chain.
pub fn solve_local1d(h: &Hamiltonian) -> SolveResult {
    solve_local1d_detailed(h, &Local1dOptions::default()).result
}

pub fn solve_local1d_detailed(h: &Hamiltonian, opts: &Local1dOptions) -> Local1dOutput {
    solve_local1d_cached(h, opts, &Local1dCache::new())
}

/// As [`solve_local1d_detailed`], reusing memo tables from earlier solves.
pub fn solve_local1d_cached(h: &Hamiltonian, opts: &Local1dOptions, cache: &Arc<Local1dCache>) -> Local1dOutput {
    let n = h.n_sites();
    let src = ChainTerms::new(h);
    let k = src.k();
    let engine = Engine::with_cache(&src, cache.clone());
    let max_pm = (1..=n as i64).map(|m| src.ending_at(m).len()).max().unwrap_or(0).max(1);
    let frontier_bound = ((4 * k * max_pm) as f64).powi(3 * k as i32);

    let mut layers: Vec<Vec<Node>> = Vec::with_capacity(n + 2);
    // states of each layer, kept apart from the interner so cold runs can reset it
    let mut layer_states: Vec<Vec<Arc<LocalState>>> = Vec::with_capacity(n + 2);
    let start = engine.state_id(LocalState::initial(k));
    let mut frontier = vec![Node { state: start, e: 0.0, parent: u32::MAX, via: None }];
    let mut stats = Vec::with_capacity(n + 1);
    let mut rejects = Vec::new();
    for m in 0..=n as i64 {
        let states: Vec<Arc<LocalState>> = frontier.iter().map(|nd| engine.state(nd.state)).collect();
        if opts.cold_sites {
            cache.clear_memo();
            cache.reset_states(&states);
            for (i, nd) in frontier.iter_mut().enumerate() {
                nd.state = i as u32;
            }
        }
        layer_states.push(states);
        let t0 = Instant::now();
        let edges: Vec<Arc<Transition>> = if opts.trace {
            frontier
                .iter()
                .map(|nd| {
                    let st = engine.state(nd.state);
                    let (succ, rej) = engine.expand(m, &st, true);
                    rejects.extend(rej);
                    let next = succ.into_iter().map(|s| engine.state_id(s.state)).collect();
                    Arc::new(Transition { next, committed: engine.committed(m, &st).1 })
                })
                .collect()
        } else {
            let layout = engine.layout_id(m);
            frontier.par_iter().map(|nd| engine.transition(m, layout, nd.state)).collect()
        };
        let next = merge_successors(&engine, m, &frontier, edges);
        assert!((next.len() as f64) <= frontier_bound, "frontier exceeds its theoretical bound");
        stats.push(SiteStats { m: m as usize, frontier: frontier.len(), seconds: t0.elapsed().as_secs_f64() });
        layers.push(std::mem::replace(&mut frontier, next));
    }
    assert!(!frontier.is_empty(), "the automaton always reaches the end of the chain");
    layer_states.push(frontier.iter().map(|nd| engine.state(nd.state)).collect());
    let last = &layer_states[n + 1];
    let best = (0..frontier.len())
        .min_by(|&a, &b| {
            let (x, y) = (&frontier[a], &frontier[b]);
            x.e.partial_cmp(&y.e).expect("finite energies").then_with(|| last[a].cmp(&last[b]))
        })
        .expect("non-empty");
    layers.push(frontier);

    // walk back: the node at layer m + 1 holds the terms committed at cursor m
    let mut committed_by_site = vec![Vec::new(); n];
    let mut path_states = vec![LocalState::initial(k); n + 2];
    let mut idx = best;
    for layer in (1..=n + 1).rev() {
        let nd = &layers[layer][idx];
        path_states[layer] = (*layer_states[layer][idx]).clone();
        let m = layer - 1;
        for &(i, neg) in &nd.via.as_ref().expect("non-initial node").committed {
            let t = &src.ending_at(m as i64)[i as usize];
            let p = h.terms()[t.id].pauli.with_sign(neg);
            committed_by_site[m - 1].push(p);
        }
        idx = nd.parent as usize;
    }
    let path_energy = layers[n + 1][best].e + h.constant();

    let group = StabGroup::from_generators(n, committed_by_site.iter().flatten()).expect("committed terms form a group");
    let energy = e_stab(h, &group);
    let tol = 1e-9 * (1.0 + h.abs_weight_sum());
    assert!((energy - path_energy).abs() <= tol, "path energy {} disagrees with group energy {}", path_energy, energy);
    let chosen_terms = group.intersect_with_set(&h.signed_terms());
    Local1dOutput {
        result: SolveResult { energy, group, chosen_terms, algorithm: "local1d", tie_break_note: LOCAL1D_TIE_BREAK.to_string() },
        path_energy,
        path_states,
        committed_by_site,
        stats,
        rejects,
    }
}

/// Per-cursor frontier sizes and wall times, each site timed without
/// memo tables carried over from earlier sites.
pub fn frontier_stats(h: &Hamiltonian) -> Vec<SiteStats> {
    solve_local1d_detailed(h, &Local1dOptions { cold_sites: true, ..Default::default() }).stats
}

/// Checks the four validity conditions for every committed site in order,
/// on the full chain. `q_by_site[s]` holds the signed terms ending at qubit `s`.
pub fn replay_valid_qm(h: &Hamiltonian, q_by_site: &[Vec<PauliOp>]) -> Result<(), String> {
    let n = h.n_sites();
    let signed = h.signed_terms();
    let mut past: Vec<PauliOp> = Vec::new();
    let mut past_group = StabGroup::trivial(n);
    for (s, qm) in q_by_site.iter().enumerate() {
        let own = StabGroup::from_generators(n, qm.iter()).map_err(|e| format!("site {}: own group: {}", s, e))?;
        for a in qm {
            if past.iter().any(|b| !a.commutes(b)) {
                return Err(format!("site {}: anticommutes with the past", s));
            }
        }
        let joined = past_group.join(&own)
            .map_err(|e| format!("site {}: joined group: {}", s, e))?;
        let here: PauliSet = signed.iter().filter(|p| p.last_site() == Some(s)).cloned().collect();
        let got = joined.intersect_with_set(&here);
        let want: PauliSet = qm.iter().cloned().collect();
        if !sets_equal(&got, &want) {
            return Err(format!("site {}: closure on the current site fails", s));
        }
        let before: PauliSet = signed.iter().filter(|p| p.last_site().map_or(false, |l| l < s)).cloned().collect();
        let got = joined.intersect_with_set(&before);
        let want: PauliSet = past.iter().cloned().collect();
        if !sets_equal(&got, &want) {
            return Err(format!("site {}: closure on earlier sites fails", s));
        }
        past.extend(qm.iter().cloned());
        past_group = joined;
    }
    Ok(())
}

fn sets_equal(a: &PauliSet, b: &PauliSet) -> bool {
    a.len() == b.len() && a.iter().all(|p| b.contains(p))
}

/// Subgroup of `g` (on the chain) inside cursor window `[lo, hi]`, in the
/// `k`-site frame ending at cursor `m`.
fn frame_projection(g: &StabGroup, lo: i64, hi: i64, m: i64, k: usize) -> StabGroup {
    let n = g.n_sites() as i64;
    let (a, b) = (lo.max(1), hi.min(n));
    if a > b {
        return StabGroup::trivial(k);
    }
    let frame_start = m - k as i64 + 1;
    g.project_window((a - 1) as usize, (b - 1) as usize).embed(k, (a - frame_start) as usize)
}

/// States determined directly by a closed term subset, for `m = 0 ..= n + 1`.
pub fn states_from_subset(h: &Hamiltonian, q_by_site: &[Vec<PauliOp>]) -> Vec<LocalState> {
    let n = h.n_sites();
    let src = ChainTerms::new(h);
    let k = src.k();
    let mut out = Vec::with_capacity(n + 2);
    for m in 0..=(n as i64 + 1) {
        // committed past: sites < m, i.e. qubits < m - 1
        let past: Vec<&PauliOp> = q_by_site.iter().take((m - 1).max(0) as usize).flatten().collect();
        let future: Vec<&PauliOp> = q_by_site.iter().skip((m - 1).max(0) as usize).flatten().collect();
        let gp = StabGroup::from_generators(n, past.iter().copied()).expect("valid subset");
        let gf = StabGroup::from_generators(n, future.iter().copied()).expect("valid subset");
        let lo = m - k as i64 + 1;
        let s_proj = frame_projection(&gp, lo, m - 1, m, k);
        let s_right = frame_projection(&gf, lo, m, m, k);
        let mut invalid = Vec::new();
        for d in 0..k as i64 {
            for (i, t) in src.ending_at(m + d).iter().enumerate() {
                let p = &h.terms()[t.id].pauli;
                if past.iter().any(|q| !q.commutes(p)) {
                    invalid.push((d as u8, i as u16));
                }
            }
        }
        out.push(LocalState { s_proj, invalid, s_right });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{gen_random_local, gen_stochastic_heisenberg, tfim};
    use crate::oracle::brute_force_min;
    use crate::pauli::parse_pauli;
    use crate::solver_general::{solve_general, GeneralOptions};
    use proptest::prelude::*;

    fn ham(n: usize, terms: &[(f64, &str)]) -> Hamiltonian {
        Hamiltonian::new(n, terms.iter().map(|(w, s)| (*w, parse_pauli(s, n).unwrap()))).unwrap()
    }

    #[test]
    fn direct_extensions_match_candidate_buckets() {
        let h = ham(3, &[(-1.0, "X0 Z1 X2")]);
        let src = ChainTerms::new(&h);
        let engine = Engine::new(&src);
        for texts in [vec!["X0 Z1 X2", "Y1 Y2", "Z2"], vec!["X1 X2", "Z0 Z1", "Y2"], vec!["Z0 Z1 Z2", "X2"]] {
            let key: Vec<PauliOp> = texts.iter().map(|t| parse_pauli(t, 3).unwrap()).collect();
            let cands = engine.candidates(key.clone());
            assert!(!cands.order.is_empty());
            for proj in &cands.order {
                let mut bucket = cands.buckets[proj].clone();
                bucket.sort_unstable();
                let p_next = proj.project_window(1, 2).embed(3, 0);
                assert_eq!(*engine.extensions(&key, &p_next), bucket, "key {:?}, proj {:?}", texts, proj.to_texts());
            }
        }
    }

    #[test]
    fn single_term_chain() {
        let h = ham(1, &[(-1.0, "Z0")]);
        let out = solve_local1d_detailed(&h, &Local1dOptions::default());
        assert_eq!(out.result.energy, -1.0);
        assert_eq!(out.result.group.to_texts(), vec!["+Z0"]);
        assert!(out.stats.len() <= 3);
        let src = ChainTerms::new(&h);
        let engine = Engine::new(&src);
        let (succ, _) = engine.expand(0, &LocalState::initial(1), false);
        assert!(succ.iter().any(|s| s.state.s_right.to_texts() == vec!["+Z0"]));
    }

    #[test]
    fn empty_hamiltonian() {
        let r = solve_local1d(&Hamiltonian::empty(4));
        assert_eq!(r.energy, 0.0);
        assert!(r.group.is_trivial());
    }

    #[test]
    fn ising_closed_forms() {
        let r = solve_local1d(&tfim(6, 0.5));
        assert_eq!(r.energy, -5.0);
        assert_eq!(r.group.rank(), 5);
        for i in 0..5 {
            assert!(r.group.contains(&parse_pauli(&format!("Z{} Z{}", i, i + 1), 6).unwrap()));
        }
        let r = solve_local1d(&tfim(6, 2.0));
        assert_eq!(r.energy, -12.0);
        for i in 0..6 {
            assert!(r.group.contains(&parse_pauli(&format!("X{}", i), 6).unwrap()));
        }
        let h = tfim(3, 0.7);
        assert_eq!(solve_local1d(&h).energy, brute_force_min(&h).unwrap());
    }

    #[test]
    fn closure_counterexample() {
        let h = ham(3, &[(-1.0, "X0"), (-1.0, "X0 X1"), (-1.0, "X1 X2"), (-1.0, "X2")]);
        let out = solve_local1d_detailed(&h, &Local1dOptions { trace: true, ..Default::default() });
        assert_eq!(out.result.energy, -4.0);
        let want = StabGroup::from_generators(
            3,
            ["X0", "X1", "X2"].iter().map(|s| parse_pauli(s, 3).unwrap()).collect::<Vec<_>>().iter(),
        )
        .unwrap();
        assert_eq!(out.result.group, want);
        assert_eq!(brute_force_min(&h).unwrap(), -4.0);
        // with X on the first site committed and nothing at the second, the
        // right group <X X, X> on the last frame is refused by the consistency rule
        let bad = StabGroup::from_generators(
            2,
            ["X0", "X1"].iter().map(|s| parse_pauli(s, 2).unwrap()).collect::<Vec<_>>().iter(),
        )
        .unwrap();
        assert!(out.rejects.iter().any(|r| r.m == 2
            && r.reason == RejectReason::RightConsistency
            && r.candidate == bad
            && r.from.s_right.is_trivial()
            && r.from.s_proj.to_texts() == vec!["+X0"]));
    }

    #[test]
    fn frontier_is_flat_for_uniform_chain() {
        let stats = frontier_stats(&tfim(30, 0.8));
        let mid: Vec<usize> = stats[5..25].iter().map(|s| s.frontier).collect();
        assert!(mid.iter().all(|&f| f == mid[0]));
    }

    #[test]
    fn heisenberg_matches_general() {
        for seed in 0..4 {
            let h = gen_stochastic_heisenberg(5, 2, seed, true);
            let a = solve_local1d(&h);
            let b = solve_general(&h, &GeneralOptions::default()).unwrap();
            assert_eq!(a.energy, b.energy);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(60))]

        #[test]
        fn exact_against_oracles(seed in 0u64..100_000, n in 2usize..5, k in 2usize..4, terms in 2usize..7) {
            let k = k.min(n);
            let h = gen_random_local(n, k, terms, seed);
            let out = solve_local1d_detailed(&h, &Local1dOptions::default());
            let g = solve_general(&h, &GeneralOptions::default()).unwrap();
            prop_assert_eq!(out.result.energy, g.energy);
            if n <= 3 {
                prop_assert_eq!(out.result.energy, brute_force_min(&h).unwrap());
            }
            // closure of the reconstructed subset
            let chosen: Vec<PauliOp> = out.committed_by_site.iter().flatten().cloned().collect();
            let as_set: PauliSet = chosen.iter().cloned().collect();
            prop_assert!(sets_equal(&out.result.chosen_terms, &as_set));
            prop_assert!(replay_valid_qm(&h, &out.committed_by_site).is_ok());
            prop_assert_eq!(states_from_subset(&h, &out.committed_by_site), out.path_states);
        }
    }
}
