//! Infinite-system solvers.
//!
//! - 1D chains: the boundary automaton of [`crate::solver_local1d`] is run over
//!   whole translation units until the set of unit-boundary states closes, and
//!   the cheapest closed walk of at most `c_max` units gives the per-site energy.
//! - Lattices with `c = 1`: translation-invariant groups are built from whole
//!   translation orbits of the wrapped unit terms on a small torus.
//! - Extended scan: the `c = 1` solver applied to Y-rotated copies of a model.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use thiserror::Error;

use crate::hamiltonian::{
    rotate_y_supercell, toric_model, HamError, PeriodicHamiltonian1D, SupercellHamiltonian, PRUNE_EPS,
    TORIC_HORIZONTAL, TORIC_VERTICAL,
};
use crate::pauli::{Letter, PauliOp, PauliSet};
use crate::solver_general::{GroupWalk, DEFAULT_MAX_TERMS};
use crate::solver_local1d::{merge_successors, Engine, FrameTerm, Local1dCache, LocalState, Node, TermSource, Transition};
use crate::stabgroup::{MemberSign, StabGroup};

pub const DEFAULT_C_MAX: usize = 6;

/// Cap on the closed walks listed per `(start, c)` in degenerate mode.
pub const DEGENERATE_WALK_CAP: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeriodicError {
    #[error("no closed walk of at most {c_max} units exists; raise c_max")]
    NoCycleFound { c_max: usize },
    #[error("{terms} translation orbits exceed the guard of {max}")]
    Guard { terms: usize, max: usize },
    #[error("torus extent {got} along axis {axis} is below {need}, the size that keeps translates from aliasing")]
    TorusTooSmall { axis: usize, need: usize, got: usize },
    #[error("empty angle grid")]
    EmptyGrid,
    #[error(transparent)]
    Ham(#[from] HamError),
}

/// A signed Pauli string at absolute chain positions, letters sorted by site.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlacedTerm {
    pub letters: Vec<(i64, Letter)>,
    pub negative: bool,
}

impl PlacedTerm {
    pub fn first(&self) -> i64 {
        self.letters.first().map_or(0, |l| l.0)
    }

    pub fn last(&self) -> i64 {
        self.letters.last().map_or(0, |l| l.0)
    }

    pub fn shifted(&self, d: i64) -> PlacedTerm {
        PlacedTerm { letters: self.letters.iter().map(|&(q, l)| (q + d, l)).collect(), negative: self.negative }
    }

    /// Translate by a multiple of `period` so the first site lands in `[0, period)`.
    pub fn wrapped(&self, period: i64) -> PlacedTerm {
        self.shifted(-self.first().div_euclid(period) * period)
    }

    pub fn to_text(&self) -> String {
        let body: Vec<String> = self.letters.iter().map(|&(q, l)| format!("{}{}", l.as_char(), q)).collect();
        format!("{}{}", if self.negative { '-' } else { '+' }, body.join(" "))
    }

    /// Operator on `n` qubits; every position must lie in `[0, n)`.
    pub fn to_op(&self, n: usize) -> PauliOp {
        let ls: Vec<(usize, Letter)> = self.letters.iter().map(|&(q, l)| (q as usize, l)).collect();
        PauliOp::from_letters(n, &ls, self.negative).expect("positions inside the register")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicResult {
    pub e_per_site: f64,
    /// Period of the generator pattern in translation units.
    pub supercell_c: usize,
    pub generators_in_supercell: PauliSet,
    pub phase_signature: String,
}

/// Best unit-long path between two boundary states.
#[derive(Debug, Clone)]
pub struct BlockTransition {
    pub from: u32,
    pub to: u32,
    pub delta_e: f64,
    /// Signed terms committed in the unit, positions relative to the unit start.
    pub gens: Vec<PlacedTerm>,
}

/// Terms of a half-infinite chain `0, 1, 2, ...` built from a unit cell.
pub struct PeriodicTerms {
    k: usize,
    l: usize,
    lists: Vec<Vec<FrameTerm>>,
    unit: Vec<PlacedTerm>,
}

impl PeriodicTerms {
    pub fn new(h: &PeriodicHamiltonian1D) -> PeriodicTerms {
        let k = h.k().max(1);
        let l = h.l();
        let mut unit = Vec::new();
        let mut weights = Vec::new();
        for t in h.terms() {
            let letters: Vec<(i64, Letter)> = t.pauli.letters().into_iter().map(|(q, c)| (q as i64, c)).collect();
            if letters.is_empty() {
                continue;
            }
            unit.push(PlacedTerm { letters, negative: false });
            weights.push(if t.pauli.is_negative() { -t.weight } else { t.weight });
        }
        let mut lists = vec![Vec::new(); k + l];
        for (m, list) in lists.iter_mut().enumerate().skip(1) {
            let q = m as i64 - 1;
            for (i, u) in unit.iter().enumerate() {
                let d = q - u.last();
                if d < 0 || d % l as i64 != 0 {
                    continue;
                }
                let placed = u.shifted(d);
                let local: Vec<(usize, Letter)> =
                    placed.letters.iter().map(|&(p, c)| ((p - (m as i64 - k as i64)) as usize, c)).collect();
                let op = PauliOp::from_letters(k, &local, false).expect("term fits its frame");
                list.push(FrameTerm::new(weights[i], op, i));
            }
        }
        PeriodicTerms { k, l, lists, unit }
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// First cursor that is a unit boundary with the full bulk term set around it.
    pub fn bulk_start(&self) -> i64 {
        (self.k.div_ceil(self.l) * self.l) as i64
    }

    /// A committed term `(cursor, index)` at absolute positions.
    pub fn placed(&self, m: i64, i: usize) -> PlacedTerm {
        let t = &self.ending_at(m)[i];
        let u = &self.unit[t.id];
        u.shifted(m - 1 - u.last())
    }
}

impl TermSource for PeriodicTerms {
    fn k(&self) -> usize {
        self.k
    }

    fn ending_at(&self, m: i64) -> &[FrameTerm] {
        if m < 1 {
            return &[];
        }
        let (k, l) = (self.k as i64, self.l as i64);
        let idx = if m < k + l { m } else { k + (m - k) % l };
        &self.lists[idx as usize]
    }
}

/// Boundary states reachable at unit boundaries in the bulk, closed under one unit step.
pub struct UnitGraph {
    pub states: Vec<u32>,
    pub blocks: Vec<BlockTransition>,
    /// `out[i]`: indices into `blocks` leaving `states[i]`.
    pub out: Vec<Vec<usize>>,
    pub index: HashMap<u32, usize>,
}

fn unit_blocks(engine: &Engine<'_, PeriodicTerms>, m0: i64, from: u32) -> Vec<BlockTransition> {
    let src = engine.source();
    let l = src.l() as i64;
    let mut layers: Vec<Vec<Node>> = Vec::new();
    let mut frontier = vec![Node { state: from, e: 0.0, parent: u32::MAX, via: None }];
    for m in m0..m0 + l {
        let layout = engine.layout_id(m);
        let edges: Vec<Arc<Transition>> = frontier.iter().map(|nd| engine.transition(m, layout, nd.state)).collect();
        let next = merge_successors(engine, m, &frontier, edges);
        layers.push(std::mem::replace(&mut frontier, next));
    }
    layers.push(frontier);
    let last = layers.len() - 1;
    let mut out = Vec::new();
    for (i, nd) in layers[last].iter().enumerate() {
        let mut gens = Vec::new();
        let mut idx = i;
        for layer in (1..=last).rev() {
            let node = &layers[layer][idx];
            let m = m0 + layer as i64 - 1;
            for &(ti, neg) in &node.via.as_ref().expect("inner node").committed {
                let mut p = src.placed(m, ti as usize);
                p.negative = neg;
                gens.push(p.shifted(-(m0 - 1)));
            }
            idx = node.parent as usize;
        }
        gens.sort();
        out.push(BlockTransition { from, to: nd.state, delta_e: nd.e, gens });
    }
    out
}

/// Runs the automaton from the left end into the bulk, then closes the set
/// of boundary states under unit steps.
pub fn build_unit_graph(engine: &Engine<'_, PeriodicTerms>) -> UnitGraph {
    let m0 = engine.source().bulk_start();
    let mut cur: Vec<u32> = vec![engine.state_id(LocalState::initial(engine.k()))];
    for m in 0..m0 {
        let layout = engine.layout_id(m);
        let mut next: Vec<u32> = cur.iter().flat_map(|&s| engine.transition(m, layout, s).next.clone()).collect();
        next.sort_unstable();
        next.dedup();
        cur = next;
    }
    let mut g = UnitGraph { states: Vec::new(), blocks: Vec::new(), out: Vec::new(), index: HashMap::default() };
    let mut queue = VecDeque::new();
    for s in cur {
        g.index.insert(s, g.states.len());
        g.states.push(s);
        g.out.push(Vec::new());
        queue.push_back(s);
    }
    while let Some(s) = queue.pop_front() {
        let from = g.index[&s];
        for b in unit_blocks(engine, m0, s) {
            if !g.index.contains_key(&b.to) {
                g.index.insert(b.to, g.states.len());
                g.states.push(b.to);
                g.out.push(Vec::new());
                queue.push_back(b.to);
            }
            g.out[from].push(g.blocks.len());
            g.blocks.push(b);
        }
    }
    g
}

/// `dist[t][v]`: cheapest walk of exactly `t` units from `start` to `v`.
fn walk_costs(g: &UnitGraph, start: usize, c_max: usize) -> Vec<Vec<f64>> {
    let n = g.states.len();
    let mut dist = vec![vec![f64::INFINITY; n]; c_max + 1];
    dist[0][start] = 0.0;
    let mut active = vec![start];
    for t in 0..c_max {
        let mut next_active = Vec::new();
        for &u in &active {
            let du = dist[t][u];
            for &bi in &g.out[u] {
                let b = &g.blocks[bi];
                let v = g.index[&b.to];
                let e = du + b.delta_e;
                if dist[t + 1][v] == f64::INFINITY {
                    next_active.push(v);
                }
                if e < dist[t + 1][v] {
                    dist[t + 1][v] = e;
                }
            }
        }
        next_active.sort_unstable();
        active = next_active;
    }
    dist
}

/// `back[r][v]`: cheapest walk of exactly `r` units from `v` to `target`.
fn walk_costs_to(g: &UnitGraph, target: usize, c_max: usize) -> Vec<Vec<f64>> {
    let n = g.states.len();
    let mut back = vec![vec![f64::INFINITY; n]; c_max + 1];
    back[0][target] = 0.0;
    for r in 1..=c_max {
        for u in 0..n {
            let mut best = f64::INFINITY;
            for &bi in &g.out[u] {
                let b = &g.blocks[bi];
                let e = b.delta_e + back[r - 1][g.index[&b.to]];
                if e < best {
                    best = e;
                }
            }
            back[r][u] = best;
        }
    }
    back
}

/// Closed walks `start -> start` of `c` units costing at most `budget`, as block indices.
fn tight_walks(g: &UnitGraph, start: usize, c: usize, budget: f64, cap: usize) -> (Vec<Vec<usize>>, bool) {
    let back = walk_costs_to(g, start, c);
    let mut out = Vec::new();
    let mut path = Vec::new();
    let mut truncated = false;
    fn rec(
        g: &UnitGraph,
        back: &[Vec<f64>],
        u: usize,
        spent: f64,
        c: usize,
        budget: f64,
        cap: usize,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        truncated: &mut bool,
    ) {
        if out.len() >= cap {
            *truncated = true;
            return;
        }
        if path.len() == c {
            out.push(path.clone());
            return;
        }
        let left = c - path.len() - 1;
        for &bi in &g.out[u] {
            let b = &g.blocks[bi];
            let v = g.index[&b.to];
            if spent + b.delta_e + back[left][v] <= budget {
                path.push(bi);
                rec(g, back, v, spent + b.delta_e, c, budget, cap, path, out, truncated);
                path.pop();
            }
        }
    }
    rec(g, &back, start, 0.0, c, budget, cap, &mut path, &mut out, &mut truncated);
    (out, truncated)
}

/// Periodic term set of a closed walk, reduced to its smallest period and
/// written from the translation that minimizes the serialization.
fn periodic_result(g: &UnitGraph, walk: &[usize], l: usize, k: usize, e_per_site: f64) -> PeriodicResult {
    let c = walk.len();
    let mut terms: Vec<PlacedTerm> = Vec::new();
    for (t, &bi) in walk.iter().enumerate() {
        terms.extend(g.blocks[bi].gens.iter().map(|p| p.shifted((t * l) as i64)));
    }
    let normalize = |ts: &[PlacedTerm], shift: i64, period: i64| -> Vec<PlacedTerm> {
        let mut v: Vec<PlacedTerm> = ts.iter().map(|p| p.shifted(shift).wrapped(period)).collect();
        v.sort();
        v.dedup();
        v
    };
    let full = (c * l) as i64;
    let base = normalize(&terms, 0, full);
    let mut period_units = c;
    for d in 1..c {
        if c % d == 0 && normalize(&base, (d * l) as i64, full) == base {
            period_units = d;
            break;
        }
    }
    let period = (period_units * l) as i64;
    let reduced: Vec<PlacedTerm> = base.iter().filter(|p| p.first() < period).cloned().collect();
    let mut best: Option<(String, Vec<PlacedTerm>)> = None;
    for s in 0..period {
        let mut v = prune_redundant_1d(normalize(&reduced, -s, period), period);
        v.sort_by_key(|p| p.to_text());
        let sig = v.iter().map(|p| p.to_text()).collect::<Vec<_>>().join("; ");
        if best.as_ref().map_or(true, |(b, _)| sig < *b) {
            best = Some((sig, v));
        }
    }
    let (phase_signature, gens) = best.unwrap_or_default();
    let n = period as usize + k.saturating_sub(1);
    let generators_in_supercell = gens.iter().map(|p| p.to_op(n)).collect();
    PeriodicResult { e_per_site, supercell_c: period_units, generators_in_supercell, phase_signature }
}

/// Drops terms generated by the translates of the others (and by their own
/// other translates) on an open window, heaviest and then largest text first.
fn prune_redundant_1d(mut terms: Vec<PlacedTerm>, period: i64) -> Vec<PlacedTerm> {
    terms.sort_by(|a, b| b.letters.len().cmp(&a.letters.len()).then_with(|| b.to_text().cmp(&a.to_text())));
    let span = terms.iter().map(|t| t.last() - t.first() + 1).max().unwrap_or(1);
    let reps = 2 * (span / period + 1) + 1;
    let n = (reps * period + span) as usize;
    let centre = (reps / 2) * period;
    let mut i = 0;
    while i < terms.len() {
        let mut g = StabGroup::trivial(n);
        for (j, t) in terms.iter().enumerate() {
            for r in 0..reps {
                let p = t.shifted(r * period);
                if (j == i && r * period == centre) || p.last() >= n as i64 {
                    continue;
                }
                g.extend_in_place(&p.to_op(n)).expect("terms of one group commute");
            }
        }
        if g.member_sign(&terms[i].shifted(centre).to_op(n)) != MemberSign::Absent {
            terms.remove(i);
        } else {
            i += 1;
        }
    }
    terms
}

struct CycleSearch {
    graph: UnitGraph,
    /// `(start, c, total)` for every closed walk class, in start-major order.
    closed: Vec<(usize, usize, f64)>,
    best: (usize, usize, f64),
    tol: f64,
    l: usize,
    k: usize,
}

fn search(h: &PeriodicHamiltonian1D, c_max: usize, cache: &Arc<Local1dCache>) -> Result<CycleSearch, PeriodicError> {
    if c_max == 0 {
        return Err(PeriodicError::NoCycleFound { c_max });
    }
    let src = PeriodicTerms::new(h);
    let engine = Engine::with_cache(&src, cache.clone());
    let graph = build_unit_graph(&engine);
    let l = h.l();
    let closed: Vec<(usize, usize, f64)> = (0..graph.states.len())
        .into_par_iter()
        .flat_map_iter(|s| {
            let dist = walk_costs(&graph, s, c_max);
            (1..=c_max).filter(|&c| dist[c][s].is_finite()).map(|c| (s, c, dist[c][s])).collect::<Vec<_>>()
        })
        .collect();
    let scale: f64 = 1.0 + h.terms().iter().map(|t| t.weight.abs()).sum::<f64>();
    let tol = 1e-9 * scale;
    let mut best: Option<(usize, usize, f64)> = None;
    for &(s, c, tot) in &closed {
        let mean = tot / (c * l) as f64;
        let better = match best {
            None => true,
            Some((bs, bc, bt)) => {
                let bm = bt / (bc * l) as f64;
                mean < bm - tol
                    || ((mean - bm).abs() <= tol
                        && (c < bc || (c == bc && *engine.state(graph.states[s]) < *engine.state(graph.states[bs]))))
            }
        };
        if better {
            best = Some((s, c, tot));
        }
    }
    let best = best.ok_or(PeriodicError::NoCycleFound { c_max })?;
    Ok(CycleSearch { graph, closed, best, tol, l, k: src.k() })
}

fn walk_for(g: &UnitGraph, s: usize, c: usize) -> Vec<usize> {
    let dist = walk_costs(g, s, c);
    let (walks, _) = tight_walks(g, s, c, dist[c][s] + 1e-12 * (1.0 + dist[c][s].abs()), 1);
    walks.into_iter().next().expect("a closed walk of the recorded cost exists")
}

/// Lowest energy per site over closed walks of at most `c_max` units.
pub fn solve_periodic_1d(h: &PeriodicHamiltonian1D, c_max: usize) -> Result<PeriodicResult, PeriodicError> {
    solve_periodic_1d_cached(h, c_max, &Local1dCache::new())
}

pub fn solve_periodic_1d_cached(
    h: &PeriodicHamiltonian1D,
    c_max: usize,
    cache: &Arc<Local1dCache>,
) -> Result<PeriodicResult, PeriodicError> {
    let cs = search(h, c_max, cache)?;
    let (s, c, tot) = cs.best;
    let walk = walk_for(&cs.graph, s, c);
    Ok(periodic_result(&cs.graph, &walk, cs.l, cs.k, tot / (c * cs.l) as f64))
}

/// Every distinct phase reaching the minimum energy per site, sorted by
/// `(supercell_c, phase_signature)`. The flag reports whether the walk cap was hit.
pub fn solve_periodic_1d_degenerate(
    h: &PeriodicHamiltonian1D,
    c_max: usize,
    cache: &Arc<Local1dCache>,
) -> Result<(Vec<PeriodicResult>, bool), PeriodicError> {
    let cs = search(h, c_max, cache)?;
    let (_, bc, bt) = cs.best;
    let best_mean = bt / (bc * cs.l) as f64;
    let mut found: HashMap<String, PeriodicResult> = HashMap::default();
    let mut truncated = false;
    for &(s, c, tot) in &cs.closed {
        let units = (c * cs.l) as f64;
        if (tot / units - best_mean).abs() > cs.tol {
            continue;
        }
        let (walks, cut) = tight_walks(&cs.graph, s, c, tot + cs.tol * units, DEGENERATE_WALK_CAP);
        truncated |= cut;
        for w in walks {
            let r = periodic_result(&cs.graph, &w, cs.l, cs.k, best_mean);
            found.entry(r.phase_signature.clone()).or_insert(r);
        }
    }
    let mut out: Vec<PeriodicResult> = found.into_values().collect();
    out.sort_by(|a, b| a.supercell_c.cmp(&b.supercell_c).then_with(|| a.phase_signature.cmp(&b.phase_signature)));
    Ok((out, truncated))
}

/// Copies of the supercell generators on an open chain of `copies` supercells.
pub fn replicate(r: &PeriodicResult, l: usize, copies: usize) -> Vec<PauliOp> {
    let period = r.supercell_c * l;
    let n = period * copies;
    let mut out = Vec::new();
    for j in 0..copies {
        for g in r.generators_in_supercell.iter() {
            let letters = g.letters();
            if letters.iter().all(|&(q, _)| q + j * period < n) {
                let ls: Vec<(usize, Letter)> = letters.iter().map(|&(q, c)| (q + j * period, c)).collect();
                out.push(PauliOp::from_letters(n, &ls, g.is_negative()).expect("inside the chain"));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// c = 1 lattice solver

/// Wrapped copies of one unit term over every cell, merged across unit terms
/// with the same copies.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub weight: f64,
    pub ops: Vec<PauliOp>,
}

/// Orbits surviving the self-commutation filter, sorted by operator set, plus
/// the per-cell constant and the number of dropped unit terms.
pub fn orbits(h: &SupercellHamiltonian) -> Result<(Vec<Orbit>, f64, usize), PeriodicError> {
    let need = min_torus(h);
    for (axis, (&got, &need)) in h.dims.iter().zip(&need).enumerate() {
        if got < need {
            return Err(PeriodicError::TorusTooSmall { axis, need, got });
        }
    }
    let cells = h.cells();
    let mut merged: HashMap<Vec<PauliOp>, f64> = HashMap::default();
    let mut constant = 0.0;
    let mut dropped = 0;
    for i in 0..h.terms.len() {
        let mut w = h.terms[i].weight;
        let mut ops = Vec::with_capacity(cells.len());
        for c in &cells {
            let (_, p) = h.wrap_term(i, c)?;
            ops.push(p);
        }
        if ops[0].is_negative() {
            w = -w;
        }
        let mut ops: Vec<PauliOp> = ops.into_iter().map(|p| p.unsigned()).collect();
        ops.sort_unstable();
        ops.dedup();
        if ops[0].is_identity() {
            constant += w;
            continue;
        }
        let self_commuting = ops.iter().enumerate().all(|(a, p)| ops[a + 1..].iter().all(|q| p.commutes(q)));
        if !self_commuting {
            dropped += 1;
            continue;
        }
        *merged.entry(ops).or_insert(0.0) += w;
    }
    let mut out: Vec<Orbit> =
        merged.into_iter().filter(|(_, w)| w.abs() >= PRUNE_EPS).map(|(ops, weight)| Orbit { weight, ops }).collect();
    out.sort_by(|a, b| a.ops.cmp(&b.ops));
    Ok((out, constant, dropped))
}

/// Smallest torus extent per axis on which two overlapping translates of
/// unit terms never alias: twice the largest offset span plus one.
pub fn min_torus(h: &SupercellHamiltonian) -> Vec<usize> {
    (0..h.dims.len())
        .map(|a| {
            let span = h
                .terms
                .iter()
                .map(|t| {
                    let lo = t.letters.iter().map(|l| l.offset[a]).min().unwrap_or(0);
                    let hi = t.letters.iter().map(|l| l.offset[a]).max().unwrap_or(0);
                    (hi - lo) as usize
                })
                .max()
                .unwrap_or(0);
            2 * span + 1
        })
        .collect()
}

/// Distinct member-sign patterns over the orbits of one layout, first group
/// of each pattern in depth-first order.
struct Patterns {
    signs: Vec<Vec<i8>>,
    groups: Vec<StabGroup>,
}

/// Pattern tables keyed by orbit operator sets; weights are not part of the key.
#[derive(Default)]
pub struct SupercellCache {
    tables: Mutex<HashMap<Vec<Vec<PauliOp>>, Arc<Patterns>>>,
}

impl SupercellCache {
    pub fn new() -> Arc<SupercellCache> {
        Arc::new(SupercellCache::default())
    }
}

fn patterns(n: usize, orbits: &[Orbit], cache: &SupercellCache) -> Arc<Patterns> {
    let key: Vec<Vec<PauliOp>> = orbits.iter().map(|o| o.ops.clone()).collect();
    if let Some(p) = cache.tables.lock().expect("pattern lock").get(&key) {
        return p.clone();
    }
    let moves: Vec<Vec<PauliOp>> =
        orbits.iter().flat_map(|o| [o.ops.clone(), o.ops.iter().map(|p| p.negated()).collect()]).collect();
    let mut seen: HashSet<Vec<i8>> = HashSet::default();
    let mut table = Patterns { signs: Vec::new(), groups: Vec::new() };
    GroupWalk::new(&moves).run(StabGroup::trivial(n), &mut |g| {
        let s: Vec<i8> = orbits
            .iter()
            .map(|o| match g.member_sign(&o.ops[0]) {
                MemberSign::Plus => 1,
                MemberSign::Minus => -1,
                MemberSign::Absent => 0,
            })
            .collect();
        if seen.insert(s.clone()) {
            table.signs.push(s);
            table.groups.push(g.clone());
        }
        true
    });
    let table = Arc::new(table);
    cache.tables.lock().expect("pattern lock").entry(key).or_insert(table).clone()
}

/// Translation-invariant (`c = 1`) stabilizer ground state on the wrapped torus.
pub fn solve_supercell_c1(h: &SupercellHamiltonian) -> Result<PeriodicResult, PeriodicError> {
    solve_supercell_c1_cached(h, &SupercellCache::new())
}

pub fn solve_supercell_c1_cached(h: &SupercellHamiltonian, cache: &SupercellCache) -> Result<PeriodicResult, PeriodicError> {
    Ok(solve_c1(h, cache)?.0)
}

fn solve_c1(h: &SupercellHamiltonian, cache: &SupercellCache) -> Result<(PeriodicResult, StabGroup), PeriodicError> {
    let (orbs, constant, _) = orbits(h)?;
    if orbs.len() > DEFAULT_MAX_TERMS {
        return Err(PeriodicError::Guard { terms: orbs.len(), max: DEFAULT_MAX_TERMS });
    }
    let n = h.n_qubits();
    let table = patterns(n, &orbs, cache);
    let mut best: Option<(f64, usize)> = None;
    for (i, s) in table.signs.iter().enumerate() {
        let e: f64 = orbs.iter().zip(s).map(|(o, &x)| o.weight * x as f64).sum();
        if best.map_or(true, |(b, _)| e < b) {
            best = Some((e, i));
        }
    }
    let (e, i) = best.expect("the trivial group is always a pattern");
    let mut members: Vec<(PauliOp, Vec<PauliOp>)> = orbs
        .iter()
        .zip(&table.signs[i])
        .filter(|(_, &x)| x != 0)
        .map(|(o, &x)| (o.ops[0].with_sign(x < 0), o.ops.iter().map(|p| p.with_sign(x < 0)).collect()))
        .collect();
    // an orbit generated by the other member orbits is not a generator
    members.sort_by(|a, b| b.0.weight().cmp(&a.0.weight()).then_with(|| b.0.to_text().cmp(&a.0.to_text())));
    let mut j = 0;
    while j < members.len() {
        let mut g = StabGroup::trivial(n);
        for (o, (_, ops)) in members.iter().enumerate() {
            if o != j {
                for p in ops {
                    g.extend_in_place(p).expect("member orbits commute");
                }
            }
        }
        if g.member_sign(&members[j].0) != MemberSign::Absent {
            members.remove(j);
        } else {
            j += 1;
        }
    }
    let mut texts: Vec<String> = members.iter().map(|m| m.0.to_text()).collect();
    texts.sort();
    let result = PeriodicResult {
        e_per_site: (e + constant) / h.sites_per_cell as f64,
        supercell_c: 1,
        generators_in_supercell: members.into_iter().map(|m| m.0).collect(),
        phase_signature: texts.join("; "),
    };
    Ok((result, table.groups[i].clone()))
}

/// The group behind a `c = 1` result (the first one found with its member pattern).
pub fn supercell_group(h: &SupercellHamiltonian, cache: &SupercellCache) -> Result<StabGroup, PeriodicError> {
    Ok(solve_c1(h, cache)?.1)
}

#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub alpha: f64,
    pub beta: f64,
    pub result: PeriodicResult,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub points: Vec<ScanPoint>,
    /// Index of the lowest energy; ties go to the smaller `(alpha, beta)`, then signature.
    pub best: usize,
}

/// Rotation angle for each site of a cell: `beta` on horizontal-bond sites
/// and `alpha` on vertical-bond sites for the two-site toric layout, `alpha`
/// everywhere otherwise.
pub fn cell_angles(h: &SupercellHamiltonian, alpha: f64, beta: f64) -> Vec<f64> {
    if h.sites_per_cell == 2 {
        let mut a = vec![0.0; 2];
        a[TORIC_HORIZONTAL] = beta;
        a[TORIC_VERTICAL] = alpha;
        a
    } else {
        vec![alpha; h.sites_per_cell]
    }
}

pub fn extended_scan(h: &SupercellHamiltonian, grid: &[(f64, f64)]) -> Result<ScanResult, PeriodicError> {
    extended_scan_cached(h, grid, &SupercellCache::new())
}

pub fn extended_scan_cached(
    h: &SupercellHamiltonian,
    grid: &[(f64, f64)],
    cache: &SupercellCache,
) -> Result<ScanResult, PeriodicError> {
    if grid.is_empty() {
        return Err(PeriodicError::EmptyGrid);
    }
    let points = grid
        .par_iter()
        .map(|&(alpha, beta)| {
            let rotated = rotate_y_supercell(h, &cell_angles(h, alpha, beta));
            solve_supercell_c1_cached(&rotated, cache).map(|result| ScanPoint { alpha, beta, result })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let tol = 1e-12;
    let mut best = 0;
    for (i, p) in points.iter().enumerate().skip(1) {
        let b = &points[best];
        let (e, eb) = (p.result.e_per_site, b.result.e_per_site);
        let key = |q: &ScanPoint| (q.alpha, q.beta);
        let better = e < eb - tol
            || ((e - eb).abs() <= tol
                && (key(p) < key(b) || (key(p) == key(b) && p.result.phase_signature < b.result.phase_signature)));
        if better {
            best = i;
        }
    }
    Ok(ScanResult { points, best })
}

/// Diagonal grid `alpha = beta` over `[0, pi/2]`: `pi/4 + j * step` for
/// every `j` keeping the angle inside, plus both end points. Symmetric under
/// `alpha -> pi/2 - alpha` and contains `pi/4`.
pub fn diagonal_grid(step: f64) -> Vec<(f64, f64)> {
    let q = std::f64::consts::FRAC_PI_4;
    let j_max = (q / step).floor() as i64;
    let mut v = vec![(0.0, 0.0)];
    for j in -j_max..=j_max {
        let a = q + j as f64 * step;
        v.push((a, a));
    }
    v.push((2.0 * q, 2.0 * q));
    v
}

/// Energy per site of the rotated polarized product state along `h_x = h_z = h`.
pub fn toric_polarized_energy(h: f64, alpha: f64) -> f64 {
    let (c, s) = (alpha.cos(), alpha.sin());
    -0.5 * (c.powi(4) + s.powi(4)) - h * (c + s)
}

/// Best scan point of the toric model at `h_x = h_z = h` over `grid`.
pub fn toric_scan(h: f64, dims: [usize; 2], grid: &[(f64, f64)], cache: &SupercellCache) -> Result<ScanResult, PeriodicError> {
    extended_scan_cached(&toric_model(h, h, dims), grid, cache)
}

/// Smallest `h` in `[lo, hi]` (to `h_tol`) at which the diagonal scan's best
/// energy drops below the topological branch, i.e. the two branches cross.
pub fn toric_crossing(
    dims: [usize; 2],
    grid: &[(f64, f64)],
    lo: f64,
    hi: f64,
    h_tol: f64,
    cache: &SupercellCache,
) -> Result<f64, PeriodicError> {
    // the topological branch carries no field terms, so its energy is h-independent
    let e_top = solve_supercell_c1_cached(&toric_model(0.0, 0.0, dims), cache)?.e_per_site;
    let below = |h: f64| -> Result<bool, PeriodicError> {
        let r = toric_scan(h, dims, grid, cache)?;
        Ok(r.points[r.best].result.e_per_site < e_top - 1e-12)
    };
    let (mut a, mut b) = (lo, hi);
    while b - a > h_tol {
        let mid = 0.5 * (a + b);
        if below(mid)? {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Second difference of the scanned energy at `alpha = beta = pi/4`.
pub fn toric_curvature(h: f64, dims: [usize; 2], step: f64, cache: &SupercellCache) -> Result<f64, PeriodicError> {
    let q = std::f64::consts::FRAC_PI_4;
    let grid = [(q - step, q - step), (q, q), (q + step, q + step)];
    let r = toric_scan(h, dims, &grid, cache)?;
    let e: Vec<f64> = r.points.iter().map(|p| p.result.e_per_site).collect();
    Ok((e[0] - 2.0 * e[1] + e[2]) / (step * step))
}

/// `h` in `[lo, hi]` (to `h_tol`) where the curvature at `pi/4` changes sign.
pub fn toric_curvature_flip(
    dims: [usize; 2],
    step: f64,
    lo: f64,
    hi: f64,
    h_tol: f64,
    cache: &SupercellCache,
) -> Result<f64, PeriodicError> {
    let s_lo = toric_curvature(lo, dims, step, cache)? > 0.0;
    let (mut a, mut b) = (lo, hi);
    while b - a > h_tol {
        let mid = 0.5 * (a + b);
        if (toric_curvature(mid, dims, step, cache)? > 0.0) == s_lo {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{cluster_model, Hamiltonian, UTerm, ULetter};
    use crate::pauli::parse_sparse;
    use crate::solver_local1d::solve_local1d;

    fn signature_of(l: usize, k: usize, period_units: usize, terms: &[&str]) -> String {
        // a ring of `period_units` blocks, all terms carried by the first one
        let gens: Vec<PlacedTerm> = terms
            .iter()
            .map(|t| {
                let sp = parse_sparse(t).unwrap();
                PlacedTerm { letters: sp.letters.iter().map(|&(q, c)| (q as i64, c)).collect(), negative: sp.negative }
            })
            .collect();
        let c = period_units;
        let blocks: Vec<BlockTransition> = (0..c)
            .map(|i| BlockTransition {
                from: i as u32,
                to: ((i + 1) % c) as u32,
                delta_e: 0.0,
                gens: if i == 0 { gens.clone() } else { Vec::new() },
            })
            .collect();
        let g = UnitGraph {
            states: (0..c as u32).collect(),
            blocks,
            out: (0..c).map(|i| vec![i]).collect(),
            index: (0..c).map(|i| (i as u32, i)).collect(),
        };
        let walk: Vec<usize> = (0..c).collect();
        periodic_result(&g, &walk, l, k, 0.0).phase_signature
    }

    #[test]
    fn cluster_phases() {
        let r = solve_periodic_1d(&cluster_model(0.5, 0.3), 6).unwrap();
        assert_eq!(r.e_per_site, -1.0);
        assert_eq!(r.supercell_c, 1);
        assert_eq!(r.phase_signature, "+X0 Z1 X2");

        let r = solve_periodic_1d(&cluster_model(1.0, 1.0), 6).unwrap();
        assert_eq!(r.e_per_site, -2.0);
        assert_eq!(r.supercell_c, 1);
        assert_eq!(r.phase_signature, "-Y0");

        let r = solve_periodic_1d(&cluster_model(2.0, 0.0), 6).unwrap();
        assert_eq!(r.e_per_site, -2.0);
        assert_eq!(r.supercell_c, 1);
        assert_eq!(r.phase_signature, "+Y0 Y1");
    }

    #[test]
    fn tricritical_degeneracy() {
        let (all, truncated) = solve_periodic_1d_degenerate(&cluster_model(1.0, 0.0), 6, &Local1dCache::new()).unwrap();
        assert!(!truncated);
        let sigs: Vec<&str> = all.iter().map(|r| r.phase_signature.as_str()).collect();
        for r in &all {
            assert_eq!(r.e_per_site, -1.0);
        }
        let a = signature_of(1, 3, 3, &["X2 Z3 X4", "Y2 Y3", "Y3 Y4"]);
        let b = signature_of(1, 3, 3, &["X2 Z3 X4", "X3 Z4 X5", "Y3 Y4"]);
        assert!(sigs.contains(&a.as_str()), "{:?} missing {}", sigs, a);
        assert!(sigs.contains(&b.as_str()), "{:?} missing {}", sigs, b);
        assert!(sigs.contains(&"+X0 Z1 X2"));
        assert!(sigs.contains(&"+Y0 Y1"));
    }

    #[test]
    fn signature_is_translation_invariant() {
        let a = signature_of(1, 3, 3, &["X2 Z3 X4", "Y2 Y3", "Y3 Y4"]);
        let b = signature_of(1, 3, 3, &["X0 Z1 X2", "Y0 Y1", "Y1 Y2"]);
        assert_eq!(a, b);
        // a period-2 description of a period-1 pattern reduces
        assert_eq!(signature_of(1, 2, 2, &["Y0 Y1", "Y1 Y2"]), "+Y0 Y1");
        // products of other generators are dropped
        assert_eq!(signature_of(1, 2, 1, &["-Y0", "Y0 Y1"]), "-Y0");
    }

    #[test]
    fn replicated_generators_close() {
        for (jy, hy) in [(0.5, 0.3), (1.0, 1.0), (2.0, 0.0), (0.2, 1.5)] {
            let h = cluster_model(jy, hy);
            let r = solve_periodic_1d(&h, 6).unwrap();
            let reps = replicate(&r, 1, 12);
            for (i, a) in reps.iter().enumerate() {
                for b in &reps[i + 1..] {
                    assert!(a.commutes(b));
                }
            }
            // the bulk energy density of the replicated group is the periodic one
            let chain = h.to_open_chain(12);
            let g = StabGroup::from_generators(12, reps.iter()).unwrap();
            let e: f64 = chain
                .terms()
                .iter()
                .filter(|t| (3..9).contains(&t.pauli.first_site().unwrap()))
                .map(|t| t.weight * g.member_sign(&t.pauli).as_f64())
                .sum();
            assert!((e / 6.0 - r.e_per_site).abs() < 1e-12, "J_y={} h_y={}", jy, hy);
        }
    }

    #[test]
    fn finite_chain_approaches_periodic() {
        for (jy, hy) in [(0.5, 0.3), (1.5, 0.5), (0.3, 0.2), (2.0, 0.0), (0.8, 0.9)] {
            let h = cluster_model(jy, hy);
            let r = solve_periodic_1d(&h, 6).unwrap();
            let n = 60;
            let fin = solve_local1d(&h.to_open_chain(n));
            // open ends lose at most the two terms that would cross each end per site
            let bound = 2.0 * (1.0 + jy + hy) * 2.0 / n as f64;
            assert!((fin.energy / n as f64 - r.e_per_site).abs() <= bound, "J_y={} h_y={}", jy, hy);
        }
    }

    #[test]
    fn cycle_optimality_small_c() {
        // the best walk of every length is no better per site than the reported optimum
        let h = cluster_model(0.7, 0.6);
        let cache = Local1dCache::new();
        let cs = search(&h, 6, &cache).unwrap();
        let (_, bc, bt) = cs.best;
        let best_mean = bt / bc as f64;
        for &(_, c, tot) in &cs.closed {
            assert!(tot / c as f64 >= best_mean - cs.tol);
        }
    }

    #[test]
    fn no_cycle_error_is_reported() {
        let e = PeriodicError::NoCycleFound { c_max: 2 };
        assert!(e.to_string().contains("raise c_max"));
    }

    #[test]
    fn toric_topological_phase() {
        let r = solve_supercell_c1(&toric_model(0.0, 0.0, [3, 3])).unwrap();
        assert_eq!(r.e_per_site, -1.0);
        assert_eq!(r.generators_in_supercell.len(), 2);
        for p in r.generators_in_supercell.iter() {
            assert_eq!(p.weight(), 4);
        }
    }

    #[test]
    fn toric_polarized_phase() {
        let h = toric_model(3.0, 0.0, [3, 3]);
        let r = solve_supercell_c1(&h).unwrap();
        // X on every site, so the X star is a member too: -(2 * 3 + 1) per two-site cell
        assert_eq!(r.e_per_site, -3.5);
        let texts = r.generators_in_supercell.to_texts();
        assert_eq!(texts.len(), 2);
        assert!(texts.iter().all(|t| t.starts_with("+X") && !t.contains(' ')));
        // the same energy from the plain torus Hamiltonian
        let torus: Hamiltonian = h.to_torus().unwrap();
        let g = supercell_group(&h, &SupercellCache::new()).unwrap();
        let e = crate::solver_general::e_stab(&torus, &g) / h.n_qubits() as f64;
        assert_eq!(e, -3.5);
    }

    #[test]
    fn mixed_four_body_terms_are_filtered() {
        let ul = |letter, dx, dy, site| ULetter { letter, offset: vec![dx, dy], site };
        let mixed = UTerm {
            weight: -1.0,
            letters: vec![
                ul(Letter::X, 0, 0, TORIC_HORIZONTAL),
                ul(Letter::Z, -1, 0, TORIC_HORIZONTAL),
                ul(Letter::X, 0, 0, TORIC_VERTICAL),
                ul(Letter::Z, 0, -1, TORIC_VERTICAL),
            ],
        };
        let h = SupercellHamiltonian { dims: vec![3, 3], sites_per_cell: 2, terms: vec![mixed] };
        let small = SupercellHamiltonian { dims: vec![2, 2], ..h.clone() };
        assert!(matches!(orbits(&small), Err(PeriodicError::TorusTooSmall { .. })));
        let (orbs, _, dropped) = orbits(&h).unwrap();
        assert!(orbs.is_empty());
        assert_eq!(dropped, 1);
    }

    #[test]
    fn polarized_branch_formula() {
        let q = std::f64::consts::FRAC_PI_4;
        let want = -0.25 - std::f64::consts::SQRT_2;
        assert!((toric_polarized_energy(1.0, q) - want).abs() < 1e-12);
        let cache = SupercellCache::new();
        let r = toric_scan(1.0, [3, 3], &[(q, q)], &cache).unwrap();
        assert!((r.points[0].result.e_per_site - want).abs() < 1e-9);
    }

    #[test]
    fn zero_rotation_matches_plain_solve() {
        let h = toric_model(0.2, 2.5, [3, 3]);
        let plain = solve_supercell_c1(&h).unwrap();
        let r = extended_scan(&h, &[(0.0, 0.0)]).unwrap();
        assert_eq!(r.points[0].result, plain);
        assert!(plain.phase_signature.split("; ").filter(|t| !t.contains(' ')).all(|t| t.contains('Z')));
    }

    #[test]
    fn scan_is_symmetric() {
        let cache = SupercellCache::new();
        let grid = diagonal_grid(0.05);
        let r = toric_scan(0.8, [3, 3], &grid, &cache).unwrap();
        let e: Vec<f64> = r.points.iter().map(|p| p.result.e_per_site).collect();
        for i in 0..e.len() {
            assert!((e[i] - e[e.len() - 1 - i]).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_grid_is_an_error() {
        assert_eq!(extended_scan(&toric_model(0.0, 0.0, [3, 3]), &[]).unwrap_err(), PeriodicError::EmptyGrid);
    }
}
