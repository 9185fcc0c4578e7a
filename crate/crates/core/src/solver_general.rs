//! Exact stabilizer ground states of small Pauli Hamiltonians by enumerating
//! every group generated by a commuting, consistent subset of the signed terms.

use std::collections::HashSet;

use thiserror::Error;

use crate::hamiltonian::Hamiltonian;
use crate::pauli::{PauliOp, PauliSet};
use crate::stabgroup::StabGroup;

pub const DEFAULT_MAX_TERMS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("{terms} terms exceed the guard of {max}")]
    Guard { terms: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub energy: f64,
    pub group: StabGroup,
    /// Signed terms that are members of `group`.
    pub chosen_terms: PauliSet,
    pub algorithm: &'static str,
    pub tie_break_note: String,
}

#[derive(Debug, Clone, Copy)]
pub struct GeneralOptions {
    pub max_terms: usize,
    pub bound_pruning: bool,
}

impl Default for GeneralOptions {
    fn default() -> Self {
        GeneralOptions { max_terms: DEFAULT_MAX_TERMS, bound_pruning: false }
    }
}

/// Sum of `w * sign` over terms that are members of `s` up to sign.
pub fn e_stab(h: &Hamiltonian, s: &StabGroup) -> f64 {
    h.terms().iter().map(|t| t.weight * s.member_sign(&t.pauli).as_f64()).sum()
}

/// Non-identity terms with both signs, `+P` before `-P`, in term order.
fn signed_candidates(h: &Hamiltonian) -> Vec<Vec<PauliOp>> {
    h.terms()
        .iter()
        .filter(|t| !t.pauli.is_identity())
        .flat_map(|t| [vec![t.pauli.clone()], vec![t.pauli.negated()]])
        .collect()
}

/// Extend `g` by every operator of a move; `None` if the move is inconsistent
/// with `g` or adds nothing.
pub(crate) fn apply_move(g: &StabGroup, mv: &[PauliOp]) -> Option<StabGroup> {
    if g.contains(&mv[0]) {
        return None;
    }
    let mut e = g.clone();
    for p in mv {
        if !e.commutes_with(p) {
            return None;
        }
        e.extend_in_place(p).ok()?;
    }
    Some(e)
}

/// Depth-first walk over all groups reachable from the trivial group by
/// moves, visiting each distinct group once in preorder.
pub(crate) struct GroupWalk<'a> {
    moves: &'a [Vec<PauliOp>],
    seen: HashSet<StabGroup>,
}

impl<'a> GroupWalk<'a> {
    pub(crate) fn new(moves: &'a [Vec<PauliOp>]) -> Self {
        GroupWalk { moves, seen: HashSet::new() }
    }

    /// `visit` returns whether to descend below the group.
    pub(crate) fn run(&mut self, root: StabGroup, visit: &mut dyn FnMut(&StabGroup) -> bool) {
        if !self.seen.insert(root.clone()) {
            return;
        }
        if !visit(&root) {
            return;
        }
        for i in 0..self.moves.len() {
            if let Some(e) = apply_move(&root, &self.moves[i]) {
                if !self.seen.contains(&e) {
                    self.run(e, visit);
                }
            }
        }
    }
}

/// Every distinct group generated by a commuting, `-I`-free subset of `terms`
/// with both signs. Equivalently, `<Q>` for every closed subset `Q`.
pub fn enumerate_restricted_subsets(terms: &PauliSet, n: usize) -> Result<Vec<StabGroup>, SolveError> {
    let unsigned: PauliSet = terms.iter().filter(|p| !p.is_identity()).map(|p| p.unsigned()).collect();
    if unsigned.len() > DEFAULT_MAX_TERMS {
        return Err(SolveError::Guard { terms: unsigned.len(), max: DEFAULT_MAX_TERMS });
    }
    let moves: Vec<Vec<PauliOp>> = unsigned.iter().flat_map(|p| [vec![p.clone()], vec![p.negated()]]).collect();
    let mut out = Vec::new();
    GroupWalk::new(&moves).run(StabGroup::trivial(n), &mut |g| {
        out.push(g.clone());
        true
    });
    Ok(out)
}

pub const GENERAL_TIE_BREAK: &str = "first minimizer in depth-first order over signed terms (+P before -P, input order)";

pub fn solve_general(h: &Hamiltonian, opts: &GeneralOptions) -> Result<SolveResult, SolveError> {
    let n_terms = h.terms().iter().filter(|t| !t.pauli.is_identity()).count();
    if n_terms > opts.max_terms {
        return Err(SolveError::Guard { terms: n_terms, max: opts.max_terms });
    }
    let moves = signed_candidates(h);
    let mut best: Option<(f64, StabGroup)> = None;
    let mut walk = GroupWalk::new(&moves);
    walk.run(StabGroup::trivial(h.n_sites()), &mut |g| {
        let e = e_stab(h, g);
        if best.as_ref().map_or(true, |(b, _)| e < *b) {
            best = Some((e, g.clone()));
        }
        if opts.bound_pruning {
            let slack: f64 = h
                .terms()
                .iter()
                .filter(|t| !t.pauli.is_identity() && g.commutes_with(&t.pauli) && !g.contains(&t.pauli) && !g.contains(&t.pauli.negated()))
                .map(|t| t.weight.abs())
                .sum();
            let b = best.as_ref().map(|(b, _)| *b).unwrap_or(f64::INFINITY);
            return e - slack <= b;
        }
        true
    });
    let (energy, group) = best.expect("the trivial group is always visited");
    let chosen_terms = group.intersect_with_set(&h.signed_terms());
    Ok(SolveResult {
        energy,
        group,
        chosen_terms,
        algorithm: "general",
        tie_break_note: GENERAL_TIE_BREAK.to_string(),
    })
}
