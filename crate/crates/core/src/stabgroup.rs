//! Stabilizer groups in canonical signed reduced row-echelon form.
//!
//! Columns are ordered `x_0 .. x_{n-1}, z_0 .. z_{n-1}`. Every generator has a
//! distinct pivot (its first set column), no other generator has a bit in that
//! column, and generators are sorted by pivot. The reduced echelon form of a
//! GF(2) row space is unique and the signs are fixed by the group, so two
//! values compare equal exactly when they generate the same signed group.

use std::fmt;

use thiserror::Error;

use crate::clifford::{conjugate, CircuitDescription, Gate};
use crate::pauli::{Letter, PauliOp, PauliSet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StabError {
    #[error("generators do not commute")]
    AnticommutingGenerators,
    #[error("generators multiply to -I")]
    MinusIdentity,
    #[error("site count mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("group has rank {rank} but {n} sites")]
    NotFullRank { rank: usize, n: usize },
    #[error("rank {0} exceeds the enumeration guard")]
    RankGuard(usize),
    #[error("operator is not Hermitian")]
    NonHermitian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MemberSign {
    Plus,
    Minus,
    Absent,
}

impl MemberSign {
    pub fn as_f64(self) -> f64 {
        match self {
            MemberSign::Plus => 1.0,
            MemberSign::Minus => -1.0,
            MemberSign::Absent => 0.0,
        }
    }
}

pub const ENUMERATION_RANK_GUARD: usize = 20;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StabGroup {
    n: usize,
    gens: Vec<PauliOp>,
}

/// First set column in `x`-then-`z` order.
#[inline]
fn pivot_of(p: &PauliOp) -> Option<usize> {
    let n = p.n_sites();
    for (w, &v) in p.xw().iter().enumerate() {
        if v != 0 {
            return Some(w * 64 + v.trailing_zeros() as usize);
        }
    }
    for (w, &v) in p.zw().iter().enumerate() {
        if v != 0 {
            return Some(n + w * 64 + v.trailing_zeros() as usize);
        }
    }
    None
}

#[inline]
fn has_col(p: &PauliOp, col: usize) -> bool {
    let n = p.n_sites();
    if col < n {
        p.x_bit(col)
    } else {
        p.z_bit(col - n)
    }
}

impl StabGroup {
    pub fn trivial(n: usize) -> StabGroup {
        StabGroup { n, gens: Vec::new() }
    }

    /// Sign-aware elimination of an arbitrary generator list.
    pub fn from_generators<'a, I>(n: usize, gens: I) -> Result<StabGroup, StabError>
    where
        I: IntoIterator<Item = &'a PauliOp>,
    {
        let list: Vec<&PauliOp> = gens.into_iter().collect();
        for (i, a) in list.iter().enumerate() {
            if a.n_sites() != n {
                return Err(StabError::SizeMismatch(a.n_sites(), n));
            }
            if !a.is_hermitian() {
                return Err(StabError::NonHermitian);
            }
            for b in &list[..i] {
                if !a.commutes(b) {
                    return Err(StabError::AnticommutingGenerators);
                }
            }
        }
        let mut g = StabGroup::trivial(n);
        for p in list {
            g.insert_unchecked(p.clone())?;
        }
        Ok(g)
    }

    pub fn from_set(n: usize, set: &PauliSet) -> Result<StabGroup, StabError> {
        StabGroup::from_generators(n, set.iter())
    }

    /// Wrap generators that are already in canonical form.
    pub(crate) fn from_canonical_unchecked(n: usize, gens: Vec<PauliOp>) -> StabGroup {
        StabGroup { n, gens }
    }

    /// Same generators with signs set from the bits of `signs` (bit `i` negates generator `i`).
    pub fn with_generator_signs(&self, signs: u32) -> StabGroup {
        let gens = self.gens.iter().enumerate().map(|(i, g)| g.with_sign(signs >> i & 1 == 1)).collect();
        StabGroup::from_canonical_unchecked(self.n, gens)
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.gens.len()
    }

    pub fn generators(&self) -> &[PauliOp] {
        &self.gens
    }

    pub fn is_trivial(&self) -> bool {
        self.gens.is_empty()
    }

    /// Reduce `p` against the generators: returns the residual operator.
    #[inline]
    fn reduce(&self, p: &mut PauliOp) {
        let n = self.n;
        for g in &self.gens {
            let col = pivot_of(g).expect("generators are non-identity");
            let hit = if col < n { p.x_bit(col) } else { p.z_bit(col - n) };
            if hit {
                p.mul_assign_right(g);
            }
        }
    }

    /// Add `p`, assuming it commutes with every generator. Returns whether the rank grew.
    pub(crate) fn insert_unchecked(&mut self, mut p: PauliOp) -> Result<bool, StabError> {
        self.reduce(&mut p);
        if p.is_identity() {
            return match p.phase() {
                0 => Ok(false),
                2 => Err(StabError::MinusIdentity),
                _ => Err(StabError::AnticommutingGenerators),
            };
        }
        let col = pivot_of(&p).expect("non-identity");
        for g in self.gens.iter_mut() {
            if has_col(g, col) {
                g.mul_assign_right(&p);
            }
        }
        let pos = self
            .gens
            .iter()
            .position(|g| pivot_of(g).expect("non-identity") > col)
            .unwrap_or(self.gens.len());
        self.gens.insert(pos, p);
        Ok(true)
    }

    pub fn member_sign(&self, p: &PauliOp) -> MemberSign {
        debug_assert_eq!(p.n_sites(), self.n);
        let mut r = p.clone();
        self.reduce(&mut r);
        if !r.is_identity() {
            return MemberSign::Absent;
        }
        match r.phase() {
            0 => MemberSign::Plus,
            2 => MemberSign::Minus,
            _ => MemberSign::Absent,
        }
    }

    pub fn try_member_sign(&self, p: &PauliOp) -> Result<MemberSign, StabError> {
        if p.n_sites() != self.n {
            return Err(StabError::SizeMismatch(p.n_sites(), self.n));
        }
        Ok(self.member_sign(p))
    }

    pub fn contains(&self, p: &PauliOp) -> bool {
        self.member_sign(p) == MemberSign::Plus
    }

    pub fn commutes_with(&self, p: &PauliOp) -> bool {
        self.gens.iter().all(|g| g.commutes(p))
    }

    /// Canonical `<self, p>`.
    pub fn extend(&self, p: &PauliOp) -> Result<StabGroup, StabError> {
        if p.n_sites() != self.n {
            return Err(StabError::SizeMismatch(p.n_sites(), self.n));
        }
        if !p.is_hermitian() {
            return Err(StabError::NonHermitian);
        }
        if !self.commutes_with(p) {
            return Err(StabError::AnticommutingGenerators);
        }
        let mut g = self.clone();
        g.insert_unchecked(p.clone())?;
        Ok(g)
    }

    /// In-place variant of [`extend`](Self::extend).
    pub fn extend_in_place(&mut self, p: &PauliOp) -> Result<bool, StabError> {
        if !self.commutes_with(p) {
            return Err(StabError::AnticommutingGenerators);
        }
        let backup = self.gens.clone();
        match self.insert_unchecked(p.clone()) {
            Ok(b) => Ok(b),
            Err(e) => {
                self.gens = backup;
                Err(e)
            }
        }
    }

    /// `<self, other>` on the same register.
    pub fn join(&self, other: &StabGroup) -> Result<StabGroup, StabError> {
        if other.n != self.n {
            return Err(StabError::SizeMismatch(other.n, self.n));
        }
        let (big, small) = if self.rank() >= other.rank() { (self, other) } else { (other, self) };
        let mut g = big.clone();
        for p in &small.gens {
            if !g.commutes_with(p) {
                return Err(StabError::AnticommutingGenerators);
            }
            g.insert_unchecked(p.clone())?;
        }
        Ok(g)
    }

    /// Subgroup of elements supported inside `[m, l]`, reindexed to `l - m + 1` sites.
    pub fn project_window(&self, m: usize, l: usize) -> StabGroup {
        assert!(m <= l && l < self.n, "invalid window");
        let inside = |p: &PauliOp| p.supported_in(m, l);
        let mut rows: Vec<PauliOp> = self.gens.clone();
        let mut kernel: Vec<PauliOp> = Vec::with_capacity(rows.len());
        // Repeatedly pick a row with outside support and clear that column from the rest.
        loop {
            let mut pick = None;
            let mut rest: Vec<PauliOp> = Vec::with_capacity(rows.len());
            for r in rows.drain(..) {
                if inside(&r) {
                    kernel.push(r);
                } else if pick.is_none() {
                    pick = Some(r);
                } else {
                    rest.push(r);
                }
            }
            let Some(pv) = pick else { break };
            let col = outside_col(&pv, m, l);
            for r in rest.iter_mut() {
                if has_col(r, col) {
                    r.mul_assign_right(&pv);
                }
            }
            rows = rest;
        }
        let w = l - m + 1;
        let mut out = StabGroup::trivial(w);
        for r in kernel {
            out.insert_unchecked(r.window_bits(m, w)).expect("subgroup of a valid group");
        }
        out
    }

    /// Same group placed in a register of `n_new` sites shifted by `offset`.
    /// The column order is preserved, so no re-elimination is needed.
    pub fn embed(&self, n_new: usize, offset: usize) -> StabGroup {
        let gens = self.gens.iter().map(|g| g.embed(n_new, offset)).collect();
        StabGroup { n: n_new, gens }
    }

    /// Shift every generator by `delta` sites within the same register; all
    /// generators must stay inside.
    pub fn shifted(&self, delta: isize) -> StabGroup {
        let gens = self.gens.iter().map(|g| {
            let s = g.shifted(delta);
            debug_assert_eq!(s.weight(), g.weight());
            s
        });
        StabGroup { n: self.n, gens: gens.collect() }
    }

    /// Subset of `candidates` that are members with matching sign.
    pub fn intersect_with_set(&self, candidates: &PauliSet) -> PauliSet {
        candidates.iter().filter(|p| self.contains(p)).cloned().collect()
    }

    pub fn enumerate_elements(&self) -> Result<PauliSet, StabError> {
        let r = self.rank();
        if r > ENUMERATION_RANK_GUARD {
            return Err(StabError::RankGuard(r));
        }
        let mut out = PauliSet::new();
        for mask in 0u64..(1u64 << r) {
            let mut p = PauliOp::identity(self.n);
            for (i, g) in self.gens.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    p.mul_assign_right(g);
                }
            }
            out.insert(p);
        }
        Ok(out)
    }

    pub fn to_texts(&self) -> Vec<String> {
        self.gens.iter().map(|g| g.to_text()).collect()
    }

    /// Byte-stable serialization; equal strings mean equal groups.
    pub fn serialize(&self) -> String {
        let mut s = format!("n={};", self.n);
        for g in &self.gens {
            s.push_str(&g.to_dense());
            s.push(';');
        }
        s
    }

    /// Full-rank supergroup and the generators added to reach it. Each step
    /// adds the first commutant basis vector outside the group, with unknowns
    /// ordered `z_0..z_{n-1}, x_0..x_{n-1}` so Z-type completions come first.
    pub fn completed(&self) -> (StabGroup, Vec<PauliOp>) {
        let n = self.n;
        let mut g = self.clone();
        let mut added = Vec::new();
        while g.rank() < n {
            // rows: <gen, v> = sum gx_i vz_i + gz_i vx_i over unknowns (vz, vx)
            let mut rows: Vec<Vec<bool>> = g
                .gens
                .iter()
                .map(|p| (0..n).map(|i| p.x_bit(i)).chain((0..n).map(|i| p.z_bit(i))).collect())
                .collect();
            let mut pivots = Vec::new();
            let mut r = 0;
            for col in 0..2 * n {
                let Some(pr) = (r..rows.len()).find(|&i| rows[i][col]) else { continue };
                rows.swap(r, pr);
                for i in 0..rows.len() {
                    if i != r && rows[i][col] {
                        let pivot = rows[r].clone();
                        for (a, b) in rows[i].iter_mut().zip(&pivot) {
                            *a ^= *b;
                        }
                    }
                }
                pivots.push(col);
                r += 1;
            }
            let mut next = None;
            for free in (0..2 * n).filter(|c| !pivots.contains(c)) {
                let mut v = vec![false; 2 * n];
                v[free] = true;
                for (row, &pc) in pivots.iter().enumerate() {
                    v[pc] = rows[row][free];
                }
                let letters: Vec<(usize, Letter)> = (0..n)
                    .filter(|&i| v[i] || v[n + i])
                    .map(|i| (i, Letter::from_bits(v[n + i], v[i])))
                    .collect();
                let p = PauliOp::from_letters(n, &letters, false).expect("sites in range");
                if g.member_sign(&p) == MemberSign::Absent {
                    next = Some(p);
                    break;
                }
            }
            let p = next.expect("a non-full group has a commuting element outside it");
            g.extend_in_place(&p).expect("commutant element");
            added.push(p);
        }
        (g, added)
    }

    /// A gate sequence from `{H, S, CNOT, X, Z}` preparing the stabilized state from `|0...0>`.
    pub fn to_clifford_circuit(&self) -> Result<CircuitDescription, StabError> {
        let n = self.n;
        if self.rank() != n {
            return Err(StabError::NotFullRank { rank: self.rank(), n });
        }
        // Find V with V S V^dagger = <Z_0, ..., Z_{n-1}>, then emit V^dagger.
        let mut rows: Vec<PauliOp> = self.gens.clone();
        let mut v: Vec<Gate> = Vec::new();
        let apply = |rows: &mut Vec<PauliOp>, v: &mut Vec<Gate>, g: Gate| {
            for r in rows.iter_mut() {
                conjugate(r, &g);
            }
            v.push(g);
        };
        for q in 0..n {
            // Any remaining row is supported on sites >= q; pick the one with the smallest weight.
            let (ri, _) = rows[q..]
                .iter()
                .enumerate()
                .min_by_key(|(_, r)| r.weight())
                .expect("full rank leaves a row per site");
            rows.swap(q, q + ri);
            for (s, l) in rows[q].letters() {
                match l {
                    Letter::X => apply(&mut rows, &mut v, Gate::H(s)),
                    Letter::Y => {
                        apply(&mut rows, &mut v, Gate::S(s));
                        apply(&mut rows, &mut v, Gate::H(s));
                    }
                    _ => {}
                }
            }
            let sup = rows[q].support();
            let p = if sup.contains(&q) { q } else { sup[0] };
            for &s in &sup {
                if s != p {
                    apply(&mut rows, &mut v, Gate::Cnot(s, p));
                }
            }
            if p != q {
                apply(&mut rows, &mut v, Gate::Cnot(p, q));
                apply(&mut rows, &mut v, Gate::Cnot(q, p));
                apply(&mut rows, &mut v, Gate::Cnot(p, q));
            }
            if rows[q].is_negative() {
                apply(&mut rows, &mut v, Gate::X(q));
            }
            let pivot = rows[q].clone();
            for r in rows[q + 1..].iter_mut() {
                if r.z_bit(q) {
                    r.mul_assign_right(&pivot);
                }
            }
        }
        let mut gates = Vec::with_capacity(v.len() + 4);
        for g in v.into_iter().rev() {
            match g {
                // S^dagger = S Z (Z applied first)
                Gate::S(q) => {
                    gates.push(Gate::Z(q));
                    gates.push(Gate::S(q));
                }
                other => gates.push(other),
            }
        }
        let circ = CircuitDescription { n, gates };
        let check = StabGroup::from_generators(n, circ.output_stabilizers().iter())?;
        assert_eq!(&check, self, "circuit synthesis failed the conjugation check");
        Ok(circ)
    }
}

fn outside_col(p: &PauliOp, m: usize, l: usize) -> usize {
    let n = p.n_sites();
    for i in 0..n {
        if (i < m || i > l) && p.x_bit(i) {
            return i;
        }
    }
    for i in 0..n {
        if (i < m || i > l) && p.z_bit(i) {
            return n + i;
        }
    }
    unreachable!("row has outside support")
}

impl fmt::Debug for StabGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.to_texts().join(", "))
    }
}
