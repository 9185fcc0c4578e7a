//! Hermitian Pauli operators in symplectic form.
//!
//! An operator on `n` sites is stored as two bit vectors `x`, `z` and a phase
//! exponent `p` (mod 4). The encoded operator is
//!
//! ```text
//! i^p * prod_j ( i^(x_j z_j) X_j^(x_j) Z_j^(z_j) )
//! ```
//!
//! so a site with `x = z = 1` is a plain Hermitian `Y` (since `Y = i X Z`), and
//! for any Hermitian operator the phase is 0 (sign `+`) or 2 (sign `-`).

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use smallvec::SmallVec;
use thiserror::Error;

pub(crate) type Words = SmallVec<[u64; 2]>;

#[inline]
pub(crate) fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PauliError {
    #[error("site count mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("invalid window [{m}, {l}] for {n} sites")]
    InvalidWindow { m: usize, l: usize, n: usize },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("pauli parse error at column {pos}: {msg}")]
pub struct PauliParseError {
    pub pos: usize,
    pub msg: String,
}

/// Single-site letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub fn from_bits(x: bool, z: bool) -> Letter {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    pub fn from_char(c: char) -> Option<Letter> {
        match c {
            'I' => Some(Letter::I),
            'X' => Some(Letter::X),
            'Y' => Some(Letter::Y),
            'Z' => Some(Letter::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliOp {
    n: usize,
    x: Words,
    z: Words,
    phase: u8,
}

impl PauliOp {
    pub fn identity(n: usize) -> PauliOp {
        let w = words_for(n);
        PauliOp {
            n,
            x: SmallVec::from_elem(0, w),
            z: SmallVec::from_elem(0, w),
            phase: 0,
        }
    }

    /// Operator with a single non-identity letter.
    pub fn single(n: usize, site: usize, letter: Letter) -> PauliOp {
        let mut p = PauliOp::identity(n);
        p.set_letter(site, letter);
        p
    }

    /// Build from `(site, letter)` pairs; a site listed twice is an error.
    pub fn from_letters(n: usize, letters: &[(usize, Letter)], negative: bool) -> Option<PauliOp> {
        let mut p = PauliOp::identity(n);
        for &(s, l) in letters {
            if s >= n || p.letter(s) != Letter::I {
                return None;
            }
            p.set_letter(s, l);
        }
        if negative {
            p.phase = 2;
        }
        Some(p)
    }

    /// Dense string such as `"XIZ"`, site 0 first.
    pub fn from_dense(s: &str) -> Option<PauliOp> {
        let (neg, body) = match s.strip_prefix('-') {
            Some(b) => (true, b),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let mut p = PauliOp::identity(body.chars().count());
        for (i, c) in body.chars().enumerate() {
            p.set_letter(i, Letter::from_char(c)?);
        }
        if neg {
            p.phase = 2;
        }
        Some(p)
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.n
    }

    #[inline]
    pub(crate) fn xw(&self) -> &[u64] {
        &self.x
    }

    #[inline]
    pub(crate) fn zw(&self) -> &[u64] {
        &self.z
    }

    #[inline]
    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn is_negative(&self) -> bool {
        self.phase == 2
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase & 1 == 0
    }

    pub fn x_bit(&self, i: usize) -> bool {
        self.x[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn z_bit(&self, i: usize) -> bool {
        self.z[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn letter(&self, i: usize) -> Letter {
        Letter::from_bits(self.x_bit(i), self.z_bit(i))
    }

    pub fn set_letter(&mut self, i: usize, l: Letter) {
        let (x, z) = l.bits();
        let (w, b) = (i / 64, i % 64);
        self.x[w] = (self.x[w] & !(1 << b)) | ((x as u64) << b);
        self.z[w] = (self.z[w] & !(1 << b)) | ((z as u64) << b);
    }

    #[inline]
    pub(crate) fn flip_sign(&mut self) {
        self.phase ^= 2;
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().all(|&w| w == 0) && self.z.iter().all(|&w| w == 0)
    }

    /// Same letters with sign `+`.
    pub fn unsigned(&self) -> PauliOp {
        PauliOp { phase: 0, ..self.clone() }
    }

    pub fn negated(&self) -> PauliOp {
        PauliOp { phase: (self.phase + 2) & 3, ..self.clone() }
    }

    pub fn with_sign(&self, negative: bool) -> PauliOp {
        PauliOp { phase: if negative { 2 } else { 0 }, ..self.clone() }
    }

    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }

    pub fn first_site(&self) -> Option<usize> {
        for (w, (a, b)) in self.x.iter().zip(&self.z).enumerate() {
            let s = a | b;
            if s != 0 {
                return Some(w * 64 + s.trailing_zeros() as usize);
            }
        }
        None
    }

    pub fn last_site(&self) -> Option<usize> {
        for (w, (a, b)) in self.x.iter().zip(&self.z).enumerate().rev() {
            let s = a | b;
            if s != 0 {
                return Some(w * 64 + 63 - s.leading_zeros() as usize);
            }
        }
        None
    }

    /// Non-identity sites in increasing order.
    pub fn support(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (w, (a, b)) in self.x.iter().zip(&self.z).enumerate() {
            let mut s = a | b;
            while s != 0 {
                out.push(w * 64 + s.trailing_zeros() as usize);
                s &= s - 1;
            }
        }
        out
    }

    pub fn letters(&self) -> Vec<(usize, Letter)> {
        self.support().into_iter().map(|i| (i, self.letter(i))).collect()
    }

    /// True iff every non-identity site lies in `[m, l]`.
    pub fn supported_in(&self, m: usize, l: usize) -> bool {
        match (self.first_site(), self.last_site()) {
            (Some(f), Some(t)) => f >= m && t <= l,
            _ => true,
        }
    }

    pub fn try_commutes(&self, other: &PauliOp) -> Result<bool, PauliError> {
        if self.n != other.n {
            return Err(PauliError::SizeMismatch(self.n, other.n));
        }
        Ok(self.commutes(other))
    }

    /// Symplectic inner product test. Panics on size mismatch in debug builds.
    #[inline]
    pub fn commutes(&self, other: &PauliOp) -> bool {
        debug_assert_eq!(self.n, other.n);
        let mut c = 0u32;
        for i in 0..self.x.len() {
            c += ((self.x[i] & other.z[i]) ^ (self.z[i] & other.x[i])).count_ones();
        }
        c & 1 == 0
    }

    pub fn try_multiply(&self, other: &PauliOp) -> Result<PauliOp, PauliError> {
        if self.n != other.n {
            return Err(PauliError::SizeMismatch(self.n, other.n));
        }
        Ok(self.multiply(other))
    }

    /// Exact product `self * other`.
    pub fn multiply(&self, other: &PauliOp) -> PauliOp {
        let mut out = self.clone();
        out.mul_assign_right(other);
        out
    }

    /// `self <- self * other`.
    #[inline]
    pub fn mul_assign_right(&mut self, other: &PauliOp) {
        debug_assert_eq!(self.n, other.n);
        // Per site: i^(x z) X^x Z^z * i^(x' z') X^x' Z^z'
        //         = i^(x z + x' z' + 2 z x' - x'' z'') * (encoded product letter)
        let mut acc: u32 = self.phase as u32 + other.phase as u32;
        for i in 0..self.x.len() {
            let (x1, z1, x2, z2) = (self.x[i], self.z[i], other.x[i], other.z[i]);
            let (x3, z3) = (x1 ^ x2, z1 ^ z2);
            acc += (x1 & z1).count_ones() + (x2 & z2).count_ones() + 2 * (z1 & x2).count_ones();
            acc += 3 * (x3 & z3).count_ones();
            self.x[i] = x3;
            self.z[i] = z3;
        }
        self.phase = (acc & 3) as u8;
    }

    /// Unsigned letter substring on `[m, l]`, reindexed to `l - m + 1` sites.
    pub fn truncate(&self, m: usize, l: usize) -> Result<PauliOp, PauliError> {
        if m > l || l >= self.n {
            return Err(PauliError::InvalidWindow { m, l, n: self.n });
        }
        let mut out = self.window_bits(m, l - m + 1);
        out.phase = 0;
        Ok(out)
    }

    /// Letters on `[start, start + len)` (sites past `n` read as identity), phase kept.
    pub(crate) fn window_bits(&self, start: usize, len: usize) -> PauliOp {
        let mut out = PauliOp::identity(len);
        out.phase = self.phase;
        shift_copy(&self.x, start, &mut out.x, len);
        shift_copy(&self.z, start, &mut out.z, len);
        out
    }

    /// Place this operator into a register of `n` sites starting at `offset`.
    /// Sites pushed past the end are dropped.
    pub fn embed(&self, n: usize, offset: usize) -> PauliOp {
        let mut out = PauliOp::identity(n);
        out.phase = self.phase;
        for (i, l) in self.letters() {
            if i + offset < n {
                out.set_letter(i + offset, l);
            }
        }
        out
    }

    /// Move all letters by `delta` sites (negative = towards 0) within the same
    /// register. Letters leaving `[0, n)` are dropped.
    pub fn shifted(&self, delta: isize) -> PauliOp {
        let mut out = PauliOp::identity(self.n);
        out.phase = self.phase;
        if delta <= 0 {
            let d = (-delta) as usize;
            if d < self.n {
                let len = self.n - d;
                let mut tmp = self.window_bits(d, len);
                tmp.n = self.n;
                tmp.x.resize(words_for(self.n), 0);
                tmp.z.resize(words_for(self.n), 0);
                tmp.phase = self.phase;
                return tmp;
            }
            return out;
        }
        for (i, l) in self.letters() {
            let j = i + delta as usize;
            if j < self.n {
                out.set_letter(j, l);
            }
        }
        out
    }

    /// Canonical text, e.g. `+X0 Z1`; the identity prints as `+I`.
    pub fn to_text(&self) -> String {
        debug_assert!(self.is_hermitian());
        let mut s = String::new();
        s.push(if self.phase == 2 { '-' } else { '+' });
        let ls = self.letters();
        if ls.is_empty() {
            s.push('I');
        }
        for (k, (i, l)) in ls.into_iter().enumerate() {
            if k > 0 {
                s.push(' ');
            }
            s.push(l.as_char());
            s.push_str(&i.to_string());
        }
        s
    }

    /// Dense letters, site 0 first, with a sign prefix.
    pub fn to_dense(&self) -> String {
        let mut s = String::with_capacity(self.n + 1);
        s.push(if self.phase == 2 { '-' } else { '+' });
        for i in 0..self.n {
            s.push(self.letter(i).as_char());
        }
        s
    }
}

fn shift_copy(src: &[u64], start: usize, dst: &mut [u64], len: usize) {
    let (ws, bs) = (start / 64, start % 64);
    for (k, d) in dst.iter_mut().enumerate() {
        let lo = src.get(ws + k).copied().unwrap_or(0);
        let hi = src.get(ws + k + 1).copied().unwrap_or(0);
        *d = if bs == 0 { lo } else { (lo >> bs) | (hi << (64 - bs)) };
    }
    let rem = len % 64;
    if rem != 0 {
        if let Some(last) = dst.last_mut() {
            *last &= (1u64 << rem) - 1;
        }
    }
}

impl fmt::Debug for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ph = ["+", "+i", "-", "-i"][self.phase as usize];
        write!(f, "{}{}", ph, &self.to_dense()[1..])
    }
}

impl fmt::Display for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Sign plus sparse letters as written in text, before an `n` is known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsePauli {
    pub negative: bool,
    pub letters: Vec<(usize, Letter)>,
}

impl SparsePauli {
    pub fn max_index(&self) -> Option<usize> {
        self.letters.iter().map(|&(i, _)| i).max()
    }

    pub fn to_op(&self, n: usize) -> Option<PauliOp> {
        PauliOp::from_letters(n, &self.letters, self.negative)
    }
}

/// Parse `['+'|'-'] LETTER INDEX (' ' LETTER INDEX)*`. Also accepts a lone `I`
/// (optionally signed) for the identity. Columns in errors are 0-based.
pub fn parse_sparse(text: &str) -> Result<SparsePauli, PauliParseError> {
    let err = |pos: usize, msg: &str| PauliParseError { pos, msg: msg.to_string() };
    let bytes = text.as_bytes();
    let mut pos = 0;
    while pos < bytes.len() && bytes[pos] == b' ' {
        pos += 1;
    }
    let mut negative = false;
    if pos < bytes.len() && (bytes[pos] == b'+' || bytes[pos] == b'-') {
        negative = bytes[pos] == b'-';
        pos += 1;
    }
    let rest = text[pos..].trim_end();
    if rest == "I" {
        return Ok(SparsePauli { negative, letters: vec![] });
    }
    let mut letters: Vec<(usize, Letter)> = Vec::new();
    let end = pos + rest.len();
    loop {
        if pos >= end {
            return Err(err(pos, "expected a Pauli letter"));
        }
        let c = bytes[pos] as char;
        let letter = match c {
            'X' => Letter::X,
            'Y' => Letter::Y,
            'Z' => Letter::Z,
            _ => return Err(err(pos, &format!("bad letter '{}'", c))),
        };
        let lpos = pos;
        pos += 1;
        let istart = pos;
        while pos < end && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if istart == pos {
            return Err(err(pos, "expected a site index"));
        }
        let idx: usize = text[istart..pos]
            .parse()
            .map_err(|_| err(istart, "site index out of range"))?;
        if letters.iter().any(|&(i, _)| i == idx) {
            return Err(err(lpos, &format!("duplicate site index {}", idx)));
        }
        letters.push((idx, letter));
        if pos >= end {
            break;
        }
        if bytes[pos] != b' ' {
            return Err(err(pos, "expected a space"));
        }
        while pos < end && bytes[pos] == b' ' {
            pos += 1;
        }
    }
    letters.sort_by_key(|&(i, _)| i);
    Ok(SparsePauli { negative, letters })
}

pub fn parse_pauli(text: &str, n_sites: usize) -> Result<PauliOp, PauliParseError> {
    let sp = parse_sparse(text)?;
    if let Some(mx) = sp.max_index() {
        if mx >= n_sites {
            let pos = text.find(&mx.to_string()).unwrap_or(0);
            return Err(PauliParseError {
                pos,
                msg: format!("site index {} >= qubit count {}", mx, n_sites),
            });
        }
    }
    Ok(sp.to_op(n_sites).expect("validated above"))
}

pub fn format_pauli(p: &PauliOp) -> String {
    p.to_text()
}

/// Insertion-ordered set of signed Pauli operators.
#[derive(Clone, Debug, Default)]
pub struct PauliSet {
    terms: Vec<PauliOp>,
    index: HashMap<PauliOp, usize>,
}

impl PauliSet {
    pub fn new() -> PauliSet {
        PauliSet::default()
    }

    /// Returns false when the exact operator (letters and sign) is already present.
    pub fn insert(&mut self, p: PauliOp) -> bool {
        if self.index.contains_key(&p) {
            return false;
        }
        self.index.insert(p.clone(), self.terms.len());
        self.terms.push(p);
        true
    }

    pub fn contains(&self, p: &PauliOp) -> bool {
        self.index.contains_key(p)
    }

    pub fn position(&self, p: &PauliOp) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PauliOp> {
        self.terms.iter()
    }

    pub fn as_slice(&self) -> &[PauliOp] {
        &self.terms
    }

    pub fn to_texts(&self) -> Vec<String> {
        self.terms.iter().map(|p| p.to_text()).collect()
    }
}

impl FromIterator<PauliOp> for PauliSet {
    fn from_iter<T: IntoIterator<Item = PauliOp>>(iter: T) -> Self {
        let mut s = PauliSet::new();
        for p in iter {
            s.insert(p);
        }
        s
    }
}

impl<'a> IntoIterator for &'a PauliSet {
    type Item = &'a PauliOp;
    type IntoIter = std::slice::Iter<'a, PauliOp>;
    fn into_iter(self) -> Self::IntoIter {
        self.terms.iter()
    }
}

impl PartialEq for PauliSet {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}
