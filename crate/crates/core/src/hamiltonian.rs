//! Weighted Pauli-sum Hamiltonians: finite chains, 1D periodic cells and
//! wrapped supercells, plus their text formats and model generators.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

use crate::pauli::{parse_sparse, Letter, PauliOp, SparsePauli};
use crate::rng::Rng;

pub const MERGE_EPS: f64 = 1e-12;
pub const PRUNE_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("term acts on {got} sites, Hamiltonian has {want}")]
    SizeMismatch { got: usize, want: usize },
    #[error("term is not Hermitian")]
    NonHermitian,
    #[error("wrapped term {0} collapses onto itself with a non-Hermitian product")]
    BadWrap(usize),
}

fn perr(line: usize, msg: impl Into<String>) -> HamError {
    HamError::Parse { line, msg: msg.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub weight: f64,
    pub pauli: PauliOp,
}

/// Merge by letters, fold signs into weights, drop near-zero weights.
fn merge_terms<I: IntoIterator<Item = (f64, PauliOp)>>(terms: I) -> Result<Vec<Term>, HamError> {
    let mut out: Vec<Term> = Vec::new();
    let mut index: HashMap<PauliOp, usize> = HashMap::new();
    for (w, p) in terms {
        if !p.is_hermitian() {
            return Err(HamError::NonHermitian);
        }
        let w = if p.is_negative() { -w } else { w };
        let key = p.unsigned();
        match index.get(&key) {
            Some(&i) => out[i].weight += w,
            None => {
                index.insert(key.clone(), out.len());
                out.push(Term { weight: w, pauli: key });
            }
        }
    }
    out.retain(|t| t.weight.abs() >= MERGE_EPS);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    n_sites: usize,
    terms: Vec<Term>,
    k: usize,
    by_last_site: Vec<Vec<usize>>,
}

impl Hamiltonian {
    pub fn new<I: IntoIterator<Item = (f64, PauliOp)>>(n_sites: usize, terms: I) -> Result<Hamiltonian, HamError> {
        let mut list = Vec::new();
        for (w, p) in terms {
            if p.n_sites() != n_sites {
                return Err(HamError::SizeMismatch { got: p.n_sites(), want: n_sites });
            }
            list.push((w, p));
        }
        let terms = merge_terms(list)?;
        let mut by_last_site = vec![Vec::new(); n_sites];
        let mut k = 0;
        for (i, t) in terms.iter().enumerate() {
            if let (Some(f), Some(l)) = (t.pauli.first_site(), t.pauli.last_site()) {
                k = k.max(l - f + 1);
                by_last_site[l].push(i);
            }
        }
        Ok(Hamiltonian { n_sites, terms, k, by_last_site })
    }

    pub fn empty(n_sites: usize) -> Hamiltonian {
        Hamiltonian::new(n_sites, std::iter::empty()).expect("empty is valid")
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Locality: max over terms of `last - first + 1` (0 for no terms).
    pub fn k(&self) -> usize {
        self.k
    }

    /// Term ids grouped by last non-identity site. Identity terms are not listed.
    pub fn by_last_site(&self) -> &[Vec<usize>] {
        &self.by_last_site
    }

    /// Sum of weights of identity terms.
    pub fn constant(&self) -> f64 {
        self.terms.iter().filter(|t| t.pauli.is_identity()).map(|t| t.weight).sum()
    }

    pub fn abs_weight_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.weight.abs()).sum()
    }

    /// Both signs of every term, `+P` first, in term order.
    pub fn signed_terms(&self) -> crate::pauli::PauliSet {
        let mut s = crate::pauli::PauliSet::new();
        for t in &self.terms {
            s.insert(t.pauli.clone());
            s.insert(t.pauli.negated());
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("qubits {}\n", self.n_sites);
        for t in &self.terms {
            let _ = writeln!(s, "term {} {}", t.weight, t.pauli.to_text());
        }
        s
    }
}

/// Terms of one translation unit of an infinite chain. Each operator is given
/// relative to the unit origin with its first site in `[0, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicHamiltonian1D {
    l: usize,
    width: usize,
    terms: Vec<Term>,
}

impl PeriodicHamiltonian1D {
    /// `terms` are sparse operators with non-negative indices relative to a unit origin.
    pub fn new(l: usize, terms: Vec<(f64, SparsePauli)>) -> Result<PeriodicHamiltonian1D, HamError> {
        assert!(l >= 1, "period must be positive");
        let mut shifted: Vec<(f64, SparsePauli)> = Vec::new();
        let mut width = 1;
        for (w, sp) in terms {
            if sp.letters.is_empty() {
                continue;
            }
            let first = sp.letters.iter().map(|&(i, _)| i).min().expect("non-empty");
            let d = (first / l) * l;
            let letters: Vec<(usize, Letter)> = sp.letters.iter().map(|&(i, c)| (i - d, c)).collect();
            width = width.max(letters.iter().map(|&(i, _)| i + 1).max().expect("non-empty"));
            shifted.push((w, SparsePauli { negative: sp.negative, letters }));
        }
        let ops = shifted
            .into_iter()
            .map(|(w, sp)| (w, sp.to_op(width).expect("indices checked")));
        let terms = merge_terms(ops)?;
        Ok(PeriodicHamiltonian1D { l, width, terms })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// Register width holding every unit term.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn k(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.pauli.last_site().unwrap() - t.pauli.first_site().unwrap() + 1)
            .max()
            .unwrap_or(1)
    }

    /// Finite open chain of `units` copies; terms running past the end are dropped.
    pub fn to_open_chain(&self, units: usize) -> Hamiltonian {
        let n = units * self.l;
        let mut list = Vec::new();
        for u in 0..units {
            for t in &self.terms {
                let last = t.pauli.last_site().unwrap() + u * self.l;
                if last < n {
                    list.push((t.weight, t.pauli.embed(n, u * self.l)));
                }
            }
        }
        Hamiltonian::new(n, list).expect("valid terms")
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("period {}\n", self.l);
        for t in &self.terms {
            let _ = writeln!(s, "term {} {}", t.weight, t.pauli.to_text());
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ULetter {
    pub letter: Letter,
    pub offset: Vec<i64>,
    pub site: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UTerm {
    pub weight: f64,
    pub letters: Vec<ULetter>,
}

/// Unit-cell terms on a `dims` torus with `sites_per_cell` qubits per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SupercellHamiltonian {
    pub dims: Vec<usize>,
    pub sites_per_cell: usize,
    pub terms: Vec<UTerm>,
}

impl SupercellHamiltonian {
    pub fn n_cells(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_cells() * self.sites_per_cell
    }

    /// Qubit index of site `s` in the cell at `coords` (wrapped).
    pub fn qubit(&self, coords: &[i64], s: usize) -> usize {
        let mut cell = 0usize;
        for d in (0..self.dims.len()).rev() {
            let dim = self.dims[d] as i64;
            let c = coords.get(d).copied().unwrap_or(0).rem_euclid(dim) as usize;
            cell = cell * self.dims[d] + c;
        }
        cell * self.sites_per_cell + s
    }

    /// Coordinates of every cell, in qubit order.
    pub fn cells(&self) -> Vec<Vec<i64>> {
        let mut out = vec![vec![]];
        for &d in self.dims.iter() {
            let mut next = Vec::new();
            for c in 0..d as i64 {
                for prev in &out {
                    let mut v = prev.clone();
                    v.push(c);
                    next.push(v);
                }
            }
            out = next;
        }
        // order so that the first dimension varies fastest
        out.sort_by(|a, b| a.iter().rev().cmp(b.iter().rev()));
        out
    }

    /// The term anchored at `origin`, as an operator on the torus.
    pub fn wrap_term(&self, idx: usize, origin: &[i64]) -> Result<(f64, PauliOp), HamError> {
        let t = &self.terms[idx];
        let n = self.n_qubits();
        let mut p = PauliOp::identity(n);
        for ul in &t.letters {
            let coords: Vec<i64> = (0..self.dims.len())
                .map(|d| origin.get(d).copied().unwrap_or(0) + ul.offset.get(d).copied().unwrap_or(0))
                .collect();
            let q = self.qubit(&coords, ul.site);
            p.mul_assign_right(&PauliOp::single(n, q, ul.letter));
        }
        if !p.is_hermitian() {
            return Err(HamError::BadWrap(idx));
        }
        Ok((t.weight, p))
    }

    /// Full torus Hamiltonian (every term at every cell).
    pub fn to_torus(&self) -> Result<Hamiltonian, HamError> {
        let mut list = Vec::new();
        for c in self.cells() {
            for i in 0..self.terms.len() {
                list.push(self.wrap_term(i, &c)?);
            }
        }
        Hamiltonian::new(self.n_qubits(), list)
    }

    pub fn to_text(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        let mut s = format!("supercell {} sites_per_cell {}\n", dims.join(" "), self.sites_per_cell);
        for t in &self.terms {
            let _ = write!(s, "uterm {}", t.weight);
            for ul in &t.letters {
                let off: Vec<String> = ul.offset.iter().map(|o| o.to_string()).collect();
                let _ = write!(s, " {}@({},{})", ul.letter.as_char(), off.join(","), ul.site);
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianFile {
    Finite(Hamiltonian),
    Periodic(PeriodicHamiltonian1D),
    Supercell(SupercellHamiltonian),
}

fn parse_weight(tok: &str, line: usize) -> Result<f64, HamError> {
    let w: f64 = tok.parse().map_err(|_| perr(line, format!("bad weight '{}'", tok)))?;
    if !w.is_finite() {
        return Err(perr(line, "weight is not finite"));
    }
    Ok(w)
}

/// Split `term <w> <pauli>` into the weight and the Pauli text with its column.
fn split_term(body: &str, line: usize) -> Result<(f64, &str), HamError> {
    let body = body.trim_start();
    let end = body.find(' ').ok_or_else(|| perr(line, "expected '<weight> <pauli>'"))?;
    Ok((parse_weight(&body[..end], line)?, body[end..].trim()))
}

fn parse_uletter(tok: &str, ndim: usize, line: usize) -> Result<ULetter, HamError> {
    let bad = || perr(line, format!("bad unit letter '{}'", tok));
    let (l, rest) = tok.split_once('@').ok_or_else(bad)?;
    let letter = match l {
        "X" => Letter::X,
        "Y" => Letter::Y,
        "Z" => Letter::Z,
        _ => return Err(bad()),
    };
    let inner = rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
    let parts: Vec<&str> = inner.split(',').collect();
    if parts.len() != ndim + 1 {
        return Err(perr(line, format!("'{}' needs {} offsets and a site", tok, ndim)));
    }
    let mut offset = Vec::with_capacity(ndim);
    for p in &parts[..ndim] {
        offset.push(p.trim().parse::<i64>().map_err(|_| bad())?);
    }
    let site = parts[ndim].trim().parse::<usize>().map_err(|_| bad())?;
    Ok(ULetter { letter, offset, site })
}

/// Parse any of the three text formats.
pub fn load_text(text: &str) -> Result<HamiltonianFile, HamError> {
    enum Head {
        Finite(usize),
        Periodic(usize),
        Supercell(Vec<usize>, usize),
    }
    let mut head: Option<Head> = None;
    let mut finite: Vec<(f64, PauliOp)> = Vec::new();
    let mut periodic: Vec<(f64, SparsePauli)> = Vec::new();
    let mut uterms: Vec<UTerm> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (kw, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
        match (kw, &head) {
            ("qubits", None) => {
                let n = rest.trim().parse().map_err(|_| perr(line, "bad qubit count"))?;
                head = Some(Head::Finite(n));
            }
            ("period", None) => {
                let l: usize = rest.trim().parse().map_err(|_| perr(line, "bad period"))?;
                if l == 0 {
                    return Err(perr(line, "period must be positive"));
                }
                head = Some(Head::Periodic(l));
            }
            ("supercell", None) => {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                let sp = toks
                    .iter()
                    .position(|t| *t == "sites_per_cell")
                    .ok_or_else(|| perr(line, "expected 'sites_per_cell'"))?;
                let dims: Result<Vec<usize>, _> = toks[..sp].iter().map(|t| t.parse::<usize>()).collect();
                let dims = dims.map_err(|_| perr(line, "bad supercell dimensions"))?;
                if dims.is_empty() || dims.len() > 2 || dims.contains(&0) {
                    return Err(perr(line, "supercell needs one or two positive dimensions"));
                }
                let s: usize = toks
                    .get(sp + 1)
                    .and_then(|t| t.parse().ok())
                    .filter(|&s| s > 0)
                    .ok_or_else(|| perr(line, "bad sites_per_cell"))?;
                head = Some(Head::Supercell(dims, s));
            }
            ("qubits" | "period" | "supercell", Some(_)) => return Err(perr(line, "duplicate header")),
            (_, None) => return Err(perr(line, "missing header (qubits, period or supercell)")),
            ("term", Some(Head::Finite(n))) => {
                let (w, ptxt) = split_term(rest, line)?;
                let sp = parse_sparse(ptxt).map_err(|e| perr(line, e.to_string()))?;
                if let Some(mx) = sp.max_index() {
                    if mx >= *n {
                        return Err(perr(line, format!("site {} >= qubit count {}", mx, n)));
                    }
                }
                finite.push((w, sp.to_op(*n).expect("checked")));
            }
            ("term", Some(Head::Periodic(_))) => {
                let (w, ptxt) = split_term(rest, line)?;
                let sp = parse_sparse(ptxt).map_err(|e| perr(line, e.to_string()))?;
                periodic.push((w, sp));
            }
            ("uterm", Some(Head::Supercell(dims, s))) => {
                let mut toks = rest.split_whitespace();
                let w = parse_weight(toks.next().ok_or_else(|| perr(line, "missing weight"))?, line)?;
                let mut letters = Vec::new();
                for tok in toks {
                    let ul = parse_uletter(tok, dims.len(), line)?;
                    if ul.site >= *s {
                        return Err(perr(line, format!("site {} >= sites_per_cell {}", ul.site, s)));
                    }
                    letters.push(ul);
                }
                if letters.is_empty() {
                    return Err(perr(line, "uterm needs at least one letter"));
                }
                uterms.push(UTerm { weight: w, letters });
            }
            (other, Some(_)) => return Err(perr(line, format!("unexpected keyword '{}'", other))),
        }
    }
    match head {
        None => Err(perr(0, "empty input")),
        Some(Head::Finite(n)) => Ok(HamiltonianFile::Finite(Hamiltonian::new(n, finite)?)),
        Some(Head::Periodic(l)) => Ok(HamiltonianFile::Periodic(PeriodicHamiltonian1D::new(l, periodic)?)),
        Some(Head::Supercell(dims, s)) => {
            let h = SupercellHamiltonian { dims, sites_per_cell: s, terms: uterms };
            for i in 0..h.terms.len() {
                h.wrap_term(i, &[])?;
            }
            Ok(HamiltonianFile::Supercell(h))
        }
    }
}

pub fn load_path(path: &std::path::Path) -> Result<HamiltonianFile, HamError> {
    let text = std::fs::read_to_string(path).map_err(|e| perr(0, format!("{}: {}", path.display(), e)))?;
    load_text(&text)
}

/// Random k-nearest Heisenberg chain. Couplings `J ~ N(0, 1)` multiply spin
/// operators `S = sigma / 2`, so each stored weight is `J / 4`.
pub fn gen_stochastic_heisenberg(n: usize, k: usize, seed: u64, with_zz: bool) -> Hamiltonian {
    assert!(n >= k && k >= 2, "need n >= k >= 2");
    let mut rng = Rng::new(seed);
    let mut list = Vec::new();
    let letters: &[Letter] = if with_zz { &[Letter::X, Letter::Y, Letter::Z] } else { &[Letter::X, Letter::Y] };
    for i in 0..n {
        for j in (i + 1)..=(i + k - 1).min(n - 1) {
            for &l in letters {
                let w = rng.normal() / 4.0;
                let p = PauliOp::from_letters(n, &[(i, l), (j, l)], false).expect("distinct sites");
                list.push((w, p));
            }
        }
    }
    Hamiltonian::new(n, list).expect("valid terms")
}

/// Random k-local Hamiltonian: `n_terms` draws of a span in `1..=k`, a start
/// site, non-identity end letters and uniform interior letters, with `N(0, 1)`
/// weights. Repeated draws merge.
pub fn gen_random_local(n: usize, k: usize, n_terms: usize, seed: u64) -> Hamiltonian {
    assert!(n >= 1 && k >= 1);
    let mut rng = Rng::new(seed);
    let pick = |rng: &mut Rng, with_i: bool| -> Letter {
        let all = [Letter::X, Letter::Y, Letter::Z, Letter::I];
        all[rng.below(if with_i { 4 } else { 3 })]
    };
    let mut list = Vec::new();
    for _ in 0..n_terms {
        let span = 1 + rng.below(k.min(n));
        let first = rng.below(n - span + 1);
        let mut letters = vec![(first, pick(&mut rng, false))];
        for q in first + 1..first + span {
            let l = pick(&mut rng, q + 1 < first + span);
            if l != Letter::I {
                letters.push((q, l));
            }
        }
        let w = rng.normal();
        list.push((w, PauliOp::from_letters(n, &letters, false).expect("distinct sites")));
    }
    Hamiltonian::new(n, list).expect("valid terms")
}

/// Expand a letter product under per-letter Y rotations.
fn rotate_letters(weight: f64, letters: &[(usize, Letter)], angle: impl Fn(usize) -> f64) -> Vec<(f64, Vec<(usize, Letter)>)> {
    let mut acc: Vec<(f64, Vec<(usize, Letter)>)> = vec![(weight, Vec::new())];
    for &(q, l) in letters {
        let th = angle(q);
        let (c, s) = (th.cos(), th.sin());
        let images: Vec<(f64, Letter)> = match l {
            Letter::X => vec![(c, Letter::X), (-s, Letter::Z)],
            Letter::Z => vec![(s, Letter::X), (c, Letter::Z)],
            Letter::Y => vec![(1.0, Letter::Y)],
            Letter::I => vec![(1.0, Letter::I)],
        };
        let mut next = Vec::with_capacity(acc.len() * images.len());
        for (w, ls) in &acc {
            for &(f, img) in &images {
                let mut v = ls.clone();
                if img != Letter::I {
                    v.push((q, img));
                }
                next.push((w * f, v));
            }
        }
        acc = next;
    }
    acc.retain(|(w, _)| w.abs() >= PRUNE_EPS);
    acc
}

/// `U^dagger H U` with `U = prod_j exp(i theta_j Y_j / 2)`.
pub fn rotate_y(h: &Hamiltonian, angles: &[f64]) -> Hamiltonian {
    assert_eq!(angles.len(), h.n_sites(), "one angle per site");
    let n = h.n_sites();
    let mut list = Vec::new();
    for t in h.terms() {
        for (w, ls) in rotate_letters(t.weight, &t.pauli.letters(), |q| angles[q]) {
            list.push((w, PauliOp::from_letters(n, &ls, false).expect("distinct sites")));
        }
    }
    Hamiltonian::new(n, list).expect("rotation keeps terms Hermitian")
}

/// Rotation with one angle per site-in-cell.
pub fn rotate_y_supercell(h: &SupercellHamiltonian, angles: &[f64]) -> SupercellHamiltonian {
    assert_eq!(angles.len(), h.sites_per_cell, "one angle per sublattice site");
    let mut terms = Vec::new();
    for t in &h.terms {
        // index letters by position in the term so offsets survive the expansion
        let idx: Vec<(usize, Letter)> = t.letters.iter().enumerate().map(|(i, ul)| (i, ul.letter)).collect();
        for (w, ls) in rotate_letters(t.weight, &idx, |i| angles[t.letters[i].site]) {
            let letters = ls
                .into_iter()
                .map(|(i, l)| ULetter { letter: l, offset: t.letters[i].offset.clone(), site: t.letters[i].site })
                .collect();
            terms.push(UTerm { weight: w, letters });
        }
    }
    SupercellHamiltonian { dims: h.dims.clone(), sites_per_cell: h.sites_per_cell, terms }
}

/// `-X_{n-1} Z_n X_{n+1} - J_y Y_n Y_{n+1} + h_y Y_n`, one site per unit.
pub fn cluster_model(jy: f64, hy: f64) -> PeriodicHamiltonian1D {
    let sp = |s: &str| parse_sparse(s).expect("static text");
    PeriodicHamiltonian1D::new(1, vec![(-1.0, sp("X0 Z1 X2")), (-jy, sp("Y0 Y1")), (hy, sp("Y0"))])
        .expect("valid model")
}

/// Site `0` of a cell is the horizontal bond right of the vertex, site `1` the
/// vertical bond above it.
pub const TORIC_HORIZONTAL: usize = 0;
pub const TORIC_VERTICAL: usize = 1;

/// `-(sum A_v + sum B_p) - h_x sum X - h_z sum Z` on a `dims` torus.
pub fn toric_model(hx: f64, hz: f64, dims: [usize; 2]) -> SupercellHamiltonian {
    let ul = |letter: Letter, dx: i64, dy: i64, site: usize| ULetter { letter, offset: vec![dx, dy], site };
    let (hh, vv) = (TORIC_HORIZONTAL, TORIC_VERTICAL);
    let star = |l: Letter| vec![ul(l, 0, 0, hh), ul(l, -1, 0, hh), ul(l, 0, 0, vv), ul(l, 0, -1, vv)];
    let plaq = |l: Letter| vec![ul(l, 0, 0, hh), ul(l, 0, 1, hh), ul(l, 0, 0, vv), ul(l, 1, 0, vv)];
    let mut terms = vec![
        UTerm { weight: -1.0, letters: star(Letter::X) },
        UTerm { weight: -1.0, letters: plaq(Letter::Z) },
    ];
    for s in [hh, vv] {
        if hx != 0.0 {
            terms.push(UTerm { weight: -hx, letters: vec![ul(Letter::X, 0, 0, s)] });
        }
        if hz != 0.0 {
            terms.push(UTerm { weight: -hz, letters: vec![ul(Letter::Z, 0, 0, s)] });
        }
    }
    SupercellHamiltonian { dims: dims.to_vec(), sites_per_cell: 2, terms }
}

/// Transverse-field Ising chain `-sum Z_i Z_{i+1} - g sum X_i`.
pub fn tfim(n: usize, g: f64) -> Hamiltonian {
    let mut list = Vec::new();
    for i in 0..n.saturating_sub(1) {
        list.push((-1.0, PauliOp::from_letters(n, &[(i, Letter::Z), (i + 1, Letter::Z)], false).unwrap()));
    }
    for i in 0..n {
        list.push((-g, PauliOp::single(n, i, Letter::X)));
    }
    Hamiltonian::new(n, list).expect("valid model")
}

pub fn quarter_pi() -> f64 {
    PI / 4.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{dense_matrix, mat_close, mat_dagger, mat_mul, dense_y_rotation};
    use crate::pauli::parse_pauli;
    use proptest::prelude::*;

    fn finite(text: &str) -> Hamiltonian {
        match load_text(text).unwrap() {
            HamiltonianFile::Finite(h) => h,
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn load_examples() {
        let h = finite("qubits 2\nterm -1.0 Z0 Z1\nterm -0.5 X0");
        assert_eq!(h.k(), 2);
        assert_eq!(h.len(), 2);
        let h = finite("qubits 1\n# dup\nterm 1 X0\nterm 1 X0\n");
        assert_eq!(h.len(), 1);
        assert_eq!(h.terms()[0].weight, 2.0);
        let h = finite("qubits 2\nterm 1 -X0\nterm 1 X0 # cancels\n");
        assert!(h.is_empty());
        let h = finite("qubits 3\n");
        assert!(h.is_empty());
        match load_text("period 1\nterm -1.0 X0 Z1 X2\nterm -0.3 Y0 Y1\nterm 0.2 Y0").unwrap() {
            HamiltonianFile::Periodic(p) => {
                assert_eq!(p, cluster_model(0.3, 0.2));
                assert_eq!(p.k(), 3);
            }
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn load_errors_carry_lines() {
        let e = load_text("qubits 2\nterm 1 X0\nterm 1 X5\n").unwrap_err();
        assert!(matches!(e, HamError::Parse { line: 3, .. }));
        let e = load_text("qubits 2\nterm abc X0\n").unwrap_err();
        assert!(matches!(e, HamError::Parse { line: 2, .. }));
        let e = load_text("term 1 X0\n").unwrap_err();
        assert!(matches!(e, HamError::Parse { line: 1, .. }));
        let e = load_text("qubits 2\nterm 1 X0 X0\n").unwrap_err();
        assert!(matches!(e, HamError::Parse { line: 2, .. }));
    }

    #[test]
    fn periodic_terms_are_normalized() {
        let p = match load_text("period 2\nterm 1 X2 X3\nterm 1 X0 X1\nterm 0.5 Z3").unwrap() {
            HamiltonianFile::Periodic(p) => p,
            _ => unreachable!(),
        };
        assert_eq!(p.terms().len(), 2);
        assert_eq!(p.terms()[0].weight, 2.0);
        assert_eq!(p.terms()[1].pauli.to_text(), "+Z1");
        let chain = p.to_open_chain(3);
        assert_eq!(chain.n_sites(), 6);
        assert_eq!(chain.len(), 6);
    }

    #[test]
    fn supercell_round_trip_and_torus() {
        let t = toric_model(0.5, 0.25, [2, 2]);
        let text = t.to_text();
        match load_text(&text).unwrap() {
            HamiltonianFile::Supercell(s) => assert_eq!(s, t),
            _ => unreachable!(),
        }
        let torus = t.to_torus().unwrap();
        assert_eq!(torus.n_sites(), 8);
        // 4 stars + 4 plaquettes + 8 X + 8 Z
        assert_eq!(torus.len(), 24);
        for term in torus.terms() {
            assert!(term.pauli.weight() == 4 || term.pauli.weight() == 1);
        }
    }

    #[test]
    fn heisenberg_counts() {
        let h = gen_stochastic_heisenberg(4, 2, 7, true);
        assert_eq!(h.len(), 9);
        assert_eq!(gen_stochastic_heisenberg(4, 2, 7, false).len(), 6);
        assert_eq!(h, gen_stochastic_heisenberg(4, 2, 7, true));
        assert_ne!(h, gen_stochastic_heisenberg(4, 2, 8, true));
        assert_eq!(gen_stochastic_heisenberg(10, 3, 1, true).k(), 3);
    }

    #[test]
    fn rotation_examples() {
        let h = Hamiltonian::new(1, vec![(-1.0, parse_pauli("X0", 1).unwrap())]).unwrap();
        let r = rotate_y(&h, &[std::f64::consts::FRAC_PI_2]);
        assert_eq!(r.len(), 1);
        assert_eq!(r.terms()[0].pauli.to_text(), "+Z0");
        assert!((r.terms()[0].weight - 1.0).abs() < 1e-15);
        let th = 0.3f64;
        let h = Hamiltonian::new(2, vec![(1.0, parse_pauli("X0 X1", 2).unwrap())]).unwrap();
        let r = rotate_y(&h, &[th, th]);
        let get = |s: &str| r.terms().iter().find(|t| t.pauli == parse_pauli(s, 2).unwrap()).unwrap().weight;
        let (c, s) = (th.cos(), th.sin());
        assert!((get("X0 X1") - c * c).abs() < 1e-15);
        assert!((get("X0 Z1") + c * s).abs() < 1e-15);
        assert!((get("Z0 X1") + s * c).abs() < 1e-15);
        assert!((get("Z0 Z1") - s * s).abs() < 1e-15);
        assert_eq!(rotate_y(&h, &[0.0, 0.0]), h);
    }

    #[test]
    fn rotation_matches_dense_conjugation() {
        let h = Hamiltonian::new(
            2,
            vec![
                (0.7, parse_pauli("X0 Z1", 2).unwrap()),
                (-0.4, parse_pauli("Y0 X1", 2).unwrap()),
                (0.2, parse_pauli("Z0", 2).unwrap()),
            ],
        )
        .unwrap();
        let angles = [0.37, -1.1];
        let r = rotate_y(&h, &angles);
        let dense = |h: &Hamiltonian| {
            let mut acc = vec![vec![num_complex::Complex64::new(0.0, 0.0); 4]; 4];
            for t in h.terms() {
                let m = dense_matrix(&t.pauli);
                for i in 0..4 {
                    for j in 0..4 {
                        acc[i][j] += m[i][j] * t.weight;
                    }
                }
            }
            acc
        };
        let u = dense_y_rotation(&angles);
        let want = mat_mul(&mat_mul(&mat_dagger(&u), &dense(&h)), &u);
        assert!(mat_close(&want, &dense(&r), 1e-12));
    }

    proptest! {
        #[test]
        fn rotation_inverse_and_norm(ws in prop::collection::vec(-2.0f64..2.0, 4), th in prop::collection::vec(-3.0f64..3.0, 3)) {
            let texts = ["X0 Z1", "Z1 X2", "Y0 X2", "Z0 Z1 Z2"];
            let h = Hamiltonian::new(3, texts.iter().zip(&ws).map(|(s, &w)| (w, parse_pauli(s, 3).unwrap()))).unwrap();
            let back = rotate_y(&rotate_y(&h, &th), &th.iter().map(|t| -t).collect::<Vec<_>>());
            prop_assert_eq!(back.len(), h.len());
            for t in h.terms() {
                let b = back.terms().iter().find(|x| x.pauli == t.pauli).unwrap();
                prop_assert!((b.weight - t.weight).abs() < 1e-9);
            }
            for t in h.terms() {
                let ex = rotate_letters(t.weight, &t.pauli.letters(), |q| th[q]);
                let s: f64 = ex.iter().map(|(w, _)| w * w).sum();
                prop_assert!((s - t.weight * t.weight).abs() < 1e-9);
            }
        }

        #[test]
        fn text_round_trip(seed in 0u64..500) {
            let h = gen_stochastic_heisenberg(6, 3, seed, seed % 2 == 0);
            match load_text(&h.to_text()).unwrap() {
                HamiltonianFile::Finite(b) => prop_assert_eq!(b, h),
                _ => prop_assert!(false),
            }
        }

        #[test]
        fn by_last_site_partitions(seed in 0u64..200) {
            let h = gen_stochastic_heisenberg(7, 3, seed, true);
            let mut ids: Vec<usize> = h.by_last_site().iter().flatten().copied().collect();
            ids.sort();
            prop_assert_eq!(ids, (0..h.len()).collect::<Vec<_>>());
            for (m, list) in h.by_last_site().iter().enumerate() {
                for &i in list {
                    prop_assert_eq!(h.terms()[i].pauli.last_site(), Some(m));
                }
            }
        }
    }
}
