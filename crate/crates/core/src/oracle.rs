//! Brute-force reference engines for tiny systems: exhaustive enumeration of
//! full stabilizer groups and dense state-vector arithmetic.
//!
//! Basis index bit `i` is the computational value of site `i`.

use std::collections::HashSet;

use num_complex::Complex64;
use thiserror::Error;

use crate::clifford::Gate;
use crate::hamiltonian::Hamiltonian;
use crate::pauli::{Letter, PauliOp};
use crate::stabgroup::{StabError, StabGroup};

pub const MAX_ENUM_SITES: usize = 3;
pub const MAX_DENSE_SITES: usize = 10;

pub type Mat = Vec<Vec<Complex64>>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{n} sites exceeds the oracle limit of {max}")]
    Guard { n: usize, max: usize },
    #[error(transparent)]
    Stab(#[from] StabError),
}

#[derive(Debug, Clone)]
pub struct DenseState {
    pub n: usize,
    pub amplitudes: Vec<Complex64>,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `<a|L|b>` for one site.
fn letter_elem(l: Letter, a: usize, b: usize) -> Complex64 {
    match (l, a, b) {
        (Letter::I, a, b) => c(if a == b { 1.0 } else { 0.0 }, 0.0),
        (Letter::X, a, b) => c(if a != b { 1.0 } else { 0.0 }, 0.0),
        (Letter::Y, 0, 1) => c(0.0, -1.0),
        (Letter::Y, 1, 0) => c(0.0, 1.0),
        (Letter::Y, _, _) => c(0.0, 0.0),
        (Letter::Z, a, b) if a == b => c(if a == 0 { 1.0 } else { -1.0 }, 0.0),
        (Letter::Z, _, _) => c(0.0, 0.0),
    }
}

fn global_phase(p: &PauliOp) -> Complex64 {
    [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)][p.phase() as usize]
}

fn elem(p: &PauliOp, a: usize, b: usize) -> Complex64 {
    let mut v = global_phase(p);
    for i in 0..p.n_sites() {
        v *= letter_elem(p.letter(i), (a >> i) & 1, (b >> i) & 1);
        if v == c(0.0, 0.0) {
            break;
        }
    }
    v
}

/// Dense matrix of an operator, built entry by entry from the letter matrices.
pub fn dense_matrix(p: &PauliOp) -> Mat {
    let d = 1usize << p.n_sites();
    (0..d).map(|a| (0..d).map(|b| elem(p, a, b)).collect()).collect()
}

fn xmask(p: &PauliOp) -> usize {
    (0..p.n_sites()).filter(|&i| p.x_bit(i)).map(|i| 1usize << i).sum()
}

/// `P |psi>` without forming the matrix.
pub fn apply_pauli(p: &PauliOp, psi: &[Complex64]) -> Vec<Complex64> {
    let xm = xmask(p);
    (0..psi.len()).map(|a| elem(p, a, a ^ xm) * psi[a ^ xm]).collect()
}

pub fn dense_gate(n: usize, g: &Gate) -> Mat {
    let d = 1usize << n;
    let mut m = vec![vec![c(0.0, 0.0); d]; d];
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for b in 0..d {
        // column b: image of |b>
        match *g {
            Gate::H(q) => {
                let bit = (b >> q) & 1;
                m[b & !(1 << q)][b] += c(r, 0.0);
                m[b | (1 << q)][b] += c(if bit == 1 { -r } else { r }, 0.0);
            }
            Gate::S(q) => m[b][b] = if (b >> q) & 1 == 1 { c(0.0, 1.0) } else { c(1.0, 0.0) },
            Gate::X(q) => m[b ^ (1 << q)][b] = c(1.0, 0.0),
            Gate::Z(q) => m[b][b] = if (b >> q) & 1 == 1 { c(-1.0, 0.0) } else { c(1.0, 0.0) },
            Gate::Cnot(ct, t) => {
                let out = if (b >> ct) & 1 == 1 { b ^ (1 << t) } else { b };
                m[out][b] = c(1.0, 0.0);
            }
        }
    }
    m
}

/// `prod_j exp(i theta_j Y_j / 2)`.
pub fn dense_y_rotation(angles: &[f64]) -> Mat {
    let n = angles.len();
    let d = 1usize << n;
    let mut m = vec![vec![c(0.0, 0.0); d]; d];
    for (a, row) in m.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            let mut x = 1.0;
            for (i, th) in angles.iter().enumerate() {
                let (cs, sn) = ((th / 2.0).cos(), (th / 2.0).sin());
                // single-site matrix [[c, s], [-s, c]]
                x *= match ((a >> i) & 1, (b >> i) & 1) {
                    (0, 0) | (1, 1) => cs,
                    (0, 1) => sn,
                    _ => -sn,
                };
            }
            *v = c(x, 0.0);
        }
    }
    m
}

pub fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let d = a.len();
    let mut out = vec![vec![c(0.0, 0.0); d]; d];
    for i in 0..d {
        for k in 0..d {
            if a[i][k] == c(0.0, 0.0) {
                continue;
            }
            for j in 0..d {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn mat_dagger(a: &Mat) -> Mat {
    let d = a.len();
    (0..d).map(|i| (0..d).map(|j| a[j][i].conj()).collect()).collect()
}

pub fn mat_close(a: &Mat, b: &Mat, tol: f64) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(ra, rb)| ra.iter().zip(rb).all(|(x, y)| (x - y).norm() <= tol))
}

/// Every rank-`n` stabilizer group on `n <= 3` sites, each once.
pub fn enumerate_full_groups(n: usize) -> Result<Vec<StabGroup>, OracleError> {
    if n > MAX_ENUM_SITES {
        return Err(OracleError::Guard { n, max: MAX_ENUM_SITES });
    }
    let mut paulis = Vec::new();
    for code in 1..(1usize << (2 * n)) {
        let mut p = PauliOp::identity(n);
        for q in 0..n {
            p.set_letter(q, [Letter::I, Letter::X, Letter::Y, Letter::Z][(code >> (2 * q)) & 3]);
        }
        paulis.push(p.clone());
        paulis.push(p.negated());
    }
    let mut level = vec![StabGroup::trivial(n)];
    for _ in 0..n {
        let mut seen = HashSet::new();
        let mut next = Vec::new();
        for g in &level {
            for p in &paulis {
                if !g.commutes_with(p) || g.contains(p) || g.contains(&p.negated()) {
                    continue;
                }
                let e = g.extend(p)?;
                if seen.insert(e.clone()) {
                    next.push(e);
                }
            }
        }
        level = next;
    }
    Ok(level)
}

/// State stabilized by a full group, by projecting basis vectors.
pub fn dense_from_group(s: &StabGroup) -> Result<DenseState, OracleError> {
    let n = s.n_sites();
    if n > MAX_DENSE_SITES {
        return Err(OracleError::Guard { n, max: MAX_DENSE_SITES });
    }
    if s.rank() != n {
        return Err(StabError::NotFullRank { rank: s.rank(), n }.into());
    }
    let d = 1usize << n;
    for b in 0..d {
        let mut psi = vec![c(0.0, 0.0); d];
        psi[b] = c(1.0, 0.0);
        for g in s.generators() {
            let gp = apply_pauli(g, &psi);
            for (x, y) in psi.iter_mut().zip(gp) {
                *x = (*x + y) * 0.5;
            }
        }
        let norm: f64 = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            for x in psi.iter_mut() {
                *x /= norm;
            }
            for g in s.generators() {
                let gp = apply_pauli(g, &psi);
                assert!(gp.iter().zip(&psi).all(|(a, b)| (a - b).norm() < 1e-10), "not stabilized");
            }
            return Ok(DenseState { n, amplitudes: psi });
        }
    }
    unreachable!("a full group stabilizes some state")
}

/// `<psi|H|psi>`.
pub fn dense_expectation(h: &Hamiltonian, psi: &DenseState) -> f64 {
    assert_eq!(h.n_sites(), psi.n);
    let mut acc = c(0.0, 0.0);
    for t in h.terms() {
        let hp = apply_pauli(&t.pauli, &psi.amplitudes);
        let v: Complex64 = psi.amplitudes.iter().zip(&hp).map(|(a, b)| a.conj() * b).sum();
        acc += v * t.weight;
    }
    assert!(acc.im.abs() < 1e-10, "expectation has imaginary part {}", acc.im);
    acc.re
}

/// Minimum of `e_stab` over every full group (`n <= 3`).
pub fn brute_force_min(h: &Hamiltonian) -> Result<f64, OracleError> {
    let groups = enumerate_full_groups(h.n_sites())?;
    Ok(groups.iter().map(|g| crate::solver_general::e_stab(h, g)).fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::parse_pauli;

    #[test]
    fn counts() {
        assert_eq!(enumerate_full_groups(1).unwrap().len(), 6);
        assert_eq!(enumerate_full_groups(2).unwrap().len(), 60);
        assert_eq!(enumerate_full_groups(3).unwrap().len(), 1080);
        assert!(enumerate_full_groups(4).is_err());
    }

    #[test]
    fn dense_states() {
        let g = |s: &[&str], n| {
            let ps: Vec<PauliOp> = s.iter().map(|t| parse_pauli(t, n).unwrap()).collect();
            dense_from_group(&StabGroup::from_generators(n, ps.iter()).unwrap()).unwrap()
        };
        let z = g(&["Z0"], 1);
        assert!((z.amplitudes[0] - c(1.0, 0.0)).norm() < 1e-12);
        let x = g(&["X0"], 1);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((x.amplitudes[0] - c(r, 0.0)).norm() < 1e-12 && (x.amplitudes[1] - c(r, 0.0)).norm() < 1e-12);
        let bell = g(&["X0 X1", "Z0 Z1"], 2);
        let a = bell.amplitudes[0];
        assert!((bell.amplitudes[3] - a).norm() < 1e-12 && (a.norm() - r).abs() < 1e-12);
        assert!(bell.amplitudes[1].norm() < 1e-12);
    }

    #[test]
    fn multiply_matches_matrices() {
        let a = parse_pauli("X0 X1", 2).unwrap();
        let b = parse_pauli("Z0 Z1", 2).unwrap();
        let p = a.multiply(&b);
        assert_eq!(p.to_text(), "-Y0 Y1");
        assert!(mat_close(&mat_mul(&dense_matrix(&a), &dense_matrix(&b)), &dense_matrix(&p), 1e-12));
        let x = parse_pauli("X0", 1).unwrap();
        let z = parse_pauli("Z0", 1).unwrap();
        let xz = x.multiply(&z);
        assert_eq!(xz.phase(), 3);
        assert!(mat_close(&mat_mul(&dense_matrix(&x), &dense_matrix(&z)), &dense_matrix(&xz), 1e-12));
    }

    #[test]
    fn multiply_all_pairs_two_sites() {
        let mut ops = Vec::new();
        for code in 0..16usize {
            let mut p = PauliOp::identity(2);
            for q in 0..2 {
                p.set_letter(q, [Letter::I, Letter::X, Letter::Y, Letter::Z][(code >> (2 * q)) & 3]);
            }
            ops.push(p);
        }
        for a in &ops {
            for b in &ops {
                let want = mat_mul(&dense_matrix(a), &dense_matrix(b));
                assert!(mat_close(&want, &dense_matrix(&a.multiply(b)), 1e-12));
            }
        }
    }

    #[test]
    fn absent_terms_have_zero_expectation() {
        let groups = enumerate_full_groups(2).unwrap();
        for g in &groups {
            let psi = dense_from_group(g).unwrap();
            for code in 1..16usize {
                let mut p = PauliOp::identity(2);
                for q in 0..2 {
                    p.set_letter(q, [Letter::I, Letter::X, Letter::Y, Letter::Z][(code >> (2 * q)) & 3]);
                }
                let h = Hamiltonian::new(2, vec![(1.0, p.clone())]).unwrap();
                let want = crate::stabgroup::MemberSign::as_f64(g.member_sign(&p));
                assert!((dense_expectation(&h, &psi) - want).abs() < 1e-10);
            }
        }
    }
}
