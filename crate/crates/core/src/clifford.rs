//! Gate-level Clifford conjugation on Hermitian Pauli operators.

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::pauli::{Letter, PauliOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gate {
    H(usize),
    S(usize),
    X(usize),
    Z(usize),
    Cnot(usize, usize),
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::H(_) => "H",
            Gate::S(_) => "S",
            Gate::X(_) => "X",
            Gate::Z(_) => "Z",
            Gate::Cnot(..) => "CNOT",
        }
    }
}

impl Serialize for Gate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Gate::Cnot(c, t) => {
                let mut seq = s.serialize_seq(Some(3))?;
                seq.serialize_element("CNOT")?;
                seq.serialize_element(&c)?;
                seq.serialize_element(&t)?;
                seq.end()
            }
            Gate::H(q) | Gate::S(q) | Gate::X(q) | Gate::Z(q) => {
                let mut seq = s.serialize_seq(Some(2))?;
                seq.serialize_element(self.name())?;
                seq.serialize_element(&q)?;
                seq.end()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CircuitDescription {
    pub n: usize,
    pub gates: Vec<Gate>,
}

impl CircuitDescription {
    /// Images `U Z_i U^dagger` of the computational-basis stabilizers.
    pub fn output_stabilizers(&self) -> Vec<PauliOp> {
        (0..self.n)
            .map(|i| {
                let mut p = PauliOp::single(self.n, i, Letter::Z);
                for g in &self.gates {
                    conjugate(&mut p, g);
                }
                p
            })
            .collect()
    }
}

#[inline]
fn bits(p: &PauliOp, q: usize) -> (bool, bool) {
    (p.x_bit(q), p.z_bit(q))
}

/// `p <- G p G^dagger`.
pub fn conjugate(p: &mut PauliOp, g: &Gate) {
    match *g {
        Gate::H(q) => {
            let (x, z) = bits(p, q);
            if x && z {
                p.flip_sign();
            }
            p.set_letter(q, Letter::from_bits(z, x));
        }
        Gate::S(q) => {
            let (x, z) = bits(p, q);
            if x && z {
                p.flip_sign();
            }
            p.set_letter(q, Letter::from_bits(x, z ^ x));
        }
        Gate::X(q) => {
            if p.z_bit(q) {
                p.flip_sign();
            }
        }
        Gate::Z(q) => {
            if p.x_bit(q) {
                p.flip_sign();
            }
        }
        Gate::Cnot(c, t) => {
            let (xc, zc) = bits(p, c);
            let (xt, zt) = bits(p, t);
            if xc && zt && (xt == zc) {
                p.flip_sign();
            }
            p.set_letter(t, Letter::from_bits(xt ^ xc, zt));
            p.set_letter(c, Letter::from_bits(xc, zc ^ zt));
        }
    }
}

/// Image of a single-site letter under a single-qubit gate word, as (letter, negative).
pub fn conjugate_letter(word: &[Gate], l: Letter) -> (Letter, bool) {
    let mut p = PauliOp::single(1, 0, l);
    for g in word {
        conjugate(&mut p, g);
    }
    (p.letter(0), p.is_negative())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{dense_gate, dense_matrix, mat_mul, mat_dagger, mat_close};

    #[test]
    fn conjugation_matches_dense() {
        let gates = [
            Gate::H(0),
            Gate::H(1),
            Gate::S(0),
            Gate::S(1),
            Gate::X(0),
            Gate::Z(1),
            Gate::Cnot(0, 1),
            Gate::Cnot(1, 0),
        ];
        for g in gates {
            let u = dense_gate(2, &g);
            for code in 0..16u32 {
                let mut p = PauliOp::identity(2);
                for q in 0..2 {
                    let l = [Letter::I, Letter::X, Letter::Y, Letter::Z][((code >> (2 * q)) & 3) as usize];
                    p.set_letter(q, l);
                }
                for neg in [false, true] {
                    let p0 = p.with_sign(neg);
                    let mut p1 = p0.clone();
                    conjugate(&mut p1, &g);
                    let want = mat_mul(&mat_mul(&u, &dense_matrix(&p0)), &mat_dagger(&u));
                    assert!(mat_close(&want, &dense_matrix(&p1), 1e-12), "{:?} {:?}", g, p0);
                }
            }
        }
    }

    #[test]
    fn gate_json() {
        let c = CircuitDescription { n: 2, gates: vec![Gate::H(0), Gate::Cnot(0, 1)] };
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"{"n":2,"gates":[["H",0],["CNOT",0,1]]}"#);
    }
}
