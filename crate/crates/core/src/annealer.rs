//! Simulated annealing over layered Clifford circuits, as a baseline for the
//! exact solvers.
//!
//! The ansatz is `L + 1` layers of single-qubit Cliffords with a CNOT ladder
//! (`i -> i + 1`) between consecutive layers, applied to `|0...0>`.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::clifford::{conjugate, conjugate_letter, CircuitDescription, Gate};
use crate::hamiltonian::Hamiltonian;
use crate::pauli::{Letter, PauliOp};
use crate::rng::Rng;
use crate::solver_general::e_stab;
use crate::stabgroup::StabGroup;

pub const N_CLIFFORDS: usize = 24;
pub const DEFAULT_LAYERS: usize = 2;

/// One single-qubit Clifford: the shortest {H, S} word reaching it and its
/// action on X, Y and Z.
#[derive(Debug, Clone)]
pub struct SingleClifford {
    pub word: Vec<char>,
    pub x_image: (Letter, bool),
    pub y_image: (Letter, bool),
    pub z_image: (Letter, bool),
}

fn word_gates(word: &[char], q: usize) -> Vec<Gate> {
    word.iter().map(|&c| if c == 'H' { Gate::H(q) } else { Gate::S(q) }).collect()
}

/// The 24 single-qubit Cliffords in breadth-first order over words in
/// {H, S}, H tried before S. Index 0 is the identity.
pub fn single_cliffords() -> &'static [SingleClifford] {
    static TABLE: OnceLock<Vec<SingleClifford>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let action = |w: &[char]| {
            let g = word_gates(w, 0);
            (conjugate_letter(&g, Letter::X), conjugate_letter(&g, Letter::Z))
        };
        let mut out: Vec<SingleClifford> = Vec::new();
        let mut queue = std::collections::VecDeque::from([Vec::new()]);
        while let Some(w) = queue.pop_front() {
            let (x_image, z_image) = action(&w);
            if out.iter().any(|c| c.x_image == x_image && c.z_image == z_image) {
                continue;
            }
            for g in ['H', 'S'] {
                let mut next = w.clone();
                next.push(g);
                queue.push_back(next);
            }
            let y_image = conjugate_letter(&word_gates(&w, 0), Letter::Y);
            out.push(SingleClifford { word: w, x_image, y_image, z_image });
        }
        assert_eq!(out.len(), N_CLIFFORDS);
        out
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CliffordAnsatz {
    pub n: usize,
    pub layers: usize,
    /// `slots[layer][qubit]`, indices into [`single_cliffords`].
    pub slots: Vec<Vec<u8>>,
}

impl CliffordAnsatz {
    pub fn identity(n: usize, layers: usize) -> CliffordAnsatz {
        CliffordAnsatz { n, layers, slots: vec![vec![0; n]; layers + 1] }
    }

    pub fn random(n: usize, layers: usize, rng: &mut Rng) -> CliffordAnsatz {
        let slots = (0..=layers).map(|_| (0..n).map(|_| rng.below(N_CLIFFORDS) as u8).collect()).collect();
        CliffordAnsatz { n, layers, slots }
    }

    pub fn circuit(&self) -> CircuitDescription {
        let table = single_cliffords();
        let mut gates = Vec::new();
        for (j, layer) in self.slots.iter().enumerate() {
            for (q, &c) in layer.iter().enumerate() {
                gates.extend(word_gates(&table[c as usize].word, q));
            }
            if j < self.layers {
                gates.extend((0..self.n.saturating_sub(1)).map(|i| Gate::Cnot(i, i + 1)));
            }
        }
        CircuitDescription { n: self.n, gates }
    }

    /// Stabilizer group of the prepared state.
    pub fn group(&self) -> StabGroup {
        let table = single_cliffords();
        let gens: Vec<PauliOp> = (0..self.n)
            .map(|i| {
                let mut p = PauliOp::single(self.n, i, Letter::Z);
                for (j, layer) in self.slots.iter().enumerate() {
                    for (q, &c) in layer.iter().enumerate() {
                        if c != 0 {
                            apply_single(&mut p, q, &table[c as usize]);
                        }
                    }
                    if j < self.layers {
                        for a in 0..self.n.saturating_sub(1) {
                            conjugate(&mut p, &Gate::Cnot(a, a + 1));
                        }
                    }
                }
                p
            })
            .collect();
        StabGroup::from_generators(self.n, gens.iter()).expect("images of commuting generators")
    }
}

fn apply_single(p: &mut PauliOp, q: usize, c: &SingleClifford) {
    let (img, neg) = match p.letter(q) {
        Letter::I => return,
        Letter::X => c.x_image,
        Letter::Y => c.y_image,
        Letter::Z => c.z_image,
    };
    p.set_letter(q, img);
    if neg {
        p.flip_sign();
    }
}

/// Energy of the prepared state.
pub fn evaluate(ansatz: &CliffordAnsatz, h: &Hamiltonian) -> f64 {
    assert_eq!(ansatz.n, h.n_sites(), "ansatz and Hamiltonian sizes differ");
    e_stab(h, &ansatz.group())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
}

impl Default for Schedule {
    fn default() -> Schedule {
        Schedule { t_start: 5.0, t_end: 0.05, steps: 2500 }
    }
}

impl Schedule {
    pub fn temperature(&self, step: usize) -> f64 {
        if self.steps <= 1 {
            return self.t_start;
        }
        self.t_start * (self.t_end / self.t_start).powf(step as f64 / (self.steps - 1) as f64)
    }
}

/// `min(exp(-de / t), 1)`; at `t = 0` only non-increasing moves pass.
pub fn acceptance_probability(de: f64, t: f64) -> f64 {
    if de <= 0.0 {
        1.0
    } else if t <= 0.0 {
        0.0
    } else {
        (-de / t).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub step: usize,
    pub temperature: f64,
    pub energy: f64,
    pub best_energy: f64,
}

#[derive(Debug, Clone)]
pub struct AnnealResult {
    pub best_energy: f64,
    pub best_ansatz: CliffordAnsatz,
    pub trace: Vec<TracePoint>,
    pub accepted: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealOptions {
    pub schedule: Schedule,
    pub layers: usize,
    pub random_start: bool,
}

impl Default for AnnealOptions {
    fn default() -> AnnealOptions {
        AnnealOptions { schedule: Schedule::default(), layers: DEFAULT_LAYERS, random_start: false }
    }
}

pub fn anneal(h: &Hamiltonian, opts: &AnnealOptions, seed: u64) -> AnnealResult {
    let n = h.n_sites();
    let mut rng = Rng::new(seed);
    let mut cur = if opts.random_start {
        CliffordAnsatz::random(n, opts.layers, &mut rng)
    } else {
        CliffordAnsatz::identity(n, opts.layers)
    };
    let mut e = evaluate(&cur, h);
    let mut best = (e, cur.clone());
    let mut trace = Vec::with_capacity(opts.schedule.steps);
    let mut accepted = 0;
    let n_slots = (opts.layers + 1) * n;
    for step in 0..opts.schedule.steps {
        let t = opts.schedule.temperature(step);
        if n_slots > 0 {
            let slot = rng.below(n_slots);
            let c = rng.below(N_CLIFFORDS) as u8;
            let (layer, q) = (slot / n, slot % n);
            let old = cur.slots[layer][q];
            cur.slots[layer][q] = c;
            let e_new = evaluate(&cur, h);
            let p = acceptance_probability(e_new - e, t);
            if p >= 1.0 || rng.uniform() < p {
                e = e_new;
                accepted += 1;
                if e < best.0 {
                    best = (e, cur.clone());
                }
            } else {
                cur.slots[layer][q] = old;
            }
        }
        trace.push(TracePoint { step, temperature: t, energy: e, best_energy: best.0 });
    }
    AnnealResult { best_energy: best.0, best_ansatz: best.1, trace, accepted }
}

/// Independent chains, one per seed, in seed order.
pub fn anneal_seeds(h: &Hamiltonian, opts: &AnnealOptions, seeds: &[u64]) -> Vec<AnnealResult> {
    seeds.par_iter().map(|&s| anneal(h, opts, s)).collect()
}

pub fn trace_csv(trace: &[TracePoint]) -> String {
    let mut s = String::from("step,temperature,energy,best_energy\n");
    for p in trace {
        s.push_str(&format!("{},{},{},{}\n", p.step, p.temperature, p.energy, p.best_energy));
    }
    s
}
