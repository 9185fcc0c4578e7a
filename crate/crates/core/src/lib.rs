//! Exact stabilizer ground states of Pauli Hamiltonians.

pub mod annealer;
pub mod cli;
pub mod clifford;
pub mod hamiltonian;
pub mod oracle;
pub mod pauli;
pub mod rng;
pub mod solver_general;
pub mod solver_local1d;
pub mod solver_periodic;
pub mod stabgroup;
