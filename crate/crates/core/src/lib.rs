//! Compact fermion-to-qubit encoding and a small simulation stack around it.

pub mod configspace;
pub mod encoder;
pub mod fixtures;
pub mod integrals;
pub mod mitigation;
pub mod optimizer;
pub mod par;
pub mod pauli;
pub mod simulator;
pub mod vqe;
