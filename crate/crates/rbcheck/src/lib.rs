//! Parameterized model checking for networks of identical processes that
//! synchronize by k-wise rendezvous and symmetric broadcast, with a frontend
//! that reduces discrete timed networks to the same model. Safety checks run
//! on the finite-word automaton of the reachability-unwinding; liveness
//! checks classify the unwinding edges by exact-rational feasibility and
//! decide emptiness of a bounded-counter automaton. A brute-force oracle
//! validates everything at small instance sizes.

pub mod automata;
pub mod classifier;
pub mod corpus;
pub mod manifest;
pub mod model;
pub mod oracle;
pub mod parse;
pub mod ratvas;
pub mod timed;
pub mod unwinding;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
