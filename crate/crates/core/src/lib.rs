//! Higher-order-logic term graphs, a message-passing GNN encoder, and a
//! tactic/premise-selection model evaluated by guided proof search over a
//! synthetic theorem corpus.
//!
//! Pipeline, end to end:
//!
//! 1. [`sexpr`] parses HOL terms from their parenthesized text form.
//! 2. [`graphrep`] turns terms into labeled graphs and applies the
//!    representation transforms (subexpression/leaf sharing, variable
//!    blinding, random edges, direction restriction).
//! 3. [`numerics`] is a small dense-matrix engine with reverse-mode
//!    gradients, the three training losses, and Adam + Polyak averaging.
//! 4. [`gnn`] embeds a graph into a fixed-size vector by iterated message
//!    passing followed by projection and max pooling.
//! 5. [`model`] combines two GNN towers with a tactic classifier and a
//!    premise scorer, and owns batch construction and the total loss.
//! 6. [`corpus`] loads/saves theorem databases and proof logs, generates
//!    the synthetic corpus, and computes the proxy metrics.
//! 7. [`prover`] runs breadth-first proof search over a deterministic toy
//!    tactic engine and reports proofs closed.

pub mod corpus;
pub mod gnn;
pub mod graphrep;
pub mod model;
pub mod numerics;
pub mod prover;
pub mod sexpr;

pub use graphrep::{Direction, RepresentationConfig, Sharing, TermGraph};
pub use sexpr::SExpr;
