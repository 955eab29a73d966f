//! Proof search: the simulated tactic engine and the breadth-first search
//! loop driven by a scoring policy.

pub mod engine;
pub mod search;

pub use engine::{Engine, EngineError, TacticOutcome};
pub use search::{
    check_certificate, evaluate_prover, prove, render_report, EvalReport, ModelPolicy,
    OraclePolicy, Policy, ProofStepRecord, ProveConfig, ProveResult, RandomPolicy,
    TheoremOutcome,
};
