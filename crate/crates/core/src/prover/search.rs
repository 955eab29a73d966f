//! Breadth-first proof search driven by a scoring policy.
//!
//! Goals are deduplicated by their serialized form within one theorem's
//! search. Expanding a goal embeds it once, takes the top-k1 tactics by
//! tactic score, attaches the top-k2 ranked premises to each, and enqueues
//! whatever subgoals successful applications produce. A goal closes when
//! some application's subgoals all close; the theorem closes with its root.

use super::engine::{Engine, TacticOutcome};
use crate::corpus::{ProofLog, TheoremDb};
use crate::model::{Model, PremiseCache};
use crate::numerics::Scalar;
use crate::sexpr::{serialize, SExpr};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProveConfig {
    /// Tactics tried per expanded goal.
    pub k1: usize,
    /// Premises attached to each tactic application.
    pub k2: usize,
    /// Goal expansions before giving up.
    pub max_expansions: usize,
    /// Wall-clock budget per theorem; None disables the clock (and keeps
    /// search outcomes machine-independent).
    pub wall_clock: Option<Duration>,
}

impl Default for ProveConfig {
    fn default() -> Self {
        ProveConfig {
            k1: 5,
            k2: 20,
            max_expansions: 100,
            wall_clock: Some(Duration::from_secs(60)),
        }
    }
}

/// Scores goals for the search: tactic logits plus a ranked premise list.
pub trait Policy: Sync {
    fn n_tactics(&self) -> usize;
    /// Tactic scores (length n_tactics) and ranked eligible premise indices
    /// (best first, already truncated to k2) for a goal of the theorem at
    /// `thm_index`.
    fn score(&self, goal: &SExpr, thm_index: usize, cfg: &ProveConfig) -> (Vec<f64>, Vec<usize>);
}

/// Trained-model policy backed by a premise-embedding cache.
pub struct ModelPolicy<'a, T: Scalar> {
    pub model: &'a Model<T>,
    pub cache: &'a PremiseCache<T>,
}

impl<'a, T: Scalar> Policy for ModelPolicy<'a, T> {
    fn n_tactics(&self) -> usize {
        self.model.cfg.n_tactics
    }

    fn score(&self, goal: &SExpr, thm_index: usize, cfg: &ProveConfig) -> (Vec<f64>, Vec<usize>) {
        let graph = self.model.graphify(goal).expect("goal must graphify");
        let embedding = self.model.embed_goal(&graph).expect("goal must embed");
        let logits = self.model.predict_tactic(&embedding);
        let tactic_scores: Vec<f64> = logits.row(0).iter().map(|v| v.to_f64()).collect();
        let ranked = self
            .model
            .rank_premises(&embedding, self.cache, thm_index, cfg.k2);
        (tactic_scores, ranked.into_iter().map(|(i, _)| i).collect())
    }
}

/// Uniform-random scores, deterministic per (seed, goal text, theorem).
pub struct RandomPolicy {
    pub seed: u64,
    pub n_tactics: usize,
}

impl Policy for RandomPolicy {
    fn n_tactics(&self) -> usize {
        self.n_tactics
    }

    fn score(&self, goal: &SExpr, thm_index: usize, cfg: &ProveConfig) -> (Vec<f64>, Vec<usize>) {
        let key = crate::graphrep::fnv1a(serialize(goal).as_bytes())
            ^ self.seed
            ^ (thm_index as u64).wrapping_mul(0x9e3779b97f4a7c15);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let tactic_scores: Vec<f64> = (0..self.n_tactics).map(|_| rng.gen::<f64>()).collect();
        let mut premises: Vec<usize> = (0..thm_index).collect();
        // Partial Fisher-Yates: uniformly ranked prefix of the eligible set.
        let take = cfg.k2.min(premises.len());
        for i in 0..take {
            let j = rng.gen_range(i..premises.len());
            premises.swap(i, j);
        }
        premises.truncate(take);
        (tactic_scores, premises)
    }
}

/// Replays logged proofs: one-hot on the logged tactic, logged premises
/// first. Goals that never appear in the log get empty guidance.
pub struct OraclePolicy {
    pub n_tactics: usize,
    by_goal: HashMap<String, (usize, Vec<usize>)>,
}

impl OraclePolicy {
    pub fn new(log: &ProofLog, n_tactics: usize) -> Self {
        let mut by_goal = HashMap::new();
        for step in &log.steps {
            by_goal
                .entry(serialize(&step.goal))
                .or_insert((step.tactic_id, step.premises.clone()));
        }
        OraclePolicy { n_tactics, by_goal }
    }
}

impl Policy for OraclePolicy {
    fn n_tactics(&self) -> usize {
        self.n_tactics
    }

    fn score(&self, goal: &SExpr, _thm_index: usize, _cfg: &ProveConfig) -> (Vec<f64>, Vec<usize>) {
        match self.by_goal.get(&serialize(goal)) {
            Some((tactic, premises)) => {
                let mut scores = vec![0.0; self.n_tactics];
                scores[*tactic] = 1.0;
                (scores, premises.clone())
            }
            None => (vec![0.0; self.n_tactics], Vec::new()),
        }
    }
}

/// One successful tactic application on the closing branch.
#[derive(Debug, Clone, PartialEq)]
pub struct ProofStepRecord {
    pub goal: SExpr,
    pub tactic_id: usize,
    pub premises: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ProveResult {
    pub closed: bool,
    /// Successful applications on the closing branch (proof length is its
    /// length); empty when not closed.
    pub certificate: Vec<ProofStepRecord>,
    pub expansions: usize,
    pub tactic_attempts: usize,
    pub tactic_successes: usize,
    /// Goal embeddings computed; exactly one per expansion.
    pub goal_scores_computed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GoalState {
    Open,
    Closed,
}

struct GoalNode {
    goal: SExpr,
    state: GoalState,
    expanded: bool,
    /// Successful applications: (tactic, premises, subgoal node ids).
    applications: Vec<(usize, Vec<usize>, Vec<usize>)>,
    /// (application owner goal, application index) pairs that include this
    /// goal as a subgoal.
    parents: Vec<(usize, usize)>,
}

/// Breadth-first search for one theorem.
pub fn prove(
    engine: &Engine,
    db: &TheoremDb,
    thm_index: usize,
    policy: &dyn Policy,
    cfg: &ProveConfig,
) -> ProveResult {
    let statement = db.statement(thm_index).clone();
    let start = Instant::now();

    let mut nodes: Vec<GoalNode> = Vec::new();
    let mut by_text: HashMap<String, usize> = HashMap::new();
    let mut queue: VecDeque<usize> = VecDeque::new();

    let root = intern_goal(&mut nodes, &mut by_text, &mut queue, statement);
    let mut result = ProveResult {
        closed: false,
        certificate: Vec::new(),
        expansions: 0,
        tactic_attempts: 0,
        tactic_successes: 0,
        goal_scores_computed: 0,
    };

    while let Some(node_id) = queue.pop_front() {
        if nodes[root].state == GoalState::Closed {
            break;
        }
        if result.expansions >= cfg.max_expansions {
            break;
        }
        if let Some(limit) = cfg.wall_clock {
            if start.elapsed() > limit {
                break;
            }
        }
        // A goal closed through another branch needs no expansion.
        if nodes[node_id].state == GoalState::Closed || nodes[node_id].expanded {
            continue;
        }
        nodes[node_id].expanded = true;
        result.expansions += 1;

        let goal = nodes[node_id].goal.clone();
        let (tactic_scores, ranked_premises) = policy.score(&goal, thm_index, cfg);
        result.goal_scores_computed += 1;
        let top_tactics = top_k_indices(&tactic_scores, cfg.k1);
        let premise_refs: Vec<&SExpr> = ranked_premises.iter().map(|&p| db.statement(p)).collect();

        for tactic_id in top_tactics {
            result.tactic_attempts += 1;
            let outcome = engine
                .apply_tactic(&goal, tactic_id, &premise_refs)
                .expect("policy only emits known tactic ids");
            match outcome {
                TacticOutcome::Failed => {} // logged in attempts, otherwise ignored
                TacticOutcome::Closed => {
                    result.tactic_successes += 1;
                    nodes[node_id]
                        .applications
                        .push((tactic_id, ranked_premises.clone(), Vec::new()));
                    close_goal(&mut nodes, node_id);
                    if nodes[root].state == GoalState::Closed {
                        break;
                    }
                }
                TacticOutcome::Subgoals(subgoals) => {
                    result.tactic_successes += 1;
                    let app_idx = nodes[node_id].applications.len();
                    let mut child_ids = Vec::with_capacity(subgoals.len());
                    for sub in subgoals {
                        let child = intern_goal(&mut nodes, &mut by_text, &mut queue, sub);
                        child_ids.push(child);
                    }
                    for &child in &child_ids {
                        nodes[child].parents.push((node_id, app_idx));
                    }
                    nodes[node_id]
                        .applications
                        .push((tactic_id, ranked_premises.clone(), child_ids.clone()));
                    // Subgoals may all be closed already (deduplication).
                    if child_ids
                        .iter()
                        .all(|&c| nodes[c].state == GoalState::Closed)
                    {
                        close_goal(&mut nodes, node_id);
                        if nodes[root].state == GoalState::Closed {
                            break;
                        }
                    }
                }
            }
        }
    }

    if nodes[root].state == GoalState::Closed {
        result.closed = true;
        result.certificate = extract_certificate(&nodes, root);
    }
    result
}

fn intern_goal(
    nodes: &mut Vec<GoalNode>,
    by_text: &mut HashMap<String, usize>,
    queue: &mut VecDeque<usize>,
    goal: SExpr,
) -> usize {
    let key = serialize(&goal);
    if let Some(&id) = by_text.get(&key) {
        return id;
    }
    let id = nodes.len();
    nodes.push(GoalNode {
        goal,
        state: GoalState::Open,
        expanded: false,
        applications: Vec::new(),
        parents: Vec::new(),
    });
    by_text.insert(key, id);
    queue.push_back(id);
    id
}

/// Mark a goal closed and propagate closure to any application whose
/// subgoals are now all closed.
fn close_goal(nodes: &mut [GoalNode], id: usize) {
    let mut work = vec![id];
    while let Some(at) = work.pop() {
        if nodes[at].state == GoalState::Closed {
            continue;
        }
        nodes[at].state = GoalState::Closed;
        let parents = nodes[at].parents.clone();
        for (parent, app_idx) in parents {
            if nodes[parent].state == GoalState::Closed {
                continue;
            }
            let all_closed = nodes[parent].applications[app_idx]
                .2
                .iter()
                .all(|&c| nodes[c].state == GoalState::Closed);
            if all_closed {
                work.push(parent);
            }
        }
    }
}

/// Walk the closing branch: per closed goal, its first fully-closed
/// application, depth-first. Returns the successful applications in
/// replayable (pre-order) order.
fn extract_certificate(nodes: &[GoalNode], root: usize) -> Vec<ProofStepRecord> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    let mut visited = std::collections::HashSet::new();
    while let Some(at) = stack.pop() {
        if !visited.insert(at) {
            continue;
        }
        let node = &nodes[at];
        debug_assert_eq!(node.state, GoalState::Closed);
        let (tactic_id, premises, children) = node
            .applications
            .iter()
            .find(|(_, _, children)| {
                children.iter().all(|&c| nodes[c].state == GoalState::Closed)
            })
            .expect("closed goal has a closing application");
        out.push(ProofStepRecord {
            goal: node.goal.clone(),
            tactic_id: *tactic_id,
            premises: premises.clone(),
        });
        // Depth-first, preserving subgoal order on the stack.
        for &c in children.iter().rev() {
            stack.push(c);
        }
    }
    out
}

fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores")
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

/// Independent replay of a certificate through the engine: every recorded
/// application must reproduce and every produced subgoal must close.
pub fn check_certificate(
    engine: &Engine,
    db: &TheoremDb,
    statement: &SExpr,
    certificate: &[ProofStepRecord],
) -> bool {
    let by_goal: HashMap<String, &ProofStepRecord> = certificate
        .iter()
        .map(|s| (serialize(&s.goal), s))
        .collect();
    let mut open = vec![statement.clone()];
    let mut fuel = certificate.len() * 4 + 16;
    while let Some(goal) = open.pop() {
        if fuel == 0 {
            return false;
        }
        fuel -= 1;
        let Some(step) = by_goal.get(&serialize(&goal)) else {
            return false;
        };
        let premises: Vec<&SExpr> = step.premises.iter().map(|&p| db.statement(p)).collect();
        match engine.apply_tactic(&goal, step.tactic_id, &premises) {
            Ok(TacticOutcome::Closed) => {}
            Ok(TacticOutcome::Subgoals(subs)) => open.extend(subs),
            _ => return false,
        }
    }
    true
}

// --- evaluation over a theorem set ----------------------------------------

#[derive(Debug, Clone)]
pub struct TheoremOutcome {
    pub thm_index: usize,
    pub closed: bool,
    pub proof_length: usize,
    pub expansions: usize,
    pub tactic_successes: usize,
    pub tactic_attempts: usize,
    pub replay_ok: bool,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub outcomes: Vec<TheoremOutcome>,
    pub fraction_closed: f64,
    pub mean_proof_length: f64,
    pub tactic_success_rate: f64,
}

/// Run the prover over a theorem set, independently per theorem, and check
/// every reported closure by replay.
pub fn evaluate_prover(
    engine: &Engine,
    db: &TheoremDb,
    theorems: &[usize],
    policy: &dyn Policy,
    cfg: &ProveConfig,
) -> EvalReport {
    assert!(!theorems.is_empty(), "evaluation over no theorems");
    let outcomes: Vec<TheoremOutcome> = theorems
        .par_iter()
        .map(|&thm_index| {
            let r = prove(engine, db, thm_index, policy, cfg);
            let replay_ok = !r.closed
                || check_certificate(engine, db, db.statement(thm_index), &r.certificate);
            TheoremOutcome {
                thm_index,
                closed: r.closed,
                proof_length: r.certificate.len(),
                expansions: r.expansions,
                tactic_successes: r.tactic_successes,
                tactic_attempts: r.tactic_attempts,
                replay_ok,
            }
        })
        .collect();

    let closed: Vec<&TheoremOutcome> = outcomes.iter().filter(|o| o.closed).collect();
    let fraction_closed = closed.len() as f64 / outcomes.len() as f64;
    let mean_proof_length = if closed.is_empty() {
        0.0
    } else {
        closed.iter().map(|o| o.proof_length as f64).sum::<f64>() / closed.len() as f64
    };
    let attempts: usize = outcomes.iter().map(|o| o.tactic_attempts).sum();
    let successes: usize = outcomes.iter().map(|o| o.tactic_successes).sum();
    let tactic_success_rate = if attempts == 0 {
        0.0
    } else {
        successes as f64 / attempts as f64
    };
    EvalReport {
        outcomes,
        fraction_closed,
        mean_proof_length,
        tactic_success_rate,
    }
}

/// One line per theorem plus a summary footer.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    for o in &report.outcomes {
        let _ = writeln!(
            out,
            "theorem {} closed {} proof_length {} expansions {} tactic_successes {} tactic_attempts {} replay_ok {}",
            o.thm_index, o.closed, o.proof_length, o.expansions, o.tactic_successes, o.tactic_attempts, o.replay_ok
        );
    }
    let _ = writeln!(
        out,
        "summary theorems {} closed_fraction {:?} mean_proof_length {:?} tactic_success_rate {:?}",
        report.outcomes.len(),
        report.fraction_closed,
        report.mean_proof_length,
        report.tactic_success_rate
    );
    out
}
