//! Deterministic synthetic corpus over a small equational signature.
//!
//! The signature has one binary operator `m`, a handful of unary operators,
//! and a pool of constants, all over a base type `N`. Axioms (definitions)
//! come in two layers:
//!
//! * ground rules `u(c_i) = c_j`, one per (unary, constant) pair, with an
//!   injective target table per unary — easy, token-identifiable steps;
//! * "router" rule families `m(w1(w2(w3(w4(x)))), y) = m(x, r1(...r4(y)))`
//!   where the wrap words `w` range over all surjective words of a fixed
//!   symbol triple and `r` is the rotated word. Every rule in a family has
//!   exactly the same token set, so distinguishing them requires looking at
//!   the wrap structure, not the bag of tokens.
//!
//! Theorems are generated with machine-checked proofs in the toy calculus:
//! router theorems (one router step, then ground steps), plain ground
//! chains, twin-redex theorems closed by the all-occurrences rewrite, plus
//! small fractions of reflexivity and conjunction-splitting theorems.
//! Every proof is replayed through the engine before it is emitted.

use super::{ProofLog, ProofStep, Split, TheoremDb, TheoremRecord, ThmKind};
use crate::prover::engine::{
    Engine, TacticOutcome, TACTIC_REFL, TACTIC_REWRITE, TACTIC_REWRITE_ALL, TACTIC_SPLIT,
};
use crate::sexpr::SExpr;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyCorpusConfig {
    pub seed: u64,
    /// Number of proved theorems (the axiom layer comes on top).
    pub n_theorems: usize,
    pub n_tactics: usize,
    pub valid_frac: f64,
    pub test_frac: f64,
    pub n_constants: usize,
    pub n_unaries: usize,
    pub router_families: usize,
    pub words_per_family: usize,
    /// Wrap depth of router rules.
    pub wrap_len: usize,
    pub frac_router: f64,
    pub frac_chain: f64,
    pub frac_twin: f64,
    pub frac_refl: f64,
    pub frac_split: f64,
    /// Corollaries rewrite with an earlier theorem instead of an axiom.
    pub frac_corollary: f64,
}

impl Default for ToyCorpusConfig {
    fn default() -> Self {
        ToyCorpusConfig {
            seed: 0,
            n_theorems: 500,
            n_tactics: 41,
            valid_frac: 0.2,
            test_frac: 0.1,
            n_constants: 16,
            n_unaries: 4,
            router_families: 2,
            words_per_family: 36,
            wrap_len: 4,
            frac_router: 0.36,
            frac_chain: 0.22,
            frac_twin: 0.10,
            frac_refl: 0.04,
            frac_split: 0.06,
            frac_corollary: 0.22,
        }
    }
}

impl ToyCorpusConfig {
    /// Size-scaled preset used by the plain (seed, n, tactics) entry point.
    pub fn sized(seed: u64, n_theorems: usize, n_tactics: usize) -> Self {
        assert!(n_theorems >= 20, "toy corpus needs at least 20 theorems");
        let small = n_theorems < 100;
        ToyCorpusConfig {
            seed,
            n_theorems,
            n_tactics,
            n_constants: if small { 8 } else { 16 },
            n_unaries: if small { 3 } else { 4 },
            router_families: if small { 1 } else { 2 },
            words_per_family: if small { 12 } else { 36 },
            ..Default::default()
        }
    }
}

pub fn generate_toy_corpus(seed: u64, n_theorems: usize, n_tactics: usize) -> (TheoremDb, ProofLog) {
    generate(&ToyCorpusConfig::sized(seed, n_theorems, n_tactics))
}

// --- term builders over the toy signature -------------------------------

fn con(name: &str) -> SExpr {
    SExpr::Node(vec![
        SExpr::atom("c"),
        SExpr::atom("N"),
        SExpr::atom(name),
    ])
}

fn var(name: &str) -> SExpr {
    SExpr::Node(vec![
        SExpr::atom("v"),
        SExpr::atom("N"),
        SExpr::atom(name),
    ])
}

fn unary(u: &str, arg: SExpr) -> SExpr {
    let fun_ty = SExpr::Node(vec![SExpr::atom("fun"), SExpr::atom("N"), SExpr::atom("N")]);
    let op = SExpr::Node(vec![SExpr::atom("c"), fun_ty, SExpr::atom(u)]);
    SExpr::Node(vec![SExpr::atom("a"), op, arg])
}

fn binary_m(lhs: SExpr, rhs: SExpr) -> SExpr {
    let inner_ty = SExpr::Node(vec![SExpr::atom("fun"), SExpr::atom("N"), SExpr::atom("N")]);
    let fun_ty = SExpr::Node(vec![SExpr::atom("fun"), SExpr::atom("N"), inner_ty]);
    let op = SExpr::Node(vec![SExpr::atom("c"), fun_ty, SExpr::atom("m")]);
    let app1 = SExpr::Node(vec![SExpr::atom("a"), op, lhs]);
    SExpr::Node(vec![SExpr::atom("a"), app1, rhs])
}

fn equation(lhs: SExpr, rhs: SExpr) -> SExpr {
    let bool_ty = SExpr::Node(vec![
        SExpr::atom("fun"),
        SExpr::atom("N"),
        SExpr::atom("bool"),
    ]);
    let fun_ty = SExpr::Node(vec![SExpr::atom("fun"), SExpr::atom("N"), bool_ty]);
    let op = SExpr::Node(vec![SExpr::atom("c"), fun_ty, SExpr::atom("=")]);
    let app1 = SExpr::Node(vec![SExpr::atom("a"), op, lhs]);
    SExpr::Node(vec![SExpr::atom("a"), app1, rhs])
}

fn conjunction(lhs: SExpr, rhs: SExpr) -> SExpr {
    let bb = SExpr::Node(vec![
        SExpr::atom("fun"),
        SExpr::atom("bool"),
        SExpr::atom("bool"),
    ]);
    let fun_ty = SExpr::Node(vec![SExpr::atom("fun"), SExpr::atom("bool"), bb]);
    let op = SExpr::Node(vec![SExpr::atom("c"), fun_ty, SExpr::atom("/\\")]);
    let app1 = SExpr::Node(vec![SExpr::atom("a"), op, lhs]);
    SExpr::Node(vec![SExpr::atom("a"), app1, rhs])
}

/// `∀v. v = v` in the source encoding.
fn forall_refl(var_name: &str) -> SExpr {
    let n_bool = SExpr::Node(vec![
        SExpr::atom("fun"),
        SExpr::atom("N"),
        SExpr::atom("bool"),
    ]);
    let ty = SExpr::Node(vec![SExpr::atom("fun"), n_bool, SExpr::atom("bool")]);
    let forall = SExpr::Node(vec![SExpr::atom("c"), ty, SExpr::atom("!")]);
    let body = equation(var(var_name), var(var_name));
    let lam = SExpr::Node(vec![SExpr::atom("l"), var(var_name), body]);
    SExpr::Node(vec![SExpr::atom("a"), forall, lam])
}

fn wrap_word(word: &[usize], unary_names: &[String], core: SExpr) -> SExpr {
    let mut t = core;
    for &u in word.iter().rev() {
        t = unary(&unary_names[u], t);
    }
    t
}

// --- axiom layer ---------------------------------------------------------

struct Signature {
    constants: Vec<String>,
    unaries: Vec<String>,
    /// ground_table[u][c] = target constant index of u(c).
    ground_table: Vec<Vec<usize>>,
    /// ground_axiom[u][c] = db index of the axiom u(c_c) = target.
    ground_axiom: Vec<Vec<usize>>,
    /// One entry per router rule: (family triple, word, db index).
    routers: Vec<RouterRule>,
}

struct RouterRule {
    word: Vec<usize>,
    rotated: Vec<usize>,
    db_index: usize,
}

/// All surjective words of `len` over exactly the 3 symbols of `triple`.
fn surjective_words(triple: &[usize; 3], len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let total = 3usize.pow(len as u32);
    for code in 0..total {
        let mut word = Vec::with_capacity(len);
        let mut c = code;
        let mut used = [false; 3];
        for _ in 0..len {
            let d = c % 3;
            used[d] = true;
            word.push(triple[d]);
            c /= 3;
        }
        if used.iter().all(|&u| u) {
            out.push(word);
        }
    }
    out
}

pub fn generate(cfg: &ToyCorpusConfig) -> (TheoremDb, ProofLog) {
    assert!(cfg.n_theorems >= 20, "toy corpus needs at least 20 theorems");
    assert!(cfg.n_unaries >= 3, "router families need at least 3 unaries");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let engine = Engine::new(cfg.n_tactics);

    let constants: Vec<String> = (0..cfg.n_constants).map(|i| format!("k{i}")).collect();
    let unaries: Vec<String> = (0..cfg.n_unaries).map(|i| format!("u{i}")).collect();

    // Injective ground tables: one permutation per unary, avoiding fixed
    // points so that no ground rule is a no-op.
    let mut ground_table = Vec::new();
    for _ in 0..cfg.n_unaries {
        loop {
            let mut perm: Vec<usize> = (0..cfg.n_constants).collect();
            perm.shuffle(&mut rng);
            if perm.iter().enumerate().all(|(i, &p)| i != p) {
                ground_table.push(perm);
                break;
            }
        }
    }

    // Router families over distinct unary triples.
    let mut triples: Vec<[usize; 3]> = Vec::new();
    for a in 0..cfg.n_unaries {
        for b in a + 1..cfg.n_unaries {
            for c in b + 1..cfg.n_unaries {
                triples.push([a, b, c]);
            }
        }
    }
    triples.shuffle(&mut rng);
    triples.truncate(cfg.router_families);

    // Build all axiom statements first, then shuffle their order so that
    // family members spread across database indices.
    enum AxiomKind {
        Ground { u: usize, c: usize },
        Router { word: Vec<usize>, rotated: Vec<usize> },
    }
    let mut axioms: Vec<(AxiomKind, SExpr)> = Vec::new();
    for (u, table) in ground_table.iter().enumerate() {
        for (c, &target) in table.iter().enumerate() {
            let stmt = equation(
                unary(&unaries[u], con(&constants[c])),
                con(&constants[target]),
            );
            axioms.push((AxiomKind::Ground { u, c }, stmt));
        }
    }
    for triple in &triples {
        let mut words = surjective_words(triple, cfg.wrap_len);
        words.shuffle(&mut rng);
        words.truncate(cfg.words_per_family);
        for word in words {
            let mut rotated = word.clone();
            rotated.rotate_left(1);
            let lhs = binary_m(wrap_word(&word, &unaries, var("x")), var("y"));
            let rhs = binary_m(var("x"), wrap_word(&rotated, &unaries, var("y")));
            axioms.push((AxiomKind::Router { word, rotated }, equation(lhs, rhs)));
        }
    }
    axioms.shuffle(&mut rng);

    let mut db = TheoremDb::default();
    let mut ground_axiom = vec![vec![usize::MAX; cfg.n_constants]; cfg.n_unaries];
    let mut routers = Vec::new();
    for (kind, stmt) in axioms {
        let index = db.records.len();
        let name = match &kind {
            AxiomKind::Ground { u, c } => format!("ax_g_{}_{}", unaries[*u], constants[*c]),
            AxiomKind::Router { word, .. } => {
                let w: String = word.iter().map(|&u| unaries[u].clone()).collect();
                format!("ax_r_{w}_{index}")
            }
        };
        match kind {
            AxiomKind::Ground { u, c } => ground_axiom[u][c] = index,
            AxiomKind::Router { word, rotated } => routers.push(RouterRule {
                word,
                rotated,
                db_index: index,
            }),
        }
        db.records.push(TheoremRecord {
            index,
            name,
            statement: stmt,
            kind: ThmKind::Definition,
            split: Split::Train,
        });
    }

    let sig = Signature {
        constants,
        unaries,
        ground_table,
        ground_axiom,
        routers,
    };

    // Theorem split assignment: deterministic shuffle of slots.
    let n_valid = (cfg.n_theorems as f64 * cfg.valid_frac).round() as usize;
    let n_test = (cfg.n_theorems as f64 * cfg.test_frac).round() as usize;
    let mut splits = Vec::with_capacity(cfg.n_theorems);
    for i in 0..cfg.n_theorems {
        splits.push(if i < n_valid {
            Split::Valid
        } else if i < n_valid + n_test {
            Split::Test
        } else {
            Split::Train
        });
    }
    splits.shuffle(&mut rng);

    let mut log = ProofLog::default();
    let class_weights = [
        cfg.frac_router,
        cfg.frac_chain,
        cfg.frac_twin,
        cfg.frac_refl,
        cfg.frac_split,
        cfg.frac_corollary,
    ];
    let total_weight: f64 = class_weights.iter().sum();
    // Earlier theorems usable as rewrite premises: (index, statement sides).
    let mut citable: Vec<usize> = Vec::new();

    for t in 0..cfg.n_theorems {
        let mut pick = rng.gen_range(0.0..total_weight);
        let mut class = 0;
        for (k, &w) in class_weights.iter().enumerate() {
            if pick < w {
                class = k;
                break;
            }
            pick -= w;
        }
        let (name, statement, steps) = match class {
            0 if !sig.routers.is_empty() => gen_router(&sig, &mut rng, t),
            1 | 0 => gen_chain(&sig, &mut rng, t),
            2 => gen_twin(&sig, &mut rng, t),
            3 => gen_refl(&sig, &mut rng, t),
            4 => gen_split(&sig, &mut rng, t),
            _ if !citable.is_empty() => gen_corollary(&sig, &mut rng, t, &citable, &db),
            _ => gen_chain(&sig, &mut rng, t),
        };
        let index = db.records.len();
        db.records.push(TheoremRecord {
            index,
            name,
            statement: statement.clone(),
            kind: ThmKind::Theorem,
            split: splits[t],
        });
        let steps: Vec<ProofStep> = steps
            .into_iter()
            .map(|(goal, tactic_id, premises)| ProofStep {
                thm_index: index,
                tactic_id,
                premises,
                goal,
            })
            .collect();
        assert!(
            replay_closes(&engine, &db, &statement, &steps),
            "generated proof for `{}` does not replay",
            db.records[index].name
        );
        log.steps.extend(steps);

        // Equational, non-reflexive theorems can back later corollaries.
        use crate::prover::engine::{as_equation, strip_foralls};
        if let Some((l, r)) = as_equation(strip_foralls(&statement)) {
            if l != r {
                citable.push(index);
            }
        }
    }

    (db, log)
}

/// FIFO replay of logged steps; true when every goal closes.
fn replay_closes(engine: &Engine, db: &TheoremDb, statement: &SExpr, steps: &[ProofStep]) -> bool {
    let mut queue: std::collections::VecDeque<SExpr> = std::collections::VecDeque::new();
    queue.push_back(statement.clone());
    for step in steps {
        let Some(goal) = queue.pop_front() else {
            return false;
        };
        if goal != step.goal {
            return false;
        }
        let premises: Vec<&SExpr> = step.premises.iter().map(|&p| db.statement(p)).collect();
        match engine.apply_tactic(&goal, step.tactic_id, &premises) {
            Ok(TacticOutcome::Closed) => {}
            Ok(TacticOutcome::Subgoals(gs)) => queue.extend(gs),
            _ => return false,
        }
    }
    queue.is_empty()
}

type StepsOut = Vec<(SExpr, usize, Vec<usize>)>;

/// Ground-reduction walk of `word` wraps around constant `c0`, inner-out:
/// returns the final constant plus, per step, the not-yet-reduced term and
/// the cited ground axiom. Callers wrap the terms into their goal context.
fn ground_chain_walk(sig: &Signature, word: &[usize], c0: usize) -> (SExpr, Vec<(SExpr, usize)>) {
    let mut walk = Vec::new();
    let mut constant = c0;
    for depth in (0..word.len()).rev() {
        let u = word[depth];
        let current = wrap_word(&word[..=depth], &sig.unaries, con(&sig.constants[constant]));
        walk.push((current, sig.ground_axiom[u][constant]));
        constant = sig.ground_table[u][constant];
    }
    (con(&sig.constants[constant]), walk)
}

fn gen_router(sig: &Signature, rng: &mut ChaCha8Rng, t: usize) -> (String, SExpr, StepsOut) {
    let rule = &sig.routers[rng.gen_range(0..sig.routers.len())];
    let c_a = rng.gen_range(0..sig.constants.len());
    let c_b = rng.gen_range(0..sig.constants.len());

    let t0 = binary_m(
        wrap_word(&rule.word, &sig.unaries, con(&sig.constants[c_a])),
        con(&sig.constants[c_b]),
    );
    // After routing: m(c_a, rotated-wraps(c_b)); grounds then reduce the
    // rotated word inner-out to the final constant.
    let (final_const, walk) = ground_chain_walk(sig, &rule.rotated, c_b);
    let target = binary_m(con(&sig.constants[c_a]), final_const);
    let statement = equation(t0, target.clone());

    let mut steps = StepsOut::new();
    steps.push((statement.clone(), TACTIC_REWRITE, vec![rule.db_index]));
    for (current, axiom) in walk {
        let lhs = binary_m(con(&sig.constants[c_a]), current);
        steps.push((equation(lhs, target.clone()), TACTIC_REWRITE, vec![axiom]));
    }
    (format!("thm{t}_router"), statement, steps)
}

fn gen_chain(sig: &Signature, rng: &mut ChaCha8Rng, t: usize) -> (String, SExpr, StepsOut) {
    let len = rng.gen_range(1..=3);
    let word: Vec<usize> = (0..len)
        .map(|_| rng.gen_range(0..sig.unaries.len()))
        .collect();
    let c0 = rng.gen_range(0..sig.constants.len());
    // Optionally embed the chain as the left argument of m.
    let context_const = if rng.gen_bool(0.5) {
        Some(rng.gen_range(0..sig.constants.len()))
    } else {
        None
    };
    let embed = |core: &SExpr| -> SExpr {
        match context_const {
            Some(k) => binary_m(core.clone(), con(&sig.constants[k])),
            None => core.clone(),
        }
    };
    let (final_const, walk) = ground_chain_walk(sig, &word, c0);
    let t0 = embed(&wrap_word(&word, &sig.unaries, con(&sig.constants[c0])));
    let target = embed(&final_const);
    let statement = equation(t0, target.clone());
    let steps = walk
        .into_iter()
        .map(|(current, axiom)| {
            (
                equation(embed(&current), target.clone()),
                TACTIC_REWRITE,
                vec![axiom],
            )
        })
        .collect();
    (format!("thm{t}_chain"), statement, steps)
}

fn gen_twin(sig: &Signature, rng: &mut ChaCha8Rng, t: usize) -> (String, SExpr, StepsOut) {
    let depth = rng.gen_range(1..=2);
    let word: Vec<usize> = (0..depth)
        .map(|_| rng.gen_range(0..sig.unaries.len()))
        .collect();
    let c0 = rng.gen_range(0..sig.constants.len());

    // Twin structure m(w(c), w(c)); the all-occurrences rewrite reduces both
    // sides at once, inner-out.
    let mut steps = StepsOut::new();
    let mut constant = c0;
    let mut target_const = c0;
    for depth_at in (0..word.len()).rev() {
        target_const = sig.ground_table[word[depth_at]][target_const];
    }
    let target = binary_m(
        con(&sig.constants[target_const]),
        con(&sig.constants[target_const]),
    );
    for depth_at in (0..word.len()).rev() {
        let u = word[depth_at];
        let side = wrap_word(&word[..=depth_at], &sig.unaries, con(&sig.constants[constant]));
        let goal = equation(binary_m(side.clone(), side), target.clone());
        steps.push((goal, TACTIC_REWRITE_ALL, vec![sig.ground_axiom[u][constant]]));
        constant = sig.ground_table[u][constant];
    }
    let statement = steps[0].0.clone();
    (format!("thm{t}_twin"), statement, steps)
}

fn gen_refl(sig: &Signature, rng: &mut ChaCha8Rng, t: usize) -> (String, SExpr, StepsOut) {
    let statement = if rng.gen_bool(0.5) {
        forall_refl(["x", "y", "z"][rng.gen_range(0..3)])
    } else {
        let c = con(&sig.constants[rng.gen_range(0..sig.constants.len())]);
        let side = binary_m(c.clone(), c);
        equation(side.clone(), side)
    };
    let steps = vec![(statement.clone(), TACTIC_REFL, Vec::new())];
    (format!("thm{t}_refl"), statement, steps)
}

/// Wrap both sides of an earlier theorem's equation in a fresh context; one
/// rewrite citing that theorem closes the goal.
fn gen_corollary(
    sig: &Signature,
    rng: &mut ChaCha8Rng,
    t: usize,
    citable: &[usize],
    db: &TheoremDb,
) -> (String, SExpr, StepsOut) {
    use crate::prover::engine::{as_equation, strip_foralls};
    // Prefer recent (mostly uncited) theorems so premise usage spreads over
    // the database instead of concentrating on a few early statements.
    let cited = if rng.gen_bool(0.7) {
        let tail = citable.len().div_ceil(2);
        citable[citable.len() - tail + rng.gen_range(0..tail)]
    } else {
        citable[rng.gen_range(0..citable.len())]
    };
    let (lhs, rhs) = as_equation(strip_foralls(db.statement(cited)))
        .map(|(l, r)| (l.clone(), r.clone()))
        .expect("citable statements are equations");
    let context = rng.gen_range(0..3);
    let embed = |core: SExpr| -> SExpr {
        match context {
            0 => binary_m(core, con(&sig.constants[t % sig.constants.len()])),
            1 => binary_m(con(&sig.constants[t % sig.constants.len()]), core),
            _ => unary(&sig.unaries[t % sig.unaries.len()], core),
        }
    };
    let statement = equation(embed(lhs), embed(rhs));
    let steps = vec![(statement.clone(), TACTIC_REWRITE, vec![cited])];
    (format!("thm{t}_corollary"), statement, steps)
}

fn gen_split(sig: &Signature, rng: &mut ChaCha8Rng, t: usize) -> (String, SExpr, StepsOut) {
    let conjunct = |rng: &mut ChaCha8Rng| {
        let u = rng.gen_range(0..sig.unaries.len());
        let c = rng.gen_range(0..sig.constants.len());
        let target = sig.ground_table[u][c];
        let goal = equation(
            unary(&sig.unaries[u], con(&sig.constants[c])),
            con(&sig.constants[target]),
        );
        (goal, sig.ground_axiom[u][c])
    };
    let (goal_a, ax_a) = conjunct(rng);
    let (goal_b, ax_b) = conjunct(rng);
    let statement = conjunction(goal_a.clone(), goal_b.clone());
    let steps = vec![
        (statement.clone(), TACTIC_SPLIT, Vec::new()),
        (goal_a, TACTIC_REWRITE, vec![ax_a]),
        (goal_b, TACTIC_REWRITE, vec![ax_b]),
    ];
    (format!("thm{t}_split"), statement, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{extract_examples, parse_proof_log, parse_theorem_db, render_proof_log, render_theorem_db};
    use crate::graphrep::{self, RepresentationConfig, Sharing, Direction};

    #[test]
    fn same_seed_gives_identical_corpora() {
        let (db1, log1) = generate_toy_corpus(7, 30, 41);
        let (db2, log2) = generate_toy_corpus(7, 30, 41);
        assert_eq!(render_theorem_db(&db1), render_theorem_db(&db2));
        assert_eq!(render_proof_log(&log1), render_proof_log(&log2));
        let (db3, _) = generate_toy_corpus(8, 30, 41);
        assert_ne!(render_theorem_db(&db1), render_theorem_db(&db3));
    }

    #[test]
    fn generated_corpus_round_trips_through_files() {
        let (db, log) = generate_toy_corpus(3, 25, 41);
        let db2 = parse_theorem_db(&render_theorem_db(&db)).unwrap();
        assert_eq!(render_theorem_db(&db), render_theorem_db(&db2));
        let log2 = parse_proof_log(&render_proof_log(&log), &db2, 41).unwrap();
        assert_eq!(render_proof_log(&log), render_proof_log(&log2));
    }

    #[test]
    fn every_proof_replays() {
        // generate() itself asserts replay; this exercises it at a size that
        // hits every theorem class.
        let (db, log) = generate_toy_corpus(11, 120, 41);
        let theorems: Vec<usize> = db
            .records
            .iter()
            .filter(|r| r.kind == ThmKind::Theorem)
            .map(|r| r.index)
            .collect();
        assert_eq!(theorems.len(), 120);
        let engine = Engine::new(41);
        for &idx in &theorems {
            let steps: Vec<ProofStep> = log.steps_for(idx).cloned().collect();
            assert!(!steps.is_empty());
            assert!(replay_closes(&engine, &db, db.statement(idx), &steps));
        }
    }

    #[test]
    fn statements_graphify_under_all_representations() {
        let (db, _) = generate_toy_corpus(5, 30, 41);
        let configs = [
            RepresentationConfig { sharing: Sharing::None, ..Default::default() },
            RepresentationConfig { sharing: Sharing::Leaf, ..Default::default() },
            RepresentationConfig { sharing: Sharing::Subexpression, ..Default::default() },
            RepresentationConfig { variable_blinding: true, ..Default::default() },
            RepresentationConfig { random_edges: true, ..Default::default() },
            RepresentationConfig { direction: Direction::TopDown, ..Default::default() },
            RepresentationConfig { direction: Direction::BottomUp, ..Default::default() },
        ];
        for r in &db.records {
            for cfg in &configs {
                graphrep::represent(&r.statement, cfg).unwrap();
            }
        }
    }

    #[test]
    fn eligibility_and_example_extraction() {
        let (db, log) = generate_toy_corpus(13, 40, 41);
        for s in &log.steps {
            for &p in &s.premises {
                assert!(p < s.thm_index);
            }
        }
        let train = extract_examples(&db, &log, Split::Train);
        let valid = extract_examples(&db, &log, Split::Valid);
        assert!(!train.is_empty());
        assert!(!valid.is_empty());
        let total = db
            .records
            .iter()
            .filter(|r| r.kind == ThmKind::Theorem)
            .count();
        assert_eq!(total, 40);
    }
}
