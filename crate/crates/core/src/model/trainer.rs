//! The training loop: batch sampling, loss/gradient computation, Adam with
//! Polyak averaging, periodic proxy metrics on a held-out slice, and
//! checkpoint selection by the summed proxy score.

use super::{build_batch, build_premise_cache, compute_loss, Model, ModelConfig, ModelError};
use crate::corpus::metrics::{relative_premise_accuracy, tactic_accuracy};
use crate::corpus::{
    extract_examples, negative_pool, ProofLog, Split, TheoremDb, ThmKind, TrainingExample,
};
use crate::gnn::Vocab;
use crate::numerics::{AdamConfig, Optimizer, ParamStore, Scalar, StepOutcome};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub adam: AdamConfig,
    pub steps: usize,
    pub eval_every: usize,
    pub seed: u64,
    /// Fraction of training theorems carved out for checkpoint selection;
    /// 0 evaluates the proxies on the training examples themselves.
    pub holdout_frac: f64,
    /// Stop early once both proxy metrics reach these thresholds.
    pub early_stop: Option<(f64, f64)>,
    /// Cap on examples per metric evaluation (deterministic prefix).
    pub metric_examples_cap: usize,
    /// Random-premise draws per true premise in the premise metric.
    pub metric_samples_per_positive: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            adam: AdamConfig::default(),
            steps: 3000,
            eval_every: 25,
            seed: 0,
            holdout_frac: 0.05,
            early_stop: None,
            metric_examples_cap: 512,
            metric_samples_per_positive: 1,
        }
    }
}

/// Live parameters plus optimizer state captured at the best proxy score.
pub struct SelectedCheckpoint<T> {
    pub step: u64,
    pub score: f64,
    pub store: ParamStore<T>,
    pub optimizer: Optimizer<T>,
}

pub struct TrainResult<T> {
    pub model: Model<T>,
    pub optimizer: Optimizer<T>,
    pub best: Option<SelectedCheckpoint<T>>,
    /// Every emitted log line, in order.
    pub log: Vec<String>,
}

/// Train a fresh model on the train split. Deterministic given the config:
/// identical seeds produce identical metric logs.
pub fn train<T: Scalar>(
    cfg: &TrainConfig,
    db: &TheoremDb,
    proof_log: &ProofLog,
    mut on_line: impl FnMut(&str),
) -> Result<TrainResult<T>, ModelError> {
    let mut vocab_tokens = db.all_tokens();
    let mut seen: std::collections::HashSet<String> = vocab_tokens.iter().cloned().collect();
    for step in &proof_log.steps {
        for tok in goal_tokens(&step.goal) {
            if seen.insert(tok.clone()) {
                vocab_tokens.push(tok);
            }
        }
    }
    let vocab = Vocab::build(vocab_tokens.iter().map(|s| s.as_str()));

    // Carve the selection holdout at theorem granularity.
    let train_thms: Vec<usize> = db
        .records
        .iter()
        .filter(|r| r.split == Split::Train && r.kind == ThmKind::Theorem)
        .map(|r| r.index)
        .collect();
    let mut shuffled = train_thms.clone();
    let mut split_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5911));
    shuffled.shuffle(&mut split_rng);
    let n_holdout = ((train_thms.len() as f64) * cfg.holdout_frac).round() as usize;
    let holdout: std::collections::HashSet<usize> =
        shuffled.into_iter().take(n_holdout).collect();

    let all_train = extract_examples(db, proof_log, Split::Train);
    let (holdout_examples, train_examples): (Vec<TrainingExample>, Vec<TrainingExample>) =
        all_train
            .into_iter()
            .partition(|e| holdout.contains(&e.thm_index));
    let eval_examples: &[TrainingExample] = if holdout_examples.is_empty() {
        &train_examples
    } else {
        &holdout_examples
    };
    if train_examples.is_empty() {
        return Err(ModelError::CorpusTooSmall("no training examples".into()));
    }
    let pool = negative_pool(&train_examples);

    let mut model: Model<T> = Model::init(cfg.model.clone(), vocab, cfg.seed);
    let mut optimizer = Optimizer::new(cfg.adam, &model.store);
    let mut batch_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x8a7c));
    let mut metric_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x3e7));

    let mut log = Vec::new();
    let mut best: Option<SelectedCheckpoint<T>> = None;
    let mut emit = |line: String, log: &mut Vec<String>| {
        on_line(&line);
        log.push(line);
    };

    emit(
        format!(
            "config seed {} steps {} eval_every {} holdout {:?} dtype {} model {}",
            cfg.seed,
            cfg.steps,
            cfg.eval_every,
            cfg.holdout_frac,
            T::DTYPE,
            cfg.model.to_meta()
        ),
        &mut log,
    );

    for step in 1..=cfg.steps {
        let batch = build_batch(&model, &train_examples, db, &pool, &mut batch_rng)?;
        let (parts, grads) = compute_loss(&model, &batch, true, cfg.seed.wrapping_add(step as u64))?;
        match optimizer.apply(&mut model.store, &grads) {
            StepOutcome::Applied => {
                emit(
                    format!(
                        "step {step} loss {:?} tactic {:?} pairwise {:?} aucroc {:?} lr {:?}",
                        parts.total,
                        parts.tactic,
                        parts.pairwise,
                        parts.aucroc,
                        optimizer.effective_lr()
                    ),
                    &mut log,
                );
            }
            StepOutcome::SkippedNonFinite => {
                emit(format!("step {step} skipped non-finite gradients"), &mut log);
                continue;
            }
        }

        if step % cfg.eval_every == 0 || step == cfg.steps {
            // Proxy metrics track the live parameters: the Polyak shadow is
            // an evaluation-time averaging whose window (1/(1-rate) steps)
            // usually exceeds a desk-scale run.
            let sample = &eval_examples[..eval_examples.len().min(cfg.metric_examples_cap)];
            let cache = build_premise_cache(&model, db, 0)?;
            let ta = tactic_accuracy(&model, sample)?;
            let pa = relative_premise_accuracy(
                &model,
                sample,
                &cache,
                &mut metric_rng,
                cfg.metric_samples_per_positive,
            )?;
            let score = ta + pa;
            emit(
                format!("eval step {step} tactic_acc {ta:?} premise_acc {pa:?} score {score:?}"),
                &mut log,
            );
            if best.as_ref().map_or(true, |b| score > b.score) {
                best = Some(SelectedCheckpoint {
                    step: optimizer.step(),
                    score,
                    store: model.store.clone(),
                    optimizer: optimizer.clone(),
                });
            }
            if let Some((ta_min, pa_min)) = cfg.early_stop {
                if ta >= ta_min && pa >= pa_min {
                    emit(format!("early stop at step {step}"), &mut log);
                    break;
                }
            }
        }
    }

    Ok(TrainResult {
        model,
        optimizer,
        best,
        log,
    })
}

fn goal_tokens(goal: &crate::sexpr::SExpr) -> Vec<String> {
    let mut out = Vec::new();
    let mut work = vec![goal];
    while let Some(e) = work.pop() {
        match e {
            crate::sexpr::SExpr::Atom(t) => out.push(t.clone()),
            crate::sexpr::SExpr::Node(children) => work.extend(children.iter()),
        }
    }
    out
}
