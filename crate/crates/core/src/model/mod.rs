//! The two-tower model: a goal encoder and a premise encoder (no shared
//! weights), a tactic classifier over the goal embedding, and a combiner
//! network scoring (goal, premise) pairs from `[g, p, g⊙p]`. Also owns
//! batch construction, the weighted total loss, premise ranking, and the
//! premise-embedding cache.

pub mod trainer;

use crate::corpus::{TheoremDb, TrainingExample};
use crate::gnn::{Gnn, GnnConfig, GnnError, Vocab};
use crate::graphrep::{represent, GraphError, RepresentationConfig, TermGraph};
use crate::numerics::{
    aucroc_loss, init_mlp, mlp_apply, sigmoid_xent_mean, softmax_xent, Activation, Grads,
    LossError, Matrix, MlpHandles, MlpSpec, ParamStore, Scalar, Tape, Value,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Number of fixed-order accumulation chunks for parallel per-graph
/// backward passes; independent of thread count so results are bit-stable.
const GRAD_CHUNKS: usize = 8;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("corpus too small: {0}")]
    CorpusTooSmall(String),
    #[error("non-finite loss; step aborted")]
    NonFiniteLoss,
    #[error("premise cache was built for checkpoint {cache:016x}, expected {expected:016x}")]
    StaleCache { cache: u64, expected: u64 },
    #[error("cache io: {0}")]
    CacheIo(#[from] std::io::Error),
    #[error("cache line {0}: {1}")]
    CacheFormat(usize, String),
    #[error("bad model meta: {0}")]
    Meta(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub tactic: f64,
    pub pairwise: f64,
    pub aucroc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            tactic: 1.0,
            pairwise: 0.2,
            aucroc: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub gnn: GnnConfig,
    pub n_tactics: usize,
    pub tactic_hidden: Vec<usize>,
    pub combiner_hidden: Vec<usize>,
    /// Dropout keep probability before dense layers outside the GNNs.
    pub dropout_keep_dense: f64,
    pub goals_per_batch: usize,
    pub negatives_per_goal: usize,
    pub loss_weights: LossWeights,
    pub representation: RepresentationConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            gnn: GnnConfig::default(),
            n_tactics: 41,
            tactic_hidden: vec![512, 256],
            combiner_hidden: vec![1024, 512],
            dropout_keep_dense: 0.7,
            goals_per_batch: 16,
            negatives_per_goal: 15,
            loss_weights: LossWeights::default(),
            representation: RepresentationConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn premises_per_batch(&self) -> usize {
        self.goals_per_batch * (1 + self.negatives_per_goal)
    }

    pub fn pairs_per_batch(&self) -> usize {
        self.goals_per_batch * self.premises_per_batch()
    }

    fn tactic_spec(&self) -> MlpSpec {
        MlpSpec::new(
            self.gnn.embedding_dim(),
            &self.tactic_hidden,
            self.n_tactics,
            Activation::Identity,
        )
    }

    fn combiner_spec(&self) -> MlpSpec {
        MlpSpec::new(
            3 * self.gnn.embedding_dim(),
            &self.combiner_hidden,
            1,
            Activation::Identity,
        )
    }
}

pub struct Model<T> {
    pub cfg: ModelConfig,
    pub vocab: Vocab,
    pub store: ParamStore<T>,
    pub gnn_goal: Gnn,
    pub gnn_premise: Gnn,
    pub tactic_head: MlpHandles,
    pub combiner: MlpHandles,
}

impl<T: Scalar> Model<T> {
    pub fn init(cfg: ModelConfig, vocab: Vocab, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let gnn_goal = Gnn::init(&mut store, "gnn1", cfg.gnn.clone(), &vocab, &mut rng);
        let gnn_premise = Gnn::init(&mut store, "gnn2", cfg.gnn.clone(), &vocab, &mut rng);
        let tactic_head = init_mlp(&mut store, "tactic_head", &cfg.tactic_spec(), &mut rng);
        let combiner = init_mlp(&mut store, "combiner", &cfg.combiner_spec(), &mut rng);
        Model {
            cfg,
            vocab,
            store,
            gnn_goal,
            gnn_premise,
            tactic_head,
            combiner,
        }
    }

    /// The same model with parameter values replaced (e.g. Polyak shadows).
    pub fn with_values(&self, values: &[Matrix<T>]) -> Model<T> {
        assert_eq!(values.len(), self.store.len());
        let mut store = self.store.clone();
        for (i, v) in values.iter().enumerate() {
            *store.value_mut(crate::numerics::ParamId(i)) = v.clone();
        }
        Model {
            cfg: self.cfg.clone(),
            vocab: self.vocab.clone(),
            store,
            gnn_goal: self.gnn_goal.clone(),
            gnn_premise: self.gnn_premise.clone(),
            tactic_head: self.tactic_head.clone(),
            combiner: self.combiner.clone(),
        }
    }

    pub fn graphify(&self, statement: &crate::sexpr::SExpr) -> Result<TermGraph, ModelError> {
        Ok(represent(statement, &self.cfg.representation)?)
    }

    /// Goal embedding in evaluation mode (no dropout), 1 × embedding_dim.
    pub fn embed_goal(&self, graph: &TermGraph) -> Result<Matrix<T>, ModelError> {
        Ok(self.gnn_goal.embed(&self.store, graph, &self.vocab)?)
    }

    /// Premise embedding in evaluation mode, 1 × embedding_dim.
    pub fn embed_premise(&self, graph: &TermGraph) -> Result<Matrix<T>, ModelError> {
        Ok(self.gnn_premise.embed(&self.store, graph, &self.vocab)?)
    }

    /// Tactic logits for a batch of goal embeddings (eval mode).
    pub fn predict_tactic(&self, goal_embeddings: &Matrix<T>) -> Matrix<T> {
        let mut tape = Tape::new(&self.store);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = tape.leaf(goal_embeddings.clone());
        let logits = mlp_apply(
            &mut tape,
            &self.cfg.tactic_spec(),
            &self.tactic_head,
            g,
            self.cfg.dropout_keep_dense,
            false,
            &mut rng,
        );
        tape.value(logits).clone()
    }

    /// Combiner scores of one goal embedding against many premise
    /// embeddings (eval mode). A single premise row gives the single-pair
    /// score, so batched and one-at-a-time scoring are the same code path.
    pub fn score_premises(&self, goal: &Matrix<T>, premises: &Matrix<T>) -> Vec<T> {
        assert_eq!(goal.rows(), 1);
        assert_eq!(goal.cols(), premises.cols());
        let n = premises.rows();
        let mut tape = Tape::new(&self.store);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g_rows = Matrix::from_fn(n, goal.cols(), |_, j| goal.get(0, j));
        let gp = Matrix::from_fn(n, goal.cols(), |i, j| goal.get(0, j) * premises.get(i, j));
        let g = tape.leaf(g_rows);
        let p = tape.leaf(premises.clone());
        let gp = tape.leaf(gp);
        let input = tape.concat_cols(&[g, p, gp]);
        let logits = mlp_apply(
            &mut tape,
            &self.cfg.combiner_spec(),
            &self.combiner,
            input,
            self.cfg.dropout_keep_dense,
            false,
            &mut rng,
        );
        tape.value(logits).data().to_vec()
    }

    pub fn score_premise(&self, goal: &Matrix<T>, premise: &Matrix<T>) -> T {
        self.score_premises(goal, premise)[0]
    }

    /// Rank eligible premises (database index < `eligible_limit`) by
    /// combiner score, descending; ties break toward the lower index.
    /// Returns at most `k` entries, or all eligible when k is larger.
    pub fn rank_premises(
        &self,
        goal_embedding: &Matrix<T>,
        cache: &PremiseCache<T>,
        eligible_limit: usize,
        k: usize,
    ) -> Vec<(usize, T)> {
        let limit = eligible_limit.min(cache.embeddings.rows());
        if limit == 0 {
            return Vec::new();
        }
        let eligible =
            Matrix::from_fn(limit, cache.embeddings.cols(), |i, j| cache.embeddings.get(i, j));
        let scores = self.score_premises(goal_embedding, &eligible);
        let mut ranked: Vec<(usize, T)> = scores.into_iter().enumerate().collect();
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("finite scores")
                .then(a.0.cmp(&b.0))
        });
        ranked.truncate(k);
        ranked
    }
}

// --- training batches ----------------------------------------------------

/// Positive pairs plus sampled and reused negatives over a goal × premise
/// grid. Premise slot i < goals is the positive premise of goal i; the
/// following negatives_per_goal-sized blocks are each goal's own negatives.
#[derive(Debug, Clone)]
pub struct TrainingBatch {
    pub goal_graphs: Vec<TermGraph>,
    pub premise_graphs: Vec<TermGraph>,
    /// Database index of each premise slot (positives first, then each
    /// goal's owned negatives).
    pub premise_db_indices: Vec<usize>,
    pub tactic_labels: Vec<usize>,
    /// Flattened goal-major grid labels: pair (i, j) at index i·premises + j.
    pub pair_positive: Vec<bool>,
    pub pair_goal: Vec<u32>,
    pub pair_premise: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchAudit {
    pub positives: usize,
    pub owned_negatives: usize,
    pub reused_negatives: usize,
}

impl TrainingBatch {
    pub fn audit(&self) -> BatchAudit {
        let goals = self.goal_graphs.len();
        let premises = self.premise_graphs.len();
        let mut positives = 0;
        let mut owned = 0;
        let mut reused = 0;
        for i in 0..goals {
            for j in 0..premises {
                if self.pair_positive[i * premises + j] {
                    positives += 1;
                } else if j >= goals && (j - goals) / (premises / goals - 1) == i {
                    owned += 1;
                } else {
                    reused += 1;
                }
            }
        }
        BatchAudit {
            positives,
            owned_negatives: owned,
            reused_negatives: reused,
        }
    }
}

/// Sample a training batch: `goals_per_batch` positive (goal, premise)
/// pairs from premised steps, `negatives_per_goal` owned negatives per goal
/// drawn without replacement from the positive pool (never the goal's own
/// positive), and every premise reused as a negative for the other goals.
pub fn build_batch<T: Scalar>(
    model: &Model<T>,
    examples: &[TrainingExample],
    db: &TheoremDb,
    pool: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<TrainingBatch, ModelError> {
    let cfg = &model.cfg;
    let premised: Vec<&TrainingExample> =
        examples.iter().filter(|e| !e.premises.is_empty()).collect();
    if premised.is_empty() {
        return Err(ModelError::CorpusTooSmall(
            "no training step cites a premise".to_string(),
        ));
    }
    if pool.len() < cfg.negatives_per_goal + 1 {
        return Err(ModelError::CorpusTooSmall(format!(
            "negative pool has {} premises, need at least {}",
            pool.len(),
            cfg.negatives_per_goal + 1
        )));
    }

    let mut goal_graphs = Vec::with_capacity(cfg.goals_per_batch);
    let mut tactic_labels = Vec::with_capacity(cfg.goals_per_batch);
    let mut positive_idx = Vec::with_capacity(cfg.goals_per_batch);
    let mut owned_negatives: Vec<Vec<usize>> = Vec::with_capacity(cfg.goals_per_batch);
    for _ in 0..cfg.goals_per_batch {
        let ex = premised[rng.gen_range(0..premised.len())];
        let positive = ex.premises[rng.gen_range(0..ex.premises.len())];
        goal_graphs.push(model.graphify(&ex.goal)?);
        tactic_labels.push(ex.tactic_id);
        positive_idx.push(positive);

        // Without-replacement draw from the pool, excluding the positive.
        let mut candidates: Vec<usize> = pool.iter().copied().filter(|&p| p != positive).collect();
        let mut negs = Vec::with_capacity(cfg.negatives_per_goal);
        for _ in 0..cfg.negatives_per_goal {
            let at = rng.gen_range(0..candidates.len());
            negs.push(candidates.swap_remove(at));
        }
        owned_negatives.push(negs);
    }

    let mut premise_db_indices = positive_idx.clone();
    for negs in &owned_negatives {
        premise_db_indices.extend(negs.iter().copied());
    }
    let premise_graphs = premise_db_indices
        .iter()
        .map(|&p| model.graphify(db.statement(p)))
        .collect::<Result<Vec<_>, _>>()?;

    let goals = cfg.goals_per_batch;
    let premises = cfg.premises_per_batch();
    let mut pair_positive = Vec::with_capacity(goals * premises);
    let mut pair_goal = Vec::with_capacity(goals * premises);
    let mut pair_premise = Vec::with_capacity(goals * premises);
    for i in 0..goals {
        for j in 0..premises {
            pair_positive.push(j == i);
            pair_goal.push(i as u32);
            pair_premise.push(j as u32);
        }
    }

    Ok(TrainingBatch {
        goal_graphs,
        premise_graphs,
        premise_db_indices,
        tactic_labels,
        pair_positive,
        pair_goal,
        pair_premise,
    })
}

// --- full loss -----------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub tactic: f64,
    pub pairwise: f64,
    pub aucroc: f64,
}

fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    // splitmix64 over the mixed key; cheap and well-distributed.
    let mut z = master
        .wrapping_add(tag.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(index.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Forward + backward over a whole batch. Gradients cover every parameter,
/// including token embedding vectors. `rng_seed` drives all dropout; the
/// computation is deterministic given (params, batch, seed).
pub fn compute_loss<T: Scalar>(
    model: &Model<T>,
    batch: &TrainingBatch,
    training: bool,
    rng_seed: u64,
) -> Result<(LossParts, Grads<T>), ModelError> {
    let cfg = &model.cfg;
    let emb_dim = cfg.gnn.embedding_dim();
    let n_goals = batch.goal_graphs.len();
    let n_premises = batch.premise_graphs.len();

    // Per-graph encode + pool, in parallel; tapes stay alive for backward.
    let goal_fwd: Vec<(Tape<'_, T>, Value)> = batch
        .goal_graphs
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            forward_graph(model, &model.gnn_goal, g, training, derive_seed(rng_seed, 1, i as u64))
        })
        .collect::<Result<_, _>>()?;
    let prem_fwd: Vec<(Tape<'_, T>, Value)> = batch
        .premise_graphs
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            forward_graph(
                model,
                &model.gnn_premise,
                g,
                training,
                derive_seed(rng_seed, 2, i as u64),
            )
        })
        .collect::<Result<_, _>>()?;

    let goal_embeddings = Matrix::from_fn(n_goals, emb_dim, |i, j| {
        goal_fwd[i].0.value(goal_fwd[i].1).get(0, j)
    });
    let prem_embeddings = Matrix::from_fn(n_premises, emb_dim, |i, j| {
        prem_fwd[i].0.value(prem_fwd[i].1).get(0, j)
    });

    // Head tape over the embeddings: tactic logits and pair logits.
    let mut head = Tape::new(&model.store);
    let mut head_rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, 3, 0));
    let g_leaf = head.leaf(goal_embeddings);
    let p_leaf = head.leaf(prem_embeddings);
    let tactic_logits = mlp_apply(
        &mut head,
        &cfg.tactic_spec(),
        &model.tactic_head,
        g_leaf,
        cfg.dropout_keep_dense,
        training,
        &mut head_rng,
    );
    let g_rows = head.gather_rows(g_leaf, &batch.pair_goal);
    let p_rows = head.gather_rows(p_leaf, &batch.pair_premise);
    let gp_rows = head.mul_elem(g_rows, p_rows);
    let pair_input = head.concat_cols(&[g_rows, p_rows, gp_rows]);
    let pair_logits = mlp_apply(
        &mut head,
        &cfg.combiner_spec(),
        &model.combiner,
        pair_input,
        cfg.dropout_keep_dense,
        training,
        &mut head_rng,
    );

    // Losses and their gradients with respect to the logits.
    let (tactic_loss, tactic_grad) = softmax_xent(head.value(tactic_logits), &batch.tactic_labels)?;
    let (pair_loss, pair_grad) =
        sigmoid_xent_mean(head.value(pair_logits), &batch.pair_positive)?;
    let logits_flat: Vec<T> = head.value(pair_logits).data().to_vec();
    let (auc_loss, auc_grad) = aucroc_loss(&logits_flat, &batch.pair_positive, &batch.pair_goal)?;

    let w = cfg.loss_weights;
    let parts = LossParts {
        tactic: tactic_loss.to_f64(),
        pairwise: pair_loss.to_f64(),
        aucroc: auc_loss.to_f64(),
        total: w.tactic * tactic_loss.to_f64()
            + w.pairwise * pair_loss.to_f64()
            + w.aucroc * auc_loss.to_f64(),
    };
    if !parts.total.is_finite() {
        return Err(ModelError::NonFiniteLoss);
    }

    let mut tactic_seed = tactic_grad;
    tactic_seed.scale(T::from_f64(w.tactic));
    let mut pair_seed = Matrix::zeros(batch.pair_positive.len(), 1);
    for (k, slot) in pair_seed.data_mut().iter_mut().enumerate() {
        *slot = T::from_f64(w.pairwise) * pair_grad.data()[k]
            + T::from_f64(w.aucroc) * auc_grad[k];
    }

    let mut grads = Grads::zeros_like(&model.store);
    let node_grads = head.backward(
        &[(tactic_logits, tactic_seed), (pair_logits, pair_seed)],
        &mut grads,
    );
    let d_goal = node_grads
        .get(g_leaf)
        .cloned()
        .unwrap_or_else(|| Matrix::zeros(n_goals, emb_dim));
    let d_prem = node_grads
        .get(p_leaf)
        .cloned()
        .unwrap_or_else(|| Matrix::zeros(n_premises, emb_dim));

    // Per-graph backward in fixed-order chunks; chunk count is constant so
    // float accumulation order never depends on the thread pool.
    let mut jobs: Vec<(Tape<'_, T>, Value, Matrix<T>)> =
        Vec::with_capacity(n_goals + n_premises);
    for (i, (tape, pooled)) in goal_fwd.into_iter().enumerate() {
        let seed = Matrix::from_fn(1, emb_dim, |_, j| d_goal.get(i, j));
        jobs.push((tape, pooled, seed));
    }
    for (i, (tape, pooled)) in prem_fwd.into_iter().enumerate() {
        let seed = Matrix::from_fn(1, emb_dim, |_, j| d_prem.get(i, j));
        jobs.push((tape, pooled, seed));
    }
    let chunk_size = jobs.len().div_ceil(GRAD_CHUNKS);
    let mut chunks: Vec<Vec<(Tape<'_, T>, Value, Matrix<T>)>> = Vec::new();
    let mut jobs = jobs.into_iter();
    loop {
        let chunk: Vec<_> = jobs.by_ref().take(chunk_size).collect();
        if chunk.is_empty() {
            break;
        }
        chunks.push(chunk);
    }
    let chunk_grads: Vec<Grads<T>> = chunks
        .into_par_iter()
        .map(|chunk| {
            let mut acc = Grads::zeros_like(&model.store);
            for (tape, pooled, seed) in chunk {
                tape.backward(&[(pooled, seed)], &mut acc);
            }
            acc
        })
        .collect();
    for cg in chunk_grads {
        grads.merge(cg);
    }

    Ok((parts, grads))
}

fn forward_graph<'s, T: Scalar>(
    model: &'s Model<T>,
    tower: &Gnn,
    graph: &TermGraph,
    training: bool,
    seed: u64,
) -> Result<(Tape<'s, T>, Value), ModelError> {
    let mut tape = Tape::new(&model.store);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = tower.encode(&mut tape, graph, &model.vocab, training, &mut rng)?;
    let pooled = tower.pool(&mut tape, h, training, &mut rng)?;
    Ok((tape, pooled))
}

// --- premise-embedding cache ----------------------------------------------

/// Premise-tower embeddings of every database statement, tied to the
/// checkpoint they were computed from.
#[derive(Debug, Clone)]
pub struct PremiseCache<T> {
    pub checkpoint_id: u64,
    pub embeddings: Matrix<T>,
}

pub fn build_premise_cache<T: Scalar>(
    model: &Model<T>,
    db: &TheoremDb,
    checkpoint_id: u64,
) -> Result<PremiseCache<T>, ModelError> {
    let rows: Vec<Matrix<T>> = db
        .records
        .par_iter()
        .map(|r| {
            let graph = model.graphify(&r.statement)?;
            model.embed_premise(&graph)
        })
        .collect::<Result<_, _>>()?;
    let dim = model.cfg.gnn.embedding_dim();
    let embeddings = Matrix::from_fn(rows.len(), dim, |i, j| rows[i].get(0, j));
    Ok(PremiseCache {
        checkpoint_id,
        embeddings,
    })
}

const CACHE_MAGIC: &str = "graphtactic-premise-cache v1";

pub fn render_premise_cache<T: Scalar>(cache: &PremiseCache<T>) -> String {
    let mut out = String::new();
    out.push_str(CACHE_MAGIC);
    out.push('\n');
    let _ = writeln!(out, "checkpoint {:016x}", cache.checkpoint_id);
    let _ = writeln!(out, "dtype {}", T::DTYPE);
    let _ = writeln!(out, "dim {}", cache.embeddings.cols());
    let _ = writeln!(out, "count {}", cache.embeddings.rows());
    for i in 0..cache.embeddings.rows() {
        let _ = write!(out, "premise {i} ");
        for v in cache.embeddings.row(i) {
            let _ = write!(out, "{:0width$x}", v.to_bits_u64(), width = T::HEX_WIDTH);
        }
        out.push('\n');
    }
    out
}

pub fn parse_premise_cache<T: Scalar>(
    text: &str,
    expected_checkpoint: u64,
) -> Result<PremiseCache<T>, ModelError> {
    let mut lines = text.lines().enumerate();
    let bad = |n: usize, m: &str| ModelError::CacheFormat(n + 1, m.to_string());
    match lines.next() {
        Some((_, CACHE_MAGIC)) => {}
        _ => return Err(bad(0, "bad magic")),
    }
    let mut checkpoint_id = 0u64;
    let mut dim = 0usize;
    let mut count = 0usize;
    for _ in 0..4 {
        let Some((n, line)) = lines.next() else {
            return Err(bad(0, "truncated header"));
        };
        if let Some(v) = line.strip_prefix("checkpoint ") {
            checkpoint_id =
                u64::from_str_radix(v, 16).map_err(|e| bad(n, &e.to_string()))?;
        } else if let Some(v) = line.strip_prefix("dtype ") {
            if v != T::DTYPE.to_string() {
                return Err(bad(n, &format!("dtype {v}, expected {}", T::DTYPE)));
            }
        } else if let Some(v) = line.strip_prefix("dim ") {
            dim = v.parse().map_err(|_| bad(n, "bad dim"))?;
        } else if let Some(v) = line.strip_prefix("count ") {
            count = v.parse().map_err(|_| bad(n, "bad count"))?;
        } else {
            return Err(bad(n, "unexpected header line"));
        }
    }
    if checkpoint_id != expected_checkpoint {
        return Err(ModelError::StaleCache {
            cache: checkpoint_id,
            expected: expected_checkpoint,
        });
    }
    let mut embeddings = Matrix::zeros(count, dim);
    for i in 0..count {
        let Some((n, line)) = lines.next() else {
            return Err(bad(0, "truncated cache body"));
        };
        let rest = line
            .strip_prefix(&format!("premise {i} "))
            .ok_or_else(|| bad(n, "bad premise line"))?;
        let w = T::HEX_WIDTH;
        if rest.len() != dim * w {
            return Err(bad(n, "bad premise row length"));
        }
        for j in 0..dim {
            let bits = u64::from_str_radix(&rest[j * w..(j + 1) * w], 16)
                .map_err(|e| bad(n, &e.to_string()))?;
            embeddings.set(i, j, T::from_bits_u64(bits));
        }
    }
    Ok(PremiseCache {
        checkpoint_id,
        embeddings,
    })
}

pub fn save_premise_cache<T: Scalar>(
    path: &Path,
    cache: &PremiseCache<T>,
) -> Result<(), ModelError> {
    Ok(std::fs::write(path, render_premise_cache(cache))?)
}

pub fn load_premise_cache<T: Scalar>(
    path: &Path,
    expected_checkpoint: u64,
) -> Result<PremiseCache<T>, ModelError> {
    parse_premise_cache(&std::fs::read_to_string(path)?, expected_checkpoint)
}

// --- model (de)serialization metadata --------------------------------------

impl ModelConfig {
    /// Single-line rendering for checkpoint metadata.
    pub fn to_meta(&self) -> String {
        let join = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let rep = &self.representation;
        format!(
            "hops={};node_dim={};mlp_hidden={};pool_dims={};dropout_gnn={:?};n_tactics={};tactic_hidden={};combiner_hidden={};dropout_dense={:?};goals={};negs={};w_tactic={:?};w_pair={:?};w_auc={:?};sharing={:?};blind={};random={};direction={:?};rep_seed={}",
            self.gnn.hops,
            self.gnn.node_dim,
            join(&self.gnn.mlp_hidden),
            join(&self.gnn.pool_dims),
            self.gnn.dropout_keep,
            self.n_tactics,
            join(&self.tactic_hidden),
            join(&self.combiner_hidden),
            self.dropout_keep_dense,
            self.goals_per_batch,
            self.negatives_per_goal,
            self.loss_weights.tactic,
            self.loss_weights.pairwise,
            self.loss_weights.aucroc,
            rep.sharing,
            rep.variable_blinding,
            rep.random_edges,
            rep.direction,
            rep.random_seed,
        )
    }

    pub fn from_meta(meta: &str) -> Result<Self, ModelError> {
        use crate::graphrep::{Direction, Sharing};
        let mut cfg = ModelConfig::default();
        let err = |m: &str| ModelError::Meta(m.to_string());
        let parse_list = |v: &str| -> Vec<usize> {
            if v.is_empty() {
                Vec::new()
            } else {
                v.split(',').filter_map(|x| x.parse().ok()).collect()
            }
        };
        for part in meta.split(';') {
            let (k, v) = part.split_once('=').ok_or_else(|| err("missing ="))?;
            match k {
                "hops" => cfg.gnn.hops = v.parse().map_err(|_| err("hops"))?,
                "node_dim" => cfg.gnn.node_dim = v.parse().map_err(|_| err("node_dim"))?,
                "mlp_hidden" => cfg.gnn.mlp_hidden = parse_list(v),
                "pool_dims" => cfg.gnn.pool_dims = parse_list(v),
                "dropout_gnn" => cfg.gnn.dropout_keep = v.parse().map_err(|_| err("dropout"))?,
                "n_tactics" => cfg.n_tactics = v.parse().map_err(|_| err("n_tactics"))?,
                "tactic_hidden" => cfg.tactic_hidden = parse_list(v),
                "combiner_hidden" => cfg.combiner_hidden = parse_list(v),
                "dropout_dense" => {
                    cfg.dropout_keep_dense = v.parse().map_err(|_| err("dropout_dense"))?
                }
                "goals" => cfg.goals_per_batch = v.parse().map_err(|_| err("goals"))?,
                "negs" => cfg.negatives_per_goal = v.parse().map_err(|_| err("negs"))?,
                "w_tactic" => cfg.loss_weights.tactic = v.parse().map_err(|_| err("w_tactic"))?,
                "w_pair" => cfg.loss_weights.pairwise = v.parse().map_err(|_| err("w_pair"))?,
                "w_auc" => cfg.loss_weights.aucroc = v.parse().map_err(|_| err("w_auc"))?,
                "sharing" => {
                    cfg.representation.sharing = match v {
                        "None" => Sharing::None,
                        "Leaf" => Sharing::Leaf,
                        "Subexpression" => Sharing::Subexpression,
                        _ => return Err(err("sharing")),
                    }
                }
                "blind" => {
                    cfg.representation.variable_blinding = v.parse().map_err(|_| err("blind"))?
                }
                "random" => {
                    cfg.representation.random_edges = v.parse().map_err(|_| err("random"))?
                }
                "direction" => {
                    cfg.representation.direction = match v {
                        "Both" => Direction::Both,
                        "TopDown" => Direction::TopDown,
                        "BottomUp" => Direction::BottomUp,
                        _ => return Err(err("direction")),
                    }
                }
                "rep_seed" => {
                    cfg.representation.random_seed = v.parse().map_err(|_| err("rep_seed"))?
                }
                _ => return Err(err(&format!("unknown key {k}"))),
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests;
