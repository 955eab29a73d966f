//! The two proxy metrics tracked during training: exact-match tactic
//! accuracy and relative premise accuracy (true premise outscores a random
//! eligible one).

use super::TrainingExample;
use crate::model::{Model, ModelError, PremiseCache};
use crate::numerics::{Matrix, Scalar};
use rand::Rng;
use rayon::prelude::*;

/// Fraction of examples whose argmax tactic logit equals the logged tactic.
pub fn tactic_accuracy<T: Scalar>(
    model: &Model<T>,
    examples: &[TrainingExample],
) -> Result<f64, ModelError> {
    assert!(!examples.is_empty(), "tactic accuracy over no examples");
    let embeddings: Vec<Matrix<T>> = examples
        .par_iter()
        .map(|ex| model.embed_goal(&model.graphify(&ex.goal)?))
        .collect::<Result<_, _>>()?;
    let dim = model.cfg.gnn.embedding_dim();
    let stacked = Matrix::from_fn(examples.len(), dim, |i, j| embeddings[i].get(0, j));
    let logits = model.predict_tactic(&stacked);
    let mut correct = 0usize;
    for (i, ex) in examples.iter().enumerate() {
        let row = logits.row(i);
        let mut best = 0usize;
        for (k, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = k;
            }
        }
        if best == ex.tactic_id {
            correct += 1;
        }
    }
    Ok(correct as f64 / examples.len() as f64)
}

/// For each true premise of each example, sample `samples_per_positive`
/// random eligible premises (uniform over earlier database entries,
/// excluding the true premise itself) and count how often the true premise
/// scores strictly higher. Examples without premises are skipped.
pub fn relative_premise_accuracy<T: Scalar>(
    model: &Model<T>,
    examples: &[TrainingExample],
    cache: &PremiseCache<T>,
    rng: &mut impl Rng,
    samples_per_positive: usize,
) -> Result<f64, ModelError> {
    let mut wins = 0usize;
    let mut comparisons = 0usize;
    for ex in examples {
        if ex.premises.is_empty() || ex.thm_index < 2 {
            continue;
        }
        let goal = model.embed_goal(&model.graphify(&ex.goal)?)?;
        let scores = {
            let limit = ex.thm_index.min(cache.embeddings.rows());
            let eligible =
                Matrix::from_fn(limit, cache.embeddings.cols(), |i, j| cache.embeddings.get(i, j));
            model.score_premises(&goal, &eligible)
        };
        for &p in &ex.premises {
            for _ in 0..samples_per_positive {
                let q = loop {
                    let q = rng.gen_range(0..ex.thm_index);
                    if q != p {
                        break q;
                    }
                };
                comparisons += 1;
                if scores[p] > scores[q] {
                    wins += 1;
                }
            }
        }
    }
    assert!(comparisons > 0, "premise accuracy over no comparisons");
    Ok(wins as f64 / comparisons as f64)
}
