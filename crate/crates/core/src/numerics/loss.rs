//! The three training losses: softmax cross-entropy over tactic logits,
//! sigmoid cross-entropy over pairwise scores, and the pairwise ranking loss
//! that pushes every positive premise logit above every negative one.

use super::matrix::{Matrix, Scalar};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LossError {
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("ranking loss needs at least one positive and one negative")]
    DegenerateRanking,
    #[error("labels/logits length mismatch")]
    LengthMismatch,
}

/// Numerically stable ln(1 + e^(-x)).
fn softplus_neg<T: Scalar>(x: T) -> T {
    if x > T::ZERO {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::ZERO {
        T::ONE / (T::ONE + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::ONE + e)
    }
}

/// Mean cross-entropy of row-wise softmax against integer labels.
/// Returns the loss and its gradient with respect to the logits.
pub fn softmax_xent<T: Scalar>(
    logits: &Matrix<T>,
    labels: &[usize],
) -> Result<(T, Matrix<T>), LossError> {
    if labels.len() != logits.rows() {
        return Err(LossError::LengthMismatch);
    }
    let classes = logits.cols();
    let n = logits.rows();
    let inv_n = T::from_f64(1.0 / n as f64);
    let mut grad = Matrix::zeros(n, classes);
    let mut total = T::ZERO;
    for (i, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(LossError::LabelOutOfRange { label, classes });
        }
        let row = logits.row(i);
        let max = row.iter().fold(row[0], |m, &v| m.maximum(v));
        let mut denom = T::ZERO;
        for &v in row {
            denom += (v - max).exp();
        }
        let log_denom = denom.ln();
        total += log_denom - (row[label] - max);
        let g = grad.row_mut(i);
        for (j, &v) in row.iter().enumerate() {
            let p = (v - max).exp() / denom;
            g[j] = p * inv_n;
        }
        g[label] = g[label] - inv_n;
    }
    Ok((total * inv_n, grad))
}

/// Sigmoid cross-entropy of a single logit against a {0,1} label.
/// Stable for |logit| up to at least 1e4.
pub fn sigmoid_xent<T: Scalar>(logit: T, label: bool) -> (T, T) {
    let y = if label { T::ONE } else { T::ZERO };
    // max(l,0) - l*y + ln(1 + e^{-|l|})
    let loss = logit.maximum(T::ZERO) - logit * y + (-logit.abs()).exp().ln_1p();
    let grad = sigmoid(logit) - y;
    (loss, grad)
}

/// Mean sigmoid cross-entropy over a column of logits.
pub fn sigmoid_xent_mean<T: Scalar>(
    logits: &Matrix<T>,
    labels: &[bool],
) -> Result<(T, Matrix<T>), LossError> {
    if labels.len() != logits.data().len() {
        return Err(LossError::LengthMismatch);
    }
    let n = logits.data().len();
    let inv_n = T::from_f64(1.0 / n as f64);
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut total = T::ZERO;
    for (k, (&l, &y)) in logits.data().iter().zip(labels).enumerate() {
        let (loss, g) = sigmoid_xent(l, y);
        total += loss;
        grad.data_mut()[k] = g * inv_n;
    }
    Ok((total * inv_n, grad))
}

/// Pairwise ranking loss over a batch of premise logits:
/// sum over (positive i, negative j) of w·ln(1 + e^{-(logit_i - logit_j)}),
/// with w = 2 when both pairs score premises for the same goal.
///
/// Runs the O(P·N) double loop directly; batch shapes keep it cheap.
pub fn aucroc_loss<T: Scalar>(
    logits: &[T],
    positive: &[bool],
    goal_ids: &[u32],
) -> Result<(T, Vec<T>), LossError> {
    if logits.len() != positive.len() || logits.len() != goal_ids.len() {
        return Err(LossError::LengthMismatch);
    }
    let pos: Vec<usize> = (0..logits.len()).filter(|&k| positive[k]).collect();
    let neg: Vec<usize> = (0..logits.len()).filter(|&k| !positive[k]).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(LossError::DegenerateRanking);
    }
    let two = T::from_f64(2.0);
    let mut total = T::ZERO;
    let mut grad = vec![T::ZERO; logits.len()];
    for &i in &pos {
        for &j in &neg {
            let w = if goal_ids[i] == goal_ids[j] { two } else { T::ONE };
            let d = logits[i] - logits[j];
            total += w * softplus_neg(d);
            // d/dd ln(1+e^{-d}) = -sigmoid(-d)
            let g = -w * sigmoid(-d);
            grad[i] += g;
            grad[j] += -g;
        }
    }
    Ok((total, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_softmax_loss_is_ln_classes() {
        let logits = Matrix::<f64>::zeros(3, 41);
        let (loss, _) = softmax_xent(&logits, &[0, 17, 40]).unwrap();
        assert!((loss - (41f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn softmax_loss_vanishes_with_margin() {
        let mut prev = f64::MAX;
        for margin in [2.0, 8.0, 32.0] {
            let mut logits = Matrix::<f64>::zeros(1, 5);
            logits.set(0, 2, margin);
            let (loss, _) = softmax_xent(&logits, &[2]).unwrap();
            assert!(loss < prev);
            prev = loss;
        }
        assert!(prev < 1e-10);
    }

    #[test]
    fn softmax_rejects_bad_label() {
        let logits = Matrix::<f64>::zeros(1, 4);
        assert_eq!(
            softmax_xent(&logits, &[4]),
            Err(LossError::LabelOutOfRange { label: 4, classes: 4 })
        );
    }

    #[test]
    fn softmax_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut logits = Matrix::<f64>::from_fn(3, 6, |_, _| rng.gen_range(-2.0..2.0));
        let labels = [1usize, 5, 0];
        let (_, grad) = softmax_xent(&logits, &labels).unwrap();
        let eps = 1e-6;
        for k in 0..logits.data().len() {
            let orig = logits.data()[k];
            logits.data_mut()[k] = orig + eps;
            let up = softmax_xent(&logits, &labels).unwrap().0;
            logits.data_mut()[k] = orig - eps;
            let down = softmax_xent(&logits, &labels).unwrap().0;
            logits.data_mut()[k] = orig;
            let fd = (up - down) / (2.0 * eps);
            assert!((grad.data()[k] - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn sigmoid_xent_at_zero_is_ln_2() {
        let (l1, _) = sigmoid_xent(0.0f64, true);
        let (l0, _) = sigmoid_xent(0.0f64, false);
        assert!((l1 - 2f64.ln()).abs() < 1e-12);
        assert!((l0 - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_xent_is_stable_at_extremes() {
        for &l in &[1e4f64, -1e4] {
            for &y in &[true, false] {
                let (loss, grad) = sigmoid_xent(l, y);
                assert!(loss.is_finite() && grad.is_finite());
                assert!(loss >= 0.0);
            }
        }
    }

    #[test]
    fn sigmoid_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let l: f64 = rng.gen_range(-3.0..3.0);
            let y = rng.gen_bool(0.5);
            let (_, grad) = sigmoid_xent(l, y);
            let eps = 1e-6;
            let fd = (sigmoid_xent(l + eps, y).0 - sigmoid_xent(l - eps, y).0) / (2.0 * eps);
            assert!((grad - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn ranking_loss_base_cases() {
        // One positive, one negative, different goals, equal logits: ln 2.
        let (loss, _) = aucroc_loss(&[0.5f64, 0.5], &[true, false], &[0, 1]).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-12);
        // Same goal id doubles the term.
        let (loss, _) = aucroc_loss(&[0.5f64, 0.5], &[true, false], &[3, 3]).unwrap();
        assert!((loss - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ranking_loss_rejects_degenerate_batches() {
        assert_eq!(
            aucroc_loss(&[1.0f64, 2.0], &[true, true], &[0, 1]),
            Err(LossError::DegenerateRanking)
        );
        assert_eq!(
            aucroc_loss(&[1.0f64, 2.0], &[false, false], &[0, 1]),
            Err(LossError::DegenerateRanking)
        );
    }

    /// Brute-force oracle written independently of the implementation: walk
    /// every (i, j) pair explicitly and sum the textbook expression.
    fn oracle(logits: &[f64], positive: &[bool], goal_ids: &[u32]) -> f64 {
        let mut total = 0.0;
        for i in 0..logits.len() {
            if !positive[i] {
                continue;
            }
            for j in 0..logits.len() {
                if positive[j] {
                    continue;
                }
                let w = if goal_ids[i] == goal_ids[j] { 2.0 } else { 1.0 };
                total += w * (1.0 + (-(logits[i] - logits[j])).exp()).ln();
            }
        }
        total
    }

    #[test]
    fn ranking_loss_matches_double_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let n = rng.gen_range(4..40);
            let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let mut positive: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
            positive[0] = true;
            positive[1] = false;
            let goal_ids: Vec<u32> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let (loss, _) = aucroc_loss(&logits, &positive, &goal_ids).unwrap();
            let want = oracle(&logits, &positive, &goal_ids);
            assert!((loss - want).abs() < 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn ranking_loss_gradient_check_and_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut logits: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let positive = [true, true, true, false, false, false, false, false];
        let goal_ids = [0u32, 1, 2, 0, 1, 2, 0, 1];
        let (base, grad) = aucroc_loss(&logits, &positive, &goal_ids).unwrap();
        assert!(base >= 0.0);

        let eps = 1e-6;
        for k in 0..logits.len() {
            let orig = logits[k];
            logits[k] = orig + eps;
            let up = aucroc_loss(&logits, &positive, &goal_ids).unwrap().0;
            logits[k] = orig - eps;
            let down = aucroc_loss(&logits, &positive, &goal_ids).unwrap().0;
            logits[k] = orig;
            let fd = (up - down) / (2.0 * eps);
            assert!((grad[k] - fd).abs() < 1e-6, "idx {k}: {} vs {fd}", grad[k]);
        }

        // Raising a positive logit with all else fixed strictly lowers the loss.
        logits[0] += 0.5;
        let (better, _) = aucroc_loss(&logits, &positive, &goal_ids).unwrap();
        assert!(better < base);
    }
}
