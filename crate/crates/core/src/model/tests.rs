use super::trainer::{train, TrainConfig};
use super::*;
use crate::corpus::{extract_examples, generate_toy_corpus, negative_pool, Split};
use crate::gnn::GnnConfig;
use crate::numerics::{AdamConfig, ParamId};
use rand::Rng;

fn tiny_cfg() -> ModelConfig {
    ModelConfig {
        gnn: GnnConfig {
            hops: 1,
            node_dim: 6,
            mlp_hidden: vec![8],
            // Pooling needs enough coordinates for statement-specific nodes
            // to win some maxima; tiny widths collapse the embeddings.
            pool_dims: vec![8, 24],
            dropout_keep: 1.0,
        },
        n_tactics: 41,
        tactic_hidden: vec![8],
        combiner_hidden: vec![16, 8],
        dropout_keep_dense: 1.0,
        goals_per_batch: 2,
        negatives_per_goal: 2,
        ..Default::default()
    }
}

fn tiny_fixture() -> (Model<f64>, crate::corpus::TheoremDb, Vec<TrainingExample>, Vec<usize>) {
    let (db, log) = generate_toy_corpus(41, 24, 41);
    let vocab = crate::gnn::Vocab::build(db.all_tokens().iter().map(|s| s.as_str()));
    let model = Model::<f64>::init(tiny_cfg(), vocab, 9);
    let examples = extract_examples(&db, &log, Split::Train);
    let pool = negative_pool(&examples);
    (model, db, examples, pool)
}

#[test]
fn towers_do_not_share_weights() {
    let (model, db, _, _) = tiny_fixture();
    let graph = model.graphify(db.statement(0)).unwrap();
    let g = model.embed_goal(&graph).unwrap();
    let p = model.embed_premise(&graph).unwrap();
    assert_eq!(g.shape(), p.shape());
    assert_ne!(g, p);
    // Determinism of evaluation-mode embeddings.
    assert_eq!(g, model.embed_goal(&graph).unwrap());
}

#[test]
fn tactic_head_shapes_and_shift_invariance() {
    let (model, db, _, _) = tiny_fixture();
    let graph = model.graphify(db.statement(0)).unwrap();
    let g = model.embed_goal(&graph).unwrap();
    let logits = model.predict_tactic(&g);
    assert_eq!(logits.shape(), (1, 41));

    let argmax = |row: &[f64]| {
        row.iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0
    };
    let base = argmax(logits.row(0));
    let shifted = logits.map(|v| v + 3.25);
    assert_eq!(argmax(shifted.row(0)), base);
}

#[test]
fn zero_weight_head_outputs_bias() {
    let (mut model, db, _, _) = tiny_fixture();
    for l in 0..model.tactic_head.weights.len() {
        let w = model.tactic_head.weights[l];
        let shape = model.store.value(w).shape();
        *model.store.value_mut(w) = Matrix::zeros(shape.0, shape.1);
        let b = model.tactic_head.biases[l];
        let cols = model.store.value(b).cols();
        for (k, v) in (0..cols).enumerate() {
            model.store.value_mut(b).data_mut()[k] = 0.125 * (v as f64 + 1.0);
        }
    }
    let graph = model.graphify(db.statement(0)).unwrap();
    let g = model.embed_goal(&graph).unwrap();
    let logits = model.predict_tactic(&g);
    // With zero weights each layer passes only its bias through; the final
    // (identity-activation) layer therefore emits exactly its bias... after
    // the ReLU'd hidden bias contributes via zero weights, i.e. nothing.
    let final_bias = model.store.value(*model.tactic_head.biases.last().unwrap());
    for (a, b) in logits.row(0).iter().zip(final_bias.row(0)) {
        assert_eq!(a, b);
    }
}

#[test]
fn combiner_input_is_three_blocks() {
    let cfg = tiny_cfg();
    assert_eq!(cfg.combiner_spec().input_size(), 3 * cfg.gnn.embedding_dim());

    // A zero goal embedding zeroes the g and g⊙p blocks: scores then cannot
    // depend on which premise multiplied into the product block beyond p
    // itself. Check score equals the manual [0, p, 0] evaluation.
    let (model, db, _, _) = tiny_fixture();
    let graph = model.graphify(db.statement(1)).unwrap();
    let p = model.embed_premise(&graph).unwrap();
    let zero_goal = Matrix::zeros(1, model.cfg.gnn.embedding_dim());
    let score = model.score_premise(&zero_goal, &p);

    let mut tape = crate::numerics::Tape::new(&model.store);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    use rand::SeedableRng;
    let dim = model.cfg.gnn.embedding_dim();
    let input = tape.leaf(Matrix::from_fn(1, 3 * dim, |_, j| {
        if j >= dim && j < 2 * dim {
            p.get(0, j - dim)
        } else {
            0.0
        }
    }));
    let logits = crate::numerics::mlp_apply(
        &mut tape,
        &model.cfg.combiner_spec(),
        &model.combiner,
        input,
        1.0,
        false,
        &mut rng,
    );
    assert_eq!(score, tape.value(logits).get(0, 0));
}

#[test]
fn batch_scoring_equals_single_calls() {
    let (model, db, _, _) = tiny_fixture();
    let goal = model
        .embed_goal(&model.graphify(db.statement(2)).unwrap())
        .unwrap();
    let dim = model.cfg.gnn.embedding_dim();
    let premises = Matrix::from_fn(5, dim, |i, j| {
        model
            .embed_premise(&model.graphify(db.statement(i + 3)).unwrap())
            .unwrap()
            .get(0, j)
    });
    let batch_scores = model.score_premises(&goal, &premises);
    for i in 0..5 {
        let single = Matrix::from_fn(1, dim, |_, j| premises.get(i, j));
        let s = model.score_premise(&goal, &single);
        assert_eq!(s, batch_scores[i], "premise {i}");
    }
}

#[test]
fn batch_audit_holds_for_paper_shape() {
    let (db, log) = generate_toy_corpus(7, 120, 41);
    let vocab = crate::gnn::Vocab::build(db.all_tokens().iter().map(|s| s.as_str()));
    let cfg = ModelConfig {
        goals_per_batch: 16,
        negatives_per_goal: 15,
        ..tiny_cfg()
    };
    assert_eq!(cfg.pairs_per_batch(), 4096);
    let model = Model::<f64>::init(cfg, vocab, 1);
    let examples = extract_examples(&db, &log, Split::Train);
    let pool = negative_pool(&examples);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    use rand::SeedableRng;
    for _ in 0..20 {
        let batch = build_batch(&model, &examples, &db, &pool, &mut rng).unwrap();
        let audit = batch.audit();
        assert_eq!(audit.positives, 16);
        assert_eq!(audit.owned_negatives, 240);
        assert_eq!(audit.reused_negatives, 3840);
        assert_eq!(
            audit.positives + audit.owned_negatives + audit.reused_negatives,
            4096
        );
        // A goal's own positive never appears among its owned negatives.
        for i in 0..16 {
            let positive = batch.premise_db_indices[i];
            let owned = &batch.premise_db_indices[16 + i * 15..16 + (i + 1) * 15];
            assert!(!owned.contains(&positive));
        }
    }
}

#[test]
fn degenerate_loss_weights_reduce_to_tactic_loss() {
    let (model, db, examples, pool) = tiny_fixture();
    let mut model = model;
    model.cfg.loss_weights = LossWeights {
        tactic: 1.0,
        pairwise: 0.0,
        aucroc: 0.0,
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    use rand::SeedableRng;
    let batch = build_batch(&model, &examples, &db, &pool, &mut rng).unwrap();
    let (parts, _) = compute_loss(&model, &batch, false, 0).unwrap();
    assert_eq!(parts.total, parts.tactic);
    assert!(parts.tactic > 0.0);
}

/// Full-model finite-difference gradient check on a 2-goal micro-batch.
#[test]
fn full_model_gradient_check() {
    let (mut model, db, examples, pool) = tiny_fixture();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    use rand::SeedableRng;
    let batch = build_batch(&model, &examples, &db, &pool, &mut rng).unwrap();

    // Perturb all parameters away from ReLU kinks (zero biases with a zero
    // edge-label input sit exactly on one).
    let ids: Vec<ParamId> = model.store.iter().map(|(id, _, _)| id).collect();
    let mut jitter = rand_chacha::ChaCha8Rng::seed_from_u64(12);
    for id in &ids {
        for v in model.store.value_mut(*id).data_mut() {
            *v += jitter.gen_range(0.01..0.05);
        }
    }

    let (_, grads) = compute_loss(&model, &batch, false, 0).unwrap();
    let eps = 1e-5;
    let mut checked = 0usize;
    let mut max_rel: f64 = 0.0;
    for id in ids {
        let len = model.store.value(id).data().len();
        for k in 0..len {
            let orig = model.store.value(id).data()[k];
            model.store.value_mut(id).data_mut()[k] = orig + eps;
            let up = compute_loss(&model, &batch, false, 0).unwrap().0.total;
            model.store.value_mut(id).data_mut()[k] = orig - eps;
            let down = compute_loss(&model, &batch, false, 0).unwrap().0.total;
            model.store.value_mut(id).data_mut()[k] = orig;
            let fd = (up - down) / (2.0 * eps);
            let a = grads.get(id).map_or(0.0, |g| g.data()[k]);
            // Central differences on a loss of this magnitude carry ~1e-9 of
            // absolute noise; below 1e-4 the check is absolute (< 1e-8).
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-4);
            max_rel = max_rel.max(rel);
            assert!(
                rel < 1e-4,
                "{} idx {k}: analytic {a} vs fd {fd} (rel {rel})",
                model.store.name(id)
            );
            checked += 1;
        }
    }
    println!("checked {checked} parameters, max rel err {max_rel:.3e}");
    assert!(checked > 500);
}

#[test]
fn rank_premises_orders_and_truncates() {
    let (model, db, _, _) = tiny_fixture();
    let cache = build_premise_cache(&model, &db, 0xabc).unwrap();
    assert_eq!(cache.embeddings.rows(), db.len());
    let goal = model
        .embed_goal(&model.graphify(db.statement(db.len() - 1)).unwrap())
        .unwrap();

    let ranked = model.rank_premises(&goal, &cache, 10, 4);
    assert_eq!(ranked.len(), 4);
    for pair in ranked.windows(2) {
        assert!(pair[0].1 >= pair[1].1);
        if pair[0].1 == pair[1].1 {
            assert!(pair[0].0 < pair[1].0);
        }
    }
    for (idx, _) in &ranked {
        assert!(*idx < 10);
    }
    // k larger than the eligible set returns everything, ranked.
    let all = model.rank_premises(&goal, &cache, 5, 100);
    assert_eq!(all.len(), 5);
}

#[test]
fn premise_cache_round_trips_and_rejects_stale() {
    let (model, db, _, _) = tiny_fixture();
    let cache = build_premise_cache(&model, &db, 0x1234).unwrap();
    let text = render_premise_cache(&cache);
    let loaded = parse_premise_cache::<f64>(&text, 0x1234).unwrap();
    assert_eq!(loaded.embeddings, cache.embeddings);
    match parse_premise_cache::<f64>(&text, 0x9999) {
        Err(ModelError::StaleCache { cache: c, expected }) => {
            assert_eq!((c, expected), (0x1234, 0x9999));
        }
        other => panic!("unexpected {:?}", other.map(|_| ())),
    }
}

#[test]
fn config_meta_round_trips() {
    let mut cfg = tiny_cfg();
    cfg.representation.variable_blinding = true;
    cfg.representation.random_seed = 77;
    let meta = cfg.to_meta();
    let parsed = ModelConfig::from_meta(&meta).unwrap();
    assert_eq!(parsed, cfg);
}

/// Loss falls substantially over 200 steps on a frozen 4-example corpus.
#[test]
fn loss_decreases_when_overfitting() {
    use crate::numerics::Optimizer;
    let (mut model, db, examples, pool) = tiny_fixture();
    let frozen: Vec<TrainingExample> = examples
        .into_iter()
        .filter(|e| !e.premises.is_empty())
        .take(4)
        .collect();
    assert_eq!(frozen.len(), 4);
    let mut optimizer = Optimizer::new(
        AdamConfig {
            learning_rate: 1e-2,
            ..Default::default()
        },
        &model.store,
    );
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let mut losses = Vec::new();
    for step in 0..200u64 {
        let batch = build_batch(&model, &frozen, &db, &pool, &mut rng).unwrap();
        let (parts, grads) = compute_loss(&model, &batch, true, step).unwrap();
        optimizer.apply(&mut model.store, &grads);
        losses.push(parts.total);
    }
    let head: f64 = losses[..20].iter().sum::<f64>() / 20.0;
    let tail: f64 = losses[losses.len() - 20..].iter().sum::<f64>() / 20.0;
    assert!(
        tail < 0.75 * head,
        "loss did not fall enough: {head} -> {tail}"
    );
}

#[test]
fn polyak_shadow_lags_live_params_and_eval_is_deterministic() {
    let (db, log) = generate_toy_corpus(23, 20, 41);
    let cfg = TrainConfig {
        model: tiny_cfg(),
        adam: AdamConfig {
            learning_rate: 1e-3,
            polyak: 0.99,
            ..Default::default()
        },
        steps: 30,
        eval_every: 30,
        seed: 6,
        holdout_frac: 0.0,
        early_stop: None,
        metric_examples_cap: 16,
        metric_samples_per_positive: 1,
    };
    let result = train::<f64>(&cfg, &db, &log, |_| {}).unwrap();
    let live = &result.model.store;
    let shadow = result.optimizer.shadow();
    let mut differs = false;
    for (i, (_, _, value)) in live.iter().enumerate() {
        if value != &shadow[i] {
            differs = true;
        }
    }
    assert!(differs, "shadow must lag live parameters after training");

    let eval_model = result.model.with_values(shadow);
    let graph = eval_model.graphify(db.statement(3)).unwrap();
    assert_eq!(
        eval_model.embed_goal(&graph).unwrap(),
        eval_model.embed_goal(&graph).unwrap()
    );
}

#[test]
fn training_is_bit_deterministic_in_f64() {
    let (db, log) = generate_toy_corpus(29, 20, 41);
    let cfg = TrainConfig {
        model: tiny_cfg(),
        adam: AdamConfig::default(),
        steps: 12,
        eval_every: 6,
        seed: 99,
        holdout_frac: 0.0,
        early_stop: None,
        metric_examples_cap: 32,
        metric_samples_per_positive: 1,
    };
    let a = train::<f64>(&cfg, &db, &log, |_| {}).unwrap();
    let b = train::<f64>(&cfg, &db, &log, |_| {}).unwrap();
    assert_eq!(a.log, b.log);
}
