//! Message-passing graph encoder.
//!
//! Nodes start from trainable token vectors projected by an MLP; each round
//! every edge produces a parent-message (delivered to the child) and a
//! child-message (delivered to the parent) from the concatenation of the two
//! endpoint embeddings and the edge-label embedding. Messages are averaged
//! per receiving slot and combined through a residual update:
//!
//! ```text
//! h¹_v = MLP_V(x_token(v))            h_e = MLP_E(label(e))
//! s_(u,v)  = MLP_edge([h_u, h_v, h_e])       delivered to v
//! ŝ_(u,v)  = MLP̂_edge([h_u, h_v, h_e])       delivered to u
//! h^t_v = h^(t-1)_v + MLP_aggr([h^(t-1)_v, mean s, mean ŝ])
//! ```
//!
//! An empty message slot contributes a zero vector. Direction restriction
//! drops structural deliveries on one side; random edges (label 2) always
//! deliver both ways. Per-round MLPs do not share weights. After the rounds,
//! a per-node projection stack widens the embeddings and a coordinatewise
//! max over nodes yields the graph embedding.

use crate::graphrep::{Direction, GraphKind, TermGraph, LABEL_RANDOM};
use crate::numerics::{
    init_mlp, mlp_apply, Activation, Matrix, MlpHandles, MlpSpec, ParamStore, Scalar, Tape, Value,
};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GnnError {
    #[error("token `{0}` is not in the vocabulary and no OOV entry is configured")]
    MissingToken(String),
    #[error("cannot encode an empty graph")]
    EmptyGraph,
    #[error("direction-restricted graphs must be subexpression-shared, got {0:?}")]
    BadDirection(GraphKind),
}

pub const OOV_TOKEN: &str = "<oov>";

/// Token table mapping corpus tokens to embedding rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    oov: Option<u32>,
}

impl Vocab {
    /// Build from tokens in first-seen order and append an OOV entry.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut v = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
            oov: None,
        };
        for t in tokens {
            v.intern(t);
        }
        let oov = v.intern(OOV_TOKEN);
        v.oov = Some(oov);
        v
    }

    /// A vocabulary without an OOV fallback; unknown tokens become errors.
    pub fn build_closed<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut v = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
            oov: None,
        };
        for t in tokens {
            v.intern(t);
        }
        v
    }

    fn intern(&mut self, token: &str) -> u32 {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let i = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), i);
        i
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn lookup(&self, token: &str) -> Result<u32, GnnError> {
        match self.index.get(token) {
            Some(&i) => Ok(i),
            None => self
                .oov
                .ok_or_else(|| GnnError::MissingToken(token.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnConfig {
    /// Number of message-passing rounds (0 means projection + pooling only).
    pub hops: usize,
    /// Width of token vectors and node embeddings.
    pub node_dim: usize,
    /// Hidden widths of every internal MLP (projection, edge, aggregation).
    pub mlp_hidden: Vec<usize>,
    /// Widths of the per-node projection stack before max pooling; the last
    /// entry is the graph embedding size.
    pub pool_dims: Vec<usize>,
    /// Keep probability for dropout inside all GNN MLPs.
    pub dropout_keep: f64,
}

impl Default for GnnConfig {
    fn default() -> Self {
        GnnConfig {
            hops: 2,
            node_dim: 128,
            mlp_hidden: vec![256],
            pool_dims: vec![512, 1024],
            dropout_keep: 0.5,
        }
    }
}

impl GnnConfig {
    pub fn embedding_dim(&self) -> usize {
        *self.pool_dims.last().unwrap_or(&self.node_dim)
    }

    fn project_spec(&self, input: usize) -> MlpSpec {
        MlpSpec::new(input, &self.mlp_hidden, self.node_dim, Activation::Relu)
    }

    fn message_spec(&self) -> MlpSpec {
        MlpSpec::new(
            3 * self.node_dim,
            &self.mlp_hidden,
            self.node_dim,
            Activation::Relu,
        )
    }

    fn pool_spec(&self) -> MlpSpec {
        let (hidden, out) = self.pool_dims.split_at(self.pool_dims.len() - 1);
        MlpSpec::new(self.node_dim, hidden, out[0], Activation::Relu)
    }
}

/// Parameters of one message-passing round; fresh objects per round.
#[derive(Debug, Clone)]
pub struct RoundParams {
    pub edge: MlpHandles,
    pub edge_hat: MlpHandles,
    pub aggr: MlpHandles,
}

#[derive(Debug, Clone)]
pub struct GnnParams {
    pub token_emb: crate::numerics::ParamId,
    pub mlp_v: MlpHandles,
    pub mlp_e: MlpHandles,
    pub rounds: Vec<RoundParams>,
    pub pool: MlpHandles,
}

/// One encoder tower: configuration plus parameter handles into a store.
#[derive(Debug, Clone)]
pub struct Gnn {
    pub cfg: GnnConfig,
    pub params: GnnParams,
}

impl Gnn {
    /// Initialize a tower under `prefix` in the store. Token vectors are
    /// drawn from N(0, 0.1); dense layers use fan-in-scaled uniform init.
    pub fn init<T: Scalar>(
        store: &mut ParamStore<T>,
        prefix: &str,
        cfg: GnnConfig,
        vocab: &Vocab,
        rng: &mut impl Rng,
    ) -> Self {
        let normal = Normal::new(0.0f64, 0.1).expect("valid sigma");
        let token_emb = store.add(
            format!("{prefix}/token_emb"),
            Matrix::from_fn(vocab.len(), cfg.node_dim, |_, _| {
                T::from_f64(normal.sample(rng))
            }),
        );
        let mlp_v = init_mlp(store, &format!("{prefix}/mlp_v"), &cfg.project_spec(cfg.node_dim), rng);
        let mlp_e = init_mlp(store, &format!("{prefix}/mlp_e"), &cfg.project_spec(1), rng);
        let rounds = (0..cfg.hops)
            .map(|r| RoundParams {
                edge: init_mlp(store, &format!("{prefix}/round{r}/edge"), &cfg.message_spec(), rng),
                edge_hat: init_mlp(
                    store,
                    &format!("{prefix}/round{r}/edge_hat"),
                    &cfg.message_spec(),
                    rng,
                ),
                aggr: init_mlp(store, &format!("{prefix}/round{r}/aggr"), &cfg.message_spec(), rng),
            })
            .collect();
        let pool = init_mlp(store, &format!("{prefix}/pool"), &cfg.pool_spec(), rng);
        Gnn {
            cfg,
            params: GnnParams {
                token_emb,
                mlp_v,
                mlp_e,
                rounds,
                pool,
            },
        }
    }

    /// Node embeddings after all rounds, shape n × node_dim.
    pub fn encode<T: Scalar>(
        &self,
        tape: &mut Tape<'_, T>,
        graph: &TermGraph,
        vocab: &Vocab,
        training: bool,
        rng: &mut impl Rng,
    ) -> Result<Value, GnnError> {
        let n = graph.tokens.len();
        if n == 0 {
            return Err(GnnError::EmptyGraph);
        }
        if graph.direction != Direction::Both && graph.kind != GraphKind::SubexprShared {
            return Err(GnnError::BadDirection(graph.kind));
        }
        let keep = self.cfg.dropout_keep;
        let ids: Vec<u32> = graph
            .tokens
            .iter()
            .map(|t| vocab.lookup(t))
            .collect::<Result<_, _>>()?;

        let emb = tape.param(self.params.token_emb);
        let x = tape.gather_rows(emb, &ids);
        let v_spec = self.cfg.project_spec(self.cfg.node_dim);
        let mut h = mlp_apply(tape, &v_spec, &self.params.mlp_v, x, keep, training, rng);

        if self.cfg.hops == 0 {
            return Ok(h);
        }

        // Edge-label embeddings for the fixed label set {0, 1, 2}.
        let labels_in = tape.leaf(Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]));
        let e_spec = self.cfg.project_spec(1);
        let h_e_all = mlp_apply(
            tape,
            &e_spec,
            &self.params.mlp_e,
            labels_in,
            keep,
            training,
            rng,
        );

        // Message bookkeeping, fixed across rounds. Every edge contributes
        // one input row [h_src, h_dst, h_e]; which outputs get delivered
        // where depends on the direction flag, except random edges, which
        // always deliver both ways.
        let src_idx: Vec<u32> = graph.edges.iter().map(|e| e.src).collect();
        let dst_idx: Vec<u32> = graph.edges.iter().map(|e| e.dst).collect();
        let label_idx: Vec<u32> = graph.edges.iter().map(|e| e.label as u32).collect();
        let mut parent_rows: Vec<u32> = Vec::new(); // edge rows delivering s to dst
        let mut parent_rcv: Vec<u32> = Vec::new();
        let mut child_rows: Vec<u32> = Vec::new(); // edge rows delivering ŝ to src
        let mut child_rcv: Vec<u32> = Vec::new();
        for (k, e) in graph.edges.iter().enumerate() {
            let random = e.label == LABEL_RANDOM;
            if random || graph.direction != Direction::BottomUp {
                parent_rows.push(k as u32);
                parent_rcv.push(e.dst);
            }
            if random || graph.direction != Direction::TopDown {
                child_rows.push(k as u32);
                child_rcv.push(e.src);
            }
        }

        let he_edges = if graph.edges.is_empty() {
            None
        } else {
            Some(tape.gather_rows(h_e_all, &label_idx))
        };
        let msg_spec = self.cfg.message_spec();

        for round in &self.params.rounds {
            let (s_sum, shat_sum) = if let Some(he) = he_edges {
                let hu = tape.gather_rows(h, &src_idx);
                let hv = tape.gather_rows(h, &dst_idx);
                let edge_in = tape.concat_cols(&[hu, hv, he]);

                let s_sum = if parent_rows.is_empty() {
                    tape.leaf(Matrix::zeros(n, self.cfg.node_dim))
                } else {
                    let s_all = mlp_apply(tape, &msg_spec, &round.edge, edge_in, keep, training, rng);
                    let delivered = tape.gather_rows(s_all, &parent_rows);
                    tape.scatter_mean_rows(delivered, &parent_rcv, n)
                };
                let shat_sum = if child_rows.is_empty() {
                    tape.leaf(Matrix::zeros(n, self.cfg.node_dim))
                } else {
                    let shat_all =
                        mlp_apply(tape, &msg_spec, &round.edge_hat, edge_in, keep, training, rng);
                    let delivered = tape.gather_rows(shat_all, &child_rows);
                    tape.scatter_mean_rows(delivered, &child_rcv, n)
                };
                (s_sum, shat_sum)
            } else {
                let z1 = tape.leaf(Matrix::zeros(n, self.cfg.node_dim));
                let z2 = tape.leaf(Matrix::zeros(n, self.cfg.node_dim));
                (z1, z2)
            };

            let aggr_in = tape.concat_cols(&[h, s_sum, shat_sum]);
            let delta = mlp_apply(tape, &msg_spec, &round.aggr, aggr_in, keep, training, rng);
            h = tape.add(h, delta);
        }
        Ok(h)
    }

    /// Per-node projection stack followed by coordinatewise max over nodes;
    /// returns the 1 × embedding_dim graph embedding.
    pub fn pool<T: Scalar>(
        &self,
        tape: &mut Tape<'_, T>,
        node_embeddings: Value,
        training: bool,
        rng: &mut impl Rng,
    ) -> Result<Value, GnnError> {
        if tape.value(node_embeddings).rows() == 0 {
            return Err(GnnError::EmptyGraph);
        }
        let projected = mlp_apply(
            tape,
            &self.cfg.pool_spec(),
            &self.params.pool,
            node_embeddings,
            self.cfg.dropout_keep,
            training,
            rng,
        );
        Ok(tape.max_pool_rows(projected))
    }

    /// Encode + pool in evaluation mode on a scratch tape.
    pub fn embed<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        graph: &TermGraph,
        vocab: &Vocab,
    ) -> Result<Matrix<T>, GnnError> {
        use rand::SeedableRng;
        let mut tape = Tape::new(store);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let h = self.encode(&mut tape, graph, vocab, false, &mut rng)?;
        let pooled = self.pool(&mut tape, h, false, &mut rng)?;
        Ok(tape.value(pooled).clone())
    }
}
