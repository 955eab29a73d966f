//! Multi-layer perceptrons: layer specs, initialization, and application on
//! a gradient tape. A standalone forward/backward pair is provided for use
//! outside a larger tape.

use super::matrix::{Matrix, Scalar};
use super::tape::{Grads, NodeGrads, ParamId, ParamStore, Tape, Value};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

/// Shapes and activations of a dense stack; consecutive layers must compose.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub layers: Vec<LayerSpec>,
}

impl MlpSpec {
    /// `input -> hidden[0] -> ... -> output`, ReLU on every layer except the
    /// last, which uses `final_act`.
    pub fn new(input: usize, hidden: &[usize], output: usize, final_act: Activation) -> Self {
        let mut layers = Vec::new();
        let mut at = input;
        for &h in hidden {
            layers.push(LayerSpec {
                input: at,
                output: h,
                activation: Activation::Relu,
            });
            at = h;
        }
        layers.push(LayerSpec {
            input: at,
            output,
            activation: final_act,
        });
        MlpSpec { layers }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().expect("empty mlp").output
    }

    pub fn validate(&self) {
        for pair in self.layers.windows(2) {
            assert_eq!(
                pair[0].output, pair[1].input,
                "consecutive layer shapes must compose"
            );
        }
    }
}

/// Parameter handles of one MLP inside a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct MlpHandles {
    pub weights: Vec<ParamId>,
    pub biases: Vec<ParamId>,
}

/// Fan-in-scaled uniform weight init, zero biases.
pub fn init_mlp<T: Scalar>(
    store: &mut ParamStore<T>,
    prefix: &str,
    spec: &MlpSpec,
    rng: &mut impl Rng,
) -> MlpHandles {
    spec.validate();
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (l, layer) in spec.layers.iter().enumerate() {
        let bound = 1.0 / (layer.input as f64).sqrt();
        let w = Matrix::from_fn(layer.input, layer.output, |_, _| {
            T::from_f64(rng.gen_range(-bound..bound))
        });
        weights.push(store.add(format!("{prefix}/w{l}"), w));
        biases.push(store.add(format!("{prefix}/b{l}"), Matrix::zeros(1, layer.output)));
    }
    MlpHandles { weights, biases }
}

/// Apply the MLP on a tape. Dropout is applied before each dense layer only
/// in training mode (inverted dropout).
pub fn mlp_apply<T: Scalar>(
    tape: &mut Tape<'_, T>,
    spec: &MlpSpec,
    handles: &MlpHandles,
    input: Value,
    dropout_keep: f64,
    training: bool,
    rng: &mut impl Rng,
) -> Value {
    assert_eq!(
        tape.value(input).cols(),
        spec.input_size(),
        "mlp input width mismatch"
    );
    let mut at = input;
    for (l, layer) in spec.layers.iter().enumerate() {
        if training && dropout_keep < 1.0 {
            at = tape.dropout(at, dropout_keep, rng);
        }
        let w = tape.param(handles.weights[l]);
        let b = tape.param(handles.biases[l]);
        at = tape.matmul(at, w);
        at = tape.add_row(at, b);
        if layer.activation == Activation::Relu {
            at = tape.relu(at);
        }
    }
    at
}

/// A self-contained MLP owning its parameters; the convenient form for unit
/// tests and oracles.
#[derive(Debug, Clone)]
pub struct Mlp<T> {
    pub store: ParamStore<T>,
    pub spec: MlpSpec,
    pub handles: MlpHandles,
}

impl<T: Scalar> Mlp<T> {
    pub fn init(spec: MlpSpec, rng: &mut impl Rng) -> Self {
        let mut store = ParamStore::new();
        let handles = init_mlp(&mut store, "mlp", &spec, rng);
        Mlp { store, spec, handles }
    }
}

/// Recorded forward pass of a standalone [`Mlp`]. Consumed by
/// [`mlp_backward`], which prevents reuse of a spent tape.
pub struct MlpTape<'m, T: Scalar> {
    tape: Tape<'m, T>,
    mlp: &'m Mlp<T>,
    input: Value,
    output: Value,
}

pub fn mlp_forward<'m, T: Scalar>(
    mlp: &'m Mlp<T>,
    input: &Matrix<T>,
    dropout_keep: f64,
    training: bool,
    rng: &mut impl Rng,
) -> (Matrix<T>, MlpTape<'m, T>) {
    let mut tape = Tape::new(&mlp.store);
    let x = tape.leaf(input.clone());
    let y = mlp_apply(
        &mut tape,
        &mlp.spec,
        &mlp.handles,
        x,
        dropout_keep,
        training,
        rng,
    );
    let out = tape.value(y).clone();
    (
        out,
        MlpTape {
            tape,
            mlp,
            input: x,
            output: y,
        },
    )
}

pub struct MlpGrads<T> {
    pub weights: Vec<Matrix<T>>,
    pub biases: Vec<Matrix<T>>,
    pub input: Matrix<T>,
}

pub fn mlp_backward<T: Scalar>(recorded: MlpTape<'_, T>, output_grad: &Matrix<T>) -> MlpGrads<T> {
    let MlpTape {
        tape,
        mlp,
        input,
        output,
    } = recorded;
    let mut grads = Grads::zeros_like(&mlp.store);
    let node_grads: NodeGrads<T> = tape.backward(&[(output, output_grad.clone())], &mut grads);
    let zeros_like = |id: ParamId| Matrix::zeros(
        mlp.store.value(id).rows(),
        mlp.store.value(id).cols(),
    );
    MlpGrads {
        weights: mlp
            .handles
            .weights
            .iter()
            .map(|&id| grads.get(id).cloned().unwrap_or_else(|| zeros_like(id)))
            .collect(),
        biases: mlp
            .handles
            .biases
            .iter()
            .map(|&id| grads.get(id).cloned().unwrap_or_else(|| zeros_like(id)))
            .collect(),
        input: node_grads
            .get(input)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(0, 0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_mlp() -> Mlp<f64> {
        // Single 2->2 layer with identity weights and zero bias under ReLU.
        let spec = MlpSpec::new(2, &[], 2, Activation::Relu);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut mlp = Mlp::init(spec, &mut rng);
        let w = mlp.handles.weights[0];
        *mlp.store.value_mut(w) = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        mlp
    }

    #[test]
    fn identity_layer_is_relu() {
        let mlp = identity_mlp();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Matrix::from_rows(&[vec![1.5, -2.0], vec![-0.5, 3.0]]);
        let (y, _tape) = mlp_forward(&mlp, &x, 1.0, false, &mut rng);
        assert_eq!(y.data(), &[1.5, 0.0, 0.0, 3.0]);
    }

    #[test]
    fn training_equals_eval_when_keep_is_one() {
        let spec = MlpSpec::new(3, &[4], 2, Activation::Identity);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mlp = Mlp::<f64>::init(spec, &mut rng);
        let x = Matrix::from_rows(&[vec![0.3, -0.1, 0.7]]);
        let (y1, _) = mlp_forward(&mlp, &x, 1.0, false, &mut ChaCha8Rng::seed_from_u64(9));
        let (y2, _) = mlp_forward(&mlp, &x, 1.0, true, &mut ChaCha8Rng::seed_from_u64(10));
        assert_eq!(y1, y2);
    }

    #[test]
    fn forward_matches_naive_oracle() {
        let spec = MlpSpec::new(4, &[5], 3, Activation::Identity);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mlp = Mlp::<f64>::init(spec, &mut rng);
        let x = Matrix::from_fn(2, 4, |i, j| (i as f64 * 0.3) - (j as f64 * 0.2) + 0.1);
        let (y, _) = mlp_forward(&mlp, &x, 1.0, false, &mut rng);

        // Hand-rolled forward.
        let mut h = x.clone();
        for (l, layer) in mlp.spec.layers.iter().enumerate() {
            let w = mlp.store.value(mlp.handles.weights[l]);
            let b = mlp.store.value(mlp.handles.biases[l]);
            let mut next = Matrix::<f64>::zeros(h.rows(), layer.output);
            for i in 0..h.rows() {
                for o in 0..layer.output {
                    let mut acc = b.get(0, o);
                    for k in 0..layer.input {
                        acc += h.get(i, k) * w.get(k, o);
                    }
                    if layer.activation == Activation::Relu {
                        acc = acc.max(0.0);
                    }
                    next.set(i, o, acc);
                }
            }
            h = next;
        }
        for (a, b) in y.data().iter().zip(h.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_layer_weight_grad_closed_form() {
        let spec = MlpSpec::new(2, &[], 2, Activation::Identity);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mlp = Mlp::<f64>::init(spec, &mut rng);
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let (_, tape) = mlp_forward(&mlp, &x, 1.0, false, &mut rng);
        let g = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let grads = mlp_backward(tape, &g);
        // dW = xᵀ·g.
        let want = [1.0, 3.0, 2.0, 4.0];
        assert_eq!(grads.weights[0].data(), &want);
        // db = column sums of g.
        assert_eq!(grads.biases[0].data(), &[1.0, 1.0]);
    }

    #[test]
    fn zero_output_grad_zeroes_everything() {
        let spec = MlpSpec::new(3, &[4, 4], 2, Activation::Identity);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mlp = Mlp::<f64>::init(spec, &mut rng);
        let x = Matrix::from_fn(2, 3, |i, j| (i + j) as f64 * 0.1);
        let (y, tape) = mlp_forward(&mlp, &x, 1.0, false, &mut rng);
        let grads = mlp_backward(tape, &Matrix::zeros(y.rows(), y.cols()));
        for w in &grads.weights {
            assert!(w.data().iter().all(|&v| v == 0.0));
        }
        assert!(grads.input.data().iter().all(|&v| v == 0.0));
    }

    /// Central finite differences on every parameter of a 3-layer MLP,
    /// including a fixed-mask dropout pass.
    #[test]
    fn gradient_check_3_layer() {
        let spec = MlpSpec::new(3, &[4, 3], 2, Activation::Identity);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut mlp = Mlp::<f64>::init(spec, &mut rng);
        let x = Matrix::from_fn(2, 3, |i, j| 0.4 * (i as f64) - 0.3 * (j as f64) + 0.2);

        for (training, keep, mask_seed) in [(false, 1.0, 0), (true, 0.7, 77u64)] {
            // Scalar loss: sum of outputs.
            let loss = |mlp: &Mlp<f64>| {
                let mut mask_rng = ChaCha8Rng::seed_from_u64(mask_seed);
                let (y, _) = mlp_forward(mlp, &x, keep, training, &mut mask_rng);
                y.data().iter().sum::<f64>()
            };
            let mut mask_rng = ChaCha8Rng::seed_from_u64(mask_seed);
            let (y, tape) = mlp_forward(&mlp, &x, keep, training, &mut mask_rng);
            let ones = Matrix::from_fn(y.rows(), y.cols(), |_, _| 1.0);
            let analytic = mlp_backward(tape, &ones);

            let eps = 1e-5;
            let param_ids: Vec<ParamId> = mlp
                .handles
                .weights
                .iter()
                .chain(&mlp.handles.biases)
                .copied()
                .collect();
            for (which, id) in param_ids.iter().enumerate() {
                let n = mlp.store.value(*id).data().len();
                for k in 0..n {
                    let orig = mlp.store.value(*id).data()[k];
                    mlp.store.value_mut(*id).data_mut()[k] = orig + eps;
                    let up = loss(&mlp);
                    mlp.store.value_mut(*id).data_mut()[k] = orig - eps;
                    let down = loss(&mlp);
                    mlp.store.value_mut(*id).data_mut()[k] = orig;
                    let fd = (up - down) / (2.0 * eps);
                    let a = if which < mlp.handles.weights.len() {
                        analytic.weights[which].data()[k]
                    } else {
                        analytic.biases[which - mlp.handles.weights.len()].data()[k]
                    };
                    let denom = a.abs().max(fd.abs()).max(1e-5);
                    assert!(
                        (a - fd).abs() / denom < 1e-6,
                        "param {which} idx {k}: analytic {a} vs fd {fd}"
                    );
                }
            }
        }
    }
}
