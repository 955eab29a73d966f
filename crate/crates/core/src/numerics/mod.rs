//! Dense-matrix engine with reverse-mode gradients, the training losses,
//! and the optimizer. Training runs in `f32`; gradient checks exercise the
//! identical code paths in `f64`.

pub mod checkpoint;
pub mod loss;
pub mod matrix;
pub mod mlp;
pub mod optim;
pub mod tape;

pub use checkpoint::{
    checkpoint_file_id, load_checkpoint, peek_dtype, save_checkpoint, CheckpointError,
    LoadedCheckpoint,
};
pub use loss::{aucroc_loss, sigmoid_xent, sigmoid_xent_mean, softmax_xent, LossError};
pub use matrix::{Dtype, Matrix, Scalar};
pub use mlp::{
    init_mlp, mlp_apply, mlp_backward, mlp_forward, Activation, LayerSpec, Mlp, MlpHandles,
    MlpSpec,
};
pub use optim::{AdamConfig, Optimizer, StepOutcome};
pub use tape::{Grads, NodeGrads, ParamId, ParamStore, Tape, Value};
