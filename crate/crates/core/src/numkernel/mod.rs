//! Deterministic `f64` tensor kernel.
//!
//! Every layer exposes a pure forward function plus an explicit backward
//! function, and a thin stateful wrapper that caches activations in train
//! mode. Wrappers keep a LIFO stack of caches so a layer applied several
//! times per step (the decoder cell, the output projection) can be unwound
//! in reverse order during backpropagation through time.

mod adam;
mod batchnorm;
pub mod checkpoint;
mod conv;
mod embedding;
pub mod gradcheck;
mod linear;
mod loss;
mod lstm;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use batchnorm::{
    batchnorm1d_backward, batchnorm1d_eval, batchnorm1d_train, BatchNorm1d, BnCache, RunningStats,
    BN_EPS, BN_MOMENTUM,
};
pub use checkpoint::Checkpoint;
pub use conv::{conv1d, conv1d_backward, Conv1d, KERNEL_SIZE};
pub use embedding::Embedding;
pub use gradcheck::{finite_difference_grad, max_rel_error};
pub use linear::{linear, linear_backward, Linear};
pub use loss::{log_softmax_row, softmax_cross_entropy, weighted_softmax_cross_entropy};
pub use lstm::{lstm_cell, lstm_cell_backward, LstmCache, LstmCell};
pub use tensor::Tensor;
pub(crate) use tensor::{axpy, dot};

use serde::{Deserialize, Serialize};

/// Train mode caches activations and updates batch statistics; eval mode
/// does neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

/// Anything that owns trainable tensors.
pub trait Parameterized {
    /// Trainable tensors in a fixed order, each with a stable name.
    fn params(&self) -> Vec<(String, &Tensor)>;
    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)>;

    fn zero_grad(&mut self) {
        for (_, p) in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_parameters(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }
}

/// Prefixes every parameter name of `inner` with `prefix.`.
pub(crate) fn prefixed<'a>(prefix: &str, inner: Vec<(String, &'a Tensor)>) -> Vec<(String, &'a Tensor)> {
    inner.into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)).collect()
}

pub(crate) fn prefixed_mut<'a>(
    prefix: &str,
    inner: Vec<(String, &'a mut Tensor)>,
) -> Vec<(String, &'a mut Tensor)> {
    inner.into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)).collect()
}

/// Initialization bound used for linear, conv and recurrent weights.
pub fn init_bound(fan_in: usize) -> f64 {
    1.0 / (fan_in.max(1) as f64).sqrt()
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Gradient of ReLU given its forward output.
pub fn relu_backward(output: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (gi, &o) in g.data_mut().iter_mut().zip(output.data()) {
        if o <= 0.0 {
            *gi = 0.0;
        }
    }
    g
}
