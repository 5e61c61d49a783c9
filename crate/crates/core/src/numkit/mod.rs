//! Dense numerics, small MLPs with analytic gradients, probability
//! primitives and an adaptive-moment optimizer.

pub mod linalg;
pub mod matrix;
pub mod mlp;
pub mod optim;
pub mod prob;

pub use matrix::{axpy, dot, norm, squared_distance, DenseMatrix};
pub use mlp::{mlp_backward, mlp_forward, Activation, Layer, MlpParams, MlpTrace};
pub use optim::{optim_step, AdamConfig, OptState};
pub use prob::{kl_divergence, log_sum_exp, sigmoid, softmax};
