//! Dense kernels, hand-written layers, loss, optimizer and a finite-difference
//! gradient oracle.

mod adam;
mod gradcheck;
mod layers;
mod matrix;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{fd_gradcheck, numerical_gradient, relative_error};
pub use layers::{
    argmax_rows, dropout_backward, dropout_forward, linear_backward, linear_forward,
    log_softmax, logsoftmax_nll, relu_backward, relu_forward, softmax,
};
pub use matrix::Matrix;
