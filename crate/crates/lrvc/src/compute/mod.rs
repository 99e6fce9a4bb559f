//! Differentiable computation substrate: tensors, a reverse-mode tape,
//! parameters, the optimizer, and gradient verification.

mod gradcheck;
mod optim;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use optim::OptimizerState;
pub use params::{ParamId, Parameter, ParamStore};
pub use tape::{pixel_unshuffle_1d, NodeId, Tape};
pub use tensor::{Real, Tensor};

/// Conv1d output length: floor((T + 2·padding − kernel)/stride) + 1.
pub fn conv1d_output_len(t: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    if kernel == 0 || stride == 0 || t + 2 * padding < kernel {
        return None;
    }
    Some((t + 2 * padding - kernel) / stride + 1)
}
