//! Gaussian-process prior machinery shared by the nonparametric samplers.

mod field;
mod kernel;
mod link;
mod prefix;

pub use field::GpField;
pub use kernel::{cholesky_with_jitter, kernel_matrix, KernelParams, MAX_JITTER, MIN_JITTER};
pub use link::{link_exp, link_sigmoid, log_sigmoid};
pub use prefix::PrefixGp;
