//! Dense MLP substrate: parameters, forward/backward, Adam, gradient checking.
//!
//! Matrices are `ndarray::Array2<f64>` with one sample per row. Layer weights
//! are stored `fan_in x fan_out`, so a layer computes `x . W + b`.

mod adam;
mod gradcheck;
mod mlp;
mod params;

pub use adam::{AdamConfig, AdamState, Direction};
pub use gradcheck::{grad_check, GradCheck, FD_STEP};
pub use mlp::{backward, forward, Backward, ForwardCache, MlpArch, OutputActivation};
pub use params::{LayerShape, ParamVector};

pub use ndarray::{Array1, Array2};
