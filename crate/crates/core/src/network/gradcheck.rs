//! Central finite-difference gradients for checking backpropagation.

use crate::dataset::Dataset;
use crate::error::Result;
use crate::linalg::Vector;

use super::{loss_and_gradient, DropoutMasks, NetworkParams, NetworkSpec};

/// Central-difference gradient of the (optionally masked) MSE loss.
pub fn numerical_gradient(
    params: &NetworkParams<f64>,
    spec: &NetworkSpec,
    batch: &Dataset<f64>,
    dropout: Option<&DropoutMasks<f64>>,
    h: f64,
) -> Result<Vector<f64>> {
    let mut work = params.clone();
    let mut grad = Vector::zeros(params.len());
    for i in 0..params.len() {
        let orig = work.flat()[i];
        work.flat_mut()[i] = orig + h;
        let plus = loss_and_gradient(&work, spec, batch, dropout)?.0;
        work.flat_mut()[i] = orig - h;
        let minus = loss_and_gradient(&work, spec, batch, dropout)?.0;
        work.flat_mut()[i] = orig;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Largest componentwise `|a−b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
