//! Feed-forward networks and autoencoders: evaluation, MSE loss and exact gradients.
//!
//! Batches are matrices with one sample per row. A hidden layer computes
//! `A_j = σ_j(A_{j-1} Ψ_jᵀ + β_j)`; the last layer is the output layer and may
//! carry its own activation (identity for regression, tanh for the autoencoder).

pub mod gradcheck;
mod activation;
mod params;
mod spec;

pub use activation::{activation_eval, ActivationKind};
pub use params::{init_params, LayerView, NetworkParams, ParamDump};
pub use spec::{AutoencoderSpec, LayerSpec, NetworkSpec};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng, Vector};
use crate::regularization::dropout_mask;
use crate::scalar::Scalar;

/// Inverted-dropout masks for the hidden layers of one training batch.
///
/// Entry `j` multiplies the output of layer `j`; the output layer is never masked.
#[derive(Debug, Clone)]
pub struct DropoutMasks<T> {
    masks: Vec<Option<Matrix<T>>>,
}

impl<T: Scalar> DropoutMasks<T> {
    pub fn sample(spec: &NetworkSpec, batch: usize, p: f64, rng: &mut Rng) -> Result<Self> {
        let n = spec.layers().len();
        let masks = spec
            .layers()
            .iter()
            .enumerate()
            .map(|(j, l)| {
                if j + 1 < n {
                    dropout_mask(batch, l.out_dim, p, rng).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { masks })
    }
}

/// Pre-activations and activations of every layer, kept for the backward pass.
struct Tape<T> {
    input: Matrix<T>,
    pre: Vec<Matrix<T>>,
    post: Vec<Matrix<T>>,
}

fn affine<T: Scalar>(layer: &LayerView<'_, T>, a_prev: &Matrix<T>) -> Matrix<T> {
    let batch = a_prev.rows();
    let mut z = Matrix::zeros(batch, layer.rows);
    for i in 0..batch {
        z.row_mut(i).copy_from_slice(layer.bias);
    }
    // Z += A_prev · Ψᵀ
    T::gemm(
        batch,
        layer.cols,
        layer.rows,
        T::one(),
        a_prev.as_slice(),
        layer.cols,
        1,
        layer.weights,
        1,
        layer.cols,
        T::one(),
        z.as_mut_slice(),
        layer.rows,
        1,
    );
    z
}

fn run_forward<T: Scalar>(
    params: &NetworkParams<T>,
    spec: &NetworkSpec,
    x: &Matrix<T>,
    dropout: Option<&DropoutMasks<T>>,
    keep: bool,
) -> Result<Tape<T>> {
    params.check(spec)?;
    if x.cols() != spec.input_dim() {
        return Err(Error::dim("forward input", spec.input_dim(), x.cols()));
    }
    let n = spec.layers().len();
    let mut pre = Vec::with_capacity(n);
    let mut post: Vec<Matrix<T>> = Vec::with_capacity(n);
    for (j, ls) in spec.layers().iter().enumerate() {
        let a_prev = if j == 0 { x } else { &post[post.len() - 1] };
        let z = affine(&params.layer(j), a_prev);
        let mut a = z.clone();
        let act = ls.activation;
        if act != ActivationKind::Identity {
            a.as_mut_slice().iter_mut().for_each(|v| *v = act.eval(*v));
        }
        if let Some(mask) = dropout.and_then(|d| d.masks.get(j)).and_then(Option::as_ref) {
            for (v, &m) in a.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *v *= m;
            }
        }
        if keep {
            pre.push(z);
        } else {
            post.clear();
        }
        post.push(a);
    }
    Ok(Tape {
        input: if keep { x.clone() } else { Matrix::zeros(0, 0) },
        pre,
        post,
    })
}

/// Network outputs for a batch of inputs (one per row).
pub fn forward_batch<T: Scalar>(
    params: &NetworkParams<T>,
    spec: &NetworkSpec,
    x: &Matrix<T>,
) -> Result<Matrix<T>> {
    let mut tape = run_forward(params, spec, x, None, false)?;
    Ok(tape.post.pop().expect("at least one layer"))
}

/// Network output for one input vector.
pub fn forward<T: Scalar>(
    params: &NetworkParams<T>,
    spec: &NetworkSpec,
    x: &Vector<T>,
) -> Result<Vector<T>> {
    let batch = Matrix::from_vec(1, x.len(), x.to_vec())?;
    Ok(Vector::from_vec(forward_batch(params, spec, &batch)?.into_vec()))
}

fn check_data<T: Scalar>(spec: &NetworkSpec, data: &Dataset<T>) -> Result<()> {
    if data.is_empty() {
        return Err(Error::config("dataset is empty"));
    }
    if data.output_dim() != spec.output_dim() {
        return Err(Error::dim("target dimension", spec.output_dim(), data.output_dim()));
    }
    Ok(())
}

fn squared_error<T: Scalar>(pred: &Matrix<T>, target: &Matrix<T>) -> T {
    pred.as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(&p, &t)| (t - p) * (t - p))
        .sum()
}

/// Mean over samples of the squared Euclidean prediction error.
pub fn mse_loss<T: Scalar>(params: &NetworkParams<T>, spec: &NetworkSpec, data: &Dataset<T>) -> Result<T> {
    check_data(spec, data)?;
    let pred = forward_batch(params, spec, data.x())?;
    Ok(squared_error(&pred, data.y()) / T::lit(data.len() as f64))
}

/// Gradient of [`mse_loss`] with respect to the flat parameter vector.
pub fn backprop<T: Scalar>(params: &NetworkParams<T>, spec: &NetworkSpec, batch: &Dataset<T>) -> Result<Vector<T>> {
    loss_and_gradient(params, spec, batch, None).map(|(_, g)| g)
}

/// MSE loss and its exact gradient in one forward/backward sweep.
///
/// With `dropout`, the masked network is differentiated (the masks are
/// constants of the sweep).
pub fn loss_and_gradient<T: Scalar>(
    params: &NetworkParams<T>,
    spec: &NetworkSpec,
    batch: &Dataset<T>,
    dropout: Option<&DropoutMasks<T>>,
) -> Result<(T, Vector<T>)> {
    check_data(spec, batch)?;
    let tape = run_forward(params, spec, batch.x(), dropout, true)?;
    let n_layers = spec.layers().len();
    let b = batch.len();
    let scale = T::lit(2.0 / b as f64);

    let out = &tape.post[n_layers - 1];
    let loss = squared_error(out, batch.y()) / T::lit(b as f64);

    // dL/dA for the output layer.
    let mut d_a: Matrix<T> = out.clone();
    for (d, &y) in d_a.as_mut_slice().iter_mut().zip(batch.y().as_slice()) {
        *d = scale * (*d - y);
    }

    let mut grad = Vector::zeros(params.len());
    for j in (0..n_layers).rev() {
        let ls = spec.layers()[j];
        let layer = params.layer(j);
        if let Some(mask) = dropout.and_then(|d| d.masks.get(j)).and_then(Option::as_ref) {
            for (v, &m) in d_a.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *v *= m;
            }
        }
        // dZ = dA ⊙ σ'(Z); masked entries carry a zero factor already.
        let mut d_z = d_a;
        if ls.activation != ActivationKind::Identity {
            let z = tape.pre[j].as_slice();
            let a = tape.post[j].as_slice();
            let act = ls.activation;
            // The stored activation is post-mask; recompute the unmasked value where needed.
            let masked = dropout.and_then(|d| d.masks.get(j)).and_then(Option::as_ref).is_some();
            for (k, d) in d_z.as_mut_slice().iter_mut().enumerate() {
                let a_k = if masked { act.eval(z[k]) } else { a[k] };
                *d *= act.derivative(z[k], a_k);
            }
        }
        let a_prev = if j == 0 { &tape.input } else { &tape.post[j - 1] };
        let range = params.layer_range(j);
        let (g_w, g_b) = grad[range].split_at_mut(layer.rows * layer.cols);
        // dΨ = dZᵀ · A_prev
        T::gemm(
            layer.rows,
            b,
            layer.cols,
            T::one(),
            d_z.as_slice(),
            1,
            layer.rows,
            a_prev.as_slice(),
            layer.cols,
            1,
            T::zero(),
            g_w,
            layer.cols,
            1,
        );
        for i in 0..b {
            for (gb, &dz) in g_b.iter_mut().zip(d_z.row(i)) {
                *gb += dz;
            }
        }
        if j > 0 {
            // dA_prev = dZ · Ψ
            let mut next = Matrix::zeros(b, layer.cols);
            T::gemm(
                b,
                layer.rows,
                layer.cols,
                T::one(),
                d_z.as_slice(),
                layer.rows,
                1,
                layer.weights,
                layer.cols,
                1,
                T::zero(),
                next.as_mut_slice(),
                layer.cols,
                1,
            );
            d_a = next;
        } else {
            d_a = d_z;
        }
    }
    Ok((loss, grad))
}

/// Encodes `x` to the latent space and decodes it back.
pub fn autoencode_forward<T: Scalar>(
    params: &NetworkParams<T>,
    spec: &AutoencoderSpec,
    x: &Vector<T>,
) -> Result<(Vector<T>, Vector<T>)> {
    let net = spec.network()?;
    let batch = Matrix::from_vec(1, x.len(), x.to_vec())?;
    let tape = run_forward(params, &net, &batch, None, true)?;
    let latent = tape.post[spec.encoder.len() - 1].clone().into_vec();
    let recon = tape.post[net.layers().len() - 1].clone().into_vec();
    Ok((Vector::from_vec(latent), Vector::from_vec(recon)))
}
