use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NetworkSpec;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng, Vector};
use crate::scalar::Scalar;

/// All trainable parameters of a network, stored as one flat vector θ.
///
/// Layout: layer 1, layer 2, …, output layer; inside a layer the weights
/// row-major (`out × in`) followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T> {
    theta: Vector<T>,
    shapes: Vec<(usize, usize)>,
}

/// Borrowed view of one layer's weights and bias.
#[derive(Debug, Clone, Copy)]
pub struct LayerView<'a, T> {
    pub rows: usize,
    pub cols: usize,
    pub weights: &'a [T],
    pub bias: &'a [T],
}

fn shapes_of(spec: &NetworkSpec) -> Vec<(usize, usize)> {
    spec.layers().iter().map(|l| (l.out_dim, l.in_dim)).collect()
}

impl<T: Scalar> NetworkParams<T> {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Self {
            theta: Vector::zeros(spec.param_count()),
            shapes: shapes_of(spec),
        }
    }

    /// Inverse of [`NetworkParams::flat`].
    pub fn from_flat(spec: &NetworkSpec, theta: Vector<T>) -> Result<Self> {
        if theta.len() != spec.param_count() {
            return Err(Error::dim("NetworkParams::from_flat", spec.param_count(), theta.len()));
        }
        Ok(Self {
            theta,
            shapes: shapes_of(spec),
        })
    }

    pub fn from_layers(layers: Vec<(Matrix<T>, Vector<T>)>) -> Result<Self> {
        let mut shapes = Vec::with_capacity(layers.len());
        let mut theta = Vec::new();
        for (j, (w, b)) in layers.into_iter().enumerate() {
            if w.rows() != b.len() {
                return Err(Error::dim("NetworkParams::from_layers bias", w.rows(), b.len()));
            }
            if let Some(&(prev_out, _)) = shapes.last() {
                if prev_out != w.cols() {
                    return Err(Error::config(format!(
                        "layer {j} expects {} inputs but previous layer outputs {prev_out}",
                        w.cols()
                    )));
                }
            }
            shapes.push((w.rows(), w.cols()));
            theta.extend(w.into_vec());
            theta.extend(b.into_vec());
        }
        Ok(Self {
            theta: Vector::from_vec(theta),
            shapes,
        })
    }

    pub fn flat(&self) -> &Vector<T> {
        &self.theta
    }

    pub fn flat_mut(&mut self) -> &mut Vector<T> {
        &mut self.theta
    }

    pub fn into_flat(self) -> Vector<T> {
        self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn num_layers(&self) -> usize {
        self.shapes.len()
    }

    pub fn layer_range(&self, j: usize) -> Range<usize> {
        let start: usize = self.shapes[..j].iter().map(|&(r, c)| r * c + r).sum();
        let (r, c) = self.shapes[j];
        start..start + r * c + r
    }

    pub fn layer(&self, j: usize) -> LayerView<'_, T> {
        let range = self.layer_range(j);
        let (rows, cols) = self.shapes[j];
        let (weights, bias) = self.theta[range].split_at(rows * cols);
        LayerView {
            rows,
            cols,
            weights,
            bias,
        }
    }

    pub fn layers(&self) -> Vec<(Matrix<T>, Vector<T>)> {
        (0..self.num_layers())
            .map(|j| {
                let v = self.layer(j);
                (
                    Matrix::from_vec(v.rows, v.cols, v.weights.to_vec()).expect("layer shape"),
                    Vector::from_vec(v.bias.to_vec()),
                )
            })
            .collect()
    }

    /// Whether these parameters have the layer shapes of `spec`.
    pub fn matches(&self, spec: &NetworkSpec) -> bool {
        self.shapes == shapes_of(spec)
    }

    pub(crate) fn check(&self, spec: &NetworkSpec) -> Result<()> {
        if self.matches(spec) {
            Ok(())
        } else {
            Err(Error::config(
                "network parameters do not match the layer specification",
            ))
        }
    }
}

/// Glorot-uniform weights on `±√(6/(in+out))`, zero biases.
pub fn init_params<T: Scalar>(spec: &NetworkSpec, rng: &mut Rng) -> NetworkParams<T> {
    let mut params = NetworkParams::zeros(spec);
    for (j, layer) in spec.layers().iter().enumerate() {
        let bound = (6.0 / (layer.in_dim + layer.out_dim) as f64).sqrt();
        let range = params.layer_range(j);
        let n_w = layer.out_dim * layer.in_dim;
        let draws = rng
            .uniform::<T>(-bound, bound, n_w)
            .expect("Glorot bound is a nonempty interval");
        params.theta[range.start..range.start + n_w].copy_from_slice(&draws);
    }
    params
}

/// On-disk parameter dump: `{ "spec": [...layers], "flat_theta": [...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDump {
    pub spec: NetworkSpec,
    pub flat_theta: Vec<f64>,
}

impl ParamDump {
    pub fn new<T: Scalar>(spec: &NetworkSpec, params: &NetworkParams<T>) -> Self {
        Self {
            spec: spec.clone(),
            flat_theta: params.flat().iter().map(|v| v.to_f64_lossy()).collect(),
        }
    }

    pub fn params<T: Scalar>(&self) -> Result<NetworkParams<T>> {
        self.spec.validate()?;
        NetworkParams::from_flat(&self.spec, Vector::from_f64(&self.flat_theta))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let dump: Self = serde_json::from_str(&text)?;
        dump.params::<f64>()?;
        Ok(dump)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
