use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::ActivationKind;
use crate::error::{Error, Result};

/// One dense layer: `out_dim × in_dim` weights, `out_dim` biases, then the activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: ActivationKind,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: ActivationKind) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.out_dim * self.in_dim + self.out_dim
    }
}

/// A feed-forward network as an ordered list of layers; the last one is the output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NetworkSpec {
    layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = Self { layers };
        spec.validate()?;
        Ok(spec)
    }

    /// `input → hidden[0] → … → output`, with `hidden_act` on hidden layers.
    pub fn mlp(
        input: usize,
        hidden: &[usize],
        hidden_act: ActivationKind,
        output: usize,
        output_act: ActivationKind,
    ) -> Result<Self> {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(output);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(j, w)| {
                let act = if j + 2 == dims.len() {
                    output_act
                } else {
                    hidden_act
                };
                LayerSpec::new(w[0], w[1], act)
            })
            .collect();
        Self::new(layers)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        for (j, l) in self.layers.iter().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 {
                return Err(Error::config(format!("layer {j} has a zero dimension")));
            }
            l.activation.validate()?;
        }
        for (j, w) in self.layers.windows(2).enumerate() {
            if w[0].out_dim != w[1].in_dim {
                return Err(Error::config(format!(
                    "layer {j} outputs {} values but layer {} expects {}",
                    w[0].out_dim,
                    j + 1,
                    w[1].in_dim
                )));
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    /// Flat-vector ranges of each layer (weights row-major, then bias).
    pub fn layer_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.layers
            .iter()
            .map(|l| {
                let r = start..start + l.param_count();
                start = r.end;
                r
            })
            .collect()
    }
}

/// Encoder and decoder halves; trained as one composed network with targets equal to inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoencoderSpec {
    pub encoder: Vec<LayerSpec>,
    pub decoder: Vec<LayerSpec>,
}

impl AutoencoderSpec {
    /// Mirror-image widths, e.g. `input=1048, widths=[128,64,16]` gives
    /// `1048→128→64→16 | 16→16→64→128→1048`.
    pub fn symmetric(
        input: usize,
        widths: &[usize],
        hidden_act: ActivationKind,
        output_act: ActivationKind,
    ) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::config("autoencoder needs at least one encoder width"));
        }
        let mut enc_dims = vec![input];
        enc_dims.extend_from_slice(widths);
        let encoder = enc_dims
            .windows(2)
            .map(|w| LayerSpec::new(w[0], w[1], hidden_act))
            .collect();
        let mut dec_dims: Vec<usize> = widths.iter().rev().copied().collect();
        dec_dims.insert(0, *widths.last().unwrap());
        dec_dims.push(input);
        let n = dec_dims.len();
        let decoder = dec_dims
            .windows(2)
            .enumerate()
            .map(|(j, w)| {
                let act = if j + 2 == n { output_act } else { hidden_act };
                LayerSpec::new(w[0], w[1], act)
            })
            .collect();
        let spec = Self { encoder, decoder };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder.is_empty() || self.decoder.is_empty() {
            return Err(Error::config("encoder and decoder must be nonempty"));
        }
        let latent = self.latent_dim();
        if self.decoder[0].in_dim != latent {
            return Err(Error::config(format!(
                "encoder latent dimension {latent} differs from decoder input {}",
                self.decoder[0].in_dim
            )));
        }
        let input = self.encoder[0].in_dim;
        if latent >= input {
            return Err(Error::config(format!(
                "latent dimension {latent} must be smaller than input dimension {input}"
            )));
        }
        self.network().map(|_| ())
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder[self.encoder.len() - 1].out_dim
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].in_dim
    }

    /// The composed encoder-then-decoder network.
    pub fn network(&self) -> Result<NetworkSpec> {
        NetworkSpec::new(self.encoder.iter().chain(&self.decoder).copied().collect())
    }
}
