//! Per-layer ℓ1 diagnostics and the generalization-bound constants `K`.
//!
//! Layer `j` groups its weight matrix and bias. The weighted constants are
//! computed as the right-hand side of an upper bound, not the exact supremum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::check_len;
use crate::network::NetworkParams;
use crate::scalar::Scalar;

/// Norms of one layer. Optional entries need `θ_LF` or a weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNorms {
    pub l1: f64,
    pub l1_weighted: Option<f64>,
    pub l1_diff: Option<f64>,
    pub l1_lf: Option<f64>,
    pub theta_max: f64,
    pub theta_lf_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNormReport {
    pub layers: Vec<LayerNorms>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KReport {
    pub k_std_hf: f64,
    pub k_wgt_hf: f64,
    pub k_std_bf: f64,
    pub k_wgt_bf: f64,
}

impl KReport {
    /// Both bi-fidelity constants below the standard one, which is below the weighted one.
    pub fn ordering_holds(&self) -> bool {
        self.k_std_bf < self.k_std_hf && self.k_wgt_bf < self.k_std_hf && self.k_std_hf < self.k_wgt_hf
    }
}

fn abs_sum<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.to_f64_lossy().abs()).sum()
}

fn abs_max<T: Scalar>(x: &[T]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.to_f64_lossy().abs()))
}

pub fn layer_l1_norms<T: Scalar>(
    params: &NetworkParams<T>,
    theta_lf: Option<&[T]>,
    weights: Option<&[T]>,
) -> Result<LayerNormReport> {
    let n = params.len();
    if let Some(lf) = theta_lf {
        check_len("theta_lf", n, lf.len()).map_err(|e| Error::config(e.to_string()))?;
    }
    if let Some(w) = weights {
        check_len("weights", n, w.len()).map_err(|e| Error::config(e.to_string()))?;
    }
    let theta = params.flat().as_slice();
    let layers = (0..params.num_layers())
        .map(|j| {
            let r = params.layer_range(j);
            let t = &theta[r.clone()];
            let lf = theta_lf.map(|lf| &lf[r.clone()]);
            LayerNorms {
                l1: abs_sum(t),
                l1_weighted: weights.map(|w| {
                    t.iter().zip(&w[r.clone()]).map(|(&a, &b)| (a * b).to_f64_lossy().abs()).sum()
                }),
                l1_diff: lf.map(|lf| t.iter().zip(lf).map(|(&a, &b)| (a - b).to_f64_lossy().abs()).sum()),
                l1_lf: lf.map(abs_sum),
                theta_max: abs_max(t),
                theta_lf_max: lf.map(abs_max),
            }
        })
        .collect();
    Ok(LayerNormReport { layers })
}

fn missing(what: &str) -> Error {
    Error::config(format!("bound constant needs {what}"))
}

fn product<F>(report: &LayerNormReport, what: &str, f: F) -> Result<f64>
where
    F: Fn(&LayerNorms) -> Option<f64>,
{
    report
        .layers
        .iter()
        .map(|l| f(l).ok_or_else(|| missing(what)))
        .try_fold(1.0, |acc, v| v.map(|v| acc * v))
}

pub fn k_std_hf(report: &LayerNormReport) -> f64 {
    report.layers.iter().map(|l| 2.0 * l.l1).product()
}

pub fn k_wgt_hf(report: &LayerNormReport, eps_w: f64) -> Result<f64> {
    product(report, "a weight vector", |l| Some(2.0 * l.l1_weighted? * (l.theta_max + eps_w)))
}

pub fn k_std_bf(report: &LayerNormReport) -> Result<f64> {
    product(report, "low-fidelity parameters", |l| Some(2.0 * (l.l1_diff? + l.l1_lf?)))
}

pub fn k_wgt_bf(report: &LayerNormReport, eps_w: f64) -> Result<f64> {
    product(report, "low-fidelity parameters and a weight vector", |l| {
        Some(2.0 * l.l1_weighted? * (l.theta_lf_max? + eps_w))
    })
}

/// All four constants from one report; fails if `θ_LF` or weights are absent.
pub fn k_constants(report: &LayerNormReport, eps_w: f64) -> Result<KReport> {
    Ok(KReport {
        k_std_hf: k_std_hf(report),
        k_wgt_hf: k_wgt_hf(report, eps_w)?,
        k_std_bf: k_std_bf(report)?,
        k_wgt_bf: k_wgt_bf(report, eps_w)?,
    })
}
