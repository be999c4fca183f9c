//! Single training runs with best-iterate selection on a validation QoI.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng, Vector};
use crate::models::nozzle::nozzle_shock_from_field;
use crate::network::{forward_batch, loss_and_gradient, DropoutMasks, NetworkParams, NetworkSpec};
use crate::optimizer::{AdamConfig, Optimizer};
use crate::regularization::{RegStrategy, Regularizer};

/// Per-column z-score transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    /// Column means and (population) standard deviations; constant columns get unit scale.
    pub fn fit(m: &Matrix<f64>) -> Self {
        let (n, d) = (m.rows(), m.cols());
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (acc, v) in mean.iter_mut().zip(m.row(i)) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= n as f64);
        let mut var = vec![0.0; d];
        for i in 0..n {
            for ((acc, v), mu) in var.iter_mut().zip(m.row(i)).zip(&mean) {
                *acc += (v - mu) * (v - mu);
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / n as f64).sqrt();
                if s > 0.0 { s } else { 1.0 }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, m: &Matrix<f64>) -> Matrix<f64> {
        self.map(m, |v, mu, s| (v - mu) / s)
    }

    pub fn invert(&self, m: &Matrix<f64>) -> Matrix<f64> {
        self.map(m, |v, mu, s| v * s + mu)
    }

    fn map(&self, m: &Matrix<f64>, f: impl Fn(f64, f64, f64) -> f64) -> Matrix<f64> {
        let d = m.cols();
        let data = m
            .as_slice()
            .iter()
            .enumerate()
            .map(|(k, &v)| f(v, self.mean[k % d], self.std[k % d]))
            .collect();
        Matrix::from_vec(m.rows(), d, data).expect("same shape")
    }
}

/// Stacked relative error `‖y_val − y_pred‖₂ / ‖y_val‖₂`.
pub fn relative_rmse(y_val: &[Vector<f64>], y_pred: &[Vector<f64>]) -> Result<f64> {
    if y_val.len() != y_pred.len() {
        return Err(Error::dim("relative_rmse samples", y_val.len(), y_pred.len()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in y_val.iter().zip(y_pred) {
        if a.len() != b.len() {
            return Err(Error::dim("relative_rmse sample", a.len(), b.len()));
        }
        for (&t, &p) in a.iter().zip(b.iter()) {
            num += (t - p) * (t - p);
            den += t * t;
        }
    }
    stacked_ratio(num, den)
}

fn stacked_ratio(num: f64, den: f64) -> Result<f64> {
    if !(den > 0.0) {
        return Err(Error::input("validation targets have zero norm"));
    }
    Ok((num / den).sqrt())
}

/// Shock position of a predicted field; fields without a crossing map to an end of the domain.
pub fn shock_qoi(field: &[f64]) -> f64 {
    match nozzle_shock_from_field(field) {
        Ok(x) => x,
        Err(_) => {
            let interior = &field[1..field.len().saturating_sub(1)];
            if interior.iter().all(|&v| v > 0.0) {
                std::f64::consts::PI
            } else {
                0.0
            }
        }
    }
}

/// How network outputs become the quantity compared against validation targets.
#[derive(Debug, Clone, PartialEq)]
pub enum Qoi {
    /// Outputs mapped back through the target standardizer.
    Outputs(Standardizer),
    /// Shock position extracted from each output field.
    ShockPosition,
}

impl Qoi {
    pub fn extract(&self, out: &Matrix<f64>) -> Vec<f64> {
        match self {
            Qoi::Outputs(s) => s.invert(out).into_vec(),
            Qoi::ShockPosition => (0..out.rows()).map(|i| shock_qoi(out.row(i))).collect(),
        }
    }
}

/// Validation inputs (network space) with stacked physical targets.
#[derive(Debug, Clone)]
pub struct Validator {
    pub x: Matrix<f64>,
    pub target: Vec<f64>,
    pub qoi: Qoi,
}

impl Validator {
    /// `x_net` feeds the network; `y_phys` are targets in physical units (or fields for the shock QoI).
    pub fn new(x_net: Matrix<f64>, y_phys: &Matrix<f64>, qoi: Qoi) -> Result<Self> {
        if x_net.rows() != y_phys.rows() || x_net.rows() == 0 {
            return Err(Error::input("validation inputs and targets must be nonempty and aligned"));
        }
        let target = match &qoi {
            Qoi::Outputs(_) => y_phys.as_slice().to_vec(),
            Qoi::ShockPosition => (0..y_phys.rows()).map(|i| shock_qoi(y_phys.row(i))).collect(),
        };
        if !(target.iter().map(|t| t * t).sum::<f64>() > 0.0) {
            return Err(Error::input("validation targets have zero norm"));
        }
        Ok(Self { x: x_net, target, qoi })
    }

    pub fn predict(&self, params: &NetworkParams<f64>, spec: &NetworkSpec) -> Result<Vec<f64>> {
        Ok(self.qoi.extract(&forward_batch(params, spec, &self.x)?))
    }

    pub fn eps_v(&self, params: &NetworkParams<f64>, spec: &NetworkSpec) -> Result<f64> {
        let pred = self.predict(params, spec)?;
        if pred.len() != self.target.len() {
            return Err(Error::dim("validation outputs", self.target.len(), pred.len()));
        }
        let num: f64 = self.target.iter().zip(&pred).map(|(t, p)| (t - p) * (t - p)).sum();
        let den: f64 = self.target.iter().map(|t| t * t).sum();
        stacked_ratio(num, den)
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub spec: NetworkSpec,
    pub strategy: RegStrategy<f64>,
    pub adam: AdamConfig,
    pub iters: usize,
    /// `None` trains on the full batch every iteration.
    pub batch_size: Option<usize>,
    pub eval_every: usize,
    /// Seeds minibatch order and dropout masks.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub loss: f64,
    pub penalty: f64,
    pub eps_v: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: NetworkParams<f64>,
    pub best_iter: usize,
    pub best_eps_v: f64,
    pub trace: Vec<TraceEntry>,
}

/// Index of the smallest `eps_v` in the trace; earliest wins ties.
pub fn best_index(trace: &[TraceEntry]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, e) in trace.iter().enumerate() {
        if best.is_none_or(|b| e.eps_v < trace[b].eps_v) {
            best = Some(i);
        }
    }
    best
}

const SPLIT_BATCH: u64 = 1;
const SPLIT_DROPOUT: u64 = 2;

struct Batches<'a> {
    data: &'a Dataset<f64>,
    size: Option<usize>,
    order: Vec<usize>,
    pos: usize,
    rng: Rng,
    current: Option<Dataset<f64>>,
}

impl<'a> Batches<'a> {
    fn new(data: &'a Dataset<f64>, size: Option<usize>, rng: Rng) -> Self {
        let size = size.filter(|&b| b < data.len());
        Self { data, size, order: (0..data.len()).collect(), pos: data.len(), rng, current: None }
    }

    fn next(&mut self) -> &Dataset<f64> {
        let Some(b) = self.size else { return self.data };
        if self.pos + b > self.order.len() {
            self.rng.shuffle(&mut self.order);
            self.pos = 0;
        }
        let idx = &self.order[self.pos..self.pos + b];
        self.pos += b;
        self.current = Some(self.data.subset(idx));
        self.current.as_ref().expect("just set")
    }
}

/// Trains from `init` and returns the iterate (0 included) with the smallest validation error.
///
/// The trace entry for iteration `k` holds the training loss, penalty and
/// validation error at `θ_k`. In minibatch or dropout mode the loss is that of
/// the batch used for the step out of `θ_k`.
pub fn train(cfg: &TrainConfig, data: &Dataset<f64>, val: &Validator, init: NetworkParams<f64>) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::config("training data is empty"));
    }
    if cfg.iters == 0 || cfg.eval_every == 0 {
        return Err(Error::config("iters and eval_every must be at least 1"));
    }
    if !init.matches(&cfg.spec) {
        return Err(Error::config("initial parameters do not match the network"));
    }
    let n = init.len();
    let mut reg = Regularizer::new(cfg.strategy.clone(), n)?;
    let mut opt = Optimizer::adam(cfg.adam, n)?;
    let root = Rng::new(cfg.seed);
    let mut batches = Batches::new(data, cfg.batch_size, root.split(SPLIT_BATCH));
    let mut drop_rng = root.split(SPLIT_DROPOUT);
    let dropout_p = cfg.strategy.dropout_p().filter(|&p| p > 0.0);

    let mut params = init;
    let mut best = params.clone();
    let mut best_iter = 0;
    let mut best_eps = f64::INFINITY;
    let mut trace = Vec::with_capacity(cfg.iters / cfg.eval_every + 2);

    for k in 0..=cfg.iters {
        let step = if k < cfg.iters {
            reg.prepare(params.flat());
            let batch = batches.next();
            let masks = match dropout_p {
                Some(p) => Some(DropoutMasks::sample(&cfg.spec, batch.len(), p, &mut drop_rng)?),
                None => None,
            };
            Some(loss_and_gradient(&params, &cfg.spec, batch, masks.as_ref())?)
        } else {
            None
        };
        let evaluate = k % cfg.eval_every == 0 || k == cfg.iters;
        if evaluate {
            let loss = match &step {
                Some((l, _)) => *l,
                None => crate::network::mse_loss(&params, &cfg.spec, data)?,
            };
            let eps_v = val.eps_v(&params, &cfg.spec)?;
            let penalty = reg.penalty(params.flat())?;
            if !(loss + penalty).is_finite() || !eps_v.is_finite() {
                return Err(Error::Divergence {
                    iteration: k,
                    reason: format!("loss {loss}, penalty {penalty}, validation error {eps_v}"),
                });
            }
            trace.push(TraceEntry { iter: k, loss, penalty, eps_v });
            if eps_v < best_eps {
                best_eps = eps_v;
                best_iter = k;
                best.flat_mut().copy_from_slice(params.flat());
            }
        }
        let Some((loss, mut g)) = step else { break };
        if !loss.is_finite() {
            return Err(Error::Divergence { iteration: k, reason: format!("loss {loss}") });
        }
        reg.add_subgradient(params.flat(), &mut g)?;
        opt.step(params.flat_mut(), &g)?;
        if !params.flat().all_finite() {
            return Err(Error::Divergence { iteration: k + 1, reason: "non-finite parameters".into() });
        }
    }
    Ok(TrainOutcome { best, best_iter, best_eps_v: best_eps, trace })
}
