//! Run configuration: JSON schema, presets and dotted-path overrides.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::models::Problem;
use crate::network::{ActivationKind, AutoencoderSpec, NetworkSpec};
use crate::optimizer::AdamConfig;
use crate::regularization::DEFAULT_EPS_W;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Desk,
    Full,
}

impl Scale {
    pub fn name(self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Full => "full",
        }
    }
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            _ => Err(Error::config(format!("unknown scale {s:?} (expected desk or full)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArchConfig {
    Mlp {
        hidden: Vec<usize>,
        activation: ActivationKind,
        output_activation: ActivationKind,
    },
    Autoencoder {
        /// Encoder widths down to the latent size; the decoder mirrors them.
        widths: Vec<usize>,
        activation: ActivationKind,
        output_activation: ActivationKind,
    },
}

impl ArchConfig {
    pub fn build(&self, input: usize, output: usize) -> Result<NetworkSpec> {
        match self {
            ArchConfig::Mlp { hidden, activation, output_activation } => {
                NetworkSpec::mlp(input, hidden, *activation, output, *output_activation)
            }
            ArchConfig::Autoencoder { widths, activation, output_activation } => {
                if input != output {
                    return Err(Error::config("autoencoder needs equal input and output sizes"));
                }
                AutoencoderSpec::symmetric(input, widths, *activation, *output_activation)?.network()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    None,
    L2,
    Dropout,
    L1,
    L1Reweighted,
    L1BfDiff,
    L1BfWeighted,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::None => "none",
            StrategyKind::L2 => "l2",
            StrategyKind::Dropout => "dropout",
            StrategyKind::L1 => "l1",
            StrategyKind::L1Reweighted => "l1_reweighted",
            StrategyKind::L1BfDiff => "l1_bf_diff",
            StrategyKind::L1BfWeighted => "l1_bf_weighted",
        }
    }

    /// Short label used in tables.
    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::None => "None",
            StrategyKind::L2 => "L2",
            StrategyKind::Dropout => "Dropout",
            StrategyKind::L1 => "I",
            StrategyKind::L1Reweighted => "II",
            StrategyKind::L1BfDiff => "III",
            StrategyKind::L1BfWeighted => "IV",
        }
    }

    pub fn needs_lambda(self) -> bool {
        !matches!(self, StrategyKind::None | StrategyKind::Dropout)
    }

    pub fn is_bifidelity(self) -> bool {
        matches!(self, StrategyKind::L1BfDiff | StrategyKind::L1BfWeighted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    Random,
    LowFidelity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    #[serde(rename = "type")]
    pub kind: StrategyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropout_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_lf_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inits: Option<usize>,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            lambda: None,
            lambda_grid: None,
            eps_w: None,
            dropout_p: None,
            theta_lf_path: None,
            init: None,
            inits: None,
        }
    }

    pub fn with_grid(kind: StrategyKind, grid: &[f64]) -> Self {
        Self { lambda_grid: Some(grid.to_vec()), ..Self::new(kind) }
    }

    pub fn with_lambda(kind: StrategyKind, lambda: f64) -> Self {
        Self { lambda: Some(lambda), ..Self::new(kind) }
    }

    /// Candidate strengths: the grid if given, else the single value, else none.
    pub fn lambdas(&self) -> Vec<Option<f64>> {
        match (&self.lambda_grid, self.lambda) {
            (Some(g), _) => g.iter().map(|&l| Some(l)).collect(),
            (None, Some(l)) => vec![Some(l)],
            (None, None) => vec![None],
        }
    }

    pub fn eps_w(&self) -> f64 {
        self.eps_w.unwrap_or(DEFAULT_EPS_W)
    }

    pub fn init_mode(&self) -> InitMode {
        self.init.unwrap_or(if self.kind.is_bifidelity() { InitMode::LowFidelity } else { InitMode::Random })
    }

    pub fn validate(&self) -> Result<()> {
        let name = self.kind.name();
        if self.kind.needs_lambda() {
            let ls = self.lambdas();
            if ls.iter().any(Option::is_none) {
                return Err(Error::config(format!("strategy {name} needs lambda or lambda_grid")));
            }
            if ls.iter().flatten().any(|&l| !(l > 0.0 && l.is_finite())) {
                return Err(Error::config(format!("strategy {name}: lambdas must be positive")));
            }
            if ls.is_empty() {
                return Err(Error::config(format!("strategy {name}: empty lambda_grid")));
            }
        } else if self.lambda.is_some() || self.lambda_grid.is_some() {
            return Err(Error::config(format!("strategy {name} takes no lambda")));
        }
        if self.kind == StrategyKind::Dropout {
            let p = self.dropout_p.ok_or_else(|| Error::config("dropout needs dropout_p"))?;
            if !(0.0..1.0).contains(&p) {
                return Err(Error::config(format!("dropout_p must lie in [0, 1), got {p}")));
            }
        }
        if !(self.eps_w() > 0.0) {
            return Err(Error::config("eps_w must be positive"));
        }
        if self.inits == Some(0) {
            return Err(Error::config(format!("strategy {name}: inits must be at least 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LofiConfig {
    pub lambda: f64,
    /// Learning rate; falls back to the optimizer's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub iters: usize,
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// Low-fidelity samples held out to select the best iterate.
    pub holdout: usize,
    #[serde(default = "one")]
    pub inits: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counts {
    #[serde(rename = "N_l")]
    pub n_l: usize,
    #[serde(rename = "N_h")]
    pub n_h: usize,
    #[serde(rename = "N_val")]
    pub n_val: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub inits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub eta: f64,
    pub iters: usize,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default = "one")]
    pub eval_every: usize,
    #[serde(default = "default_b_m")]
    pub b_m: f64,
    #[serde(default = "default_b_v")]
    pub b_v: f64,
    #[serde(default = "default_eps_a")]
    pub eps_a: f64,
}

fn default_b_m() -> f64 {
    AdamConfig::default().b_m
}

fn default_b_v() -> f64 {
    AdamConfig::default().b_v
}

fn default_eps_a() -> f64 {
    AdamConfig::default().eps_a
}

impl OptimizerConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig { eta: self.eta, b_m: self.b_m, b_v: self.b_v, eps_a: self.eps_a }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub arch: ArchConfig,
    pub strategies: Vec<StrategyConfig>,
    pub lofi: LofiConfig,
    pub counts: Counts,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub scale: Scale,
    /// z-score inputs and outputs with low-fidelity statistics; defaults to true for the beam.
    #[serde(default)]
    pub standardize: Option<bool>,
    /// Elements of the high-fidelity beam mesh.
    #[serde(default)]
    pub beam_elements: Option<usize>,
    /// External high-fidelity beam samples (`q,E1,E2,E3,y`).
    #[serde(default)]
    pub hifi_csv: Option<PathBuf>,
}

pub const BEAM_LAMBDA_GRID: [f64; 5] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1];

impl ExperimentConfig {
    /// Built-in configuration for `problem` at `scale`.
    pub fn preset(problem: Problem, scale: Scale, seed: u64) -> Self {
        let full = scale == Scale::Full;
        match problem {
            Problem::Beam => {
                let iters = if full { 30_000 } else { 5_000 };
                let mut dropout = StrategyConfig::new(StrategyKind::Dropout);
                dropout.dropout_p = Some(0.6);
                ExperimentConfig {
                    problem,
                    arch: ArchConfig::Mlp {
                        hidden: vec![20, 20],
                        activation: ActivationKind::ELU,
                        output_activation: ActivationKind::Identity,
                    },
                    strategies: vec![
                        StrategyConfig::new(StrategyKind::None),
                        dropout,
                        StrategyConfig::with_grid(StrategyKind::L1, &BEAM_LAMBDA_GRID),
                        StrategyConfig::with_grid(StrategyKind::L1Reweighted, &BEAM_LAMBDA_GRID),
                        StrategyConfig::with_grid(StrategyKind::L1BfDiff, &BEAM_LAMBDA_GRID),
                        StrategyConfig::with_grid(StrategyKind::L1BfWeighted, &BEAM_LAMBDA_GRID),
                    ],
                    lofi: LofiConfig { lambda: 1e-2, eta: None, iters, batch_size: None, holdout: 50, inits: 1 },
                    counts: Counts { n_l: 250, n_h: 3, n_val: 50, r: if full { 50 } else { 10 }, inits: 10 },
                    optimizer: OptimizerConfig {
                        eta: 1e-4,
                        iters,
                        batch_size: None,
                        eval_every: 1,
                        b_m: default_b_m(),
                        b_v: default_b_v(),
                        eps_a: default_eps_a(),
                    },
                    seed,
                    scale,
                    standardize: None,
                    beam_elements: None,
                    hifi_csv: None,
                }
            }
            Problem::Nozzle => {
                let iters = if full { 5_000 } else { 2_000 };
                ExperimentConfig {
                    problem,
                    arch: ArchConfig::Autoencoder {
                        widths: vec![128, 64, 16],
                        activation: ActivationKind::ELU,
                        output_activation: ActivationKind::Tanh,
                    },
                    strategies: vec![
                        StrategyConfig::new(StrategyKind::None),
                        StrategyConfig::with_lambda(StrategyKind::L1, 1e-9),
                        StrategyConfig::with_lambda(StrategyKind::L1Reweighted, 1e-11),
                        StrategyConfig::with_lambda(StrategyKind::L1BfDiff, 1e-9),
                        StrategyConfig::with_lambda(StrategyKind::L1BfWeighted, 1e-11),
                    ],
                    lofi: LofiConfig { lambda: 1e-8, eta: None, iters, batch_size: Some(50), holdout: 50, inits: 1 },
                    counts: Counts { n_l: 400, n_h: 50, n_val: 50, r: if full { 50 } else { 10 }, inits: if full { 10 } else { 3 } },
                    optimizer: OptimizerConfig {
                        eta: 1e-4,
                        iters,
                        batch_size: None,
                        eval_every: if full { 1 } else { 5 },
                        b_m: default_b_m(),
                        b_v: default_b_v(),
                        eps_a: default_eps_a(),
                    },
                    seed,
                    scale,
                    standardize: None,
                    beam_elements: None,
                    hifi_csv: None,
                }
            }
        }
    }

    pub fn standardize(&self) -> bool {
        self.standardize.unwrap_or(self.problem == Problem::Beam)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::config("no strategies configured"));
        }
        for s in &self.strategies {
            s.validate()?;
        }
        let c = &self.counts;
        if c.n_l == 0 || c.n_h == 0 || c.n_val == 0 || c.r == 0 || c.inits == 0 {
            return Err(Error::config("counts N_l, N_h, N_val, R and inits must be at least 1"));
        }
        if self.lofi.holdout >= c.n_l {
            return Err(Error::config(format!(
                "lofi.holdout ({}) must be smaller than N_l ({})",
                self.lofi.holdout, c.n_l
            )));
        }
        if self.lofi.holdout == 0 || self.lofi.inits == 0 || self.lofi.iters == 0 {
            return Err(Error::config("lofi.holdout, lofi.inits and lofi.iters must be at least 1"));
        }
        if !(self.lofi.lambda > 0.0) {
            return Err(Error::config("lofi.lambda must be positive"));
        }
        let o = &self.optimizer;
        if o.iters == 0 || o.eval_every == 0 {
            return Err(Error::config("optimizer.iters and optimizer.eval_every must be at least 1"));
        }
        if o.batch_size == Some(0) || self.lofi.batch_size == Some(0) {
            return Err(Error::config("batch_size must be at least 1"));
        }
        o.adam().validate()?;
        if let ArchConfig::Autoencoder { .. } = self.arch {
            if self.problem != Problem::Nozzle {
                return Err(Error::config("the autoencoder architecture applies to the nozzle problem"));
            }
        }
        if let Some(n) = self.beam_elements {
            crate::models::BeamFe::new(n, true)?;
        }
        Ok(())
    }

    pub fn from_value(v: Value) -> Result<Self> {
        let cfg: Self = serde_json::from_value(v).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        Self::from_value(v)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Applies `key.path=value` overrides; values parse as JSON, falling back to a string.
pub fn apply_overrides(mut v: Value, overrides: &[String]) -> Result<Value> {
    for item in overrides {
        let (path, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override {item:?} is not key=value")))?;
        let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut cur = &mut v;
        let keys: Vec<&str> = path.split('.').collect();
        for (i, key) in keys.iter().enumerate() {
            let last = i + 1 == keys.len();
            cur = match cur {
                Value::Object(map) => {
                    if last {
                        map.insert(key.to_string(), value.clone());
                        break;
                    }
                    map.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()))
                }
                Value::Array(items) => {
                    let idx: usize = key
                        .parse()
                        .map_err(|_| Error::config(format!("override {path}: {key:?} is not an index")))?;
                    let len = items.len();
                    let slot = items
                        .get_mut(idx)
                        .ok_or_else(|| Error::config(format!("override {path}: index {idx} out of range ({len})")))?;
                    if last {
                        *slot = value.clone();
                        break;
                    }
                    slot
                }
                _ => return Err(Error::config(format!("override {path}: {key:?} is not inside an object"))),
            };
        }
    }
    Ok(v)
}
