//! Replicated experiments: data draws, low-fidelity training, strategy sweeps and aggregation.

use rayon::prelude::*;
use crate::bounds::{k_std_bf, k_std_hf, k_wgt_bf, k_wgt_hf, layer_l1_norms, KReport};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng, Vector};
use crate::models::nozzle::resample;
use crate::models::{generate_bifidelity_dataset, read_beam_csv, BeamHifiSource, BiFidelityDataset, Problem};
use crate::optimizer::AdamConfig;
use crate::network::{init_params, NetworkParams, NetworkSpec, ParamDump};
use crate::regularization::RegStrategy;

use super::config::{ExperimentConfig, InitMode, StrategyConfig, StrategyKind};
use super::report::{
    histogram, mean_std, reference_k, reference_row, BoundsSection, ExperimentReport, LambdaSummary, LofiSummary,
    ReplicationResult, StrategyReport, HISTOGRAM_EDGES,
};
use super::train::{train, Qoi, Standardizer, TrainConfig, TrainOutcome, Validator};

const SPLIT_DATA: u64 = 0;
const SPLIT_INIT: u64 = 1;
const SPLIT_TRAIN: u64 = 2;
const SPLIT_LOFI: u64 = 3;

/// Splits of one replication mapped into network space.
pub struct PreparedData {
    pub spec: NetworkSpec,
    pub hi: Dataset<f64>,
    pub lo_train: Dataset<f64>,
    pub val: Validator,
    pub lo_val: Validator,
}

/// Builds network-space training sets and validators from a raw dataset.
///
/// Beam data is z-scored with low-fidelity statistics when `standardize` is set.
/// Nozzle low-fidelity fields are interpolated onto the high-fidelity grid.
pub fn prepare(cfg: &ExperimentConfig, data: &BiFidelityDataset) -> Result<PreparedData> {
    let holdout = cfg.lofi.holdout;
    let n_lo = data.lo.len();
    if holdout >= n_lo {
        return Err(Error::config("low-fidelity holdout must be smaller than N_l"));
    }
    let train_idx: Vec<usize> = (0..n_lo - holdout).collect();
    let hold_idx: Vec<usize> = (n_lo - holdout..n_lo).collect();
    match cfg.problem {
        Problem::Beam => {
            let (sx, sy) = if cfg.standardize() {
                (Standardizer::fit(data.lo.x()), Standardizer::fit(data.lo.y()))
            } else {
                (Standardizer::identity(data.lo.input_dim()), Standardizer::identity(data.lo.output_dim()))
            };
            let net = |d: &Dataset<f64>| Dataset::new(sx.apply(d.x()), sy.apply(d.y()));
            let spec = cfg.arch.build(data.lo.input_dim(), data.lo.output_dim())?;
            let lo_hold = data.lo.subset(&hold_idx);
            Ok(PreparedData {
                spec,
                hi: net(&data.hi)?,
                lo_train: net(&data.lo.subset(&train_idx))?,
                val: Validator::new(sx.apply(data.val.x()), data.val.y(), Qoi::Outputs(sy.clone()))?,
                lo_val: Validator::new(sx.apply(lo_hold.x()), lo_hold.y(), Qoi::Outputs(sy))?,
            })
        }
        Problem::Nozzle => {
            let n = data.hi.input_dim();
            let rows: Vec<Vec<f64>> = (0..n_lo).map(|i| resample(data.lo.x().row(i), n).into_vec()).collect();
            let lo = Dataset::reconstruction(Matrix::from_rows(&rows)?);
            let spec = cfg.arch.build(n, n)?;
            let lo_hold = lo.subset(&hold_idx);
            Ok(PreparedData {
                spec,
                hi: data.hi.clone(),
                lo_train: lo.subset(&train_idx),
                val: Validator::new(data.val.x().clone(), data.val.y(), Qoi::ShockPosition)?,
                lo_val: Validator::new(lo_hold.x().clone(), lo_hold.y(), Qoi::ShockPosition)?,
            })
        }
    }
}

fn reg_strategy(s: &StrategyConfig, lambda: Option<f64>, theta_lf: Option<&Vector<f64>>) -> Result<RegStrategy<f64>> {
    let need_lf = || theta_lf.cloned().ok_or_else(|| Error::config("bi-fidelity strategy without low-fidelity parameters"));
    let lambda = || lambda.ok_or_else(|| Error::config(format!("strategy {} needs lambda", s.kind.name())));
    Ok(match s.kind {
        StrategyKind::None => RegStrategy::None,
        StrategyKind::Dropout => RegStrategy::Dropout { p: s.dropout_p.unwrap_or(0.0) },
        StrategyKind::L2 => RegStrategy::L2 { lambda: lambda()? },
        StrategyKind::L1 => RegStrategy::L1Standard { lambda: lambda()? },
        StrategyKind::L1Reweighted => RegStrategy::L1ReweightedHF { lambda: lambda()?, eps_w: s.eps_w() },
        StrategyKind::L1BfDiff => RegStrategy::L1BiFidelityDiff { lambda: lambda()?, theta_lf: need_lf()? },
        StrategyKind::L1BfWeighted => {
            RegStrategy::L1BiFidelityWeighted { lambda: lambda()?, eps_w: s.eps_w(), theta_lf: need_lf()? }
        }
    })
}

/// Best of several initializations for one (strategy, λ) in one replication.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub eps_v: f64,
    pub best_iter: usize,
    pub init_index: usize,
    pub params: NetworkParams<f64>,
}

fn best_of<I>(runs: I) -> (Option<RunResult>, usize)
where
    I: IntoIterator<Item = (usize, Result<TrainOutcome>)>,
{
    let mut best: Option<RunResult> = None;
    let mut diverged = 0;
    for (i, r) in runs {
        match r {
            Ok(o) => {
                if best.as_ref().is_none_or(|b| o.best_eps_v < b.eps_v) {
                    best = Some(RunResult { eps_v: o.best_eps_v, best_iter: o.best_iter, init_index: i, params: o.best });
                }
            }
            Err(_) => diverged += 1,
        }
    }
    (best, diverged)
}

/// All results of one replication.
pub struct ReplicationOutput {
    pub replication: usize,
    /// Indexed by strategy, then by λ.
    pub runs: Vec<Vec<Option<RunResult>>>,
    pub spec: Option<NetworkSpec>,
    pub theta_lf: Option<Vector<f64>>,
    pub lofi: Option<LofiSummary>,
    pub error: Option<String>,
}

/// Trains the low-fidelity network with standard ℓ1 and returns the best iterate.
pub fn train_lofi_network(cfg: &ExperimentConfig, prep: &PreparedData, rng: &Rng) -> Result<TrainOutcome> {
    let lofi = &cfg.lofi;
    let mut best: Option<TrainOutcome> = None;
    let mut last_err = None;
    for i in 0..lofi.inits {
        let init = init_params(&prep.spec, &mut rng.split(SPLIT_INIT).split(i as u64));
        let tc = TrainConfig {
            spec: prep.spec.clone(),
            strategy: RegStrategy::L1Standard { lambda: lofi.lambda },
            adam: AdamConfig { eta: lofi.eta.unwrap_or(cfg.optimizer.eta), ..cfg.optimizer.adam() },
            iters: lofi.iters,
            batch_size: lofi.batch_size,
            eval_every: cfg.optimizer.eval_every,
            seed: rng.split(SPLIT_TRAIN).split(i as u64).seed(),
        };
        match train(&tc, &prep.lo_train, &prep.lo_val, init) {
            Ok(o) => {
                if best.as_ref().is_none_or(|b| o.best_eps_v < b.best_eps_v) {
                    best = Some(o);
                }
            }
            Err(e @ Error::Divergence { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::config("no low-fidelity initializations")))
}

fn load_theta_lf(path: &std::path::Path, spec: &NetworkSpec) -> Result<Vector<f64>> {
    let dump = ParamDump::load(path)?;
    if dump.spec != *spec {
        return Err(Error::config(format!("{}: architecture differs from the configured network", path.display())));
    }
    Ok(dump.params::<f64>()?.into_flat())
}

fn beam_source(cfg: &ExperimentConfig) -> Result<BeamHifiSource> {
    Ok(match (&cfg.hifi_csv, cfg.beam_elements) {
        (Some(p), _) => BeamHifiSource::Samples(read_beam_csv(p)?),
        (None, Some(n)) => BeamHifiSource::Proxy { n_elems: n },
        (None, None) => BeamHifiSource::default(),
    })
}

/// Runs every strategy and λ of replication `r`.
pub fn run_replication(cfg: &ExperimentConfig, r: usize, source: &BeamHifiSource) -> ReplicationOutput {
    let empty = |error: String| ReplicationOutput {
        replication: r,
        runs: cfg.strategies.iter().map(|s| vec![None; s.lambdas().len()]).collect(),
        spec: None,
        theta_lf: None,
        lofi: None,
        error: Some(error),
    };
    let rng = Rng::new(cfg.seed).split(r as u64);
    let c = &cfg.counts;
    let prep = match generate_bifidelity_dataset(cfg.problem, c.n_l, c.n_h, c.n_val, &rng.split(SPLIT_DATA), source)
        .and_then(|d| prepare(cfg, &d))
    {
        Ok(p) => p,
        Err(e) => return empty(e.to_string()),
    };

    let wants_lf = cfg
        .strategies
        .iter()
        .any(|s| (s.kind.is_bifidelity() || s.init_mode() == InitMode::LowFidelity) && s.theta_lf_path.is_none());
    let mut lofi = None;
    let mut theta_lf = None;
    let mut error = None;
    if wants_lf {
        match train_lofi_network(cfg, &prep, &rng.split(SPLIT_LOFI)) {
            Ok(o) => {
                lofi = Some(LofiSummary { replication: r, eps_v: o.best_eps_v, best_iter: o.best_iter });
                theta_lf = Some(o.best.into_flat());
            }
            Err(e) => error = Some(format!("low-fidelity training failed: {e}")),
        }
    }

    let mut runs = Vec::with_capacity(cfg.strategies.len());
    for s in &cfg.strategies {
        let lf = match &s.theta_lf_path {
            Some(p) => match load_theta_lf(p, &prep.spec) {
                Ok(v) => Some(v),
                Err(e) => {
                    error.get_or_insert(e.to_string());
                    None
                }
            },
            None => theta_lf.clone(),
        };
        let per_lambda = s
            .lambdas()
            .into_iter()
            .map(|lambda| run_strategy(cfg, s, lambda, lf.as_ref(), &prep, &rng))
            .collect();
        runs.push(per_lambda);
    }
    ReplicationOutput { replication: r, runs, spec: Some(prep.spec.clone()), theta_lf, lofi, error }
}

fn run_strategy(
    cfg: &ExperimentConfig,
    s: &StrategyConfig,
    lambda: Option<f64>,
    theta_lf: Option<&Vector<f64>>,
    prep: &PreparedData,
    rng: &Rng,
) -> Option<RunResult> {
    let strategy = reg_strategy(s, lambda, theta_lf).ok()?;
    let warm = s.init_mode() == InitMode::LowFidelity;
    if warm && theta_lf.is_none() {
        return None;
    }
    let stochastic = cfg.optimizer.batch_size.is_some_and(|b| b < prep.hi.len()) || s.kind == StrategyKind::Dropout;
    let inits = s.inits.unwrap_or(cfg.counts.inits);
    // A warm start is deterministic unless batches or masks are random.
    let inits = if warm && !stochastic { 1 } else { inits };
    let runs = (0..inits).map(|i| {
        let init = if warm {
            NetworkParams::from_flat(&prep.spec, theta_lf.expect("checked").clone())
        } else {
            Ok(init_params(&prep.spec, &mut rng.split(SPLIT_INIT).split(i as u64)))
        };
        let tc = TrainConfig {
            spec: prep.spec.clone(),
            strategy: strategy.clone(),
            adam: cfg.optimizer.adam(),
            iters: cfg.optimizer.iters,
            batch_size: cfg.optimizer.batch_size,
            eval_every: cfg.optimizer.eval_every,
            seed: rng.split(SPLIT_TRAIN).split(i as u64).seed(),
        };
        (i, init.and_then(|p| train(&tc, &prep.hi, &prep.val, p)))
    });
    best_of(runs).0
}

/// Index of the λ with the smallest mean error; ties go to the larger λ. Entries without successes are skipped.
pub fn select_lambda(summaries: &[LambdaSummary]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in summaries.iter().enumerate() {
        let Some(m) = s.mean_eps_v else { continue };
        best = match best {
            None => Some(i),
            Some(b) => {
                let bm = summaries[b].mean_eps_v.expect("selected entries have a mean");
                let larger = s.lambda.unwrap_or(0.0) > summaries[b].lambda.unwrap_or(0.0);
                if m < bm || (m == bm && larger) { Some(i) } else { Some(b) }
            }
        };
    }
    best
}

/// Report plus rep-0 parameter dumps keyed by file stem.
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub dumps: Vec<(String, ParamDump)>,
}

pub fn lambda_summaries(outputs: &[ReplicationOutput], si: usize, lambdas: &[Option<f64>]) -> Vec<LambdaSummary> {
    lambdas
        .iter()
        .enumerate()
        .map(|(li, &lambda)| {
            let eps: Vec<f64> = outputs.iter().filter_map(|o| o.runs[si][li].as_ref().map(|r| r.eps_v)).collect();
            let (mean, std) = mean_std(&eps);
            LambdaSummary { lambda, mean_eps_v: mean, std_eps_v: std, n_ok: eps.len(), n_failed: outputs.len() - eps.len() }
        })
        .collect()
}

fn own_k(kind: StrategyKind, params: &NetworkParams<f64>, theta_lf: Option<&Vector<f64>>, eps_w: f64) -> Result<Option<f64>> {
    Ok(Some(match kind {
        StrategyKind::None | StrategyKind::Dropout | StrategyKind::L2 | StrategyKind::L1 => {
            k_std_hf(&layer_l1_norms(params, None, None)?)
        }
        StrategyKind::L1Reweighted => {
            let w: Vec<f64> = params.flat().iter().map(|t| 1.0 / (t.abs() + eps_w)).collect();
            k_wgt_hf(&layer_l1_norms(params, None, Some(&w))?, eps_w)?
        }
        StrategyKind::L1BfDiff => {
            let Some(lf) = theta_lf else { return Ok(None) };
            k_std_bf(&layer_l1_norms(params, Some(lf), None)?)?
        }
        StrategyKind::L1BfWeighted => {
            let Some(lf) = theta_lf else { return Ok(None) };
            let w: Vec<f64> = lf.iter().map(|t| 1.0 / (t.abs() + eps_w)).collect();
            k_wgt_bf(&layer_l1_norms(params, Some(lf), Some(&w))?, eps_w)?
        }
    }))
}

/// Runs all replications on `jobs` worker threads and aggregates in replication order.
pub fn run_replications(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let source = beam_source(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let outputs: Vec<ReplicationOutput> =
        pool.install(|| (0..cfg.counts.r).into_par_iter().map(|r| run_replication(cfg, r, &source)).collect());
    aggregate(cfg, &outputs)
}

pub fn aggregate(cfg: &ExperimentConfig, outputs: &[ReplicationOutput]) -> Result<ExperimentOutput> {
    let mut strategies = Vec::new();
    let mut dumps = Vec::new();
    let mut chosen: Vec<Option<usize>> = Vec::new();
    for (si, s) in cfg.strategies.iter().enumerate() {
        let lambdas = s.lambdas();
        let summaries = lambda_summaries(outputs, si, &lambdas);
        let pick = select_lambda(&summaries);
        chosen.push(pick);
        let mut reps = Vec::new();
        let mut failures = Vec::new();
        if let Some(li) = pick {
            for o in outputs {
                match &o.runs[si][li] {
                    Some(run) => {
                        let abs: Vec<f64> = run.params.flat().iter().map(|t| t.abs()).collect();
                        let hist = histogram(&abs);
                        let below = abs.iter().filter(|&&a| a < 1e-3).count() as f64 / abs.len() as f64;
                        let k = own_k(s.kind, &run.params, o.theta_lf.as_ref(), s.eps_w())?;
                        let params_file = (o.replication == 0).then(|| format!("params/{}_rep0.json", s.kind.name()));
                        if let (0, Some(spec)) = (o.replication, &o.spec) {
                            dumps.push((format!("{}_rep0", s.kind.name()), ParamDump::new(spec, &run.params)));
                        }
                        reps.push(ReplicationResult {
                            replication: o.replication,
                            eps_v: run.eps_v,
                            lambda: lambdas[li],
                            best_iter: run.best_iter,
                            init_index: run.init_index,
                            k_constant: k,
                            frac_below_1e3: below,
                            histogram: hist,
                            params_file,
                        });
                    }
                    None => failures.push(o.replication),
                }
            }
        } else {
            failures.extend(outputs.iter().map(|o| o.replication));
        }
        let eps: Vec<f64> = reps.iter().map(|r| r.eps_v).collect();
        let (mean, std) = mean_std(&eps);
        let fracs: Vec<f64> = reps.iter().map(|r| r.frac_below_1e3).collect();
        strategies.push(StrategyReport {
            name: s.kind.name().to_string(),
            label: s.kind.label().to_string(),
            lambda: pick.and_then(|li| lambdas[li]),
            lambda_search: summaries,
            mean_eps_v: mean,
            std_eps_v: std,
            mean_frac_below_1e3: mean_std(&fracs).0,
            failed_replications: failures,
            replications: reps,
            reference: reference_row(cfg.problem, s.kind),
        });
    }

    let bounds = bounds_section(cfg, outputs, &chosen)?;
    let lofi: Vec<LofiSummary> = outputs.iter().filter_map(|o| o.lofi.clone()).collect();
    if let Some(o) = outputs.iter().find(|o| o.replication == 0) {
        if let (Some(lf), Some(spec)) = (&o.theta_lf, &o.spec) {
            dumps.push(("lofi_rep0".to_string(), ParamDump::new(spec, &NetworkParams::from_flat(spec, lf.clone())?)));
        }
    }
    let report = ExperimentReport {
        problem: cfg.problem,
        config: cfg.clone(),
        histogram_edges: HISTOGRAM_EDGES.to_vec(),
        strategies,
        bounds,
        lofi,
        replication_errors: outputs
            .iter()
            .filter_map(|o| o.error.as_ref().map(|e| (o.replication, e.clone())))
            .collect(),
    };
    Ok(ExperimentOutput { report, dumps })
}

fn bounds_section(
    cfg: &ExperimentConfig,
    outputs: &[ReplicationOutput],
    chosen: &[Option<usize>],
) -> Result<Option<BoundsSection>> {
    let find = |kind: StrategyKind| cfg.strategies.iter().position(|s| s.kind == kind);
    let (Some(i1), Some(i2), Some(i3), Some(i4)) = (
        find(StrategyKind::L1),
        find(StrategyKind::L1Reweighted),
        find(StrategyKind::L1BfDiff),
        find(StrategyKind::L1BfWeighted),
    ) else {
        return Ok(None);
    };
    let mut per_rep = Vec::new();
    for o in outputs {
        let get = |si: usize| chosen[si].and_then(|li| o.runs[si][li].as_ref());
        let (Some(a), Some(b), Some(c), Some(d)) = (get(i1), get(i2), get(i3), get(i4)) else { continue };
        let k = |si: usize, p: &NetworkParams<f64>| {
            own_k(cfg.strategies[si].kind, p, o.theta_lf.as_ref(), cfg.strategies[si].eps_w())
        };
        let (Some(k1), Some(k2), Some(k3), Some(k4)) = (k(i1, &a.params)?, k(i2, &b.params)?, k(i3, &c.params)?, k(i4, &d.params)?)
        else {
            continue;
        };
        per_rep.push((o.replication, KReport { k_std_hf: k1, k_wgt_hf: k2, k_std_bf: k3, k_wgt_bf: k4 }));
    }
    if per_rep.is_empty() {
        return Ok(None);
    }
    let mean = |f: fn(&KReport) -> f64| mean_std(&per_rep.iter().map(|(_, k)| f(k)).collect::<Vec<_>>()).0.unwrap_or(f64::NAN);
    let mean_k = KReport {
        k_std_hf: mean(|k| k.k_std_hf),
        k_wgt_hf: mean(|k| k.k_wgt_hf),
        k_std_bf: mean(|k| k.k_std_bf),
        k_wgt_bf: mean(|k| k.k_wgt_bf),
    };
    let holds = per_rep.iter().filter(|(_, k)| k.ordering_holds()).count();
    Ok(Some(BoundsSection {
        note: "weighted and bi-fidelity constants are upper-bound forms".to_string(),
        mean: mean_k,
        ordering: if mean_k.ordering_holds() { "pass" } else { "warn" }.to_string(),
        ordering_holds_replications: holds,
        reference: reference_k(cfg.problem),
        replications: per_rep.into_iter().map(|(r, k)| super::report::KReplication { replication: r, k }).collect(),
    }))
}
