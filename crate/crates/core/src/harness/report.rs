//! Report structures, summary statistics and output files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::KReport;
use crate::error::{Error, Result};
use crate::io::{write_atomic, write_json};
use crate::models::Problem;

use super::config::{ExperimentConfig, StrategyKind};
use super::experiment::ExperimentOutput;

/// Decade edges for |θ| histograms; counts add an underflow and an overflow bin.
pub const HISTOGRAM_EDGES: [f64; 10] = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1];

/// Counts per bin: `[< 1e-8, [1e-8,1e-7), ..., [1,10), >= 10]`.
pub fn histogram(values: &[f64]) -> Vec<usize> {
    let mut counts = vec![0; HISTOGRAM_EDGES.len() + 1];
    for &v in values {
        let bin = HISTOGRAM_EDGES.iter().take_while(|&&e| v >= e).count();
        counts[bin] += 1;
    }
    counts
}

/// Mean and sample standard deviation. The deviation needs at least two values.
pub fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some(var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub lambda: Option<f64>,
    pub mean_eps_v: f64,
    pub std_eps_v: f64,
}

/// Published mean/std of ε_v for comparison. Not used in any assertion.
pub fn reference_row(problem: Problem, kind: StrategyKind) -> Option<ReferenceRow> {
    let row = |lambda, mean_eps_v, std_eps_v| Some(ReferenceRow { lambda, mean_eps_v, std_eps_v });
    match (problem, kind) {
        (Problem::Beam, StrategyKind::None) => row(None, 1.5607e-1, 9.1084e-2),
        (Problem::Beam, StrategyKind::Dropout) => row(None, 1.1597e-1, 6.2743e-3),
        (Problem::Beam, StrategyKind::L1) => row(Some(1e-2), 4.6827e-2, 3.5092e-2),
        (Problem::Beam, StrategyKind::L1Reweighted) => row(Some(1e-2), 1.4481e-1, 8.3662e-2),
        (Problem::Beam, StrategyKind::L1BfDiff) => row(Some(1e-4), 3.5773e-2, 2.1596e-2),
        (Problem::Beam, StrategyKind::L1BfWeighted) => row(Some(1e-4), 3.7563e-2, 1.7820e-2),
        (Problem::Nozzle, StrategyKind::None) => row(None, 1.5670e-2, 5.5478e-3),
        (Problem::Nozzle, StrategyKind::L1) => row(Some(1e-9), 1.5668e-2, 5.5447e-3),
        (Problem::Nozzle, StrategyKind::L1Reweighted) => row(Some(1e-11), 1.5603e-2, 5.5505e-3),
        (Problem::Nozzle, StrategyKind::L1BfDiff) => row(Some(1e-9), 3.7637e-3, 5.3682e-4),
        (Problem::Nozzle, StrategyKind::L1BfWeighted) => row(Some(1e-11), 3.7616e-3, 5.3952e-4),
        _ => None,
    }
}

/// Published single-instance K constants for the beam networks.
pub fn reference_k(problem: Problem) -> Option<KReport> {
    match problem {
        Problem::Beam => Some(KReport { k_std_hf: 535.36, k_wgt_hf: 2.15e5, k_std_bf: 33.92, k_wgt_bf: 32.72 }),
        Problem::Nozzle => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSummary {
    pub lambda: Option<f64>,
    pub mean_eps_v: Option<f64>,
    pub std_eps_v: Option<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub replication: usize,
    pub eps_v: f64,
    pub lambda: Option<f64>,
    pub best_iter: usize,
    pub init_index: usize,
    pub k_constant: Option<f64>,
    pub frac_below_1e3: f64,
    pub histogram: Vec<usize>,
    pub params_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub name: String,
    pub label: String,
    pub lambda: Option<f64>,
    pub lambda_search: Vec<LambdaSummary>,
    pub mean_eps_v: Option<f64>,
    pub std_eps_v: Option<f64>,
    pub mean_frac_below_1e3: Option<f64>,
    pub failed_replications: Vec<usize>,
    pub replications: Vec<ReplicationResult>,
    pub reference: Option<ReferenceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KReplication {
    pub replication: usize,
    pub k: KReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsSection {
    pub note: String,
    pub mean: KReport,
    /// `pass` or `warn`.
    pub ordering: String,
    pub ordering_holds_replications: usize,
    pub reference: Option<KReport>,
    pub replications: Vec<KReplication>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LofiSummary {
    pub replication: usize,
    pub eps_v: f64,
    pub best_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub problem: Problem,
    pub config: ExperimentConfig,
    pub histogram_edges: Vec<f64>,
    pub strategies: Vec<StrategyReport>,
    pub bounds: Option<BoundsSection>,
    pub lofi: Vec<LofiSummary>,
    pub replication_errors: Vec<(usize, String)>,
}

impl ExperimentReport {
    pub fn strategy(&self, kind: StrategyKind) -> Option<&StrategyReport> {
        self.strategies.iter().find(|s| s.name == kind.name())
    }

    /// True when no strategy produced a single successful replication.
    pub fn all_failed(&self) -> bool {
        self.strategies.iter().all(|s| s.replications.is_empty())
    }

    pub fn load(path: &Path) -> Result<Self> {
        crate::io::read_json(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeInfo {
    pub seconds: f64,
    pub jobs: usize,
    pub version: String,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn replications_csv(report: &ExperimentReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["strategy", "replication", "lambda", "eps_v", "best_iter", "init_index", "k_constant", "frac_below_1e-3"])?;
    for s in &report.strategies {
        for r in &s.replications {
            w.write_record([
                s.name.clone(),
                r.replication.to_string(),
                fmt_opt(r.lambda),
                format!("{:e}", r.eps_v),
                r.best_iter.to_string(),
                r.init_index.to_string(),
                fmt_opt(r.k_constant),
                format!("{:e}", r.frac_below_1e3),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::io("csv buffer", e.into_error()))
}

fn histograms_csv(report: &ExperimentReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["strategy".to_string(), "replication".to_string(), "below_1e-8".to_string()];
    header.extend(HISTOGRAM_EDGES.windows(2).map(|e| format!("{:e}_{:e}", e[0], e[1])));
    header.push("above_1e1".to_string());
    w.write_record(&header)?;
    for s in &report.strategies {
        for r in &s.replications {
            let mut row = vec![s.name.clone(), r.replication.to_string()];
            row.extend(r.histogram.iter().map(|c| c.to_string()));
            w.write_record(&row)?;
        }
    }
    w.into_inner().map_err(|e| Error::io("csv buffer", e.into_error()))
}

/// Writes report.json, replications.csv, histograms.csv, params/*.json and runtime.json into `dir`.
/// Everything except runtime.json depends only on the configuration.
pub fn write_outputs(dir: &Path, out: &ExperimentOutput, runtime: &RuntimeInfo) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir.join("params")).map_err(|e| Error::io(dir, e))?;
    for (stem, dump) in &out.dumps {
        write_atomic(&dir.join("params").join(format!("{stem}.json")), dump.to_json()?.as_bytes())?;
    }
    write_atomic(&dir.join("replications.csv"), &replications_csv(&out.report)?)?;
    write_atomic(&dir.join("histograms.csv"), &histograms_csv(&out.report)?)?;
    write_json(&dir.join("runtime.json"), runtime)?;
    let path = dir.join("report.json");
    write_json(&path, &out.report)?;
    Ok(path)
}
