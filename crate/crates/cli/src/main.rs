use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use bfl1::bounds::{k_std_bf, k_std_hf, k_wgt_bf, k_wgt_hf, layer_l1_norms};
use bfl1::harness::{
    apply_overrides, run_replications, write_outputs, ExperimentConfig, ExperimentOutput, RuntimeInfo, Scale,
};
use bfl1::models::{generate_bifidelity_dataset, BeamHifiSource, Problem};
use bfl1::network::ParamDump;
use bfl1::regularization::DEFAULT_EPS_W;
use bfl1::{Error, Rng};
use clap::{Parser, Subcommand};
use serde_json::json;

const EXIT_CONFIG: u8 = 1;
const EXIT_DIVERGED: u8 = 2;

#[derive(Parser)]
#[command(name = "bfl1", version, about = "Bi-fidelity l1-regularized neural network training experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw low-fidelity, high-fidelity and validation splits and write them as CSV.
    GenerateData {
        problem: Problem,
        #[arg(long)]
        n_lo: usize,
        #[arg(long)]
        n_hi: usize,
        #[arg(long)]
        n_val: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Elements of the beam finite-element proxy.
        #[arg(long)]
        beam_elements: Option<usize>,
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
    /// Run the experiment described by a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Dotted-path override, e.g. optimizer.eta=1e-3.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a config once per value of one override key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted path that receives each value.
        #[arg(long)]
        key: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Run a preset experiment.
    Reproduce {
        problem: Problem,
        #[arg(long, default_value = "desk")]
        scale: Scale,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Layer norms and K constants of a saved network.
    BoundsReport {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        theta_lf: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_EPS_W)]
        eps_w: f64,
        #[arg(long, default_value = "bounds.json")]
        out: PathBuf,
    },
    /// Print the version.
    Version,
}

enum Failure {
    Config(Error),
    Diverged(PathBuf),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e)
    }
}

fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_value(apply_overrides(value, overrides)?)
}

fn run_experiment(cfg: &ExperimentConfig, jobs: usize, out: &Path) -> Result<(PathBuf, ExperimentOutput), Error> {
    eprintln!(
        "running {} experiment: {} strategies, R={}, {} iterations, jobs={jobs}",
        cfg.problem.name(),
        cfg.strategies.len(),
        cfg.counts.r,
        cfg.optimizer.iters
    );
    let start = Instant::now();
    let output = run_replications(cfg, jobs)?;
    let runtime = RuntimeInfo {
        seconds: start.elapsed().as_secs_f64(),
        jobs,
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    for s in &output.report.strategies {
        eprintln!(
            "  {:<16} lambda={:<8} mean eps_v={} ({} failed)",
            s.name,
            s.lambda.map(|l| format!("{l:e}")).unwrap_or_else(|| "-".into()),
            s.mean_eps_v.map(|m| format!("{m:.4e}")).unwrap_or_else(|| "n/a".into()),
            s.failed_replications.len()
        );
    }
    for (r, e) in &output.report.replication_errors {
        eprintln!("  replication {r}: {e}");
    }
    eprintln!("finished in {:.1} s", runtime.seconds);
    let path = write_outputs(out, &output, &runtime)?;
    Ok((path, output))
}

fn finish(path: PathBuf, output: &ExperimentOutput) -> Result<PathBuf, Failure> {
    if output.report.all_failed() {
        Err(Failure::Diverged(path))
    } else {
        Ok(path)
    }
}

fn bounds_report(params: &Path, theta_lf: Option<&Path>, eps_w: f64, out: &Path) -> Result<PathBuf, Error> {
    let dump = ParamDump::load(params)?;
    let p = dump.params::<f64>()?;
    let lf = match theta_lf {
        Some(path) => {
            let d = ParamDump::load(path)?;
            if d.spec != dump.spec {
                return Err(Error::config(format!("{}: architecture differs from {}", path.display(), params.display())));
            }
            Some(d.params::<f64>()?.into_flat())
        }
        None => None,
    };
    let lf_slice = lf.as_ref().map(|v| v.as_slice());
    let w_hf: Vec<f64> = p.flat().iter().map(|t| 1.0 / (t.abs() + eps_w)).collect();
    let plain = layer_l1_norms(&p, lf_slice, None)?;
    let weighted_hf = layer_l1_norms(&p, lf_slice, Some(&w_hf))?;
    let mut report = json!({
        "params": params.display().to_string(),
        "eps_w": eps_w,
        "layers": plain.layers,
        "k_std_hf": k_std_hf(&plain),
        "k_wgt_hf": k_wgt_hf(&weighted_hf, eps_w)?,
        "k_std_bf": null,
        "k_wgt_bf": null,
    });
    if let Some(lf) = &lf {
        let w_lf: Vec<f64> = lf.iter().map(|t| 1.0 / (t.abs() + eps_w)).collect();
        let weighted_lf = layer_l1_norms(&p, lf_slice, Some(&w_lf))?;
        report["theta_lf"] = json!(theta_lf.map(|t| t.display().to_string()));
        report["k_std_bf"] = json!(k_std_bf(&plain)?);
        report["k_wgt_bf"] = json!(k_wgt_bf(&weighted_lf, eps_w)?);
    }
    bfl1::io::write_json(out, &report)?;
    Ok(out.to_path_buf())
}

fn run(cli: Cli) -> Result<Option<PathBuf>, Failure> {
    match cli.command {
        Command::Version => {
            println!("bfl1 {}", env!("CARGO_PKG_VERSION"));
            Ok(None)
        }
        Command::GenerateData { problem, n_lo, n_hi, n_val, seed, beam_elements, out } => {
            let source = match beam_elements {
                Some(n_elems) => BeamHifiSource::Proxy { n_elems },
                None => BeamHifiSource::default(),
            };
            let data = generate_bifidelity_dataset(problem, n_lo, n_hi, n_val, &Rng::new(seed), &source)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            data.write_bundle(&out)?;
            Ok(Some(out.join("meta.json")))
        }
        Command::Train { config, overrides, jobs, out } => {
            let cfg = load_config(&config, &overrides)?;
            let (path, output) = run_experiment(&cfg, jobs, &out)?;
            finish(path, &output).map(Some)
        }
        Command::Sweep { config, key, values, overrides, jobs, out } => {
            let mut summary = Vec::new();
            let mut any_ok = false;
            for (i, value) in values.iter().enumerate() {
                let mut all = overrides.clone();
                all.push(format!("{key}={value}"));
                let cfg = load_config(&config, &all)?;
                let dir = out.join(format!("{i:03}"));
                let (path, output) = run_experiment(&cfg, jobs, &dir)?;
                any_ok |= !output.report.all_failed();
                let strategies: Vec<_> = output
                    .report
                    .strategies
                    .iter()
                    .map(|s| json!({"name": s.name, "lambda": s.lambda, "mean_eps_v": s.mean_eps_v, "std_eps_v": s.std_eps_v}))
                    .collect();
                summary.push(json!({"value": value, "report": path.display().to_string(), "strategies": strategies}));
            }
            let path = out.join("sweep.json");
            bfl1::io::write_json(&path, &json!({"key": key, "runs": summary}))?;
            if any_ok {
                Ok(Some(path))
            } else {
                Err(Failure::Diverged(path))
            }
        }
        Command::Reproduce { problem, scale, seed, overrides, jobs, out } => {
            let seed = seed.ok_or_else(|| Error::config("reproduce requires --seed"))?;
            let preset = ExperimentConfig::preset(problem, scale, seed);
            let cfg = ExperimentConfig::from_value(apply_overrides(preset.to_value(), &overrides)?)?;
            let out = out.unwrap_or_else(|| PathBuf::from(format!("results/{}-{}-seed{seed}", problem.name(), scale.name())));
            let (path, output) = run_experiment(&cfg, jobs, &out)?;
            finish(path, &output).map(Some)
        }
        Command::BoundsReport { params, theta_lf, eps_w, out } => {
            Ok(Some(bounds_report(&params, theta_lf.as_deref(), eps_w, &out)?))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Some(path)) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Diverged(path)) => {
            eprintln!("error: every initialization diverged; partial report at {}", path.display());
            ExitCode::from(EXIT_DIVERGED)
        }
    }
}
