//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and exits nonzero on any failure.
//! Pass criterion numbers as arguments to run a subset.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use bfl1::harness::{ExperimentReport, StrategyKind};
use bfl1::models::beam::{beam_ei, beam_lofi_deflection, BeamFe, LENGTH, Q_TO_SI};
use bfl1::models::nozzle::{burgers_march, grid, nozzle_field, nozzle_shock_position, HIFI_GRID};
use bfl1::network::gradcheck::{max_relative_error, numerical_gradient};
use bfl1::network::{init_params, loss_and_gradient, ActivationKind, NetworkSpec};
use bfl1::optimizer::{adam_update, AdamConfig, AdamState};
use bfl1::regularization::{bifidelity_weights, penalty, subgradient, update_reweight_state, RegState, RegStrategy};
use bfl1::{Dataset, Matrix, Rng, Vector};

const GRAD_NETS: usize = 20;
const GRAD_H: f64 = 1e-6;
const GRAD_TOL: f64 = 1e-5;
/// Relative-error denominator floor; central differences at GRAD_H carry about 1e-10 absolute roundoff.
const GRAD_FLOOR: f64 = 1e-4;
const ADAM_TOL: f64 = 1e-12;
const ADAM_STEPS: u64 = 100;
const SUBGRAD_POINTS: usize = 100;
const SUBGRAD_T: f64 = 1e-7;
const SUBGRAD_TOL: f64 = 1e-6;
const BURGERS_DELTAS: [f64; 3] = [-0.5, 0.3, 0.9];
const BURGERS_RESIDUAL: f64 = 1e-10;
const BURGERS_FIELD_TOL: f64 = 1e-3;
const BURGERS_SHOCK_EXCLUSION: f64 = 2.0;
const BEAM_CLOSED_FORM_TOL: f64 = 1e-12;
const BEAM_FE_TOL: f64 = 1e-8;
const BEAM_CONVERGENCE_TOL: f64 = 1e-6;
const RATIO_LIMIT: f64 = 0.5;
const SEED: &str = "7";

const LIMIT_1: Duration = Duration::from_secs(10);
const LIMIT_2: Duration = Duration::from_secs(1);
const LIMIT_3: Duration = Duration::from_secs(5);
const LIMIT_4: Duration = Duration::from_secs(120);
const LIMIT_5: Duration = Duration::from_secs(30);
const LIMIT_6: Duration = Duration::from_secs(15 * 60);
const LIMIT_7: Duration = Duration::from_secs(30 * 60);

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn within(limit: Duration, elapsed: Duration) -> Result<(), String> {
    ensure(elapsed <= limit, || format!("took {:.1} s, limit {:.0} s", elapsed.as_secs_f64(), limit.as_secs_f64()))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let spec = NetworkSpec::mlp(4, &[20, 20], ActivationKind::ELU, 1, ActivationKind::Identity).map_err(|e| e.to_string())?;
    let mut rng = Rng::new(20);
    let mut worst: f64 = 0.0;
    for _ in 0..GRAD_NETS {
        let mut params = init_params::<f64>(&spec, &mut rng);
        let noise = rng.uniform::<f64>(-0.3, 0.3, params.len()).unwrap();
        for (t, e) in params.flat_mut().iter_mut().zip(noise.iter()) {
            *t += e;
        }
        let x = Matrix::from_vec(8, 4, rng.uniform::<f64>(-1.0, 1.0, 32).unwrap().into_vec()).unwrap();
        let y = Matrix::from_vec(8, 1, rng.uniform::<f64>(-1.0, 1.0, 8).unwrap().into_vec()).unwrap();
        let batch = Dataset::new(x, y).unwrap();
        let (_, g) = loss_and_gradient(&params, &spec, &batch, None).map_err(|e| e.to_string())?;
        let fd = numerical_gradient(&params, &spec, &batch, None, GRAD_H).map_err(|e| e.to_string())?;
        worst = worst.max(max_relative_error(&g, &fd, GRAD_FLOOR));
    }
    ensure(worst < GRAD_TOL, || format!("max relative error {worst:.3e} >= {GRAD_TOL:e}"))?;
    within(LIMIT_1, start.elapsed())?;
    Ok(format!("{GRAD_NETS} nets, max relative error {worst:.2e}"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let cfg = AdamConfig::new(1e-3);
    let g = [0.5f64, -2.0, 1e-9, 0.0, 3.7];
    let mut theta = [0.0f64; 5];
    let mut state = AdamState::new(5);
    adam_update(&mut theta, &g, &cfg, &mut state).map_err(|e| e.to_string())?;
    let mut first_err: f64 = 0.0;
    for (t, gi) in theta.iter().zip(g) {
        let expected = -cfg.eta * gi / (gi.abs() + cfg.eps_a);
        first_err = first_err.max((t - expected).abs());
    }
    ensure(first_err <= ADAM_TOL, || format!("first step error {first_err:.2e}"))?;
    let mut mhat_err: f64 = 0.0;
    for k in 2..=ADAM_STEPS {
        adam_update(&mut theta, &g, &cfg, &mut state).map_err(|e| e.to_string())?;
        let c = 1.0 - cfg.b_m.powi(k as i32);
        for (m, gi) in state.m.iter().zip(g) {
            mhat_err = mhat_err.max((m / c - gi).abs());
        }
    }
    ensure(mhat_err <= ADAM_TOL, || format!("bias-corrected moment error {mhat_err:.2e}"))?;
    within(LIMIT_2, start.elapsed())?;
    Ok(format!("first-step error {first_err:.1e}, m-hat error {mhat_err:.1e} over {ADAM_STEPS} steps"))
}

fn away_from_kinks(n: usize, rng: &mut Rng) -> Vec<f64> {
    let mags = rng.uniform::<f64>(0.01, 1.0, n).unwrap();
    mags.iter().map(|&m| if rng.next_f64() < 0.5 { -m } else { m }).collect()
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let lambda = 0.37;
    let at_zero = subgradient(&RegStrategy::L1Standard { lambda }, None, &[0.0f64, 0.0]).map_err(|e| e.to_string())?;
    ensure(at_zero.as_slice() == [lambda, lambda], || format!("subgradient at zero {:?}", at_zero.as_slice()))?;

    let n = 12;
    let mut rng = Rng::new(33);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let names = ["l2", "l1", "l1_reweighted", "l1_bf_diff", "l1_bf_weighted"];
    for name in names {
        for _ in 0..SUBGRAD_POINTS {
            let lf = Vector::from_vec(away_from_kinks(n, &mut rng));
            let mut theta = away_from_kinks(n, &mut rng);
            for (t, l) in theta.iter_mut().zip(lf.iter()) {
                if (*t - *l).abs() < 0.01 {
                    *t += 0.05;
                }
            }
            let prev = away_from_kinks(n, &mut rng);
            let (s, st): (RegStrategy<f64>, Option<RegState<f64>>) = match name {
                "l2" => (RegStrategy::L2 { lambda: 0.7 }, None),
                "l1" => (RegStrategy::L1Standard { lambda: 0.3 }, None),
                "l1_reweighted" => {
                    (RegStrategy::L1ReweightedHF { lambda: 0.2, eps_w: 1e-5 }, Some(update_reweight_state(1e-5, &prev)))
                }
                "l1_bf_diff" => (RegStrategy::L1BiFidelityDiff { lambda: 0.4, theta_lf: lf.clone() }, None),
                _ => (
                    RegStrategy::L1BiFidelityWeighted { lambda: 0.1, eps_w: 1e-5, theta_lf: lf.clone() },
                    Some(bifidelity_weights(&lf, 1e-5)),
                ),
            };
            let d = rng.uniform::<f64>(-1.0, 1.0, n).unwrap();
            let moved: Vec<f64> = theta.iter().zip(d.iter()).map(|(a, b)| a + SUBGRAD_T * b).collect();
            let g = subgradient(&s, st.as_ref(), &theta).map_err(|e| e.to_string())?;
            let slope: f64 = g.iter().zip(d.iter()).map(|(a, b)| a * b).sum();
            let p0 = penalty(&s, st.as_ref(), &theta).map_err(|e| e.to_string())?;
            let p1 = penalty(&s, st.as_ref(), &moved).map_err(|e| e.to_string())?;
            let fd = (p1 - p0) / SUBGRAD_T;
            let scale = g.iter().zip(d.iter()).map(|(a, b)| (a * b).abs()).sum::<f64>().max(1.0);
            let err = (fd - slope).abs() / scale;
            worst = worst.max(err);
            ensure(err <= SUBGRAD_TOL, || format!("{name}: directional derivative {fd} vs {slope}"))?;
            checked += 1;
        }
    }
    within(LIMIT_3, start.elapsed())?;
    Ok(format!("s(0)=+1; {checked} points over {} strategies, max scaled error {worst:.1e}", names.len()))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let n = HIFI_GRID;
    let h = PI / (n - 1) as f64;
    let cells = 4 * (n - 1);
    let xs_grid = grid(n);
    let mut details = Vec::new();
    for delta in BURGERS_DELTAS {
        let m = burgers_march(delta, cells, BURGERS_RESIDUAL, 10_000_000).map_err(|e| format!("delta {delta}: {e}"))?;
        let exact = nozzle_shock_position(delta).map_err(|e| e.to_string())?;
        let marched = m.shock_position().map_err(|e| e.to_string())?;
        ensure((marched - exact).abs() <= h, || format!("delta {delta}: shock {marched} vs {exact}, cell {h:.2e}"))?;
        let field = nozzle_field(delta, n).map_err(|e| e.to_string())?;
        let err = xs_grid
            .iter()
            .zip(field.iter())
            .filter(|(x, _)| (*x - exact).abs() > BURGERS_SHOCK_EXCLUSION * h)
            .map(|(&x, &u)| (m.sample(x) - u).abs())
            .fold(0.0, f64::max);
        ensure(err < BURGERS_FIELD_TOL, || format!("delta {delta}: field error {err:.2e}"))?;
        details.push(format!("d={delta}: |dXs|={:.1e}, field {err:.1e}", (marched - exact).abs()));
    }
    within(LIMIT_4, start.elapsed())?;
    Ok(format!("{n}-point grid, {cells} cells; {}", details.join("; ")))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let (q, e1, e2, e3) = (10.0, 1.0, 1.0, 10.0);
    let ei = beam_ei(e1, e2, e3).map_err(|e| e.to_string())?;
    let closed = -(q * Q_TO_SI) * LENGTH.powi(4) / (8.0 * ei);
    let lofi = beam_lofi_deflection(q, e1, e2, e3).map_err(|e| e.to_string())?;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    ensure(rel(lofi, closed) <= BEAM_CLOSED_FORM_TOL, || format!("closed form {lofi} vs {closed}"))?;
    let fe = BeamFe::new(200, false).and_then(|b| b.tip_deflection(q, e1, e2, e3)).map_err(|e| e.to_string())?;
    ensure(rel(fe, closed) <= BEAM_FE_TOL, || format!("hole-free FE {fe} vs {closed}"))?;
    let coarse = BeamFe::new(100, true).and_then(|b| b.tip_deflection(q, e1, e2, e3)).map_err(|e| e.to_string())?;
    let fine = BeamFe::new(400, true).and_then(|b| b.tip_deflection(q, e1, e2, e3)).map_err(|e| e.to_string())?;
    ensure(rel(coarse, fine) < BEAM_CONVERGENCE_TOL, || format!("100 vs 400 elements: {coarse} vs {fine}"))?;
    within(LIMIT_5, start.elapsed())?;
    Ok(format!(
        "tip {lofi:.6}, FE rel {:.1e}, 100->400 rel {:.1e}",
        rel(fe, closed),
        rel(coarse, fine)
    ))
}

struct Run {
    report: ExperimentReport,
    path: PathBuf,
    elapsed: Duration,
}

fn reproduce(problem: &str, out: &Path) -> Result<Run, String> {
    let start = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_bfl1"))
        .args(["reproduce", problem, "--scale", "desk", "--seed", SEED, "--jobs", "1", "--out"])
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if !o.status.success() {
        return Err(format!("exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
    }
    let path = PathBuf::from(String::from_utf8_lossy(&o.stdout).trim());
    let report = ExperimentReport::load(&path).map_err(|e| e.to_string())?;
    Ok(Run { report, path, elapsed })
}

fn mean_of(report: &ExperimentReport, kind: StrategyKind) -> Result<f64, String> {
    report
        .strategy(kind)
        .and_then(|s| s.mean_eps_v)
        .ok_or_else(|| format!("no mean for {}", kind.name()))
}

fn ratio_check(report: &ExperimentReport, reps: usize) -> Outcome {
    for s in &report.strategies {
        ensure(s.replications.len() == reps, || format!("{}: {} of {reps} replications", s.name, s.replications.len()))?;
    }
    let base = mean_of(report, StrategyKind::None)?;
    let r3 = mean_of(report, StrategyKind::L1BfDiff)? / base;
    let r4 = mean_of(report, StrategyKind::L1BfWeighted)? / base;
    let refs: Vec<String> = report
        .strategies
        .iter()
        .map(|s| {
            format!(
                "{} {:.3e} (ref {})",
                s.label,
                s.mean_eps_v.unwrap_or(f64::NAN),
                s.reference.as_ref().map(|r| format!("{:.3e}", r.mean_eps_v)).unwrap_or_else(|| "-".into())
            )
        })
        .collect();
    let detail = format!("III/None {r3:.3}, IV/None {r4:.3}; {}", refs.join(", "));
    ensure(r3 <= RATIO_LIMIT && r4 <= RATIO_LIMIT, || detail.clone())?;
    Ok(detail)
}

fn criterion_6(run: &Run) -> Outcome {
    let detail = ratio_check(&run.report, 10)?;
    within(LIMIT_6, run.elapsed)?;
    Ok(format!("{detail}; {:.0} s", run.elapsed.as_secs_f64()))
}

fn criterion_7(out: &Path) -> Outcome {
    let run = reproduce("nozzle", out)?;
    let detail = ratio_check(&run.report, 10)?;
    within(LIMIT_7, run.elapsed)?;
    Ok(format!("{detail}; {:.0} s", run.elapsed.as_secs_f64()))
}

fn criterion_8(run: &Run) -> Outcome {
    let b = run.report.bounds.as_ref().ok_or("report has no bounds section")?;
    let ok = |k: &bfl1::bounds::KReport| {
        [k.k_std_hf, k.k_wgt_hf, k.k_std_bf, k.k_wgt_bf].iter().all(|v| v.is_finite() && *v > 0.0)
    };
    ensure(ok(&b.mean) && b.replications.iter().all(|r| ok(&r.k)), || "non-finite or nonpositive K".into())?;
    ensure(b.replications.len() == 10, || format!("K for {} replications", b.replications.len()))?;
    let r = b.reference.as_ref().ok_or("no reference K values")?;
    ensure(
        (r.k_std_hf, r.k_wgt_hf, r.k_std_bf, r.k_wgt_bf) == (535.36, 2.15e5, 33.92, 32.72),
        || format!("reference values {r:?}"),
    )?;
    ensure(b.ordering == "pass" || b.ordering == "warn", || format!("ordering field {:?}", b.ordering))?;
    let m = &b.mean;
    Ok(format!(
        "mean K std_hf {:.3e}, wgt_hf {:.3e}, std_bf {:.3e}, wgt_bf {:.3e}; ordering {} ({} of {} replications)",
        m.k_std_hf,
        m.k_wgt_hf,
        m.k_std_bf,
        m.k_wgt_bf,
        b.ordering,
        b.ordering_holds_replications,
        b.replications.len()
    ))
}

fn criterion_9(run: &Run) -> Outcome {
    let frac = |kind: StrategyKind| {
        run.report
            .strategy(kind)
            .and_then(|s| s.mean_frac_below_1e3)
            .ok_or_else(|| format!("no sparsity for {}", kind.name()))
    };
    let (l1, none) = (frac(StrategyKind::L1)?, frac(StrategyKind::None)?);
    let detail = format!("fraction |theta|<1e-3: I {l1:.4}, None {none:.4}");
    ensure(l1 > none, || detail.clone())?;
    Ok(detail)
}

fn criterion_10(first: &Run, out: &Path) -> Outcome {
    let second = reproduce("beam", out)?;
    let a = std::fs::read(&first.path).map_err(|e| e.to_string())?;
    let b = std::fs::read(&second.path).map_err(|e| e.to_string())?;
    ensure(a == b, || "report.json differs between runs".into())?;
    Ok(format!("{} bytes identical", a.len()))
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let selected = |n: u32| wanted.is_empty() || wanted.contains(&n);
    let dir = tempfile::tempdir().expect("temp dir");
    let mut failures = 0;
    let mut report = |n: u32, outcome: Outcome, elapsed: Duration| {
        let secs = elapsed.as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {n:>2}: PASS ({secs:.1} s) {d}"),
            Err(d) => {
                failures += 1;
                println!("criterion {n:>2}: FAIL ({secs:.1} s) {d}");
            }
        }
    };
    let fast: [(u32, fn() -> Outcome); 5] =
        [(1, criterion_1), (2, criterion_2), (3, criterion_3), (4, criterion_4), (5, criterion_5)];
    for (n, f) in fast {
        if selected(n) {
            let t = Instant::now();
            report(n, f(), t.elapsed());
        }
    }
    if [6, 8, 9, 10].into_iter().any(selected) {
        let t = Instant::now();
        match reproduce("beam", &dir.path().join("beam-a")) {
            Ok(run) => {
                if selected(6) {
                    report(6, criterion_6(&run), run.elapsed);
                }
                if selected(8) {
                    report(8, criterion_8(&run), Duration::ZERO);
                }
                if selected(9) {
                    report(9, criterion_9(&run), Duration::ZERO);
                }
                if selected(10) {
                    let t = Instant::now();
                    report(10, criterion_10(&run, &dir.path().join("beam-b")), t.elapsed());
                }
            }
            Err(e) => {
                for n in [6, 8, 9, 10].into_iter().filter(|&n| selected(n)) {
                    report(n, Err(format!("beam reproduction failed: {e}")), t.elapsed());
                }
            }
        }
    }
    if selected(7) {
        let t = Instant::now();
        report(7, criterion_7(&dir.path().join("nozzle")), t.elapsed());
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all selected criteria passed");
}
