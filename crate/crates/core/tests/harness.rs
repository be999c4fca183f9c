use bfl1::harness::config::{ExperimentConfig, Scale, StrategyConfig, StrategyKind};
use bfl1::harness::experiment::{prepare, run_replication, train_lofi_network, RunResult};
use bfl1::harness::report::{mean_std, LambdaSummary};
use bfl1::harness::train::best_index;
use bfl1::harness::{relative_rmse, run_replications, select_lambda, train, Qoi, TrainConfig, Validator};
use bfl1::models::{generate_bifidelity_dataset, BeamHifiSource, Problem};
use bfl1::network::{forward_batch, init_params, ActivationKind, NetworkSpec};
use bfl1::regularization::RegStrategy;
use bfl1::{AdamConfig, Dataset, Matrix, Rng, Vector};
use proptest::prelude::*;

fn v(x: &[f64]) -> Vector<f64> {
    Vector::from_vec(x.to_vec())
}

#[test]
fn relative_rmse_examples() {
    assert_eq!(relative_rmse(&[v(&[1.0, 2.0])], &[v(&[1.0, 2.0])]).unwrap(), 0.0);
    assert_eq!(relative_rmse(&[v(&[3.0, 4.0])], &[v(&[0.0, 0.0])]).unwrap(), 1.0);
    let val = [v(&[1.0, 0.0]), v(&[0.0, 1.0])];
    let pred = [v(&[0.0, 0.0]), v(&[0.0, 0.0])];
    assert_eq!(relative_rmse(&val, &pred).unwrap(), 1.0);
    assert!(relative_rmse(&[v(&[0.0, 0.0])], &[v(&[1.0, 0.0])]).is_err());
}

fn toy_problem(seed: u64) -> (NetworkSpec, Dataset<f64>, Validator) {
    let spec = NetworkSpec::mlp(2, &[8], ActivationKind::ELU, 1, ActivationKind::Identity).unwrap();
    let mut rng = Rng::new(seed);
    let make = |rng: &mut Rng, n: usize| {
        let x = Matrix::from_vec(n, 2, rng.uniform::<f64>(-1.0, 1.0, 2 * n).unwrap().into_vec()).unwrap();
        let y: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * x.row(i)[0] - x.row(i)[1] * x.row(i)[1]).collect();
        (x, Matrix::from_vec(n, 1, y).unwrap())
    };
    let (x, y) = make(&mut rng, 40);
    let (xv, yv) = make(&mut rng, 20);
    let qoi = Qoi::Outputs(bfl1::harness::Standardizer::identity(1));
    (spec, Dataset::new(x, y).unwrap(), Validator::new(xv, &yv, qoi).unwrap())
}

fn toy_config(spec: &NetworkSpec, strategy: RegStrategy<f64>, eta: f64, iters: usize) -> TrainConfig {
    TrainConfig { spec: spec.clone(), strategy, adam: AdamConfig::new(eta), iters, batch_size: None, eval_every: 1, seed: 3 }
}

#[test]
fn unregularized_training_descends() {
    let (spec, data, val) = toy_problem(1);
    let init = init_params(&spec, &mut Rng::new(9));
    let out = train(&toy_config(&spec, RegStrategy::None, 1e-2, 400), &data, &val, init).unwrap();
    let eps: Vec<f64> = out.trace.iter().map(|e| e.eps_v).collect();
    let window = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    assert!(window(&eps[eps.len() - 20..]) < window(&eps[..20]));
    assert!(eps[eps.len() - 1] < eps[0]);
    assert!(out.best_eps_v < eps[0]);
    assert_eq!(out.trace.len(), 401);
}

#[test]
fn strong_difference_penalty_pulls_toward_reference() {
    let (spec, data, val) = toy_problem(2);
    let fitted = train(&toy_config(&spec, RegStrategy::None, 1e-2, 600), &data, &val, init_params(&spec, &mut Rng::new(4)))
        .unwrap()
        .best;
    let theta_lf = fitted.flat().clone();
    let init = init_params(&spec, &mut Rng::new(5));
    let l1 = |a: &Vector<f64>| a.iter().zip(theta_lf.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>();
    let before = l1(init.flat());
    let strategy = RegStrategy::L1BiFidelityDiff { lambda: 1e3, theta_lf: theta_lf.clone() };
    let out = train(&toy_config(&spec, strategy, 1e-2, 400), &data, &val, init).unwrap();
    let after = l1(out.best.flat());
    assert!(after < before, "{after} vs {before}");
    assert!(after < 0.1 * before, "{after} vs {before}");
}

#[test]
fn best_iter_is_trace_argmin() {
    let (spec, data, val) = toy_problem(3);
    let out = train(&toy_config(&spec, RegStrategy::L1Standard { lambda: 1e-3 }, 5e-2, 200), &data, &val, init_params(&spec, &mut Rng::new(1)))
        .unwrap();
    let i = best_index(&out.trace).unwrap();
    assert_eq!(out.trace[i].iter, out.best_iter);
    assert_eq!(out.trace[i].eps_v, out.best_eps_v);
    assert!(out.trace.iter().all(|e| e.eps_v >= out.best_eps_v));
    let recomputed = val.eps_v(&out.best, &spec).unwrap();
    assert_eq!(recomputed, out.best_eps_v);
}

#[test]
fn eval_cadence_records_last_iteration() {
    let (spec, data, val) = toy_problem(4);
    let mut cfg = toy_config(&spec, RegStrategy::None, 1e-2, 25);
    cfg.eval_every = 10;
    let out = train(&cfg, &data, &val, init_params(&spec, &mut Rng::new(1))).unwrap();
    let iters: Vec<usize> = out.trace.iter().map(|e| e.iter).collect();
    assert_eq!(iters, vec![0, 10, 20, 25]);
}

#[test]
fn nan_loss_is_divergence() {
    let (spec, data, val) = toy_problem(5);
    let strategy = RegStrategy::L1Standard { lambda: 1e308 };
    let err = train(&toy_config(&spec, strategy, 1e-2, 10), &data, &val, init_params(&spec, &mut Rng::new(1))).unwrap_err();
    assert!(matches!(err, bfl1::Error::Divergence { .. }), "{err}");
}

fn small_beam() -> ExperimentConfig {
    let mut c = ExperimentConfig::preset(Problem::Beam, Scale::Desk, 11);
    c.counts.n_l = 40;
    c.counts.n_h = 3;
    c.counts.n_val = 10;
    c.counts.r = 3;
    c.counts.inits = 2;
    c.lofi.holdout = 10;
    c.lofi.iters = 150;
    c.optimizer.iters = 60;
    c.optimizer.eta = 1e-2;
    c.beam_elements = Some(50);
    c.strategies = vec![
        StrategyConfig::new(StrategyKind::None),
        StrategyConfig::with_grid(StrategyKind::L1, &[1e-3, 1e-2]),
        StrategyConfig::with_grid(StrategyKind::L1Reweighted, &[1e-4]),
        StrategyConfig::with_grid(StrategyKind::L1BfDiff, &[1e-3, 1e-2]),
        StrategyConfig::with_grid(StrategyKind::L1BfWeighted, &[1e-4]),
    ];
    c
}

fn report_json(cfg: &ExperimentConfig, jobs: usize) -> String {
    serde_json::to_string(&run_replications(cfg, jobs).unwrap().report).unwrap()
}

#[test]
fn replications_are_deterministic_across_runs_and_thread_counts() {
    let cfg = small_beam();
    let a = report_json(&cfg, 1);
    assert_eq!(a, report_json(&cfg, 1));
    assert_eq!(a, report_json(&cfg, 3));
}

fn eps_table(runs: &[Vec<Option<RunResult>>]) -> Vec<Vec<Option<(f64, usize, usize)>>> {
    runs.iter()
        .map(|per| per.iter().map(|r| r.as_ref().map(|r| (r.eps_v, r.best_iter, r.init_index))).collect())
        .collect()
}

#[test]
fn replication_alone_matches_batch() {
    let cfg = small_beam();
    let source = BeamHifiSource::Proxy { n_elems: 50 };
    let alone = run_replication(&cfg, 2, &source);
    let mut first_two = cfg.clone();
    first_two.counts.r = 3;
    let all: Vec<_> = (0..3).map(|r| run_replication(&first_two, r, &source)).collect();
    assert_eq!(eps_table(&alone.runs), eps_table(&all[2].runs));
    assert_ne!(eps_table(&all[0].runs), eps_table(&all[1].runs));
}

#[test]
fn report_statistics_are_recomputable() {
    let cfg = small_beam();
    let out = run_replications(&cfg, 1).unwrap();
    for s in &out.report.strategies {
        let eps: Vec<f64> = s.replications.iter().map(|r| r.eps_v).collect();
        assert_eq!(eps.len(), cfg.counts.r);
        let (m, sd) = mean_std(&eps);
        assert!((m.unwrap() - s.mean_eps_v.unwrap()).abs() <= 1e-12);
        assert!((sd.unwrap() - s.std_eps_v.unwrap()).abs() <= 1e-12);
        let n_params = NetworkSpec::mlp(4, &[20, 20], ActivationKind::ELU, 1, ActivationKind::Identity)
            .unwrap()
            .param_count();
        for r in &s.replications {
            assert_eq!(r.histogram.iter().sum::<usize>(), n_params);
            assert!(r.eps_v >= 0.0 && r.best_iter <= cfg.optimizer.iters);
            assert!(r.k_constant.is_some_and(|k| k.is_finite() && k > 0.0));
        }
        assert_eq!(s.lambda_search.len(), cfg.strategies.iter().find(|c| c.kind.name() == s.name).unwrap().lambdas().len());
    }
    let bounds = out.report.bounds.as_ref().unwrap();
    assert_eq!(bounds.replications.len(), cfg.counts.r);
    assert!(bounds.ordering == "pass" || bounds.ordering == "warn");
    assert_eq!(bounds.reference.as_ref().unwrap().k_std_hf, 535.36);
    assert!(out.dumps.iter().any(|(n, _)| n == "lofi_rep0"));
}

#[test]
fn diverging_lambda_is_reported_but_not_selected() {
    let mut cfg = small_beam();
    cfg.counts.r = 1;
    cfg.strategies = vec![StrategyConfig::with_grid(StrategyKind::L1, &[1e-3, 1e308])];
    let out = run_replications(&cfg, 1).unwrap();
    let s = &out.report.strategies[0];
    assert_eq!(s.lambda, Some(1e-3));
    assert_eq!(s.lambda_search[1].n_ok, 0);
    assert_eq!(s.lambda_search[1].n_failed, 1);
    assert!(s.lambda_search[1].mean_eps_v.is_none());
}

#[test]
fn lofi_parameters_match_high_fidelity_network() {
    let cfg = small_beam();
    let data = generate_bifidelity_dataset(Problem::Beam, 40, 3, 10, &Rng::new(1), &BeamHifiSource::Proxy { n_elems: 50 })
        .unwrap();
    let prep = prepare(&cfg, &data).unwrap();
    let lf = train_lofi_network(&cfg, &prep, &Rng::new(2)).unwrap();
    assert_eq!(lf.best.len(), prep.spec.param_count());
    assert_eq!(prep.lo_train.len(), 30);
    // Standardized outputs reproduce physical targets after inversion.
    let pred = prep.val.predict(&lf.best, &prep.spec).unwrap();
    let raw = forward_batch(&lf.best, &prep.spec, &prep.val.x).unwrap();
    assert_eq!(pred.len(), raw.rows());
}

#[test]
fn strategy_three_distance_shrinks_with_lambda() {
    // Empirical: at most one inversion across the grid.
    let (spec, data, val) = toy_problem(6);
    let theta_lf = train(&toy_config(&spec, RegStrategy::None, 1e-2, 300), &data, &val, init_params(&spec, &mut Rng::new(8)))
        .unwrap()
        .best
        .into_flat();
    let mut dists = Vec::new();
    for lambda in [1e-4, 1e-3, 1e-2, 1e-1, 1.0] {
        let strategy = RegStrategy::L1BiFidelityDiff { lambda, theta_lf: theta_lf.clone() };
        let mut cfg = toy_config(&spec, strategy, 1e-2, 300);
        cfg.eval_every = 300;
        let out = train(&cfg, &data, &val, init_params(&spec, &mut Rng::new(12))).unwrap();
        let last = out.trace.last().unwrap();
        assert_eq!(last.iter, 300);
        dists.push(last.penalty / lambda);
    }
    let inversions = dists.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "{dists:?}");
}

fn summary(lambda: f64, mean: Option<f64>) -> LambdaSummary {
    LambdaSummary { lambda: Some(lambda), mean_eps_v: mean, std_eps_v: None, n_ok: mean.is_some() as usize, n_failed: mean.is_none() as usize }
}

#[test]
fn lambda_selection_rules() {
    assert_eq!(select_lambda(&[summary(1e-3, Some(0.4))]), Some(0));
    assert_eq!(select_lambda(&[summary(1e-3, Some(0.2)), summary(1e-2, Some(0.2)), summary(1e-1, Some(0.3))]), Some(1));
    assert_eq!(select_lambda(&[summary(1e-3, None), summary(1e-2, Some(0.9))]), Some(1));
    assert_eq!(select_lambda(&[summary(1e-3, None)]), None);
}

proptest! {
    #[test]
    fn best_index_invariant_under_positive_scaling(
        eps in prop::collection::vec(0.0f64..10.0, 1..40),
        scale in 1e-3f64..1e3,
    ) {
        let entry = |i: usize, e: f64| bfl1::harness::train::TraceEntry { iter: i, loss: 0.0, penalty: 0.0, eps_v: e };
        let a: Vec<_> = eps.iter().enumerate().map(|(i, &e)| entry(i, e)).collect();
        let b: Vec<_> = eps.iter().enumerate().map(|(i, &e)| entry(i, e * scale)).collect();
        let i = best_index(&a).unwrap();
        prop_assert_eq!(Some(i), best_index(&b));
        prop_assert!(eps.iter().all(|&e| e >= eps[i]));
        prop_assert!(eps[..i].iter().all(|&e| e > eps[i]));
    }
}
