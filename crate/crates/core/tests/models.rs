use std::f64::consts::PI;

use bfl1::models::beam::{beam_ei, beam_lofi_profile, LENGTH};
use bfl1::models::nozzle::{burgers_march, grid, HIFI_GRID, LOFI_GRID};
use bfl1::models::{
    beam_hifi_proxy, beam_lofi_deflection, generate_bifidelity_dataset, nozzle_delta, nozzle_field,
    nozzle_shock_from_field, nozzle_shock_position, read_beam_csv, write_split_csv, BeamFe, BeamHifiSource,
    Problem,
};
use bfl1::{Error, Rng};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn lofi_tip_matches_closed_form() {
    let (q, e1, e2, e3) = (10.3, 0.97, 1.05, 9.4);
    let ei = beam_ei(e1, e2, e3).unwrap();
    let expect = -(q * 1e3) * LENGTH.powi(4) / (8.0 * ei);
    assert!(rel(beam_lofi_deflection(q, e1, e2, e3).unwrap(), expect) < 1e-12);
    let mid = beam_lofi_profile(q, e1, e2, e3, 0.5 * LENGTH).unwrap();
    assert!(rel(mid, expect * (0.0625 - 0.5 + 1.5) / 3.0) < 1e-12);
}

#[test]
fn lofi_reference_sample() {
    // Transformed-section hand calculation: centroid 2.6 m, EI = 1404833.33 N m².
    assert!(rel(beam_ei(1.0, 1.0, 10.0).unwrap(), 1_404_833.333_333_333_3) < 1e-12);
    assert!(rel(beam_lofi_deflection(10.0, 1.0, 1.0, 10.0).unwrap(), -5561.157907225056) < 1e-12);
}

#[test]
fn lofi_linear_in_load() {
    let a = beam_lofi_deflection(9.5, 1.0, 1.0, 10.0).unwrap();
    let b = beam_lofi_deflection(19.0, 1.0, 1.0, 10.0).unwrap();
    assert!(rel(b, 2.0 * a) < 1e-14);
}

#[test]
fn fe_without_holes_matches_closed_form() {
    let fe = BeamFe::new(200, false).unwrap();
    for &(q, e1, e2, e3) in &[(10.0, 1.0, 1.0, 10.0), (9.1, 0.93, 1.08, 10.7)] {
        let lo = beam_lofi_deflection(q, e1, e2, e3).unwrap();
        assert!(rel(fe.tip_deflection(q, e1, e2, e3).unwrap(), lo) < 1e-8);
    }
}

#[test]
fn holes_soften_the_beam() {
    let lo = beam_lofi_deflection(10.0, 1.0, 1.0, 10.0).unwrap();
    let hi = beam_hifi_proxy(10.0, 1.0, 1.0, 10.0, 200).unwrap();
    assert!(hi.abs() > lo.abs());
    assert!(rel(hi, lo) < 0.1);
}

#[test]
fn fe_self_convergence() {
    let a = beam_hifi_proxy(10.0, 1.0, 1.0, 10.0, 100).unwrap();
    let b = beam_hifi_proxy(10.0, 1.0, 1.0, 10.0, 400).unwrap();
    assert!(rel(a, b) < 1e-6, "{a} vs {b}");
}

#[test]
fn fe_linear_in_load() {
    let a = beam_hifi_proxy(9.7, 1.02, 0.95, 10.2, 100).unwrap();
    let b = beam_hifi_proxy(19.4, 1.02, 0.95, 10.2, 100).unwrap();
    assert!(rel(b, 2.0 * a) < 1e-10);
}

#[test]
fn fe_not_multiplicative_in_moduli() {
    // The hole correction depends on how much the web carries.
    let ratio = |e3: f64| beam_hifi_proxy(10.0, 1.0, 1.0, e3, 100).unwrap() / beam_lofi_deflection(10.0, 1.0, 1.0, e3).unwrap();
    assert!((ratio(9.0) - ratio(11.0)).abs() > 1e-6);
}

#[test]
fn nozzle_delta_examples() {
    assert_eq!(nozzle_delta(0.0), 0.0);
    assert!((nozzle_delta(1.0) - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
    assert!((nozzle_delta(1.0) - 0.618034).abs() < 1e-6);
}

#[test]
fn shock_position_examples() {
    assert!((nozzle_shock_position(0.0).unwrap() - PI / 2.0).abs() < 1e-15);
    assert!((nozzle_shock_position(0.6).unwrap() - 2.214297).abs() < 1e-6);
    assert!((nozzle_shock_position(-0.6).unwrap() - 0.927295).abs() < 1e-6);
    assert!(matches!(nozzle_shock_position(1.0), Err(Error::NoShock)));
    assert!(matches!(nozzle_shock_position(-1.5), Err(Error::NoShock)));
}

#[test]
fn shock_position_conserves_mass() {
    // ∫u over the steady field equals 2δ.
    for &d in &[-0.9, -0.3, 0.0, 0.45, 0.8] {
        let xs = nozzle_shock_position(d).unwrap();
        assert!(((1.0 - xs.cos()) - (1.0 + xs.cos()) - 2.0 * d).abs() < 1e-12);
    }
}

#[test]
fn field_endpoints_and_single_crossing() {
    for &d in &[-0.8, -0.2, 0.0, 0.3, 0.7] {
        let f = nozzle_field(d, 100).unwrap();
        assert_eq!(f[0], 0.0);
        assert_eq!(f[99], 0.0);
        let changes = f[1..99].windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count();
        assert_eq!(changes, 1, "delta {d}");
        assert!(f.iter().all(|v| v.abs() <= 1.0));
    }
}

#[test]
fn field_tie_goes_to_pre_shock_branch() {
    // δ = 0 puts the shock exactly at π/2, a node of a 101-point grid.
    let f = nozzle_field(0.0, 101).unwrap();
    assert_eq!(grid(101)[50], PI / 2.0);
    assert_eq!(f[50], 1.0);
    assert!(f[51] < 0.0);
}

#[test]
fn shock_extraction_examples() {
    let h = PI / (HIFI_GRID - 1) as f64;
    let f = nozzle_field(0.3, HIFI_GRID).unwrap();
    assert!((nozzle_shock_from_field(&f).unwrap() - nozzle_shock_position(0.3).unwrap()).abs() < h);
    let f = nozzle_field(0.0, HIFI_GRID).unwrap();
    assert!((nozzle_shock_from_field(&f).unwrap() - PI / 2.0).abs() < h);
    let positive: Vec<f64> = grid(50).iter().map(|x| 1.0 + x).collect();
    assert!(matches!(nozzle_shock_from_field(&positive), Err(Error::NoShock)));
}

#[test]
fn shock_extraction_prefers_largest_drop() {
    let mut f = nozzle_field(0.5, 200).unwrap().into_vec();
    f[20] = -0.01;
    let xs = nozzle_shock_position(0.5).unwrap();
    assert!((nozzle_shock_from_field(&f).unwrap() - xs).abs() < PI / 199.0);
}

#[test]
fn shock_extraction_converges_with_grid() {
    let xs = nozzle_shock_position(0.37).unwrap();
    let errs: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&n| (nozzle_shock_from_field(&nozzle_field(0.37, n).unwrap()).unwrap() - xs).abs())
        .collect();
    for (n, e) in [64usize, 128, 256].iter().zip(&errs) {
        assert!(*e <= PI / (*n - 1) as f64, "{n}: {e}");
    }
}

#[test]
fn burgers_oracle_agrees_on_coarse_grid() {
    // Coarse grid here is the low-fidelity one; the march runs on 4× as many cells.
    let n = LOFI_GRID;
    let h = PI / (n - 1) as f64;
    let m = burgers_march(-0.4, 4 * (n - 1), 1e-10, 1_000_000).unwrap();
    let xs = nozzle_shock_position(-0.4).unwrap();
    assert!((m.shock_position().unwrap() - xs).abs() < h);
    let field = nozzle_field(-0.4, n).unwrap();
    let err = grid(n)
        .iter()
        .zip(field.iter())
        .filter(|(x, _)| (*x - xs).abs() > 2.0 * h)
        .map(|(&x, &u)| (m.sample(x) - u).abs())
        .fold(0.0, f64::max);
    // First-order scheme: error scales with the fine spacing.
    assert!(err < 2.0 * PI / (4.0 * (n - 1) as f64), "{err}");
}

#[test]
fn dataset_split_sizes_and_shapes() {
    let rng = Rng::new(11);
    let beam = generate_bifidelity_dataset(Problem::Beam, 250, 3, 5, &rng, &BeamHifiSource::default()).unwrap();
    assert_eq!((beam.lo.len(), beam.hi.len(), beam.val.len()), (250, 3, 5));
    assert_eq!((beam.lo.input_dim(), beam.lo.output_dim()), (4, 1));

    let noz = generate_bifidelity_dataset(Problem::Nozzle, 4, 3, 2, &rng, &BeamHifiSource::default()).unwrap();
    assert_eq!(noz.lo.input_dim(), LOFI_GRID);
    assert_eq!(noz.hi.input_dim(), HIFI_GRID);
    assert_eq!(noz.val.output_dim(), HIFI_GRID);
}

#[test]
fn dataset_determinism_and_split_independence() {
    let rng = Rng::new(5);
    let src = BeamHifiSource::Proxy { n_elems: 60 };
    let a = generate_bifidelity_dataset(Problem::Beam, 20, 3, 4, &rng, &src).unwrap();
    let b = generate_bifidelity_dataset(Problem::Beam, 20, 3, 4, &rng, &src).unwrap();
    assert_eq!(a, b);
    // Changing one split's size leaves the others untouched.
    let c = generate_bifidelity_dataset(Problem::Beam, 30, 3, 4, &rng, &src).unwrap();
    assert_eq!(a.hi, c.hi);
    assert_eq!(a.val, c.val);
    assert_ne!(a.lo, c.lo);
}

#[test]
fn beam_inputs_in_range() {
    let d = generate_bifidelity_dataset(Problem::Beam, 100, 1, 1, &Rng::new(2), &BeamHifiSource::Proxy { n_elems: 50 })
        .unwrap();
    for (x, y) in d.lo.pairs() {
        assert!((9.0..=11.0).contains(&x[0]) && (0.9..=1.1).contains(&x[1]));
        assert!((0.9..=1.1).contains(&x[2]) && (9.0..=11.0).contains(&x[3]));
        assert!(y[0] < 0.0);
    }
}

#[test]
fn beam_csv_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = generate_bifidelity_dataset(Problem::Beam, 5, 2, 2, &Rng::new(3), &BeamHifiSource::Proxy { n_elems: 50 })
        .unwrap();
    let p = dir.path().join("hi.csv");
    write_split_csv(&p, Problem::Beam, &d.lo).unwrap();
    let rows = read_beam_csv(&p).unwrap();
    assert_eq!(rows.len(), 5);
    for (r, (x, y)) in rows.iter().zip(d.lo.pairs()) {
        assert_eq!(r.inputs().as_slice(), x);
        assert_eq!(r.tip_deflection, y[0]);
    }
    let via_csv = generate_bifidelity_dataset(Problem::Beam, 5, 2, 3, &Rng::new(3), &BeamHifiSource::Samples(rows))
        .unwrap();
    assert_eq!(via_csv.hi.len(), 2);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "q,E1,E2,E3,y\n10,1,1,10,-5\n10,1,oops,10,-5\n").unwrap();
    let msg = read_beam_csv(&bad).unwrap_err().to_string();
    assert!(msg.contains("row 2"), "{msg}");
    std::fs::write(&bad, "q,E1,E2,y\n").unwrap();
    assert!(matches!(read_beam_csv(&bad), Err(Error::Input(_))));
}

#[test]
fn bundle_written() {
    let dir = tempfile::tempdir().unwrap();
    let d = generate_bifidelity_dataset(Problem::Nozzle, 3, 2, 2, &Rng::new(4), &BeamHifiSource::default()).unwrap();
    d.write_bundle(dir.path()).unwrap();
    for f in ["lo.csv", "hi.csv", "val.csv", "meta.json"] {
        assert!(dir.path().join(f).exists());
    }
    let back = bfl1::models::read_field_csv(&dir.path().join("lo.csv"), LOFI_GRID).unwrap();
    assert_eq!(back.len(), 3);
    for (a, b) in back.x().as_slice().iter().zip(d.lo.x().as_slice()) {
        assert_eq!(a, b);
    }
}

proptest! {
    #[test]
    fn delta_odd_and_bounded(xi in -1e6f64..1e6) {
        let d = nozzle_delta(xi);
        prop_assert!(d.abs() < 1.0);
        prop_assert_eq!(nozzle_delta(-xi), -d);
    }

    #[test]
    fn shock_branches_symmetric(d in -0.999f64..0.999) {
        let s = nozzle_shock_position(d).unwrap() + nozzle_shock_position(-d).unwrap();
        prop_assert!((s - PI).abs() < 1e-12 || d == 0.0);
    }
}
