//! Bi-fidelity data generators and dataset files.

pub mod beam;
pub mod nozzle;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::linalg::{Matrix, Rng};

pub use beam::{beam_hifi_proxy, beam_lofi_deflection, BeamFe, BeamSample};
pub use nozzle::{
    burgers_march, nozzle_delta, nozzle_field, nozzle_shock_from_field, nozzle_shock_position, NozzleSample,
};

/// Mesh used for high-fidelity beam samples.
pub const BEAM_HIFI_ELEMENTS: usize = 200;

const SPLIT_LO: u64 = 0;
const SPLIT_HI: u64 = 1;
const SPLIT_VAL: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Beam,
    Nozzle,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::Beam => "beam",
            Problem::Nozzle => "nozzle",
        }
    }
}

impl std::str::FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beam" => Ok(Problem::Beam),
            "nozzle" => Ok(Problem::Nozzle),
            _ => Err(Error::config(format!("unknown problem {s:?} (expected beam or nozzle)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub problem: Problem,
    pub seed: u64,
    pub n_lo: usize,
    pub n_hi: usize,
    pub n_val: usize,
    pub lo_grid: Option<usize>,
    pub hi_grid: Option<usize>,
    pub hifi_source: String,
    pub units: BTreeMap<String, String>,
}

/// Low-fidelity, high-fidelity and validation splits drawn from independent streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiFidelityDataset {
    pub lo: Dataset<f64>,
    pub hi: Dataset<f64>,
    pub val: Dataset<f64>,
    pub meta: DatasetMeta,
}

/// Where high-fidelity beam samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum BeamHifiSource {
    Proxy { n_elems: usize },
    /// Pre-computed samples: the first `N_h` rows train, the next `N_val` validate.
    Samples(Vec<BeamSample>),
}

impl Default for BeamHifiSource {
    fn default() -> Self {
        BeamHifiSource::Proxy { n_elems: BEAM_HIFI_ELEMENTS }
    }
}

fn draw(rng: &mut Rng, (a, b): (f64, f64)) -> f64 {
    a + (b - a) * rng.next_f64()
}

fn draw_beam_inputs(rng: &mut Rng) -> [f64; 4] {
    [
        draw(rng, beam::Q_RANGE),
        draw(rng, beam::E1_RANGE),
        draw(rng, beam::E2_RANGE),
        draw(rng, beam::E3_RANGE),
    ]
}

fn beam_dataset(inputs: &[[f64; 4]], y: Vec<f64>) -> Result<Dataset<f64>> {
    let x = Matrix::from_vec(inputs.len(), 4, inputs.concat())?;
    Dataset::new(x, Matrix::from_vec(y.len(), 1, y)?)
}

fn beam_units() -> BTreeMap<String, String> {
    [
        ("q", "kN/m (x1e3 to N/m)"),
        ("E1", "MPa (x1e6 to Pa)"),
        ("E2", "MPa (x1e6 to Pa)"),
        ("E3", "kPa (x1e3 to Pa)"),
        ("y", "m"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

pub fn beam_lofi_split(n: usize, rng: &mut Rng) -> Result<Dataset<f64>> {
    let inputs: Vec<[f64; 4]> = (0..n).map(|_| draw_beam_inputs(rng)).collect();
    let y = inputs
        .iter()
        .map(|&[q, e1, e2, e3]| beam_lofi_deflection(q, e1, e2, e3))
        .collect::<Result<_>>()?;
    beam_dataset(&inputs, y)
}

pub fn beam_hifi_split(n: usize, rng: &mut Rng, n_elems: usize) -> Result<Dataset<f64>> {
    let fe = BeamFe::new(n_elems, true)?;
    let inputs: Vec<[f64; 4]> = (0..n).map(|_| draw_beam_inputs(rng)).collect();
    let y = inputs
        .iter()
        .map(|&[q, e1, e2, e3]| fe.tip_deflection(q, e1, e2, e3))
        .collect::<Result<_>>()?;
    beam_dataset(&inputs, y)
}

/// `n` nozzle fields on an `n_grid` grid; input and target are the same field.
pub fn nozzle_split(n: usize, n_grid: usize, rng: &mut Rng) -> Result<Dataset<f64>> {
    let xi = rng.standard_normal::<f64>(n);
    let mut data = Vec::with_capacity(n * n_grid);
    for &xi in xi.iter() {
        data.extend_from_slice(&nozzle_field(nozzle_delta(xi), n_grid)?);
    }
    Ok(Dataset::reconstruction(Matrix::from_vec(n, n_grid, data)?))
}

pub fn generate_bifidelity_dataset(
    problem: Problem,
    n_lo: usize,
    n_hi: usize,
    n_val: usize,
    rng: &Rng,
    beam_source: &BeamHifiSource,
) -> Result<BiFidelityDataset> {
    if n_lo == 0 || n_hi == 0 || n_val == 0 {
        return Err(Error::config("dataset counts must be at least 1"));
    }
    let (mut r_lo, mut r_hi, mut r_val) = (rng.split(SPLIT_LO), rng.split(SPLIT_HI), rng.split(SPLIT_VAL));
    let (lo, hi, val, meta) = match problem {
        Problem::Beam => {
            let lo = beam_lofi_split(n_lo, &mut r_lo)?;
            let (hi, val, source) = match beam_source {
                BeamHifiSource::Proxy { n_elems } => (
                    beam_hifi_split(n_hi, &mut r_hi, *n_elems)?,
                    beam_hifi_split(n_val, &mut r_val, *n_elems)?,
                    format!("fe_proxy:{n_elems}"),
                ),
                BeamHifiSource::Samples(rows) => {
                    if rows.len() < n_hi + n_val {
                        return Err(Error::input(format!(
                            "high-fidelity file has {} rows, need {}",
                            rows.len(),
                            n_hi + n_val
                        )));
                    }
                    let split = |s: &[BeamSample]| {
                        let inputs: Vec<[f64; 4]> = s.iter().map(BeamSample::inputs).collect();
                        beam_dataset(&inputs, s.iter().map(|r| r.tip_deflection).collect())
                    };
                    (split(&rows[..n_hi])?, split(&rows[n_hi..n_hi + n_val])?, "csv".to_string())
                }
            };
            let meta = DatasetMeta {
                problem,
                seed: rng.seed(),
                n_lo,
                n_hi,
                n_val,
                lo_grid: None,
                hi_grid: None,
                hifi_source: source,
                units: beam_units(),
            };
            (lo, hi, val, meta)
        }
        Problem::Nozzle => {
            let lo = nozzle_split(n_lo, nozzle::LOFI_GRID, &mut r_lo)?;
            let hi = nozzle_split(n_hi, nozzle::HIFI_GRID, &mut r_hi)?;
            let val = nozzle_split(n_val, nozzle::HIFI_GRID, &mut r_val)?;
            let meta = DatasetMeta {
                problem,
                seed: rng.seed(),
                n_lo,
                n_hi,
                n_val,
                lo_grid: Some(nozzle::LOFI_GRID),
                hi_grid: Some(nozzle::HIFI_GRID),
                hifi_source: "analytic".into(),
                units: [("x", "dimensionless on [0, pi]"), ("u", "dimensionless")]
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .collect(),
            };
            (lo, hi, val, meta)
        }
    };
    Ok(BiFidelityDataset { lo, hi, val, meta })
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    w.into_inner().map_err(|e| Error::input(e.to_string()))
}

fn beam_header() -> Vec<String> {
    ["q", "E1", "E2", "E3", "y"].iter().map(|s| s.to_string()).collect()
}

fn field_header(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x_{i}")).collect()
}

/// Writes one split as CSV: beam columns `q,E1,E2,E3,y`, nozzle columns `x_0..x_{n−1}`.
pub fn write_split_csv(path: &Path, problem: Problem, data: &Dataset<f64>) -> Result<()> {
    let bytes = match problem {
        Problem::Beam => csv_bytes(
            &beam_header(),
            data.pairs().map(|(x, y)| x.iter().chain(y).copied().collect()),
        )?,
        Problem::Nozzle => csv_bytes(&field_header(data.input_dim()), data.pairs().map(|(x, _)| x.to_vec()))?,
    };
    write_atomic(path, &bytes)
}

fn read_rows(path: &Path, expected: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header != expected {
        return Err(Error::input(format!(
            "{}: header must be {}, got {}",
            path.display(),
            expected.join(","),
            header.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row_no = i + 1;
        let rec = rec.map_err(|e| Error::input(format!("{} row {row_no}: {e}", path.display())))?;
        if rec.len() != expected.len() {
            return Err(Error::input(format!(
                "{} row {row_no}: expected {} columns, got {}",
                path.display(),
                expected.len(),
                rec.len()
            )));
        }
        let vals = rec
            .iter()
            .enumerate()
            .map(|(j, s)| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::input(format!("{} row {row_no}: bad value {s:?} in column {}", path.display(), expected[j])))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(vals);
    }
    Ok(rows)
}

/// Reads beam samples with columns `q,E1,E2,E3,y`.
pub fn read_beam_csv(path: &Path) -> Result<Vec<BeamSample>> {
    Ok(read_rows(path, &beam_header())?
        .into_iter()
        .map(|r| BeamSample { q: r[0], E1: r[1], E2: r[2], E3: r[3], tip_deflection: r[4] })
        .collect())
}

/// Reads nozzle fields with columns `x_0..x_{n−1}`.
pub fn read_field_csv(path: &Path, n: usize) -> Result<Dataset<f64>> {
    let rows = read_rows(path, &field_header(n))?;
    let count = rows.len();
    Ok(Dataset::reconstruction(Matrix::from_vec(count, n, rows.concat())?))
}

impl BiFidelityDataset {
    /// Writes `lo.csv`, `hi.csv`, `val.csv` and `meta.json` into `dir`.
    pub fn write_bundle(&self, dir: &Path) -> Result<()> {
        let p = self.meta.problem;
        write_split_csv(&dir.join("lo.csv"), p, &self.lo)?;
        write_split_csv(&dir.join("hi.csv"), p, &self.hi)?;
        write_split_csv(&dir.join("val.csv"), p, &self.val)?;
        crate::io::write_json(&dir.join("meta.json"), &self.meta)
    }
}
