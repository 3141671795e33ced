//! Synthetic benchmark generators, CSV ingestion, and acquisition pools.
//!
//! Two 1D generators are built in. *hetero* draws `x` from an equal-weight
//! mixture of three Gaussians centred at −4, 0, 4 and emits
//! `y = 7·sin(x) + 3·z·|cos(x/2)|`, so the noise is heteroscedastic and the
//! input density has valleys near ±2. *bimodal* draws `x` from an
//! exponential and flips a fair coin between the branches `10·sin(x) + z`
//! and `10·cos(x) + z + 20 − x`, giving a two-mode conditional with density
//! thinning as `x` grows. In both, `z ~ N(0,1)`.
//!
//! The CSV schema is a header `x0,…,x{n-1},y0,…,y{d-1}` followed by one row
//! per point; [`write_csv`] emits shortest round-trip formatting so a
//! load/store cycle preserves every bit.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Labeled regression data: `N×n` inputs and `N×d` targets.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
    pub name: String,
}

impl Dataset {
    pub fn new(inputs: Array2<f64>, targets: Array2<f64>, name: impl Into<String>) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(Error::DimensionMismatch {
                expected: inputs.nrows(),
                actual: targets.nrows(),
            });
        }
        if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "dataset entries must be finite".into(),
            ));
        }
        Ok(Self {
            inputs,
            targets,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.targets.ncols()
    }

    pub fn input_row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.inputs.row(i)
    }

    pub fn target_row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.targets.row(i)
    }

    /// Append labeled points (used by the acquisition loop).
    pub fn extend(&mut self, inputs: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<()> {
        if inputs.nrows() != targets.nrows()
            || inputs.ncols() != self.input_dim()
            || targets.ncols() != self.output_dim()
        {
            return Err(Error::InvalidParameter(
                "appended rows must match the dataset shape".into(),
            ));
        }
        self.inputs.append(Axis(0), inputs)?;
        self.targets.append(Axis(0), targets)?;
        Ok(())
    }

    /// New dataset holding the given rows, in order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            inputs: self.inputs.select(Axis(0), rows),
            targets: self.targets.select(Axis(0), rows),
            name: self.name.clone(),
        }
    }
}

impl From<ndarray::ShapeError> for Error {
    fn from(e: ndarray::ShapeError) -> Self {
        Error::InvalidParameter(format!("array shape error: {e}"))
    }
}

/// Which built-in generator to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticKind {
    Hetero,
    Bimodal,
}

impl SyntheticKind {
    pub fn name(&self) -> &'static str {
        match self {
            SyntheticKind::Hetero => "hetero",
            SyntheticKind::Bimodal => "bimodal",
        }
    }
}

/// Resolves the two notational ambiguities in the generator definitions.
#[derive(Clone, Copy, Debug)]
pub struct SyntheticOptions {
    /// Read the second Gaussian parameter (2/5, 9/10) as a variance;
    /// otherwise as a standard deviation.
    pub gaussian_param_is_variance: bool,
    /// Read the exponential parameter λ = 2 as a rate (mean ½);
    /// otherwise as a scale (mean 2).
    pub exponential_param_is_rate: bool,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            gaussian_param_is_variance: true,
            exponential_param_is_rate: true,
        }
    }
}

const HETERO_CENTERS: [f64; 3] = [-4.0, 0.0, 4.0];
const HETERO_SPREAD: [f64; 3] = [0.4, 0.9, 0.4];

impl SyntheticKind {
    /// Draw one input from the generator's x-marginal.
    pub fn sample_input<R: Rng + ?Sized>(&self, opts: &SyntheticOptions, rng: &mut R) -> f64 {
        match self {
            SyntheticKind::Hetero => {
                let c = rng.random_range(0..3);
                let spread = if opts.gaussian_param_is_variance {
                    HETERO_SPREAD[c].sqrt()
                } else {
                    HETERO_SPREAD[c]
                };
                let z: f64 = rng.sample(StandardNormal);
                HETERO_CENTERS[c] + spread * z
            }
            SyntheticKind::Bimodal => {
                let u: f64 = rng.random();
                let mean = if opts.exponential_param_is_rate {
                    0.5
                } else {
                    2.0
                };
                -mean * (1.0 - u).ln()
            }
        }
    }

    /// Draw one target conditioned on `x`.
    pub fn sample_target<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        match self {
            SyntheticKind::Hetero => {
                let z: f64 = rng.sample(StandardNormal);
                7.0 * x.sin() + 3.0 * z * (x / 2.0).cos().abs()
            }
            SyntheticKind::Bimodal => {
                let branch = rng.random_range(0..2);
                let z: f64 = rng.sample(StandardNormal);
                if branch == 0 {
                    10.0 * x.sin() + z
                } else {
                    10.0 * x.cos() + z + 20.0 - x
                }
            }
        }
    }

    /// Generate `n_points` labeled pairs; deterministic given the generator
    /// state.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        n_points: usize,
        opts: &SyntheticOptions,
        rng: &mut R,
    ) -> Result<Dataset> {
        if n_points == 0 {
            return Err(Error::InvalidParameter(
                "generator needs n_points >= 1".into(),
            ));
        }
        let mut xs = Vec::with_capacity(n_points);
        let mut ys = Vec::with_capacity(n_points);
        for _ in 0..n_points {
            let x = self.sample_input(opts, rng);
            let y = self.sample_target(x, rng);
            xs.push(x);
            ys.push(y);
        }
        Dataset::new(
            Array2::from_shape_vec((n_points, 1), xs)?,
            Array2::from_shape_vec((n_points, 1), ys)?,
            self.name(),
        )
    }
}

/// Generate the heteroscedastic 1D benchmark.
pub fn gen_hetero<R: Rng + ?Sized>(
    n_points: usize,
    opts: &SyntheticOptions,
    rng: &mut R,
) -> Result<Dataset> {
    SyntheticKind::Hetero.generate(n_points, opts, rng)
}

/// Generate the bimodal 1D benchmark.
pub fn gen_bimodal<R: Rng + ?Sized>(
    n_points: usize,
    opts: &SyntheticOptions,
    rng: &mut R,
) -> Result<Dataset> {
    SyntheticKind::Bimodal.generate(n_points, opts, rng)
}

fn expected_header(input_dim: usize, output_dim: usize) -> Vec<String> {
    (0..input_dim)
        .map(|i| format!("x{i}"))
        .chain((0..output_dim).map(|i| format!("y{i}")))
        .collect()
}

/// Load a dataset from CSV with header `x0..x{n-1},y0..y{d-1}`.
///
/// Non-numeric and non-finite cells are rejected with the file line and
/// column name.
pub fn load_csv(path: impl AsRef<Path>, input_dim: usize, output_dim: usize) -> Result<Dataset> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let expected = expected_header(input_dim, output_dim);
    if header != expected {
        let missing: Vec<&String> = expected.iter().filter(|c| !header.contains(c)).collect();
        let reason = if missing.is_empty() {
            format!("expected header {expected:?}, got {header:?}")
        } else {
            format!("missing column(s) {missing:?}")
        };
        return Err(Error::CsvFormat {
            path: display,
            reason,
        });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2; // header occupies line 1
        if record.len() != expected.len() {
            return Err(Error::CsvFormat {
                path: display,
                reason: format!("row at line {line} has {} fields, expected {}", record.len(), expected.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::CsvValue {
                path: display.clone(),
                row: line,
                column: expected[j].clone(),
                reason: format!("not a number: {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::CsvValue {
                    path: display.clone(),
                    row: line,
                    column: expected[j].clone(),
                    reason: format!("non-finite value: {cell:?}"),
                });
            }
            if j < input_dim {
                xs.push(value);
            } else {
                ys.push(value);
            }
        }
        rows += 1;
    }
    Dataset::new(
        Array2::from_shape_vec((rows, input_dim), xs)?,
        Array2::from_shape_vec((rows, output_dim), ys)?,
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "csv".into()),
    )
}

/// Load only the inputs (`x0..x{n-1}`) from a CSV; trailing `y*` columns,
/// if present, are ignored.
pub fn load_inputs_csv(path: impl AsRef<Path>, input_dim: usize) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let expected: Vec<String> = (0..input_dim).map(|i| format!("x{i}")).collect();
    if header.len() < input_dim || header[..input_dim] != expected[..] {
        return Err(Error::CsvFormat {
            path: display,
            reason: format!("expected leading columns {expected:?}, got {header:?}"),
        });
    }
    let mut xs = Vec::new();
    let mut rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        for j in 0..input_dim {
            let cell = record.get(j).ok_or_else(|| Error::CsvFormat {
                path: display.clone(),
                reason: format!("row at line {line} is too short"),
            })?;
            let value: f64 = cell.trim().parse().map_err(|_| Error::CsvValue {
                path: display.clone(),
                row: line,
                column: expected[j].clone(),
                reason: format!("not a number: {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::CsvValue {
                    path: display.clone(),
                    row: line,
                    column: expected[j].clone(),
                    reason: format!("non-finite value: {cell:?}"),
                });
            }
            xs.push(value);
        }
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, input_dim), xs)?)
}

/// Write a dataset in the schema [`load_csv`] reads. Values use shortest
/// round-trip formatting, so numeric content survives a load/store cycle
/// exactly.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    let header = expected_header(dataset.input_dim(), dataset.output_dim());
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..dataset.len() {
        let mut first = true;
        for v in dataset.input_row(i).iter().chain(dataset.target_row(i).iter()) {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

enum PoolOracle {
    /// Labels known up front (CSV rows), revealed on acquisition.
    Preset(Array2<f64>),
    /// Labels drawn from the generator's conditional on acquisition.
    Synthetic {
        kind: SyntheticKind,
        rng: ChaCha12Rng,
    },
}

/// A batch of unlabeled candidates with an oracle that labels them on
/// acquisition. Each candidate can be acquired once.
pub struct Pool {
    inputs: Array2<f64>,
    oracle: PoolOracle,
    acquired: Vec<bool>,
}

impl Pool {
    pub fn size(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> ArrayView2<'_, f64> {
        self.inputs.view()
    }

    pub fn input_row(&self, index: usize) -> ArrayView1<'_, f64> {
        self.inputs.row(index)
    }

    pub fn acquired_count(&self) -> usize {
        self.acquired.iter().filter(|a| **a).count()
    }

    /// Reveal the label of one candidate; a second acquisition of the same
    /// index is an error.
    pub fn acquire(&mut self, index: usize) -> Result<Vec<f64>> {
        if index >= self.size() {
            return Err(Error::InvalidParameter(format!(
                "pool index {index} out of range (size {})",
                self.size()
            )));
        }
        if self.acquired[index] {
            return Err(Error::AlreadyAcquired(index));
        }
        self.acquired[index] = true;
        match &mut self.oracle {
            PoolOracle::Preset(targets) => Ok(targets.row(index).to_vec()),
            PoolOracle::Synthetic { kind, rng } => {
                let x = self.inputs[(index, 0)];
                Ok(vec![kind.sample_target(x, rng)])
            }
        }
    }
}

/// Where pool candidates come from. A dataset source is consumed across
/// successive pools: rows are sampled without replacement until exhausted.
pub enum PoolSource {
    Synthetic {
        kind: SyntheticKind,
        opts: SyntheticOptions,
    },
    Dataset {
        data: Dataset,
        remaining: Vec<usize>,
    },
}

impl PoolSource {
    pub fn synthetic(kind: SyntheticKind, opts: SyntheticOptions) -> Self {
        PoolSource::Synthetic { kind, opts }
    }

    pub fn dataset(data: Dataset) -> Self {
        let remaining = (0..data.len()).collect();
        PoolSource::Dataset { data, remaining }
    }

    pub fn remaining(&self) -> Option<usize> {
        match self {
            PoolSource::Synthetic { .. } => None,
            PoolSource::Dataset { remaining, .. } => Some(remaining.len()),
        }
    }
}

/// Draw a fresh pool of `size` candidates.
///
/// Synthetic sources sample new inputs from the generator's x-marginal;
/// dataset sources consume rows without replacement and fail with pool
/// exhaustion when fewer than `size` rows remain.
pub fn make_pool(source: &mut PoolSource, size: usize, rng: &mut ChaCha12Rng) -> Result<Pool> {
    if size == 0 {
        return Err(Error::InvalidParameter("pool size must be >= 1".into()));
    }
    match source {
        PoolSource::Synthetic { kind, opts } => {
            let xs: Vec<f64> = (0..size).map(|_| kind.sample_input(opts, rng)).collect();
            let label_seed: u64 = rng.random();
            Ok(Pool {
                inputs: Array2::from_shape_vec((size, 1), xs)?,
                oracle: PoolOracle::Synthetic {
                    kind: *kind,
                    rng: rand::SeedableRng::seed_from_u64(label_seed),
                },
                acquired: vec![false; size],
            })
        }
        PoolSource::Dataset { data, remaining } => {
            if size > remaining.len() {
                return Err(Error::PoolExhausted {
                    requested: size,
                    available: remaining.len(),
                });
            }
            // partial Fisher-Yates over the remaining indices
            let mut chosen = Vec::with_capacity(size);
            for k in 0..size {
                let pick = rng.random_range(k..remaining.len());
                remaining.swap(k, pick);
                chosen.push(remaining[k]);
            }
            remaining.drain(..size);
            let inputs = data.inputs.select(Axis(0), &chosen);
            let targets = data.targets.select(Axis(0), &chosen);
            Ok(Pool {
                inputs,
                oracle: PoolOracle::Preset(targets),
                acquired: vec![false; size],
            })
        }
    }
}
