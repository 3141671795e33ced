//! Pool-based active learning: score a fresh candidate pool with an
//! acquisition strategy, label the top batch, retrain, evaluate, repeat.
//!
//! Strategies are Random (uniform scores), MC (sampled epistemic
//! uncertainty), and the pairwise-distance estimators (KL or Bhattacharyya).
//! All strategies at the same seed share bit-identical initial training and
//! test sets, so their learning curves are directly comparable; only the
//! scoring path differs. Wall-time is recorded around the scoring step
//! alone, which is the cost the estimators compete on.

use std::fmt::Write as _;
use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::data::{make_pool, Dataset, Pool, PoolSource, SyntheticKind, SyntheticOptions};
use crate::ensemble::{
    epistemic_mc, epistemic_paide, mixture_log_density, ConditionalMixture, DistanceKind,
    McConfig,
};
use crate::error::{Error, Result};
use crate::pne::{PneConfig, PneEnsemble};
use crate::seed;

// seed streams per (run seed, purpose)
const STREAM_DATA: u64 = 100;
const STREAM_POOL: u64 = 101;
const STREAM_SCORE: u64 = 102;
const STREAM_PNE: u64 = 103;
const STREAM_SCRATCH: u64 = 104;

/// Anything that maps an input to a predictive mixture.
pub trait Predictor {
    fn predict_mixture(&self, x: &[f64]) -> Result<ConditionalMixture>;

    /// Batched variant; the default just loops.
    fn predict_mixtures(&self, xs: ArrayView2<f64>) -> Result<Vec<ConditionalMixture>> {
        xs.rows()
            .into_iter()
            .map(|row| self.predict_mixture(row.as_slice().unwrap_or(&row.to_vec())))
            .collect()
    }
}

impl Predictor for PneEnsemble {
    fn predict_mixture(&self, x: &[f64]) -> Result<ConditionalMixture> {
        PneEnsemble::predict_mixture(self, x)
    }

    fn predict_mixtures(&self, xs: ArrayView2<f64>) -> Result<Vec<ConditionalMixture>> {
        PneEnsemble::predict_mixtures(self, xs)
    }
}

/// How pool candidates are ranked.
#[derive(Clone, Debug)]
pub enum AcquisitionStrategy {
    /// Uniform scores from the run RNG; never consults the model.
    Random,
    /// Sampled epistemic uncertainty. `sample_count` is taken from the
    /// config; inside the acquisition loop each candidate gets a fresh seed
    /// drawn from the run's scoring stream.
    Mc(McConfig),
    /// Sample-free pairwise-distance scores.
    Paide(DistanceKind),
}

impl AcquisitionStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            AcquisitionStrategy::Random => "random",
            AcquisitionStrategy::Mc(_) => "mc",
            AcquisitionStrategy::Paide(d) => d.name(),
        }
    }

    /// Parse a strategy name as used in configs and the results CSV.
    pub fn from_name(name: &str, mc_samples: usize) -> Result<Self> {
        match name {
            "random" => Ok(AcquisitionStrategy::Random),
            "mc" => Ok(AcquisitionStrategy::Mc(McConfig {
                sample_count: mc_samples,
                seed: 0,
            })),
            "kl" => Ok(AcquisitionStrategy::Paide(DistanceKind::Kl)),
            "bhatt" => Ok(AcquisitionStrategy::Paide(DistanceKind::Bhattacharyya)),
            other => Err(Error::InvalidParameter(format!(
                "unknown strategy {other:?} (expected random, mc, kl, bhatt)"
            ))),
        }
    }
}

/// Active-learning protocol settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActiveConfig {
    pub init_train_size: usize,
    pub batch_size: usize,
    pub num_batches: usize,
    /// Fresh-pool size per batch for the sample-free strategies and Random.
    pub pool_size: usize,
    /// Smaller fresh-pool size給 the MC strategy.
    pub mc_pool_size: usize,
    /// Sample count per candidate for MC scoring.
    pub mc_samples: usize,
    /// Held-out test-set size for synthetic tasks.
    pub test_size: usize,
    /// Warm-start epochs after each acquisition batch.
    pub epochs_per_batch: usize,
    /// Re-initialize and train from scratch after each batch instead.
    pub retrain_from_scratch: bool,
    /// Average squared error over output dimensions before the point mean.
    pub rmse_dimension_averaged: bool,
    pub seeds: Vec<u64>,
    pub pne: PneConfig,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        Self {
            init_train_size: 100,
            batch_size: 10,
            num_batches: 100,
            pool_size: 10_000,
            mc_pool_size: 1_000,
            mc_samples: 1000,
            test_size: 2000,
            epochs_per_batch: 200,
            retrain_from_scratch: false,
            rmse_dimension_averaged: true,
            seeds: vec![0],
            pne: PneConfig::default(),
        }
    }
}

impl ActiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        if self.batch_size > self.pool_size || self.batch_size > self.mc_pool_size {
            return Err(Error::InvalidParameter(
                "batch_size must not exceed the pool sizes".into(),
            ));
        }
        if self.init_train_size == 0 || self.test_size == 0 {
            return Err(Error::InvalidParameter(
                "init_train_size and test_size must be >= 1".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("seeds must be non-empty".into()));
        }
        Ok(())
    }
}

/// Where the task's data comes from.
#[derive(Clone)]
pub enum DataSpec {
    Synthetic {
        kind: SyntheticKind,
        opts: SyntheticOptions,
    },
    /// A fixed table: rows are split per seed into initial train, test (when
    /// no separate test set is supplied), and the acquisition pool reservoir.
    Tabular {
        data: Dataset,
        test: Option<Dataset>,
    },
}

impl DataSpec {
    pub fn input_dim(&self) -> usize {
        match self {
            DataSpec::Synthetic { .. } => 1,
            DataSpec::Tabular { data, .. } => data.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            DataSpec::Synthetic { .. } => 1,
            DataSpec::Tabular { data, .. } => data.output_dim(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            DataSpec::Synthetic { kind, .. } => kind.name().to_string(),
            DataSpec::Tabular { data, .. } => data.name.clone(),
        }
    }
}

/// One evaluated point of a run.
#[derive(Clone, Debug)]
pub struct HistoryRow {
    pub seed: u64,
    pub strategy: String,
    /// 0 is the evaluation after initial training; acquisition batches are
    /// numbered contiguously from 1.
    pub batch: usize,
    pub rmse: f64,
    pub log_likelihood: f64,
    /// Wall time of the scoring step only; 0 for the initial row.
    pub score_seconds: f64,
    /// Pool indices acquired in this batch.
    pub acquired: Vec<usize>,
}

/// Everything recorded for one (seed, strategy) run.
#[derive(Clone, Debug)]
pub struct RunHistory {
    pub seed: u64,
    pub strategy: String,
    pub rows: Vec<HistoryRow>,
    /// Set when training diverged; the rows up to the failure are kept.
    pub failed: Option<String>,
}

/// Score every pool candidate under the strategy.
///
/// Random consumes only the RNG; MC and the pairwise estimators run the
/// model over the pool (batched). Pairwise scores are nonnegative by
/// construction; MC scores can dip a few standard errors below zero.
pub fn score_pool<P: Predictor>(
    strategy: &AcquisitionStrategy,
    predictor: &P,
    pool: &Pool,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<f64>> {
    match strategy {
        AcquisitionStrategy::Random => Ok((0..pool.size()).map(|_| rng.random()).collect()),
        AcquisitionStrategy::Mc(cfg) => {
            let mixtures = predictor.predict_mixtures(pool.inputs())?;
            mixtures
                .iter()
                .map(|mix| {
                    let per_candidate = McConfig {
                        sample_count: cfg.sample_count,
                        seed: rng.random(),
                    };
                    Ok(epistemic_mc(mix, &per_candidate)?.value)
                })
                .collect()
        }
        AcquisitionStrategy::Paide(distance) => {
            let mixtures = predictor.predict_mixtures(pool.inputs())?;
            mixtures
                .iter()
                .map(|mix| epistemic_paide(mix, *distance))
                .collect()
        }
    }
}

/// Indices of the `batch_size` largest scores, ties broken by ascending
/// pool index.
pub fn select_batch(scores: &[f64], batch_size: usize) -> Result<Vec<usize>> {
    if batch_size > scores.len() {
        return Err(Error::InvalidParameter(format!(
            "batch size {batch_size} exceeds pool size {}",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| a.cmp(&b))
    });
    order.truncate(batch_size);
    Ok(order)
}

/// Test RMSE of the mixture-mean point prediction.
///
/// With `dimension_averaged` (the default) the squared error is averaged
/// over output dimensions before the point mean and root, keeping
/// magnitudes comparable across output sizes; otherwise dimensions are
/// summed.
pub fn rmse<P: Predictor>(
    predictor: &P,
    test: &Dataset,
    dimension_averaged: bool,
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::InvalidParameter("empty test set".into()));
    }
    let mixtures = predictor.predict_mixtures(test.inputs.view())?;
    let d = test.output_dim() as f64;
    let mut acc = 0.0;
    for (i, mix) in mixtures.iter().enumerate() {
        let pred = mix.mean();
        let mut sq = 0.0;
        for (p, y) in pred.iter().zip(test.target_row(i)) {
            sq += (p - y) * (p - y);
        }
        acc += if dimension_averaged { sq / d } else { sq };
    }
    Ok((acc / test.len() as f64).sqrt())
}

/// Mean mixture log-density over the test set (log-sum-exp form, so single
/// components rounding to zero cannot zero out the whole likelihood).
pub fn log_likelihood<P: Predictor>(predictor: &P, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::InvalidParameter("empty test set".into()));
    }
    let mixtures = predictor.predict_mixtures(test.inputs.view())?;
    let mut acc = 0.0;
    for (i, mix) in mixtures.iter().enumerate() {
        acc += mixture_log_density(mix, test.target_row(i).as_slice().unwrap())?;
    }
    Ok(acc / test.len() as f64)
}

struct RunData {
    train: Dataset,
    test: Dataset,
    pool_source: PoolSource,
}

/// Split or generate the per-seed datasets. Independent of the strategy, so
/// curves at equal seeds are comparable.
fn prepare_data(cfg: &ActiveConfig, spec: &DataSpec, run_seed: u64) -> Result<RunData> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed::derive(run_seed, &[STREAM_DATA]));
    match spec {
        DataSpec::Synthetic { kind, opts } => {
            let train = kind.generate(cfg.init_train_size, opts, &mut rng)?;
            let test = kind.generate(cfg.test_size, opts, &mut rng)?;
            Ok(RunData {
                train,
                test,
                pool_source: PoolSource::synthetic(*kind, *opts),
            })
        }
        DataSpec::Tabular { data, test } => {
            let mut order: Vec<usize> = (0..data.len()).collect();
            for i in (1..order.len()).rev() {
                let j = rng.random_range(0..=i);
                order.swap(i, j);
            }
            let need = cfg.init_train_size + if test.is_none() { cfg.test_size } else { 0 };
            if order.len() < need {
                return Err(Error::InvalidParameter(format!(
                    "dataset has {} rows, init+test need {need}",
                    order.len()
                )));
            }
            let train = data.subset(&order[..cfg.init_train_size]);
            let (test, rest_from) = match test {
                Some(t) => (t.clone(), cfg.init_train_size),
                None => (
                    data.subset(&order[cfg.init_train_size..need]),
                    need,
                ),
            };
            let reservoir = data.subset(&order[rest_from..]);
            Ok(RunData {
                train,
                test,
                pool_source: PoolSource::dataset(reservoir),
            })
        }
    }
}

/// Run the full protocol for one (seed, strategy) pair.
///
/// Training divergence marks the run failed and keeps the rows recorded so
/// far; every completed batch contributes exactly one row.
pub fn run_active_learning(
    cfg: &ActiveConfig,
    strategy: &AcquisitionStrategy,
    spec: &DataSpec,
    run_seed: u64,
) -> Result<RunHistory> {
    cfg.validate()?;
    let mut history = RunHistory {
        seed: run_seed,
        strategy: strategy.name().to_string(),
        rows: Vec::with_capacity(cfg.num_batches + 1),
        failed: None,
    };
    let mut data = prepare_data(cfg, spec, run_seed)?;

    let mut pne_cfg = cfg.pne.clone();
    pne_cfg.input_dim = spec.input_dim();
    pne_cfg.output_dim = spec.output_dim();
    pne_cfg.seed = seed::derive(run_seed, &[STREAM_PNE]);
    let mut ensemble = PneEnsemble::init(pne_cfg.clone())?;

    match ensemble.train(&data.train, cfg.pne.epochs) {
        Ok(_) => {}
        Err(Error::TrainingDiverged { member, epoch }) => {
            history.failed = Some(format!(
                "initial training diverged (member {member}, epoch {epoch})"
            ));
            return Ok(history);
        }
        Err(e) => return Err(e),
    }
    history.rows.push(HistoryRow {
        seed: run_seed,
        strategy: strategy.name().to_string(),
        batch: 0,
        rmse: rmse(&ensemble, &data.test, cfg.rmse_dimension_averaged)?,
        log_likelihood: log_likelihood(&ensemble, &data.test)?,
        score_seconds: 0.0,
        acquired: Vec::new(),
    });

    let mut pool_rng = ChaCha12Rng::seed_from_u64(seed::derive(run_seed, &[STREAM_POOL]));
    let mut score_rng = ChaCha12Rng::seed_from_u64(seed::derive(run_seed, &[STREAM_SCORE]));

    for batch in 1..=cfg.num_batches {
        let pool_size = match strategy {
            AcquisitionStrategy::Mc(_) => cfg.mc_pool_size,
            _ => cfg.pool_size,
        };
        let mut pool = make_pool(&mut data.pool_source, pool_size, &mut pool_rng)?;

        let started = Instant::now();
        let scores = score_pool(strategy, &ensemble, &pool, &mut score_rng)?;
        let score_seconds = started.elapsed().as_secs_f64();

        let selected = select_batch(&scores, cfg.batch_size)?;
        let dim = pool.input_dim();
        let out_dim = spec.output_dim();
        let mut new_x = Array2::zeros((selected.len(), dim));
        let mut new_y = Array2::zeros((selected.len(), out_dim));
        for (r, &idx) in selected.iter().enumerate() {
            let y = pool.acquire(idx)?;
            new_x.row_mut(r).assign(&pool.input_row(idx));
            for (c, v) in y.iter().enumerate() {
                new_y[(r, c)] = *v;
            }
        }
        data.train.extend(new_x.view(), new_y.view())?;

        let train_result = if cfg.retrain_from_scratch {
            let mut fresh_cfg = pne_cfg.clone();
            fresh_cfg.seed = seed::derive(run_seed, &[STREAM_SCRATCH, batch as u64]);
            match PneEnsemble::init(fresh_cfg) {
                Ok(fresh) => {
                    ensemble = fresh;
                    ensemble.train(&data.train, cfg.pne.epochs)
                }
                Err(e) => Err(e),
            }
        } else {
            ensemble.train(&data.train, cfg.epochs_per_batch)
        };
        match train_result {
            Ok(_) => {}
            Err(Error::TrainingDiverged { member, epoch }) => {
                history.failed = Some(format!(
                    "training diverged at batch {batch} (member {member}, epoch {epoch})"
                ));
                return Ok(history);
            }
            Err(e) => return Err(e),
        }

        history.rows.push(HistoryRow {
            seed: run_seed,
            strategy: strategy.name().to_string(),
            batch,
            rmse: rmse(&ensemble, &data.test, cfg.rmse_dimension_averaged)?,
            log_likelihood: log_likelihood(&ensemble, &data.test)?,
            score_seconds,
            acquired: selected,
        });
    }
    Ok(history)
}

/// All (seed, strategy) runs, optionally fanned out over a thread pool.
/// Output order is by strategy, then seed, regardless of `jobs`.
pub fn run_many(
    cfg: &ActiveConfig,
    strategies: &[AcquisitionStrategy],
    spec: &DataSpec,
    jobs: usize,
) -> Result<Vec<RunHistory>> {
    cfg.validate()?;
    let pairs: Vec<(&AcquisitionStrategy, u64)> = strategies
        .iter()
        .flat_map(|s| cfg.seeds.iter().map(move |seed| (s, *seed)))
        .collect();
    if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            pairs
                .par_iter()
                .map(|(s, seed)| run_active_learning(cfg, s, spec, *seed))
                .collect()
        })
    } else {
        pairs
            .iter()
            .map(|(s, seed)| run_active_learning(cfg, s, spec, *seed))
            .collect()
    }
}

/// One row of the results CSV (`seed,strategy,batch,rmse,loglik,score_seconds`).
#[derive(Clone, Debug)]
pub struct ResultsRow {
    pub seed: u64,
    pub strategy: String,
    pub batch: usize,
    pub rmse: f64,
    pub loglik: f64,
    pub score_seconds: f64,
}

/// Write run histories as the results CSV.
pub fn write_results_csv(runs: &[RunHistory], path: impl AsRef<std::path::Path>) -> Result<()> {
    let mut out = String::from("seed,strategy,batch,rmse,loglik,score_seconds\n");
    for run in runs {
        for row in &run.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                row.seed, row.strategy, row.batch, row.rmse, row.log_likelihood, row.score_seconds
            );
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read a results CSV produced by [`write_results_csv`].
pub fn read_results_csv(path: impl AsRef<std::path::Path>) -> Result<Vec<ResultsRow>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)?;
    let expected = ["seed", "strategy", "batch", "rmse", "loglik", "score_seconds"];
    let header: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
    if header != expected {
        return Err(Error::CsvFormat {
            path: display,
            reason: format!("expected header {expected:?}, got {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let parse = |j: usize| -> Result<f64> {
            record[j].parse().map_err(|_| Error::CsvValue {
                path: display.clone(),
                row: line,
                column: expected[j].to_string(),
                reason: format!("not a number: {:?}", &record[j]),
            })
        };
        rows.push(ResultsRow {
            seed: record[0].parse().map_err(|_| Error::CsvValue {
                path: display.clone(),
                row: line,
                column: "seed".into(),
                reason: format!("not an integer: {:?}", &record[0]),
            })?,
            strategy: record[1].to_string(),
            batch: record[2].parse().map_err(|_| Error::CsvValue {
                path: display.clone(),
                row: line,
                column: "batch".into(),
                reason: format!("not an integer: {:?}", &record[2]),
            })?,
            rmse: parse(3)?,
            loglik: parse(4)?,
            score_seconds: parse(5)?,
        });
    }
    Ok(rows)
}
