//! Timing harness comparing the estimators' scoring cost.
//!
//! Each grid cell fixes an output dimension and ensemble size, builds one
//! shared set of synthetic diagonal-Gaussian mixtures, and times every
//! estimator over the identical mixtures, so per-cell numbers differ only in
//! estimator cost. Runs are repeated after a warm-up pass and the median
//! total is reported.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ensemble::{
    epistemic_mc, epistemic_paide, ConditionalMixture, DistanceKind, McConfig,
};
use crate::error::{Error, Result};
use crate::gaussian::MultivariateGaussian;

/// Benchmark grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub dims: Vec<usize>,
    pub ensemble_sizes: Vec<usize>,
    /// MC sample counts; the pairwise estimators get one row each with 0 in
    /// the sample column.
    pub mc_samples: Vec<usize>,
    pub inputs_per_cell: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dims: vec![1, 3, 11, 32],
            ensemble_sizes: vec![5, 10, 20],
            mc_samples: vec![1000],
            inputs_per_cell: 200,
            repetitions: 3,
            seed: 0,
        }
    }
}

/// One timed cell of the grid.
#[derive(Clone, Debug)]
pub struct BenchRow {
    pub estimator: String,
    pub dim: usize,
    pub ensemble_size: usize,
    /// 0 for the sample-free estimators.
    pub mc_samples: usize,
    pub inputs_scored: usize,
    /// Median over repetitions of the total scoring time.
    pub total_seconds: f64,
    pub seconds_per_input: f64,
}

/// Random mixtures for one cell: means `N(0, I)`, variances `U(0.5, 2)`,
/// uniform weights. Deterministic given the seed.
pub fn synthetic_mixtures(
    dim: usize,
    ensemble_size: usize,
    count: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<ConditionalMixture>> {
    (0..count)
        .map(|_| {
            let components = (0..ensemble_size)
                .map(|_| {
                    let mean: Vec<f64> =
                        (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                    let vars: Vec<f64> =
                        (0..dim).map(|_| rng.random_range(0.5..2.0)).collect();
                    MultivariateGaussian::diagonal(mean, vars)
                })
                .collect::<Result<Vec<_>>>()?;
            ConditionalMixture::uniform(components)
        })
        .collect()
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn time_scoring<F: FnMut() -> Result<f64>>(repetitions: usize, mut pass: F) -> Result<f64> {
    // warm-up pass, untimed
    pass()?;
    let mut totals = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let started = Instant::now();
        pass()?;
        totals.push(started.elapsed().as_secs_f64());
    }
    Ok(median(totals))
}

/// Time every estimator over every grid cell.
pub fn time_estimators(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.inputs_per_cell == 0 || cfg.repetitions == 0 {
        return Err(Error::InvalidParameter(
            "inputs_per_cell and repetitions must be >= 1".into(),
        ));
    }
    if cfg
        .dims
        .iter()
        .chain(&cfg.ensemble_sizes)
        .chain(&cfg.mc_samples)
        .any(|v| *v == 0)
    {
        return Err(Error::InvalidParameter(
            "dims, ensemble sizes, and sample counts must be >= 1".into(),
        ));
    }
    let mut rows = Vec::new();
    for &dim in &cfg.dims {
        for &m in &cfg.ensemble_sizes {
            let mut rng = ChaCha12Rng::seed_from_u64(crate::seed::derive(
                cfg.seed,
                &[dim as u64, m as u64],
            ));
            let mixtures = synthetic_mixtures(dim, m, cfg.inputs_per_cell, &mut rng)?;

            for (distance, label) in [
                (DistanceKind::Kl, "paide_kl"),
                (DistanceKind::Bhattacharyya, "paide_bhatt"),
            ] {
                let total = time_scoring(cfg.repetitions, || {
                    let mut acc = 0.0;
                    for mix in &mixtures {
                        acc += epistemic_paide(mix, distance)?;
                    }
                    Ok(acc)
                })?;
                rows.push(BenchRow {
                    estimator: label.to_string(),
                    dim,
                    ensemble_size: m,
                    mc_samples: 0,
                    inputs_scored: cfg.inputs_per_cell,
                    total_seconds: total,
                    seconds_per_input: total / cfg.inputs_per_cell as f64,
                });
            }

            for &k in &cfg.mc_samples {
                let mut sample_seed = ChaCha12Rng::seed_from_u64(crate::seed::derive(
                    cfg.seed,
                    &[dim as u64, m as u64, k as u64],
                ));
                let seeds: Vec<u64> = (0..mixtures.len()).map(|_| sample_seed.random()).collect();
                let total = time_scoring(cfg.repetitions, || {
                    let mut acc = 0.0;
                    for (mix, seed) in mixtures.iter().zip(&seeds) {
                        let mc = McConfig {
                            sample_count: k,
                            seed: *seed,
                        };
                        acc += epistemic_mc(mix, &mc)?.value;
                    }
                    Ok(acc)
                })?;
                rows.push(BenchRow {
                    estimator: "mc".to_string(),
                    dim,
                    ensemble_size: m,
                    mc_samples: k,
                    inputs_scored: cfg.inputs_per_cell,
                    total_seconds: total,
                    seconds_per_input: total / cfg.inputs_per_cell as f64,
                });
            }
        }
    }
    Ok(rows)
}

/// Write rows as `bench.csv`.
pub fn write_bench_csv(rows: &[BenchRow], path: impl AsRef<std::path::Path>) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::from(
        "estimator,dim,ensemble_size,mc_samples,inputs_scored,total_seconds,seconds_per_input\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.estimator,
            r.dim,
            r.ensemble_size,
            r.mc_samples,
            r.inputs_scored,
            r.total_seconds,
            r.seconds_per_input
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}
