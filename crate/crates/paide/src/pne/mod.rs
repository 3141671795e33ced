//! Probabilistic network ensembles: M independent MLPs with diagonal
//! Gaussian heads, trained by negative log-likelihood on bootstrap
//! resamples of the training set.
//!
//! Each member maps a standardized input to `(μ, log σ²)`; the log-variance
//! is clamped to a configured interval before exponentiation. Diversity
//! comes from independent He-uniform initialization and per-member
//! bootstraps, optionally reinforced by fixed dropout masks sampled once at
//! initialization. Everything is deterministic given the config seed: each
//! member owns derived RNG streams for init, masks, bootstrap, and batch
//! shuffling.

mod mlp;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::ensemble::ConditionalMixture;
use crate::error::{Error, Result};
use crate::gaussian::MultivariateGaussian;
use crate::seed;

use mlp::{Adam, Gradients, Mlp};

const LN_2PI: f64 = 1.8378770664093453;

// stream tags for seed derivation
const STREAM_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;

/// Ensemble architecture and optimizer settings.
///
/// `epochs` is the training length used by [`PneEnsemble::train`] callers
/// that don't override it; the Adam defaults are lr 1e-3, β₁ 0.9, β₂ 0.999,
/// ε 1e-8.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PneConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub member_count: usize,
    /// Probability of permanently dropping a hidden unit per member; 0
    /// disables the fixed masks.
    pub dropout_rate: f64,
    /// Clamp applied to the raw log-variance head output.
    pub log_var_clamp: (f64, f64),
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for PneConfig {
    fn default() -> Self {
        Self {
            input_dim: 1,
            output_dim: 1,
            hidden_layers: vec![50, 50, 50],
            member_count: 5,
            dropout_rate: 0.0,
            log_var_clamp: (-10.0, 10.0),
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 500,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl PneConfig {
    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidParameter(
                "input_dim and output_dim must be >= 1".into(),
            ));
        }
        if self.member_count == 0 {
            return Err(Error::InvalidParameter("member_count must be >= 1".into()));
        }
        if self.hidden_layers.iter().any(|w| *w == 0) {
            return Err(Error::InvalidParameter(
                "hidden layer widths must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidParameter(
                "dropout_rate must lie in [0, 1)".into(),
            ));
        }
        if self.log_var_clamp.0 >= self.log_var_clamp.1 {
            return Err(Error::InvalidParameter(
                "log_var_clamp must satisfy lo < hi".into(),
            ));
        }
        if self.learning_rate <= 0.0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "learning_rate must be positive and batch_size >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Layer widths including input and the `2d`-wide Gaussian head.
    fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_layers.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_layers);
        dims.push(2 * self.output_dim);
        dims
    }
}

/// One ensemble member: an MLP plus its optional fixed masks.
pub struct PneMember {
    mlp: Mlp,
    masks: Option<Vec<Array1<f64>>>,
    output_dim: usize,
    log_var_clamp: (f64, f64),
}

impl PneMember {
    fn new(config: &PneConfig, rng: &mut ChaCha12Rng) -> Self {
        let mlp = Mlp::he_uniform(&config.dims(), rng);
        let masks = if config.dropout_rate > 0.0 {
            Some(
                config
                    .hidden_layers
                    .iter()
                    .map(|&w| {
                        Array1::from_shape_fn(w, |_| {
                            if rng.random::<f64>() < config.dropout_rate {
                                0.0
                            } else {
                                1.0
                            }
                        })
                    })
                    .collect(),
            )
        } else {
            None
        };
        Self {
            mlp,
            masks,
            output_dim: config.output_dim,
            log_var_clamp: config.log_var_clamp,
        }
    }

    /// Predictive Gaussian for one standardized input.
    ///
    /// The variance is `exp(clamp(log σ²))`, so it always lies inside
    /// `[e^lo, e^hi]`. Non-finite network output is reported as an error
    /// rather than propagated into downstream math.
    pub fn forward(&self, x_standardized: &[f64]) -> Result<MultivariateGaussian> {
        let x = ArrayView2::from_shape((1, x_standardized.len()), x_standardized)
            .map_err(|e| Error::InvalidParameter(format!("bad input shape: {e}")))?;
        let out = self.mlp.forward(x, self.masks.as_deref());
        self.row_to_gaussian(out.row(0))
    }

    fn row_to_gaussian(&self, row: ndarray::ArrayView1<f64>) -> Result<MultivariateGaussian> {
        let d = self.output_dim;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite network output (training may have diverged)".into(),
            ));
        }
        let mean = row.iter().take(d).copied().collect();
        let (lo, hi) = self.log_var_clamp;
        let variances = row.iter().skip(d).map(|lv| lv.clamp(lo, hi).exp()).collect();
        MultivariateGaussian::diagonal(mean, variances)
    }

    /// Mean NLL of the batch and its gradient, flattened in the
    /// [`parameter_vector`](Self::parameter_vector) layout.
    ///
    /// The clamp contributes zero gradient where it saturates.
    pub fn nll_and_gradients(
        &self,
        inputs: ArrayView2<f64>,
        targets: ArrayView2<f64>,
    ) -> Result<(f64, Vec<f64>)> {
        let (loss, grads) = self.nll_and_gradients_internal(inputs, targets)?;
        Ok((loss, grads.flat()))
    }

    fn nll_and_gradients_internal(
        &self,
        inputs: ArrayView2<f64>,
        targets: ArrayView2<f64>,
    ) -> Result<(f64, Gradients)> {
        let batch = inputs.nrows();
        if batch == 0 {
            return Err(Error::InvalidParameter("empty batch".into()));
        }
        if targets.nrows() != batch || targets.ncols() != self.output_dim {
            return Err(Error::DimensionMismatch {
                expected: batch * self.output_dim,
                actual: targets.len(),
            });
        }
        let d = self.output_dim;
        let (lo, hi) = self.log_var_clamp;
        let cache = self.mlp.forward_cached(inputs, self.masks.as_deref());
        let out = &cache.output;

        let mut loss = 0.0;
        let mut delta = Array2::zeros((batch, 2 * d));
        let inv_b = 1.0 / batch as f64;
        for b in 0..batch {
            for k in 0..d {
                let mu = out[(b, k)];
                let lv_raw = out[(b, d + k)];
                let lv = lv_raw.clamp(lo, hi);
                let var = lv.exp();
                let resid = targets[(b, k)] - mu;
                loss += 0.5 * (LN_2PI + lv + resid * resid / var);
                delta[(b, k)] = (mu - targets[(b, k)]) / var * inv_b;
                if lv_raw > lo && lv_raw < hi {
                    delta[(b, d + k)] = 0.5 * (1.0 - resid * resid / var) * inv_b;
                }
            }
        }
        loss *= inv_b;
        if !loss.is_finite() {
            return Err(Error::InvalidParameter("non-finite loss".into()));
        }
        Ok((loss, self.mlp.backward(&cache, delta, self.masks.as_deref())))
    }

    /// All parameters, layer by layer: row-major weights, then bias.
    pub fn parameter_vector(&self) -> Vec<f64> {
        self.mlp.flat_params()
    }

    pub fn set_parameter_vector(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.mlp.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.mlp.param_count(),
                actual: values.len(),
            });
        }
        self.mlp.set_flat_params(values);
        Ok(())
    }

    pub fn dropout_masks(&self) -> Option<&[Array1<f64>]> {
        self.masks.as_deref()
    }
}

/// Per-epoch mean training loss, one trace per member.
pub struct TrainTrace {
    pub per_member: Vec<Vec<f64>>,
}

impl TrainTrace {
    pub fn mean_per_epoch(&self) -> Vec<f64> {
        if self.per_member.is_empty() {
            return Vec::new();
        }
        let epochs = self.per_member[0].len();
        (0..epochs)
            .map(|e| {
                self.per_member.iter().map(|t| t[e]).sum::<f64>() / self.per_member.len() as f64
            })
            .collect()
    }
}

/// The ensemble: members plus shared input standardization statistics.
pub struct PneEnsemble {
    config: PneConfig,
    members: Vec<PneMember>,
    norm_mean: Array1<f64>,
    norm_std: Array1<f64>,
    train_calls: u64,
}

impl PneEnsemble {
    /// Fresh ensemble with He-uniform members on independent seed streams;
    /// standardization starts as the identity.
    pub fn init(config: PneConfig) -> Result<Self> {
        config.validate()?;
        let members = (0..config.member_count)
            .map(|i| {
                let mut rng = ChaCha12Rng::seed_from_u64(seed::derive(
                    config.seed,
                    &[STREAM_INIT, i as u64],
                ));
                PneMember::new(&config, &mut rng)
            })
            .collect();
        let n = config.input_dim;
        Ok(Self {
            config,
            members,
            norm_mean: Array1::zeros(n),
            norm_std: Array1::ones(n),
            train_calls: 0,
        })
    }

    pub fn config(&self) -> &PneConfig {
        &self.config
    }

    pub fn members(&self) -> &[PneMember] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [PneMember] {
        &mut self.members
    }

    /// Input standardization statistics `(mean, std)`.
    pub fn standardization(&self) -> (&[f64], &[f64]) {
        (
            self.norm_mean.as_slice().unwrap(),
            self.norm_std.as_slice().unwrap(),
        )
    }

    fn standardize(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (&x - &self.norm_mean) / &self.norm_std
    }

    /// Train every member on its own bootstrap resample for `epochs` epochs
    /// of shuffled mini-batches.
    ///
    /// Standardization statistics are recomputed from the full dataset and
    /// shared across members. Successive calls warm-start from the current
    /// parameters with fresh bootstraps and a fresh optimizer; divergence
    /// (non-finite loss) aborts with the member and epoch.
    pub fn train(&mut self, data: &crate::data::Dataset, epochs: usize) -> Result<TrainTrace> {
        if data.is_empty() {
            return Err(Error::InvalidParameter("empty training set".into()));
        }
        if data.input_dim() != self.config.input_dim
            || data.output_dim() != self.config.output_dim
        {
            return Err(Error::InvalidParameter(format!(
                "dataset dims ({}, {}) do not match the config ({}, {})",
                data.input_dim(),
                data.output_dim(),
                self.config.input_dim,
                self.config.output_dim
            )));
        }
        let n = data.len();
        self.norm_mean = data.inputs.mean_axis(Axis(0)).unwrap();
        self.norm_std = data
            .inputs
            .std_axis(Axis(0), 0.0)
            .mapv(|s| if s > 1e-12 { s } else { 1.0 });
        let standardized = self.standardize(data.inputs.view());

        let mut traces = Vec::with_capacity(self.members.len());
        for (idx, member) in self.members.iter_mut().enumerate() {
            let mut rng = ChaCha12Rng::seed_from_u64(seed::derive(
                self.config.seed,
                &[STREAM_TRAIN, idx as u64, self.train_calls],
            ));
            let boot: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let bx = standardized.select(Axis(0), &boot);
            let by = data.targets.select(Axis(0), &boot);
            let trace = train_member(
                member,
                idx,
                &bx,
                &by,
                epochs,
                &self.config,
                &mut rng,
            )?;
            traces.push(trace);
        }
        self.train_calls += 1;
        Ok(TrainTrace {
            per_member: traces,
        })
    }

    /// Uniform mixture of the members' predictive Gaussians for a raw input.
    pub fn predict_mixture(&self, x: &[f64]) -> Result<ConditionalMixture> {
        if x.len() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                actual: x.len(),
            });
        }
        let xs: Vec<f64> = x
            .iter()
            .zip(self.norm_mean.iter().zip(self.norm_std.iter()))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        let components = self
            .members
            .iter()
            .map(|member| member.forward(&xs))
            .collect::<Result<Vec<_>>>()?;
        ConditionalMixture::uniform(components)
    }

    /// Batched prediction: each member runs one forward pass over all rows.
    pub fn predict_mixtures(&self, xs: ArrayView2<f64>) -> Result<Vec<ConditionalMixture>> {
        if xs.ncols() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                actual: xs.ncols(),
            });
        }
        let standardized = self.standardize(xs);
        let outputs: Vec<Array2<f64>> = self
            .members
            .iter()
            .map(|m| m.mlp.forward(standardized.view(), m.masks.as_deref()))
            .collect();
        (0..xs.nrows())
            .map(|row| {
                let components = self
                    .members
                    .iter()
                    .zip(&outputs)
                    .map(|(member, out)| member.row_to_gaussian(out.row(row)))
                    .collect::<Result<Vec<_>>>()?;
                ConditionalMixture::uniform(components)
            })
            .collect()
    }

    /// Serialize config, standardization, and parameters to JSON.
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let file = CheckpointFile {
            config: self.config.clone(),
            norm_mean: self.norm_mean.to_vec(),
            norm_std: self.norm_std.to_vec(),
            train_calls: self.train_calls,
            members: self
                .members
                .iter()
                .map(|m| MemberParams {
                    weights: m
                        .mlp
                        .weights
                        .iter()
                        .map(|w| MatrixData {
                            rows: w.nrows(),
                            cols: w.ncols(),
                            data: w.iter().copied().collect(),
                        })
                        .collect(),
                    biases: m.mlp.biases.iter().map(|b| b.to_vec()).collect(),
                    masks: m
                        .masks
                        .as_ref()
                        .map(|ms| ms.iter().map(|m| m.to_vec()).collect()),
                })
                .collect(),
        };
        let writer = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(writer, &file)?;
        Ok(())
    }

    /// Restore an ensemble saved by [`save`](Self::save).
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let reader = std::io::BufReader::new(std::fs::File::open(path)?);
        let file: CheckpointFile = serde_json::from_reader(reader)?;
        let mut ensemble = Self::init(file.config)?;
        if file.members.len() != ensemble.members.len() {
            return Err(Error::InvalidParameter(format!(
                "checkpoint holds {} members, config says {}",
                file.members.len(),
                ensemble.members.len()
            )));
        }
        for (member, params) in ensemble.members.iter_mut().zip(file.members) {
            if params.weights.len() != member.mlp.layer_count() {
                return Err(Error::InvalidParameter(
                    "checkpoint layer count mismatch".into(),
                ));
            }
            for (l, w) in params.weights.iter().enumerate() {
                let expected = member.mlp.weights[l].raw_dim();
                if (w.rows, w.cols) != (expected[0], expected[1])
                    || w.data.len() != w.rows * w.cols
                {
                    return Err(Error::InvalidParameter(format!(
                        "checkpoint weight shape mismatch in layer {l}"
                    )));
                }
                member.mlp.weights[l] =
                    Array2::from_shape_vec((w.rows, w.cols), w.data.clone())?;
            }
            for (l, b) in params.biases.iter().enumerate() {
                if b.len() != member.mlp.biases[l].len() {
                    return Err(Error::InvalidParameter(format!(
                        "checkpoint bias shape mismatch in layer {l}"
                    )));
                }
                member.mlp.biases[l] = Array1::from_vec(b.clone());
            }
            member.masks = params.masks.map(|ms| {
                ms.into_iter().map(Array1::from_vec).collect()
            });
        }
        ensemble.norm_mean = Array1::from_vec(file.norm_mean);
        ensemble.norm_std = Array1::from_vec(file.norm_std);
        if ensemble.norm_mean.len() != ensemble.config.input_dim
            || ensemble.norm_std.len() != ensemble.config.input_dim
            || ensemble.norm_std.iter().any(|s| *s <= 0.0)
        {
            return Err(Error::InvalidParameter(
                "checkpoint standardization is invalid".into(),
            ));
        }
        ensemble.train_calls = file.train_calls;
        Ok(ensemble)
    }
}

fn train_member(
    member: &mut PneMember,
    member_index: usize,
    inputs: &Array2<f64>,
    targets: &Array2<f64>,
    epochs: usize,
    config: &PneConfig,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<f64>> {
    let n = inputs.nrows();
    let mut adam = Adam::new(
        &member.mlp,
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.epsilon,
    );
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        // Fisher-Yates shuffle
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let bx = inputs.select(Axis(0), chunk);
            let by = targets.select(Axis(0), chunk);
            let (loss, grads) = member
                .nll_and_gradients_internal(bx.view(), by.view())
                .map_err(|_| Error::TrainingDiverged {
                    member: member_index,
                    epoch,
                })?;
            adam.step(&mut member.mlp, &grads);
            epoch_loss += loss * chunk.len() as f64;
        }
        trace.push(epoch_loss / n as f64);
    }
    Ok(trace)
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    config: PneConfig,
    norm_mean: Vec<f64>,
    norm_std: Vec<f64>,
    train_calls: u64,
    members: Vec<MemberParams>,
}

#[derive(Serialize, Deserialize)]
struct MemberParams {
    weights: Vec<MatrixData>,
    biases: Vec<Vec<f64>>,
    masks: Option<Vec<Vec<f64>>>,
}

/// Row-major dense matrix payload.
#[derive(Serialize, Deserialize)]
struct MatrixData {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_hetero, Dataset, SyntheticOptions};
    use approx::assert_relative_eq;

    fn small_config() -> PneConfig {
        PneConfig {
            input_dim: 2,
            output_dim: 2,
            hidden_layers: vec![4, 5],
            member_count: 3,
            seed: 42,
            ..PneConfig::default()
        }
    }

    #[test]
    fn init_is_seed_deterministic_and_members_differ() {
        let a = PneEnsemble::init(small_config()).unwrap();
        let b = PneEnsemble::init(small_config()).unwrap();
        for (ma, mb) in a.members().iter().zip(b.members()) {
            assert_eq!(ma.parameter_vector(), mb.parameter_vector());
        }
        assert_ne!(
            a.members()[0].parameter_vector(),
            a.members()[1].parameter_vector()
        );
    }

    #[test]
    fn default_member_count_and_uniform_weights() {
        let cfg = PneConfig {
            input_dim: 1,
            output_dim: 1,
            ..PneConfig::default()
        };
        assert_eq!(cfg.member_count, 5);
        let ens = PneEnsemble::init(cfg).unwrap();
        let mix = ens.predict_mixture(&[0.3]).unwrap();
        assert_eq!(mix.len(), 5);
        for w in mix.weights() {
            assert_relative_eq!(*w, 0.2, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_parameters_give_standard_head() {
        let mut ens = PneEnsemble::init(small_config()).unwrap();
        let member = &mut ens.members_mut()[0];
        let zeros = vec![0.0; member.parameter_vector().len()];
        member.set_parameter_vector(&zeros).unwrap();
        let g = member.forward(&[0.7, -0.3]).unwrap();
        assert_eq!(g.mean(), &[0.0, 0.0]);
        assert_eq!(g.diagonal_variances().unwrap(), &[1.0, 1.0]);
    }

    #[test]
    fn clamp_bounds_the_variance() {
        let mut ens = PneEnsemble::init(small_config()).unwrap();
        let member = &mut ens.members_mut()[0];
        let mut params = vec![0.0; member.parameter_vector().len()];
        // final layer biases are the last 2d entries; log-variance biases are
        // the last d of those
        let len = params.len();
        params[len - 2] = 50.0;
        params[len - 1] = -50.0;
        member.set_parameter_vector(&params).unwrap();
        let g = member.forward(&[0.0, 0.0]).unwrap();
        let vars = g.diagonal_variances().unwrap();
        assert_relative_eq!(vars[0], 10f64.exp(), epsilon = 1e-9);
        assert_relative_eq!(vars[1], (-10f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn nll_at_perfect_mean_and_unit_variance() {
        let mut ens = PneEnsemble::init(small_config()).unwrap();
        let member = &mut ens.members_mut()[0];
        let zeros = vec![0.0; member.parameter_vector().len()];
        member.set_parameter_vector(&zeros).unwrap();
        // μ = 0 = y and σ² = 1 per dim: loss = d·½·ln 2π
        let x = Array2::zeros((4, 2));
        let y = Array2::zeros((4, 2));
        let (loss, _) = member.nll_and_gradients(x.view(), y.view()).unwrap();
        assert_relative_eq!(loss, 2.0 * 0.5 * LN_2PI, epsilon = 1e-12);
    }

    #[test]
    fn duplicated_batch_leaves_loss_and_gradients_unchanged() {
        let ens = PneEnsemble::init(small_config()).unwrap();
        let member = &ens.members()[0];
        let x = ndarray::array![[0.3, -0.5], [1.2, 0.4]];
        let y = ndarray::array![[0.1, 0.0], [-0.7, 0.9]];
        let (l1, g1) = member.nll_and_gradients(x.view(), y.view()).unwrap();
        let xx = ndarray::concatenate![Axis(0), x, x];
        let yy = ndarray::concatenate![Axis(0), y, y];
        let (l2, g2) = member.nll_and_gradients(xx.view(), yy.view()).unwrap();
        assert_relative_eq!(l1, l2, epsilon = 1e-12);
        for (a, b) in g1.iter().zip(&g2) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        let mut cfg = small_config();
        cfg.dropout_rate = 0.3; // exercise the mask path too
        let mut ens = PneEnsemble::init(cfg).unwrap();
        let member = &mut ens.members_mut()[0];
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let x = Array2::from_shape_fn((3, 2), |_| rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_fn((3, 2), |_| rng.random_range(-1.0..1.0));
        let (_, analytic) = member.nll_and_gradients(x.view(), y.view()).unwrap();
        let base = member.parameter_vector();
        let h = 1e-5;
        for k in (0..base.len()).step_by(7) {
            let mut plus = base.clone();
            plus[k] += h;
            member.set_parameter_vector(&plus).unwrap();
            let (lp, _) = member.nll_and_gradients(x.view(), y.view()).unwrap();
            let mut minus = base.clone();
            minus[k] -= h;
            member.set_parameter_vector(&minus).unwrap();
            let (lm, _) = member.nll_and_gradients(x.view(), y.view()).unwrap();
            member.set_parameter_vector(&base).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let denom = analytic[k].abs().max(fd.abs()).max(1e-6);
            assert!(
                (analytic[k] - fd).abs() / denom <= 1e-4,
                "param {k}: analytic {} vs fd {fd}",
                analytic[k]
            );
        }
    }

    #[test]
    fn training_reaches_constant_target() {
        let cfg = PneConfig {
            input_dim: 1,
            output_dim: 1,
            hidden_layers: vec![16, 16],
            member_count: 2,
            epochs: 800,
            batch_size: 32,
            seed: 3,
            ..PneConfig::default()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let n = 128;
        let xs = Array2::from_shape_fn((n, 1), |_| rng.random_range(-1.0..1.0));
        let ys = Array2::from_elem((n, 1), 2.5);
        let data = Dataset::new(xs, ys, "const").unwrap();
        let mut ens = PneEnsemble::init(cfg).unwrap();
        let trace = ens.train(&data, 800).unwrap();
        for t in &trace.per_member {
            assert!(t.last().unwrap() < &t[0], "loss did not decrease: {t:?}");
        }
        for x in [-0.5, 0.0, 0.8] {
            let mix = ens.predict_mixture(&[x]).unwrap();
            let mu = mix.mean()[0];
            assert!((mu - 2.5).abs() < 0.05, "mean at {x}: {mu}");
        }
    }

    #[test]
    fn training_fits_linear_data() {
        let cfg = PneConfig {
            input_dim: 1,
            output_dim: 1,
            hidden_layers: vec![32, 32],
            member_count: 3,
            epochs: 500,
            batch_size: 64,
            seed: 11,
            ..PneConfig::default()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let n = 500;
        let xs = Array2::from_shape_fn((n, 1), |_| rng.random_range(-2.0..2.0));
        let noise = Array2::from_shape_fn((n, 1), |_| {
            0.1 * rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let ys = &xs * 2.0 + noise;
        let data = Dataset::new(xs, ys, "linear").unwrap();
        let mut ens = PneEnsemble::init(cfg).unwrap();
        ens.train(&data, 500).unwrap();

        let mut held_err = 0.0;
        let m = 200;
        for i in 0..m {
            let x = -2.0 + 4.0 * i as f64 / (m - 1) as f64;
            let pred = ens.predict_mixture(&[x]).unwrap().mean()[0];
            held_err += (pred - 2.0 * x).powi(2);
        }
        let rmse = (held_err / m as f64).sqrt();
        assert!(rmse <= 0.2, "held-out rmse {rmse}");
    }

    #[test]
    fn training_is_deterministic() {
        let opts = SyntheticOptions::default();
        let data = gen_hetero(200, &opts, &mut ChaCha12Rng::seed_from_u64(9)).unwrap();
        let cfg = PneConfig {
            epochs: 30,
            member_count: 2,
            seed: 21,
            ..PneConfig::default()
        };
        let mut a = PneEnsemble::init(cfg.clone()).unwrap();
        a.train(&data, 30).unwrap();
        let mut b = PneEnsemble::init(cfg).unwrap();
        b.train(&data, 30).unwrap();
        for (ma, mb) in a.members().iter().zip(b.members()) {
            assert_eq!(ma.parameter_vector(), mb.parameter_vector());
        }
    }

    #[test]
    fn bootstrap_resamples_differ_across_members() {
        // same derivation the trainer uses
        let cfg = PneConfig::default();
        let n = 64;
        let draws: Vec<Vec<usize>> = (0..cfg.member_count)
            .map(|i| {
                let mut rng = ChaCha12Rng::seed_from_u64(seed::derive(
                    cfg.seed,
                    &[STREAM_TRAIN, i as u64, 0],
                ));
                (0..n).map(|_| rng.random_range(0..n)).collect()
            })
            .collect();
        let distinct = draws
            .iter()
            .enumerate()
            .any(|(i, a)| draws.iter().skip(i + 1).any(|b| a != b));
        assert!(distinct, "all bootstrap resamples identical");
    }

    #[test]
    fn standardization_statistics_are_exact() {
        let opts = SyntheticOptions::default();
        let data = gen_hetero(300, &opts, &mut ChaCha12Rng::seed_from_u64(13)).unwrap();
        let mut ens = PneEnsemble::init(PneConfig {
            epochs: 1,
            member_count: 1,
            ..PneConfig::default()
        })
        .unwrap();
        ens.train(&data, 1).unwrap();
        let (mean, std) = ens.standardization();
        let standardized = (&data.inputs - &Array1::from_vec(mean.to_vec()))
            / &Array1::from_vec(std.to_vec());
        let m = standardized.mean_axis(Axis(0)).unwrap();
        let s = standardized.std_axis(Axis(0), 0.0);
        assert!(m[0].abs() < 1e-9, "standardized mean {}", m[0]);
        assert!((s[0] - 1.0).abs() < 1e-9, "standardized std {}", s[0]);
    }

    #[test]
    fn untrained_members_disagree() {
        let ens = PneEnsemble::init(PneConfig {
            seed: 77,
            ..PneConfig::default()
        })
        .unwrap();
        let mix = ens.predict_mixture(&[0.4]).unwrap();
        let epi = crate::ensemble::epistemic_paide(&mix, crate::ensemble::DistanceKind::Kl)
            .unwrap();
        assert!(epi > 0.0, "fresh members should disagree, got {epi}");
    }

    #[test]
    fn single_member_mixture_is_that_member() {
        let cfg = PneConfig {
            member_count: 1,
            ..PneConfig::default()
        };
        let ens = PneEnsemble::init(cfg).unwrap();
        let mix = ens.predict_mixture(&[0.1]).unwrap();
        let direct = ens.members()[0].forward(&[0.1]).unwrap();
        assert_eq!(mix.len(), 1);
        assert_eq!(mix.components()[0].mean(), direct.mean());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let opts = SyntheticOptions::default();
        let data = gen_hetero(100, &opts, &mut ChaCha12Rng::seed_from_u64(31)).unwrap();
        let mut ens = PneEnsemble::init(PneConfig {
            epochs: 10,
            member_count: 2,
            dropout_rate: 0.2,
            seed: 5,
            ..PneConfig::default()
        })
        .unwrap();
        ens.train(&data, 10).unwrap();
        ens.save(&path).unwrap();

        let loaded = PneEnsemble::load(&path).unwrap();
        for (a, b) in ens.members().iter().zip(loaded.members()) {
            assert_eq!(a.parameter_vector(), b.parameter_vector());
        }
        assert_eq!(ens.standardization().0, loaded.standardization().0);
        let ma = ens.predict_mixture(&[1.5]).unwrap();
        let mb = loaded.predict_mixture(&[1.5]).unwrap();
        assert_eq!(ma.components()[0].mean(), mb.components()[0].mean());
    }

    #[test]
    fn batched_and_single_prediction_agree() {
        let opts = SyntheticOptions::default();
        let data = gen_hetero(150, &opts, &mut ChaCha12Rng::seed_from_u64(17)).unwrap();
        let mut ens = PneEnsemble::init(PneConfig {
            epochs: 20,
            member_count: 3,
            seed: 2,
            ..PneConfig::default()
        })
        .unwrap();
        ens.train(&data, 20).unwrap();
        let xs = ndarray::array![[0.0], [2.0], [-3.5]];
        let batch = ens.predict_mixtures(xs.view()).unwrap();
        for (row, mix) in batch.iter().enumerate() {
            let single = ens.predict_mixture(xs.row(row).as_slice().unwrap()).unwrap();
            for (a, b) in mix.components().iter().zip(single.components()) {
                assert_eq!(a.mean(), b.mean());
                assert_eq!(a.diagonal_variances(), b.diagonal_variances());
            }
        }
    }
}
