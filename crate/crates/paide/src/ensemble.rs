//! Conditional mixtures and the entropy / epistemic-uncertainty estimators.
//!
//! An ensemble's prediction for one input is a weighted mixture of Gaussians
//! `f(y) = Σ_j π_j p_j(y)`. Its aleatoric entropy `Σ_j π_j H(p_j)` is exact;
//! the total entropy has no closed form, so two estimators are provided:
//!
//! * [`mc_total_entropy`]: ancestral sampling, `-1/K Σ ln f(y_k)`, with the
//!   standard error of the mean;
//! * [`paide_total_entropy`]: the pairwise-distance estimator
//!   `H(y|θ,x) − Σ_i π_i ln Σ_j π_j exp(−D(p_i‖p_j))`, sample-free.
//!
//! The epistemic (mutual-information) forms drop the shared aleatoric term:
//! [`epistemic_mc`] and [`epistemic_paide`]. With the Bhattacharyya distance
//! the pairwise estimator lower-bounds the mutual information; with KL it
//! upper-bounds it, so the two bracket the Monte-Carlo estimate.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::gaussian::MultivariateGaussian;

/// Weighted mixture of `M` Gaussians for a single input.
///
/// Weights are nonnegative and sum to one within 1e-12; all components share
/// one dimension.
#[derive(Clone, Debug)]
pub struct ConditionalMixture {
    components: Vec<MultivariateGaussian>,
    weights: Vec<f64>,
}

impl ConditionalMixture {
    pub fn new(components: Vec<MultivariateGaussian>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter(
                "mixture needs at least one component".into(),
            ));
        }
        if components.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: components.len(),
                actual: weights.len(),
            });
        }
        let dim = components[0].dim();
        if components.iter().any(|c| c.dim() != dim) {
            return Err(Error::InvalidParameter(
                "mixture components must share one dimension".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter(
                "mixture weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            components,
            weights,
        })
    }

    /// Mixture with uniform weights `1/M`.
    pub fn uniform(components: Vec<MultivariateGaussian>) -> Result<Self> {
        let m = components.len();
        Self::new(components, vec![1.0 / m as f64; m])
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn components(&self) -> &[MultivariateGaussian] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mean of the mixture, `Σ_j π_j μ_j`.
    pub fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (c, w) in self.components.iter().zip(&self.weights) {
            for (o, m) in out.iter_mut().zip(c.mean()) {
                *o += w * m;
            }
        }
        out
    }
}

/// Pairwise distance used inside the estimator.
///
/// All three are premetrics: nonnegative and zero for identical arguments.
/// KL is asymmetric; Bhattacharyya (and Chernoff at α = ½) is symmetric, which
/// halves the number of pairs the estimator evaluates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DistanceKind {
    Kl,
    Bhattacharyya,
    Chernoff { alpha: f64 },
}

impl DistanceKind {
    pub fn evaluate(&self, p: &MultivariateGaussian, q: &MultivariateGaussian) -> Result<f64> {
        match self {
            DistanceKind::Kl => p.kl_divergence(q),
            DistanceKind::Bhattacharyya => p.bhattacharyya(q),
            DistanceKind::Chernoff { alpha } => p.chernoff_alpha(q, *alpha),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            DistanceKind::Kl => false,
            DistanceKind::Bhattacharyya => true,
            DistanceKind::Chernoff { alpha } => *alpha == 0.5,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistanceKind::Kl => "kl",
            DistanceKind::Bhattacharyya => "bhatt",
            DistanceKind::Chernoff { .. } => "chernoff",
        }
    }
}

/// Monte-Carlo estimator settings.
#[derive(Clone, Copy, Debug)]
pub struct McConfig {
    /// Number of ancestral samples K.
    pub sample_count: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            sample_count: 1000,
            seed: 0,
        }
    }
}

/// A sampled estimate together with the standard error of its mean.
#[derive(Clone, Copy, Debug)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// `ln Σ_j π_j p_j(y)` via log-sum-exp.
pub fn mixture_log_density(mix: &ConditionalMixture, y: &[f64]) -> Result<f64> {
    let mut terms = Vec::with_capacity(mix.len());
    for (c, w) in mix.components.iter().zip(&mix.weights) {
        if *w == 0.0 {
            continue;
        }
        terms.push(w.ln() + c.log_density(y)?);
    }
    Ok(log_sum_exp(&terms))
}

/// Aleatoric entropy `Σ_j π_j H(p_j)`, exact for Gaussian components.
pub fn aleatoric_entropy(mix: &ConditionalMixture) -> f64 {
    mix.components
        .iter()
        .zip(&mix.weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(c, w)| w * c.entropy())
        .sum()
}

/// Entropy of the weight distribution, `H(θ) = −Σ_j π_j ln π_j`.
///
/// `ln M` for uniform weights; the epistemic estimators saturate at this value
/// when all components are disjoint.
pub fn weight_entropy(mix: &ConditionalMixture) -> f64 {
    -mix.weights
        .iter()
        .filter(|w| **w > 0.0)
        .map(|w| w * w.ln())
        .sum::<f64>()
}

/// Monte-Carlo total entropy `−1/K Σ_k ln f(y_k)` with ancestral sampling:
/// a component index is drawn from π, then a point from that component.
///
/// Returns the estimate and the sample standard error of the mean;
/// deterministic given the seed. Requires `K ≥ 2` so the error is finite.
pub fn mc_total_entropy(mix: &ConditionalMixture, cfg: &McConfig) -> Result<McEstimate> {
    if cfg.sample_count < 2 {
        return Err(Error::InvalidParameter(
            "mc estimator needs at least 2 samples".into(),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut draws = Vec::with_capacity(cfg.sample_count);
    let cumulative: Vec<f64> = mix
        .weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    for _ in 0..cfg.sample_count {
        let u: f64 = rand::Rng::random(&mut rng);
        let idx = cumulative
            .iter()
            .position(|c| u < *c)
            .unwrap_or(mix.len() - 1);
        let y = mix.components[idx].sample(&mut rng);
        draws.push(-mixture_log_density(mix, &y)?);
    }
    let k = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / k;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(McEstimate {
        value: mean,
        std_error: (var / k).sqrt(),
    })
}

/// Monte-Carlo epistemic uncertainty: MC total entropy minus the exact
/// aleatoric term. The standard error of the total carries through unchanged.
pub fn epistemic_mc(mix: &ConditionalMixture, cfg: &McConfig) -> Result<McEstimate> {
    let total = mc_total_entropy(mix, cfg)?;
    Ok(McEstimate {
        value: total.value - aleatoric_entropy(mix),
        std_error: total.std_error,
    })
}

/// Pairwise-distance total-entropy estimator
/// `Ĥ = H(y|θ,x) − Σ_i π_i ln Σ_j π_j exp(−D(p_i‖p_j))`.
pub fn paide_total_entropy(mix: &ConditionalMixture, distance: DistanceKind) -> Result<f64> {
    Ok(aleatoric_entropy(mix) + epistemic_paide(mix, distance)?)
}

/// Pairwise-distance epistemic estimator
/// `Î = −Σ_i π_i ln Σ_j π_j exp(−D(p_i‖p_j))`.
///
/// Bounded by `0 ≤ Î ≤ H(θ)`; zero iff all components coincide.
pub fn epistemic_paide(mix: &ConditionalMixture, distance: DistanceKind) -> Result<f64> {
    let symmetric = distance.is_symmetric();
    epistemic_paide_with(mix, symmetric, |p, q| distance.evaluate(p, q))
}

/// Generic aggregation path over an arbitrary premetric.
///
/// Self-distances are taken as exactly zero without evaluating the closure.
/// When `symmetric` is set, only the `(M²−M)/2` upper-triangle pairs are
/// evaluated and mirrored. The inner sum is computed as a log-sum-exp over
/// `ln π_j − D_ij` so that distances far above 700 nats underflow gracefully
/// instead of zeroing the whole sum.
pub fn epistemic_paide_with<F>(
    mix: &ConditionalMixture,
    symmetric: bool,
    mut distance: F,
) -> Result<f64>
where
    F: FnMut(&MultivariateGaussian, &MultivariateGaussian) -> Result<f64>,
{
    let m = mix.len();
    let mut dist = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if i == j || (symmetric && j < i) {
                continue;
            }
            let d = distance(&mix.components[i], &mix.components[j])?;
            dist[i * m + j] = d;
            if symmetric {
                dist[j * m + i] = d;
            }
        }
    }
    let mut result = 0.0;
    let mut terms = Vec::with_capacity(m);
    for i in 0..m {
        let wi = mix.weights[i];
        if wi == 0.0 {
            continue;
        }
        terms.clear();
        for j in 0..m {
            let wj = mix.weights[j];
            if wj == 0.0 {
                continue;
            }
            terms.push(wj.ln() - dist[i * m + j]);
        }
        result -= wi * log_sum_exp(&terms);
    }
    Ok(result)
}

/// Counterpart of [`paide_total_entropy`] for an injected distance.
pub fn paide_total_entropy_with<F>(
    mix: &ConditionalMixture,
    symmetric: bool,
    distance: F,
) -> Result<f64>
where
    F: FnMut(&MultivariateGaussian, &MultivariateGaussian) -> Result<f64>,
{
    Ok(aleatoric_entropy(mix) + epistemic_paide_with(mix, symmetric, distance)?)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}
