//! Multivariate Gaussian distributions with closed-form entropy, density,
//! sampling, and the pairwise distances (KL, Bhattacharyya, Chernoff-α)
//! consumed by the mixture estimators.
//!
//! Covariances are stored either as a diagonal vector of variances or as the
//! lower-triangular Cholesky factor `L` of a full matrix (`Σ = L·Lᵀ`). Both
//! storages expose identical behaviour; the diagonal form exists because
//! network ensembles emit per-dimension variances and the O(D) fast paths
//! matter when scoring large candidate pools.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.8378770664093453;

/// Relative tolerance accepted when validating a full covariance for symmetry.
const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
enum Factor {
    /// Per-dimension variances, all strictly positive.
    Diagonal(DVector<f64>),
    /// Lower-triangular Cholesky factor with strictly positive diagonal.
    Lower(DMatrix<f64>),
}

/// A D-dimensional Gaussian `N(μ, Σ)`.
///
/// Immutable after construction and safe to share across threads. All
/// entropies and divergences are in nats.
#[derive(Clone, Debug)]
pub struct MultivariateGaussian {
    mean: DVector<f64>,
    factor: Factor,
}

impl MultivariateGaussian {
    /// Gaussian with a diagonal covariance given as per-dimension variances.
    pub fn diagonal(mean: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if mean.len() != variances.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                actual: variances.len(),
            });
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter("mean must be finite".into()));
        }
        if variances.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidParameter(
                "variances must be finite and strictly positive".into(),
            ));
        }
        Ok(Self {
            mean: DVector::from_vec(mean),
            factor: Factor::Diagonal(DVector::from_vec(variances)),
        })
    }

    /// Gaussian with a full covariance matrix, supplied row-major.
    ///
    /// The matrix must be symmetric and positive definite; a single jitter of
    /// `1e-9 · trace(Σ)/D` is added to the diagonal if the first Cholesky
    /// attempt fails, after which a second failure reports a degenerate
    /// covariance.
    pub fn full(mean: Vec<f64>, covariance_row_major: &[f64]) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if covariance_row_major.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: covariance_row_major.len(),
            });
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter("mean must be finite".into()));
        }
        if covariance_row_major.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("covariance must be finite".into()));
        }
        let cov = DMatrix::from_row_slice(dim, dim, covariance_row_major);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (cov[(i, j)], cov[(j, i)]);
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "covariance not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let l = cholesky_with_jitter(cov)?;
        Ok(Self {
            mean: DVector::from_vec(mean),
            factor: Factor::Lower(l),
        })
    }

    /// Gaussian from an externally computed lower-triangular Cholesky factor
    /// (row-major); entries above the diagonal are ignored.
    pub fn from_cholesky(mean: Vec<f64>, lower_row_major: &[f64]) -> Result<Self> {
        let dim = mean.len();
        if lower_row_major.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: lower_row_major.len(),
            });
        }
        let mut l = DMatrix::from_row_slice(dim, dim, lower_row_major);
        l.fill_upper_triangle(0.0, 1);
        if (0..dim).any(|i| !(l[(i, i)] > 0.0) || !l[(i, i)].is_finite()) {
            return Err(Error::DegenerateCovariance);
        }
        Ok(Self {
            mean: DVector::from_vec(mean),
            factor: Factor::Lower(l),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    /// Per-dimension variances when stored diagonally.
    pub fn diagonal_variances(&self) -> Option<&[f64]> {
        match &self.factor {
            Factor::Diagonal(v) => Some(v.as_slice()),
            Factor::Lower(_) => None,
        }
    }

    /// `ln det Σ`, always finite for a validly constructed Gaussian.
    pub fn log_det(&self) -> f64 {
        match &self.factor {
            Factor::Diagonal(v) => v.iter().map(|x| x.ln()).sum(),
            Factor::Lower(l) => 2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>(),
        }
    }

    /// Differential entropy `½·(D·ln(2πe) + ln det Σ)` in nats.
    ///
    /// Independent of the mean.
    pub fn entropy(&self) -> f64 {
        0.5 * (self.dim() as f64 * (LN_2PI + 1.0) + self.log_det())
    }

    /// Exact log-density at `y`.
    pub fn log_density(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: y.len(),
            });
        }
        let mut r: Vec<f64> = y
            .iter()
            .zip(self.mean.iter())
            .map(|(a, b)| a - b)
            .collect();
        self.solve_l(&mut r);
        let quad: f64 = r.iter().map(|z| z * z).sum();
        Ok(-0.5 * (self.dim() as f64 * LN_2PI + self.log_det() + quad))
    }

    /// Draw `μ + L·z` with `z` standard normal; deterministic given the
    /// generator state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        match &self.factor {
            Factor::Diagonal(v) => self
                .mean
                .iter()
                .zip(v.iter())
                .zip(z.iter())
                .map(|((m, var), zi)| m + var.sqrt() * zi)
                .collect(),
            Factor::Lower(l) => {
                let lz = l * DVector::from_vec(z);
                (&self.mean + lz).as_slice().to_vec()
            }
        }
    }

    /// `D_KL(self ‖ other)` in nats:
    /// `½·(tr(Σ_q⁻¹Σ_p) − D + ln(det Σ_q / det Σ_p) + (μ_q−μ_p)ᵀΣ_q⁻¹(μ_q−μ_p))`.
    ///
    /// Nonnegative, zero iff the distributions coincide, asymmetric in general.
    pub fn kl_divergence(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        let d = self.dim() as f64;
        if let (Factor::Diagonal(vp), Factor::Diagonal(vq)) = (&self.factor, &other.factor) {
            let mut acc = 0.0;
            for k in 0..self.dim() {
                let dm = other.mean[k] - self.mean[k];
                acc += vp[k] / vq[k] - 1.0 + (vq[k] / vp[k]).ln() + dm * dm / vq[k];
            }
            return Ok(0.5 * acc);
        }
        let lp = self.l_matrix();
        let lq = other.l_matrix();
        // tr(Σ_q⁻¹ Σ_p) = ‖L_q⁻¹ L_p‖_F²
        let x = solve_lower(&lq, lp);
        let trace_term: f64 = x.iter().map(|v| v * v).sum();
        let mut dm: Vec<f64> = other
            .mean
            .iter()
            .zip(self.mean.iter())
            .map(|(a, b)| a - b)
            .collect();
        forward_substitute(&lq, &mut dm);
        let quad: f64 = dm.iter().map(|v| v * v).sum();
        Ok(0.5 * (trace_term - d + other.log_det() - self.log_det() + quad))
    }

    /// Chernoff α-divergence `−ln ∫ p^α q^{1−α}` in nats, via the Gaussian
    /// closed form
    /// `(α(1−α)/2)·ΔμᵀΣ_α⁻¹Δμ + ½·ln(det Σ_α / (det Σ_p^{1−α} · det Σ_q^{α}))`
    /// with `Σ_α = (1−α)Σ_p + αΣ_q`.
    ///
    /// Returns exactly zero at α = 0 and α = 1.
    pub fn chernoff_alpha(&self, other: &Self, alpha: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "chernoff alpha must lie in [0,1], got {alpha}"
            )));
        }
        self.check_dim(other)?;
        if alpha == 0.0 || alpha == 1.0 {
            return Ok(0.0);
        }
        let coef = 0.5 * alpha * (1.0 - alpha);
        if let (Factor::Diagonal(vp), Factor::Diagonal(vq)) = (&self.factor, &other.factor) {
            let mut quad = 0.0;
            let mut logdet = 0.0;
            for k in 0..self.dim() {
                let va = (1.0 - alpha) * vp[k] + alpha * vq[k];
                let dm = self.mean[k] - other.mean[k];
                quad += dm * dm / va;
                // single subtraction keeps α = ½ symmetric down to the ulp
                logdet += va.ln() - ((1.0 - alpha) * vp[k].ln() + alpha * vq[k].ln());
            }
            return Ok(coef * quad + 0.5 * logdet);
        }
        let blended = self.cov_matrix() * (1.0 - alpha) + other.cov_matrix() * alpha;
        let la = cholesky_with_jitter(blended)?;
        let log_det_blend = 2.0 * (0..la.nrows()).map(|i| la[(i, i)].ln()).sum::<f64>();
        let mut dm: Vec<f64> = self
            .mean
            .iter()
            .zip(other.mean.iter())
            .map(|(a, b)| a - b)
            .collect();
        forward_substitute(&la, &mut dm);
        let quad: f64 = dm.iter().map(|v| v * v).sum();
        Ok(coef * quad
            + 0.5 * (log_det_blend - ((1.0 - alpha) * self.log_det() + alpha * other.log_det())))
    }

    /// Bhattacharyya distance `−ln ∫ √(pq)` in nats; the α = ½ Chernoff
    /// divergence, computed through the symmetric blend so that
    /// `p.bhattacharyya(q)` and `q.bhattacharyya(p)` are bit-identical.
    pub fn bhattacharyya(&self, other: &Self) -> Result<f64> {
        self.chernoff_alpha(other, 0.5)
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(())
    }

    /// In-place forward substitution `r ← L⁻¹ r`.
    fn solve_l(&self, r: &mut [f64]) {
        match &self.factor {
            Factor::Diagonal(v) => {
                for (ri, var) in r.iter_mut().zip(v.iter()) {
                    *ri /= var.sqrt();
                }
            }
            Factor::Lower(l) => forward_substitute(l, r),
        }
    }

    fn l_matrix(&self) -> DMatrix<f64> {
        match &self.factor {
            Factor::Diagonal(v) => {
                DMatrix::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|x| x.sqrt())))
            }
            Factor::Lower(l) => l.clone(),
        }
    }

    fn cov_matrix(&self) -> DMatrix<f64> {
        match &self.factor {
            Factor::Diagonal(v) => DMatrix::from_diagonal(v),
            Factor::Lower(l) => l * l.transpose(),
        }
    }
}

/// Cholesky of an SPD matrix with a single jitter retry
/// (`1e-9·trace(Σ)/D` added to the diagonal).
fn cholesky_with_jitter(cov: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = cov.nrows();
    match Cholesky::new(cov.clone()) {
        Some(c) => Ok(c.unpack()),
        None => {
            let jitter = 1e-9 * cov.trace() / dim as f64;
            let mut retry = cov;
            for i in 0..dim {
                retry[(i, i)] += jitter;
            }
            Cholesky::new(retry)
                .map(|c| c.unpack())
                .ok_or(Error::DegenerateCovariance)
        }
    }
}

/// Forward substitution `r ← L⁻¹ r` for a dense lower-triangular `L`.
fn forward_substitute(l: &DMatrix<f64>, r: &mut [f64]) {
    let n = l.nrows();
    for i in 0..n {
        let mut acc = r[i];
        for j in 0..i {
            acc -= l[(i, j)] * r[j];
        }
        r[i] = acc / l[(i, i)];
    }
}

/// `L⁻¹ B` column by column.
fn solve_lower(l: &DMatrix<f64>, mut b: DMatrix<f64>) -> DMatrix<f64> {
    for c in 0..b.ncols() {
        let mut col: Vec<f64> = b.column(c).iter().copied().collect();
        forward_substitute(l, &mut col);
        b.set_column(c, &DVector::from_vec(col));
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn n1(mu: f64, var: f64) -> MultivariateGaussian {
        MultivariateGaussian::diagonal(vec![mu], vec![var]).unwrap()
    }

    #[test]
    fn entropy_standard_normal() {
        // frozen from 1D quadrature of -∫ p ln p over ±12σ
        assert_relative_eq!(n1(0.0, 1.0).entropy(), 1.4189385332046727, epsilon = 1e-12);
    }

    #[test]
    fn entropy_translation_invariant() {
        let g = MultivariateGaussian::full(
            vec![3.0, -7.0],
            &[2.0, 0.4, 0.4, 1.5],
        )
        .unwrap();
        let h = MultivariateGaussian::full(vec![0.0, 0.0], &[2.0, 0.4, 0.4, 1.5]).unwrap();
        assert_eq!(g.entropy(), h.entropy());
    }

    #[test]
    fn entropy_additive_for_independent_dims() {
        let g = MultivariateGaussian::diagonal(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_relative_eq!(g.entropy(), 2.0 * 1.4189385332046727, epsilon = 1e-12);
    }

    #[test]
    fn entropy_increasing_in_each_variance() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..4.0)).collect();
            let g = MultivariateGaussian::diagonal(vec![0.0; 3], v.clone()).unwrap();
            for k in 0..3 {
                let mut bigger = v.clone();
                bigger[k] *= 1.0 + rng.random_range(0.01..0.5);
                let gb = MultivariateGaussian::diagonal(vec![0.0; 3], bigger).unwrap();
                assert!(gb.entropy() > g.entropy());
            }
        }
    }

    #[test]
    fn log_density_standard_normal_origin() {
        // -½ ln 2π, frozen against the quadrature-normalized pdf
        let v = n1(0.0, 1.0).log_density(&[0.0]).unwrap();
        assert_relative_eq!(v, -0.9189385332046727, epsilon = 1e-12);
        assert_eq!(v, n1(0.0, 1.0).log_density(&[-0.0]).unwrap());
    }

    #[test]
    fn log_density_normalizes_on_grid() {
        // Riemann-sum oracle: Σ pdf(x)·Δx over a ±10σ grid ≈ 1
        let g = n1(0.3, 2.0);
        let (lo, hi, steps) = (-14.0, 14.0, 20_000);
        let dx = (hi - lo) / steps as f64;
        let mut total = 0.0;
        for i in 0..steps {
            let x = lo + (i as f64 + 0.5) * dx;
            total += g.log_density(&[x]).unwrap().exp() * dx;
        }
        assert!((total - 1.0).abs() < 1e-3, "integral {total}");
    }

    #[test]
    fn log_density_dimension_mismatch() {
        assert!(matches!(
            n1(0.0, 1.0).log_density(&[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sampling_deterministic_and_moment_matched() {
        let g = n1(0.0, 1.0);
        let a: Vec<Vec<f64>> = {
            let mut rng = ChaCha12Rng::seed_from_u64(42);
            (0..5).map(|_| g.sample(&mut rng)).collect()
        };
        let b: Vec<Vec<f64>> = {
            let mut rng = ChaCha12Rng::seed_from_u64(42);
            (0..5).map(|_| g.sample(&mut rng)).collect()
        };
        assert_eq!(a, b);

        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += g.sample(&mut rng)[0];
        }
        assert!((sum / n as f64).abs() < 0.02);

        let g4 = n1(0.0, 4.0);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = g4.sample(&mut rng)[0];
            s += x;
            s2 += x * x;
        }
        let var = s2 / n as f64 - (s / n as f64).powi(2);
        assert!((var - 4.0).abs() < 0.2, "sample variance {var}");
    }

    #[test]
    fn sampling_full_covariance_correlation() {
        let g = MultivariateGaussian::full(vec![1.0, -1.0], &[1.0, 0.8, 0.8, 2.0]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let n = 100_000;
        let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let v = g.sample(&mut rng);
            sx += v[0];
            sy += v[1];
            sxy += v[0] * v[1];
        }
        let cov = sxy / n as f64 - (sx / n as f64) * (sy / n as f64);
        assert!((cov - 0.8).abs() < 0.05, "sample covariance {cov}");
    }

    #[test]
    fn kl_frozen_values() {
        assert_relative_eq!(n1(0.0, 1.0).kl_divergence(&n1(0.0, 1.0)).unwrap(), 0.0);
        // frozen from quadrature of ∫ p ln(p/q)
        assert_relative_eq!(
            n1(0.0, 1.0).kl_divergence(&n1(1.0, 1.0)).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            n1(0.0, 1.0).kl_divergence(&n1(0.0, 4.0)).unwrap(),
            0.3181471805599453,
            epsilon = 1e-12
        );
    }

    #[test]
    fn kl_asymmetric_on_unequal_covariances() {
        let a = n1(0.0, 1.0);
        let b = n1(0.5, 3.0);
        let ab = a.kl_divergence(&b).unwrap();
        let ba = b.kl_divergence(&a).unwrap();
        assert!((ab - ba).abs() > 1e-3);
    }

    #[test]
    fn bhattacharyya_frozen_and_symmetric() {
        let a = n1(0.0, 1.0);
        let b = n1(1.0, 1.0);
        // frozen from quadrature of -ln ∫ √(pq)
        assert_relative_eq!(a.bhattacharyya(&b).unwrap(), 0.125, epsilon = 1e-12);
        assert_eq!(a.bhattacharyya(&b).unwrap(), b.bhattacharyya(&a).unwrap());

        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..100 {
            let p = n1(rng.random_range(-3.0..3.0), rng.random_range(0.3..3.0));
            let q = n1(rng.random_range(-3.0..3.0), rng.random_range(0.3..3.0));
            assert_eq!(p.bhattacharyya(&q).unwrap(), q.bhattacharyya(&p).unwrap());
        }
    }

    #[test]
    fn chernoff_endpoints_and_half() {
        let p = n1(0.0, 1.0);
        let q = n1(2.0, 2.0);
        assert_eq!(p.chernoff_alpha(&q, 0.0).unwrap(), 0.0);
        assert_eq!(p.chernoff_alpha(&q, 1.0).unwrap(), 0.0);
        assert_eq!(
            p.chernoff_alpha(&q, 0.5).unwrap(),
            p.bhattacharyya(&q).unwrap()
        );
        // frozen from quadrature of -ln ∫ p^0.3 q^0.7
        assert_relative_eq!(
            p.chernoff_alpha(&q, 0.3).unwrap(),
            0.3502869782266767,
            epsilon = 1e-9
        );
        assert!(p.chernoff_alpha(&q, 1.5).is_err());
    }

    #[test]
    fn distances_nonnegative_and_kl_dominates_chernoff_half() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..200 {
            let p = n1(rng.random_range(-3.0..3.0), rng.random_range(0.3..3.0));
            let q = n1(rng.random_range(-3.0..3.0), rng.random_range(0.3..3.0));
            let kl = p.kl_divergence(&q).unwrap();
            let ch = p.chernoff_alpha(&q, 0.5).unwrap();
            assert!(kl >= 0.0 && ch >= 0.0);
            assert!(kl >= ch, "kl {kl} < chernoff-half {ch}");
        }
    }

    #[test]
    fn distances_translation_invariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for _ in 0..50 {
            let (m1, m2) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let (v1, v2) = (rng.random_range(0.3..3.0), rng.random_range(0.3..3.0));
            let t = rng.random_range(-50.0..50.0);
            let (p, q) = (n1(m1, v1), n1(m2, v2));
            let (pt, qt) = (n1(m1 + t, v1), n1(m2 + t, v2));
            assert_relative_eq!(
                p.kl_divergence(&q).unwrap(),
                pt.kl_divergence(&qt).unwrap(),
                epsilon = 1e-9
            );
            assert_relative_eq!(
                p.bhattacharyya(&q).unwrap(),
                pt.bhattacharyya(&qt).unwrap(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn diagonal_and_full_storage_agree() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..50 {
            let d = 3;
            let mean: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let vars: Vec<f64> = (0..d).map(|_| rng.random_range(0.3..3.0)).collect();
            let mut cov = vec![0.0; d * d];
            for k in 0..d {
                cov[k * d + k] = vars[k];
            }
            let gd = MultivariateGaussian::diagonal(mean.clone(), vars.clone()).unwrap();
            let gf = MultivariateGaussian::full(mean, &cov).unwrap();

            assert_relative_eq!(gd.entropy(), gf.entropy(), epsilon = 1e-10);
            let y: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert_relative_eq!(
                gd.log_density(&y).unwrap(),
                gf.log_density(&y).unwrap(),
                epsilon = 1e-10
            );

            let other =
                MultivariateGaussian::diagonal(vec![0.5; d], vec![1.0, 2.0, 0.7]).unwrap();
            assert_relative_eq!(
                gd.kl_divergence(&other).unwrap(),
                gf.kl_divergence(&other).unwrap(),
                epsilon = 1e-10
            );
            assert_relative_eq!(
                other.kl_divergence(&gd).unwrap(),
                other.kl_divergence(&gf).unwrap(),
                epsilon = 1e-10
            );
            assert_relative_eq!(
                gd.bhattacharyya(&other).unwrap(),
                gf.bhattacharyya(&other).unwrap(),
                epsilon = 1e-10
            );
            assert_relative_eq!(
                gd.chernoff_alpha(&other, 0.3).unwrap(),
                gf.chernoff_alpha(&other, 0.3).unwrap(),
                epsilon = 1e-10
            );

            let mut rng_a = ChaCha12Rng::seed_from_u64(99);
            let mut rng_b = ChaCha12Rng::seed_from_u64(99);
            let sa = gd.sample(&mut rng_a);
            let sb = gf.sample(&mut rng_b);
            for (a, b) in sa.iter().zip(sb.iter()) {
                assert_relative_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn full_covariance_validation() {
        // asymmetric input rejected
        assert!(MultivariateGaussian::full(vec![0.0, 0.0], &[1.0, 0.5, -0.5, 1.0]).is_err());
        // negative definite rejected even after jitter
        assert!(matches!(
            MultivariateGaussian::full(vec![0.0, 0.0], &[-1.0, 0.0, 0.0, -1.0]),
            Err(Error::DegenerateCovariance) | Err(Error::InvalidParameter(_))
        ));
        // zero variance rejected
        assert!(MultivariateGaussian::diagonal(vec![0.0], vec![0.0]).is_err());
    }

    #[test]
    fn near_singular_covariance_recovered_by_jitter() {
        // rank-deficient up to rounding; jitter makes it factorizable
        let eps = 1e-13;
        let cov = [1.0, 1.0, 1.0, 1.0 + eps];
        let g = MultivariateGaussian::full(vec![0.0, 0.0], &cov);
        assert!(g.is_ok());
    }
}
