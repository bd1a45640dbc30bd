//! Nonsingular Gaussian densities.
//!
//! Every density here carries a Cholesky factor of its covariance, computed
//! once at construction. A covariance whose factorization has a nonpositive
//! pivot is rejected, so singular Gaussians never enter the library.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};

/// Default relative symmetry tolerance applied before symmetrization.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Returns `(m + mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// `what` names the matrix in the error message.
pub fn spd_factor(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "square matrix",
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite(format!("{what} (non-finite entries)")));
    }
    let chol = Cholesky::new(symmetrize(m))
        .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))?;
    // nalgebra accepts tiny positive pivots produced by round-off on a
    // singular input; require pivots that are resolvable relative to the
    // matrix scale.
    let scale = m.diagonal().amax().max(f64::MIN_POSITIVE);
    let l = chol.l_dirty();
    let min_pivot = (0..m.nrows()).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(min_pivot * min_pivot > scale * 1e-15) {
        return Err(Error::NotPositiveDefinite(what.to_string()));
    }
    Ok(chol)
}

/// Inverse of a symmetric positive-definite matrix, symmetrized.
pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Ok(symmetrize(&spd_factor(m, what)?.inverse()))
}

/// Solves `a · x = b` for SPD `a`, returning `x = a⁻¹ b`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Ok(spd_factor(a, what)?.solve(b))
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

/// A nonsingular Gaussian density `N(mean, cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl GaussianDensity {
    /// Validates and symmetrizes `cov` with the default symmetry tolerance.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(mean, cov, SYMMETRY_TOL)
    }

    /// Like [`GaussianDensity::new`] with an explicit relative symmetry
    /// tolerance: `max|C - Cᵀ| <= tol * max(1, max|C|)`.
    pub fn with_tolerance(mean: DVector<f64>, cov: DMatrix<f64>, tol: f64) -> Result<Self> {
        check_dim("covariance rows", mean.len(), cov.nrows())?;
        check_dim("covariance columns", mean.len(), cov.ncols())?;
        if mean.is_empty() {
            return Err(Error::InvalidParameter("zero-dimensional density".into()));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite mean".into()));
        }
        let asym = asymmetry(&cov);
        let bound = tol * cov.amax().max(1.0);
        if !(asym <= bound) {
            return Err(Error::NotSymmetric {
                asymmetry: asym,
                tolerance: bound,
            });
        }
        let cov = symmetrize(&cov);
        let factor = spd_factor(&cov, "covariance")?.unpack();
        Ok(Self { mean, cov, factor })
    }

    /// Convenience constructor from slices with a diagonal covariance.
    pub fn diagonal(mean: &[f64], variances: &[f64]) -> Result<Self> {
        check_dim("diagonal covariance", mean.len(), variances.len())?;
        Self::new(
            DVector::from_column_slice(mean),
            DMatrix::from_diagonal(&DVector::from_column_slice(variances)),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower-triangular `L` with `L Lᵀ = cov`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Draws `mean + L z` with `z` standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = standard_normal(self.dim(), rng);
        &self.mean + &self.factor * z
    }

    /// Marginal over the listed dimensions, in the given order.
    pub fn marginal(&self, indices: &[usize]) -> Result<Self> {
        let d = self.dim();
        if let Some(&bad) = indices.iter().find(|&&i| i >= d) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                lo: 0,
                hi: d - 1,
            });
        }
        let mean = DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.mean[i]));
        let cov = self.cov.select_rows(indices).select_columns(indices);
        Self::new(mean, cov)
    }

    /// Conditional density of the free dimensions given `observed = value`.
    ///
    /// Free dimensions keep their original relative order. Conditioning on
    /// every dimension is rejected with [`Error::EmptyFreeBlock`].
    pub fn condition(&self, observed: &[usize], value: &DVector<f64>) -> Result<Self> {
        let d = self.dim();
        check_dim("observed value", observed.len(), value.len())?;
        let mut is_observed = vec![false; d];
        for &i in observed {
            if i >= d {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    lo: 0,
                    hi: d - 1,
                });
            }
            if is_observed[i] {
                return Err(Error::InvalidParameter(format!(
                    "observed index {i} listed twice"
                )));
            }
            is_observed[i] = true;
        }
        let free: Vec<usize> = (0..d).filter(|&i| !is_observed[i]).collect();
        if free.is_empty() {
            return Err(Error::EmptyFreeBlock);
        }
        if observed.is_empty() {
            return Ok(self.clone());
        }

        let c_ff = self.cov.select_rows(&free).select_columns(&free);
        let c_fo = self.cov.select_rows(&free).select_columns(observed);
        let c_oo = self.cov.select_rows(observed).select_columns(observed);
        let mu_f = DVector::from_iterator(free.len(), free.iter().map(|&i| self.mean[i]));
        let mu_o = DVector::from_iterator(observed.len(), observed.iter().map(|&i| self.mean[i]));

        let chol = spd_factor(&c_oo, "observed-block covariance")?;
        let gain_t = chol.solve(&c_fo.transpose()); // C_oo⁻¹ C_of
        let mean = mu_f + gain_t.transpose() * (value - mu_o);
        let cov = c_ff - &c_fo * gain_t;
        Self::new(mean, symmetrize(&cov))
    }

    /// Natural log of the density at `x`.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim("log-density argument", self.dim(), x.len())?;
        let diff = x - &self.mean;
        let z = self
            .factor
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has a positive diagonal");
        let log_det: f64 = self.factor.diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        let d = self.dim() as f64;
        Ok(-0.5 * z.norm_squared() - 0.5 * (d * (2.0 * std::f64::consts::PI).ln() + log_det))
    }
}

/// A vector of `d` independent standard-normal draws.
pub fn standard_normal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn make_gaussian_examples() {
        assert!(GaussianDensity::new(dv(&[0.0]), dmatrix![1.0]).is_ok());
        let origin =
            GaussianDensity::diagonal(&[2000.0, 70.0, 5000.0, 0.0], &[1000.0, 10.0, 1000.0, 10.0])
                .unwrap();
        assert_eq!(origin.dim(), 4);
        assert!(matches!(
            GaussianDensity::new(dv(&[0.0]), dmatrix![0.0]),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(matches!(
            GaussianDensity::new(dv(&[0.0, 1.0]), dmatrix![1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_singular_and_asymmetric() {
        let singular = dmatrix![1.0, 1.0; 1.0, 1.0];
        assert!(GaussianDensity::new(dv(&[0.0, 0.0]), singular).is_err());
        let asym = dmatrix![1.0, 0.5; 0.0, 1.0];
        assert!(matches!(
            GaussianDensity::new(dv(&[0.0, 0.0]), asym),
            Err(Error::NotSymmetric { .. })
        ));
        // Round-off asymmetry is accepted and removed.
        let nearly = dmatrix![2.0, 0.5 + 1e-13; 0.5, 1.0];
        let g = GaussianDensity::new(dv(&[0.0, 0.0]), nearly).unwrap();
        assert_eq!(g.cov()[(0, 1)], g.cov()[(1, 0)]);
    }

    #[test]
    fn sampling_is_reproducible() {
        let g = GaussianDensity::diagonal(&[0.0], &[1.0]).unwrap();
        let a = g.sample(&mut ChaCha12Rng::seed_from_u64(7));
        let b = g.sample(&mut ChaCha12Rng::seed_from_u64(7));
        assert_eq!(a, b);
    }

    #[test]
    fn sample_covariance_within_standard_error() {
        let g = GaussianDensity::diagonal(&[0.0, 0.0], &[4.0, 9.0]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let n = 10_000;
        let draws: Vec<_> = (0..n).map(|_| g.sample(&mut rng)).collect();
        let mean = draws.iter().fold(DVector::zeros(2), |acc, x| acc + x) / n as f64;
        let mut cov = DMatrix::zeros(2, 2);
        for x in &draws {
            let c = x - &mean;
            cov += &c * c.transpose();
        }
        cov /= (n - 1) as f64;
        for i in 0..2 {
            for j in 0..2 {
                // Standard error of the (i,j) sample covariance estimated
                // from the fourth moments of the draws.
                let prods: Vec<f64> = draws
                    .iter()
                    .map(|x| (x[i] - mean[i]) * (x[j] - mean[j]))
                    .collect();
                let m = prods.iter().sum::<f64>() / n as f64;
                let var = prods.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (n - 1) as f64;
                let se = (var / n as f64).sqrt();
                let target = g.cov()[(i, j)];
                assert!(
                    (cov[(i, j)] - target).abs() <= 3.0 * se,
                    "({i},{j}): {} vs {target} (se {se})",
                    cov[(i, j)]
                );
            }
        }
    }

    #[test]
    fn sample_mean_within_clt_bound() {
        let m = dv(&[1.0, -2.0, 3.0]);
        let g = GaussianDensity::new(m.clone(), DMatrix::identity(3, 3)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let n = 10_000;
        let mean = (0..n).fold(DVector::zeros(3), |acc, _| acc + g.sample(&mut rng)) / n as f64;
        assert!((mean - m).norm() <= 3.0 * 3f64.sqrt() / 100.0);
    }

    #[test]
    fn sample_covariance_error_shrinks_with_more_draws() {
        let cov = dmatrix![2.0, 0.6; 0.6, 1.0];
        let g = GaussianDensity::new(dv(&[0.0, 0.0]), cov.clone()).unwrap();
        let err = |n: usize, seed: u64| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut acc = DMatrix::zeros(2, 2);
            for _ in 0..n {
                let x = g.sample(&mut rng);
                acc += &x * x.transpose();
            }
            (acc / n as f64 - &cov).norm()
        };
        assert!(err(100_000, 5) < err(1_000, 5));
    }

    #[test]
    fn condition_examples() {
        let joint = GaussianDensity::new(dv(&[0.0, 0.0]), DMatrix::identity(2, 2)).unwrap();
        let c = joint.condition(&[1], &dv(&[5.0])).unwrap();
        assert_eq!(c.mean()[0], 0.0);
        assert!((c.cov()[(0, 0)] - 1.0).abs() < 1e-15);

        let rho = 0.5;
        let joint = GaussianDensity::new(dv(&[0.0, 0.0]), dmatrix![1.0, rho; rho, 1.0]).unwrap();
        let c = joint.condition(&[1], &dv(&[2.0])).unwrap();
        assert!((c.mean()[0] - 1.0).abs() < 1e-12);
        assert!((c.cov()[(0, 0)] - 0.75).abs() < 1e-12);

        assert_eq!(
            joint.condition(&[0, 1], &dv(&[0.0, 0.0])),
            Err(Error::EmptyFreeBlock)
        );
    }

    /// Conditional moments from a density grid: p(x1 | x2 = 2) ∝ p(x1, 2).
    #[test]
    fn condition_matches_grid_quadrature() {
        let rho = 0.5;
        let joint = GaussianDensity::new(dv(&[0.0, 0.0]), dmatrix![1.0, rho; rho, 1.0]).unwrap();
        let h = 1e-3;
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        let mut x = -12.0;
        while x <= 12.0 {
            let p = joint.log_density(&dv(&[x, 2.0])).unwrap().exp();
            z += p;
            m1 += p * x;
            m2 += p * x * x;
            x += h;
        }
        let mean = m1 / z;
        let var = m2 / z - mean * mean;
        let c = joint.condition(&[1], &dv(&[2.0])).unwrap();
        assert!((c.mean()[0] - mean).abs() < 1e-8);
        assert!((c.cov()[(0, 0)] - var).abs() < 1e-8);
        assert!((mean - 1.0).abs() < 1e-8 && (var - 0.75).abs() < 1e-8);
    }

    #[test]
    fn log_density_examples() {
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        let g = GaussianDensity::diagonal(&[0.0], &[1.0]).unwrap();
        assert!((g.log_density(&dv(&[0.0])).unwrap() + 0.5 * ln2pi).abs() < 1e-15);
        let g = GaussianDensity::diagonal(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((g.log_density(&dv(&[0.0, 0.0])).unwrap() + ln2pi).abs() < 1e-15);
        assert!(matches!(
            g.log_density(&dv(&[0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn log_density_identity_with_random_offsets() {
        let cov = dmatrix![4.0, 1.0, 0.5; 1.0, 3.0, 0.2; 0.5, 0.2, 2.0];
        let g = GaussianDensity::new(dv(&[1.0, 2.0, 3.0]), cov.clone()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let log_det_2pi_c = (cov * 2.0 * std::f64::consts::PI).determinant().ln();
        for _ in 0..20 {
            let z = standard_normal(3, &mut rng);
            let x = g.mean() + g.factor() * &z;
            let expect = -0.5 * z.norm_squared() - 0.5 * log_det_2pi_c;
            assert!((g.log_density(&x).unwrap() - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn log_density_integrates_to_one() {
        for mean in [0.0, 3.5] {
            let g = GaussianDensity::diagonal(&[mean], &[1.0]).unwrap();
            let h = 1e-3;
            let n = (24.0 / h) as usize;
            // Trapezoid rule on [mean - 12, mean + 12].
            let mut total = 0.0;
            for i in 0..=n {
                let x = mean - 12.0 + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                total += w * g.log_density(&dv(&[x])).unwrap().exp();
            }
            assert!((total * h - 1.0).abs() < 1e-6);
        }
    }

    fn spd_block(seed: u64, d: usize) -> DMatrix<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(d, d) * 0.1
    }

    proptest! {
        #[test]
        fn conditioning_block_diagonal_returns_marginal(
            seed in any::<u64>(), d_free in 1usize..5, d_obs in 1usize..4,
            value in proptest::collection::vec(-10.0f64..10.0, 4),
        ) {
            let d = d_free + d_obs;
            let mut cov = DMatrix::zeros(d, d);
            cov.view_mut((0, 0), (d_free, d_free)).copy_from(&spd_block(seed, d_free));
            cov.view_mut((d_free, d_free), (d_obs, d_obs))
                .copy_from(&spd_block(seed.wrapping_add(1), d_obs));
            let mean = DVector::from_fn(d, |i, _| i as f64);
            let joint = GaussianDensity::new(mean.clone(), cov.clone()).unwrap();
            let observed: Vec<usize> = (d_free..d).collect();
            let c = joint
                .condition(&observed, &DVector::from_column_slice(&value[..d_obs]))
                .unwrap();
            let free_cov = cov.view((0, 0), (d_free, d_free)).into_owned();
            prop_assert!((c.cov() - free_cov).amax() < 1e-10);
            prop_assert!((c.mean() - mean.rows(0, d_free)).amax() < 1e-10);
        }
    }
}
