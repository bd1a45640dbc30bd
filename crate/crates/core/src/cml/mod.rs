//! CM_L models: sequences that are Markov over `[0, N-1]` once `x_N` is
//! fixed.
//!
//! The model is
//!
//! ```text
//! x_N = μ_N + e_N
//! x_0 = μ_0 + G_{0,N} (x_N - μ_N) + e_0
//! x_k = G_{k,k-1} x_{k-1} + G_{k,N} x_N + e_k,   k in [1, N-1]
//! ```
//!
//! with independent `e_k ~ N(0, G_k)`. The interior parameters usually come
//! from [`induce_cml`], which turns a Markov motion model into the
//! conditional evolution it implies given its final state. The boundary
//! (`G_{0,N}`, `G_0`, `G_N` and the endpoint means) is free and normally
//! comes from an [`EndpointSpec`] via [`boundary_from_endpoints`].

mod induce;
mod oracle;

pub use induce::{boundary_from_endpoints, induce_cml};
pub use oracle::{
    bayes_transition_oracle, block_tridiagonal_violation, conditional_precision_given_terminal,
    joint_covariance_oracle, JOINT_ORACLE_MAX_DIM,
};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::gaussian::{spd_factor, spd_solve, standard_normal, symmetrize, GaussianDensity};
use crate::trajectory::Trajectory;

/// Joint Gaussian of the origin `x_0` and destination `x_N`.
#[derive(Debug, Clone)]
pub struct EndpointSpec {
    origin: GaussianDensity,
    destination: GaussianDensity,
    cross_cov: DMatrix<f64>,
}

impl EndpointSpec {
    /// `cross_cov` is `C_{0,N} = Cov(x_0, x_N)`; the stacked joint must be
    /// positive definite.
    pub fn new(
        origin: GaussianDensity,
        destination: GaussianDensity,
        cross_cov: DMatrix<f64>,
    ) -> Result<Self> {
        let d = origin.dim();
        check_dim("destination", d, destination.dim())?;
        check_dim("cross covariance rows", d, cross_cov.nrows())?;
        check_dim("cross covariance columns", d, cross_cov.ncols())?;
        stack_endpoints(
            origin.mean(),
            destination.mean(),
            origin.cov(),
            &cross_cov,
            destination.cov(),
        )
        .map_err(|_| Error::NotPositiveDefinite("endpoint joint covariance".into()))?;
        Ok(Self {
            origin,
            destination,
            cross_cov,
        })
    }

    /// Independent origin and destination.
    pub fn independent(origin: GaussianDensity, destination: GaussianDensity) -> Result<Self> {
        let d = origin.dim();
        Self::new(origin, destination, DMatrix::zeros(d, d))
    }

    pub fn origin(&self) -> &GaussianDensity {
        &self.origin
    }

    pub fn destination(&self) -> &GaussianDensity {
        &self.destination
    }

    pub fn cross_cov(&self) -> &DMatrix<f64> {
        &self.cross_cov
    }

    pub fn dim(&self) -> usize {
        self.origin.dim()
    }

    /// Density of the stacked `[x_0; x_N]`.
    pub fn joint(&self) -> GaussianDensity {
        stack_endpoints(
            self.origin.mean(),
            self.destination.mean(),
            self.origin.cov(),
            &self.cross_cov,
            self.destination.cov(),
        )
        .expect("validated at construction")
    }
}

fn stack_endpoints(
    mu0: &DVector<f64>,
    mun: &DVector<f64>,
    c0: &DMatrix<f64>,
    c0n: &DMatrix<f64>,
    cn: &DMatrix<f64>,
) -> Result<GaussianDensity> {
    let d = mu0.len();
    let mut mean = DVector::zeros(2 * d);
    mean.rows_mut(0, d).copy_from(mu0);
    mean.rows_mut(d, d).copy_from(mun);
    let mut cov = DMatrix::zeros(2 * d, 2 * d);
    cov.view_mut((0, 0), (d, d)).copy_from(c0);
    cov.view_mut((0, d), (d, d)).copy_from(c0n);
    cov.view_mut((d, 0), (d, d)).copy_from(&c0n.transpose());
    cov.view_mut((d, d), (d, d)).copy_from(cn);
    GaussianDensity::new(mean, cov)
}

/// Interior parameters `(G_{k,k-1}, G_{k,N}, G_k)` for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorTriple {
    /// `G_{k,k-1}`
    pub transition: DMatrix<f64>,
    /// `G_{k,N}`
    pub destination_gain: DMatrix<f64>,
    /// `G_k`
    pub noise_cov: DMatrix<f64>,
}

/// Boundary parameters of a CM_L model.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    /// `G_{0,N}`
    pub origin_gain: DMatrix<f64>,
    /// `G_0`
    pub origin_noise: DMatrix<f64>,
    /// `G_N`
    pub destination_cov: DMatrix<f64>,
    pub origin_mean: DVector<f64>,
    pub destination_mean: DVector<f64>,
}

/// Outcome of [`CmlModelParams::check_reciprocal`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReciprocityCheck {
    pub holds: bool,
    /// Largest residual relative to `1 + ‖G_k⁻¹ G_{k,N}‖`.
    pub max_residual: f64,
}

/// A validated CM_L model over `[0, N]`.
#[derive(Debug, Clone)]
pub struct CmlModelParams {
    interior: Vec<InteriorTriple>,
    boundary: Boundary,
    interior_factors: Vec<DMatrix<f64>>,
    origin_factor: DMatrix<f64>,
    destination_factor: DMatrix<f64>,
}

impl CmlModelParams {
    /// Pairs interior triples for `k = 1..N-1` with any boundary of the
    /// same dimension.
    pub fn assemble(interior: Vec<InteriorTriple>, boundary: Boundary) -> Result<Self> {
        if interior.is_empty() {
            return Err(Error::InvalidParameter(
                "CM_L model needs horizon N >= 2".into(),
            ));
        }
        let d = boundary.origin_mean.len();
        check_dim("destination mean", d, boundary.destination_mean.len())?;
        for m in [
            &boundary.origin_gain,
            &boundary.origin_noise,
            &boundary.destination_cov,
        ] {
            check_dim("boundary matrix rows", d, m.nrows())?;
            check_dim("boundary matrix columns", d, m.ncols())?;
        }
        for t in &interior {
            for m in [&t.transition, &t.destination_gain, &t.noise_cov] {
                check_dim("interior matrix rows", d, m.nrows())?;
                check_dim("interior matrix columns", d, m.ncols())?;
            }
        }
        let interior_factors = interior
            .iter()
            .enumerate()
            .map(|(i, t)| Ok(spd_factor(&t.noise_cov, &format!("G_{}", i + 1))?.unpack()))
            .collect::<Result<Vec<_>>>()?;
        let origin_factor = spd_factor(&boundary.origin_noise, "G_0")?.unpack();
        let destination_factor = spd_factor(&boundary.destination_cov, "G_N")?.unpack();
        let interior = interior
            .into_iter()
            .map(|t| InteriorTriple {
                noise_cov: symmetrize(&t.noise_cov),
                ..t
            })
            .collect();
        let boundary = Boundary {
            origin_noise: symmetrize(&boundary.origin_noise),
            destination_cov: symmetrize(&boundary.destination_cov),
            ..boundary
        };
        Ok(Self {
            interior,
            boundary,
            interior_factors,
            origin_factor,
            destination_factor,
        })
    }

    /// CM_L model induced by `markov` with the given endpoint density.
    pub fn induced(markov: &crate::markov::MarkovModelParams, endpoints: &EndpointSpec) -> Result<Self> {
        check_dim("endpoint spec", markov.dim(), endpoints.dim())?;
        Self::assemble(induce_cml(markov)?, boundary_from_endpoints(endpoints)?)
    }

    pub fn horizon(&self) -> usize {
        self.interior.len() + 1
    }

    pub fn dim(&self) -> usize {
        self.boundary.origin_mean.len()
    }

    /// Triple for `k` in `[1, N-1]`.
    pub fn interior(&self, k: usize) -> &InteriorTriple {
        &self.interior[k - 1]
    }

    pub fn interior_triples(&self) -> &[InteriorTriple] {
        &self.interior
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    /// Same interior, different boundary.
    pub fn with_boundary(&self, boundary: Boundary) -> Result<Self> {
        Self::assemble(self.interior.clone(), boundary)
    }

    /// Mean sequence `m_0 = μ_0`, `m_k = G_{k,k-1} m_{k-1} + G_{k,N} μ_N`,
    /// `m_N = μ_N`. `m_{N-1}` propagated one more step need not equal μ_N.
    pub fn interior_means(&self) -> Vec<DVector<f64>> {
        let mu_n = &self.boundary.destination_mean;
        let mut means = Vec::with_capacity(self.horizon() + 1);
        means.push(self.boundary.origin_mean.clone());
        for t in &self.interior {
            let prev = means.last().expect("nonempty");
            let next = &t.transition * prev + &t.destination_gain * mu_n;
            means.push(next);
        }
        means.push(mu_n.clone());
        means
    }

    /// Prior of the stacked `[x_0; x_N]`.
    pub fn endpoint_joint(&self) -> GaussianDensity {
        let b = &self.boundary;
        let cross = &b.origin_gain * &b.destination_cov;
        let c0 = &cross * b.origin_gain.transpose() + &b.origin_noise;
        stack_endpoints(
            &b.origin_mean,
            &b.destination_mean,
            &symmetrize(&c0),
            &cross,
            &b.destination_cov,
        )
        .expect("sum of SPD terms")
    }

    /// `p(x_k | x_{k-1}, x_N)` for `k` in `[1, N-1]`.
    pub fn transition_density(
        &self,
        k: usize,
        prev: &DVector<f64>,
        destination: &DVector<f64>,
    ) -> Result<GaussianDensity> {
        if k == 0 || k >= self.horizon() {
            return Err(Error::IndexOutOfRange {
                index: k,
                lo: 1,
                hi: self.horizon() - 1,
            });
        }
        let t = self.interior(k);
        GaussianDensity::new(
            &t.transition * prev + &t.destination_gain * destination,
            t.noise_cov.clone(),
        )
    }

    /// Draws `x_N` first, then `x_0`, then the interior forward.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Trajectory {
        let d = self.dim();
        let n = self.horizon();
        let b = &self.boundary;
        let means = self.interior_means();

        let dest_dev = &self.destination_factor * standard_normal(d, rng);
        let origin_dev = &b.origin_gain * &dest_dev + &self.origin_factor * standard_normal(d, rng);

        let mut states = Vec::with_capacity(n + 1);
        states.push(&b.origin_mean + &origin_dev);
        let mut dev = origin_dev;
        for (k, t) in self.interior.iter().enumerate() {
            dev = &t.transition * &dev
                + &t.destination_gain * &dest_dev
                + &self.interior_factors[k] * standard_normal(d, rng);
            states.push(&means[k + 1] + &dev);
        }
        states.push(&b.destination_mean + dest_dev);
        Trajectory::new(states).expect("consistent dimensions")
    }

    /// Tests `G_k⁻¹ G_{k,N} = G_{k+1,k}ᵀ G_{k+1}⁻¹ G_{k+1,N}` for
    /// `k` in `[1, N-2]`. Vacuously true when `N = 2`.
    pub fn check_reciprocal(&self, tol: f64) -> ReciprocityCheck {
        let mut max_residual = 0.0f64;
        for k in 1..self.horizon().saturating_sub(1) {
            let here = self.interior(k);
            let next = self.interior(k + 1);
            let lhs = spd_solve(&here.noise_cov, &here.destination_gain, "G_k")
                .expect("validated at construction");
            let rhs = next.transition.transpose()
                * spd_solve(&next.noise_cov, &next.destination_gain, "G_{k+1}")
                    .expect("validated at construction");
            let residual = (&lhs - rhs).norm() / (1.0 + lhs.norm());
            max_residual = max_residual.max(residual);
        }
        ReciprocityCheck {
            holds: max_residual <= tol,
            max_residual,
        }
    }

    /// Tests the extra boundary identity
    /// `G_0⁻¹ G_{0,N} = G_{1,0}ᵀ G_1⁻¹ G_{1,N}` that makes a reciprocal
    /// CM_L model Markov.
    pub fn check_markov(&self, tol: f64) -> Result<bool> {
        let rec = self.check_reciprocal(tol);
        if !rec.holds {
            return Err(Error::PreconditionViolated(format!(
                "model is not reciprocal (residual {:.3e})",
                rec.max_residual
            )));
        }
        Ok(self.markov_residual() <= tol)
    }

    /// Relative residual of the Markov boundary identity.
    pub fn markov_residual(&self) -> f64 {
        let b = &self.boundary;
        let first = self.interior(1);
        let lhs = spd_solve(&b.origin_noise, &b.origin_gain, "G_0").expect("validated");
        let rhs = first.transition.transpose()
            * spd_solve(&first.noise_cov, &first.destination_gain, "G_1").expect("validated");
        (&lhs - rhs).norm() / (1.0 + lhs.norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::MarkovModelParams;
    use nalgebra::dmatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn walk(n: usize) -> MarkovModelParams {
        MarkovModelParams::time_invariant(
            dmatrix![1.0],
            dmatrix![1.0],
            n,
            GaussianDensity::diagonal(&[0.0], &[1.0]).unwrap(),
        )
        .unwrap()
    }

    fn scalar_boundary(g0n: f64, g0: f64, gn: f64, mu0: f64, mun: f64) -> Boundary {
        Boundary {
            origin_gain: dmatrix![g0n],
            origin_noise: dmatrix![g0],
            destination_cov: dmatrix![gn],
            origin_mean: dv(&[mu0]),
            destination_mean: dv(&[mun]),
        }
    }

    #[test]
    fn endpoint_spec_rejects_singular_joint() {
        let one = GaussianDensity::diagonal(&[0.0], &[1.0]).unwrap();
        assert!(EndpointSpec::new(one.clone(), one.clone(), dmatrix![1.0]).is_err());
        assert!(EndpointSpec::new(one.clone(), one, dmatrix![0.5]).is_ok());
    }

    #[test]
    fn assemble_minimal_and_mismatched() {
        let interior = induce_cml(&walk(2)).unwrap();
        let m = CmlModelParams::assemble(interior.clone(), scalar_boundary(0.0, 1.0, 1.0, 0.0, 0.0))
            .unwrap();
        assert_eq!(m.horizon(), 2);
        let wide = Boundary {
            origin_mean: dv(&[0.0, 0.0]),
            ..scalar_boundary(0.0, 1.0, 1.0, 0.0, 0.0)
        };
        assert!(matches!(
            CmlModelParams::assemble(interior.clone(), wide),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(CmlModelParams::assemble(vec![], scalar_boundary(0.0, 1.0, 1.0, 0.0, 0.0)).is_err());
        assert!(matches!(
            CmlModelParams::assemble(interior, scalar_boundary(0.0, 0.0, 1.0, 0.0, 0.0)),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn reciprocal_hand_arithmetic_n3() {
        let m = CmlModelParams::assemble(
            induce_cml(&walk(3)).unwrap(),
            scalar_boundary(0.0, 1.0, 1.0, 0.0, 0.0),
        )
        .unwrap();
        // G_1⁻¹ G_{1,N} = 1.5 / 3 = 0.5 and G_{2,1} G_2⁻¹ G_{2,N} = 0.5 * 2 * 0.5.
        let t1 = m.interior(1);
        let t2 = m.interior(2);
        let lhs = t1.destination_gain[(0, 0)] / t1.noise_cov[(0, 0)];
        let rhs = t2.transition[(0, 0)] * t2.destination_gain[(0, 0)] / t2.noise_cov[(0, 0)];
        assert!((lhs - 0.5).abs() < 1e-14 && (rhs - 0.5).abs() < 1e-14);
        let check = m.check_reciprocal(1e-9);
        assert!(check.holds && check.max_residual < 1e-12);
    }

    #[test]
    fn perturbation_breaks_reciprocity() {
        let mut interior = induce_cml(&walk(5)).unwrap();
        interior[1].destination_gain[(0, 0)] += 0.1;
        let m = CmlModelParams::assemble(interior, scalar_boundary(0.0, 1.0, 1.0, 0.0, 0.0))
            .unwrap();
        assert!(!m.check_reciprocal(1e-9).holds);
        assert!(matches!(m.check_markov(1e-9), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn horizon_two_is_vacuously_reciprocal() {
        let m = CmlModelParams::assemble(
            induce_cml(&walk(2)).unwrap(),
            scalar_boundary(0.3, 1.0, 2.0, 0.0, 0.0),
        )
        .unwrap();
        assert_eq!(
            m.check_reciprocal(1e-9),
            ReciprocityCheck {
                holds: true,
                max_residual: 0.0
            }
        );
    }

    #[test]
    fn markov_check_trivial_zero_gains() {
        let interior = vec![
            InteriorTriple {
                transition: dmatrix![0.7],
                destination_gain: dmatrix![0.0],
                noise_cov: dmatrix![1.0],
            };
            3
        ];
        let m = CmlModelParams::assemble(interior, scalar_boundary(0.0, 1.0, 1.0, 0.0, 0.0))
            .unwrap();
        assert_eq!(m.check_markov(1e-9), Ok(true));
    }

    #[test]
    fn markov_check_recovers_source_law() {
        let markov = walk(4);
        let m = CmlModelParams::induced(&markov, &markov.endpoint_spec().unwrap()).unwrap();
        assert_eq!(m.check_markov(1e-9), Ok(true));
        // Independent endpoints are not Markov for a random walk.
        let indep = m
            .with_boundary(scalar_boundary(0.0, 1.0, 5.0, 0.0, 0.0))
            .unwrap();
        assert_eq!(indep.check_markov(1e-9), Ok(false));
    }

    #[test]
    fn transition_density_index_checks() {
        let m = CmlModelParams::assemble(
            induce_cml(&walk(3)).unwrap(),
            scalar_boundary(0.0, 1.0, 1.0, 0.0, 0.0),
        )
        .unwrap();
        assert!(m.transition_density(0, &dv(&[0.0]), &dv(&[0.0])).is_err());
        assert!(m.transition_density(3, &dv(&[0.0]), &dv(&[0.0])).is_err());
        let p = m.transition_density(2, &dv(&[1.0]), &dv(&[3.0])).unwrap();
        assert!((p.mean()[0] - 2.0).abs() < 1e-14);
        assert!((p.cov()[(0, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn pinned_bridge_midpoint() {
        let m = CmlModelParams::assemble(
            induce_cml(&walk(2)).unwrap(),
            scalar_boundary(0.0, 1e-6, 1e-6, 0.0, 2.0),
        )
        .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let runs = 10_000;
        let mids: Vec<f64> = (0..runs).map(|_| m.sample(&mut rng).state(1)[0]).collect();
        let mean = mids.iter().sum::<f64>() / runs as f64;
        let var = mids.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
        // N(1, 0.5 + O(1e-6)) from the bridge formula.
        let expect_var = 0.5 + 0.25 * 1e-6 + 0.25 * 1e-6;
        assert!((mean - 1.0).abs() < 3.0 * (expect_var / runs as f64).sqrt());
        assert!((var - expect_var).abs() < 3.0 * expect_var * (2.0 / runs as f64).sqrt());
    }

    #[test]
    fn interior_means_follow_recursion() {
        let markov = walk(4);
        let m = CmlModelParams::assemble(
            induce_cml(&markov).unwrap(),
            scalar_boundary(0.0, 1.0, 1.0, 0.0, 8.0),
        )
        .unwrap();
        let means = m.interior_means();
        assert_eq!(means.len(), 5);
        // Random-walk bridge mean is linear between the endpoint means.
        for (k, v) in means.iter().enumerate() {
            assert!((v[0] - 2.0 * k as f64).abs() < 1e-12);
        }
    }
}
