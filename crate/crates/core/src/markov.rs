//! Gauss-Markov motion models `x_k = M_{k,k-1} x_{k-1} + e_k`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::cml::EndpointSpec;
use crate::error::{check_dim, Error, Result};
use crate::gaussian::{spd_factor, standard_normal, symmetrize, GaussianDensity};
use crate::trajectory::Trajectory;

/// Per-step transitions and noise covariances over `[1, N]` plus the
/// density of `x_0`.
#[derive(Debug, Clone)]
pub struct MarkovModelParams {
    transitions: Vec<DMatrix<f64>>,
    noise_covs: Vec<DMatrix<f64>>,
    noise_factors: Vec<DMatrix<f64>>,
    initial: GaussianDensity,
}

impl MarkovModelParams {
    /// `transitions[k-1]` is `M_{k,k-1}` and `noise_covs[k-1]` is `M_k`.
    pub fn new(
        transitions: Vec<DMatrix<f64>>,
        noise_covs: Vec<DMatrix<f64>>,
        initial: GaussianDensity,
    ) -> Result<Self> {
        let n = transitions.len();
        if n < 2 {
            return Err(Error::InvalidParameter(format!("horizon {n} < 2")));
        }
        check_dim("noise covariance count", n, noise_covs.len())?;
        let d = initial.dim();
        for (a, q) in transitions.iter().zip(&noise_covs) {
            check_dim("transition rows", d, a.nrows())?;
            check_dim("transition columns", d, a.ncols())?;
            check_dim("noise covariance rows", d, q.nrows())?;
            check_dim("noise covariance columns", d, q.ncols())?;
        }
        let noise_factors = noise_covs
            .iter()
            .enumerate()
            .map(|(i, q)| {
                Ok(spd_factor(q, &format!("Markov noise covariance M_{}", i + 1))?.unpack())
            })
            .collect::<Result<Vec<_>>>()?;
        let noise_covs = noise_covs.iter().map(symmetrize).collect();
        Ok(Self {
            transitions,
            noise_covs,
            noise_factors,
            initial,
        })
    }

    /// Same transition and noise covariance at every step.
    pub fn time_invariant(
        transition: DMatrix<f64>,
        noise_cov: DMatrix<f64>,
        horizon: usize,
        initial: GaussianDensity,
    ) -> Result<Self> {
        Self::new(
            vec![transition; horizon],
            vec![noise_cov; horizon],
            initial,
        )
    }

    pub fn horizon(&self) -> usize {
        self.transitions.len()
    }

    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    /// `M_{k,k-1}` for `k` in `[1, N]`.
    pub fn transition(&self, k: usize) -> &DMatrix<f64> {
        &self.transitions[k - 1]
    }

    /// `M_k = Cov(e_k)` for `k` in `[1, N]`.
    pub fn noise_cov(&self, k: usize) -> &DMatrix<f64> {
        &self.noise_covs[k - 1]
    }

    pub fn initial(&self) -> &GaussianDensity {
        &self.initial
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Trajectory {
        let d = self.dim();
        let mut states = Vec::with_capacity(self.horizon() + 1);
        states.push(self.initial.sample(rng));
        for k in 1..=self.horizon() {
            let noise = &self.noise_factors[k - 1] * standard_normal(d, rng);
            let next = self.transition(k) * &states[k - 1] + noise;
            states.push(next);
        }
        Trajectory::new(states).expect("consistent dimensions")
    }

    /// `M_{N|k}` and `C_{N|k}` by backward recursion.
    pub fn terminal_propagation(&self) -> TerminalPropagation {
        let n = self.horizon();
        let d = self.dim();
        let mut gain = vec![DMatrix::identity(d, d); n + 1];
        let mut cov = vec![DMatrix::zeros(d, d); n];
        for k in (0..n).rev() {
            gain[k] = &gain[k + 1] * self.transition(k + 1);
            let spread = &gain[k + 1] * self.noise_cov(k + 1) * gain[k + 1].transpose();
            cov[k] = if k + 1 == n {
                spread
            } else {
                symmetrize(&(spread + &cov[k + 1]))
            };
        }
        TerminalPropagation { gain, cov }
    }

    /// Marginal of `x_N` under the Markov law.
    pub fn endpoint_density(&self) -> GaussianDensity {
        let tp = self.terminal_propagation();
        let m = tp.gain(0);
        let mean = m * self.initial.mean();
        let cov = m * self.initial.cov() * m.transpose() + tp.cov(0);
        GaussianDensity::new(mean, symmetrize(&cov)).expect("sum of SPD terms")
    }

    /// The joint of `(x_0, x_N)` under the Markov law as an endpoint spec.
    pub fn endpoint_spec(&self) -> Result<EndpointSpec> {
        let m = self.terminal_propagation().gain(0).clone();
        let cross = self.initial.cov() * m.transpose();
        EndpointSpec::new(self.initial.clone(), self.endpoint_density(), cross)
    }

    /// `E[x_k]` for `k` in `[0, N]`.
    pub fn state_means(&self) -> Vec<DVector<f64>> {
        let mut means = vec![self.initial.mean().clone()];
        for k in 1..=self.horizon() {
            let next = self.transition(k) * &means[k - 1];
            means.push(next);
        }
        means
    }

    /// Exact joint density of the stacked `(x_0, ..., x_N)`, built by the
    /// forward covariance recursion. Test-scale oracle; capped at
    /// [`crate::cml::JOINT_ORACLE_MAX_DIM`] dimensions.
    pub fn joint_density(&self) -> Result<GaussianDensity> {
        let n = self.horizon();
        let d = self.dim();
        let total = (n + 1) * d;
        if total > crate::cml::JOINT_ORACLE_MAX_DIM {
            return Err(Error::TooLarge {
                dim: total,
                max: crate::cml::JOINT_ORACLE_MAX_DIM,
            });
        }
        let mut cov = DMatrix::zeros(total, total);
        cov.view_mut((0, 0), (d, d)).copy_from(self.initial.cov());
        for k in 1..=n {
            let a = self.transition(k);
            for j in 0..k {
                // Cov(x_j, x_k) = Cov(x_j, x_{k-1}) M_{k,k-1}ᵀ
                let prev = cov.view((j * d, (k - 1) * d), (d, d)).into_owned();
                let block = prev * a.transpose();
                cov.view_mut((j * d, k * d), (d, d)).copy_from(&block);
                cov.view_mut((k * d, j * d), (d, d)).copy_from(&block.transpose());
            }
            let prev = cov.view(((k - 1) * d, (k - 1) * d), (d, d)).into_owned();
            let block = symmetrize(&(a * prev * a.transpose() + self.noise_cov(k)));
            cov.view_mut((k * d, k * d), (d, d)).copy_from(&block);
        }
        let means = self.state_means();
        let mean = DVector::from_iterator(total, means.iter().flat_map(|m| m.iter().copied()));
        GaussianDensity::new(mean, cov)
    }
}

/// Terminal propagation quantities: `p(x_N | x_k) = N(M_{N|k} x_k, C_{N|k})`.
#[derive(Debug, Clone)]
pub struct TerminalPropagation {
    gain: Vec<DMatrix<f64>>,
    cov: Vec<DMatrix<f64>>,
}

impl TerminalPropagation {
    /// `M_{N|k}` for `k` in `[0, N]`; identity at `k = N`.
    pub fn gain(&self, k: usize) -> &DMatrix<f64> {
        &self.gain[k]
    }

    /// `C_{N|k}` for `k` in `[0, N-1]`.
    pub fn cov(&self, k: usize) -> &DMatrix<f64> {
        &self.cov[k]
    }

    pub fn horizon(&self) -> usize {
        self.cov.len()
    }
}

/// Per-axis nearly-constant-velocity blocks `(F, Q)`.
pub fn cv_axis(dt: f64, q: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let f = DMatrix::from_row_slice(2, 2, &[1.0, dt, 0.0, 1.0]);
    let noise = DMatrix::from_row_slice(
        2,
        2,
        &[
            dt.powi(3) / 3.0,
            dt.powi(2) / 2.0,
            dt.powi(2) / 2.0,
            dt,
        ],
    ) * q;
    (f, noise)
}

fn block_diag2(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(4, 4);
    out.view_mut((0, 0), (2, 2)).copy_from(a);
    out.view_mut((2, 2), (2, 2)).copy_from(a);
    out
}

/// Planar nearly-constant-velocity model over the `[x, ẋ, y, ẏ]` state.
pub fn build_cv_model(
    dt: f64,
    q: f64,
    horizon: usize,
    origin: GaussianDensity,
) -> Result<MarkovModelParams> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise intensity {q} must be positive"
        )));
    }
    check_dim("constant-velocity origin", 4, origin.dim())?;
    let (f, noise) = cv_axis(dt, q);
    MarkovModelParams::time_invariant(block_diag2(&f), block_diag2(&noise), horizon, origin)
}
