//! Filtering and prediction for CM_L and Markov models.
//!
//! The CM_L recursion references the future state `x_N`, so the filter runs
//! on the stacked state `[x_k; x_N]` whose transition
//!
//! ```text
//! [x_{k+1}]   [G_{k+1,k}  G_{k+1,N}] [x_k]   [e_{k+1}]
//! [x_N    ] = [0          I        ] [x_N] + [0      ]
//! ```
//!
//! is causal. The interior mean sequence obeys the same recursion, so the
//! stacked transition carries the nonzero means without an extra offset.
//! Measurement updates use the Joseph form.

use nalgebra::{DMatrix, DVector};

use crate::cml::CmlModelParams;
use crate::error::{check_dim, Error, Result};
use crate::gaussian::{spd_factor, standard_normal, symmetrize, GaussianDensity};
use crate::markov::MarkovModelParams;

/// Linear measurement `z_k = H x_k + v_k` with `v_k ~ N(0, R)`.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    h: DMatrix<f64>,
    r: DMatrix<f64>,
    r_factor: DMatrix<f64>,
}

impl MeasurementModel {
    pub fn new(h: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        check_dim("measurement noise rows", h.nrows(), r.nrows())?;
        check_dim("measurement noise columns", h.nrows(), r.ncols())?;
        let r_factor = spd_factor(&r, "measurement noise covariance")?.unpack();
        let sv = h.clone().singular_values();
        let top = sv.max();
        let rank = sv.iter().filter(|&&s| s > 1e-9 * top.max(1.0)).count();
        if h.nrows() > h.ncols() || rank < h.nrows() {
            return Err(Error::InvalidParameter(
                "measurement matrix must have full row rank".into(),
            ));
        }
        Ok(Self {
            h,
            r: symmetrize(&r),
            r_factor,
        })
    }

    /// Position-only sensor for the `[x, ẋ, y, ẏ]` layout.
    pub fn position(noise_cov: DMatrix<f64>) -> Result<Self> {
        let h = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        Self::new(h, noise_cov)
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn state_dim(&self) -> usize {
        self.h.ncols()
    }

    pub fn meas_dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, x: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        &self.h * x + &self.r_factor * standard_normal(self.meas_dim(), rng)
    }
}

/// Joseph-form update of `(mean, cov)` with observation matrix `h`.
fn joseph_update(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
    z: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_dim("measurement", h.nrows(), z.len())?;
    let pht = cov * h.transpose();
    let innovation_cov = symmetrize(&(h * &pht + r));
    let chol = spd_factor(&innovation_cov, "innovation covariance")?;
    let gain = chol.solve(&pht.transpose()).transpose();
    let mean = mean + &gain * (z - h * mean);
    let n = cov.nrows();
    let i_kh = DMatrix::identity(n, n) - &gain * h;
    let cov = &i_kh * cov * i_kh.transpose() + &gain * r * gain.transpose();
    Ok((mean, symmetrize(&cov)))
}

fn nees_of(mean: &DVector<f64>, cov: &DMatrix<f64>, truth: &DVector<f64>) -> Result<f64> {
    check_dim("truth state", mean.len(), truth.len())?;
    let err = truth - mean;
    let chol = spd_factor(cov, "belief covariance")?;
    Ok(err.dot(&chol.solve(&err)))
}

/// Gaussian belief over `[x_k; x_N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub k: usize,
}

impl AugmentedBelief {
    /// Prior of `[x_0; x_N]` implied by the boundary equations.
    pub fn prior(model: &CmlModelParams) -> Self {
        let joint = model.endpoint_joint();
        Self {
            mean: joint.mean().clone(),
            cov: joint.cov().clone(),
            k: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len() / 2
    }

    /// Time update from `k` to `k + 1`; allowed while `k + 1 <= N - 1`.
    pub fn predict(&self, model: &CmlModelParams) -> Result<Self> {
        let n = model.horizon();
        let d = model.dim();
        check_dim("augmented belief", 2 * d, self.mean.len())?;
        if self.k + 1 >= n {
            return Err(Error::HorizonExceeded {
                k: self.k,
                horizon: n,
            });
        }
        let t = model.interior(self.k + 1);
        let mut a = DMatrix::identity(2 * d, 2 * d);
        a.view_mut((0, 0), (d, d)).copy_from(&t.transition);
        a.view_mut((0, d), (d, d)).copy_from(&t.destination_gain);
        let mut cov = &a * &self.cov * a.transpose();
        let mut top = cov.view_mut((0, 0), (d, d));
        top += &t.noise_cov;
        Ok(Self {
            mean: &a * &self.mean,
            cov: symmetrize(&cov),
            k: self.k + 1,
        })
    }

    /// Measurement update with `z = H x_k + v`.
    pub fn update(&self, meas: &MeasurementModel, z: &DVector<f64>) -> Result<Self> {
        let d = self.dim();
        check_dim("measurement model state", d, meas.state_dim())?;
        let mut h = DMatrix::zeros(meas.meas_dim(), 2 * d);
        h.view_mut((0, 0), (meas.meas_dim(), d)).copy_from(meas.h());
        let (mean, cov) = joseph_update(&self.mean, &self.cov, &h, meas.r(), z)?;
        Ok(Self { mean, cov, k: self.k })
    }

    /// Marginal of the current state `x_k`.
    pub fn state(&self) -> GaussianDensity {
        self.block(0)
    }

    /// Marginal of the destination `x_N`.
    pub fn destination(&self) -> GaussianDensity {
        self.block(self.dim())
    }

    /// Marginal of the whole stacked vector.
    pub fn density(&self) -> GaussianDensity {
        GaussianDensity::new(self.mean.clone(), self.cov.clone()).expect("filter keeps SPD")
    }

    fn block(&self, start: usize) -> GaussianDensity {
        let d = self.dim();
        GaussianDensity::new(
            self.mean.rows(start, d).into_owned(),
            self.cov.view((start, start), (d, d)).into_owned(),
        )
        .expect("filter keeps SPD")
    }

    /// Predictive marginals of `x_k, ..., x_until` without further
    /// measurements. The entry for `N` is the destination block.
    pub fn predict_path(&self, model: &CmlModelParams, until: usize) -> Result<Vec<GaussianDensity>> {
        let n = model.horizon();
        if until > n {
            return Err(Error::HorizonExceeded { k: until, horizon: n });
        }
        if until < self.k {
            return Err(Error::IndexOutOfRange {
                index: until,
                lo: self.k,
                hi: n,
            });
        }
        let mut out = Vec::with_capacity(until - self.k + 1);
        let mut belief = self.clone();
        loop {
            if belief.k == until {
                out.push(belief.state());
                break;
            }
            if belief.k + 1 == n {
                out.push(belief.state());
                out.push(belief.destination());
                break;
            }
            out.push(belief.state());
            belief = belief.predict(model)?;
        }
        Ok(out)
    }

    /// Predictive marginal of `x_target` for `k <= target <= N`.
    pub fn predict_to(&self, model: &CmlModelParams, target: usize) -> Result<GaussianDensity> {
        if target == model.horizon() {
            if target < self.k {
                return Err(Error::IndexOutOfRange {
                    index: target,
                    lo: self.k,
                    hi: model.horizon(),
                });
            }
            return Ok(self.destination());
        }
        Ok(self
            .predict_path(model, target)?
            .pop()
            .expect("path is nonempty"))
    }

    /// Normalized estimation error squared of `[x_k; x_N]`.
    pub fn nees(&self, state: &DVector<f64>, destination: &DVector<f64>) -> Result<f64> {
        let d = self.dim();
        check_dim("truth state", d, state.len())?;
        check_dim("truth destination", d, destination.len())?;
        let mut truth = DVector::zeros(2 * d);
        truth.rows_mut(0, d).copy_from(state);
        truth.rows_mut(d, d).copy_from(destination);
        nees_of(&self.mean, &self.cov, &truth)
    }
}

/// Gaussian belief of a plain Kalman filter over `x_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub k: usize,
}

impl MarkovBelief {
    pub fn prior(model: &MarkovModelParams) -> Self {
        Self {
            mean: model.initial().mean().clone(),
            cov: model.initial().cov().clone(),
            k: 0,
        }
    }

    pub fn predict(&self, model: &MarkovModelParams) -> Result<Self> {
        if self.k >= model.horizon() {
            return Err(Error::HorizonExceeded {
                k: self.k,
                horizon: model.horizon(),
            });
        }
        let k = self.k + 1;
        let a = model.transition(k);
        Ok(Self {
            mean: a * &self.mean,
            cov: symmetrize(&(a * &self.cov * a.transpose() + model.noise_cov(k))),
            k,
        })
    }

    pub fn update(&self, meas: &MeasurementModel, z: &DVector<f64>) -> Result<Self> {
        check_dim("measurement model state", self.mean.len(), meas.state_dim())?;
        let (mean, cov) = joseph_update(&self.mean, &self.cov, meas.h(), meas.r(), z)?;
        Ok(Self { mean, cov, k: self.k })
    }

    pub fn state(&self) -> GaussianDensity {
        GaussianDensity::new(self.mean.clone(), self.cov.clone()).expect("filter keeps SPD")
    }

    pub fn predict_path(&self, model: &MarkovModelParams, until: usize) -> Result<Vec<GaussianDensity>> {
        let n = model.horizon();
        if until > n {
            return Err(Error::HorizonExceeded { k: until, horizon: n });
        }
        if until < self.k {
            return Err(Error::IndexOutOfRange {
                index: until,
                lo: self.k,
                hi: n,
            });
        }
        let mut out = vec![self.state()];
        let mut belief = self.clone();
        while belief.k < until {
            belief = belief.predict(model)?;
            out.push(belief.state());
        }
        Ok(out)
    }

    pub fn predict_to(&self, model: &MarkovModelParams, target: usize) -> Result<GaussianDensity> {
        Ok(self
            .predict_path(model, target)?
            .pop()
            .expect("path is nonempty"))
    }

    pub fn nees(&self, state: &DVector<f64>) -> Result<f64> {
        nees_of(&self.mean, &self.cov, state)
    }
}

/// Common step/predict surface of the two filters.
pub trait TrackingFilter {
    /// Current time index.
    fn time(&self) -> usize;
    fn predict(&mut self) -> Result<()>;
    fn update(&mut self, z: &DVector<f64>) -> Result<()>;
    /// Marginal of the current state.
    fn estimate(&self) -> GaussianDensity;
    /// Predictive marginals for `time()..=until`.
    fn predict_path(&self, until: usize) -> Result<Vec<GaussianDensity>>;

    fn predict_to(&self, target: usize) -> Result<GaussianDensity> {
        Ok(self
            .predict_path(target)?
            .pop()
            .expect("path is nonempty"))
    }
}

/// Augmented-state filter for a CM_L model.
#[derive(Debug, Clone)]
pub struct CmlFilter<'a> {
    model: &'a CmlModelParams,
    meas: &'a MeasurementModel,
    belief: AugmentedBelief,
}

impl<'a> CmlFilter<'a> {
    pub fn new(model: &'a CmlModelParams, meas: &'a MeasurementModel) -> Result<Self> {
        check_dim("measurement model state", model.dim(), meas.state_dim())?;
        Ok(Self {
            model,
            meas,
            belief: AugmentedBelief::prior(model),
        })
    }

    pub fn belief(&self) -> &AugmentedBelief {
        &self.belief
    }
}

impl TrackingFilter for CmlFilter<'_> {
    fn time(&self) -> usize {
        self.belief.k
    }

    fn predict(&mut self) -> Result<()> {
        self.belief = self.belief.predict(self.model)?;
        Ok(())
    }

    fn update(&mut self, z: &DVector<f64>) -> Result<()> {
        self.belief = self.belief.update(self.meas, z)?;
        Ok(())
    }

    fn estimate(&self) -> GaussianDensity {
        self.belief.state()
    }

    fn predict_path(&self, until: usize) -> Result<Vec<GaussianDensity>> {
        self.belief.predict_path(self.model, until)
    }
}

/// Plain Kalman filter over the Markov dynamics; the comparison baseline.
#[derive(Debug, Clone)]
pub struct MarkovFilter<'a> {
    model: &'a MarkovModelParams,
    meas: &'a MeasurementModel,
    belief: MarkovBelief,
}

impl<'a> MarkovFilter<'a> {
    pub fn new(model: &'a MarkovModelParams, meas: &'a MeasurementModel) -> Result<Self> {
        check_dim("measurement model state", model.dim(), meas.state_dim())?;
        Ok(Self {
            model,
            meas,
            belief: MarkovBelief::prior(model),
        })
    }

    pub fn belief(&self) -> &MarkovBelief {
        &self.belief
    }
}

/// Reference Kalman filter over the Markov model, started from its origin.
pub fn markov_reference_filter<'a>(
    model: &'a MarkovModelParams,
    meas: &'a MeasurementModel,
) -> Result<MarkovFilter<'a>> {
    MarkovFilter::new(model, meas)
}

impl TrackingFilter for MarkovFilter<'_> {
    fn time(&self) -> usize {
        self.belief.k
    }

    fn predict(&mut self) -> Result<()> {
        self.belief = self.belief.predict(self.model)?;
        Ok(())
    }

    fn update(&mut self, z: &DVector<f64>) -> Result<()> {
        self.belief = self.belief.update(self.meas, z)?;
        Ok(())
    }

    fn estimate(&self) -> GaussianDensity {
        self.belief.state()
    }

    fn predict_path(&self, until: usize) -> Result<Vec<GaussianDensity>> {
        self.belief.predict_path(self.model, until)
    }
}

/// Average Euclidean error between aligned truth and estimate positions.
pub fn aee(truth: &[[f64; 2]], estimates: &[[f64; 2]]) -> Result<f64> {
    check_dim("estimate runs", truth.len(), estimates.len())?;
    if truth.is_empty() {
        return Err(Error::InvalidParameter("no runs to average".into()));
    }
    let total: f64 = truth
        .iter()
        .zip(estimates)
        .map(|(t, e)| (t[0] - e[0]).hypot(t[1] - e[1]))
        .sum();
    Ok(total / truth.len() as f64)
}
