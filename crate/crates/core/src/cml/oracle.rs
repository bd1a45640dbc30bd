//! Brute-force reference computations used to check the closed forms.
//!
//! Nothing here shares code with the induction routines: the Bayes oracle
//! propagates the Markov model forward and conditions a joint Gaussian, and
//! the joint oracle writes every state as a linear map of the independent
//! noises.

use nalgebra::{DMatrix, DVector};

use super::CmlModelParams;
use crate::error::{check_dim, Error, Result};
use crate::gaussian::{spd_inverse, symmetrize, GaussianDensity};
use crate::markov::MarkovModelParams;

/// Largest stacked dimension `(N+1)·d` the joint oracles accept.
pub const JOINT_ORACLE_MAX_DIM: usize = 64;

/// `p(s_k | s_{k-1}, s_N)` under a Markov model, by conditioning the joint
/// of `(s_k, s_N)` given `s_{k-1}`.
pub fn bayes_transition_oracle(
    markov: &MarkovModelParams,
    k: usize,
    s_prev: &DVector<f64>,
    s_n: &DVector<f64>,
) -> Result<GaussianDensity> {
    let n = markov.horizon();
    if k == 0 || k >= n {
        return Err(Error::IndexOutOfRange {
            index: k,
            lo: 1,
            hi: n - 1,
        });
    }
    let d = markov.dim();
    check_dim("previous state", d, s_prev.len())?;
    check_dim("final state", d, s_n.len())?;

    // Given s_{k-1}: s_k ~ N(M_{k,k-1} s_{k-1}, M_k). Step forward to N,
    // tracking Cov(s_k, s_j) and Cov(s_j).
    let mean_k = markov.transition(k) * s_prev;
    let cov_kk = markov.noise_cov(k).clone();
    let mut mean_j = mean_k.clone();
    let mut cross = cov_kk.clone();
    let mut cov_jj = cov_kk.clone();
    for j in k + 1..=n {
        let a = markov.transition(j);
        mean_j = a * mean_j;
        cross = cross * a.transpose();
        cov_jj = a * cov_jj * a.transpose() + markov.noise_cov(j);
    }

    let mut mean = DVector::zeros(2 * d);
    mean.rows_mut(0, d).copy_from(&mean_k);
    mean.rows_mut(d, d).copy_from(&mean_j);
    let mut cov = DMatrix::zeros(2 * d, 2 * d);
    cov.view_mut((0, 0), (d, d)).copy_from(&cov_kk);
    cov.view_mut((0, d), (d, d)).copy_from(&cross);
    cov.view_mut((d, 0), (d, d)).copy_from(&cross.transpose());
    cov.view_mut((d, d), (d, d)).copy_from(&symmetrize(&cov_jj));
    let joint = GaussianDensity::new(mean, cov)?;
    let observed: Vec<usize> = (d..2 * d).collect();
    joint.condition(&observed, s_n)
}

/// Exact joint density of `(x_0, ..., x_N)` under a CM_L model.
pub fn joint_covariance_oracle(model: &CmlModelParams) -> Result<GaussianDensity> {
    let n = model.horizon();
    let d = model.dim();
    let total = (n + 1) * d;
    if total > JOINT_ORACLE_MAX_DIM {
        return Err(Error::TooLarge {
            dim: total,
            max: JOINT_ORACLE_MAX_DIM,
        });
    }
    let b = model.boundary();
    // Row block k: coefficients of x_k - m_k on the noises e_0..e_N.
    let mut map = DMatrix::zeros(total, total);
    let eye = DMatrix::<f64>::identity(d, d);
    map.view_mut((n * d, n * d), (d, d)).copy_from(&eye);
    map.view_mut((0, 0), (d, d)).copy_from(&eye);
    map.view_mut((0, n * d), (d, d)).copy_from(&b.origin_gain);
    let dest_row = map.rows(n * d, d).into_owned();
    for k in 1..n {
        let t = model.interior(k);
        let prev = map.rows((k - 1) * d, d).into_owned();
        let mut row = &t.transition * prev + &t.destination_gain * &dest_row;
        let mut own = row.view_mut((0, k * d), (d, d));
        own += &eye;
        map.rows_mut(k * d, d).copy_from(&row);
    }

    let mut noise = DMatrix::zeros(total, total);
    noise.view_mut((0, 0), (d, d)).copy_from(&b.origin_noise);
    for k in 1..n {
        noise
            .view_mut((k * d, k * d), (d, d))
            .copy_from(&model.interior(k).noise_cov);
    }
    noise
        .view_mut((n * d, n * d), (d, d))
        .copy_from(&b.destination_cov);

    let cov = symmetrize(&(&map * noise * map.transpose()));
    let means = model.interior_means();
    let mean = DVector::from_iterator(total, means.iter().flat_map(|m| m.iter().copied()));
    GaussianDensity::new(mean, cov)
}

/// Precision matrix of `(x_0, ..., x_{N-1})` given `x_N`, from a stacked
/// joint with block size `d`.
pub fn conditional_precision_given_terminal(
    joint: &GaussianDensity,
    d: usize,
) -> Result<DMatrix<f64>> {
    let total = joint.dim();
    if d == 0 || total % d != 0 || total < 3 * d {
        return Err(Error::InvalidParameter(format!(
            "joint of dimension {total} is not a stack of at least three {d}-blocks"
        )));
    }
    let observed: Vec<usize> = (total - d..total).collect();
    let value = DVector::from_iterator(d, observed.iter().map(|&i| joint.mean()[i]));
    let conditional = joint.condition(&observed, &value)?;
    spd_inverse(conditional.cov(), "conditional covariance")
}

/// Largest magnitude of `precision` outside the block tridiagonal band.
pub fn block_tridiagonal_violation(precision: &DMatrix<f64>, d: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..precision.nrows() {
        for j in 0..precision.ncols() {
            if (i / d).abs_diff(j / d) > 1 {
                worst = worst.max(precision[(i, j)].abs());
            }
        }
    }
    worst
}
