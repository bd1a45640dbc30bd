//! Randomized oracle suites shared by the `check` command and the test
//! targets.
//!
//! Random models follow one recipe: transitions with entries in `[-1, 1]`
//! rescaled to a spectral norm in `[0.3, 1.2]` (which bounds the spectral
//! radius by 1.2), and covariances `A Aᵀ + 0.1 I`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::cml::{
    bayes_transition_oracle, block_tridiagonal_violation, boundary_from_endpoints,
    conditional_precision_given_terminal, induce_cml, joint_covariance_oracle, Boundary,
    CmlModelParams, EndpointSpec, InteriorTriple,
};
use crate::error::Result;
use crate::gaussian::GaussianDensity;
use crate::markov::MarkovModelParams;
use crate::scenario::{
    fig1_statements, nees_consistency, run_indexed, simulate_fig1, substream, ScenarioConfig,
    ScenarioError,
};

/// Tolerance for the algebraic oracle comparisons.
pub const ORACLE_TOL: f64 = 1e-8;
/// Tolerance for the reciprocity residual of induced models.
pub const RECIPROCITY_TOL: f64 = 1e-9;

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DMatrix<f64> {
    let a = random_matrix(rng, d, d);
    &a * a.transpose() + DMatrix::identity(d, d) * 0.1
}

pub fn random_transition<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DMatrix<f64> {
    let a = random_matrix(rng, d, d);
    let norm = a.clone().singular_values().max().max(1e-12);
    a * (rng.random_range(0.3..1.2) / norm)
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, d: usize, span: f64) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.random_range(-span..span))
}

/// Time-varying Markov model of dimension `d` and horizon `n`.
pub fn random_markov_model<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> MarkovModelParams {
    let transitions = (0..n).map(|_| random_transition(rng, d)).collect();
    let noise = (0..n).map(|_| random_spd(rng, d)).collect();
    let initial = GaussianDensity::new(random_vector(rng, d, 5.0), random_spd(rng, d))
        .expect("SPD by construction");
    MarkovModelParams::new(transitions, noise, initial).expect("valid by construction")
}

/// Endpoint joint drawn as one `2d`-dimensional SPD matrix.
pub fn random_endpoint_spec<R: Rng + ?Sized>(rng: &mut R, d: usize) -> EndpointSpec {
    let joint = random_spd(rng, 2 * d);
    let origin = GaussianDensity::new(
        random_vector(rng, d, 5.0),
        joint.view((0, 0), (d, d)).into_owned(),
    )
    .expect("principal block of SPD");
    let destination = GaussianDensity::new(
        random_vector(rng, d, 5.0),
        joint.view((d, d), (d, d)).into_owned(),
    )
    .expect("principal block of SPD");
    EndpointSpec::new(origin, destination, joint.view((0, d), (d, d)).into_owned())
        .expect("SPD by construction")
}

/// Arbitrary (generally non-reciprocal) CM_L model.
pub fn random_cml_model<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> CmlModelParams {
    let interior = (1..n)
        .map(|_| InteriorTriple {
            transition: random_transition(rng, d),
            destination_gain: random_matrix(rng, d, d) * 0.5,
            noise_cov: random_spd(rng, d),
        })
        .collect();
    let boundary = Boundary {
        origin_gain: random_matrix(rng, d, d) * 0.5,
        origin_noise: random_spd(rng, d),
        destination_cov: random_spd(rng, d),
        origin_mean: random_vector(rng, d, 5.0),
        destination_mean: random_vector(rng, d, 5.0),
    };
    CmlModelParams::assemble(interior, boundary).expect("valid by construction")
}

fn rel(diff: f64, scale: f64) -> f64 {
    diff / scale.max(f64::MIN_POSITIVE)
}

/// One pass/fail line of an oracle suite.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

/// Closed-form induced transitions against the Bayes oracle.
///
/// Mean errors are relative to the larger of the two summands
/// `G_{k,k-1} s_{k-1}` and `G_{k,N} s_N` (or the mean itself), so that
/// cancellation near zero does not inflate the ratio. Covariance errors are
/// plain relative Frobenius errors.
pub fn oracle_equivalence(seed: u64, models: usize, points: usize) -> Result<Report> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let (mut worst_mean, mut worst_cov) = (0.0f64, 0.0f64);
    for _ in 0..models {
        let d = rng.random_range(1..=2);
        let n = rng.random_range(3..=8);
        let markov = random_markov_model(&mut rng, d, n);
        let interior = induce_cml(&markov)?;
        for _ in 0..points {
            let k = rng.random_range(1..n);
            let prev = random_vector(&mut rng, d, 5.0);
            let dest = random_vector(&mut rng, d, 5.0);
            let oracle = bayes_transition_oracle(&markov, k, &prev, &dest)?;
            let t = &interior[k - 1];
            let a = &t.transition * &prev;
            let b = &t.destination_gain * &dest;
            let mean = &a + &b;
            let scale = mean.norm().max(a.norm()).max(b.norm());
            worst_mean = worst_mean.max(rel((&mean - oracle.mean()).norm(), scale));
            worst_cov = worst_cov.max(rel(
                (&t.noise_cov - oracle.cov()).norm(),
                oracle.cov().norm(),
            ));
        }
    }
    Ok(Report {
        name: "oracle equivalence (Bayes vs closed form)",
        passed: worst_mean <= ORACLE_TOL && worst_cov <= ORACLE_TOL,
        detail: format!(
            "{models} models x {points} points, max rel mean err {worst_mean:.3e}, \
             max rel cov err {worst_cov:.3e}, tol {ORACLE_TOL:e}"
        ),
    })
}

/// Induced models are reciprocal; perturbed ones are not.
pub fn reciprocity(seed: u64, models: usize) -> Result<Report> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut perturbed_caught = 0;
    for _ in 0..models {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(3..=12);
        let markov = random_markov_model(&mut rng, d, n);
        let spec = random_endpoint_spec(&mut rng, d);
        let model = CmlModelParams::induced(&markov, &spec)?;
        worst = worst.max(model.check_reciprocal(RECIPROCITY_TOL).max_residual);

        let mut interior = model.interior_triples().to_vec();
        let k = rng.random_range(0..interior.len());
        let (i, j) = (rng.random_range(0..d), rng.random_range(0..d));
        interior[k].destination_gain[(i, j)] += 0.1;
        let broken = CmlModelParams::assemble(interior, model.boundary().clone())?;
        if !broken.check_reciprocal(RECIPROCITY_TOL).holds {
            perturbed_caught += 1;
        }
    }
    Ok(Report {
        name: "induced models are reciprocal",
        passed: worst < RECIPROCITY_TOL && perturbed_caught == models,
        detail: format!(
            "{models} models, max residual {worst:.3e} (tol {RECIPROCITY_TOL:e}), \
             perturbed rejected {perturbed_caught}/{models}"
        ),
    })
}

/// Precision of `(x_0..x_{N-1})` given `x_N` is block tridiagonal, for both
/// induced and arbitrary CM_L models.
pub fn cml_structure(seed: u64, models: usize) -> Result<Report> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut largest = 0usize;
    for i in 0..models {
        let d = rng.random_range(1..=4);
        let n = rng.random_range(3..=(64 / d - 1).min(15));
        let model = if i % 2 == 0 {
            let markov = random_markov_model(&mut rng, d, n);
            CmlModelParams::induced(&markov, &random_endpoint_spec(&mut rng, d))?
        } else {
            random_cml_model(&mut rng, d, n)
        };
        let joint = joint_covariance_oracle(&model)?;
        largest = largest.max(joint.dim());
        let precision = conditional_precision_given_terminal(&joint, d)?;
        worst = worst.max(block_tridiagonal_violation(&precision, d));
    }
    Ok(Report {
        name: "conditional precision is block tridiagonal",
        passed: worst < ORACLE_TOL,
        detail: format!(
            "{models} models up to {largest} dims, max off-band magnitude {worst:.3e}, \
             tol {ORACLE_TOL:e}"
        ),
    })
}

/// Induced interior plus the Markov model's own endpoint joint gives back
/// the Markov joint and passes the Markov check.
pub fn markov_recovery(seed: u64, models: usize) -> Result<Report> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let (mut worst_cov, mut worst_mean) = (0.0f64, 0.0f64);
    let mut markov_ok = 0;
    for _ in 0..models {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(2..=10);
        let markov = random_markov_model(&mut rng, d, n);
        let model = CmlModelParams::assemble(
            induce_cml(&markov)?,
            boundary_from_endpoints(&markov.endpoint_spec()?)?,
        )?;
        let a = joint_covariance_oracle(&model)?;
        let b = markov.joint_density()?;
        worst_cov = worst_cov.max(rel((a.cov() - b.cov()).norm(), b.cov().norm()));
        worst_mean = worst_mean.max(rel(
            (a.mean() - b.mean()).norm(),
            b.mean().norm().max(markov.initial().mean().norm()),
        ));
        if model.check_markov(RECIPROCITY_TOL)? {
            markov_ok += 1;
        }
    }
    Ok(Report {
        name: "Markov recovery",
        passed: worst_cov <= ORACLE_TOL && worst_mean <= ORACLE_TOL && markov_ok == models,
        detail: format!(
            "{models} models, max rel cov err {worst_cov:.3e}, max rel mean err \
             {worst_mean:.3e}, check_markov passed {markov_ok}/{models}"
        ),
    })
}

/// Swapping the boundary leaves every interior transition density intact.
pub fn endpoint_freedom(seed: u64, models: usize) -> Result<Report> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut unchanged = 0;
    for _ in 0..models {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(3..=10);
        let markov = random_markov_model(&mut rng, d, n);
        let a = CmlModelParams::induced(&markov, &random_endpoint_spec(&mut rng, d))?;
        let b = CmlModelParams::induced(&markov, &random_endpoint_spec(&mut rng, d))?;
        let prev = random_vector(&mut rng, d, 5.0);
        let dest = random_vector(&mut rng, d, 5.0);
        let same_triples = a.interior_triples() == b.interior_triples();
        let same_density = (1..n).all(|k| {
            a.transition_density(k, &prev, &dest).ok() == b.transition_density(k, &prev, &dest).ok()
        });
        if same_triples && same_density && a.boundary() != b.boundary() {
            unchanged += 1;
        }
    }
    Ok(Report {
        name: "endpoint freedom",
        passed: unchanged == models,
        detail: format!("interior unchanged under new boundary in {unchanged}/{models} models"),
    })
}

/// Every algebraic suite with its default size.
pub fn algebraic_suites(seed: u64) -> Result<Vec<Report>> {
    Ok(vec![
        oracle_equivalence(seed, 100, 10)?,
        reciprocity(seed.wrapping_add(1), 100)?,
        cml_structure(seed.wrapping_add(2), 60)?,
        markov_recovery(seed.wrapping_add(3), 60)?,
        endpoint_freedom(seed.wrapping_add(4), 30)?,
    ])
}

/// Sample moments of `x_N` under the configured CM_L model against the
/// destination density, entrywise at three standard errors. Standard errors
/// of covariance entries are estimated from the draws.
pub fn endpoint_pinning(config: &ScenarioConfig, samples: usize) -> std::result::Result<Report, ScenarioError> {
    let model = config.cml_model()?;
    let n = model.horizon();
    let d = model.dim();
    let draws: Vec<DVector<f64>> = run_indexed(samples, config.workers, |i| {
        Ok(model.sample(&mut substream(config.seed, (2u64 << 32) + i as u64)).state(n).clone())
    })?;
    let count = samples as f64;
    let mean = draws.iter().fold(DVector::zeros(d), |a, x| a + x) / count;
    let target = config.destination.mean();
    let target_cov = config.destination.cov();
    let mut worst_mean_z = 0.0f64;
    for i in 0..d {
        let se = (target_cov[(i, i)] / count).sqrt();
        worst_mean_z = worst_mean_z.max((mean[i] - target[i]).abs() / se);
    }
    let mut worst_cov_z = 0.0f64;
    for i in 0..d {
        for j in i..d {
            let prods: Vec<f64> = draws
                .iter()
                .map(|x| (x[i] - mean[i]) * (x[j] - mean[j]))
                .collect();
            let m = prods.iter().sum::<f64>() / count;
            let sample_cov = prods.iter().sum::<f64>() / (count - 1.0);
            let var = prods.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (count - 1.0);
            let se = (var / count).sqrt();
            worst_cov_z = worst_cov_z.max((sample_cov - target_cov[(i, j)]).abs() / se);
        }
    }
    Ok(Report {
        name: "endpoint pinning",
        passed: worst_mean_z <= 3.0 && worst_cov_z <= 3.0,
        detail: format!(
            "{samples} draws of x_N, worst mean deviation {worst_mean_z:.2} se, \
             worst covariance deviation {worst_cov_z:.2} se (limit 3)"
        ),
    })
}

/// Origin sharing and terminal divergence of the fig1 bundles.
pub fn fig1_bundles(config: &ScenarioConfig) -> std::result::Result<Report, ScenarioError> {
    let data = simulate_fig1(config)?;
    let s = fig1_statements(config, &data)?;
    Ok(Report {
        name: "fig1 bundle statistics",
        passed: s.all(),
        detail: format!(
            "{} runs: shared origin {}, CM_L terminal ({:.0}, {:.0}) at destination {}, \
             Markov terminal ({:.0}, {:.0}) near own mean ({:.0}, {:.0}) {}",
            data.cml.len(),
            s.shared_origin,
            s.cml_terminal_mean[0],
            s.cml_terminal_mean[1],
            s.cml_reaches_destination,
            s.markov_terminal_mean[0],
            s.markov_terminal_mean[1],
            s.markov_expected_terminal[0],
            s.markov_expected_terminal[1],
            s.markov_ends_at_own_mean,
        ),
    })
}

/// Minimum share of time steps whose mean NEES must fall in the 95% band.
pub const NEES_MIN_FRACTION: f64 = 0.9;

pub fn filter_consistency(config: &ScenarioConfig, runs: usize) -> std::result::Result<Report, ScenarioError> {
    let r = nees_consistency(config, runs)?;
    Ok(Report {
        name: "filter NEES consistency",
        passed: r.fraction_inside >= NEES_MIN_FRACTION,
        detail: format!(
            "{runs} runs, dim {}, band [{:.3}, {:.3}], {:.1}% of {} steps inside (need {:.0}%)",
            r.dim,
            r.lower,
            r.upper,
            100.0 * r.fraction_inside,
            r.mean_nees.len(),
            100.0 * NEES_MIN_FRACTION,
        ),
    })
}

/// Scenario-level checks that run in seconds.
pub fn scenario_suites(config: &ScenarioConfig) -> std::result::Result<Vec<Report>, ScenarioError> {
    Ok(vec![
        endpoint_pinning(config, 10_000)?,
        fig1_bundles(config)?,
        filter_consistency(config, 500)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_respect_recipe() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..50 {
            let a = random_transition(&mut rng, 3);
            assert!(a.clone().singular_values().max() <= 1.2 + 1e-12);
            let s = random_spd(&mut rng, 3);
            assert!(s.symmetric_eigenvalues().min() >= 0.1 - 1e-12);
        }
    }

    #[test]
    fn small_suites_pass() {
        for r in [
            oracle_equivalence(3, 10, 5).unwrap(),
            reciprocity(4, 10).unwrap(),
            cml_structure(5, 10).unwrap(),
            markov_recovery(6, 10).unwrap(),
            endpoint_freedom(7, 10).unwrap(),
        ] {
            assert!(r.passed, "{r}");
        }
    }
}
