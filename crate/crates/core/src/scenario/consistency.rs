//! NEES consistency of the augmented CM_L filter.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{run_indexed, substream, ScenarioConfig, ScenarioError};
use crate::estimate::AugmentedBelief;

/// Run-averaged NEES after each update at `k = 1..N-1`.
#[derive(Debug, Clone)]
pub struct NeesReport {
    pub mean_nees: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    /// Share of time steps whose mean NEES lies in `[lower, upper]`.
    pub fraction_inside: f64,
    pub runs: usize,
    pub dim: usize,
}

/// Filters `runs` CM_L truths measured at every interior step and checks
/// the mean NEES against the two-sided 95% band of `χ²(runs·2d) / runs`.
///
/// Uses substreams offset by `1 << 32` from the scenario seed so the runs
/// differ from those of fig1/fig2.
pub fn nees_consistency(config: &ScenarioConfig, runs: usize) -> Result<NeesReport, ScenarioError> {
    let cml = config.cml_model()?;
    let meas = config.measurement()?;
    let n = config.horizon;
    let per_run = run_indexed(runs, config.workers, |i| {
        let mut rng = substream(config.seed, (1u64 << 32) + i as u64);
        let truth = cml.sample(&mut rng);
        let mut belief = AugmentedBelief::prior(&cml);
        let mut out = Vec::with_capacity(n - 1);
        for k in 1..n {
            let z = meas.sample(truth.state(k), &mut rng);
            belief = belief.predict(&cml)?.update(&meas, &z)?;
            out.push(belief.nees(truth.state(k), truth.state(n))?);
        }
        Ok(out)
    })?;

    let steps = n - 1;
    let mean_nees: Vec<f64> = (0..steps)
        .map(|j| per_run.iter().map(|r| r[j]).sum::<f64>() / runs as f64)
        .collect();
    let dim = 2 * cml.dim();
    let dof = (runs * dim) as f64;
    let chi = ChiSquared::new(dof).map_err(|e| {
        ScenarioError::Numeric(crate::Error::InvalidParameter(e.to_string()))
    })?;
    let lower = chi.inverse_cdf(0.025) / runs as f64;
    let upper = chi.inverse_cdf(0.975) / runs as f64;
    let inside = mean_nees
        .iter()
        .filter(|&&v| v >= lower && v <= upper)
        .count();
    Ok(NeesReport {
        fraction_inside: inside as f64 / steps as f64,
        mean_nees,
        lower,
        upper,
        runs,
        dim,
    })
}
