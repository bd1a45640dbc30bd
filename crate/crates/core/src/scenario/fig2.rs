//! Prediction error of the CM_L and Markov predictors after a short
//! measurement window.

use std::io::Write;
use std::path::PathBuf;

use super::fig1::write_csv;
use super::{io_error, run_indexed, substream, ScenarioConfig, ScenarioError};
use crate::estimate::{aee, AugmentedBelief, MarkovBelief};
use crate::gaussian::GaussianDensity;

/// AEE curves indexed by absolute target time `measure_until..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Data {
    pub horizons: Vec<usize>,
    pub aee_cml: Vec<f64>,
    pub aee_markov: Vec<f64>,
    pub measure_until: usize,
    pub runs: usize,
}

impl Fig2Data {
    /// `AEE_Markov(N|k) / AEE_CML(N|k)` at the final horizon.
    pub fn terminal_ratio(&self) -> f64 {
        self.aee_markov.last().copied().unwrap_or(f64::NAN)
            / self.aee_cml.last().copied().unwrap_or(f64::NAN)
    }
}

fn position(g: &GaussianDensity) -> [f64; 2] {
    [g.mean()[0], g.mean()[2]]
}

struct RunOutcome {
    truth: Vec<[f64; 2]>,
    cml: Vec<[f64; 2]>,
    markov: Vec<[f64; 2]>,
}

/// Both predictors see the same truth and the same measurements in each
/// run. Run `i` draws the truth and then the measurement noise from
/// substream `i`.
pub fn simulate_fig2(config: &ScenarioConfig) -> Result<Fig2Data, ScenarioError> {
    let cml = config.cml_model()?;
    let markov = config.markov_model()?;
    let meas = config.measurement()?;
    let n = config.horizon;
    let last = config.measure_until;

    let outcomes = run_indexed(config.runs, config.workers, |i| {
        let mut rng = substream(config.seed, i as u64);
        let truth = cml.sample(&mut rng);
        let mut cb = AugmentedBelief::prior(&cml);
        let mut mb = MarkovBelief::prior(&markov);
        for k in 1..=last {
            let z = meas.sample(truth.state(k), &mut rng);
            cb = cb.predict(&cml)?.update(&meas, &z)?;
            mb = mb.predict(&markov)?.update(&meas, &z)?;
        }
        let cml_path = cb.predict_path(&cml, n)?;
        let markov_path = mb.predict_path(&markov, n)?;
        Ok(RunOutcome {
            truth: (last..=n).map(|k| truth.position(k)).collect(),
            cml: cml_path.iter().map(position).collect(),
            markov: markov_path.iter().map(position).collect(),
        })
    })?;

    let horizons: Vec<usize> = (last..=n).collect();
    let mut aee_cml = Vec::with_capacity(horizons.len());
    let mut aee_markov = Vec::with_capacity(horizons.len());
    for j in 0..horizons.len() {
        let truth: Vec<[f64; 2]> = outcomes.iter().map(|o| o.truth[j]).collect();
        let c: Vec<[f64; 2]> = outcomes.iter().map(|o| o.cml[j]).collect();
        let m: Vec<[f64; 2]> = outcomes.iter().map(|o| o.markov[j]).collect();
        aee_cml.push(aee(&truth, &c)?);
        aee_markov.push(aee(&truth, &m)?);
    }
    Ok(Fig2Data {
        horizons,
        aee_cml,
        aee_markov,
        measure_until: last,
        runs: config.runs,
    })
}

/// Writes `horizon,aee_cml,aee_markov,log10_aee_cml,log10_aee_markov`.
pub fn write_fig2<W: Write>(data: &Fig2Data, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "horizon,aee_cml,aee_markov,log10_aee_cml,log10_aee_markov")?;
    for ((h, c), m) in data.horizons.iter().zip(&data.aee_cml).zip(&data.aee_markov) {
        writeln!(out, "{h},{c},{m},{},{}", c.log10(), m.log10())?;
    }
    Ok(())
}

fn summary_line(data: &Fig2Data) -> String {
    format!(
        "terminal_ratio={} horizon={} measure_until={} runs={} aee_markov={} aee_cml={}",
        data.terminal_ratio(),
        data.horizons.last().copied().unwrap_or(0),
        data.measure_until,
        data.runs,
        data.aee_markov.last().copied().unwrap_or(f64::NAN),
        data.aee_cml.last().copied().unwrap_or(f64::NAN),
    )
}

/// Simulates and writes `<out_dir>/fig2.csv` and `<out_dir>/summary.txt`.
pub fn run_fig2(config: &ScenarioConfig) -> Result<(Fig2Data, PathBuf), ScenarioError> {
    let data = simulate_fig2(config)?;
    let dir = &config.out_dir;
    std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    let path = dir.join("fig2.csv");
    write_csv(&path, |w| write_fig2(&data, w))?;
    let summary = dir.join("summary.txt");
    write_csv(&summary, |w| writeln!(w, "{}", summary_line(&data)))?;
    Ok((data, path))
}
