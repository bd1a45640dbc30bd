//! Bundles of CM_L and Markov trajectories from the same origin.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::{io_error, run_indexed, substream, ScenarioConfig, ScenarioError};
use crate::trajectory::Trajectory;

/// Sampled bundles, index-aligned by run.
#[derive(Debug, Clone)]
pub struct Fig1Data {
    pub cml: Vec<Trajectory>,
    pub markov: Vec<Trajectory>,
}

/// Draws `config.fig1_runs` trajectories from each model. Run `i` samples
/// the CM_L trajectory and then the Markov one from substream `i`.
pub fn simulate_fig1(config: &ScenarioConfig) -> Result<Fig1Data, ScenarioError> {
    let cml = config.cml_model()?;
    let markov = config.markov_model()?;
    let pairs = run_indexed(config.fig1_runs, config.workers, |i| {
        let mut rng = substream(config.seed, i as u64);
        let a = cml.sample(&mut rng);
        let b = markov.sample(&mut rng);
        Ok((a, b))
    })?;
    let (cml, markov) = pairs.into_iter().unzip();
    Ok(Fig1Data { cml, markov })
}

/// Writes `model,run,k,x,y` rows.
pub fn write_fig1_csv<W: Write>(data: &Fig1Data, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "model,run,k,x,y")?;
    for (name, bundle) in [("cml", &data.cml), ("markov", &data.markov)] {
        for (run, t) in bundle.iter().enumerate() {
            for k in 0..=t.horizon() {
                let [x, y] = t.position(k);
                writeln!(out, "{name},{run},{k},{x},{y}")?;
            }
        }
    }
    Ok(())
}

/// Simulates and writes `<out_dir>/fig1.csv`; returns the data and path.
pub fn run_fig1(config: &ScenarioConfig) -> Result<(Fig1Data, PathBuf), ScenarioError> {
    let data = simulate_fig1(config)?;
    let dir = &config.out_dir;
    std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    let path = dir.join("fig1.csv");
    write_csv(&path, |w| write_fig1_csv(&data, w))?;
    Ok((data, path))
}

pub(super) fn write_csv(
    path: &Path,
    body: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>,
) -> Result<(), ScenarioError> {
    let file = std::fs::File::create(path).map_err(io_error(path))?;
    let mut w = std::io::BufWriter::new(file);
    body(&mut w).map_err(io_error(path))?;
    w.flush().map_err(io_error(path))
}

/// The statistical statements the bundles should satisfy, each tested at
/// three standard errors of the bundle mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Statements {
    /// Both bundles start around the origin mean.
    pub shared_origin: bool,
    /// CM_L bundle ends around the destination mean.
    pub cml_reaches_destination: bool,
    /// Markov bundle ends around its own propagated mean instead.
    pub markov_ends_at_own_mean: bool,
    pub cml_terminal_mean: [f64; 2],
    pub markov_terminal_mean: [f64; 2],
    pub markov_expected_terminal: [f64; 2],
}

impl Fig1Statements {
    pub fn all(&self) -> bool {
        self.shared_origin && self.cml_reaches_destination && self.markov_ends_at_own_mean
    }
}

fn bundle_mean(bundle: &[Trajectory], k: usize) -> [f64; 2] {
    let n = bundle.len() as f64;
    let (sx, sy) = bundle.iter().fold((0.0, 0.0), |(sx, sy), t| {
        let [x, y] = t.position(k);
        (sx + x, sy + y)
    });
    [sx / n, sy / n]
}

fn near(mean: [f64; 2], target: [f64; 2], var: [f64; 2], runs: usize) -> bool {
    (0..2).all(|i| (mean[i] - target[i]).abs() <= 3.0 * (var[i] / runs as f64).sqrt())
}

pub fn fig1_statements(
    config: &ScenarioConfig,
    data: &Fig1Data,
) -> Result<Fig1Statements, ScenarioError> {
    let runs = data.cml.len();
    let n = config.horizon;
    let o = &config.origin;
    let origin = [o.mean()[0], o.mean()[2]];
    let origin_var = [o.cov()[(0, 0)], o.cov()[(2, 2)]];
    let shared_origin = near(bundle_mean(&data.cml, 0), origin, origin_var, runs)
        && near(bundle_mean(&data.markov, 0), origin, origin_var, runs);

    let dst = &config.destination;
    let cml_terminal_mean = bundle_mean(&data.cml, n);
    let cml_reaches_destination = near(
        cml_terminal_mean,
        [dst.mean()[0], dst.mean()[2]],
        [dst.cov()[(0, 0)], dst.cov()[(2, 2)]],
        runs,
    );

    let end = config.markov_model()?.endpoint_density();
    let markov_expected_terminal = [end.mean()[0], end.mean()[2]];
    let markov_terminal_mean = bundle_mean(&data.markov, n);
    let markov_ends_at_own_mean = near(
        markov_terminal_mean,
        markov_expected_terminal,
        [end.cov()[(0, 0)], end.cov()[(2, 2)]],
        runs,
    );
    Ok(Fig1Statements {
        shared_origin,
        cml_reaches_destination,
        markov_ends_at_own_mean,
        cml_terminal_mean,
        markov_terminal_mean,
        markov_expected_terminal,
    })
}
