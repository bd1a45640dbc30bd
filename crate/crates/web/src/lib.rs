//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a flat `Float64Array`; the layouts are documented
//! on each function and decoded in `www/index.js`.

use nalgebra::DMatrix;
use wasm_bindgen::prelude::*;

use cmltraj::estimate::AugmentedBelief;
use cmltraj::scenario::{simulate_fig1, simulate_fig2, substream, ScenarioConfig};

/// Knobs exposed on the page, applied over the reference scenario.
#[derive(Debug, Clone, Copy)]
pub struct Knobs {
    pub seed: u64,
    pub q: f64,
    pub dest_x: f64,
    pub dest_y: f64,
    pub dest_pos_var: f64,
    pub meas_var: f64,
}

impl Knobs {
    fn config(&self, runs: usize) -> Result<ScenarioConfig, String> {
        let mut config = ScenarioConfig {
            seed: self.seed,
            q: self.q,
            runs,
            fig1_runs: runs,
            workers: 1,
            ..ScenarioConfig::default()
        };
        let mut mean = config.destination.mean().clone();
        mean[0] = self.dest_x;
        mean[2] = self.dest_y;
        let mut cov = config.destination.cov().clone();
        cov[(0, 0)] = self.dest_pos_var;
        cov[(2, 2)] = self.dest_pos_var;
        config.destination =
            cmltraj::GaussianDensity::new(mean, cov).map_err(|e| e.to_string())?;
        config.measurement_noise = DMatrix::identity(2, 2) * self.meas_var;
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }
}

/// `[N, then runs × (N+1) × (x, y) for CM_L, then the same for Markov]`.
pub fn bundles(knobs: Knobs, runs: usize) -> Result<Vec<f64>, String> {
    let config = knobs.config(runs)?;
    let data = simulate_fig1(&config).map_err(|e| e.to_string())?;
    let mut out = vec![config.horizon as f64];
    for bundle in [&data.cml, &data.markov] {
        for t in bundle {
            for k in 0..=t.horizon() {
                out.extend_from_slice(&t.position(k));
            }
        }
    }
    Ok(out)
}

/// Triples `(horizon, aee_cml, aee_markov)` for `measure_until..=N`.
pub fn aee_curves(knobs: Knobs, runs: usize, measure_until: usize) -> Result<Vec<f64>, String> {
    let config = ScenarioConfig {
        measure_until,
        ..knobs.config(runs)?
    };
    config.validate().map_err(|e| e.to_string())?;
    let data = simulate_fig2(&config).map_err(|e| e.to_string())?;
    Ok(data
        .horizons
        .iter()
        .zip(&data.aee_cml)
        .zip(&data.aee_markov)
        .flat_map(|((h, c), m)| [*h as f64, *c, *m])
        .collect())
}

/// For one sampled truth measured at every step: quadruples
/// `(k, destination position std, destination position error, state
/// position error)` after the update at `k = 0..N-1`.
pub fn destination_learning(knobs: Knobs) -> Result<Vec<f64>, String> {
    let config = knobs.config(1)?;
    let model = config.cml_model().map_err(|e| e.to_string())?;
    let meas = config.measurement().map_err(|e| e.to_string())?;
    let mut rng = substream(config.seed, 0);
    let truth = model.sample(&mut rng);
    let n = model.horizon();
    let end = truth.position(n);
    let mut belief = AugmentedBelief::prior(&model);
    let mut out = Vec::with_capacity(4 * n);
    for k in 0..n {
        if k > 0 {
            let z = meas.sample(truth.state(k), &mut rng);
            belief = belief
                .predict(&model)
                .and_then(|b| b.update(&meas, &z))
                .map_err(|e| e.to_string())?;
        }
        let dest = belief.destination();
        let state = belief.state();
        let std = (dest.cov()[(0, 0)] + dest.cov()[(2, 2)]).sqrt();
        let dest_err = (dest.mean()[0] - end[0]).hypot(dest.mean()[2] - end[1]);
        let pos = truth.position(k);
        let state_err = (state.mean()[0] - pos[0]).hypot(state.mean()[2] - pos[1]);
        out.extend_from_slice(&[k as f64, std, dest_err, state_err]);
    }
    Ok(out)
}

fn js(r: Result<Vec<f64>, String>) -> Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[allow(clippy::too_many_arguments)]
fn knobs(seed: u32, q: f64, dest_x: f64, dest_y: f64, dest_pos_var: f64, meas_var: f64) -> Knobs {
    Knobs {
        seed: seed as u64,
        q,
        dest_x,
        dest_y,
        dest_pos_var,
        meas_var,
    }
}

#[wasm_bindgen(js_name = sampleBundles)]
pub fn sample_bundles(
    seed: u32,
    runs: usize,
    q: f64,
    dest_x: f64,
    dest_y: f64,
    dest_pos_var: f64,
) -> Result<Vec<f64>, JsError> {
    js(bundles(knobs(seed, q, dest_x, dest_y, dest_pos_var, 100.0), runs))
}

#[wasm_bindgen(js_name = predictionError)]
#[allow(clippy::too_many_arguments)]
pub fn prediction_error(
    seed: u32,
    runs: usize,
    measure_until: usize,
    q: f64,
    dest_x: f64,
    dest_y: f64,
    dest_pos_var: f64,
    meas_var: f64,
) -> Result<Vec<f64>, JsError> {
    js(aee_curves(
        knobs(seed, q, dest_x, dest_y, dest_pos_var, meas_var),
        runs,
        measure_until,
    ))
}

#[wasm_bindgen(js_name = destinationLearning)]
pub fn destination_learning_js(
    seed: u32,
    q: f64,
    dest_x: f64,
    dest_y: f64,
    dest_pos_var: f64,
    meas_var: f64,
) -> Result<Vec<f64>, JsError> {
    js(destination_learning(knobs(seed, q, dest_x, dest_y, dest_pos_var, meas_var)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> Knobs {
        Knobs {
            seed: 42,
            q: 0.01,
            dest_x: 130000.0,
            dest_y: 10000.0,
            dest_pos_var: 1000.0,
            meas_var: 100.0,
        }
    }

    #[test]
    fn bundle_layout() {
        let v = bundles(reference(), 3).unwrap();
        assert_eq!(v[0], 100.0);
        assert_eq!(v.len(), 1 + 2 * 3 * 101 * 2);
        // First CM_L trajectory ends near the destination.
        let end_x = v[1 + 100 * 2];
        assert!((end_x - 130000.0).abs() < 200.0, "{end_x}");
    }

    #[test]
    fn curves_layout_and_gap() {
        let v = aee_curves(reference(), 50, 9).unwrap();
        assert_eq!(v.len(), 3 * 92);
        let last = &v[v.len() - 3..];
        assert_eq!(last[0], 100.0);
        assert!(last[2] > 50.0 * last[1]);
    }

    #[test]
    fn destination_spread_shrinks() {
        let v = destination_learning(reference()).unwrap();
        assert_eq!(v.len(), 4 * 100);
        assert!(v[4 * 99 + 1] < v[1]);
    }

    #[test]
    fn invalid_knobs_error() {
        let bad = Knobs {
            dest_pos_var: -1.0,
            ..reference()
        };
        assert!(bundles(bad, 2).is_err());
        assert!(aee_curves(reference(), 5, 100).is_err());
    }
}
