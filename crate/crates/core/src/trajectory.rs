use nalgebra::DVector;

use crate::error::{Error, Result};

/// A sampled state sequence `x_0, ..., x_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<DVector<f64>>,
}

impl Trajectory {
    /// Requires at least two states of a common, nonzero dimension.
    pub fn new(states: Vec<DVector<f64>>) -> Result<Self> {
        let d = states.first().map(|s| s.len()).unwrap_or(0);
        if states.len() < 2 || d == 0 {
            return Err(Error::InvalidParameter(
                "trajectory needs at least two nonempty states".into(),
            ));
        }
        if let Some(bad) = states.iter().find(|s| s.len() != d) {
            return Err(Error::DimensionMismatch {
                context: "trajectory state",
                expected: d,
                found: bad.len(),
            });
        }
        Ok(Self { states })
    }

    /// Final time index `N`.
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn state(&self, k: usize) -> &DVector<f64> {
        &self.states[k]
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    /// Planar position `(x, y)` at `k` for the `[x, ẋ, y, ẏ]` layout.
    pub fn position(&self, k: usize) -> [f64; 2] {
        let s = &self.states[k];
        [s[0], s[2]]
    }
}
