use arbor_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QsmParams {
    pub slice_thickness: f64,
    /// Arc length along the trunk from its base to the diameter slice.
    pub measure_height: f64,
    pub knn_k: usize,
    pub level_step: f64,
    pub min_branch_length: f64,
    pub min_branch_points: usize,
    pub circle_fit_max_rmse: f64,
}

impl Default for QsmParams {
    fn default() -> Self {
        QsmParams {
            slice_thickness: 0.02,
            measure_height: 0.30,
            knn_k: 10,
            level_step: 0.04,
            min_branch_length: 0.05,
            min_branch_points: 30,
            circle_fit_max_rmse: 0.01,
        }
    }
}

impl QsmParams {
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            self.slice_thickness,
            self.measure_height,
            self.level_step,
            self.min_branch_length,
            self.circle_fit_max_rmse,
        ];
        if lengths.iter().all(|v| v.is_finite() && *v > 0.0) && self.knn_k > 0 && self.min_branch_points > 0 {
            Ok(())
        } else {
            Err(Error::InvalidInput("qsm params must all be positive".into()))
        }
    }

    /// Every length multiplied by `s`; counts unchanged.
    pub fn scaled(&self, s: f64) -> Self {
        QsmParams {
            slice_thickness: self.slice_thickness * s,
            measure_height: self.measure_height * s,
            level_step: self.level_step * s,
            min_branch_length: self.min_branch_length * s,
            circle_fit_max_rmse: self.circle_fit_max_rmse * s,
            ..self.clone()
        }
    }
}
