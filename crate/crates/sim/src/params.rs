use arbor_core::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{child_seed, stream, Stream};

/// Generator parameters. Lengths in meters, angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub seed: u64,
    pub trunk_height: f64,
    pub trunk_base_diameter: f64,
    /// Apex diameter as a fraction of the base diameter; 1 means no taper.
    pub trunk_taper: f64,
    pub branch_count: usize,
    /// Fractions of trunk height.
    pub branch_zone: (f64, f64),
    pub branch_elevation_range: (f64, f64),
    pub branch_length_range: (f64, f64),
    pub branch_diameter_ratio: f64,
    /// Maximum horizontal wander of the trunk axis per axis.
    pub curvature_noise: f64,
    /// Target spacing of skeleton nodes along the trunk and branches.
    pub node_spacing: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            seed: 0,
            trunk_height: 3.0,
            trunk_base_diameter: 0.06,
            trunk_taper: 0.4,
            branch_count: 24,
            branch_zone: (0.25, 0.9),
            branch_elevation_range: (0.0, 45.0),
            branch_length_range: (0.25, 0.7),
            branch_diameter_ratio: 0.4,
            curvature_noise: 0.02,
            node_spacing: 0.05,
        }
    }
}

/// Shortest lateral the generator will produce.
pub const MIN_BRANCH_LENGTH: f64 = 0.05;

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("tree params: {what}")));
        let finite = [
            self.trunk_height,
            self.trunk_base_diameter,
            self.trunk_taper,
            self.branch_zone.0,
            self.branch_zone.1,
            self.branch_elevation_range.0,
            self.branch_elevation_range.1,
            self.branch_length_range.0,
            self.branch_length_range.1,
            self.branch_diameter_ratio,
            self.curvature_noise,
            self.node_spacing,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("non-finite value");
        }
        if self.trunk_height <= 0.0 {
            return bad("trunk_height must be positive");
        }
        if self.trunk_base_diameter <= 0.0 {
            return bad("trunk_base_diameter must be positive");
        }
        if !(self.trunk_taper > 0.0 && self.trunk_taper <= 1.0) {
            return bad("trunk_taper must lie in (0, 1]");
        }
        let (lo, hi) = self.branch_zone;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return bad("branch_zone must satisfy 0 <= low < high <= 1");
        }
        let (e0, e1) = self.branch_elevation_range;
        if !(-90.0 < e0 && e0 <= e1 && e1 < 90.0) {
            return bad("branch_elevation_range must be ordered within (-90, 90)");
        }
        let (l0, l1) = self.branch_length_range;
        if !(MIN_BRANCH_LENGTH <= l0 && l0 <= l1) {
            return bad("branch_length_range must be ordered and at least 0.05 m");
        }
        if !(self.branch_diameter_ratio > 0.0 && self.branch_diameter_ratio < 1.0) {
            return bad("branch_diameter_ratio must lie in (0, 1)");
        }
        if self.curvature_noise < 0.0 {
            return bad("curvature_noise must be non-negative");
        }
        if !(self.node_spacing > 0.0 && self.node_spacing <= self.trunk_height) {
            return bad("node_spacing must be positive and below trunk_height");
        }
        Ok(())
    }

    /// Trunk radius at fractional height `t` in `[0, 1]`.
    pub fn trunk_radius(&self, t: f64) -> f64 {
        0.5 * self.trunk_base_diameter * (1.0 - (1.0 - self.trunk_taper) * t)
    }
}

/// Ranges for drawing per-tree parameters of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParamRanges {
    pub trunk_height: (f64, f64),
    pub trunk_base_diameter: (f64, f64),
    pub branch_count: (usize, usize),
}

impl Default for TreeParamRanges {
    fn default() -> Self {
        TreeParamRanges {
            trunk_height: (2.0, 3.5),
            trunk_base_diameter: (0.04, 0.08),
            branch_count: (15, 35),
        }
    }
}

impl TreeParamRanges {
    pub fn validate(&self) -> Result<()> {
        let ok = self.trunk_height.0 > 0.0
            && self.trunk_height.0 <= self.trunk_height.1
            && self.trunk_base_diameter.0 > 0.0
            && self.trunk_base_diameter.0 <= self.trunk_base_diameter.1
            && self.branch_count.0 <= self.branch_count.1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("parameter ranges must be positive and ordered".into()))
        }
    }

    /// Parameters for tree `index` of a dataset seeded with `seed`; fields not
    /// covered by the ranges come from `base`.
    pub fn draw(&self, base: &TreeParams, seed: u64, index: u64) -> TreeParams {
        let tree_seed = child_seed(seed, index);
        let mut rng = stream(tree_seed, Stream::Params);
        let mut p = base.clone();
        p.seed = tree_seed;
        p.trunk_height = uniform(&mut rng, self.trunk_height);
        p.trunk_base_diameter = uniform(&mut rng, self.trunk_base_diameter);
        p.branch_count = rng.random_range(self.branch_count.0..=self.branch_count.1);
        p
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}
