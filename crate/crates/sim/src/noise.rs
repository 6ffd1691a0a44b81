use arbor_core::{Depth, Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, Stream};

/// Depth jump between neighbouring pixels treated as an occlusion edge.
pub const DISCONTINUITY: f64 = 0.1;

/// Stereo-like depth error model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Constant noise std, meters.
    pub sigma_a: f64,
    /// Coefficient of the depth-squared noise term, 1/m.
    pub sigma_b: f64,
    /// Half-width of the dropout band around discontinuities; 0 disables dropout.
    pub dropout_edge_px: usize,
    /// Depths beyond this become invalid; `None` keeps everything.
    pub max_range: Option<f64>,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            sigma_a: 0.001,
            sigma_b: 0.0008,
            dropout_edge_px: 2,
            max_range: Some(10.0),
            seed: 0,
        }
    }
}

impl NoiseSpec {
    /// No noise, no dropout, unlimited range.
    pub fn none() -> Self {
        NoiseSpec {
            sigma_a: 0.0,
            sigma_b: 0.0,
            dropout_edge_px: 0,
            max_range: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let range_ok = self.max_range.map_or(true, |r| r >= 0.0);
        if self.sigma_a >= 0.0 && self.sigma_b >= 0.0 && self.sigma_a.is_finite() && self.sigma_b.is_finite() && range_ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("noise spec values must be non-negative".into()))
        }
    }
}

/// Pixels within `radius` (Chebyshev) of a depth discontinuity or of a
/// valid/invalid boundary.
fn edge_band(depth: &Depth, radius: usize) -> Vec<bool> {
    let (w, h) = (depth.width(), depth.height());
    let d = depth.data();
    let mut edge = vec![false; w * h];
    let jump = |i: usize, j: usize| match (d[i].is_finite(), d[j].is_finite()) {
        (true, true) => (d[i] - d[j]).abs() > DISCONTINUITY,
        (a, b) => a != b,
    };
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w && jump(i, i + 1) {
                edge[i] = true;
                edge[i + 1] = true;
            }
            if y + 1 < h && jump(i, i + w) {
                edge[i] = true;
                edge[i + w] = true;
            }
        }
    }
    // separable max filter
    let mut rows = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(w - 1);
            rows[y * w + x] = (lo..=hi).any(|k| edge[y * w + k]);
        }
    }
    let mut band = vec![false; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius).min(h - 1);
        for x in 0..w {
            band[y * w + x] = (lo..=hi).any(|k| rows[k * w + x]);
        }
    }
    band
}

/// Adds depth-dependent Gaussian noise, drops pixels near discontinuities with
/// probability 0.5 and invalidates depths beyond `max_range`.
pub fn degrade_depth(depth: &Depth, noise: &NoiseSpec) -> Result<Depth> {
    noise.validate()?;
    let mut gauss = stream(noise.seed, Stream::DepthNoise);
    let mut out: Vec<f64> = depth
        .data()
        .iter()
        .map(|&d| {
            if !d.is_finite() {
                return d;
            }
            let z: f64 = gauss.sample(StandardNormal);
            d + (noise.sigma_a + noise.sigma_b * d * d) * z
        })
        .collect();
    if noise.dropout_edge_px > 0 {
        let band = edge_band(depth, noise.dropout_edge_px);
        let mut drop = stream(noise.seed, Stream::Dropout);
        for (i, v) in out.iter_mut().enumerate() {
            if band[i] && v.is_finite() && drop.random::<f64>() < 0.5 {
                *v = f64::NAN;
            }
        }
    }
    for v in out.iter_mut() {
        if *v <= 0.0 || noise.max_range.is_some_and(|r| *v > r) {
            *v = f64::NAN;
        }
    }
    Depth::new(depth.width(), depth.height(), out)
}
