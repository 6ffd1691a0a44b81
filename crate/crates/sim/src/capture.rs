use arbor_core::{Depth, Intrinsics, Mesh, Pose, Result};

use crate::noise::{degrade_depth, NoiseSpec};
use crate::render::{mono_from_depth, render_scene, GroundPlane, Render, Scene};
use crate::rng::child_seed;
use crate::row::{plan_trajectory, RowSpec};

/// One simulated frame: the clean labelled render, the degraded metric depth
/// and the monocular relative depth of the clean render.
#[derive(Debug, Clone)]
pub struct Capture {
    pub pose: Pose<f64>,
    pub clean: Render,
    pub depth: Depth,
    pub mono: Depth,
}

/// Renders one frame; the noise seed is used as given.
pub fn capture_frame(scene: &Scene, intr: &Intrinsics, pose: &Pose<f64>, noise: &NoiseSpec) -> Result<Capture> {
    let clean = render_scene(scene, intr, pose)?;
    let depth = degrade_depth(&clean.depth, noise)?;
    let mono = mono_from_depth(&clean.depth);
    Ok(Capture {
        pose: *pose,
        clean,
        depth,
        mono,
    })
}

/// Captures every frame of a row pass. Frame `i` draws its noise from a seed
/// derived from `noise.seed` and `i`.
pub fn capture_row(
    meshes: &[&Mesh],
    ground: Option<GroundPlane>,
    row: &RowSpec,
    intr: &Intrinsics,
    noise: &NoiseSpec,
) -> Result<Vec<Capture>> {
    let scene = Scene {
        meshes: meshes.to_vec(),
        ground,
    };
    plan_trajectory(row)?
        .iter()
        .enumerate()
        .map(|(i, pose)| {
            let spec = NoiseSpec {
                seed: child_seed(noise.seed, i as u64),
                ..noise.clone()
            };
            capture_frame(&scene, intr, pose, &spec)
        })
        .collect()
}
