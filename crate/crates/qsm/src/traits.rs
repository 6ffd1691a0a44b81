use arbor_core::{Cloud, SkeletonGraph, TraitDiagnostics, TraitReport};

use crate::height::tree_height;
use crate::params::QsmParams;
use crate::skeleton::extract_skeleton;
use crate::trunk::trunk_diameter;
use crate::{QsmError, QsmResult};

/// Height, skeleton, branch count and trunk diameter of one tree cloud. An
/// unmeasurable trunk is reported as `None` with the reason in the diagnostics.
pub fn estimate_traits(cloud: &Cloud, params: &QsmParams) -> QsmResult<(TraitReport, SkeletonGraph)> {
    let height = tree_height(cloud)?;
    let skeleton = extract_skeleton(cloud, params)?;
    let mut diagnostics = TraitDiagnostics {
        skeleton_nodes: skeleton.nodes.len(),
        ..TraitDiagnostics::default()
    };
    let trunk = match trunk_diameter(cloud, &skeleton, params) {
        Ok(m) => {
            diagnostics.circle_fit_rmse = Some(m.rmse);
            diagnostics.slice_points = m.slice_points;
            Some(m.diameter)
        }
        Err(QsmError::TraitUnavailable { reason }) => {
            diagnostics.unavailable_reason = Some(reason);
            None
        }
        Err(e) => return Err(e),
    };
    let report = TraitReport {
        trunk_diameter: trunk,
        branch_count: skeleton.branch_roots.len(),
        tree_height: height,
        diagnostics,
    };
    Ok((report, skeleton))
}
