use std::path::Path;

use arbor_core::io::{write_json, write_obj};
use arbor_core::{Error, Mesh, Result, SkeletonGraph, SkeletonNode, TraitDiagnostics, TraitReport, Vec3, Vec3d};
use rand::Rng;

use crate::params::TreeParams;
use crate::rng::{stream, Stream};
use crate::sweep::sweep_chain;

/// Height above the trunk base where the reference trunk diameter is taken.
pub const GT_MEASURE_HEIGHT: f64 = 0.30;

#[derive(Debug, Clone)]
pub struct TreeModel {
    pub params: TreeParams,
    pub skeleton: SkeletonGraph,
    pub mesh: Mesh,
    pub traits: TraitReport,
    /// Skeleton node chains in the order they were swept into the mesh; the
    /// trunk comes first and each branch chain starts at its trunk node. The
    /// first ring of a branch sits on the edge to its second node, just inside
    /// the trunk surface.
    pub chains: Vec<Vec<usize>>,
}

struct Wander {
    freq: [f64; 3],
    phase: [f64; 3],
    weight: [f64; 3],
}

impl Wander {
    fn draw(rng: &mut impl Rng) -> Self {
        let mut w = Wander {
            freq: [0.0; 3],
            phase: [0.0; 3],
            weight: [0.0; 3],
        };
        for k in 0..3 {
            w.freq[k] = k as f64 + 0.5 + rng.random::<f64>();
            w.phase[k] = std::f64::consts::TAU * rng.random::<f64>();
            w.weight[k] = 0.2 + rng.random::<f64>();
        }
        let total: f64 = w.weight.iter().sum();
        w.weight.iter_mut().for_each(|x| *x /= total);
        w
    }

    /// In `[-t, t]` for `t` in `[0, 1]`.
    fn at(&self, t: f64) -> f64 {
        let s: f64 = (0..3)
            .map(|k| self.weight[k] * (std::f64::consts::TAU * self.freq[k] * t + self.phase[k]).sin())
            .sum();
        t * s
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn generate_tree(params: &TreeParams) -> Result<TreeModel> {
    params.validate()?;
    let h = params.trunk_height;
    let n_trunk = ((h / params.node_spacing).ceil() as usize + 1).max(3);

    let mut trunk_rng = stream(params.seed, Stream::Trunk);
    let wx = Wander::draw(&mut trunk_rng);
    let wy = Wander::draw(&mut trunk_rng);
    let a = params.curvature_noise;

    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for i in 0..n_trunk {
        let t = i as f64 / (n_trunk - 1) as f64;
        nodes.push(SkeletonNode {
            position: Vec3::new(a * wx.at(t), a * wy.at(t), h * t),
            radius: params.trunk_radius(t),
            support: 0,
        });
        if i > 0 {
            edges.push([i - 1, i]);
        }
    }
    let trunk_path: Vec<usize> = (0..n_trunk).collect();
    let mut chains = vec![trunk_path.clone()];

    let mut rng = stream(params.seed, Stream::Branches);
    let (zl, zh) = params.branch_zone;
    let mut heights: Vec<f64> = (0..params.branch_count)
        .map(|_| zl + (zh - zl) * rng.random::<f64>())
        .collect();
    heights.sort_by(f64::total_cmp);
    let n = params.branch_count.max(1);
    let mut step = ((0.382 * n as f64).round() as usize).max(1);
    while gcd(step, n) != 1 {
        step += 1;
    }
    let mut branch_roots = Vec::with_capacity(params.branch_count);
    for (j, t) in heights.iter().enumerate() {
        let root = ((t * (n_trunk - 1) as f64).round() as usize).clamp(1, n_trunk - 2);
        let sector = (j * step) % n;
        let azimuth = (sector as f64 + rng.random::<f64>()) * std::f64::consts::TAU / n as f64;
        let (e0, e1) = params.branch_elevation_range;
        let elevation = (e0 + (e1 - e0) * rng.random::<f64>()).to_radians();
        let (l0, l1) = params.branch_length_range;
        let length = l0 + (l1 - l0) * rng.random::<f64>();

        let dir = Vec3::new(
            elevation.cos() * azimuth.cos(),
            elevation.cos() * azimuth.sin(),
            elevation.sin(),
        );
        let origin = nodes[root].position;
        let r0 = params.branch_diameter_ratio * nodes[root].radius;
        let m = ((length / params.node_spacing).ceil() as usize + 1).max(2);
        let mut chain = vec![root];
        for k in 1..m {
            let f = k as f64 / (m - 1) as f64;
            let idx = nodes.len();
            nodes.push(SkeletonNode {
                position: origin + dir * (length * f),
                radius: r0 * (1.0 - 0.5 * f),
                support: 0,
            });
            edges.push([*chain.last().unwrap(), idx]);
            chain.push(idx);
        }
        chains.push(chain);
        branch_roots.push(root);
    }

    let skeleton = SkeletonGraph {
        nodes,
        edges,
        trunk_path,
        branch_roots,
    };
    skeleton.validate()?;

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (c, chain) in chains.iter().enumerate() {
        let mut pos: Vec<Vec3d> = chain.iter().map(|&i| skeleton.nodes[i].position).collect();
        if c > 0 {
            // start the tube just inside the trunk surface, not on the axis
            let first = pos[1] - pos[0];
            let depth = (0.8 * skeleton.nodes[chain[0]].radius).min(0.5 * first.norm());
            pos[0] = pos[0] + first.normalized().unwrap() * depth;
        }
        let rad: Vec<f64> = chain.iter().map(|&i| skeleton.nodes[i].radius).collect();
        sweep_chain(&pos, &rad, &mut vertices, &mut triangles);
    }
    let mesh = Mesh::new(vertices, triangles)?;

    let mut traits = skeleton_traits(&skeleton);
    traits.trunk_diameter = trunk_diameter_at(&skeleton, GT_MEASURE_HEIGHT).ok();
    Ok(TreeModel {
        params: params.clone(),
        skeleton,
        mesh,
        traits,
        chains,
    })
}

fn skeleton_traits(skeleton: &SkeletonGraph) -> TraitReport {
    let z0 = skeleton.nodes[skeleton.trunk_path[0]].position.z;
    let top = skeleton.nodes.iter().map(|n| n.position.z).fold(f64::NEG_INFINITY, f64::max);
    TraitReport {
        trunk_diameter: None,
        branch_count: skeleton.branch_roots.len(),
        tree_height: top - z0,
        diagnostics: TraitDiagnostics {
            skeleton_nodes: skeleton.nodes.len(),
            ..Default::default()
        },
    }
}

/// Twice the trunk radius interpolated at `height` above the trunk base.
fn trunk_diameter_at(skeleton: &SkeletonGraph, height: f64) -> Result<f64> {
    let path = &skeleton.trunk_path;
    let z0 = skeleton.nodes[path[0]].position.z;
    let target = z0 + height;
    for w in path.windows(2) {
        let (a, b) = (&skeleton.nodes[w[0]], &skeleton.nodes[w[1]]);
        let (za, zb) = (a.position.z, b.position.z);
        if za <= target && target <= zb && za < zb {
            let f = (target - za) / (zb - za);
            return Ok(2.0 * (a.radius + f * (b.radius - a.radius)));
        }
    }
    Err(Error::InvalidInput(format!(
        "measure height {height} m lies outside the trunk"
    )))
}

/// Exact traits from a skeleton: trunk diameter at `measure_height` above the
/// trunk base, one branch per root, and apex height.
pub fn ground_truth_traits(skeleton: &SkeletonGraph, measure_height: f64) -> Result<TraitReport> {
    skeleton.validate()?;
    let mut report = skeleton_traits(skeleton);
    report.trunk_diameter = Some(trunk_diameter_at(skeleton, measure_height)?);
    Ok(report)
}

/// Writes `<id>.obj`, `<id>.skeleton.json`, `<id>.traits.json` and
/// `<id>.params.json` into `dir`.
pub fn write_tree(dir: impl AsRef<Path>, id: &str, model: &TreeModel) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_obj(dir.join(format!("{id}.obj")), &model.mesh)?;
    write_json(dir.join(format!("{id}.skeleton.json")), &model.skeleton)?;
    write_json(dir.join(format!("{id}.traits.json")), &model.traits)?;
    write_json(dir.join(format!("{id}.params.json")), &model.params)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::chain_triangle_count;

    #[test]
    fn no_branches_gives_bare_trunk() {
        let p = TreeParams {
            branch_count: 0,
            ..Default::default()
        };
        let t = generate_tree(&p).unwrap();
        assert_eq!(t.traits.branch_count, 0);
        assert_eq!(t.skeleton.nodes.len(), t.skeleton.trunk_path.len());
    }

    #[test]
    fn triangle_count_follows_ring_formula() {
        let p = TreeParams {
            branch_count: 24,
            seed: 9,
            ..Default::default()
        };
        let t = generate_tree(&p).unwrap();
        assert_eq!(t.skeleton.branch_roots.len(), 24);
        let expected: usize = t.chains.iter().map(|c| chain_triangle_count(c.len())).sum();
        assert_eq!(t.mesh.triangles().len(), expected);
        // 3 m trunk at 5 cm spacing has 61 nodes
        assert_eq!(t.chains[0].len(), 61);
    }

    #[test]
    fn taper_interpolation() {
        let p = TreeParams {
            trunk_height: 3.0,
            trunk_base_diameter: 0.06,
            trunk_taper: 0.5,
            curvature_noise: 0.0,
            branch_count: 0,
            ..Default::default()
        };
        let t = generate_tree(&p).unwrap();
        let r = ground_truth_traits(&t.skeleton, 1.5).unwrap();
        assert!((r.trunk_diameter.unwrap() - 0.045).abs() < 1e-12);
        assert!(ground_truth_traits(&t.skeleton, 3.5).is_err());
        assert!(ground_truth_traits(&t.skeleton, -0.1).is_err());
    }

    #[test]
    fn rejects_bad_params() {
        for p in [
            TreeParams { trunk_height: 0.0, ..Default::default() },
            TreeParams { branch_zone: (0.6, 0.5), ..Default::default() },
            TreeParams { branch_diameter_ratio: 1.0, ..Default::default() },
            TreeParams { trunk_taper: 0.0, ..Default::default() },
            TreeParams { branch_length_range: (0.01, 0.2), ..Default::default() },
        ] {
            assert!(generate_tree(&p).is_err());
        }
    }
}
