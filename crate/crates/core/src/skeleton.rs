//! Tree skeleton graphs and trait reports shared by the generator and the
//! trait extractor.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonNode {
    #[serde(rename = "p")]
    pub position: Vec3<f64>,
    #[serde(rename = "r")]
    pub radius: f64,
    /// Number of cloud points supporting this node (0 for generated skeletons).
    #[serde(rename = "n", default, skip_serializing_if = "is_zero")]
    pub support: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

/// Tree-shaped skeleton: `|edges| = |nodes| - 1`, connected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonGraph {
    pub nodes: Vec<SkeletonNode>,
    pub edges: Vec<[usize; 2]>,
    /// Node indices from trunk base to apex.
    pub trunk_path: Vec<usize>,
    /// Trunk nodes where first-order branches attach, one entry per branch.
    pub branch_roots: Vec<usize>,
}

impl SkeletonGraph {
    /// Checks the tree-graph invariant, positive radii and trunk-path consistency.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::invalid("skeleton has no nodes"));
        }
        if self.edges.len() != n - 1 {
            return Err(Error::invalid(format!(
                "skeleton has {} edges for {} nodes",
                self.edges.len(),
                n
            )));
        }
        if let Some(i) = self.nodes.iter().position(|v| !(v.radius > 0.0) || !v.position.is_finite()) {
            return Err(Error::invalid(format!("skeleton node {i} has invalid radius or position")));
        }
        let adj = self.adjacency()?;
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut visited = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    visited += 1;
                    queue.push_back(w);
                }
            }
        }
        if visited != n {
            return Err(Error::invalid("skeleton is not connected"));
        }
        let mut on_path = vec![false; n];
        for (k, &v) in self.trunk_path.iter().enumerate() {
            if v >= n || on_path[v] {
                return Err(Error::invalid("trunk path is not a simple path"));
            }
            on_path[v] = true;
            if k > 0 && !adj[self.trunk_path[k - 1]].contains(&v) {
                return Err(Error::invalid("trunk path follows a non-edge"));
            }
        }
        if let Some(&r) = self.branch_roots.iter().find(|&&r| r >= n || !on_path[r]) {
            return Err(Error::invalid(format!("branch root {r} is not on the trunk path")));
        }
        Ok(())
    }

    pub fn adjacency(&self) -> Result<Vec<Vec<usize>>> {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for &[a, b] in &self.edges {
            if a >= n || b >= n || a == b {
                return Err(Error::invalid(format!("invalid skeleton edge ({a}, {b})")));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
        }
        Ok(adj)
    }

    /// Trunk polyline positions from base to apex.
    pub fn trunk_polyline(&self) -> Vec<Vec3<f64>> {
        self.trunk_path.iter().map(|&i| self.nodes[i].position).collect()
    }

    /// Applies `f` to every node position, keeping topology and radii.
    pub fn map_positions(&self, f: impl Fn(&Vec3<f64>) -> Vec3<f64>) -> Self {
        let mut out = self.clone();
        for n in out.nodes.iter_mut() {
            n.position = f(&n.position);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: SkeletonGraph = serde_json::from_str(s)?;
        g.validate()?;
        Ok(g)
    }
}

/// Per-tree structural traits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitReport {
    /// Meters; `None` when the trunk could not be measured.
    pub trunk_diameter: Option<f64>,
    pub branch_count: usize,
    /// Meters.
    pub tree_height: f64,
    #[serde(default)]
    pub diagnostics: TraitDiagnostics,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraitDiagnostics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circle_fit_rmse: Option<f64>,
    #[serde(default)]
    pub slice_points: usize,
    #[serde(default)]
    pub skeleton_nodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unavailable_reason: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(z: f64) -> SkeletonNode {
        SkeletonNode {
            position: Vec3::new(0.0, 0.0, z),
            radius: 0.01,
            support: 0,
        }
    }

    fn path3() -> SkeletonGraph {
        SkeletonGraph {
            nodes: vec![node(0.0), node(1.0), node(2.0), node(1.0)],
            edges: vec![[0, 1], [1, 2], [1, 3]],
            trunk_path: vec![0, 1, 2],
            branch_roots: vec![1],
        }
    }

    #[test]
    fn valid_tree_passes() {
        path3().validate().unwrap();
    }

    #[test]
    fn detects_cycle_and_bad_roots() {
        let mut g = path3();
        g.edges[2] = [0, 2];
        g.edges.push([2, 3]);
        assert!(g.validate().is_err());
        let mut g = path3();
        g.branch_roots = vec![3];
        assert!(g.validate().is_err());
        let mut g = path3();
        g.trunk_path = vec![0, 2];
        assert!(g.validate().is_err());
    }

    #[test]
    fn json_schema_uses_short_keys() {
        let s = path3().to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["nodes"][1]["p"], serde_json::json!([0.0, 0.0, 1.0]));
        assert_eq!(v["nodes"][1]["r"], serde_json::json!(0.01));
        assert_eq!(v["trunk_path"], serde_json::json!([0, 1, 2]));
        assert_eq!(SkeletonGraph::from_json(&s).unwrap(), path3());
    }
}
