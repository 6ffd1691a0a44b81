//! Geodesic level-set skeletonization.
//!
//! Points are linked into a symmetric k-NN graph, geodesic distance from a
//! root near the base is binned into levels, and every connected piece of a
//! level becomes one skeleton node.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use arbor_core::{Cloud, Error, KdIndex, SkeletonGraph, SkeletonNode, Vec3, Vec3d};

use crate::params::QsmParams;
use crate::{QsmError, QsmResult};

/// Detached pieces smaller than `1 / DETACHED_LIMIT` of the cloud are dropped.
const DETACHED_LIMIT: usize = 20;

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index becomes the representative
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Symmetric k-nearest-neighbour graph, sorted by neighbour index.
fn knn_graph(cloud: &Cloud, tree: &KdIndex, k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = cloud.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(2 * k); n];
    for (i, p) in cloud.points().iter().enumerate() {
        for (j, d) in tree.knn(p, k + 1).into_iter().filter(|&(j, _)| j != i).take(k) {
            adj[i].push((j, d));
            adj[j].push((i, d));
        }
    }
    for list in adj.iter_mut() {
        list.sort_by_key(|e| e.0);
        list.dedup_by_key(|e| e.0);
    }
    adj
}

/// Lowest-slab point with the most neighbours within half a level step,
/// among the points accepted by `member`.
fn pick_root(cloud: &Cloud, tree: &KdIndex, step: f64, member: impl Fn(usize) -> bool) -> usize {
    let zmin = cloud.points().iter().enumerate().filter(|&(i, _)| member(i)).map(|(_, p)| p.z).fold(f64::INFINITY, f64::min);
    let mut best = (0usize, f64::INFINITY, usize::MAX);
    for (i, p) in cloud.points().iter().enumerate() {
        if !member(i) || p.z > zmin + step {
            continue;
        }
        let density = tree.within_radius(p, 0.5 * step).len();
        if density > best.0 || (density == best.0 && p.z < best.1) {
            best = (density, p.z, i);
        }
    }
    best.2
}

fn dijkstra(adj: &[Vec<(usize, f64)>], sources: &[usize]) -> (Vec<f64>, Vec<usize>) {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push(Reverse((0.0f64.to_bits(), s)));
    }
    while let Some(Reverse((bits, v))) = heap.pop() {
        let d = f64::from_bits(bits);
        if d > dist[v] {
            continue;
        }
        for &(w, len) in &adj[v] {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                pred[w] = v;
                heap.push(Reverse((nd.to_bits(), w)));
            }
        }
    }
    (dist, pred)
}

/// Skeleton of a tree cloud. Pieces of the k-NN graph not connected to the
/// root are dropped when they hold less than 5% of the points; larger ones
/// are an error.
pub fn extract_skeleton(cloud: &Cloud, params: &QsmParams) -> QsmResult<SkeletonGraph> {
    params.validate()?;
    let n = cloud.len();
    if n < 100 {
        return Err(Error::InvalidInput(format!("skeletonization needs at least 100 points, got {n}")).into());
    }
    let pts = cloud.points();
    let tree = KdIndex::new(cloud);
    let adj = knn_graph(cloud, &tree, params.knn_k);
    let mut parts = DisjointSet::new(n);
    for (i, list) in adj.iter().enumerate() {
        for &(j, _) in list {
            parts.union(i, j);
        }
    }
    let set_of: Vec<usize> = (0..n).map(|i| parts.find(i)).collect();
    let mut sizes: HashMap<usize, usize> = HashMap::new();
    for &r in &set_of {
        *sizes.entry(r).or_default() += 1;
    }
    let root_set = sizes.iter().map(|(&r, &s)| (s, Reverse(r))).max().unwrap().1 .0;
    let root = pick_root(cloud, &tree, params.level_step, |i| set_of[i] == root_set);
    if sizes.len() > 1 {
        let mut others: Vec<usize> = sizes.iter().filter(|(&r, _)| r != root_set).map(|(_, &s)| s).collect();
        others.sort_unstable_by(|a, b| b.cmp(a));
        if others.iter().any(|&s| s * DETACHED_LIMIT >= n) {
            let mut all = vec![sizes[&root_set]];
            all.extend(others);
            return Err(QsmError::Disconnected { sizes: all });
        }
        log::debug!("ignoring {} points outside the root component", n - sizes[&root_set]);
    }

    // geodesic distance is measured from the whole base slab of the root's piece
    let zmin = (0..n).filter(|&i| set_of[i] == root_set).map(|i| pts[i].z).fold(f64::INFINITY, f64::min);
    let sources: Vec<usize> = (0..n)
        .filter(|&i| set_of[i] == root_set && pts[i].z <= zmin + params.level_step)
        .collect();
    let (geo, pred) = dijkstra(&adj, &sources);

    let level: Vec<u32> = geo
        .iter()
        .map(|&g| if g.is_finite() { (g / params.level_step).floor() as u32 } else { u32::MAX })
        .collect();
    let mut ds = DisjointSet::new(n);
    for (i, list) in adj.iter().enumerate() {
        if level[i] == u32::MAX {
            continue;
        }
        for &(j, _) in list {
            if j > i && level[j] == level[i] {
                ds.union(i, j);
            }
        }
    }
    // clusters ordered by level, the root's cluster first, then lowest member index
    let root_rep = ds.find(root);
    let mut reps: Vec<(u32, bool, usize)> = (0..n)
        .filter(|&i| level[i] != u32::MAX && ds.find(i) == i)
        .map(|i| (level[i], i != root_rep, i))
        .collect();
    reps.sort_unstable();
    let id_of: HashMap<usize, usize> = reps.iter().enumerate().map(|(c, &(_, _, r))| (r, c)).collect();
    let m = reps.len();
    let mut cluster = vec![usize::MAX; n];
    let mut count = vec![0usize; m];
    let mut sum = vec![Vec3::zeros(); m];
    let mut entry = vec![usize::MAX; m];
    for i in 0..n {
        if level[i] == u32::MAX {
            continue;
        }
        let c = id_of[&ds.find(i)];
        cluster[i] = c;
        count[c] += 1;
        sum[c] = sum[c] + pts[i];
        if entry[c] == usize::MAX || geo[i] < geo[entry[c]] {
            entry[c] = i;
        }
    }
    let centroid: Vec<Vec3d> = (0..m).map(|c| sum[c] / count[c] as f64).collect();
    let mut spread = vec![0.0; m];
    for i in 0..n {
        if cluster[i] != usize::MAX {
            spread[cluster[i]] += pts[i].distance_squared(&centroid[cluster[i]]);
        }
    }
    let nodes: Vec<SkeletonNode> = (0..m)
        .map(|c| SkeletonNode {
            position: centroid[c],
            radius: (spread[c] / count[c] as f64).sqrt().max(1e-6),
            support: count[c],
        })
        .collect();

    // further pieces of the base level hang off the root cluster
    let root_cluster = cluster[root];
    let mut parent = vec![usize::MAX; m];
    let mut edges = Vec::with_capacity(m.saturating_sub(1));
    for c in 0..m {
        if c == root_cluster {
            continue;
        }
        let p = match pred[entry[c]] {
            usize::MAX => root_cluster,
            i => cluster[i],
        };
        parent[c] = p;
        edges.push([p, c]);
    }

    // trunk: root-to-leaf path with the largest summed radius
    let mut children = vec![Vec::new(); m];
    for c in 0..m {
        if parent[c] != usize::MAX {
            children[parent[c]].push(c);
        }
    }
    let mut best = vec![0.0; m];
    let mut next = vec![usize::MAX; m];
    for c in (0..m).rev() {
        let mut top = 0.0;
        for &k in &children[c] {
            if next[c] == usize::MAX || best[k] > top {
                top = best[k];
                next[c] = k;
            }
        }
        best[c] = nodes[c].radius + top;
    }
    let mut trunk_path = vec![root_cluster];
    while next[*trunk_path.last().unwrap()] != usize::MAX {
        trunk_path.push(next[*trunk_path.last().unwrap()]);
    }

    let mut skeleton = SkeletonGraph {
        nodes,
        edges,
        trunk_path,
        branch_roots: Vec::new(),
    };
    skeleton.branch_roots = branch_roots(&skeleton, params)?;
    skeleton.validate()?;
    Ok(skeleton)
}

/// Trunk node of every qualifying first-order branch, in trunk order. A
/// branch is a subtree hanging off the trunk path whose farthest node lies at
/// least `min_branch_length` along the skeleton from the trunk and which is
/// supported by at least `min_branch_points` points. Skeletons without
/// support counts skip the point test.
pub fn branch_roots(skeleton: &SkeletonGraph, params: &QsmParams) -> QsmResult<Vec<usize>> {
    params.validate()?;
    let adj = skeleton.adjacency()?;
    let mut on_trunk = vec![false; skeleton.nodes.len()];
    for &t in &skeleton.trunk_path {
        on_trunk[t] = true;
    }
    let has_support = skeleton.nodes.iter().any(|n| n.support > 0);
    let mut roots = Vec::new();
    for &t in &skeleton.trunk_path {
        for &child in &adj[t] {
            if on_trunk[child] {
                continue;
            }
            let mut reach = 0.0f64;
            let mut support = 0;
            let mut stack = vec![(child, t, skeleton.nodes[t].position.distance(&skeleton.nodes[child].position))];
            while let Some((v, from, d)) = stack.pop() {
                reach = reach.max(d);
                support += skeleton.nodes[v].support;
                for &w in &adj[v] {
                    if w != from {
                        stack.push((w, v, d + skeleton.nodes[v].position.distance(&skeleton.nodes[w].position)));
                    }
                }
            }
            if reach >= params.min_branch_length && (!has_support || support >= params.min_branch_points) {
                roots.push(t);
            }
        }
    }
    Ok(roots)
}

pub fn count_branches(skeleton: &SkeletonGraph, params: &QsmParams) -> QsmResult<usize> {
    Ok(branch_roots(skeleton, params)?.len())
}
