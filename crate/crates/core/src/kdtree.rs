//! Balanced kd-tree over a point set.
//!
//! Nodes split at the median of their widest bounding-box axis. Every query returns
//! exactly what a linear scan returns, with ties broken by lowest point index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::{PointCloud, Real};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: T, left: u32, right: u32 },
}

#[derive(Debug, Clone)]
pub struct KdTree<T> {
    // points stored in tree order, alongside their original indices
    pts: Vec<Vec3<T>>,
    ids: Vec<u32>,
    // inverse of `ids`
    slot: Vec<u32>,
    nodes: Vec<Node<T>>,
}

/// `(squared distance, index)` ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate<T> {
    d2: T,
    idx: u32,
}

impl<T: Real> Eq for Candidate<T> {}

impl<T: Real> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for Candidate<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .partial_cmp(&other.d2)
            .unwrap_or(Ordering::Equal)
            .then(self.idx.cmp(&other.idx))
    }
}

impl<T: Real> KdTree<T> {
    pub fn new(cloud: &PointCloud<T>) -> Self {
        Self::from_points(cloud.points())
    }

    pub fn from_points(points: &[Vec3<T>]) -> Self {
        assert!(points.len() < u32::MAX as usize, "too many points for kd-tree");
        let mut ids: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::new();
        if !points.is_empty() {
            build(points, &mut ids, 0, &mut nodes);
        }
        let pts = ids.iter().map(|&i| points[i as usize]).collect();
        let mut slot = vec![0u32; ids.len()];
        for (k, &i) in ids.iter().enumerate() {
            slot[i as usize] = k as u32;
        }
        KdTree { pts, ids, slot, nodes }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pts.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    /// Stored point with original index `idx`.
    pub fn point(&self, idx: usize) -> Vec3<T> {
        self.pts[self.slot[idx] as usize]
    }

    /// Nearest stored point: `(index, distance)`.
    pub fn nearest(&self, q: &Vec3<T>) -> Result<(usize, T)> {
        if self.is_empty() {
            return Err(Error::invalid("nearest-neighbor query on an empty index"));
        }
        let mut best = Candidate {
            d2: T::infinity(),
            idx: u32::MAX,
        };
        self.nearest_rec(0, q, &mut best);
        Ok((best.idx as usize, best.d2.sqrt()))
    }

    /// Nearest stored point with squared distance, skipping the `Result` wrapper.
    /// Panics on an empty index.
    #[inline]
    pub fn nearest_squared(&self, q: &Vec3<T>) -> (usize, T) {
        assert!(!self.is_empty(), "nearest-neighbor query on an empty index");
        let mut best = Candidate {
            d2: T::infinity(),
            idx: u32::MAX,
        };
        self.nearest_rec(0, q, &mut best);
        (best.idx as usize, best.d2)
    }

    /// Nearest stored point with squared distance at most `max_d2`, if any.
    /// Faster than [`Self::nearest_squared`] for queries far from the data.
    #[inline]
    pub fn nearest_within(&self, q: &Vec3<T>, max_d2: T) -> Option<(usize, T)> {
        if self.is_empty() {
            return None;
        }
        let mut best = Candidate {
            d2: max_d2,
            idx: u32::MAX,
        };
        self.nearest_rec(0, q, &mut best);
        (best.idx != u32::MAX).then_some((best.idx as usize, best.d2))
    }

    fn nearest_rec(&self, node: usize, q: &Vec3<T>, best: &mut Candidate<T>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for k in start as usize..end as usize {
                    let c = Candidate {
                        d2: self.pts[k].distance_squared(q),
                        idx: self.ids[k],
                    };
                    if c < *best {
                        *best = c;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff < T::zero() { (left, right) } else { (right, left) };
                self.nearest_rec(near as usize, q, best);
                if diff * diff <= best.d2 {
                    self.nearest_rec(far as usize, q, best);
                }
            }
        }
    }

    /// The `k` nearest points sorted by `(distance, index)`.
    pub fn knn(&self, q: &Vec3<T>, k: usize) -> Vec<(usize, T)> {
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(0, q, k, &mut heap);
        let mut out: Vec<_> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.idx as usize, c.d2.sqrt())).collect()
    }

    fn knn_rec(&self, node: usize, q: &Vec3<T>, k: usize, heap: &mut BinaryHeap<Candidate<T>>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start as usize..end as usize {
                    let c = Candidate {
                        d2: self.pts[i].distance_squared(q),
                        idx: self.ids[i],
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff < T::zero() { (left, right) } else { (right, left) };
                self.knn_rec(near as usize, q, k, heap);
                if heap.len() < k || diff * diff <= heap.peek().unwrap().d2 {
                    self.knn_rec(far as usize, q, k, heap);
                }
            }
        }
    }

    /// Indices of all points within `radius` (inclusive), ascending.
    pub fn within_radius(&self, q: &Vec3<T>, radius: T) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.is_empty() {
            self.radius_rec(0, q, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, node: usize, q: &Vec3<T>, r2: T, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start as usize..end as usize {
                    if self.pts[i].distance_squared(q) <= r2 {
                        out.push(self.ids[i] as usize);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff < T::zero() { (left, right) } else { (right, left) };
                self.radius_rec(near as usize, q, r2, out);
                if diff * diff <= r2 {
                    self.radius_rec(far as usize, q, r2, out);
                }
            }
        }
    }
}

fn build<T: Real>(points: &[Vec3<T>], ids: &mut [u32], offset: usize, nodes: &mut Vec<Node<T>>) -> u32 {
    let me = nodes.len() as u32;
    let n = ids.len();
    if n <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + n) as u32,
        });
        return me;
    }
    let first = points[ids[0] as usize];
    let (lo, hi) = ids.iter().fold((first, first), |(lo, hi), &i| {
        let p = &points[i as usize];
        (lo.component_min(p), hi.component_max(p))
    });
    let ext = hi - lo;
    let mut axis = 0;
    for a in 1..3 {
        if ext[a] > ext[axis] {
            axis = a;
        }
    }
    let mid = n / 2;
    ids.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .partial_cmp(&points[b as usize][axis])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let value = points[ids[mid] as usize][axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (l, r) = ids.split_at_mut(mid);
    let left = build(points, l, offset, nodes);
    let right = build(points, r, offset + mid, nodes);
    nodes[me as usize] = Node::Split {
        axis: axis as u8,
        value,
        left,
        right,
    };
    me
}

/// Exhaustive nearest search with the same tie-break rule; used as a reference.
pub fn linear_nearest<T: Real>(points: &[Vec3<T>], q: &Vec3<T>) -> Option<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for (i, p) in points.iter().enumerate() {
        let d2 = p.distance_squared(q);
        if best.is_none_or(|(_, b)| d2 < b) {
            best = Some((i, d2));
        }
    }
    best.map(|(i, d2)| (i, d2.sqrt()))
}
