use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::{PointCloud, Real};

/// Integer voxel coordinate. Ordering is scan order: `x` fastest, then `y`, then `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VoxelKey {
    pub z: i64,
    pub y: i64,
    pub x: i64,
}

impl VoxelKey {
    pub fn new(x: i64, y: i64, z: i64) -> Self {
        VoxelKey { z, y, x }
    }
}

/// Sparse occupancy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid<T> {
    pub origin: Vec3<T>,
    pub voxel_size: T,
    counts: BTreeMap<VoxelKey, usize>,
}

impl<T: Real> VoxelGrid<T> {
    pub fn empty(origin: Vec3<T>, voxel_size: T) -> Result<Self> {
        check_size(voxel_size)?;
        Ok(VoxelGrid {
            origin,
            voxel_size,
            counts: BTreeMap::new(),
        })
    }

    #[inline]
    pub fn key_of(&self, p: &Vec3<T>) -> VoxelKey {
        key_of(&self.origin, self.voxel_size, p)
    }

    pub fn insert(&mut self, p: &Vec3<T>) {
        *self.counts.entry(self.key_of(p)).or_insert(0) += 1;
    }

    pub fn counts(&self) -> &BTreeMap<VoxelKey, usize> {
        &self.counts
    }

    pub fn count(&self, key: &VoxelKey) -> usize {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn occupied(&self) -> usize {
        self.counts.len()
    }

    /// Extent of the occupied keys as `(min key, dims)`; `None` if empty.
    pub fn extent(&self) -> Option<(VoxelKey, [usize; 3])> {
        let mut it = self.counts.keys();
        let first = *it.next()?;
        let (lo, hi) = self.counts.keys().fold((first, first), |(lo, hi), k| {
            (
                VoxelKey::new(lo.x.min(k.x), lo.y.min(k.y), lo.z.min(k.z)),
                VoxelKey::new(hi.x.max(k.x), hi.y.max(k.y), hi.z.max(k.z)),
            )
        });
        Some((
            lo,
            [
                (hi.x - lo.x + 1) as usize,
                (hi.y - lo.y + 1) as usize,
                (hi.z - lo.z + 1) as usize,
            ],
        ))
    }
}

fn check_size<T: Real>(voxel_size: T) -> Result<()> {
    if !(voxel_size > T::zero() && voxel_size.is_finite()) {
        return Err(Error::invalid("voxel size must be positive and finite"));
    }
    Ok(())
}

#[inline]
fn key_of<T: Real>(origin: &Vec3<T>, size: T, p: &Vec3<T>) -> VoxelKey {
    let f = |a: T, o: T| ((a - o) / size).floor().to_i64().unwrap_or(i64::MAX);
    VoxelKey::new(f(p.x, origin.x), f(p.y, origin.y), f(p.z, origin.z))
}

/// Bins every point into `floor((p - origin) / voxel_size)`.
pub fn voxelize<T: Real>(cloud: &PointCloud<T>, voxel_size: T, origin: Vec3<T>) -> Result<VoxelGrid<T>> {
    let mut grid = VoxelGrid::empty(origin, voxel_size)?;
    for p in cloud.points() {
        grid.insert(p);
    }
    Ok(grid)
}

/// One point per occupied voxel (grid anchored at the world origin), placed at the
/// centroid of that voxel's members. Output is in voxel scan order.
pub fn downsample<T: Real>(cloud: &PointCloud<T>, voxel_size: T) -> Result<PointCloud<T>> {
    check_size(voxel_size)?;
    let origin = Vec3::zeros();
    let mut acc: BTreeMap<VoxelKey, (Vec3<T>, [f64; 3], usize)> = BTreeMap::new();
    let colors = cloud.colors();
    for (i, p) in cloud.points().iter().enumerate() {
        let e = acc
            .entry(key_of(&origin, voxel_size, p))
            .or_insert((Vec3::zeros(), [0.0; 3], 0));
        e.0 += *p;
        if let Some(c) = colors {
            for k in 0..3 {
                e.1[k] += c[i][k] as f64;
            }
        }
        e.2 += 1;
    }
    let mut points = Vec::with_capacity(acc.len());
    let mut out_colors = Vec::with_capacity(if colors.is_some() { acc.len() } else { 0 });
    for (sum, csum, n) in acc.into_values() {
        points.push(sum / T::from_usize_lossy(n));
        let nf = n as f64;
        out_colors.push([
            (csum[0] / nf) as f32,
            (csum[1] / nf) as f32,
            (csum[2] / nf) as f32,
        ]);
    }
    match colors {
        Some(_) => PointCloud::with_colors(points, out_colors.iter().map(|c| c.map(|v| v.clamp(0.0, 1.0))).collect()),
        None => PointCloud::new(points),
    }
}
