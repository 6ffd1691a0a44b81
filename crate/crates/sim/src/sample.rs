use arbor_core::{Cloud, Error, Mesh, Result};
use rand::Rng;

use crate::rng::{stream, Stream};

/// `n` points distributed uniformly by area over the mesh surface.
pub fn sample_surface(mesh: &Mesh, n: usize, seed: u64) -> Result<Cloud> {
    if mesh.is_empty() {
        return Err(Error::InvalidInput("cannot sample an empty mesh".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles().len());
    let mut total = 0.0;
    for t in 0..mesh.triangles().len() {
        total += mesh.triangle_area(t);
        cumulative.push(total);
    }
    let mut rng = stream(seed, Stream::Sampling);
    let last = cumulative.len() - 1;
    let points = (0..n)
        .map(|_| {
            let r = rng.random::<f64>() * total;
            let t = cumulative.partition_point(|&c| c <= r).min(last);
            let [a, b, c] = mesh.corners(t);
            let s = rng.random::<f64>().sqrt();
            let r2 = rng.random::<f64>();
            a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
        })
        .collect();
    Cloud::new(points)
}
