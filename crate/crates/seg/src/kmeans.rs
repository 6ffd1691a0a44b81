//! Lloyd's k-means with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans<const D: usize> {
    pub centroids: Vec<[f64; D]>,
    pub assignment: Vec<usize>,
    /// Sum of squared distances after each assignment step.
    pub objective: Vec<f64>,
    pub converged: bool,
}

#[inline]
fn dist2<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    (0..D).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum()
}

/// Index of the closest centroid, lowest index on ties.
pub fn nearest<const D: usize>(p: &[f64; D], centroids: &[[f64; D]]) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < bd {
            bd = d;
            best = j;
        }
    }
    best
}

fn seed_plus_plus<const D: usize>(data: &[[f64; D]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; D]> {
    let mut centroids = vec![data[rng.random_range(0..data.len())]];
    let mut d2: Vec<f64> = data.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = data.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > r {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..data.len())
        };
        let c = data[next];
        for (w, p) in d2.iter_mut().zip(data) {
            *w = w.min(dist2(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Clusters `data` into `k` groups. Stops after `max_iter` rounds or when the
/// objective improves by less than `tol` relative to its value. Requires
/// `1 <= k <= data.len()`.
pub fn kmeans<const D: usize>(data: &[[f64; D]], k: usize, seed: u64, max_iter: usize, tol: f64) -> KMeans<D> {
    assert!(k >= 1 && k <= data.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(data, k, &mut rng);
    let mut assignment = vec![0; data.len()];
    let mut objective = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let mut obj = 0.0;
        for (a, p) in assignment.iter_mut().zip(data) {
            *a = nearest(p, &centroids);
            obj += dist2(p, &centroids[*a]);
        }
        if let Some(&prev) = objective.last() {
            let prev: f64 = prev;
            if prev - obj <= tol * prev.max(f64::MIN_POSITIVE) {
                objective.push(obj);
                converged = true;
                break;
            }
        }
        objective.push(obj);
        let mut sums = vec![[0.0; D]; k];
        let mut counts = vec![0usize; k];
        for (a, p) in assignment.iter().zip(data) {
            counts[*a] += 1;
            for d in 0..D {
                sums[*a][d] += p[d];
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                for d in 0..D {
                    centroids[j][d] = sums[j][d] / counts[j] as f64;
                }
            }
        }
    }
    KMeans {
        centroids,
        assignment,
        objective,
        converged,
    }
}
