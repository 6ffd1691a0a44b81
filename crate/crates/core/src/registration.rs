//! Rigid point-to-point ICP.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::linalg::{sym_eigen_psd, Mat3, Svd3, Vec3};
use crate::transform::RigidTransform;
use crate::{PointCloud, Real};

/// How the first transform estimate is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Real")]
pub enum IcpInit<T> {
    Identity,
    Given(RigidTransform<T>),
    /// Translate the source centroid onto the target centroid.
    Centroid,
    /// Centroid plus principal-axis alignment; the major axis points up.
    PrincipalAxes,
    /// Run from both `Centroid` and `PrincipalAxes`; keep the better fit.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct IcpParams<T> {
    pub max_iter: usize,
    /// Stop once successive RMS values differ by less than this (meters).
    pub rms_delta: T,
    /// Correspondences farther than this are rejected. `None` uses ten times the
    /// median nearest-neighbor spacing of the target.
    pub max_corr_dist: Option<T>,
    pub init: IcpInit<T>,
}

impl<T: Real> Default for IcpParams<T> {
    fn default() -> Self {
        IcpParams {
            max_iter: 200,
            rms_delta: T::lit(1e-7),
            max_corr_dist: None,
            init: IcpInit::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct IcpReport<T> {
    /// Maps the source into the target frame.
    pub transform: RigidTransform<T>,
    /// Correspondence RMS (meters) measured at the start of every iteration.
    pub rms_history: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub inlier_fraction: T,
    pub max_corr_dist: T,
}

impl<T: Real> IcpReport<T> {
    pub fn final_rms(&self) -> T {
        *self.rms_history.last().expect("at least one iteration")
    }
}

/// Least-squares rigid transform mapping `src[i]` onto `dst[i]` (Kabsch).
pub fn best_rigid_transform<T: Real>(src: &[Vec3<T>], dst: &[Vec3<T>]) -> Result<RigidTransform<T>> {
    if src.len() != dst.len() || src.len() < 3 {
        return Err(Error::Registration {
            reason: "fewer than 3 correspondences".into(),
            diagnostics: format!("pairs={}", src.len().min(dst.len())),
        });
    }
    let n = T::from_usize_lossy(src.len());
    let mut cs = Vec3::zeros();
    let mut cd = Vec3::zeros();
    for (s, d) in src.iter().zip(dst) {
        cs += *s;
        cd += *d;
    }
    cs = cs / n;
    cd = cd / n;
    let mut h = Mat3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h = h.add(&Mat3::outer(&(*s - cs), &(*d - cd)));
    }
    let svd = Svd3::new(&h);
    if svd.rank(T::lit(1e-10)) < 2 {
        return Err(Error::Registration {
            reason: "rank-deficient cross-covariance".into(),
            diagnostics: format!(
                "pairs={} singular=[{}, {}, {}]",
                src.len(),
                svd.singular[0],
                svd.singular[1],
                svd.singular[2]
            ),
        });
    }
    let vut = svd.v.mul_mat(&svd.u.transpose());
    let d = if vut.determinant() < T::zero() { -T::one() } else { T::one() };
    let r = svd
        .v
        .mul_mat(&Mat3::diag(T::one(), T::one(), d))
        .mul_mat(&svd.u.transpose());
    let r = r.orthonormalized();
    let t = cd - r.mul_vec(&cs);
    Ok(RigidTransform::new_orthonormalized(r, t))
}

/// Median distance from each point to its nearest other point.
pub fn median_spacing<T: Real>(cloud: &PointCloud<T>, tree: &KdTree<T>) -> T {
    let mut d: Vec<T> = cloud
        .points()
        .iter()
        .filter_map(|p| tree.knn(p, 2).get(1).map(|x| x.1))
        .collect();
    if d.is_empty() {
        return T::zero();
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap());
    *m
}

fn check_extent<T: Real>(cloud: &PointCloud<T>, name: &str) -> Result<()> {
    let ok = cloud.len() >= 3
        && cloud
            .covariance()
            .map(|(_, c)| Svd3::new(&c).rank(T::lit(1e-12)) >= 2)
            .unwrap_or(false);
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} cloud needs at least 3 non-collinear points")))
    }
}

fn principal_frame<T: Real>(cloud: &PointCloud<T>) -> (Vec3<T>, Mat3<T>) {
    let (c, cov) = cloud.covariance().expect("non-empty cloud");
    let (_, vecs) = sym_eigen_psd(&cov);
    let skew = |a: &Vec3<T>| -> T {
        cloud
            .points()
            .iter()
            .map(|p| {
                let s = (*p - c).dot(a);
                s * s * s
            })
            .sum()
    };
    let mut a1 = vecs.col(0);
    let flip1 = if a1.z.abs() > T::lit(0.5) { a1.z < T::zero() } else { skew(&a1) < T::zero() };
    if flip1 {
        a1 = -a1;
    }
    let mut a2 = vecs.col(1);
    if skew(&a2) < T::zero() {
        a2 = -a2;
    }
    let a3 = a1.cross(&a2);
    (c, Mat3::from_cols(a1, a2, a3))
}

fn initial_transform<T: Real>(source: &PointCloud<T>, target: &PointCloud<T>, init: &IcpInit<T>) -> RigidTransform<T> {
    match init {
        IcpInit::Identity | IcpInit::Auto => RigidTransform::identity(),
        IcpInit::Given(t) => *t,
        IcpInit::Centroid => {
            RigidTransform::from_translation(target.centroid().unwrap() - source.centroid().unwrap())
        }
        IcpInit::PrincipalAxes => {
            let (cs, a_s) = principal_frame(source);
            let (ct, a_t) = principal_frame(target);
            let r = a_t.mul_mat(&a_s.transpose()).orthonormalized();
            RigidTransform::new_orthonormalized(r, ct - r.mul_vec(&cs))
        }
    }
}

/// Aligns `source` to `target`; the returned transform maps source into target.
pub fn icp_align<T: Real>(
    source: &PointCloud<T>,
    target: &PointCloud<T>,
    params: &IcpParams<T>,
) -> Result<IcpReport<T>> {
    check_extent(source, "source")?;
    check_extent(target, "target")?;
    if params.max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    let tree = KdTree::new(target);
    let max_corr = match params.max_corr_dist {
        Some(d) if d > T::zero() => d,
        Some(_) => return Err(Error::invalid("max_corr_dist must be positive")),
        None => T::lit(10.0) * median_spacing(target, &tree),
    };
    if !(max_corr > T::zero()) {
        return Err(Error::invalid("target has no positive point spacing"));
    }
    match params.init {
        IcpInit::Auto => {
            let a = run_icp(source, &tree, params, max_corr, initial_transform(source, target, &IcpInit::Centroid));
            let b = run_icp(source, &tree, params, max_corr, initial_transform(source, target, &IcpInit::PrincipalAxes));
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    let sa = truncated_score(source, &tree, &a.transform, max_corr);
                    let sb = truncated_score(source, &tree, &b.transform, max_corr);
                    Ok(if sb < sa { b } else { a })
                }
                (Ok(a), Err(_)) => Ok(a),
                (Err(_), Ok(b)) => Ok(b),
                (Err(e), Err(_)) => Err(e),
            }
        }
        ref init => run_icp(source, &tree, params, max_corr, initial_transform(source, target, init)),
    }
}

/// Mean distance to the target with every term capped at `cap`.
fn truncated_score<T: Real>(source: &PointCloud<T>, tree: &KdTree<T>, t: &RigidTransform<T>, cap: T) -> T {
    let mut s = T::zero();
    for p in source.points() {
        s += match tree.nearest_within(&t.apply(p), cap * cap) {
            Some((_, d2)) => d2.sqrt(),
            None => cap,
        };
    }
    s / T::from_usize_lossy(source.len())
}

fn run_icp<T: Real>(
    source: &PointCloud<T>,
    tree: &KdTree<T>,
    params: &IcpParams<T>,
    max_corr: T,
    init: RigidTransform<T>,
) -> Result<IcpReport<T>> {
    let max_corr2 = max_corr * max_corr;
    let mut transform = init;
    let mut history: Vec<T> = Vec::new();
    let mut converged = false;
    let mut inliers = 0usize;
    let mut src = Vec::with_capacity(source.len());
    let mut dst = Vec::with_capacity(source.len());
    for iter in 0..params.max_iter {
        src.clear();
        dst.clear();
        let mut sum = T::zero();
        for p in source.points() {
            let q = transform.apply(p);
            if let Some((j, d2)) = tree.nearest_within(&q, max_corr2) {
                sum += d2;
                src.push(q);
                dst.push(tree_point(tree, j));
            }
        }
        inliers = src.len();
        if inliers < 3 {
            return Err(Error::Registration {
                reason: "fewer than 3 correspondences within max_corr_dist".into(),
                diagnostics: format!("iteration={} accepted={} max_corr_dist={}", iter + 1, inliers, max_corr),
            });
        }
        let rms = (sum / T::from_usize_lossy(inliers)).sqrt();
        let stop = history.last().is_some_and(|&prev| (rms - prev).abs() < params.rms_delta);
        history.push(rms);
        if stop {
            converged = true;
            break;
        }
        if rms == T::zero() {
            // exact alignment; any update would only add rounding noise
            continue;
        }
        let step = best_rigid_transform(&src, &dst).map_err(|e| match e {
            Error::Registration { reason, diagnostics } => Error::Registration {
                reason,
                diagnostics: format!("iteration={} {}", iter + 1, diagnostics),
            },
            other => other,
        })?;
        transform = step.compose(&transform);
    }
    Ok(IcpReport {
        transform,
        iterations: history.len(),
        rms_history: history,
        converged,
        inlier_fraction: T::from_usize_lossy(inliers) / T::from_usize_lossy(source.len()),
        max_corr_dist: max_corr,
    })
}

#[inline]
fn tree_point<T: Real>(tree: &KdTree<T>, j: usize) -> Vec3<T> {
    tree.point(j)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_cloud() -> PointCloud<f64> {
        let mut pts = Vec::new();
        for i in 0..12 {
            for j in 0..9 {
                for k in 0..5 {
                    let (x, y, z) = (i as f64 * 0.1, j as f64 * 0.13, k as f64 * 0.3);
                    pts.push(Vec3::new(x + 0.01 * (j as f64).sin(), y, z + 0.02 * x * x));
                }
            }
        }
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn kabsch_recovers_exact_transform() {
        let c = grid_cloud();
        let t = RigidTransform::from_axis_angle(&Vec3::new(0.3, -0.2, 1.0), 0.4, Vec3::new(0.5, -0.1, 0.2));
        let moved: Vec<_> = c.points().iter().map(|p| t.apply(p)).collect();
        let est = best_rigid_transform(c.points(), &moved).unwrap();
        let (dr, dt) = est.difference(&t);
        assert!(dr < 1e-12 && dt < 1e-12);
    }

    #[test]
    fn identical_clouds_converge_immediately() {
        let c = grid_cloud();
        let params = IcpParams {
            init: IcpInit::Identity,
            ..Default::default()
        };
        let r = icp_align(&c, &c, &params).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 2);
        assert_eq!(r.final_rms(), 0.0);
        let (dr, dt) = r.transform.difference(&RigidTransform::identity());
        assert!(dr < 1e-12 && dt < 1e-12);
    }

    #[test]
    fn collinear_input_is_rejected() {
        let line = PointCloud::new((0..10).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect()).unwrap();
        assert!(icp_align(&line, &grid_cloud(), &IcpParams::default()).is_err());
        let mut pairs = vec![Vec3::new(0.0, 0.0, 0.0); 5];
        pairs[1].x = 1.0;
        assert!(matches!(
            best_rigid_transform(&pairs, &pairs),
            Err(Error::Registration { .. })
        ));
    }

    #[test]
    fn far_target_without_overlap_fails_with_diagnostics() {
        let c = grid_cloud();
        let far = c.map_points(|p| *p + Vec3::new(100.0, 0.0, 0.0));
        let params = IcpParams {
            init: IcpInit::Identity,
            ..Default::default()
        };
        match icp_align(&c, &far, &params) {
            Err(Error::Registration { diagnostics, .. }) => assert!(diagnostics.contains("accepted=0")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
