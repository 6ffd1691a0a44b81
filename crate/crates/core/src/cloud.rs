use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::Real;

/// RGB color with channels in `[0, 1]`.
pub type Rgb = [f32; 3];

/// Ordered list of 3D points in meters with optional per-point color.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud<T> {
    points: Vec<Vec3<T>>,
    colors: Option<Vec<Rgb>>,
}

impl<T: Real> PointCloud<T> {
    /// Fails if any coordinate is non-finite.
    pub fn new(points: Vec<Vec3<T>>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
        }
        Ok(PointCloud {
            points,
            colors: None,
        })
    }

    pub fn with_colors(points: Vec<Vec3<T>>, colors: Vec<Rgb>) -> Result<Self> {
        if colors.len() != points.len() {
            return Err(Error::invalid(format!(
                "{} colors for {} points",
                colors.len(),
                points.len()
            )));
        }
        if colors.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::invalid("color channel outside [0, 1]"));
        }
        let mut cloud = Self::new(points)?;
        cloud.colors = Some(colors);
        Ok(cloud)
    }

    pub fn empty() -> Self {
        PointCloud {
            points: Vec::new(),
            colors: None,
        }
    }

    #[inline]
    pub fn points(&self) -> &[Vec3<T>] {
        &self.points
    }

    #[inline]
    pub fn colors(&self) -> Option<&[Rgb]> {
        self.colors.as_deref()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Vec3<T>> {
        self.points
    }

    /// Maps every point, keeping colors. The caller guarantees finiteness.
    pub fn map_points(&self, f: impl Fn(&Vec3<T>) -> Vec3<T>) -> Self {
        PointCloud {
            points: self.points.iter().map(f).collect(),
            colors: self.colors.clone(),
        }
    }

    /// Keeps the points whose index satisfies `keep`, preserving order.
    pub fn select(&self, mut keep: impl FnMut(usize, &Vec3<T>) -> bool) -> Self {
        let mut points = Vec::new();
        let mut colors = self.colors.as_ref().map(|_| Vec::new());
        for (i, p) in self.points.iter().enumerate() {
            if keep(i, p) {
                points.push(*p);
                if let (Some(out), Some(src)) = (colors.as_mut(), self.colors.as_ref()) {
                    out.push(src[i]);
                }
            }
        }
        PointCloud { points, colors }
    }

    /// Concatenates clouds. Colors are kept only if every part has them.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a PointCloud<T>>) -> Self {
        let parts: Vec<_> = parts.into_iter().collect();
        let all_colored = !parts.is_empty() && parts.iter().all(|c| c.colors.is_some());
        let mut points = Vec::with_capacity(parts.iter().map(|c| c.len()).sum());
        let mut colors = Vec::new();
        for c in &parts {
            points.extend_from_slice(&c.points);
            if all_colored {
                colors.extend_from_slice(c.colors.as_ref().unwrap());
            }
        }
        PointCloud {
            points,
            colors: all_colored.then_some(colors),
        }
    }

    pub fn centroid(&self) -> Option<Vec3<T>> {
        if self.points.is_empty() {
            return None;
        }
        let mut s = Vec3::zeros();
        for p in &self.points {
            s += *p;
        }
        Some(s / T::from_usize_lossy(self.points.len()))
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> Option<(Vec3<T>, Vec3<T>)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (lo.component_min(p), hi.component_max(p))
        }))
    }

    /// Sample covariance about the centroid (divides by `n`).
    pub fn covariance(&self) -> Option<(Vec3<T>, Mat3<T>)> {
        let c = self.centroid()?;
        let mut cov = Mat3::zeros();
        for p in &self.points {
            let d = *p - c;
            cov = cov.add(&Mat3::outer(&d, &d));
        }
        Some((c, cov.scale(T::one() / T::from_usize_lossy(self.len()))))
    }

    pub fn cast<U: Real>(&self) -> PointCloud<U> {
        PointCloud {
            points: self.points.iter().map(|p| p.cast()).collect(),
            colors: self.colors.clone(),
        }
    }
}
