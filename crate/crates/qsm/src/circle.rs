//! Planar circle fitting: algebraic (Kåsa) start, Gauss-Newton geometric refinement.

use arbor_core::Mat3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleFit {
    pub center: [f64; 2],
    pub radius: f64,
    /// Root-mean-square geometric residual.
    pub rmse: f64,
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let m = Mat3::from_rows(a);
    let det = m.determinant();
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    if !(det.abs() > 1e-14 * scale.powi(3)) {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = a;
        for r in 0..3 {
            mk[r][k] = b[r];
        }
        *o = Mat3::from_rows(mk).determinant() / det;
    }
    Some(out)
}

fn rmse(pts: &[[f64; 2]], c: [f64; 2], r: f64) -> f64 {
    let s: f64 = pts.iter().map(|p| ((p[0] - c[0]).hypot(p[1] - c[1]) - r).powi(2)).sum();
    (s / pts.len() as f64).sqrt()
}

/// Least-squares circle through at least three non-collinear points.
pub fn fit_circle(points: &[[f64; 2]]) -> Option<CircleFit> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0] - mx, p[1] - my]).collect();

    // x^2 + y^2 + D x + E y + F = 0
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for p in &pts {
        let row = [p[0], p[1], 1.0];
        let rhs = -(p[0] * p[0] + p[1] * p[1]);
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * rhs;
        }
    }
    let [d, e, f] = solve3(ata, atb)?;
    let (mut a, mut b) = (-d / 2.0, -e / 2.0);
    let r2 = a * a + b * b - f;
    if !(r2 > 0.0) {
        return None;
    }
    let mut r = r2.sqrt();

    for _ in 0..20 {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for p in &pts {
            let dist = (p[0] - a).hypot(p[1] - b);
            if dist == 0.0 {
                continue;
            }
            let res = dist - r;
            let j = [-(p[0] - a) / dist, -(p[1] - b) / dist, -1.0];
            for i in 0..3 {
                for k in 0..3 {
                    jtj[i][k] += j[i] * j[k];
                }
                jtr[i] += j[i] * res;
            }
        }
        let Some(step) = solve3(jtj, [-jtr[0], -jtr[1], -jtr[2]]) else {
            break;
        };
        a += step[0];
        b += step[1];
        r += step[2];
        if step.iter().map(|s| s.abs()).fold(0.0, f64::max) <= 1e-12 * r.abs().max(1e-12) {
            break;
        }
    }
    if !(r > 0.0 && r.is_finite()) {
        return None;
    }
    Some(CircleFit {
        center: [a + mx, b + my],
        radius: r,
        rmse: rmse(&pts, [a, b], r),
    })
}
