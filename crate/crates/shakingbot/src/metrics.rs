//! Bag-opening metrics.
//!
//! The rim is projected to the horizontal plane and its convex hull measured.
//! `a_ch` normalizes hull area by the isoperimetric maximum for the rim's
//! rest perimeter, so a fully circular opening scores 1. `e_ch` is the square
//! root of the principal second-moment ratio of the hull region (analytic
//! polygon area moments, so it is exactly rigid-motion invariant); 1 is
//! isotropic, large values are slit-like.

use crate::bag::Vec3;
use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

#[derive(Debug, Clone)]
pub struct OpeningMetrics {
    /// Convex hull of the projected rim, counterclockwise.
    pub hull: Vec<Point2>,
    /// Hull area, m^2.
    pub area: f64,
    /// Normalized convex hull area, dimensionless.
    pub a_ch: f64,
    /// Convex hull elongation, >= 1 (capped when degenerate).
    pub e_ch: f64,
    /// True when the hull is degenerate (zero area).
    pub degenerate: bool,
    /// Mean distance between corresponding rim particles of the two layers,
    /// m. Filled by the caller; 0 when unknown.
    pub rim_separation: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct OpeningThresholds {
    pub a_min: f64,
    pub e_max: f64,
}

fn cross(o: &Point2, a: &Point2, b: &Point2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull via Andrew's monotone chain, counterclockwise order.
/// Collinear inputs yield a degenerate two-point "polygon".
pub fn convex_hull_2d(points: &[Point2]) -> Result<Vec<Point2>> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("convex hull of empty set".into()));
    }
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    if pts.len() <= 2 {
        return Ok(pts);
    }
    let mut lower: Vec<Point2> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    Ok(lower)
}

/// Shoelace area of a simple polygon (absolute value).
pub fn polygon_area(poly: &[Point2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut sum = 0.0;
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        sum += a[0] * b[1] - b[0] * a[1];
    }
    sum.abs() / 2.0
}

pub fn polygon_centroid(poly: &[Point2]) -> Point2 {
    if poly.len() < 3 {
        let n = poly.len().max(1) as f64;
        let sx: f64 = poly.iter().map(|p| p[0]).sum();
        let sy: f64 = poly.iter().map(|p| p[1]).sum();
        return [sx / n, sy / n];
    }
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for k in 0..poly.len() {
        let p = poly[k];
        let q = poly[(k + 1) % poly.len()];
        let w = p[0] * q[1] - q[0] * p[1];
        a2 += w;
        cx += (p[0] + q[0]) * w;
        cy += (p[1] + q[1]) * w;
    }
    if a2.abs() < 1e-15 {
        let n = poly.len() as f64;
        return [
            poly.iter().map(|p| p[0]).sum::<f64>() / n,
            poly.iter().map(|p| p[1]).sum::<f64>() / n,
        ];
    }
    [cx / (3.0 * a2), cy / (3.0 * a2)]
}

/// Central second moments of a polygon's area (cxx, cxy, cyy). Exact, so the
/// derived elongation is invariant under rigid motions and uniform scaling.
pub fn area_covariance(poly: &[Point2]) -> (f64, f64, f64) {
    let n = poly.len();
    let mut a2 = 0.0;
    let (mut sx, mut sy) = (0.0, 0.0);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let p = poly[k];
        let q = poly[(k + 1) % n];
        let w = p[0] * q[1] - q[0] * p[1];
        a2 += w;
        sx += (p[0] + q[0]) * w;
        sy += (p[1] + q[1]) * w;
        sxx += (p[0] * p[0] + p[0] * q[0] + q[0] * q[0]) * w;
        syy += (p[1] * p[1] + p[1] * q[1] + q[1] * q[1]) * w;
        sxy += (p[0] * q[1] + 2.0 * p[0] * p[1] + 2.0 * q[0] * q[1] + q[0] * p[1]) * w;
    }
    let area = a2 / 2.0;
    let cx = sx / (3.0 * a2);
    let cy = sy / (3.0 * a2);
    let ixx = sxx / 12.0 / area - cx * cx;
    let iyy = syy / 12.0 / area - cy * cy;
    let ixy = sxy / 24.0 / area - cx * cy;
    (ixx, ixy, iyy)
}

/// Compute the opening metrics from 3D rim points and the rim rest perimeter.
pub fn opening_metrics(
    rim: &[Vec3],
    rim_perimeter_rest: f64,
    e_cap: f64,
) -> Result<OpeningMetrics> {
    if rim.is_empty() {
        return Err(Error::InvalidArgument("rim is empty".into()));
    }
    let projected: Vec<Point2> = rim.iter().map(|p| [p.x, p.y]).collect();
    let hull = convex_hull_2d(&projected)?;
    let area = polygon_area(&hull);
    let reference_area = rim_perimeter_rest * rim_perimeter_rest / (4.0 * std::f64::consts::PI);
    let a_ch = if reference_area > 0.0 {
        area / reference_area
    } else {
        0.0
    };
    let (degenerate, e_ch) = if hull.len() < 3 || area < 1e-12 {
        (true, e_cap)
    } else {
        let (ixx, ixy, iyy) = area_covariance(&hull);
        let tr = ixx + iyy;
        let disc = (((ixx - iyy) / 2.0).powi(2) + ixy * ixy).sqrt();
        let l_max = tr / 2.0 + disc;
        let l_min = tr / 2.0 - disc;
        let e = (l_max / l_min.max(1e-18)).sqrt();
        (false, e.min(e_cap).max(1.0))
    };
    Ok(OpeningMetrics {
        hull,
        area,
        a_ch,
        e_ch,
        degenerate,
        rim_separation: 0.0,
    })
}

/// Opening sufficiency decision.
pub fn opening_ok(m: &OpeningMetrics, thresholds: &OpeningThresholds) -> bool {
    debug_assert!(thresholds.a_min > 0.0 && thresholds.a_min < 1.0);
    debug_assert!(thresholds.e_max > 1.0);
    m.a_ch >= thresholds.a_min && m.e_ch <= thresholds.e_max
}
