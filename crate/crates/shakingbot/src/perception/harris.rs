//! Harris corner detection on depth rasters, used by the analytic baseline
//! to find the handles.

use crate::config::PerceptionConfig;
use crate::error::{Error, Result};
use crate::perception::raster::{gaussian_blur, sobel_gradients, Raster};

/// Harris response R = det(M) - k * trace(M)^2 over the Gaussian-windowed
/// Sobel structure tensor.
pub fn harris_response(depth: &Raster<f64>, sigma: f64, k: f64) -> Raster<f64> {
    let (gx, gy) = sobel_gradients(depth);
    let mut ixx = Raster::new(depth.width, depth.height, 0.0);
    let mut ixy = Raster::new(depth.width, depth.height, 0.0);
    let mut iyy = Raster::new(depth.width, depth.height, 0.0);
    for i in 0..depth.data.len() {
        ixx.data[i] = gx.data[i] * gx.data[i];
        ixy.data[i] = gx.data[i] * gy.data[i];
        iyy.data[i] = gy.data[i] * gy.data[i];
    }
    let sxx = gaussian_blur(&ixx, sigma);
    let sxy = gaussian_blur(&ixy, sigma);
    let syy = gaussian_blur(&iyy, sigma);
    let mut r = Raster::new(depth.width, depth.height, 0.0);
    for i in 0..depth.data.len() {
        let det = sxx.data[i] * syy.data[i] - sxy.data[i] * sxy.data[i];
        let tr = sxx.data[i] + syy.data[i];
        r.data[i] = det - k * tr * tr;
    }
    r
}

/// Local maxima of the response above a relative threshold, with
/// non-max suppression over the given radius.
fn response_maxima(r: &Raster<f64>, nms_radius: usize, rel_threshold: f64) -> Vec<(usize, usize, f64)> {
    let max_r = r.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max_r > 0.0) {
        return Vec::new();
    }
    let threshold = rel_threshold * max_r;
    let rad = nms_radius as isize;
    let mut out = Vec::new();
    for y in 0..r.height as isize {
        'px: for x in 0..r.width as isize {
            let v = *r.get(x as usize, y as usize);
            if v < threshold {
                continue;
            }
            for dy in -rad..=rad {
                for dx in -rad..=rad {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    if r.in_bounds(x + dx, y + dy)
                        && *r.get((x + dx) as usize, (y + dy) as usize) > v
                    {
                        continue 'px;
                    }
                }
            }
            out.push((x as usize, y as usize, v));
        }
    }
    out
}

/// Detect the two handles as the two strongest corner clusters.
///
/// Surviving maxima are greedily clustered: the strongest seeds a cluster
/// that absorbs maxima within twice the NMS radius; the cluster centroid is
/// response-weighted.
pub fn harris_handles(depth: &Raster<f64>, cfg: &PerceptionConfig) -> Result<[[f64; 2]; 2]> {
    let r = harris_response(depth, cfg.harris_sigma, cfg.harris_k);
    let mut maxima = response_maxima(&r, cfg.harris_nms_radius, cfg.harris_rel_threshold);
    maxima.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap());

    let cluster_radius = (2 * cfg.harris_nms_radius) as f64;
    let mut clusters: Vec<([f64; 2], f64)> = Vec::new(); // (weighted centroid, total response)
    let mut used = vec![false; maxima.len()];
    for i in 0..maxima.len() {
        if used[i] {
            continue;
        }
        let seed = maxima[i];
        let mut sum_w = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for (j, m) in maxima.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = ((m.0 as f64 - seed.0 as f64).powi(2) + (m.1 as f64 - seed.1 as f64).powi(2))
                .sqrt();
            if d <= cluster_radius {
                used[j] = true;
                cx += m.0 as f64 * m.2;
                cy += m.1 as f64 * m.2;
                sum_w += m.2;
            }
        }
        clusters.push(([cx / sum_w, cy / sum_w], sum_w));
    }
    clusters.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    if clusters.len() < 2 {
        return Err(Error::HandleDetectionFailed(format!(
            "{} corner cluster(s) above threshold",
            clusters.len()
        )));
    }
    Ok([clusters[0].0, clusters[1].0])
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force oracle: the same Harris definition computed with direct
    /// 2D convolutions (no separable shortcut) on a small raster.
    fn brute_force_response(depth: &Raster<f64>, sigma: f64, k: f64) -> Raster<f64> {
        let at = |x: isize, y: isize| {
            let xi = x.clamp(0, depth.width as isize - 1) as usize;
            let yi = y.clamp(0, depth.height as isize - 1) as usize;
            *depth.get(xi, yi)
        };
        let mut gx = Raster::new(depth.width, depth.height, 0.0);
        let mut gy = Raster::new(depth.width, depth.height, 0.0);
        for y in 0..depth.height as isize {
            for x in 0..depth.width as isize {
                let sx = -at(x - 1, y - 1) + at(x + 1, y - 1) - 2.0 * at(x - 1, y)
                    + 2.0 * at(x + 1, y)
                    - at(x - 1, y + 1)
                    + at(x + 1, y + 1);
                let sy = -at(x - 1, y - 1) - 2.0 * at(x, y - 1) - at(x + 1, y - 1)
                    + at(x - 1, y + 1)
                    + 2.0 * at(x, y + 1)
                    + at(x + 1, y + 1);
                gx.set(x as usize, y as usize, sx);
                gy.set(x as usize, y as usize, sy);
            }
        }
        let radius = (3.0 * sigma).ceil() as isize;
        let mut kernel = Vec::new();
        let mut ksum = 0.0;
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                let w = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
                kernel.push((dx, dy, w));
                ksum += w;
            }
        }
        let window = |f: &dyn Fn(usize, usize) -> f64, x: isize, y: isize| {
            let mut acc = 0.0;
            for &(dx, dy, w) in &kernel {
                let xi = (x + dx).clamp(0, depth.width as isize - 1) as usize;
                let yi = (y + dy).clamp(0, depth.height as isize - 1) as usize;
                acc += w * f(xi, yi);
            }
            acc / ksum
        };
        let mut r = Raster::new(depth.width, depth.height, 0.0);
        for y in 0..depth.height as isize {
            for x in 0..depth.width as isize {
                let fxx = |xi: usize, yi: usize| gx.get(xi, yi) * gx.get(xi, yi);
                let fxy = |xi: usize, yi: usize| gx.get(xi, yi) * gy.get(xi, yi);
                let fyy = |xi: usize, yi: usize| gy.get(xi, yi) * gy.get(xi, yi);
                let sxx = window(&fxx, x, y);
                let sxy = window(&fxy, x, y);
                let syy = window(&fyy, x, y);
                r.set(
                    x as usize,
                    y as usize,
                    sxx * syy - sxy * sxy - k * (sxx + syy).powi(2),
                );
            }
        }
        r
    }

    fn square_card(size: usize, lo: usize, hi: usize) -> Raster<f64> {
        let mut depth = Raster::new(size, size, 0.0);
        for y in lo..hi {
            for x in lo..hi {
                depth.set(x, y, 0.1);
            }
        }
        depth
    }

    fn cfg() -> PerceptionConfig {
        PerceptionConfig::default()
    }

    #[test]
    fn response_matches_brute_force_oracle() {
        let depth = square_card(32, 10, 22);
        let fast = harris_response(&depth, 1.5, 0.04);
        let oracle = brute_force_response(&depth, 1.5, 0.04);
        // Interior pixels only; the separable blur clamps borders in two
        // passes while the direct convolution clamps once.
        for y in 6..26 {
            for x in 6..26 {
                let a = *fast.get(x, y);
                let b = *oracle.get(x, y);
                assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "({x},{y}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn square_corners_detected() {
        let depth = square_card(32, 10, 22);
        let r = harris_response(&depth, 1.5, 0.04);
        let maxima = response_maxima(&r, 3, 0.05);
        assert_eq!(maxima.len(), 4, "four corner responses: {maxima:?}");
        for (x, y, _) in &maxima {
            let near_corner = [(10, 10), (10, 21), (21, 10), (21, 21)]
                .iter()
                .any(|&(cx, cy): &(i32, i32)| {
                    (*x as i32 - cx).abs() <= 1 && (*y as i32 - cy).abs() <= 1
                });
            assert!(near_corner, "maximum at ({x},{y}) is not a square corner");
        }
        // Top-2 clusters are corners of the square.
        let [a, b] = harris_handles(&depth, &cfg()).unwrap();
        for p in [a, b] {
            let near = [(10.0, 10.0), (10.0, 21.0), (21.0, 10.0), (21.0, 21.0)]
                .iter()
                .any(|&(cx, cy)| (p[0] - cx).abs() <= 1.0 && (p[1] - cy).abs() <= 1.0);
            assert!(near, "cluster at {p:?}");
        }
    }

    #[test]
    fn constant_raster_fails() {
        let depth = Raster::new(32, 32, 0.5);
        assert!(harris_handles(&depth, &cfg()).is_err());
    }

    #[test]
    fn two_bright_dots_detected_at_centers() {
        let mut depth = Raster::new(32, 32, 0.0);
        depth.set(8, 8, 0.2);
        depth.set(24, 20, 0.2);
        let [a, b] = harris_handles(&depth, &cfg()).unwrap();
        let mut pts = [a, b];
        pts.sort_by(|p, q| p[0].partial_cmp(&q[0]).unwrap());
        assert!((pts[0][0] - 8.0).abs() <= 1.0 && (pts[0][1] - 8.0).abs() <= 1.0);
        assert!((pts[1][0] - 24.0).abs() <= 1.0 && (pts[1][1] - 20.0).abs() <= 1.0);
    }

    #[test]
    fn translation_equivariance() {
        let depth = square_card(48, 12, 24);
        let mut shifted = Raster::new(48, 48, 0.0);
        for y in 0..48 {
            for x in 0..48 {
                if x >= 5 && y >= 7 {
                    shifted.set(x, y, *depth.get(x - 5, y - 7));
                }
            }
        }
        let mut a = harris_handles(&depth, &cfg()).unwrap();
        let mut b = harris_handles(&shifted, &cfg()).unwrap();
        a.sort_by(|p, q| p.partial_cmp(q).unwrap());
        b.sort_by(|p, q| p.partial_cmp(q).unwrap());
        for (p, q) in a.iter().zip(&b) {
            assert!((q[0] - p[0] - 5.0).abs() < 0.5, "{p:?} vs {q:?}");
            assert!((q[1] - p[1] - 7.0).abs() < 0.5, "{p:?} vs {q:?}");
        }
    }
}
