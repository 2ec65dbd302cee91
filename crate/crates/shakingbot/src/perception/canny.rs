//! Canny edge detection on depth rasters, used by the analytic baseline to
//! estimate the rim area.

use crate::config::PerceptionConfig;
use crate::error::Result;
use crate::metrics::{convex_hull_2d, polygon_area};
use crate::perception::raster::{connected_components, gaussian_blur, sobel_gradients, Raster};

/// Full pipeline: blur, Sobel gradients, non-maximum suppression, and
/// double-threshold hysteresis. Returns the edge mask.
pub fn canny_edges(depth: &Raster<f64>, cfg: &PerceptionConfig) -> Raster<bool> {
    let blurred = gaussian_blur(depth, cfg.canny_sigma);
    let (gx, gy) = sobel_gradients(&blurred);
    let mut mag = Raster::new(depth.width, depth.height, 0.0f64);
    for i in 0..mag.data.len() {
        mag.data[i] = (gx.data[i] * gx.data[i] + gy.data[i] * gy.data[i]).sqrt();
    }
    let max_mag = mag.data.iter().cloned().fold(0.0f64, f64::max);
    // Absolute floor: rounding noise on featureless rasters must not pass
    // the relative thresholds.
    if max_mag <= 1e-9 {
        return Raster::new(depth.width, depth.height, false);
    }

    // Non-maximum suppression along the quantized gradient direction.
    let mut thin = Raster::new(depth.width, depth.height, 0.0f64);
    for y in 0..depth.height as isize {
        for x in 0..depth.width as isize {
            let i = y as usize * depth.width + x as usize;
            let m = mag.data[i];
            if m <= 0.0 {
                continue;
            }
            let angle = gy.data[i].atan2(gx.data[i]).to_degrees().rem_euclid(180.0);
            let (dx, dy): (isize, isize) = if !(22.5..157.5).contains(&angle) {
                (1, 0)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let neighbor = |ox: isize, oy: isize| {
                if mag.in_bounds(x + ox, y + oy) {
                    *mag.get((x + ox) as usize, (y + oy) as usize)
                } else {
                    0.0
                }
            };
            if m >= neighbor(dx, dy) && m >= neighbor(-dx, -dy) {
                thin.data[i] = m;
            }
        }
    }

    // Hysteresis: strong edges seed a flood fill through weak edges.
    let low = cfg.canny_low * max_mag;
    let high = cfg.canny_high * max_mag;
    let mut edges = Raster::new(depth.width, depth.height, false);
    let mut stack = Vec::new();
    for y in 0..depth.height {
        for x in 0..depth.width {
            if *thin.get(x, y) >= high && !*edges.get(x, y) {
                edges.set(x, y, true);
                stack.push((x, y));
                while let Some((cx, cy)) = stack.pop() {
                    for dy in -1isize..=1 {
                        for dx in -1isize..=1 {
                            let nx = cx as isize + dx;
                            let ny = cy as isize + dy;
                            if edges.in_bounds(nx, ny) {
                                let (nx, ny) = (nx as usize, ny as usize);
                                if !*edges.get(nx, ny) && *thin.get(nx, ny) >= low {
                                    edges.set(nx, ny, true);
                                    stack.push((nx, ny));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    edges
}

/// Rim estimate from edges.
#[derive(Debug, Clone)]
pub struct CannyRim {
    /// Edge pixels of the largest connected edge component.
    pub rim_pixels: Vec<(usize, usize)>,
    /// Convex-hull area of that component, m^2.
    pub hull_area: f64,
}

/// Edge pixels of the largest connected component plus their hull area.
/// No edges means zero area.
pub fn canny_rim(depth: &Raster<f64>, cfg: &PerceptionConfig) -> Result<CannyRim> {
    let edges = canny_edges(depth, cfg);
    let comps = connected_components(&edges);
    let Some(largest) = comps.into_iter().max_by_key(|c| c.len()) else {
        return Ok(CannyRim {
            rim_pixels: Vec::new(),
            hull_area: 0.0,
        });
    };
    let pts: Vec<[f64; 2]> = largest
        .iter()
        .map(|&(x, y)| [x as f64 * cfg.pixel_scale, y as f64 * cfg.pixel_scale])
        .collect();
    let hull = convex_hull_2d(&pts)?;
    Ok(CannyRim {
        rim_pixels: largest,
        hull_area: polygon_area(&hull),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PerceptionConfig {
        PerceptionConfig::default()
    }

    #[test]
    fn disk_hull_area_matches_analytic() {
        let mut depth = Raster::new(96, 96, 0.0);
        let r = 30.0;
        for y in 0..96 {
            for x in 0..96 {
                let d = ((x as f64 - 48.0).powi(2) + (y as f64 - 48.0).powi(2)).sqrt();
                if d <= r {
                    depth.set(x, y, 0.1);
                }
            }
        }
        let c = cfg();
        let rim = canny_rim(&depth, &c).unwrap();
        let analytic = std::f64::consts::PI * (r * c.pixel_scale).powi(2);
        let rel = (rim.hull_area - analytic).abs() / analytic;
        assert!(rel < 0.05, "hull area {} vs analytic {} (rel {rel})", rim.hull_area, analytic);
    }

    #[test]
    fn constant_raster_has_no_edges() {
        let depth = Raster::new(64, 64, 0.3);
        let rim = canny_rim(&depth, &cfg()).unwrap();
        assert_eq!(rim.hull_area, 0.0);
        assert!(rim.rim_pixels.is_empty());
    }

    #[test]
    fn step_edge_is_one_pixel_wide() {
        let mut depth = Raster::new(64, 64, 0.0);
        for y in 0..64 {
            for x in 32..64 {
                depth.set(x, y, 0.2);
            }
        }
        let edges = canny_edges(&depth, &cfg());
        // Away from the borders each row crosses the edge exactly once.
        for y in 8..56 {
            let width: usize = (0..64).filter(|&x| *edges.get(x, y)).count();
            assert_eq!(width, 1, "row {y} edge width {width}");
        }
    }

    #[test]
    fn translation_equivariance() {
        let mut depth = Raster::new(64, 64, 0.0);
        for y in 10..30 {
            for x in 10..30 {
                depth.set(x, y, 0.15);
            }
        }
        let mut shifted = Raster::new(64, 64, 0.0);
        for y in 0..64 {
            for x in 0..64 {
                if x >= 6 && y >= 9 {
                    shifted.set(x, y, *depth.get(x - 6, y - 9));
                }
            }
        }
        let a = canny_edges(&depth, &cfg());
        let b = canny_edges(&shifted, &cfg());
        for y in 0..55 {
            for x in 0..58 {
                assert_eq!(*a.get(x, y), *b.get(x + 6, y + 9), "({x},{y})");
            }
        }
    }
}
