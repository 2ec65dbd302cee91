//! Orthographic top-down rendering of the bag mesh.
//!
//! Depth is the per-pixel maximum height of the rasterized triangles (0 where
//! nothing covers the pixel). The RGB render paints the bag in its base
//! color, with handle particles red and rim particles green when painting is
//! enabled, mirroring color-marked training bags. Depth is always paint-free.

use crate::bag::{BagState, ParticleLabel, Vec3};
use crate::config::PerceptionConfig;
use crate::perception::raster::Raster;
use crate::perception::Masks;

pub const COLOR_TABLE: [u8; 3] = [25, 25, 25];
pub const COLOR_BAG: [u8; 3] = [205, 205, 205];
pub const COLOR_HANDLE: [u8; 3] = [205, 30, 30];
pub const COLOR_RIM: [u8; 3] = [30, 185, 30];

/// Particles within this height of the depth surface count as visible.
/// Must stay below the inter-layer gap so an occluded lower layer is not
/// labeled through the upper one.
const OCCLUSION_TOL: f64 = 0.002;

/// Orthographic top-down camera over the workspace.
#[derive(Debug, Clone, Copy)]
pub struct Camera {
    pub width_px: usize,
    pub height_px: usize,
    /// Meters per pixel.
    pub pixel_scale: f64,
    /// Workspace corner mapped to pixel (0, 0), m.
    pub origin: [f64; 2],
}

impl Camera {
    pub fn from_config(cfg: &PerceptionConfig) -> Self {
        Self {
            width_px: cfg.width_px,
            height_px: cfg.height_px,
            pixel_scale: cfg.pixel_scale,
            origin: [0.0, 0.0],
        }
    }

    pub fn world_to_px(&self, x: f64, y: f64) -> [f64; 2] {
        [
            (x - self.origin[0]) / self.pixel_scale,
            (y - self.origin[1]) / self.pixel_scale,
        ]
    }

    pub fn px_to_world(&self, px: f64, py: f64) -> [f64; 2] {
        [
            self.origin[0] + (px + 0.5) * self.pixel_scale,
            self.origin[1] + (py + 0.5) * self.pixel_scale,
        ]
    }
}

/// Top-down depth + RGB observation.
#[derive(Debug, Clone)]
pub struct Observation {
    /// Heights above the table, m; 0 where nothing is seen.
    pub depth: Raster<f64>,
    pub rgb: Raster<[u8; 3]>,
    pub pixel_scale: f64,
    pub origin: [f64; 2],
}

fn rasterize_depth(state: &BagState, cam: &Camera) -> Raster<f64> {
    let mut depth = Raster::new(cam.width_px, cam.height_px, 0.0f64);
    for tri in &state.triangles {
        let pts: Vec<Vec3> = tri.iter().map(|&i| state.positions[i]).collect();
        let px: Vec<[f64; 2]> = pts.iter().map(|p| cam.world_to_px(p.x, p.y)).collect();
        let min_x = px.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let max_x = px.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max).ceil() as isize;
        let min_y = px.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let max_y = px.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max).ceil() as isize;
        if max_x < 0 || max_y < 0 {
            continue;
        }
        let max_x = (max_x as usize).min(cam.width_px.saturating_sub(1));
        let max_y = (max_y as usize).min(cam.height_px.saturating_sub(1));

        let (a, b, c) = (px[0], px[1], px[2]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if det.abs() < 1e-12 {
            continue;
        }
        for y in min_y..=max_y {
            for x in min_x..=max_x {
                let p = [x as f64 + 0.5, y as f64 + 0.5];
                let w1 = ((b[0] - p[0]) * (c[1] - p[1]) - (c[0] - p[0]) * (b[1] - p[1])) / det;
                let w2 = ((c[0] - p[0]) * (a[1] - p[1]) - (a[0] - p[0]) * (c[1] - p[1])) / det;
                let w3 = 1.0 - w1 - w2;
                let eps = -1e-9;
                if w1 >= eps && w2 >= eps && w3 >= eps {
                    let z = w1 * pts[0].z + w2 * pts[1].z + w3 * pts[2].z;
                    if z > *depth.get(x, y) {
                        depth.set(x, y, z.clamp(0.0, 2.0));
                    }
                }
            }
        }
    }
    depth
}

/// Splat radius of a particle on the raster, px.
const SPLAT_RADIUS: f64 = 1.6;

fn visible_particles(
    state: &BagState,
    cam: &Camera,
    depth: &Raster<f64>,
) -> Vec<(usize, usize, usize)> {
    // (particle, x, y) for every pixel in the particle's footprint where the
    // particle is at (or near) the visible surface.
    let mut out = Vec::new();
    let r = SPLAT_RADIUS.ceil() as isize;
    for (k, p) in state.positions.iter().enumerate() {
        let [cx, cy] = cam.world_to_px(p.x, p.y);
        let (cxi, cyi) = (cx.round() as isize, cy.round() as isize);
        for dy in -r..=r {
            for dx in -r..=r {
                if (dx * dx + dy * dy) as f64 > SPLAT_RADIUS * SPLAT_RADIUS {
                    continue;
                }
                let (x, y) = (cxi + dx, cyi + dy);
                if !depth.in_bounds(x, y) {
                    continue;
                }
                let (x, y) = (x as usize, y as usize);
                let d = *depth.get(x, y);
                if d > 0.0 && p.z >= d - OCCLUSION_TOL {
                    out.push((k, x, y));
                }
            }
        }
    }
    out
}

/// Render the top-down observation.
pub fn render_topdown(state: &BagState, cam: &Camera, paint: bool) -> Observation {
    let depth = rasterize_depth(state, cam);
    let mut rgb = Raster::new(cam.width_px, cam.height_px, COLOR_TABLE);
    for y in 0..cam.height_px {
        for x in 0..cam.width_px {
            if *depth.get(x, y) > 0.0 {
                rgb.set(x, y, COLOR_BAG);
            }
        }
    }
    if paint {
        for (k, x, y) in visible_particles(state, cam, &depth) {
            match state.labels[k] {
                ParticleLabel::HandleL | ParticleLabel::HandleR => rgb.set(x, y, COLOR_HANDLE),
                ParticleLabel::Rim => rgb.set(x, y, COLOR_RIM),
                ParticleLabel::Body => {}
            }
        }
    }
    Observation {
        depth,
        rgb,
        pixel_scale: cam.pixel_scale,
        origin: cam.origin,
    }
}

/// Ground-truth segmentation masks: per pixel, the class of the topmost
/// visible particle. Occlusion-correct; a rim particle under a body layer is
/// not labeled.
pub fn oracle_masks(state: &BagState, cam: &Camera) -> Masks {
    let depth = rasterize_depth(state, cam);
    let mut handle = Raster::new(cam.width_px, cam.height_px, false);
    let mut rim = Raster::new(cam.width_px, cam.height_px, false);
    // Track the winning particle height per pixel so the topmost label wins.
    let mut best_z = Raster::new(cam.width_px, cam.height_px, f64::NEG_INFINITY);
    let mut label = Raster::new(cam.width_px, cam.height_px, ParticleLabel::Body);
    for (k, x, y) in visible_particles(state, cam, &depth) {
        let z = state.positions[k].z;
        if z > *best_z.get(x, y) {
            best_z.set(x, y, z);
            label.set(x, y, state.labels[k]);
        }
    }
    for y in 0..cam.height_px {
        for x in 0..cam.width_px {
            if best_z.get(x, y).is_finite() {
                match label.get(x, y) {
                    ParticleLabel::HandleL | ParticleLabel::HandleR => handle.set(x, y, true),
                    ParticleLabel::Rim => rim.set(x, y, true),
                    ParticleLabel::Body => {}
                }
            }
        }
    }
    Masks {
        handle,
        rim,
        handle_prob: None,
        rim_prob: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bag::{new_bag, BagSpec};
    use crate::perception::connected_components;

    fn centered_bag() -> BagState {
        let mut s = new_bag(&BagSpec::default(), 0).unwrap();
        s.translate(Vec3::new(0.6, 0.9, 0.0));
        s
    }

    fn camera() -> Camera {
        Camera::from_config(&PerceptionConfig::default())
    }

    #[test]
    fn empty_scene_renders_zero_depth() {
        let spec = BagSpec::default();
        let mut s = new_bag(&spec, 0).unwrap();
        // Move the bag far outside the camera footprint.
        s.translate(Vec3::new(50.0, 50.0, 0.0));
        let obs = render_topdown(&s, &camera(), true);
        assert!(obs.depth.data.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn painted_flat_bag_has_green_band_and_two_red_tabs() {
        let s = centered_bag();
        let cam = camera();
        let obs = render_topdown(&s, &cam, true);

        let green = obs.rgb.map(|c| *c == COLOR_RIM);
        let red = obs.rgb.map(|c| *c == COLOR_HANDLE);
        assert!(green.data.iter().filter(|&&v| v).count() > 10);
        let red_comps = connected_components(&red);
        let big: Vec<_> = red_comps.iter().filter(|c| c.len() >= 4).collect();
        assert_eq!(big.len(), 2, "two painted handle tabs expected");

        // Green pixels form a band at the top edge of the bag (+y side).
        let mut gy_min = f64::INFINITY;
        let mut gy_max = f64::NEG_INFINITY;
        for y in 0..cam.height_px {
            for x in 0..cam.width_px {
                if *green.get(x, y) {
                    gy_min = gy_min.min(y as f64);
                    gy_max = gy_max.max(y as f64);
                }
            }
        }
        let band = (gy_max - gy_min) * cam.pixel_scale;
        assert!(band < 0.08, "rim band height {band} m");
    }

    #[test]
    fn unpainted_render_has_no_marker_colors() {
        let s = centered_bag();
        let obs = render_topdown(&s, &camera(), false);
        assert!(!obs.rgb.data.iter().any(|c| *c == COLOR_RIM || *c == COLOR_HANDLE));
    }

    #[test]
    fn rendering_is_deterministic() {
        let s = centered_bag();
        let a = render_topdown(&s, &camera(), true);
        let b = render_topdown(&s, &camera(), true);
        assert_eq!(a.depth.data, b.depth.data);
        assert_eq!(a.rgb.data, b.rgb.data);
    }

    #[test]
    fn oracle_masks_on_flat_bag() {
        let s = centered_bag();
        let masks = oracle_masks(&s, &camera());
        assert!(masks.rim.data.iter().any(|&v| v));
        let comps = connected_components(&masks.handle);
        let big: Vec<_> = comps.iter().filter(|c| c.len() >= 4).collect();
        assert_eq!(big.len(), 2);
    }

    #[test]
    fn masks_are_subset_of_depth_support() {
        let s = centered_bag();
        let cam = camera();
        let obs = render_topdown(&s, &cam, false);
        let masks = oracle_masks(&s, &cam);
        for y in 0..cam.height_px {
            for x in 0..cam.width_px {
                if *masks.handle.get(x, y) || *masks.rim.get(x, y) {
                    assert!(*obs.depth.get(x, y) > 0.0);
                }
            }
        }
    }

    #[test]
    fn folded_bag_occludes_handles() {
        let mut s = centered_bag();
        // Fold the bottom half over the top: mirror y across the fold line
        // just below the handles so body layers land on top of the tabs.
        let fold_y = 0.9 + 0.10;
        for (p, l) in s.positions.iter_mut().zip(&s.labels) {
            if *l == crate::bag::ParticleLabel::Body && p.y < fold_y {
                p.y = 2.0 * fold_y - p.y;
                p.z += 0.012;
            }
        }
        let masks = oracle_masks(&s, &camera());
        let visible = masks.handle.data.iter().filter(|&&v| v).count();
        assert_eq!(visible, 0, "handles must be occluded by the fold");
    }
}
