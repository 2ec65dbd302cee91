//! HSV color auto-labeling of painted renders.
//!
//! Red marker pixels become the handle mask and green marker pixels the rim
//! mask. Swapping marker colors only means changing these windows.

use crate::perception::raster::{morph_open, Raster};
use crate::perception::Masks;

/// RGB in [0,255] to (hue deg [0,360), saturation [0,1], value [0,1]).
pub fn rgb_to_hsv(rgb: &[u8; 3]) -> (f64, f64, f64) {
    let r = rgb[0] as f64 / 255.0;
    let g = rgb[1] as f64 / 255.0;
    let b = rgb[2] as f64 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta < 1e-12 {
        0.0
    } else if (max - r).abs() < 1e-12 {
        60.0 * (((g - b) / delta).rem_euclid(6.0))
    } else if (max - g).abs() < 1e-12 {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max < 1e-12 { 0.0 } else { delta / max };
    (h, s, max)
}

/// Hue window for the red marker, degrees (wraps around 0).
const RED_HUE_TOL: f64 = 25.0;
/// Hue window for the green marker, degrees.
const GREEN_HUE: (f64, f64) = (80.0, 160.0);
const SAT_MIN: f64 = 0.35;
const VAL_MIN: f64 = 0.15;

/// Threshold the marker colors out of a painted render and denoise with a
/// 3x3 morphological opening.
pub fn hsv_autolabel(rgb: &Raster<[u8; 3]>) -> Masks {
    let mut handle = Raster::new(rgb.width, rgb.height, false);
    let mut rim = Raster::new(rgb.width, rgb.height, false);
    for y in 0..rgb.height {
        for x in 0..rgb.width {
            let (h, s, v) = rgb_to_hsv(rgb.get(x, y));
            if s < SAT_MIN || v < VAL_MIN {
                continue;
            }
            if h < RED_HUE_TOL || h > 360.0 - RED_HUE_TOL {
                handle.set(x, y, true);
            } else if h >= GREEN_HUE.0 && h <= GREEN_HUE.1 {
                rim.set(x, y, true);
            }
        }
    }
    Masks {
        handle: morph_open(&handle),
        rim: morph_open(&rim),
        handle_prob: None,
        rim_prob: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::render::{COLOR_BAG, COLOR_HANDLE, COLOR_RIM, COLOR_TABLE};

    #[test]
    fn hsv_conversion_basics() {
        let (h, s, v) = rgb_to_hsv(&[255, 0, 0]);
        assert!((h - 0.0).abs() < 1e-9 && s > 0.99 && v > 0.99);
        let (h, _, _) = rgb_to_hsv(&[0, 255, 0]);
        assert!((h - 120.0).abs() < 1e-9);
        let (_, s, _) = rgb_to_hsv(&[200, 200, 200]);
        assert!(s < 1e-9);
    }

    #[test]
    fn pure_red_card_becomes_handle_mask() {
        let mut rgb = Raster::new(32, 32, COLOR_TABLE);
        for y in 8..24 {
            for x in 8..24 {
                rgb.set(x, y, COLOR_HANDLE);
            }
        }
        let masks = hsv_autolabel(&rgb);
        // Interior of the card survives the opening.
        for y in 10..22 {
            for x in 10..22 {
                assert!(*masks.handle.get(x, y));
            }
        }
        assert!(!masks.rim.data.iter().any(|&v| v));
    }

    #[test]
    fn unpainted_colors_yield_empty_masks() {
        let mut rgb = Raster::new(32, 32, COLOR_TABLE);
        for y in 8..24 {
            for x in 8..24 {
                rgb.set(x, y, COLOR_BAG);
            }
        }
        let masks = hsv_autolabel(&rgb);
        assert!(!masks.handle.data.iter().any(|&v| v));
        assert!(!masks.rim.data.iter().any(|&v| v));
    }

    #[test]
    fn green_maps_to_rim() {
        let mut rgb = Raster::new(16, 16, COLOR_TABLE);
        for y in 4..12 {
            for x in 4..12 {
                rgb.set(x, y, COLOR_RIM);
            }
        }
        let masks = hsv_autolabel(&rgb);
        assert!(*masks.rim.get(8, 8));
        assert!(!masks.handle.data.iter().any(|&v| v));
    }
}
