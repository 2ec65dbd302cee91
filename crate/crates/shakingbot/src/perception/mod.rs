//! Synthetic perception: top-down rendering, oracle segmentation masks, the
//! HSV color auto-labeler, the analytic Harris/Canny baseline, and mask
//! scoring (weighted per-class BCE, mIoU, mPA).

mod canny;
mod harris;
mod hsv;
mod raster;
mod render;
mod score;

pub use canny::{canny_edges, canny_rim, CannyRim};
pub use harris::{harris_handles, harris_response};
pub use hsv::{hsv_autolabel, rgb_to_hsv};
pub use raster::{connected_components, gaussian_blur, morph_open, sobel_gradients, Raster};
pub use render::{oracle_masks, render_topdown, Camera, Observation, COLOR_BAG, COLOR_HANDLE, COLOR_RIM, COLOR_TABLE};
pub use score::{balanced_weights, bce_class, noisy_probs, score_masks, MaskScores};

use crate::error::{Error, Result};

/// Per-class segmentation masks; class order is fixed: [handle, rim].
#[derive(Debug, Clone)]
pub struct Masks {
    pub handle: Raster<bool>,
    pub rim: Raster<bool>,
    /// Optional per-class probability rasters in [0, 1].
    pub handle_prob: Option<Raster<f64>>,
    pub rim_prob: Option<Raster<f64>>,
}

impl Masks {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            handle: Raster::new(width, height, false),
            rim: Raster::new(width, height, false),
            handle_prob: None,
            rim_prob: None,
        }
    }
}

/// Handle detection result from a handle mask.
#[derive(Debug, Clone, PartialEq)]
pub enum HandleDetection {
    /// Centroids of the two largest components, px.
    Two([f64; 2], [f64; 2]),
    /// Only one component visible.
    One([f64; 2]),
    None,
}

/// Centroids of the largest handle-mask components.
pub fn grasp_points(masks: &Masks) -> HandleDetection {
    let comps = connected_components(&masks.handle);
    if comps.is_empty() {
        return HandleDetection::None;
    }
    let centroid = |pixels: &[(usize, usize)]| {
        let n = pixels.len() as f64;
        let sx: f64 = pixels.iter().map(|p| p.0 as f64).sum();
        let sy: f64 = pixels.iter().map(|p| p.1 as f64).sum();
        [sx / n, sy / n]
    };
    let mut sorted: Vec<&Vec<(usize, usize)>> = comps.iter().collect();
    sorted.sort_by_key(|c| std::cmp::Reverse(c.len()));
    if sorted.len() >= 2 {
        HandleDetection::Two(centroid(sorted[0]), centroid(sorted[1]))
    } else {
        HandleDetection::One(centroid(sorted[0]))
    }
}

fn check_same_shape<A: Clone, B: Clone>(a: &Raster<A>, b: &Raster<B>) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grasp_points_partial_flags() {
        let mut masks = Masks::empty(32, 32);
        assert_eq!(grasp_points(&masks), HandleDetection::None);

        for x in 2..6 {
            for y in 2..6 {
                masks.handle.set(x, y, true);
            }
        }
        match grasp_points(&masks) {
            HandleDetection::One(c) => {
                assert!((c[0] - 3.5).abs() < 1e-9 && (c[1] - 3.5).abs() < 1e-9)
            }
            other => panic!("expected One, got {other:?}"),
        }

        for x in 20..26 {
            for y in 20..24 {
                masks.handle.set(x, y, true);
            }
        }
        match grasp_points(&masks) {
            HandleDetection::Two(a, b) => {
                // Largest (second blob, 24 px) first.
                assert!((a[0] - 22.5).abs() < 1e-9);
                assert!((b[0] - 3.5).abs() < 1e-9);
            }
            other => panic!("expected Two, got {other:?}"),
        }
    }
}
