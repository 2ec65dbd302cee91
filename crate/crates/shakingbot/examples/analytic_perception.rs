//! Run the analytic perception baseline (Harris handles + Canny rim) and
//! the HSV color auto-labeler on a rendered state, scoring the color masks
//! against the oracle segmentation.
//!
//!     cargo run --release --example analytic_perception [seed]

use shakingbot::bag::{new_bag, Vec3};
use shakingbot::config::Config;
use shakingbot::perception::{
    canny_rim, grasp_points, harris_handles, hsv_autolabel, oracle_masks, render_topdown,
    score_masks, Camera, Raster,
};

fn main() -> shakingbot::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let cfg = Config::default();
    let cam = Camera::from_config(&cfg.perception);
    let c = cfg.workspace.center();
    let mut state = new_bag(&cfg.bag, seed)?;
    state.translate(Vec3::new(c[0], c[1], 0.0));

    let obs = render_topdown(&state, &cam, true);

    match harris_handles(&obs.depth, &cfg.perception) {
        Ok(points) => println!("harris handles at {points:?} (px)"),
        Err(e) => println!("harris handles: {e}"),
    }
    match canny_rim(&obs.depth, &cfg.perception) {
        Ok(rim) => println!(
            "canny rim: {} edge px, hull area {:.4} m^2",
            rim.rim_pixels.len(),
            rim.hull_area
        ),
        Err(e) => println!("canny rim: {e}"),
    }

    let pred = hsv_autolabel(&obs.rgb);
    println!("hsv grasp points: {:?}", grasp_points(&pred));
    let truth = oracle_masks(&state, &cam);
    let weights = Raster::new(cam.width_px, cam.height_px, 1.0);
    let scores = score_masks(&pred, &truth, &weights)?;
    println!(
        "hsv vs oracle: loss {:.4}  mIoU {:.3}  mPA {:.3}",
        scores.loss, scores.miou, scores.mpa
    );
    Ok(())
}
