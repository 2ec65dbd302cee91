//! Generate one initial state per difficulty tier and save the top-down
//! painted RGB render plus the depth raster for each.
//!
//!     cargo run --release --example render_tier_states [seed]

use std::path::PathBuf;

use shakingbot::config::Config;
use shakingbot::harness::gen_tier;
use shakingbot::perception::{render_topdown, Camera};
use shakingbot::snapshot::{save_depth_pgm, save_rgb_png};

fn main() -> shakingbot::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let cfg = Config::default();
    let cam = Camera::from_config(&cfg.perception);
    for tier in [1u8, 2, 3] {
        let state = gen_tier(&cfg, tier, seed)?;
        let obs = render_topdown(&state, &cam, true);
        let rgb = PathBuf::from(format!("tier{tier}_seed{seed}.png"));
        let depth = PathBuf::from(format!("tier{tier}_seed{seed}.pgm"));
        save_rgb_png(&obs.rgb, &rgb)?;
        save_depth_pgm(&obs.depth, &depth)?;
        println!("tier {tier}: wrote {} and {}", rgb.display(), depth.display());
    }
    Ok(())
}
