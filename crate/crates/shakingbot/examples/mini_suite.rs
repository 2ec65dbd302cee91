//! Run a small evaluation suite (2 seeds per cell) and print the results
//! table. The full protocol uses `shakingbot run-suite`.
//!
//!     cargo run --release --example mini_suite

use shakingbot::config::Config;
use shakingbot::harness::{format_table, run_suite, Method};

fn main() -> shakingbot::Result<()> {
    let cfg = Config::default();
    let records = run_suite(
        &cfg,
        &[Method::Shakingbot, Method::AnalyticPrimitives],
        &[1, 2, 3],
        2,
        0,
    )?;
    print!("{}", format_table(&records));
    Ok(())
}
