//! Run one seeded trial end to end and print the action trace.
//!
//!     cargo run --release --example single_trial [method] [tier] [seed]

use shakingbot::config::Config;
use shakingbot::harness::{run_trial, Method};

fn main() -> shakingbot::Result<()> {
    let mut args = std::env::args().skip(1);
    let method = args
        .next()
        .map(|s| Method::parse(&s))
        .transpose()?
        .unwrap_or(Method::Shakingbot);
    let tier: u8 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let cfg = Config::default();
    let rec = run_trial(&cfg, method, tier, seed)?;
    for e in &rec.trace {
        println!(
            "t={:7.2}s  {:<18} {}  a_ch {:.3}  e_ch {:.2}",
            e.t,
            e.action,
            if e.ok { "ok " } else { "err" },
            e.a_ch,
            e.e_ch
        );
    }
    println!(
        "open_bag={} placed={}/{} partial={} full={} actions={}",
        rec.open_bag, rec.placed, rec.item_total, rec.partial, rec.full, rec.actions
    );
    Ok(())
}
