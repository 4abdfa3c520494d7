//! Cross-simulator comparison of Local Whittle estimates.
//!
//! `cargo run --release --example sampler_comparison -- 0.25 1000`

use microrheo::bench::{run_comparison, CompareConfig, FgleSetup};

fn main() -> microrheo::Result<()> {
    let mut args = std::env::args().skip(1);
    let d: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.25);
    let reps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);
    let cfg = CompareConfig {
        setup: FgleSetup {
            d,
            // L = 80 cannot reach 1e-5 for large d
            threshold: if d > 0.25 { 5e-5 } else { 1e-5 },
            ..FgleSetup::default()
        },
        reps,
        ..CompareConfig::default()
    };
    let table = run_comparison(&cfg)?;
    table.write_csv(std::io::stdout().lock())?;
    Ok(())
}
