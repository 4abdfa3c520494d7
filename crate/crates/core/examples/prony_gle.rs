//! Markovian embedding of a two-term Prony kernel: stationary covariance,
//! velocity autocorrelation, and a simulated path written as track CSV.

use microrheo::kernels::{classify_diffusivity, GleParams, MemoryKernel};
use microrheo::markovsim::PronyGle;
use microrheo::rng::stream_rng;
use microrheo::trackio::write_tracks;

fn main() -> microrheo::Result<()> {
    let kernel = MemoryKernel::prony(vec![1.0, 4.0], vec![0.5, 8.0])?;
    println!("long-time class: {:?}", classify_diffusivity(&kernel));

    let gle = PronyGle::new(GleParams::new(1.0, 1.5, 1.0, kernel)?)?;
    println!(
        "stationary covariance of the embedded state (X first):\n{:.4}",
        gle.stationary_covariance()
    );
    for t in [0.0, 0.5, 1.0, 2.0, 5.0] {
        println!("ρ({t:>3}) = {:+.6}", gle.velocity_acf(t));
    }

    let mut rng = stream_rng(7, 0);
    let track = gle.simulate(0.05, 200, &mut rng)?.into_track("prony-0")?;
    let mut out = std::io::stdout().lock();
    write_tracks(&mut out, &[track])?;
    Ok(())
}
