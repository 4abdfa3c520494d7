//! Local Whittle on exact fGLE increments, with the diffusivity test.

use microrheo::bench::{FgleSetup, IncrementSampler, Method};
use microrheo::inference::{diffusive_test_from, local_whittle, WhittleOptions};
use microrheo::rng::stream_rng;

fn main() -> microrheo::Result<()> {
    let setup = FgleSetup {
        d: 0.25,
        horizon: 4096,
        ..FgleSetup::default()
    };
    let sampler = IncrementSampler::new(Method::Cme, &setup)?;
    let y = sampler.increments(&mut stream_rng(3, 0))?;

    let r = local_whittle(&y, &WhittleOptions::default())?;
    println!("{}", serde_json::to_string_pretty(&r)?);
    let t = diffusive_test_from(&r, 0.05)?;
    println!(
        "H0: α = 1  z = {:.2}  p = {:.2e}  reject = {}",
        t.z, t.p_value, t.reject
    );
    Ok(())
}
