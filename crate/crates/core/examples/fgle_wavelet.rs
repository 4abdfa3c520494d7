//! Wavelet synthesis of an fGLE path. Prints the filter truncation by scale
//! and writes the sampled track to `fgle_wavelet.csv`.

use std::fs::File;

use microrheo::rng::stream_rng;
use microrheo::spectral::FgleParams;
use microrheo::trackio::{write_tracks, Axis, Track};
use microrheo::waveletsim::{WaveletOptions, WaveletSimulator};

fn main() -> microrheo::Result<()> {
    let params = FgleParams::from_d(0.25, 2.0, 1.0, 1.0)?;
    let sim = WaveletSimulator::new(params, 8, 512, WaveletOptions::default())?;
    for (j, t) in sim.bank().truncation_by_scale().iter().enumerate() {
        println!(
            "scale {j:>2}: mass outside |n| ≤ {} = {t:.2e}",
            sim.bank().lag_bound()
        );
    }
    println!("scale-0 length {}", sim.init_len());

    let mut rng = stream_rng(2011, 0);
    let x = sim.sample(&mut rng)?;
    let track = Track::new("fgle-0", Axis::X, 1.0, x)?;
    write_tracks(File::create("fgle_wavelet.csv")?, &[track])?;
    println!("wrote fgle_wavelet.csv");
    Ok(())
}
