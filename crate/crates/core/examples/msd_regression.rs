//! Pathwise MSD and its log-log slope for Brownian motion.

use microrheo::inference::msd_loglog_fit;
use microrheo::rng::{normals, stream_rng};
use microrheo::trackio::{pathwise_msd, Axis, Track};

fn main() -> microrheo::Result<()> {
    let mut rng = stream_rng(5, 0);
    let mut x = vec![0.0];
    for dy in normals(&mut rng, 5000) {
        x.push(x.last().unwrap() + dy);
    }
    let track = Track::new("bm", Axis::X, 0.1, x)?;
    let msd = pathwise_msd(&track, 1000)?;
    for (t, v) in msd.times().zip(&msd.values).step_by(200) {
        println!("t = {t:>6.1}  msd = {v:.3}");
    }
    for lags in [(1, 10), (1, 100), (1, 1000)] {
        let r = msd_loglog_fit(&msd, lags, 0.95)?;
        println!(
            "lags {lags:?}: α̂ = {:.3}  95% CI [{:.3}, {:.3}]",
            r.alpha_hat, r.ci.0, r.ci.1
        );
    }
    Ok(())
}
