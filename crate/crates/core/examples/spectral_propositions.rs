//! MSD growth rate and increment spectrum at the origin for the fGLE density.

use microrheo::kernels::log_grid;
use microrheo::spectral::{increment_spectrum, verify_msd_bounds, FgleDensity, FgleParams};

fn main() -> microrheo::Result<()> {
    let d = 0.25;
    let f = FgleDensity::new(FgleParams::from_d(d, 2.0, 1.0, 1.0)?)?;

    let r = verify_msd_bounds(&f, d, &log_grid(1e2, 1e5, 7), 1.0)?;
    for p in &r.points {
        println!(
            "t = {:>9.1}  E X² = {:>10.4}  E X²/t^(1-2d) = {:.6}",
            p.t, p.ex2, p.ratio
        );
    }
    println!(
        "spread {:.2e}, split discrepancy {:.2e}\n",
        r.spread(),
        r.delta_discrepancy
    );

    for k in (2..=20).step_by(3) {
        let w = 2f64.powi(-k);
        let v = increment_spectrum(&f, w, 10_000)?;
        println!(
            "ω = 2^-{k:<2}  ρ̂_Y(ω)/|ω|^2d = {:.6}",
            v.value / w.powf(2.0 * d)
        );
    }
    Ok(())
}
