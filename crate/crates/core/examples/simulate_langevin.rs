//! Exact-in-law Langevin paths and the ensemble MSD against its closed form.

use microrheo::bench::replicate;
use microrheo::markovsim::{ou_msd, simulate_langevin};

fn main() -> microrheo::Result<()> {
    let (m, gamma, kbt, dt) = (1.0, 2.0, 1.0, 0.01);
    let paths = replicate(42, 0, 2000, |_, rng| {
        Ok(simulate_langevin(m, gamma, kbt, dt, 1000, rng)?.positions)
    })?;

    println!("{:>8} {:>12} {:>12}", "t", "ensemble", "closed form");
    for k in [1usize, 10, 50, 100, 500, 1000] {
        let t = k as f64 * dt;
        let ens = paths.iter().map(|p| p[k] * p[k]).sum::<f64>() / paths.len() as f64;
        println!("{t:>8.2} {ens:>12.6} {:>12.6}", ou_msd(m, gamma, kbt, t));
    }
    // t ≫ m/γ: MSD ≈ 2 kBT t / γ
    Ok(())
}
