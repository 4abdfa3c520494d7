//! Complex modulus from the MSD of a viscous and a power-law fluid.

use microrheo::kernels::{gser_modulus, log_grid, GserDim};
use microrheo::trackio::MsdCurve;

fn main() -> microrheo::Result<()> {
    let (kbt, radius) = (4.1e-21, 0.5e-6);
    let dt = 1e-3;
    let lags: Vec<usize> = (1..=20_000).collect();
    let grid = log_grid(1.0, 100.0, 5);

    let eta = 1e-3;
    let c = kbt / (std::f64::consts::PI * radius * eta);
    let water = MsdCurve::from_values(
        dt,
        lags.clone(),
        lags.iter().map(|&h| c * h as f64 * dt).collect(),
    )?;
    let g = gser_modulus(&water, radius, kbt, GserDim::ThreeD, &grid)?;
    println!("viscous, η = {eta}");
    for i in 0..grid.len() {
        println!(
            "  ω = {:>7.2}  G' = {:+.3e}  G'' = {:+.3e}",
            g.omega[i], g.g_star[i].re, g.g_star[i].im
        );
    }

    let gel = MsdCurve::from_values(
        dt,
        lags.clone(),
        lags.iter()
            .map(|&h| 1e-14 * (h as f64 * dt).powf(0.5))
            .collect(),
    )?;
    let g = gser_modulus(&gel, radius, kbt, GserDim::ThreeD, &grid)?;
    println!("MSD ∝ t^0.5 (G' = G'')");
    for i in 0..grid.len() {
        println!(
            "  ω = {:>7.2}  G' = {:+.3e}  G'' = {:+.3e}",
            g.omega[i], g.g_star[i].re, g.g_star[i].im
        );
    }
    Ok(())
}
