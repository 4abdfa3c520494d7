//! Cholesky and circulant embedding on fractional Gaussian noise.

use microrheo::exactsim::{cholesky_sim, cme_embed, fgn_covariance, CmeSampler, FgnModel};
use microrheo::rng::stream_rng;

fn main() -> microrheo::Result<()> {
    let (h, n) = (0.75, 512);
    let cov = fgn_covariance(h, n)?;
    println!("γ(0..5) = {:?}", &cov.values()[..5]);

    let e = cme_embed(&fgn_covariance(h, 513)?, 10)?;
    println!(
        "embedding 2^{}: min eigenvalue {:.3e}, nonnegative {}",
        e.exponent, e.min_eigenvalue, e.nonnegative
    );

    let cme = CmeSampler::new(&FgnModel { h }, n)?;
    let reps = 2000;
    let (mut c1, mut c2) = (0.0, 0.0);
    for r in 0..reps {
        let mut rng = stream_rng(1, r);
        let a = cholesky_sim(&cov, &mut rng)?;
        let b = cme.sample(&mut rng);
        c1 += a[0] * a[1];
        c2 += b[0] * b[1];
    }
    println!(
        "lag-1 covariance: exact {:.4}, cholesky {:.4}, cme {:.4}",
        cov.values()[1],
        c1 / reps as f64,
        c2 / reps as f64
    );
    Ok(())
}
