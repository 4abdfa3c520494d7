//! End-to-end paths through the library: simulate, write, read back, estimate.

use microrheo::bench::{FgleSetup, IncrementSampler, Method};
use microrheo::inference::{local_whittle, local_whittle_track, msd_loglog_fit, WhittleOptions};
use microrheo::kernels::{GleParams, MemoryKernel};
use microrheo::markovsim::{simulate_langevin, simulate_prony_gle};
use microrheo::rng::stream_rng;
use microrheo::spectral::FgleParams;
use microrheo::trackio::{pathwise_msd, read_tracks, write_tracks, Axis, Detrend, Track};
use microrheo::waveletsim::{simulate_fgle_wavelet, Cmf};

#[test]
fn tracks_round_trip_through_csv() {
    let mut rng = stream_rng(1, 0);
    let a = simulate_langevin(1.0, 2.0, 1.0, 0.05, 200, &mut rng)
        .unwrap()
        .into_track("a")
        .unwrap();
    let b = simulate_langevin(1.0, 2.0, 1.0, 0.05, 150, &mut rng)
        .unwrap()
        .into_track("b")
        .unwrap();
    let mut buf = Vec::new();
    write_tracks(&mut buf, &[a.clone(), b.clone()]).unwrap();
    let back = read_tracks(buf.as_slice(), None).unwrap();
    assert_eq!(back.len(), 2);
    for (x, y) in back.iter().zip([&a, &b]) {
        assert_eq!(x.id(), y.id());
        assert_eq!(x.dt(), y.dt());
        assert_eq!(x.positions(), y.positions());
    }
}

#[test]
fn langevin_long_run_is_diffusive() {
    let mut rng = stream_rng(2, 0);
    let t = simulate_langevin(1.0, 2.0, 1.0, 1.0, 20_000, &mut rng)
        .unwrap()
        .into_track("l")
        .unwrap();
    let r = local_whittle_track(&t, Detrend::None, &WhittleOptions::default()).unwrap();
    assert!((r.alpha_hat - 1.0).abs() < 0.2, "{}", r.alpha_hat);
}

#[test]
fn fgle_samplers_agree_on_memory_parameter() {
    let setup = FgleSetup {
        d: 0.2,
        horizon: 1024,
        ..FgleSetup::default()
    };
    let opts = WhittleOptions {
        m: Some(60),
        ..WhittleOptions::default()
    };
    for method in [Method::Cholesky, Method::Cme, Method::Wavelet { j: 6 }] {
        let s = IncrementSampler::new(method, &setup).unwrap();
        let mut sum = 0.0;
        for r in 0..40 {
            let mut rng = stream_rng(3, r);
            sum += local_whittle(&s.increments(&mut rng).unwrap(), &opts)
                .unwrap()
                .d_hat
                .unwrap();
        }
        let mean = sum / 40.0;
        assert!((mean - 0.2).abs() < 0.08, "{method}: {mean}");
    }
}

#[test]
fn wavelet_track_has_subdiffusive_msd() {
    let p = FgleParams::from_d(0.25, 2.0, 1.0, 1.0).unwrap();
    let mut slopes = 0.0;
    for r in 0..20 {
        let mut rng = stream_rng(4, r);
        let t = simulate_fgle_wavelet(p, 6, 2048, Cmf::Db4, &mut rng).unwrap();
        assert_eq!(t.len(), 2049);
        let c = pathwise_msd(&t, 200).unwrap();
        slopes += msd_loglog_fit(&c, (10, 200), 0.95).unwrap().alpha_hat;
    }
    let mean = slopes / 20.0;
    assert!((mean - 0.5).abs() < 0.15, "{mean}");
}

#[test]
fn prony_gle_track_is_usable() {
    let k = MemoryKernel::prony(vec![2.0], vec![1.5]).unwrap();
    let mut rng = stream_rng(5, 0);
    let traj = simulate_prony_gle(k.clone(), 1.0, 1.0, 1.0, 0.1, 500, &mut rng).unwrap();
    let t: Track = traj.into_track("p").unwrap();
    assert_eq!(t.axis(), Axis::X);
    assert_eq!(t.len(), 501);
    assert!(GleParams::new(1.0, 1.0, 1.0, k).is_ok());
}
