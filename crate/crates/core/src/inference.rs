//! Subdiffusivity estimation: periodogram, Local Whittle with its asymptotic
//! test against Brownian motion, and log-log regression on the pathwise MSD.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::trackio::{detrend, increments, Detrend, MsdCurve, Track};

/// Periodogram ordinates `I_n(ω_j)` at Fourier frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    pub freqs: Vec<f64>,
    pub values: Vec<f64>,
}

/// `I_n(ω_j) = |Σ Y_k e^{−ikω_j}|²/(2πn)` for `ω_j = 2πj/n`, `j = 1..⌊(n−1)/2⌋`.
pub fn periodogram(series: &[f64]) -> Result<Periodogram> {
    let n = series.len();
    if n < 4 {
        return Err(Error::invalid(format!(
            "periodogram needs at least 4 points, got {n}"
        )));
    }
    let mut buf: Vec<Complex64> = series.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::<f64>::new()
        .plan_fft_forward(n)
        .process(&mut buf);
    let top = (n - 1) / 2;
    let norm = 1.0 / (2.0 * PI * n as f64);
    Ok(Periodogram {
        freqs: (1..=top).map(|j| 2.0 * PI * j as f64 / n as f64).collect(),
        values: buf[1..=top].iter().map(|z| z.norm_sqr() * norm).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[serde(alias = "lw")]
    LocalWhittle,
    #[serde(alias = "msd")]
    MsdRegression,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::LocalWhittle => "local_whittle",
            Estimator::MsdRegression => "msd_regression",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lw" | "local_whittle" => Ok(Estimator::LocalWhittle),
            "msd" | "msd_regression" => Ok(Estimator::MsdRegression),
            _ => Err(Error::invalid(format!("unknown estimator '{s}' (lw, msd)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tuning {
    Frequencies { m: usize },
    Lags { first: usize, last: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimator: Estimator,
    pub d_hat: Option<f64>,
    pub alpha_hat: f64,
    /// Standard error of `alpha_hat`.
    pub stderr: f64,
    pub ci: (f64, f64),
    pub level: f64,
    pub tuning: Tuning,
    pub n: usize,
    /// Intercept `log σ̂` of the MSD regression.
    pub log_sigma: Option<f64>,
    /// Minimizer on the boundary of `Θ`.
    pub boundary: bool,
    /// More than one local minimum on the scan grid.
    pub multimodal: bool,
}

impl EstimateReport {
    pub fn d_stderr(&self) -> f64 {
        self.stderr / 2.0
    }
}

fn z_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let n = Normal::standard();
    Ok(n.inverse_cdf(0.5 + level / 2.0))
}

/// `⌊n^{0.65}⌋` capped at `⌊(n−1)/2⌋`.
pub fn default_bandwidth(n: usize) -> usize {
    ((n as f64).powf(0.65).floor() as usize).clamp(1, ((n.max(3) - 1) / 2).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhittleOptions {
    /// Number of Fourier frequencies; `None` for the default bandwidth.
    pub m: Option<usize>,
    pub theta: (f64, f64),
    /// Confidence level of the reported interval.
    pub level: f64,
}

impl Default for WhittleOptions {
    fn default() -> Self {
        WhittleOptions {
            m: None,
            theta: (-0.49, 0.49),
            level: 0.95,
        }
    }
}

const GRID: usize = 200;
const GOLDEN_TOL: f64 = 1e-8;

/// The Local Whittle objective on the first `m` Fourier frequencies.
#[derive(Debug, Clone)]
pub struct WhittleObjective {
    log_w: Vec<f64>,
    log_i: Vec<f64>,
    mean_log_w: f64,
}

impl WhittleObjective {
    pub fn new(series: &[f64], m: usize) -> Result<Self> {
        let p = periodogram(series)?;
        if m < 1 || m > p.freqs.len() {
            return Err(Error::invalid(format!(
                "bandwidth m = {m} outside 1..={}",
                p.freqs.len()
            )));
        }
        let log_w: Vec<f64> = p.freqs[..m].iter().map(|w| w.ln()).collect();
        let log_i: Vec<f64> = p.values[..m].iter().map(|v| v.ln()).collect();
        if log_i.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(
                "periodogram has zero ordinates in the band".into(),
            ));
        }
        let mean_log_w = log_w.iter().sum::<f64>() / m as f64;
        Ok(WhittleObjective {
            log_w,
            log_i,
            mean_log_w,
        })
    }

    /// `log(m⁻¹ Σ I_j/ω_j^{2d}) + 2d m⁻¹ Σ log ω_j`.
    pub fn eval(&self, d: f64) -> f64 {
        // log-sum-exp for stability
        let terms = self
            .log_i
            .iter()
            .zip(&self.log_w)
            .map(|(li, lw)| li - 2.0 * d * lw);
        let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = terms.map(|t| (t - max).exp()).sum();
        max + (s / self.log_w.len() as f64).ln() + 2.0 * d * self.mean_log_w
    }
}

/// Local Whittle estimate of `d` from an increment series.
///
/// Grid scan over `Θ`, then golden-section refinement inside the bracketing
/// cell; `stderr(α̂) = 1/√m`, `α̂ = 1 − 2d̂`.
pub fn local_whittle(series: &[f64], opts: &WhittleOptions) -> Result<EstimateReport> {
    let n = series.len();
    let m = opts.m.unwrap_or_else(|| default_bandwidth(n));
    let (lo, hi) = opts.theta;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid(format!(
            "parameter range [{lo}, {hi}] is empty"
        )));
    }
    let z = z_quantile(opts.level)?;
    let obj = WhittleObjective::new(series, m)?;

    let grid: Vec<f64> = (0..=GRID)
        .map(|i| lo + (hi - lo) * i as f64 / GRID as f64)
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&d| obj.eval(d)).collect();
    let best = (0..vals.len())
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .expect("non-empty grid");
    let local_minima = (0..vals.len())
        .filter(|&i| {
            let left = i == 0 || vals[i] < vals[i - 1];
            let right = i == vals.len() - 1 || vals[i] <= vals[i + 1];
            left && right
        })
        .count();

    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(GRID)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut dd = a + g * (b - a);
    let (mut fc, mut fd) = (obj.eval(c), obj.eval(dd));
    while b - a > GOLDEN_TOL {
        if fc <= fd {
            b = dd;
            dd = c;
            fd = fc;
            c = b - g * (b - a);
            fc = obj.eval(c);
        } else {
            a = c;
            c = dd;
            fc = fd;
            dd = a + g * (b - a);
            fd = obj.eval(dd);
        }
    }
    let d_hat = 0.5 * (a + b);
    let edge = (hi - lo) / GRID as f64;
    let boundary = d_hat - lo < edge || hi - d_hat < edge;
    if boundary {
        log::warn!("Local Whittle minimizer {d_hat:.4} on the boundary of [{lo}, {hi}]");
    }
    let alpha = 1.0 - 2.0 * d_hat;
    let se = 1.0 / (m as f64).sqrt();
    Ok(EstimateReport {
        estimator: Estimator::LocalWhittle,
        d_hat: Some(d_hat),
        alpha_hat: alpha,
        stderr: se,
        ci: (alpha - z * se, alpha + z * se),
        level: opts.level,
        tuning: Tuning::Frequencies { m },
        n,
        log_sigma: None,
        boundary,
        multimodal: local_minima > 1,
    })
}

/// Local Whittle on the increments of a track, detrended first.
pub fn local_whittle_track(
    track: &Track,
    method: Detrend,
    opts: &WhittleOptions,
) -> Result<EstimateReport> {
    let y = increments(&detrend(track, method)?, 1)?;
    local_whittle(&y, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusiveTest {
    pub reject: bool,
    pub z: f64,
    pub p_value: f64,
    pub alpha_hat: f64,
    pub level: f64,
}

/// Two-sided test of `α = 1` with `z = √m(α̂ − 1)`.
pub fn test_diffusive(series: &[f64], m: Option<usize>, level: f64) -> Result<DiffusiveTest> {
    let r = local_whittle(
        series,
        &WhittleOptions {
            m,
            ..WhittleOptions::default()
        },
    )?;
    diffusive_test_from(&r, level)
}

/// The same test from an existing Local Whittle report.
pub fn diffusive_test_from(report: &EstimateReport, level: f64) -> Result<DiffusiveTest> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!(
            "test level must lie in (0, 1), got {level}"
        )));
    }
    let m = match report.tuning {
        Tuning::Frequencies { m } => m,
        Tuning::Lags { .. } => {
            return Err(Error::invalid(
                "the diffusivity test needs a Local Whittle report",
            ))
        }
    };
    let z = (m as f64).sqrt() * (report.alpha_hat - 1.0);
    let p = 2.0 * Normal::standard().sf(z.abs());
    Ok(DiffusiveTest {
        reject: p < level,
        z,
        p_value: p,
        alpha_hat: report.alpha_hat,
        level,
    })
}

/// OLS of `log μ̄₂(Δh)` on `log Δh` over lags `first..=last`.
///
/// The reported standard error assumes independent residuals, which the
/// overlapping-lag MSD violates; treat it as descriptive.
pub fn msd_loglog_fit(
    msd: &MsdCurve,
    lag_range: (usize, usize),
    level: f64,
) -> Result<EstimateReport> {
    let (first, last) = lag_range;
    let z = z_quantile(level)?;
    let pts: Vec<(f64, f64)> = msd
        .lags
        .iter()
        .zip(&msd.values)
        .filter(|(l, _)| (first..=last).contains(*l))
        .map(|(&l, &v)| {
            if v > 0.0 {
                Ok(((l as f64 * msd.dt).ln(), v.ln()))
            } else {
                Err(Error::invalid(format!(
                    "MSD at lag {l} is not positive ({v})"
                )))
            }
        })
        .collect::<Result<_>>()?;
    if pts.len() < 3 {
        return Err(Error::invalid(format!(
            "regression needs at least 3 lags in {first}..={last}, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    // floor keeps stderr > 0 on noiseless input
    let se = (rss / (n - 2.0) / sxx).sqrt().max(f64::EPSILON);
    Ok(EstimateReport {
        estimator: Estimator::MsdRegression,
        d_hat: None,
        alpha_hat: slope,
        stderr: se,
        ci: (slope - z * se, slope + z * se),
        level,
        tuning: Tuning::Lags { first, last },
        n: msd.n_pairs.first().copied().unwrap_or(0),
        log_sigma: Some(intercept),
        boundary: false,
        multimodal: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactsim::{CmeSampler, CovSeq, FgnModel};
    use crate::rng::{normals, stream_rng};
    use crate::trackio::{pathwise_msd, Axis};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn brute(series: &[f64], j: usize) -> f64 {
        let n = series.len();
        let w = 2.0 * PI * j as f64 / n as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (k, y) in series.iter().enumerate() {
            re += y * (k as f64 * w).cos();
            im -= y * (k as f64 * w).sin();
        }
        (re * re + im * im) / (2.0 * PI * n as f64)
    }

    #[test]
    fn periodogram_examples() {
        let p = periodogram(&[3.0; 10]).unwrap();
        assert_eq!(p.freqs.len(), 4);
        assert!(p.values.iter().all(|v| v.abs() < 1e-25));
        let n = 16;
        let j0 = 3;
        let y: Vec<f64> = (0..n)
            .map(|k| (2.0 * PI * j0 as f64 * k as f64 / n as f64).cos())
            .collect();
        let p = periodogram(&y).unwrap();
        assert_relative_eq!(
            p.values[j0 - 1],
            n as f64 / (8.0 * PI),
            max_relative = 1e-12
        );
        for (j, v) in p.values.iter().enumerate() {
            assert_relative_eq!(*v, brute(&y, j + 1), epsilon = 1e-12);
        }
        assert!(periodogram(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn periodogram_parseval() {
        let y = normals(&mut stream_rng(1, 1), 65);
        let p = periodogram(&y).unwrap();
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let avg = p.values.iter().sum::<f64>() / p.values.len() as f64;
        // exact for odd n: the ordinates pair up as j, n − j
        assert_relative_eq!(avg, var / (2.0 * PI) * n / (n - 1.0), max_relative = 1e-12);
        assert!((avg / (var / (2.0 * PI)) - 1.0).abs() < 2.0 / n);
    }

    #[test]
    fn white_noise_gives_alpha_near_one() {
        let reps = 300;
        let est: Vec<f64> = (0..reps)
            .map(|r| {
                let y = normals(&mut stream_rng(2, r), 2000);
                local_whittle(&y, &WhittleOptions::default())
                    .unwrap()
                    .alpha_hat
            })
            .collect();
        let mean = est.iter().sum::<f64>() / reps as f64;
        let sd = (est.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        let m = default_bandwidth(2000) as f64;
        assert!((mean - 1.0).abs() < 3.0 * sd / (reps as f64).sqrt());
        assert!((sd * m.sqrt() - 1.0).abs() < 0.2, "{sd}");
    }

    #[test]
    fn fgn_recovers_memory_parameter() {
        // fGn with H has spectrum ~ |ω|^{1−2H}: d = 1/2 − H
        let n = 4096;
        let s = CmeSampler::new(&FgnModel { h: 0.3 }, n).unwrap();
        let reps = 100;
        let mean = (0..reps)
            .map(|r| {
                let y = s.sample(&mut stream_rng(3, r));
                local_whittle(&y, &WhittleOptions::default())
                    .unwrap()
                    .d_hat
                    .unwrap()
            })
            .sum::<f64>()
            / reps as f64;
        assert!((mean - 0.2).abs() < 0.03, "{mean}");
    }

    #[test]
    fn report_invariants_and_flags() {
        let y = normals(&mut stream_rng(4, 0), 512);
        let r = local_whittle(
            &y,
            &WhittleOptions {
                m: Some(30),
                ..Default::default()
            },
        )
        .unwrap();
        let d = r.d_hat.unwrap();
        assert_relative_eq!(r.alpha_hat, 1.0 - 2.0 * d, epsilon = 1e-15);
        assert!(r.ci.0 < r.alpha_hat && r.alpha_hat < r.ci.1);
        assert_relative_eq!(r.stderr, 1.0 / 30f64.sqrt());
        assert!(!r.multimodal);
        // a strongly trending series pushes d to the lower edge
        let trend: Vec<f64> = (0..512).map(|k| k as f64).collect();
        let r = local_whittle(
            &trend,
            &WhittleOptions {
                m: Some(30),
                theta: (0.0, 0.4),
                level: 0.95,
            },
        )
        .unwrap();
        assert!(r.boundary);
        assert!(local_whittle(
            &y,
            &WhittleOptions {
                m: Some(300),
                ..Default::default()
            }
        )
        .is_err());
        assert!(local_whittle(
            &y,
            &WhittleOptions {
                theta: (0.3, 0.1),
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn objective_matches_definition() {
        let y = normals(&mut stream_rng(4, 1), 101);
        let obj = WhittleObjective::new(&y, 20).unwrap();
        let p = periodogram(&y).unwrap();
        let d = 0.17;
        let direct = (p.values[..20]
            .iter()
            .zip(&p.freqs)
            .map(|(i, w)| i / w.powf(2.0 * d))
            .sum::<f64>()
            / 20.0)
            .ln()
            + 2.0 * d * p.freqs[..20].iter().map(|w| w.ln()).sum::<f64>() / 20.0;
        assert_relative_eq!(obj.eval(d), direct, max_relative = 1e-12);
    }

    #[test]
    fn diffusive_test_at_exact_one() {
        let r = EstimateReport {
            estimator: Estimator::LocalWhittle,
            d_hat: Some(0.0),
            alpha_hat: 1.0,
            stderr: 0.1,
            ci: (0.8, 1.2),
            level: 0.95,
            tuning: Tuning::Frequencies { m: 100 },
            n: 1000,
            log_sigma: None,
            boundary: false,
            multimodal: false,
        };
        let t = diffusive_test_from(&r, 0.05).unwrap();
        assert_eq!(t.z, 0.0);
        assert!(!t.reject);
        assert_relative_eq!(t.p_value, 1.0);
    }

    #[test]
    fn msd_fit_exact_power_law() {
        let lags: Vec<usize> = (1..=50).collect();
        let vals: Vec<f64> = lags
            .iter()
            .map(|&l| 0.7 * (l as f64 * 0.1).powf(0.63))
            .collect();
        let c = MsdCurve::from_values(0.1, lags, vals).unwrap();
        let r = msd_loglog_fit(&c, (1, 50), 0.95).unwrap();
        assert_relative_eq!(r.alpha_hat, 0.63, epsilon = 1e-12);
        assert_relative_eq!(r.log_sigma.unwrap(), 0.7f64.ln(), epsilon = 1e-12);
        assert!(r.stderr > 0.0);
    }

    #[test]
    fn ballistic_track() {
        let t = Track::new("b", Axis::X, 1.0, (0..200).map(|k| k as f64).collect()).unwrap();
        let c = pathwise_msd(&t, 50).unwrap();
        assert_relative_eq!(
            msd_loglog_fit(&c, (1, 50), 0.95).unwrap().alpha_hat,
            2.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn msd_fit_rejects_nonpositive() {
        let c = MsdCurve::from_values(1.0, vec![1, 2, 3, 4], vec![1.0, 0.0, 2.0, 3.0]).unwrap();
        assert!(msd_loglog_fit(&c, (1, 4), 0.95).is_err());
        assert!(msd_loglog_fit(&c, (3, 4), 0.95).is_err());
    }

    #[test]
    fn cme_toy_spectrum_consistency() {
        // ρ̂(ω) = |ω|^{0.5} on [−π, π]: covariance λ(h) = 2∫_0^π cos(hω) ω^{0.5} dω
        let lags = 4097;
        let m =
            crate::quadrature::cosine_moments(&|w: f64| 2.0 * w.sqrt(), lags - 1, 1e-9).unwrap();
        let cov = CovSeq::user(m.values).unwrap();
        let s = CmeSampler::new(&cov, 4096).unwrap();
        let reps = 80;
        let mean = (0..reps)
            .map(|r| {
                local_whittle(&s.sample(&mut stream_rng(8, r)), &WhittleOptions::default())
                    .unwrap()
                    .d_hat
                    .unwrap()
            })
            .sum::<f64>()
            / reps as f64;
        assert!((mean - 0.25).abs() < 0.03, "{mean}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn lw_is_scale_invariant(seed in 0u64..1000, c in 0.01f64..100.0) {
            let y = normals(&mut stream_rng(seed, 0), 300);
            let yc: Vec<f64> = y.iter().map(|v| c * v).collect();
            let a = local_whittle(&y, &WhittleOptions::default()).unwrap().d_hat.unwrap();
            let b = local_whittle(&yc, &WhittleOptions::default()).unwrap().d_hat.unwrap();
            prop_assert!((a - b).abs() < 1e-7);
        }

        #[test]
        fn msd_fit_ignores_time_unit(dt in 0.001f64..10.0, seed in 0u64..500) {
            let x: Vec<f64> = normals(&mut stream_rng(seed, 1), 300).iter().scan(0.0, |s, v| { *s += v; Some(*s) }).collect();
            let t1 = Track::new("a", Axis::X, 1.0, x.clone()).unwrap();
            let t2 = Track::new("a", Axis::X, dt, x).unwrap();
            let a = msd_loglog_fit(&pathwise_msd(&t1, 30).unwrap(), (1, 30), 0.95).unwrap();
            let b = msd_loglog_fit(&pathwise_msd(&t2, 30).unwrap(), (1, 30), 0.95).unwrap();
            prop_assert!((a.alpha_hat - b.alpha_hat).abs() < 1e-9);
        }
    }
}
