//! Monte Carlo harness: cross-simulator comparison of Local Whittle
//! estimates and sampling-distribution studies.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactsim::{fgle_increment_covariance, CholeskySampler, CmeSampler, FgleIncrementModel};
use crate::inference::{local_whittle, msd_loglog_fit, Estimator, Tuning, WhittleOptions};
use crate::rng::{arm_stream, normals, stream_rng, with_pool, SimRng};
use crate::spectral::FgleParams;
use crate::trackio::{pathwise_msd, Axis, Track};
use crate::waveletsim::{BankOptions, Cmf, WaveletOptions, WaveletSimulator};

/// Bandwidth calibrated against reference pooled estimates at `T = 2⁹`.
pub const REFERENCE_BANDWIDTH: usize = 40;

/// Local Whittle search range for the comparison; wide enough that `d = 0.45`
/// estimates are not clipped.
pub const REFERENCE_THETA: (f64, f64) = (-0.99, 0.99);

/// Welch statistic `|x̄_a − x̄_b| / √(s_a²/N_a + s_b²/N_b)`.
pub fn two_sample_t(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("both samples need at least two values"));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let se2 = va / a.len() as f64 + vb / b.len() as f64;
    if se2 == 0.0 {
        return if ma == mb {
            Ok(0.0)
        } else {
            Err(Error::invalid("both samples have zero variance"))
        };
    }
    Ok((ma - mb).abs() / se2.sqrt())
}

/// Mean and unbiased variance.
pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = if x.len() > 1 {
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, v)
}

/// fGLE increment simulators compared in the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Cholesky,
    Cme,
    Wavelet { j: u32 },
}

impl Method {
    // stream arm, fixed per method so adding methods never shifts others
    fn arm(self) -> u64 {
        match self {
            Method::Cholesky => 1,
            Method::Cme => 2,
            Method::Wavelet { j } => 100 + j as u64,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Cholesky => f.write_str("cholesky"),
            Method::Cme => f.write_str("cme"),
            Method::Wavelet { j } => write!(f, "wavelet@{j}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cholesky" => Ok(Method::Cholesky),
            "cme" => Ok(Method::Cme),
            _ => {
                let j = s
                    .strip_prefix("wavelet@")
                    .and_then(|j| j.parse().ok())
                    .ok_or_else(|| {
                        Error::invalid(format!("unknown method '{s}' (cholesky, cme, wavelet@J)"))
                    })?;
                Ok(Method::Wavelet { j })
            }
        }
    }
}

/// fGLE model and simulator settings shared by the harness and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FgleSetup {
    pub d: f64,
    pub gamma: f64,
    pub mass: f64,
    pub kbt: f64,
    /// Number of unit-time increments `T`.
    pub horizon: usize,
    pub init_len: usize,
    pub lag_bound: usize,
    pub threshold: f64,
    pub cmf: Cmf,
    pub cov_tol: f64,
}

impl Default for FgleSetup {
    fn default() -> Self {
        FgleSetup {
            d: 0.25,
            gamma: 2.0,
            mass: 1.0,
            kbt: 1.0,
            horizon: 512,
            init_len: 1024,
            lag_bound: 80,
            threshold: 1e-5,
            cmf: Cmf::Db4,
            cov_tol: 1e-10,
        }
    }
}

impl FgleSetup {
    pub fn params(&self) -> Result<FgleParams> {
        FgleParams::from_d(self.d, self.gamma, self.mass, self.kbt)
    }

    pub fn wavelet_options(&self) -> WaveletOptions {
        WaveletOptions {
            bank: BankOptions {
                lag_bound: self.lag_bound,
                threshold: self.threshold,
                ..BankOptions::default()
            },
            cmf: self.cmf,
            init_len: self.init_len,
            cov_tol: 1e-11,
        }
    }
}

/// A prepared simulator producing `T` increments per call.
pub enum IncrementSampler {
    Cholesky(CholeskySampler),
    Cme(CmeSampler),
    Wavelet(Box<WaveletSimulator>),
}

impl IncrementSampler {
    pub fn new(method: Method, setup: &FgleSetup) -> Result<Self> {
        let p = setup.params()?;
        Ok(match method {
            Method::Cholesky => {
                let cov = fgle_increment_covariance(&p, setup.horizon, setup.cov_tol)?;
                IncrementSampler::Cholesky(CholeskySampler::new(&cov)?)
            }
            Method::Cme => {
                let model = FgleIncrementModel::new(p, setup.cov_tol)?;
                IncrementSampler::Cme(CmeSampler::new(&model, setup.horizon)?)
            }
            Method::Wavelet { j } => IncrementSampler::Wavelet(Box::new(WaveletSimulator::new(
                p,
                j,
                setup.horizon,
                setup.wavelet_options(),
            )?)),
        })
    }

    pub fn increments(&self, rng: &mut SimRng) -> Result<Vec<f64>> {
        match self {
            IncrementSampler::Cholesky(s) => Ok(s.sample(rng)),
            IncrementSampler::Cme(s) => Ok(s.sample(rng)),
            IncrementSampler::Wavelet(s) => {
                Ok(s.sample(rng)?.windows(2).map(|w| w[1] - w[0]).collect())
            }
        }
    }

    /// Positions `X(0..=T)` at unit spacing.
    pub fn positions(&self, rng: &mut SimRng) -> Result<Vec<f64>> {
        match self {
            IncrementSampler::Wavelet(s) => s.sample(rng),
            _ => {
                let y = self.increments(rng)?;
                let mut x = Vec::with_capacity(y.len() + 1);
                x.push(0.0);
                let mut acc = 0.0;
                for v in y {
                    acc += v;
                    x.push(acc);
                }
                Ok(x)
            }
        }
    }
}

/// Runs `f(rep, rng)` for every replicate in parallel, ordered by replicate.
pub fn replicate<T: Send>(
    seed: u64,
    arm: u64,
    reps: usize,
    f: impl Fn(usize, &mut SimRng) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    with_pool(|| {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream_rng(seed, arm_stream(arm, r as u64));
                f(r, &mut rng).map_err(|e| Error::Replicate {
                    replicate: r,
                    seed,
                    source: Box::new(e),
                })
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareConfig {
    pub setup: FgleSetup,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub seed: u64,
    /// Local Whittle bandwidth; `None` for the default.
    pub m: Option<usize>,
    pub theta: (f64, f64),
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            setup: FgleSetup::default(),
            methods: vec![Method::Wavelet { j: 8 }, Method::Cme, Method::Cholesky],
            reps: 1000,
            seed: 2011,
            m: Some(REFERENCE_BANDWIDTH),
            theta: REFERENCE_THETA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub d_hat: f64,
    pub s: f64,
    pub n: usize,
    /// `|t|` against the Cholesky baseline; absent on the baseline row.
    pub t_stat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub config: CompareConfig,
    pub rows: Vec<ComparisonRow>,
    /// Per-method estimates, in row order.
    #[serde(skip)]
    pub estimates: Vec<Vec<f64>>,
}

impl ComparisonTable {
    /// CSV with a `# config:` line and columns `method,d_hat,s,N,t_stat`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# config: {}", serde_json::to_string(&self.config)?)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "d_hat", "s", "N", "t_stat"])?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                format!("{:.8}", r.d_hat),
                format!("{:.8}", r.s),
                r.n.to_string(),
                r.t_stat
                    .map(|t| format!("{t:.8}"))
                    .unwrap_or_else(|| "-".into()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn row(&self, method: Method) -> Option<&ComparisonRow> {
        let label = method.to_string();
        self.rows.iter().find(|r| r.method == label)
    }
}

/// Local Whittle `d̂` per replicate for one method.
pub fn method_estimates(config: &CompareConfig, method: Method) -> Result<Vec<f64>> {
    let sampler = IncrementSampler::new(method, &config.setup)?;
    let opts = WhittleOptions {
        m: config.m,
        theta: config.theta,
        level: 0.95,
    };
    replicate(config.seed, method.arm(), config.reps, |_, rng| {
        let y = sampler.increments(rng)?;
        let r = local_whittle(&y, &opts)?;
        Ok(r.d_hat.expect("Local Whittle reports d"))
    })
}

/// Pooled `d̂`, sample SD and `|t|` against Cholesky for each method.
pub fn run_comparison(config: &CompareConfig) -> Result<ComparisonTable> {
    if config.reps < 2 {
        return Err(Error::invalid("need at least two replicates"));
    }
    if config.methods.is_empty() {
        return Err(Error::invalid("no methods to compare"));
    }
    let mut estimates = Vec::with_capacity(config.methods.len());
    for &m in &config.methods {
        log::info!("comparison: {m}, {} replicates", config.reps);
        estimates.push(method_estimates(config, m)?);
    }
    let baseline = config.methods.iter().position(|m| *m == Method::Cholesky);
    let mut rows = Vec::with_capacity(estimates.len());
    for (k, (m, e)) in config.methods.iter().zip(&estimates).enumerate() {
        let (mean, var) = mean_var(e);
        let t_stat = match baseline {
            Some(b) if b != k => Some(two_sample_t(e, &estimates[b])?),
            _ => None,
        };
        rows.push(ComparisonRow {
            method: m.to_string(),
            d_hat: mean,
            s: var.sqrt(),
            n: e.len(),
            t_stat,
        });
    }
    Ok(ComparisonTable {
        config: config.clone(),
        rows,
        estimates,
    })
}

/// Paths analysed in a sampling-distribution study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Source {
    /// Brownian motion with `n` iid standard normal increments.
    Brownian {
        n: usize,
    },
    Fgle {
        setup: FgleSetup,
        method: Method,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistributionConfig {
    pub source: Source,
    pub estimator: Estimator,
    pub reps: usize,
    pub seed: u64,
    pub m: Option<usize>,
    pub theta: (f64, f64),
    /// Lag range of the MSD regression.
    pub lags: (usize, usize),
    pub kde_points: usize,
}

impl Default for DistributionConfig {
    fn default() -> Self {
        DistributionConfig {
            source: Source::Brownian { n: 5000 },
            estimator: Estimator::LocalWhittle,
            reps: 1000,
            seed: 2011,
            m: None,
            theta: (-0.49, 0.49),
            lags: (1, 1000),
            kde_points: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub config: DistributionConfig,
    /// Per-path `α̂`.
    pub estimates: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    /// Asymptotic overlay `N(mean, 1/m)` for Local Whittle.
    pub overlay_sd: Option<f64>,
    pub kde_x: Vec<f64>,
    pub kde_y: Vec<f64>,
}

impl DistributionReport {
    /// Plot-ready CSV `x,kde,normal`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# config: {}", serde_json::to_string(&self.config)?)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "kde", "normal"])?;
        let sd = self.overlay_sd.unwrap_or(self.sd);
        for (x, y) in self.kde_x.iter().zip(&self.kde_y) {
            let z = (x - self.mean) / sd;
            let normal = (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
            w.write_record([
                format!("{x:.8}"),
                format!("{y:.8e}"),
                format!("{normal:.8e}"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_estimates<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replicate", "alpha_hat"])?;
        for (i, a) in self.estimates.iter().enumerate() {
            w.write_record([i.to_string(), format!("{a:.10}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Gaussian kernel density with Silverman's bandwidth on `points` nodes.
pub fn kde(x: &[f64], points: usize) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let (_, var) = mean_var(x);
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| sorted[((n - 1.0) * p).round() as usize];
    let iqr = q(0.75) - q(0.25);
    let spread = var.sqrt().min(iqr / 1.34).max(f64::MIN_POSITIVE);
    let h = 0.9 * spread * n.powf(-0.2);
    let (lo, hi) = (sorted[0] - 3.0 * h, sorted[sorted.len() - 1] + 3.0 * h);
    let grid: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points.max(2) - 1) as f64)
        .collect();
    let c = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    let dens = grid
        .iter()
        .map(|g| {
            x.iter()
                .map(|v| (-0.5 * ((g - v) / h).powi(2)).exp())
                .sum::<f64>()
                * c
        })
        .collect();
    (grid, dens)
}

/// Per-path estimates of `α` with a density estimate and normal overlay.
pub fn sampling_distribution(config: &DistributionConfig) -> Result<DistributionReport> {
    if config.reps < 2 {
        return Err(Error::invalid("need at least two replicates"));
    }
    let opts = WhittleOptions {
        m: config.m,
        theta: config.theta,
        level: 0.95,
    };
    let estimator = config.estimator;
    let lags = config.lags;
    let estimate = |x: Vec<f64>| -> Result<(f64, Option<usize>)> {
        match estimator {
            Estimator::LocalWhittle => {
                let y: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
                let r = local_whittle(&y, &opts)?;
                let m = match r.tuning {
                    Tuning::Frequencies { m } => Some(m),
                    Tuning::Lags { .. } => None,
                };
                Ok((r.alpha_hat, m))
            }
            Estimator::MsdRegression => {
                let t = Track::new("path", Axis::X, 1.0, x)?;
                let c = pathwise_msd(&t, lags.1)?;
                Ok((msd_loglog_fit(&c, lags, 0.95)?.alpha_hat, None))
            }
        }
    };
    let out: Vec<(f64, Option<usize>)> = match config.source {
        Source::Brownian { n } => replicate(config.seed, 0, config.reps, |_, rng| {
            let y = normals(rng, n);
            let mut x = Vec::with_capacity(n + 1);
            x.push(0.0);
            let mut acc = 0.0;
            for v in y {
                acc += v;
                x.push(acc);
            }
            estimate(x)
        })?,
        Source::Fgle { setup, method } => {
            let sampler = IncrementSampler::new(method, &setup)?;
            replicate(config.seed, method.arm(), config.reps, |_, rng| {
                estimate(sampler.positions(rng)?)
            })?
        }
    };
    let estimates: Vec<f64> = out.iter().map(|e| e.0).collect();
    let (mean, var) = mean_var(&estimates);
    let overlay_sd = out
        .first()
        .and_then(|e| e.1)
        .map(|m| 1.0 / (m as f64).sqrt());
    let (kde_x, kde_y) = kde(&estimates, config.kde_points.max(2));
    Ok(DistributionReport {
        config: config.clone(),
        estimates,
        mean,
        sd: var.sqrt(),
        overlay_sd,
        kde_x,
        kde_y,
    })
}
