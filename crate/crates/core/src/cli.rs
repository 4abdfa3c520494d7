//! Command-line interface: `simulate`, `estimate`, `msd`, `acf`, `gser`,
//! `compare` and `distribution`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bench::{
    replicate, run_comparison, sampling_distribution, CompareConfig, DistributionConfig, FgleSetup,
    IncrementSampler, Method,
};
use crate::error::{Error, Result};
use crate::inference::{
    diffusive_test_from, local_whittle, msd_loglog_fit, DiffusiveTest, EstimateReport, Tuning,
    WhittleOptions,
};
use crate::kernels::GleParams;
use crate::kernels::{gser_modulus, log_grid, GserDim, MemoryKernel};
use crate::markovsim::{simulate_langevin, PronyGle};
use crate::trackio::{
    default_max_lag, detrend, increments, load_tracks, pathwise_msd, sample_acf, write_tracks,
    Axis, Detrend, MsdCurve, Track,
};
use crate::waveletsim::Cmf;

#[derive(Debug, Parser)]
#[command(
    name = "microrheo",
    version,
    about = "Simulation and inference for passive microrheology"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Langevin,
    Prony,
    FgleWavelet,
    FgleCme,
    FgleCholesky,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate particle tracks and write them as track CSV.
    Simulate {
        #[arg(long, value_enum)]
        model: Model,
        /// JSON parameter file.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Steps for the Markov models.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        /// Memory exponent of the fGLE.
        #[arg(long)]
        d: Option<f64>,
        /// Final wavelet scale.
        #[arg(long = "J", default_value_t = 8)]
        j: u32,
        /// fGLE horizon (number of unit-time increments).
        #[arg(long = "T")]
        horizon: Option<usize>,
        #[arg(long)]
        cmf: Option<Cmf>,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Estimate the subdiffusivity exponent of each track.
    Estimate {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
        /// `lw` (Local Whittle) or `msd` (log-log regression).
        #[arg(long, default_value = "lw")]
        method: String,
        /// Local Whittle bandwidth.
        #[arg(long)]
        m: Option<usize>,
        /// Regression lag range `a:b`.
        #[arg(long)]
        lags: Option<String>,
        /// Search range `lo:hi` for `d`.
        #[arg(long)]
        theta: Option<String>,
        /// Test level; intervals use `1 − level`.
        #[arg(long, default_value_t = 0.05)]
        level: f64,
        #[arg(long, default_value = "linear")]
        detrend: Detrend,
        #[arg(long)]
        no_detrend: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Pathwise MSD per track.
    Msd {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        max_lag: Option<usize>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Sample autocorrelation of increments per track.
    Acf {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 50)]
        max_lag: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Complex modulus from the track-averaged pathwise MSD.
    Gser {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        kbt: f64,
        #[arg(long, default_value = "1d")]
        dim: GserDim,
        #[arg(long)]
        max_lag: Option<usize>,
        #[arg(long, default_value_t = 40)]
        points: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Cross-simulator comparison table.
    Compare {
        /// JSON comparison config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        d: Option<f64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated methods, e.g. `cholesky,cme,wavelet@8`.
        #[arg(long)]
        methods: Option<String>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Sampling distribution of an estimator with a normal overlay.
    Distribution {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write per-replicate estimates here.
        #[arg(long)]
        estimates: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

/// Parameter file for `simulate`; every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateParams {
    pub mass: f64,
    pub gamma: f64,
    pub kbt: f64,
    pub dt: f64,
    pub steps: usize,
    pub kernel: Option<MemoryKernel>,
    pub fgle: FgleSetup,
}

impl Default for SimulateParams {
    fn default() -> Self {
        SimulateParams {
            mass: 1.0,
            gamma: 2.0,
            kbt: 1.0,
            dt: 0.01,
            steps: 1000,
            kernel: None,
            fgle: FgleSetup::default(),
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => Ok(serde_json::from_reader(io::BufReader::new(File::open(p)?))?),
        None => Ok(T::default()),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_pair<T: std::str::FromStr>(s: &str, what: &str) -> Result<(T, T)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::invalid(format!("{what} must look like a:b, got `{s}`")))?;
    let p = |x: &str| {
        x.trim()
            .parse::<T>()
            .map_err(|_| Error::invalid(format!("cannot parse `{x}` in {what}")))
    };
    Ok((p(a)?, p(b)?))
}

fn axis_name(a: Axis) -> &'static str {
    match a {
        Axis::X => "x",
        Axis::Y => "y",
    }
}

/// Command-line values that replace fields of the parameter file.
struct Overrides {
    steps: Option<usize>,
    dt: Option<f64>,
    d: Option<f64>,
    horizon: Option<usize>,
    cmf: Option<Cmf>,
}

fn simulate(
    model: Model,
    mut p: SimulateParams,
    overrides: Overrides,
    j: u32,
    reps: usize,
    seed: u64,
) -> Result<Vec<Track>> {
    let Overrides {
        steps,
        dt,
        d,
        horizon,
        cmf,
    } = overrides;
    if let Some(s) = steps {
        p.steps = s;
    }
    if let Some(v) = dt {
        p.dt = v;
    }
    if let Some(v) = d {
        p.fgle.d = v;
    }
    if let Some(v) = horizon {
        p.fgle.horizon = v;
    }
    if let Some(v) = cmf {
        p.fgle.cmf = v;
    }
    if reps == 0 {
        return Err(Error::invalid("need at least one replicate"));
    }
    let id = |r: usize| format!("sim-{r}");
    match model {
        Model::Langevin => replicate(seed, 0, reps, |r, rng| {
            simulate_langevin(p.mass, p.gamma, p.kbt, p.dt, p.steps, rng)?.into_track(id(r))
        }),
        Model::Prony => {
            let kernel = p.kernel.clone().ok_or_else(|| {
                Error::invalid("the prony model needs a `kernel` in the parameter file")
            })?;
            let g = PronyGle::new(GleParams::new(p.mass, p.gamma, p.kbt, kernel)?)?;
            replicate(seed, 0, reps, |r, rng| {
                g.simulate(p.dt, p.steps, rng)?.into_track(id(r))
            })
        }
        Model::FgleWavelet | Model::FgleCme | Model::FgleCholesky => {
            let method = match model {
                Model::FgleWavelet => Method::Wavelet { j },
                Model::FgleCme => Method::Cme,
                _ => Method::Cholesky,
            };
            let s = IncrementSampler::new(method, &p.fgle)?;
            replicate(seed, 0, reps, |r, rng| {
                Track::new(id(r), Axis::X, 1.0, s.positions(rng)?)
            })
        }
    }
}

#[derive(Debug, Serialize)]
struct TrackEstimate {
    track: String,
    axis: &'static str,
    report: EstimateReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    test: Option<DiffusiveTest>,
}

fn averaged_msd(tracks: &[Track], max_lag: Option<usize>) -> Result<MsdCurve> {
    let shortest = tracks
        .iter()
        .map(|t| t.steps())
        .min()
        .ok_or_else(|| Error::invalid("no tracks in input"))?;
    let n = max_lag.unwrap_or_else(|| default_max_lag(shortest));
    let curves: Vec<MsdCurve> = tracks
        .iter()
        .map(|t| pathwise_msd(t, n))
        .collect::<Result<_>>()?;
    let k = curves.len() as f64;
    let mut avg = curves[0].clone();
    for c in &curves[1..] {
        if (c.dt - avg.dt).abs() > 1e-12 * avg.dt {
            return Err(Error::invalid("tracks have different sampling intervals"));
        }
        for (a, v) in avg.values.iter_mut().zip(&c.values) {
            *a += v;
        }
    }
    for v in avg.values.iter_mut() {
        *v /= k;
    }
    for (i, np) in avg.n_pairs.iter_mut().enumerate() {
        *np = curves.iter().map(|c| c.n_pairs[i]).sum();
    }
    Ok(avg)
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            model,
            params,
            steps,
            dt,
            d,
            j,
            horizon,
            cmf,
            reps,
            seed,
            out,
        } => {
            let p: SimulateParams = read_json(params.as_deref())?;
            let tracks = simulate(
                model,
                p,
                Overrides {
                    steps,
                    dt,
                    d,
                    horizon,
                    cmf,
                },
                j,
                reps,
                seed,
            )?;
            let mut w = output(out.as_deref())?;
            write_tracks(&mut w, &tracks)?;
            w.flush()?;
        }
        Command::Estimate {
            input,
            dt,
            method,
            m,
            lags,
            theta,
            level,
            detrend: method_detrend,
            no_detrend,
            format,
            out,
        } => {
            let estimator: crate::inference::Estimator = method.parse()?;
            let tracks = load_tracks(&input, dt)?;
            let how = if no_detrend {
                Detrend::None
            } else {
                method_detrend
            };
            let mut opts = WhittleOptions {
                m,
                level: 1.0 - level,
                ..WhittleOptions::default()
            };
            if let Some(t) = theta {
                opts.theta = parse_pair(&t, "--theta")?;
            }
            let lag_range = lags
                .as_deref()
                .map(|s| parse_pair::<usize>(s, "--lags"))
                .transpose()?;
            let mut rows = Vec::with_capacity(tracks.len());
            for t in &tracks {
                let t2 = detrend(t, how)?;
                let (report, test) = match estimator {
                    crate::inference::Estimator::LocalWhittle => {
                        let r = local_whittle(&increments(&t2, 1)?, &opts)?;
                        let test = diffusive_test_from(&r, level)?;
                        (r, Some(test))
                    }
                    crate::inference::Estimator::MsdRegression => {
                        let (a, b) = lag_range.unwrap_or((1, default_max_lag(t2.steps())));
                        let c = pathwise_msd(&t2, b)?;
                        (msd_loglog_fit(&c, (a, b), 1.0 - level)?, None)
                    }
                };
                rows.push(TrackEstimate {
                    track: t.id().to_string(),
                    axis: axis_name(t.axis()),
                    report,
                    test,
                });
            }
            let mut w = output(out.as_deref())?;
            match format {
                Format::Json => {
                    serde_json::to_writer_pretty(&mut w, &rows)?;
                    writeln!(w)?;
                }
                Format::Csv => {
                    let mut c = csv::Writer::from_writer(&mut w);
                    c.write_record([
                        "track",
                        "axis",
                        "estimator",
                        "d_hat",
                        "alpha_hat",
                        "stderr",
                        "ci_lo",
                        "ci_hi",
                        "tuning",
                        "n",
                        "z",
                        "p_value",
                        "reject",
                    ])?;
                    for r in &rows {
                        let e = &r.report;
                        let tuning = match e.tuning {
                            Tuning::Frequencies { m } => format!("m={m}"),
                            Tuning::Lags { first, last } => format!("lags={first}:{last}"),
                        };
                        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                        c.write_record([
                            r.track.clone(),
                            r.axis.to_string(),
                            e.estimator.to_string(),
                            opt(e.d_hat),
                            e.alpha_hat.to_string(),
                            e.stderr.to_string(),
                            e.ci.0.to_string(),
                            e.ci.1.to_string(),
                            tuning,
                            e.n.to_string(),
                            opt(r.test.map(|t| t.z)),
                            opt(r.test.map(|t| t.p_value)),
                            r.test.map(|t| t.reject.to_string()).unwrap_or_default(),
                        ])?;
                    }
                    c.flush()?;
                }
            }
            w.flush()?;
        }
        Command::Msd {
            input,
            dt,
            max_lag,
            out,
        } => {
            let tracks = load_tracks(&input, dt)?;
            let mut w = output(out.as_deref())?;
            {
                let mut c = csv::Writer::from_writer(&mut w);
                c.write_record(["track", "axis", "lag", "t", "msd", "n_pairs"])?;
                for t in &tracks {
                    let curve =
                        pathwise_msd(t, max_lag.unwrap_or_else(|| default_max_lag(t.steps())))?;
                    for ((lag, time), (v, np)) in curve
                        .lags
                        .iter()
                        .zip(curve.times())
                        .zip(curve.values.iter().zip(&curve.n_pairs))
                    {
                        c.write_record([
                            t.id().to_string(),
                            axis_name(t.axis()).to_string(),
                            lag.to_string(),
                            time.to_string(),
                            v.to_string(),
                            np.to_string(),
                        ])?;
                    }
                }
                c.flush()?;
            }
            w.flush()?;
        }
        Command::Acf {
            input,
            dt,
            max_lag,
            out,
        } => {
            let tracks = load_tracks(&input, dt)?;
            let mut w = output(out.as_deref())?;
            {
                let mut c = csv::Writer::from_writer(&mut w);
                c.write_record(["track", "axis", "lag", "acf"])?;
                for t in &tracks {
                    let a = sample_acf(&increments(t, 1)?, max_lag)?;
                    for (lag, v) in a.lags.iter().zip(&a.values) {
                        c.write_record([
                            t.id().to_string(),
                            axis_name(t.axis()).to_string(),
                            lag.to_string(),
                            v.to_string(),
                        ])?;
                    }
                }
                c.flush()?;
            }
            w.flush()?;
        }
        Command::Gser {
            input,
            dt,
            radius,
            kbt,
            dim,
            max_lag,
            points,
            out,
        } => {
            let tracks = load_tracks(&input, dt)?;
            let msd = averaged_msd(&tracks, max_lag)?;
            let n = *msd.lags.last().expect("non-empty curve") as f64;
            let grid = log_grid(1.0 / (n * msd.dt), 1.0 / msd.dt, points.max(2));
            let curve = gser_modulus(&msd, radius, kbt, dim, &grid)?;
            let mut w = output(out.as_deref())?;
            curve.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Compare {
            config,
            d,
            reps,
            seed,
            methods,
            format,
            out,
        } => {
            let mut cfg: CompareConfig = read_json(config.as_deref())?;
            if let Some(v) = d {
                cfg.setup.d = v;
            }
            if let Some(v) = reps {
                cfg.reps = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(list) = methods {
                cfg.methods = list
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<_>>()?;
            }
            let table = run_comparison(&cfg)?;
            let mut w = output(out.as_deref())?;
            match format {
                Format::Csv => table.write_csv(&mut w)?,
                Format::Json => {
                    serde_json::to_writer_pretty(&mut w, &table)?;
                    writeln!(w)?;
                }
            }
            w.flush()?;
        }
        Command::Distribution {
            config,
            reps,
            seed,
            estimates,
            out,
        } => {
            let mut cfg: DistributionConfig = read_json(config.as_deref())?;
            if let Some(v) = reps {
                cfg.reps = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            let report = sampling_distribution(&cfg)?;
            if let Some(p) = estimates {
                let mut w = BufWriter::new(File::create(p)?);
                report.write_estimates(&mut w)?;
                w.flush()?;
            }
            let mut w = output(out.as_deref())?;
            report.write_csv(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
