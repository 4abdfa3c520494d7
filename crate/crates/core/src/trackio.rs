//! Particle tracks: loading, detrending, and empirical path statistics.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::X => f.write_str("x"),
            Axis::Y => f.write_str("y"),
        }
    }
}

/// One coordinate of one particle, sampled every `dt` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    id: String,
    axis: Axis,
    dt: f64,
    positions: Vec<f64>,
}

impl Track {
    pub fn new(id: impl Into<String>, axis: Axis, dt: f64, positions: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if positions.len() < 2 {
            return Err(Error::invalid("a track needs at least two samples"));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("track positions must be finite"));
        }
        Ok(Track {
            id: id.into(),
            axis,
            dt,
            positions,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Number of steps `N` (positions are indexed `0..=N`).
    pub fn steps(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    fn with_positions(&self, positions: Vec<f64>) -> Track {
        Track {
            id: self.id.clone(),
            axis: self.axis,
            dt: self.dt,
            positions,
        }
    }
}

/// Pathwise mean squared displacement at lags `1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsdCurve {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub dt: f64,
    pub n_pairs: Vec<usize>,
}

impl MsdCurve {
    /// Build from an analytic or external curve sampled at `lags·dt`.
    pub fn from_values(dt: f64, lags: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if lags.len() != values.len() || lags.is_empty() {
            return Err(Error::invalid(
                "lags and values must be non-empty and equally long",
            ));
        }
        if lags.windows(2).any(|w| w[0] >= w[1]) || lags[0] == 0 {
            return Err(Error::invalid(
                "lags must be positive and strictly increasing",
            ));
        }
        if !(dt > 0.0) {
            return Err(Error::invalid("dt must be positive"));
        }
        let n_pairs = vec![0; lags.len()];
        Ok(MsdCurve {
            lags,
            values,
            dt,
            n_pairs,
        })
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.lags.iter().map(move |&h| h as f64 * self.dt)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lag", "value", "n_pairs"])?;
        for ((h, v), n) in self.lags.iter().zip(&self.values).zip(&self.n_pairs) {
            w.write_record([h.to_string(), v.to_string(), n.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sample autocorrelation at lags `0..=L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfCurve {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
}

impl AcfCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lag", "value"])?;
        for (h, v) in self.lags.iter().zip(&self.values) {
            w.write_record([h.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detrend {
    None,
    Mean,
    #[default]
    Linear,
}

impl std::str::FromStr for Detrend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Detrend::None),
            "mean" => Ok(Detrend::Mean),
            "linear" => Ok(Detrend::Linear),
            other => Err(Error::invalid(format!("unknown detrend method `{other}`"))),
        }
    }
}

/// Reads tracks from CSV with header `track_id,frame,x[,y]`.
///
/// The sampling interval comes from a leading `# dt=<seconds>` comment when
/// present, otherwise from `dt`. Two-column files yield one track per axis.
pub fn load_tracks(path: impl AsRef<Path>, dt: Option<f64>) -> Result<Vec<Track>> {
    let file = std::fs::File::open(path)?;
    read_tracks(file, dt)
}

pub fn read_tracks<R: Read>(mut input: R, dt: Option<f64>) -> Result<Vec<Track>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let header_dt = text
        .lines()
        .take_while(|l| l.trim_start().starts_with('#'))
        .find_map(|l| {
            let body = l.trim_start().trim_start_matches('#').trim();
            body.strip_prefix("dt")
                .map(|rest| rest.trim_start().trim_start_matches('=').trim())
                .and_then(|v| v.parse::<f64>().ok())
        });
    let dt = header_dt
        .or(dt)
        .ok_or_else(|| Error::invalid("sampling interval missing: add `# dt=<s>` or pass dt"))?;

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col("track_id").ok_or_else(|| Error::MissingColumn("track_id".into()))?;
    let frame_col = col("frame").ok_or_else(|| Error::MissingColumn("frame".into()))?;
    let x_col = col("x").ok_or_else(|| Error::MissingColumn("x".into()))?;
    let y_col = col("y");

    struct Raw {
        last_frame: i64,
        x: Vec<f64>,
        y: Vec<f64>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut raw: HashMap<String, Raw> = HashMap::new();

    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let number = |i: usize| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| Error::NonNumeric {
                line,
                value: field(i).to_string(),
            })
        };
        let id = field(id_col).to_string();
        let frame: i64 = field(frame_col).parse().map_err(|_| Error::NonNumeric {
            line,
            value: field(frame_col).to_string(),
        })?;
        let x = number(x_col)?;
        let y = y_col.map(number).transpose()?;

        match raw.get_mut(&id) {
            Some(entry) => {
                if frame != entry.last_frame + 1 {
                    return Err(Error::FrameGap {
                        track_id: id,
                        previous: entry.last_frame,
                        found: frame,
                    });
                }
                entry.last_frame = frame;
                entry.x.push(x);
                entry.y.extend(y);
            }
            None => {
                order.push(id.clone());
                raw.insert(
                    id,
                    Raw {
                        last_frame: frame,
                        x: vec![x],
                        y: y.into_iter().collect(),
                    },
                );
            }
        }
    }

    let mut tracks = Vec::new();
    for id in order {
        let r = raw.remove(&id).expect("recorded id");
        tracks.push(Track::new(id.clone(), Axis::X, dt, r.x)?);
        if y_col.is_some() {
            tracks.push(Track::new(id, Axis::Y, dt, r.y)?);
        }
    }
    Ok(tracks)
}

/// Writes tracks back in the loader's format (frames numbered from 0).
pub fn write_tracks<W: Write>(out: W, tracks: &[Track]) -> Result<()> {
    let mut ids: Vec<&str> = Vec::new();
    for t in tracks {
        if !ids.contains(&t.id()) {
            ids.push(t.id());
        }
    }
    let find = |id: &str, axis: Axis| tracks.iter().find(|t| t.id() == id && t.axis() == axis);
    let two_d = tracks.iter().any(|t| t.axis() == Axis::Y);
    let dt = tracks.first().map(|t| t.dt()).unwrap_or(1.0);
    if tracks.iter().any(|t| t.dt() != dt) {
        return Err(Error::invalid("tracks written to one file must share dt"));
    }

    let mut out = out;
    writeln!(out, "# dt={dt}")?;
    let mut w = csv::Writer::from_writer(out);
    if two_d {
        w.write_record(["track_id", "frame", "x", "y"])?;
    } else {
        w.write_record(["track_id", "frame", "x"])?;
    }
    for id in ids {
        let x = find(id, Axis::X).ok_or_else(|| Error::invalid(format!("track {id} lacks x")))?;
        let y = if two_d {
            let y =
                find(id, Axis::Y).ok_or_else(|| Error::invalid(format!("track {id} lacks y")))?;
            if y.len() != x.len() {
                return Err(Error::invalid(format!(
                    "track {id}: x and y lengths differ"
                )));
            }
            Some(y)
        } else {
            None
        };
        for (j, xv) in x.positions().iter().enumerate() {
            let mut row = vec![id.to_string(), j.to_string(), xv.to_string()];
            if let Some(y) = y {
                row.push(y.positions()[j].to_string());
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn detrend(track: &Track, method: Detrend) -> Result<Track> {
    let x = track.positions();
    let n = x.len();
    match method {
        Detrend::None => Ok(track.clone()),
        Detrend::Mean => {
            let drift = (x[n - 1] - x[0]) / (n - 1) as f64;
            Ok(track.with_positions(
                x.iter()
                    .enumerate()
                    .map(|(j, v)| v - drift * j as f64)
                    .collect(),
            ))
        }
        Detrend::Linear => {
            if n < 3 {
                return Err(Error::invalid("linear detrending needs at least 3 samples"));
            }
            let tm = (n - 1) as f64 / 2.0;
            let xm = x.iter().sum::<f64>() / n as f64;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for (j, v) in x.iter().enumerate() {
                let dj = j as f64 - tm;
                sxy += dj * (v - xm);
                sxx += dj * dj;
            }
            let slope = sxy / sxx;
            Ok(track.with_positions(
                x.iter()
                    .enumerate()
                    .map(|(j, v)| v - xm - slope * (j as f64 - tm))
                    .collect(),
            ))
        }
    }
}

/// `Y_j = X(j + lag) − X(j)`, `N + 1 − lag` values.
pub fn increments(track: &Track, lag: usize) -> Result<Vec<f64>> {
    lagged_differences(track.positions(), lag)
}

pub fn lagged_differences(x: &[f64], lag: usize) -> Result<Vec<f64>> {
    if lag == 0 || lag >= x.len() {
        return Err(Error::invalid(format!(
            "lag {lag} must be in 1..{} for a series of length {}",
            x.len(),
            x.len()
        )));
    }
    Ok(x.windows(lag + 1).map(|w| w[lag] - w[0]).collect())
}

/// Time-averaged squared displacement along one track at lags `1..=n`.
pub fn pathwise_msd(track: &Track, n: usize) -> Result<MsdCurve> {
    let steps = track.steps();
    if n == 0 || n > steps {
        return Err(Error::invalid(format!(
            "max lag {n} must be in 1..={steps}"
        )));
    }
    let x = track.positions();
    let sums = if (steps + 1) * n <= 200_000 {
        squared_displacement_sums_direct(x, n)
    } else {
        squared_displacement_sums_fft(x, n)
    };
    let lags: Vec<usize> = (1..=n).collect();
    let n_pairs: Vec<usize> = lags.iter().map(|h| steps - h + 1).collect();
    let values = sums
        .iter()
        .zip(&n_pairs)
        .map(|(s, &c)| (s / c as f64).max(0.0))
        .collect();
    Ok(MsdCurve {
        lags,
        values,
        dt: track.dt(),
        n_pairs,
    })
}

/// Default maximum lag: `min(N/10, 1000)`, at least 1.
pub fn default_max_lag(steps: usize) -> usize {
    (steps / 10).clamp(1, 1000)
}

fn squared_displacement_sums_direct(x: &[f64], n: usize) -> Vec<f64> {
    (1..=n)
        .map(|h| x.windows(h + 1).map(|w| (w[h] - w[0]).powi(2)).sum())
        .collect()
}

// Σ_j (x_{j+h} − x_j)² = Σ x_{j+h}² + Σ x_j² − 2 Σ x_j x_{j+h}, with the
// cross term from one FFT autocorrelation of the centered series.
fn squared_displacement_sums_fft(x: &[f64], n: usize) -> Vec<f64> {
    let len = x.len();
    let mean = x.iter().sum::<f64>() / len as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let size = (2 * len).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut buf: Vec<Complex64> = c.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(size, Complex64::new(0.0, 0.0));
    fwd.process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    inv.process(&mut buf);

    let mut prefix = vec![0.0; len + 1];
    for (i, v) in c.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v * v;
    }
    let total = prefix[len];
    (1..=n)
        .map(|h| {
            let head = prefix[len - h];
            let tail = total - prefix[h];
            let cross = buf[h].re / size as f64;
            head + tail - 2.0 * cross
        })
        .collect()
}

/// Ensemble MSD `N⁻¹ Σₙ (Xₙ(t) − Xₙ(0))²` at sample index `t_index`.
pub fn ensemble_msd(tracks: &[Track], t_index: usize) -> Result<f64> {
    let first = tracks
        .first()
        .ok_or_else(|| Error::invalid("empty track set"))?;
    let dt = first.dt();
    let mut sum = 0.0;
    for t in tracks {
        if (t.dt() - dt).abs() > 1e-12 * dt {
            return Err(Error::invalid("tracks have different sampling intervals"));
        }
        if t_index >= t.len() {
            return Err(Error::invalid(format!(
                "track {} has {} samples, index {t_index} requested",
                t.id(),
                t.len()
            )));
        }
        let p = t.positions();
        sum += (p[t_index] - p[0]).powi(2);
    }
    Ok(sum / tracks.len() as f64)
}

/// Sample autocorrelation with the biased (1/n) autocovariance.
pub fn sample_acf(series: &[f64], max_lag: usize) -> Result<AcfCurve> {
    let n = series.len();
    if max_lag >= n {
        return Err(Error::invalid(format!(
            "max lag {max_lag} must be below length {n}"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let c0 = c.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if c0 <= f64::MIN_POSITIVE {
        return Err(Error::invalid(
            "series has zero variance; autocorrelation undefined",
        ));
    }
    let values = (0..=max_lag)
        .map(|h| {
            let ch = c.iter().zip(&c[h..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
            ch / c0
        })
        .collect();
    Ok(AcfCurve {
        lags: (0..=max_lag).collect(),
        values,
    })
}
