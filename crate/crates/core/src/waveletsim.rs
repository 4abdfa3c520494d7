//! Approximate wavelet-based multiresolution sampler for the fGLE velocity.
//!
//! A scale-0 sequence `V_0` is drawn exactly by circulant embedding, then
//! refined by `V_{j+1} = u_j ∗ ↑₂V_j + v_j ∗ ↑₂ε_j` where the filters combine a
//! conjugate mirror pair `(u, v)` with the discretization filters `ĝ_j`.

use std::f64::consts::PI;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactsim::{CmeSampler, CovOrigin, CovSeq, CovarianceModel};
use crate::quadrature::cosine_moments;
use crate::rng::fill_normals;
use crate::spectral::{FgleDensity, FgleParams};
use crate::trackio::{Axis, Track};

/// Orthonormal conjugate mirror filter families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cmf {
    Haar,
    /// Daubechies, 2 vanishing moments.
    Db2,
    /// Daubechies, 4 vanishing moments.
    #[default]
    Db4,
}

const DB2: [f64; 4] = [
    0.48296291314469025,
    0.836516303737469,
    0.22414386804185735,
    -0.12940952255092145,
];

const DB4: [f64; 8] = [
    0.23037781330885523,
    0.7148465705525415,
    0.6308807679295904,
    -0.02798376941698385,
    -0.18703481171888114,
    0.030841381835986965,
    0.032883011666982945,
    -0.010597401784997278,
];

impl Cmf {
    pub fn vanishing_moments(self) -> usize {
        match self {
            Cmf::Haar => 1,
            Cmf::Db2 => 2,
            Cmf::Db4 => 4,
        }
    }

    /// Low-pass `u`, normalized to `Σu = √2`.
    pub fn lowpass(self) -> Vec<f64> {
        match self {
            Cmf::Haar => vec![std::f64::consts::FRAC_1_SQRT_2; 2],
            Cmf::Db2 => DB2.to_vec(),
            Cmf::Db4 => DB4.to_vec(),
        }
    }

    /// High-pass `v[n] = (−1)ⁿ u[len−1−n]`.
    pub fn highpass(self) -> Vec<f64> {
        let u = self.lowpass();
        let n = u.len();
        (0..n)
            .map(|k| {
                if k % 2 == 0 {
                    u[n - 1 - k]
                } else {
                    -u[n - 1 - k]
                }
            })
            .collect()
    }

    fn response(taps: &[f64], omega: f64) -> Complex64 {
        taps.iter()
            .enumerate()
            .map(|(n, &c)| c * Complex64::from_polar(1.0, -(n as f64) * omega))
            .sum()
    }
}

impl FromStr for Cmf {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "haar" | "db1" => Ok(Cmf::Haar),
            "db2" => Ok(Cmf::Db2),
            "db4" | "db4vm" => Ok(Cmf::Db4),
            _ => Err(Error::invalid(format!(
                "unknown wavelet family '{s}' (haar, db2, db4)"
            ))),
        }
    }
}

/// Maps `ω` to `[−π, π)`.
fn wrap(omega: f64) -> f64 {
    (omega + PI).rem_euclid(2.0 * PI) - PI
}

/// `ĝ_j(ω) = ĝ_{j,ν,β}(ω)·ĝ_{j,d}(ω)` on `[−π, π)`, extended periodically.
pub fn discretization_filter(j: u32, params: &FgleParams, omega: f64) -> f64 {
    let w = wrap(omega);
    let d = params.d;
    let scale = 2f64.powi(j as i32);
    let w_star = PI * d.sqrt();
    let a = w_star * w / PI;
    let g_d = scale.powf(d) * (-(a * a) / (2.0 * PI * PI)).exp() * a.abs().powf(d);
    let g_nb = (params.beta * w * w / (2.0 * PI * PI)).exp() / params.quadratic(scale * w).sqrt();
    g_nb * g_d
}

/// `G_J(ω) = (λ + iω)/(1 − e^{−λ2^{−J}} e^{−iω})`, the exact AR(1) ratio for OU.
pub fn ou_exact_ratio(lambda: f64, j: u32, omega: f64) -> Result<Complex64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "OU rate must be positive, got {lambda}"
        )));
    }
    let r = (-lambda * 2f64.powi(-(j as i32))).exp();
    let den = Complex64::new(1.0, 0.0) - r * Complex64::from_polar(1.0, -omega);
    Ok(Complex64::new(lambda, omega) / den)
}

/// Family of discretization filters `ĝ_j`.
pub trait DiscretizationFilter: Send + Sync {
    fn ghat(&self, j: u32, omega: f64) -> f64;

    /// `ĝ_{j+1}(ω)/ĝ_j(2ω)`; zero where the denominator vanishes.
    fn lowpass_ratio(&self, j: u32, omega: f64) -> f64 {
        let den = self.ghat(j, 2.0 * omega);
        if den == 0.0 {
            0.0
        } else {
            self.ghat(j + 1, omega) / den
        }
    }
}

/// `ĝ_j ≡ 1`; the bank collapses to the raw CMF pair.
#[derive(Debug, Clone, Copy)]
pub struct AllPass;

impl DiscretizationFilter for AllPass {
    fn ghat(&self, _: u32, _: f64) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FgleFilter(pub FgleParams);

impl DiscretizationFilter for FgleFilter {
    fn ghat(&self, j: u32, omega: f64) -> f64 {
        discretization_filter(j, &self.0, omega)
    }

    fn lowpass_ratio(&self, j: u32, omega: f64) -> f64 {
        let w = wrap(omega);
        if w.abs() < 0.5 * PI {
            // |ω|^d and the quadratic cancel; the limit at 0 is 1
            let p = &self.0;
            (-3.0 * (p.beta - p.d) * w * w / (2.0 * PI * PI)).exp()
        } else {
            let den = self.ghat(j, 2.0 * w);
            if den == 0.0 {
                0.0
            } else {
                self.ghat(j + 1, w) / den
            }
        }
    }
}

/// Options for filter-bank construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BankOptions {
    pub lag_bound: usize,
    pub threshold: f64,
    /// Frequency grid size (power of two).
    pub grid: usize,
}

impl Default for BankOptions {
    fn default() -> Self {
        BankOptions {
            lag_bound: 80,
            threshold: 1e-5,
            grid: 1 << 16,
        }
    }
}

/// Per-scale filters `u_j, v_j` on lags `−L..=L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    lag_bound: usize,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    truncation: Vec<f64>,
    cmf: Option<Cmf>,
}

impl FilterBank {
    /// Evaluates `û_j = ĝ_{j+1}(ω)/ĝ_j(2ω)·û(ω)` and `v̂_j = ĝ_{j+1}(ω)·v̂(ω)`
    /// on a uniform grid, inverts by FFT and truncates at `|n| ≤ L`.
    pub fn build(
        filter: &dyn DiscretizationFilter,
        scales: u32,
        cmf: Cmf,
        opts: BankOptions,
    ) -> Result<Self> {
        if scales == 0 {
            return Err(Error::invalid("need at least one refinement scale"));
        }
        let n = opts.grid;
        let l = opts.lag_bound;
        if !n.is_power_of_two() || n < 4 * (l + 1) {
            return Err(Error::invalid(
                "frequency grid must be a power of two well above 4L",
            ));
        }
        let (lo, hi) = (cmf.lowpass(), cmf.highpass());
        let freq: Vec<f64> = (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
        let uh: Vec<Complex64> = freq.iter().map(|&w| Cmf::response(&lo, w)).collect();
        let vh: Vec<Complex64> = freq.iter().map(|&w| Cmf::response(&hi, w)).collect();
        let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);

        let mut bank = FilterBank {
            lag_bound: l,
            u: Vec::new(),
            v: Vec::new(),
            truncation: Vec::new(),
            cmf: Some(cmf),
        };
        for j in 0..scales {
            let mut bu: Vec<Complex64> = freq
                .iter()
                .zip(&uh)
                .map(|(&w, &c)| c * filter.lowpass_ratio(j, w))
                .collect();
            let mut bv: Vec<Complex64> = freq
                .iter()
                .zip(&vh)
                .map(|(&w, &c)| c * filter.ghat(j + 1, w))
                .collect();
            ifft.process(&mut bu);
            ifft.process(&mut bv);
            let (u, tu) = truncate(&bu, l);
            let (v, tv) = truncate(&bv, l);
            let mag = tu.max(tv);
            if !(mag < opts.threshold) {
                return Err(Error::Truncation {
                    scale: j as usize,
                    magnitude: mag,
                    threshold: opts.threshold,
                });
            }
            bank.u.push(u);
            bank.v.push(v);
            bank.truncation.push(mag);
        }
        Ok(bank)
    }

    /// Bank from explicit time-domain filters on lags `−L..=L`.
    pub fn from_filters(lag_bound: usize, u: Vec<Vec<f64>>, v: Vec<Vec<f64>>) -> Result<Self> {
        if u.is_empty()
            || u.len() != v.len()
            || u.iter().chain(&v).any(|f| f.len() != 2 * lag_bound + 1)
        {
            return Err(Error::invalid("each scale needs u and v of length 2L+1"));
        }
        let truncation = vec![0.0; u.len()];
        Ok(FilterBank {
            lag_bound,
            u,
            v,
            truncation,
            cmf: None,
        })
    }

    pub fn scales(&self) -> usize {
        self.u.len()
    }

    pub fn lag_bound(&self) -> usize {
        self.lag_bound
    }

    pub fn cmf(&self) -> Option<Cmf> {
        self.cmf
    }

    /// `u_j[n]` for `n = −L..=L`.
    pub fn lowpass(&self, j: usize) -> &[f64] {
        &self.u[j]
    }

    pub fn highpass(&self, j: usize) -> &[f64] {
        &self.v[j]
    }

    /// Largest discarded coefficient over all scales.
    pub fn truncation_magnitude(&self) -> f64 {
        self.truncation.iter().cloned().fold(0.0, f64::max)
    }

    pub fn truncation_by_scale(&self) -> &[f64] {
        &self.truncation
    }

    /// CSV with columns `scale,lag,u,v`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scale", "lag", "u", "v"])?;
        let l = self.lag_bound as i64;
        for j in 0..self.scales() {
            for (k, (u, v)) in self.u[j].iter().zip(&self.v[j]).enumerate() {
                w.write_record([
                    j.to_string(),
                    (k as i64 - l).to_string(),
                    u.to_string(),
                    v.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

// Real parts at lags −L..=L (grid is periodic) and the largest magnitude outside.
fn truncate(buf: &[Complex64], l: usize) -> (Vec<f64>, f64) {
    let n = buf.len();
    let scale = 1.0 / n as f64;
    let at = |k: i64| buf[k.rem_euclid(n as i64) as usize].re * scale;
    let kept = (-(l as i64)..=l as i64).map(at).collect();
    let rest = ((l as i64 + 1)..=(n as i64 - l as i64 - 1))
        .map(|k| at(k).abs())
        .fold(0.0, f64::max);
    (kept, rest)
}

/// A finite stretch of a scale-`j` sequence starting at absolute index `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSeries {
    pub start: i64,
    pub values: Vec<f64>,
}

impl ScaleSeries {
    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64
    }

    /// Restricts to absolute indices `[a, b]`.
    pub fn window(&self, a: i64, b: i64) -> Result<ScaleSeries> {
        if a < self.start || b >= self.end() || b < a {
            return Err(Error::invalid(format!(
                "window [{a}, {b}] outside [{}, {})",
                self.start,
                self.end()
            )));
        }
        let off = (a - self.start) as usize;
        Ok(ScaleSeries {
            start: a,
            values: self.values[off..off + (b - a + 1) as usize].to_vec(),
        })
    }
}

fn polyphase(f: &[f64], l: usize) -> [Vec<f64>; 2] {
    // taps for n = L, L−2, …, −L and n = L−1, …, −L+1
    let even: Vec<f64> = (0..=l).map(|t| f[2 * l - 2 * t]).collect();
    let odd: Vec<f64> = (0..l).map(|t| f[2 * l - 1 - 2 * t]).collect();
    [even, odd]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One refinement step with the supplied innovations.
///
/// Returns every output index whose filter support lies inside the input,
/// i.e. `[2s + L, 2(s + len − 1) − L]`.
pub fn refine_with(
    v_j: &ScaleSeries,
    eps: &[f64],
    bank: &FilterBank,
    j: usize,
) -> Result<ScaleSeries> {
    if j >= bank.scales() {
        return Err(Error::invalid(format!(
            "scale {j} outside the bank (0..{})",
            bank.scales()
        )));
    }
    if eps.len() != v_j.values.len() {
        return Err(Error::invalid("innovations must match the input length"));
    }
    let l = bank.lag_bound as i64;
    let s = v_j.start;
    let lo = 2 * s + l;
    let hi = 2 * (v_j.end() - 1) - l;
    if hi < lo {
        return Err(Error::invalid("input too short for the filter support"));
    }
    let pu = polyphase(&bank.u[j], bank.lag_bound);
    let pv = polyphase(&bank.v[j], bank.lag_bound);
    let out = (lo..=hi)
        .map(|k| {
            let i0 = (k - l).div_euclid(2) + (k - l).rem_euclid(2);
            let phase = (k - l).rem_euclid(2) as usize;
            let off = (i0 - s) as usize;
            let len = pu[phase].len();
            dot(&pu[phase], &v_j.values[off..off + len]) + dot(&pv[phase], &eps[off..off + len])
        })
        .collect();
    Ok(ScaleSeries {
        start: lo,
        values: out,
    })
}

/// `V_{j+1} = u_j ∗ ↑₂V_j + v_j ∗ ↑₂ε_j` with fresh `ε_j ~ N(0, 1)`.
pub fn refine<R: Rng + ?Sized>(
    v_j: &ScaleSeries,
    bank: &FilterBank,
    j: usize,
    rng: &mut R,
) -> Result<ScaleSeries> {
    let mut eps = vec![0.0; v_j.values.len()];
    fill_normals(rng, &mut eps);
    refine_with(v_j, &eps, bank, j)
}

/// Scale-0 covariance `(1/π)∫_0^π cos(hω) ĝ_0(ω)² dω`.
pub struct ScaleZeroModel {
    params: FgleParams,
    tol: f64,
}

impl ScaleZeroModel {
    pub fn new(params: FgleParams, tol: f64) -> Self {
        ScaleZeroModel { params, tol }
    }
}

impl CovarianceModel for ScaleZeroModel {
    fn covariance(&self, n: usize) -> Result<CovSeq> {
        let p = self.params;
        let f = move |w: f64| discretization_filter(0, &p, w).powi(2) / PI;
        let m = cosine_moments(&f, n.saturating_sub(1), self.tol)?;
        CovSeq::new(m.values, CovOrigin::WaveletScaleZero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveletOptions {
    pub bank: BankOptions,
    pub cmf: Cmf,
    /// Minimum length of the scale-0 CME draw.
    pub init_len: usize,
    /// Absolute quadrature tolerance for the scale-0 covariance.
    pub cov_tol: f64,
}

impl Default for WaveletOptions {
    fn default() -> Self {
        WaveletOptions {
            bank: BankOptions::default(),
            cmf: Cmf::Db4,
            init_len: 1 << 10,
            cov_tol: 1e-11,
        }
    }
}

/// Reusable sampler for fGLE paths on `[0, T]` at final scale `J`.
pub struct WaveletSimulator {
    params: FgleParams,
    scales: u32,
    horizon: usize,
    bank: FilterBank,
    init: CmeSampler,
    // absolute index windows per scale, [a_j, b_j]
    windows: Vec<(i64, i64)>,
    velocity_scale: f64,
}

impl std::fmt::Debug for WaveletSimulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WaveletSimulator")
            .field("scales", &self.scales)
            .field("horizon", &self.horizon)
            .field("windows", &self.windows)
            .finish()
    }
}

impl WaveletSimulator {
    pub fn new(
        params: FgleParams,
        scales: u32,
        horizon: usize,
        opts: WaveletOptions,
    ) -> Result<Self> {
        if scales == 0 || horizon == 0 {
            return Err(Error::invalid("need J ≥ 1 and T ≥ 1"));
        }
        if scales > 20 {
            return Err(Error::invalid(format!("J = {scales} is too fine")));
        }
        if params.mass <= 0.0 {
            return Err(Error::invalid("wavelet sampler needs m > 0"));
        }
        let bank = FilterBank::build(&FgleFilter(params), scales, opts.cmf, opts.bank)?;
        let l = opts.bank.lag_bound as i64;
        let mut windows = vec![(1i64, (horizon as i64) << scales)];
        for _ in 0..scales {
            let (a, b) = *windows.last().expect("non-empty");
            windows.push(((a - l).div_euclid(2), (b + l + 1).div_euclid(2)));
        }
        windows.reverse();
        let (a0, b0) = windows[0];
        let n0 = ((b0 - a0 + 1) as usize).max(opts.init_len);
        let init = CmeSampler::new(&ScaleZeroModel::new(params, opts.cov_tol), n0)?;
        let c = FgleDensity::new(params)?.norm();
        let velocity_scale =
            (2.0 * PI * c).sqrt() / params.d.powf(params.d / 2.0) * 2f64.powf(scales as f64 / 2.0);
        Ok(WaveletSimulator {
            params,
            scales,
            horizon,
            bank,
            init,
            windows,
            velocity_scale,
        })
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn params(&self) -> &FgleParams {
        &self.params
    }

    pub fn init_len(&self) -> usize {
        self.init.len()
    }

    /// Velocities at times `k 2^{−J}`, `k = 1..=T·2^J`, in physical units.
    pub fn sample_velocity<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let (a0, b0) = self.windows[0];
        let draw = self.init.sample(rng);
        let mut v = ScaleSeries {
            start: a0,
            values: draw[..(b0 - a0 + 1) as usize].to_vec(),
        };
        for j in 0..self.scales as usize {
            let next = refine(&v, &self.bank, j, rng)?;
            let (a, b) = self.windows[j + 1];
            v = next.window(a, b)?;
        }
        let s = self.velocity_scale;
        Ok(v.values.into_iter().map(|x| s * x).collect())
    }

    /// Positions `X(0..=T)` with `X(t) = Σ_{k ≤ t2^J} V_k 2^{−J}`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let vel = self.sample_velocity(rng)?;
        let per = 1usize << self.scales;
        let step = 1.0 / per as f64;
        let mut x = Vec::with_capacity(self.horizon + 1);
        x.push(0.0);
        let mut acc = 0.0;
        for block in vel.chunks_exact(per) {
            acc += block.iter().sum::<f64>() * step;
            x.push(acc);
        }
        Ok(x)
    }
}

/// One wavelet-simulated fGLE track on `t = 0..=T` (unit spacing).
pub fn simulate_fgle_wavelet<R: Rng + ?Sized>(
    params: FgleParams,
    scales: u32,
    horizon: usize,
    cmf: Cmf,
    rng: &mut R,
) -> Result<Track> {
    let opts = WaveletOptions {
        cmf,
        ..WaveletOptions::default()
    };
    let sim = WaveletSimulator::new(params, scales, horizon, opts)?;
    Track::new("wavelet", Axis::X, 1.0, sim.sample(rng)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactsim::fgle_increment_covariance;
    use crate::rng::stream_rng;
    use approx::assert_relative_eq;

    fn params() -> FgleParams {
        FgleParams::from_d(0.25, 2.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn cmf_pairs_are_orthonormal() {
        for cmf in [Cmf::Haar, Cmf::Db2, Cmf::Db4] {
            let (u, v) = (cmf.lowpass(), cmf.highpass());
            let n = u.len();
            assert_relative_eq!(u.iter().sum::<f64>(), 2f64.sqrt(), epsilon = 1e-12);
            for k in 0..n / 2 {
                let uu: f64 = (0..n - 2 * k).map(|i| u[i] * u[i + 2 * k]).sum();
                let vv: f64 = (0..n - 2 * k).map(|i| v[i] * v[i + 2 * k]).sum();
                let expect = if k == 0 { 1.0 } else { 0.0 };
                assert!(
                    (uu - expect).abs() < 1e-12 && (vv - expect).abs() < 1e-12,
                    "{cmf:?} {k}"
                );
            }
            for k in -(n as i64)..(n as i64) {
                let uv: f64 = (0..n as i64)
                    .filter(|i| (0..n as i64).contains(&(i + 2 * k)))
                    .map(|i| u[i as usize] * v[(i + 2 * k) as usize])
                    .sum();
                assert!(uv.abs() < 1e-12);
            }
            // vanishing moments of v
            for p in 0..cmf.vanishing_moments() {
                let m: f64 = v
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (i as f64).powi(p as i32) * c)
                    .sum();
                assert!(m.abs() < 1e-8, "{cmf:?} moment {p}: {m}");
            }
        }
    }

    #[test]
    fn filter_at_zero_and_symmetry() {
        let p = params();
        assert_eq!(discretization_filter(3, &p, 0.0), 0.0);
        let a = discretization_filter(2, &p, 1.1);
        assert_relative_eq!(a, discretization_filter(2, &p, -1.1), max_relative = 1e-14);
        assert_relative_eq!(
            a,
            discretization_filter(2, &p, 1.1 + 2.0 * PI),
            max_relative = 1e-12
        );
    }

    #[test]
    fn scaled_filter_tends_to_constant_multiple() {
        // G_j(2^{−j}ω) → d^{d/2}
        let p = params();
        let limit = p.d.powf(p.d / 2.0);
        let omegas = [0.1, 0.3, 0.6, 1.0];
        let mut prev = f64::INFINITY;
        for j in [4u32, 6, 8, 10, 12] {
            let worst = omegas
                .iter()
                .map(|&w| {
                    let g = discretization_filter(j, &p, w * 2f64.powi(-(j as i32)));
                    let target = crate::spectral::fgle_filter_ghat(&p, w).unwrap();
                    (g / target - limit).abs()
                })
                .fold(0.0, f64::max);
            assert!(worst < prev);
            prev = worst;
        }
        assert!(prev / limit < 0.05);
    }

    #[test]
    fn lowpass_ratio_closed_form_agrees() {
        let f = FgleFilter(params());
        for j in [0u32, 3, 7] {
            for &w in &[0.2, -0.9, 1.4] {
                let direct = f.ghat(j + 1, w) / f.ghat(j, 2.0 * w);
                assert_relative_eq!(f.lowpass_ratio(j, w), direct, max_relative = 1e-12);
            }
            assert_eq!(f.lowpass_ratio(j, 0.0), 1.0);
        }
    }

    #[test]
    fn ou_ratio_limits() {
        let lam = 1.5;
        for j in [10u32, 14, 18] {
            let g = ou_exact_ratio(lam, j, 0.0).unwrap();
            assert!(
                (g.re * 2f64.powi(-(j as i32)) - 1.0).abs() < 2.0 * lam * 2f64.powi(-(j as i32))
            );
        }
        let g = ou_exact_ratio(lam, 3, PI).unwrap();
        assert!(g.norm().is_finite() && g.norm() > 0.0);
        assert!(ou_exact_ratio(0.0, 3, 1.0).is_err());
    }

    #[test]
    fn all_pass_bank_is_raw_cmf() {
        let b = FilterBank::build(
            &AllPass,
            2,
            Cmf::Db4,
            BankOptions {
                lag_bound: 10,
                threshold: 1e-12,
                grid: 1 << 10,
            },
        )
        .unwrap();
        let (u, v) = (Cmf::Db4.lowpass(), Cmf::Db4.highpass());
        for j in 0..2 {
            for n in 0..21 {
                let k = n as i64 - 10;
                let want_u = if (0..8).contains(&k) {
                    u[k as usize]
                } else {
                    0.0
                };
                let want_v = if (0..8).contains(&k) {
                    v[k as usize]
                } else {
                    0.0
                };
                assert!((b.lowpass(j)[n] - want_u).abs() < 1e-12);
                assert!((b.highpass(j)[n] - want_v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fgle_bank_truncation_below_threshold() {
        let b =
            FilterBank::build(&FgleFilter(params()), 13, Cmf::Db4, BankOptions::default()).unwrap();
        assert!(
            b.truncation_magnitude() < 1e-5,
            "{:?}",
            b.truncation_by_scale()
        );
    }

    #[test]
    fn bank_is_grid_stable() {
        let f = FgleFilter(params());
        let opts = BankOptions::default();
        let a = FilterBank::build(&f, 5, Cmf::Db4, opts).unwrap();
        let b = FilterBank::build(
            &f,
            5,
            Cmf::Db4,
            BankOptions {
                grid: 1 << 17,
                ..opts
            },
        )
        .unwrap();
        for j in 0..5 {
            for (x, y) in a
                .lowpass(j)
                .iter()
                .zip(b.lowpass(j))
                .chain(a.highpass(j).iter().zip(b.highpass(j)))
            {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn refine_delta_upsamples() {
        let l = 3;
        let mut u = vec![0.0; 2 * l + 1];
        u[l] = 1.0;
        let bank = FilterBank::from_filters(l, vec![u], vec![vec![0.0; 2 * l + 1]]).unwrap();
        let v0 = ScaleSeries {
            start: 0,
            values: (1..=10).map(|x| x as f64).collect(),
        };
        let out = refine_with(&v0, &[0.0; 10], &bank, 0).unwrap();
        assert_eq!(out.start, 3);
        for (k, x) in (out.start..).zip(&out.values) {
            let want = if k % 2 == 0 { (k / 2 + 1) as f64 } else { 0.0 };
            assert_eq!(*x, want);
        }
        assert!(refine_with(&v0, &[0.0; 10], &bank, 1).is_err());
    }

    #[test]
    fn highpass_only_refinement_variance() {
        // with u ≡ 0 the phase-averaged variance is Σv²/2
        let l = 4;
        let v: Vec<f64> = (0..9).map(|i| ((i as f64) - 3.0) * 0.1).collect();
        let bank = FilterBank::from_filters(l, vec![vec![0.0; 9]], vec![v.clone()]).unwrap();
        let n = 12;
        let zero = ScaleSeries {
            start: 0,
            values: vec![0.0; n],
        };
        // output is linear in ε; accumulate its covariance over unit vectors
        let mut var = [0.0; 2];
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let out = refine_with(&zero, &e, &bank, 0).unwrap();
            for (k, x) in (out.start..).zip(&out.values).take(2) {
                var[(k % 2) as usize] += x * x;
            }
        }
        let total: f64 = v.iter().map(|x| x * x).sum();
        assert_relative_eq!(0.5 * (var[0] + var[1]), total / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn all_pass_refinement_of_white_noise_is_white() {
        let b = FilterBank::build(
            &AllPass,
            1,
            Cmf::Db4,
            BankOptions {
                lag_bound: 8,
                threshold: 1e-10,
                grid: 1 << 10,
            },
        )
        .unwrap();
        let mut rng = stream_rng(21, 0);
        let mut v = vec![0.0; 40000];
        fill_normals(&mut rng, &mut v);
        let out = refine(
            &ScaleSeries {
                start: 0,
                values: v,
            },
            &b,
            0,
            &mut rng,
        )
        .unwrap()
        .values;
        let n = out.len() as f64;
        let c = |h: usize| out.iter().zip(&out[h..]).map(|(a, b)| a * b).sum::<f64>() / n;
        assert!((c(0) - 1.0).abs() < 0.03);
        for h in 1..6 {
            assert!(c(h).abs() < 4.0 / n.sqrt(), "lag {h}: {}", c(h));
        }
    }

    #[test]
    fn scale_zero_covariance_matches_direct_sum() {
        let m = ScaleZeroModel::new(params(), 1e-12);
        let c = m.covariance(5).unwrap();
        // λ(0) = (1/π)∫_0^π ĝ_0² by a plain midpoint rule
        let k = 200000;
        let h = PI / k as f64;
        let mid: f64 = (0..k)
            .map(|i| discretization_filter(0, &params(), (i as f64 + 0.5) * h).powi(2))
            .sum::<f64>()
            * h
            / PI;
        assert_relative_eq!(c.values()[0], mid, max_relative = 1e-6);
    }

    #[test]
    fn deterministic_replay() {
        let sim = WaveletSimulator::new(params(), 3, 16, WaveletOptions::default()).unwrap();
        let a = sim.sample(&mut stream_rng(4, 4)).unwrap();
        let b = sim.sample(&mut stream_rng(4, 4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 17);
        assert_eq!(a[0], 0.0);
    }

    #[test]
    fn increments_match_exact_covariance() {
        let p = params();
        let sim = WaveletSimulator::new(p, 6, 16, WaveletOptions::default()).unwrap();
        let target = fgle_increment_covariance(&p, 4, 1e-10).unwrap();
        let reps = 1500;
        let mut prods: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(reps)).collect();
        for r in 0..reps {
            let x = sim.sample(&mut stream_rng(17, r as u64)).unwrap();
            let y: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
            for (h, p) in prods.iter_mut().enumerate() {
                p.push(y[4] * y[4 + h]);
            }
        }
        for (h, prod) in prods.iter().enumerate() {
            let n = reps as f64;
            let mean = prod.iter().sum::<f64>() / n;
            let se = (prod.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
            let want = target.values()[h];
            assert!(
                (mean - want).abs() < 3.5 * se,
                "lag {h}: {mean} vs {want} (se {se})"
            );
        }
    }

    #[test]
    fn increments_are_antipersistent() {
        let sim = WaveletSimulator::new(params(), 4, 128, WaveletOptions::default()).unwrap();
        let reps = 200;
        let r1: Vec<f64> = (0..reps)
            .map(|r| {
                let x = sim.sample(&mut stream_rng(30, r)).unwrap();
                let y: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
                let m = y.iter().sum::<f64>() / y.len() as f64;
                let c0: f64 = y.iter().map(|v| (v - m).powi(2)).sum();
                y.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / c0
            })
            .collect();
        let n = reps as f64;
        let mean = r1.iter().sum::<f64>() / n;
        let se = (r1.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        // one-sided test at 1%
        assert!(mean < -2.33 * se, "{mean} ± {se}");
    }
}
