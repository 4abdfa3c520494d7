//! Exact samplers for stationary Gaussian sequences: Cholesky and circulant
//! matrix embedding, plus the covariance builders that feed them.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::fill_normals;
use crate::spectral::{increment_autocovariance, FgleDensity, FgleParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovOrigin {
    ClosedFormFgn,
    QuadratureFgle,
    WaveletScaleZero,
    User,
}

/// Autocovariance `λ(0..N−1)` of a stationary sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovSeq {
    values: Vec<f64>,
    origin: CovOrigin,
    /// Per-lag absolute quadrature error, when computed numerically.
    errors: Option<Vec<f64>>,
}

impl CovSeq {
    pub fn new(values: Vec<f64>, origin: CovOrigin) -> Result<Self> {
        let first = *values
            .first()
            .ok_or_else(|| Error::invalid("empty covariance sequence"))?;
        if !(first > 0.0 && first.is_finite()) {
            return Err(Error::invalid("λ(0) must be positive"));
        }
        if values
            .iter()
            .any(|v| !v.is_finite() || v.abs() > first * (1.0 + 1e-12))
        {
            return Err(Error::invalid("covariance must satisfy |λ(h)| ≤ λ(0)"));
        }
        Ok(CovSeq {
            values,
            origin,
            errors: None,
        })
    }

    pub fn user(values: Vec<f64>) -> Result<Self> {
        CovSeq::new(values, CovOrigin::User)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn origin(&self) -> CovOrigin {
        self.origin
    }

    pub fn errors(&self) -> Option<&[f64]> {
        self.errors.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lag", "value"])?;
        for (h, v) in self.values.iter().enumerate() {
            w.write_record([h.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Source of autocovariances at arbitrary length, so embeddings can grow.
pub trait CovarianceModel: Send + Sync {
    /// `λ(0..n−1)`.
    fn covariance(&self, n: usize) -> Result<CovSeq>;
}

impl CovarianceModel for CovSeq {
    fn covariance(&self, n: usize) -> Result<CovSeq> {
        if n > self.values.len() {
            return Err(Error::invalid(format!(
                "covariance sequence has {} lags, {n} requested",
                self.values.len()
            )));
        }
        Ok(CovSeq {
            values: self.values[..n].to_vec(),
            origin: self.origin,
            errors: self.errors.as_ref().map(|e| e[..n].to_vec()),
        })
    }
}

/// Unit-variance fractional Gaussian noise.
#[derive(Debug, Clone, Copy)]
pub struct FgnModel {
    pub h: f64,
}

impl CovarianceModel for FgnModel {
    fn covariance(&self, n: usize) -> Result<CovSeq> {
        fgn_covariance(self.h, n)
    }
}

/// `λ(h) = ½(|h+1|^{2H} − 2|h|^{2H} + |h−1|^{2H})`.
pub fn fgn_covariance(h: f64, n: usize) -> Result<CovSeq> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::invalid(format!(
            "Hurst parameter must lie in (0, 1), got {h}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("need at least one lag"));
    }
    let p = 2.0 * h;
    let values = (0..n)
        .map(|k| {
            let k = k as f64;
            0.5 * ((k + 1.0).powf(p) - 2.0 * k.powf(p) + (k - 1.0).abs().powf(p))
        })
        .collect();
    CovSeq::new(values, CovOrigin::ClosedFormFgn)
}

/// Increments of the fGLE position at unit spacing.
pub struct FgleIncrementModel {
    density: FgleDensity,
    tol: f64,
}

impl FgleIncrementModel {
    pub fn new(params: FgleParams, tol: f64) -> Result<Self> {
        if params.mass <= 0.0 {
            return Err(Error::invalid("fGLE increment covariance needs m > 0"));
        }
        Ok(FgleIncrementModel {
            density: FgleDensity::new(params)?,
            tol,
        })
    }
}

impl CovarianceModel for FgleIncrementModel {
    fn covariance(&self, n: usize) -> Result<CovSeq> {
        let (values, errors) = increment_autocovariance(&self.density, n, self.tol)?;
        let mut c = CovSeq::new(values, CovOrigin::QuadratureFgle)?;
        c.errors = Some(errors);
        Ok(c)
    }
}

/// `λ(h) = c*∫ e^{ihω}|(1 − e^{−iω})/(iω)|² ĝ(ω)² dω` with `c*` the velocity
/// normalization; absolute error per lag at most `tol`.
pub fn fgle_increment_covariance(params: &FgleParams, n: usize, tol: f64) -> Result<CovSeq> {
    FgleIncrementModel::new(*params, tol)?.covariance(n)
}

/// Lower-triangular Cholesky factor of the Toeplitz matrix of `cov`, row-major.
pub fn cholesky_factor(cov: &CovSeq) -> Result<Vec<f64>> {
    let n = cov.len();
    let lam = cov.values();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = lam[i - j];
            let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            s -= ri.iter().zip(rj).map(|(a, b)| a * b).sum::<f64>();
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::NotPositiveDefinite { index: i, pivot: s });
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Cholesky sampler; factorizes once, `O(N³)`, then `O(N²)` per path.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    n: usize,
    factor: Vec<f64>,
}

impl CholeskySampler {
    pub fn new(cov: &CovSeq) -> Result<Self> {
        Ok(CholeskySampler {
            n: cov.len(),
            factor: cholesky_factor(cov)?,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut z = vec![0.0; self.n];
        fill_normals(rng, &mut z);
        (0..self.n)
            .map(|i| {
                self.factor[i * self.n..i * self.n + i + 1]
                    .iter()
                    .zip(&z)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }
}

pub fn cholesky_sim<R: Rng + ?Sized>(cov: &CovSeq, rng: &mut R) -> Result<Vec<f64>> {
    Ok(CholeskySampler::new(cov)?.sample(rng))
}

/// Eigenvalues of the circulant embedding of size `M = 2^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub exponent: u32,
    pub eigenvalues: Vec<f64>,
    pub nonnegative: bool,
    pub min_eigenvalue: f64,
}

const CLAMP_REL: f64 = 1e-10;
const MAX_EXPONENT: u32 = 24;

/// Builds `(λ(0), …, λ(M/2), λ(M/2−1), …, λ(1))` and returns its DFT.
///
/// `cov` must hold at least `M/2 + 1` lags. Eigenvalues in
/// `[−1e−10·λ(0), 0)` count as round-off and are clamped to zero.
pub fn cme_embed(cov: &CovSeq, p: u32) -> Result<Embedding> {
    if !(1..=MAX_EXPONENT).contains(&p) {
        return Err(Error::invalid(format!(
            "embedding exponent {p} outside 1..={MAX_EXPONENT}"
        )));
    }
    let m = 1usize << p;
    let half = m / 2;
    if cov.len() < half + 1 {
        return Err(Error::invalid(format!(
            "embedding of size {m} needs {} lags, got {}",
            half + 1,
            cov.len()
        )));
    }
    let lam = cov.values();
    let mut row: Vec<Complex64> = (0..m)
        .map(|k| Complex64::new(if k <= half { lam[k] } else { lam[m - k] }, 0.0))
        .collect();
    FftPlanner::<f64>::new()
        .plan_fft_forward(m)
        .process(&mut row);
    let mut eigenvalues: Vec<f64> = row.iter().map(|z| z.re).collect();
    let min_eigenvalue = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let floor = -CLAMP_REL * lam[0];
    let nonnegative = min_eigenvalue >= floor;
    if nonnegative {
        for e in eigenvalues.iter_mut() {
            *e = e.max(0.0);
        }
    }
    Ok(Embedding {
        exponent: p,
        eigenvalues,
        nonnegative,
        min_eigenvalue,
    })
}

/// Circulant-embedding sampler; the embedding size doubles until all
/// eigenvalues are nonnegative.
///
/// With forward FFT unscaled, `U_k = √(Λ_k/M)(a_k + i b_k)` for iid standard
/// normal `a, b`, the real part of the unscaled transform of `U` has
/// covariance exactly `λ` at lags `0..M/2`.
pub struct CmeSampler {
    n: usize,
    embedding: Embedding,
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CmeSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CmeSampler")
            .field("n", &self.n)
            .field("exponent", &self.embedding.exponent)
            .finish()
    }
}

impl CmeSampler {
    pub fn new(model: &dyn CovarianceModel, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("path length must be positive"));
        }
        let mut p = (2 * n.saturating_sub(1))
            .max(2)
            .next_power_of_two()
            .trailing_zeros();
        loop {
            let m = 1usize << p;
            let cov = model.covariance(m / 2 + 1)?;
            let e = cme_embed(&cov, p)?;
            if e.nonnegative {
                return Ok(Self::from_embedding(e, n));
            }
            if p >= MAX_EXPONENT {
                return Err(Error::NegativeEigenvalue {
                    value: e.min_eigenvalue,
                    exponent: p,
                });
            }
            log::debug!(
                "circulant embedding 2^{p} has eigenvalue {:e}; doubling",
                e.min_eigenvalue
            );
            p += 1;
        }
    }

    /// Uses a fixed embedding; fails if it has negative eigenvalues.
    pub fn with_exponent(cov: &CovSeq, n: usize, p: u32) -> Result<Self> {
        let e = cme_embed(cov, p)?;
        if !e.nonnegative {
            return Err(Error::NegativeEigenvalue {
                value: e.min_eigenvalue,
                exponent: p,
            });
        }
        if n > (1usize << p) / 2 + 1 {
            return Err(Error::invalid("path longer than half the embedding"));
        }
        Ok(Self::from_embedding(e, n))
    }

    fn from_embedding(embedding: Embedding, n: usize) -> Self {
        let m = embedding.eigenvalues.len();
        let scale = embedding
            .eigenvalues
            .iter()
            .map(|l| (l / m as f64).sqrt())
            .collect();
        let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
        CmeSampler {
            n,
            embedding,
            scale,
            fft,
        }
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let m = self.scale.len();
        let mut z = vec![0.0; 2 * m];
        fill_normals(rng, &mut z);
        let mut buf: Vec<Complex64> = self
            .scale
            .iter()
            .enumerate()
            .map(|(k, s)| Complex64::new(s * z[2 * k], s * z[2 * k + 1]))
            .collect();
        self.fft.process(&mut buf);
        buf[..self.n].iter().map(|c| c.re).collect()
    }
}

/// One CME path of length `n`, with the smallest sufficient embedding.
pub fn cme_sim<R: Rng + ?Sized>(
    model: &dyn CovarianceModel,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(CmeSampler::new(model, n)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn fgn_examples() {
        let c = fgn_covariance(0.5, 6).unwrap();
        assert_eq!(c.values()[0], 1.0);
        assert!(c.values()[1..].iter().all(|v| v.abs() < 1e-15));
        let c = fgn_covariance(0.75, 3).unwrap();
        assert_relative_eq!(
            c.values()[1],
            0.5 * (2f64.powf(1.5) - 2.0),
            max_relative = 1e-14
        );
        assert_relative_eq!(c.values()[1], 0.41421, max_relative = 1e-4);
        assert!(fgn_covariance(1.0, 3).is_err());
    }

    #[test]
    fn fgn_sum_telescopes() {
        for &h in &[0.2, 0.5, 0.8] {
            let n = 50;
            let c = fgn_covariance(h, n).unwrap();
            let v = c.values();
            let total: f64 = v[0] + 2.0 * v[1..].iter().sum::<f64>();
            let nf = n as f64;
            // Σ_{|k|<N} λ(k) = N^{2H} − (N−1)^{2H}
            assert_relative_eq!(
                total,
                nf.powf(2.0 * h) - (nf - 1.0).powf(2.0 * h),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn cholesky_by_hand() {
        let l = cholesky_factor(&CovSeq::user(vec![1.0, 0.6]).unwrap()).unwrap();
        let expect = [1.0, 0.0, 0.6, 0.8];
        for (a, b) in l.iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn cholesky_reports_failing_pivot() {
        // λ = (1, 1, 1) is singular: pivot 1 vanishes
        let err = cholesky_factor(&CovSeq::user(vec![1.0, 1.0, 0.5]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { index: 1, .. }));
    }

    #[test]
    fn cholesky_white_noise_has_no_lag_one_correlation() {
        let n = 4000;
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        let s = CholeskySampler::new(&CovSeq::user(v[..400].to_vec()).unwrap()).unwrap();
        let mut rng = stream_rng(3, 0);
        let mut acc = Vec::new();
        for _ in 0..10 {
            acc.extend(s.sample(&mut rng));
        }
        let c1: f64 = acc.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (acc.len() - 1) as f64;
        assert!(c1.abs() < 3.0 / (acc.len() as f64).sqrt());
    }

    #[test]
    fn embed_white_noise_and_convex() {
        let mut v = vec![0.0; 9];
        v[0] = 1.0;
        let e = cme_embed(&CovSeq::user(v).unwrap(), 4).unwrap();
        assert!(e.eigenvalues.iter().all(|x| (x - 1.0).abs() < 1e-14));
        let convex: Vec<f64> = (0..513).map(|h| 1.0 / (1.0 + h as f64)).collect();
        assert!(
            cme_embed(&CovSeq::user(convex).unwrap(), 10)
                .unwrap()
                .nonnegative
        );
        let f = fgn_covariance(0.75, 513).unwrap();
        assert!(cme_embed(&f, 10).unwrap().nonnegative);
        assert!(cme_embed(&f, 11).is_err());
    }

    fn circulant(cov: &CovSeq, p: u32) -> DMatrix<f64> {
        let m = 1usize << p;
        let lam = cov.values();
        DMatrix::from_fn(m, m, |i, j| {
            let k = (j + m - i) % m;
            if k <= m / 2 {
                lam[k]
            } else {
                lam[m - k]
            }
        })
    }

    #[test]
    fn embedding_matches_dense_eigendecomposition() {
        for &(h, p) in &[(0.75, 4u32), (0.3, 3), (0.9, 2)] {
            let cov = fgn_covariance(h, (1 << p) / 2 + 1).unwrap();
            let mut fast = cme_embed(&cov, p).unwrap().eigenvalues;
            let mut dense: Vec<f64> = circulant(&cov, p)
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .collect();
            fast.sort_by(f64::total_cmp);
            dense.sort_by(f64::total_cmp);
            for (a, b) in fast.iter().zip(&dense) {
                assert!((a - b).abs() < 1e-10, "{a} {b}");
            }
        }
    }

    #[test]
    fn cme_linear_map_has_exact_covariance() {
        // The sampler is x = A(a, b); A Aᵀ must equal the Toeplitz covariance.
        let n = 9;
        let cov = fgn_covariance(0.7, n).unwrap();
        let s = CmeSampler::with_exponent(&cov, n, 4).unwrap();
        let m = 16;
        let mut a = DMatrix::<f64>::zeros(n, 2 * m);
        for k in 0..m {
            for j in 0..n {
                let th = -2.0 * std::f64::consts::PI * (j * k) as f64 / m as f64;
                a[(j, 2 * k)] = s.scale[k] * th.cos();
                a[(j, 2 * k + 1)] = -s.scale[k] * th.sin();
            }
        }
        let c = &a * a.transpose();
        for i in 0..n {
            for j in 0..n {
                assert!((c[(i, j)] - cov.values()[i.abs_diff(j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cme_is_deterministic() {
        let model = FgnModel { h: 0.75 };
        let a = cme_sim(&model, 100, &mut stream_rng(11, 2)).unwrap();
        let b = cme_sim(&model, 100, &mut stream_rng(11, 2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
    }

    #[test]
    fn sampler_escalates_embedding() {
        // a covariance whose minimal embedding has negative eigenvalues
        let model = FgnModel { h: 0.95 };
        let s = CmeSampler::new(&model, 64).unwrap();
        assert!(s.embedding().nonnegative);
        let strict: Vec<f64> = (0..40)
            .map(|h| (-(h as f64) * 0.05).cos() * (-(h as f64) * 0.01).exp())
            .collect();
        let cov = CovSeq::user(strict).unwrap();
        match CmeSampler::with_exponent(&cov, 20, 5) {
            Ok(_) => {}
            Err(Error::NegativeEigenvalue { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn fgle_covariance_is_antipersistent() {
        let p = FgleParams::from_d(0.25, 2.0, 1.0, 1.0).unwrap();
        let c = fgle_increment_covariance(&p, 256, 1e-9).unwrap();
        let v = c.values();
        assert!(v[1] / v[0] < 0.0);
        let total: f64 = v[0] + 2.0 * v[1..].iter().sum::<f64>();
        assert!(total.abs() < 0.05 * 256.0 * v[0]);
        assert!(c.errors().unwrap().iter().all(|e| *e <= 1e-9));
        assert!(
            FgleIncrementModel::new(FgleParams::from_d(0.25, 2.0, 0.0, 1.0).unwrap(), 1e-9)
                .is_err()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn embedding_eigenvalues_are_real_dft(vals in prop::collection::vec(-0.3f64..0.3, 8)) {
            let mut v = vec![1.0];
            v.extend(vals);
            let cov = CovSeq::user(v).unwrap();
            let e = cme_embed(&cov, 4).unwrap();
            let dense = circulant(&cov, 4);
            // Λ_k = Σ_j c_j e^{−2πijk/M}
            for k in 0..16 {
                let mut s = 0.0;
                for j in 0..16 {
                    s += dense[(0, j)] * (2.0 * std::f64::consts::PI * (j * k) as f64 / 16.0).cos();
                }
                if e.nonnegative {
                    prop_assert!((e.eigenvalues[k] - s.max(0.0)).abs() < 1e-10);
                } else {
                    prop_assert!((e.eigenvalues[k] - s).abs() < 1e-10);
                }
            }
        }
    }
}
