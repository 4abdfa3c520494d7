//! Memory kernels, their transforms, long-time diffusivity classes, and the
//! generalized Stokes–Einstein map from MSD to complex modulus.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ui};

use crate::error::{Error, Result};
use crate::trackio::MsdCurve;

/// Friction memory kernel `Γ(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MemoryKernel {
    /// Viscous fluid, `Γ = δ`.
    Dirac,
    /// `Σ cₙ exp(−λₙ t)`.
    Prony { c: Vec<f64>, lambda: Vec<f64> },
    /// fGn kernel `2H(2H−1)|t|^{2H−2}`.
    PowerLaw { h: f64 },
}

impl MemoryKernel {
    pub fn prony(c: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        let k = MemoryKernel::Prony { c, lambda };
        k.validate()?;
        Ok(k)
    }

    pub fn power_law(h: f64) -> Result<Self> {
        let k = MemoryKernel::PowerLaw { h };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MemoryKernel::Dirac => Ok(()),
            MemoryKernel::Prony { c, lambda } => {
                if c.is_empty() || c.len() != lambda.len() {
                    return Err(Error::invalid(
                        "Prony kernel needs equally many weights and rates (at least one)",
                    ));
                }
                if c.iter().chain(lambda).any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::invalid("Prony weights and rates must be positive"));
                }
                for (i, a) in lambda.iter().enumerate() {
                    if lambda[..i]
                        .iter()
                        .any(|b| (a - b).abs() <= 1e-12 * a.max(*b))
                    {
                        return Err(Error::invalid(format!(
                            "Prony rates must be distinct ({a} repeats)"
                        )));
                    }
                }
                Ok(())
            }
            MemoryKernel::PowerLaw { h } => {
                if *h > 0.5 && *h < 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "power-law kernel needs 1/2 < H < 1, got {h}"
                    )))
                }
            }
        }
    }
}

/// Pointwise kernel value.
pub fn kernel_eval(kernel: &MemoryKernel, t: f64) -> Result<f64> {
    match kernel {
        MemoryKernel::Dirac => Err(Error::invalid("the Dirac kernel has no pointwise value")),
        MemoryKernel::Prony { c, lambda } => Ok(c
            .iter()
            .zip(lambda)
            .map(|(c, l)| c * (-l * t.abs()).exp())
            .sum()),
        MemoryKernel::PowerLaw { h } => {
            if t <= 0.0 {
                return Err(Error::invalid("power-law kernel is singular at t ≤ 0"));
            }
            Ok(2.0 * h * (2.0 * h - 1.0) * t.powf(2.0 * h - 2.0))
        }
    }
}

/// Laplace transform `Γ̃(z) = ∫₀^∞ e^{−zt} Γ(t) dt`.
pub fn kernel_laplace(kernel: &MemoryKernel, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::invalid(format!(
            "Laplace argument must be positive, got {z}"
        )));
    }
    Ok(match kernel {
        MemoryKernel::Dirac => 1.0,
        MemoryKernel::Prony { c, lambda } => c.iter().zip(lambda).map(|(c, l)| c / (z + l)).sum(),
        MemoryKernel::PowerLaw { h } => gamma(2.0 * h + 1.0) * z.powf(1.0 - 2.0 * h),
    })
}

/// Two-sided Fourier transform of the even extension `Γ(|t|)`.
pub fn kernel_fourier(kernel: &MemoryKernel, omega: f64) -> Result<Complex64> {
    Ok(match kernel {
        MemoryKernel::Dirac => Complex64::new(1.0, 0.0),
        MemoryKernel::Prony { c, lambda } => Complex64::new(
            c.iter()
                .zip(lambda)
                .map(|(c, l)| 2.0 * c * l / (l * l + omega * omega))
                .sum(),
            0.0,
        ),
        MemoryKernel::PowerLaw { h } => {
            if omega == 0.0 {
                return Err(Error::invalid(
                    "power-law kernel transform is singular at ω = 0",
                ));
            }
            Complex64::new(
                2.0 * gamma(2.0 * h + 1.0) * (PI * h).sin() * omega.abs().powf(1.0 - 2.0 * h),
                0.0,
            )
        }
    })
}

/// One-sided transform `Γ₊(ω) = ∫₀^∞ e^{−iωt} Γ(t) dt`, the friction term of
/// the GLE in the frequency domain. `2 Re Γ₊` is the even transform, except
/// for the Dirac kernel whose full weight sits on the causal side.
pub fn kernel_causal(kernel: &MemoryKernel, omega: f64) -> Result<Complex64> {
    Ok(match kernel {
        MemoryKernel::Dirac => Complex64::new(1.0, 0.0),
        MemoryKernel::Prony { c, lambda } => c
            .iter()
            .zip(lambda)
            .map(|(c, l)| *c / Complex64::new(*l, omega))
            .sum(),
        MemoryKernel::PowerLaw { h } => {
            if omega == 0.0 {
                return Err(Error::invalid(
                    "power-law kernel transform is singular at ω = 0",
                ));
            }
            let e = 1.0 - 2.0 * h;
            let phase = 0.5 * PI * e * omega.signum();
            Complex64::from_polar(gamma(2.0 * h + 1.0) * omega.abs().powf(e), phase)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum Diffusivity {
    Subdiffusive,
    Diffusive { sigma2: f64 },
    Superdiffusive,
}

/// Long-time class from `lim_{z→0} Γ̃(z)`.
pub fn classify_diffusivity(kernel: &MemoryKernel) -> Diffusivity {
    match kernel {
        MemoryKernel::Dirac => Diffusivity::Diffusive { sigma2: 1.0 },
        MemoryKernel::Prony { c, lambda } => Diffusivity::Diffusive {
            sigma2: c.iter().zip(lambda).map(|(c, l)| c / l).sum(),
        },
        // z^{1−2H} → ∞ for H > 1/2
        MemoryKernel::PowerLaw { .. } => Diffusivity::Subdiffusive,
    }
}

/// Physical parameters of a free-particle GLE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GleParams {
    pub mass: f64,
    pub gamma: f64,
    pub kbt: f64,
    pub kernel: MemoryKernel,
}

impl GleParams {
    pub fn new(mass: f64, gamma: f64, kbt: f64, kernel: MemoryKernel) -> Result<Self> {
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(Error::invalid(format!(
                "mass must be nonnegative, got {mass}"
            )));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!(
                "drag must be positive, got {gamma}"
            )));
        }
        if !(kbt > 0.0 && kbt.is_finite()) {
            return Err(Error::invalid(format!(
                "thermal energy must be positive, got {kbt}"
            )));
        }
        kernel.validate()?;
        Ok(GleParams {
            mass,
            gamma,
            kbt,
            kernel,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GserDim {
    /// Full three-dimensional MSD.
    #[serde(rename = "3d")]
    ThreeD,
    /// MSD of a single coordinate.
    #[serde(rename = "1d")]
    OneD,
}

impl GserDim {
    fn kappa(self) -> f64 {
        match self {
            GserDim::ThreeD => 1.0,
            GserDim::OneD => 1.0 / 3.0,
        }
    }
}

impl std::str::FromStr for GserDim {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "3d" => Ok(GserDim::ThreeD),
            "1d" => Ok(GserDim::OneD),
            other => Err(Error::invalid(format!(
                "dimension must be 1d or 3d, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusCurve {
    pub omega: Vec<f64>,
    pub eta_tilde: Vec<f64>,
    pub eta_star: Vec<Complex64>,
    pub g_star: Vec<Complex64>,
    pub radius: f64,
    pub kbt: f64,
    pub dim: GserDim,
    pub tail_exponent: f64,
}

impl ModulusCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["omega", "G_storage", "G_loss", "eta_real", "eta_imag"])?;
        for i in 0..self.omega.len() {
            let g = self.g_star[i];
            let e = self.eta_star[i];
            w.write_record([
                self.omega[i].to_string(),
                g.re.to_string(),
                g.im.to_string(),
                e.re.to_string(),
                e.im.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Laplace transform of an MSD curve: piecewise-linear through the origin
/// and the sampled points, continued by a power law fitted on the last decade.
#[derive(Debug, Clone)]
pub struct MsdLaplace {
    times: Vec<f64>,
    values: Vec<f64>,
    tail_exponent: f64,
}

impl MsdLaplace {
    pub fn new(msd: &MsdCurve) -> Result<Self> {
        if msd.values.len() < 2 {
            return Err(Error::invalid("MSD curve needs at least two lags"));
        }
        if msd.values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("MSD values must be positive for the GSER"));
        }
        let mut times = vec![0.0];
        times.extend(msd.times());
        let mut values = vec![0.0];
        values.extend_from_slice(&msd.values);

        let t_last = *times.last().expect("non-empty");
        let (mut sx, mut sy, mut sxx, mut sxy, mut k) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (t, v) in times.iter().zip(&values).skip(1) {
            if *t >= t_last / 10.0 {
                let (x, y) = (t.ln(), v.ln());
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
                k += 1.0;
            }
        }
        let tail_exponent = if k >= 2.0 {
            (k * sxy - sx * sy) / (k * sxx - sx * sx)
        } else {
            let n = times.len();
            (values[n - 1] / values[n - 2]).ln() / (times[n - 1] / times[n - 2]).ln()
        };
        if !(tail_exponent > -1.0 && tail_exponent.is_finite()) {
            return Err(Error::invalid(format!(
                "MSD tail exponent {tail_exponent} is not above −1; cannot extrapolate"
            )));
        }
        Ok(MsdLaplace {
            times,
            values,
            tail_exponent,
        })
    }

    pub fn tail_exponent(&self) -> f64 {
        self.tail_exponent
    }

    pub fn eval(&self, z: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.times.len() - 1 {
            let (t0, t1) = (self.times[i], self.times[i + 1]);
            let (f0, f1) = (self.values[i], self.values[i + 1]);
            let h = t1 - t0;
            let x = z * h;
            let slope = (f1 - f0) / h;
            total += (-z * t0).exp() * h * (f0 * phi1(x) + slope * h * phi2(x));
        }
        let t_n = *self.times.last().expect("non-empty");
        let mu_n = *self.values.last().expect("non-empty");
        let a = self.tail_exponent;
        // ∫_{tₙ}^∞ e^{−zt} μₙ (t/tₙ)^a dt = μₙ tₙ^{−a} z^{−(a+1)} Γ(a+1, z tₙ)
        let tail = mu_n * t_n.powf(-a) * z.powf(-(a + 1.0)) * gamma_ui(a + 1.0, z * t_n);
        total + tail
    }
}

// (1 − e^{−x})/x
fn phi1(x: f64) -> f64 {
    if x < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

// (1 − e^{−x}(1 + x))/x²
fn phi2(x: f64) -> f64 {
    if x < 0.05 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 2..14 {
            term *= if k == 2 { x * x / 2.0 } else { -x / k as f64 };
            sum += (k - 1) as f64 * term;
        }
        sum / (x * x)
    } else {
        (1.0 - (-x).exp() * (1.0 + x)) / (x * x)
    }
}

/// Complex viscosity and shear modulus from an MSD curve.
///
/// `η̃(z) = k_BT κ / (z² π r ℒ{MSD}(z))` with `κ = 1` for 3-d and `1/3` for
/// per-coordinate curves; `η*(ω)` continues the local power law of `η̃` to
/// `z = iω`, and `G* = iω η*`.
pub fn gser_modulus(
    msd: &MsdCurve,
    radius: f64,
    kbt: f64,
    dim: GserDim,
    z_grid: &[f64],
) -> Result<ModulusCurve> {
    if !(radius > 0.0 && kbt > 0.0) {
        return Err(Error::invalid("radius and thermal energy must be positive"));
    }
    let n = *msd
        .lags
        .last()
        .ok_or_else(|| Error::invalid("empty MSD curve"))? as f64;
    let (lo, hi) = (1.0 / (n * msd.dt), 1.0 / msd.dt);
    if z_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("frequency grid must be strictly increasing"));
    }
    for &z in z_grid {
        if !(z >= lo * (1.0 - 1e-12) && z <= hi * (1.0 + 1e-12)) {
            return Err(Error::invalid(format!(
                "frequency {z} outside the resolvable band [{lo}, {hi}]"
            )));
        }
    }
    let lap = MsdLaplace::new(msd)?;
    let kappa = dim.kappa();
    let eta = |z: f64| kbt * kappa / (z * z * PI * radius * lap.eval(z));

    let step: f64 = 0.01;
    let mut curve = ModulusCurve {
        omega: Vec::with_capacity(z_grid.len()),
        eta_tilde: Vec::with_capacity(z_grid.len()),
        eta_star: Vec::with_capacity(z_grid.len()),
        g_star: Vec::with_capacity(z_grid.len()),
        radius,
        kbt,
        dim,
        tail_exponent: lap.tail_exponent(),
    };
    for &z in z_grid {
        let e = eta(z);
        let q = (eta(z * step.exp()).ln() - eta(z * (-step).exp()).ln()) / (2.0 * step);
        let es = e * Complex64::from_polar(1.0, 0.5 * PI * q);
        curve.omega.push(z);
        curve.eta_tilde.push(e);
        curve.eta_star.push(es);
        curve.g_star.push(Complex64::new(0.0, z) * es);
    }
    Ok(curve)
}

/// Log-spaced grid of `count` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}
