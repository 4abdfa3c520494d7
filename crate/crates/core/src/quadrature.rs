//! Gauss–Kronrod and Gauss–Legendre building blocks for the spectral integrals.
//!
//! Integrands here typically have an integrable power-law cusp at the
//! origin and either decay algebraically or oscillate. Cusps are handled by
//! dyadic panels shrinking towards zero, oscillation by capping panel width
//! at a fraction of the period.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss 7-point weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Value with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// 15-point Kronrod rule on `[a, b]` with embedded 7-point Gauss error estimate.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Estimate {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    Estimate {
        value: k * h,
        error: ((k - g) * h).abs(),
    }
}

/// Kronrod nodes and weights mapped to `[a, b]`, paired with Gauss weights
/// (zero where the node is Kronrod-only).
pub fn gk15_nodes(a: f64, b: f64) -> [(f64, f64, f64); 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut out = [(0.0, 0.0, 0.0); 15];
    for i in 0..7 {
        let wg = if i % 2 == 1 { WG[i / 2] * h } else { 0.0 };
        out[2 * i] = (c - h * XGK[i], WGK[i] * h, wg);
        out[2 * i + 1] = (c + h * XGK[i], WGK[i] * h, wg);
    }
    out[14] = (c, WGK[7] * h, WG[3] * h);
    out
}

/// Globally adaptive bisection driven by the GK15 error estimate.
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<Estimate> {
    let mut intervals = vec![(a, b, gk15(f, a, b))];
    loop {
        let value: f64 = intervals.iter().map(|iv| iv.2.value).sum();
        let error: f64 = intervals.iter().map(|iv| iv.2.error).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Estimate { value, error });
        }
        if intervals.len() >= max_intervals {
            return Err(Error::Quadrature {
                tol: abs_tol.max(rel_tol * value.abs()),
                achieved: error,
            });
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.error.total_cmp(&y.1 .2.error))
            .expect("non-empty");
        let (lo, hi, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        intervals.push((lo, mid, gk15(f, lo, mid)));
        intervals.push((mid, hi, gk15(f, mid, hi)));
    }
}

/// Sum of GK15 over consecutive panels delimited by `edges`.
pub fn panels<F: Fn(f64) -> f64>(f: &F, edges: &[f64]) -> Estimate {
    let mut value = 0.0;
    let mut error = 0.0;
    for w in edges.windows(2) {
        let e = gk15(f, w[0], w[1]);
        value += e.value;
        error += e.error;
    }
    Estimate { value, error }
}

/// Edges `0, b·2^-levels, ..., b/2, b`.
pub fn dyadic_edges(b: f64, levels: u32) -> Vec<f64> {
    let mut edges = vec![0.0];
    edges.extend((0..=levels).rev().map(|k| b * 0.5f64.powi(k as i32)));
    edges
}

/// Edges `a, 2a, 4a, ...` with `count` panels.
pub fn geometric_edges(a: f64, count: u32) -> Vec<f64> {
    (0..=count).map(|k| a * 2f64.powi(k as i32)).collect()
}

/// `∫_0^∞ f` for an integrand with at most a power-law cusp at zero and
/// algebraic decay: dyadic panels on `[0, 1]`, doubling panels beyond.
pub fn half_line<F: Fn(f64) -> f64>(f: &F) -> Estimate {
    let inner = panels(f, &dyadic_edges(1.0, 200));
    let outer = panels(f, &geometric_edges(1.0, 200));
    Estimate {
        value: inner.value + outer.value,
        error: inner.error + outer.error,
    }
}

/// Cosine moments `∫_0^π cos(hω) f(ω) dω` for `h = 0..=max_lag`, each with
/// an error estimate.
#[derive(Debug, Clone)]
pub struct CosineMoments {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
}

/// Computes all cosine moments from a single set of evaluations of `f`.
///
/// Panels are dyadic on `[0, w]` (for a cusp at the origin) and uniform of
/// width `w ≤ π / max_lag` on `[w, π]`, so each panel spans at most half an
/// oscillation. The panel count doubles until every lag meets `tol`.
pub fn cosine_moments<F: Fn(f64) -> f64>(f: &F, max_lag: usize, tol: f64) -> Result<CosineMoments> {
    let mut uniform = max_lag.max(16);
    let mut last_err = f64::INFINITY;
    for _ in 0..4 {
        let w = std::f64::consts::PI / uniform as f64;
        let mut edges = dyadic_edges(w, 60);
        edges.extend((2..=uniform).map(|k| w * k as f64));
        *edges.last_mut().expect("non-empty") = std::f64::consts::PI;

        let mut values = vec![0.0; max_lag + 1];
        let mut errors = vec![0.0; max_lag + 1];
        let mut kron = vec![0.0; max_lag + 1];
        let mut gauss = vec![0.0; max_lag + 1];
        for pair in edges.windows(2) {
            kron.iter_mut().for_each(|x| *x = 0.0);
            gauss.iter_mut().for_each(|x| *x = 0.0);
            for (x, wk, wg) in gk15_nodes(pair[0], pair[1]) {
                let fx = f(x);
                if fx == 0.0 {
                    continue;
                }
                // cos(hx) by the Chebyshev recurrence
                let c1 = x.cos();
                let (mut prev, mut cur) = (c1, 1.0);
                for h in 0..=max_lag {
                    kron[h] += wk * cur * fx;
                    gauss[h] += wg * cur * fx;
                    let next = 2.0 * c1 * cur - prev;
                    prev = cur;
                    cur = next;
                }
            }
            for h in 0..=max_lag {
                values[h] += kron[h];
                errors[h] += (kron[h] - gauss[h]).abs();
            }
        }
        last_err = errors.iter().cloned().fold(0.0, f64::max);
        if last_err <= tol {
            return Ok(CosineMoments { values, errors });
        }
        uniform *= 2;
    }
    Err(Error::Quadrature {
        tol,
        achieved: last_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gk15_is_exact_for_polynomials() {
        let e = gk15(&|x: f64| x.powi(10) - 3.0 * x.powi(3), -1.0, 2.0);
        let exact = (2f64.powi(11) + 1.0) / 11.0 - 3.0 * (16.0 - 1.0) / 4.0;
        assert!((e.value - exact).abs() < 1e-12);
    }

    #[test]
    fn adaptive_handles_endpoint_cusp() {
        let e = adaptive(&|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-10, 1e-12, 500).unwrap();
        assert!((e.value - 2.0).abs() < 1e-8, "{}", e.value);
    }

    #[test]
    fn half_line_power_decay() {
        // ∫_0^∞ x^{0.5}/(1+x)^2 dx = π/2
        let e = half_line(&|x: f64| x.sqrt() / (1.0 + x).powi(2));
        assert!((e.value - PI / 2.0).abs() < 1e-10, "{}", e.value);
    }

    #[test]
    fn cosine_moments_of_exponential() {
        // ∫_0^π cos(hx) e^{-x} dx = (1 - (-1)^h e^{-π}) / (1 + h^2)
        let m = cosine_moments(&|x: f64| (-x).exp(), 40, 1e-10).unwrap();
        for h in 0..=40 {
            let sign = if h % 2 == 0 { 1.0 } else { -1.0 };
            let exact = (1.0 - sign * (-PI).exp()) / (1.0 + (h * h) as f64);
            assert!((m.values[h] - exact).abs() < 1e-12, "h={h}");
        }
    }
}
