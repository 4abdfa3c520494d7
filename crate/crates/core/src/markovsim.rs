//! Exact samplers for Markov-embeddable models: the Langevin (OU velocity)
//! particle and the GLE with a Prony-series memory kernel.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{GleParams, MemoryKernel};
use crate::rng::fill_normals;
use crate::trackio::{Axis, Track};

/// `ρ(t) = (kBT/m) e^{−γt/m}`.
pub fn ou_velocity_acf(m: f64, gamma: f64, kbt: f64, t: f64) -> f64 {
    kbt / m * (-gamma * t.abs() / m).exp()
}

/// `(2kBT/γ)(t + (m/γ)(e^{−γt/m} − 1))`.
pub fn ou_msd(m: f64, gamma: f64, kbt: f64, t: f64) -> f64 {
    let tau = m / gamma;
    // expm1 keeps the t² behaviour at small t
    2.0 * kbt / gamma * (t + tau * (-t / tau).exp_m1())
}

/// Sampled path with velocities, `positions[0] = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub dt: f64,
}

impl Trajectory {
    pub fn into_track(self, id: impl Into<String>) -> Result<Track> {
        Track::new(id, Axis::X, self.dt, self.positions)
    }
}

fn check_physical(m: f64, gamma: f64, kbt: f64, dt: f64, n: usize) -> Result<()> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::invalid(format!("mass must be positive, got {m}")));
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
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if n < 2 {
        return Err(Error::invalid("need at least two steps"));
    }
    Ok(())
}

/// Exact one-step transition of `dV = −aV dt + σ dW`, `dX = V dt`.
#[derive(Debug, Clone, Copy)]
struct OuStep {
    phi: f64,
    drift_x: f64,
    // lower Cholesky factor of Cov(ξ_V, ξ_X)
    l11: f64,
    l21: f64,
    l22: f64,
}

impl OuStep {
    fn new(m: f64, gamma: f64, kbt: f64, dt: f64) -> Self {
        let a = gamma / m;
        let s2 = 2.0 * kbt * gamma / (m * m);
        let e1 = (-a * dt).exp_m1(); // e^{−a dt} − 1
        let e2 = (-2.0 * a * dt).exp_m1();
        let var_v = -kbt / m * e2;
        let var_x = s2 / (a * a) * (dt + 2.0 * e1 / a - e2 / (2.0 * a));
        let cov = s2 / (2.0 * a * a) * e1 * e1;
        let l11 = var_v.sqrt();
        let l21 = if l11 > 0.0 { cov / l11 } else { 0.0 };
        let l22 = (var_x - l21 * l21).max(0.0).sqrt();
        OuStep {
            phi: 1.0 + e1,
            drift_x: -e1 / a,
            l11,
            l21,
            l22,
        }
    }
}

/// Langevin particle sampled exactly on a grid of `n` steps.
///
/// Velocity is the AR(1) `V_{j+1} = e^{−γdt/m} V_j + ξ`, started from the
/// stationary law; each position increment is drawn jointly with `ξ`.
pub fn simulate_langevin<R: Rng + ?Sized>(
    m: f64,
    gamma: f64,
    kbt: f64,
    dt: f64,
    n: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    check_physical(m, gamma, kbt, dt, n)?;
    let st = OuStep::new(m, gamma, kbt, dt);
    let mut z = vec![0.0; 2 * n + 1];
    fill_normals(rng, &mut z);
    let mut v = (kbt / m).sqrt() * z[0];
    let mut x = 0.0;
    let mut positions = Vec::with_capacity(n + 1);
    let mut velocities = Vec::with_capacity(n + 1);
    positions.push(x);
    velocities.push(v);
    for pair in z[1..].chunks_exact(2) {
        let (z1, z2) = (pair[0], pair[1]);
        x += st.drift_x * v + st.l21 * z1 + st.l22 * z2;
        v = st.phi * v + st.l11 * z1;
        positions.push(x);
        velocities.push(v);
    }
    Ok(Trajectory {
        positions,
        velocities,
        dt,
    })
}

/// Linear SDE `dS = A S dt + B dW`.
#[derive(Debug, Clone)]
pub struct LinearSde {
    pub drift: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
}

impl LinearSde {
    pub fn new(drift: DMatrix<f64>, diffusion: DMatrix<f64>) -> Result<Self> {
        if !drift.is_square() || diffusion.nrows() != drift.nrows() {
            return Err(Error::invalid(
                "drift must be square and match the diffusion rows",
            ));
        }
        Ok(LinearSde { drift, diffusion })
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    /// `(e^{A dt}, Q(dt))` with `Q(dt) = ∫_0^dt e^{As} BBᵀ e^{Aᵀs} ds`, from
    /// the exponential of `[[−A, BBᵀ], [0, Aᵀ]]·dt`.
    pub fn discretize(&self, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.dim();
        let bbt = &self.diffusion * self.diffusion.transpose();
        let mut block = DMatrix::zeros(2 * n, 2 * n);
        block
            .view_mut((0, 0), (n, n))
            .copy_from(&(-&self.drift * dt));
        block.view_mut((0, n), (n, n)).copy_from(&(&bbt * dt));
        block
            .view_mut((n, n), (n, n))
            .copy_from(&(self.drift.transpose() * dt));
        let e = block.exp();
        let phi = e.view((n, n), (n, n)).transpose();
        let q = &phi * e.view((0, n), (n, n));
        let q = (&q + q.transpose()) * 0.5;
        (phi, q)
    }

    /// Solves `A P + P Aᵀ + BBᵀ = 0` by the Kronecker form.
    pub fn lyapunov(&self) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let a = &self.drift;
        let id = DMatrix::<f64>::identity(n, n);
        let k = id.kronecker(a) + a.kronecker(&id);
        let rhs = -(&self.diffusion * self.diffusion.transpose());
        let rhs = DVector::from_column_slice(rhs.as_slice());
        let sol = k
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("Lyapunov system is singular".into()))?;
        let p = DMatrix::from_column_slice(n, n, sol.as_slice());
        let p = (&p + p.transpose()) * 0.5;
        let e = p.clone().symmetric_eigen();
        let min = e.eigenvalues.min();
        if min < -1e-10 * e.eigenvalues.amax() {
            return Err(Error::Numerical(format!(
                "Lyapunov solution is not positive semidefinite (eigenvalue {min:e})"
            )));
        }
        Ok(p)
    }
}

/// `F` with `F Fᵀ = S` for a symmetric PSD `S`; tiny negative eigenvalues clamp to 0.
fn psd_factor(s: &DMatrix<f64>) -> DMatrix<f64> {
    let e = s.clone().symmetric_eigen();
    let roots = e.eigenvalues.map(|l| l.max(0.0).sqrt());
    &e.eigenvectors * DMatrix::from_diagonal(&roots)
}

/// Markovian embedding of the GLE with kernel `Σ c_k e^{−λ_k t}`.
///
/// State `(X, V, Z_1..Z_K, F_1..F_K)`:
/// `m dV = (−γ Σ c_k Z_k + Σ F_k) dt`, `dZ_k = (V − λ_k Z_k) dt`,
/// `dF_k = −λ_k F_k dt + √(2 λ_k kBT γ c_k) dW_k`, `dX = V dt`.
#[derive(Debug, Clone)]
pub struct PronyGle {
    params: GleParams,
    sde: LinearSde,
    stationary: DMatrix<f64>,
}

impl PronyGle {
    pub fn new(params: GleParams) -> Result<Self> {
        let (c, lambda) = match &params.kernel {
            MemoryKernel::Prony { c, lambda } => (c.clone(), lambda.clone()),
            _ => return Err(Error::invalid("Prony GLE needs a Prony kernel")),
        };
        params.kernel.validate()?;
        let (m, gamma, kbt) = (params.mass, params.gamma, params.kbt);
        if m <= 0.0 {
            return Err(Error::invalid("Prony GLE needs m > 0"));
        }
        let k = c.len();
        let dim = 2 + 2 * k;
        let mut a = DMatrix::zeros(dim, dim);
        let mut b = DMatrix::zeros(dim, k);
        a[(0, 1)] = 1.0;
        for i in 0..k {
            let (zi, fi) = (2 + i, 2 + k + i);
            a[(1, zi)] = -gamma * c[i] / m;
            a[(1, fi)] = 1.0 / m;
            a[(zi, 1)] = 1.0;
            a[(zi, zi)] = -lambda[i];
            a[(fi, fi)] = -lambda[i];
            b[(fi, i)] = (2.0 * lambda[i] * kbt * gamma * c[i]).sqrt();
        }
        let sde = LinearSde::new(a, b)?;
        // X is not stationary; solve on the (V, Z, F) block
        let sub = LinearSde::new(
            sde.drift.view((1, 1), (dim - 1, dim - 1)).into_owned(),
            sde.diffusion.rows(1, dim - 1).into_owned(),
        )?;
        let p = sub.lyapunov()?;
        let mut stationary = DMatrix::zeros(dim, dim);
        stationary
            .view_mut((1, 1), (dim - 1, dim - 1))
            .copy_from(&p);
        let target = kbt / m;
        if (p[(0, 0)] - target).abs() > 1e-8 * target {
            return Err(Error::Numerical(format!(
                "stationary Var V = {} differs from kBT/m = {target}",
                p[(0, 0)]
            )));
        }
        Ok(PronyGle {
            params,
            sde,
            stationary,
        })
    }

    pub fn params(&self) -> &GleParams {
        &self.params
    }

    pub fn sde(&self) -> &LinearSde {
        &self.sde
    }

    /// Stationary covariance of the full state (zero in the X row/column).
    pub fn stationary_covariance(&self) -> &DMatrix<f64> {
        &self.stationary
    }

    /// `E V(t)V(0)` from `[e^{At} P]_{VV}`.
    pub fn velocity_acf(&self, t: f64) -> f64 {
        let e = (&self.sde.drift * t.abs()).exp();
        (e * &self.stationary)[(1, 1)]
    }

    pub fn simulate<R: Rng + ?Sized>(&self, dt: f64, n: usize, rng: &mut R) -> Result<Trajectory> {
        check_physical(self.params.mass, self.params.gamma, self.params.kbt, dt, n)?;
        let dim = self.sde.dim();
        let (phi, q) = self.sde.discretize(dt);
        let noise = psd_factor(&q);
        let init = psd_factor(&self.stationary);
        let mut z = DVector::zeros(dim);
        fill_normals(rng, z.as_mut_slice());
        let mut state = &init * &z;
        let mut positions = Vec::with_capacity(n + 1);
        let mut velocities = Vec::with_capacity(n + 1);
        positions.push(state[0]);
        velocities.push(state[1]);
        for _ in 0..n {
            fill_normals(rng, z.as_mut_slice());
            state = &phi * &state + &noise * &z;
            positions.push(state[0]);
            velocities.push(state[1]);
        }
        Ok(Trajectory {
            positions,
            velocities,
            dt,
        })
    }
}

pub fn simulate_prony_gle<R: Rng + ?Sized>(
    kernel: MemoryKernel,
    m: f64,
    gamma: f64,
    kbt: f64,
    dt: f64,
    n: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    PronyGle::new(GleParams::new(m, gamma, kbt, kernel)?)?.simulate(dt, n, rng)
}
