//! Time-causal scale-space kernels built from cascades of truncated
//! exponentials.
//!
//! A scale hierarchy is described by [`ScaleParams`]: `K` levels whose
//! variances grow geometrically with ratio `c^2` up to `tau_max`. The matching
//! time constants ([`time_constants`]) are chosen so that the cascade of all
//! `K` first-order kernels has variance exactly `tau_max`. The cascade is the
//! finite-`K` stand-in for the time-causal limit kernel; its normalized
//! derivatives serve as causal mother wavelets.

use std::path::Path;

use crate::conv;
use crate::error::{Error, Result};
use crate::io;
use crate::signals::SampledSignal;

/// Default tail budget for truncating each exponential.
pub const DEFAULT_EPS_TRUNC: f64 = 1e-6;

/// Scale hierarchy: distribution parameter `c`, level count `k`, and the
/// largest variance `tau_max` (seconds squared).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleParams {
    c: f64,
    k: usize,
    tau_max: f64,
}

impl ScaleParams {
    pub fn new(c: f64, k: usize, tau_max: f64) -> Result<Self> {
        if !(c > 1.0 && c.is_finite()) {
            return Err(Error::validation("c", "c must exceed 1"));
        }
        if k < 1 {
            return Err(Error::validation("k", "K must be at least 1"));
        }
        if !(tau_max > 0.0 && tau_max.is_finite()) {
            return Err(Error::validation("tau_max", "tau_max must be positive"));
        }
        Ok(ScaleParams { c, k, tau_max })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }
}

/// Variance levels `tau_k = c^(2(k-K)) tau_max`, `k = 1..=K`.
pub fn tau_levels(params: &ScaleParams) -> Vec<f64> {
    let k_max = params.k as i32;
    (1..=k_max)
        .map(|k| params.c.powi(2 * (k - k_max)) * params.tau_max)
        .collect()
}

/// Time constants `mu_1..mu_K` of the cascade (seconds).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeConstantSchedule {
    mus: Vec<f64>,
}

impl TimeConstantSchedule {
    /// Wraps explicit time constants; all must be positive and finite.
    pub fn from_mus(mus: Vec<f64>) -> Result<Self> {
        if mus.is_empty() {
            return Err(Error::validation("mus", "schedule needs at least one time constant"));
        }
        if mus.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::validation("mus", "time constants must be positive and finite"));
        }
        Ok(TimeConstantSchedule { mus })
    }

    pub fn mus(&self) -> &[f64] {
        &self.mus
    }

    pub fn len(&self) -> usize {
        self.mus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mus.is_empty()
    }

    /// Cascade mean, `sum mu_k`.
    pub fn mean(&self) -> f64 {
        self.mus.iter().sum()
    }

    /// Cascade variance, `sum mu_k^2`.
    pub fn variance(&self) -> f64 {
        self.mus.iter().map(|m| m * m).sum()
    }

    pub fn min(&self) -> f64 {
        self.mus.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.mus.iter().copied().fold(0.0, f64::max)
    }

    /// Every time constant multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::from_mus(self.mus.iter().map(|m| m * s).collect())
    }
}

/// `mu_1 = c^(1-K) sqrt(tau_max)`, `mu_k = c^(k-K-1) sqrt(c^2-1) sqrt(tau_max)`.
pub fn time_constants(params: &ScaleParams) -> TimeConstantSchedule {
    let k_max = params.k as i32;
    let root_tau = params.tau_max.sqrt();
    let spread = (params.c * params.c - 1.0).sqrt();
    let mus = (1..=k_max)
        .map(|k| {
            if k == 1 {
                params.c.powi(1 - k_max) * root_tau
            } else {
                params.c.powi(k - k_max - 1) * spread * root_tau
            }
        })
        .collect();
    TimeConstantSchedule { mus }
}

/// Causal sampled kernel; tap `i` sits at `t = i * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    dt: f64,
    taps: Vec<f64>,
}

impl DiscreteKernel {
    pub fn new(dt: f64, taps: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::validation("dt", "kernel dt must be positive"));
        }
        if taps.is_empty() {
            return Err(Error::validation("taps", "kernel needs at least one tap"));
        }
        if taps.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("taps", "kernel taps must be finite"));
        }
        Ok(DiscreteKernel { dt, taps })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Time covered by the taps, `len * dt`.
    pub fn horizon(&self) -> f64 {
        self.taps.len() as f64 * self.dt
    }

    /// `sum(taps) * dt`.
    pub fn mass(&self) -> f64 {
        self.taps.iter().sum::<f64>() * self.dt
    }

    /// `sqrt(sum(taps^2) * dt)`.
    pub fn l2_norm(&self) -> f64 {
        (self.taps.iter().map(|x| x * x).sum::<f64>() * self.dt).sqrt()
    }
}

/// Sampled `g(t; mu) = exp(-t/mu) / mu` truncated where the analytic tail
/// drops below `eps_trunc`.
///
/// Tap 0 holds the onset value `1/mu`. The remaining taps follow the
/// exponential decay per step, rescaled so that `sum(taps) * dt` equals the
/// analytic mass `1 - exp(-T/mu)` of the truncated kernel over its horizon
/// `T = N dt`. Plain point sampling would overshoot the mass by about
/// `dt / (2 mu)`.
pub fn truncated_exponential(mu: f64, dt: f64, eps_trunc: f64) -> Result<DiscreteKernel> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::validation("mu", "time constant must be positive"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::validation("dt", "must be positive"));
    }
    if !(eps_trunc > 0.0 && eps_trunc < 1.0) {
        return Err(Error::validation("eps_trunc", "must lie in (0, 1)"));
    }
    if dt >= mu {
        return Err(Error::UnderResolved {
            what: "kernel",
            detail: format!("dt = {dt} is not below the time constant {mu}"),
        });
    }
    let n = (-mu * eps_trunc.ln() / dt).ceil().max(1.0) as usize;
    Ok(DiscreteKernel {
        dt,
        taps: exponential_taps(mu, dt, n),
    })
}

/// `n` mass-matched taps of `exp(-t/mu)/mu` (see [`truncated_exponential`]).
pub(crate) fn exponential_taps(mu: f64, dt: f64, n: usize) -> Vec<f64> {
    let x = dt / mu;
    let mass = -(-(n as f64) * x).exp_m1();
    if n == 1 {
        return vec![mass / dt];
    }
    let r = (-x).exp();
    // sum_{i=1}^{n-1} r^i
    let geometric = r * (-((n - 1) as f64) * x).exp_m1() / (-x).exp_m1();
    let amplitude = (mass / dt - 1.0 / mu) / geometric;
    let mut taps = Vec::with_capacity(n);
    taps.push(1.0 / mu);
    taps.extend((1..n).map(|i| amplitude * (-(i as f64) * x).exp()));
    taps
}

/// Discrete convolution `(a * b)[n] = sum_m a[m] b[n-m] dt` of two kernels on
/// the same grid.
pub fn convolve_kernels(a: &DiscreteKernel, b: &DiscreteKernel) -> Result<DiscreteKernel> {
    check_dt(a.dt, b.dt)?;
    let mut taps = conv::convolve(&a.taps, &b.taps);
    for t in taps.iter_mut() {
        *t *= a.dt;
    }
    DiscreteKernel::new(a.dt, taps)
}

/// Convolves the truncated exponentials of every time constant in the
/// schedule, in schedule order.
pub fn compose_cascade(
    schedule: &TimeConstantSchedule,
    dt: f64,
    eps_trunc: f64,
) -> Result<DiscreteKernel> {
    let mut iter = schedule.mus.iter();
    let first = iter.next().expect("schedule is non-empty");
    let mut acc = truncated_exponential(*first, dt, eps_trunc)?;
    for &mu in iter {
        let next = truncated_exponential(mu, dt, eps_trunc)?;
        acc = convolve_kernels(&acc, &next)?;
    }
    Ok(acc)
}

/// Zeroth, first and second moments of a kernel, `t_i = i * dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMoments {
    pub mass: f64,
    pub mean: f64,
    pub variance: f64,
}

pub fn kernel_moments(kernel: &DiscreteKernel) -> Result<KernelMoments> {
    let dt = kernel.dt;
    let mass = kernel.mass();
    if mass == 0.0 || !mass.is_finite() {
        return Err(Error::Numerical("kernel has zero mass".into()));
    }
    let first: f64 = kernel
        .taps
        .iter()
        .enumerate()
        .map(|(i, &w)| i as f64 * dt * w)
        .sum::<f64>()
        * dt;
    let mean = first / mass;
    let second: f64 = kernel
        .taps
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let d = i as f64 * dt - mean;
            d * d * w
        })
        .sum::<f64>()
        * dt;
    Ok(KernelMoments {
        mass,
        mean,
        variance: second / mass,
    })
}

/// One finite-difference pass: central differences inside, one-sided at the
/// ends.
fn difference(taps: &[f64], dt: f64) -> Vec<f64> {
    let n = taps.len();
    let mut out = Vec::with_capacity(n);
    out.push((taps[1] - taps[0]) / dt);
    for i in 1..n - 1 {
        out.push((taps[i + 1] - taps[i - 1]) / (2.0 * dt));
    }
    out.push((taps[n - 1] - taps[n - 2]) / dt);
    out
}

/// `n`-th derivative before normalization.
pub(crate) fn raw_derivative(kernel: &DiscreteKernel, n: usize) -> Result<Vec<f64>> {
    if !(1..=2).contains(&n) {
        return Err(Error::validation("n", format!("derivative order {n} not supported (1 or 2)")));
    }
    if kernel.len() < n + 2 {
        return Err(Error::UnderResolved {
            what: "kernel",
            detail: format!("{} taps cannot carry a derivative of order {n}", kernel.len()),
        });
    }
    let mut taps = kernel.taps.clone();
    for _ in 0..n {
        taps = difference(&taps, kernel.dt);
    }
    Ok(taps)
}

/// `n`-th derivative (`n` in {1, 2}) scaled to unit L2 norm.
pub fn kernel_derivative(kernel: &DiscreteKernel, n: usize) -> Result<DiscreteKernel> {
    let mut taps = raw_derivative(kernel, n)?;
    let norm = (taps.iter().map(|x| x * x).sum::<f64>() * kernel.dt).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Numerical("derivative has zero norm".into()));
    }
    for t in taps.iter_mut() {
        *t /= norm;
    }
    DiscreteKernel::new(kernel.dt, taps)
}

/// Causal smoothing `L(t_i) = sum_j kernel[j] f(t_{i-j}) dt` with zero history
/// before the first sample. Output has the signal's length.
pub fn scale_space_transform(
    signal: &SampledSignal,
    kernel: &DiscreteKernel,
) -> Result<SampledSignal> {
    check_dt(signal.dt(), kernel.dt)?;
    let n = signal.len();
    let taps = &kernel.taps[..kernel.len().min(n)];
    let mut out = conv::convolve(signal.samples(), taps);
    out.truncate(n);
    for x in out.iter_mut() {
        *x *= kernel.dt;
    }
    signal.with_samples(out)
}

fn check_dt(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() <= 1e-12 * a.abs().max(b.abs()) {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!("dt {a} vs {b}")))
    }
}

/// Smoothing kernel with its normalized first and second derivatives.
#[derive(Debug, Clone)]
pub struct KernelFamily {
    pub schedule: TimeConstantSchedule,
    pub psi: DiscreteKernel,
    pub dpsi: DiscreteKernel,
    pub ddpsi: DiscreteKernel,
}

impl KernelFamily {
    pub fn build(params: &ScaleParams, dt: f64, eps_trunc: f64) -> Result<Self> {
        let schedule = time_constants(params);
        let psi = compose_cascade(&schedule, dt, eps_trunc)?;
        let dpsi = kernel_derivative(&psi, 1)?;
        let ddpsi = kernel_derivative(&psi, 2)?;
        Ok(KernelFamily {
            schedule,
            psi,
            dpsi,
            ddpsi,
        })
    }

    /// CSV `t,psi,dpsi,ddpsi`, one row per tap.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = io::csv_writer(path, &["t", "psi", "dpsi", "ddpsi"])?;
        let dt = self.psi.dt();
        for i in 0..self.psi.len() {
            io::write_row(
                &mut w,
                path,
                [
                    io::num(i as f64 * dt),
                    io::num(self.psi.taps[i]),
                    io::num(self.dpsi.taps[i]),
                    io::num(self.ddpsi.taps[i]),
                ],
            )?;
        }
        io::finish(w, path)
    }
}
