//! Continuous wavelet transform baselines.
//!
//! Two mother wavelets are provided: the complex Morlet wavelet and the
//! normalized `n`-th derivative of a finite time-causal cascade. At scale `a`
//! the sampled wavelet approximates `a^{-1/2} psi(t / a)` and is renormalized
//! to unit L2 norm on the sample grid.
//!
//! The inverse uses the resolution of identity with
//! `C = 1/2 * sum_{w != 0} |psi_hat(w)|^2 / |w| dw` and takes the real part,
//! which serves real and complex (analytic) wavelets alike for real signals.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::conv::convolve_complex;
use crate::error::{Error, Result};
use crate::io;
use crate::scale_space::{
    compose_cascade, kernel_derivative, time_constants, ScaleParams, TimeConstantSchedule,
    DEFAULT_EPS_TRUNC,
};
use crate::signals::SampledSignal;

pub const DEFAULT_MORLET_SIGMA: f64 = 1.0;
pub const DEFAULT_MORLET_OMEGA0: f64 = 5.0;

/// Half-width of the Morlet window in units of `sigma`.
const MORLET_HALF_WIDTH: f64 = 6.0;
/// Fewest taps a scaled wavelet may have.
const MIN_TAPS: usize = 8;
/// Mean beyond this (in units of the L2 norm) makes a wavelet inadmissible.
const ADMISSIBLE_MEAN: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub enum WaveletKind {
    Morlet { sigma: f64, omega0: f64 },
    LimitKernel { params: ScaleParams, n: usize },
}

/// A wavelet sampled at one scale. Tap `j` sits at `(offset + j) * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledWavelet {
    pub scale: f64,
    pub offset: i64,
    pub taps: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct MotherWavelet {
    kind: WaveletKind,
    dt: f64,
    eps_trunc: f64,
    schedule: Option<TimeConstantSchedule>,
    unit: ScaledWavelet,
    admissibility: f64,
}

/// Unnormalized Morlet wavelet `(pi sigma^2)^{-1/2} e^{-t^2 / 2 sigma^2} e^{i omega0 t}`.
pub fn morlet_value(t: f64, sigma: f64, omega0: f64) -> Complex64 {
    let envelope = (-t * t / (2.0 * sigma * sigma)).exp() / (std::f64::consts::PI * sigma * sigma).sqrt();
    Complex64::from_polar(envelope, omega0 * t)
}

pub fn morlet(sigma: f64, omega0: f64, dt: f64) -> Result<MotherWavelet> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::validation("sigma", "must be positive"));
    }
    if !(omega0 > 0.0 && omega0.is_finite()) {
        return Err(Error::validation("omega0", "must be positive"));
    }
    check_dt(dt)?;
    MotherWavelet::build(WaveletKind::Morlet { sigma, omega0 }, dt, DEFAULT_EPS_TRUNC, None)
}

/// Derivative of order `n` of the cascade for `params`, as a causal wavelet.
pub fn limit_kernel_wavelet(params: &ScaleParams, n: usize, dt: f64) -> Result<MotherWavelet> {
    if !(1..=2).contains(&n) {
        return Err(Error::validation("n", "derivative order must be 1 or 2"));
    }
    check_dt(dt)?;
    MotherWavelet::build(
        WaveletKind::LimitKernel { params: *params, n },
        dt,
        DEFAULT_EPS_TRUNC,
        Some(time_constants(params)),
    )
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::validation("dt", "must be positive"))
    }
}

impl MotherWavelet {
    fn build(
        kind: WaveletKind,
        dt: f64,
        eps_trunc: f64,
        schedule: Option<TimeConstantSchedule>,
    ) -> Result<Self> {
        let mut m = MotherWavelet {
            kind,
            dt,
            eps_trunc,
            schedule,
            unit: ScaledWavelet {
                scale: 1.0,
                offset: 0,
                taps: Vec::new(),
            },
            admissibility: f64::NAN,
        };
        m.unit = m.at_scale(1.0)?;
        m.admissibility = admissibility_constant(&m.unit.taps, dt)?;
        Ok(m)
    }

    pub fn kind(&self) -> &WaveletKind {
        &self.kind
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Sampled form at unit scale.
    pub fn unit(&self) -> &ScaledWavelet {
        &self.unit
    }

    pub fn admissibility(&self) -> f64 {
        self.admissibility
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            WaveletKind::Morlet { .. } => "morlet",
            WaveletKind::LimitKernel { .. } => "limit-kernel",
        }
    }

    /// Smallest scale the sample grid resolves.
    pub fn min_scale(&self) -> f64 {
        match &self.kind {
            // at least four samples per carrier period, and MIN_TAPS in the window
            WaveletKind::Morlet { sigma, omega0 } => {
                let carrier = 2.0 * omega0 * self.dt / std::f64::consts::PI;
                let window = MIN_TAPS as f64 * self.dt / (2.0 * MORLET_HALF_WIDTH * sigma);
                carrier.max(window)
            }
            // fastest stage at 1.5 samples per time constant
            WaveletKind::LimitKernel { .. } => {
                1.5 * self.dt / self.schedule.as_ref().expect("limit kernel has a schedule").min()
            }
        }
    }

    pub fn at_scale(&self, a: f64) -> Result<ScaledWavelet> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::validation("scales", "scales must be positive"));
        }
        let dt = self.dt;
        let (offset, mut taps) = match &self.kind {
            WaveletKind::Morlet { sigma, omega0 } => {
                let half = (MORLET_HALF_WIDTH * sigma * a / dt).ceil() as i64;
                let taps: Vec<Complex64> = (-half..=half)
                    .map(|j| morlet_value(j as f64 * dt / a, *sigma, *omega0))
                    .collect();
                (-half, taps)
            }
            WaveletKind::LimitKernel { n, .. } => {
                let schedule = self.schedule.as_ref().expect("limit kernel has a schedule").scaled(a)?;
                let kern = compose_cascade(&schedule, dt, self.eps_trunc)?;
                if kern.len() < *n + 2 {
                    return Err(under_resolved(a, kern.len()));
                }
                let d = kernel_derivative(&kern, *n)?;
                (0, d.taps().iter().map(|&x| Complex64::new(x, 0.0)).collect())
            }
        };
        if taps.len() < MIN_TAPS {
            return Err(under_resolved(a, taps.len()));
        }
        if let WaveletKind::Morlet { .. } = self.kind {
            let mean = taps.iter().sum::<Complex64>() / taps.len() as f64;
            taps.iter_mut().for_each(|z| *z -= mean);
        }
        let norm = (taps.iter().map(|z| z.norm_sqr()).sum::<f64>() * dt).sqrt();
        taps.iter_mut().for_each(|z| *z /= norm);
        Ok(ScaledWavelet { scale: a, offset, taps })
    }

    /// Frequencies `(lo, hi)` at unit scale between which all but `q` of the
    /// admissibility measure `|psi_hat|^2 / |w|` lies on each side.
    pub fn spectral_band(&self, q: f64) -> (f64, f64) {
        let (omegas, density) = admissibility_density(&self.unit.taps, self.dt);
        let total: f64 = density.iter().sum();
        let mut acc = 0.0;
        let mut lo = omegas[0];
        let mut hi = *omegas.last().unwrap();
        let mut found_lo = false;
        for (w, d) in omegas.iter().zip(&density) {
            acc += d;
            if !found_lo && acc >= q * total {
                lo = *w;
                found_lo = true;
            }
            if acc >= (1.0 - q) * total {
                hi = *w;
                break;
            }
        }
        (lo, hi)
    }
}

fn under_resolved(a: f64, taps: usize) -> Error {
    Error::UnderResolved {
        what: "wavelet",
        detail: format!("scale {a} yields only {taps} taps"),
    }
}

/// `|w|` against `|psi_hat(w)|^2 / |w|` folded over both signs, `w > 0`.
fn admissibility_density(taps: &[Complex64], dt: f64) -> (Vec<f64>, Vec<f64>) {
    let n = (16 * taps.len()).max(1 << 16).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[..taps.len()].copy_from_slice(taps);
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let dw = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    let half = n / 2;
    let mut omegas = Vec::with_capacity(half);
    let mut density = Vec::with_capacity(half);
    for k in 1..=half {
        let w = k as f64 * dw;
        let pos = (buf[k] * dt).norm_sqr();
        // Nyquist bin is its own mirror
        let neg = if k == half { 0.0 } else { (buf[n - k] * dt).norm_sqr() };
        omegas.push(w);
        density.push(0.5 * (pos + neg) / w * dw);
    }
    (omegas, density)
}

/// Resolution-of-identity constant of a sampled wavelet.
pub fn admissibility_constant(taps: &[Complex64], dt: f64) -> Result<f64> {
    let norm = (taps.iter().map(|z| z.norm_sqr()).sum::<f64>() * dt).sqrt();
    let mean = (taps.iter().sum::<Complex64>() * dt).norm();
    if !(norm > 0.0) || !(mean <= ADMISSIBLE_MEAN * norm) {
        return Err(Error::Admissibility(format!(
            "wavelet mean {mean:e} is not negligible against its norm {norm:e}"
        )));
    }
    let c: f64 = admissibility_density(taps, dt).1.iter().sum();
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Admissibility(format!("admissibility constant {c} is not finite and positive")));
    }
    Ok(c)
}

/// `n` log-spaced scales from `lo` to `hi`.
pub fn log_scales(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::validation("scales", "need 0 < lo < hi"));
    }
    if n < 2 {
        return Err(Error::validation("n_scales", "need at least two scales"));
    }
    let step = (hi / lo).ln() / (n - 1) as f64;
    Ok((0..n).map(|i| lo * (i as f64 * step).exp()).collect())
}

/// Scales covering the angular band `[w_lo, w_hi]` of a signal: the mother's
/// spectral band (tails `q`) is mapped onto it, clipped at the finest
/// resolvable scale.
pub fn band_scales(mother: &MotherWavelet, w_lo: f64, w_hi: f64, n: usize, q: f64) -> Result<Vec<f64>> {
    if !(w_lo > 0.0 && w_hi >= w_lo) {
        return Err(Error::validation("band", "need 0 < w_lo <= w_hi"));
    }
    let (xi_lo, xi_hi) = mother.spectral_band(q);
    let lo = (xi_lo / w_hi).max(mother.min_scale());
    log_scales(lo, xi_hi / w_lo, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CwtGrid {
    scales: Vec<f64>,
    dt: f64,
    t0: f64,
    /// one row per scale, one column per shift on the signal grid
    coefficients: Vec<Vec<Complex64>>,
}

impl CwtGrid {
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn shifts(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_shifts()).map(|i| self.t0 + i as f64 * self.dt)
    }

    pub fn n_shifts(&self) -> usize {
        self.coefficients.first().map_or(0, Vec::len)
    }

    pub fn row(&self, scale_index: usize) -> &[Complex64] {
        &self.coefficients[scale_index]
    }

    /// `sum |T|^2 a^-2 da db`, comparable to `C ||f||^2`.
    pub fn energy(&self) -> f64 {
        let widths = log_widths(&self.scales);
        self.coefficients
            .iter()
            .zip(&self.scales)
            .zip(&widths)
            .map(|((row, &a), &dl)| row.iter().map(|z| z.norm_sqr()).sum::<f64>() * dl / a * self.dt)
            .sum()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = io::csv_writer(path, &["a", "b", "re", "im"])?;
        for (row, &a) in self.coefficients.iter().zip(&self.scales) {
            for (i, z) in row.iter().enumerate() {
                let b = self.t0 + i as f64 * self.dt;
                io::write_row(&mut w, path, [io::num(a), io::num(b), io::num(z.re), io::num(z.im)])?;
            }
        }
        io::finish(w, path)
    }
}

/// Keeps only taps that can meet a signal of `len` samples.
fn clip_taps(w: &ScaledWavelet, len: usize) -> (i64, &[Complex64]) {
    let lo = -(len as i64 - 1);
    let hi = len as i64 - 1;
    let first = (lo - w.offset).max(0) as usize;
    let last = ((hi - w.offset + 1).max(0) as usize).min(w.taps.len());
    let first = first.min(last);
    (w.offset + first as i64, &w.taps[first..last])
}

pub fn cwt(signal: &SampledSignal, mother: &MotherWavelet, scales: &[f64]) -> Result<CwtGrid> {
    check_grid(signal, mother, scales)?;
    let n = signal.len();
    let dt = signal.dt();
    let f: Vec<Complex64> = signal.samples().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let coefficients = scales
        .par_iter()
        .map(|&a| {
            let w = mother.at_scale(a)?;
            let (offset, taps) = clip_taps(&w, n);
            let rev: Vec<Complex64> = taps.iter().rev().map(|z| z.conj()).collect();
            let c = convolve_complex(&f, &rev);
            let l = taps.len() as i64;
            // T[b] = sum_x f[x] conj(w[x - b - offset]) dt sits at c[b + offset + l - 1]
            Ok((0..n as i64)
                .map(|b| {
                    let j = b + offset + l - 1;
                    if j >= 0 && (j as usize) < c.len() {
                        c[j as usize] * dt
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect())
        })
        .collect::<Result<Vec<Vec<Complex64>>>>()?;
    Ok(CwtGrid {
        scales: scales.to_vec(),
        dt,
        t0: signal.t0(),
        coefficients,
    })
}

fn check_grid(signal: &SampledSignal, mother: &MotherWavelet, scales: &[f64]) -> Result<()> {
    if scales.is_empty() || scales.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::validation("scales", "scales must be positive"));
    }
    if (signal.dt() - mother.dt).abs() > 1e-12 * mother.dt {
        return Err(Error::GridMismatch(format!(
            "signal dt {} differs from wavelet dt {}",
            signal.dt(),
            mother.dt
        )));
    }
    Ok(())
}

/// Cell widths in `ln a` around each scale.
fn log_widths(scales: &[f64]) -> Vec<f64> {
    let n = scales.len();
    if n == 1 {
        return vec![1.0];
    }
    let l: Vec<f64> = scales.iter().map(|a| a.ln()).collect();
    (0..n)
        .map(|j| {
            if j == 0 {
                l[1] - l[0]
            } else if j == n - 1 {
                l[n - 1] - l[n - 2]
            } else {
                0.5 * (l[j + 1] - l[j - 1])
            }
        })
        .collect()
}

pub fn icwt(grid: &CwtGrid, mother: &MotherWavelet) -> Result<SampledSignal> {
    if grid.scales.len() < 2 {
        return Err(Error::validation("scales", "inversion needs at least two scales"));
    }
    if (grid.dt - mother.dt).abs() > 1e-12 * mother.dt {
        return Err(Error::GridMismatch("grid and wavelet sampled at different dt".into()));
    }
    let c = mother.admissibility;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Admissibility(format!("admissibility constant {c}")));
    }
    let n = grid.n_shifts();
    let dt = grid.dt;
    let widths = log_widths(&grid.scales);
    let parts = grid
        .scales
        .par_iter()
        .zip(&grid.coefficients)
        .zip(&widths)
        .map(|((&a, row), &dl)| {
            let w = mother.at_scale(a)?;
            let (offset, taps) = clip_taps(&w, n);
            let r = convolve_complex(row, taps);
            // da / a^2 with da = a dl
            let weight = dl / a * dt;
            Ok((0..n as i64)
                .map(|t| {
                    let j = t - offset;
                    if j >= 0 && (j as usize) < r.len() {
                        r[j as usize].re * weight
                    } else {
                        0.0
                    }
                })
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![0.0; n];
    for part in &parts {
        for (o, x) in out.iter_mut().zip(part) {
            *o += x;
        }
    }
    out.iter_mut().for_each(|x| *x /= c);
    SampledSignal::new(dt, grid.t0, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{generate, SignalSpec};
    use std::f64::consts::{PI, SQRT_2};

    fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    fn tone(freq_hz: f64, duration: f64, dt: f64) -> SampledSignal {
        let n = (duration / dt).round() as usize;
        let x = (0..n).map(|i| (2.0 * PI * freq_hz * i as f64 * dt).sin()).collect();
        SampledSignal::new(dt, 0.0, x).unwrap()
    }

    #[test]
    fn morlet_examples() {
        let sigma = 0.7;
        let v = morlet_value(0.0, sigma, 5.0);
        assert_eq!(v.re, 1.0 / (PI * sigma * sigma).sqrt());
        assert_eq!(v.im, 0.0);
        let m = morlet(sigma, 5.0, 0.01).unwrap();
        let taps = &m.unit().taps;
        let n = taps.len();
        for j in 0..n / 2 {
            assert!((taps[j].norm() - taps[n - 1 - j].norm()).abs() < 1e-12);
        }
        let mean = taps.iter().sum::<Complex64>() / n as f64;
        assert!(mean.norm() <= 1e-12);
        let l2 = (taps.iter().map(|z| z.norm_sqr()).sum::<f64>() * 0.01).sqrt();
        assert!((l2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn limit_kernel_mother() {
        let p = ScaleParams::new(SQRT_2, 5, 1.0).unwrap();
        let m = limit_kernel_wavelet(&p, 1, 0.001).unwrap();
        let taps = &m.unit().taps;
        let mass = (taps.iter().sum::<Complex64>() * 0.001).norm();
        assert!(mass <= 1e-4);
        let l2 = (taps.iter().map(|z| z.norm_sqr()).sum::<f64>() * 0.001).sqrt();
        assert!((l2 - 1.0).abs() < 1e-9);
        assert!(taps.iter().all(|z| z.im == 0.0));
        assert!(limit_kernel_wavelet(&p, 3, 0.001).is_err());
    }

    #[test]
    fn inadmissible_wavelet() {
        let bump = vec![Complex64::new(1.0, 0.0); 16];
        assert!(matches!(admissibility_constant(&bump, 0.1), Err(Error::Admissibility(_))));
    }

    #[test]
    fn under_resolved_scale() {
        let m = morlet(1.0, 5.0, 0.01).unwrap();
        let sig = tone(1.0, 2.0, 0.01);
        assert!(matches!(cwt(&sig, &m, &[1e-4]), Err(Error::UnderResolved { .. })));
    }

    #[test]
    fn zero_signal_and_linearity() {
        let dt = 0.01;
        let m = morlet(1.0, 5.0, dt).unwrap();
        let scales = log_scales(0.1, 2.0, 6).unwrap();
        let zero = SampledSignal::zeros(dt, 0.0, 800).unwrap();
        let g = cwt(&zero, &m, &scales).unwrap();
        assert!((0..6).all(|i| g.row(i).iter().all(|z| z.norm() == 0.0)));
        assert!(icwt(&g, &m).unwrap().samples().iter().all(|&x| x == 0.0));

        let f = tone(0.7, 8.0, dt);
        let h = tone(2.3, 8.0, dt);
        let (alpha, beta) = (1.7, -0.4);
        let mix = f.with_samples(f.samples().iter().zip(h.samples()).map(|(x, y)| alpha * x + beta * y).collect()).unwrap();
        let (gf, gh, gm) = (cwt(&f, &m, &scales).unwrap(), cwt(&h, &m, &scales).unwrap(), cwt(&mix, &m, &scales).unwrap());
        for i in 0..scales.len() {
            for b in 0..800 {
                let expect = gf.row(i)[b] * alpha + gh.row(i)[b] * beta;
                assert!((gm.row(i)[b] - expect).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn morlet_ridge_scale() {
        let dt = 0.001;
        let m = morlet(1.0, 5.0, dt).unwrap();
        let sig = tone(2.0, 12.0, dt);
        let scales = log_scales(0.1, 1.6, 200).unwrap();
        let g = cwt(&sig, &m, &scales).unwrap();
        // mean modulus away from the edges
        let power: Vec<f64> = (0..scales.len())
            .map(|i| g.row(i)[4000..8000].iter().map(|z| z.norm()).sum::<f64>())
            .collect();
        let best = power.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let expect = 5.0 / (2.0 * PI * 2.0);
        assert!((expect - 0.3979).abs() < 1e-4);
        let step = (scales[1] / scales[0]).ln();
        assert!((scales[best] / expect).ln().abs() <= 2.0 * step, "{}", scales[best]);
    }

    #[test]
    fn dilation_covariance() {
        let dt = 0.001;
        let m = morlet(1.0, 5.0, dt).unwrap();
        let s = 2.0;
        let f = generate(&SignalSpec::composite(8.0, dt)).unwrap();
        let stretched = crate::signals::rescale_time(&f, s).unwrap().resample(dt, 0.0, 2 * f.len() - 1).unwrap();
        let scales = [0.2, 0.5, 1.0];
        let g = cwt(&f, &m, &scales).unwrap();
        let scaled: Vec<f64> = scales.iter().map(|a| a * s).collect();
        let gs = cwt(&stretched, &m, &scaled).unwrap();
        for i in 0..scales.len() {
            let peak = g.row(i).iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
            for b in (0..f.len()).step_by(7) {
                let dev = (gs.row(i)[2 * b] - g.row(i)[b] * s.sqrt()).norm();
                assert!(dev <= 0.01 * peak * s.sqrt(), "scale {} b {b}", scales[i]);
            }
        }
    }

    #[test]
    fn energy_matches_norm() {
        let dt = 0.002;
        for m in [
            morlet(1.0, 5.0, dt).unwrap(),
            limit_kernel_wavelet(&ScaleParams::new(SQRT_2, 5, 1.0).unwrap(), 1, dt).unwrap(),
        ] {
            // a windowed tone so that the transform sees the whole signal
            let n = 20000;
            let x: Vec<f64> = (0..n)
                .map(|i| {
                    let t = i as f64 * dt - 20.0;
                    (-t * t / 18.0).exp() * (3.0 * t).sin()
                })
                .collect();
            let f = SampledSignal::new(dt, 0.0, x).unwrap();
            let scales = band_scales(&m, 1.5, 6.0, 48, 1e-3).unwrap();
            let g = cwt(&f, &m, &scales).unwrap();
            let norm2: f64 = f.samples().iter().map(|v| v * v).sum::<f64>() * dt;
            let ratio = g.energy() / (m.admissibility() * norm2);
            assert!((ratio - 1.0).abs() <= 0.1, "{} ratio {ratio}", m.name());
        }
    }

    #[test]
    fn inversion_of_in_band_tone() {
        let dt = 0.001;
        let m = morlet(1.0, 5.0, dt).unwrap();
        let f = tone(1.0, 20.0, dt);
        let w = 2.0 * PI;
        let scales = band_scales(&m, w, w, 32, 5e-3).unwrap();
        let r = icwt(&cwt(&f, &m, &scales).unwrap(), &m).unwrap();
        let inner = 5000..15000;
        let e = rel_l2(&r.samples()[inner.clone()], &f.samples()[inner]);
        assert!(e <= 0.05, "rel_l2 {e}");
    }

    #[test]
    fn more_scales_reconstruct_better() {
        let dt = 0.001;
        let m = morlet(1.0, 5.0, dt).unwrap();
        let spec = SignalSpec::composite(16.0, dt);
        let f = generate(&spec).unwrap();
        let (lo, hi) = spec.angular_band().unwrap();
        let errs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let scales = band_scales(&m, lo, hi, n, 5e-3).unwrap();
                let r = icwt(&cwt(&f, &m, &scales).unwrap(), &m).unwrap();
                rel_l2(&r.samples()[5200..10800], &f.samples()[5200..10800])
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn coefficient_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cwt.csv");
        let m = morlet(1.0, 5.0, 0.01).unwrap();
        let g = cwt(&tone(1.0, 1.0, 0.01), &m, &[0.2, 0.4]).unwrap();
        g.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("a,b,re,im\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 100);
    }
}
