//! Spiking wavelets built from pairs of LIF scales.
//!
//! Two neighbouring time constants give the difference kernel
//! `kappa = (g(mu_slow) - g(mu_fast)) / C` with `C = (mu_slow - mu_fast) / (mu_fast mu_slow)`,
//! a zero-mean band-pass filter with `kappa(0) = -1`. Spike trains convolved with
//! it give the band signals `M(t; mu)`. The cheaper read-out bins the spikes
//! directly: `W = (n_pos - n_neg) / sqrt(mu)`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io;
use crate::neuron::{Polarity, SpikeTrain, TwoChannelEncoding};
use crate::scale_space::{exponential_taps, DiscreteKernel, TimeConstantSchedule};
use crate::signals::SampledSignal;

/// Default coefficient bin width in samples.
pub const DEFAULT_BIN_STEPS: usize = 50;

/// Time constants closer than this (relative) are treated as the same scale.
const SAME_SCALE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceKernel {
    mu_fast: f64,
    mu_slow: f64,
    normalizer: f64,
    kernel: DiscreteKernel,
}

impl DifferenceKernel {
    pub fn mu_fast(&self) -> f64 {
        self.mu_fast
    }

    pub fn mu_slow(&self) -> f64 {
        self.mu_slow
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn kernel(&self) -> &DiscreteKernel {
        &self.kernel
    }

    /// First sample time at which the kernel is non-negative.
    pub fn zero_crossing(&self) -> Option<f64> {
        let dt = self.kernel.dt();
        self.kernel.taps().iter().position(|&x| x >= 0.0).map(|i| i as f64 * dt)
    }
}

pub fn difference_kernel(mu_k: f64, mu_k1: f64, dt: f64, eps_trunc: f64) -> Result<DifferenceKernel> {
    if !(mu_k > 0.0 && mu_k1.is_finite()) {
        return Err(Error::validation("mu", "time constants must be positive and finite"));
    }
    if (mu_k1 - mu_k).abs() <= SAME_SCALE_RTOL * mu_k1.max(mu_k) {
        return Err(Error::DegenerateKernel(format!(
            "time constants {mu_k} and {mu_k1} coincide, normalizer vanishes"
        )));
    }
    if mu_k > mu_k1 {
        return Err(Error::validation("mu", "fast time constant must be below the slow one"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::validation("dt", "must be positive"));
    }
    if !(eps_trunc > 0.0 && eps_trunc < 1.0) {
        return Err(Error::validation("eps_trunc", "must lie in (0, 1)"));
    }
    if dt >= mu_k {
        return Err(Error::UnderResolved {
            what: "difference kernel",
            detail: format!("dt = {dt} is not below mu = {mu_k}"),
        });
    }
    let normalizer = (mu_k1 - mu_k) / (mu_k * mu_k1);
    // the residual mass is bounded by the slow tail divided by the normalizer
    let tail = eps_trunc * normalizer.min(1.0);
    let n = (-mu_k1 * tail.ln() / dt).ceil().max(2.0) as usize;
    let slow = exponential_taps(mu_k1, dt, n);
    let fast = exponential_taps(mu_k, dt, n);
    let mut taps: Vec<f64> = slow.iter().zip(&fast).map(|(s, f)| (s - f) / normalizer).collect();
    // 1/mu_slow - 1/mu_fast is exactly -normalizer; avoid the cancellation
    taps[0] = -1.0;
    Ok(DifferenceKernel {
        mu_fast: mu_k,
        mu_slow: mu_k1,
        normalizer,
        kernel: DiscreteKernel::new(dt, taps)?,
    })
}

/// Distinct time constants of a schedule in increasing order, each with the
/// first (1-based) channel that carries it.
pub fn distinct_scales(schedule: &TimeConstantSchedule) -> Vec<(usize, f64)> {
    let mut order: Vec<(usize, f64)> = schedule.mus().iter().enumerate().map(|(i, &m)| (i + 1, m)).collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(order.len());
    for (k, mu) in order {
        match out.last() {
            Some(&(_, prev)) if mu - prev <= SAME_SCALE_RTOL * mu => {}
            _ => out.push((k, mu)),
        }
    }
    out
}

/// Difference kernels for each pair of neighbouring distinct scales, paired
/// with the channel whose spikes they filter (the faster one).
pub fn difference_kernels(
    schedule: &TimeConstantSchedule,
    dt: f64,
    eps_trunc: f64,
) -> Result<Vec<(usize, DifferenceKernel)>> {
    distinct_scales(schedule)
        .windows(2)
        .map(|w| Ok((w[0].0, difference_kernel(w[0].1, w[1].1, dt, eps_trunc)?)))
        .collect()
}

/// Stamps a kernel copy at every spike (snapped to the nearest sample).
pub fn reconstruct_channel(train: &SpikeTrain, kernel: &DifferenceKernel, t0: f64, len: usize) -> SampledSignal {
    let dt = kernel.kernel.dt();
    let taps = kernel.kernel.taps();
    let mut out = vec![0.0; len];
    for &t in train.times() {
        let start = ((t - t0) / dt).round() as i64;
        let from = (-start).max(0) as usize;
        for (j, &tap) in taps.iter().enumerate().skip(from) {
            let idx = start + j as i64;
            if idx >= len as i64 {
                break;
            }
            out[idx as usize] += tap;
        }
    }
    SampledSignal::new(dt, t0, out).expect("finite kernel taps")
}

/// `M = M+ - M-`.
pub fn polarity_combine(pos: &SampledSignal, neg: &SampledSignal) -> Result<SampledSignal> {
    pos.check_same_grid(neg)?;
    let m = pos.samples().iter().zip(neg.samples()).map(|(p, n)| p - n).collect();
    pos.with_samples(m)
}

/// Band signals `M(t; mu_k)` from the difference-kernel path.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleBandReconstruction {
    pub mus: Vec<f64>,
    pub per_scale: Vec<SampledSignal>,
    pub combined: SampledSignal,
}

impl ScaleBandReconstruction {
    pub fn new(mus: Vec<f64>, per_scale: Vec<SampledSignal>) -> Result<Self> {
        let first = per_scale
            .first()
            .ok_or_else(|| Error::validation("per_scale", "at least one band is required"))?;
        if mus.len() != per_scale.len() {
            return Err(Error::validation("mus", "one time constant per band"));
        }
        for band in &per_scale[1..] {
            first.check_same_grid(band)?;
        }
        let combined = first.with_samples(weighted_sum(&per_scale, &vec![1.0; per_scale.len()]))?;
        Ok(ScaleBandReconstruction {
            mus,
            per_scale,
            combined,
        })
    }
}

/// Runs the difference-kernel read-out over an encoding.
pub fn reconstruct_bands(encoding: &TwoChannelEncoding, eps_trunc: f64) -> Result<ScaleBandReconstruction> {
    let kernels = difference_kernels(encoding.schedule(), encoding.dt(), eps_trunc)?;
    if kernels.is_empty() {
        return Err(Error::validation("k", "at least two distinct time constants are needed"));
    }
    let (t0, len) = (encoding.t0(), encoding.signal_len());
    let bands = kernels
        .par_iter()
        .map(|(k, kern)| {
            let pos = reconstruct_channel(encoding.train(*k, Polarity::Positive), kern, t0, len);
            let neg = reconstruct_channel(encoding.train(*k, Polarity::Negative), kern, t0, len);
            polarity_combine(&pos, &neg)
        })
        .collect::<Result<Vec<_>>>()?;
    ScaleBandReconstruction::new(kernels.iter().map(|(_, k)| k.mu_fast).collect(), bands)
}

/// Binned spike-count coefficients, one column per LIF scale.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientGrid {
    bin_width: f64,
    scale_mus: Vec<f64>,
    /// row-major `[bin][scale]`
    values: Vec<f64>,
    t0: f64,
    dt: f64,
    signal_len: usize,
}

impl CoefficientGrid {
    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn scale_mus(&self) -> &[f64] {
        &self.scale_mus
    }

    pub fn n_scales(&self) -> usize {
        self.scale_mus.len()
    }

    pub fn n_bins(&self) -> usize {
        self.values.len() / self.scale_mus.len()
    }

    /// `k` is 1-based.
    pub fn value(&self, bin: usize, k: usize) -> f64 {
        self.values[bin * self.n_scales() + (k - 1)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bin_center(&self, bin: usize) -> f64 {
        self.t0 + (bin as f64 + 0.5) * self.bin_width
    }

    /// Each coefficient column as a signal on the original grid, linearly
    /// interpolated between bin centres and held flat beyond the outer ones.
    pub fn band_signals(&self) -> Vec<SampledSignal> {
        let nb = self.n_bins();
        (1..=self.n_scales())
            .map(|k| {
                let col: Vec<f64> = (0..nb).map(|b| self.value(b, k)).collect();
                let samples = (0..self.signal_len)
                    .map(|i| {
                        let x = (i as f64 * self.dt) / self.bin_width - 0.5;
                        if x <= 0.0 {
                            col[0]
                        } else if x >= (nb - 1) as f64 {
                            col[nb - 1]
                        } else {
                            let j = x.floor() as usize;
                            let frac = x - j as f64;
                            col[j] + frac * (col[j + 1] - col[j])
                        }
                    })
                    .collect();
                SampledSignal::new(self.dt, self.t0, samples).expect("finite coefficients")
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = io::csv_writer(path, &["t_bin", "k", "mu", "w"])?;
        for b in 0..self.n_bins() {
            for k in 1..=self.n_scales() {
                io::write_row(
                    &mut w,
                    path,
                    [
                        io::num(self.bin_center(b)),
                        k.to_string(),
                        io::num(self.scale_mus[k - 1]),
                        io::num(self.value(b, k)),
                    ],
                )?;
            }
        }
        io::finish(w, path)
    }
}

/// Offsets within this fraction of a bin count as lying on a boundary.
const BOUNDARY_TOL: f64 = 1e-9;

/// Bin holding offset `x` (in bin widths); boundaries go to the earlier bin.
fn bin_index(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= BOUNDARY_TOL {
        (r as usize).saturating_sub(1)
    } else {
        x.floor().max(0.0) as usize
    }
}

fn bin_count(span: f64) -> usize {
    let r = span.round();
    let n = if (span - r).abs() <= BOUNDARY_TOL { r } else { span.ceil() };
    (n as usize).max(1)
}

pub fn spike_count_coefficients(encoding: &TwoChannelEncoding, bin_width: f64) -> Result<CoefficientGrid> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::validation("bin_width", "must be positive"));
    }
    let dt = encoding.dt();
    if bin_width < dt * (1.0 - 1e-12) {
        return Err(Error::validation("bin_width", "must not be shorter than the sample step"));
    }
    let t0 = encoding.t0();
    let span = (encoding.signal_len() - 1) as f64 * dt / bin_width;
    let nb = bin_count(span);
    let mus = encoding.schedule().mus().to_vec();
    let nk = mus.len();
    let mut counts = vec![0i64; nb * nk];
    for train in encoding.trains() {
        let sign = i64::from(train.polarity().sign());
        let col = train.scale_index() - 1;
        for &t in train.times() {
            let b = bin_index((t - t0) / bin_width).min(nb - 1);
            counts[b * nk + col] += sign;
        }
    }
    let values = counts
        .iter()
        .enumerate()
        .map(|(i, &n)| n as f64 / mus[i % nk].sqrt())
        .collect();
    Ok(CoefficientGrid {
        bin_width,
        scale_mus: mus,
        values,
        t0,
        dt,
        signal_len: encoding.signal_len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconstructionMode {
    BandSum,
    Calibrated,
}

#[derive(Debug, Clone, Copy)]
pub enum Bands<'a> {
    Kernel(&'a ScaleBandReconstruction),
    Counts(&'a CoefficientGrid),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub signal: SampledSignal,
    pub weights: Vec<f64>,
}

/// Combines bands into one signal.
///
/// In calibrated mode the per-band weights are the least-squares fit to
/// `calibration`, which may cover any grid-aligned sub-window of the bands.
pub fn reconstruct_signal(
    bands: Bands<'_>,
    mode: ReconstructionMode,
    calibration: Option<&SampledSignal>,
) -> Result<Reconstruction> {
    let owned;
    let per_scale: &[SampledSignal] = match bands {
        Bands::Kernel(b) => &b.per_scale,
        Bands::Counts(g) => {
            owned = g.band_signals();
            &owned
        }
    };
    let weights = match mode {
        ReconstructionMode::BandSum => vec![1.0; per_scale.len()],
        ReconstructionMode::Calibrated => {
            let target = calibration.ok_or_else(|| {
                Error::validation("calibration", "calibrated mode needs a calibration signal")
            })?;
            least_squares_weights(per_scale, target)?
        }
    };
    let signal = per_scale[0].with_samples(weighted_sum(per_scale, &weights))?;
    Ok(Reconstruction { signal, weights })
}

fn weighted_sum(bands: &[SampledSignal], weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; bands[0].len()];
    for (band, &w) in bands.iter().zip(weights) {
        for (o, &x) in out.iter_mut().zip(band.samples()) {
            *o += w * x;
        }
    }
    out
}

fn least_squares_weights(bands: &[SampledSignal], target: &SampledSignal) -> Result<Vec<f64>> {
    let grid = &bands[0];
    let rel = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
    if !rel(grid.dt(), target.dt()) {
        return Err(Error::GridMismatch(format!(
            "calibration dt {} differs from band dt {}",
            target.dt(),
            grid.dt()
        )));
    }
    let offset = (target.t0() - grid.t0()) / grid.dt();
    let start = offset.round();
    if (offset - start).abs() > 1e-6 || start < 0.0 || start as usize + target.len() > grid.len() {
        return Err(Error::GridMismatch(
            "calibration signal must lie on the band grid and within its window".into(),
        ));
    }
    let start = start as usize;
    let n = bands.len();
    let mut ata = DMatrix::<f64>::zeros(n, n);
    let mut aty = DVector::<f64>::zeros(n);
    for (i, &y) in target.samples().iter().enumerate() {
        let idx = start + i;
        for a in 0..n {
            let xa = bands[a].samples()[idx];
            aty[a] += xa * y;
            for b in a..n {
                ata[(a, b)] += xa * bands[b].samples()[idx];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            ata[(a, b)] = ata[(b, a)];
        }
    }
    let scale = (0..n).map(|i| ata[(i, i)]).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    // minimum-norm solution, coincident bands share their weight
    let w = ata
        .svd(true, true)
        .solve(&aty, 1e-12 * scale)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(w.iter().copied().collect())
}
