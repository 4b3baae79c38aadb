//! Uniformly sampled signals, test-signal generation and time rescaling.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io;

/// Default sample spacing for the experiments, in seconds.
pub const DEFAULT_DT: f64 = 0.001;

/// A real signal sampled every `dt` seconds starting at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    dt: f64,
    t0: f64,
    samples: Vec<f64>,
}

impl SampledSignal {
    pub fn new(dt: f64, t0: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::validation("dt", format!("must be positive and finite, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::validation("t0", "must be finite"));
        }
        if samples.is_empty() {
            return Err(Error::validation("samples", "signal must have at least one sample"));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::validation("samples", format!("sample {i} is not finite")));
        }
        Ok(SampledSignal { dt, t0, samples })
    }

    /// All-zero signal on the given grid.
    pub fn zeros(dt: f64, t0: f64, len: usize) -> Result<Self> {
        Self::new(dt, t0, vec![0.0; len])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `dt * len`, no hidden padding.
    pub fn duration(&self) -> f64 {
        self.dt * self.samples.len() as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |i| self.time(i))
    }

    /// Same grid, different values. Values are validated.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != self.samples.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                self.samples.len(),
                samples.len()
            )));
        }
        Self::new(self.dt, self.t0, samples)
    }

    pub fn negated(&self) -> Self {
        SampledSignal {
            dt: self.dt,
            t0: self.t0,
            samples: self.samples.iter().map(|x| -x).collect(),
        }
    }

    /// True when both signals share `dt`, `t0` and length.
    pub fn same_grid(&self, other: &SampledSignal) -> bool {
        self.dt == other.dt && self.t0 == other.t0 && self.len() == other.len()
    }

    pub(crate) fn check_same_grid(&self, other: &SampledSignal) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(dt={}, t0={}, n={}) vs (dt={}, t0={}, n={})",
                self.dt,
                self.t0,
                self.len(),
                other.dt,
                other.t0,
                other.len()
            )))
        }
    }

    /// Linear interpolation at fractional sample position `pos`, clamped to
    /// the first/last sample outside the grid.
    pub fn at_position(&self, pos: f64) -> f64 {
        let last = self.samples.len() - 1;
        if pos <= 0.0 {
            return self.samples[0];
        }
        let i = pos.floor() as usize;
        if i >= last {
            return self.samples[last];
        }
        let frac = pos - i as f64;
        let a = self.samples[i];
        if frac == 0.0 {
            return a;
        }
        a + frac * (self.samples[i + 1] - a)
    }

    /// Linear interpolation at time `t`.
    pub fn interpolate(&self, t: f64) -> f64 {
        self.at_position((t - self.t0) / self.dt)
    }

    /// Samples `[start, end)` as a new signal.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::validation(
                "window",
                format!("invalid sample range {start}..{end} of {}", self.len()),
            ));
        }
        Self::new(self.dt, self.time(start), self.samples[start..end].to_vec())
    }

    /// Samples whose times fall in `[t_start, t_end]`.
    pub fn window(&self, t_start: f64, t_end: f64) -> Result<Self> {
        let start = ((t_start - self.t0) / self.dt).ceil().max(0.0) as usize;
        let end = (((t_end - self.t0) / self.dt).floor() as i64 + 1).clamp(0, self.len() as i64) as usize;
        self.slice(start, end)
    }

    /// Resample onto a new uniform grid by linear interpolation.
    pub fn resample(&self, dt: f64, t0: f64, len: usize) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::validation("dt", "must be positive"));
        }
        let ratio = dt / self.dt;
        let offset = (t0 - self.t0) / self.dt;
        let samples = (0..len)
            .map(|j| self.at_position(offset + j as f64 * ratio))
            .collect();
        Self::new(dt, t0, samples)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = io::csv_writer(path, &["t", "value"])?;
        for (i, &x) in self.samples.iter().enumerate() {
            io::write_row(&mut w, path, [io::num(self.time(i)), io::num(x)])?;
        }
        io::finish(w, path)
    }

    /// Reads a `t,value` file. The grid must be uniform to within 1e-6 dt.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| io::csv_err(path, e))?;
        let headers = reader.headers().map_err(|e| io::csv_err(path, e))?.clone();
        if headers.len() < 2 || headers.get(0) != Some("t") || headers.get(1) != Some("value") {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: "expected header `t,value`".into(),
            });
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| io::csv_err(path, e))?;
            let line = line + 2;
            times.push(io::parse_f64(path, rec.get(0).unwrap_or(""), line)?);
            values.push(io::parse_f64(path, rec.get(1).unwrap_or(""), line)?);
        }
        if times.len() < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: "need at least two samples to infer dt".into(),
            });
        }
        let t0 = times[0];
        let dt = (times[times.len() - 1] - t0) / (times.len() - 1) as f64;
        for (i, &t) in times.iter().enumerate() {
            if (t - (t0 + i as f64 * dt)).abs() > 1e-6 * dt {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("non-uniform sampling at line {}", i + 2),
                });
            }
        }
        Self::new(dt, t0, values)
    }
}

/// Temporal scaling `t' = s t`: same values, `dt' = s dt`, `t0' = s t0`.
pub fn rescale_time(signal: &SampledSignal, s: f64) -> Result<SampledSignal> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::validation("s", format!("scale factor must be positive, got {s}")));
    }
    SampledSignal::new(signal.dt * s, signal.t0 * s, signal.samples.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    Sine,
    CompositeSine,
    CustomSum,
}

impl SignalKind {
    pub fn name(self) -> &'static str {
        match self {
            SignalKind::Sine => "sine",
            SignalKind::CompositeSine => "composite-sine",
            SignalKind::CustomSum => "custom-sum",
        }
    }
}

/// One term `amplitude * sin(2 pi frequency_hz t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineComponent {
    pub amplitude: f64,
    pub frequency_hz: f64,
    pub phase: f64,
}

impl SineComponent {
    pub fn new(amplitude: f64, frequency_hz: f64, phase: f64) -> Self {
        SineComponent {
            amplitude,
            frequency_hz,
            phase,
        }
    }

    pub fn angular_frequency(&self) -> f64 {
        2.0 * PI * self.frequency_hz
    }
}

/// Recipe for a sum-of-sines test signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub components: Vec<SineComponent>,
    pub duration: f64,
    pub dt: f64,
}

impl SignalSpec {
    /// `sin(t)`: unit amplitude at 1 rad/s.
    pub fn unit_sine(duration: f64, dt: f64) -> Self {
        SignalSpec {
            kind: SignalKind::Sine,
            components: vec![SineComponent::new(1.0, 1.0 / (2.0 * PI), 0.0)],
            duration,
            dt,
        }
    }

    /// `sin(2 pi 0.5 t) + 0.5 sin(2 pi 2 t) + 0.3 sin(2 pi 8 t)`.
    pub fn composite(duration: f64, dt: f64) -> Self {
        SignalSpec {
            kind: SignalKind::CompositeSine,
            components: vec![
                SineComponent::new(1.0, 0.5, 0.0),
                SineComponent::new(0.5, 2.0, 0.0),
                SineComponent::new(0.3, 8.0, 0.0),
            ],
            duration,
            dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::validation("duration", "must be positive and finite"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::validation("dt", "must be positive and finite"));
        }
        if self.dt > self.duration {
            return Err(Error::validation("dt", "must not exceed the duration"));
        }
        match self.kind {
            SignalKind::Sine if self.components.len() != 1 => {
                return Err(Error::validation("components", "a sine has exactly one component"));
            }
            SignalKind::CompositeSine if self.components.is_empty() => {
                return Err(Error::validation("components", "a composite sine needs components"));
            }
            _ => {}
        }
        for c in &self.components {
            if !c.amplitude.is_finite() || !c.phase.is_finite() {
                return Err(Error::validation("components", "amplitude and phase must be finite"));
            }
            if !(c.frequency_hz >= 0.0 && c.frequency_hz.is_finite()) {
                return Err(Error::validation("components", "frequency must be finite and >= 0"));
            }
            if c.frequency_hz > 0.0 && self.dt >= 1.0 / (8.0 * c.frequency_hz) {
                return Err(Error::validation(
                    "dt",
                    format!(
                        "{} s undersamples the {} Hz component (need < period/8)",
                        self.dt, c.frequency_hz
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.duration / self.dt).round() as usize).max(1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Range of angular frequencies (rad/s) present, if any component is nonzero.
    pub fn angular_band(&self) -> Option<(f64, f64)> {
        self.components
            .iter()
            .filter(|c| c.amplitude != 0.0 && c.frequency_hz > 0.0)
            .map(|c| c.angular_frequency())
            .fold(None, |acc, w| match acc {
                None => Some((w, w)),
                Some((lo, hi)) => Some((lo.min(w), hi.max(w))),
            })
    }

    pub fn scaled_frequencies(&self, factor: f64) -> SignalSpec {
        let mut out = self.clone();
        for c in &mut out.components {
            c.frequency_hz *= factor;
        }
        out
    }
}

/// Evaluates the spec on `t0 = 0, dt, ..` for `round(duration / dt)` samples.
pub fn generate(spec: &SignalSpec) -> Result<SampledSignal> {
    spec.validate()?;
    let n = spec.len();
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 * spec.dt;
            spec.components
                .iter()
                .map(|c| c.amplitude * (c.angular_frequency() * t + c.phase).sin())
                .sum()
        })
        .collect();
    SampledSignal::new(spec.dt, 0.0, samples)
}
