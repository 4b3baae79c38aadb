//! Error metrics, covariance and admissibility checks, and the method
//! comparison runner.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::classical_wavelet::{band_scales, cwt, icwt, limit_kernel_wavelet, morlet, ScaledWavelet};
use crate::error::{Error, Result};
use crate::io;
use crate::neuron::{covariance_probe, rescale_to_same_dt, two_channel_encode, NeuronConfig};
use crate::scale_space::{compose_cascade, scale_space_transform, time_constants, DiscreteKernel, ScaleParams};
use crate::signals::{generate, SampledSignal, SignalSpec};
use crate::spiking_wavelet::{
    reconstruct_signal, spike_count_coefficients, Bands, ReconstructionMode, DEFAULT_BIN_STEPS,
};

/// Tail fraction of the wavelet spectrum left outside the baseline scale grid.
pub const BASELINE_SPECTRAL_TAIL: f64 = 5e-3;
pub const DEFAULT_N_SCALES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub rmse: f64,
    /// `None` when the reference has zero norm over the window.
    pub rel_l2: Option<f64>,
    pub max_abs: f64,
}

pub fn error_report(reference: &SampledSignal, candidate: &SampledSignal, skip_transient: f64) -> Result<ErrorReport> {
    reference.check_same_grid(candidate)?;
    if !(skip_transient >= 0.0) {
        return Err(Error::validation("skip_transient", "must be non-negative"));
    }
    if skip_transient >= reference.duration() && skip_transient > 0.0 {
        return Err(Error::validation("skip_transient", "must be shorter than the signal"));
    }
    let start = ((skip_transient / reference.dt()) * (1.0 - 1e-12)).ceil() as usize;
    let r = &reference.samples()[start..];
    let c = &candidate.samples()[start..];
    let mut sq = 0.0;
    let mut ref_sq = 0.0;
    let mut max_abs: f64 = 0.0;
    for (x, y) in r.iter().zip(c) {
        let d = y - x;
        sq += d * d;
        ref_sq += x * x;
        max_abs = max_abs.max(d.abs());
    }
    Ok(ErrorReport {
        rmse: (sq / r.len() as f64).sqrt(),
        rel_l2: (ref_sq > 0.0).then(|| (sq / ref_sq).sqrt()),
        max_abs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityCheck {
    pub mass: f64,
    pub l2: f64,
    pub pass: bool,
}

fn admissibility_from(mass: f64, l2: f64) -> AdmissibilityCheck {
    AdmissibilityCheck {
        mass,
        l2,
        pass: mass.abs() <= 1e-4 && (l2 - 1.0).abs() <= 1e-6,
    }
}

pub fn verify_admissibility(kernel: &DiscreteKernel) -> AdmissibilityCheck {
    admissibility_from(kernel.mass(), kernel.l2_norm())
}

/// Same check for a sampled (possibly complex) wavelet; `mass` is `|sum psi dt|`.
pub fn verify_wavelet_admissibility(wavelet: &ScaledWavelet, dt: f64) -> AdmissibilityCheck {
    let mass = (wavelet.taps.iter().sum::<Complex64>() * dt).norm();
    let l2 = (wavelet.taps.iter().map(|z| z.norm_sqr()).sum::<f64>() * dt).sqrt();
    admissibility_from(mass, l2)
}

/// One row per `(s, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceRow {
    pub s: f64,
    pub k: usize,
    pub mu: f64,
    /// sub-threshold membrane, `max |L'(s t) - L(t)|`
    pub trace_dev: f64,
    /// same at half the sample step
    pub trace_dev_half_dt: f64,
    /// full cascade smoothing of the signal, shared by all rows of one `s`
    pub smoothing_dev: f64,
    pub count_pos: usize,
    pub count_neg: usize,
    pub count_delta_pos: i64,
    pub count_delta_neg: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceTable {
    pub rows: Vec<CovarianceRow>,
}

impl CovarianceTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header = [
            "s",
            "k",
            "mu",
            "trace_dev",
            "trace_dev_half_dt",
            "smoothing_dev",
            "count_pos",
            "count_neg",
            "count_delta_pos",
            "count_delta_neg",
        ];
        let mut w = io::csv_writer(path, &header)?;
        for r in &self.rows {
            io::write_row(
                &mut w,
                path,
                [
                    io::num(r.s),
                    r.k.to_string(),
                    io::num(r.mu),
                    io::num(r.trace_dev),
                    io::num(r.trace_dev_half_dt),
                    io::num(r.smoothing_dev),
                    r.count_pos.to_string(),
                    r.count_neg.to_string(),
                    r.count_delta_pos.to_string(),
                    r.count_delta_neg.to_string(),
                ],
            )?;
        }
        io::finish(w, path)
    }
}

/// Compares `L(t)` with `L'(s t)` sampled on `L'`'s grid.
fn deviation_at_scaled_times(original: &SampledSignal, scaled: &SampledSignal, s: f64) -> f64 {
    let last = (scaled.len() - 1) as f64;
    original
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &u)| (i as f64 * s, u))
        .take_while(|(pos, _)| *pos <= last)
        .map(|(pos, u)| (scaled.at_position(pos) - u).abs())
        .fold(0.0, f64::max)
}

/// Checks the scale covariance of the neuron and smoothing paths under
/// `(t, mu) -> (s t, s mu)`. The signal is regenerated at half the step for
/// the convergence column.
pub fn verify_covariance(
    spec: &SignalSpec,
    params: &ScaleParams,
    theta: f64,
    s_values: &[f64],
    eps_trunc: f64,
) -> Result<CovarianceTable> {
    if s_values.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::validation("s", "scale factors must be positive"));
    }
    let signal = generate(spec)?;
    let mut half_spec = spec.clone();
    half_spec.dt = spec.dt / 2.0;
    let half = generate(&half_spec)?;
    let negated = signal.negated();
    let schedule = time_constants(params);
    let cascade = compose_cascade(&schedule, signal.dt(), eps_trunc)?;
    let smoothed = scale_space_transform(&signal, &cascade)?;

    let per_s = s_values
        .par_iter()
        .map(|&s| -> Result<Vec<CovarianceRow>> {
            let stretched = rescale_to_same_dt(&signal, s)?;
            let scaled_cascade = compose_cascade(&schedule.scaled(s)?, signal.dt(), eps_trunc)?;
            let smoothing_dev =
                deviation_at_scaled_times(&smoothed, &scale_space_transform(&stretched, &scaled_cascade)?, s);
            schedule
                .mus()
                .iter()
                .enumerate()
                .map(|(i, &mu)| {
                    let sub = NeuronConfig::subthreshold(mu)?;
                    let spiking = NeuronConfig::new(mu, theta)?;
                    let pos = covariance_probe(&signal, &spiking, s)?;
                    let neg = covariance_probe(&negated, &spiking, s)?;
                    Ok(CovarianceRow {
                        s,
                        k: i + 1,
                        mu,
                        trace_dev: covariance_probe(&signal, &sub, s)?.max_trace_deviation(),
                        trace_dev_half_dt: covariance_probe(&half, &sub, s)?.max_trace_deviation(),
                        smoothing_dev,
                        count_pos: pos.original.0.len(),
                        count_neg: neg.original.0.len(),
                        count_delta_pos: pos.count_delta(),
                        count_delta_neg: neg.count_delta(),
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CovarianceTable {
        rows: per_s.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum MethodConfig {
    Morlet {
        sigma: f64,
        omega0: f64,
        n_scales: usize,
    },
    TruncExp {
        params: ScaleParams,
        n: usize,
        n_scales: usize,
    },
    Spiking {
        label: String,
        params: ScaleParams,
        theta: f64,
        /// `None` means `DEFAULT_BIN_STEPS` samples
        bin_width: Option<f64>,
    },
}

impl MethodConfig {
    pub fn morlet() -> Self {
        MethodConfig::Morlet {
            sigma: crate::classical_wavelet::DEFAULT_MORLET_SIGMA,
            omega0: crate::classical_wavelet::DEFAULT_MORLET_OMEGA0,
            n_scales: DEFAULT_N_SCALES,
        }
    }

    pub fn trunc_exp() -> Self {
        MethodConfig::TruncExp {
            params: ScaleParams::new(std::f64::consts::SQRT_2, 5, 1.0).expect("valid defaults"),
            n: 1,
            n_scales: DEFAULT_N_SCALES,
        }
    }

    pub fn spiking(label: &str, c: f64, k: usize, tau_max: f64, theta: f64) -> Result<Self> {
        Ok(MethodConfig::Spiking {
            label: label.to_string(),
            params: ScaleParams::new(c, k, tau_max)?,
            theta,
            bin_width: None,
        })
    }

    /// Methods of the published comparison.
    pub fn paper_set() -> Vec<Self> {
        let mut v = vec![Self::morlet(), Self::trunc_exp()];
        for (label, c, k) in [("spiking-k3", std::f64::consts::SQRT_2, 3), ("spiking-k6", 3.0, 6), ("spiking-k12", 1.6, 12)] {
            v.push(Self::spiking(label, c, k, 3.4, 0.1).expect("valid defaults"));
        }
        v
    }

    /// `paper_set` plus K = 6 and 12 on the `c = sqrt 2` schedule.
    pub fn paper_set_extended() -> Vec<Self> {
        let mut v = Self::paper_set();
        for (label, k) in [("spiking-k6-sqrt2", 6), ("spiking-k12-sqrt2", 12)] {
            v.push(Self::spiking(label, std::f64::consts::SQRT_2, k, 3.4, 0.1).expect("valid defaults"));
        }
        v
    }

    /// Selects from `paper_set_extended` by name.
    pub fn by_name(name: &str) -> Result<Self> {
        Self::paper_set_extended()
            .into_iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| Error::validation("methods", format!("unknown method {name:?}")))
    }

    pub fn name(&self) -> String {
        match self {
            MethodConfig::Morlet { .. } => "morlet".into(),
            MethodConfig::TruncExp { params, .. } => format!("trunc-exp-k{}", params.k()),
            MethodConfig::Spiking { label, .. } => label.clone(),
        }
    }

    pub fn summary(&self) -> String {
        match self {
            MethodConfig::Morlet { sigma, omega0, n_scales } => {
                format!("sigma={sigma} omega0={omega0} scales={n_scales}")
            }
            MethodConfig::TruncExp { params, n, n_scales } => format!(
                "c={} K={} tau_max={} n={n} scales={n_scales}",
                params.c(),
                params.k(),
                params.tau_max()
            ),
            MethodConfig::Spiking { params, theta, bin_width, .. } => format!(
                "c={} K={} tau_max={} theta={theta} bin_width={}",
                params.c(),
                params.k(),
                params.tau_max(),
                bin_width.map_or_else(|| format!("{DEFAULT_BIN_STEPS}dt"), |b| b.to_string())
            ),
        }
    }

    fn max_mu(&self) -> Option<f64> {
        match self {
            MethodConfig::Spiking { params, .. } => Some(time_constants(params).max()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub name: String,
    pub params: String,
    pub result: std::result::Result<MethodRun, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub reconstruction: SampledSignal,
    pub report: ErrorReport,
    /// calibration weights of spiking methods
    pub weights: Vec<f64>,
}

impl MethodOutcome {
    pub fn status(&self) -> String {
        match &self.result {
            Ok(run) if run.report.rel_l2.is_none() => "degenerate-reference".into(),
            Ok(_) => "ok".into(),
            Err(e) => format!("error: {e}"),
        }
    }

    pub fn rel_l2(&self) -> Option<f64> {
        self.result.as_ref().ok().and_then(|r| r.report.rel_l2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub signal: String,
    pub skip_transient: f64,
    pub rows: Vec<MethodOutcome>,
}

impl ComparisonTable {
    pub fn row(&self, name: &str) -> Option<&MethodOutcome> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = io::csv_writer(path, &["method", "params", "rmse", "rel_l2", "max_abs", "status"])?;
        for row in &self.rows {
            let (rmse, rel, max_abs) = match &row.result {
                Ok(run) => (
                    io::num(run.report.rmse),
                    run.report.rel_l2.map_or_else(String::new, io::num),
                    io::num(run.report.max_abs),
                ),
                Err(_) => (String::new(), String::new(), String::new()),
            };
            io::write_row(&mut w, path, [row.name.clone(), row.params.clone(), rmse, rel, max_abs, row.status()])?;
        }
        io::finish(w, path)
    }

    /// Writes `recon_<method>.csv` for every successful method.
    pub fn write_reconstructions(&self, dir: &Path) -> Result<()> {
        for row in &self.rows {
            if let Ok(run) = &row.result {
                run.reconstruction.write_csv(&dir.join(format!("recon_{}.csv", row.name)))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComparisonOptions {
    /// Defaults to three times the slowest spiking time constant.
    pub skip_transient: Option<f64>,
}

pub fn default_skip(methods: &[MethodConfig]) -> f64 {
    3.0 * methods.iter().filter_map(MethodConfig::max_mu).fold(0.0, f64::max)
}

pub fn run_comparison(
    spec: &SignalSpec,
    methods: &[MethodConfig],
    options: &ComparisonOptions,
) -> Result<ComparisonTable> {
    if methods.is_empty() {
        return Err(Error::validation("methods", "at least one method is required"));
    }
    let mut names: Vec<String> = methods.iter().map(MethodConfig::name).collect();
    names.sort();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::validation("methods", "method names must be unique"));
    }
    let signal = generate(spec)?;
    let skip = options.skip_transient.unwrap_or_else(|| default_skip(methods));
    if skip >= signal.duration() {
        return Err(Error::validation("skip_transient", "must be shorter than the signal"));
    }
    let rows = methods
        .par_iter()
        .map(|m| MethodOutcome {
            name: m.name(),
            params: m.summary(),
            result: run_method(spec, &signal, m, skip).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(ComparisonTable {
        signal: spec.kind.name().to_string(),
        skip_transient: skip,
        rows,
    })
}

fn run_method(
    spec: &SignalSpec,
    signal: &SampledSignal,
    method: &MethodConfig,
    skip: f64,
) -> Result<MethodRun> {
    let (reconstruction, weights) = match method {
        MethodConfig::Morlet { sigma, omega0, n_scales } => {
            let mother = morlet(*sigma, *omega0, signal.dt())?;
            (wavelet_roundtrip(spec, signal, &mother, *n_scales)?, Vec::new())
        }
        MethodConfig::TruncExp { params, n, n_scales } => {
            let mother = limit_kernel_wavelet(params, *n, signal.dt())?;
            (wavelet_roundtrip(spec, signal, &mother, *n_scales)?, Vec::new())
        }
        MethodConfig::Spiking { params, theta, bin_width, .. } => {
            let enc = two_channel_encode(signal, params, *theta)?;
            let width = bin_width.unwrap_or(DEFAULT_BIN_STEPS as f64 * signal.dt());
            let grid = spike_count_coefficients(&enc, width)?;
            let target = signal.window(signal.t0() + skip, signal.t0() + signal.duration())?;
            let r = reconstruct_signal(Bands::Counts(&grid), ReconstructionMode::Calibrated, Some(&target))?;
            (r.signal, r.weights)
        }
    };
    let report = error_report(signal, &reconstruction, skip)?;
    Ok(MethodRun {
        reconstruction,
        report,
        weights,
    })
}

fn wavelet_roundtrip(
    spec: &SignalSpec,
    signal: &SampledSignal,
    mother: &crate::classical_wavelet::MotherWavelet,
    n_scales: usize,
) -> Result<SampledSignal> {
    let (lo, hi) = spec
        .angular_band()
        .ok_or_else(|| Error::validation("signal", "wavelet baselines need a signal with known band"))?;
    let scales = band_scales(mother, lo, hi, n_scales, BASELINE_SPECTRAL_TAIL)?;
    icwt(&cwt(signal, mother, &scales)?, mother)
}
