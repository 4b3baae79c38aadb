//! Command-line front end.
//!
//! Settings come from flags, then from an optional `key = value` config file
//! (keys are the long flag names), then from per-command defaults. Everything
//! is validated and computed before the first file is written.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{default_skip, run_comparison, verify_covariance, ComparisonOptions, ComparisonTable, MethodConfig};
use crate::error::{Error, Result};
use crate::io::{num, write_key_values};
use crate::neuron::two_channel_encode;
use crate::scale_space::{kernel_moments, time_constants, KernelFamily, ScaleParams, DEFAULT_EPS_TRUNC};
use crate::signals::{generate, SampledSignal, SignalKind, SignalSpec, SineComponent, DEFAULT_DT};
use crate::spiking_wavelet::{
    reconstruct_bands, reconstruct_signal, spike_count_coefficients, Bands, ReconstructionMode,
    DEFAULT_BIN_STEPS,
};

#[derive(Debug, Parser)]
#[command(name = "spikewave", version, about = "Spiking-wavelet signal analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cascade kernel and its derivatives, with a moments report
    Kernels(KernelsArgs),
    /// Two-channel LIF spike encoding of a signal
    Encode(EncodeArgs),
    /// Spike-count coefficients and reconstruction of a signal
    Reconstruct(ReconstructArgs),
    /// Reconstruction error of wavelet baselines and spiking wavelets
    Compare(CompareArgs),
    /// Scale-covariance deviation table
    Covariance(CovarianceArgs),
}

#[derive(Debug, Args, Default)]
pub struct SharedArgs {
    /// Scale ratio between neighbouring levels (> 1)
    #[arg(long)]
    pub c: Option<f64>,
    /// Number of scale levels
    #[arg(long)]
    pub k: Option<usize>,
    /// Largest variance of the hierarchy
    #[arg(long = "tau-max")]
    pub tau_max: Option<f64>,
    /// Firing threshold
    #[arg(long)]
    pub theta: Option<f64>,
    /// Sample step in seconds
    #[arg(long)]
    pub dt: Option<f64>,
    /// Coefficient bin width in seconds
    #[arg(long = "bin-width")]
    pub bin_width: Option<f64>,
    /// Output directory
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
    /// `key = value` settings file; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct SignalArgs {
    /// Built-in signal: sine, composite or zero
    #[arg(long)]
    pub signal: Option<String>,
    /// Signal duration in seconds
    #[arg(long)]
    pub duration: Option<f64>,
    /// Read the signal from a `t,value` CSV instead
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KernelsArgs {
    #[command(flatten)]
    pub shared: SharedArgs,
    /// Tail mass dropped when truncating exponential kernels
    #[arg(long = "eps-trunc")]
    pub eps_trunc: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[command(flatten)]
    pub shared: SharedArgs,
    #[command(flatten)]
    pub signal: SignalArgs,
    /// Encode the negated signal
    #[arg(long)]
    pub negate: bool,
    /// Also write membrane traces
    #[arg(long)]
    pub traces: bool,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub shared: SharedArgs,
    #[command(flatten)]
    pub signal: SignalArgs,
    /// band-sum or calibrated
    #[arg(long)]
    pub mode: Option<String>,
    /// counts (binned spikes) or kernel (difference-kernel bands)
    #[arg(long)]
    pub readout: Option<String>,
    /// Seconds excluded from calibration and error metrics
    #[arg(long)]
    pub skip: Option<f64>,
    /// Tail mass dropped when truncating exponential kernels
    #[arg(long = "eps-trunc")]
    pub eps_trunc: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub shared: SharedArgs,
    /// Comma-separated method names, or `all`
    #[arg(long)]
    pub methods: Option<String>,
    /// Comma-separated built-in signals
    #[arg(long)]
    pub signals: Option<String>,
    /// Seconds excluded from calibration and error metrics
    #[arg(long)]
    pub skip: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CovarianceArgs {
    #[command(flatten)]
    pub shared: SharedArgs,
    #[command(flatten)]
    pub signal: SignalArgs,
    /// Comma-separated scale factors
    #[arg(long)]
    pub s: Option<String>,
    /// Tail mass dropped when truncating exponential kernels
    #[arg(long = "eps-trunc")]
    pub eps_trunc: Option<f64>,
}

/// Parsed `key = value` file. `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::validation("config", format!("line {}: expected `key = value`", i + 1)))?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::validation("config", format!("unknown key {k:?}"))),
            None => Ok(()),
        }
    }
}

/// Resolved settings of one invocation, in a stable order.
struct Settings {
    cfg: ConfigFile,
    resolved: Vec<(String, String)>,
}

impl Settings {
    fn new(shared: &SharedArgs, allowed: &[&str]) -> Result<Self> {
        let cfg = match &shared.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let mut keys = vec!["c", "k", "tau-max", "theta", "dt", "bin-width", "out-dir"];
        keys.extend_from_slice(allowed);
        cfg.check_keys(&keys)?;
        Ok(Settings {
            cfg,
            resolved: Vec::new(),
        })
    }

    fn lookup<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.cfg.entries.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::validation("config", format!("cannot parse {key} = {raw:?}"))),
        }
    }

    fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
    {
        let v = self.lookup(key, flag)?.unwrap_or(default);
        self.resolved.push((key.to_string(), v.to_string()));
        Ok(v)
    }

    fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
    {
        let v = self.lookup(key, flag)?;
        if let Some(x) = &v {
            self.resolved.push((key.to_string(), x.to_string()));
        }
        Ok(v)
    }

    fn get_flag(&mut self, key: &str, flag: bool) -> Result<bool> {
        let v = flag || self.lookup::<bool>(key, None)?.unwrap_or(false);
        self.resolved.push((key.to_string(), v.to_string()));
        Ok(v)
    }

    fn out_dir(&mut self, shared: &SharedArgs) -> Result<PathBuf> {
        let dir = self.lookup("out-dir", shared.out_dir.clone())?.unwrap_or_else(|| PathBuf::from("out"));
        self.resolved.push(("out-dir".into(), dir.display().to_string()));
        Ok(dir)
    }

    fn scale_params(&mut self, shared: &SharedArgs, c: f64, k: usize, tau_max: f64) -> Result<ScaleParams> {
        let c = self.get("c", shared.c, c)?;
        let k = self.get("k", shared.k, k)?;
        let tau_max = self.get("tau-max", shared.tau_max, tau_max)?;
        ScaleParams::new(c, k, tau_max)
    }

    fn dt(&mut self, shared: &SharedArgs) -> Result<f64> {
        let dt = self.get("dt", shared.dt, DEFAULT_DT)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::validation("dt", "must be positive"));
        }
        Ok(dt)
    }

    fn theta(&mut self, shared: &SharedArgs, default: f64) -> Result<f64> {
        let theta = self.get("theta", shared.theta, default)?;
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::validation("theta", "threshold must be positive"));
        }
        Ok(theta)
    }

    fn eps_trunc(&mut self, flag: Option<f64>) -> Result<f64> {
        let eps = self.get("eps-trunc", flag, DEFAULT_EPS_TRUNC)?;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::validation("eps_trunc", "must lie in (0, 1)"));
        }
        Ok(eps)
    }

    fn reject(&self, key: &str, flag_set: bool, why: &str) -> Result<()> {
        if flag_set || self.cfg.entries.contains_key(key) {
            return Err(Error::validation("config", format!("{key}: {why}")));
        }
        Ok(())
    }

    /// Built-in signal or CSV input.
    fn signal(&mut self, args: &SignalArgs, dt: f64, default_kind: &str) -> Result<(String, SampledSignal)> {
        if let Some(path) = self.get_opt::<String>("input", args.input.as_ref().map(|p| p.display().to_string()))? {
            let sig = SampledSignal::read_csv(Path::new(&path))?;
            return Ok(("input".into(), sig));
        }
        let kind = self.get("signal", args.signal.clone(), default_kind.to_string())?;
        let duration = self.get("duration", args.duration, default_duration(&kind))?;
        let spec = builtin_signal(&kind, duration, dt)?;
        Ok((kind, generate(&spec)?))
    }

    fn resolved(&self) -> Vec<(String, String)> {
        self.resolved.clone()
    }
}

fn default_duration(kind: &str) -> f64 {
    match kind {
        "composite" => 16.0,
        _ => 40.0,
    }
}

/// `sine` is `sin(t)`; `composite` is the three-tone test signal.
pub fn builtin_signal(kind: &str, duration: f64, dt: f64) -> Result<SignalSpec> {
    let spec = match kind {
        "sine" => SignalSpec::unit_sine(duration, dt),
        "composite" => SignalSpec::composite(duration, dt),
        "zero" => SignalSpec {
            kind: SignalKind::CustomSum,
            components: vec![SineComponent::new(0.0, 0.0, 0.0)],
            duration,
            dt,
        },
        other => {
            return Err(Error::validation(
                "signal",
                format!("unknown signal {other:?} (expected sine, composite or zero)"),
            ))
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_list<T: FromStr>(raw: &str, field: &'static str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| Error::validation(field, format!("cannot parse {s:?}"))))
        .collect()
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_meta(dir: &Path, command: &str, settings: &[(String, String)], extra: Vec<(String, String)>) -> Result<()> {
    let mut config: Vec<(String, String)> = settings.to_vec();
    config.sort();
    write_key_values(&dir.join("config.txt"), &config)?;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut meta = vec![
        ("command".to_string(), command.to_string()),
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("timestamp_unix".to_string(), stamp.to_string()),
    ];
    meta.extend(extra);
    write_key_values(&dir.join("run_meta.txt"), &meta)
}

fn join_nums(xs: &[f64]) -> String {
    xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(",")
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Kernels(a) => cmd_kernels(&a),
        Command::Encode(a) => cmd_encode(&a),
        Command::Reconstruct(a) => cmd_reconstruct(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Covariance(a) => cmd_covariance(&a),
    }
}

pub fn cmd_kernels(a: &KernelsArgs) -> Result<()> {
    let mut s = Settings::new(&a.shared, &["eps-trunc"])?;
    let params = s.scale_params(&a.shared, SQRT_2, 7, 1.0)?;
    let dt = s.dt(&a.shared)?;
    let eps = s.eps_trunc(a.eps_trunc)?;
    s.reject("theta", a.shared.theta.is_some(), "not used by kernels")?;
    s.reject("bin-width", a.shared.bin_width.is_some(), "not used by kernels")?;
    let dir = s.out_dir(&a.shared)?;

    let family = KernelFamily::build(&params, dt, eps)?;
    let m = kernel_moments(&family.psi)?;
    let schedule = &family.schedule;
    let report = vec![
        ("mus".to_string(), join_nums(schedule.mus())),
        ("sum_mu".to_string(), num(schedule.mean())),
        ("sum_mu_sq".to_string(), num(schedule.variance())),
        ("taps".to_string(), family.psi.len().to_string()),
        ("psi_mass".to_string(), num(m.mass)),
        ("psi_mean".to_string(), num(m.mean)),
        ("psi_variance".to_string(), num(m.variance)),
        ("dpsi_mass".to_string(), num(family.dpsi.mass())),
        ("ddpsi_mass".to_string(), num(family.ddpsi.mass())),
        ("dpsi_l2".to_string(), num(family.dpsi.l2_norm())),
        ("ddpsi_l2".to_string(), num(family.ddpsi.l2_norm())),
    ];

    prepare_dir(&dir)?;
    family.write_csv(&dir.join("kernels.csv"))?;
    write_key_values(&dir.join("kernel_report.txt"), &report)?;
    write_meta(&dir, "kernels", &s.resolved(), Vec::new())
}

pub fn cmd_encode(a: &EncodeArgs) -> Result<()> {
    let mut s = Settings::new(&a.shared, &["signal", "duration", "input", "negate", "traces"])?;
    let params = s.scale_params(&a.shared, SQRT_2, 2, 1.0)?;
    let dt = s.dt(&a.shared)?;
    let theta = s.theta(&a.shared, 0.5)?;
    s.reject("bin-width", a.shared.bin_width.is_some(), "not used by encode")?;
    let negate = s.get_flag("negate", a.negate)?;
    let traces = s.get_flag("traces", a.traces)?;
    let (_, mut signal) = s.signal(&a.signal, dt, "sine")?;
    if negate {
        signal = signal.negated();
    }
    let dir = s.out_dir(&a.shared)?;

    let enc = two_channel_encode(&signal, &params, theta)?;

    prepare_dir(&dir)?;
    enc.write_events_csv(&dir.join("spikes.csv"))?;
    if traces {
        enc.write_traces_csv(&dir.join("traces.csv"))?;
    }
    let counts = enc
        .trains()
        .iter()
        .map(|t| {
            let pol = if t.polarity().sign() > 0 { "pos" } else { "neg" };
            (format!("spikes_k{}_{pol}", t.scale_index()), t.len().to_string())
        })
        .collect();
    write_meta(&dir, "encode", &s.resolved(), counts)
}

pub fn cmd_reconstruct(a: &ReconstructArgs) -> Result<()> {
    let mut s = Settings::new(&a.shared, &["signal", "duration", "input", "mode", "readout", "skip", "eps-trunc"])?;
    let params = s.scale_params(&a.shared, SQRT_2, 3, 3.4)?;
    let dt_flag = s.dt(&a.shared)?;
    let theta = s.theta(&a.shared, 0.1)?;
    let eps = s.eps_trunc(a.eps_trunc)?;
    let mode = match s.get("mode", a.mode.clone(), "calibrated".to_string())?.as_str() {
        "calibrated" => ReconstructionMode::Calibrated,
        "band-sum" => ReconstructionMode::BandSum,
        other => return Err(Error::validation("mode", format!("unknown mode {other:?}"))),
    };
    let readout = s.get("readout", a.readout.clone(), "counts".to_string())?;
    if readout != "counts" && readout != "kernel" {
        return Err(Error::validation("readout", format!("unknown readout {readout:?}")));
    }
    let (_, signal) = s.signal(&a.signal, dt_flag, "sine")?;
    let dt = signal.dt();
    let bin_width = s.get("bin-width", a.shared.bin_width, DEFAULT_BIN_STEPS as f64 * dt)?;
    let skip = s.get("skip", a.skip, 3.0 * time_constants(&params).max())?;
    if !(skip >= 0.0 && skip < signal.duration()) {
        return Err(Error::validation("skip", "must lie in [0, duration)"));
    }
    let dir = s.out_dir(&a.shared)?;

    let enc = two_channel_encode(&signal, &params, theta)?;
    let grid = spike_count_coefficients(&enc, bin_width)?;
    let target = signal.window(signal.t0() + skip, signal.t0() + signal.duration())?;
    let bands;
    let source = if readout == "counts" {
        Bands::Counts(&grid)
    } else {
        bands = reconstruct_bands(&enc, eps)?;
        Bands::Kernel(&bands)
    };
    let rec = reconstruct_signal(source, mode, Some(&target))?;
    let report = crate::analysis::error_report(&signal, &rec.signal, skip)?;

    prepare_dir(&dir)?;
    grid.write_csv(&dir.join("coefficients.csv"))?;
    rec.signal.write_csv(&dir.join("reconstruction.csv"))?;
    write_meta(
        &dir,
        "reconstruct",
        &s.resolved(),
        vec![
            ("weights".into(), join_nums(&rec.weights)),
            ("rmse".into(), num(report.rmse)),
            ("rel_l2".into(), report.rel_l2.map_or_else(|| "undefined".into(), num)),
            ("max_abs".into(), num(report.max_abs)),
        ],
    )
}

fn method_set(raw: &str) -> Result<Vec<MethodConfig>> {
    if raw == "all" {
        return Ok(MethodConfig::paper_set_extended());
    }
    parse_list::<String>(raw, "methods")?
        .iter()
        .map(|n| MethodConfig::by_name(n))
        .collect()
}

pub fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let mut s = Settings::new(&a.shared, &["methods", "signals", "skip"])?;
    let why = "fixed per method; choose methods with --methods";
    s.reject("c", a.shared.c.is_some(), why)?;
    s.reject("k", a.shared.k.is_some(), why)?;
    let dt = s.dt(&a.shared)?;
    let tau_max = s.get_opt("tau-max", a.shared.tau_max)?;
    let theta = s.get_opt("theta", a.shared.theta)?;
    let bin_width = s.get_opt("bin-width", a.shared.bin_width)?;
    let default_methods = MethodConfig::paper_set().iter().map(MethodConfig::name).collect::<Vec<_>>().join(",");
    let mut methods = method_set(&s.get("methods", a.methods.clone(), default_methods)?)?;
    let mut reference = MethodConfig::paper_set();
    for m in methods.iter_mut().chain(reference.iter_mut()) {
        if let MethodConfig::Spiking { params, theta: th, bin_width: bw, .. } = m {
            if let Some(t) = tau_max {
                *params = ScaleParams::new(params.c(), params.k(), t)?;
            }
            if let Some(t) = theta {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(Error::validation("theta", "threshold must be positive"));
                }
                *th = t;
            }
            if bin_width.is_some() {
                *bw = bin_width;
            }
        }
    }
    let signals = parse_list::<String>(&s.get("signals", a.signals.clone(), "sine,composite".to_string())?, "signals")?;
    if signals.is_empty() {
        return Err(Error::validation("signals", "at least one signal is required"));
    }
    let specs = signals
        .iter()
        .map(|k| builtin_signal(k, default_duration(k), dt))
        .collect::<Result<Vec<_>>>()?;
    // without spiking methods, keep the window of the default set so that
    // partial tables stay comparable
    let fallback = match default_skip(&methods) {
        x if x > 0.0 => x,
        _ => default_skip(&reference),
    };
    let skip = s.get("skip", a.skip, fallback)?;
    let dir = s.out_dir(&a.shared)?;

    let options = ComparisonOptions { skip_transient: Some(skip) };
    let tables = specs
        .iter()
        .map(|spec| run_comparison(spec, &methods, &options))
        .collect::<Result<Vec<ComparisonTable>>>()?;

    prepare_dir(&dir)?;
    let mut extra = Vec::new();
    let mut any_ok = false;
    for (name, table) in signals.iter().zip(&tables) {
        table.write_csv(&dir.join(format!("comparison_{name}.csv")))?;
        let sub = dir.join(name);
        prepare_dir(&sub)?;
        table.write_reconstructions(&sub)?;
        extra.push((format!("{name}.skip_transient"), num(table.skip_transient)));
        for row in &table.rows {
            if let Ok(run) = &row.result {
                any_ok = true;
                if !run.weights.is_empty() {
                    extra.push((format!("{name}.{}.weights", row.name), join_nums(&run.weights)));
                }
            }
        }
    }
    write_meta(&dir, "compare", &s.resolved(), extra)?;
    if !any_ok {
        return Err(Error::Numerical("every method failed".into()));
    }
    Ok(())
}

pub fn cmd_covariance(a: &CovarianceArgs) -> Result<()> {
    let mut s = Settings::new(&a.shared, &["signal", "duration", "s", "eps-trunc"])?;
    if a.signal.input.is_some() {
        return Err(Error::validation("input", "covariance regenerates its signal; use --signal"));
    }
    let params = s.scale_params(&a.shared, SQRT_2, 3, 3.4)?;
    let dt = s.dt(&a.shared)?;
    let theta = s.theta(&a.shared, 0.1)?;
    let eps = s.eps_trunc(a.eps_trunc)?;
    s.reject("bin-width", a.shared.bin_width.is_some(), "not used by covariance")?;
    let kind = s.get("signal", a.signal.signal.clone(), "sine".to_string())?;
    let duration = s.get("duration", a.signal.duration, default_duration(&kind))?;
    let spec = builtin_signal(&kind, duration, dt)?;
    let s_values = parse_list::<f64>(&s.get("s", a.s.clone(), "0.5,1,2,4".to_string())?, "s")?;
    if s_values.is_empty() {
        return Err(Error::validation("s", "at least one scale factor is required"));
    }
    let dir = s.out_dir(&a.shared)?;

    let table = verify_covariance(&spec, &params, theta, &s_values, eps)?;

    prepare_dir(&dir)?;
    table.write_csv(&dir.join("covariance.csv"))?;
    write_meta(&dir, "covariance", &s.resolved(), Vec::new())
}
