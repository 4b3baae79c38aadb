//! Leaky integrate-and-fire neurons in spike-response form.
//!
//! The membrane obeys `mu du/dt = -u + f - theta z` and is stepped with the
//! exponential integrator
//!
//! ```text
//! u_i = e^{-dt/mu} u_{i-1} + (1 - e^{-dt/mu}) f_{i-1}
//! ```
//!
//! which is exact for input held constant over each step. A spike is emitted
//! at `t_i` whenever `u_i >= theta`, after which `theta` is subtracted (the
//! reset kernel `-theta delta(t)`). At most one spike is emitted per step; any
//! surplus above `theta` carries over. The membrane starts at `u = 0`.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io;
use crate::scale_space::{time_constants, ScaleParams, TimeConstantSchedule};
use crate::signals::{rescale_time, SampledSignal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronConfig {
    mu: f64,
    theta: f64,
}

impl NeuronConfig {
    /// `theta = f64::INFINITY` disables firing.
    pub fn new(mu: f64, theta: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::validation("mu", "membrane time constant must be positive"));
        }
        if !(theta > 0.0) {
            return Err(Error::validation("theta", "threshold must be positive"));
        }
        Ok(NeuronConfig { mu, theta })
    }

    /// Leaky integrator that never fires.
    pub fn subthreshold(mu: f64) -> Result<Self> {
        Self::new(mu, f64::INFINITY)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    pub fn sign(self) -> i32 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }
}

/// Spike times of one (scale, polarity) channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    times: Vec<f64>,
    scale_index: usize,
    polarity: Polarity,
}

impl SpikeTrain {
    pub fn new(times: Vec<f64>, scale_index: usize, polarity: Polarity) -> Result<Self> {
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::validation("times", "spike times must be finite"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("times", "spike times must be strictly increasing"));
        }
        Ok(SpikeTrain {
            times,
            scale_index,
            polarity,
        })
    }

    pub fn empty(scale_index: usize, polarity: Polarity) -> Self {
        SpikeTrain {
            times: Vec::new(),
            scale_index,
            polarity,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn scale_index(&self) -> usize {
        self.scale_index
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn labelled(mut self, scale_index: usize, polarity: Polarity) -> Self {
        self.scale_index = scale_index;
        self.polarity = polarity;
        self
    }
}

/// Membrane potential recorded on the input grid (post-reset values).
#[derive(Debug, Clone, PartialEq)]
pub struct MembraneTrace {
    dt: f64,
    t0: f64,
    u: Vec<f64>,
}

impl MembraneTrace {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn to_signal(&self) -> SampledSignal {
        SampledSignal::new(self.dt, self.t0, self.u.clone()).expect("trace values are finite")
    }
}

/// Runs one LIF neuron over the signal.
pub fn simulate_lif(
    signal: &SampledSignal,
    config: &NeuronConfig,
) -> Result<(SpikeTrain, MembraneTrace)> {
    let dt = signal.dt();
    if dt >= config.mu {
        return Err(Error::UnderResolved {
            what: "membrane",
            detail: format!("dt = {dt} is not below mu = {}", config.mu),
        });
    }
    let x = dt / config.mu;
    let decay = (-x).exp();
    let gain = -(-x).exp_m1();
    let f = signal.samples();

    let mut u = 0.0;
    let mut trace = Vec::with_capacity(f.len());
    let mut times = Vec::new();
    trace.push(u);
    for i in 1..f.len() {
        u = decay * u + gain * f[i - 1];
        if u >= config.theta {
            times.push(signal.time(i));
            u -= config.theta;
        }
        trace.push(u);
    }
    Ok((
        SpikeTrain {
            times,
            scale_index: 0,
            polarity: Polarity::Positive,
        },
        MembraneTrace {
            dt,
            t0: signal.t0(),
            u: trace,
        },
    ))
}

/// Positive and negative LIF channels at every scale of a hierarchy.
#[derive(Debug, Clone)]
pub struct TwoChannelEncoding {
    params: ScaleParams,
    schedule: TimeConstantSchedule,
    theta: f64,
    dt: f64,
    t0: f64,
    len: usize,
    /// `[k1+, k1-, k2+, k2-, ...]`
    trains: Vec<SpikeTrain>,
    traces: Vec<MembraneTrace>,
}

impl TwoChannelEncoding {
    pub fn params(&self) -> &ScaleParams {
        &self.params
    }

    pub fn schedule(&self) -> &TimeConstantSchedule {
        &self.schedule
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Number of samples in the encoded signal.
    pub fn signal_len(&self) -> usize {
        self.len
    }

    pub fn trains(&self) -> &[SpikeTrain] {
        &self.trains
    }

    pub fn traces(&self) -> &[MembraneTrace] {
        &self.traces
    }

    /// Train for scale `k` (1-based).
    pub fn train(&self, k: usize, polarity: Polarity) -> &SpikeTrain {
        &self.trains[Self::slot(k, polarity)]
    }

    pub fn trace(&self, k: usize, polarity: Polarity) -> &MembraneTrace {
        &self.traces[Self::slot(k, polarity)]
    }

    fn slot(k: usize, polarity: Polarity) -> usize {
        assert!(k >= 1, "scale indices are 1-based");
        2 * (k - 1) + usize::from(polarity == Polarity::Negative)
    }

    pub fn total_spikes(&self) -> usize {
        self.trains.iter().map(SpikeTrain::len).sum()
    }

    /// Spike-event CSV `time,scale_index,polarity` sorted by time, then scale.
    pub fn write_events_csv(&self, path: &Path) -> Result<()> {
        let mut events: Vec<(f64, usize, Polarity)> = self
            .trains
            .iter()
            .flat_map(|tr| tr.times.iter().map(move |&t| (t, tr.scale_index, tr.polarity)))
            .collect();
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut w = io::csv_writer(path, &["time", "scale_index", "polarity"])?;
        for (t, k, p) in events {
            let sign = if p == Polarity::Positive { "+1" } else { "-1" };
            io::write_row(&mut w, path, [format!("{t:.9e}"), k.to_string(), sign.to_string()])?;
        }
        io::finish(w, path)
    }

    /// Wide membrane CSV `t,u_1_pos,u_1_neg,...`.
    pub fn write_traces_csv(&self, path: &Path) -> Result<()> {
        let mut header = vec!["t".to_string()];
        for k in 1..=self.schedule.len() {
            header.push(format!("u_{k}_pos"));
            header.push(format!("u_{k}_neg"));
        }
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut w = io::csv_writer(path, &header_refs)?;
        for i in 0..self.len {
            let mut row = vec![io::num(self.t0 + i as f64 * self.dt)];
            row.extend(self.traces.iter().map(|tr| io::num(tr.u[i])));
            io::write_row(&mut w, path, row)?;
        }
        io::finish(w, path)
    }
}

/// Encodes `f` with neurons integrating `+f` and `-f` at every time constant
/// of the hierarchy.
pub fn two_channel_encode(
    signal: &SampledSignal,
    params: &ScaleParams,
    theta: f64,
) -> Result<TwoChannelEncoding> {
    let schedule = time_constants(params);
    let negated = signal.negated();
    let configs = schedule
        .mus()
        .iter()
        .map(|&mu| NeuronConfig::new(mu, theta))
        .collect::<Result<Vec<_>>>()?;
    let runs = configs
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, cfg)| {
            let k = i + 1;
            [(k, Polarity::Positive, signal, cfg), (k, Polarity::Negative, &negated, cfg)]
        })
        .map(|(k, pol, input, cfg)| {
            simulate_lif(input, cfg).map(|(train, trace)| (train.labelled(k, pol), trace))
        })
        .collect::<Result<Vec<_>>>()?;
    let (trains, traces) = runs.into_iter().unzip();
    Ok(TwoChannelEncoding {
        params: *params,
        schedule,
        theta,
        dt: signal.dt(),
        t0: signal.t0(),
        len: signal.len(),
        trains,
        traces,
    })
}

/// A run at `(f, mu)` next to a run at `(f', s mu)` where `f'(s t) = f(t)`.
///
/// The rescaled input is resampled onto the original `dt`, so the two runs
/// see different step-to-time-constant ratios and their agreement measures
/// how well the discretized neuron preserves scale covariance.
#[derive(Debug, Clone)]
pub struct CovarianceProbe {
    pub s: f64,
    pub original: (SpikeTrain, MembraneTrace),
    pub scaled: (SpikeTrain, MembraneTrace),
}

impl CovarianceProbe {
    /// `max_i |L'(s t_i) - L(t_i)|` over the overlapping window.
    pub fn max_trace_deviation(&self) -> f64 {
        let l = &self.original.1;
        let scaled = self.scaled.1.to_signal();
        let last = (scaled.len() - 1) as f64;
        l.u.iter()
            .enumerate()
            .map(|(i, &u)| (i as f64 * self.s, u))
            .take_while(|(pos, _)| *pos <= last)
            .map(|(pos, u)| (scaled.at_position(pos) - u).abs())
            .fold(0.0, f64::max)
    }

    /// Spike count of the rescaled run minus that of the original.
    pub fn count_delta(&self) -> i64 {
        self.scaled.0.len() as i64 - self.original.0.len() as i64
    }
}

pub fn covariance_probe(
    signal: &SampledSignal,
    config: &NeuronConfig,
    s: f64,
) -> Result<CovarianceProbe> {
    let original = simulate_lif(signal, config)?;
    let scaled_config = NeuronConfig::new(config.mu * s, config.theta)?;
    let scaled_input = rescale_to_same_dt(signal, s)?;
    let scaled = simulate_lif(&scaled_input, &scaled_config)?;
    Ok(CovarianceProbe {
        s,
        original,
        scaled,
    })
}

/// `f'(t') = f(t'/s)` sampled on the original `dt`, covering `[s t0, s t_last]`.
pub fn rescale_to_same_dt(signal: &SampledSignal, s: f64) -> Result<SampledSignal> {
    let stretched = rescale_time(signal, s)?;
    let len = ((signal.len() - 1) as f64 * s).floor() as usize + 1;
    stretched.resample(signal.dt(), stretched.t0(), len)
}
