//! Speech to neck-displacement transform.
//!
//! Each frame of speech is inverse filtered to an excitation estimate, the
//! excitation is integrated back to a vocal fold displacement estimate, and
//! that estimate is delayed to line up with the measured neck displacement.
//! Frame results are recombined by Hann-weighted overlap-add.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpc::{inverse_filter_in_context, lpc_analyze, LpcModel, LpcOutcome};
use crate::signal::{correlate_lags, hann_periodic, mean, overlap_add, pearson, FramePlan, SampledSignal, Taper};
use crate::source_filter::VocalTractModel;

/// How the applied neck delay is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauMode {
    /// One delay per signal: the median of the per-frame estimates.
    #[default]
    Global,
    PerFrame,
}

impl std::str::FromStr for TauMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(TauMode::Global),
            "per-frame" => Ok(TauMode::PerFrame),
            other => Err(Error::invalid(
                "tau_mode",
                format!("expected `global` or `per-frame`, got `{other}`"),
            )),
        }
    }
}

/// Where the inverse filter comes from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TractSource {
    #[default]
    Estimate,
    /// Skip LPC and use a known tract for every frame.
    Known { tract: VocalTractModel },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformConfig {
    pub window_s: f64,
    pub hop_s: f64,
    pub lpc_order: usize,
    pub pre_emphasis: Option<f64>,
    pub integrator_pole: f64,
    pub max_lag_ms: f64,
    pub voicing_threshold: f64,
    /// Frames quieter than this, relative to the loudest frame, are unvoiced.
    pub energy_floor_db: f64,
    pub tau_mode: TauMode,
    pub tract: TractSource,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            window_s: 0.025,
            hop_s: 0.0125,
            lpc_order: 6,
            pre_emphasis: None,
            integrator_pole: 0.998,
            max_lag_ms: 5.0,
            voicing_threshold: 0.3,
            energy_floor_db: -40.0,
            tau_mode: TauMode::Global,
            tract: TractSource::Estimate,
        }
    }
}

impl TransformConfig {
    pub fn frame_plan(&self, rate_hz: f64) -> Result<FramePlan> {
        FramePlan::from_seconds(rate_hz, self.window_s, self.hop_s, Taper::Hann)
    }

    pub fn max_lag_samples(&self, rate_hz: f64) -> usize {
        (self.max_lag_ms * 1e-3 * rate_hz).round() as usize
    }

    pub fn validate(&self, rate_hz: f64) -> Result<()> {
        let plan = self.frame_plan(rate_hz)?;
        if self.lpc_order == 0 || 4 * self.lpc_order > plan.window_len {
            return Err(Error::invalid(
                "lpc_order",
                format!(
                    "must lie in [1, {}] for {}-sample frames",
                    plan.window_len / 4,
                    plan.window_len
                ),
            ));
        }
        if !(self.integrator_pole > 0.0 && self.integrator_pole < 1.0) {
            return Err(Error::invalid("integrator_pole", "must lie in (0, 1)"));
        }
        if !(self.max_lag_ms >= 0.0) || self.max_lag_samples(rate_hz) >= plan.window_len {
            return Err(Error::invalid(
                "max_lag_ms",
                format!(
                    "{} ms must stay below the {}-sample frame",
                    self.max_lag_ms, plan.window_len
                ),
            ));
        }
        if !(self.voicing_threshold > 0.0 && self.voicing_threshold < 1.0) {
            return Err(Error::invalid("voicing_threshold", "must lie in (0, 1)"));
        }
        if !(self.energy_floor_db < 0.0) {
            return Err(Error::invalid("energy_floor_db", "must be negative"));
        }
        if let Some(beta) = self.pre_emphasis {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::invalid("pre_emphasis", "must lie in [0, 1)"));
            }
        }
        Ok(())
    }
}

/// Leaky running sum `y[n] = pole * y[n-1] + x[n] / rate`.
pub fn integrate_excitation(e_hat: &SampledSignal, pole: f64) -> Result<SampledSignal> {
    if !(pole > 0.0 && pole < 1.0) {
        return Err(Error::invalid("pole", "must lie in (0, 1)"));
    }
    let dt = 1.0 / e_hat.rate_hz();
    let mut state = 0.0;
    let samples = e_hat
        .samples()
        .iter()
        .map(|e| {
            state = pole * state + e * dt;
            state
        })
        .collect();
    e_hat.with_samples(samples).map(|s| s.with_label("x_hat"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Voicing {
    pub voiced: bool,
    pub f0_hz: Option<f64>,
    /// Normalized autocorrelation at the selected lag; zero when none qualifies.
    pub peak: f64,
}

/// Periodicity detector for frequencies between 90 Hz and 1 kHz.
///
/// Uses the biased autocorrelation `r(k) / r(0)` of the mean-removed frame;
/// only local maxima inside the lag band count as candidate periods.
pub fn detect_voicing(frame: &[f64], rate_hz: f64, threshold: f64) -> Result<Voicing> {
    let min_len = (2.0 * rate_hz / 90.0).ceil() as usize;
    if frame.len() < min_len {
        return Err(Error::SignalTooShort {
            len: frame.len(),
            window: min_len,
        });
    }
    let unvoiced = Voicing {
        voiced: false,
        f0_hz: None,
        peak: 0.0,
    };
    let mu = mean(frame);
    let centred: Vec<f64> = frame.iter().map(|v| v - mu).collect();
    let energy: f64 = centred.iter().map(|v| v * v).sum();
    let raw: f64 = frame.iter().map(|v| v * v).sum();
    if energy <= 1e-300 || energy <= 1e-24 * raw {
        return Ok(unvoiced);
    }
    let lo = ((rate_hz / 1000.0).ceil() as usize).max(1);
    // One lag of slack so jittered periods at the 90 Hz edge still peak inside.
    let hi = ((rate_hz / 90.0).ceil() as usize + 1).min(frame.len() - 2);
    let r = |k: usize| centred.iter().zip(&centred[k..]).map(|(a, b)| a * b).sum::<f64>() / energy;
    let values: Vec<f64> = (lo - 1..=hi + 1).map(r).collect();
    let best = (1..values.len() - 1)
        .filter(|&i| values[i] >= values[i - 1] && values[i] >= values[i + 1])
        .max_by(|&a, &b| values[a].total_cmp(&values[b]).then(b.cmp(&a)));
    let Some(i) = best else {
        return Ok(unvoiced);
    };
    let peak = values[i];
    let curvature = values[i - 1] - 2.0 * peak + values[i + 1];
    let offset = if curvature.abs() > 1e-15 {
        (0.5 * (values[i - 1] - values[i + 1]) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let lag = (lo - 1 + i) as f64 + offset;
    let voiced = peak > threshold;
    Ok(Voicing {
        voiced,
        f0_hz: voiced.then_some(rate_hz / lag),
        peak,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    pub tau_samples: usize,
    pub peak: f64,
}

/// Delay of `d_frame` behind `x_hat_frame`, searched over `[0, max_lag]`.
pub fn estimate_delay(x_hat_frame: &[f64], d_frame: &[f64], max_lag: usize) -> Result<DelayEstimate> {
    if max_lag >= x_hat_frame.len().min(d_frame.len()) {
        return Err(Error::invalid("max_lag", "must be below the frame length"));
    }
    let peak = correlate_lags(x_hat_frame, d_frame, 0, max_lag as i64)?;
    Ok(DelayEstimate {
        tau_samples: peak.lag as usize,
        peak: peak.peak,
    })
}

/// Delay search that keeps the whole `d` frame and reads earlier `x_hat`
/// samples from context, so every lag is scored on the same overlap.
fn estimate_delay_in_context(
    x_hat: &[f64],
    d: &[f64],
    start: usize,
    len: usize,
    max_lag: usize,
) -> Result<DelayEstimate> {
    let target = &d[start..start + len];
    if target.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateCorrelation("all-zero input"));
    }
    let mut best: Option<DelayEstimate> = None;
    for tau in 0..=max_lag {
        let segment = delayed_segment(x_hat, start, len, tau);
        if let Some(c) = pearson(&segment, target) {
            if best.is_none_or(|b| c > b.peak) {
                best = Some(DelayEstimate {
                    tau_samples: tau,
                    peak: c,
                });
            }
        }
    }
    best.ok_or(Error::DegenerateCorrelation("constant input"))
}

/// `x[start - tau .. start - tau + len]`, holding the first sample before the
/// signal begins.
fn delayed_segment(x: &[f64], start: usize, len: usize, tau: usize) -> Vec<f64> {
    (start..start + len).map(|n| x[n.saturating_sub(tau)]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameStatus {
    Voiced,
    Unvoiced,
    /// Below the energy floor.
    Quiet,
    /// LPC could not model the frame.
    LpcFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDiagnostics {
    pub index: usize,
    pub start: usize,
    pub status: FrameStatus,
    pub voicing_peak: f64,
    pub f0_hz: Option<f64>,
    /// Delay estimated on this frame alone.
    pub tau_frame_samples: Option<usize>,
    /// Delay actually applied to this frame.
    pub tau_d_samples: usize,
    pub correlation_peak: Option<f64>,
    pub lpc_gain: Option<f64>,
}

impl FrameDiagnostics {
    pub fn voiced(&self) -> bool {
        self.status == FrameStatus::Voiced
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformOutput {
    pub e_hat: SampledSignal,
    pub x_hat: SampledSignal,
    pub d_hat: SampledSignal,
    pub plan: FramePlan,
    pub per_frame: Vec<FrameDiagnostics>,
    /// Median of the per-frame delay estimates over voiced frames.
    pub global_tau_samples: usize,
}

impl TransformOutput {
    pub fn voiced_mask(&self) -> Vec<bool> {
        self.per_frame.iter().map(FrameDiagnostics::voiced).collect()
    }

    pub fn voiced_count(&self) -> usize {
        self.per_frame.iter().filter(|f| f.voiced()).count()
    }
}

/// Serializable summary written next to the transform outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformReport {
    pub rate_hz: f64,
    pub window_len: usize,
    pub hop: usize,
    pub frames: usize,
    pub voiced_frames: usize,
    pub global_tau_samples: usize,
    pub config: TransformConfig,
    pub per_frame: Vec<FrameDiagnostics>,
}

impl TransformReport {
    pub fn voiced_mask(&self) -> Vec<bool> {
        self.per_frame.iter().map(FrameDiagnostics::voiced).collect()
    }
}

impl TransformOutput {
    pub fn report(&self, config: &TransformConfig) -> TransformReport {
        TransformReport {
            rate_hz: self.d_hat.rate_hz(),
            window_len: self.plan.window_len,
            hop: self.plan.hop,
            frames: self.per_frame.len(),
            voiced_frames: self.voiced_count(),
            global_tau_samples: self.global_tau_samples,
            config: config.clone(),
            per_frame: self.per_frame.clone(),
        }
    }
}

struct FrameAnalysis {
    status: FrameStatus,
    voicing: Voicing,
    model: Option<LpcModel>,
}

/// Speech `s` and measured displacement `d` to the excitation estimate `e_hat`,
/// fold displacement estimate `x_hat` and model-filtered displacement `d_hat`.
///
/// Each `d_hat` frame is scaled to unit RMS about its mean, which takes the
/// place of the unknown flow gain.
pub fn run_algorithm1(s: &SampledSignal, d: &SampledSignal, cfg: &TransformConfig) -> Result<TransformOutput> {
    s.ensure_same_rate(d)?;
    if s.len() != d.len() {
        return Err(Error::LengthMismatch {
            left: s.len(),
            right: d.len(),
        });
    }
    let rate = s.rate_hz();
    cfg.validate(rate)?;
    let plan = cfg.frame_plan(rate)?;
    let n = plan.window_len;
    let frame_count = plan.frame_count(s.len());
    if frame_count == 0 {
        return Err(Error::SignalTooShort {
            len: s.len(),
            window: n,
        });
    }
    let max_lag = cfg.max_lag_samples(rate);
    let speech = s.samples();
    let disp = d.samples();

    let frame_rms: Vec<f64> = (0..frame_count)
        .map(|i| {
            let start = plan.frame_start(i);
            let seg = &speech[start..start + n];
            let mu = mean(seg);
            (seg.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64).sqrt()
        })
        .collect();
    let loudest = frame_rms.iter().copied().fold(0.0, f64::max);
    let floor = loudest * 10f64.powf(cfg.energy_floor_db / 20.0);

    let mut analyses = Vec::with_capacity(frame_count);
    for (i, &level) in frame_rms.iter().enumerate() {
        let start = plan.frame_start(i);
        let seg = &speech[start..start + n];
        // Periodicity is judged on the displacement, which carries the fold
        // motion without the formant structure of the speech.
        let voicing = detect_voicing(&disp[start..start + n], rate, cfg.voicing_threshold)?;
        let status = if level <= floor || level == 0.0 {
            FrameStatus::Quiet
        } else if !voicing.voiced {
            FrameStatus::Unvoiced
        } else {
            FrameStatus::Voiced
        };
        let model = match (&status, &cfg.tract) {
            (FrameStatus::Voiced, TractSource::Known { tract }) => Some(tract.as_lpc().clone()),
            (FrameStatus::Voiced, TractSource::Estimate) => match lpc_analyze(seg, cfg.lpc_order, cfg.pre_emphasis) {
                Ok(LpcOutcome::Model(m)) => Some(m),
                Ok(LpcOutcome::Silent { .. }) | Err(Error::SingularRecursion { .. }) => None,
                Err(e) => return Err(e),
            },
            _ => None,
        };
        let status = if status == FrameStatus::Voiced && model.is_none() {
            FrameStatus::LpcFailed
        } else {
            status
        };
        analyses.push(FrameAnalysis { status, voicing, model });
    }

    let voiced = analyses.iter().filter(|a| a.status == FrameStatus::Voiced).count();
    if voiced == 0 {
        let count = |st: FrameStatus| analyses.iter().filter(|a| a.status == st).count();
        return Err(Error::NothingToTransform {
            frames: frame_count,
            detail: format!(
                "{} unvoiced, {} below the energy floor, {} with failed LPC",
                count(FrameStatus::Unvoiced),
                count(FrameStatus::Quiet),
                count(FrameStatus::LpcFailed)
            ),
        });
    }

    // Residual per voiced frame, normalized by the model gain.
    let zeros = vec![0.0; n];
    let residuals: Vec<Vec<f64>> = analyses
        .iter()
        .enumerate()
        .map(|(i, a)| match &a.model {
            Some(m) => {
                let start = plan.frame_start(i);
                let g = m.gain();
                inverse_filter_in_context(speech, start..start + n, m)
                    .into_iter()
                    .map(|v| v / g)
                    .collect()
            }
            None => zeros.clone(),
        })
        .collect();
    let window = hann_periodic(n);
    let e_hat = overlap_add(
        residuals
            .iter()
            .enumerate()
            .map(|(i, r)| (plan.frame_start(i), r.as_slice())),
        s.len(),
        &window,
    );
    let e_hat = SampledSignal::new(e_hat, rate, "e_hat")?;
    let x_raw = remove_startup_transient(
        integrate_excitation(&e_hat, cfg.integrator_pole)?.samples(),
        cfg.integrator_pole,
    );
    let x_raw = x_raw.as_slice();

    let mut diagnostics: Vec<FrameDiagnostics> = analyses
        .iter()
        .enumerate()
        .map(|(i, a)| FrameDiagnostics {
            index: i,
            start: plan.frame_start(i),
            status: a.status,
            voicing_peak: a.voicing.peak,
            f0_hz: a.voicing.f0_hz,
            tau_frame_samples: None,
            tau_d_samples: 0,
            correlation_peak: None,
            lpc_gain: a.model.as_ref().map(LpcModel::gain),
        })
        .collect();
    for diag in diagnostics.iter_mut().filter(|f| f.voiced()) {
        match estimate_delay_in_context(x_raw, disp, diag.start, n, max_lag) {
            Ok(est) => {
                diag.tau_frame_samples = Some(est.tau_samples);
                diag.correlation_peak = Some(est.peak);
            }
            Err(Error::DegenerateCorrelation(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let mut taus: Vec<usize> = diagnostics.iter().filter_map(|f| f.tau_frame_samples).collect();
    taus.sort_unstable();
    let global_tau = if taus.is_empty() { 0 } else { taus[(taus.len() - 1) / 2] };
    for diag in diagnostics.iter_mut().filter(|f| f.voiced()) {
        diag.tau_d_samples = match cfg.tau_mode {
            TauMode::Global => global_tau,
            TauMode::PerFrame => diag.tau_frame_samples.unwrap_or(global_tau),
        };
    }

    let mut x_frames = Vec::with_capacity(frame_count);
    let mut d_frames = Vec::with_capacity(frame_count);
    for diag in &diagnostics {
        if !diag.voiced() {
            x_frames.push(zeros.clone());
            d_frames.push(zeros.clone());
            continue;
        }
        let seg = &x_raw[diag.start..diag.start + n];
        let mu = mean(seg);
        x_frames.push(seg.iter().map(|v| v - mu).collect());
        d_frames.push(unit_rms(delayed_segment(x_raw, diag.start, n, diag.tau_d_samples)));
    }
    let x_hat = overlap_add(
        x_frames
            .iter()
            .enumerate()
            .map(|(i, f)| (plan.frame_start(i), f.as_slice())),
        s.len(),
        &window,
    );
    let d_hat = overlap_add(
        d_frames
            .iter()
            .enumerate()
            .map(|(i, f)| (plan.frame_start(i), f.as_slice())),
        s.len(),
        &window,
    );
    Ok(TransformOutput {
        e_hat,
        x_hat: SampledSignal::new(x_hat, rate, "x_hat")?,
        d_hat: SampledSignal::new(d_hat, rate, "d_hat")?,
        plan,
        per_frame: diagnostics,
        global_tau_samples: global_tau,
    })
}

/// The integrator starts from rest, so the DC lost to differentiation shows up
/// as a decaying `pole^n` term; its amplitude is fitted by least squares and
/// subtracted.
fn remove_startup_transient(x: &[f64], pole: f64) -> Vec<f64> {
    let mut basis = 1.0;
    let (mut num, mut den) = (0.0, 0.0);
    for v in x {
        num += v * basis;
        den += basis * basis;
        basis *= pole;
    }
    let c = if den > 0.0 { num / den } else { 0.0 };
    let mut basis = 1.0;
    x.iter()
        .map(|v| {
            let out = v - c * basis;
            basis *= pole;
            out
        })
        .collect()
}

/// Scaled so the deviation about the mean has unit RMS; the mean itself is kept
/// so overlapping frames join without offset steps. Constant input maps to zeros.
fn unit_rms(mut frame: Vec<f64>) -> Vec<f64> {
    let mu = mean(&frame);
    let level = (frame.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / frame.len() as f64).sqrt();
    if level <= 1e-12 * mu.abs().max(level) || level == 0.0 {
        frame.iter_mut().for_each(|v| *v = 0.0);
    } else {
        frame.iter_mut().for_each(|v| *v /= level);
    }
    frame
}
