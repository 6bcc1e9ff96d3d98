//! Forward co-simulation of one speaker.
//!
//! The vocal fold displacement `x` drives two channels: the glottal flow
//! derivative `e = K dx/dt`, shaped by the vocal tract into speech `s`, and the
//! tissue path `d = k_d x(t - tau_d)` to the neck surface.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpc::{synthesis_filter, LpcModel};
use crate::signal::{delay_samples, SampledSignal};

/// Physiological fundamental frequency range accepted by the simulator.
pub const F0_RANGE_HZ: (f64, f64) = (90.0, 1000.0);
/// Upper bound on the tissue propagation delay.
pub const MAX_NECK_DELAY_S: f64 = 5e-3;
/// Fraction of the open phase spent opening.
const OPENING_FRACTION: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlottalConfig {
    pub f0_hz: f64,
    pub open_quotient: f64,
    /// Peak fold displacement in meters.
    pub amplitude: f64,
    /// Flow gain `K` relating displacement rate to glottal flow.
    pub flow_gain_k: f64,
    /// Standard deviation of cycle-to-cycle period perturbation, in percent.
    #[serde(default)]
    pub jitter_pct: f64,
    /// Seeds the jitter sequence.
    #[serde(default)]
    pub seed: u64,
}

impl Default for GlottalConfig {
    fn default() -> Self {
        Self {
            f0_hz: 120.0,
            open_quotient: 0.6,
            amplitude: 1e-3,
            flow_gain_k: 1.0,
            jitter_pct: 0.0,
            seed: 0,
        }
    }
}

impl GlottalConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = F0_RANGE_HZ;
        if !(self.f0_hz >= lo && self.f0_hz <= hi) {
            return Err(Error::invalid(
                "f0_hz",
                format!("must lie in [{lo}, {hi}] Hz, got {}", self.f0_hz),
            ));
        }
        if !(self.open_quotient > 0.0 && self.open_quotient < 1.0) {
            return Err(Error::invalid("open_quotient", "must lie in (0, 1)"));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid("amplitude", "must be non-negative"));
        }
        if !(self.flow_gain_k > 0.0 && self.flow_gain_k.is_finite()) {
            return Err(Error::invalid("flow_gain_k", "must be positive"));
        }
        if !(self.jitter_pct >= 0.0 && self.jitter_pct < 50.0) {
            return Err(Error::invalid("jitter_pct", "must lie in [0, 50)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckChannel {
    pub k_d: f64,
    pub tau_d_s: f64,
}

impl NeckChannel {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_d > 0.0 && self.k_d.is_finite()) {
            return Err(Error::invalid("k_d", "must be positive"));
        }
        if !(self.tau_d_s >= 0.0 && self.tau_d_s < MAX_NECK_DELAY_S) {
            return Err(Error::invalid(
                "tau_d_s",
                format!("must lie in [0, {MAX_NECK_DELAY_S}) s, got {}", self.tau_d_s),
            ));
        }
        Ok(())
    }

    pub fn delay_samples(&self, rate_hz: f64) -> usize {
        (self.tau_d_s * rate_hz).round() as usize
    }
}

/// All-pole vocal tract `gain / A(z)`; always minimum phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TractRepr", into = "TractRepr")]
pub struct VocalTractModel {
    model: LpcModel,
}

#[derive(Serialize, Deserialize)]
struct TractRepr {
    coefficients: Vec<f64>,
    gain: f64,
}

impl TryFrom<TractRepr> for VocalTractModel {
    type Error = Error;

    fn try_from(repr: TractRepr) -> Result<Self> {
        VocalTractModel::new(repr.coefficients, repr.gain)
    }
}

impl From<VocalTractModel> for TractRepr {
    fn from(tract: VocalTractModel) -> Self {
        TractRepr {
            coefficients: tract.model.coefficients().to_vec(),
            gain: tract.model.gain(),
        }
    }
}

impl VocalTractModel {
    pub fn new(coefficients: Vec<f64>, gain: f64) -> Result<Self> {
        if !(gain > 0.0) {
            return Err(Error::invalid("gain", "must be positive"));
        }
        Ok(Self {
            model: LpcModel::from_coefficients(coefficients, gain)?,
        })
    }

    /// Pass-through tract: no poles, unit gain.
    pub fn identity() -> Self {
        Self {
            model: LpcModel::from_coefficients(Vec::new(), 1.0).expect("empty polynomial is stable"),
        }
    }

    /// Product of conjugate pole pairs `(radius, angle)` with angle in radians/sample.
    pub fn from_poles(poles: &[(f64, f64)], gain: f64) -> Result<Self> {
        let mut poly = vec![1.0];
        for &(radius, angle) in poles {
            if !(0.0..1.0).contains(&radius) {
                return Err(Error::invalid("poles", format!("radius {radius} is outside [0, 1)")));
            }
            let section = [1.0, -2.0 * radius * angle.cos(), radius * radius];
            let mut next = vec![0.0; poly.len() + 2];
            for (i, p) in poly.iter().enumerate() {
                for (j, s) in section.iter().enumerate() {
                    next[i + j] += p * s;
                }
            }
            poly = next;
        }
        Self::new(poly[1..].to_vec(), gain)
    }

    /// Random formant structure: 2-3 pole pairs with radii in [0.85, 0.97]
    /// and resonances between 200 Hz and 0.9 of the 1 kHz band edge.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, rate_hz: f64) -> Result<Self> {
        let pairs = rng.random_range(2..=3);
        let top = (0.9 * rate_hz / 2.0).min(900.0);
        let mut poles: Vec<(f64, f64)> = (0..pairs)
            .map(|_| {
                let radius = rng.random_range(0.85..=0.97);
                let freq = rng.random_range(200.0..top);
                (radius, 2.0 * PI * freq / rate_hz)
            })
            .collect();
        poles.sort_by(|a, b| a.1.total_cmp(&b.1));
        Self::from_poles(&poles, 1.0)
    }

    pub fn order(&self) -> usize {
        self.model.order()
    }

    pub fn coefficients(&self) -> &[f64] {
        self.model.coefficients()
    }

    pub fn gain(&self) -> f64 {
        self.model.gain()
    }

    pub fn as_lpc(&self) -> &LpcModel {
        &self.model
    }
}

/// Additive white Gaussian noise at a given SNR relative to the clean signal power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
}

/// Rosenberg-type polynomial glottal pulse train.
///
/// Each cycle opens with a cubic rise `3u^2 - 2u^3` over two thirds of the
/// open phase, closes with `1 - v^2` over the rest, and stays at zero for the
/// closed phase. Cycle periods are perturbed by `jitter_pct` when non-zero.
pub fn synth_vocal_fold_displacement(cfg: &GlottalConfig, duration_s: f64, rate_hz: f64) -> Result<SampledSignal> {
    cfg.validate()?;
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::invalid("duration_s", "must be positive"));
    }
    if !(rate_hz >= 4.0 * cfg.f0_hz) {
        return Err(Error::invalid(
            "rate_hz",
            format!("must be at least 4 * f0 = {} Hz, got {rate_hz}", 4.0 * cfg.f0_hz),
        ));
    }
    let len = (duration_s * rate_hz).round() as usize;
    let nominal = 1.0 / cfg.f0_hz;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut next_period = || {
        if cfg.jitter_pct == 0.0 {
            nominal
        } else {
            let z: f64 = rand::Rng::sample(&mut rng, StandardNormal);
            nominal * (1.0 + 0.01 * cfg.jitter_pct * z).clamp(0.5, 1.5)
        }
    };

    let mut cycle_start = 0.0;
    let mut period = next_period();
    let samples = (0..len)
        .map(|n| {
            let t = n as f64 / rate_hz;
            while t >= cycle_start + period {
                cycle_start += period;
                period = next_period();
            }
            cfg.amplitude * rosenberg_pulse(t - cycle_start, period, cfg.open_quotient)
        })
        .collect();
    SampledSignal::new(samples, rate_hz, "x")
}

/// Unit-peak pulse shape at time `t` into a cycle of length `period`.
fn rosenberg_pulse(t: f64, period: f64, open_quotient: f64) -> f64 {
    let open = open_quotient * period;
    let rise = OPENING_FRACTION * open;
    let fall = open - rise;
    if t < rise {
        let u = t / rise;
        u * u * (3.0 - 2.0 * u)
    } else if t < open {
        let v = (t - rise) / fall;
        1.0 - v * v
    } else {
        0.0
    }
}

/// `d[n] = k_d * x[n - round(tau_d * rate)]`, zero before the delay.
pub fn neck_displacement(x: &SampledSignal, ch: &NeckChannel) -> Result<SampledSignal> {
    ch.validate()?;
    let delayed = delay_samples(x.samples(), ch.delay_samples(x.rate_hz()));
    SampledSignal::new(delayed.into_iter().map(|v| ch.k_d * v).collect(), x.rate_hz(), "d")
}

/// `e = K dx/dt` by first difference: `e[n] = K rate (x[n] - x[n-1])`, with a
/// one-sided forward difference at the first sample.
///
/// The first difference is the exact discrete inverse of the running sum
/// used by the integrator on the analysis side.
pub fn excitation_from_displacement(x: &SampledSignal, k: f64) -> Result<SampledSignal> {
    if x.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: x.len(),
        });
    }
    let v = x.samples();
    let scale = k * x.rate_hz();
    let mut out = Vec::with_capacity(v.len());
    out.push(scale * (v[1] - v[0]));
    out.extend(v.windows(2).map(|w| scale * (w[1] - w[0])));
    SampledSignal::new(out, x.rate_hz(), "e")
}

/// `s = e * h`: all-pole filtering through the tract, plus optional white noise.
pub fn synthesize_speech(
    e: &SampledSignal,
    tract: &VocalTractModel,
    noise: Option<NoiseSpec>,
) -> Result<SampledSignal> {
    // Re-checked so that hand-built models cannot slip through.
    crate::lpc::step_down(tract.coefficients())?;
    let mut s = synthesis_filter(e.samples(), tract.as_lpc());
    if let Some(noise) = noise {
        add_white_noise(&mut s, noise);
    }
    SampledSignal::new(s, e.rate_hz(), "s")
}

pub(crate) fn add_white_noise(values: &mut [f64], noise: NoiseSpec) {
    let power = values.iter().map(|v| v * v).sum::<f64>() / values.len().max(1) as f64;
    let sigma = (power / 10f64.powf(noise.snr_db / 10.0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    for v in values.iter_mut() {
        *v += sigma * rng.sample::<f64, _>(StandardNormal);
    }
}

/// One simulated speaker with every hidden parameter that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSubject {
    pub x: SampledSignal,
    pub e: SampledSignal,
    pub s: SampledSignal,
    pub d: SampledSignal,
    pub glottal: GlottalConfig,
    pub neck: NeckChannel,
    pub tract: VocalTractModel,
    pub noise: Option<NoiseSpec>,
}

impl SyntheticSubject {
    pub fn rate_hz(&self) -> f64 {
        self.x.rate_hz()
    }

    pub fn delay_samples(&self) -> usize {
        self.neck.delay_samples(self.rate_hz())
    }
}

pub fn make_subject(
    glottal: &GlottalConfig,
    neck: &NeckChannel,
    tract: &VocalTractModel,
    duration_s: f64,
    rate_hz: f64,
    noise: Option<NoiseSpec>,
) -> Result<SyntheticSubject> {
    let x = synth_vocal_fold_displacement(glottal, duration_s, rate_hz)?;
    let e = excitation_from_displacement(&x, glottal.flow_gain_k)?;
    let s = synthesize_speech(&e, tract, noise)?;
    let d = neck_displacement(&x, neck)?;
    Ok(SyntheticSubject {
        x,
        e,
        s,
        d,
        glottal: glottal.clone(),
        neck: *neck,
        tract: tract.clone(),
        noise,
    })
}
