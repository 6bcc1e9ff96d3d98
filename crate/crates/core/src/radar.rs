//! FMCW radar vibrometry chain: beat signal synthesis for a vibrating point
//! reflector, range FFT, bin selection and phase-to-displacement conversion.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{hann_symmetric, mean, SampledSignal};
use crate::source_filter::NoiseSpec;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Minimum ratio of the target bin magnitude to the median bin magnitude.
pub const COHERENCE_RATIO: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChirpConfig {
    pub start_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub chirp_duration_s: f64,
    pub prf_hz: f64,
    pub adc_samples_per_chirp: usize,
    pub adc_rate_hz: f64,
}

impl Default for ChirpConfig {
    fn default() -> Self {
        Self {
            start_freq_hz: 77e9,
            bandwidth_hz: 3.6e9,
            chirp_duration_s: 60e-6,
            prf_hz: 2000.0,
            adc_samples_per_chirp: 256,
            adc_rate_hz: 256.0 / 60e-6,
        }
    }
}

impl ChirpConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("start_freq_hz", self.start_freq_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("chirp_duration_s", self.chirp_duration_s),
            ("prf_hz", self.prf_hz),
            ("adc_rate_hz", self.adc_rate_hz),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::invalid(field, format!("must be positive, got {value}")));
            }
        }
        if self.adc_samples_per_chirp < 2 {
            return Err(Error::invalid("adc_samples_per_chirp", "need at least 2 samples"));
        }
        let sampling_time = self.adc_samples_per_chirp as f64 / self.adc_rate_hz;
        if sampling_time > self.chirp_duration_s * (1.0 + 1e-9) {
            return Err(Error::invalid(
                "adc_rate_hz",
                format!(
                    "{} samples take {sampling_time:e} s, longer than the {:e} s chirp",
                    self.adc_samples_per_chirp, self.chirp_duration_s
                ),
            ));
        }
        if self.prf_hz * self.chirp_duration_s > 1.0 + 1e-9 {
            return Err(Error::invalid("prf_hz", "chirps would overlap"));
        }
        Ok(())
    }

    /// Frequency sweep rate in Hz/s.
    pub fn slope(&self) -> f64 {
        self.bandwidth_hz / self.chirp_duration_s
    }

    /// Carrier wavelength at the start frequency.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.start_freq_hz
    }

    /// Wavelength governing the phase of a Hann-windowed range bin.
    ///
    /// The symmetric window centres the bin phase at the middle ADC sample,
    /// where the instantaneous frequency is above the start frequency.
    pub fn effective_wavelength(&self) -> f64 {
        let centre = (self.adc_samples_per_chirp - 1) as f64 / (2.0 * self.adc_rate_hz);
        SPEED_OF_LIGHT / (self.start_freq_hz + self.slope() * centre)
    }

    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)
    }

    pub fn beat_frequency(&self, range_m: f64) -> f64 {
        2.0 * self.slope() * range_m / SPEED_OF_LIGHT
    }

    pub fn bin_spacing_hz(&self) -> f64 {
        self.adc_rate_hz / self.adc_samples_per_chirp as f64
    }

    pub fn bin_range_m(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_spacing_hz() * SPEED_OF_LIGHT / (2.0 * self.slope())
    }

    pub fn nearest_bin(&self, range_m: f64) -> usize {
        (self.beat_frequency(range_m) / self.bin_spacing_hz()).round() as usize
    }
}

/// Vibrating point reflector in front of the radar.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetScene {
    pub nominal_range_m: f64,
    /// Meters, sampled at the chirp repetition rate.
    pub displacement: SampledSignal,
    pub reflectivity: f64,
    /// Complex white noise power relative to a unit-reflectivity return.
    pub noise: Option<NoiseSpec>,
}

impl TargetScene {
    pub fn new(displacement: SampledSignal) -> Self {
        Self {
            nominal_range_m: 0.25,
            displacement,
            reflectivity: 1.0,
            noise: None,
        }
    }
}

/// Complex beat samples, one row per chirp.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatMatrix {
    pub config: ChirpConfig,
    chirps: usize,
    data: Vec<Complex64>,
}

impl BeatMatrix {
    pub fn from_data(config: ChirpConfig, chirps: usize, data: Vec<Complex64>) -> Result<Self> {
        config.validate()?;
        if data.len() != chirps * config.adc_samples_per_chirp {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: chirps * config.adc_samples_per_chirp,
            });
        }
        Ok(Self { config, chirps, data })
    }

    pub fn chirps(&self) -> usize {
        self.chirps
    }

    pub fn samples_per_chirp(&self) -> usize {
        self.config.adc_samples_per_chirp
    }

    pub fn row(&self, chirp: usize) -> &[Complex64] {
        let m = self.samples_per_chirp();
        &self.data[chirp * m..(chirp + 1) * m]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Sum of two returns recorded with the same waveform.
    pub fn superpose(&self, other: &BeatMatrix) -> Result<BeatMatrix> {
        if self.config != other.config {
            return Err(Error::invalid("config", "beat matrices use different chirp settings"));
        }
        if self.chirps != other.chirps {
            return Err(Error::LengthMismatch {
                left: self.chirps,
                right: other.chirps,
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(BeatMatrix {
            config: self.config,
            chirps: self.chirps,
            data,
        })
    }
}

/// Beat signal `a exp(j (2 pi f_b t + 4 pi R / lambda))` per chirp, with
/// `R = R0 + d[m]` and `f_b = 2 slope R / c`.
pub fn simulate_beat_signal(scene: &TargetScene, cfg: &ChirpConfig) -> Result<BeatMatrix> {
    cfg.validate()?;
    let rate = scene.displacement.rate_hz();
    if (rate - cfg.prf_hz).abs() > 1e-9 * cfg.prf_hz {
        return Err(Error::RateMismatch {
            left: rate,
            right: cfg.prf_hz,
        });
    }
    if !(scene.nominal_range_m > 0.0) {
        return Err(Error::invalid("nominal_range_m", "must be positive"));
    }
    let bound = cfg.range_resolution() / 2.0;
    let peak = scene.displacement.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak >= bound {
        return Err(Error::DisplacementOutOfBin {
            peak_m: peak,
            bound_m: bound,
        });
    }
    let m = cfg.adc_samples_per_chirp;
    let chirps = scene.displacement.len();
    let lambda = cfg.wavelength();
    let mut data = vec![Complex64::new(0.0, 0.0); chirps * m];
    data.par_chunks_mut(m)
        .zip(scene.displacement.samples().par_iter())
        .for_each(|(row, &d)| {
            let range = scene.nominal_range_m + d;
            let step = 2.0 * PI * cfg.beat_frequency(range) / cfg.adc_rate_hz;
            let phase = 4.0 * PI * range / lambda;
            for (n, v) in row.iter_mut().enumerate() {
                *v = Complex64::from_polar(scene.reflectivity, step * n as f64 + phase);
            }
        });
    if let Some(noise) = scene.noise {
        let sigma = (0.5 * 10f64.powf(-noise.snr_db / 10.0)).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        for v in data.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += Complex64::new(sigma * re, sigma * im);
        }
    }
    BeatMatrix::from_data(*cfg, chirps, data)
}

/// Fast-time spectra, one row per chirp, one column per range bin.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    pub config: ChirpConfig,
    chirps: usize,
    data: Vec<Complex64>,
}

impl RangeProfile {
    pub fn chirps(&self) -> usize {
        self.chirps
    }

    pub fn bins(&self) -> usize {
        self.config.adc_samples_per_chirp
    }

    pub fn row(&self, chirp: usize) -> &[Complex64] {
        let m = self.bins();
        &self.data[chirp * m..(chirp + 1) * m]
    }

    pub fn at(&self, chirp: usize, bin: usize) -> Complex64 {
        self.data[chirp * self.bins() + bin]
    }

    /// Magnitude of each bin averaged over chirps.
    pub fn mean_magnitudes(&self) -> Vec<f64> {
        let m = self.bins();
        let mut acc = vec![0.0; m];
        for row in self.data.chunks(m) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v.norm();
            }
        }
        let count = self.chirps.max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= count);
        acc
    }
}

/// Hann-windowed FFT over fast time.
pub fn range_fft(beat: &BeatMatrix) -> RangeProfile {
    let m = beat.samples_per_chirp();
    let window = hann_symmetric(m);
    let fft = FftPlanner::new().plan_fft_forward(m);
    let mut data: Vec<Complex64> = beat
        .data()
        .chunks(m)
        .flat_map(|row| row.iter().zip(&window).map(|(v, w)| v * w))
        .collect();
    data.par_chunks_mut(m).for_each(|row| fft.process(row));
    RangeProfile {
        config: beat.config,
        chirps: beat.chirps(),
        data,
    }
}

/// Removes jumps larger than pi between consecutive phase samples.
pub fn unwrap_phase(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    for (i, &p) in phases.iter().enumerate() {
        if i > 0 {
            let delta = p - phases[i - 1];
            if delta > PI {
                offset -= 2.0 * PI * ((delta + PI) / (2.0 * PI)).floor();
            } else if delta < -PI {
                offset += 2.0 * PI * ((-delta + PI) / (2.0 * PI)).floor();
            }
        }
        out.push(p + offset);
    }
    out
}

/// `d = lambda phi / (4 pi)`.
pub fn phase_to_displacement(phase: f64, wavelength: f64) -> f64 {
    wavelength * phase / (4.0 * PI)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub displacement: SampledSignal,
    pub bin: usize,
    pub bin_range_m: f64,
    /// Target bin magnitude over the median bin magnitude.
    pub snr_db: f64,
}

/// Slow-time phase at one range bin, unwrapped and scaled to meters.
///
/// With `bin` absent the strongest non-negative-frequency bin is used.
pub fn extract_displacement(profile: &RangeProfile, bin: Option<usize>) -> Result<Extraction> {
    if profile.chirps() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: profile.chirps(),
        });
    }
    let mags = profile.mean_magnitudes();
    let bin = match bin {
        Some(b) if b >= profile.bins() => {
            return Err(Error::invalid("bin", format!("must be below {}", profile.bins())));
        }
        Some(b) => b,
        None => (0..=profile.bins() / 2)
            .max_by(|&a, &b| mags[a].total_cmp(&mags[b]).then(b.cmp(&a)))
            .unwrap_or(0),
    };
    let mut sorted = mags.clone();
    sorted.sort_by(f64::total_cmp);
    let median = 0.5 * (sorted[(sorted.len() - 1) / 2] + sorted[sorted.len() / 2]);
    let ratio = mags[bin] / median;
    let ratio_db = 20.0 * ratio.log10();
    if mags[bin] == 0.0 || ratio.is_nan() || ratio < COHERENCE_RATIO {
        return Err(Error::NoCoherentTarget {
            bin,
            ratio_db: if ratio_db.is_nan() { f64::NEG_INFINITY } else { ratio_db },
        });
    }
    let wrapped: Vec<f64> = (0..profile.chirps()).map(|m| profile.at(m, bin).arg()).collect();
    let lambda = profile.config.effective_wavelength();
    let meters: Vec<f64> = unwrap_phase(&wrapped)
        .into_iter()
        .map(|p| phase_to_displacement(p, lambda))
        .collect();
    let mu = mean(&meters);
    let displacement = SampledSignal::new(
        meters.into_iter().map(|v| v - mu).collect(),
        profile.config.prf_hz,
        "d_radar",
    )?;
    Ok(Extraction {
        displacement,
        bin,
        bin_range_m: profile.config.bin_range_m(bin),
        snr_db: ratio_db,
    })
}

/// Simulation followed by range FFT and automatic-bin extraction.
pub fn measure_displacement(scene: &TargetScene, cfg: &ChirpConfig) -> Result<Extraction> {
    extract_displacement(&range_fft(&simulate_beat_signal(scene, cfg)?), None)
}
