use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{frame_signal, hann_periodic, FramePlan, SampledSignal, Taper};

/// Bins below this fraction of the total power are raised to it.
pub const SPECTRAL_FLOOR: f64 = 1e-8;

/// One-sided power spectrum normalized to unit total power.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    bins: Vec<f64>,
    bin_hz: f64,
}

impl PowerSpectrum {
    /// Normalizes arbitrary non-negative bin powers: divide by the total,
    /// floor at [`SPECTRAL_FLOOR`], renormalize.
    pub fn from_powers(powers: Vec<f64>, bin_hz: f64) -> Result<Self> {
        let total: f64 = powers.iter().sum();
        if !(total > 0.0 && total.is_finite()) || powers.iter().any(|p| *p < 0.0) {
            return Err(Error::invalid("powers", "need non-negative bins with positive total"));
        }
        let mut bins: Vec<f64> = powers.iter().map(|p| (p / total).max(SPECTRAL_FLOOR)).collect();
        let renorm: f64 = bins.iter().sum();
        bins.iter_mut().for_each(|b| *b /= renorm);
        Ok(Self { bins, bin_hz })
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn bin_hz(&self) -> f64 {
        self.bin_hz
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn peak_bin(&self) -> usize {
        self.bins
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0)
    }

    /// Geometric over arithmetic mean of the bins.
    pub fn flatness(&self) -> f64 {
        spectral_flatness(&self.bins)
    }
}

pub fn spectral_flatness(powers: &[f64]) -> f64 {
    let n = powers.len() as f64;
    let arith = powers.iter().sum::<f64>() / n;
    let geo = (powers.iter().map(|p| p.max(f64::MIN_POSITIVE).ln()).sum::<f64>() / n).exp();
    geo / arith
}

/// Reusable Hann-windowed periodogram for one frame length.
///
/// Frames are mean-removed before windowing, then zero-padded to the next
/// power of two.
pub struct SpectrumEstimator {
    frame_len: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    rate_hz: f64,
}

impl SpectrumEstimator {
    pub fn new(frame_len: usize, rate_hz: f64) -> Self {
        let nfft = frame_len.max(2).next_power_of_two();
        Self {
            frame_len,
            window: hann_periodic(frame_len),
            fft: FftPlanner::new().plan_fft_forward(nfft),
            rate_hz,
        }
    }

    pub fn fft_len(&self) -> usize {
        self.fft.len()
    }

    pub fn spectrum(&self, frame: &[f64]) -> Result<PowerSpectrum> {
        if frame.len() != self.frame_len {
            return Err(Error::LengthMismatch {
                left: frame.len(),
                right: self.frame_len,
            });
        }
        let mean = frame.iter().sum::<f64>() / frame.len() as f64;
        let ac_energy: f64 = frame.iter().map(|v| (v - mean) * (v - mean)).sum();
        let raw_energy: f64 = frame.iter().map(|v| v * v).sum();
        if !(ac_energy > 1e-24 * raw_energy && ac_energy > 1e-300) {
            return Err(Error::SilentFrame {
                energy: ac_energy,
                floor: 1e-24 * raw_energy,
            });
        }
        let nfft = self.fft.len();
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); nfft];
        for (slot, (v, w)) in buf.iter_mut().zip(frame.iter().zip(&self.window)) {
            *slot = Complex::new((v - mean) * w, 0.0);
        }
        self.fft.process(&mut buf);
        let half = nfft / 2;
        let powers: Vec<f64> = (0..=half)
            .map(|k| {
                let p = buf[k].norm_sqr();
                if k == 0 || k == half {
                    p
                } else {
                    2.0 * p
                }
            })
            .collect();
        PowerSpectrum::from_powers(powers, self.rate_hz / nfft as f64)
    }
}

/// Normalized power spectrum of one frame.
pub fn normalized_power_spectrum(frame: &[f64], rate_hz: f64) -> Result<PowerSpectrum> {
    SpectrumEstimator::new(frame.len(), rate_hz).spectrum(frame)
}

/// Root-mean-square over bins of the dB ratio `10 log10(p_k / q_k)`.
pub fn log_spectral_distance(p: &PowerSpectrum, q: &PowerSpectrum) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let sum_sq: f64 = p
        .bins()
        .iter()
        .zip(q.bins())
        .map(|(a, b)| {
            let db = 10.0 * (a / b).log10();
            db * db
        })
        .sum();
    Ok((sum_sq / p.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsdPoint {
    pub window: usize,
    pub time_s: f64,
    pub lsd_db: f64,
}

/// Per-window log-spectral distances over the voiced windows of a pair of signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsdSeries {
    pub points: Vec<LsdPoint>,
    pub window_count: usize,
    /// Voiced windows skipped because one of the two frames had no AC energy.
    pub skipped_silent: usize,
}

impl LsdSeries {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lsd_db).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.time_s).collect()
    }

    pub fn mean(&self) -> f64 {
        crate::signal::mean(&self.values())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn smoothed(&self, span: f64) -> Result<Vec<f64>> {
        super::loess::loess_smooth(&self.times(), &self.values(), span)
    }
}

pub fn lsd_over_windows(
    a: &SampledSignal,
    b: &SampledSignal,
    plan: &FramePlan,
    voiced_mask: &[bool],
) -> Result<LsdSeries> {
    a.ensure_same_rate(b)?;
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let plan = plan.with_taper(Taper::Rectangular);
    let frames_a = frame_signal(a, &plan)?;
    let frames_b = frame_signal(b, &plan)?;
    if voiced_mask.len() != frames_a.len() {
        return Err(Error::LengthMismatch {
            left: voiced_mask.len(),
            right: frames_a.len(),
        });
    }
    let estimator = SpectrumEstimator::new(plan.window_len, a.rate_hz());
    let mut points = Vec::new();
    let mut skipped_silent = 0;
    for ((fa, fb), voiced) in frames_a.iter().zip(&frames_b).zip(voiced_mask) {
        if !voiced {
            continue;
        }
        let (pa, pb) = match (estimator.spectrum(&fa.samples), estimator.spectrum(&fb.samples)) {
            (Ok(pa), Ok(pb)) => (pa, pb),
            (Err(Error::SilentFrame { .. }), _) | (_, Err(Error::SilentFrame { .. })) => {
                skipped_silent += 1;
                continue;
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        points.push(LsdPoint {
            window: fa.index,
            time_s: (fa.start as f64 + plan.window_len as f64 / 2.0) / a.rate_hz(),
            lsd_db: log_spectral_distance(&pa, &pb)?,
        });
    }
    if points.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    Ok(LsdSeries {
        points,
        window_count: frames_a.len(),
        skipped_silent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    fn white(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..len).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// Direct DFT of the mean-removed, Hann-windowed frame padded to `nfft`.
    fn dft_powers(frame: &[f64], nfft: usize) -> Vec<f64> {
        let w = hann_periodic(frame.len());
        let m = frame.iter().sum::<f64>() / frame.len() as f64;
        (0..=nfft / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, (x, wn)) in frame.iter().zip(&w).enumerate() {
                    let ph = -2.0 * PI * (k * n) as f64 / nfft as f64;
                    re += (x - m) * wn * ph.cos();
                    im += (x - m) * wn * ph.sin();
                }
                let p = re * re + im * im;
                if k == 0 || k == nfft / 2 {
                    p
                } else {
                    2.0 * p
                }
            })
            .collect()
    }

    #[test]
    fn tone_concentrates_in_mainlobe() {
        let frame: Vec<f64> = (0..50).map(|n| (2.0 * PI * 250.0 * n as f64 / 2000.0).sin()).collect();
        let p = normalized_power_spectrum(&frame, 2000.0).unwrap();
        assert_eq!(p.len(), 33);
        assert_eq!(p.bin_hz(), 31.25);
        assert_eq!(p.peak_bin(), 8);

        // Leakage oracle: the same quantities from a direct DFT.
        let oracle = dft_powers(&frame, 64);
        let total: f64 = oracle.iter().sum();
        let peak_share = oracle[8] / total;
        let lobe_share = (oracle[7] + oracle[8] + oracle[9]) / total;
        assert!((p.bins()[8] - peak_share).abs() < 1e-6);
        // The 50-point Hann mainlobe spans more than one 64-point bin, so the
        // peak bin alone holds well under 80%; its 3-bin mainlobe holds more.
        assert!(peak_share < 0.8);
        assert!(lobe_share > 0.8, "mainlobe share {lobe_share}");
    }

    #[test]
    fn matches_direct_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let frame = white(50, &mut rng);
        let p = normalized_power_spectrum(&frame, 2000.0).unwrap();
        let oracle = PowerSpectrum::from_powers(dft_powers(&frame, 64), 31.25).unwrap();
        for (a, b) in p.bins().iter().zip(oracle.bins()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((p.bins().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.bins().iter().all(|b| *b >= SPECTRAL_FLOOR * 0.99));
    }

    #[test]
    fn white_noise_is_flat_on_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut avg = vec![0.0; 33];
        for _ in 0..100 {
            let p = normalized_power_spectrum(&white(50, &mut rng), 2000.0).unwrap();
            for (a, b) in avg.iter_mut().zip(p.bins()) {
                *a += b / 100.0;
            }
        }
        let flat = spectral_flatness(&avg);
        assert!(flat > 0.8, "flatness {flat}");
    }

    #[test]
    fn silent_frames_are_rejected() {
        assert!(matches!(
            normalized_power_spectrum(&[0.0; 50], 2000.0),
            Err(Error::SilentFrame { .. })
        ));
        assert!(matches!(
            normalized_power_spectrum(&[3.0; 50], 2000.0),
            Err(Error::SilentFrame { .. })
        ));
    }

    #[test]
    fn lsd_of_constructed_ratio() {
        // q has ten times the power of p in the upper half of the bins,
        // before normalization.
        let raw_p: Vec<f64> = (0..32).map(|k| 1.0 + k as f64).collect();
        let raw_q: Vec<f64> = raw_p
            .iter()
            .enumerate()
            .map(|(k, v)| if k >= 16 { 10.0 * v } else { *v })
            .collect();
        let p = PowerSpectrum::from_powers(raw_p.clone(), 1.0).unwrap();
        let q = PowerSpectrum::from_powers(raw_q.clone(), 1.0).unwrap();
        // Closed form: after normalization every ratio is c (low half) or 10c
        // (high half) with c = sum(q) / sum(p) folded in.
        let c = raw_p.iter().sum::<f64>() / raw_q.iter().sum::<f64>();
        let low = 10.0 * (1.0 / c).log10();
        let high = 10.0 * (1.0 / (10.0 * c)).log10();
        let expected = ((16.0 * low * low + 16.0 * high * high) / 32.0).sqrt();
        let got = log_spectral_distance(&p, &q).unwrap();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
        assert_eq!(log_spectral_distance(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn lsd_rejects_mismatched_bins() {
        let p = PowerSpectrum::from_powers(vec![1.0; 4], 1.0).unwrap();
        let q = PowerSpectrum::from_powers(vec![1.0; 5], 1.0).unwrap();
        assert!(log_spectral_distance(&p, &q).is_err());
    }

    #[test]
    fn windows_of_identical_and_scaled_signals() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = SampledSignal::new(white(500, &mut rng), 2000.0, "a").unwrap();
        let plan = FramePlan::evaluation_default(2000.0);
        let mask = vec![true; plan.frame_count(a.len())];
        let same = lsd_over_windows(&a, &a, &plan, &mask).unwrap();
        assert_eq!(same.len(), 19);
        assert!(same.values().iter().all(|v| *v == 0.0));

        let scaled = lsd_over_windows(&a, &a.scaled(3.0).unwrap(), &plan, &mask).unwrap();
        assert!(scaled.values().iter().all(|v| *v < 1e-9));

        let mut partial = mask.clone();
        partial[0] = false;
        partial[5] = false;
        assert_eq!(lsd_over_windows(&a, &a, &plan, &partial).unwrap().len(), 17);
        assert!(lsd_over_windows(&a, &a, &plan, &vec![false; mask.len()]).is_err());
        assert!(lsd_over_windows(&a, &a, &plan, &mask[1..]).is_err());
    }

    fn random_spectrum(rng: &mut ChaCha8Rng) -> PowerSpectrum {
        let powers: Vec<f64> = (0..33).map(|_| rng.random_range(0.0..1.0f64).powi(4)).collect();
        PowerSpectrum::from_powers(powers, 1.0).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn lsd_axioms(seed in 0u64..u64::MAX) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_spectrum(&mut rng);
            let q = random_spectrum(&mut rng);
            let pq = log_spectral_distance(&p, &q).unwrap();
            prop_assert!(pq >= 0.0);
            prop_assert!((pq - log_spectral_distance(&q, &p).unwrap()).abs() <= 1e-12 * pq.max(1.0));
            prop_assert_eq!(log_spectral_distance(&p, &p).unwrap(), 0.0);
            prop_assert!(p.bins() == q.bins() || pq > 0.0);
        }

        #[test]
        fn spectrum_is_scale_free(seed in 0u64..10_000, alpha in 1e-6f64..1e6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frame = white(50, &mut rng);
            let scaled: Vec<f64> = frame.iter().map(|v| v * alpha).collect();
            let p = normalized_power_spectrum(&frame, 2000.0).unwrap();
            let q = normalized_power_spectrum(&scaled, 2000.0).unwrap();
            for (a, b) in p.bins().iter().zip(q.bins()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-8));
            }
        }
    }
}
