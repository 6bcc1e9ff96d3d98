//! Sampled signals and the framing, correlation and filtering primitives the
//! rest of the crate is built from.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniformly sampled real-valued time series.
///
/// Samples are always finite and the rate is always positive; both are
/// checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    samples: Vec<f64>,
    rate_hz: f64,
    label: String,
}

impl SampledSignal {
    pub fn new(samples: Vec<f64>, rate_hz: f64, label: impl Into<String>) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::invalid("rate_hz", format!("must be positive, got {rate_hz}")));
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            samples,
            rate_hz,
            label: label.into(),
        })
    }

    pub fn zeros(len: usize, rate_hz: f64, label: impl Into<String>) -> Result<Self> {
        Self::new(vec![0.0; len], rate_hz, label)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate_hz
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Same rate and label, new samples. Fails on non-finite input.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, self.rate_hz, self.label.clone())
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.with_samples(self.samples.iter().map(|v| v * factor).collect())
    }

    pub fn ensure_same_rate(&self, other: &SampledSignal) -> Result<()> {
        if (self.rate_hz - other.rate_hz).abs() > 1e-9 * self.rate_hz.max(other.rate_hz) {
            return Err(Error::RateMismatch {
                left: self.rate_hz,
                right: other.rate_hz,
            });
        }
        Ok(())
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }
}

/// Multiplicative window applied to each frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    #[default]
    Rectangular,
    Hann,
}

impl Taper {
    pub fn weights(self, len: usize) -> Vec<f64> {
        match self {
            Taper::Rectangular => vec![1.0; len],
            Taper::Hann => hann_periodic(len),
        }
    }
}

/// Periodic Hann window; sums to a constant at 50% overlap.
pub fn hann_periodic(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Symmetric Hann window, centred on `(len - 1) / 2`.
pub fn hann_symmetric(len: usize) -> Vec<f64> {
    if len < 2 {
        return vec![1.0; len];
    }
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

/// Window length, hop and taper for short-time processing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePlan {
    pub window_len: usize,
    pub hop: usize,
    #[serde(default)]
    pub taper: Taper,
}

impl FramePlan {
    pub fn new(window_len: usize, hop: usize, taper: Taper) -> Result<Self> {
        if window_len == 0 {
            return Err(Error::invalid("window_len", "must be positive"));
        }
        if hop == 0 || hop > window_len {
            return Err(Error::invalid(
                "hop",
                format!("must satisfy 0 < hop <= window_len ({window_len}), got {hop}"),
            ));
        }
        Ok(Self { window_len, hop, taper })
    }

    /// Window and hop given in seconds, rounded to whole samples.
    pub fn from_seconds(rate_hz: f64, window_s: f64, hop_s: f64, taper: Taper) -> Result<Self> {
        let window_len = (window_s * rate_hz).round() as usize;
        let hop = (hop_s * rate_hz).round() as usize;
        Self::new(window_len, hop, taper)
    }

    /// 25 ms windows with 50% overlap.
    pub fn evaluation_default(rate_hz: f64) -> Self {
        let window_len = ((0.025 * rate_hz).round() as usize).max(2);
        Self {
            window_len,
            hop: (window_len / 2).max(1),
            taper: Taper::Rectangular,
        }
    }

    pub fn with_taper(mut self, taper: Taper) -> Self {
        self.taper = taper;
        self
    }

    /// `floor((len - N) / hop) + 1`, or zero when the signal is shorter than a window.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.hop + 1
        }
    }

    pub fn frame_start(&self, index: usize) -> usize {
        index * self.hop
    }
}

/// One analysis frame: its index, first sample, and (tapered) samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub start: usize,
    pub samples: Vec<f64>,
}

pub fn frame_signal(sig: &SampledSignal, plan: &FramePlan) -> Result<Vec<Frame>> {
    frame_slice(sig.samples(), plan)
}

pub fn frame_slice(samples: &[f64], plan: &FramePlan) -> Result<Vec<Frame>> {
    if samples.len() < plan.window_len {
        return Err(Error::SignalTooShort {
            len: samples.len(),
            window: plan.window_len,
        });
    }
    let taper = plan.taper.weights(plan.window_len);
    Ok((0..plan.frame_count(samples.len()))
        .map(|index| {
            let start = plan.frame_start(index);
            let samples = samples[start..start + plan.window_len]
                .iter()
                .zip(&taper)
                .map(|(x, w)| x * w)
                .collect();
            Frame { index, start, samples }
        })
        .collect())
}

/// Weighted overlap-add of `(start, frame)` pairs into a signal of `len` samples.
///
/// Each sample is divided by the accumulated synthesis weight. Samples whose
/// weight is (numerically) zero but which are covered by some frame take the
/// plain average of the covering frames; uncovered samples are zero.
pub fn overlap_add<'a, I>(frames: I, len: usize, window: &[f64]) -> Vec<f64>
where
    I: IntoIterator<Item = (usize, &'a [f64])>,
{
    let mut acc = vec![0.0; len];
    let mut weight = vec![0.0; len];
    let mut raw = vec![0.0; len];
    let mut count = vec![0u32; len];
    for (start, frame) in frames {
        for (i, (&v, &w)) in frame.iter().zip(window).enumerate() {
            let n = start + i;
            if n >= len {
                break;
            }
            acc[n] += w * v;
            weight[n] += w;
            raw[n] += v;
            count[n] += 1;
        }
    }
    (0..len)
        .map(|n| {
            if weight[n] > 1e-9 {
                acc[n] / weight[n]
            } else if count[n] > 0 {
                raw[n] / f64::from(count[n])
            } else {
                0.0
            }
        })
        .collect()
}

/// Best lag from a normalized cross-correlation scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationPeak {
    /// `b[n + lag]` best matches `a[n]`; positive when `b` lags `a`.
    pub lag: i64,
    /// Pearson correlation at `lag`, in `[-1, 1]`.
    pub peak: f64,
    /// Correlation at `lag - 1` and `lag + 1`, when both were scanned.
    pub neighbors: Option<(f64, f64)>,
}

impl CorrelationPeak {
    /// Sub-sample lag from a parabola through the peak and its two neighbours.
    /// Falls back to the integer lag at the edge of the scanned range.
    pub fn refined_lag(&self) -> f64 {
        match self.neighbors {
            Some((before, after)) => {
                let curvature = before - 2.0 * self.peak + after;
                if curvature.abs() < 1e-15 {
                    self.lag as f64
                } else {
                    let offset = 0.5 * (before - after) / curvature;
                    self.lag as f64 + offset.clamp(-0.5, 0.5)
                }
            }
            None => self.lag as f64,
        }
    }
}

pub fn cross_correlate(a: &SampledSignal, b: &SampledSignal, max_lag: usize) -> Result<CorrelationPeak> {
    a.ensure_same_rate(b)?;
    let shortest = a.len().min(b.len());
    if max_lag >= shortest {
        return Err(Error::invalid(
            "max_lag",
            format!("must be below the shorter signal length {shortest}, got {max_lag}"),
        ));
    }
    correlate_lags(a.samples(), b.samples(), -(max_lag as i64), max_lag as i64)
}

/// Pearson correlation of `a[n]` against `b[n + lag]` over their overlap.
/// Returns `None` when either side of the overlap has no variance.
pub fn correlation_at(a: &[f64], b: &[f64], lag: i64) -> Option<f64> {
    let (a, b) = if lag >= 0 {
        let lag = lag as usize;
        if lag >= b.len() {
            return None;
        }
        let n = a.len().min(b.len() - lag);
        (&a[..n], &b[lag..lag + n])
    } else {
        let lag = lag.unsigned_abs() as usize;
        if lag >= a.len() {
            return None;
        }
        let n = b.len().min(a.len() - lag);
        (&a[lag..lag + n], &b[..n])
    };
    pearson(a, b)
}

/// Scans lags in `[min_lag, max_lag]`, preferring the smallest `|lag|` on ties.
pub fn correlate_lags(a: &[f64], b: &[f64], min_lag: i64, max_lag: i64) -> Result<CorrelationPeak> {
    if a.iter().all(|v| *v == 0.0) || b.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateCorrelation("all-zero input"));
    }
    if min_lag > max_lag {
        return Err(Error::invalid("max_lag", "empty lag range"));
    }
    let values: Vec<Option<f64>> = (min_lag..=max_lag).map(|lag| correlation_at(a, b, lag)).collect();

    let mut order: Vec<i64> = (min_lag..=max_lag).collect();
    order.sort_by_key(|lag| (lag.abs(), *lag < 0));

    let mut best: Option<(i64, f64)> = None;
    for lag in order {
        if let Some(value) = values[(lag - min_lag) as usize] {
            if best.is_none_or(|(_, v)| value > v) {
                best = Some((lag, value));
            }
        }
    }
    let (lag, peak) = best.ok_or(Error::DegenerateCorrelation("constant input"))?;
    let at = |l: i64| {
        if l < min_lag || l > max_lag {
            None
        } else {
            values[(l - min_lag) as usize]
        }
    };
    let neighbors = match (at(lag - 1), at(lag + 1)) {
        (Some(before), Some(after)) => Some((before, after)),
        _ => None,
    };
    Ok(CorrelationPeak { lag, peak, neighbors })
}

/// Pearson correlation coefficient; `None` for mismatched, empty or constant input.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let scale = (saa * sbb).sqrt();
    let tiny = 1e-300;
    if saa <= tiny || sbb <= tiny || scale <= tiny {
        return None;
    }
    // Relative guard: a "constant" made non-constant only by rounding.
    let energy_a: f64 = a.iter().map(|v| v * v).sum();
    let energy_b: f64 = b.iter().map(|v| v * v).sum();
    if saa <= 1e-24 * energy_a || sbb <= 1e-24 * energy_b {
        return None;
    }
    Some((sab / scale).clamp(-1.0, 1.0))
}

/// First-order DC blocker `y[n] = x[n] - x[n-1] + pole * y[n-1]`.
pub fn dc_block(sig: &SampledSignal, pole: f64) -> Result<SampledSignal> {
    if !(pole > 0.0 && pole < 1.0) {
        return Err(Error::invalid("pole", format!("must lie in (0, 1), got {pole}")));
    }
    let mut prev_x = 0.0;
    let mut prev_y = 0.0;
    let out = sig
        .samples()
        .iter()
        .map(|&x| {
            let y = x - prev_x + pole * prev_y;
            prev_x = x;
            prev_y = y;
            y
        })
        .collect();
    sig.with_samples(out)
}

/// Integer-factor decimation behind a windowed-sinc anti-alias filter with
/// cutoff at 0.45 of the target rate. The filter is zero-phase.
pub fn resample_decimate(sig: &SampledSignal, target_rate_hz: f64) -> Result<SampledSignal> {
    if !(target_rate_hz.is_finite() && target_rate_hz > 0.0) {
        return Err(Error::invalid("target_rate_hz", "must be positive"));
    }
    let ratio = sig.rate_hz() / target_rate_hz;
    let factor = ratio.round();
    if factor < 1.0 || (ratio - factor).abs() > 1e-9 * ratio {
        return Err(Error::NonIntegerRatio {
            from: sig.rate_hz(),
            to: target_rate_hz,
        });
    }
    let factor = factor as usize;
    if factor == 1 {
        return SampledSignal::new(sig.samples().to_vec(), target_rate_hz, sig.label());
    }

    let taps = anti_alias_taps(factor, 0.45 / factor as f64);
    let half = (taps.len() / 2) as i64;
    let x = sig.samples();
    let out: Vec<f64> = (0..x.len().div_ceil(factor))
        .map(|m| {
            let centre = (m * factor) as i64;
            taps.iter()
                .enumerate()
                .filter_map(|(j, h)| {
                    let idx = centre + half - j as i64;
                    (idx >= 0 && (idx as usize) < x.len()).then(|| h * x[idx as usize])
                })
                .sum()
        })
        .collect();
    SampledSignal::new(out, target_rate_hz, sig.label())
}

/// Blackman-windowed sinc low-pass, unit DC gain. `cutoff` is in cycles/sample.
fn anti_alias_taps(factor: usize, cutoff: f64) -> Vec<f64> {
    let len = 64 * factor + 1;
    let mid = (len / 2) as f64;
    let mut taps: Vec<f64> = (0..len)
        .map(|n| {
            let t = n as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            let phase = 2.0 * PI * n as f64 / (len - 1) as f64;
            let blackman = 0.42 - 0.5 * phase.cos() + 0.08 * (2.0 * phase).cos();
            sinc * blackman
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|h| *h /= sum);
    taps
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
    }
}

/// `out[n] = values[n - delay]`, zero-filled at the head.
pub fn delay_samples(values: &[f64], delay: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    if delay < values.len() {
        out[delay..].copy_from_slice(&values[..values.len() - delay]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sig(samples: Vec<f64>) -> SampledSignal {
        SampledSignal::new(samples, 2000.0, "test").unwrap()
    }

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        // xorshift; good enough for test fixtures
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        (0..len)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect()
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(SampledSignal::new(vec![1.0], 0.0, "x").is_err());
        assert!(matches!(
            SampledSignal::new(vec![1.0, f64::NAN], 10.0, "x"),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(FramePlan::new(50, 0, Taper::Rectangular).is_err());
        assert!(FramePlan::new(50, 51, Taper::Rectangular).is_err());
    }

    #[test]
    fn frame_offsets() {
        let plan = FramePlan::new(50, 25, Taper::Rectangular).unwrap();
        let frames = frame_signal(&sig((0..100).map(f64::from).collect()), &plan).unwrap();
        let starts: Vec<usize> = frames.iter().map(|f| f.start).collect();
        assert_eq!(starts, vec![0, 25, 50]);
        assert_eq!(frames[2].samples[0], 50.0);
        assert_eq!(frames[2].samples[49], 99.0);

        assert_eq!(frame_signal(&sig(vec![1.0; 50]), &plan).unwrap().len(), 1);
        assert!(matches!(
            frame_signal(&sig(vec![1.0; 49]), &plan),
            Err(Error::SignalTooShort { len: 49, window: 50 })
        ));
    }

    #[test]
    fn hann_taper_is_applied() {
        let plan = FramePlan::new(8, 4, Taper::Hann).unwrap();
        let frames = frame_signal(&sig(vec![2.0; 8]), &plan).unwrap();
        let expected: Vec<f64> = hann_periodic(8).iter().map(|w| 2.0 * w).collect();
        assert_eq!(frames[0].samples, expected);
    }

    #[test]
    fn overlap_add_reconstructs_under_hann() {
        let x = noise(200, 3);
        let plan = FramePlan::new(50, 25, Taper::Rectangular).unwrap();
        let frames = frame_slice(&x, &plan).unwrap();
        let window = hann_periodic(50);
        let y = overlap_add(frames.iter().map(|f| (f.start, f.samples.as_slice())), x.len(), &window);
        let covered = plan.frame_start(plan.frame_count(x.len()) - 1) + 50;
        for n in 0..covered {
            assert!((x[n] - y[n]).abs() < 1e-12, "sample {n}");
        }
        assert!(y[covered..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn correlation_identity_and_shift() {
        let a = noise(400, 11);
        let peak = cross_correlate(&sig(a.clone()), &sig(a.clone()), 20).unwrap();
        assert_eq!(peak.lag, 0);
        assert!((peak.peak - 1.0).abs() < 1e-12);

        let b = delay_samples(&a, 7);
        let peak = cross_correlate(&sig(a), &sig(b), 20).unwrap();
        assert_eq!(peak.lag, 7);
        assert!(peak.peak > 0.999);
    }

    #[test]
    fn correlation_of_delayed_sine() {
        // 2.5 ms at 2 kHz is 5 samples. The period is 20 samples, so the
        // scan range must stay below 15 to avoid the next cycle.
        let rate = 2000.0;
        let a: Vec<f64> = (0..400).map(|n| (2.0 * PI * 100.0 * n as f64 / rate).sin()).collect();
        let b: Vec<f64> = (0..400)
            .map(|n| (2.0 * PI * 100.0 * (n as f64 / rate - 0.0025)).sin())
            .collect();
        // Exhaustive scan of the analytic correlation cos(2*pi*f*(lag/rate - 2.5ms)).
        let oracle = (-9i64..=9)
            .max_by(|x, y| {
                let c = |l: i64| (2.0 * PI * 100.0 * (l as f64 / rate - 0.0025)).cos();
                c(*x).partial_cmp(&c(*y)).unwrap()
            })
            .unwrap();
        assert_eq!(oracle, 5);
        let peak = cross_correlate(&sig(a), &sig(b), 9).unwrap();
        assert_eq!(peak.lag, oracle);
    }

    #[test]
    fn correlation_errors() {
        assert!(matches!(
            cross_correlate(&sig(vec![0.0; 50]), &sig(noise(50, 1)), 5),
            Err(Error::DegenerateCorrelation(_))
        ));
        assert!(cross_correlate(&sig(noise(10, 1)), &sig(noise(50, 2)), 10).is_err());
        let other = SampledSignal::new(noise(50, 2), 1000.0, "b").unwrap();
        assert!(matches!(
            cross_correlate(&sig(noise(50, 1)), &other, 5),
            Err(Error::RateMismatch { .. })
        ));
    }

    #[test]
    fn ties_prefer_smallest_lag() {
        // Period-4 square wave: lags 0 and +-4 correlate perfectly.
        let a: Vec<f64> = (0..64).map(|n| if n % 4 < 2 { 1.0 } else { -1.0 }).collect();
        let peak = correlate_lags(&a, &a, -8, 8).unwrap();
        assert_eq!(peak.lag, 0);
    }

    #[test]
    fn parabolic_refinement() {
        let peak = CorrelationPeak {
            lag: 3,
            peak: 1.0,
            neighbors: Some((0.5, 0.9)),
        };
        // Vertex of the parabola through (2, .5), (3, 1), (4, .9).
        let expected = 3.0 + 0.5 * (0.5 - 0.9) / (0.5 - 2.0 + 0.9);
        assert!((peak.refined_lag() - expected).abs() < 1e-12);
        assert_eq!(
            CorrelationPeak {
                neighbors: None,
                ..peak
            }
            .refined_lag(),
            3.0
        );
    }

    #[test]
    fn dc_block_basics() {
        let out = dc_block(&sig(vec![0.0; 100]), 0.995).unwrap();
        assert!(out.samples().iter().all(|v| *v == 0.0));

        let out = dc_block(&sig(vec![1.0; 5000]), 0.995).unwrap();
        assert!(out.samples()[4999].abs() < 1e-9);
        assert!(out.samples().windows(2).all(|w| w[1] <= w[0]));

        let pole = 0.9;
        let mut impulse = vec![0.0; 10];
        impulse[0] = 1.0;
        let out = dc_block(&sig(impulse), pole).unwrap();
        let mut expected = vec![1.0, pole - 1.0];
        for _ in 2..10 {
            let last = *expected.last().unwrap();
            expected.push(pole * last);
        }
        for (got, want) in out.samples().iter().zip(&expected) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(dc_block(&sig(vec![1.0]), 1.0).is_err());
    }

    #[test]
    fn decimation_lengths_and_identity() {
        let x = SampledSignal::new(noise(16_000, 5), 16_000.0, "x").unwrap();
        let y = resample_decimate(&x, 2000.0).unwrap();
        assert_eq!(y.len(), 2000);
        assert_eq!(y.rate_hz(), 2000.0);

        let z = resample_decimate(&sig(noise(100, 4)), 2000.0).unwrap();
        assert_eq!(z.samples(), sig(noise(100, 4)).samples());

        assert!(matches!(
            resample_decimate(&x, 3000.0),
            Err(Error::NonIntegerRatio { .. })
        ));
    }

    #[test]
    fn decimation_preserves_sine_amplitude() {
        let rate = 16_000.0;
        let x: Vec<f64> = (0..16_000)
            .map(|n| (2.0 * PI * 300.0 * n as f64 / rate).sin())
            .collect();
        let y = resample_decimate(&SampledSignal::new(x, rate, "x").unwrap(), 2000.0).unwrap();
        for (m, v) in y.samples().iter().enumerate().skip(100).take(1800) {
            let want = (2.0 * PI * 300.0 * m as f64 / 2000.0).sin();
            assert!((v - want).abs() < 0.01, "sample {m}: {v} vs {want}");
        }
    }

    fn peak_bin(values: &[f64]) -> usize {
        // Plain DFT magnitude; the oracle stays independent of rustfft.
        let n = values.len();
        (1..n / 2)
            .max_by(|&a, &b| {
                let mag = |k: usize| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (i, v) in values.iter().enumerate() {
                        let ph = -2.0 * PI * (k * i) as f64 / n as f64;
                        re += v * ph.cos();
                        im += v * ph.sin();
                    }
                    re * re + im * im
                };
                mag(a).partial_cmp(&mag(b)).unwrap()
            })
            .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn framing_matches_index_formula(len in 1usize..400, window in 1usize..80, hop_frac in 0.01f64..1.0) {
            let hop = ((window as f64 * hop_frac).ceil() as usize).clamp(1, window);
            let plan = FramePlan::new(window, hop, Taper::Rectangular).unwrap();
            let x: Vec<f64> = (0..len).map(|n| n as f64).collect();
            match frame_slice(&x, &plan) {
                Ok(frames) => {
                    prop_assert_eq!(frames.len(), (len - window) / hop + 1);
                    for (i, f) in frames.iter().enumerate() {
                        let expected: Vec<f64> = (i * hop..i * hop + window).map(|n| n as f64).collect();
                        prop_assert_eq!(&f.samples, &expected);
                    }
                }
                Err(_) => prop_assert!(len < window),
            }
        }

        #[test]
        fn correlation_recovers_any_shift(seed in 0u64..1000, shift in -15i64..=15) {
            let a = noise(300, seed);
            let b: Vec<f64> = if shift >= 0 {
                delay_samples(&a, shift as usize)
            } else {
                let k = shift.unsigned_abs() as usize;
                let mut v = a[k..].to_vec();
                v.extend(std::iter::repeat_n(0.0, k));
                v
            };
            let peak = correlate_lags(&a, &b, -15, 15).unwrap();
            prop_assert_eq!(peak.lag, shift);
        }

        #[test]
        fn dc_block_settles_to_zero_mean(offset in -10.0f64..10.0, amp in 0.0f64..1.0, freq in 20.0f64..900.0, seed in 0u64..100) {
            // A partial sine cycle contributes at most amp / (pi f / rate) / len to the mean.
            let n_total = 60_000;
            let jitter = noise(n_total, seed);
            let x: Vec<f64> = (0..n_total)
                .map(|n| offset + amp * (2.0 * PI * freq * n as f64 / 2000.0).sin() + 0.01 * jitter[n])
                .collect();
            let y = dc_block(&sig(x), 0.995).unwrap();
            let settled = mean(&y.samples()[10_000..]);
            prop_assert!(settled.abs() < 1e-3, "mean {settled}");
        }

        #[test]
        fn decimation_keeps_tone_bin(k in 1usize..50) {
            // Tone on an exact bin of the 256-point output grid, below 0.4 * target.
            let freq = k as f64 * 2000.0 / 256.0 * 3.0;
            prop_assume!(freq < 0.4 * 2000.0);
            let x: Vec<f64> = (0..256 * 8 * 2).map(|n| (2.0 * PI * freq * n as f64 / 16_000.0).cos()).collect();
            let y = resample_decimate(&SampledSignal::new(x, 16_000.0, "x").unwrap(), 2000.0).unwrap();
            prop_assert_eq!(peak_bin(&y.samples()[128..384]), 3 * k);
        }
    }
}
