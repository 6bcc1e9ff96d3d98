//! Autocorrelation-method linear prediction.
//!
//! Polynomial convention throughout: `A(z) = 1 + a_1 z^-1 + ... + a_p z^-p`.
//! The inverse (analysis) filter is `A(z)`; the synthesis filter is
//! `gain / A(z)`. Predictor coefficients, `x[n] ~ sum c_i x[n-i]`, are the
//! negated polynomial coefficients and are available through
//! [`LpcModel::predictor_coefficients`].

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::hann_periodic;

/// Frames whose zero-lag autocorrelation falls below `SILENCE_FLOOR * len`
/// are treated as silent.
pub const SILENCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpcModel {
    coefficients: Vec<f64>,
    gain: f64,
    reflection: Vec<f64>,
}

impl LpcModel {
    /// Builds a model from polynomial coefficients, deriving the reflection
    /// coefficients by step-down recursion. Fails unless every reflection
    /// coefficient has magnitude below one.
    pub fn from_coefficients(coefficients: Vec<f64>, gain: f64) -> Result<Self> {
        if !(gain.is_finite() && gain >= 0.0) {
            return Err(Error::invalid("gain", format!("must be non-negative, got {gain}")));
        }
        let reflection = step_down(&coefficients)?;
        Ok(Self {
            coefficients,
            gain,
            reflection,
        })
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn predictor_coefficients(&self) -> Vec<f64> {
        self.coefficients.iter().map(|a| -a).collect()
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn reflection(&self) -> &[f64] {
        &self.reflection
    }

    pub fn with_gain(mut self, gain: f64) -> Self {
        self.gain = gain;
        self
    }

    /// `|gain / A(e^{jw})|^2` at normalized angular frequency `omega`.
    pub fn power_response(&self, omega: f64) -> f64 {
        let (mut re, mut im) = (1.0, 0.0);
        for (i, a) in self.coefficients.iter().enumerate() {
            let phase = omega * (i + 1) as f64;
            re += a * phase.cos();
            im -= a * phase.sin();
        }
        self.gain * self.gain / (re * re + im * im)
    }
}

/// Converts polynomial coefficients to reflection coefficients (the
/// Schur-Cohn stability test). All `|k| < 1` iff all roots of `A(z)` lie
/// strictly inside the unit circle.
pub fn step_down(coefficients: &[f64]) -> Result<Vec<f64>> {
    let p = coefficients.len();
    let mut a = coefficients.to_vec();
    let mut k = vec![0.0; p];
    for m in (0..p).rev() {
        let km = a[m];
        if !km.is_finite() || km.abs() >= 1.0 {
            return Err(Error::UnstableFilter {
                stage: m + 1,
                magnitude: km.abs(),
            });
        }
        k[m] = km;
        let denom = 1.0 - km * km;
        let prev: Vec<f64> = (0..m).map(|i| (a[i] - km * a[m - 1 - i]) / denom).collect();
        a.truncate(m);
        a.copy_from_slice(&prev);
    }
    Ok(k)
}

/// Biased autocorrelation `r_k = sum_n x[n] x[n+k]` for `k = 0..=max_lag`.
pub fn autocorrelation(frame: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag >= frame.len() {
        return Err(Error::invalid(
            "max_lag",
            format!("must be below the frame length {}, got {max_lag}", frame.len()),
        ));
    }
    Ok((0..=max_lag)
        .map(|k| {
            frame[..frame.len() - k]
                .iter()
                .zip(&frame[k..])
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect())
}

/// Solves the Toeplitz normal equations by Levinson-Durbin recursion.
///
/// The gain is the square root of the final prediction error.
pub fn levinson_durbin(r: &[f64], order: usize) -> Result<LpcModel> {
    if order == 0 {
        return Err(Error::invalid("order", "must be at least 1"));
    }
    if order >= r.len() {
        return Err(Error::invalid(
            "order",
            format!("needs {} autocorrelation lags, got {}", order + 1, r.len()),
        ));
    }
    if !(r[0] > 0.0) {
        return Err(Error::invalid("r", format!("r_0 must be positive, got {}", r[0])));
    }
    let mut a: Vec<f64> = Vec::with_capacity(order);
    let mut reflection = Vec::with_capacity(order);
    let mut error = r[0];
    for stage in 1..=order {
        let acc = r[stage] + a.iter().enumerate().map(|(j, aj)| aj * r[stage - 1 - j]).sum::<f64>();
        let k = -acc / error;
        let next: Vec<f64> = (0..a.len()).map(|j| a[j] + k * a[a.len() - 1 - j]).collect();
        a = next;
        a.push(k);
        reflection.push(k);
        error *= 1.0 - k * k;
        if !(error > 0.0) || k.abs() >= 1.0 {
            return Err(Error::SingularRecursion { stage, error });
        }
    }
    Ok(LpcModel {
        coefficients: a,
        gain: error.sqrt(),
        reflection,
    })
}

/// Outcome of analysing one frame.
#[derive(Debug, Clone, PartialEq)]
pub enum LpcOutcome {
    Model(LpcModel),
    /// Frame energy fell below the silence floor; no model was fitted.
    Silent {
        energy: f64,
    },
}

impl LpcOutcome {
    pub fn model(&self) -> Option<&LpcModel> {
        match self {
            LpcOutcome::Model(m) => Some(m),
            LpcOutcome::Silent { .. } => None,
        }
    }
}

/// Pre-emphasis (optional), Hann taper, autocorrelation, Levinson-Durbin.
///
/// The autocorrelation is divided by the taper energy, so the returned gain
/// estimates the residual RMS of the untapered frame.
pub fn lpc_analyze(frame: &[f64], order: usize, pre_emphasis: Option<f64>) -> Result<LpcOutcome> {
    if order == 0 {
        return Err(Error::invalid("order", "must be at least 1"));
    }
    if frame.len() < 4 * order {
        return Err(Error::invalid(
            "frame",
            format!(
                "order {order} needs at least {} samples, got {}",
                4 * order,
                frame.len()
            ),
        ));
    }
    let emphasized: Vec<f64> = match pre_emphasis {
        Some(beta) if beta != 0.0 => {
            let mut prev = 0.0;
            frame
                .iter()
                .map(|&x| {
                    let y = x - beta * prev;
                    prev = x;
                    y
                })
                .collect()
        }
        _ => frame.to_vec(),
    };
    let window = hann_periodic(frame.len());
    let tapered: Vec<f64> = emphasized.iter().zip(&window).map(|(x, w)| x * w).collect();
    let mut r = autocorrelation(&tapered, order)?;
    let floor = SILENCE_FLOOR * frame.len() as f64;
    if r[0] < floor {
        return Ok(LpcOutcome::Silent { energy: r[0] });
    }
    let window_energy: f64 = window.iter().map(|w| w * w).sum();
    r.iter_mut().for_each(|v| *v /= window_energy);
    levinson_durbin(&r, order).map(LpcOutcome::Model)
}

/// FIR inverse filter with zero history: `e[n] = s[n] + sum a_i s[n-i]`.
pub fn inverse_filter(frame: &[f64], model: &LpcModel) -> Vec<f64> {
    inverse_filter_in_context(frame, 0..frame.len(), model)
}

/// Inverse filter over `range` of `signal`, drawing the filter history from
/// the samples preceding the range (zero before the start of the signal).
pub fn inverse_filter_in_context(signal: &[f64], range: Range<usize>, model: &LpcModel) -> Vec<f64> {
    let a = model.coefficients();
    range
        .map(|n| {
            let mut acc = signal[n];
            for (i, ai) in a.iter().enumerate() {
                if let Some(past) = n.checked_sub(i + 1) {
                    acc += ai * signal[past];
                }
            }
            acc
        })
        .collect()
}

/// All-pole synthesis `y[n] = gain * x[n] - sum a_i y[n-i]`, zero initial state.
pub fn synthesis_filter(input: &[f64], model: &LpcModel) -> Vec<f64> {
    let a = model.coefficients();
    let mut out: Vec<f64> = Vec::with_capacity(input.len());
    for (n, &x) in input.iter().enumerate() {
        let mut acc = model.gain() * x;
        for (i, ai) in a.iter().enumerate() {
            if let Some(past) = n.checked_sub(i + 1) {
                acc -= ai * out[past];
            }
        }
        out.push(acc);
    }
    out
}
