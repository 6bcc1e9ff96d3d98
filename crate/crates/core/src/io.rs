//! File formats.
//!
//! Signals travel as WAV (PCM16 or float32), as CSV with a `# rate_hz=`
//! header and one sample per line, or as raw little-endian float32 with a
//! JSON sidecar. Beat matrices use interleaved complex float32 with a sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::{BeatMatrix, ChirpConfig};
use crate::signal::SampledSignal;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavFormat {
    /// 16-bit integers; samples are clipped to [-1, 1].
    Pcm16,
    #[default]
    Float32,
}

pub fn write_wav(path: &Path, sig: &SampledSignal, format: WavFormat) -> Result<()> {
    let rate = sig.rate_hz();
    if rate.fract() != 0.0 || rate > f64::from(u32::MAX) {
        return Err(Error::format(
            path,
            format!("WAV needs an integer sample rate, got {rate}"),
        ));
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: rate as u32,
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => hound::SampleFormat::Int,
            WavFormat::Float32 => hound::SampleFormat::Float,
        },
    };
    let wav_err = |e: hound::Error| wav_error(path, e);
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &v in sig.samples() {
        match format {
            WavFormat::Pcm16 => writer
                .write_sample((v.clamp(-1.0, 1.0) * f64::from(i16::MAX)).round() as i16)
                .map_err(wav_err)?,
            WavFormat::Float32 => writer.write_sample(v as f32).map_err(wav_err)?,
        }
    }
    writer.finalize().map_err(wav_err)
}

/// Reads a WAV file; multi-channel input is averaged to mono.
pub fn read_wav(path: &Path) -> Result<SampledSignal> {
    let wav_err = |e: hound::Error| wav_error(path, e);
    let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        hound::SampleFormat::Int => {
            let full_scale = f64::from(1u32 << (spec.bits_per_sample - 1));
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / full_scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err)?
        }
    };
    let channels = usize::from(spec.channels.max(1));
    let samples = interleaved
        .chunks(channels)
        .map(|c| c.iter().sum::<f64>() / channels as f64)
        .collect();
    SampledSignal::new(samples, f64::from(spec.sample_rate), label_of(path))
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format(path, other.to_string()),
    }
}

fn label_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// One sample per line after a `# rate_hz=<rate>` header. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv(path: &Path, sig: &SampledSignal) -> Result<()> {
    let mut text = format!("# rate_hz={}\n", sig.rate_hz());
    for v in sig.samples() {
        text.push_str(&v.to_string());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<SampledSignal> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rate = None;
    let mut samples = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(value) = comment.trim().strip_prefix("rate_hz=") {
                rate = Some(
                    value
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::format(path, format!("bad rate `{value}`: {e}")))?,
                );
            }
            continue;
        }
        let v = line
            .parse::<f64>()
            .map_err(|e| Error::format(path, format!("line {}: `{line}`: {e}", line_no + 1)))?;
        samples.push(v);
    }
    let rate = rate.ok_or_else(|| Error::format(path, "missing `# rate_hz=` header"))?;
    SampledSignal::new(samples, rate, label_of(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SignalSidecar {
    rate_hz: f64,
    samples: usize,
    label: String,
    encoding: String,
}

/// Raw little-endian float32 samples plus a `.json` sidecar with the rate.
pub fn write_f32(path: &Path, sig: &SampledSignal) -> Result<()> {
    let bytes: Vec<u8> = sig.samples().iter().flat_map(|v| (*v as f32).to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    write_json(
        &sidecar_path(path),
        &SignalSidecar {
            rate_hz: sig.rate_hz(),
            samples: sig.len(),
            label: sig.label().to_string(),
            encoding: "f32le".into(),
        },
    )
}

pub fn read_f32(path: &Path) -> Result<SampledSignal> {
    let meta: SignalSidecar = read_json(&sidecar_path(path))?;
    let values = read_f32_values(path)?;
    if values.len() != meta.samples {
        return Err(Error::format(
            path,
            format!("sidecar promises {} samples, file holds {}", meta.samples, values.len()),
        ));
    }
    SampledSignal::new(values, meta.rate_hz, meta.label)
}

fn read_f32_values(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::format(path, "length is not a multiple of 4 bytes"));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect())
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Reads a signal, choosing the format from the extension.
pub fn read_signal(path: &Path) -> Result<SampledSignal> {
    match extension(path).as_str() {
        "wav" => read_wav(path),
        "csv" => read_csv(path),
        "f32" | "bin" | "raw" => read_f32(path),
        other => Err(Error::format(path, format!("unknown signal format `.{other}`"))),
    }
}

/// Writes a signal, choosing the format from the extension; WAV is float32.
pub fn write_signal(path: &Path, sig: &SampledSignal) -> Result<()> {
    match extension(path).as_str() {
        "wav" => write_wav(path, sig, WavFormat::Float32),
        "csv" => write_csv(path, sig),
        "f32" | "bin" | "raw" => write_f32(path, sig),
        other => Err(Error::format(path, format!("unknown signal format `.{other}`"))),
    }
}

fn extension(path: &Path) -> String {
    path.extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BeatSidecar {
    config: ChirpConfig,
    chirps: usize,
    encoding: String,
}

/// Interleaved `re, im` little-endian float32 pairs, row by row.
pub fn write_beat_matrix(path: &Path, beat: &BeatMatrix) -> Result<()> {
    let bytes: Vec<u8> = beat
        .data()
        .iter()
        .flat_map(|c| {
            let mut pair = [0u8; 8];
            pair[..4].copy_from_slice(&(c.re as f32).to_le_bytes());
            pair[4..].copy_from_slice(&(c.im as f32).to_le_bytes());
            pair
        })
        .collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    write_json(
        &sidecar_path(path),
        &BeatSidecar {
            config: beat.config,
            chirps: beat.chirps(),
            encoding: "cf32le-interleaved".into(),
        },
    )
}

pub fn read_beat_matrix(path: &Path) -> Result<BeatMatrix> {
    let meta: BeatSidecar = read_json(&sidecar_path(path))?;
    let values = read_f32_values(path)?;
    if values.len() % 2 != 0 {
        return Err(Error::format(path, "odd number of float32 values"));
    }
    let data: Vec<Complex64> = values.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
    BeatMatrix::from_data(meta.config, meta.chirps, data).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}
