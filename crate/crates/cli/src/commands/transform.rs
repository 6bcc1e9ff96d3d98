use std::path::PathBuf;

use anyhow::{Context as _, Result};
use clap::Args;
use rayon::prelude::*;
use vibspeech::cohort::{files, SubjectParams};
use vibspeech::io::{read_json, read_signal, write_csv, write_json};
use vibspeech::signal::{resample_decimate, SampledSignal};
use vibspeech::transform::{run_algorithm1, TauMode, TractSource, TransformConfig, TransformReport};

use super::Context;
use crate::config::UsageError;
use crate::subjects::{displacement_path, expand_all, subject_name};

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// Subject directories, or cohort directories holding them. Outputs are
    /// written into each subject directory.
    #[arg(conflicts_with_all = ["speech", "displacement"])]
    pub dirs: Vec<PathBuf>,
    /// Speech file (WAV, CSV or f32) for a run outside a subject directory.
    #[arg(long, requires_all = ["displacement", "out"])]
    pub speech: Option<PathBuf>,
    /// Displacement file paired with `--speech`.
    #[arg(long, requires = "speech")]
    pub displacement: Option<PathBuf>,
    /// Output directory for `--speech` runs.
    #[arg(long, requires = "speech")]
    pub out: Option<PathBuf>,
    /// `global` applies the median frame delay everywhere; `per-frame` keeps each frame's own.
    #[arg(long)]
    pub tau_mode: Option<TauMode>,
    /// LPC order.
    #[arg(long)]
    pub order: Option<usize>,
    /// Pre-emphasis coefficient applied before LPC analysis.
    #[arg(long)]
    pub pre_emphasis: Option<f64>,
    /// Decimate the faster input down to the slower one's rate.
    #[arg(long)]
    pub resample: bool,
    /// Skip LPC and inverse filter with a known tract. Takes a subject
    /// manifest as `--known-tract=PATH`; in directory mode each subject's own
    /// manifest is the default.
    #[arg(long, num_args = 0..=1, require_equals = true, value_name = "MANIFEST")]
    pub known_tract: Option<Option<PathBuf>>,
}

struct Job {
    name: String,
    speech: PathBuf,
    displacement: PathBuf,
    out: PathBuf,
    manifest: Option<PathBuf>,
}

pub fn run(args: &TransformArgs, ctx: &Context) -> Result<()> {
    let mut cfg = ctx.config.transform.clone();
    if let Some(mode) = args.tau_mode {
        cfg.tau_mode = mode;
    }
    if let Some(order) = args.order {
        cfg.lpc_order = order;
    }
    if args.pre_emphasis.is_some() {
        cfg.pre_emphasis = args.pre_emphasis;
    }

    let jobs = match (&args.speech, &args.displacement, &args.out) {
        (Some(speech), Some(displacement), Some(out)) => vec![Job {
            name: subject_name(out),
            speech: speech.clone(),
            displacement: displacement.clone(),
            out: out.clone(),
            manifest: None,
        }],
        _ if !args.dirs.is_empty() => expand_all(&args.dirs)?
            .into_iter()
            .map(|dir| Job {
                name: subject_name(&dir),
                speech: dir.join(files::SPEECH),
                displacement: displacement_path(&dir),
                manifest: Some(dir.join(files::MANIFEST)),
                out: dir,
            })
            .collect(),
        _ => {
            return Err(UsageError("give subject directories, or --speech with --displacement and --out".into()).into())
        }
    };

    let reports: Vec<(String, TransformReport)> = jobs
        .par_iter()
        .map(|job| transform_one(job, args, &cfg))
        .collect::<Result<_>>()?;
    for (name, report) in reports {
        println!(
            "{name}: {}/{} frames voiced, neck delay {} samples",
            report.voiced_frames, report.frames, report.global_tau_samples
        );
    }
    Ok(())
}

fn transform_one(job: &Job, args: &TransformArgs, base: &TransformConfig) -> Result<(String, TransformReport)> {
    let mut cfg = base.clone();
    if let Some(explicit) = &args.known_tract {
        let manifest = explicit
            .as_ref()
            .or(job.manifest.as_ref())
            .ok_or_else(|| UsageError("--known-tract needs a subject manifest path here".into()))?;
        let params: SubjectParams = read_json(manifest)?;
        cfg.tract = TractSource::Known { tract: params.tract };
    }
    let speech = read_signal(&job.speech)?;
    let displacement = read_signal(&job.displacement)?;
    let (speech, displacement) = align(speech, displacement, args.resample)?;
    cfg.validate(speech.rate_hz())?;
    let out = run_algorithm1(&speech, &displacement, &cfg).with_context(|| job.name.clone())?;

    std::fs::create_dir_all(&job.out).with_context(|| format!("{}: cannot create directory", job.out.display()))?;
    write_csv(&job.out.join(files::E_HAT), &out.e_hat)?;
    write_csv(&job.out.join(files::X_HAT), &out.x_hat)?;
    write_csv(&job.out.join(files::D_HAT), &out.d_hat)?;
    let report = out.report(&cfg);
    write_json(&job.out.join(files::TRANSFORM), &report)?;
    Ok((job.name.clone(), report))
}

/// Brings both signals to one rate (only with `resample`) and trims them to a
/// common length.
fn align(speech: SampledSignal, displacement: SampledSignal, resample: bool) -> Result<(SampledSignal, SampledSignal)> {
    let (speech, displacement) = if speech.rate_hz() == displacement.rate_hz() || !resample {
        speech.ensure_same_rate(&displacement)?;
        (speech, displacement)
    } else if speech.rate_hz() > displacement.rate_hz() {
        (resample_decimate(&speech, displacement.rate_hz())?, displacement)
    } else {
        let d = resample_decimate(&displacement, speech.rate_hz())?;
        (speech, d)
    };
    let len = speech.len().min(displacement.len());
    let trim = |sig: SampledSignal| -> Result<SampledSignal> {
        if sig.len() == len {
            Ok(sig)
        } else {
            Ok(sig.with_samples(sig.samples()[..len].to_vec())?)
        }
    };
    Ok((trim(speech)?, trim(displacement)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(len: usize, rate: f64) -> SampledSignal {
        SampledSignal::new((0..len).map(|i| (i as f64 * 0.01).sin()).collect(), rate, "t").unwrap()
    }

    #[test]
    fn rates_must_match_unless_resampling() {
        assert!(align(sig(1600, 16_000.0), sig(200, 2000.0), false).is_err());
        let (s, d) = align(sig(1600, 16_000.0), sig(199, 2000.0), true).unwrap();
        assert_eq!(s.rate_hz(), 2000.0);
        assert_eq!((s.len(), d.len()), (199, 199));
        let (s, d) = align(sig(300, 2000.0), sig(280, 2000.0), false).unwrap();
        assert_eq!((s.len(), d.len()), (280, 280));
    }
}
