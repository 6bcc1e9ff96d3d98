use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use clap::Args;
use rayon::prelude::*;
use vibspeech::cohort::{files, SubjectParams};
use vibspeech::io::{write_csv, write_json, write_wav, WavFormat};

use super::Context;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Subject directory, or the parent directory when `--cohort` is given.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Number of subjects to draw; each goes into its own subdirectory.
    #[arg(long)]
    pub cohort: Option<usize>,
    /// Fixed fundamental frequency in Hz instead of a random draw.
    #[arg(long)]
    pub f0: Option<f64>,
    /// Seconds of sustained phonation per subject.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Fixed open quotient of the glottal pulse, as a fraction of the period.
    #[arg(long)]
    pub open_quotient: Option<f64>,
    /// Cycle-to-cycle period jitter in percent.
    #[arg(long)]
    pub jitter: Option<f64>,
    /// Neck delay in samples, used for every subject.
    #[arg(long)]
    pub tau_samples: Option<usize>,
    /// Add white noise to the speech at this SNR.
    #[arg(long)]
    pub speech_snr: Option<f64>,
}

pub fn run(args: &SynthArgs, ctx: &Context) -> Result<()> {
    let mut spec = ctx.config.cohort.clone();
    if let Some(seed) = ctx.seed() {
        spec.seed = seed;
    }
    spec.subjects = args.cohort.unwrap_or(1);
    if let Some(f0) = args.f0 {
        spec.f0_range_hz = (f0, f0);
    }
    if let Some(oq) = args.open_quotient {
        spec.open_quotient_range = (oq, oq);
    }
    if let Some(duration) = args.duration {
        spec.duration_s = duration;
    }
    if let Some(jitter) = args.jitter {
        spec.jitter_pct = jitter;
    }
    if let Some(tau) = args.tau_samples {
        spec.tau_choices_samples = vec![tau];
    }
    if args.speech_snr.is_some() {
        spec.speech_snr_db = args.speech_snr;
    }
    let subjects = spec.all_subjects()?;

    let dirs: Vec<PathBuf> = match args.cohort {
        Some(_) => subjects.iter().map(|p| args.out.join(&p.id)).collect(),
        None => vec![args.out.clone()],
    };
    std::fs::create_dir_all(&args.out).with_context(|| format!("{}: cannot create directory", args.out.display()))?;
    if args.cohort.is_some() {
        write_json(&args.out.join("cohort.json"), &spec)?;
    }
    subjects
        .par_iter()
        .zip(&dirs)
        .map(|(params, dir)| write_subject(params, dir))
        .collect::<Result<Vec<()>>>()?;

    for (params, dir) in subjects.iter().zip(&dirs) {
        println!(
            "{}: f0 {:.1} Hz, neck delay {} samples -> {}",
            params.id,
            params.glottal.f0_hz,
            params.delay_samples(),
            dir.display()
        );
    }
    Ok(())
}

fn write_subject(params: &SubjectParams, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("{}: cannot create directory", dir.display()))?;
    let subject = params.synthesize()?;
    write_json(&dir.join(files::MANIFEST), params)?;
    write_csv(&dir.join(files::FOLD), &subject.x)?;
    write_csv(&dir.join(files::EXCITATION), &subject.e)?;
    write_csv(&dir.join(files::NECK), &subject.d)?;
    write_wav(&dir.join(files::SPEECH), &subject.s, WavFormat::Float32)?;
    Ok(())
}
