use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use clap::Args;
use rayon::prelude::*;
use vibspeech::cohort::{files, score_subject, SubjectParams, SubjectScores};
use vibspeech::io::{read_json, read_signal, write_json};
use vibspeech::report::{lsd_curves_csv, CohortReport, SkippedSubject, SubjectSummary};
use vibspeech::transform::TransformReport;

use super::Context;
use crate::config::UsageError;
use crate::subjects::{displacement_path, evaluation_dirs, subject_name};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Cohort directory, or a single subject directory.
    pub dir: PathBuf,
    /// Where the reports go; defaults to the cohort directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Loess span for the smoothed per-window curves.
    #[arg(long)]
    pub span: Option<f64>,
}

pub fn run(args: &EvaluateArgs, ctx: &Context) -> Result<()> {
    let span = args.span.unwrap_or(ctx.config.evaluation.loess_span);
    if !(span > 0.0 && span <= 1.0) {
        return Err(UsageError(format!("--span must lie in (0, 1], got {span}")).into());
    }
    let dirs = evaluation_dirs(&args.dir)?;
    let outcomes: Vec<Result<(SubjectSummary, SubjectScores), SkippedSubject>> =
        dirs.par_iter().map(|dir| score_dir(dir)).collect();

    let mut summaries = Vec::new();
    let mut scores = Vec::new();
    let mut skipped = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok((summary, score)) => {
                summaries.push(summary);
                scores.push(score);
            }
            Err(skip) => {
                eprintln!("warning: skipping {}: {}", skip.id, skip.reason);
                skipped.push(skip);
            }
        }
    }
    if summaries.is_empty() {
        bail!(
            "{}: no complete subjects to evaluate ({} skipped)",
            args.dir.display(),
            skipped.len()
        );
    }
    let report = CohortReport::build(summaries, skipped)?;

    let out = args.out.clone().unwrap_or_else(|| args.dir.clone());
    let curves = out.join("curves");
    std::fs::create_dir_all(&curves).with_context(|| format!("{}: cannot create directory", curves.display()))?;
    write_json(&out.join("report.json"), &report)?;
    write_text(&out.join("report.csv"), &report.to_csv())?;
    write_text(&out.join("subjects.csv"), &report.subjects_csv())?;
    for score in &scores {
        write_text(&curves.join(format!("{}.csv", score.id)), &lsd_curves_csv(score, span)?)?;
    }
    print!("{}", render(&report));
    Ok(())
}

fn score_dir(dir: &Path) -> Result<(SubjectSummary, SubjectScores), SkippedSubject> {
    let id = subject_name(dir);
    let skip = |reason: String| SkippedSubject { id: id.clone(), reason };
    let read = |name: &str| read_signal(&dir.join(name)).map_err(|e| skip(e.to_string()));

    let s = read(files::SPEECH)?;
    let e_hat = read(files::E_HAT)?;
    let d_hat = read(files::D_HAT)?;
    let d = read_signal(&displacement_path(dir)).map_err(|e| skip(e.to_string()))?;
    let transform: TransformReport = read_json(&dir.join(files::TRANSFORM)).map_err(|e| skip(e.to_string()))?;
    let tau_true = read_json::<SubjectParams>(&dir.join(files::MANIFEST))
        .ok()
        .map(|p| p.delay_samples());

    let scores =
        score_subject(&id, &s, &e_hat, &d_hat, &d, &transform.voiced_mask()).map_err(|e| skip(e.to_string()))?;
    if scores.model.is_empty() {
        return Err(skip("no voiced windows to score".into()));
    }
    let summary = SubjectSummary::from_scores(&scores, tau_true, Some(transform.global_tau_samples));
    Ok((summary, scores))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("{}: cannot write", path.display()))
}

fn render(report: &CohortReport) -> String {
    let mut out = String::new();
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    let _ = writeln!(
        out,
        "{:<22} {:>9} {:>4} {:>9} {:>9}",
        "signal", "mean LSD", "N", "std", "sem"
    );
    for row in &report.descriptive {
        let _ = writeln!(
            out,
            "{:<22} {:>9.4} {:>4} {:>9} {:>9}",
            row.signal,
            row.mean,
            row.n,
            opt(row.std),
            opt(row.sem)
        );
    }
    if let Some(note) = &report.t_test_note {
        let _ = writeln!(out, "{note}");
    }
    for t in &report.t_tests {
        let _ = writeln!(
            out,
            "{}: t = {:.3}, N = {}, std = {:.4}, p = {:.3e}",
            t.comparison, t.t_stat, t.n, t.std_of_differences, t.p_value
        );
    }
    let _ = writeln!(
        out,
        "model closest for {} of {} subjects; {} skipped",
        report.ordering_count(),
        report.subjects.len(),
        report.skipped.len()
    );
    out
}
