//! Cohort-level summary tables: descriptive statistics of per-subject mean
//! LSDs and paired t-tests of the model output against the other signals.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cohort::SubjectScores;
use crate::error::{Error, Result};
use crate::metrics::{descriptive_stats, paired_t_test};

pub const RAW: &str = "Raw Speech";
pub const EXCITATION: &str = "Estimated Excitation";
pub const MODEL: &str = "Model Filtered";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectSummary {
    pub id: String,
    pub windows: usize,
    pub mean_lsd_raw: f64,
    pub mean_lsd_excitation: f64,
    pub mean_lsd_model: f64,
    pub tau_true_samples: Option<usize>,
    pub tau_estimated_samples: Option<usize>,
}

impl SubjectSummary {
    pub fn from_scores(scores: &SubjectScores, tau_true: Option<usize>, tau_estimated: Option<usize>) -> Self {
        Self {
            id: scores.id.clone(),
            windows: scores.model.len(),
            mean_lsd_raw: scores.mean_raw(),
            mean_lsd_excitation: scores.mean_excitation(),
            mean_lsd_model: scores.mean_model(),
            tau_true_samples: tau_true,
            tau_estimated_samples: tau_estimated,
        }
    }
}

/// One row of the descriptive table; spread is absent for a single subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveRow {
    pub signal: String,
    pub mean: f64,
    pub n: usize,
    pub std: Option<f64>,
    pub sem: Option<f64>,
}

/// Paired test of `model - comparison`; negative t favours the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestRow {
    pub comparison: String,
    pub t_stat: f64,
    pub n: usize,
    pub df: usize,
    pub mean_difference: f64,
    pub std_of_differences: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedSubject {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub subjects: Vec<SubjectSummary>,
    pub descriptive: Vec<DescriptiveRow>,
    pub t_tests: Vec<TTestRow>,
    /// Why the t-tests are missing, when they are.
    pub t_test_note: Option<String>,
    pub skipped: Vec<SkippedSubject>,
}

impl CohortReport {
    pub fn build(subjects: Vec<SubjectSummary>, skipped: Vec<SkippedSubject>) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::TooFewValues { needed: 1, got: 0 });
        }
        let column = |f: fn(&SubjectSummary) -> f64| subjects.iter().map(f).collect::<Vec<f64>>();
        let raw = column(|s| s.mean_lsd_raw);
        let excitation = column(|s| s.mean_lsd_excitation);
        let model = column(|s| s.mean_lsd_model);

        let descriptive = [(RAW, &raw), (EXCITATION, &excitation), (MODEL, &model)]
            .into_iter()
            .map(|(signal, values)| match descriptive_stats(values) {
                Ok(d) => DescriptiveRow {
                    signal: signal.into(),
                    mean: d.mean,
                    n: d.n,
                    std: Some(d.std),
                    sem: Some(d.sem),
                },
                Err(_) => DescriptiveRow {
                    signal: signal.into(),
                    mean: values[0],
                    n: values.len(),
                    std: None,
                    sem: None,
                },
            })
            .collect();

        let mut t_tests = Vec::new();
        let mut t_test_note = None;
        for (other, values) in [(RAW, &raw), (EXCITATION, &excitation)] {
            match paired_t_test(&model, values) {
                Ok(r) => t_tests.push(TTestRow {
                    comparison: format!("{other} v. {MODEL}"),
                    t_stat: r.t_stat,
                    n: r.n,
                    df: r.df,
                    mean_difference: r.mean_difference,
                    std_of_differences: r.std_of_differences,
                    p_value: r.p_value,
                }),
                Err(e) => {
                    t_test_note.get_or_insert_with(|| format!("paired t-tests not computed: {e}"));
                }
            }
        }
        Ok(Self {
            subjects,
            descriptive,
            t_tests,
            t_test_note,
            skipped,
        })
    }

    /// Subjects whose model output beats both other signals.
    pub fn ordering_count(&self) -> usize {
        self.subjects
            .iter()
            .filter(|s| s.mean_lsd_model < s.mean_lsd_raw && s.mean_lsd_model < s.mean_lsd_excitation)
            .count()
    }

    /// Descriptive table, a blank line, then the t-test table.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("signal,mean,n,std,sem\n");
        for row in &self.descriptive {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                row.signal,
                row.mean,
                row.n,
                opt(row.std),
                opt(row.sem)
            );
        }
        out.push_str("\ncomparison,t_stat,n,std,p_value\n");
        for row in &self.t_tests {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                row.comparison, row.t_stat, row.n, row.std_of_differences, row.p_value
            );
        }
        out
    }

    pub fn subjects_csv(&self) -> String {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out =
            String::from("id,windows,mean_lsd_raw,mean_lsd_excitation,mean_lsd_model,tau_true,tau_estimated\n");
        for s in &self.subjects {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.id,
                s.windows,
                s.mean_lsd_raw,
                s.mean_lsd_excitation,
                s.mean_lsd_model,
                opt(s.tau_true_samples),
                opt(s.tau_estimated_samples)
            );
        }
        out
    }
}

/// Long-format per-window curves with loess smoothing, one block per signal.
pub fn lsd_curves_csv(scores: &SubjectScores, span: f64) -> Result<String> {
    let mut out = String::from("signal,window,time_s,lsd_db,loess_db\n");
    for (name, series) in [
        (RAW, &scores.raw),
        (EXCITATION, &scores.excitation),
        (MODEL, &scores.model),
    ] {
        let smooth = if series.len() >= 5 {
            series.smoothed(span)?
        } else {
            series.values()
        };
        for (p, s) in series.points.iter().zip(smooth) {
            let _ = writeln!(out, "{name},{},{},{},{s}", p.window, p.time_s, p.lsd_db);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(id: &str, raw: f64, exc: f64, model: f64) -> SubjectSummary {
        SubjectSummary {
            id: id.into(),
            windows: 10,
            mean_lsd_raw: raw,
            mean_lsd_excitation: exc,
            mean_lsd_model: model,
            tau_true_samples: None,
            tau_estimated_samples: Some(1),
        }
    }

    #[test]
    fn tables_have_expected_rows_and_signs() {
        let subjects = vec![
            summary("a", 4.6, 5.3, 4.0),
            summary("b", 4.4, 5.5, 3.9),
            summary("c", 4.9, 5.1, 4.2),
            summary("d", 4.5, 5.4, 3.8),
        ];
        let report = CohortReport::build(subjects, vec![]).unwrap();
        assert_eq!(report.descriptive.len(), 3);
        assert_eq!(report.t_tests.len(), 2);
        assert!(report.t_tests.iter().all(|t| t.t_stat < 0.0 && t.n == 4 && t.df == 3));
        assert_eq!(report.t_tests[0].comparison, "Raw Speech v. Model Filtered");
        assert_eq!(report.ordering_count(), 4);
        let csv = report.to_csv();
        assert!(csv.starts_with("signal,mean,n,std,sem\nRaw Speech,"));
        assert!(csv.contains("\ncomparison,t_stat,n,std,p_value\n"));
    }

    #[test]
    fn reference_row_formats() {
        // Fixture row: mean 3.9740, n 66, std 0.3054, sem 0.0365. The sem is
        // carried as given; 0.3054 / sqrt(66) would be 0.0376.
        let n = 66;
        let half_spread = 0.3054 * (65.0f64 / 66.0).sqrt();
        let values: Vec<f64> = (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    3.9740 + half_spread
                } else {
                    3.9740 - half_spread
                }
            })
            .collect();
        let d = descriptive_stats(&values).unwrap();
        assert!((d.mean - 3.9740).abs() < 1e-12);
        assert!((d.std - 0.3054).abs() < 1e-12);
        assert_eq!(d.n, 66);
        let row = DescriptiveRow {
            signal: MODEL.into(),
            mean: 3.9740,
            n: 66,
            std: Some(0.3054),
            sem: Some(0.0365),
        };
        let text = serde_json::to_string(&row).unwrap();
        assert_eq!(
            text,
            r#"{"signal":"Model Filtered","mean":3.974,"n":66,"std":0.3054,"sem":0.0365}"#
        );
        let t = TTestRow {
            comparison: format!("{RAW} v. {MODEL}"),
            t_stat: -15.626,
            n: 66,
            df: 65,
            mean_difference: -0.6183,
            std_of_differences: 0.324,
            p_value: 1e-20,
        };
        let back: TTestRow = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
        assert!(back.p_value < 0.001);
    }

    #[test]
    fn single_subject_refuses_t_tests() {
        let report = CohortReport::build(vec![summary("a", 4.0, 5.0, 3.0)], vec![]).unwrap();
        assert!(report.t_tests.is_empty());
        assert!(report.t_test_note.is_some());
        assert_eq!(report.descriptive[0].n, 1);
        assert_eq!(report.descriptive[0].std, None);
        assert!(CohortReport::build(vec![], vec![]).is_err());
    }
}
