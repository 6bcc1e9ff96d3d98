//! Seeded synthetic cohorts and the per-subject simulate, measure, transform
//! and score pipeline.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{lsd_over_windows, LsdSeries};
use crate::radar::{measure_displacement, ChirpConfig, Extraction, TargetScene};
use crate::signal::{FramePlan, SampledSignal, Taper};
use crate::source_filter::{make_subject, GlottalConfig, NeckChannel, NoiseSpec, SyntheticSubject, VocalTractModel};
use crate::transform::{run_algorithm1, TransformConfig, TransformOutput};

/// File names inside a subject directory.
pub mod files {
    pub const MANIFEST: &str = "subject.json";
    pub const FOLD: &str = "x.csv";
    pub const EXCITATION: &str = "e.csv";
    pub const SPEECH: &str = "s.wav";
    pub const NECK: &str = "d.csv";
    pub const RADAR: &str = "d_radar.csv";
    pub const RADAR_DIAGNOSTICS: &str = "radar.json";
    pub const E_HAT: &str = "e_hat.csv";
    pub const X_HAT: &str = "x_hat.csv";
    pub const D_HAT: &str = "d_hat.csv";
    pub const TRANSFORM: &str = "transform.json";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub subjects: usize,
    pub seed: u64,
    pub duration_s: f64,
    pub rate_hz: f64,
    pub f0_range_hz: (f64, f64),
    pub open_quotient_range: (f64, f64),
    /// Peak fold displacement is this times a factor drawn from [0.5, 1.5].
    pub amplitude_m: f64,
    pub flow_gain_range: (f64, f64),
    pub jitter_pct: f64,
    pub k_d_range: (f64, f64),
    /// Neck delays assigned in rotation, in samples.
    pub tau_choices_samples: Vec<usize>,
    pub speech_snr_db: Option<f64>,
    pub radar_snr_db: Option<f64>,
    pub range_m: f64,
    pub chirp: ChirpConfig,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            subjects: 66,
            seed: 1,
            duration_s: 2.0,
            rate_hz: 2000.0,
            f0_range_hz: (90.0, 500.0),
            open_quotient_range: (0.5, 0.7),
            amplitude_m: 1e-3,
            flow_gain_range: (0.5, 2.0),
            jitter_pct: 1.0,
            k_d_range: (0.02, 0.08),
            tau_choices_samples: vec![0, 1, 2, 4],
            speech_snr_db: None,
            radar_snr_db: None,
            range_m: 0.25,
            chirp: ChirpConfig::default(),
        }
    }
}

/// Everything needed to regenerate one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectParams {
    pub id: String,
    pub glottal: GlottalConfig,
    pub neck: NeckChannel,
    pub tract: VocalTractModel,
    pub duration_s: f64,
    pub rate_hz: f64,
    pub speech_noise: Option<NoiseSpec>,
    pub radar: RadarSetup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarSetup {
    pub range_m: f64,
    pub reflectivity: f64,
    pub noise: Option<NoiseSpec>,
    pub chirp: ChirpConfig,
}

pub fn subject_id(index: usize) -> String {
    format!("subject_{:03}", index + 1)
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        if self.subjects == 0 {
            return Err(Error::invalid("subjects", "must be at least 1"));
        }
        if self.tau_choices_samples.is_empty() {
            return Err(Error::invalid("tau_choices_samples", "must not be empty"));
        }
        for (field, (lo, hi)) in [
            ("f0_range_hz", self.f0_range_hz),
            ("open_quotient_range", self.open_quotient_range),
            ("flow_gain_range", self.flow_gain_range),
            ("k_d_range", self.k_d_range),
        ] {
            if !(lo <= hi) {
                return Err(Error::invalid(
                    field,
                    format!("lower bound {lo} exceeds upper bound {hi}"),
                ));
            }
        }
        if (self.rate_hz - self.chirp.prf_hz).abs() > 1e-9 * self.rate_hz {
            return Err(Error::invalid(
                "rate_hz",
                format!("must equal the chirp repetition rate {} Hz", self.chirp.prf_hz),
            ));
        }
        self.chirp.validate()
    }

    /// Parameters of subject `index`, drawn from an independent stream of the cohort seed.
    pub fn subject(&self, index: usize) -> Result<SubjectParams> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let glottal = GlottalConfig {
            f0_hz: uniform(&mut rng, self.f0_range_hz),
            open_quotient: uniform(&mut rng, self.open_quotient_range),
            amplitude: self.amplitude_m * uniform(&mut rng, (0.5, 1.5)),
            flow_gain_k: uniform(&mut rng, self.flow_gain_range),
            jitter_pct: self.jitter_pct,
            seed: rng.next_u64(),
        };
        glottal.validate()?;
        let tau = self.tau_choices_samples[index % self.tau_choices_samples.len()];
        let neck = NeckChannel {
            k_d: uniform(&mut rng, self.k_d_range),
            tau_d_s: tau as f64 / self.rate_hz,
        };
        neck.validate()?;
        let tract = VocalTractModel::random(&mut rng, self.rate_hz)?;
        let speech_seed = rng.next_u64();
        let radar_seed = rng.next_u64();
        Ok(SubjectParams {
            id: subject_id(index),
            glottal,
            neck,
            tract,
            duration_s: self.duration_s,
            rate_hz: self.rate_hz,
            speech_noise: self.speech_snr_db.map(|snr_db| NoiseSpec {
                snr_db,
                seed: speech_seed,
            }),
            radar: RadarSetup {
                range_m: self.range_m,
                reflectivity: 1.0,
                noise: self.radar_snr_db.map(|snr_db| NoiseSpec {
                    snr_db,
                    seed: radar_seed,
                }),
                chirp: self.chirp,
            },
        })
    }

    pub fn all_subjects(&self) -> Result<Vec<SubjectParams>> {
        self.validate()?;
        (0..self.subjects).map(|i| self.subject(i)).collect()
    }
}

impl SubjectParams {
    pub fn synthesize(&self) -> Result<SyntheticSubject> {
        make_subject(
            &self.glottal,
            &self.neck,
            &self.tract,
            self.duration_s,
            self.rate_hz,
            self.speech_noise,
        )
    }

    pub fn delay_samples(&self) -> usize {
        self.neck.delay_samples(self.rate_hz)
    }

    pub fn scene(&self, d: &SampledSignal) -> TargetScene {
        TargetScene {
            nominal_range_m: self.radar.range_m,
            displacement: d.clone(),
            reflectivity: self.radar.reflectivity,
            noise: self.radar.noise,
        }
    }

    pub fn measure(&self, d: &SampledSignal) -> Result<Extraction> {
        measure_displacement(&self.scene(d), &self.radar.chirp)
    }
}

/// Per-window LSDs of raw speech, excitation estimate and model output
/// against the measured displacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectScores {
    pub id: String,
    pub raw: LsdSeries,
    pub excitation: LsdSeries,
    pub model: LsdSeries,
}

impl SubjectScores {
    pub fn mean_raw(&self) -> f64 {
        self.raw.mean()
    }

    pub fn mean_excitation(&self) -> f64 {
        self.excitation.mean()
    }

    pub fn mean_model(&self) -> f64 {
        self.model.mean()
    }

    /// Model output is closer to the displacement than both other signals.
    pub fn ordering_holds(&self) -> bool {
        self.mean_model() < self.mean_raw() && self.mean_model() < self.mean_excitation()
    }
}

/// Scores on 25 ms windows with 50% overlap, restricted to `voiced_mask`.
pub fn score_subject(
    id: &str,
    s: &SampledSignal,
    e_hat: &SampledSignal,
    d_hat: &SampledSignal,
    d: &SampledSignal,
    voiced_mask: &[bool],
) -> Result<SubjectScores> {
    let plan: FramePlan = FramePlan::evaluation_default(d.rate_hz()).with_taper(Taper::Rectangular);
    Ok(SubjectScores {
        id: id.to_string(),
        raw: lsd_over_windows(s, d, &plan, voiced_mask)?,
        excitation: lsd_over_windows(e_hat, d, &plan, voiced_mask)?,
        model: lsd_over_windows(d_hat, d, &plan, voiced_mask)?,
    })
}

/// Result of the full in-memory pipeline for one subject.
#[derive(Debug, Clone)]
pub struct SubjectRun {
    pub params: SubjectParams,
    pub subject: SyntheticSubject,
    pub radar: Extraction,
    pub transform: TransformOutput,
    pub scores: SubjectScores,
}

pub fn run_subject(params: &SubjectParams, cfg: &TransformConfig) -> Result<SubjectRun> {
    let subject = params.synthesize()?;
    let radar = params.measure(&subject.d)?;
    let d = &radar.displacement;
    let transform = run_algorithm1(&subject.s, d, cfg)?;
    let scores = score_subject(
        &params.id,
        &subject.s,
        &transform.e_hat,
        &transform.d_hat,
        d,
        &transform.voiced_mask(),
    )?;
    Ok(SubjectRun {
        params: params.clone(),
        subject,
        radar,
        transform,
        scores,
    })
}

/// Runs every subject in parallel; results keep subject order.
pub fn run_cohort(spec: &CohortSpec, cfg: &TransformConfig) -> Result<Vec<SubjectRun>> {
    spec.all_subjects()?.par_iter().map(|p| run_subject(p, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subjects_are_deterministic_and_distinct() {
        let spec = CohortSpec::default();
        let a = spec.subject(3).unwrap();
        let b = spec.subject(3).unwrap();
        assert_eq!(a, b);
        let c = spec.subject(4).unwrap();
        assert_ne!(a.glottal.f0_hz, c.glottal.f0_hz);
        let other = CohortSpec {
            seed: 2,
            ..CohortSpec::default()
        };
        assert_ne!(other.subject(3).unwrap().glottal.f0_hz, a.glottal.f0_hz);
    }

    #[test]
    fn parameters_respect_ranges() {
        let spec = CohortSpec::default();
        for (i, p) in spec.all_subjects().unwrap().iter().enumerate() {
            assert!((90.0..500.0).contains(&p.glottal.f0_hz));
            assert!((0.02..0.08).contains(&p.neck.k_d));
            assert_eq!(p.delay_samples(), [0, 1, 2, 4][i % 4]);
            assert_eq!(p.id, format!("subject_{:03}", i + 1));
        }
    }

    #[test]
    fn manifest_round_trips_through_json() {
        let spec = CohortSpec {
            radar_snr_db: Some(20.0),
            ..CohortSpec::default()
        };
        let p = spec.subject(0).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        let back: SubjectParams = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.synthesize().unwrap(), p.synthesize().unwrap());
    }

    #[test]
    fn rate_must_match_prf() {
        let spec = CohortSpec {
            rate_hz: 4000.0,
            ..CohortSpec::default()
        };
        assert!(spec.all_subjects().is_err());
    }

    #[test]
    fn pipeline_scores_one_subject() {
        let spec = CohortSpec::default();
        let run = run_subject(&spec.subject(0).unwrap(), &TransformConfig::default()).unwrap();
        assert_eq!(run.radar.bin, 6);
        assert!(run.scores.model.len() > 100);
        assert!(
            run.scores.ordering_holds(),
            "{:?}",
            (
                run.scores.mean_model(),
                run.scores.mean_raw(),
                run.scores.mean_excitation()
            )
        );
    }
}
