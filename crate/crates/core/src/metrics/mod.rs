//! Evaluation machinery: normalized power spectra on short windows,
//! log-spectral distance, loess-smoothed distance curves, and the cohort
//! statistics (descriptive summaries and paired t-tests).

pub mod loess;
pub mod spectrum;
pub mod stats;

pub use loess::loess_smooth;
pub use spectrum::{
    log_spectral_distance, lsd_over_windows, normalized_power_spectrum, spectral_flatness, LsdPoint, LsdSeries,
    PowerSpectrum, SpectrumEstimator, SPECTRAL_FLOOR,
};
pub use stats::{
    descriptive_stats, paired_t_test, student_t_cdf, student_t_two_sided_p, DescriptiveStats, PairedTTestResult,
};
