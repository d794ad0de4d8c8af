//! Range-Doppler estimation: quotient formation, windowed periodograms,
//! half-duplex masking, successive cancellation, and peak extraction.

pub mod clean;
pub mod detect;
pub mod periodogram;
pub mod tdd;
pub mod window;

pub use clean::{psf_locate, psf_subtract, CleanOutcome};
pub use detect::{find_peaks, measure_metrics, noise_floor_w, DetectionSpec, Peak, SirMetrics};
pub use periodogram::{
    channel_quotient, cpe_compensate, periodogram, pilot_periodogram, Periodogram,
    PeriodogramSpec, QUOTIENT_EPS,
};
pub use tdd::{tdd_apply, tdd_mask, TddMode, TddPattern};
pub use window::{window_moments, WindowKind};
