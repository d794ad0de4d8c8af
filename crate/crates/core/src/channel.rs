//! Bistatic propagation: link budget, path gains, multipath Doppler channel,
//! receiver timing/frequency offsets, and thermal noise.
//!
//! Path delays are relative to the line-of-sight reference path, which sits
//! at delay zero; absolute timing error is carried separately by
//! [`SyncOffsets`]. Delays act circularly on the whole buffer through the
//! frequency domain, so a fractional delay is exact for the band-limited
//! periodic interpolant of the input.

use crate::dsp::{fft_bin_freqs, fft_forward, fft_inverse};
use crate::error::{Error, Result};
use crate::frame::IqSequence;
use crate::rng::derive_run_rng;
use crate::units::{db_to_lin, dbm_to_watts, BOLTZMANN};
use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Transmit powers, antenna gains, and receiver noise parameters.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LinkBudget {
    /// Power radiated toward the sensing scene, dBm.
    pub p_tx_sensing_dbm: f64,
    /// Power radiated toward the receiver on the line-of-sight path, dBm.
    pub p_tx_reference_dbm: f64,
    pub g_tx_dbi: f64,
    pub g_rx_dbi: f64,
    pub noise_figure_db: f64,
    pub temperature_k: f64,
    /// Post-integration SINR required for detection, dB.
    pub sinr_min_db: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        LinkBudget {
            p_tx_sensing_dbm: 35.86,
            p_tx_reference_dbm: 21.0,
            g_tx_dbi: 33.0,
            g_rx_dbi: 33.0,
            noise_figure_db: 8.0,
            temperature_k: 290.0,
            sinr_min_db: 17.0,
        }
    }
}

impl LinkBudget {
    /// Thermal noise power kB * T * B * F referred to the receiver input, W.
    pub fn noise_power_w(&self, bandwidth_hz: f64) -> f64 {
        BOLTZMANN * self.temperature_k * bandwidth_hz * db_to_lin(self.noise_figure_db)
    }
}

/// Geometry of one propagation path.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathGeometry {
    /// Direct transmitter-to-receiver line of sight.
    Reference { distance_m: f64 },
    /// Two-leg scatter off a point target with the given radar cross section.
    Target {
        tx_to_target_m: f64,
        target_to_rx_m: f64,
        rcs_m2: f64,
    },
}

impl PathGeometry {
    /// Path length relative to the reference geometry, m. The reference path
    /// itself is the zero of the relative-range axis.
    pub fn relative_range_m(&self, reference_distance_m: f64) -> f64 {
        match self {
            PathGeometry::Reference { .. } => 0.0,
            PathGeometry::Target { tx_to_target_m, target_to_rx_m, .. } => {
                tx_to_target_m + target_to_rx_m - reference_distance_m
            }
        }
    }
}

/// Received power of a path, W, for the unit-power transmit waveform. The
/// applicable transmit power is part of the gain: the reference path uses the
/// dedicated receiver-pointing power, the scatter path the sensing power.
pub fn path_rx_power_w(geometry: &PathGeometry, budget: &LinkBudget, wavelength_m: f64) -> f64 {
    let g2 = db_to_lin(budget.g_tx_dbi + budget.g_rx_dbi);
    match geometry {
        PathGeometry::Reference { distance_m } => {
            let friis = (wavelength_m / (2.0 * TAU * distance_m)).powi(2);
            dbm_to_watts(budget.p_tx_reference_dbm) * g2 * friis
        }
        PathGeometry::Target { tx_to_target_m, target_to_rx_m, rcs_m2 } => {
            let four_pi = 2.0 * TAU;
            let spread = rcs_m2 * wavelength_m * wavelength_m
                / (four_pi.powi(3) * (tx_to_target_m * target_to_rx_m).powi(2));
            dbm_to_watts(budget.p_tx_sensing_dbm) * g2 * spread
        }
    }
}

/// One resolved propagation path as the channel applies it.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagationPath {
    /// Complex amplitude; |gain|^2 is the received power in W for the
    /// unit-power transmit waveform.
    pub gain: Complex64,
    /// Delay relative to the reference path, s.
    pub delay_s: f64,
    /// Bistatic Doppler shift, Hz.
    pub doppler_hz: f64,
}

/// Superpose every path: delay the transmit buffer, rotate it by the path
/// Doppler (phase zero at the first buffer sample), weight by the complex
/// gain, and sum. Noise is not included; see [`add_awgn`].
pub fn apply_channel(
    tx: &[Complex64],
    paths: &[PropagationPath],
    sample_rate_hz: f64,
) -> IqSequence {
    let mut out = vec![Complex64::default(); tx.len()];
    let dt = 1.0 / sample_rate_hz;
    for path in paths {
        let delayed = delay_circular(tx, path.delay_s, sample_rate_hz);
        let rotor = Complex64::from_polar(1.0, TAU * path.doppler_hz * dt);
        let mut phase = path.gain;
        for (o, d) in out.iter_mut().zip(delayed.iter()) {
            *o += phase * d;
            phase *= rotor;
        }
    }
    out
}

/// Residual receiver-side timing and frequency errors relative to the
/// transmitter. `sfo_frac` is the fractional sampling-rate mismatch
/// (receiver clock runs at (1 + sfo_frac) times the nominal rate); it is
/// applied by the clock resampler, not here.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct SyncOffsets {
    pub sto_s: f64,
    pub cfo_hz: f64,
    pub sfo_frac: f64,
}

impl SyncOffsets {
    pub fn validate(&self) -> Result<()> {
        if self.sfo_frac.abs() >= 1e-3 {
            return Err(Error::config(format!(
                "sfo_frac {} outside the small-offset model (|sfo| < 1e-3)",
                self.sfo_frac
            )));
        }
        if !(self.sto_s.is_finite() && self.cfo_hz.is_finite()) {
            return Err(Error::config("sync offsets must be finite"));
        }
        Ok(())
    }

    pub fn negated(&self) -> SyncOffsets {
        SyncOffsets { sto_s: -self.sto_s, cfo_hz: -self.cfo_hz, sfo_frac: -self.sfo_frac }
    }
}

/// Impose timing and carrier offsets on a buffer: circular delay by `sto_s`,
/// then a carrier ramp exp(j*2*pi*cfo*t) with phase zero at the first
/// sample. The exact inverse is [`undo_sync_offsets`].
pub fn apply_sync_offsets(
    y: &[Complex64],
    offsets: &SyncOffsets,
    sample_rate_hz: f64,
) -> IqSequence {
    let delayed = delay_circular(y, offsets.sto_s, sample_rate_hz);
    ramp(&delayed, offsets.cfo_hz, sample_rate_hz)
}

/// Exact inverse of [`apply_sync_offsets`] for the same offsets: remove the
/// carrier ramp first, then the delay.
pub fn undo_sync_offsets(
    y: &[Complex64],
    offsets: &SyncOffsets,
    sample_rate_hz: f64,
) -> IqSequence {
    let deramped = ramp(y, -offsets.cfo_hz, sample_rate_hz);
    delay_circular(&deramped, -offsets.sto_s, sample_rate_hz)
}

/// Add complex white Gaussian noise of total power `noise_power_w` per
/// sample, reproducibly for a (seed, run) pair.
pub fn add_awgn(y: &mut [Complex64], noise_power_w: f64, seed: u64, run: u64) {
    if noise_power_w <= 0.0 {
        return;
    }
    let mut rng = derive_run_rng(seed, crate::rng::stream::AWGN, run);
    let gauss = Normal::new(0.0, (noise_power_w / 2.0).sqrt()).expect("valid std");
    for v in y.iter_mut() {
        *v += Complex64::new(gauss.sample(&mut rng), gauss.sample(&mut rng));
    }
}

/// Circular fractional delay through the frequency domain:
/// Y_k -> Y_k * exp(-j*2*pi*f_k*delay).
pub fn delay_circular(y: &[Complex64], delay_s: f64, sample_rate_hz: f64) -> IqSequence {
    if delay_s == 0.0 {
        return y.to_vec();
    }
    let mut buf = y.to_vec();
    fft_forward(&mut buf);
    for (v, f) in buf.iter_mut().zip(fft_bin_freqs(y.len(), sample_rate_hz)) {
        *v *= Complex64::from_polar(1.0, -TAU * f * delay_s);
    }
    fft_inverse(&mut buf);
    buf
}

fn ramp(y: &[Complex64], freq_hz: f64, sample_rate_hz: f64) -> IqSequence {
    if freq_hz == 0.0 {
        return y.to_vec();
    }
    let rotor = Complex64::from_polar(1.0, TAU * freq_hz / sample_rate_hz);
    let mut phase = Complex64::new(1.0, 0.0);
    y.iter()
        .map(|v| {
            let out = v * phase;
            phase *= rotor;
            out
        })
        .collect()
}
