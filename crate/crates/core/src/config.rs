//! System configuration and derived waveform/sensing quantities.

use crate::error::{Error, Result};
use crate::frame::qpsk_map;
use crate::rng::position_bits;
use crate::units::C0;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Pilot comb layout. Pilot cells sit at every `freq_comb`-th subcarrier of
/// every `time_comb`-th symbol; their values are a fixed seeded QPSK sequence
/// known to the receiver. A 1x1 comb marks the whole frame as known.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PilotGrid {
    pub freq_comb: usize,
    pub time_comb: usize,
    pub seed: u64,
}

impl Default for PilotGrid {
    fn default() -> Self {
        PilotGrid { freq_comb: 4, time_comb: 4, seed: 0x70696c6f }
    }
}

impl PilotGrid {
    pub fn is_pilot(&self, subcarrier: usize, symbol: usize) -> bool {
        subcarrier % self.freq_comb == 0 && symbol % self.time_comb == 0
    }

    /// Known pilot value at a pilot cell (unit magnitude).
    pub fn value(&self, subcarrier: usize, symbol: usize) -> Complex64 {
        let (b0, b1) = position_bits(self.seed, subcarrier, symbol);
        qpsk_map(b0, b1)
    }

    /// Subcarrier indices of the pilot comb.
    pub fn pilot_subcarriers(&self, n_subcarriers: usize) -> Vec<usize> {
        (0..n_subcarriers).step_by(self.freq_comb).collect()
    }

    /// Symbol indices of the pilot comb.
    pub fn pilot_symbols(&self, n_symbols: usize) -> Vec<usize> {
        (0..n_symbols).step_by(self.time_comb).collect()
    }
}

/// Preamble layout: `n_repeats` identical full-band OFDM symbols (each with
/// its own cyclic prefix) carrying a seeded unit-magnitude QPSK sequence.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PreambleSpec {
    pub n_repeats: usize,
    pub seed: u64,
}

impl Default for PreambleSpec {
    fn default() -> Self {
        PreambleSpec { n_repeats: 2, seed: 0x70726521 }
    }
}

/// CP-OFDM numerology plus the sensing frame extent.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SystemConfig {
    /// Carrier frequency, Hz.
    pub carrier_freq_hz: f64,
    /// Subcarrier spacing, Hz.
    pub subcarrier_spacing_hz: f64,
    /// Active subcarriers per symbol (all carry data or pilots).
    pub n_subcarriers: usize,
    /// Cyclic prefix length in critical-rate samples.
    pub n_cp: usize,
    /// OFDM symbols per frame (preamble excluded).
    pub n_symbols: usize,
    /// Integer baseband oversampling factor; 1 simulates at the critical rate.
    pub oversampling: usize,
    #[serde(default)]
    pub pilots: PilotGrid,
    #[serde(default)]
    pub preamble: PreambleSpec,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            carrier_freq_hz: 27.4e9,
            subcarrier_spacing_hz: 120e3,
            n_subcarriers: 1584,
            n_cp: 112,
            n_symbols: 1120,
            oversampling: 1,
            pilots: PilotGrid::default(),
            preamble: PreambleSpec::default(),
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_freq_hz > 0.0) {
            return Err(Error::config("carrier_freq_hz must be positive"));
        }
        if !(self.subcarrier_spacing_hz > 0.0) {
            return Err(Error::config("subcarrier_spacing_hz must be positive"));
        }
        if self.n_subcarriers < 4 {
            return Err(Error::config("n_subcarriers must be at least 4"));
        }
        if self.n_cp >= self.n_subcarriers {
            return Err(Error::config(format!(
                "n_cp ({}) must be smaller than n_subcarriers ({})",
                self.n_cp, self.n_subcarriers
            )));
        }
        if self.n_symbols == 0 {
            return Err(Error::config("n_symbols must be positive"));
        }
        if self.oversampling == 0 {
            return Err(Error::config("oversampling must be at least 1"));
        }
        if self.pilots.freq_comb == 0 || self.pilots.time_comb == 0 {
            return Err(Error::config("pilot combs must be at least 1"));
        }
        if self.pilots.freq_comb >= self.n_subcarriers || self.pilots.time_comb > self.n_symbols {
            return Err(Error::config("pilot comb exceeds frame dimensions"));
        }
        if self.preamble.n_repeats < 2 {
            return Err(Error::config("preamble needs at least 2 repeated symbols"));
        }
        Ok(())
    }

    /// Occupied bandwidth N * delta_f, Hz. All sensing quantities use this
    /// exact product rather than a rounded nominal bandwidth.
    pub fn bandwidth_hz(&self) -> f64 {
        self.n_subcarriers as f64 * self.subcarrier_spacing_hz
    }

    /// Simulation sample rate, Hz.
    pub fn sample_rate_hz(&self) -> f64 {
        self.bandwidth_hz() * self.oversampling as f64
    }

    pub fn sample_period_s(&self) -> f64 {
        1.0 / self.sample_rate_hz()
    }

    pub fn wavelength_m(&self) -> f64 {
        C0 / self.carrier_freq_hz
    }

    /// Samples per CP-prefixed OFDM symbol at the simulation rate.
    pub fn symbol_samples(&self) -> usize {
        self.oversampling * (self.n_subcarriers + self.n_cp)
    }

    /// CP-inclusive symbol duration, s.
    pub fn symbol_duration_s(&self) -> f64 {
        (self.n_subcarriers + self.n_cp) as f64 / self.bandwidth_hz()
    }

    pub fn preamble_samples(&self) -> usize {
        self.preamble.n_repeats * self.symbol_samples()
    }

    /// Samples in the data section of the frame (preamble excluded).
    pub fn data_samples(&self) -> usize {
        self.n_symbols * self.symbol_samples()
    }

    pub fn frame_samples(&self) -> usize {
        self.preamble_samples() + self.data_samples()
    }

    // ─── Sensing performance parameters ──────────────────────────────────

    /// Bistatic range resolution c0/B, m.
    pub fn range_resolution_m(&self) -> f64 {
        C0 / self.bandwidth_hz()
    }

    /// Unambiguous relative bistatic range N * c0/B, m.
    pub fn unambiguous_range_m(&self) -> f64 {
        self.n_subcarriers as f64 * self.range_resolution_m()
    }

    /// ISI-free relative bistatic range N_cp * c0/B, m.
    pub fn isi_free_range_m(&self) -> f64 {
        self.n_cp as f64 * self.range_resolution_m()
    }

    /// Doppler resolution 1/(M*T_sym) = B/((N+N_cp)*M), Hz.
    pub fn doppler_resolution_hz(&self) -> f64 {
        1.0 / (self.n_symbols as f64 * self.symbol_duration_s())
    }

    /// One-sided unambiguous Doppler M*delta_fD/2, Hz.
    pub fn unambiguous_doppler_hz(&self) -> f64 {
        self.n_symbols as f64 * self.doppler_resolution_hz() / 2.0
    }

    /// One-sided Doppler limit for negligible ICI, delta_f/10, Hz.
    pub fn ici_free_doppler_hz(&self) -> f64 {
        self.subcarrier_spacing_hz / 10.0
    }

    /// Coherent integration gain over the frame, 10*log10(N*M), dB.
    pub fn processing_gain_db(&self) -> f64 {
        10.0 * ((self.n_subcarriers * self.n_symbols) as f64).log10()
    }

    /// One-sided CFO acquisition bound of the repeated-preamble estimator:
    /// half the reciprocal of the repeat spacing, delta_f/2 * N/(N+N_cp), Hz.
    pub fn cfo_ambiguity_hz(&self) -> f64 {
        0.5 / self.symbol_duration_s()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_derived_quantities() {
        let cfg = SystemConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.bandwidth_hz(), 190.08e6);
        assert!((cfg.range_resolution_m() - 1.577191).abs() < 1e-5);
        assert!((cfg.unambiguous_range_m() - 2498.27).abs() < 0.01);
        assert!((cfg.isi_free_range_m() - 176.6454).abs() < 1e-3);
        assert!((cfg.doppler_resolution_hz() - 100.067385).abs() < 1e-5);
        assert!((cfg.unambiguous_doppler_hz() - 56037.7358).abs() < 1e-3);
        assert_eq!(cfg.ici_free_doppler_hz(), 12e3);
        assert!((cfg.processing_gain_db() - 62.489732).abs() < 1e-5);
        assert_eq!(cfg.data_samples(), 1_899_520);
        assert_eq!(cfg.symbol_samples(), 1696);
    }

    #[test]
    fn validation_rejects_bad_numerology() {
        let mut cfg = SystemConfig::default();
        cfg.n_cp = cfg.n_subcarriers;
        assert!(cfg.validate().is_err());

        let mut cfg = SystemConfig::default();
        cfg.oversampling = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = SystemConfig::default();
        cfg.preamble.n_repeats = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn pilot_grid_is_deterministic_comb() {
        let g = PilotGrid::default();
        assert!(g.is_pilot(0, 0));
        assert!(g.is_pilot(4, 8));
        assert!(!g.is_pilot(1, 0));
        assert!(!g.is_pilot(4, 2));
        let v1 = g.value(8, 4);
        let v2 = g.value(8, 4);
        assert_eq!(v1, v2);
        assert!((v1.norm() - 1.0).abs() < 1e-15);
    }
}
