//! One-sided noise power spectral densities on log-log anchor tables, with
//! analytic band integration and Gaussian time-series synthesis.
//!
//! A spec is a list of (offset frequency, level) anchors in dBc/Hz. Between
//! anchors the level is linear in dB versus log-frequency, i.e. an exact
//! piecewise power law; outside the anchor span the level extends flat. Only
//! offsets inside [f_min_hz, f_max_hz] carry power.

use crate::dsp::fft_inverse;
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::BufRead;
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct NoisePsdSpec {
    /// (offset_hz, level_dbc_hz) anchors, strictly increasing in frequency.
    pub anchors: Vec<(f64, f64)>,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
}

impl NoisePsdSpec {
    pub fn new(anchors: Vec<(f64, f64)>, f_min_hz: f64, f_max_hz: f64) -> Result<NoisePsdSpec> {
        let spec = NoisePsdSpec { anchors, f_min_hz, f_max_hz };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.anchors.is_empty() {
            return Err(Error::config("psd needs at least one anchor"));
        }
        if self.anchors[0].0 <= 0.0 {
            return Err(Error::config("psd anchor frequencies must be positive"));
        }
        if self.anchors.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::config("psd anchor frequencies must be strictly increasing"));
        }
        if !(self.f_min_hz > 0.0 && self.f_max_hz > self.f_min_hz) {
            return Err(Error::config("psd band must satisfy 0 < f_min < f_max"));
        }
        Ok(())
    }

    /// Level at offset `f`, dBc/Hz, for any positive frequency; the band
    /// limits are not applied here.
    pub fn level_dbchz(&self, f: f64) -> f64 {
        let a = &self.anchors;
        if f <= a[0].0 {
            return a[0].1;
        }
        if f >= a[a.len() - 1].0 {
            return a[a.len() - 1].1;
        }
        let hi = a.partition_point(|p| p.0 <= f);
        let (f1, l1) = a[hi - 1];
        let (f2, l2) = a[hi];
        l1 + (l2 - l1) * (f / f1).log10() / (f2 / f1).log10()
    }

    /// Total double-sideband power in dB relative to the carrier:
    /// 10*log10(2 * integral of 10^(L(f)/10) over [f_min, f_max]), evaluated
    /// in closed form per power-law segment.
    pub fn integrated_dbc(&self) -> f64 {
        10.0 * (2.0 * self.integrated_band_power(self.f_min_hz, self.f_max_hz)).log10()
    }

    /// Single-sided integral of the linear PSD over [lo, hi] clipped to the
    /// spec band.
    pub fn integrated_band_power(&self, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(self.f_min_hz);
        let hi = hi.min(self.f_max_hz);
        if hi <= lo {
            return 0.0;
        }
        let mut edges = vec![lo];
        for &(f, _) in &self.anchors {
            if f > lo && f < hi {
                edges.push(f);
            }
        }
        edges.push(hi);
        let mut total = 0.0;
        for w in edges.windows(2) {
            let (f1, f2) = (w[0], w[1]);
            let s1 = 10f64.powf(self.level_dbchz(f1) / 10.0);
            let s2 = 10f64.powf(self.level_dbchz(f2) / 10.0);
            let m = (s2 / s1).log10() / (f2 / f1).log10();
            total += if (m + 1.0).abs() < 1e-9 {
                s1 * f1 * (f2 / f1).ln()
            } else {
                s1 * f1 * ((f2 / f1).powf(m + 1.0) - 1.0) / (m + 1.0)
            };
        }
        total
    }

    /// Load from a two-column CSV `freq_hz,level_dbc_hz`; the band defaults
    /// to the anchor span.
    pub fn from_csv(path: &Path) -> Result<NoisePsdSpec> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = f.lines();
        let header = lines.next().ok_or_else(|| Error::config("empty psd file"))??;
        if header.trim() != "freq_hz,level_dbc_hz" {
            return Err(Error::config(format!("unexpected psd header: {header}")));
        }
        let mut anchors = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let mut next = || -> Result<f64> {
                cols.next()
                    .ok_or_else(|| Error::config(format!("short psd row: {line}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::config(format!("bad psd value: {e}")))
            };
            anchors.push((next()?, next()?));
        }
        let (f_min, f_max) = match (anchors.first(), anchors.last()) {
            (Some(a), Some(b)) if anchors.len() >= 2 => (a.0, b.0),
            _ => return Err(Error::config("psd file needs at least two anchors")),
        };
        NoisePsdSpec::new(anchors, f_min, f_max)
    }
}

/// Per-oscillator local-oscillator profile: a close-in plateau out to the
/// synthesizer loop bandwidth, a -20 dB per decade rolloff, and a broadband
/// floor. Each oscillator integrates to -35.10 dBc, so a link with
/// independent transmit and receive oscillators carries -32.09 dBc combined.
pub fn pn_default() -> NoisePsdSpec {
    NoisePsdSpec::new(
        vec![
            (1e2, -91.933534),
            (119_640.94, -91.933534),
            (19_987_504.34, -136.391109),
            (9.5e7, -136.391109),
        ],
        1e2,
        9.5e7,
    )
    .expect("default pn profile is valid")
}

/// Spectral shape for sampling-clock jitter: flat band-limited timing noise.
/// The absolute level is irrelevant; the generator rescales to an exact RMS.
pub fn jitter_default() -> NoisePsdSpec {
    NoisePsdSpec::new(vec![(1e4, -100.0), (4e7, -100.0)], 1e4, 4e7).expect("valid jitter shape")
}

/// Synthesize a real Gaussian series whose one-sided PSD is twice the spec
/// level (the dBc/Hz anchors describe one sideband, and both sidebands carry
/// the process power): Hermitian frequency-domain construction with per-bin
/// variance 10^(L(f_k)/10) * fs/n, DC and out-of-band bins zeroed.
pub fn synthesize_real(spec: &NoisePsdSpec, n: usize, fs_hz: f64, rng: &mut impl Rng) -> Vec<f64> {
    let df = fs_hz / n as f64;
    let mut bins = vec![Complex64::default(); n];
    let half = n / 2;
    for k in 1..half + usize::from(n % 2 == 1) {
        let f = k as f64 * df;
        if f < spec.f_min_hz || f > spec.f_max_hz {
            continue;
        }
        let sigma = (10f64.powf(spec.level_dbchz(f) / 10.0) * df).sqrt();
        let u: f64 = StandardNormal.sample(rng);
        let v: f64 = StandardNormal.sample(rng);
        let a = Complex64::new(u, v) * (sigma / 2f64.sqrt());
        bins[k] = a;
        bins[n - k] = a.conj();
    }
    fft_inverse(&mut bins);
    bins.into_iter().map(|c| c.re * n as f64).collect()
}

/// Phase-noise trajectory in radians for one oscillator over `n` samples.
pub fn pn_generate(spec: &NoisePsdSpec, n: usize, fs_hz: f64, seed: u64, stream: u64, run: u64) -> Vec<f64> {
    let mut rng = crate::rng::derive_run_rng(seed, stream, run);
    synthesize_real(spec, n, fs_hz, &mut rng)
}

/// Rotate each sample by its oscillator phase.
pub fn pn_apply(y: &mut [Complex64], phase_rad: &[f64]) {
    debug_assert_eq!(y.len(), phase_rad.len());
    for (v, &p) in y.iter_mut().zip(phase_rad.iter()) {
        *v *= Complex64::from_polar(1.0, p);
    }
}
