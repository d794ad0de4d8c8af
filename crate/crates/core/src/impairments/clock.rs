//! Sampling-clock error: fractional rate offset plus random aperture jitter.
//!
//! A converter clocked at (1 + sfo) times the nominal rate takes sample s at
//! nominal time s * Ts * (1 - sfo) + tau[s] (to first order in sfo). The
//! resampler evaluates the buffer's band-limited periodic interpolant on the
//! uniformly stretched grid with one chirp-z transform per derivative order
//! and corrects the sub-sample jitter with a local second-order Taylor step,
//! which is accurate to below -250 dB at realistic jitter (tens of fs).

use crate::dsp::{fft_bin_freqs, fft_forward, StretchEval};
use crate::error::{Error, Result};
use crate::frame::IqSequence;
use crate::impairments::psd::{jitter_default, synthesize_real, NoisePsdSpec};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Random aperture jitter: a spectral shape scaled to an exact RMS.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TimingJitter {
    pub rms_s: f64,
    pub shape: NoisePsdSpec,
}

impl TimingJitter {
    pub fn with_rms(rms_s: f64) -> TimingJitter {
        TimingJitter { rms_s, shape: jitter_default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rms_s >= 0.0 && self.rms_s.is_finite()) {
            return Err(Error::config("jitter rms must be finite and non-negative"));
        }
        self.shape.validate()
    }
}

/// Draw one jitter trajectory in seconds: the spec's spectral shape,
/// rescaled so the buffer RMS equals `rms_s` exactly.
pub fn jitter_generate(
    jitter: &TimingJitter,
    n: usize,
    fs_hz: f64,
    seed: u64,
    stream: u64,
    run: u64,
) -> Result<Vec<f64>> {
    if jitter.rms_s == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut rng = crate::rng::derive_run_rng(seed, stream, run);
    let raw = synthesize_real(&jitter.shape, n, fs_hz, &mut rng);
    let rms = (raw.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms <= 0.0 {
        return Err(Error::numeric(
            "jitter shape has no spectral support inside the synthesis band",
        ));
    }
    let scale = jitter.rms_s / rms;
    Ok(raw.into_iter().map(|v| v * scale).collect())
}

/// Resample a buffer through an offset, jittery sampling clock. `jitter_s`,
/// when present, must match the buffer length. With zero offset and no
/// jitter the buffer passes through untouched.
pub fn resample_clock(
    y: &[Complex64],
    sfo_frac: f64,
    jitter_s: Option<&[f64]>,
    sample_rate_hz: f64,
) -> Result<IqSequence> {
    if let Some(j) = jitter_s {
        if j.len() != y.len() {
            return Err(Error::dimension(format!(
                "jitter trajectory has {} samples, buffer has {}",
                j.len(),
                y.len()
            )));
        }
    }
    let jitter_is_zero = jitter_s.map_or(true, |j| j.iter().all(|&v| v == 0.0));
    if sfo_frac == 0.0 && jitter_is_zero {
        return Ok(y.to_vec());
    }

    let n = y.len();
    let alpha = 1.0 - sfo_frac;
    let mut spectrum = y.to_vec();
    fft_forward(&mut spectrum);
    let eval = StretchEval::new(n, alpha);
    let mut out = eval.eval_spectrum(&spectrum);

    if !jitter_is_zero {
        let jitter = jitter_s.expect("jitter checked non-zero");
        let omega: Vec<f64> = fft_bin_freqs(n, n as f64)
            .into_iter()
            .map(|k| TAU * k / n as f64)
            .collect();
        let d1: Vec<Complex64> = spectrum
            .iter()
            .zip(omega.iter())
            .map(|(v, &w)| v * Complex64::new(0.0, w))
            .collect();
        let d2: Vec<Complex64> = spectrum
            .iter()
            .zip(omega.iter())
            .map(|(v, &w)| v * Complex64::new(-w * w, 0.0))
            .collect();
        let z1 = eval.eval_spectrum(&d1);
        let z2 = eval.eval_spectrum(&d2);
        for s in 0..n {
            let eps = jitter[s] * sample_rate_hz;
            out[s] += eps * z1[s] + 0.5 * eps * eps * z2[s];
        }
    }
    Ok(out)
}
