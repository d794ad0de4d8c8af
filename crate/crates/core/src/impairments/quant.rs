//! Mid-rise uniform quantization of both rails with hard rail clipping.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct QuantizerSpec {
    pub n_bits: u32,
    /// Rail full scale: each of I and Q is clipped to (-A, A).
    pub full_scale_amp: f64,
}

impl QuantizerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_bits < 2 || self.n_bits > 24 {
            return Err(Error::config("quantizer resolution must be 2..=24 bits"));
        }
        if !(self.full_scale_amp > 0.0 && self.full_scale_amp.is_finite()) {
            return Err(Error::config("quantizer full scale must be positive"));
        }
        Ok(())
    }

    /// Size the rails from the complex signal power: headroom is the ratio of
    /// the full-scale sine power A^2/2 to the per-rail signal power P/2, so
    /// A = sqrt(headroom * P). A full-scale complex exponential then sits at
    /// exactly 0 dB headroom.
    pub fn for_headroom(n_bits: u32, signal_power_w: f64, headroom_db: f64) -> Result<QuantizerSpec> {
        if !(signal_power_w > 0.0) {
            return Err(Error::config("signal power must be positive to size the quantizer"));
        }
        let spec = QuantizerSpec {
            n_bits,
            full_scale_amp: (10f64.powf(headroom_db / 10.0) * signal_power_w).sqrt(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn step(&self) -> f64 {
        2.0 * self.full_scale_amp / (1u64 << self.n_bits) as f64
    }
}

/// Quantize both rails in place: mid-rise levels (k + 1/2) * step, clipped to
/// the outermost levels +-(A - step/2).
pub fn quantize_clip(y: &mut [Complex64], spec: &QuantizerSpec) {
    let step = spec.step();
    let top = spec.full_scale_amp - 0.5 * step;
    let rail = |v: f64| -> f64 {
        let q = ((v / step).floor() + 0.5) * step;
        q.clamp(-top, top)
    };
    for v in y.iter_mut() {
        *v = Complex64::new(rail(v.re), rail(v.im));
    }
}

/// Signal-to-quantization-noise ratio of `quantized` against `reference`, dB.
pub fn sqnr_db(reference: &[Complex64], quantized: &[Complex64]) -> f64 {
    let sig: f64 = reference.iter().map(|v| v.norm_sqr()).sum();
    let err: f64 = reference
        .iter()
        .zip(quantized.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    10.0 * (sig / err).log10()
}
