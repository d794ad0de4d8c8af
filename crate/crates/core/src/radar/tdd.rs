//! Half-duplex frame masking.
//!
//! In a time-division duplex frame only a prefix of each period is
//! transmitted downlink; the sensing receiver has no usable quotient during
//! the uplink symbols. Blanking those columns keeps the estimator unbiased
//! but raises Doppler sidelobes; patching them with the nearest downlink
//! column trades bias for sidelobe control.

use crate::error::{Error, Result};
use crate::frame::FrameMatrix;
use serde::{Deserialize, Serialize};

/// How to fill quotient columns that fall in uplink symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TddMode {
    /// Zero the uplink columns.
    BlankUl,
    /// Copy the most recent downlink column into each uplink column.
    PatchDl,
}

/// Periodic downlink/uplink split across the symbol axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TddPattern {
    pub period_symbols: usize,
    pub dl_symbols: usize,
    pub mode: TddMode,
}

impl TddPattern {
    pub fn validate(&self) -> Result<()> {
        if self.period_symbols == 0 {
            return Err(Error::config("TDD period must be at least one symbol"));
        }
        if self.dl_symbols == 0 || self.dl_symbols > self.period_symbols {
            return Err(Error::config(
                "TDD downlink length must be in 1..=period_symbols",
            ));
        }
        Ok(())
    }

    pub fn is_downlink(&self, symbol: usize) -> bool {
        symbol % self.period_symbols < self.dl_symbols
    }

    /// Fraction of symbols carrying downlink.
    pub fn duty_cycle(&self) -> f64 {
        self.dl_symbols as f64 / self.period_symbols as f64
    }
}

/// Per-symbol downlink mask for `n_symbols` columns.
pub fn tdd_mask(pattern: &TddPattern, n_symbols: usize) -> Vec<bool> {
    (0..n_symbols).map(|m| pattern.is_downlink(m)).collect()
}

/// Apply the pattern to a quotient matrix, returning the masked matrix and
/// the downlink mask that produced it.
pub fn tdd_apply(pattern: &TddPattern, g: &FrameMatrix) -> Result<(FrameMatrix, Vec<bool>)> {
    pattern.validate()?;
    let (n, m) = g.dim();
    let mask = tdd_mask(pattern, m);
    let mut out = g.clone();
    let mut last_dl: Option<usize> = None;
    for sym in 0..m {
        if mask[sym] {
            last_dl = Some(sym);
            continue;
        }
        match pattern.mode {
            TddMode::BlankUl => {
                for sc in 0..n {
                    out[[sc, sym]] = num_complex::Complex64::default();
                }
            }
            TddMode::PatchDl => {
                let src = last_dl.ok_or_else(|| {
                    Error::config("TDD patching requires the frame to start with downlink")
                })?;
                for sc in 0..n {
                    out[[sc, sym]] = g[[sc, src]];
                }
            }
        }
    }
    Ok((out, mask))
}
