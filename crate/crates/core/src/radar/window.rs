//! Taper selection for the range and Doppler transforms.

use crate::dsp::chebwin;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindowKind {
    Rect,
    Chebyshev { sidelobe_db: f64 },
}

impl Default for WindowKind {
    fn default() -> Self {
        WindowKind::Chebyshev { sidelobe_db: 100.0 }
    }
}

impl WindowKind {
    pub fn coefficients(&self, len: usize) -> Vec<f64> {
        match *self {
            WindowKind::Rect => vec![1.0; len],
            WindowKind::Chebyshev { sidelobe_db } => chebwin(len, sidelobe_db),
        }
    }
}

/// Sum and sum of squares, the only moments the periodogram scaling needs.
pub fn window_moments(w: &[f64]) -> (f64, f64) {
    let sum: f64 = w.iter().sum();
    let sumsq: f64 = w.iter().map(|v| v * v).sum();
    (sum, sumsq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_window_is_all_ones() {
        let w = WindowKind::Rect.coefficients(7);
        assert_eq!(w, vec![1.0; 7]);
        let (s, s2) = window_moments(&w);
        assert_eq!(s, 7.0);
        assert_eq!(s2, 7.0);
    }

    #[test]
    fn chebyshev_window_peaks_at_one() {
        let w = WindowKind::Chebyshev { sidelobe_db: 100.0 }.coefficients(64);
        let max = w.iter().cloned().fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&v| v > 0.0));
    }
}
