//! Frame containers and the QPSK alphabet.

use ndarray::Array2;
use num_complex::Complex64;

/// Subcarrier-by-symbol grid of complex symbols. Rows index subcarriers
/// (0..n_subcarriers), columns index OFDM symbols (0..n_symbols).
pub type FrameMatrix = Array2<Complex64>;

/// Complex baseband sample sequence. |sample|^2 is instantaneous power in
/// watts; the sample rate comes from the owning `SystemConfig`.
pub type IqSequence = Vec<Complex64>;

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Gray-mapped QPSK point for a bit pair: b0 selects the I sign, b1 the Q
/// sign, so neighboring constellation points differ in exactly one bit.
pub fn qpsk_map(b0: bool, b1: bool) -> Complex64 {
    let i = if b0 { -INV_SQRT2 } else { INV_SQRT2 };
    let q = if b1 { -INV_SQRT2 } else { INV_SQRT2 };
    Complex64::new(i, q)
}

/// Hard bit decisions from received symbol, inverse of `qpsk_map`. Decisions
/// depend only on the signs of I and Q, i.e. on the phase quadrant.
pub fn qpsk_demap(c: Complex64) -> (bool, bool) {
    (c.re < 0.0, c.im < 0.0)
}

/// Nearest constellation point (demap followed by remap).
pub fn qpsk_nearest(c: Complex64) -> Complex64 {
    let (b0, b1) = qpsk_demap(c);
    qpsk_map(b0, b1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qpsk_round_trip_and_unit_power() {
        for &(b0, b1) in &[(false, false), (false, true), (true, false), (true, true)] {
            let c = qpsk_map(b0, b1);
            assert!((c.norm() - 1.0).abs() < 1e-15);
            assert_eq!(qpsk_demap(c), (b0, b1));
        }
    }

    #[test]
    fn gray_neighbors_differ_in_one_bit() {
        // Walk the constellation by phase; adjacent points flip a single bit.
        let mut points: Vec<(f64, u8)> = [(false, false), (false, true), (true, false), (true, true)]
            .iter()
            .map(|&(a, b)| (qpsk_map(a, b).arg(), (a as u8) << 1 | b as u8))
            .collect();
        points.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        for w in 0..4 {
            let a = points[w].1;
            let b = points[(w + 1) % 4].1;
            assert_eq!((a ^ b).count_ones(), 1);
        }
    }
}
