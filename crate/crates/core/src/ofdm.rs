//! CP-OFDM frame construction, modulation, and demodulation.
//!
//! Subcarrier n of a symbol occupies baseband frequency (n - N/2) * delta_f,
//! so the comb is centered on the carrier and a fractional channel delay
//! appears as one contiguous complex exponential across the subcarrier axis.
//! Time samples carry physical power: the modulator output has exactly unit
//! average power per sample, and path gains apply the full link budget.

use crate::config::SystemConfig;
use crate::dsp::{fft_forward, fft_inverse};
use crate::error::{Error, Result};
use crate::frame::{qpsk_map, qpsk_nearest, FrameMatrix, IqSequence};
use crate::rng::{derive_rng, stream};
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

/// Draw the frame matrix for one transmission: pilots at their comb cells,
/// seeded QPSK data everywhere else. Returns the matrix together with the
/// payload bits in column-major cell order (two bits per data cell).
pub fn generate_frame(cfg: &SystemConfig, seed: u64) -> (FrameMatrix, Vec<u8>) {
    let n = cfg.n_subcarriers;
    let m = cfg.n_symbols;
    let mut rng = derive_rng(seed, stream::DATA_BITS);
    let mut grid = Array2::zeros((n, m));
    let mut bits = Vec::with_capacity(2 * n * m);
    for sym in 0..m {
        for sc in 0..n {
            grid[[sc, sym]] = if cfg.pilots.is_pilot(sc, sym) {
                cfg.pilots.value(sc, sym)
            } else {
                let b0 = rng.gen::<bool>();
                let b1 = rng.gen::<bool>();
                bits.push(b0 as u8);
                bits.push(b1 as u8);
                qpsk_map(b0, b1)
            };
        }
    }
    (grid, bits)
}

/// Frequency-domain content of one preamble symbol: a fixed seeded QPSK
/// sequence across the full band, known to the receiver.
pub fn preamble_symbol(cfg: &SystemConfig) -> Vec<Complex64> {
    let mut rng = derive_rng(cfg.preamble.seed, stream::PREAMBLE);
    (0..cfg.n_subcarriers)
        .map(|_| {
            let b0 = rng.gen::<bool>();
            let b1 = rng.gen::<bool>();
            qpsk_map(b0, b1)
        })
        .collect()
}

/// Time-domain preamble section exactly as `modulate` emits it: `n_repeats`
/// identical CP-prefixed symbols. Serves as the receiver's matched template.
pub fn preamble_waveform(cfg: &SystemConfig) -> IqSequence {
    let body = symbol_to_time(cfg, &preamble_symbol(cfg));
    let mut out = Vec::with_capacity(cfg.preamble_samples());
    for _ in 0..cfg.preamble.n_repeats {
        push_with_cp(cfg, &body, &mut out);
    }
    out
}

/// Synthesize the baseband frame: preamble followed by every data symbol,
/// each CP-prefixed. Output length is `cfg.frame_samples()`.
pub fn modulate(cfg: &SystemConfig, grid: &FrameMatrix) -> Result<IqSequence> {
    let (n, m) = grid.dim();
    if n != cfg.n_subcarriers || m != cfg.n_symbols {
        return Err(Error::dimension(format!(
            "frame is {n}x{m}, config expects {}x{}",
            cfg.n_subcarriers, cfg.n_symbols
        )));
    }
    let mut out = Vec::with_capacity(cfg.frame_samples());
    let pre = symbol_to_time(cfg, &preamble_symbol(cfg));
    for _ in 0..cfg.preamble.n_repeats {
        push_with_cp(cfg, &pre, &mut out);
    }
    let mut column = vec![Complex64::default(); n];
    for sym in 0..m {
        for sc in 0..n {
            column[sc] = grid[[sc, sym]];
        }
        let body = symbol_to_time(cfg, &column);
        push_with_cp(cfg, &body, &mut out);
    }
    Ok(out)
}

/// Recover the frame matrix from a received buffer. `data_start` indexes the
/// first sample of the first data symbol's cyclic prefix, i.e. the value of
/// `cfg.preamble_samples()` for an unshifted buffer.
pub fn demodulate(cfg: &SystemConfig, samples: &[Complex64], data_start: usize) -> Result<FrameMatrix> {
    let sym_len = cfg.symbol_samples();
    let cp_len = cfg.oversampling * cfg.n_cp;
    let needed = data_start + cfg.data_samples();
    if samples.len() < needed {
        return Err(Error::dimension(format!(
            "buffer holds {} samples, demodulation needs {needed}",
            samples.len()
        )));
    }
    let n = cfg.n_subcarriers;
    let mut grid = Array2::zeros((n, cfg.n_symbols));
    let mut body = vec![Complex64::default(); cfg.oversampling * n];
    for sym in 0..cfg.n_symbols {
        let start = data_start + sym * sym_len + cp_len;
        body.copy_from_slice(&samples[start..start + cfg.oversampling * n]);
        let spectrum = time_to_symbol(cfg, &mut body);
        for sc in 0..n {
            grid[[sc, sym]] = spectrum[sc];
        }
    }
    Ok(grid)
}

/// Rebuild the transmitted symbol estimate used as the sensing reference.
/// Pilot cells take their known values. Data cells come from the genie frame
/// when one is supplied, otherwise from hard QPSK decisions on `received`.
pub fn hard_demap_remap(
    cfg: &SystemConfig,
    received: &FrameMatrix,
    genie: Option<&FrameMatrix>,
) -> FrameMatrix {
    let (n, m) = received.dim();
    let mut out = Array2::zeros((n, m));
    for sym in 0..m {
        for sc in 0..n {
            out[[sc, sym]] = if cfg.pilots.is_pilot(sc, sym) {
                cfg.pilots.value(sc, sym)
            } else if let Some(g) = genie {
                g[[sc, sym]]
            } else {
                qpsk_nearest(received[[sc, sym]])
            };
        }
    }
    out
}

/// Hard QPSK bit decisions over the data cells, column-major, for BER checks.
pub fn demap_payload(cfg: &SystemConfig, received: &FrameMatrix) -> Vec<u8> {
    let (n, m) = received.dim();
    let mut bits = Vec::new();
    for sym in 0..m {
        for sc in 0..n {
            if !cfg.pilots.is_pilot(sc, sym) {
                let (b0, b1) = crate::frame::qpsk_demap(received[[sc, sym]]);
                bits.push(b0 as u8);
                bits.push(b1 as u8);
            }
        }
    }
    bits
}

/// IDFT of one symbol onto the oversampled grid, without CP:
/// x[s] = (1/sqrt(N)) * sum_n X[n] * exp(j*2*pi*(n - N/2)*s / (os*N)).
fn symbol_to_time(cfg: &SystemConfig, spectrum: &[Complex64]) -> Vec<Complex64> {
    let n = cfg.n_subcarriers;
    let nfft = cfg.oversampling * n;
    let half = n / 2;
    let mut buf = vec![Complex64::default(); nfft];
    for (sc, &x) in spectrum.iter().enumerate() {
        let bin = (sc + nfft - half) % nfft;
        buf[bin] = x;
    }
    fft_inverse(&mut buf);
    let scale = nfft as f64 / (n as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= scale;
    }
    buf
}

/// Forward transform matching `symbol_to_time`; consumes the body in place.
fn time_to_symbol(cfg: &SystemConfig, body: &mut [Complex64]) -> Vec<Complex64> {
    let n = cfg.n_subcarriers;
    let nfft = cfg.oversampling * n;
    debug_assert_eq!(body.len(), nfft);
    fft_forward(body);
    let half = n / 2;
    let scale = 1.0 / ((n as f64).sqrt() * cfg.oversampling as f64);
    (0..n)
        .map(|sc| body[(sc + nfft - half) % nfft] * scale)
        .collect()
}

fn push_with_cp(cfg: &SystemConfig, body: &[Complex64], out: &mut Vec<Complex64>) {
    let cp_len = cfg.oversampling * cfg.n_cp;
    out.extend_from_slice(&body[body.len() - cp_len..]);
    out.extend_from_slice(body);
}
