//! Range-Doppler periodogram over the demodulated channel quotient.
//!
//! The quotient G[n, m] = Y[n, m] / X_hat[n, m] isolates the channel: a path
//! at relative delay tau and Doppler f_D appears as the separable ramp
//! exp(-j*2*pi*n*delta_f*tau) * exp(+j*2*pi*f_D*m*T_sym). An inverse DFT
//! across subcarriers therefore maps positive delay to positive range bins,
//! and a forward DFT across symbols (displayed centered) maps approaching
//! targets to positive Doppler bins.

use crate::config::SystemConfig;
use crate::dsp::{fft_forward, fft_inverse};
use crate::error::{Error, Result};
use crate::frame::FrameMatrix;
use crate::radar::window::{window_moments, WindowKind};
use ndarray::Array2;
use num_complex::Complex64;

/// Division guard: reference cells with |X_hat| below this produce a zero
/// quotient cell instead of amplifying noise.
pub const QUOTIENT_EPS: f64 = 1e-9;

/// Element-wise Y / X_hat with a magnitude guard on the divisor.
pub fn channel_quotient(received: &FrameMatrix, reference: &FrameMatrix) -> Result<FrameMatrix> {
    if received.dim() != reference.dim() {
        return Err(Error::dimension(format!(
            "received {:?} and reference {:?} frames differ",
            received.dim(),
            reference.dim()
        )));
    }
    let mut g = Array2::zeros(received.dim());
    for ((i, j), v) in received.indexed_iter() {
        let x = reference[[i, j]];
        g[[i, j]] = if x.norm() < QUOTIENT_EPS { Complex64::default() } else { v / x };
    }
    Ok(g)
}

/// Remove the common phase error of each symbol: derotate every column by
/// the argument of its cell mean.
pub fn cpe_compensate(g: &mut FrameMatrix) {
    let (n, m) = g.dim();
    for sym in 0..m {
        let mut acc = Complex64::default();
        for sc in 0..n {
            acc += g[[sc, sym]];
        }
        if acc.norm() == 0.0 {
            continue;
        }
        let derot = Complex64::from_polar(1.0, -acc.arg());
        for sc in 0..n {
            g[[sc, sym]] *= derot;
        }
    }
}

/// Scaled range-Doppler power map.
///
/// Rows are range bins (bin spacing `range_step_m`, wrapping at the
/// unambiguous extent); columns are Doppler bins centered on
/// `doppler_center_bin` (bin spacing `doppler_step_hz`). Powers are in W at
/// the receiver reference plane: a unit-gain static path integrates to
/// N * M regardless of the window, and white noise of per-cell power
/// sigma^2 averages sigma^2 * (N*M) / (N_eff*M_eff) per bin, which is
/// sigma^2 for rectangular windows.
#[derive(Clone, Debug)]
pub struct Periodogram {
    pub p: Array2<f64>,
    pub range_step_m: f64,
    pub doppler_step_hz: f64,
    pub doppler_center_bin: usize,
}

impl Periodogram {
    pub fn n_range_bins(&self) -> usize {
        self.p.dim().0
    }

    pub fn n_doppler_bins(&self) -> usize {
        self.p.dim().1
    }

    /// Physical coordinates of a (possibly fractional) bin pair.
    pub fn bin_to_physical(&self, range_bin: f64, doppler_bin: f64) -> (f64, f64) {
        (
            range_bin * self.range_step_m,
            (doppler_bin - self.doppler_center_bin as f64) * self.doppler_step_hz,
        )
    }

    /// Peak cell and its value.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::MIN);
        for ((i, j), &v) in self.p.indexed_iter() {
            if v > best.2 {
                best = (i, j, v);
            }
        }
        best
    }
}

/// Dimensions and tapers of the range-Doppler transform.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodogramSpec {
    pub range_window: WindowKind,
    pub doppler_window: WindowKind,
    pub range_pad: usize,
    pub doppler_pad: usize,
}

impl Default for PeriodogramSpec {
    fn default() -> Self {
        PeriodogramSpec {
            range_window: WindowKind::default(),
            doppler_window: WindowKind::default(),
            range_pad: 1,
            doppler_pad: 1,
        }
    }
}

impl PeriodogramSpec {
    pub fn validate(&self) -> Result<()> {
        if self.range_pad == 0 || self.doppler_pad == 0 {
            return Err(Error::config("periodogram pad factors must be at least 1"));
        }
        Ok(())
    }
}

/// Compute the periodogram of a quotient matrix, using the config only for
/// the physical axis scaling.
pub fn periodogram(cfg: &SystemConfig, g: &FrameMatrix, spec: &PeriodogramSpec) -> Result<Periodogram> {
    spec.validate()?;
    let (n, m) = g.dim();
    if n < 2 || m < 2 {
        return Err(Error::dimension("quotient matrix must be at least 2x2"));
    }
    let w_r = spec.range_window.coefficients(n);
    let w_d = spec.doppler_window.coefficients(m);
    transform(
        g,
        &w_r,
        &w_d,
        spec.range_pad,
        spec.doppler_pad,
        cfg.range_resolution_m(),
        cfg.doppler_resolution_hz(),
    )
}

/// Periodogram over the pilot comb only: the quotient is taken at pilot
/// cells, decimating both axes by the comb factors. Resolution is preserved
/// (pilots still span the full band and frame); the unambiguous extents
/// shrink by the comb factors.
pub fn pilot_periodogram(
    cfg: &SystemConfig,
    received: &FrameMatrix,
    spec: &PeriodogramSpec,
) -> Result<Periodogram> {
    spec.validate()?;
    let subs = cfg.pilots.pilot_subcarriers(cfg.n_subcarriers);
    let syms = cfg.pilots.pilot_symbols(cfg.n_symbols);
    if subs.len() < 2 || syms.len() < 2 {
        return Err(Error::dimension("pilot comb too sparse for a periodogram"));
    }
    let mut g = Array2::zeros((subs.len(), syms.len()));
    for (j, &sym) in syms.iter().enumerate() {
        for (i, &sc) in subs.iter().enumerate() {
            let x = cfg.pilots.value(sc, sym);
            let y = received[[sc, sym]];
            g[[i, j]] = if x.norm() < QUOTIENT_EPS { Complex64::default() } else { y / x };
        }
    }
    let w_r = spec.range_window.coefficients(subs.len());
    let w_d = spec.doppler_window.coefficients(syms.len());
    transform(
        &g,
        &w_r,
        &w_d,
        spec.range_pad,
        spec.doppler_pad,
        cfg.range_resolution_m(),
        cfg.doppler_resolution_hz() * cfg.pilots.time_comb as f64,
    )
}

fn transform(
    g: &FrameMatrix,
    w_r: &[f64],
    w_d: &[f64],
    range_pad: usize,
    doppler_pad: usize,
    range_resolution_m: f64,
    doppler_resolution_hz: f64,
) -> Result<Periodogram> {
    let (n, m) = g.dim();
    let n_pad = n * range_pad;
    let m_pad = m * doppler_pad;

    let mut inter = Array2::<Complex64>::zeros((n_pad, m));
    let mut col = vec![Complex64::default(); n_pad];
    for sym in 0..m {
        col[..].fill(Complex64::default());
        for sc in 0..n {
            col[sc] = g[[sc, sym]] * w_r[sc];
        }
        fft_inverse(&mut col);
        for l in 0..n_pad {
            inter[[l, sym]] = col[l];
        }
    }

    let (sum_r, _) = window_moments(w_r);
    let (sum_d, _) = window_moments(w_d);
    let scale = (n * m) as f64 * (n_pad as f64 / (sum_r * sum_d)).powi(2);
    let center = m_pad / 2;

    let mut p = Array2::zeros((n_pad, m_pad));
    let mut row = vec![Complex64::default(); m_pad];
    for l in 0..n_pad {
        row[..].fill(Complex64::default());
        for sym in 0..m {
            row[sym] = inter[[l, sym]] * w_d[sym];
        }
        fft_forward(&mut row);
        for q in 0..m_pad {
            let shifted = (q + m_pad - center) % m_pad;
            p[[l, q]] = row[shifted].norm_sqr() * scale;
        }
    }

    Ok(Periodogram {
        p,
        range_step_m: range_resolution_m / range_pad as f64,
        doppler_step_hz: doppler_resolution_hz / doppler_pad as f64,
        doppler_center_bin: center,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{PilotGrid, PreambleSpec};
    use std::f64::consts::TAU;

    fn cfg(n: usize, m: usize) -> SystemConfig {
        SystemConfig {
            n_subcarriers: n,
            n_cp: n / 8,
            n_symbols: m,
            pilots: PilotGrid { freq_comb: 1, time_comb: 1, seed: 3 },
            preamble: PreambleSpec { n_repeats: 2, seed: 4 },
            ..SystemConfig::default()
        }
    }

    fn ramp_quotient(n: usize, m: usize, gain: Complex64, r_bin: f64, d_bin: f64) -> FrameMatrix {
        let mut g = Array2::zeros((n, m));
        for sym in 0..m {
            for sc in 0..n {
                let ph = -TAU * sc as f64 * r_bin / n as f64 + TAU * sym as f64 * d_bin / m as f64;
                g[[sc, sym]] = gain * Complex64::from_polar(1.0, ph);
            }
        }
        g
    }

    fn brute_force(
        g: &FrameMatrix,
        w_r: &[f64],
        w_d: &[f64],
        range_pad: usize,
        doppler_pad: usize,
    ) -> Array2<f64> {
        let (n, m) = g.dim();
        let (n_pad, m_pad) = (n * range_pad, m * doppler_pad);
        let (sum_r, _) = window_moments(w_r);
        let (sum_d, _) = window_moments(w_d);
        let scale = (n * m) as f64 / (sum_r * sum_d).powi(2);
        let center = (m_pad / 2) as i64;
        let mut p = Array2::zeros((n_pad, m_pad));
        for l in 0..n_pad {
            for q in 0..m_pad {
                let p_tilde = q as i64 - center;
                let mut acc = Complex64::default();
                for sym in 0..m {
                    for sc in 0..n {
                        let ph = TAU * sc as f64 * l as f64 / n_pad as f64
                            - TAU * sym as f64 * p_tilde as f64 / m_pad as f64;
                        acc += g[[sc, sym]]
                            * w_r[sc]
                            * w_d[sym]
                            * Complex64::from_polar(1.0, ph);
                    }
                }
                p[[l, q]] = acc.norm_sqr() * scale;
            }
        }
        p
    }

    #[test]
    fn matches_brute_force_double_sum() {
        let cases = [
            (8usize, 4usize, 1usize, 1usize, WindowKind::Rect, WindowKind::Rect),
            (9, 5, 1, 1, WindowKind::Rect, WindowKind::Chebyshev { sidelobe_db: 60.0 }),
            (12, 6, 2, 1, WindowKind::Chebyshev { sidelobe_db: 80.0 }, WindowKind::Rect),
            (8, 6, 2, 2, WindowKind::Chebyshev { sidelobe_db: 100.0 }, WindowKind::Chebyshev { sidelobe_db: 70.0 }),
        ];
        for (idx, (n, m, pr, pd, wr, wd)) in cases.into_iter().enumerate() {
            let mut g: FrameMatrix = Array2::zeros((n, m));
            let mut state = 0x243f6a8885a308d3u64 ^ (idx as u64) << 32;
            let mut next = move || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            for v in g.iter_mut() {
                *v = Complex64::new(next(), next());
            }
            let spec = PeriodogramSpec {
                range_window: wr,
                doppler_window: wd,
                range_pad: pr,
                doppler_pad: pd,
            };
            let got = periodogram(&cfg(n, m), &g, &spec).unwrap();
            let want = brute_force(&g, &wr.coefficients(n), &wd.coefficients(m), pr, pd);
            let peak = want.iter().cloned().fold(0.0, f64::max);
            for (a, b) in got.p.iter().zip(want.iter()) {
                assert!((a - b).abs() <= 1e-9 * peak, "case {idx}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn on_grid_path_is_a_discrete_delta() {
        let (n, m) = (16, 8);
        let gain = Complex64::new(0.6, -0.3);
        let g = ramp_quotient(n, m, gain, 3.0, 2.0);
        let spec = PeriodogramSpec {
            range_window: WindowKind::Rect,
            doppler_window: WindowKind::Rect,
            range_pad: 1,
            doppler_pad: 1,
        };
        let out = periodogram(&cfg(n, m), &g, &spec).unwrap();
        let peak = gain.norm_sqr() * (n * m) as f64;
        let center = out.doppler_center_bin;
        for ((l, q), &v) in out.p.indexed_iter() {
            if l == 3 && q == center + 2 {
                assert!((v - peak).abs() < 1e-9 * peak);
            } else {
                assert!(v < 1e-18 * peak, "leak at ({l},{q}): {v:e}");
            }
        }
    }

    #[test]
    fn parseval_for_rect_no_pad() {
        let (n, m) = (16, 8);
        let mut g: FrameMatrix = Array2::zeros((n, m));
        let mut state = 7u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for v in g.iter_mut() {
            *v = Complex64::new(next(), next());
        }
        let spec = PeriodogramSpec {
            range_window: WindowKind::Rect,
            doppler_window: WindowKind::Rect,
            range_pad: 1,
            doppler_pad: 1,
        };
        let out = periodogram(&cfg(n, m), &g, &spec).unwrap();
        let total_p: f64 = out.p.iter().sum();
        let total_g: f64 = g.iter().map(|v| v.norm_sqr()).sum();
        assert!((total_p / total_g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quotient_power_scale_covariance() {
        let (n, m) = (12, 6);
        let g = ramp_quotient(n, m, Complex64::new(0.8, 0.1), 2.5, 1.25);
        let c = Complex64::new(1.7, -2.2);
        let scaled = g.mapv(|v| v * c);
        let spec = PeriodogramSpec::default();
        let a = periodogram(&cfg(n, m), &g, &spec).unwrap();
        let b = periodogram(&cfg(n, m), &scaled, &spec).unwrap();
        for (x, y) in a.p.iter().zip(b.p.iter()) {
            assert!((y - x * c.norm_sqr()).abs() < 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn conjugate_quotient_mirrors_both_axes() {
        let (n, m) = (10, 5);
        let mut g: FrameMatrix = Array2::zeros((n, m));
        let mut state = 99u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for v in g.iter_mut() {
            *v = Complex64::new(next(), next());
        }
        let conj = g.mapv(|v| v.conj());
        let spec = PeriodogramSpec {
            range_window: WindowKind::Rect,
            doppler_window: WindowKind::Rect,
            range_pad: 1,
            doppler_pad: 1,
        };
        let a = periodogram(&cfg(n, m), &g, &spec).unwrap();
        let b = periodogram(&cfg(n, m), &conj, &spec).unwrap();
        let center = a.doppler_center_bin as i64;
        let m_pad = a.n_doppler_bins() as i64;
        for ((l, q), &v) in a.p.indexed_iter() {
            let lm = (a.n_range_bins() - l) % a.n_range_bins();
            let p_tilde = q as i64 - center;
            let qm = (((-p_tilde + center) % m_pad + m_pad) % m_pad) as usize;
            assert!((b.p[[lm, qm]] - v).abs() < 1e-9 * (1.0 + v));
        }
    }

    #[test]
    fn physical_axes_match_bin_positions() {
        let c = cfg(16, 8);
        let spec = PeriodogramSpec {
            range_window: WindowKind::Rect,
            doppler_window: WindowKind::Rect,
            range_pad: 2,
            doppler_pad: 2,
        };
        let g = ramp_quotient(16, 8, Complex64::new(1.0, 0.0), 3.0, 2.0);
        let out = periodogram(&c, &g, &spec).unwrap();
        let (l, q, _) = out.argmax();
        assert_eq!(l, 6);
        assert_eq!(q, out.doppler_center_bin + 4);
        let (r, fd) = out.bin_to_physical(l as f64, q as f64);
        assert!((r - 3.0 * c.range_resolution_m()).abs() < 1e-9);
        assert!((fd - 2.0 * c.doppler_resolution_hz()).abs() < 1e-9);
    }

    #[test]
    fn full_pilot_comb_equals_genie_quotient() {
        let c = cfg(16, 8);
        let (grid, _) = crate::ofdm::generate_frame(&c, 21);
        let tx = crate::ofdm::modulate(&c, &grid).unwrap();
        let rx = crate::ofdm::demodulate(&c, &tx, c.preamble_samples()).unwrap();
        let spec = PeriodogramSpec::default();
        let g = channel_quotient(&rx, &grid).unwrap();
        let a = periodogram(&c, &g, &spec).unwrap();
        let b = pilot_periodogram(&c, &rx, &spec).unwrap();
        assert_eq!(a.p.dim(), b.p.dim());
        for (x, y) in a.p.iter().zip(b.p.iter()) {
            assert!((x - y).abs() < 1e-9 * (1.0 + x));
        }
    }

    #[test]
    fn quotient_guards_small_reference_cells() {
        let mut y: FrameMatrix = Array2::zeros((2, 2));
        let mut x: FrameMatrix = Array2::zeros((2, 2));
        y[[0, 0]] = Complex64::new(1.0, 1.0);
        x[[0, 0]] = Complex64::new(0.5, 0.0);
        y[[1, 1]] = Complex64::new(3.0, 0.0);
        let g = channel_quotient(&y, &x).unwrap();
        assert_eq!(g[[0, 0]], Complex64::new(2.0, 2.0));
        assert_eq!(g[[1, 1]], Complex64::default());
    }

    #[test]
    fn cpe_compensation_restores_column_phases() {
        let (n, m) = (8, 5);
        let base = ramp_quotient(n, m, Complex64::new(1.0, 0.0), 0.0, 0.0);
        let mut g = base.clone();
        let phases = [0.3, -1.2, 2.9, 0.01, -0.7];
        for sym in 0..m {
            let rot = Complex64::from_polar(1.0, phases[sym]);
            for sc in 0..n {
                g[[sc, sym]] *= rot;
            }
        }
        cpe_compensate(&mut g);
        for (a, b) in g.iter().zip(base.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
