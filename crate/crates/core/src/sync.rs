//! Receiver synchronization.
//!
//! A sliding correlation against the known opening waveform over the whole
//! buffer locates the frame coarsely. The frame opens with repeated
//! identical symbols, so a lag-one-symbol autocorrelation across the located
//! copies reads the carrier frequency offset directly from its phase, with
//! an ambiguity of half the symbol rate. Re-correlating the deramped stream
//! near the coarse position pins the start to a sample. Clock skew between
//! transmitter and receiver shows up as a linear drift of the pilot-measured
//! delay over the frame; a robust line fit yields the skew, which a
//! band-limited resample removes. Peaks of the pilot delay and frequency
//! spectra then give the sub-sample timing and residual frequency
//! corrections.

use crate::channel::delay_circular;
use crate::config::SystemConfig;
use crate::dsp::{fft_forward, fft_inverse, next_pow2};
use crate::error::{Error, Result};
use crate::frame::{FrameMatrix, IqSequence};
use crate::impairments::resample_clock;
use crate::ofdm::{demodulate, preamble_waveform};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Search spans and robustness knobs of the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyncConfig {
    /// Half-width of the sample-level refinement search around the coarse
    /// lock, in samples; also the guard trimmed from each end of the
    /// frequency-acquisition span to tolerate coarse timing error.
    pub search_window: usize,
    /// Symbols aggregated into one point of the delay-drift series.
    pub group_symbols: usize,
    /// Outlier threshold for the drift fit, in robust standard deviations.
    pub trim_nsigma: f64,
    /// Maximum trim-and-refit rounds.
    pub max_trim_iters: usize,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig {
            search_window: 64,
            group_symbols: 32,
            trim_nsigma: 3.0,
            max_trim_iters: 4,
        }
    }
}

impl SyncConfig {
    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        if cfg.preamble.n_repeats < 2 {
            return Err(Error::config(
                "frequency acquisition needs at least two repeated opening symbols",
            ));
        }
        if 2 * self.search_window >= cfg.symbol_samples() {
            return Err(Error::config(
                "timing search window must be under half a symbol",
            ));
        }
        if self.group_symbols == 0 || self.group_symbols < cfg.pilots.time_comb {
            return Err(Error::config(
                "delay series groups must contain at least one pilot symbol",
            ));
        }
        if self.trim_nsigma <= 0.0 {
            return Err(Error::config("trim threshold must be positive"));
        }
        Ok(())
    }
}

/// Pilot-measured group delays over the frame.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DelaySeries {
    /// Mean pilot-symbol start time of each group, from buffer start.
    pub times_s: Vec<f64>,
    /// Apparent delay of each group.
    pub delays_s: Vec<f64>,
}

impl DelaySeries {
    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }
}

/// Robust straight-line fit summary.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub used: usize,
    pub trimmed: usize,
}

/// Estimates produced by one pipeline run.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct SyncReport {
    /// Frame start from the whole-buffer sliding correlation.
    pub coarse_sto_samples: i64,
    /// Frequency offset read from the opening-symbol autocorrelation.
    pub coarse_cfo_hz: f64,
    /// Sample timing offset after the windowed refinement.
    pub sto_samples: i64,
    /// Normalized magnitude of the timing correlation peak.
    pub sto_correlation: f64,
    /// Fractional sample-clock skew from the delay-drift fit.
    pub sfo_estimate: f64,
    /// Delay-drift fit intercept at buffer start.
    pub delay_intercept_s: f64,
    /// Points kept and discarded by the drift fit.
    pub drift_points_used: usize,
    pub drift_points_trimmed: usize,
    /// Sub-sample delay measured after skew removal.
    pub residual_delay_s: f64,
    /// Frequency left after the coarse correction.
    pub residual_cfo_hz: f64,
    /// Sum of coarse and residual frequency estimates.
    pub total_cfo_hz: f64,
}

/// Fully corrected frame plus the estimates that produced it.
#[derive(Clone, Debug)]
pub struct SyncOutcome {
    /// Demodulated frame with timing, skew, and frequency corrections
    /// applied; the reference return sits at delay zero, Doppler zero.
    pub frame: FrameMatrix,
    /// Time-aligned, skew-corrected, coarse-deramped sample stream. The
    /// residual corrections in the report are applied to `frame` only.
    pub samples: IqSequence,
    pub report: SyncReport,
}

/// Frame start from the magnitude peak of the circular sliding correlation
/// between the buffer and the known opening waveform, with the normalized
/// correlation magnitude at the winner. Reliable for any start position in
/// the buffer; a residual carrier offset only shaves the peak slightly as
/// long as it stays well under the reciprocal waveform duration.
pub fn locate_preamble(cfg: &SystemConfig, y: &[Complex64]) -> Result<(i64, f64)> {
    let template = preamble_waveform(cfg);
    let t_len = template.len();
    let len = y.len();
    if len < t_len {
        return Err(Error::dimension("buffer shorter than the opening waveform"));
    }
    let mut fy: Vec<Complex64> = y.to_vec();
    let mut ft = vec![Complex64::default(); len];
    ft[..t_len].copy_from_slice(&template);
    fft_forward(&mut fy);
    fft_forward(&mut ft);
    for (a, b) in fy.iter_mut().zip(ft.iter()) {
        *a *= b.conj();
    }
    fft_inverse(&mut fy);
    let e_t: f64 = template.iter().map(|v| v.norm_sqr()).sum();
    let mut e_y: f64 = y[..t_len].iter().map(|v| v.norm_sqr()).sum();
    let mut best = (0usize, 0.0f64, 0.0f64);
    for (d, c) in fy.iter().enumerate() {
        let mag = c.norm();
        if mag > best.1 {
            let rho = if e_y > 0.0 { mag / (e_t * e_y).sqrt() } else { 0.0 };
            best = (d, mag, rho);
        }
        e_y += y[(d + t_len) % len].norm_sqr() - y[d].norm_sqr();
    }
    if best.1 == 0.0 {
        return Err(Error::numeric("timing correlation vanished"));
    }
    let start = if best.0 > len / 2 { best.0 as i64 - len as i64 } else { best.0 as i64 };
    Ok((start, best.2))
}

/// Carrier offset from the phase of the repeat autocorrelation across the
/// opening symbols located at `start`, tolerant to coarse timing errors up
/// to the search window.
pub fn coarse_cfo_hz(
    cfg: &SystemConfig,
    sync: &SyncConfig,
    y: &[Complex64],
    start: i64,
) -> Result<f64> {
    sync.validate(cfg)?;
    let l = cfg.symbol_samples();
    let lo = sync.search_window;
    let hi = l - sync.search_window;
    if y.len() < 2 * l {
        return Err(Error::dimension("buffer shorter than the opening symbols"));
    }
    let len = y.len() as i64;
    let mut acc = Complex64::default();
    for s in lo..hi {
        let a = (start + s as i64).rem_euclid(len) as usize;
        let b = (start + (s + l) as i64).rem_euclid(len) as usize;
        acc += y[b] * y[a].conj();
    }
    if acc.norm() == 0.0 {
        return Err(Error::numeric("repeat autocorrelation vanished"));
    }
    Ok(acc.arg() / (TAU * l as f64 * cfg.sample_period_s()))
}

/// Remove a frequency ramp referenced to the buffer start.
pub fn deramp(y: &[Complex64], freq_hz: f64, sample_period_s: f64) -> IqSequence {
    y.iter()
        .enumerate()
        .map(|(s, &v)| v * Complex64::from_polar(1.0, -TAU * freq_hz * s as f64 * sample_period_s))
        .collect()
}

/// Integer sample offset of the frame start by template correlation over a
/// window around `center`, with the normalized correlation magnitude at the
/// winner.
pub fn sample_timing(
    cfg: &SystemConfig,
    sync: &SyncConfig,
    y: &[Complex64],
    center: i64,
) -> Result<(i64, f64)> {
    sync.validate(cfg)?;
    let template = preamble_waveform(cfg);
    if y.len() < template.len() {
        return Err(Error::dimension("buffer shorter than the opening waveform"));
    }
    let e_t: f64 = template.iter().map(|v| v.norm_sqr()).sum();
    let len = y.len() as i64;
    let w = sync.search_window as i64;
    let mut best = (0i64, Complex64::default(), 0.0f64);
    for d in center - w..=center + w {
        let mut corr = Complex64::default();
        let mut e_y = 0.0;
        for (s, t) in template.iter().enumerate() {
            let idx = (s as i64 + d).rem_euclid(len) as usize;
            corr += y[idx] * t.conj();
            e_y += y[idx].norm_sqr();
        }
        let rho = if e_y > 0.0 { corr.norm() / (e_t * e_y).sqrt() } else { 0.0 };
        if corr.norm() > best.1.norm() {
            best = (d, corr, rho);
        }
    }
    if best.1.norm() == 0.0 {
        return Err(Error::numeric("timing correlation vanished"));
    }
    Ok((best.0, best.2))
}

/// Unit-modulus pilot reference value at a pilot cell.
fn pilot_ref(cfg: &SystemConfig, sc: usize, sym: usize) -> Complex64 {
    cfg.pilots.value(sc, sym)
}

/// Zero-pad factor of the pilot delay and frequency spectra. The padded
/// grid keeps the parabolic peak refinement well inside its small-offset
/// regime.
const PILOT_SPECTRUM_PAD: usize = 32;

/// Subcarriers this close to either band edge are skipped by the pilot
/// estimators: at critical sampling the edge subcarriers sit against the
/// Nyquist boundary, where resampling aliases part of their energy.
fn edge_guard(n_subcarriers: usize) -> usize {
    (n_subcarriers / 64).max(2)
}

/// Pilot subcarriers away from the band edges, in comb order.
fn guarded_pilot_subcarriers(cfg: &SystemConfig) -> Vec<usize> {
    let guard = edge_guard(cfg.n_subcarriers);
    cfg.pilots
        .pilot_subcarriers(cfg.n_subcarriers)
        .into_iter()
        .filter(|&sc| sc >= guard && sc < cfg.n_subcarriers - guard)
        .collect()
}

/// Signed fractional position of the spectrum peak, from a circular
/// three-point parabola on the log-power values.
fn spectral_peak_bins(spec: &[f64]) -> f64 {
    let n = spec.len();
    let mut i0 = 0;
    let mut pk = f64::MIN;
    for (i, &v) in spec.iter().enumerate() {
        if v > pk {
            pk = v;
            i0 = i;
        }
    }
    let db = |p: f64| 10.0 * p.max(f64::MIN_POSITIVE).log10();
    let ym = db(spec[(i0 + n - 1) % n]);
    let y0 = db(spec[i0]);
    let yp = db(spec[(i0 + 1) % n]);
    let denom = ym - 2.0 * y0 + yp;
    let delta = if denom < 0.0 && denom.is_finite() {
        ((ym - yp) / (2.0 * denom)).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let mut pos = i0 as f64 + delta;
    if pos > n as f64 / 2.0 {
        pos -= n as f64;
    }
    pos
}

/// Apparent delay of a set of symbols, from the peak of the delay spectrum
/// of the pilot comb (incoherently averaged over the symbols). Unambiguous
/// for delays below the reciprocal pilot spacing, half of it either side.
fn pilot_delay_s(cfg: &SystemConfig, frame: &FrameMatrix, symbols: &[usize]) -> Result<f64> {
    let subs = guarded_pilot_subcarriers(cfg);
    if subs.len() < 2 || symbols.is_empty() {
        return Err(Error::dimension("pilot comb too sparse in frequency"));
    }
    let nfft = next_pow2(subs.len() * PILOT_SPECTRUM_PAD);
    let mut spec = vec![0.0f64; nfft];
    let mut buf = vec![Complex64::default(); nfft];
    for &sym in symbols {
        buf.fill(Complex64::default());
        for (i, &sc) in subs.iter().enumerate() {
            buf[i] = frame[[sc, sym]] * pilot_ref(cfg, sc, sym).conj();
        }
        fft_inverse(&mut buf);
        for (s, b) in spec.iter_mut().zip(buf.iter()) {
            *s += b.norm_sqr();
        }
    }
    if spec.iter().sum::<f64>() == 0.0 {
        return Err(Error::numeric("pilot delay spectrum vanished"));
    }
    let spacing_hz = cfg.pilots.freq_comb as f64 * cfg.subcarrier_spacing_hz;
    Ok(spectral_peak_bins(&spec) / (nfft as f64 * spacing_hz))
}

/// Residual frequency from the peak of the pilot frequency spectrum,
/// incoherently averaged over pilot subcarriers. Unambiguous below half
/// the pilot symbol rate.
fn pilot_cfo_hz(cfg: &SystemConfig, frame: &FrameMatrix) -> Result<f64> {
    let subs = guarded_pilot_subcarriers(cfg);
    let syms = cfg.pilots.pilot_symbols(cfg.n_symbols);
    if syms.len() < 2 {
        return Err(Error::dimension("pilot comb too sparse in time"));
    }
    let nfft = next_pow2(syms.len() * PILOT_SPECTRUM_PAD);
    let mut spec = vec![0.0f64; nfft];
    let mut buf = vec![Complex64::default(); nfft];
    for &sc in &subs {
        buf.fill(Complex64::default());
        for (j, &sym) in syms.iter().enumerate() {
            buf[j] = frame[[sc, sym]] * pilot_ref(cfg, sc, sym).conj();
        }
        fft_forward(&mut buf);
        for (s, b) in spec.iter_mut().zip(buf.iter()) {
            *s += b.norm_sqr();
        }
    }
    if spec.iter().sum::<f64>() == 0.0 {
        return Err(Error::numeric("pilot frequency spectrum vanished"));
    }
    let spacing_s = cfg.pilots.time_comb as f64 * cfg.symbol_duration_s();
    Ok(spectral_peak_bins(&spec) / (nfft as f64 * spacing_s))
}

/// Group-wise apparent delay over the frame, for the skew fit.
pub fn estimate_delay_series(
    cfg: &SystemConfig,
    sync: &SyncConfig,
    frame: &FrameMatrix,
) -> Result<DelaySeries> {
    sync.validate(cfg)?;
    let syms = cfg.pilots.pilot_symbols(cfg.n_symbols);
    let ts = cfg.sample_period_s();
    let t_sym = cfg.symbol_duration_s();
    let t0 = cfg.preamble_samples() as f64 * ts;
    let groups = cfg.n_symbols / sync.group_symbols;
    let mut series = DelaySeries::default();
    for g in 0..groups {
        let m_lo = g * sync.group_symbols;
        let m_hi = m_lo + sync.group_symbols;
        let members: Vec<usize> = syms
            .iter()
            .cloned()
            .filter(|&m| m >= m_lo && m < m_hi)
            .collect();
        if members.is_empty() {
            continue;
        }
        let tau = pilot_delay_s(cfg, frame, &members)?;
        let mean_m = members.iter().sum::<usize>() as f64 / members.len() as f64;
        series.times_s.push(t0 + mean_m * t_sym);
        series.delays_s.push(tau);
    }
    if series.is_empty() {
        return Err(Error::dimension("no pilot symbols fall inside any group"));
    }
    Ok(series)
}

/// Least-squares line fit with iterative outlier rejection: residual spread
/// is estimated by the scaled median absolute deviation and points beyond
/// `nsigma` spreads are dropped until the active set stabilizes.
pub fn robust_line_fit(
    times: &[f64],
    values: &[f64],
    nsigma: f64,
    max_iters: usize,
) -> Result<LineFit> {
    if times.len() != values.len() {
        return Err(Error::dimension("series axes differ in length"));
    }
    let n = times.len();
    if n < 2 {
        return Err(Error::dimension("line fit needs at least two points"));
    }
    let mut active = vec![true; n];

    let fit = |active: &[bool]| -> Option<(f64, f64)> {
        let m = active.iter().filter(|&&a| a).count();
        if m < 2 {
            return None;
        }
        let (mut st, mut sv) = (0.0, 0.0);
        for i in 0..n {
            if active[i] {
                st += times[i];
                sv += values[i];
            }
        }
        let (tm, vm) = (st / m as f64, sv / m as f64);
        let (mut stt, mut stv) = (0.0, 0.0);
        for i in 0..n {
            if active[i] {
                stt += (times[i] - tm) * (times[i] - tm);
                stv += (times[i] - tm) * (values[i] - vm);
            }
        }
        if stt == 0.0 {
            return None;
        }
        let slope = stv / stt;
        Some((vm - slope * tm, slope))
    };

    let (mut intercept, mut slope) =
        fit(&active).ok_or_else(|| Error::numeric("degenerate drift series"))?;
    for _ in 0..max_iters {
        let mut abs_res: Vec<f64> = (0..n)
            .filter(|&i| active[i])
            .map(|i| (values[i] - intercept - slope * times[i]).abs())
            .collect();
        let mid = {
            abs_res.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let k = abs_res.len();
            if k % 2 == 1 {
                abs_res[k / 2]
            } else {
                0.5 * (abs_res[k / 2 - 1] + abs_res[k / 2])
            }
        };
        let sigma = 1.4826 * mid;
        if sigma == 0.0 {
            break;
        }
        let mut changed = false;
        for i in 0..n {
            if active[i]
                && (values[i] - intercept - slope * times[i]).abs() > nsigma * sigma
            {
                active[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        match fit(&active) {
            Some((b, a)) => {
                intercept = b;
                slope = a;
            }
            None => break,
        }
    }
    let used = active.iter().filter(|&&a| a).count();
    Ok(LineFit {
        intercept,
        slope,
        used,
        trimmed: n - used,
    })
}

/// Remove a known delay ramp across subcarriers and frequency ramp across
/// symbols from a demodulated frame.
pub fn compensate_frame(cfg: &SystemConfig, frame: &mut FrameMatrix, delay_s: f64, cfo_hz: f64) {
    let (n, m) = frame.dim();
    let df = cfg.subcarrier_spacing_hz;
    let t_sym = cfg.symbol_duration_s();
    for sym in 0..m {
        let rot_t = Complex64::from_polar(1.0, -TAU * cfo_hz * sym as f64 * t_sym);
        for sc in 0..n {
            let rot_f = Complex64::from_polar(1.0, TAU * sc as f64 * df * delay_s);
            frame[[sc, sym]] *= rot_f * rot_t;
        }
    }
}

/// Full acquisition and correction chain on one received buffer.
pub fn run_pipeline(cfg: &SystemConfig, sync: &SyncConfig, y: &IqSequence) -> Result<SyncOutcome> {
    sync.validate(cfg)?;
    if y.len() != cfg.frame_samples() {
        return Err(Error::dimension(format!(
            "buffer holds {} samples, expected {}",
            y.len(),
            cfg.frame_samples()
        )));
    }
    let ts = cfg.sample_period_s();
    let fs = cfg.sample_rate_hz();

    let (coarse_sto, _) = locate_preamble(cfg, y)?;
    let coarse = coarse_cfo_hz(cfg, sync, y, coarse_sto)?;
    let y1 = deramp(y, coarse, ts);
    let (sto, rho) = sample_timing(cfg, sync, &y1, coarse_sto)?;
    let y2 = delay_circular(&y1, -(sto as f64) * ts, fs);

    let frame2 = demodulate(cfg, &y2, cfg.preamble_samples())?;
    let series = estimate_delay_series(cfg, sync, &frame2)?;
    let drift = if series.len() >= 2 {
        robust_line_fit(&series.times_s, &series.delays_s, sync.trim_nsigma, sync.max_trim_iters)?
    } else {
        LineFit { intercept: series.delays_s[0], slope: 0.0, used: 1, trimmed: 0 }
    };

    let y3 = if drift.slope == 0.0 {
        y2
    } else {
        resample_clock(&y2, -drift.slope, None, fs)?
    };
    let mut frame3 = demodulate(cfg, &y3, cfg.preamble_samples())?;
    let residual_delay = pilot_delay_s(cfg, &frame3, &cfg.pilots.pilot_symbols(cfg.n_symbols))?;
    let residual_cfo = pilot_cfo_hz(cfg, &frame3)?;
    compensate_frame(cfg, &mut frame3, residual_delay, residual_cfo);

    Ok(SyncOutcome {
        frame: frame3,
        samples: y3,
        report: SyncReport {
            coarse_sto_samples: coarse_sto,
            coarse_cfo_hz: coarse,
            sto_samples: sto,
            sto_correlation: rho,
            sfo_estimate: drift.slope,
            delay_intercept_s: drift.intercept,
            drift_points_used: drift.used,
            drift_points_trimmed: drift.trimmed,
            residual_delay_s: residual_delay,
            residual_cfo_hz: residual_cfo,
            total_cfo_hz: coarse + residual_cfo,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{add_awgn, apply_sync_offsets, SyncOffsets};
    use crate::config::{PilotGrid, PreambleSpec};
    use crate::ofdm::{generate_frame, modulate};
    use crate::radar::{channel_quotient, find_peaks, periodogram, DetectionSpec, PeriodogramSpec, WindowKind};

    fn small_cfg() -> SystemConfig {
        SystemConfig {
            n_subcarriers: 256,
            n_cp: 32,
            n_symbols: 64,
            pilots: PilotGrid { freq_comb: 4, time_comb: 4, seed: 0x70696c6f },
            preamble: PreambleSpec { n_repeats: 2, seed: 0x70726521 },
            ..SystemConfig::default()
        }
    }

    fn sync_cfg() -> SyncConfig {
        SyncConfig { search_window: 48, group_symbols: 16, ..SyncConfig::default() }
    }

    #[test]
    fn robust_fit_recovers_an_exact_line() {
        let t: Vec<f64> = (0..40).map(|i| 1e-3 * i as f64).collect();
        let v: Vec<f64> = t.iter().map(|&x| 3.2e-6 * x - 4.7e-9).collect();
        let fit = robust_line_fit(&t, &v, 3.0, 4).unwrap();
        assert!((fit.slope - 3.2e-6).abs() < 1e-15);
        assert!((fit.intercept + 4.7e-9).abs() < 1e-18);
        assert_eq!(fit.trimmed, 0);
    }

    #[test]
    fn robust_fit_discards_a_tenth_of_gross_outliers() {
        let t: Vec<f64> = (0..40).map(|i| 1e-3 * i as f64).collect();
        let mut v: Vec<f64> = t.iter().map(|&x| -2.5e-6 * x + 8.0e-10).collect();
        for &i in &[3usize, 17, 28, 35] {
            v[i] += 5e-9 * if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        let fit = robust_line_fit(&t, &v, 3.0, 4).unwrap();
        assert_eq!(fit.trimmed, 4);
        assert!((fit.slope + 2.5e-6).abs() < 1e-9, "slope {}", fit.slope);
        assert!((fit.intercept - 8.0e-10).abs() < 1e-12);
    }

    #[test]
    fn coarse_estimate_reads_a_pure_frequency_offset() {
        let cfg = small_cfg();
        let (grid, _) = generate_frame(&cfg, 11);
        let tx = modulate(&cfg, &grid).unwrap();
        let off = SyncOffsets { sto_s: 0.0, cfo_hz: 1700.0, sfo_frac: 0.0 };
        let rx = apply_sync_offsets(&tx, &off, cfg.sample_rate_hz());
        let est = coarse_cfo_hz(&cfg, &sync_cfg(), &rx, 0).unwrap();
        assert!((est - 1700.0).abs() < 1e-3, "estimate {est}");
    }

    #[test]
    fn locate_finds_a_long_shift_in_heavy_noise() {
        let cfg = small_cfg();
        let (grid, _) = generate_frame(&cfg, 15);
        let tx = modulate(&cfg, &grid).unwrap();
        let ts = cfg.sample_period_s();
        let off = SyncOffsets { sto_s: 1000.0 * ts, cfo_hz: 0.0, sfo_frac: 0.0 };
        let mut rx = apply_sync_offsets(&tx, &off, cfg.sample_rate_hz());
        add_awgn(&mut rx, 1.0, 77, 0);
        let (start, _) = locate_preamble(&cfg, &rx).unwrap();
        assert!((start - 1000).abs() <= 2, "start {start}");
    }

    #[test]
    fn timing_search_finds_an_integer_shift_under_frequency_offset() {
        let cfg = small_cfg();
        let (grid, _) = generate_frame(&cfg, 12);
        let tx = modulate(&cfg, &grid).unwrap();
        let ts = cfg.sample_period_s();
        let off = SyncOffsets { sto_s: 17.0 * ts, cfo_hz: -2300.0, sfo_frac: 0.0 };
        let rx = apply_sync_offsets(&tx, &off, cfg.sample_rate_hz());
        let sync = sync_cfg();
        let (start, _) = locate_preamble(&cfg, &rx).unwrap();
        assert_eq!(start, 17);
        let coarse = coarse_cfo_hz(&cfg, &sync, &rx, start).unwrap();
        let y1 = deramp(&rx, coarse, ts);
        let (d, rho) = sample_timing(&cfg, &sync, &y1, start).unwrap();
        assert_eq!(d, 17);
        assert!(rho > 0.99, "correlation {rho}");
    }

    #[test]
    fn delay_series_tracks_clock_skew() {
        let cfg = small_cfg();
        let (grid, _) = generate_frame(&cfg, 13);
        let tx = modulate(&cfg, &grid).unwrap();
        let skew = 5e-6;
        let rx = resample_clock(&tx, skew, None, cfg.sample_rate_hz()).unwrap();
        let frame = demodulate(&cfg, &rx, cfg.preamble_samples()).unwrap();
        let sync = sync_cfg();
        let series = estimate_delay_series(&cfg, &sync, &frame).unwrap();
        assert_eq!(series.len(), cfg.n_symbols / sync.group_symbols);
        let fit = robust_line_fit(&series.times_s, &series.delays_s, 3.0, 4).unwrap();
        assert!(
            (fit.slope - skew).abs() < 0.01 * skew,
            "slope {} vs skew {skew}",
            fit.slope
        );
    }

    #[test]
    fn compensation_removes_known_ramps_exactly() {
        let cfg = small_cfg();
        let (n, m) = (8usize, 6usize);
        let mut frame: FrameMatrix = ndarray::Array2::zeros((n, m));
        let tau = 3.1e-9;
        let f = 210.0;
        for sym in 0..m {
            for sc in 0..n {
                let ph = -TAU * sc as f64 * cfg.subcarrier_spacing_hz * tau
                    + TAU * f * sym as f64 * cfg.symbol_duration_s();
                frame[[sc, sym]] = Complex64::from_polar(1.0, ph);
            }
        }
        compensate_frame(&cfg, &mut frame, tau, f);
        for v in frame.iter() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn pipeline_locks_the_frame_to_the_origin() {
        let cfg = small_cfg();
        let (grid, _) = generate_frame(&cfg, 14);
        let tx = modulate(&cfg, &grid).unwrap();
        let ts = cfg.sample_period_s();
        let fs = cfg.sample_rate_hz();
        let off = SyncOffsets { sto_s: 23.4 * ts, cfo_hz: 9000.0, sfo_frac: 3e-6 };
        let shifted = apply_sync_offsets(&tx, &off, fs);
        let rx = resample_clock(&shifted, off.sfo_frac, None, fs).unwrap();

        let sync = sync_cfg();
        let out = run_pipeline(&cfg, &sync, &rx).unwrap();
        assert_eq!(out.report.coarse_sto_samples, 23);
        assert_eq!(out.report.sto_samples, 23);
        assert!(
            (out.report.total_cfo_hz - 9000.0).abs() < 0.05 * cfg.doppler_resolution_hz(),
            "cfo {}",
            out.report.total_cfo_hz
        );
        let drift_samples =
            (out.report.sfo_estimate - 3e-6).abs() * cfg.frame_samples() as f64;
        assert!(
            drift_samples < 0.01,
            "residual skew leaves {drift_samples} samples of drift over the frame"
        );
        let combined_delay =
            out.report.sto_samples as f64 * ts + out.report.residual_delay_s;
        assert!(
            (combined_delay - 23.4 * ts).abs() < 0.05 * ts,
            "delay {} vs {}",
            combined_delay,
            23.4 * ts
        );

        let g = channel_quotient(&out.frame, &grid).unwrap();
        let spec = PeriodogramSpec {
            range_window: WindowKind::Chebyshev { sidelobe_db: 100.0 },
            doppler_window: WindowKind::Chebyshev { sidelobe_db: 100.0 },
            range_pad: 4,
            doppler_pad: 4,
        };
        let pg = periodogram(&cfg, &g, &spec).unwrap();
        let det = DetectionSpec { max_peaks: 1, min_sinr_db: 30.0, ..DetectionSpec::default() };
        let peaks = find_peaks(&pg, &det).unwrap();
        assert_eq!(peaks.len(), 1);
        let range_bins = peaks[0].range_bin / spec.range_pad as f64;
        let wrapped_range = if range_bins > cfg.n_subcarriers as f64 / 2.0 {
            range_bins - cfg.n_subcarriers as f64
        } else {
            range_bins
        };
        let doppler_bins =
            (peaks[0].doppler_bin - pg.doppler_center_bin as f64) / spec.doppler_pad as f64;
        assert!(wrapped_range.abs() < 0.05, "range offset {wrapped_range} bins");
        assert!(doppler_bins.abs() < 0.05, "doppler offset {doppler_bins} bins");
    }

    #[test]
    fn report_serializes_to_json_and_back() {
        let report = SyncReport {
            coarse_sto_samples: -7,
            coarse_cfo_hz: 123.4,
            sto_samples: -7,
            sto_correlation: 0.98,
            sfo_estimate: 2.5e-6,
            delay_intercept_s: 1e-10,
            drift_points_used: 33,
            drift_points_trimmed: 2,
            residual_delay_s: -4e-11,
            residual_cfo_hz: 0.7,
            total_cfo_hz: 124.1,
        };
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: SyncReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.sto_samples, -7);
        assert!((back.total_cfo_hz - 124.1).abs() < 1e-12);
        assert_eq!(back.drift_points_used, 33);
    }
}
