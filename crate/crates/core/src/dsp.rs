//! Shared signal-processing primitives: FFT wrappers, Dolph-Chebyshev window
//! synthesis, and exact band-limited resampling on a stretched sample grid.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::f64::consts::PI;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward FFT, unnormalized.
pub fn fft_forward(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
}

/// In-place inverse FFT, scaled by 1/n so that `fft_inverse(fft_forward(x)) == x`.
pub fn fft_inverse(buf: &mut [Complex64]) {
    let n = buf.len();
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n).process(buf));
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Physical frequency of each FFT bin for an n-point transform at sample rate
/// `fs_hz`, in fftfreq order (DC first, negative frequencies in the upper half).
pub fn fft_bin_freqs(n: usize, fs_hz: f64) -> Vec<f64> {
    let half = (n as i64 + 1) / 2;
    (0..n as i64)
        .map(|k| {
            let f = if k < half { k } else { k - n as i64 };
            f as f64 * fs_hz / n as f64
        })
        .collect()
}

pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Welch PSD estimate of a real series: Hann-windowed segments of `seg_len`
/// samples with 50% overlap. Returns (bin frequencies, one-sided density in
/// power per Hz), so the density integrates to the series variance.
pub fn welch_psd(x: &[f64], fs_hz: f64, seg_len: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(seg_len >= 4 && seg_len % 2 == 0, "segment length must be even and at least 4");
    assert!(x.len() >= seg_len, "series shorter than one segment");
    let window: Vec<f64> = (0..seg_len)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / seg_len as f64).cos()))
        .collect();
    let win_power: f64 = window.iter().map(|w| w * w).sum();
    let hop = seg_len / 2;
    let n_segs = (x.len() - seg_len) / hop + 1;
    let half = seg_len / 2;
    let mut acc = vec![0.0; half + 1];
    let mut buf = vec![Complex64::default(); seg_len];
    for s in 0..n_segs {
        let seg = &x[s * hop..s * hop + seg_len];
        for i in 0..seg_len {
            buf[i] = Complex64::new(seg[i] * window[i], 0.0);
        }
        fft_forward(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += buf[k].norm_sqr();
        }
    }
    let scale = 1.0 / (fs_hz * win_power * n_segs as f64);
    let pxx: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || k == half { 1.0 } else { 2.0 };
            a * scale * one_sided
        })
        .collect();
    let freqs = (0..=half).map(|k| k as f64 * fs_hz / seg_len as f64).collect();
    (freqs, pxx)
}

// ─── Dolph-Chebyshev window ──────────────────────────────────────────────────

/// Chebyshev polynomial T_{order}(x) extended to |x| > 1 via cosh.
fn cheb_poly(order: f64, x: f64) -> f64 {
    if x > 1.0 {
        (order * x.acosh()).cosh()
    } else if x < -1.0 {
        let sign = if (order as i64) % 2 == 0 { 1.0 } else { -1.0 };
        sign * (order * (-x).acosh()).cosh()
    } else {
        (order * x.acos()).cos()
    }
}

/// Dolph-Chebyshev window with equiripple sidelobes `attenuation_db` below the
/// main lobe, normalized to a peak of 1. Matches the usual scipy/MATLAB
/// frequency-sampling construction for both parities.
pub fn chebwin(len: usize, attenuation_db: f64) -> Vec<f64> {
    assert!(len >= 2, "window length must be at least 2");
    let order = (len - 1) as f64;
    let ratio = 10f64.powf(attenuation_db.abs() / 20.0);
    let beta = ((1.0 / order) * ratio.acosh()).cosh();

    let mut p: Vec<Complex64> = (0..len)
        .map(|k| {
            let x = beta * (PI * k as f64 / len as f64).cos();
            Complex64::new(cheb_poly(order, x), 0.0)
        })
        .collect();

    let m = len;
    let w: Vec<f64> = if m % 2 == 1 {
        fft_forward(&mut p);
        let n = (m + 1) / 2;
        let head: Vec<f64> = p[..n].iter().map(|c| c.re).collect();
        let mut out: Vec<f64> = head[1..n].iter().rev().copied().collect();
        out.extend_from_slice(&head);
        out
    } else {
        for (k, v) in p.iter_mut().enumerate() {
            let ph = PI * k as f64 / m as f64;
            *v *= Complex64::new(ph.cos(), ph.sin());
        }
        fft_forward(&mut p);
        let n = m / 2 + 1;
        let head: Vec<f64> = p[..n].iter().map(|c| c.re).collect();
        let mut out: Vec<f64> = head[1..n].iter().rev().copied().collect();
        out.extend_from_slice(&head[1..n]);
        out
    };

    let peak = w.iter().cloned().fold(f64::MIN, f64::max);
    w.iter().map(|v| v / peak).collect()
}

// ─── Band-limited evaluation on a stretched grid ─────────────────────────────

/// Evaluates the band-limited periodic interpolant of an n-point spectrum at
/// the stretched sample positions p_s = s * alpha, s = 0..n-1 (positions in
/// units of the original sample spacing).
///
/// The kernel is a Bluestein chirp-z evaluation; alpha = 1 reduces to a plain
/// inverse FFT. Reusable across several spectra of the same length (the
/// chirp convolution kernel is precomputed once).
pub struct StretchEval {
    len: usize,
    alpha: f64,
    nfft: usize,
    kernel_fft: Vec<Complex64>,
}

/// Phase pi * alpha * m^2 / len, wrapped implicitly by sin/cos.
fn quad_phase(alpha: f64, m: f64, len: f64) -> f64 {
    PI * (alpha * (m * m) / len)
}

impl StretchEval {
    pub fn new(len: usize, alpha: f64) -> StretchEval {
        assert!(len >= 2);
        let nfft = next_pow2(2 * len - 1);
        let mut kernel = vec![Complex64::new(0.0, 0.0); nfft];
        let lf = len as f64;
        for m in 0..len {
            let ph = -quad_phase(alpha, m as f64, lf);
            let v = Complex64::new(ph.cos(), ph.sin());
            kernel[m] = v;
            if m > 0 {
                kernel[nfft - m] = v;
            }
        }
        fft_forward(&mut kernel);
        StretchEval { len, alpha, nfft, kernel_fft: kernel }
    }

    /// `spectrum` is the unnormalized forward FFT of the time samples, in
    /// natural (unshifted) bin order. Returns the len interpolated samples.
    pub fn eval_spectrum(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(spectrum.len(), self.len, "spectrum length mismatch");
        let l = self.len;
        let lf = l as f64;
        let h = l / 2;

        // Reorder so bin j carries frequency j - h, then absorb the chirp.
        let mut a = vec![Complex64::new(0.0, 0.0); self.nfft];
        for j in 0..l {
            let src = (j + l - h) % l;
            let ph = quad_phase(self.alpha, j as f64, lf);
            a[j] = spectrum[src] * Complex64::new(ph.cos(), ph.sin());
        }
        fft_forward(&mut a);
        for (v, k) in a.iter_mut().zip(self.kernel_fft.iter()) {
            *v *= k;
        }
        fft_inverse(&mut a);

        let scale = 1.0 / lf;
        (0..l)
            .map(|s| {
                let sf = s as f64;
                // Post-chirp plus the frequency-shift factor for the reorder.
                let ph = quad_phase(self.alpha, sf, lf) - 2.0 * PI * (h as f64) * sf * self.alpha / lf;
                a[s] * Complex64::new(ph.cos(), ph.sin()) * scale
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_eval(y: &[Complex64], positions: &[f64]) -> Vec<Complex64> {
        // Brute-force band-limited periodic interpolation from the spectrum.
        let n = y.len();
        let mut spec = y.to_vec();
        fft_forward(&mut spec);
        let freqs: Vec<f64> = fft_bin_freqs(n, n as f64);
        positions
            .iter()
            .map(|&p| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, &f) in freqs.iter().enumerate() {
                    let ph = 2.0 * PI * f * p / n as f64;
                    acc += spec[k] * Complex64::new(ph.cos(), ph.sin());
                }
                acc / n as f64
            })
            .collect()
    }

    #[test]
    fn chebwin_matches_reference_values() {
        // Reference vectors computed with scipy.signal.windows.chebwin.
        let w15 = chebwin(15, 100.0);
        let expect15 = [
            3.370253844446411e-03,
            2.327338777058449e-02,
            8.641145049434774e-02,
            2.230052737641819e-01,
            4.407460104341079e-01,
            6.997332835790314e-01,
            9.155131508690028e-01,
            1.0,
            9.155131508690028e-01,
            6.997332835790314e-01,
            4.407460104341079e-01,
            2.230052737641819e-01,
            8.641145049434774e-02,
            2.327338777058449e-02,
            3.370253844446411e-03,
        ];
        for (a, b) in w15.iter().zip(expect15.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }

        let w16 = chebwin(16, 100.0);
        let expect16 = [
            2.806636525200645e-03,
            1.899152892376440e-02,
            7.039514569046058e-02,
            1.840858169996547e-01,
            3.737189798304315e-01,
            6.177351317341466e-01,
            8.534969387693757e-01,
            1.0,
            1.0,
            8.534969387693757e-01,
            6.177351317341466e-01,
            3.737189798304315e-01,
            1.840858169996547e-01,
            7.039514569046058e-02,
            1.899152892376440e-02,
            2.806636525200645e-03,
        ];
        for (a, b) in w16.iter().zip(expect16.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn chebwin_sidelobes_hit_design_level() {
        for &len in &[512usize, 1120, 1584] {
            let w = chebwin(len, 100.0);
            let pad = 8 * len;
            let mut buf: Vec<Complex64> =
                w.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            buf.resize(pad, Complex64::new(0.0, 0.0));
            fft_forward(&mut buf);
            let mag: Vec<f64> = buf.iter().map(|c| c.norm()).collect();
            let mut i = 1;
            while mag[i] < mag[i - 1] {
                i += 1;
            }
            let peak = mag[0];
            let max_side = mag[i..pad / 2].iter().cloned().fold(0.0, f64::max);
            let level_db = 20.0 * (max_side / peak).log10();
            assert!(
                (level_db + 100.0).abs() < 0.1,
                "len {len}: sidelobe {level_db} dB"
            );
        }
    }

    #[test]
    fn stretch_eval_identity_at_unit_alpha() {
        let n = 257;
        let y: Vec<Complex64> = (0..n)
            .map(|i| {
                let t = i as f64;
                Complex64::new((0.1 * t).sin() + 0.3, (0.07 * t).cos())
            })
            .collect();
        let mut spec = y.clone();
        fft_forward(&mut spec);
        let out = StretchEval::new(n, 1.0).eval_spectrum(&spec);
        for (a, b) in out.iter().zip(y.iter()) {
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn stretch_eval_matches_direct_dft() {
        for &(n, alpha) in &[(64usize, 1.0 - 2e-4), (129, 1.0 + 5e-4), (200, 1.0 - 1e-6)] {
            let mut state = 0x9e3779b97f4a7c15u64;
            let mut rng = move || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            let y: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng(), rng())).collect();
            let mut spec = y.clone();
            fft_forward(&mut spec);
            let got = StretchEval::new(n, alpha).eval_spectrum(&spec);
            let positions: Vec<f64> = (0..n).map(|s| s as f64 * alpha).collect();
            let want = direct_eval(&y, &positions);
            for (a, b) in got.iter().zip(want.iter()) {
                assert!((a - b).norm() < 1e-9, "n={n} alpha={alpha}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn welch_psd_integrates_to_variance_for_white_noise() {
        let mut state = 0x1234_5678_9abc_def0u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let n = 1 << 16;
        let x: Vec<f64> = (0..n).map(|_| {
            (0..12).map(|_| next()).sum::<f64>()
        }).collect();
        let var: f64 = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let fs = 1e4;
        let (freqs, pxx) = welch_psd(&x, fs, 512);
        let df = freqs[1] - freqs[0];
        let integral: f64 = pxx.iter().sum::<f64>() * df;
        assert!((integral / var - 1.0).abs() < 0.05, "integral {integral} vs var {var}");
        let flat = var / (fs / 2.0);
        for (f, p) in freqs.iter().zip(pxx.iter()) {
            if *f > 0.0 && *f < fs / 2.0 {
                assert!((10.0 * (p / flat).log10()).abs() < 2.0, "bin {f}: {p:e} vs {flat:e}");
            }
        }
    }

    #[test]
    fn welch_psd_localizes_a_sine_with_its_power() {
        let fs = 2048.0;
        let n = 1 << 15;
        let f0 = 256.0;
        let amp = 3.0;
        let x: Vec<f64> = (0..n)
            .map(|i| amp * (2.0 * PI * f0 * i as f64 / fs).sin())
            .collect();
        let (freqs, pxx) = welch_psd(&x, fs, 1024);
        let df = freqs[1] - freqs[0];
        let around: f64 = freqs
            .iter()
            .zip(pxx.iter())
            .filter(|(f, _)| (**f - f0).abs() <= 4.0 * df)
            .map(|(_, p)| p)
            .sum::<f64>()
            * df;
        assert!((around / (amp * amp / 2.0) - 1.0).abs() < 1e-3);
        let peak_bin = (f0 / df) as usize;
        let far: f64 = pxx[..peak_bin - 8].iter().cloned().fold(0.0, f64::max);
        assert!(far < pxx[peak_bin] * 1e-6);
    }
}
