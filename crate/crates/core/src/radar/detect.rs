//! Peak extraction and interference metrics on range-Doppler maps.

use crate::error::{Error, Result};
use crate::radar::periodogram::Periodogram;
use crate::units::watts_to_dbm;
use serde::{Deserialize, Serialize};

/// One detected return, with sub-bin position from per-axis quadratic
/// interpolation of the log-power surface.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Peak {
    pub range_bin: f64,
    pub doppler_bin: f64,
    pub range_m: f64,
    pub doppler_hz: f64,
    pub power_w: f64,
    pub sinr_db: f64,
}

/// Detection thresholds and the exclusion box used for successive peaks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionSpec {
    pub max_peaks: usize,
    pub min_sinr_db: f64,
    pub exclusion_range_bins: usize,
    pub exclusion_doppler_bins: usize,
}

impl Default for DetectionSpec {
    fn default() -> Self {
        DetectionSpec {
            max_peaks: 8,
            min_sinr_db: 17.0,
            exclusion_range_bins: 8,
            exclusion_doppler_bins: 8,
        }
    }
}

/// Circular distance between bins on an axis of length `len`.
fn wrap_dist(a: usize, b: usize, len: usize) -> usize {
    let d = a.abs_diff(b) % len;
    d.min(len - d)
}

/// Median of a slice, averaging the middle pair for even lengths.
fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Robust noise-floor estimate: the per-cell power of a periodogram far
/// from any return is exponentially distributed, whose median is ln(2)
/// times the mean.
pub fn noise_floor_w(pg: &Periodogram) -> f64 {
    let mut cells: Vec<f64> = pg.p.iter().cloned().collect();
    median(&mut cells) / std::f64::consts::LN_2
}

/// Sub-bin offset of a parabola through three log-domain samples. Returns
/// the offset clamped to half a bin and the refined apex value in dB.
fn parabolic(y_m: f64, y_0: f64, y_p: f64) -> (f64, f64) {
    let denom = y_m - 2.0 * y_0 + y_p;
    if denom >= 0.0 || !denom.is_finite() {
        return (0.0, y_0);
    }
    let delta = ((y_m - y_p) / (2.0 * denom)).clamp(-0.5, 0.5);
    (delta, y_0 - 0.25 * (y_m - y_p) * delta)
}

/// Greedy strongest-first peak search with circular exclusion boxes.
///
/// A cell qualifies if it is a local maximum of its circular 8-neighborhood
/// and exceeds the estimated noise floor by `min_sinr_db`. Each accepted
/// peak suppresses further detections within the exclusion box around it.
pub fn find_peaks(pg: &Periodogram, spec: &DetectionSpec) -> Result<Vec<Peak>> {
    let (nr, nd) = pg.p.dim();
    if nr < 3 || nd < 3 {
        return Err(Error::dimension("map too small for peak detection"));
    }
    let floor = noise_floor_w(pg);
    let threshold = floor * 10f64.powf(spec.min_sinr_db / 10.0);

    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for ((i, j), &v) in pg.p.indexed_iter() {
        if v < threshold {
            continue;
        }
        let im = (i + nr - 1) % nr;
        let ip = (i + 1) % nr;
        let jm = (j + nd - 1) % nd;
        let jp = (j + 1) % nd;
        let neighbors = [
            pg.p[[im, jm]],
            pg.p[[im, j]],
            pg.p[[im, jp]],
            pg.p[[i, jm]],
            pg.p[[i, jp]],
            pg.p[[ip, jm]],
            pg.p[[ip, j]],
            pg.p[[ip, jp]],
        ];
        if neighbors.iter().all(|&nb| v >= nb) {
            candidates.push((i, j, v));
        }
    }
    candidates.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap());

    let mut peaks: Vec<Peak> = Vec::new();
    let mut taken: Vec<(usize, usize)> = Vec::new();
    for (i, j, v) in candidates {
        if peaks.len() >= spec.max_peaks {
            break;
        }
        if taken.iter().any(|&(ti, tj)| {
            wrap_dist(i, ti, nr) <= spec.exclusion_range_bins
                && wrap_dist(j, tj, nd) <= spec.exclusion_doppler_bins
        }) {
            continue;
        }
        taken.push((i, j));

        let db = |p: f64| 10.0 * p.max(f64::MIN_POSITIVE).log10();
        let (dr, apex_r) = parabolic(
            db(pg.p[[(i + nr - 1) % nr, j]]),
            db(v),
            db(pg.p[[(i + 1) % nr, j]]),
        );
        let (dd, apex_d) = parabolic(
            db(pg.p[[i, (j + nd - 1) % nd]]),
            db(v),
            db(pg.p[[i, (j + 1) % nd]]),
        );
        let apex_db = apex_r + apex_d - db(v);
        let power_w = 10f64.powf(apex_db / 10.0);
        let range_bin = i as f64 + dr;
        let doppler_bin = j as f64 + dd;
        let (range_m, doppler_hz) = pg.bin_to_physical(range_bin, doppler_bin);
        peaks.push(Peak {
            range_bin,
            doppler_bin,
            range_m,
            doppler_hz,
            power_w,
            sinr_db: 10.0 * (power_w / floor).log10(),
        });
    }
    Ok(peaks)
}

/// Peak power and sidelobe/interference summary of a map.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SirMetrics {
    /// Strongest cell, in dBm.
    pub peak_power_dbm: f64,
    /// Peak loss relative to the reference map, in dB; zero without one.
    pub pplr_db: f64,
    /// Peak amplitude over the mean cell amplitude outside the exclusion
    /// box, in dB.
    pub mean_sir_db: f64,
    /// Peak power over the strongest cell outside the exclusion box, in dB.
    pub min_sir_db: f64,
}

/// Measure the interference environment around the strongest return.
///
/// All cells within the circular exclusion box (`half-widths` in bins of the
/// given map) around the peak are treated as part of the mainlobe. The
/// mean ratio uses cell amplitudes, the minimum ratio the single strongest
/// leftover cell. With a `reference` map the peak loss is the dB difference
/// of the two peak powers.
pub fn measure_metrics(
    test: &Periodogram,
    reference: Option<&Periodogram>,
    exclusion_range_bins: usize,
    exclusion_doppler_bins: usize,
) -> Result<SirMetrics> {
    let (nr, nd) = test.p.dim();
    let (pi, pj, peak_w) = test.argmax();
    if peak_w <= 0.0 {
        return Err(Error::numeric("map has no positive peak"));
    }

    let mut amp_sum = 0.0;
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for ((i, j), &v) in test.p.indexed_iter() {
        if wrap_dist(i, pi, nr) <= exclusion_range_bins
            && wrap_dist(j, pj, nd) <= exclusion_doppler_bins
        {
            continue;
        }
        amp_sum += v.max(0.0).sqrt();
        if v > worst {
            worst = v;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::dimension("exclusion box covers the whole map"));
    }

    let peak_amp = peak_w.sqrt();
    let mean_amp = amp_sum / count as f64;
    let pplr_db = match reference {
        Some(r) => {
            let (_, _, ref_w) = r.argmax();
            if ref_w <= 0.0 {
                return Err(Error::numeric("reference map has no positive peak"));
            }
            10.0 * (peak_w / ref_w).log10()
        }
        None => 0.0,
    };

    Ok(SirMetrics {
        peak_power_dbm: watts_to_dbm(peak_w),
        pplr_db,
        mean_sir_db: 20.0 * (peak_amp / mean_amp).log10(),
        min_sir_db: 10.0 * (peak_w / worst).log10(),
    })
}
