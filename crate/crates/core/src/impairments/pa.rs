//! Memoryless power-amplifier model as an AM/AM + AM/PM lookup table.
//!
//! The table is expressed at the waveform's own power scale: it maps the
//! instantaneous amplitude of the unit-power baseband signal to the output
//! amplitude and added phase, with the drive level (backoff) and the
//! small-signal gain already folded in. Applying the model is then a pure
//! table lookup, and a measured amplifier characteristic loaded from CSV
//! behaves identically to an analytic one.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct PaModel {
    /// Strictly increasing input amplitudes, starting at 0.
    pub input_amp: Vec<f64>,
    pub output_amp: Vec<f64>,
    pub output_phase_rad: Vec<f64>,
}

impl PaModel {
    /// Distortion-free passthrough (linear far beyond any realistic drive).
    pub fn identity() -> PaModel {
        PaModel {
            input_amp: vec![0.0, 1e9],
            output_amp: vec![0.0, 1e9],
            output_phase_rad: vec![0.0, 0.0],
        }
    }

    /// Soft-limiter characteristic g(r) = r / (1 + (r/v)^(2p))^(1/(2p)),
    /// driven `ibo_db` below its input-referred 1 dB compression power and
    /// renormalized to unit small-signal gain at that drive level. The table
    /// spans amplitudes up to twelve times the signal RMS.
    pub fn from_rapp(smoothness: f64, ibo_db: f64, n_points: usize) -> Result<PaModel> {
        if smoothness <= 0.0 {
            return Err(Error::config("rapp smoothness must be positive"));
        }
        if n_points < 8 {
            return Err(Error::config("rapp table needs at least 8 points"));
        }
        let v = 1.0;
        let r_1db = v * (10f64.powf(smoothness / 10.0) - 1.0).powf(1.0 / (2.0 * smoothness));
        let drive = r_1db * 10f64.powf(-ibo_db / 20.0);
        let span = 12.0;
        let mut input_amp = Vec::with_capacity(n_points);
        let mut output_amp = Vec::with_capacity(n_points);
        for i in 0..n_points {
            let r = span * i as f64 / (n_points - 1) as f64;
            let r_in = r * drive;
            let g = r_in / (1.0 + (r_in / v).powf(2.0 * smoothness)).powf(1.0 / (2.0 * smoothness));
            input_amp.push(r);
            output_amp.push(g / drive);
        }
        Ok(PaModel { input_amp, output_amp, output_phase_rad: vec![0.0; n_points] })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.input_amp.len();
        if n < 2 || self.output_amp.len() != n || self.output_phase_rad.len() != n {
            return Err(Error::config("pa table columns must share a length of at least 2"));
        }
        if self.input_amp[0] != 0.0 {
            return Err(Error::config("pa table must start at input amplitude 0"));
        }
        if self.input_amp.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("pa table input amplitudes must be strictly increasing"));
        }
        if self.output_amp.iter().any(|&a| a < 0.0) {
            return Err(Error::config("pa table output amplitudes must be non-negative"));
        }
        Ok(())
    }

    /// Piecewise-linear AM/AM and AM/PM at amplitude `r`; inputs beyond the
    /// table hold the last row (hard saturation).
    pub fn response(&self, r: f64) -> (f64, f64) {
        let n = self.input_amp.len();
        if r >= self.input_amp[n - 1] {
            return (self.output_amp[n - 1], self.output_phase_rad[n - 1]);
        }
        let hi = self.input_amp.partition_point(|&x| x <= r).max(1);
        let (x0, x1) = (self.input_amp[hi - 1], self.input_amp[hi]);
        let t = (r - x0) / (x1 - x0);
        let amp = self.output_amp[hi - 1] + t * (self.output_amp[hi] - self.output_amp[hi - 1]);
        let ph = self.output_phase_rad[hi - 1]
            + t * (self.output_phase_rad[hi] - self.output_phase_rad[hi - 1]);
        (amp, ph)
    }

    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "in_amp,out_amp,out_phase_rad")?;
        for i in 0..self.input_amp.len() {
            writeln!(
                f,
                "{:e},{:e},{:e}",
                self.input_amp[i], self.output_amp[i], self.output_phase_rad[i]
            )?;
        }
        Ok(())
    }

    pub fn from_csv(path: &Path) -> Result<PaModel> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = f.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::config("empty pa table file"))??;
        if header.trim() != "in_amp,out_amp,out_phase_rad" {
            return Err(Error::config(format!("unexpected pa table header: {header}")));
        }
        let mut model =
            PaModel { input_amp: vec![], output_amp: vec![], output_phase_rad: vec![] };
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let mut next = || -> Result<f64> {
                cols.next()
                    .ok_or_else(|| Error::config(format!("short pa table row: {line}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::config(format!("bad pa table value: {e}")))
            };
            model.input_amp.push(next()?);
            model.output_amp.push(next()?);
            model.output_phase_rad.push(next()?);
        }
        model.validate()?;
        Ok(model)
    }
}

/// Pass every sample through the amplifier table.
pub fn pa_apply(y: &mut [Complex64], model: &PaModel) {
    for v in y.iter_mut() {
        let r = v.norm();
        if r == 0.0 {
            continue;
        }
        let (amp, ph) = model.response(r);
        *v *= Complex64::from_polar(amp / r, ph);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn gaussian_signal(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let g = Normal::new(0.0, (0.5f64).sqrt()).unwrap();
        (0..n)
            .map(|_| Complex64::new(g.sample(&mut rng), g.sample(&mut rng)))
            .collect()
    }

    #[test]
    fn identity_model_is_transparent() {
        let model = PaModel::identity();
        let mut y = gaussian_signal(1000, 1);
        let orig = y.clone();
        pa_apply(&mut y, &model);
        for (a, b) in y.iter().zip(orig.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn small_signal_gain_is_unity() {
        let model = PaModel::from_rapp(2.0, 10.0, 4096).unwrap();
        let (amp, ph) = model.response(1e-3);
        assert!((amp / 1e-3 - 1.0).abs() < 1e-6);
        assert_eq!(ph, 0.0);
    }

    #[test]
    fn rapp_compression_statistics_match_analytic_values() {
        let model = PaModel::from_rapp(2.0, 10.0, 8192).unwrap();
        let mut y = gaussian_signal(400_000, 7);
        let x = y.clone();
        pa_apply(&mut y, &model);
        let e_xy: Complex64 = x.iter().zip(y.iter()).map(|(a, b)| b * a.conj()).sum();
        let e_xx: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let e_yy: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        let kappa = e_xy / e_xx;
        let pplr_db = 20.0 * kappa.norm().log10();
        let lin = kappa.norm_sqr() * e_xx;
        let dist = e_yy - lin;
        let sdr_db = 10.0 * (lin / dist).log10();
        assert!((pplr_db - (-0.072)).abs() < 0.01, "pplr {pplr_db:.4}");
        assert!((sdr_db - 38.70).abs() < 0.25, "sdr {sdr_db:.3}");

        let model = PaModel::from_rapp(3.0, 10.0, 8192).unwrap();
        let mut y = x.clone();
        pa_apply(&mut y, &model);
        let e_xy: Complex64 = x.iter().zip(y.iter()).map(|(a, b)| b * a.conj()).sum();
        let e_yy: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        let kappa = e_xy / e_xx;
        let pplr_db = 20.0 * kappa.norm().log10();
        let lin = kappa.norm_sqr() * e_xx;
        let sdr_db = 10.0 * (lin / (e_yy - lin)).log10();
        assert!((pplr_db - (-0.032)).abs() < 0.01, "pplr {pplr_db:.4}");
        assert!((sdr_db - 41.23).abs() < 0.25, "sdr {sdr_db:.3}");
    }

    #[test]
    fn inputs_beyond_table_saturate() {
        let model = PaModel::from_rapp(2.0, 10.0, 512).unwrap();
        let last = *model.output_amp.last().unwrap();
        let (amp, _) = model.response(1e9);
        assert_eq!(amp, last);
    }

    #[test]
    fn csv_round_trip_preserves_table() {
        let model = PaModel::from_rapp(2.0, 8.0, 64).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pa.csv");
        model.to_csv(&path).unwrap();
        let back = PaModel::from_csv(&path).unwrap();
        for i in 0..model.input_amp.len() {
            assert!((model.input_amp[i] - back.input_amp[i]).abs() < 1e-15);
            assert!((model.output_amp[i] - back.output_amp[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn validation_rejects_malformed_tables() {
        let mut m = PaModel::identity();
        m.input_amp = vec![0.1, 1.0];
        assert!(m.validate().is_err());
        let mut m = PaModel::identity();
        m.input_amp = vec![0.0, 0.0];
        assert!(m.validate().is_err());
        let mut m = PaModel::identity();
        m.output_amp = vec![0.0, -1.0];
        assert!(m.validate().is_err());
    }
}
