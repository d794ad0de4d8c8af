//! Declarative experiment descriptions and the end-to-end simulation chain.
//!
//! A scenario file wires every stage together: frame generation, transmit
//! impairments, propagation, receiver offsets and noise, synchronization,
//! quotient processing, and the range-Doppler map with its metrics. All
//! randomness derives from (base seed, stream, run index), so a scenario
//! plus a seed is a complete, bit-reproducible description of an experiment.
//!
//! Stage order of one run: frame synthesis, DAC aperture jitter, power
//! amplifier, transmit oscillator phase noise, multipath channel, receiver
//! timing/carrier offsets, receive oscillator phase noise, thermal noise,
//! sample-clock skew with ADC aperture jitter, quantization, then the
//! receiver chain (synchronization, quotient, common-phase removal, TDD
//! gating, map, cleaning, detection and metrics).

use crate::budget::{budget_curve, kpi_table, solve_rho_intersections, BudgetCurveSpec, KpiTable, RhoIntersection};
use crate::channel::{
    add_awgn, apply_channel, apply_sync_offsets, path_rx_power_w, LinkBudget, PathGeometry,
    PropagationPath, SyncOffsets,
};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::frame::FrameMatrix;
use crate::impairments::{
    jitter_generate, pa_apply, pn_apply, pn_default, pn_generate, quantize_clip, resample_clock,
    NoisePsdSpec, PaModel, QuantizerSpec, TimingJitter,
};
use crate::ofdm::{demodulate, generate_frame, hard_demap_remap, modulate};
use crate::radar::{
    channel_quotient, cpe_compensate, find_peaks, measure_metrics, periodogram,
    pilot_periodogram, psf_locate, psf_subtract, tdd_apply, DetectionSpec, Peak, Periodogram,
    PeriodogramSpec, SirMetrics, TddPattern, WindowKind,
};
use crate::rng::{derive_run_rng, stream};
use crate::sync::{run_pipeline, SyncConfig, SyncReport};
use crate::units::{db_to_lin, lin_to_db, watts_to_dbm, C0};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

/// One propagation path of the scene: the geometry fixes the received
/// power, `doppler_hz` the bistatic Doppler shift. Without an explicit
/// `phase_rad` the path phase is drawn independently per run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathSpec {
    #[serde(flatten)]
    pub geometry: PathGeometry,
    #[serde(default)]
    pub doppler_hz: f64,
    #[serde(default)]
    pub phase_rad: Option<f64>,
}

/// Thermal noise control. Without an SNR override the noise power is the
/// link budget's receiver noise floor over the occupied bandwidth; with one
/// it is set so the reference path arrives at exactly that per-sample SNR.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub enabled: bool,
    pub reference_snr_db: Option<f64>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { enabled: true, reference_snr_db: None }
    }
}

/// Memoryless amplifier: a saturating AM-AM law with the given smoothness,
/// backed off `ibo_db` from the input-referred 1 dB compression point, or a
/// measured lookup table loaded from CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaSpec {
    pub smoothness: f64,
    pub ibo_db: f64,
    pub lut_points: usize,
    pub lut_csv: Option<String>,
}

impl Default for PaSpec {
    fn default() -> Self {
        PaSpec { smoothness: 3.0, ibo_db: 10.0, lut_points: 2048, lut_csv: None }
    }
}

impl PaSpec {
    fn model(&self) -> Result<PaModel> {
        match &self.lut_csv {
            Some(path) => PaModel::from_csv(Path::new(path)),
            None => PaModel::from_rapp(self.smoothness, self.ibo_db, self.lut_points),
        }
    }
}

/// Oscillator phase noise on either end of the link. The default PSD is the
/// shipped oscillator profile; explicit anchors or a CSV override it.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseNoiseSpec {
    pub tx: bool,
    pub rx: bool,
    pub anchors: Option<Vec<(f64, f64)>>,
    pub band_hz: Option<(f64, f64)>,
    pub psd_csv: Option<String>,
}

impl Default for PhaseNoiseSpec {
    fn default() -> Self {
        PhaseNoiseSpec { tx: true, rx: true, anchors: None, band_hz: None, psd_csv: None }
    }
}

impl PhaseNoiseSpec {
    fn psd(&self) -> Result<NoisePsdSpec> {
        if let Some(path) = &self.psd_csv {
            return NoisePsdSpec::from_csv(Path::new(path));
        }
        match (&self.anchors, self.band_hz) {
            (Some(a), band) => {
                let lo = band.map_or_else(|| a.first().map_or(0.0, |p| p.0), |b| b.0);
                let hi = band.map_or_else(|| a.last().map_or(0.0, |p| p.0), |b| b.1);
                NoisePsdSpec::new(a.clone(), lo, hi)
            }
            (None, _) => Ok(pn_default()),
        }
    }
}

/// Converter resolution and the clipping backoff of the full-scale rails.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantSpec {
    pub n_bits: u32,
    pub headroom_db: f64,
}

impl Default for QuantSpec {
    fn default() -> Self {
        QuantSpec { n_bits: 12, headroom_db: 20.0 }
    }
}

/// RMS aperture jitter of the two converters, seconds.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JitterSpec {
    pub dac_rms_s: f64,
    pub adc_rms_s: f64,
}

/// Hardware impairment toggles; an absent block leaves that stage ideal.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpairmentSpec {
    pub pa: Option<PaSpec>,
    pub phase_noise: Option<PhaseNoiseSpec>,
    pub quantizer: Option<QuantSpec>,
    pub jitter: Option<JitterSpec>,
}

/// How the receiver forms the transmitted-symbol estimate for the quotient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuotientMode {
    /// Divide by the true transmitted frame.
    FullGenie,
    /// Divide by hard symbol decisions (pilot cells use known values).
    FullHard,
    /// Use pilot cells only, on the decimated comb.
    Pilot,
}

/// How the receiver finds the frame origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncMode {
    /// Use the known frame position; valid only with zero injected offsets.
    Ideal,
    /// Full estimation pipeline from the preamble and pilots.
    Pipeline,
}

/// Successive cancellation of the strongest returns: each detected peak is
/// refit and subtracted from the quotient before the map is rebuilt.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanSpec {
    pub max_paths: usize,
}

impl Default for CleanSpec {
    fn default() -> Self {
        CleanSpec { max_paths: 1 }
    }
}

/// Receiver processing chain configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessingSpec {
    pub mode: QuotientMode,
    pub sync: SyncMode,
    pub range_window: WindowKind,
    pub doppler_window: WindowKind,
    pub range_pad: usize,
    pub doppler_pad: usize,
    /// Remove the per-symbol common phase before the map.
    pub cpe: bool,
    pub clean: Option<CleanSpec>,
    pub detection: DetectionSpec,
    /// Half-widths of the mainlobe exclusion box for the SIR metrics, in
    /// map bins; default is 4 unpadded bins per axis.
    pub sir_exclusion_range_bins: Option<usize>,
    pub sir_exclusion_doppler_bins: Option<usize>,
    pub sync_tuning: SyncConfig,
}

impl Default for ProcessingSpec {
    fn default() -> Self {
        ProcessingSpec {
            mode: QuotientMode::FullGenie,
            sync: SyncMode::Ideal,
            range_window: WindowKind::default(),
            doppler_window: WindowKind::default(),
            range_pad: 1,
            doppler_pad: 1,
            cpe: false,
            clean: None,
            detection: DetectionSpec::default(),
            sir_exclusion_range_bins: None,
            sir_exclusion_doppler_bins: None,
            sync_tuning: SyncConfig::default(),
        }
    }
}

impl ProcessingSpec {
    fn periodogram_spec(&self) -> PeriodogramSpec {
        PeriodogramSpec {
            range_window: self.range_window,
            doppler_window: self.doppler_window,
            range_pad: self.range_pad,
            doppler_pad: self.doppler_pad,
        }
    }

    fn sir_exclusion(&self) -> (usize, usize) {
        (
            self.sir_exclusion_range_bins.unwrap_or(4 * self.range_pad),
            self.sir_exclusion_doppler_bins.unwrap_or(4 * self.doppler_pad),
        )
    }
}

/// Monte-Carlo extent and the seed every random stream derives from.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub n_runs: usize,
    pub base_seed: u64,
}

impl Default for MonteCarloSpec {
    fn default() -> Self {
        MonteCarloSpec { n_runs: 1, base_seed: 1 }
    }
}

/// Which per-run artifact files to write next to the report.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub periodogram: bool,
    pub peaks: bool,
}

/// One assertion on a numeric field of the emitted report, addressed by its
/// dotted JSON path. Either an absolute/relative tolerance around `target`
/// or a one-sided `min`/`max` bound.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckEntry {
    pub target: Option<f64>,
    pub tol: Option<f64>,
    pub rel_tol: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

/// Offset grids swept by the synchronization evaluation command. Rows are
/// the cross product of the three lists.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncEvalSpec {
    pub sto_samples: Vec<f64>,
    pub cfo_hz: Vec<f64>,
    pub sfo_ppm: Vec<f64>,
    pub n_runs: usize,
}

impl Default for SyncEvalSpec {
    fn default() -> Self {
        SyncEvalSpec {
            sto_samples: vec![0.0],
            cfo_hz: vec![0.0],
            sfo_ppm: vec![0.0],
            n_runs: 20,
        }
    }
}

/// Complete experiment description, the deserialized form of a scenario
/// file. Every block is optional with physically sensible defaults.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub system: SystemConfig,
    pub budget: LinkBudget,
    pub paths: Vec<PathSpec>,
    pub offsets: SyncOffsets,
    pub noise: NoiseSpec,
    pub impairments: ImpairmentSpec,
    pub processing: ProcessingSpec,
    pub tdd: Option<TddPattern>,
    pub monte_carlo: MonteCarloSpec,
    pub outputs: OutputSpec,
    pub check: BTreeMap<String, CheckEntry>,
    pub budget_curve: Option<BudgetCurveSpec>,
    pub sync_eval: SyncEvalSpec,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        Scenario::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.offsets.validate()?;
        let n_refs = self
            .paths
            .iter()
            .filter(|p| matches!(p.geometry, PathGeometry::Reference { .. }))
            .count();
        if n_refs != 1 {
            return Err(Error::config(format!(
                "scene needs exactly one reference path, found {n_refs}"
            )));
        }
        for p in &self.paths {
            if let PathGeometry::Reference { .. } = p.geometry {
                if p.doppler_hz != 0.0 {
                    return Err(Error::config("the reference path must be static"));
                }
            }
        }
        let zero_offsets = self.offsets == SyncOffsets::default();
        if self.processing.sync == SyncMode::Ideal && !zero_offsets {
            return Err(Error::config(
                "ideal synchronization requires zero injected offsets; use sync = \"pipeline\"",
            ));
        }
        if self.processing.mode == QuotientMode::Pilot {
            if self.processing.cpe || self.tdd.is_some() || self.processing.clean.is_some() {
                return Err(Error::config(
                    "pilot processing supports neither cpe, tdd, nor clean",
                ));
            }
        }
        if let Some(tdd) = &self.tdd {
            tdd.validate()?;
        }
        if let Some(pa) = &self.impairments.pa {
            if pa.lut_csv.is_none() {
                pa.model()?;
            }
        }
        if let Some(pn) = &self.impairments.phase_noise {
            if pn.psd_csv.is_none() {
                pn.psd()?;
            }
        }
        if let Some(q) = &self.impairments.quantizer {
            QuantizerSpec { n_bits: q.n_bits, full_scale_amp: 1.0 }.validate()?;
        }
        if let Some(j) = &self.impairments.jitter {
            if j.dac_rms_s < 0.0 || j.adc_rms_s < 0.0 {
                return Err(Error::config("jitter RMS must be nonnegative"));
            }
        }
        if self.monte_carlo.n_runs == 0 {
            return Err(Error::config("monte_carlo.n_runs must be at least 1"));
        }
        if self.sync_eval.n_runs == 0 {
            return Err(Error::config("sync_eval.n_runs must be at least 1"));
        }
        for (key, c) in &self.check {
            let tolerated = c.target.is_some() && (c.tol.is_some() || c.rel_tol.is_some());
            if !tolerated && c.min.is_none() && c.max.is_none() {
                return Err(Error::config(format!(
                    "check '{key}' needs target with tol/rel_tol, or min/max"
                )));
            }
        }
        Ok(())
    }

    fn reference_distance_m(&self) -> f64 {
        self.paths
            .iter()
            .find_map(|p| match p.geometry {
                PathGeometry::Reference { distance_m } => Some(distance_m),
                _ => None,
            })
            .expect("validated: one reference path")
    }

    /// Thermal noise power per complex sample, W.
    fn noise_power_w(&self) -> f64 {
        if !self.noise.enabled {
            return 0.0;
        }
        match self.noise.reference_snr_db {
            Some(snr_db) => {
                let geom = PathGeometry::Reference { distance_m: self.reference_distance_m() };
                path_rx_power_w(&geom, &self.budget, self.system.wavelength_m())
                    / db_to_lin(snr_db)
            }
            None => self.budget.noise_power_w(self.system.bandwidth_hz()),
        }
    }

    /// Resolved physical paths of one run, with per-run phases where the
    /// scenario leaves them free.
    fn resolve_paths(&self, run: u64) -> Vec<PropagationPath> {
        let lambda = self.system.wavelength_m();
        let ref_dist = self.reference_distance_m();
        self.paths
            .iter()
            .enumerate()
            .map(|(idx, spec)| {
                let power_w = path_rx_power_w(&spec.geometry, &self.budget, lambda);
                let phase = spec.phase_rad.unwrap_or_else(|| {
                    let salt = (idx as u64).wrapping_mul(0x9e3779b97f4a7c15);
                    let mut rng =
                        derive_run_rng(self.monte_carlo.base_seed ^ salt, stream::PATH_PHASE, run);
                    rng.gen::<f64>() * TAU
                });
                PropagationPath {
                    gain: num_complex::Complex64::from_polar(power_w.sqrt(), phase),
                    delay_s: spec.geometry.relative_range_m(ref_dist) / C0,
                    doppler_hz: spec.doppler_hz,
                }
            })
            .collect()
    }

    /// Map peak of the reference path in an ideal run: receive power times
    /// the coherent cell count of the selected processing, times the TDD
    /// gating loss. The peak-loss metric is measured against this value.
    fn ideal_reference_peak_w(&self) -> f64 {
        let geom = PathGeometry::Reference { distance_m: self.reference_distance_m() };
        let p_ref = path_rx_power_w(&geom, &self.budget, self.system.wavelength_m());
        let n = self.system.n_subcarriers;
        let m = self.system.n_symbols;
        let cells = match self.processing.mode {
            QuotientMode::Pilot => {
                let np = self.system.pilots.pilot_subcarriers(n).len();
                let mp = self.system.pilots.pilot_symbols(m).len();
                (np * mp) as f64
            }
            _ => (n * m) as f64,
        };
        p_ref * cells * self.tdd_peak_factor()
    }

    /// Power fraction a zero-Doppler on-grid peak keeps under the TDD
    /// gating, exact for the configured Doppler window.
    fn tdd_peak_factor(&self) -> f64 {
        let Some(tdd) = &self.tdd else { return 1.0 };
        if tdd.mode == crate::radar::TddMode::PatchDl {
            return 1.0;
        }
        let m = self.system.n_symbols;
        let w = self.processing.doppler_window.coefficients(m);
        let mask = crate::radar::tdd_mask(tdd, m);
        let total: f64 = w.iter().sum();
        let kept: f64 = w.iter().zip(&mask).filter(|(_, &dl)| dl).map(|(v, _)| v).sum();
        (kept / total).powi(2)
    }
}

/// Everything one run produces. The map is retained only when the caller
/// asks for it; at full numerology it weighs tens of megabytes.
pub struct RunArtifacts {
    pub record: RunRecord,
    pub map: Option<Periodogram>,
}

/// Per-run results as they appear in the simulation report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: u64,
    pub error: Option<String>,
    pub metrics: Option<SirMetrics>,
    pub peaks: Vec<Peak>,
    /// Metrics and peaks of the map before cleaning, when cleaning ran.
    pub pre_clean_metrics: Option<SirMetrics>,
    pub pre_clean_peaks: Option<Vec<Peak>>,
    pub sync: Option<SyncReport>,
}

impl RunRecord {
    fn failed(run: u64, err: &Error) -> RunRecord {
        RunRecord {
            run,
            error: Some(err.to_string()),
            metrics: None,
            peaks: Vec::new(),
            pre_clean_metrics: None,
            pre_clean_peaks: None,
            sync: None,
        }
    }
}

/// Run statistics in the style of an impairment comparison row: means over
/// successful runs, and the worst single-cell ratio over all of them.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub runs_succeeded: usize,
    pub runs_failed: usize,
    pub peak_power_dbm_mean: f64,
    pub pplr_db_mean: f64,
    pub mean_sir_db_mean: f64,
    pub min_sir_db_min: f64,
}

/// Full output of the simulate command.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulateReport {
    pub n_runs: usize,
    pub aggregate: AggregateMetrics,
    pub runs: Vec<RunRecord>,
}

/// Execute one Monte-Carlo run of the scenario.
pub fn run_single(scenario: &Scenario, run: u64, keep_map: bool) -> Result<RunArtifacts> {
    let cfg = &scenario.system;
    let seed = scenario.monte_carlo.base_seed;
    let fs = cfg.sample_rate_hz();

    let mut frame_seed_rng = derive_run_rng(seed, stream::DATA_BITS, run);
    let (genie_grid, _bits) = generate_frame(cfg, frame_seed_rng.gen());
    let mut tx = modulate(cfg, &genie_grid)?;

    if let Some(j) = &scenario.impairments.jitter {
        if j.dac_rms_s > 0.0 {
            let jit = TimingJitter::with_rms(j.dac_rms_s);
            let traj = jitter_generate(&jit, tx.len(), fs, seed, stream::JITTER_DAC, run)?;
            tx = resample_clock(&tx, 0.0, Some(&traj), fs)?;
        }
    }
    if let Some(pa) = &scenario.impairments.pa {
        pa_apply(&mut tx, &pa.model()?);
    }
    if let Some(pn) = &scenario.impairments.phase_noise {
        if pn.tx {
            let phase = pn_generate(&pn.psd()?, tx.len(), fs, seed, stream::PHASE_NOISE_TX, run);
            pn_apply(&mut tx, &phase);
        }
    }

    let mut rx = apply_channel(&tx, &scenario.resolve_paths(run), fs);
    if scenario.offsets != SyncOffsets::default() {
        rx = apply_sync_offsets(&rx, &scenario.offsets, fs);
    }
    if let Some(pn) = &scenario.impairments.phase_noise {
        if pn.rx {
            let phase = pn_generate(&pn.psd()?, rx.len(), fs, seed, stream::PHASE_NOISE_RX, run);
            pn_apply(&mut rx, &phase);
        }
    }
    let noise_w = scenario.noise_power_w();
    if noise_w > 0.0 {
        add_awgn(&mut rx, noise_w, seed, run);
    }

    let adc_rms = scenario.impairments.jitter.map_or(0.0, |j| j.adc_rms_s);
    if scenario.offsets.sfo_frac != 0.0 || adc_rms > 0.0 {
        let traj = if adc_rms > 0.0 {
            let jit = TimingJitter::with_rms(adc_rms);
            Some(jitter_generate(&jit, rx.len(), fs, seed, stream::JITTER_ADC, run)?)
        } else {
            None
        };
        rx = resample_clock(&rx, scenario.offsets.sfo_frac, traj.as_deref(), fs)?;
    }

    if let Some(q) = &scenario.impairments.quantizer {
        let signal_w: f64 = scenario
            .paths
            .iter()
            .map(|p| path_rx_power_w(&p.geometry, &scenario.budget, cfg.wavelength_m()))
            .sum::<f64>()
            + noise_w;
        let spec = QuantizerSpec::for_headroom(q.n_bits, signal_w, q.headroom_db)?;
        quantize_clip(&mut rx, &spec);
    }

    let (received, sync_report) = match scenario.processing.sync {
        SyncMode::Ideal => (demodulate(cfg, &rx, cfg.preamble_samples())?, None),
        SyncMode::Pipeline => {
            let outcome = run_pipeline(cfg, &scenario.processing.sync_tuning, &rx)?;
            (outcome.frame, Some(outcome.report))
        }
    };

    process_frame(scenario, &genie_grid, received, sync_report, run, keep_map)
}

/// Receiver processing from the synchronized frame to metrics and peaks.
fn process_frame(
    scenario: &Scenario,
    genie_grid: &FrameMatrix,
    received: FrameMatrix,
    sync_report: Option<SyncReport>,
    run: u64,
    keep_map: bool,
) -> Result<RunArtifacts> {
    let cfg = &scenario.system;
    let proc = &scenario.processing;
    let pspec = proc.periodogram_spec();
    let (excl_r, excl_d) = proc.sir_exclusion();
    let ref_peak_w = scenario.ideal_reference_peak_w();

    if proc.mode == QuotientMode::Pilot {
        let pg = pilot_periodogram(cfg, &received, &pspec)?;
        let mut metrics = measure_metrics(&pg, None, excl_r, excl_d)?;
        metrics.pplr_db = metrics.peak_power_dbm - watts_to_dbm(ref_peak_w);
        let peaks = find_peaks(&pg, &proc.detection)?;
        return Ok(RunArtifacts {
            record: RunRecord {
                run,
                error: None,
                metrics: Some(metrics),
                peaks,
                pre_clean_metrics: None,
                pre_clean_peaks: None,
                sync: sync_report,
            },
            map: keep_map.then_some(pg),
        });
    }

    let reference = match proc.mode {
        QuotientMode::FullGenie => genie_grid.clone(),
        QuotientMode::FullHard => hard_demap_remap(cfg, &received, None),
        QuotientMode::Pilot => unreachable!("handled above"),
    };
    let mut g = channel_quotient(&received, &reference)?;
    if proc.cpe {
        cpe_compensate(&mut g);
    }
    let mask = match &scenario.tdd {
        Some(tdd) => {
            let (masked, mask) = tdd_apply(tdd, &g)?;
            g = masked;
            Some(mask)
        }
        None => None,
    };

    let mut pg = periodogram(cfg, &g, &pspec)?;
    let mut pre_clean_metrics = None;
    let mut pre_clean_peaks = None;

    if let Some(clean) = &proc.clean {
        let mut metrics = measure_metrics(&pg, None, excl_r, excl_d)?;
        metrics.pplr_db = metrics.peak_power_dbm - watts_to_dbm(ref_peak_w);
        pre_clean_peaks = Some(find_peaks(&pg, &proc.detection)?);
        pre_clean_metrics = Some(metrics);
        for _ in 0..clean.max_paths {
            let Some(strongest) = find_peaks(&pg, &proc.detection)?.into_iter().next() else {
                break;
            };
            let (tau, fd) = psf_locate(
                cfg,
                &g,
                strongest.range_m / C0,
                strongest.doppler_hz,
                mask.as_deref(),
            )?;
            psf_subtract(cfg, &mut g, tau, fd, mask.as_deref())?;
            pg = periodogram(cfg, &g, &pspec)?;
        }
    }

    let mut metrics = measure_metrics(&pg, None, excl_r, excl_d)?;
    metrics.pplr_db = metrics.peak_power_dbm - watts_to_dbm(ref_peak_w);
    let peaks = find_peaks(&pg, &proc.detection)?;

    Ok(RunArtifacts {
        record: RunRecord {
            run,
            error: None,
            metrics: Some(metrics),
            peaks,
            pre_clean_metrics,
            pre_clean_peaks,
            sync: sync_report,
        },
        map: keep_map.then_some(pg),
    })
}

/// Run the scenario's Monte-Carlo set in parallel and aggregate.
pub fn run_simulate(scenario: &Scenario, out_dir: Option<&Path>) -> Result<SimulateReport> {
    scenario.validate()?;
    let n_runs = scenario.monte_carlo.n_runs;
    let keep_map = scenario.outputs.periodogram && out_dir.is_some();

    let artifacts: Vec<RunArtifacts> = (0..n_runs as u64)
        .into_par_iter()
        .map(|run| {
            run_single(scenario, run, keep_map).unwrap_or_else(|err| RunArtifacts {
                record: RunRecord::failed(run, &err),
                map: None,
            })
        })
        .collect();

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        for a in &artifacts {
            let run = a.record.run;
            if let Some(map) = &a.map {
                crate::io::write_periodogram(&dir.join(format!("periodogram_run{run}")), map)?;
            }
            if scenario.outputs.peaks && a.record.error.is_none() {
                crate::io::write_peaks_csv(
                    &dir.join(format!("peaks_run{run}.csv")),
                    &a.record.peaks,
                )?;
            }
        }
    }

    let runs: Vec<RunRecord> = artifacts.into_iter().map(|a| a.record).collect();
    Ok(SimulateReport {
        n_runs,
        aggregate: aggregate_metrics(&runs),
        runs,
    })
}

fn aggregate_metrics(runs: &[RunRecord]) -> AggregateMetrics {
    let ok: Vec<&SirMetrics> = runs.iter().filter_map(|r| r.metrics.as_ref()).collect();
    let n = ok.len();
    let mean = |f: fn(&SirMetrics) -> f64| {
        if n == 0 { 0.0 } else { ok.iter().map(|m| f(m)).sum::<f64>() / n as f64 }
    };
    AggregateMetrics {
        runs_succeeded: n,
        runs_failed: runs.len() - n,
        peak_power_dbm_mean: mean(|m| m.peak_power_dbm),
        pplr_db_mean: mean(|m| m.pplr_db),
        mean_sir_db_mean: mean(|m| m.mean_sir_db),
        min_sir_db_min: ok.iter().map(|m| m.min_sir_db).fold(f64::INFINITY, f64::min).min(1e9),
    }
}

/// Output of the kpi command.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KpiReport {
    pub kpi: KpiTable,
}

pub fn run_kpi(scenario: &Scenario) -> Result<KpiReport> {
    scenario.system.validate()?;
    Ok(KpiReport { kpi: kpi_table(&scenario.system)? })
}

/// Output of the budget command: the constructed level lines and every
/// curve/floor crossing.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BudgetReport {
    pub reference_peak_dbm: f64,
    pub awgn_dbm: f64,
    pub mean_interference_dbm: f64,
    pub artifact_dbm: f64,
    pub sinr_min_db: f64,
    pub intersections: Vec<RhoIntersection>,
}

pub fn run_budget(scenario: &Scenario, out_dir: Option<&Path>) -> Result<BudgetReport> {
    scenario.system.validate()?;
    let spec = scenario.budget_curve.clone().unwrap_or_default();
    let curve = budget_curve(&scenario.system, &scenario.budget, &spec)?;
    let intersections = solve_rho_intersections(&curve, scenario.budget.sinr_min_db);

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["rho_m".to_string()];
        header.extend(curve.classes.iter().map(|c| format!("{}_dbm", c.label)));
        header.extend(
            ["reference_peak_dbm", "awgn_dbm", "mean_interference_dbm", "artifact_dbm"]
                .map(String::from),
        );
        w.write_record(&header).map_err(Error::from)?;
        for (i, &rho) in curve.rho_m.iter().enumerate() {
            let mut row = vec![format!("{rho}")];
            for levels in &curve.target_power_dbm {
                row.push(format!("{}", levels[i]));
            }
            for v in [
                curve.reference_peak_dbm,
                curve.awgn_dbm,
                curve.mean_interference_dbm,
                curve.artifact_dbm,
            ] {
                row.push(format!("{v}"));
            }
            w.write_record(&row).map_err(Error::from)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::config(e.to_string()))?;
        crate::io::write_atomic(&dir.join("budget_curve.csv"), &bytes)?;
    }

    Ok(BudgetReport {
        reference_peak_dbm: curve.reference_peak_dbm,
        awgn_dbm: curve.awgn_dbm,
        mean_interference_dbm: curve.mean_interference_dbm,
        artifact_dbm: curve.artifact_dbm,
        sinr_min_db: curve.sinr_min_db,
        intersections,
    })
}

/// Residual statistics of one injected-offset grid point.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SyncEvalRow {
    pub sto_samples: f64,
    pub cfo_hz: f64,
    pub sfo_ppm: f64,
    pub n_runs: usize,
    pub runs_failed: usize,
    pub cfo_bias_hz: f64,
    pub cfo_std_hz: f64,
    pub sfo_bias_ppm: f64,
    pub sfo_std_ppm: f64,
    pub range_bias_m: f64,
    pub range_std_m: f64,
    pub range_p90_abs_m: f64,
    pub doppler_bias_hz: f64,
    pub doppler_std_hz: f64,
    pub doppler_p90_abs_hz: f64,
}

/// Output of the sync-eval command.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SyncEvalReport {
    pub rows: Vec<SyncEvalRow>,
}

/// Sweep the injected-offset grid, running the full estimation pipeline at
/// every point, and report residual statistics.
pub fn run_sync_eval(scenario: &Scenario, out_dir: Option<&Path>) -> Result<SyncEvalReport> {
    scenario.validate()?;
    let spec = &scenario.sync_eval;
    let ts = scenario.system.sample_period_s();
    let r_ua = scenario.system.unambiguous_range_m();

    let mut grid = Vec::new();
    for &sto in &spec.sto_samples {
        for &cfo in &spec.cfo_hz {
            for &sfo in &spec.sfo_ppm {
                grid.push((sto, cfo, sfo));
            }
        }
    }

    let rows: Vec<SyncEvalRow> = grid
        .par_iter()
        .enumerate()
        .map(|(row_idx, &(sto, cfo, sfo))| {
            let mut point = scenario.clone();
            point.offsets =
                SyncOffsets { sto_s: sto * ts, cfo_hz: cfo, sfo_frac: sfo * 1e-6 };
            point.processing.sync = SyncMode::Pipeline;

            let mut cfo_err = Vec::new();
            let mut sfo_err = Vec::new();
            let mut range_err = Vec::new();
            let mut doppler_err = Vec::new();
            let mut failed = 0usize;
            for run_idx in 0..spec.n_runs as u64 {
                let run = ((row_idx as u64) << 32) | run_idx;
                match run_single(&point, run, false) {
                    Ok(a) => {
                        let report = a.record.sync.expect("pipeline mode emits a report");
                        cfo_err.push(report.total_cfo_hz - cfo);
                        sfo_err.push((report.sfo_estimate - sfo * 1e-6) * 1e6);
                        match a.record.peaks.first() {
                            Some(peak) => {
                                let mut r = peak.range_m;
                                if r > r_ua / 2.0 {
                                    r -= r_ua;
                                }
                                range_err.push(r);
                                doppler_err.push(peak.doppler_hz);
                            }
                            None => failed += 1,
                        }
                    }
                    Err(_) => failed += 1,
                }
            }

            SyncEvalRow {
                sto_samples: sto,
                cfo_hz: cfo,
                sfo_ppm: sfo,
                n_runs: spec.n_runs,
                runs_failed: failed,
                cfo_bias_hz: mean_of(&cfo_err),
                cfo_std_hz: std_of(&cfo_err),
                sfo_bias_ppm: mean_of(&sfo_err),
                sfo_std_ppm: std_of(&sfo_err),
                range_bias_m: mean_of(&range_err),
                range_std_m: std_of(&range_err),
                range_p90_abs_m: p90_abs(&range_err),
                doppler_bias_hz: mean_of(&doppler_err),
                doppler_std_hz: std_of(&doppler_err),
                doppler_p90_abs_hz: p90_abs(&doppler_err),
            }
        })
        .collect();

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::config(e.to_string()))?;
        crate::io::write_atomic(&dir.join("sync_eval.csv"), &bytes)?;
    }

    Ok(SyncEvalReport { rows })
}

fn mean_of(v: &[f64]) -> f64 {
    if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 }
}

fn std_of(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean_of(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn p90_abs(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    a.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    let idx = ((a.len() as f64) * 0.9).ceil() as usize;
    a[idx.min(a.len()) - 1]
}

/// Evaluate the scenario's check block against a report's JSON form.
/// Returns one human-readable line per failed assertion.
pub fn evaluate_checks(
    checks: &BTreeMap<String, CheckEntry>,
    report: &serde_json::Value,
) -> Vec<String> {
    let mut failures = Vec::new();
    for (key, check) in checks {
        let Some(found) = lookup_path(report, key).and_then(serde_json::Value::as_f64) else {
            failures.push(format!("{key}: no numeric value at this path"));
            continue;
        };
        if let (Some(target), Some(tol)) = (check.target, check.tol) {
            if (found - target).abs() > tol {
                failures.push(format!("{key}: {found} outside {target} +- {tol}"));
            }
        }
        if let (Some(target), Some(rel)) = (check.target, check.rel_tol) {
            if (found - target).abs() > rel * target.abs() {
                failures.push(format!(
                    "{key}: {found} outside {target} +- {:.3}%",
                    rel * 100.0
                ));
            }
        }
        if let Some(min) = check.min {
            if found < min {
                failures.push(format!("{key}: {found} below minimum {min}"));
            }
        }
        if let Some(max) = check.max {
            if found > max {
                failures.push(format!("{key}: {found} above maximum {max}"));
            }
        }
    }
    failures
}

fn lookup_path<'a>(value: &'a serde_json::Value, path: &str) -> Option<&'a serde_json::Value> {
    let mut cur = value;
    for part in path.split('.') {
        cur = match cur {
            serde_json::Value::Object(map) => map.get(part)?,
            serde_json::Value::Array(items) => items.get(part.parse::<usize>().ok()?)?,
            _ => return None,
        };
    }
    Some(cur)
}

/// Convenience used by small scenarios and tests: the mean SIR a map floor
/// `floor_db` below a fully coherent peak would show, ignoring windows.
pub fn ideal_mean_sir_db(n: usize, m: usize) -> f64 {
    lin_to_db((n * m) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{PilotGrid, PreambleSpec};
    use crate::radar::TddMode;

    fn small_system(n: usize, m: usize) -> SystemConfig {
        SystemConfig {
            carrier_freq_hz: 27.4e9,
            subcarrier_spacing_hz: 120e3,
            n_subcarriers: n,
            n_cp: n / 8,
            n_symbols: m,
            oversampling: 1,
            pilots: PilotGrid { freq_comb: 4, time_comb: 4, seed: 11 },
            preamble: PreambleSpec { n_repeats: 2, seed: 22 },
        }
    }

    fn reference_only(n: usize, m: usize) -> Scenario {
        Scenario {
            system: small_system(n, m),
            paths: vec![PathSpec {
                geometry: PathGeometry::Reference { distance_m: 300.0 },
                doppler_hz: 0.0,
                phase_rad: Some(0.0),
            }],
            noise: NoiseSpec { enabled: false, reference_snr_db: None },
            ..Scenario::default()
        }
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let text = r#"
            [system]
            carrier_freq_hz = 27.4e9
            subcarrier_spacing_hz = 120e3
            n_subcarriers = 64
            n_cp = 8
            n_symbols = 16
            oversampling = 1

            [[paths]]
            kind = "reference"
            distance_m = 300.0

            [[paths]]
            kind = "target"
            tx_to_target_m = 450.0
            target_to_rx_m = 320.0
            rcs_m2 = 1.0
            doppler_hz = 250.0

            [noise]
            enabled = false

            [processing]
            mode = "full_genie"
            range_window = { kind = "rect" }
            doppler_window = { kind = "rect" }

            [check]
            "aggregate.mean_sir_db_mean" = { target = 30.0, tol = 5.0 }
        "#;
        let s = Scenario::from_toml(text).unwrap();
        assert_eq!(s.system.n_subcarriers, 64);
        assert_eq!(s.paths.len(), 2);
        assert_eq!(s.processing.range_window, WindowKind::Rect);
        assert_eq!(s.processing.sync, SyncMode::Ideal);
        assert_eq!(s.monte_carlo.n_runs, 1);
        assert!(s.check.contains_key("aggregate.mean_sir_db_mean"));
        assert_eq!(s.system.pilots.freq_comb, 4);
    }

    #[test]
    fn validation_rejects_inconsistent_scenarios() {
        let mut s = reference_only(64, 16);
        s.paths.clear();
        assert!(s.validate().is_err());

        let mut s = reference_only(64, 16);
        s.offsets.cfo_hz = 100.0;
        assert!(s.validate().is_err());
        s.processing.sync = SyncMode::Pipeline;
        s.validate().unwrap();

        let mut s = reference_only(64, 16);
        s.processing.mode = QuotientMode::Pilot;
        s.processing.cpe = true;
        assert!(s.validate().is_err());

        let mut s = reference_only(64, 16);
        s.check.insert("x".into(), CheckEntry::default());
        assert!(s.validate().is_err());
    }

    #[test]
    fn impairment_free_run_hits_the_exact_peak() {
        let s = reference_only(64, 16);
        let art = run_single(&s, 0, true).unwrap();
        let map = art.map.unwrap();
        let (pi, pj, peak) = map.argmax();
        assert_eq!((pi, pj), (0, 16 / 2));
        let want = s.ideal_reference_peak_w();
        assert!(
            (peak / want - 1.0).abs() < 1e-9,
            "peak {peak} vs ideal {want}"
        );
        let m = art.record.metrics.unwrap();
        assert!(m.pplr_db.abs() < 1e-6, "pplr {}", m.pplr_db);
        assert!(m.mean_sir_db > 100.0);
        let strongest = &art.record.peaks[0];
        assert!(strongest.range_m.abs() < 1e-9);
        assert!(strongest.doppler_hz.abs() < 1e-9);
    }

    #[test]
    fn quotient_modes_agree_on_clean_frames() {
        let mut s = reference_only(64, 16);
        let genie = run_single(&s, 0, false).unwrap().record.metrics.unwrap();
        s.processing.mode = QuotientMode::FullHard;
        let hard = run_single(&s, 0, false).unwrap().record.metrics.unwrap();
        assert!((genie.peak_power_dbm - hard.peak_power_dbm).abs() < 1e-9);

        s.processing.mode = QuotientMode::Pilot;
        let pilot = run_single(&s, 0, false).unwrap().record.metrics.unwrap();
        let full_cells = (64 * 16) as f64;
        let pilot_cells = (16 * 4) as f64;
        let want_drop = lin_to_db(full_cells / pilot_cells);
        assert!(
            (genie.peak_power_dbm - pilot.peak_power_dbm - want_drop).abs() < 1e-6,
            "pilot peak drop {} vs {want_drop}",
            genie.peak_power_dbm - pilot.peak_power_dbm
        );
    }

    #[test]
    fn target_lands_on_its_range_doppler_cell() {
        let mut s = reference_only(128, 32);
        let delta_r = s.system.range_resolution_m();
        let delta_fd = s.system.doppler_resolution_hz();
        s.paths.push(PathSpec {
            geometry: PathGeometry::Target {
                tx_to_target_m: 300.0,
                target_to_rx_m: 5.0 * delta_r,
                rcs_m2: 10.0,
            },
            doppler_hz: 2.0 * delta_fd,
            phase_rad: Some(0.3),
        });
        s.processing.range_window = WindowKind::Rect;
        s.processing.doppler_window = WindowKind::Rect;
        s.processing.detection.min_sinr_db = 10.0;
        s.processing.detection.exclusion_range_bins = 2;
        s.processing.detection.exclusion_doppler_bins = 2;
        let rec = run_single(&s, 0, false).unwrap().record;
        assert!(rec.peaks[0].range_m.abs() < 0.05 * delta_r, "reference is strongest");
        let target = rec
            .peaks
            .iter()
            .find(|p| (p.range_m - 5.0 * delta_r).abs() < 0.5 * delta_r)
            .expect("target peak detected");
        assert!((target.range_m - 5.0 * delta_r).abs() < 0.05 * delta_r);
        assert!((target.doppler_hz - 2.0 * delta_fd).abs() < 0.05 * delta_fd);
    }

    #[test]
    fn monte_carlo_is_deterministic_and_order_free() {
        let mut s = reference_only(64, 16);
        s.monte_carlo.n_runs = 3;
        s.noise = NoiseSpec { enabled: true, reference_snr_db: Some(20.0) };
        let a = run_simulate(&s, None).unwrap();
        let b = run_simulate(&s, None).unwrap();
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
        let m0 = a.runs[0].metrics.unwrap().mean_sir_db;
        let m1 = a.runs[1].metrics.unwrap().mean_sir_db;
        assert!((m0 - m1).abs() > 1e-9, "noise must differ across runs");
        assert_eq!(a.aggregate.runs_succeeded, 3);
    }

    #[test]
    fn tdd_blanking_costs_the_window_duty_factor() {
        let mut s = reference_only(64, 16);
        s.tdd = Some(TddPattern { period_symbols: 4, dl_symbols: 2, mode: TddMode::BlankUl });
        let rec = run_single(&s, 0, false).unwrap().record;
        let m = rec.metrics.unwrap();
        assert!(m.pplr_db.abs() < 1e-6, "gating loss should be absorbed: {}", m.pplr_db);

        let factor = s.tdd_peak_factor();
        assert!(factor < 1.0 && factor > 0.0);
        s.processing.doppler_window = WindowKind::Rect;
        let rect_factor = s.tdd_peak_factor();
        assert!((rect_factor - 0.25).abs() < 1e-12, "50% duty in power terms");
    }

    #[test]
    fn cleaning_recovers_a_target_under_the_gating_aliases() {
        let mut s = reference_only(128, 32);
        let delta_r = s.system.range_resolution_m();
        let delta_fd = s.system.doppler_resolution_hz();
        let near = |x: f64, want: f64, unit: f64| (x - want).abs() < 0.5 * unit;
        s.paths.push(PathSpec {
            geometry: PathGeometry::Target {
                tx_to_target_m: 300.0,
                target_to_rx_m: 12.0 * delta_r,
                rcs_m2: 100.0,
            },
            doppler_hz: 0.0,
            phase_rad: Some(0.0),
        });
        s.paths.push(PathSpec {
            geometry: PathGeometry::Target {
                tx_to_target_m: 300.0,
                target_to_rx_m: 12.0 * delta_r,
                rcs_m2: 0.01,
            },
            doppler_hz: 6.0 * delta_fd,
            phase_rad: Some(0.0),
        });
        s.tdd = Some(TddPattern { period_symbols: 4, dl_symbols: 2, mode: TddMode::BlankUl });
        s.processing.clean = Some(CleanSpec { max_paths: 2 });
        s.processing.detection.min_sinr_db = 12.0;
        s.processing.detection.max_peaks = 16;
        s.processing.detection.exclusion_range_bins = 1;
        s.processing.detection.exclusion_doppler_bins = 1;

        let rec = run_single(&s, 0, false).unwrap().record;
        let pre = rec.pre_clean_peaks.as_ref().unwrap();
        let strong_pre = pre
            .iter()
            .find(|p| near(p.range_m, 12.0 * delta_r, delta_r) && near(p.doppler_hz, 0.0, delta_fd))
            .expect("masker detected before cleaning");
        let weak_true_w = strong_pre.power_w * 1e-4;

        let alias = pre
            .iter()
            .find(|p| {
                near(p.range_m, 12.0 * delta_r, delta_r)
                    && near(p.doppler_hz, 8.0 * delta_fd, 1.5 * delta_fd)
            })
            .expect("gating alias sits two cells from the mover");
        assert!(alias.power_w > 100.0 * weak_true_w, "alias dominates that neighborhood");
        assert!(
            !pre.iter().any(|p| near(p.range_m, 12.0 * delta_r, delta_r)
                && (p.doppler_hz - 6.0 * delta_fd).abs() < 1.5 * delta_fd),
            "mover must start buried in the alias mainlobe"
        );

        let post = &rec.peaks;
        let found = post
            .iter()
            .find(|p| {
                near(p.range_m, 12.0 * delta_r, delta_r)
                    && near(p.doppler_hz, 6.0 * delta_fd, delta_fd)
            })
            .expect("mover detected after cleaning");
        let ratio = found.power_w / weak_true_w;
        assert!(
            (0.631..1.585).contains(&ratio),
            "recovered power off by {:.2} dB",
            10.0 * ratio.log10()
        );
        assert!(found.sinr_db >= 17.0, "post-clean sinr {}", found.sinr_db);
        for sign in [-1.0, 1.0] {
            assert!(
                !post.iter().any(|p| near(p.range_m, 12.0 * delta_r, delta_r)
                    && (p.doppler_hz - sign * 8.0 * delta_fd).abs() < 1.5 * delta_fd
                    && p.power_w > 0.1 * weak_true_w),
                "gating aliases must be gone after cleaning"
            );
        }
    }

    #[test]
    fn kpi_and_budget_commands_report() {
        let mut s = reference_only(64, 16);
        s.system = SystemConfig::default();
        let kpi = run_kpi(&s).unwrap();
        assert!((kpi.kpi.gp_db - 62.489732).abs() < 1e-5);

        let report = run_budget(&s, None).unwrap();
        assert_eq!(report.intersections.len(), 9);
        assert!((report.reference_peak_dbm - 38.744512).abs() < 1e-5);
        let json = serde_json::to_value(&report).unwrap();
        assert!(lookup_path(&json, "intersections.0.rho_max_m").is_some());
    }

    #[test]
    fn checks_catch_mismatches_and_pass_matches() {
        let report = serde_json::json!({
            "aggregate": { "mean_sir_db_mean": 30.5 },
            "runs": [ { "metrics": { "min_sir_db": 20.0 } } ]
        });
        let mut checks = BTreeMap::new();
        checks.insert(
            "aggregate.mean_sir_db_mean".to_string(),
            CheckEntry { target: Some(30.0), tol: Some(1.0), ..CheckEntry::default() },
        );
        checks.insert(
            "runs.0.metrics.min_sir_db".to_string(),
            CheckEntry { min: Some(17.0), ..CheckEntry::default() },
        );
        assert!(evaluate_checks(&checks, &report).is_empty());

        checks.insert(
            "aggregate.mean_sir_db_mean".to_string(),
            CheckEntry { target: Some(30.0), tol: Some(0.1), ..CheckEntry::default() },
        );
        checks.insert(
            "missing.path".to_string(),
            CheckEntry { min: Some(0.0), ..CheckEntry::default() },
        );
        let failures = evaluate_checks(&checks, &report);
        assert_eq!(failures.len(), 2);
    }

    #[test]
    fn sync_eval_reports_small_residuals_on_a_quiet_point() {
        let mut s = reference_only(256, 64);
        s.noise = NoiseSpec { enabled: true, reference_snr_db: Some(40.0) };
        s.processing.range_pad = 4;
        s.processing.doppler_pad = 4;
        s.processing.sync_tuning.search_window = 48;
        s.processing.sync_tuning.group_symbols = 16;
        s.sync_eval = SyncEvalSpec {
            sto_samples: vec![23.0],
            cfo_hz: vec![1500.0],
            sfo_ppm: vec![0.0],
            n_runs: 2,
        };
        let report = run_sync_eval(&s, None).unwrap();
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert_eq!(row.runs_failed, 0);
        let delta_r = s.system.range_resolution_m();
        let delta_fd = s.system.doppler_resolution_hz();
        assert!(row.range_p90_abs_m < delta_r / 10.0, "range {}", row.range_p90_abs_m);
        assert!(row.doppler_p90_abs_hz < delta_fd / 10.0, "doppler {}", row.doppler_p90_abs_hz);
        assert!(row.cfo_bias_hz.abs() < delta_fd, "cfo bias {}", row.cfo_bias_hz);
    }

    #[test]
    fn quantizer_only_run_matches_the_converter_law() {
        let mut s = reference_only(256, 64);
        s.impairments.quantizer = Some(QuantSpec { n_bits: 12, headroom_db: 20.0 });
        s.processing.range_window = WindowKind::Rect;
        s.processing.doppler_window = WindowKind::Rect;
        let art = run_single(&s, 0, true).unwrap();
        let map = art.map.unwrap();
        let (pi, pj, peak) = map.argmax();
        let mut noise = 0.0;
        let mut count = 0usize;
        for ((i, j), &v) in map.p.indexed_iter() {
            if i == pi && j == pj {
                continue;
            }
            noise += v;
            count += 1;
        }
        let sqnr = lin_to_db(peak / (noise / count as f64));
        let want = 6.02 * 12.0 + 1.76 - 20.0 + lin_to_db((256 * 64) as f64);
        assert!(
            (sqnr - want).abs() < 1.0,
            "map SQNR {sqnr:.2} vs converter law {want:.2}"
        );
    }
}
