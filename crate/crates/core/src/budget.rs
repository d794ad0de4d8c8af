//! Closed-form sensing performance: resolution and ambiguity figures,
//! quantizer noise at the map level, and the bistatic power budget with its
//! maximum-range solutions.

use crate::channel::LinkBudget;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::units::{db_to_lin, dbm_to_watts, watts_to_dbm, C0};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Resolution, ambiguity, and gain figures of one waveform numerology.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct KpiTable {
    pub delta_r_m: f64,
    pub r_max_ua_m: f64,
    pub r_max_isi_m: f64,
    pub delta_fd_hz: f64,
    pub fd_max_ua_hz: f64,
    pub fd_max_ici_hz: f64,
    pub gp_db: f64,
}

/// Evaluate the closed-form figures for a waveform configuration.
pub fn kpi_table(cfg: &SystemConfig) -> Result<KpiTable> {
    cfg.validate()?;
    Ok(KpiTable {
        delta_r_m: cfg.range_resolution_m(),
        r_max_ua_m: cfg.unambiguous_range_m(),
        r_max_isi_m: cfg.isi_free_range_m(),
        delta_fd_hz: cfg.doppler_resolution_hz(),
        fd_max_ua_hz: cfg.unambiguous_doppler_hz(),
        fd_max_ici_hz: cfg.ici_free_doppler_hz(),
        gp_db: cfg.processing_gain_db(),
    })
}

/// Map-level quantization noise figure: converter law plus oversampling
/// spread plus coherent integration, less the clipping headroom backed off
/// from full scale.
pub fn sqnr_periodogram(
    n_bits: u32,
    fs_hz: f64,
    bandwidth_hz: f64,
    headroom_db: f64,
    gp_db: f64,
) -> f64 {
    6.02 * n_bits as f64 + 1.76 + 10.0 * (fs_hz / bandwidth_hz).log10() + gp_db - headroom_db
}

/// Interference floor entering the maximum-range budget, expressed in dB
/// above thermal noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InterferenceMode {
    /// Thermal noise only.
    None,
    /// Average leakage floor of the strongest return.
    MeanInterference { db_over_awgn: f64 },
    /// Strongest single artifact cell.
    ArtifactLevel { db_over_awgn: f64 },
}

impl InterferenceMode {
    /// Interference power for a given thermal floor.
    pub fn interference_w(&self, awgn_w: f64) -> f64 {
        match *self {
            InterferenceMode::None => 0.0,
            InterferenceMode::MeanInterference { db_over_awgn }
            | InterferenceMode::ArtifactLevel { db_over_awgn } => awgn_w * db_to_lin(db_over_awgn),
        }
    }
}

/// Largest bistatic range parameter sqrt(R_tx * R_rx) at which a target of
/// the given cross-section still clears the detection threshold over the
/// selected floor.
pub fn max_range_param(
    budget: &LinkBudget,
    sigma_m2: f64,
    gp_linear: f64,
    bandwidth_hz: f64,
    carrier_freq_hz: f64,
    i_mode: InterferenceMode,
) -> Result<f64> {
    if budget.sinr_min_db <= 0.0 {
        return Err(Error::config("detection threshold must be positive"));
    }
    if sigma_m2 <= 0.0 || gp_linear <= 0.0 || bandwidth_hz <= 0.0 || carrier_freq_hz <= 0.0 {
        return Err(Error::config("budget inputs must be positive"));
    }
    let awgn_w = budget.noise_power_w(bandwidth_hz);
    let floor_w = awgn_w + i_mode.interference_w(awgn_w);
    if floor_w <= 0.0 {
        return Err(Error::config("noise floor must be positive"));
    }
    let lambda = C0 / carrier_freq_hz;
    let numerator = dbm_to_watts(budget.p_tx_sensing_dbm)
        * db_to_lin(budget.g_tx_dbi)
        * db_to_lin(budget.g_rx_dbi)
        * sigma_m2
        * lambda
        * lambda
        * gp_linear;
    let denominator = (4.0 * PI).powi(3) * floor_w * db_to_lin(budget.sinr_min_db);
    Ok((numerator / denominator).powf(0.25))
}

/// One radar cross-section class on the budget plot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RcsClass {
    pub label: String,
    pub sigma_m2: f64,
}

/// Axis, level lines, and construction parameters of the power-versus-range
/// plot.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BudgetCurveSpec {
    pub rho_min_m: f64,
    pub rho_max_m: f64,
    pub n_points: usize,
    /// One-way leg length of the direct reference link.
    pub reference_distance_m: f64,
    /// Average leakage suppression below the reference peak.
    pub mean_sir_db: f64,
    /// Strongest-artifact suppression below the reference peak.
    pub min_sir_db: f64,
    /// Peak power loss applied to the target curve.
    pub pplr_db: f64,
    pub classes: Vec<RcsClass>,
}

impl Default for BudgetCurveSpec {
    fn default() -> Self {
        BudgetCurveSpec {
            rho_min_m: 100.0,
            rho_max_m: 100_000.0,
            n_points: 512,
            reference_distance_m: 300.0,
            mean_sir_db: 91.60,
            min_sir_db: 56.92,
            pplr_db: 0.0,
            classes: vec![
                RcsClass { label: "drone".into(), sigma_m2: 0.1 },
                RcsClass { label: "pedestrian".into(), sigma_m2: 1.0 },
                RcsClass { label: "car".into(), sigma_m2: 100.0 },
            ],
        }
    }
}

impl BudgetCurveSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_min_m > 0.0 && self.rho_max_m > self.rho_min_m) {
            return Err(Error::config("range axis must be positive and increasing"));
        }
        if self.n_points < 2 {
            return Err(Error::config("range axis needs at least two points"));
        }
        if self.reference_distance_m <= 0.0 {
            return Err(Error::config("reference distance must be positive"));
        }
        if self.classes.is_empty() {
            return Err(Error::config("at least one cross-section class is required"));
        }
        if self.classes.iter().any(|c| c.sigma_m2 <= 0.0) {
            return Err(Error::config("cross sections must be positive"));
        }
        Ok(())
    }
}

/// Map-level power lines versus the bistatic range parameter: one falling
/// curve per cross-section class plus the four horizontal floors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BudgetCurve {
    pub rho_m: Vec<f64>,
    pub classes: Vec<RcsClass>,
    /// Indexed `[class][rho]`, in dBm.
    pub target_power_dbm: Vec<Vec<f64>>,
    pub reference_peak_dbm: f64,
    pub awgn_dbm: f64,
    pub mean_interference_dbm: f64,
    pub artifact_dbm: f64,
    pub sinr_min_db: f64,
    gp_db: f64,
    target_const_dbm: f64,
}

/// Target peak level at range parameter `rho`, for a unit cross-section
/// constant `target_const_dbm` that already folds in transmit power, gains,
/// wavelength, processing gain, and peak loss.
fn target_level_dbm(target_const_dbm: f64, sigma_m2: f64, rho_m: f64) -> f64 {
    target_const_dbm + 10.0 * sigma_m2.log10() - 40.0 * rho_m.log10()
}

/// Build the power-versus-range plot for a waveform and link budget.
pub fn budget_curve(
    cfg: &SystemConfig,
    budget: &LinkBudget,
    spec: &BudgetCurveSpec,
) -> Result<BudgetCurve> {
    cfg.validate()?;
    spec.validate()?;
    let lambda = cfg.wavelength_m();
    let gp_db = cfg.processing_gain_db();
    let awgn_dbm = watts_to_dbm(budget.noise_power_w(cfg.bandwidth_hz()));

    let fspl_db = 20.0 * (4.0 * PI * spec.reference_distance_m / lambda).log10();
    let reference_peak_dbm =
        budget.p_tx_reference_dbm + budget.g_tx_dbi + budget.g_rx_dbi - fspl_db + gp_db;

    let target_const_dbm = budget.p_tx_sensing_dbm
        + budget.g_tx_dbi
        + budget.g_rx_dbi
        + 20.0 * lambda.log10()
        - 30.0 * (4.0 * PI).log10()
        + gp_db
        + spec.pplr_db;

    let log_lo = spec.rho_min_m.log10();
    let log_hi = spec.rho_max_m.log10();
    let rho_m: Vec<f64> = (0..spec.n_points)
        .map(|i| 10f64.powf(log_lo + (log_hi - log_lo) * i as f64 / (spec.n_points - 1) as f64))
        .collect();
    let target_power_dbm = spec
        .classes
        .iter()
        .map(|c| {
            rho_m
                .iter()
                .map(|&rho| target_level_dbm(target_const_dbm, c.sigma_m2, rho))
                .collect()
        })
        .collect();

    Ok(BudgetCurve {
        rho_m,
        classes: spec.classes.clone(),
        target_power_dbm,
        reference_peak_dbm,
        awgn_dbm,
        mean_interference_dbm: reference_peak_dbm - spec.mean_sir_db,
        artifact_dbm: reference_peak_dbm - spec.min_sir_db,
        sinr_min_db: budget.sinr_min_db,
        gp_db,
        target_const_dbm,
    })
}

impl BudgetCurve {
    /// Exact curve level for one class at an arbitrary range parameter.
    pub fn target_level_dbm(&self, class_idx: usize, rho_m: f64) -> Result<f64> {
        let class = self
            .classes
            .get(class_idx)
            .ok_or_else(|| Error::dimension("class index out of range"))?;
        Ok(target_level_dbm(self.target_const_dbm, class.sigma_m2, rho_m))
    }

    pub fn gp_db(&self) -> f64 {
        self.gp_db
    }
}

/// Floor against which a maximum range is solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorKind {
    Awgn,
    MeanInterference,
    Artifact,
}

/// One solved crossing of a target curve with a floor-plus-threshold line.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RhoIntersection {
    pub class_label: String,
    pub sigma_m2: f64,
    pub floor: FloorKind,
    pub rho_max_m: f64,
    pub level_dbm: f64,
}

/// Solve, in closed form, where each class curve crosses each floor raised
/// by the detection threshold. The mean-interference floor is taken on top
/// of thermal noise; the artifact floor stands alone.
pub fn solve_rho_intersections(curve: &BudgetCurve, sinr_min_db: f64) -> Vec<RhoIntersection> {
    let awgn_w = dbm_to_watts(curve.awgn_dbm);
    let mean_w = dbm_to_watts(curve.mean_interference_dbm);
    let floors = [
        (FloorKind::Awgn, curve.awgn_dbm),
        (FloorKind::MeanInterference, watts_to_dbm(awgn_w + mean_w)),
        (FloorKind::Artifact, curve.artifact_dbm),
    ];
    let mut out = Vec::with_capacity(curve.classes.len() * floors.len());
    for class in &curve.classes {
        for &(kind, floor_dbm) in &floors {
            let level_dbm = floor_dbm + sinr_min_db;
            let rho = 10f64.powf(
                (curve.target_const_dbm + 10.0 * class.sigma_m2.log10() - level_dbm) / 40.0,
            );
            out.push(RhoIntersection {
                class_label: class.label.clone(),
                sigma_m2: class.sigma_m2,
                floor: kind,
                rho_max_m: rho,
                level_dbm,
            });
        }
    }
    out
}
