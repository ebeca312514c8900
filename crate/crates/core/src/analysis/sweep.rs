use serde::{Deserialize, Serialize};

use super::{conversion_metrics, AnalysisError};
use crate::calibration::{calibrate, CalibrationConfig};
use crate::network::{ann_output, NetworkParams, NetworkSpec, PointBatch};
use crate::snn::{fit_thresholds, propagate_rate, rate_raster_rate, spiking_rate, with_thresholds, ConversionConfig};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub timesteps: Vec<usize>,
    pub conversion: ConversionConfig,
    pub calibration: CalibrationConfig,
    /// Largest `T` included in the slope fit.
    pub slope_max_t: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            timesteps: vec![4, 8, 16, 32, 64, 128],
            conversion: ConversionConfig::default(),
            calibration: CalibrationConfig::default(),
            slope_max_t: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub timesteps: usize,
    /// RMS of `x^(n) - s̄^(n)` on the evaluation batch.
    pub error: f64,
    pub rel_error: Option<f64>,
    /// Relative L2 of the SNN against the reference, when given.
    pub reference_rel_l2: Option<f64>,
    pub spike_rate: f64,
    pub nonzero_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `log error` against `log T` over
    /// `T <= slope_max_t`.
    pub slope: Option<f64>,
}

/// Least-squares slope in log-log coordinates; `None` with fewer than two
/// usable points or no spread in `x`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Converts at each `T` with thresholds fitted once on `calib`, calibrates,
/// and measures the output error on `eval`.
pub fn sweep_timesteps(
    spec: &NetworkSpec,
    params: &NetworkParams,
    calib: &PointBatch,
    eval: &PointBatch,
    reference: Option<&Tensor>,
    cfg: &SweepConfig,
) -> Result<SweepResult, AnalysisError> {
    if cfg.timesteps.is_empty() || cfg.timesteps.windows(2).any(|w| w[0] >= w[1]) || cfg.timesteps[0] == 0 {
        return Err(AnalysisError::Invalid(format!("timesteps {:?} must be positive and strictly increasing", cfg.timesteps)));
    }
    let thresholds = fit_thresholds(spec, params, calib, cfg.conversion.quantile)?;
    let ann = ann_output(spec, params, eval)?;
    let mut rows = Vec::with_capacity(cfg.timesteps.len());
    for &t in &cfg.timesteps {
        let mut snn = with_thresholds(spec, params, &thresholds, t, cfg.conversion.readout);
        calibrate(spec, params, &mut snn, calib, &cfg.calibration)?;
        let rate = propagate_rate(&snn, eval)?;
        let m = conversion_metrics(&rate.output, &ann)?;
        let reference_rel_l2 = match reference {
            Some(r) => conversion_metrics(&rate.output, r)?.rel_l2,
            None => None,
        };
        let hidden = rate.hidden_outputs();
        rows.push(SweepRow {
            timesteps: t,
            error: m.l2,
            rel_error: m.rel_l2,
            reference_rel_l2,
            spike_rate: rate_raster_rate(&snn, &rate).overall,
            nonzero_fraction: spiking_rate(&hidden).overall,
        });
        log::info!("T = {t}: error {:.4e}", m.l2);
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.timesteps <= cfg.slope_max_t)
        .map(|r| (r.timesteps as f64, r.error))
        .collect();
    Ok(SweepResult {
        slope: fit_loglog_slope(&pts),
        rows,
    })
}
