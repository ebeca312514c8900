use serde::{Deserialize, Serialize};

use super::quantizer::{check_timesteps, Thresholds};
use super::SnnError;
use crate::network::{ann_chain_traces, LayerParams, NetworkParams, NetworkSpec, PointBatch};

/// How the last layer of each chain is read out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    /// Accumulated membrane divided by `T` (plain affine in rate mode).
    #[default]
    Membrane,
    /// Spiking output layer with thresholds enlarged to the output range.
    Quantized,
}

impl std::str::FromStr for Readout {
    type Err = SnnError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "membrane" | "membrane_average" => Ok(Self::Membrane),
            "quantized" => Ok(Self::Quantized),
            other => Err(SnnError::Structure(format!("unknown readout `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikingLayer {
    pub params: LayerParams,
    pub thresholds: Thresholds,
    pub is_output: bool,
}

impl SpikingLayer {
    /// Whether this layer passes through the staircase under `readout`.
    pub fn spikes(&self, readout: Readout) -> bool {
        !self.is_output || readout == Readout::Quantized
    }
}

/// A converted network. `layers` mirrors [`NetworkParams::layers`]:
/// separable subnetworks are stored back to back, each ending in an output
/// layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikingNetwork {
    pub spec: NetworkSpec,
    pub layers: Vec<SpikingLayer>,
    pub timesteps: usize,
    pub readout: Readout,
}

impl SpikingNetwork {
    pub fn validate(&self) -> Result<(), SnnError> {
        check_timesteps(self.timesteps)?;
        self.params().check(&self.spec)?;
        let per = self.spec.layers_per_subnet();
        for (i, l) in self.layers.iter().enumerate() {
            l.thresholds.validate()?;
            if l.is_output != ((i + 1) % per == 0) {
                return Err(SnnError::Structure(format!("layer {i} has the wrong output flag")));
            }
        }
        Ok(())
    }

    pub fn chain_count(&self) -> usize {
        self.spec.subnet_count()
    }

    pub fn chain(&self, c: usize) -> &[SpikingLayer] {
        let per = self.spec.layers_per_subnet();
        &self.layers[c * per..(c + 1) * per]
    }

    pub fn chain_mut(&mut self, c: usize) -> &mut [SpikingLayer] {
        let per = self.spec.layers_per_subnet();
        &mut self.layers[c * per..(c + 1) * per]
    }

    /// Current (possibly calibrated) weights and biases.
    pub fn params(&self) -> NetworkParams {
        NetworkParams {
            layers: self.layers.iter().map(|l| l.params.clone()).collect(),
        }
    }

    /// Checks that `params` has the same layer shapes.
    pub fn check_aligned(&self, spec: &NetworkSpec, params: &NetworkParams) -> Result<(), SnnError> {
        params.check(spec)?;
        if spec.subnet_widths() != self.spec.subnet_widths()
            || spec.subnet_count() != self.spec.subnet_count()
            || spec.kind != self.spec.kind
        {
            return Err(SnnError::Structure("ANN and SNN architectures differ".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConversionConfig {
    pub timesteps: usize,
    pub readout: Readout,
    /// Quantile of hidden activations used as threshold (1.0 = maximum).
    pub quantile: f64,
}

impl Default for ConversionConfig {
    fn default() -> Self {
        Self {
            timesteps: 32,
            readout: Readout::Membrane,
            quantile: 1.0,
        }
    }
}

pub const THRESHOLD_FLOOR: f64 = 1e-6;

fn quantile_of(mut v: Vec<f64>, q: f64) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    Some(v[idx])
}

fn floored(v: Option<f64>, layer: usize, side: &str) -> f64 {
    match v {
        Some(x) if x >= THRESHOLD_FLOOR => x,
        _ => {
            log::warn!("layer {layer}: no {side} activations, threshold floored at {THRESHOLD_FLOOR:e}");
            THRESHOLD_FLOOR
        }
    }
}

/// Layer-wise thresholds from the ANN's activations on `batch`.
///
/// Hidden layers use the `quantile` of positive outputs and of the
/// magnitudes of negative outputs. Output layers use `±max|z|`.
pub fn fit_thresholds(
    spec: &NetworkSpec,
    params: &NetworkParams,
    batch: &PointBatch,
    quantile: f64,
) -> Result<Vec<Thresholds>, SnnError> {
    if batch.is_empty() {
        return Err(SnnError::EmptyBatch);
    }
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(SnnError::Structure(format!("quantile {quantile} outside (0, 1]")));
    }
    let traces = ann_chain_traces(spec, params, batch)?;
    let per = spec.layers_per_subnet();
    let mut out = Vec::with_capacity(params.layers.len());
    for (c, tr) in traces.iter().enumerate() {
        for (l, (z, x)) in tr.pre.iter().zip(&tr.outputs).enumerate() {
            let index = c * per + l;
            if l + 1 == per {
                let m = floored(Some(z.max_abs()), index, "output");
                out.push(Thresholds { pos: m, neg: -m });
            } else {
                let pos: Vec<f64> = x.data().iter().copied().filter(|v| *v > 0.0).collect();
                let neg: Vec<f64> = x.data().iter().filter(|v| **v < 0.0).map(|v| -v).collect();
                out.push(Thresholds {
                    pos: floored(quantile_of(pos, quantile), index, "positive"),
                    neg: -floored(quantile_of(neg, quantile), index, "negative"),
                });
            }
        }
    }
    Ok(out)
}

/// Copies the ANN parameters into a spiking network with thresholds fitted
/// on `batch`.
pub fn convert(
    spec: &NetworkSpec,
    params: &NetworkParams,
    batch: &PointBatch,
    cfg: &ConversionConfig,
) -> Result<SpikingNetwork, SnnError> {
    check_timesteps(cfg.timesteps)?;
    let thresholds = fit_thresholds(spec, params, batch, cfg.quantile)?;
    Ok(with_thresholds(spec, params, &thresholds, cfg.timesteps, cfg.readout))
}

/// Builds a spiking network from explicit thresholds.
pub fn with_thresholds(
    spec: &NetworkSpec,
    params: &NetworkParams,
    thresholds: &[Thresholds],
    timesteps: usize,
    readout: Readout,
) -> SpikingNetwork {
    let per = spec.layers_per_subnet();
    SpikingNetwork {
        spec: spec.clone(),
        layers: params
            .layers
            .iter()
            .zip(thresholds)
            .enumerate()
            .map(|(i, (p, &t))| SpikingLayer {
                params: p.clone(),
                thresholds: t,
                is_output: (i + 1) % per == 0,
            })
            .collect(),
        timesteps,
        readout,
    }
}

