use serde::{Deserialize, Serialize};

use super::event::SimulationTrace;
use crate::tensor::Tensor;

/// Per-hidden-layer spiking rates and their neuron-weighted mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeRate {
    pub per_layer: Vec<f64>,
    pub overall: f64,
}

fn weighted(per_layer: Vec<f64>, sizes: &[usize]) -> SpikeRate {
    let total: usize = sizes.iter().sum();
    let overall = if total == 0 {
        0.0
    } else {
        per_layer.iter().zip(sizes).map(|(r, &s)| r * s as f64).sum::<f64>() / total as f64
    };
    SpikeRate { per_layer, overall }
}

/// Fraction of nonzero entries of each hidden layer's averaged output.
pub fn spiking_rate(hidden: &[&Tensor]) -> SpikeRate {
    let per: Vec<f64> = hidden
        .iter()
        .map(|t| {
            if t.is_empty() {
                0.0
            } else {
                t.data().iter().filter(|v| **v != 0.0).count() as f64 / t.len() as f64
            }
        })
        .collect();
    let sizes: Vec<usize> = hidden.iter().map(|t| t.len()).collect();
    weighted(per, &sizes)
}

/// Spikes emitted per neuron per step in each hidden layer: the density of
/// nonzero entries in the per-step outputs.
pub fn raster_rate(trace: &SimulationTrace) -> SpikeRate {
    let t = trace.timesteps as f64;
    let mut per = Vec::new();
    let mut sizes = Vec::new();
    for c in &trace.chains {
        let n = c.averaged.len();
        for (avg, &spikes) in c.averaged[..n - 1].iter().zip(&c.total_spikes) {
            per.push(if avg.is_empty() { 0.0 } else { spikes as f64 / (t * avg.len() as f64) });
            sizes.push(avg.len());
        }
    }
    weighted(per, &sizes)
}

/// [`expected_raster_rate`] of every hidden layer of a rate-mode pass.
pub fn rate_raster_rate(snn: &super::SpikingNetwork, out: &super::RateOutput) -> SpikeRate {
    let hidden: Vec<_> = out
        .chains
        .iter()
        .enumerate()
        .flat_map(|(c, tr)| {
            let n = tr.outputs.len();
            tr.outputs[..n - 1].iter().zip(snn.chain(c).iter().map(|l| l.thresholds))
        })
        .collect();
    expected_raster_rate(&hidden, snn.timesteps)
}

/// Raster density computed from rate-mode averaged outputs: a neuron whose
/// average is `s` fired `|s|·T/θ` times. Equal to [`raster_rate`] whenever
/// no neuron fires with both signs.
pub fn expected_raster_rate(hidden: &[(&Tensor, super::Thresholds)], timesteps: usize) -> SpikeRate {
    let tf = timesteps as f64;
    let per: Vec<f64> = hidden
        .iter()
        .map(|(t, th)| {
            if t.is_empty() {
                return 0.0;
            }
            let spikes: f64 = t
                .data()
                .iter()
                .map(|&v| if v >= 0.0 { (v * tf / th.pos).round() } else { (v * tf / th.neg).round() })
                .sum();
            spikes / (tf * t.len() as f64)
        })
        .collect();
    let sizes: Vec<usize> = hidden.iter().map(|(t, _)| t.len()).collect();
    weighted(per, &sizes)
}
