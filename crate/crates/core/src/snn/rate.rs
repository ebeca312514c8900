use super::model::{Readout, SpikingLayer, SpikingNetwork};
use super::quantizer::quantize;
use super::SnnError;
use crate::network::{affine, assemble_output, chain_inputs, ForwardTrace, PointBatch};
use crate::tensor::Tensor;

/// Rate-mode pass through one chain: `z = Ŵ s̄ + b̂`, then the staircase on
/// spiking layers. `outputs[l]` is `s̄^(l)`.
pub fn propagate_chain(
    layers: &[SpikingLayer],
    timesteps: usize,
    readout: Readout,
    input: &Tensor,
) -> Result<ForwardTrace, SnnError> {
    let mut pre = Vec::with_capacity(layers.len());
    let mut outputs = Vec::with_capacity(layers.len());
    let mut s = input.clone();
    for layer in layers {
        if s.cols() != layer.params.fan_in() {
            return Err(SnnError::Network(crate::network::NetworkError::Dimension {
                expected: layer.params.fan_in(),
                actual: s.cols(),
            }));
        }
        let z = affine(&s, &layer.params)?;
        s = if layer.spikes(readout) {
            let th = layer.thresholds;
            z.map(|v| quantize(v, timesteps, th))
        } else {
            z.clone()
        };
        pre.push(z);
        outputs.push(s.clone());
    }
    Ok(ForwardTrace {
        input: input.clone(),
        pre,
        outputs,
    })
}

/// Averaged output and per-chain layer traces.
#[derive(Debug, Clone)]
pub struct RateOutput {
    pub output: Tensor,
    pub chains: Vec<ForwardTrace>,
}

impl RateOutput {
    /// Averaged outputs of every hidden (non-output) layer.
    pub fn hidden_outputs(&self) -> Vec<&Tensor> {
        self.chains
            .iter()
            .flat_map(|c| {
                let n = c.outputs.len();
                c.outputs[..n - 1].iter()
            })
            .collect()
    }
}

/// Analytic SNN inference by composing the staircase layer by layer.
pub fn propagate_rate(snn: &SpikingNetwork, batch: &PointBatch) -> Result<RateOutput, SnnError> {
    snn.validate()?;
    if batch.is_empty() {
        return Err(SnnError::EmptyBatch);
    }
    let inputs = chain_inputs(&snn.spec, batch)?;
    let chains = inputs
        .iter()
        .enumerate()
        .map(|(c, x)| propagate_chain(snn.chain(c), snn.timesteps, snn.readout, x))
        .collect::<Result<Vec<_>, _>>()?;
    let outs: Vec<Tensor> = chains.iter().map(|t| t.output().clone()).collect();
    let output = assemble_output(&snn.spec, batch, &outs)?;
    Ok(RateOutput { output, chains })
}

/// Rate-mode output on raw points `[n, d]`.
pub fn snn_evaluate_points(snn: &SpikingNetwork, points: &Tensor) -> Result<Tensor, SnnError> {
    Ok(propagate_rate(snn, &PointBatch::Scattered(points.clone()))?.output)
}
