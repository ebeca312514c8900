use super::model::SpikingNetwork;
use super::quantizer::LEVEL_GUARD;
use super::SnnError;
use crate::network::{assemble_output, chain_inputs, PointBatch};
use crate::tensor::{matmul, Tensor};

/// Event-driven simulation record of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    /// `s̄^(l)` per layer, `[n, width]`.
    pub averaged: Vec<Tensor>,
    /// Positive and negative spike counts per neuron, `[n * width]` per
    /// layer (empty for a membrane readout layer).
    pub positive_spikes: Vec<Vec<u32>>,
    pub negative_spikes: Vec<Vec<u32>>,
    /// Total number of spikes (either sign) emitted per layer.
    pub total_spikes: Vec<u64>,
    /// Per-step spikes in `{-1, 0, 1}`, flattened `[step][sample][neuron]`,
    /// when requested.
    pub raster: Option<Vec<Vec<i8>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub output: Tensor,
    pub timesteps: usize,
    pub chains: Vec<ChainTrace>,
}

impl SimulationTrace {
    /// Averaged outputs of every hidden layer.
    pub fn hidden_outputs(&self) -> Vec<&Tensor> {
        self.chains
            .iter()
            .flat_map(|c| c.averaged[..c.averaged.len() - 1].iter())
            .collect()
    }
}

/// Explicit `T`-step integrate-and-fire simulation.
///
/// Every step each layer integrates `Ŵ·signal + b̂`, where the first layer's
/// signal is the constant input and a hidden neuron's signal is `θ_pos`
/// or `θ_neg` when it spikes and zero otherwise. A neuron fires at most once
/// per step and resets by subtraction. The averaged output is the summed
/// signal divided by `T`; a membrane readout reports the accumulated
/// membrane divided by `T`.
pub fn simulate_event(snn: &SpikingNetwork, batch: &PointBatch, record_raster: bool) -> Result<SimulationTrace, SnnError> {
    snn.validate()?;
    if batch.is_empty() {
        return Err(SnnError::EmptyBatch);
    }
    let t_steps = snn.timesteps;
    let inputs = chain_inputs(&snn.spec, batch)?;
    let mut chains = Vec::with_capacity(inputs.len());
    let mut chain_outputs = Vec::with_capacity(inputs.len());
    let per = snn.spec.layers_per_subnet();
    for (c, x) in inputs.iter().enumerate() {
        let layers = snn.chain(c);
        let n = x.rows();
        let mut membranes: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; n * l.params.fan_out()]).collect();
        let mut pos_counts: Vec<Vec<u32>> = layers.iter().map(|l| vec![0; n * l.params.fan_out()]).collect();
        let mut neg_counts = pos_counts.clone();
        let mut total = vec![0u64; layers.len()];
        let mut raster: Vec<Vec<i8>> = vec![Vec::new(); layers.len()];
        for step in 0..t_steps {
            let mut signal = x.clone();
            for (li, layer) in layers.iter().enumerate() {
                let w = layer.params.fan_out();
                let mut drive = matmul(&signal, false, &layer.params.weight, true)?;
                let b = layer.params.bias.data();
                let mem = &mut membranes[li];
                for (row, mrow) in drive.data_mut().chunks_mut(w).zip(mem.chunks_mut(w)) {
                    for ((d, m), bb) in row.iter_mut().zip(mrow.iter_mut()).zip(b) {
                        *m += *d + bb;
                    }
                }
                if let Some(bad) = mem.iter().position(|v| !v.is_finite()) {
                    return Err(SnnError::NonFiniteMembrane {
                        layer: c * per + li,
                        step,
                        neuron: bad % w,
                    });
                }
                if !layer.spikes(snn.readout) {
                    signal = drive;
                    continue;
                }
                let th = layer.thresholds;
                let (up, down) = (th.pos * (1.0 - LEVEL_GUARD), th.neg * (1.0 - LEVEL_GUARD));
                let out = drive.data_mut();
                let (pc, nc) = (&mut pos_counts[li], &mut neg_counts[li]);
                let mut step_raster = if record_raster { vec![0i8; n * w] } else { Vec::new() };
                for k in 0..n * w {
                    let m = &mut mem[k];
                    out[k] = if *m >= up {
                        *m -= th.pos;
                        pc[k] += 1;
                        total[li] += 1;
                        if record_raster {
                            step_raster[k] = 1;
                        }
                        th.pos
                    } else if *m <= down {
                        *m -= th.neg;
                        nc[k] += 1;
                        total[li] += 1;
                        if record_raster {
                            step_raster[k] = -1;
                        }
                        th.neg
                    } else {
                        0.0
                    };
                }
                if record_raster {
                    raster[li].extend(step_raster);
                }
                signal = drive;
            }
        }
        let tf = t_steps as f64;
        let averaged = layers
            .iter()
            .enumerate()
            .map(|(li, layer)| {
                let w = layer.params.fan_out();
                let data = if layer.spikes(snn.readout) {
                    let th = layer.thresholds;
                    pos_counts[li]
                        .iter()
                        .zip(&neg_counts[li])
                        .map(|(&p, &q)| (p as f64 * th.pos + q as f64 * th.neg) / tf)
                        .collect()
                } else {
                    membranes[li].iter().map(|m| m / tf).collect()
                };
                Tensor::new(vec![n, w], data)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let keep = |counts: Vec<Vec<u32>>| -> Vec<Vec<u32>> {
            layers
                .iter()
                .zip(counts)
                .map(|(l, k)| if l.spikes(snn.readout) { k } else { Vec::new() })
                .collect()
        };
        let positive_spikes = keep(pos_counts);
        let negative_spikes = keep(neg_counts);
        chain_outputs.push(averaged.last().expect("non-empty chain").clone());
        chains.push(ChainTrace {
            averaged,
            positive_spikes,
            negative_spikes,
            total_spikes: total,
            raster: record_raster.then_some(raster),
        });
    }
    let output = assemble_output(&snn.spec, batch, &chain_outputs)?;
    Ok(SimulationTrace {
        output,
        timesteps: t_steps,
        chains,
    })
}

