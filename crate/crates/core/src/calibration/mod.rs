//! Layer-wise conversion error decomposition and calibration of converted
//! networks (bias-only "light" and weight-and-bias "advanced" modes).

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::network::{
    affine, ann_chain_traces, ann_output, chain_inputs, Activation, LayerParams, NetworkError, NetworkParams,
    NetworkSpec, PointBatch,
};
use crate::optim::{adam_step, AdamConfig, AdamState, OptimError};
use crate::snn::{quantize, propagate_rate, Readout, SnnError, SpikingLayer, SpikingNetwork};
use crate::table::{fmt_f, Table};
use crate::tensor::{matmul, Tensor, TensorError};


#[derive(Debug, thiserror::Error)]
pub enum CalibrationError {
    #[error("empty calibration batch")]
    EmptyBatch,
    #[error("invalid calibration config: {0}")]
    Config(String),
    #[error(transparent)]
    Snn(#[from] SnnError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationMode {
    #[default]
    None,
    Light,
    Advanced,
}

impl CalibrationMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Light => "light",
            Self::Advanced => "advanced",
        }
    }
}

impl fmt::Display for CalibrationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CalibrationMode {
    type Err = CalibrationError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "light" => Ok(Self::Light),
            "advanced" => Ok(Self::Advanced),
            other => Err(CalibrationError::Config(format!("unknown calibration mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub mode: CalibrationMode,
    /// Rows drawn per advanced step; `0` uses the full batch.
    pub batch_size: usize,
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            mode: CalibrationMode::None,
            batch_size: 0,
            steps: 2000,
            lr: 1e-3,
            seed: 0,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        if self.mode == CalibrationMode::Advanced && self.steps == 0 {
            return Err(CalibrationError::Config("advanced calibration needs steps > 0".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(CalibrationError::Config(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }
}

/// Root mean over samples of the squared row norm.
pub fn rms_norm(t: &Tensor) -> f64 {
    if t.rows() == 0 {
        0.0
    } else {
        (t.sum_sq() / t.rows() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerErrors {
    /// `x^(l) - s̄^(l)`.
    pub e: Tensor,
    /// `f(W x^(l-1) + b) - f(W s̄^(l-1) + b)`.
    pub e_r: Tensor,
    /// `f(W s̄^(l-1) + b) - Q(Ŵ s̄^(l-1) + b̂)`.
    pub e_c: Tensor,
}

impl LayerErrors {
    pub fn norms(&self) -> [f64; 3] {
        [rms_norm(&self.e), rms_norm(&self.e_r), rms_norm(&self.e_c)]
    }
}

/// Per-chain, per-layer error split. Output layers use the identity for
/// `f`, and `Q` is the staircase only on spiking layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDecomposition {
    pub chains: Vec<Vec<LayerErrors>>,
}

fn layer_activation(spec: &NetworkSpec, is_output: bool) -> Activation {
    if is_output {
        Activation::Linear
    } else {
        spec.activation
    }
}

fn snn_layer_output(layer: &SpikingLayer, timesteps: usize, readout: Readout, s: &Tensor) -> Result<Tensor, CalibrationError> {
    let z = affine(s, &layer.params)?;
    Ok(if layer.spikes(readout) {
        crate::snn::clip_floor_tensor(&z, timesteps, layer.thresholds)?
    } else {
        z
    })
}

fn check_inputs(
    spec: &NetworkSpec,
    params: &NetworkParams,
    snn: &SpikingNetwork,
    batch: &PointBatch,
) -> Result<(), CalibrationError> {
    if batch.is_empty() {
        return Err(CalibrationError::EmptyBatch);
    }
    snn.validate()?;
    snn.check_aligned(spec, params)?;
    Ok(())
}

pub fn decompose_error(
    spec: &NetworkSpec,
    params: &NetworkParams,
    snn: &SpikingNetwork,
    batch: &PointBatch,
) -> Result<ErrorDecomposition, CalibrationError> {
    check_inputs(spec, params, snn, batch)?;
    let traces = ann_chain_traces(spec, params, batch)?;
    let mut chains = Vec::with_capacity(traces.len());
    for (c, tr) in traces.iter().enumerate() {
        let ann = params.subnet(spec, c);
        let mut s = tr.input.clone();
        let mut layers = Vec::with_capacity(ann.len());
        for (l, (al, sl)) in ann.iter().zip(snn.chain(c)).enumerate() {
            let f = layer_activation(spec, sl.is_output);
            let x = &tr.outputs[l];
            let a = affine(&s, al)?.map(|v| f.apply(v));
            let next = snn_layer_output(sl, snn.timesteps, snn.readout, &s)?;
            layers.push(LayerErrors {
                e: x.zip_map(&next, |p, q| p - q),
                e_r: x.zip_map(&a, |p, q| p - q),
                e_c: a.zip_map(&next, |p, q| p - q),
            });
            s = next;
        }
        chains.push(layers);
    }
    Ok(ErrorDecomposition { chains })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub subnet: usize,
    pub layer: usize,
    pub pre_ec_norm: f64,
    pub post_ec_norm: f64,
    /// The optimized layer did not improve and was restored.
    pub reverted: bool,
    /// The inner optimization produced non-finite values.
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub mode: CalibrationMode,
    pub layers: Vec<LayerReport>,
    /// RMS difference between ANN and SNN outputs on the batch.
    pub total_pre: f64,
    pub total_post: f64,
    pub seconds: f64,
}

impl CalibrationReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["layer", "pre_ec_norm", "post_ec_norm", "mode", "subnet", "reverted"]);
        for l in &self.layers {
            t.push(vec![
                l.layer.to_string(),
                fmt_f(l.pre_ec_norm),
                fmt_f(l.post_ec_norm),
                self.mode.to_string(),
                l.subnet.to_string(),
                l.reverted.to_string(),
            ]);
        }
        t
    }
}

fn output_rms(spec: &NetworkSpec, params: &NetworkParams, snn: &SpikingNetwork, batch: &PointBatch) -> Result<f64, CalibrationError> {
    let a = ann_output(spec, params, batch)?;
    let s = propagate_rate(snn, batch)?.output;
    Ok(rms_norm(&a.zip_map(&s, |p, q| p - q)))
}

/// Calibrates `snn` in place layer by layer, first to last, recomputing the
/// averaged input of each layer from the already calibrated layers below.
/// The ANN is never modified.
pub fn calibrate(
    spec: &NetworkSpec,
    params: &NetworkParams,
    snn: &mut SpikingNetwork,
    batch: &PointBatch,
    cfg: &CalibrationConfig,
) -> Result<CalibrationReport, CalibrationError> {
    cfg.validate()?;
    check_inputs(spec, params, snn, batch)?;
    let start = Instant::now();
    let total_pre = output_rms(spec, params, snn, batch)?;
    let traces = ann_chain_traces(spec, params, batch)?;
    let inputs = chain_inputs(spec, batch)?;
    let mut reports = Vec::new();
    let (timesteps, readout) = (snn.timesteps, snn.readout);
    for (c, tr) in traces.iter().enumerate() {
        let ann = params.subnet(spec, c).to_vec();
        let mut s = inputs[c].clone();
        for l in 0..ann.len() {
            let layer = &mut snn.chain_mut(c)[l];
            let f = layer_activation(spec, layer.is_output);
            let local_target = affine(&s, &ann[l])?.map(|v| f.apply(v));
            let total_target = &tr.outputs[l];
            let ec = |lp: &LayerParams| -> Result<f64, CalibrationError> {
                let probe = SpikingLayer {
                    params: lp.clone(),
                    ..layer.clone()
                };
                let out = snn_layer_output(&probe, timesteps, readout, &s)?;
                Ok(rms_norm(&local_target.zip_map(&out, |p, q| p - q)))
            };
            let pre = ec(&layer.params)?;
            let mut report = LayerReport {
                subnet: c,
                layer: l,
                pre_ec_norm: pre,
                post_ec_norm: pre,
                reverted: false,
                diverged: false,
            };
            match cfg.mode {
                CalibrationMode::None => {}
                CalibrationMode::Light => {
                    let out = snn_layer_output(layer, timesteps, readout, &s)?;
                    let diff = total_target.zip_map(&out, |p, q| p - q);
                    let n = diff.rows() as f64;
                    let w = diff.cols();
                    let mut shift = vec![0.0; w];
                    for row in diff.data().chunks(w) {
                        for (acc, v) in shift.iter_mut().zip(row) {
                            *acc += v / n;
                        }
                    }
                    let mut cand = layer.params.clone();
                    for (b, d) in cand.bias.data_mut().iter_mut().zip(&shift) {
                        *b += d;
                    }
                    report.post_ec_norm = ec(&cand)?;
                    layer.params = cand;
                }
                CalibrationMode::Advanced => {
                    if pre > 0.0 {
                        let (best, post, diverged) = advanced_layer(layer, timesteps, readout, &s, total_target, pre, &ec, cfg, c, l)?;
                        report.diverged = diverged;
                        match best {
                            Some(p) => {
                                layer.params = p;
                                report.post_ec_norm = post;
                            }
                            None => report.reverted = true,
                        }
                    }
                }
            }
            reports.push(report);
            s = snn_layer_output(&snn.chain(c)[l], timesteps, readout, &s)?;
        }
    }
    let total_post = output_rms(spec, params, snn, batch)?;
    Ok(CalibrationReport {
        mode: cfg.mode,
        layers: reports,
        total_pre,
        total_post,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn calibrate_light(
    spec: &NetworkSpec,
    params: &NetworkParams,
    snn: &mut SpikingNetwork,
    batch: &PointBatch,
) -> Result<CalibrationReport, CalibrationError> {
    let cfg = CalibrationConfig {
        mode: CalibrationMode::Light,
        ..Default::default()
    };
    calibrate(spec, params, snn, batch, &cfg)
}

pub fn calibrate_advanced(
    spec: &NetworkSpec,
    params: &NetworkParams,
    snn: &mut SpikingNetwork,
    batch: &PointBatch,
    cfg: &CalibrationConfig,
) -> Result<CalibrationReport, CalibrationError> {
    let cfg = CalibrationConfig {
        mode: CalibrationMode::Advanced,
        ..*cfg
    };
    calibrate(spec, params, snn, batch, &cfg)
}

/// Adam on `‖x^(l) - Q(Ŵ s̄ + b̂)‖²` with a straight-through gradient for
/// the staircase (identity inside the thresholds, zero outside). Returns the
/// iterate with the lowest objective among those whose local error does not
/// exceed `pre`, or `None` when no step qualifies.
#[allow(clippy::too_many_arguments)]
fn advanced_layer(
    layer: &SpikingLayer,
    timesteps: usize,
    readout: Readout,
    s: &Tensor,
    target: &Tensor,
    pre: f64,
    ec: &dyn Fn(&LayerParams) -> Result<f64, CalibrationError>,
    cfg: &CalibrationConfig,
    chain: usize,
    index: usize,
) -> Result<(Option<LayerParams>, f64, bool), CalibrationError> {
    let n = s.rows();
    let spikes = layer.spikes(readout);
    let th = layer.thresholds;
    let mut tensors = vec![layer.params.weight.clone(), layer.params.bias.clone()];
    let mut state = AdamState::new(
        &tensors,
        AdamConfig {
            lr: cfg.lr,
            ..Default::default()
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((chain as u64) << 32) ^ index as u64);
    let objective = |lp: &LayerParams, rows: &Tensor, tgt: &Tensor| -> Result<(f64, Tensor, Tensor), CalibrationError> {
        let z = affine(rows, lp)?;
        let q = if spikes { z.map(|v| quantize(v, timesteps, th)) } else { z.clone() };
        let m = rows.rows() as f64;
        let mut loss = 0.0;
        let g = q.zip_map(tgt, |a, b| a - b);
        let mut grad_z = g.clone();
        for ((gz, gv), zv) in grad_z.data_mut().iter_mut().zip(g.data()).zip(z.data()) {
            loss += gv * gv / m;
            let pass = !spikes || (*zv >= th.neg && *zv <= th.pos);
            *gz = if pass { 2.0 * gv / m } else { 0.0 };
        }
        let gw = matmul(&grad_z, true, rows, false)?;
        let gb = Tensor::new(vec![grad_z.cols()], (0..grad_z.cols()).map(|j| (0..grad_z.rows()).map(|i| grad_z.get2(i, j)).sum()).collect())?;
        Ok((loss, gw, gb))
    };
    let full_loss = |lp: &LayerParams| objective(lp, s, target).map(|r| r.0);
    let mut best: Option<LayerParams> = None;
    let mut best_loss = full_loss(&layer.params)?;
    let mut best_ec = pre;
    let mut diverged = false;
    let use_sub = cfg.batch_size > 0 && cfg.batch_size < n;
    for _ in 0..cfg.steps {
        let current = LayerParams {
            weight: tensors[0].clone(),
            bias: tensors[1].clone(),
        };
        let (_, gw, gb) = if use_sub {
            let idx = sample(&mut rng, n, cfg.batch_size).into_vec();
            objective(&current, &s.select_rows(&idx), &target.select_rows(&idx))?
        } else {
            objective(&current, s, target)?
        };
        adam_step(&mut tensors, &[gw, gb], &mut state)?;
        if tensors.iter().any(|t| t.data().iter().any(|v| !v.is_finite())) {
            diverged = true;
            log::warn!("advanced calibration diverged in subnet {chain} layer {index}; layer restored");
            break;
        }
        let cand = LayerParams {
            weight: tensors[0].clone(),
            bias: tensors[1].clone(),
        };
        let loss = full_loss(&cand)?;
        if loss < best_loss {
            let e = ec(&cand)?;
            if e <= pre {
                best_loss = loss;
                best_ec = e;
                best = Some(cand);
            }
        }
    }
    Ok((best, best_ec, diverged))
}
