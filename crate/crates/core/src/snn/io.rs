use serde::{Deserialize, Serialize};
use std::path::Path;

use super::model::{Readout, SpikingLayer, SpikingNetwork};
use super::quantizer::Thresholds;
use super::SnnError;
use crate::network::{layers_from_docs, parse_versioned, read_text, write_text, LayerDoc, ModelIoError, NetworkSpec};

pub const SNN_FORMAT_VERSION: u32 = 1;

/// Provenance of a converted network.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SnnMeta {
    pub problem: String,
    pub calibration: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnnFile {
    pub network: SpikingNetwork,
    pub meta: SnnMeta,
}

#[derive(Serialize, Deserialize)]
struct ThresholdDoc {
    theta_pos: f64,
    theta_neg: f64,
    is_output: bool,
}

#[derive(Serialize)]
struct SnnDocOut<'a> {
    format_version: u32,
    spec: &'a NetworkSpec,
    params: Vec<LayerDoc>,
    timesteps: usize,
    readout: Readout,
    thresholds: Vec<ThresholdDoc>,
    meta: &'a SnnMeta,
}

#[derive(Deserialize)]
struct SnnDocIn {
    spec: NetworkSpec,
    params: Vec<LayerDoc>,
    timesteps: usize,
    readout: Readout,
    thresholds: Vec<ThresholdDoc>,
    meta: SnnMeta,
}

pub fn snn_to_string(file: &SnnFile) -> Result<String, SnnError> {
    let net = &file.network;
    let doc = SnnDocOut {
        format_version: SNN_FORMAT_VERSION,
        spec: &net.spec,
        params: net.layers.iter().map(|l| LayerDoc::from_layer(&l.params)).collect(),
        timesteps: net.timesteps,
        readout: net.readout,
        thresholds: net
            .layers
            .iter()
            .map(|l| ThresholdDoc {
                theta_pos: l.thresholds.pos,
                theta_neg: l.thresholds.neg,
                is_output: l.is_output,
            })
            .collect(),
        meta: &file.meta,
    };
    serde_json::to_string_pretty(&doc).map_err(|e| SnnError::Io(ModelIoError::Malformed(e.to_string())))
}

pub fn snn_from_str(text: &str) -> Result<SnnFile, SnnError> {
    let doc: SnnDocIn = parse_versioned(text, SNN_FORMAT_VERSION)?;
    let params = layers_from_docs(&doc.spec, &doc.params)?;
    if doc.thresholds.len() != params.layers.len() {
        return Err(SnnError::Io(ModelIoError::Shape(format!(
            "{} threshold entries for {} layers",
            doc.thresholds.len(),
            params.layers.len()
        ))));
    }
    let network = SpikingNetwork {
        spec: doc.spec,
        layers: params
            .layers
            .into_iter()
            .zip(doc.thresholds)
            .map(|(p, t)| SpikingLayer {
                params: p,
                thresholds: Thresholds {
                    pos: t.theta_pos,
                    neg: t.theta_neg,
                },
                is_output: t.is_output,
            })
            .collect(),
        timesteps: doc.timesteps,
        readout: doc.readout,
    };
    network.validate()?;
    Ok(SnnFile { network, meta: doc.meta })
}

pub fn save_snn(file: &SnnFile, path: &Path) -> Result<(), SnnError> {
    Ok(write_text(path, &snn_to_string(file)?)?)
}

pub fn load_snn(path: &Path) -> Result<SnnFile, SnnError> {
    snn_from_str(&read_text(path)?)
}
