use crate::autodiff::Jet2;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::NetworkError;

/// Hidden-layer nonlinearity. The last layer of every network is affine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Sin,
    Linear,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Self::Tanh => z.tanh(),
            Self::Relu => z.max(0.0),
            Self::Sin => z.sin(),
            Self::Linear => z,
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Self::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Self::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Sin => z.cos(),
            Self::Linear => 1.0,
        }
    }

    /// `None` where the second derivative does not exist (the ReLU kink).
    pub fn second_derivative(self, z: f64) -> Option<f64> {
        match self {
            Self::Tanh => {
                let t = z.tanh();
                Some(-2.0 * t * (1.0 - t * t))
            }
            Self::Relu => (z != 0.0).then_some(0.0),
            Self::Sin => Some(-z.sin()),
            Self::Linear => Some(0.0),
        }
    }

    /// Jet propagation; ReLU is rejected since PDE residuals need a smooth map.
    pub fn jet(self, j: Jet2) -> Result<Jet2, NetworkError> {
        match self {
            Self::Tanh => Ok(j.tanh()),
            Self::Sin => Ok(j.sin()),
            Self::Linear => Ok(j),
            Self::Relu => Err(NetworkError::UnsupportedActivation(self)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Tanh => "tanh",
            Self::Relu => "relu",
            Self::Sin => "sin",
            Self::Linear => "linear",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = NetworkError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tanh" => Ok(Self::Tanh),
            "relu" => Ok(Self::Relu),
            "sin" => Ok(Self::Sin),
            "linear" => Ok(Self::Linear),
            other => Err(NetworkError::InvalidSpec(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Mlp,
    Separable,
}

/// Shape of a separable network: one subnetwork per input axis, each ending
/// in `rank * outputs` features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparableShape {
    pub axes: usize,
    pub rank: usize,
    pub outputs: usize,
}

/// Architecture description.
///
/// For `Mlp`, `layer_widths` is the full chain `[d_in, h_1, .., h_k, d_out]`.
/// For `Separable`, it lists only the hidden widths of each subnetwork; every
/// subnetwork maps one coordinate to `rank * outputs` features.
///
/// `input_bounds`, when present, maps each input coordinate from `[lo, hi]`
/// onto `[-1, 1]` before the first layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub kind: NetworkKind,
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separable: Option<SeparableShape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_bounds: Option<Vec<[f64; 2]>>,
}

impl NetworkSpec {
    pub fn mlp(layer_widths: Vec<usize>, activation: Activation) -> Self {
        Self {
            kind: NetworkKind::Mlp,
            layer_widths,
            activation,
            separable: None,
            input_bounds: None,
        }
    }

    pub fn separable(
        axes: usize,
        hidden: Vec<usize>,
        rank: usize,
        outputs: usize,
        activation: Activation,
    ) -> Self {
        Self {
            kind: NetworkKind::Separable,
            layer_widths: hidden,
            activation,
            separable: Some(SeparableShape {
                axes,
                rank,
                outputs,
            }),
            input_bounds: None,
        }
    }

    pub fn with_input_bounds(mut self, bounds: Vec<[f64; 2]>) -> Self {
        self.input_bounds = Some(bounds);
        self
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |m: String| Err(NetworkError::InvalidSpec(m));
        if self.layer_widths.contains(&0) {
            return bad(format!("zero-width layer in {:?}", self.layer_widths));
        }
        match self.kind {
            NetworkKind::Mlp => {
                if self.layer_widths.len() < 3 {
                    return bad(format!(
                        "an MLP needs input, at least one hidden layer and output; got {:?}",
                        self.layer_widths
                    ));
                }
                if self.separable.is_some() {
                    return bad("an MLP spec must not carry a separable shape".into());
                }
            }
            NetworkKind::Separable => {
                let Some(s) = self.separable else {
                    return bad("separable spec without axes/rank/outputs".into());
                };
                if self.layer_widths.is_empty() {
                    return bad("separable subnetworks need at least one hidden layer".into());
                }
                if s.axes == 0 || s.rank == 0 || s.outputs == 0 {
                    return bad(format!("degenerate separable shape {s:?}"));
                }
            }
        }
        if let Some(b) = &self.input_bounds {
            if b.len() != self.input_dim() {
                return bad(format!(
                    "{} input bounds for {} inputs",
                    b.len(),
                    self.input_dim()
                ));
            }
            if b.iter().any(|[lo, hi]| !(lo.is_finite() && hi.is_finite() && hi > lo)) {
                return bad(format!("degenerate input bounds {b:?}"));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        match self.kind {
            NetworkKind::Mlp => self.layer_widths[0],
            NetworkKind::Separable => self.separable.map_or(0, |s| s.axes),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self.kind {
            NetworkKind::Mlp => *self.layer_widths.last().unwrap_or(&0),
            NetworkKind::Separable => self.separable.map_or(0, |s| s.outputs),
        }
    }

    /// Number of independent MLP chains (1 for a plain MLP).
    pub fn subnet_count(&self) -> usize {
        match self.kind {
            NetworkKind::Mlp => 1,
            NetworkKind::Separable => self.separable.map_or(0, |s| s.axes),
        }
    }

    /// Full width chain of one subnetwork (every subnetwork shares it).
    pub fn subnet_widths(&self) -> Vec<usize> {
        match self.kind {
            NetworkKind::Mlp => self.layer_widths.clone(),
            NetworkKind::Separable => {
                let s = self.separable.expect("validated separable spec");
                let mut w = Vec::with_capacity(self.layer_widths.len() + 2);
                w.push(1);
                w.extend_from_slice(&self.layer_widths);
                w.push(s.rank * s.outputs);
                w
            }
        }
    }

    /// Weight layers per subnetwork.
    pub fn layers_per_subnet(&self) -> usize {
        self.subnet_widths().len() - 1
    }

    /// Affine input map `x -> scale * x + shift` per coordinate.
    pub fn input_map(&self) -> InputMap {
        let n = self.input_dim();
        match &self.input_bounds {
            None => InputMap {
                scale: vec![1.0; n],
                shift: vec![0.0; n],
            },
            Some(b) => InputMap {
                scale: b.iter().map(|[lo, hi]| 2.0 / (hi - lo)).collect(),
                shift: b.iter().map(|[lo, hi]| -(lo + hi) / (hi - lo)).collect(),
            },
        }
    }

    /// Trainable parameter count.
    pub fn parameter_count(&self) -> usize {
        let w = self.subnet_widths();
        let per: usize = w.windows(2).map(|p| p[0] * p[1] + p[1]).sum();
        per * self.subnet_count()
    }
}

/// Per-coordinate affine normalization applied before the first layer.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMap {
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
}

impl InputMap {
    pub fn apply(&self, coord: usize, x: f64) -> f64 {
        self.scale[coord] * x + self.shift[coord]
    }
}
