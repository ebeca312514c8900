use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use super::PinnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemId {
    SinRegression,
    Poisson,
    DiffusionReaction,
    Wave,
    Burgers,
    Beltrami,
}

impl ProblemId {
    pub const ALL: [ProblemId; 6] = [
        Self::SinRegression,
        Self::Poisson,
        Self::DiffusionReaction,
        Self::Wave,
        Self::Burgers,
        Self::Beltrami,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::SinRegression => "sin_regression",
            Self::Poisson => "poisson",
            Self::DiffusionReaction => "diffusion_reaction",
            Self::Wave => "wave",
            Self::Burgers => "burgers",
            Self::Beltrami => "beltrami",
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemId {
    type Err = PinnError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "sin" | "sin_regression" => Ok(Self::SinRegression),
            "poisson" => Ok(Self::Poisson),
            "diffusion_reaction" | "dr" => Ok(Self::DiffusionReaction),
            "wave" => Ok(Self::Wave),
            "burgers" => Ok(Self::Burgers),
            "beltrami" | "ns" => Ok(Self::Beltrami),
            other => Err(PinnError::UnknownProblem(other.to_string())),
        }
    }
}

/// Multipliers of the residual, boundary and initial terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub pde: f64,
    pub bc: f64,
    pub ic: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            pde: 1.0,
            bc: 1.0,
            ic: 1.0,
        }
    }
}

/// One benchmark: domain box (spatial coordinates first, time last),
/// coefficients and loss weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeProblem {
    pub id: ProblemId,
    pub domain: Vec<[f64; 2]>,
    /// Burgers viscosity.
    pub nu: f64,
    /// Diffusion-reaction coefficient and initial width.
    pub k: f64,
    pub sigma: f64,
    /// Navier-Stokes Reynolds number.
    pub reynolds: f64,
    pub weights: LossWeights,
}

pub const DEFAULT_BURGERS_NU: f64 = 0.01 / PI;

impl PdeProblem {
    pub fn new(id: ProblemId) -> Self {
        let domain = match id {
            ProblemId::SinRegression => vec![[-PI, PI]],
            ProblemId::Poisson => vec![[-1.0, 1.0], [-1.0, 1.0]],
            ProblemId::DiffusionReaction => vec![[-1.0, 1.0], [0.0, 0.01]],
            ProblemId::Wave => vec![[-1.0, 1.0], [0.0, 0.5]],
            ProblemId::Burgers => vec![[0.0, 2.0 * PI], [0.0, 4.0]],
            ProblemId::Beltrami => vec![[-1.0, 1.0], [-1.0, 1.0], [0.0, 1.0]],
        };
        Self {
            id,
            domain,
            nu: DEFAULT_BURGERS_NU,
            k: 1.0,
            sigma: 0.25,
            reynolds: 1.0,
            weights: LossWeights::default(),
        }
    }

    pub fn validate(&self) -> Result<(), PinnError> {
        let expected = Self::new(self.id).domain.len();
        if self.domain.len() != expected {
            return Err(PinnError::Domain(format!(
                "{} needs {expected} domain intervals, got {}",
                self.id,
                self.domain.len()
            )));
        }
        for (i, [lo, hi]) in self.domain.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(PinnError::Domain(format!("axis {i}: degenerate interval [{lo}, {hi}]")));
            }
        }
        let coeffs = [self.nu, self.k, self.sigma, self.reynolds];
        if coeffs.iter().any(|c| !c.is_finite()) || self.sigma <= 0.0 || self.reynolds <= 0.0 || self.nu < 0.0 {
            return Err(PinnError::Domain("coefficients must be finite with sigma, Re > 0 and nu >= 0".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.domain.len()
    }

    pub fn output_dim(&self) -> usize {
        match self.id {
            ProblemId::Beltrami => 3,
            _ => 1,
        }
    }

    pub fn output_names(&self) -> &'static [&'static str] {
        match self.id {
            ProblemId::Beltrami => &["u", "v", "p"],
            _ => &["u"],
        }
    }

    pub fn axis_names(&self) -> &'static [&'static str] {
        match self.id {
            ProblemId::SinRegression => &["x"],
            ProblemId::Poisson => &["x", "y"],
            ProblemId::Beltrami => &["x", "y", "t"],
            _ => &["x", "t"],
        }
    }

    /// Index of the time coordinate, if the problem is time dependent.
    pub fn time_axis(&self) -> Option<usize> {
        match self.id {
            ProblemId::SinRegression | ProblemId::Poisson => None,
            _ => Some(self.input_dim() - 1),
        }
    }

    /// Axes carrying Dirichlet boundary data.
    pub fn boundary_axes(&self) -> Vec<usize> {
        match self.id {
            ProblemId::SinRegression => vec![],
            ProblemId::Poisson | ProblemId::Beltrami => vec![0, 1],
            _ => vec![0],
        }
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        let tol = 1e-12;
        point.len() == self.input_dim()
            && point
                .iter()
                .zip(&self.domain)
                .all(|(p, [lo, hi])| *p >= lo - tol * (hi - lo) && *p <= hi + tol * (hi - lo))
    }

    /// Closed-form solution where one exists (sin target, Beltrami flow).
    pub fn exact(&self, point: &[f64]) -> Option<Vec<f64>> {
        match self.id {
            ProblemId::SinRegression => Some(vec![point[0].sin()]),
            ProblemId::Beltrami => Some(beltrami(point[0], point[1], point[2], self.reynolds)),
            _ => None,
        }
    }

    /// Initial condition `u(x, t0)` for time-dependent problems.
    pub fn initial_value(&self, point: &[f64]) -> Vec<f64> {
        match self.id {
            ProblemId::DiffusionReaction => {
                let x = point[0];
                vec![(-x * x / (2.0 * self.sigma * self.sigma)).exp()]
            }
            ProblemId::Wave => vec![wave_profile(point[0])],
            ProblemId::Burgers => vec![point[0].sin()],
            ProblemId::Beltrami => beltrami(point[0], point[1], point[2], self.reynolds),
            ProblemId::SinRegression | ProblemId::Poisson => vec![0.0; self.output_dim()],
        }
    }

    /// Dirichlet data on the spatial boundary.
    pub fn boundary_value(&self, point: &[f64]) -> Vec<f64> {
        match self.id {
            ProblemId::DiffusionReaction => {
                let x = point[0];
                vec![(-x * x / (2.0 * self.sigma * self.sigma)).exp()]
            }
            ProblemId::Beltrami => beltrami(point[0], point[1], point[2], self.reynolds),
            _ => vec![0.0; self.output_dim()],
        }
    }
}

/// Trapezoid initial profile of the wave benchmark: 1 on `|x| <= 0.245`,
/// 0 on `|x| >= 0.6`, linear in between.
pub fn wave_profile(x: f64) -> f64 {
    let a = x.abs();
    if a <= 0.245 {
        1.0
    } else if a >= 0.6 {
        0.0
    } else {
        (0.6 - a) / (0.6 - 0.245)
    }
}

/// Analytic Beltrami flow `(u, v, p)`; the decay rates hold for `Re = 1`
/// and scale as `2/Re` and `4/Re` in general.
pub fn beltrami(x: f64, y: f64, t: f64, re: f64) -> Vec<f64> {
    let e2 = (-2.0 * t / re).exp();
    let e4 = (-4.0 * t / re).exp();
    vec![
        -x.cos() * y.sin() * e2,
        x.sin() * y.cos() * e2,
        -0.25 * ((2.0 * x).cos() + (2.0 * y).cos()) * e4,
    ]
}
