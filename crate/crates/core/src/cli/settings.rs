use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::calibration::{CalibrationConfig, CalibrationMode};
use crate::network::{Activation, NetworkKind, NetworkSpec, PointBatch};
use crate::optim::AdamConfig;
use crate::pinn::{linspace, CollocationCounts, CollocationSet, LossWeights, LrDecay, PdeProblem, ProblemConfig, ProblemId, TrainConfig};
use crate::snn::{ConversionConfig, Readout};

/// Everything a run can be configured with. Every field is optional; the
/// config file and the command-line flags are merged (flags win) and the
/// rest falls back to per-problem defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: Option<String>,
    pub problem: Option<ProblemId>,
    /// `NxW`: `N` hidden layers of width `W`, e.g. `2x40`.
    pub layers: Option<String>,
    pub spinn: Option<bool>,
    pub rank: Option<usize>,
    pub activation: Option<Activation>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub lr: Option<f64>,
    pub lr_decay: Option<LrDecay>,
    pub domain: Option<Vec<[f64; 2]>>,
    pub nu: Option<f64>,
    pub k: Option<f64>,
    pub sigma: Option<f64>,
    pub reynolds: Option<f64>,
    pub weights: Option<LossWeights>,
    pub counts: Option<CollocationCounts>,
    pub timesteps: Option<usize>,
    pub mode: Option<CalibrationMode>,
    pub readout: Option<Readout>,
    pub quantile: Option<f64>,
    pub calibration_steps: Option<usize>,
    pub calibration_lr: Option<f64>,
    pub calibration_batch: Option<usize>,
    /// Cap on the scattered points used to fit thresholds and calibrate.
    pub calibration_points: Option<usize>,
    pub eval_points: Option<usize>,
    pub cutoff: Option<f64>,
    pub sweep_t: Option<Vec<usize>>,
}

macro_rules! merge_fields {
    ($hi:ident, $lo:ident; $($f:ident),*) => {
        RunConfig { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config file: {e}")))
    }

    /// Fields set in `self` win over `other`.
    pub fn over(self, other: RunConfig) -> RunConfig {
        let hi = self;
        let lo = other;
        merge_fields!(hi, lo; run, problem, layers, spinn, rank, activation, epochs, seed, lr, lr_decay, domain, nu, k,
            sigma, reynolds, weights, counts, timesteps, mode, readout, quantile, calibration_steps, calibration_lr,
            calibration_batch, calibration_points, eval_points, cutoff, sweep_t)
    }
}

/// `"2x40"` is two hidden layers of 40.
pub fn parse_layers(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("--layers expects NxW (layer count x width), got `{s}`"));
    let (n, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    if w == 0 || n == 0 {
        return Err(bad());
    }
    Ok(vec![w; n])
}

/// Architecture of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSettings {
    pub hidden: Vec<usize>,
    pub spinn: bool,
    pub rank: usize,
    pub activation: Activation,
}

/// Fully resolved run settings; written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub run: String,
    pub problem: ProblemConfig,
    pub network: NetworkSettings,
    pub conversion: ConversionConfig,
    pub calibration: CalibrationConfig,
    pub calibration_points: usize,
    pub eval_points: usize,
    pub cutoff: f64,
    pub sweep_t: Vec<usize>,
}

fn default_hidden(id: ProblemId, spinn: bool) -> Vec<usize> {
    match (id, spinn) {
        (ProblemId::SinRegression, _) => vec![40; 2],
        (ProblemId::Burgers, false) => vec![40; 6],
        (ProblemId::Burgers, true) => vec![50; 3],
        (ProblemId::Beltrami, false) => vec![128; 4],
        (ProblemId::Beltrami, true) => vec![50; 2],
        _ => vec![100; 3],
    }
}

impl Settings {
    pub fn resolve(cfg: &RunConfig) -> Result<Self, CliError> {
        let id = cfg
            .problem
            .ok_or_else(|| CliError::Usage("--problem is required (or `problem` in the config file)".into()))?;
        let spinn = cfg.spinn.unwrap_or(false);
        let hidden = match &cfg.layers {
            Some(l) => parse_layers(l)?,
            None => default_hidden(id, spinn),
        };
        let sin = id == ProblemId::SinRegression;
        let epochs = cfg.epochs.unwrap_or(if sin { 30_000 } else { 2000 });
        let lr = cfg.lr.unwrap_or(if sin { 1e-2 } else { 3e-3 });
        let every = if sin { epochs / 5 } else { epochs / 4 };
        let lr_decay = cfg.lr_decay.or((every > 0).then_some(LrDecay { factor: 0.5, every }));
        let mut counts = cfg.counts.unwrap_or_default();
        if sin && cfg.counts.is_none() {
            counts.interior = 200;
        }
        let problem = ProblemConfig {
            problem: id,
            domain: cfg.domain.clone(),
            nu: cfg.nu,
            k: cfg.k,
            sigma: cfg.sigma,
            reynolds: cfg.reynolds,
            weights: cfg.weights.unwrap_or_default(),
            counts,
            train: TrainConfig {
                epochs,
                seed: cfg.seed.unwrap_or(0),
                adam: AdamConfig { lr, ..Default::default() },
                lr_decay,
                ..Default::default()
            },
        };
        problem.to_problem().map_err(|e| CliError::Usage(e.to_string()))?;
        let defaults = CalibrationConfig::default();
        let calibration = CalibrationConfig {
            mode: cfg.mode.unwrap_or(CalibrationMode::Advanced),
            steps: cfg.calibration_steps.unwrap_or(defaults.steps),
            lr: cfg.calibration_lr.unwrap_or(1e-2),
            batch_size: cfg.calibration_batch.unwrap_or(0),
            seed: cfg.seed.unwrap_or(0),
        };
        calibration.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let conversion = ConversionConfig {
            timesteps: cfg.timesteps.unwrap_or(32),
            readout: cfg.readout.unwrap_or_default(),
            quantile: cfg.quantile.unwrap_or(1.0),
        };
        if conversion.timesteps == 0 {
            return Err(CliError::Usage("--timesteps must be at least 1".into()));
        }
        let eval_points = cfg.eval_points.unwrap_or(match (id, PdeProblem::new(id).input_dim()) {
            (_, 1) => 1000,
            (ProblemId::Burgers, _) => 256,
            (_, 2) => 101,
            _ => 21,
        });
        let cutoff = cfg.cutoff.unwrap_or(0.25);
        if !(cutoff > 0.0 && cutoff <= 1.0) {
            return Err(CliError::Usage(format!("--cutoff must lie in (0, 1], got {cutoff}")));
        }
        let run = cfg
            .run
            .clone()
            .unwrap_or_else(|| if spinn { format!("{}-spinn", id.name()) } else { id.name().to_string() });
        if run.is_empty() || run.contains(['/', '\\']) || run == "." || run == ".." {
            return Err(CliError::Usage(format!("invalid run name `{run}`")));
        }
        Ok(Self {
            run,
            problem,
            network: NetworkSettings {
                hidden,
                spinn,
                rank: cfg.rank.unwrap_or(50),
                activation: cfg.activation.unwrap_or(Activation::Tanh),
            },
            conversion,
            calibration,
            calibration_points: cfg.calibration_points.unwrap_or(1024),
            eval_points,
            cutoff,
            sweep_t: cfg.sweep_t.clone().unwrap_or_else(|| vec![4, 8, 16, 32, 64, 128]),
        })
    }

    pub fn pde(&self) -> PdeProblem {
        self.problem.to_problem().expect("validated on resolve")
    }

    pub fn spec(&self) -> NetworkSpec {
        network_spec(&self.pde(), &self.network)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialize")
    }
}

/// Network for `problem`. PDE networks see inputs scaled from the domain box
/// to `[-1, 1]`; the regression network takes raw `x`.
pub fn network_spec(problem: &PdeProblem, n: &NetworkSettings) -> NetworkSpec {
    let spec = if n.spinn {
        NetworkSpec::separable(problem.input_dim(), n.hidden.clone(), n.rank, problem.output_dim(), n.activation)
    } else {
        let mut w = vec![problem.input_dim()];
        w.extend(&n.hidden);
        w.push(problem.output_dim());
        NetworkSpec::mlp(w, n.activation)
    };
    if problem.id == ProblemId::SinRegression {
        spec
    } else {
        spec.with_input_bounds(problem.domain.clone())
    }
}

/// Per-axis evaluation coordinates. The Burgers space axis uses the periodic
/// grid `x_i = 2πi/n` (the right wall duplicates the left one) so that
/// spectral smoothing sees a consistent period.
pub fn eval_axes(problem: &PdeProblem, n: usize) -> Vec<Vec<f64>> {
    problem
        .domain
        .iter()
        .enumerate()
        .map(|(a, &[lo, hi])| {
            if problem.id == ProblemId::Burgers && a == 0 {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
            } else {
                linspace(lo, hi, n)
            }
        })
        .collect()
}

/// Axes that spectral smoothing acts on: all but time.
pub fn spatial_axes(problem: &PdeProblem) -> Vec<usize> {
    (0..problem.input_dim()).filter(|a| Some(*a) != problem.time_axis()).collect()
}

/// Points used to fit thresholds and calibrate: the per-axis training
/// points for separable networks, otherwise at most `cap` interior points
/// chosen by a seeded shuffle.
pub fn calibration_batch(spec: &NetworkSpec, colloc: &CollocationSet, cap: usize, seed: u64) -> PointBatch {
    match spec.kind {
        NetworkKind::Separable => PointBatch::Grid(colloc.axis_points.clone()),
        NetworkKind::Mlp => {
            let n = colloc.interior.rows();
            if cap == 0 || n <= cap {
                return PointBatch::Scattered(colloc.interior.clone());
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
            idx.truncate(cap);
            idx.sort_unstable();
            PointBatch::Scattered(colloc.interior.select_rows(&idx))
        }
    }
}

/// Point inside the domain used by the Hessian check.
pub fn probe_point(problem: &PdeProblem) -> Vec<f64> {
    problem
        .domain
        .iter()
        .enumerate()
        .map(|(a, &[lo, hi])| lo + (hi - lo) * (0.3 + 0.1 * a as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn layers_flag() {
        assert_eq!(parse_layers("2x40").unwrap(), vec![40, 40]);
        assert_eq!(parse_layers("3X100").unwrap(), vec![100; 3]);
        for bad in ["40", "0x2", "2x", "ax3"] {
            assert!(parse_layers(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn flags_win_over_file() {
        let file = RunConfig::from_toml("problem = \"poisson\"\nepochs = 10\nseed = 3\n").unwrap();
        let flags = RunConfig {
            epochs: Some(20),
            ..Default::default()
        };
        let m = flags.over(file);
        assert_eq!(m.epochs, Some(20));
        assert_eq!(m.seed, Some(3));
        assert_eq!(m.problem, Some(ProblemId::Poisson));
        assert!(RunConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn resolve_defaults() {
        assert!(matches!(Settings::resolve(&RunConfig::default()), Err(CliError::Usage(_))));
        let s = Settings::resolve(&RunConfig {
            problem: Some(ProblemId::SinRegression),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(s.run, "sin_regression");
        assert_eq!(s.spec().layer_widths, vec![1, 40, 40, 1]);
        assert_eq!(s.problem.counts.interior, 200);
        let back: Settings = toml::from_str(&s.to_toml()).unwrap();
        assert_eq!(back, s);
        let b = Settings::resolve(&RunConfig {
            problem: Some(ProblemId::Burgers),
            spinn: Some(true),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(b.run, "burgers-spinn");
        assert_eq!(b.spec().kind, NetworkKind::Separable);
        let axes = eval_axes(&b.pde(), b.eval_points);
        assert_eq!(axes[0].len(), 256);
        assert_eq!(axes[1].len(), 256);
        assert!(axes[0].last().unwrap() < &(2.0 * PI));
        assert_eq!(spatial_axes(&b.pde()), vec![0]);
    }

    #[test]
    fn calibration_subset_is_deterministic() {
        let p = PdeProblem::new(ProblemId::Poisson);
        let colloc = crate::pinn::sample_collocation(&p, CollocationCounts::default(), 0).unwrap();
        let spec = NetworkSpec::mlp(vec![2, 4, 1], Activation::Tanh);
        let a = calibration_batch(&spec, &colloc, 100, 1);
        assert_eq!(a.len(), 100);
        assert_eq!(a, calibration_batch(&spec, &colloc, 100, 1));
        assert_ne!(a, calibration_batch(&spec, &colloc, 100, 2));
    }
}
