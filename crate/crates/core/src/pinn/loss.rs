//! Physics-informed losses recorded on a tape, plus a pointwise residual
//! evaluator used by oracles and diagnostics.

use serde::{Deserialize, Serialize};

use crate::network::grid_points;
use super::{CollocationSet, PdeProblem, PinnError, ProblemId};
use crate::autodiff::{Tape, Var};
use crate::network::{
    mlp_output_jets, spinn_output_jets, Direction, NetworkKind, NetworkParams, NetworkSpec, OutputJets,
    TapedParams,
};
use crate::tensor::Tensor;

/// Loss value and its weighted components (before weighting). For the sin
/// regression the `pde` slot holds the data misfit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub pde: f64,
    pub bc: f64,
    pub ic: f64,
}

pub(crate) struct LossVars {
    pub total: Var,
    pub pde: Var,
    pub bc: Option<Var>,
    pub ic: Option<Var>,
}

impl LossVars {
    pub fn breakdown(&self, tape: &Tape) -> LossBreakdown {
        LossBreakdown {
            total: tape.scalar_value(self.total),
            pde: tape.scalar_value(self.pde),
            bc: self.bc.map_or(0.0, |v| tape.scalar_value(v)),
            ic: self.ic.map_or(0.0, |v| tape.scalar_value(v)),
        }
    }
}

enum PointSet {
    Scattered(Tensor),
    Grid(Vec<Vec<f64>>),
}

impl PointSet {
    fn coords(&self) -> Tensor {
        match self {
            Self::Scattered(t) => t.clone(),
            Self::Grid(axes) => grid_points(axes),
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Self::Scattered(t) => t.rows() == 0,
            Self::Grid(axes) => axes.iter().any(Vec::is_empty),
        }
    }
}

struct PointSets {
    interior: PointSet,
    boundary: Vec<PointSet>,
    initial: Vec<PointSet>,
}

fn point_sets(problem: &PdeProblem, spec: &NetworkSpec, colloc: &CollocationSet) -> PointSets {
    match spec.kind {
        NetworkKind::Mlp => PointSets {
            interior: PointSet::Scattered(colloc.interior.clone()),
            boundary: vec![PointSet::Scattered(colloc.boundary.clone())],
            initial: vec![PointSet::Scattered(colloc.initial.clone())],
        },
        NetworkKind::Separable => {
            let axes = &colloc.axis_points;
            let face = |axis: usize, value: f64| {
                let mut a = axes.clone();
                a[axis] = vec![value];
                PointSet::Grid(a)
            };
            let boundary = problem
                .boundary_axes()
                .into_iter()
                .flat_map(|a| [face(a, problem.domain[a][0]), face(a, problem.domain[a][1])])
                .collect();
            let initial = problem
                .time_axis()
                .map(|t| vec![face(t, problem.domain[t][0])])
                .unwrap_or_default();
            PointSets {
                interior: PointSet::Grid(axes.clone()),
                boundary,
                initial,
            }
        }
    }
}

fn jets(
    tape: &mut Tape,
    spec: &NetworkSpec,
    tp: &TapedParams,
    set: &PointSet,
    dirs: &[Direction],
) -> Result<Vec<OutputJets>, PinnError> {
    Ok(match set {
        PointSet::Scattered(t) => mlp_output_jets(tape, spec, tp, t, dirs)?,
        PointSet::Grid(axes) => spinn_output_jets(tape, spec, tp, axes, dirs)?,
    })
}

fn interior_dirs(id: ProblemId) -> Vec<Direction> {
    match id {
        ProblemId::SinRegression => vec![],
        ProblemId::Poisson | ProblemId::Wave => vec![Direction::second(0), Direction::second(1)],
        ProblemId::DiffusionReaction | ProblemId::Burgers => vec![Direction::second(0), Direction::first(1)],
        ProblemId::Beltrami => vec![Direction::second(0), Direction::second(1), Direction::first(2)],
    }
}

fn check_finite(tape: &Tape, v: Var, coords: &Tensor, term: &'static str) -> Result<(), PinnError> {
    match tape.value(v).data().iter().position(|x| !x.is_finite()) {
        None => Ok(()),
        Some(i) => Err(PinnError::NonFiniteResidual {
            term,
            point: coords.row(i).to_vec(),
        }),
    }
}

fn column(tape: &mut Tape, coords: &Tensor, f: impl Fn(&[f64]) -> f64) -> Var {
    let vals = (0..coords.rows()).map(|i| f(coords.row(i))).collect();
    tape.constant(Tensor::from_raw(vec![coords.rows(), 1], vals))
}

fn mse(tape: &mut Tape, v: Var) -> Var {
    let sq = tape.square(v);
    tape.mean(sq)
}

/// Interior residual columns for the problem's PDE.
fn residuals(
    tape: &mut Tape,
    problem: &PdeProblem,
    j: &[OutputJets],
    coords: &Tensor,
) -> Result<Vec<(&'static str, Var)>, PinnError> {
    let u = &j[0];
    Ok(match problem.id {
        ProblemId::SinRegression => {
            let target = column(tape, coords, |p| p[0].sin());
            vec![("data", tape.sub(u.value, target)?)]
        }
        ProblemId::Poisson => {
            let lap = tape.add(u.d2(0), u.d2(1))?;
            let neg = tape.scale(lap, -1.0);
            vec![("poisson", tape.offset(neg, -1.0))]
        }
        ProblemId::DiffusionReaction => {
            let a = tape.sub(u.d1(1), u.d2(0))?;
            let sq = tape.square(u.value);
            let react = tape.scale(sq, problem.k);
            vec![("diffusion_reaction", tape.sub(a, react)?)]
        }
        ProblemId::Wave => vec![("wave", tape.sub(u.d2(1), u.d2(0))?)],
        ProblemId::Burgers => {
            let uux = tape.mul(u.value, u.d1(0))?;
            let a = tape.add(u.d1(1), uux)?;
            let visc = tape.scale(u.d2(0), problem.nu);
            vec![("burgers", tape.sub(a, visc)?)]
        }
        ProblemId::Beltrami => {
            let (v, p) = (&j[1], &j[2]);
            let inv_re = 1.0 / problem.reynolds;
            let momentum = |tape: &mut Tape, w: &OutputJets, grad_p: Var| -> Result<Var, PinnError> {
                let adv_x = tape.mul(u.value, w.d1(0))?;
                let adv_y = tape.mul(v.value, w.d1(1))?;
                let lap = tape.add(w.d2(0), w.d2(1))?;
                let visc = tape.scale(lap, inv_re);
                let s = tape.add(w.d1(2), adv_x)?;
                let s = tape.add(s, adv_y)?;
                let s = tape.add(s, grad_p)?;
                Ok(tape.sub(s, visc)?)
            };
            let ru = momentum(tape, u, p.d1(0))?;
            let rv = momentum(tape, v, p.d1(1))?;
            let div = tape.add(u.d1(0), v.d1(1))?;
            vec![("momentum_x", ru), ("momentum_y", rv), ("divergence", div)]
        }
    })
}

/// Sum of squared mismatches over all sets and outputs, divided by the total
/// number of points.
fn data_term(
    tape: &mut Tape,
    spec: &NetworkSpec,
    tp: &TapedParams,
    sets: &[PointSet],
    target: impl Fn(&[f64]) -> Vec<f64>,
    rate_axis: Option<usize>,
    term: &'static str,
) -> Result<Option<Var>, PinnError> {
    let mut acc: Option<Var> = None;
    let mut count = 0usize;
    for set in sets.iter().filter(|s| !s.is_empty()) {
        let coords = set.coords();
        let dirs: Vec<Direction> = rate_axis.map(Direction::first).into_iter().collect();
        let j = jets(tape, spec, tp, set, &dirs)?;
        let targets: Vec<Vec<f64>> = (0..coords.rows()).map(|i| target(coords.row(i))).collect();
        let mut parts = Vec::new();
        for (o, jo) in j.iter().enumerate() {
            let t = tape.constant(Tensor::from_raw(
                vec![coords.rows(), 1],
                targets.iter().map(|r| r[o]).collect(),
            ));
            parts.push(tape.sub(jo.value, t)?);
        }
        if let Some(a) = rate_axis {
            parts.push(j[0].d1(a));
        }
        for diff in parts {
            check_finite(tape, diff, &coords, term)?;
            let sq = tape.square(diff);
            let s = tape.sum(sq);
            acc = Some(match acc {
                Some(prev) => tape.add(prev, s)?,
                None => s,
            });
        }
        count += coords.rows();
    }
    Ok(acc.map(|a| tape.scale(a, 1.0 / count as f64)))
}

fn check_dims(problem: &PdeProblem, spec: &NetworkSpec) -> Result<(), PinnError> {
    problem.validate()?;
    spec.validate()?;
    if spec.input_dim() != problem.input_dim() || spec.output_dim() != problem.output_dim() {
        return Err(PinnError::Mismatch(format!(
            "{} expects {} inputs and {} outputs; network has {} and {}",
            problem.id,
            problem.input_dim(),
            problem.output_dim(),
            spec.input_dim(),
            spec.output_dim()
        )));
    }
    Ok(())
}

pub(crate) fn record_loss(
    tape: &mut Tape,
    problem: &PdeProblem,
    spec: &NetworkSpec,
    tp: &TapedParams,
    colloc: &CollocationSet,
) -> Result<LossVars, PinnError> {
    check_dims(problem, spec)?;
    if spec.kind == NetworkKind::Separable && colloc.axis_points.len() != problem.input_dim() {
        return Err(PinnError::Mismatch("separable training needs per-axis points".into()));
    }
    let sets = point_sets(problem, spec, colloc);
    if sets.interior.is_empty() {
        return Err(PinnError::Domain("empty interior collocation set".into()));
    }
    let coords = sets.interior.coords();
    let j = jets(tape, spec, tp, &sets.interior, &interior_dirs(problem.id))?;
    let mut pde: Option<Var> = None;
    for (name, r) in residuals(tape, problem, &j, &coords)? {
        check_finite(tape, r, &coords, name)?;
        let m = mse(tape, r);
        pde = Some(match pde {
            Some(p) => tape.add(p, m)?,
            None => m,
        });
    }
    let pde = pde.expect("every problem has a residual");

    let bc = data_term(tape, spec, tp, &sets.boundary, |p| problem.boundary_value(p), None, "boundary")?;
    let rate_axis = (problem.id == ProblemId::Wave).then_some(1);
    let ic = data_term(tape, spec, tp, &sets.initial, |p| problem.initial_value(p), rate_axis, "initial")?;

    let w = problem.weights;
    let mut total = tape.scale(pde, w.pde);
    if let Some(b) = bc {
        let s = tape.scale(b, w.bc);
        total = tape.add(total, s)?;
    }
    if let Some(i) = ic {
        let s = tape.scale(i, w.ic);
        total = tape.add(total, s)?;
    }
    Ok(LossVars { total, pde, bc, ic })
}

/// Evaluates the physics-informed loss and its components.
pub fn physics_loss(
    problem: &PdeProblem,
    spec: &NetworkSpec,
    params: &NetworkParams,
    colloc: &CollocationSet,
) -> Result<LossBreakdown, PinnError> {
    params.check(spec)?;
    let mut tape = Tape::new();
    let tp = TapedParams::record(&mut tape, params);
    Ok(record_loss(&mut tape, problem, spec, &tp, colloc)?.breakdown(&tape))
}

/// Loss plus its gradient in [`NetworkParams::tensors`] order.
pub fn loss_and_grad(
    problem: &PdeProblem,
    spec: &NetworkSpec,
    params: &NetworkParams,
    colloc: &CollocationSet,
) -> Result<(LossBreakdown, Vec<Tensor>), PinnError> {
    params.check(spec)?;
    let mut tape = Tape::new();
    let tp = TapedParams::record(&mut tape, params);
    let vars = record_loss(&mut tape, problem, spec, &tp, colloc)?;
    let grads = tape.grad(vars.total, &tp.vars())?;
    Ok((vars.breakdown(&tape), grads))
}

/// Value and partial derivatives of every output at one point, indexed
/// `[output][coordinate]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointDerivatives {
    pub value: Vec<f64>,
    pub d1: Vec<Vec<f64>>,
    pub d2: Vec<Vec<f64>>,
}

/// Interior residuals at a single point from supplied derivatives.
pub fn pointwise_residuals(problem: &PdeProblem, point: &[f64], d: &PointDerivatives) -> Vec<f64> {
    let u = d.value[0];
    match problem.id {
        ProblemId::SinRegression => vec![u - point[0].sin()],
        ProblemId::Poisson => vec![-(d.d2[0][0] + d.d2[0][1]) - 1.0],
        ProblemId::DiffusionReaction => vec![d.d1[0][1] - d.d2[0][0] - problem.k * u * u],
        ProblemId::Wave => vec![d.d2[0][1] - d.d2[0][0]],
        ProblemId::Burgers => vec![d.d1[0][1] + u * d.d1[0][0] - problem.nu * d.d2[0][0]],
        ProblemId::Beltrami => {
            let v = d.value[1];
            let inv_re = 1.0 / problem.reynolds;
            let mom = |w: usize, gp: f64| {
                d.d1[w][2] + u * d.d1[w][0] + v * d.d1[w][1] + gp - inv_re * (d.d2[w][0] + d.d2[w][1])
            };
            vec![mom(0, d.d1[2][0]), mom(1, d.d1[2][1]), d.d1[0][0] + d.d1[1][1]]
        }
    }
}
