use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PdeProblem, PinnError, ProblemId};
use crate::network::grid_points;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollocationCounts {
    pub interior: usize,
    pub boundary: usize,
    pub initial: usize,
    /// Points per axis for separable (grid) training.
    pub per_axis: usize,
}

impl Default for CollocationCounts {
    fn default() -> Self {
        Self {
            interior: 10_000,
            boundary: 400,
            initial: 400,
            per_axis: 64,
        }
    }
}

/// Training points. `interior`, `boundary` and `initial` are scattered
/// `[n, d]` sets; `axis_points` holds the per-axis lists used by separable
/// networks, whose boundary and initial faces are derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    pub interior: Tensor,
    pub boundary: Tensor,
    pub initial: Tensor,
    pub axis_points: Vec<Vec<f64>>,
}

/// `n` equispaced points on `[lo, hi]` including both ends.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// `n` cell-centred points strictly inside `[lo, hi]`.
pub fn cell_centres(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64)
        .collect()
}

fn rows_to_tensor(rows: Vec<Vec<f64>>, d: usize) -> Tensor {
    let n = rows.len();
    Tensor::from_raw(vec![n, d], rows.into_iter().flatten().collect())
}

fn empty(d: usize) -> Tensor {
    Tensor::from_raw(vec![0, d], vec![])
}

pub fn sample_collocation(
    problem: &PdeProblem,
    counts: CollocationCounts,
    seed: u64,
) -> Result<CollocationSet, PinnError> {
    problem.validate()?;
    if counts.interior == 0 || counts.per_axis == 0 {
        return Err(PinnError::Domain("collocation counts must be positive".into()));
    }
    let dom = &problem.domain;
    let d = problem.input_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |lo: f64, hi: f64| -> f64 {
        Uniform::new_inclusive(lo, hi)
            .expect("validated interval")
            .sample(&mut rng)
    };

    let set = match problem.id {
        ProblemId::SinRegression => {
            let xs = linspace(dom[0][0], dom[0][1], counts.interior);
            CollocationSet {
                interior: Tensor::column(xs.clone())?,
                boundary: empty(1),
                initial: empty(1),
                axis_points: vec![xs],
            }
        }
        _ if d == 2 => {
            let m = ((counts.interior as f64).sqrt().round() as usize).max(1);
            let axes: Vec<Vec<f64>> = dom.iter().map(|[lo, hi]| cell_centres(*lo, *hi, m)).collect();
            let interior = grid_points(&axes);
            let boundary = if problem.id == ProblemId::Poisson {
                perimeter(dom, counts.boundary)
            } else {
                // Left and right edges over time.
                let half = counts.boundary.div_ceil(2);
                let ts = linspace(dom[1][0], dom[1][1], half);
                let mut rows = Vec::with_capacity(2 * half);
                for &x in &[dom[0][0], dom[0][1]] {
                    rows.extend(ts.iter().map(|&t| vec![x, t]));
                }
                rows_to_tensor(rows, 2)
            };
            let initial = if problem.time_axis().is_some() {
                let xs = linspace(dom[0][0], dom[0][1], counts.initial);
                rows_to_tensor(xs.into_iter().map(|x| vec![x, dom[1][0]]).collect(), 2)
            } else {
                empty(2)
            };
            let axis_points = dom
                .iter()
                .map(|[lo, hi]| cell_centres(*lo, *hi, counts.per_axis))
                .collect();
            CollocationSet {
                interior,
                boundary,
                initial,
                axis_points,
            }
        }
        _ => {
            // Three-dimensional: uniform random interior and faces.
            let interior = rows_to_tensor(
                (0..counts.interior)
                    .map(|_| dom.iter().map(|[lo, hi]| uniform(*lo, *hi)).collect())
                    .collect(),
                d,
            );
            let faces = problem.boundary_axes();
            let mut rows = Vec::with_capacity(counts.boundary);
            for i in 0..counts.boundary {
                let axis = faces[i % faces.len()];
                let side = (i / faces.len()) % 2;
                let mut p: Vec<f64> = dom.iter().map(|[lo, hi]| uniform(*lo, *hi)).collect();
                p[axis] = dom[axis][side];
                rows.push(p);
            }
            let boundary = rows_to_tensor(rows, d);
            let t_axis = problem.time_axis().expect("3-D problems are time dependent");
            let initial = rows_to_tensor(
                (0..counts.initial)
                    .map(|_| {
                        let mut p: Vec<f64> = dom.iter().map(|[lo, hi]| uniform(*lo, *hi)).collect();
                        p[t_axis] = dom[t_axis][0];
                        p
                    })
                    .collect(),
                d,
            );
            let mut axis_points: Vec<Vec<f64>> = dom
                .iter()
                .map(|[lo, hi]| (0..counts.per_axis).map(|_| uniform(*lo, *hi)).collect())
                .collect();
            for a in &mut axis_points {
                a.sort_by(f64::total_cmp);
            }
            CollocationSet {
                interior,
                boundary,
                initial,
                axis_points,
            }
        }
    };
    Ok(set)
}

/// `n` points spread evenly along the perimeter of a rectangle.
fn perimeter(dom: &[[f64; 2]], n: usize) -> Tensor {
    let [x0, x1] = dom[0];
    let [y0, y1] = dom[1];
    let (w, h) = (x1 - x0, y1 - y0);
    let total = 2.0 * (w + h);
    let rows = (0..n)
        .map(|i| {
            let s = total * i as f64 / n as f64;
            if s < w {
                vec![x0 + s, y0]
            } else if s < w + h {
                vec![x1, y0 + (s - w)]
            } else if s < 2.0 * w + h {
                vec![x1 - (s - w - h), y1]
            } else {
                vec![x0, y1 - (s - 2.0 * w - h)]
            }
        })
        .collect();
    rows_to_tensor(rows, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sin_mesh_is_equispaced() {
        let p = PdeProblem::new(ProblemId::SinRegression);
        let c = sample_collocation(
            &p,
            CollocationCounts {
                interior: 100,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let xs = c.interior.data();
        assert_eq!(xs.len(), 100);
        assert_eq!(xs[0], -PI);
        assert_eq!(xs[99], PI);
        let h = 2.0 * PI / 99.0;
        for w in xs.windows(2) {
            assert!((w[1] - w[0] - h).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_boundary_on_square_edge() {
        let p = PdeProblem::new(ProblemId::Poisson);
        let c = sample_collocation(&p, CollocationCounts::default(), 0).unwrap();
        assert_eq!(c.boundary.rows(), 400);
        for i in 0..c.boundary.rows() {
            let (x, y) = (c.boundary.get2(i, 0), c.boundary.get2(i, 1));
            assert!((x.abs().max(y.abs()) - 1.0).abs() < 1e-12);
        }
        assert_eq!(c.interior.rows(), 10_000);
    }

    #[test]
    fn deterministic_and_inside() {
        for id in ProblemId::ALL {
            let p = PdeProblem::new(id);
            let counts = CollocationCounts {
                interior: 300,
                boundary: 60,
                initial: 30,
                per_axis: 9,
            };
            let a = sample_collocation(&p, counts, 5).unwrap();
            assert_eq!(a, sample_collocation(&p, counts, 5).unwrap());
            for t in [&a.interior, &a.boundary, &a.initial] {
                for i in 0..t.rows() {
                    assert!(p.contains(t.row(i)), "{id}: {:?}", t.row(i));
                }
            }
        }
        let p = PdeProblem::new(ProblemId::Beltrami);
        let c = CollocationCounts::default();
        assert_ne!(sample_collocation(&p, c, 1).unwrap(), sample_collocation(&p, c, 2).unwrap());
    }

    #[test]
    fn grid_points_row_major() {
        let g = grid_points(&[vec![0.0, 1.0], vec![5.0, 6.0, 7.0]]);
        assert_eq!(g.shape(), &[6, 2]);
        assert_eq!(g.row(1), &[0.0, 6.0]);
        assert_eq!(g.row(3), &[1.0, 5.0]);
    }

    #[test]
    fn rejects_zero_counts() {
        let p = PdeProblem::new(ProblemId::Poisson);
        let counts = CollocationCounts {
            interior: 0,
            ..Default::default()
        };
        assert!(sample_collocation(&p, counts, 0).is_err());
    }
}
