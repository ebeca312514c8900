use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::AnalysisError;
use crate::tensor::Tensor;

/// Whether `coords` is equispaced to relative tolerance `1e-9`.
pub fn is_uniform(coords: &[f64]) -> bool {
    if coords.len() < 3 {
        return true;
    }
    let h = (coords[coords.len() - 1] - coords[0]) / (coords.len() - 1) as f64;
    h != 0.0 && coords.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs())
}

/// Low-pass filter of a grid field along the chosen axes, keeping wave
/// numbers `|k| <= cutoff * N / 2` on each.
///
/// `field` is `[N_1 * .. * N_d, c]` in row-major grid order over `coords`.
pub fn fft_smooth(field: &Tensor, coords: &[Vec<f64>], axes: &[usize], cutoff: f64) -> Result<Tensor, AnalysisError> {
    field.expect_rank("fft_smooth", 2)?;
    let dims: Vec<usize> = coords.iter().map(Vec::len).collect();
    let total: usize = dims.iter().product();
    if field.rows() != total {
        return Err(AnalysisError::Shape(format!("field has {} rows, grid {dims:?} has {total}", field.rows())));
    }
    if !(cutoff > 0.0 && cutoff <= 1.0) {
        return Err(AnalysisError::Invalid(format!("cutoff {cutoff} outside (0, 1]")));
    }
    for &a in axes {
        if a >= dims.len() {
            return Err(AnalysisError::Invalid(format!("axis {a} out of range")));
        }
        if !is_uniform(&coords[a]) {
            return Err(AnalysisError::NonUniformGrid { axis: a });
        }
    }
    let comps = field.cols();
    let mut data = field.data().to_vec();
    let mut planner = FftPlanner::<f64>::new();
    for &a in axes {
        let n = dims[a];
        let stride: usize = dims[a + 1..].iter().product();
        let outer: usize = dims[..a].iter().product();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let kmax = cutoff * n as f64 / 2.0;
        let keep: Vec<bool> = (0..n)
            .map(|k| {
                let freq = if k <= n / 2 { k as f64 } else { (n - k) as f64 };
                freq <= kmax
            })
            .collect();
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for o in 0..outer {
            for s in 0..stride {
                for c in 0..comps {
                    let idx = |i: usize| ((o * n + i) * stride + s) * comps + c;
                    for (i, b) in buf.iter_mut().enumerate() {
                        *b = Complex::new(data[idx(i)], 0.0);
                    }
                    fwd.process(&mut buf);
                    for (b, &k) in buf.iter_mut().zip(&keep) {
                        if !k {
                            *b = Complex::new(0.0, 0.0);
                        }
                    }
                    inv.process(&mut buf);
                    for (i, b) in buf.iter().enumerate() {
                        data[idx(i)] = b.re / n as f64;
                    }
                }
            }
        }
    }
    Ok(Tensor::new(field.shape().to_vec(), data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(nx: usize, nt: usize) -> Vec<Vec<f64>> {
        vec![
            (0..nx).map(|i| 2.0 * PI * i as f64 / nx as f64).collect(),
            (0..nt).map(|j| j as f64 / nt as f64).collect(),
        ]
    }

    #[test]
    fn removes_high_modes_and_keeps_low() {
        let g = grid(64, 8);
        let mut low = Vec::new();
        let mut mixed = Vec::new();
        for &x in &g[0] {
            for &t in &g[1] {
                low.push((2.0 * x).sin() * (1.0 + t));
                mixed.push((2.0 * x).sin() * (1.0 + t) + 0.3 * (20.0 * x).cos());
            }
        }
        let field = Tensor::new(vec![512, 1], mixed).unwrap();
        let out = fft_smooth(&field, &g, &[0], 0.25).unwrap();
        for (a, b) in out.data().iter().zip(&low) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn idempotent_and_identity_at_full_cutoff() {
        let g = grid(30, 17);
        let vals: Vec<f64> = (0..30 * 17 * 2).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let field = Tensor::new(vec![510, 2], vals).unwrap();
        let once = fft_smooth(&field, &g, &[0, 1], 0.3).unwrap();
        let twice = fft_smooth(&once, &g, &[0, 1], 0.3).unwrap();
        assert!(once.zip_map(&twice, |a, b| a - b).max_abs() < 1e-12);
        let same = fft_smooth(&field, &g, &[0, 1], 1.0).unwrap();
        assert!(same.zip_map(&field, |a, b| a - b).max_abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        let mut g = grid(8, 4);
        g[0][3] += 0.01;
        let field = Tensor::zeros(&[32, 1]);
        assert!(matches!(fft_smooth(&field, &g, &[0], 0.5), Err(AnalysisError::NonUniformGrid { axis: 0 })));
        assert!(fft_smooth(&field, &g, &[1], 0.5).is_ok());
        assert!(fft_smooth(&field, &g, &[1], 0.0).is_err());
        assert!(fft_smooth(&Tensor::zeros(&[31, 1]), &g, &[1], 0.5).is_err());
    }
}
