use super::SnnError;
use crate::tensor::Tensor;

/// Slack, in units of one threshold, absorbed when comparing against a
/// quantization level. Keeps the staircase and the step-by-step membrane
/// simulation in agreement on exact grid points such as `0.3 * 10`.
pub const LEVEL_GUARD: f64 = 1e-9;

/// Positive and negative firing thresholds of one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub pos: f64,
    pub neg: f64,
}

impl Thresholds {
    pub fn new(pos: f64, neg: f64) -> Result<Self, SnnError> {
        let t = Self { pos, neg };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), SnnError> {
        if self.pos.is_finite() && self.neg.is_finite() && self.neg < 0.0 && self.pos > 0.0 {
            Ok(())
        } else {
            Err(SnnError::InvalidThreshold {
                pos: self.pos,
                neg: self.neg,
            })
        }
    }

    pub fn largest(&self) -> f64 {
        self.pos.max(-self.neg)
    }
}

pub(crate) fn check_timesteps(t: usize) -> Result<(), SnnError> {
    if t == 0 {
        Err(SnnError::Timesteps(t))
    } else {
        Ok(())
    }
}

/// Staircase without argument checks.
#[inline]
pub(crate) fn quantize(z: f64, t: usize, th: Thresholds) -> f64 {
    let tf = t as f64;
    if z >= 0.0 {
        let k = (z * tf / th.pos + LEVEL_GUARD).floor().min(tf);
        k * th.pos / tf
    } else {
        let m = -th.neg;
        let k = (-z * tf / m + LEVEL_GUARD).floor().min(tf);
        -k * m / tf
    }
}

/// Expected averaged output of a dual-threshold integrate-and-fire neuron
/// driven by constant input `z` for `t` steps.
pub fn clip_floor(z: f64, t: usize, theta_pos: f64, theta_neg: f64) -> Result<f64, SnnError> {
    check_timesteps(t)?;
    let th = Thresholds::new(theta_pos, theta_neg)?;
    if !z.is_finite() {
        return Err(SnnError::NonFiniteInput(z));
    }
    Ok(quantize(z, t, th))
}

/// Element-wise [`clip_floor`] over a tensor.
pub fn clip_floor_tensor(z: &Tensor, t: usize, th: Thresholds) -> Result<Tensor, SnnError> {
    check_timesteps(t)?;
    th.validate()?;
    z.check_finite()?;
    Ok(z.map(|v| quantize(v, t, th)))
}
