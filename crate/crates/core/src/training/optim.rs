use ndarray::Zip;

use super::config::{OptimizerKind, ScheduleKind, TrainConfig};
use crate::error::{Error, Result};
use crate::model::ModelParams;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const ADADELTA_RHO: f64 = 0.95;
pub const ADADELTA_EPS: f64 = 1e-6;

/// Effective learning rate at update `step` (1-based).
pub fn schedule_lr(base: f64, step: u64, config: &TrainConfig) -> Result<f64> {
    if step == 0 {
        return Err(Error::Config("schedule steps start at 1".into()));
    }
    let t = step as f64;
    Ok(match config.schedule {
        ScheduleKind::Constant => base,
        ScheduleKind::Linear => base * (1.0 - t / config.total_steps as f64).max(0.0),
        ScheduleKind::Exponential => base * config.lr_decay.powf(t),
        ScheduleKind::Noam => {
            let warmup = config.warmup_steps as f64;
            base * (config.model_dim as f64).powf(-0.5) * t.powf(-0.5).min(t * warmup.powf(-1.5))
        }
    })
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_gradients(grads: &mut ModelParams, max_norm: f64) -> f64 {
    let norm = grads.sq_norm().sqrt();
    if norm <= max_norm || !norm.is_finite() {
        return norm;
    }
    let original = grads.clone();
    let mut scale = max_norm / norm;
    loop {
        *grads = original.clone();
        grads.scale(scale);
        if grads.sq_norm().sqrt() <= max_norm {
            return norm;
        }
        scale = scale.next_down();
    }
}

/// Auxiliary per-parameter arrays of the stateful optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    /// adam: first moment; adadelta: running E[g²]
    pub first: Option<ModelParams>,
    /// adam: second moment; adadelta: running E[Δ²]
    pub second: Option<ModelParams>,
}

impl OptimizerState {
    pub fn new() -> Self {
        Self {
            step: 0,
            first: None,
            second: None,
        }
    }
}

impl Default for OptimizerState {
    fn default() -> Self {
        Self::new()
    }
}

/// Applies one update and returns the learning rate that was used.
pub fn optimizer_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut OptimizerState,
    config: &TrainConfig,
) -> Result<f64> {
    params.check_same_shapes(grads)?;
    for aux in [&state.first, &state.second].into_iter().flatten() {
        params.check_same_shapes(aux)?;
    }
    state.step += 1;
    let lr = schedule_lr(config.learning_rate, state.step, config)?;

    if config.weight_decay > 0.0 {
        params.scale(1.0 - lr * config.weight_decay);
    }

    match config.optimizer {
        OptimizerKind::Sgd => params.add_scaled(-lr, grads)?,
        OptimizerKind::Adam => {
            let m = state.first.get_or_insert_with(|| params.zeros_like());
            let v = state.second.get_or_insert_with(|| params.zeros_like());
            let t = state.step as i32;
            let c1 = 1.0 - ADAM_BETA1.powi(t);
            let c2 = 1.0 - ADAM_BETA2.powi(t);
            for ((((_, mut p), (_, g)), (_, mut m)), (_, mut v)) in params
                .tensors_mut()
                .into_iter()
                .zip(grads.tensors())
                .zip(m.tensors_mut())
                .zip(v.tensors_mut())
            {
                Zip::from(&mut p)
                    .and(&g)
                    .and(&mut m)
                    .and(&mut v)
                    .for_each(|p, &g, m, v| {
                        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                    });
            }
        }
        OptimizerKind::Adadelta => {
            let eg = state.first.get_or_insert_with(|| params.zeros_like());
            let ed = state.second.get_or_insert_with(|| params.zeros_like());
            for ((((_, mut p), (_, g)), (_, mut eg)), (_, mut ed)) in params
                .tensors_mut()
                .into_iter()
                .zip(grads.tensors())
                .zip(eg.tensors_mut())
                .zip(ed.tensors_mut())
            {
                Zip::from(&mut p)
                    .and(&g)
                    .and(&mut eg)
                    .and(&mut ed)
                    .for_each(|p, &g, eg, ed| {
                        *eg = ADADELTA_RHO * *eg + (1.0 - ADADELTA_RHO) * g * g;
                        let delta =
                            -((*ed + ADADELTA_EPS).sqrt() / (*eg + ADADELTA_EPS).sqrt()) * g;
                        *ed = ADADELTA_RHO * *ed + (1.0 - ADADELTA_RHO) * delta * delta;
                        *p += lr * delta;
                    });
            }
        }
    }
    Ok(lr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttentionKind, ModelConfig};
    use approx::assert_abs_diff_eq;

    fn single(value: f64) -> ModelParams {
        let mut p = ModelParams::zeros(ModelConfig {
            src_vocab: 1,
            trg_vocab: 1,
            emb_dim: 1,
            state_dim: 1,
            att_dim: 1,
            attention: AttentionKind::Additive,
        });
        p.src_emb[[0, 0]] = value;
        p
    }

    fn cfg(optimizer: OptimizerKind, lr: f64) -> TrainConfig {
        TrainConfig {
            optimizer,
            learning_rate: lr,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn sgd_step() {
        let mut p = single(1.0);
        let mut st = OptimizerState::new();
        optimizer_step(&mut p, &single(0.5), &mut st, &cfg(OptimizerKind::Sgd, 0.1)).unwrap();
        assert_abs_diff_eq!(p.src_emb[[0, 0]], 0.95, epsilon = 1e-15);
    }

    #[test]
    fn adam_first_step_is_sign_times_lr() {
        for g in [0.5, -3.0, 1e-3] {
            let mut p = single(1.0);
            let mut st = OptimizerState::new();
            optimizer_step(&mut p, &single(g), &mut st, &cfg(OptimizerKind::Adam, 0.01)).unwrap();
            let expected = 1.0 - 0.01 * g / (g.abs() + ADAM_EPS);
            assert_abs_diff_eq!(p.src_emb[[0, 0]], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn adadelta_matches_reference_rule() {
        // reference: Zeiler's update written out for two steps
        let (rho, eps) = (0.95f64, 1e-6f64);
        let grads = [0.4, -0.2];
        let (mut eg, mut ed, mut theta) = (0.0f64, 0.0f64, 2.0f64);
        for g in grads {
            eg = rho * eg + (1.0 - rho) * g * g;
            let d = -(ed + eps).sqrt() / (eg + eps).sqrt() * g;
            ed = rho * ed + (1.0 - rho) * d * d;
            theta += d;
        }
        let mut p = single(2.0);
        let mut st = OptimizerState::new();
        for g in grads {
            optimizer_step(&mut p, &single(g), &mut st, &cfg(OptimizerKind::Adadelta, 1.0)).unwrap();
        }
        assert_abs_diff_eq!(p.src_emb[[0, 0]], theta, epsilon = 1e-15);
        // first-step magnitude in closed form
        let g: f64 = 0.4;
        let first = eps.sqrt() / ((1.0 - rho) * g * g + eps).sqrt() * g;
        let mut q = single(2.0);
        optimizer_step(&mut q, &single(g), &mut OptimizerState::new(), &cfg(OptimizerKind::Adadelta, 1.0)).unwrap();
        assert_abs_diff_eq!(2.0 - q.src_emb[[0, 0]], first, epsilon = 1e-15);
    }

    #[test]
    fn decoupled_weight_decay() {
        let mut p = single(2.0);
        let c = TrainConfig {
            weight_decay: 0.5,
            ..cfg(OptimizerKind::Sgd, 0.1)
        };
        optimizer_step(&mut p, &single(0.0), &mut OptimizerState::new(), &c).unwrap();
        assert_abs_diff_eq!(p.src_emb[[0, 0]], 2.0 - 0.1 * 0.5 * 2.0, epsilon = 1e-15);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut p = single(1.0);
        let mut other = ModelParams::zeros(ModelConfig {
            src_vocab: 2,
            ..p.config
        });
        other.src_emb.fill(1.0);
        assert!(optimizer_step(&mut p, &other, &mut OptimizerState::new(), &TrainConfig::default()).is_err());
    }

    #[test]
    fn schedules() {
        let base = TrainConfig::default();
        assert_eq!(schedule_lr(0.3, 17, &base).unwrap(), 0.3);
        let exp = TrainConfig {
            schedule: ScheduleKind::Exponential,
            lr_decay: 0.5,
            ..base.clone()
        };
        assert_abs_diff_eq!(schedule_lr(0.8, 3, &exp).unwrap(), 0.1, epsilon = 1e-15);
        let noam = TrainConfig {
            schedule: ScheduleKind::Noam,
            model_dim: 512,
            warmup_steps: 4000,
            ..base.clone()
        };
        assert_abs_diff_eq!(schedule_lr(1.0, 4000, &noam).unwrap(), 6.988e-4, epsilon = 1e-6);
        let lin = TrainConfig {
            schedule: ScheduleKind::Linear,
            total_steps: 10,
            ..base.clone()
        };
        assert_abs_diff_eq!(schedule_lr(1.0, 4, &lin).unwrap(), 0.6, epsilon = 1e-15);
        assert_eq!(schedule_lr(1.0, 20, &lin).unwrap(), 0.0);
        assert!(schedule_lr(1.0, 0, &base).is_err());
    }

    #[test]
    fn clipping() {
        let mut g = single(3.0);
        g.trg_emb[[0, 0]] = 4.0;
        let before = clip_gradients(&mut g, 1.0);
        assert_abs_diff_eq!(before, 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.src_emb[[0, 0]], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(g.trg_emb[[0, 0]], 0.8, epsilon = 1e-12);
        assert!(g.sq_norm().sqrt() <= 1.0);
        let once = g.clone();
        clip_gradients(&mut g, 1.0);
        assert_eq!(g, once);

        let mut small = single(0.1);
        let copy = small.clone();
        clip_gradients(&mut small, 1.0);
        assert_eq!(small, copy);
        let mut zero = single(0.0);
        clip_gradients(&mut zero, 1.0);
        assert_eq!(zero.sq_norm(), 0.0);
    }
}
