//! AdamW with decoupled weight decay, global-norm gradient clipping, and a
//! linear warmup / linear decay learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, ParamBlock};

/// Optimizer hyperparameters. Defaults follow the training protocol used
/// for the encoder fine-tuning experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Fraction of total steps spent in linear warmup.
    pub warmup_ratio: f64,
    /// Global gradient-norm clip threshold.
    pub max_grad_norm: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 2e-5,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            warmup_ratio: 0.1,
            max_grad_norm: 1.0,
        }
    }
}

/// Schedule multiplier for the step about to be applied, given the number
/// of already completed steps. Linear 0 -> 1 over the warmup span, then
/// linear 1 -> 0 over the rest; the first step always has a positive rate.
pub fn schedule_factor(completed_steps: u64, total_steps: u64, warmup_ratio: f64) -> f64 {
    let total = total_steps.max(1);
    let warmup = ((warmup_ratio * total as f64).ceil() as u64).min(total);
    if completed_steps < warmup {
        (completed_steps + 1) as f64 / warmup as f64
    } else if total == warmup {
        1.0
    } else {
        let remaining = total.saturating_sub(completed_steps);
        remaining as f64 / (total - warmup) as f64
    }
}

/// Where the current step sits in the overall schedule.
#[derive(Debug, Clone, Copy)]
pub struct SchedulePosition {
    /// Optimizer steps completed before this one.
    pub completed_steps: u64,
    /// Planned total number of optimizer steps.
    pub total_steps: u64,
}

/// What one optimizer step did.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    /// Learning rate actually applied (base rate times schedule factor).
    pub learning_rate: f64,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    pub clipped: bool,
}

/// AdamW state: first and second moment accumulators mirroring the
/// parameter blocks, plus the bias-correction step count.
pub struct AdamW {
    cfg: OptimizerConfig,
    m: ModelParams,
    v: ModelParams,
    step: u64,
}

impl AdamW {
    pub fn new(cfg: OptimizerConfig, like: &ModelParams) -> AdamW {
        AdamW {
            cfg,
            m: like.zeros_like(),
            v: like.zeros_like(),
            step: 0,
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    /// Applies one update in place. The gradient is clipped to the global
    /// norm bound first; the weight-decay term is decoupled from the
    /// adaptive update. Non-finite gradients abort before any state is
    /// touched, naming the offending block.
    pub fn step(
        &mut self,
        params: &mut ModelParams,
        grads: &mut ModelParams,
        position: SchedulePosition,
    ) -> Result<StepInfo> {
        for block in ParamBlock::ALL {
            if !grads.block(block).is_all_finite() {
                return Err(Error::NonFiniteGradient {
                    block: block.name(),
                });
            }
        }

        let grad_norm = grads.global_norm();
        let clipped = grad_norm > self.cfg.max_grad_norm;
        if clipped {
            let factor = self.cfg.max_grad_norm / grad_norm;
            for block in ParamBlock::ALL {
                grads.block_mut(block).scale(factor);
            }
        }

        let learning_rate = self.cfg.learning_rate
            * schedule_factor(
                position.completed_steps,
                position.total_steps,
                self.cfg.warmup_ratio,
            );

        self.step += 1;
        let bias1 = 1.0 - self.cfg.beta1.powi(self.step as i32);
        let bias2 = 1.0 - self.cfg.beta2.powi(self.step as i32);

        for block in ParamBlock::ALL {
            let g = grads.block(block).data();
            let m = self.m.block_mut(block).data_mut();
            for (mi, &gi) in m.iter_mut().zip(g) {
                *mi = self.cfg.beta1 * *mi + (1.0 - self.cfg.beta1) * gi;
            }
            let v = self.v.block_mut(block).data_mut();
            for (vi, &gi) in v.iter_mut().zip(g) {
                *vi = self.cfg.beta2 * *vi + (1.0 - self.cfg.beta2) * gi * gi;
            }
            let m = self.m.block(block).data();
            let v = self.v.block(block).data();
            let p = params.block_mut(block).data_mut();
            for i in 0..p.len() {
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                let adaptive = m_hat / (v_hat.sqrt() + self.cfg.epsilon);
                p[i] -= learning_rate * (adaptive + self.cfg.weight_decay * p[i]);
            }
        }

        Ok(StepInfo {
            learning_rate,
            grad_norm,
            clipped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn tiny_params() -> ModelParams {
        ModelParams::init(
            &ModelConfig {
                hash_dim: 2,
                hidden_dim: 2,
                dropout: 0.0,
            },
            0,
        )
    }

    fn full_schedule() -> SchedulePosition {
        SchedulePosition {
            completed_steps: 100,
            total_steps: 1000,
        }
    }

    #[test]
    fn zero_gradients_apply_pure_weight_decay() {
        let mut params = tiny_params();
        params.encoder_weight.fill(1.0);
        let mut grads = params.zeros_like();
        let mut opt = AdamW::new(OptimizerConfig::default(), &params);
        // Position chosen so the schedule factor is exactly 1.
        let info = opt
            .step(
                &mut params,
                &mut grads,
                SchedulePosition {
                    completed_steps: 99,
                    total_steps: 1000,
                },
            )
            .unwrap();
        assert_eq!(info.learning_rate, 2e-5);
        for &p in params.encoder_weight.data() {
            assert_eq!(p, 1.0 - 2e-7);
        }
        assert!(!info.clipped);
    }

    #[test]
    fn large_gradients_are_clipped_to_unit_norm() {
        let mut params = tiny_params();
        let mut grads = params.zeros_like();
        grads.encoder_weight.fill(5.0); // norm = 10 over 4 entries
        let mut opt = AdamW::new(OptimizerConfig::default(), &params);
        let info = opt.step(&mut params, &mut grads, full_schedule()).unwrap();
        assert!((info.grad_norm - 10.0).abs() < 1e-12);
        assert!(info.clipped);
        assert!((grads.global_norm() - 1.0).abs() < 1e-12);
    }

    // One full update on a 2-parameter toy, checked against the closed
    // form evaluated independently below.
    #[test]
    fn single_step_matches_closed_form() {
        let cfg = OptimizerConfig {
            learning_rate: 0.1,
            weight_decay: 0.01,
            warmup_ratio: 0.0,
            ..OptimizerConfig::default()
        };
        let mut params = tiny_params();
        let theta = [0.5f64, -1.5];
        params.rating_bias.data_mut()[..2].copy_from_slice(&theta);
        let mut grads = params.zeros_like();
        let g = [0.3f64, -0.2];
        grads.rating_bias.data_mut()[..2].copy_from_slice(&g);

        let mut opt = AdamW::new(cfg.clone(), &params);
        opt.step(
            &mut params,
            &mut grads,
            SchedulePosition {
                completed_steps: 0,
                total_steps: 1,
            },
        )
        .unwrap();

        // Closed form for step 1 (norm 0.36... < 1, no clipping):
        // m_hat = g, v_hat = g^2, update = g / (|g| + eps).
        for i in 0..2 {
            let m_hat = g[i]; // (1-b1) g / (1-b1)
            let v_hat = g[i] * g[i];
            let expected = theta[i] - 0.1 * (m_hat / (v_hat.sqrt() + cfg.epsilon) + 0.01 * theta[i]);
            let actual = params.rating_bias.data()[i];
            assert!(
                (actual - expected).abs() < 1e-15,
                "param {i}: {actual} vs {expected}"
            );
        }
    }

    #[test]
    fn non_finite_gradient_names_the_block() {
        let mut params = tiny_params();
        let mut grads = params.zeros_like();
        grads.domain_weight.data_mut()[0] = f64::NAN;
        let mut opt = AdamW::new(OptimizerConfig::default(), &params);
        match opt.step(&mut params, &mut grads, full_schedule()) {
            Err(Error::NonFiniteGradient { block }) => assert_eq!(block, "domain.weight"),
            other => panic!("expected non-finite gradient error, got {other:?}"),
        }
    }

    #[test]
    fn schedule_warms_up_then_decays_linearly() {
        let warmup = 0.1;
        // 100 total steps -> 10 warmup steps.
        assert_eq!(schedule_factor(0, 100, warmup), 0.1);
        assert_eq!(schedule_factor(9, 100, warmup), 1.0);
        assert_eq!(schedule_factor(10, 100, warmup), 1.0);
        assert_eq!(schedule_factor(55, 100, warmup), 0.5);
        assert_eq!(schedule_factor(99, 100, warmup), 1.0 / 90.0);
        // Never zero during training, monotone up then down.
        for s in 0..100 {
            assert!(schedule_factor(s, 100, warmup) > 0.0);
        }
    }
}
