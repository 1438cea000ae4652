//! Meta-learned adversarial coefficients.
//!
//! The coefficients are updated to reduce a validation meta-loss:
//!
//! ```text
//! lambda <- clamp(lambda - eta * d L_meta / d lambda, 0, 2)
//! ```
//!
//! where `L_meta(lambda)` is the *rating* loss on a validation batch after
//! a virtual plain-gradient step `theta' = theta - alpha * grad L_total`.
//! Because `grad L_total` is linear in lambda
//! (`d grad_theta L_total / d lambda1 = -grad_theta L_domain`), the chain
//! rule gives a closed-form first-order hypergradient:
//!
//! ```text
//! d L_meta / d lambda1 = alpha * < grad L_val(theta'), grad L_domain(theta) >
//! ```
//!
//! and analogously for lambda2 with the language loss. All gradient
//! evaluations here run the forward pass in evaluation mode (no dropout),
//! so the recipe is deterministic and finite-difference checkable. Model
//! parameters are never mutated; the virtual step works on a copy.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{forward, ModelConfig, ModelParams};
use crate::trainer::loss::Batch;

/// Lower clamp bound for the adversarial coefficients.
pub const LAMBDA_MIN: f64 = 0.0;
/// Upper clamp bound for the adversarial coefficients.
pub const LAMBDA_MAX: f64 = 2.0;

/// Adversarial coefficient state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaState {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Meta learning rate eta.
    pub meta_lr: f64,
    /// Optimizer steps between meta updates.
    pub update_interval: u64,
}

impl Default for MetaState {
    fn default() -> Self {
        MetaState {
            lambda1: 0.5,
            lambda2: 0.5,
            meta_lr: 0.01,
            update_interval: 100,
        }
    }
}

impl MetaState {
    pub fn lambda(&self) -> (f64, f64) {
        (self.lambda1, self.lambda2)
    }
}

/// Result of one meta update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaUpdate {
    pub lambda1: f64,
    pub lambda2: f64,
    pub hypergrad1: f64,
    pub hypergrad2: f64,
    /// Meta-loss value at the virtual parameters (diagnostic).
    pub meta_loss: f64,
}

/// Computes the first-order hypergradient of the validation meta-loss with
/// respect to both coefficients and returns the clamped new values.
/// `alpha` is the virtual-step size (the trainer passes the current
/// scheduled learning rate).
pub fn meta_update(
    cfg: &ModelConfig,
    params: &ModelParams,
    state: &MetaState,
    train_batch: &Batch,
    valid_batch: &Batch,
    alpha: f64,
) -> Result<MetaUpdate> {
    let gradients = eq1_gradients(cfg, params, train_batch, state.lambda())?;

    // Virtual plain-gradient step on a copy of the parameters.
    let mut virtual_params = params.clone();
    virtual_params.axpy(-alpha, &gradients.total);

    // Validation rating loss and its gradient at the virtual parameters.
    let mut pass = forward(cfg, &virtual_params, &valid_batch.features, None)?;
    let val_loss = pass
        .graph
        .softmax_cross_entropy(pass.rating_logits, &valid_batch.ratings)?;
    let meta_loss = pass.graph.value(val_loss).scalar_value();
    pass.graph.backward(val_loss)?;
    let val_grad = pass.gradients();

    let hypergrad1 = alpha * val_grad.dot(&gradients.domain);
    let hypergrad2 = alpha * val_grad.dot(&gradients.lang);

    Ok(MetaUpdate {
        lambda1: (state.lambda1 - state.meta_lr * hypergrad1).clamp(LAMBDA_MIN, LAMBDA_MAX),
        lambda2: (state.lambda2 - state.meta_lr * hypergrad2).clamp(LAMBDA_MIN, LAMBDA_MAX),
        hypergrad1,
        hypergrad2,
        meta_loss,
    })
}

/// Evaluates the rating loss on `valid_batch` after a virtual step taken
/// at coefficients `lambda` — the meta-loss as a plain function of lambda.
/// This is the same recipe `meta_update` differentiates; it exists so the
/// hypergradient can be finite-difference checked.
pub fn meta_loss_at(
    cfg: &ModelConfig,
    params: &ModelParams,
    train_batch: &Batch,
    valid_batch: &Batch,
    lambda: (f64, f64),
    alpha: f64,
) -> Result<f64> {
    let gradients = eq1_gradients(cfg, params, train_batch, lambda)?;
    let mut virtual_params = params.clone();
    virtual_params.axpy(-alpha, &gradients.total);
    let mut pass = forward(cfg, &virtual_params, &valid_batch.features, None)?;
    let val_loss = pass
        .graph
        .softmax_cross_entropy(pass.rating_logits, &valid_batch.ratings)?;
    Ok(pass.graph.value(val_loss).scalar_value())
}

struct Eq1Gradients {
    /// Gradient of the combined loss (loss-reversal form) at lambda.
    total: ModelParams,
    /// Gradient of the domain loss alone.
    domain: ModelParams,
    /// Gradient of the language loss alone.
    lang: ModelParams,
}

// One forward graph, three backward sweeps: combined total, domain loss
// alone, language loss alone.
fn eq1_gradients(
    cfg: &ModelConfig,
    params: &ModelParams,
    batch: &Batch,
    lambda: (f64, f64),
) -> Result<Eq1Gradients> {
    let mut pass = forward(cfg, params, &batch.features, None)?;
    let rating_loss = pass
        .graph
        .softmax_cross_entropy(pass.rating_logits, &batch.ratings)?;
    let domain_loss = pass
        .graph
        .softmax_cross_entropy(pass.domain_logits, &batch.domains)?;
    let lang_loss = pass
        .graph
        .softmax_cross_entropy(pass.lang_logits, &batch.langs)?;
    let total = pass.graph.scale_and_sum(&[
        (1.0, rating_loss),
        (-lambda.0, domain_loss),
        (-lambda.1, lang_loss),
    ])?;

    pass.graph.backward(total)?;
    let total_grad = pass.gradients();
    pass.graph.zero_grad();
    pass.graph.backward(domain_loss)?;
    let domain_grad = pass.gradients();
    pass.graph.zero_grad();
    pass.graph.backward(lang_loss)?;
    let lang_grad = pass.gradients();

    Ok(Eq1Gradients {
        total: total_grad,
        domain: domain_grad,
        lang: lang_grad,
    })
}
