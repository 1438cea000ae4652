//! The combined training objective.
//!
//! The total loss is
//!
//! ```text
//! L = L_rating - lambda1 * L_domain - lambda2 * L_lang
//! ```
//!
//! and the three training modes differ in which gradients flow where:
//!
//! - `LossReversal`: one backward pass on `L` updates every parameter,
//!   adversarial heads included — the heads ascend their own losses with
//!   weight lambda.
//! - `GradientReversal`: the encoder (and rating head) receive exactly the
//!   same gradients as in `LossReversal`, but each adversarial head
//!   receives the plain gradient of its own loss (it keeps learning to
//!   discriminate while the encoder works against it).
//! - `Baseline`: only `L_rating` contributes; lambdas are pinned to zero
//!   and the adversarial heads receive no gradient at all.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::corpus::Review;
use crate::error::{Error, Result};
use crate::model::{forward, Featurizer, ModelConfig, ModelParams, ParamBlock};

/// Which adversarial scheme drives the update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    Baseline,
    LossReversal,
    GradientReversal,
}

impl std::fmt::Display for TrainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            TrainMode::Baseline => "baseline",
            TrainMode::LossReversal => "loss-reversal",
            TrainMode::GradientReversal => "gradient-reversal",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for TrainMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(TrainMode::Baseline),
            "loss-reversal" => Ok(TrainMode::LossReversal),
            "gradient-reversal" => Ok(TrainMode::GradientReversal),
            other => Err(format!(
                "unknown mode `{other}` (expected baseline, loss-reversal, or gradient-reversal)"
            )),
        }
    }
}

/// Component losses of one batch. `total` always satisfies
/// `total == rating - lambda1 * domain - lambda2 * lang` bit-for-bit
/// (in `Baseline` mode the adversarial components are reported as 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub rating: f64,
    pub domain: f64,
    pub lang: f64,
    pub total: f64,
}

/// One featurized minibatch with all three label channels.
#[derive(Debug, Clone)]
pub struct Batch {
    /// `[batch, hash_dim]` feature matrix.
    pub features: Tensor,
    /// Rating class indices (0..4).
    pub ratings: Vec<usize>,
    /// Domain indices (0..3).
    pub domains: Vec<usize>,
    /// Language indices (0..2).
    pub langs: Vec<usize>,
}

impl Batch {
    pub fn new(
        features: Tensor,
        ratings: Vec<usize>,
        domains: Vec<usize>,
        langs: Vec<usize>,
    ) -> Result<Batch> {
        if features.shape().len() != 2 {
            return Err(Error::InvalidArgument(
                "batch features must be a [batch, dim] matrix".to_string(),
            ));
        }
        let batch = features.rows();
        if batch == 0 {
            return Err(Error::EmptyInput("batch with no rows".to_string()));
        }
        for (channel, labels) in [
            ("rating", &ratings),
            ("domain", &domains),
            ("language", &langs),
        ] {
            if labels.len() != batch {
                return Err(Error::InvalidArgument(format!(
                    "missing or misaligned {channel} labels: {} for {batch} rows",
                    labels.len()
                )));
            }
        }
        Ok(Batch {
            features,
            ratings,
            domains,
            langs,
        })
    }

    /// Featurizes a slice of records into one batch.
    pub fn from_records(featurizer: &Featurizer, records: &[&Review]) -> Result<Batch> {
        if records.is_empty() {
            return Err(Error::EmptyInput("batch with no records".to_string()));
        }
        let rows: Vec<Vec<f64>> = records
            .iter()
            .map(|r| featurizer.featurize(&r.title, &r.text))
            .collect();
        Batch::new(
            Tensor::from_rows(&rows)?,
            records.iter().map(|r| r.rating.class_index()).collect(),
            records.iter().map(|r| r.domain.index()).collect(),
            records.iter().map(|r| r.language.index()).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Evaluates the combined loss and returns the per-parameter gradients for
/// the requested mode. `dropout_rng: Some(..)` runs the forward pass in
/// training mode; `None` makes the result deterministic (used by gradient
/// checks and the meta update).
pub fn combined_loss(
    cfg: &ModelConfig,
    params: &ModelParams,
    batch: &Batch,
    lambda: (f64, f64),
    mode: TrainMode,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<(LossBreakdown, ModelParams)> {
    let (lambda1, lambda2) = match mode {
        TrainMode::Baseline => (0.0, 0.0),
        _ => lambda,
    };
    let mut pass = forward(cfg, params, &batch.features, dropout_rng)?;

    let rating_loss = pass
        .graph
        .softmax_cross_entropy(pass.rating_logits, &batch.ratings)?;

    if mode == TrainMode::Baseline {
        // Only the primary task contributes; domain/language labels are
        // never touched.
        pass.graph.backward(rating_loss)?;
        let rating = pass.graph.value(rating_loss).scalar_value();
        let breakdown = LossBreakdown {
            rating,
            domain: 0.0,
            lang: 0.0,
            total: rating,
        };
        return Ok((breakdown, pass.gradients()));
    }

    let domain_loss = pass
        .graph
        .softmax_cross_entropy(pass.domain_logits, &batch.domains)?;
    let lang_loss = pass
        .graph
        .softmax_cross_entropy(pass.lang_logits, &batch.langs)?;
    let total = pass.graph.scale_and_sum(&[
        (1.0, rating_loss),
        (-lambda1, domain_loss),
        (-lambda2, lang_loss),
    ])?;

    let breakdown = LossBreakdown {
        rating: pass.graph.value(rating_loss).scalar_value(),
        domain: pass.graph.value(domain_loss).scalar_value(),
        lang: pass.graph.value(lang_loss).scalar_value(),
        total: pass.graph.value(total).scalar_value(),
    };

    pass.graph.backward(total)?;
    let mut grads = pass.gradients();

    if mode == TrainMode::GradientReversal {
        // Replace the adversarial heads' reversed gradients with the plain
        // gradients of their own losses; encoder and rating-head gradients
        // from the combined pass are kept as-is.
        pass.graph.zero_grad();
        pass.graph.backward(domain_loss)?;
        for block in [ParamBlock::DomainWeight, ParamBlock::DomainBias] {
            *grads.block_mut(block) = pass.graph.grad(pass.params.node(block)).clone();
        }
        pass.graph.zero_grad();
        pass.graph.backward(lang_loss)?;
        for block in [ParamBlock::LangWeight, ParamBlock::LangBias] {
            *grads.block_mut(block) = pass.graph.grad(pass.params.node(block)).clone();
        }
    }

    Ok((breakdown, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Domain, Language, Rating, Split};

    fn cfg() -> ModelConfig {
        ModelConfig {
            hash_dim: 16,
            hidden_dim: 6,
            dropout: 0.1,
        }
    }

    fn toy_batch(cfg: &ModelConfig) -> Batch {
        let featurizer = Featurizer::new(cfg.hash_dim);
        let reviews: Vec<Review> = (0..8)
            .map(|i| Review {
                title: String::new(),
                text: format!("tok{} tok{} shared", i % 5, (i * 3) % 7),
                rating: Rating::ALL[i % 4],
                language: Language::ALL[i % 2],
                domain: Domain::ALL[i % 3],
                split: Split::Train,
            })
            .collect();
        let refs: Vec<&Review> = reviews.iter().collect();
        Batch::from_records(&featurizer, &refs).unwrap()
    }

    #[test]
    fn eq1_identity_holds_bitwise() {
        let cfg = cfg();
        let params = ModelParams::init(&cfg, 42);
        let batch = toy_batch(&cfg);
        for lambda in [(0.5, 0.5), (0.3, 1.7), (0.0, 2.0)] {
            let (bd, _) = combined_loss(
                &cfg,
                &params,
                &batch,
                lambda,
                TrainMode::LossReversal,
                None,
            )
            .unwrap();
            let expected = bd.rating - lambda.0 * bd.domain - lambda.1 * bd.lang;
            assert_eq!(bd.total, expected);
            assert!(bd.rating >= 0.0 && bd.domain >= 0.0 && bd.lang >= 0.0);
        }
    }

    #[test]
    fn zero_lambdas_match_baseline_total_and_zero_head_gradients() {
        let cfg = cfg();
        let params = ModelParams::init(&cfg, 7);
        let batch = toy_batch(&cfg);
        let (bd, grads) = combined_loss(
            &cfg,
            &params,
            &batch,
            (0.0, 0.0),
            TrainMode::LossReversal,
            None,
        )
        .unwrap();
        assert_eq!(bd.total, bd.rating);
        for block in ParamBlock::ALL.into_iter().filter(|b| b.is_adversarial_head()) {
            assert!(grads.block(block).data().iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn worked_eq1_arithmetic() {
        // 1.0 - 0.5*0.5 - 0.5*0.4 = 0.55, checked through the same
        // accumulation the loss node uses.
        let bd = LossBreakdown {
            rating: 1.0,
            domain: 0.5,
            lang: 0.4,
            total: 1.0 - 0.5 * 0.5 - 0.5 * 0.4,
        };
        assert_eq!(bd.total, 0.55);
    }

    #[test]
    fn baseline_ignores_domain_and_language_labels() {
        let cfg = cfg();
        let params = ModelParams::init(&cfg, 3);
        let batch = toy_batch(&cfg);
        let mut permuted = batch.clone();
        permuted.domains.rotate_left(3);
        permuted.langs.rotate_left(1);
        let (bd_a, g_a) =
            combined_loss(&cfg, &params, &batch, (0.5, 0.5), TrainMode::Baseline, None).unwrap();
        let (bd_b, g_b) =
            combined_loss(&cfg, &params, &permuted, (0.5, 0.5), TrainMode::Baseline, None)
                .unwrap();
        assert_eq!(bd_a, bd_b);
        assert_eq!(g_a, g_b);
        assert_eq!(bd_a.domain, 0.0);
        assert_eq!(bd_a.lang, 0.0);
    }

    // Loss-reversal head property: the combined backward hands the
    // adversarial heads exactly -lambda times their own-loss gradient.
    #[test]
    fn reversed_head_gradients_scale_by_minus_lambda() {
        let cfg = cfg();
        let params = ModelParams::init(&cfg, 11);
        let batch = toy_batch(&cfg);
        let lambda = (0.5, 0.25); // powers of two: the relation is exact
        let (_, reversed) = combined_loss(
            &cfg,
            &params,
            &batch,
            lambda,
            TrainMode::LossReversal,
            None,
        )
        .unwrap();
        let (_, plain) = combined_loss(
            &cfg,
            &params,
            &batch,
            lambda,
            TrainMode::GradientReversal,
            None,
        )
        .unwrap();
        for (block, l) in [
            (ParamBlock::DomainWeight, lambda.0),
            (ParamBlock::DomainBias, lambda.0),
            (ParamBlock::LangWeight, lambda.1),
            (ParamBlock::LangBias, lambda.1),
        ] {
            for (r, p) in reversed
                .block(block)
                .data()
                .iter()
                .zip(plain.block(block).data())
            {
                assert_eq!(*r, -l * p, "block {}", block.name());
            }
        }
    }

    #[test]
    fn encoder_gradients_agree_across_adversarial_modes() {
        let cfg = cfg();
        let params = ModelParams::init(&cfg, 13);
        let batch = toy_batch(&cfg);
        let lambda = (0.7, 1.3);
        let (bd_lr, g_lr) = combined_loss(
            &cfg,
            &params,
            &batch,
            lambda,
            TrainMode::LossReversal,
            None,
        )
        .unwrap();
        let (bd_gr, g_gr) = combined_loss(
            &cfg,
            &params,
            &batch,
            lambda,
            TrainMode::GradientReversal,
            None,
        )
        .unwrap();
        assert_eq!(bd_lr, bd_gr);
        for block in [
            ParamBlock::EncoderWeight,
            ParamBlock::EncoderBias,
            ParamBlock::RatingWeight,
            ParamBlock::RatingBias,
        ] {
            assert_eq!(
                g_lr.block(block).data(),
                g_gr.block(block).data(),
                "block {}",
                block.name()
            );
        }
    }

    #[test]
    fn misaligned_label_channel_is_an_error() {
        let features = Tensor::zeros(vec![2, 4]);
        assert!(Batch::new(features, vec![0, 1], vec![0], vec![0, 1]).is_err());
    }

    #[test]
    fn training_mode_consumes_dropout_randomness_deterministically() {
        use rand::SeedableRng;
        let cfg = cfg();
        let params = ModelParams::init(&cfg, 21);
        let batch = toy_batch(&cfg);
        let mut rng_a = ChaCha8Rng::seed_from_u64(5);
        let mut rng_b = ChaCha8Rng::seed_from_u64(5);
        let (bd_a, g_a) = combined_loss(
            &cfg,
            &params,
            &batch,
            (0.5, 0.5),
            TrainMode::LossReversal,
            Some(&mut rng_a),
        )
        .unwrap();
        let (bd_b, g_b) = combined_loss(
            &cfg,
            &params,
            &batch,
            (0.5, 0.5),
            TrainMode::LossReversal,
            Some(&mut rng_b),
        )
        .unwrap();
        assert_eq!(bd_a, bd_b);
        assert_eq!(g_a, g_b);
    }
}
