//! Shared encoder with three single-layer classification heads over hashed
//! bag-of-words features.
//!
//! The architecture: a feature vector of width `hash_dim` goes through one
//! linear layer plus ReLU into a hidden representation shared by all three
//! heads (rating, domain, language). In training mode an independent
//! dropout mask is applied to the hidden state before each head's
//! projection.

mod checkpoint;

pub use checkpoint::{read_checkpoint, write_checkpoint};

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, NodeId, Tensor};
use crate::corpus::{Domain, Language, Rating};
use crate::error::{Error, Result};

/// Model dimensions and regularization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Feature hashing dimension D.
    pub hash_dim: usize,
    /// Hidden width H of the shared encoder.
    pub hidden_dim: usize,
    /// Dropout probability applied to the hidden state before each head.
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hash_dim: 4096,
            hidden_dim: 256,
            dropout: 0.1,
        }
    }
}

/// Sparse hashed feature vector (indices strictly increasing).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVec {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl FeatureVec {
    /// Densifies into a row of width `dim`.
    pub fn write_dense(&self, row: &mut [f64]) {
        row.fill(0.0);
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            row[i as usize] = v;
        }
    }
}

/// Deterministic hashed bag-of-words featurizer.
///
/// Title and body are concatenated with a `[SEP]` token (omitted when the
/// title is empty), whitespace-tokenized, and truncated to the first
/// `max_tokens` tokens. Each token is hashed with 64-bit FNV-1a, its count
/// accumulated at `hash % hash_dim`, and the vector is l2-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub hash_dim: usize,
    pub max_tokens: usize,
}

/// Separator token inserted between a non-empty title and the body.
pub const SEPARATOR_TOKEN: &str = "[SEP]";

impl Default for Featurizer {
    fn default() -> Self {
        Featurizer {
            hash_dim: 4096,
            max_tokens: 128,
        }
    }
}

impl Featurizer {
    pub fn new(hash_dim: usize) -> Featurizer {
        Featurizer {
            hash_dim,
            ..Featurizer::default()
        }
    }

    /// Dense feature vector of length `hash_dim`. Empty title and text
    /// give the zero vector.
    pub fn featurize(&self, title: &str, text: &str) -> Vec<f64> {
        let sparse = self.featurize_sparse(title, text);
        let mut dense = vec![0.0; self.hash_dim];
        sparse.write_dense(&mut dense);
        dense
    }

    /// Sparse variant of [`Featurizer::featurize`].
    pub fn featurize_sparse(&self, title: &str, text: &str) -> FeatureVec {
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        let title_tokens = title.split_whitespace();
        let separator = if title.split_whitespace().next().is_some() {
            Some(SEPARATOR_TOKEN)
        } else {
            None
        };
        let tokens = title_tokens
            .chain(separator)
            .chain(text.split_whitespace())
            .take(self.max_tokens);
        for token in tokens {
            let index = (fnv1a_64(token.as_bytes()) % self.hash_dim as u64) as u32;
            *counts.entry(index).or_insert(0.0) += 1.0;
        }
        let norm = counts.values().map(|v| v * v).sum::<f64>().sqrt();
        let (indices, values) = counts
            .into_iter()
            .map(|(i, v)| (i, if norm > 0.0 { v / norm } else { v }))
            .unzip();
        FeatureVec { indices, values }
    }
}

/// 64-bit FNV-1a hash; fixed here so feature indices are identical across
/// platforms and runs.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(PRIME);
    }
    hash
}

/// Identifies one of the eight parameter tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamBlock {
    EncoderWeight,
    EncoderBias,
    RatingWeight,
    RatingBias,
    DomainWeight,
    DomainBias,
    LangWeight,
    LangBias,
}

impl ParamBlock {
    pub const ALL: [ParamBlock; 8] = [
        ParamBlock::EncoderWeight,
        ParamBlock::EncoderBias,
        ParamBlock::RatingWeight,
        ParamBlock::RatingBias,
        ParamBlock::DomainWeight,
        ParamBlock::DomainBias,
        ParamBlock::LangWeight,
        ParamBlock::LangBias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamBlock::EncoderWeight => "encoder.weight",
            ParamBlock::EncoderBias => "encoder.bias",
            ParamBlock::RatingWeight => "rating.weight",
            ParamBlock::RatingBias => "rating.bias",
            ParamBlock::DomainWeight => "domain.weight",
            ParamBlock::DomainBias => "domain.bias",
            ParamBlock::LangWeight => "lang.weight",
            ParamBlock::LangBias => "lang.bias",
        }
    }

    /// Whether this block belongs to one of the two adversarial heads.
    pub fn is_adversarial_head(self) -> bool {
        matches!(
            self,
            ParamBlock::DomainWeight
                | ParamBlock::DomainBias
                | ParamBlock::LangWeight
                | ParamBlock::LangBias
        )
    }
}

/// Encoder weights plus the three head weight sets. The same container is
/// used for gradients and optimizer moments, which always mirror the
/// parameter shapes block by block.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoder_weight: Tensor,
    pub encoder_bias: Tensor,
    pub rating_weight: Tensor,
    pub rating_bias: Tensor,
    pub domain_weight: Tensor,
    pub domain_bias: Tensor,
    pub lang_weight: Tensor,
    pub lang_bias: Tensor,
}

impl ModelParams {
    /// Glorot-uniform initialization: weights from uniform(-b, b) with
    /// b = sqrt(6 / (fan_in + fan_out)), biases zero. Deterministic in the
    /// seed.
    pub fn init(cfg: &ModelConfig, seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut glorot = |rows: usize, cols: usize| -> Tensor {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            let data = (0..rows * cols)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            Tensor::new(vec![rows, cols], data).expect("sized here")
        };
        let (d, h) = (cfg.hash_dim, cfg.hidden_dim);
        ModelParams {
            encoder_weight: glorot(d, h),
            rating_weight: glorot(h, Rating::NUM_CLASSES),
            domain_weight: glorot(h, Domain::ALL.len()),
            lang_weight: glorot(h, Language::ALL.len()),
            encoder_bias: Tensor::zeros(vec![h]),
            rating_bias: Tensor::zeros(vec![Rating::NUM_CLASSES]),
            domain_bias: Tensor::zeros(vec![Domain::ALL.len()]),
            lang_bias: Tensor::zeros(vec![Language::ALL.len()]),
        }
    }

    pub fn zeros_like(&self) -> ModelParams {
        let z = |t: &Tensor| Tensor::zeros(t.shape().to_vec());
        ModelParams {
            encoder_weight: z(&self.encoder_weight),
            encoder_bias: z(&self.encoder_bias),
            rating_weight: z(&self.rating_weight),
            rating_bias: z(&self.rating_bias),
            domain_weight: z(&self.domain_weight),
            domain_bias: z(&self.domain_bias),
            lang_weight: z(&self.lang_weight),
            lang_bias: z(&self.lang_bias),
        }
    }

    pub fn block(&self, block: ParamBlock) -> &Tensor {
        match block {
            ParamBlock::EncoderWeight => &self.encoder_weight,
            ParamBlock::EncoderBias => &self.encoder_bias,
            ParamBlock::RatingWeight => &self.rating_weight,
            ParamBlock::RatingBias => &self.rating_bias,
            ParamBlock::DomainWeight => &self.domain_weight,
            ParamBlock::DomainBias => &self.domain_bias,
            ParamBlock::LangWeight => &self.lang_weight,
            ParamBlock::LangBias => &self.lang_bias,
        }
    }

    pub fn block_mut(&mut self, block: ParamBlock) -> &mut Tensor {
        match block {
            ParamBlock::EncoderWeight => &mut self.encoder_weight,
            ParamBlock::EncoderBias => &mut self.encoder_bias,
            ParamBlock::RatingWeight => &mut self.rating_weight,
            ParamBlock::RatingBias => &mut self.rating_bias,
            ParamBlock::DomainWeight => &mut self.domain_weight,
            ParamBlock::DomainBias => &mut self.domain_bias,
            ParamBlock::LangWeight => &mut self.lang_weight,
            ParamBlock::LangBias => &mut self.lang_bias,
        }
    }

    /// Inner product over all blocks in fixed block order.
    pub fn dot(&self, other: &ModelParams) -> f64 {
        ParamBlock::ALL
            .iter()
            .map(|&b| {
                self.block(b)
                    .data()
                    .iter()
                    .zip(other.block(b).data())
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
            })
            .sum()
    }

    /// `self += alpha * other`, block by block.
    pub fn axpy(&mut self, alpha: f64, other: &ModelParams) {
        for block in ParamBlock::ALL {
            self.block_mut(block).axpy(alpha, other.block(block));
        }
    }

    pub fn global_norm(&self) -> f64 {
        ParamBlock::ALL
            .iter()
            .map(|&b| self.block(b).squared_norm())
            .sum::<f64>()
            .sqrt()
    }
}

/// Node handles for the parameters inside a built forward graph.
pub struct ParamNodes {
    pub encoder_weight: NodeId,
    pub encoder_bias: NodeId,
    pub rating_weight: NodeId,
    pub rating_bias: NodeId,
    pub domain_weight: NodeId,
    pub domain_bias: NodeId,
    pub lang_weight: NodeId,
    pub lang_bias: NodeId,
}

impl ParamNodes {
    pub fn node(&self, block: ParamBlock) -> NodeId {
        match block {
            ParamBlock::EncoderWeight => self.encoder_weight,
            ParamBlock::EncoderBias => self.encoder_bias,
            ParamBlock::RatingWeight => self.rating_weight,
            ParamBlock::RatingBias => self.rating_bias,
            ParamBlock::DomainWeight => self.domain_weight,
            ParamBlock::DomainBias => self.domain_bias,
            ParamBlock::LangWeight => self.lang_weight,
            ParamBlock::LangBias => self.lang_bias,
        }
    }
}

/// A forward pass: the graph plus handles to everything the caller needs
/// to attach losses and read gradients.
pub struct ForwardPass {
    pub graph: Graph,
    pub params: ParamNodes,
    pub rating_logits: NodeId,
    pub domain_logits: NodeId,
    pub lang_logits: NodeId,
}

impl ForwardPass {
    /// Copies the accumulated parameter gradients out of the graph.
    pub fn gradients(&self) -> ModelParams {
        ModelParams {
            encoder_weight: self.graph.grad(self.params.encoder_weight).clone(),
            encoder_bias: self.graph.grad(self.params.encoder_bias).clone(),
            rating_weight: self.graph.grad(self.params.rating_weight).clone(),
            rating_bias: self.graph.grad(self.params.rating_bias).clone(),
            domain_weight: self.graph.grad(self.params.domain_weight).clone(),
            domain_bias: self.graph.grad(self.params.domain_bias).clone(),
            lang_weight: self.graph.grad(self.params.lang_weight).clone(),
            lang_bias: self.graph.grad(self.params.lang_bias).clone(),
        }
    }
}

/// Builds the forward graph for a `[batch, hash_dim]` feature tensor.
/// `dropout_rng: Some(..)` selects training mode (three independent
/// dropout masks on the shared hidden state, one per head);
/// `None` selects evaluation mode, a pure function of (params, features).
pub fn forward(
    cfg: &ModelConfig,
    params: &ModelParams,
    features: &Tensor,
    mut dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<ForwardPass> {
    if features.shape().len() != 2 || features.cols() != cfg.hash_dim {
        return Err(Error::ShapeMismatch {
            op: "forward",
            lhs: features.shape().to_vec(),
            rhs: vec![cfg.hash_dim],
        });
    }
    let mut graph = Graph::new();
    let x = graph.leaf(features.clone());
    let nodes = ParamNodes {
        encoder_weight: graph.leaf(params.encoder_weight.clone()),
        encoder_bias: graph.leaf(params.encoder_bias.clone()),
        rating_weight: graph.leaf(params.rating_weight.clone()),
        rating_bias: graph.leaf(params.rating_bias.clone()),
        domain_weight: graph.leaf(params.domain_weight.clone()),
        domain_bias: graph.leaf(params.domain_bias.clone()),
        lang_weight: graph.leaf(params.lang_weight.clone()),
        lang_bias: graph.leaf(params.lang_bias.clone()),
    };

    let pre = graph.matmul(x, nodes.encoder_weight)?;
    let pre = graph.add_bias(pre, nodes.encoder_bias)?;
    let hidden = graph.relu(pre);

    let head = |graph: &mut Graph,
                    dropout_rng: &mut Option<&mut ChaCha8Rng>,
                    weight: NodeId,
                    bias: NodeId|
     -> Result<NodeId> {
        let input = match dropout_rng {
            Some(rng) if cfg.dropout > 0.0 => graph.dropout(hidden, cfg.dropout, rng)?,
            _ => hidden,
        };
        let logits = graph.matmul(input, weight)?;
        graph.add_bias(logits, bias)
    };

    let rating_logits = head(
        &mut graph,
        &mut dropout_rng,
        nodes.rating_weight,
        nodes.rating_bias,
    )?;
    let domain_logits = head(
        &mut graph,
        &mut dropout_rng,
        nodes.domain_weight,
        nodes.domain_bias,
    )?;
    let lang_logits = head(
        &mut graph,
        &mut dropout_rng,
        nodes.lang_weight,
        nodes.lang_bias,
    )?;

    Ok(ForwardPass {
        graph,
        params: nodes,
        rating_logits,
        domain_logits,
        lang_logits,
    })
}

/// Evaluation-mode rating predictions (argmax over the rating head) for a
/// feature batch. Ties resolve to the lower class index.
pub fn predict_ratings(
    cfg: &ModelConfig,
    params: &ModelParams,
    features: &Tensor,
) -> Result<Vec<Rating>> {
    let pass = forward(cfg, params, features, None)?;
    let logits = pass.graph.value(pass.rating_logits);
    let classes = logits.cols();
    Ok((0..logits.rows())
        .map(|i| {
            let row = &logits.data()[i * classes..(i + 1) * classes];
            let mut best = 0;
            for j in 1..classes {
                if row[j] > row[best] {
                    best = j;
                }
            }
            Rating::from_class_index(best).expect("4-class head")
        })
        .collect())
}
