//! Synthetic review generator with a controllable domain confound.
//!
//! Every (language, domain, split) cell receives exactly the configured
//! number of records. Token streams mix three sources:
//!
//! - *sentiment tokens*, drawn from a rating-specific block of a shared
//!   sentiment vocabulary but surfaced with a language prefix, so the
//!   rating signal exists in both languages under disjoint surface forms
//!   (language shift);
//! - *domain tokens*, surfaced with a domain prefix and split into two
//!   flavor halves; the flavor tracks the record's polarity with
//!   probability `(1 + rho)/2` in Italian cells and `(1 - rho)/2` in
//!   Romanian cells, where `rho` is `rho_train` on the train/valid splits
//!   and `rho_test` on the test split. Keying the sign to the language
//!   keeps each surface's marginal correlation with rating at zero, so the
//!   planted shortcut is only readable through cell-identifying features —
//!   exactly the features adversarial invariance removes. Flipping the
//!   sign between train and test then punishes any model that took the
//!   shortcut;
//! - *noise tokens*, uniform over a per-language surface vocabulary.
//!
//! Review lengths follow a geometric distribution around the per-language
//! mean, truncated to [1, 512]. Generation is fully deterministic in the
//! seed; every cell derives its own stream from the master seed, so cells
//! are independent of each other's sizes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Domain, Language, Rating, Review, Split};
use crate::error::{Error, Result};

/// Fraction of tokens drawn from the sentiment vocabulary.
const SENTIMENT_FRACTION: f64 = 0.10;
/// Probability that a sentiment token reflects the record's true rating
/// block (otherwise it is drawn from a uniformly random block). The noise
/// makes the honest signal weaker than the planted confound, which is what
/// lets the confound tempt a plain classifier.
const SENTIMENT_PURITY: f64 = 0.75;
/// Fraction of tokens drawn from the domain vocabulary.
const DOMAIN_FRACTION: f64 = 0.35;
/// Probability that an Italian-like record carries a title.
const TITLE_PROB_IT: f64 = 0.8;
/// Probability that a Romanian-like record carries a title.
const TITLE_PROB_RO: f64 = 0.25;
/// Hard cap on generated review length in tokens.
const MAX_LENGTH: usize = 512;

/// Generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    /// Records per (language, domain, split) cell.
    pub per_cell: usize,
    /// Size of the shared sentiment vocabulary (split into 4 rating blocks).
    pub sentiment_vocab: usize,
    /// Size of each language's surface (noise) vocabulary.
    pub surface_vocab: usize,
    /// Size of each domain's vocabulary (split into 2 polarity flavors).
    pub domain_vocab: usize,
    /// Domain-token/rating correlation on the train and valid splits.
    pub rho_train: f64,
    /// Domain-token/rating correlation on the test split.
    pub rho_test: f64,
    /// Mean review length for Italian-like records.
    pub mean_len_it: f64,
    /// Mean review length for Romanian-like records.
    pub mean_len_ro: f64,
    /// 0 = constant lengths at the mean, 1 = fully geometric.
    pub length_dispersion: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 42,
            per_cell: 2000,
            sentiment_vocab: 400,
            surface_vocab: 2000,
            domain_vocab: 600,
            rho_train: 0.9,
            rho_test: -0.9,
            mean_len_it: 37.0,
            mean_len_ro: 89.0,
            length_dispersion: 1.0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.per_cell == 0 {
            return bad("per_cell must be positive".to_string());
        }
        if self.sentiment_vocab < Rating::NUM_CLASSES {
            return bad(format!(
                "sentiment_vocab must be at least {}, got {}",
                Rating::NUM_CLASSES,
                self.sentiment_vocab
            ));
        }
        if self.surface_vocab == 0 || self.domain_vocab < 2 {
            return bad("surface_vocab must be >= 1 and domain_vocab >= 2".to_string());
        }
        for (name, rho) in [("rho_train", self.rho_train), ("rho_test", self.rho_test)] {
            if !(-1.0..=1.0).contains(&rho) {
                return bad(format!("{name} must be in [-1, 1], got {rho}"));
            }
        }
        for (name, mean) in [("mean_len_it", self.mean_len_it), ("mean_len_ro", self.mean_len_ro)] {
            if !(1.0..=MAX_LENGTH as f64).contains(&mean) {
                return bad(format!("{name} must be in [1, {MAX_LENGTH}], got {mean}"));
            }
        }
        if !(0.0..=1.0).contains(&self.length_dispersion) {
            return bad(format!(
                "length_dispersion must be in [0, 1], got {}",
                self.length_dispersion
            ));
        }
        Ok(())
    }
}

/// Generates the full 2 x 3 x 3 grid of cells. Records are emitted split
/// by split (train, valid, test), languages and domains nested inside.
pub fn generate(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(cfg.per_cell * 18);
    for (split_idx, split) in Split::ALL.into_iter().enumerate() {
        let rho = if split == Split::Test {
            cfg.rho_test
        } else {
            cfg.rho_train
        };
        for (lang_idx, language) in Language::ALL.into_iter().enumerate() {
            for (domain_idx, domain) in Domain::ALL.into_iter().enumerate() {
                let cell = split_idx * 6 + lang_idx * 3 + domain_idx;
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(cell as u64 + 1);
                for i in 0..cfg.per_cell {
                    records.push(generate_record(
                        cfg, &mut rng, i, language, domain, split, rho,
                    ));
                }
            }
        }
    }
    Ok(Dataset::new(
        records,
        format!("synthetic(seed={})", cfg.seed),
    ))
}

#[allow(clippy::too_many_arguments)]
fn generate_record(
    cfg: &GenConfig,
    rng: &mut ChaCha8Rng,
    index_in_cell: usize,
    language: Language,
    domain: Domain,
    split: Split,
    rho: f64,
) -> Review {
    // Cycling through the classes keeps each cell's rating marginal
    // exactly uniform.
    let rating = Rating::ALL[index_in_cell % Rating::NUM_CLASSES];
    let mean = match language {
        Language::It => cfg.mean_len_it,
        Language::Ro => cfg.mean_len_ro,
    };
    let length = sample_length(rng, mean, cfg.length_dispersion);
    let text = (0..length)
        .map(|_| draw_token(cfg, rng, rating, language, domain, rho))
        .collect::<Vec<_>>()
        .join(" ");

    let title_prob = match language {
        Language::It => TITLE_PROB_IT,
        Language::Ro => TITLE_PROB_RO,
    };
    let title = if rng.gen::<f64>() < title_prob {
        let n = rng.gen_range(1..=3);
        (0..n)
            .map(|_| draw_token(cfg, rng, rating, language, domain, rho))
            .collect::<Vec<_>>()
            .join(" ")
    } else {
        String::new()
    };

    Review {
        title,
        text,
        rating,
        language,
        domain,
        split,
    }
}

fn draw_token(
    cfg: &GenConfig,
    rng: &mut ChaCha8Rng,
    rating: Rating,
    language: Language,
    domain: Domain,
    rho: f64,
) -> String {
    let source: f64 = rng.gen();
    if source < SENTIMENT_FRACTION {
        let class = if rng.gen::<f64>() < SENTIMENT_PURITY {
            rating.class_index()
        } else {
            rng.gen_range(0..Rating::NUM_CLASSES)
        };
        let per_class = (cfg.sentiment_vocab / Rating::NUM_CLASSES).max(1);
        let id = rng.gen_range(0..per_class);
        format!("{}_s{}_{}", language.label(), class, id)
    } else if source < SENTIMENT_FRACTION + DOMAIN_FRACTION {
        let aligned = rng.gen::<f64>() < (1.0 + rho) / 2.0;
        let mut positive_flavor = rating.is_positive() == aligned;
        if language == Language::Ro {
            positive_flavor = !positive_flavor;
        }
        let half = (cfg.domain_vocab / 2).max(1);
        let id = rng.gen_range(0..half);
        let flavor = if positive_flavor { 'p' } else { 'n' };
        format!("{}_t{}_{}", domain.label(), flavor, id)
    } else {
        let id = rng.gen_range(0..cfg.surface_vocab);
        format!("{}_w{}", language.label(), id)
    }
}

// Geometric length around `mean`, blended toward the constant mean by
// (1 - dispersion), truncated to [1, MAX_LENGTH].
fn sample_length(rng: &mut ChaCha8Rng, mean: f64, dispersion: f64) -> usize {
    let p = (1.0 / mean).clamp(f64::MIN_POSITIVE, 1.0);
    let geometric = if p >= 1.0 {
        1.0
    } else {
        let u: f64 = rng.gen();
        ((1.0 - u).ln() / (1.0 - p).ln()).ceil().max(1.0)
    };
    let length = (1.0 - dispersion) * mean + dispersion * geometric;
    (length.round() as usize).clamp(1, MAX_LENGTH)
}
