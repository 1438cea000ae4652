//! Review dataset schema, normalization, quality checks, and statistics.

mod jsonl;
mod language;
mod normalize;
mod stats;

pub use jsonl::{read_jsonl, read_jsonl_reader, write_jsonl, write_jsonl_writer};
pub use language::{
    verify_language, Detection, FlagReason, LanguageDetector, QualityFlag, StopwordDetector,
    TableDetector, CONFIDENCE_THRESHOLD,
};
pub use normalize::{normalize_dataset, normalize_review, normalize_text};
pub use stats::{compute_stats, count_tokens, render_stats_table, CorpusStats, FieldSummaries, SummaryStats};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Star rating of a review. The corpus deliberately excludes 3-star
/// reviews, so the label space has four classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Rating {
    VeryNegative = 1,
    Negative = 2,
    Positive = 4,
    VeryPositive = 5,
}

impl Rating {
    /// All ratings in fixed class order (1, 2, 4, 5).
    pub const ALL: [Rating; 4] = [
        Rating::VeryNegative,
        Rating::Negative,
        Rating::Positive,
        Rating::VeryPositive,
    ];

    pub const NUM_CLASSES: usize = 4;

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    /// Dense class index in 0..4, following the fixed order (1, 2, 4, 5).
    pub fn class_index(self) -> usize {
        match self {
            Rating::VeryNegative => 0,
            Rating::Negative => 1,
            Rating::Positive => 2,
            Rating::VeryPositive => 3,
        }
    }

    pub fn from_class_index(index: usize) -> Option<Rating> {
        Rating::ALL.get(index).copied()
    }

    /// Positive polarity (4 or 5 stars).
    pub fn is_positive(self) -> bool {
        matches!(self, Rating::Positive | Rating::VeryPositive)
    }
}

impl TryFrom<u8> for Rating {
    type Error = String;

    fn try_from(value: u8) -> std::result::Result<Self, Self::Error> {
        match value {
            1 => Ok(Rating::VeryNegative),
            2 => Ok(Rating::Negative),
            4 => Ok(Rating::Positive),
            5 => Ok(Rating::VeryPositive),
            other => Err(format!("rating {other} is not one of 1, 2, 4, 5")),
        }
    }
}

impl From<Rating> for u8 {
    fn from(value: Rating) -> u8 {
        value.as_u8()
    }
}

impl std::fmt::Display for Rating {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Review language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    It,
    Ro,
}

impl Language {
    pub const ALL: [Language; 2] = [Language::It, Language::Ro];

    pub fn index(self) -> usize {
        match self {
            Language::It => 0,
            Language::Ro => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Language::It => "it",
            Language::Ro => "ro",
        }
    }

    /// Display name used in report tables.
    pub fn display(self) -> &'static str {
        match self {
            Language::It => "IT",
            Language::Ro => "RO",
        }
    }
}

/// Review domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Books,
    Movies,
    Music,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Books, Domain::Movies, Domain::Music];

    pub fn index(self) -> usize {
        match self {
            Domain::Books => 0,
            Domain::Movies => 1,
            Domain::Music => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Domain::Books => "books",
            Domain::Movies => "movies",
            Domain::Music => "music",
        }
    }

    pub fn display(self) -> &'static str {
        match self {
            Domain::Books => "Books",
            Domain::Movies => "Movies",
            Domain::Music => "Music",
        }
    }
}

/// Dataset split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn label(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// One labeled review record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub title: String,
    pub text: String,
    pub rating: Rating,
    pub language: Language,
    pub domain: Domain,
    pub split: Split,
}

/// An ordered collection of reviews plus a provenance label (file path,
/// generator seed, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<Review>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(records: Vec<Review>, provenance: impl Into<String>) -> Self {
        Dataset {
            records,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records belonging to one split, preserving order.
    pub fn split(&self, split: Split) -> Dataset {
        Dataset {
            records: self
                .records
                .iter()
                .filter(|r| r.split == split)
                .cloned()
                .collect(),
            provenance: format!("{}#{}", self.provenance, split.label()),
        }
    }

    /// Records belonging to one (language, domain) cell, preserving order.
    pub fn cell(&self, language: Language, domain: Domain) -> Vec<&Review> {
        self.records
            .iter()
            .filter(|r| r.language == language && r.domain == domain)
            .collect()
    }

    pub fn require_non_empty(&self, what: &str) -> Result<()> {
        if self.records.is_empty() {
            Err(Error::EmptyInput(format!("{what} ({})", self.provenance)))
        } else {
            Ok(())
        }
    }
}

/// Removes records whose (title, text) pair was already seen, keeping the
/// first occurrence and the original order. Returns the surviving dataset
/// and the number of removed records.
///
/// Keys are compared case-sensitively on the already-normalized fields.
pub fn deduplicate(ds: Dataset) -> (Dataset, usize) {
    let mut seen: HashSet<(String, String)> = HashSet::with_capacity(ds.records.len());
    let before = ds.records.len();
    let mut records = Vec::with_capacity(before);
    for record in ds.records {
        if seen.insert((record.title.clone(), record.text.clone())) {
            records.push(record);
        }
    }
    let removed = before - records.len();
    (
        Dataset {
            records,
            provenance: ds.provenance,
        },
        removed,
    )
}
