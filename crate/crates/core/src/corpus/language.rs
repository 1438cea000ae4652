//! Language verification against a pluggable detector.
//!
//! The detector is an injected dependency: anything that maps a text to a
//! (language label, confidence) pair can drive [`verify_language`]. A
//! deterministic stopword-based detector and a scripted table detector are
//! provided; production use would plug in an off-the-shelf identifier.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;

/// Records whose detection confidence falls below this value are flagged.
pub const CONFIDENCE_THRESHOLD: f64 = 0.95;

/// A language guess for one text.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Lowercase language label, e.g. `"it"`, `"ro"`, `"und"`.
    pub language: String,
    /// Detector confidence in [0, 1].
    pub confidence: f64,
}

/// Pluggable language-identification provider.
pub trait LanguageDetector {
    /// Detects the language of `text`. An `Err` means the detector itself
    /// failed on this record (not that the language is unknown).
    fn detect(&self, text: &str) -> std::result::Result<Detection, String>;
}

/// Why a record was flagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagReason {
    /// Detected language matches the declared one, but confidence < 0.95,
    /// or the detector failed outright (confidence 0).
    LowConfidence,
    /// Detected language differs from the declared one.
    LanguageMismatch,
}

/// A quality flag for one record. Indices refer to the dataset order at
/// verification time (before any deduplication).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityFlag {
    pub index: usize,
    pub reason: FlagReason,
    pub detected: String,
    pub confidence: f64,
}

/// Flags every record whose detected language differs from its declared
/// language, or whose detection confidence is below 0.95. The dataset is
/// not mutated; at most one flag is emitted per record, with a mismatch
/// taking precedence over low confidence.
pub fn verify_language(ds: &Dataset, detector: &dyn LanguageDetector) -> Vec<QualityFlag> {
    let mut flags = Vec::new();
    for (index, record) in ds.records.iter().enumerate() {
        match detector.detect(&record.text) {
            Err(_) => flags.push(QualityFlag {
                index,
                reason: FlagReason::LowConfidence,
                detected: "unknown".to_string(),
                confidence: 0.0,
            }),
            Ok(detection) => {
                if detection.language != record.language.label() {
                    flags.push(QualityFlag {
                        index,
                        reason: FlagReason::LanguageMismatch,
                        detected: detection.language,
                        confidence: detection.confidence,
                    });
                } else if detection.confidence < CONFIDENCE_THRESHOLD {
                    flags.push(QualityFlag {
                        index,
                        reason: FlagReason::LowConfidence,
                        detected: detection.language,
                        confidence: detection.confidence,
                    });
                }
            }
        }
    }
    flags
}

/// Scripted detector for tests: exact-text lookup with an optional
/// fallback. Texts without an entry (and no fallback) make the detector
/// fail, exercising the failure path of [`verify_language`].
#[derive(Debug, Default)]
pub struct TableDetector {
    entries: HashMap<String, Detection>,
    fallback: Option<Detection>,
}

impl TableDetector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_entry(mut self, text: &str, language: &str, confidence: f64) -> Self {
        self.entries.insert(
            text.to_string(),
            Detection {
                language: language.to_string(),
                confidence,
            },
        );
        self
    }

    pub fn with_fallback(mut self, language: &str, confidence: f64) -> Self {
        self.fallback = Some(Detection {
            language: language.to_string(),
            confidence,
        });
        self
    }
}

impl LanguageDetector for TableDetector {
    fn detect(&self, text: &str) -> std::result::Result<Detection, String> {
        self.entries
            .get(text)
            .or(self.fallback.as_ref())
            .cloned()
            .ok_or_else(|| "no scripted detection for text".to_string())
    }
}

// The two marker lists are kept disjoint: shared function words ("la",
// "un", "o", "de") would dilute every confidence score.
const ITALIAN_MARKERS: &[&str] = &[
    "il", "lo", "gli", "le", "di", "che", "è", "e", "una", "per", "non", "con", "sono", "come",
    "molto", "ma", "questo", "questa", "più", "anche", "della", "del", "nel",
];

const ROMANIAN_MARKERS: &[&str] = &[
    "și", "este", "nu", "pe", "care", "mai", "din", "că", "sunt", "foarte", "dar", "această",
    "acest", "pentru", "sau", "fost", "să", "am", "doar", "după",
];

/// Deterministic stopword-ratio detector for Italian and Romanian. The
/// confidence is the fraction of marker hits belonging to the winning
/// language; texts with no marker hits detect as `"und"` with confidence 0.
pub struct StopwordDetector;

impl LanguageDetector for StopwordDetector {
    fn detect(&self, text: &str) -> std::result::Result<Detection, String> {
        let mut hits_it = 0usize;
        let mut hits_ro = 0usize;
        for token in text.split_whitespace() {
            let word = token
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase();
            if word.is_empty() {
                continue;
            }
            if ITALIAN_MARKERS.contains(&word.as_str()) {
                hits_it += 1;
            }
            if ROMANIAN_MARKERS.contains(&word.as_str()) {
                hits_ro += 1;
            }
        }
        let total = hits_it + hits_ro;
        if total == 0 {
            return Ok(Detection {
                language: "und".to_string(),
                confidence: 0.0,
            });
        }
        // Ties resolve to Italian; the confidence of 0.5 flags them anyway.
        let (language, hits) = if hits_it >= hits_ro {
            ("it", hits_it)
        } else {
            ("ro", hits_ro)
        };
        Ok(Detection {
            language: language.to_string(),
            confidence: hits as f64 / total as f64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Domain, Language, Rating, Review, Split};

    fn review(text: &str, language: Language) -> Review {
        Review {
            title: String::new(),
            text: text.to_string(),
            rating: Rating::Positive,
            language,
            domain: Domain::Movies,
            split: Split::Train,
        }
    }

    #[test]
    fn confident_match_is_not_flagged() {
        let ds = Dataset::new(vec![review("ottimo", Language::It)], "t");
        let det = TableDetector::new().with_entry("ottimo", "it", 0.99);
        assert!(verify_language(&ds, &det).is_empty());
    }

    #[test]
    fn low_confidence_match_is_flagged() {
        let ds = Dataset::new(vec![review("bun", Language::Ro)], "t");
        let det = TableDetector::new().with_entry("bun", "ro", 0.90);
        let flags = verify_language(&ds, &det);
        assert_eq!(flags.len(), 1);
        assert_eq!(flags[0].reason, FlagReason::LowConfidence);
        assert!(flags[0].confidence < CONFIDENCE_THRESHOLD);
    }

    #[test]
    fn exactly_at_threshold_is_not_flagged() {
        let ds = Dataset::new(vec![review("x", Language::It)], "t");
        let det = TableDetector::new().with_entry("x", "it", 0.95);
        assert!(verify_language(&ds, &det).is_empty());
    }

    #[test]
    fn mismatch_is_flagged_even_when_confident() {
        let ds = Dataset::new(vec![review("ottimo", Language::It)], "t");
        let det = TableDetector::new().with_entry("ottimo", "ro", 0.99);
        let flags = verify_language(&ds, &det);
        assert_eq!(flags.len(), 1);
        assert_eq!(flags[0].reason, FlagReason::LanguageMismatch);
        assert_eq!(flags[0].detected, "ro");
    }

    #[test]
    fn detector_failure_flags_with_zero_confidence() {
        let ds = Dataset::new(vec![review("???", Language::It)], "t");
        let det = TableDetector::new(); // no entries, no fallback
        let flags = verify_language(&ds, &det);
        assert_eq!(flags.len(), 1);
        assert_eq!(flags[0].reason, FlagReason::LowConfidence);
        assert_eq!(flags[0].confidence, 0.0);
        assert_eq!(flags[0].detected, "unknown");
    }

    #[test]
    fn stopword_detector_separates_the_two_languages() {
        let it = StopwordDetector
            .detect("questo film è molto bello ma la trama non funziona")
            .unwrap();
        assert_eq!(it.language, "it");
        assert!(it.confidence > 0.9);

        let ro = StopwordDetector
            .detect("această carte este foarte bună dar nu pentru oricine")
            .unwrap();
        assert_eq!(ro.language, "ro");
        assert!(ro.confidence > 0.9);

        let und = StopwordDetector.detect("zzz qqq").unwrap();
        assert_eq!(und.language, "und");
        assert_eq!(und.confidence, 0.0);
    }
}
