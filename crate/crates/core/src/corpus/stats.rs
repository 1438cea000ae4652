//! Corpus statistics: rating histogram and token-count summaries.
//!
//! Token counts are whitespace-token counts over the (normalized) field
//! text; this is deterministic and language-agnostic but will not match
//! statistics produced with a subword tokenizer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Domain, Language, Rating, Review};
use crate::error::{Error, Result};

/// Number of maximal non-whitespace runs.
pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Five-number-ish summary of a sequence of token counts. `std` is the
/// population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub min: usize,
    pub max: usize,
}

fn summarize(counts: &[usize]) -> SummaryStats {
    debug_assert!(!counts.is_empty());
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let var = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2] as f64
    } else {
        (sorted[sorted.len() / 2 - 1] as f64 + sorted[sorted.len() / 2] as f64) / 2.0
    };
    SummaryStats {
        mean,
        median,
        std: var.sqrt(),
        min: sorted[0],
        max: *sorted.last().unwrap(),
    }
}

/// Token summaries for one partition of the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSummaries {
    pub count: usize,
    pub title_tokens: SummaryStats,
    pub text_tokens: SummaryStats,
}

fn field_summaries(records: &[&Review]) -> FieldSummaries {
    let title_counts: Vec<usize> = records.iter().map(|r| count_tokens(&r.title)).collect();
    let text_counts: Vec<usize> = records.iter().map(|r| count_tokens(&r.text)).collect();
    FieldSummaries {
        count: records.len(),
        title_tokens: summarize(&title_counts),
        text_tokens: summarize(&text_counts),
    }
}

/// Corpus-level statistics in the shape of the dataset description:
/// rating histogram, token summaries overall and per language / domain,
/// and the number of records carrying a non-empty title.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    /// Keyed by rating value; all four classes are always present.
    pub rating_histogram: BTreeMap<u8, usize>,
    pub titles_present: usize,
    pub title_tokens: SummaryStats,
    pub text_tokens: SummaryStats,
    /// Keyed by language label; only languages present in the data appear.
    pub per_language: BTreeMap<String, FieldSummaries>,
    /// Keyed by domain label; only domains present in the data appear.
    pub per_domain: BTreeMap<String, FieldSummaries>,
}

/// Computes exact statistics over the dataset. Errors on an empty dataset.
pub fn compute_stats(ds: &Dataset) -> Result<CorpusStats> {
    if ds.is_empty() {
        return Err(Error::EmptyInput(format!(
            "cannot compute statistics ({})",
            ds.provenance
        )));
    }

    let mut rating_histogram: BTreeMap<u8, usize> =
        Rating::ALL.iter().map(|r| (r.as_u8(), 0)).collect();
    for record in &ds.records {
        *rating_histogram.get_mut(&record.rating.as_u8()).unwrap() += 1;
    }

    let all: Vec<&Review> = ds.records.iter().collect();
    let overall = field_summaries(&all);

    let mut per_language = BTreeMap::new();
    for language in Language::ALL {
        let records: Vec<&Review> = ds
            .records
            .iter()
            .filter(|r| r.language == language)
            .collect();
        if !records.is_empty() {
            per_language.insert(language.label().to_string(), field_summaries(&records));
        }
    }

    let mut per_domain = BTreeMap::new();
    for domain in Domain::ALL {
        let records: Vec<&Review> = ds.records.iter().filter(|r| r.domain == domain).collect();
        if !records.is_empty() {
            per_domain.insert(domain.label().to_string(), field_summaries(&records));
        }
    }

    Ok(CorpusStats {
        total: ds.len(),
        rating_histogram,
        titles_present: ds.records.iter().filter(|r| !r.title.is_empty()).count(),
        title_tokens: overall.title_tokens,
        text_tokens: overall.text_tokens,
        per_language,
        per_domain,
    })
}

/// Renders the statistics as a fixed-width text table.
pub fn render_stats_table(stats: &CorpusStats) -> String {
    let mut out = String::new();
    out.push_str(&format!("Records: {}\n", stats.total));
    out.push_str(&format!(
        "Titles present: {} ({:.1}%)\n\n",
        stats.titles_present,
        100.0 * stats.titles_present as f64 / stats.total as f64
    ));

    out.push_str("Rating histogram\n");
    for (rating, count) in &stats.rating_histogram {
        out.push_str(&format!("  {rating} stars  {count:>8}\n"));
    }
    out.push('\n');

    out.push_str(&format!(
        "{:<14} {:>8} {:>10} {:>8} {:>10} {:>6} {:>6}\n",
        "Tokens", "count", "mean", "median", "std", "min", "max"
    ));
    let mut row = |name: &str, count: usize, s: &SummaryStats| {
        out.push_str(&format!(
            "{:<14} {:>8} {:>10.2} {:>8.1} {:>10.2} {:>6} {:>6}\n",
            name, count, s.mean, s.median, s.std, s.min, s.max
        ));
    };
    row("text", stats.total, &stats.text_tokens);
    row("title", stats.total, &stats.title_tokens);
    for (label, fs) in &stats.per_language {
        row(&format!("text[{label}]"), fs.count, &fs.text_tokens);
    }
    for (label, fs) in &stats.per_domain {
        row(&format!("text[{label}]"), fs.count, &fs.text_tokens);
    }
    out
}
