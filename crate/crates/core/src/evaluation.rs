//! Accuracy, macro-F1, and the per-domain / per-language report.
//!
//! Metrics are reported as percentages in [0, 100]. Macro-F1 always
//! averages over the four rating classes; a class absent from both gold
//! and predictions contributes an F1 of 0, which keeps the metric total
//! and deterministic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Domain, Language, Rating, Review};
use crate::error::{Error, Result};

/// How per-domain and per-language aggregates are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Pool all predictions of the group and recompute the metrics.
    #[default]
    Pooled,
    /// Average the per-cell metric values inside the group.
    CellAverage,
}

/// Percentage of exact matches.
pub fn accuracy(gold: &[Rating], pred: &[Rating]) -> Result<f64> {
    let pred: Vec<Option<Rating>> = pred.iter().copied().map(Some).collect();
    accuracy_with_failures(gold, &pred)
}

/// Accuracy where a `None` prediction (e.g. an unparseable completion)
/// counts as incorrect while keeping the denominator fixed.
pub fn accuracy_with_failures(gold: &[Rating], pred: &[Option<Rating>]) -> Result<f64> {
    check_lengths(gold.len(), pred.len())?;
    let correct = gold
        .iter()
        .zip(pred)
        .filter(|(g, p)| **p == Some(**g))
        .count();
    Ok(100.0 * correct as f64 / gold.len() as f64)
}

/// Unweighted mean of per-class F1 over the rating classes (1, 2, 4, 5).
pub fn macro_f1(gold: &[Rating], pred: &[Rating]) -> Result<f64> {
    let pred: Vec<Option<Rating>> = pred.iter().copied().map(Some).collect();
    macro_f1_with_failures(gold, &pred)
}

/// Macro-F1 where a `None` prediction counts as a false negative for the
/// gold class and a false positive for nothing.
pub fn macro_f1_with_failures(gold: &[Rating], pred: &[Option<Rating>]) -> Result<f64> {
    check_lengths(gold.len(), pred.len())?;
    let classes = Rating::NUM_CLASSES;
    let mut tp = vec![0u64; classes];
    let mut fp = vec![0u64; classes];
    let mut fn_ = vec![0u64; classes];
    for (g, p) in gold.iter().zip(pred) {
        match p {
            Some(p) if p == g => tp[g.class_index()] += 1,
            Some(p) => {
                fp[p.class_index()] += 1;
                fn_[g.class_index()] += 1;
            }
            None => fn_[g.class_index()] += 1,
        }
    }
    let mut sum = 0.0;
    for c in 0..classes {
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        if denom > 0 {
            sum += 2.0 * tp[c] as f64 / denom as f64;
        }
    }
    Ok(100.0 * sum / classes as f64)
}

fn check_lengths(gold: usize, pred: usize) -> Result<()> {
    if gold == 0 {
        return Err(Error::EmptyInput("no predictions to score".to_string()));
    }
    if gold != pred {
        return Err(Error::ShapeMismatch {
            op: "metrics",
            lhs: vec![gold],
            rhs: vec![pred],
        });
    }
    Ok(())
}

/// Metrics for one group of predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub count: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// One (language, domain) cell of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub language: Language,
    pub domain: Domain,
    #[serde(flatten)]
    pub metrics: GroupMetrics,
}

/// Report in the layout of the result tables: per-cell metrics, per-domain
/// and per-language aggregates, and an `average` over cells. Cells without
/// test examples are absent rather than reported as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub aggregation: Aggregation,
    pub cells: Vec<CellEntry>,
    pub domains: BTreeMap<String, GroupMetrics>,
    pub languages: BTreeMap<String, GroupMetrics>,
    /// Unweighted mean of accuracy / macro-F1 over the present cells.
    pub average: GroupMetrics,
}

/// Builds the full report. `records` supplies gold rating, language, and
/// domain for each aligned prediction.
pub fn build_report(
    records: &[Review],
    pred: &[Option<Rating>],
    aggregation: Aggregation,
) -> Result<MetricsReport> {
    check_lengths(records.len(), pred.len())?;

    let subset_metrics = |keep: &dyn Fn(&Review) -> bool| -> Result<Option<GroupMetrics>> {
        let mut gold = Vec::new();
        let mut predictions = Vec::new();
        for (r, p) in records.iter().zip(pred) {
            if keep(r) {
                gold.push(r.rating);
                predictions.push(*p);
            }
        }
        if gold.is_empty() {
            return Ok(None);
        }
        Ok(Some(GroupMetrics {
            count: gold.len(),
            accuracy: accuracy_with_failures(&gold, &predictions)?,
            macro_f1: macro_f1_with_failures(&gold, &predictions)?,
        }))
    };

    let mut cells = Vec::new();
    for language in Language::ALL {
        for domain in Domain::ALL {
            if let Some(metrics) =
                subset_metrics(&|r| r.language == language && r.domain == domain)?
            {
                cells.push(CellEntry {
                    language,
                    domain,
                    metrics,
                });
            }
        }
    }

    let cell_mean = |keep: &dyn Fn(&CellEntry) -> bool| -> Option<GroupMetrics> {
        let selected: Vec<&CellEntry> = cells.iter().filter(|c| keep(c)).collect();
        if selected.is_empty() {
            return None;
        }
        let n = selected.len() as f64;
        Some(GroupMetrics {
            count: selected.iter().map(|c| c.metrics.count).sum(),
            accuracy: selected.iter().map(|c| c.metrics.accuracy).sum::<f64>() / n,
            macro_f1: selected.iter().map(|c| c.metrics.macro_f1).sum::<f64>() / n,
        })
    };

    let mut domains = BTreeMap::new();
    for domain in Domain::ALL {
        let metrics = match aggregation {
            Aggregation::Pooled => subset_metrics(&|r| r.domain == domain)?,
            Aggregation::CellAverage => cell_mean(&|c| c.domain == domain),
        };
        if let Some(metrics) = metrics {
            domains.insert(domain.label().to_string(), metrics);
        }
    }
    let mut languages = BTreeMap::new();
    for language in Language::ALL {
        let metrics = match aggregation {
            Aggregation::Pooled => subset_metrics(&|r| r.language == language)?,
            Aggregation::CellAverage => cell_mean(&|c| c.language == language),
        };
        if let Some(metrics) = metrics {
            languages.insert(language.label().to_string(), metrics);
        }
    }

    let average = cell_mean(&|_| true).expect("at least one non-empty cell");

    Ok(MetricsReport {
        aggregation,
        cells,
        domains,
        languages,
        average,
    })
}

/// Renders the report as a fixed-width table in the result-table column
/// order: Books / Movies / Music / IT / RO / Avg., each with accuracy and
/// macro-F1. A second block lists the individual cells.
pub fn render_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    let columns: Vec<(String, Option<&GroupMetrics>)> = Domain::ALL
        .iter()
        .map(|d| (d.display().to_string(), report.domains.get(d.label())))
        .chain(
            Language::ALL
                .iter()
                .map(|l| (l.display().to_string(), report.languages.get(l.label()))),
        )
        .chain(std::iter::once((
            "Avg.".to_string(),
            Some(&report.average),
        )))
        .collect();

    out.push_str(&format!("{:<10}", ""));
    for (name, _) in &columns {
        out.push_str(&format!("{name:^16}"));
    }
    out.push('\n');
    out.push_str(&format!("{:<10}", ""));
    for _ in &columns {
        out.push_str(&format!("{:>7} {:>8}", "Acc.", "F1"));
    }
    out.push('\n');
    out.push_str(&format!("{:<10}", "overall"));
    for (_, metrics) in &columns {
        match metrics {
            Some(m) => out.push_str(&format!("{:>7.2} {:>8.2}", m.accuracy, m.macro_f1)),
            None => out.push_str(&format!("{:>7} {:>8}", "--", "--")),
        }
    }
    out.push('\n');

    out.push('\n');
    out.push_str(&format!(
        "{:<14} {:>8} {:>8} {:>8}\n",
        "cell", "count", "Acc.", "F1"
    ));
    for cell in &report.cells {
        out.push_str(&format!(
            "{:<14} {:>8} {:>8.2} {:>8.2}\n",
            format!("{}/{}", cell.language.label(), cell.domain.label()),
            cell.metrics.count,
            cell.metrics.accuracy,
            cell.metrics.macro_f1
        ));
    }
    out
}
