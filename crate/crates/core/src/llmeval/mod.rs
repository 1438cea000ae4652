//! Few-shot prompt rendering, completion querying, and rating-prediction
//! scoring.
//!
//! Prompt rendering is byte-exact and pure: the same request always
//! produces the same bytes. Completions are parsed leniently — the first
//! standalone digit from the rating label space wins — and unparseable
//! completions are recorded as failures and scored as incorrect, keeping
//! denominators comparable across models.

mod client;

pub use client::{CompletionClient, CompletionConfig, CompletionRequest, CompletionResponse};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Dataset, Domain, Language, Rating, Review};
use crate::error::{Error, Result};

/// One in-context example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    pub title: String,
    pub review: String,
    pub rating: Rating,
}

impl Shot {
    /// Builds a shot, rejecting ratings outside the label space (like 3).
    pub fn new(title: impl Into<String>, review: impl Into<String>, rating: u8) -> Result<Shot> {
        let rating = Rating::try_from(rating).map_err(Error::InvalidArgument)?;
        Ok(Shot {
            title: title.into(),
            review: review.into(),
            rating,
        })
    }

    fn from_review(review: &Review) -> Shot {
        Shot {
            title: review.title.clone(),
            review: review.text.clone(),
            rating: review.rating,
        }
    }
}

/// Template kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateKind {
    ZeroShot,
    MultiShot,
}

/// A fully specified prompt: kind, shots, and the target review.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptRequest {
    pub kind: TemplateKind,
    pub shots: Vec<Shot>,
    pub target_title: String,
    pub target_review: String,
}

impl PromptRequest {
    pub fn zero_shot(title: impl Into<String>, review: impl Into<String>) -> PromptRequest {
        PromptRequest {
            kind: TemplateKind::ZeroShot,
            shots: Vec::new(),
            target_title: title.into(),
            target_review: review.into(),
        }
    }

    /// Multi-shot request; requires at least one shot.
    pub fn multi_shot(
        shots: Vec<Shot>,
        title: impl Into<String>,
        review: impl Into<String>,
    ) -> Result<PromptRequest> {
        if shots.is_empty() {
            return Err(Error::InvalidArgument(
                "multi-shot prompt needs at least one shot".to_string(),
            ));
        }
        Ok(PromptRequest {
            kind: TemplateKind::MultiShot,
            shots,
            target_title: title.into(),
            target_review: review.into(),
        })
    }
}

const PROMPT_HEADER: &str = "You are a review rating predictor. Given a review text, predict its rating on a scale of 1 to 5 (except 3).\n\
\n\
1 = Very negative\n\
2 = Negative\n\
4 = Positive\n\
5 = Very positive\n\
\n\
Only respond with a single number (1, 2, 4, or 5).\n";

/// Renders the prompt bytes for a request. Zero-shot prompts end with the
/// bare `Rating:` cue; multi-shot prompts number their examples
/// (`Title1:`, `Review1:`, `Rating1:`, ...) and append the target after
/// `Now predict the rating for this review:`.
pub fn render_prompt(request: &PromptRequest) -> String {
    let mut out = String::from(PROMPT_HEADER);
    match request.kind {
        TemplateKind::ZeroShot => {
            out.push('\n');
        }
        TemplateKind::MultiShot => {
            out.push_str("\nHere are some examples:\n\n");
            for (i, shot) in request.shots.iter().enumerate() {
                let n = i + 1;
                out.push_str(&format!(
                    "Title{n}: {}\nReview{n}: {}\nRating{n}: {}\n\n",
                    shot.title, shot.review, shot.rating
                ));
            }
            out.push_str("Now predict the rating for this review:\n");
        }
    }
    out.push_str(&format!(
        "Title: {}\nReview: {}\nRating:",
        request.target_title, request.target_review
    ));
    out
}

/// Hex SHA-256 of the rendered prompt, used to key run-log entries.
pub fn prompt_hash(prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Deterministically samples `k` shots from the (language, domain) cell of
/// the source dataset, balanced over the rating classes as far as `k`
/// allows: classes are visited in the fixed order 1, 2, 4, 5, drawing one
/// seeded-random example per visit without replacement.
pub fn select_shots(
    source: &Dataset,
    language: Language,
    domain: Domain,
    k: usize,
    seed: u64,
) -> Result<Vec<Shot>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let cell = source.cell(language, domain);
    if k > cell.len() {
        return Err(Error::InvalidArgument(format!(
            "requested {k} shots but the {}/{} cell has only {} records",
            language.label(),
            domain.label(),
            cell.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buckets: Vec<Vec<&Review>> = vec![Vec::new(); Rating::NUM_CLASSES];
    for review in &cell {
        buckets[review.rating.class_index()].push(review);
    }
    for bucket in &mut buckets {
        bucket.shuffle(&mut rng);
    }
    let mut shots = Vec::with_capacity(k);
    let mut class = 0usize;
    let mut exhausted = 0usize;
    while shots.len() < k && exhausted < Rating::NUM_CLASSES {
        match buckets[class].pop() {
            Some(review) => {
                shots.push(Shot::from_review(review));
                exhausted = 0;
            }
            None => exhausted += 1,
        }
        class = (class + 1) % Rating::NUM_CLASSES;
    }
    debug_assert_eq!(shots.len(), k);
    Ok(shots)
}

/// Extracts the first standalone digit belonging to the rating label space
/// ({1, 2, 4, 5}); a digit is standalone when its neighbors are not
/// alphanumeric. Returns `None` (a recorded parse failure) otherwise.
pub fn parse_rating(completion: &str) -> Option<Rating> {
    let alnum = |c: Option<&char>| c.is_some_and(|c| c.is_alphanumeric());
    let chars: Vec<char> = completion.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let rating = match c {
            '1' => Rating::VeryNegative,
            '2' => Rating::Negative,
            '4' => Rating::Positive,
            '5' => Rating::VeryPositive,
            _ => continue,
        };
        let prev = if i == 0 { None } else { chars.get(i - 1) };
        if !alnum(prev) && !alnum(chars.get(i + 1)) {
            return Some(rating);
        }
    }
    None
}

/// Harness settings for one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    /// In-context examples per prompt; 0 selects the zero-shot template.
    pub shots: usize,
    /// Seed for shot selection.
    pub seed: u64,
    /// Maximum in-flight queries.
    pub concurrency: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            shots: 0,
            seed: 42,
            concurrency: 1,
        }
    }
}

/// One scored record of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub index: usize,
    pub prompt_sha256: String,
    pub completion: String,
    /// Parsed rating, or `null` for a recorded parse failure.
    pub parsed: Option<u8>,
    pub latency_ms: u64,
}

/// Outcome of an evaluation run: one log entry and one scored outcome
/// (prediction or recorded failure) per input record, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub records: Vec<EvalRecord>,
    pub predictions: Vec<Option<Rating>>,
    pub parse_failures: usize,
}

/// Evaluates every record of `test` against the endpoint: shots come from
/// the matching (language, domain) cell of `shot_source`, one query is
/// issued per record (plus transport retries), and unparseable completions
/// are recorded as failures. Results preserve input order regardless of
/// the concurrency level.
pub fn run_eval(
    client: &CompletionClient,
    test: &Dataset,
    shot_source: &Dataset,
    settings: &EvalSettings,
) -> Result<EvalOutcome> {
    test.require_non_empty("evaluation split")?;
    if settings.concurrency == 0 {
        return Err(Error::InvalidArgument(
            "concurrency must be at least 1".to_string(),
        ));
    }

    // Shots are per cell and deterministic, so compute them once.
    let mut cell_shots: std::collections::BTreeMap<(Language, Domain), Vec<Shot>> =
        std::collections::BTreeMap::new();
    if settings.shots > 0 {
        for record in &test.records {
            let key = (record.language, record.domain);
            if !cell_shots.contains_key(&key) {
                let shots =
                    select_shots(shot_source, key.0, key.1, settings.shots, settings.seed)?;
                cell_shots.insert(key, shots);
            }
        }
    }

    let prompts: Vec<String> = test
        .records
        .iter()
        .map(|record| {
            let request = if settings.shots == 0 {
                PromptRequest::zero_shot(record.title.clone(), record.text.clone())
            } else {
                PromptRequest {
                    kind: TemplateKind::MultiShot,
                    shots: cell_shots[&(record.language, record.domain)].clone(),
                    target_title: record.title.clone(),
                    target_review: record.text.clone(),
                }
            };
            render_prompt(&request)
        })
        .collect();

    let mut results: Vec<Option<Result<(String, u64)>>> = (0..prompts.len()).map(|_| None).collect();
    for (chunk_index, chunk) in prompts.chunks(settings.concurrency).enumerate() {
        let offset = chunk_index * settings.concurrency;
        if settings.concurrency == 1 {
            results[offset] = Some(timed_query(client, &chunk[0]));
        } else {
            let chunk_results: Vec<Result<(String, u64)>> = std::thread::scope(|scope| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|prompt| scope.spawn(move || timed_query(client, prompt)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("query worker never panics"))
                    .collect()
            });
            for (i, r) in chunk_results.into_iter().enumerate() {
                results[offset + i] = Some(r);
            }
        }
    }

    let mut records = Vec::with_capacity(prompts.len());
    let mut predictions = Vec::with_capacity(prompts.len());
    let mut parse_failures = 0usize;
    for (index, (prompt, result)) in prompts.iter().zip(results).enumerate() {
        let (completion, latency_ms) = result.expect("every slot filled")?;
        let parsed = parse_rating(&completion);
        if parsed.is_none() {
            parse_failures += 1;
        }
        records.push(EvalRecord {
            index,
            prompt_sha256: prompt_hash(prompt),
            completion,
            parsed: parsed.map(Rating::as_u8),
            latency_ms,
        });
        predictions.push(parsed);
    }

    Ok(EvalOutcome {
        records,
        predictions,
        parse_failures,
    })
}

fn timed_query(client: &CompletionClient, prompt: &str) -> Result<(String, u64)> {
    let start = std::time::Instant::now();
    let completion = client.query(prompt)?;
    Ok((completion, start.elapsed().as_millis() as u64))
}
