//! Text normalization pipeline.
//!
//! The pipeline applies, in this fixed order:
//!
//! 1. HTML tag removal and entity decoding, iterated to a fixed point with
//!    at most 3 decode passes (handles double-encoded input).
//! 2. URL and email replacement with the literal tokens `[URL]` and
//!    `[EMAIL]`.
//! 3. Punctuation run collapsing: runs of 4+ identical punctuation marks,
//!    and mixed runs of 4+ terminal marks (`.`, `!`, `?`), are reduced to
//!    their first 3 characters.
//! 4. Every maximal whitespace run (spaces, tabs, non-breaking spaces,
//!    newlines, any Unicode whitespace) becomes a single space.
//! 5. Leading and trailing whitespace is trimmed.
//!
//! The order is part of the output contract: structured tokens (tags,
//! entities, URLs, emails) are rewritten before the destructive collapsing
//! steps so that, e.g., `&nbsp;` still folds into whitespace and a URL's
//! trailing slashes are never mistaken for a punctuation run.

use std::sync::LazyLock;

use regex::Regex;

use crate::corpus::{Dataset, Review};

/// Replacement token for URLs (maximal non-whitespace runs starting with
/// `http://`, `https://`, or `www.`).
pub const URL_TOKEN: &str = "[URL]";
/// Replacement token for email addresses.
pub const EMAIL_TOKEN: &str = "[EMAIL]";

// A tag is `<`, an optional `/`, an ASCII letter, then anything up to the
// next `>`. Comments are handled separately. Plain-text uses of `<` and `>`
// ("3 < 5") survive.
static TAG_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<!--.*?-->|</?[A-Za-z][^<>]*>").unwrap());

static EMAIL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}").unwrap());

static NON_WS_RUN_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\S+").unwrap());

/// Normalizes a raw review field. Total on valid UTF-8 and idempotent:
/// re-applying the pipeline leaves its own output unchanged (for entity
/// encodings nested deeper than the 3-pass decode cap, idempotence holds
/// from the first re-application onward).
pub fn normalize_text(raw: &str) -> String {
    let stripped = strip_html(raw);
    let replaced = replace_urls_and_emails(&stripped);
    let collapsed = collapse_punctuation_runs(&replaced);
    collapse_whitespace(&collapsed)
}

/// Returns the review with `title` and `text` normalized.
pub fn normalize_review(review: &Review) -> Review {
    Review {
        title: normalize_text(&review.title),
        text: normalize_text(&review.text),
        ..review.clone()
    }
}

/// Normalizes every record of the dataset, preserving order.
pub fn normalize_dataset(ds: &Dataset) -> Dataset {
    Dataset {
        records: ds.records.iter().map(normalize_review).collect(),
        provenance: ds.provenance.clone(),
    }
}

// Step 1: tags out, entities decoded, repeated until stable (max 3 decode
// passes) so that entities revealing tags -- or entities encoding entities
// -- are still cleaned.
fn strip_html(raw: &str) -> String {
    let mut current = raw.to_string();
    for _ in 0..3 {
        let stripped = TAG_RE.replace_all(&current, " ");
        let decoded = decode_entities(&stripped);
        if decoded == current {
            break;
        }
        current = decoded;
    }
    current
}

/// Decodes one level of HTML entities: numeric references (`&#233;`,
/// `&#xE9;`) and a fixed table of common named references. Unknown or
/// malformed references are left untouched.
fn decode_entities(input: &str) -> String {
    let mut out = String::with_capacity(input.len());
    let bytes = input.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'&' {
            // Copy the whole UTF-8 character, not just one byte.
            let ch_len = utf8_len(bytes[i]);
            out.push_str(&input[i..i + ch_len]);
            i += ch_len;
            continue;
        }
        match parse_entity(&input[i..]) {
            Some((decoded, consumed)) => {
                out.push(decoded);
                i += consumed;
            }
            None => {
                out.push('&');
                i += 1;
            }
        }
    }
    out
}

fn utf8_len(first_byte: u8) -> usize {
    match first_byte {
        b if b < 0x80 => 1,
        b if b >= 0xF0 => 4,
        b if b >= 0xE0 => 3,
        _ => 2,
    }
}

// Parses one entity at the start of `s` (which begins with '&'). Returns
// the decoded character and the number of bytes consumed. Entity bodies
// longer than 32 bytes are not entities.
fn parse_entity(s: &str) -> Option<(char, usize)> {
    let semi = s.as_bytes()[1..]
        .iter()
        .take(33)
        .position(|&b| b == b';')?
        + 1;
    let body = &s[1..semi];
    if body.is_empty() {
        return None;
    }
    let decoded = if let Some(num) = body.strip_prefix('#') {
        let code = if let Some(hex) = num.strip_prefix(['x', 'X']) {
            u32::from_str_radix(hex, 16).ok()?
        } else {
            num.parse::<u32>().ok()?
        };
        char::from_u32(code).filter(|c| *c != '\0')?
    } else {
        named_entity(body)?
    };
    Some((decoded, semi + 1))
}

fn named_entity(name: &str) -> Option<char> {
    let ch = match name {
        "amp" | "AMP" => '&',
        "lt" | "LT" => '<',
        "gt" | "GT" => '>',
        "quot" | "QUOT" => '"',
        "apos" => '\'',
        "nbsp" => '\u{A0}',
        "copy" => '©',
        "reg" => '®',
        "trade" => '™',
        "deg" => '°',
        "euro" => '€',
        "pound" => '£',
        "cent" => '¢',
        "hellip" => '…',
        "mdash" => '—',
        "ndash" => '–',
        "laquo" => '«',
        "raquo" => '»',
        "lsquo" => '\u{2018}',
        "rsquo" => '\u{2019}',
        "ldquo" => '\u{201C}',
        "rdquo" => '\u{201D}',
        "middot" => '·',
        "bull" => '•',
        "sect" => '§',
        "agrave" => 'à',
        "aacute" => 'á',
        "acirc" => 'â',
        "atilde" => 'ã',
        "egrave" => 'è',
        "eacute" => 'é',
        "ecirc" => 'ê',
        "igrave" => 'ì',
        "iacute" => 'í',
        "icirc" => 'î',
        "ograve" => 'ò',
        "oacute" => 'ó',
        "ocirc" => 'ô',
        "ugrave" => 'ù',
        "uacute" => 'ú',
        "ucirc" => 'û',
        "ccedil" => 'ç',
        "ntilde" => 'ñ',
        "auml" => 'ä',
        "ouml" => 'ö',
        "uuml" => 'ü',
        "szlig" => 'ß',
        "Agrave" => 'À',
        "Egrave" => 'È',
        "Eacute" => 'É',
        _ => return None,
    };
    Some(ch)
}

// Step 2: whole-run URL replacement first, then email replacement inside
// the remaining text.
fn replace_urls_and_emails(input: &str) -> String {
    let with_urls = NON_WS_RUN_RE.replace_all(input, |caps: &regex::Captures<'_>| {
        let run = &caps[0];
        if run.starts_with("http://") || run.starts_with("https://") || run.starts_with("www.") {
            URL_TOKEN.to_string()
        } else {
            run.to_string()
        }
    });
    EMAIL_RE.replace_all(&with_urls, EMAIL_TOKEN).into_owned()
}

fn is_terminal_punct(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

// Step 3: first collapse mixed terminal-punctuation runs, then identical
// runs of any ASCII punctuation mark. Both keep the first 3 characters of
// a run of 4 or more.
fn collapse_punctuation_runs(input: &str) -> String {
    let terminal_pass = collapse_runs(input, |prev, c| {
        is_terminal_punct(c) && prev.is_none_or(is_terminal_punct)
    });
    collapse_runs(&terminal_pass, |prev, c| {
        c.is_ascii_punctuation() && prev.is_none_or(|p| p == c)
    })
}

// Collapses maximal runs (as delimited by `in_run(prev_char_of_run, c)`)
// longer than 3 characters down to their first 3.
fn collapse_runs(input: &str, in_run: impl Fn(Option<char>, char) -> bool) -> String {
    let mut out = String::with_capacity(input.len());
    let mut run: Vec<char> = Vec::new();
    for c in input.chars() {
        if in_run(run.last().copied(), c) {
            run.push(c);
        } else {
            flush_run(&mut out, &run);
            run.clear();
            if in_run(None, c) {
                run.push(c);
            } else {
                out.push(c);
            }
        }
    }
    flush_run(&mut out, &run);
    out
}

fn flush_run(out: &mut String, run: &[char]) {
    for &c in run.iter().take(3) {
        out.push(c);
    }
}

// Steps 4 and 5 in one: split on Unicode whitespace and re-join single-spaced.
fn collapse_whitespace(input: &str) -> String {
    input.split_whitespace().collect::<Vec<_>>().join(" ")
}
