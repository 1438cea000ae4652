//! JSON-lines dataset I/O.
//!
//! One record per line, UTF-8, keys exactly `title`, `text`, `rating`
//! (integer), `language` (`"it"` | `"ro"`), `domain` (`"books"` |
//! `"movies"` | `"music"`), `split` (`"train"` | `"valid"` | `"test"`).
//! Blank lines are skipped. Errors carry 1-based line numbers; malformed
//! JSON or missing keys are parse errors, well-formed JSON with values
//! outside the schema (e.g. a rating of 3) is a schema error.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use crate::corpus::{Dataset, Domain, Language, Rating, Review, Split};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReview {
    title: String,
    text: String,
    rating: u8,
    language: String,
    domain: String,
    split: String,
}

impl RawReview {
    fn validate(self, line: usize) -> Result<Review> {
        let schema = |msg: String| Error::Schema { line, msg };
        let rating = Rating::try_from(self.rating).map_err(&schema)?;
        let language = match self.language.as_str() {
            "it" => Language::It,
            "ro" => Language::Ro,
            other => return Err(schema(format!("language `{other}` is not \"it\" or \"ro\""))),
        };
        let domain = match self.domain.as_str() {
            "books" => Domain::Books,
            "movies" => Domain::Movies,
            "music" => Domain::Music,
            other => {
                return Err(schema(format!(
                    "domain `{other}` is not one of \"books\", \"movies\", \"music\""
                )))
            }
        };
        let split = match self.split.as_str() {
            "train" => Split::Train,
            "valid" => Split::Valid,
            "test" => Split::Test,
            other => {
                return Err(schema(format!(
                    "split `{other}` is not one of \"train\", \"valid\", \"test\""
                )))
            }
        };
        Ok(Review {
            title: self.title,
            text: self.text,
            rating,
            language,
            domain,
            split,
        })
    }
}

/// Reads a dataset from a JSON-lines file.
pub fn read_jsonl(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl_reader(BufReader::new(file), &path.display().to_string())
}

/// Reads a dataset from any buffered reader; `provenance` labels the source.
pub fn read_jsonl_reader<R: BufRead>(reader: R, provenance: &str) -> Result<Dataset> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawReview = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        records.push(raw.validate(line_no)?);
    }
    Ok(Dataset::new(records, provenance))
}

/// Writes a dataset as JSON-lines.
pub fn write_jsonl(ds: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_jsonl_writer(ds, &mut writer).map_err(|e| Error::io(path, e))?;
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Writes a dataset as JSON-lines to any writer.
pub fn write_jsonl_writer<W: Write>(ds: &Dataset, writer: &mut W) -> std::io::Result<()> {
    for record in &ds.records {
        serde_json::to_writer(&mut *writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds() -> Dataset {
        Dataset::new(
            vec![
                Review {
                    title: "Bel libro".to_string(),
                    text: "Molto bello".to_string(),
                    rating: Rating::VeryPositive,
                    language: Language::It,
                    domain: Domain::Books,
                    split: Split::Train,
                },
                Review {
                    title: String::new(),
                    text: "Slab".to_string(),
                    rating: Rating::VeryNegative,
                    language: Language::Ro,
                    domain: Domain::Movies,
                    split: Split::Test,
                },
            ],
            "unit",
        )
    }

    #[test]
    fn round_trip_preserves_records() {
        let mut buf = Vec::new();
        write_jsonl_writer(&ds(), &mut buf).unwrap();
        let back = read_jsonl_reader(buf.as_slice(), "unit").unwrap();
        assert_eq!(back.records, ds().records);
    }

    #[test]
    fn written_keys_are_exactly_the_schema_in_order() {
        let mut buf = Vec::new();
        write_jsonl_writer(&ds(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        let positions: Vec<usize> = ["title", "text", "rating", "language", "domain", "split"]
            .iter()
            .map(|k| first.find(&format!("\"{k}\":")).expect(k))
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{first}");
        assert!(first.contains("\"rating\":5"));
        assert!(first.contains("\"language\":\"it\""));
        assert!(first.contains("\"domain\":\"books\""));
        assert!(first.contains("\"split\":\"train\""));
    }

    #[test]
    fn rating_three_is_a_schema_error_with_line_number() {
        let input = concat!(
            r#"{"title":"","text":"ok","rating":5,"language":"it","domain":"books","split":"train"}"#,
            "\n",
            r#"{"title":"","text":"bad","rating":3,"language":"it","domain":"books","split":"train"}"#,
            "\n",
        );
        match read_jsonl_reader(input.as_bytes(), "t") {
            Err(Error::Schema { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("rating 3"), "{msg}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn missing_field_is_a_parse_error_with_line_number() {
        let input = r#"{"title":"","rating":5,"language":"it","domain":"books","split":"train"}"#;
        match read_jsonl_reader(input.as_bytes(), "t") {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 1);
                assert!(msg.contains("text"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        let input = r#"{"title":"","text":"x","rating":5,"language":"it","domain":"books","split":"train","extra":1}"#;
        assert!(matches!(
            read_jsonl_reader(input.as_bytes(), "t"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn bad_enum_values_are_schema_errors() {
        let input = r#"{"title":"","text":"x","rating":5,"language":"en","domain":"books","split":"train"}"#;
        assert!(matches!(
            read_jsonl_reader(input.as_bytes(), "t"),
            Err(Error::Schema { line: 1, .. })
        ));
    }

    #[test]
    fn blank_lines_are_skipped() {
        let input = concat!(
            "\n",
            r#"{"title":"","text":"x","rating":4,"language":"ro","domain":"music","split":"valid"}"#,
            "\n\n",
        );
        let ds = read_jsonl_reader(input.as_bytes(), "t").unwrap();
        assert_eq!(ds.len(), 1);
    }
}
