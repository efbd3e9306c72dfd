use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Taxonomy;
use crate::error::{Error, Result};

/// Metadata for one survey paper plus its taxonomy label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    pub title: String,
    pub authors: Vec<String>,
    #[serde(
        serialize_with = "serialize_date",
        deserialize_with = "deserialize_date"
    )]
    pub release_date: NaiveDate,
    pub links: Vec<String>,
    pub categories: Vec<String>,
    pub summary: String,
    pub taxonomy_label: String,
}

impl PaperRecord {
    /// Title followed by summary, the text used for word-level features.
    pub fn text(&self) -> String {
        format!("{} {}", self.title, self.summary)
    }
}

/// Parses an ISO-8601 calendar date, tolerating a trailing time component.
pub fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    let day = raw.get(..10).unwrap_or(raw);
    if raw.len() > 10 && !raw[10..].starts_with(['T', ' ']) {
        return None;
    }
    NaiveDate::parse_from_str(day, "%Y-%m-%d").ok()
}

fn serialize_date<S: Serializer>(date: &NaiveDate, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&date.format("%Y-%m-%d").to_string())
}

fn deserialize_date<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDate, D::Error> {
    let raw = String::deserialize(d)?;
    parse_date(&raw).ok_or_else(|| serde::de::Error::custom(format!("invalid date {raw:?}")))
}

/// Reads JSON Lines records and validates them against `taxonomy`.
///
/// Blank lines are skipped but still counted for error line numbers.
/// Category lists are deduplicated, keeping first occurrence order.
pub fn parse_records<R: BufRead>(reader: R, taxonomy: &Taxonomy) -> Result<Vec<PaperRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut record: PaperRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        validate(&mut record, taxonomy).map_err(|msg| {
            Error::validation(format!("line {line_no}: {msg}"))
        })?;
        if !seen.insert(record.paper_id.clone()) {
            return Err(Error::validation(format!(
                "line {line_no}: duplicate paper_id {:?}",
                record.paper_id
            )));
        }
        records.push(record);
    }
    Ok(records)
}

fn validate(record: &mut PaperRecord, taxonomy: &Taxonomy) -> std::result::Result<(), String> {
    record.paper_id = record.paper_id.trim().to_string();
    if record.paper_id.is_empty() {
        return Err("empty paper_id".into());
    }
    let mut seen = HashSet::new();
    record.categories.retain(|c| seen.insert(c.clone()));
    if record.categories.is_empty() {
        return Err(format!("paper {:?} has no categories", record.paper_id));
    }
    if !taxonomy.contains(&record.taxonomy_label) {
        return Err(format!(
            "unknown taxonomy label {:?} for paper {:?}",
            record.taxonomy_label, record.paper_id
        ));
    }
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>, taxonomy: &Taxonomy) -> Result<Vec<PaperRecord>> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_records(std::io::BufReader::new(file), taxonomy)
}

pub fn write_records<W: Write>(mut out: W, records: &[PaperRecord]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taxonomy() -> Taxonomy {
        Taxonomy::new(["Trustworthy", "Evaluation", "Law"]).unwrap()
    }

    const LINE: &str = r#"{"paper_id":"2309.00001","title":"A Survey","authors":["A. Smith","B. Jones"],"release_date":"2023-09-01","links":["https://arxiv.org/abs/2309.00001"],"categories":["cs.CL","cs.AI"],"summary":"We survey things.","taxonomy_label":"Trustworthy"}"#;

    #[test]
    fn parses_all_eight_fields() {
        let recs = parse_records(LINE.as_bytes(), &taxonomy()).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.paper_id, "2309.00001");
        assert_eq!(r.title, "A Survey");
        assert_eq!(r.authors, ["A. Smith", "B. Jones"]);
        assert_eq!(r.release_date, NaiveDate::from_ymd_opt(2023, 9, 1).unwrap());
        assert_eq!(r.links.len(), 1);
        assert_eq!(r.categories, ["cs.CL", "cs.AI"]);
        assert_eq!(r.summary, "We survey things.");
        assert_eq!(r.taxonomy_label, "Trustworthy");
    }

    #[test]
    fn missing_title_is_parse_error_on_line_one() {
        let line = LINE.replace(r#""title":"A Survey","#, "");
        match parse_records(line.as_bytes(), &taxonomy()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 1);
                assert!(message.contains("title"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_is_validation_error() {
        let text = format!("{LINE}\n{LINE}\n");
        let err = parse_records(text.as_bytes(), &taxonomy()).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("duplicate")), "{err}");
    }

    #[test]
    fn unknown_label_names_the_label() {
        let line = LINE.replace("Trustworthy", "Astrology");
        let err = parse_records(line.as_bytes(), &taxonomy()).unwrap_err();
        assert!(err.to_string().contains("Astrology"), "{err}");
    }

    #[test]
    fn empty_categories_rejected() {
        let line = LINE.replace(r#"["cs.CL","cs.AI"]"#, "[]");
        assert!(parse_records(line.as_bytes(), &taxonomy()).is_err());
    }

    #[test]
    fn dates_normalize() {
        assert_eq!(parse_date("2023-11-30T12:00:00Z"), NaiveDate::from_ymd_opt(2023, 11, 30));
        assert_eq!(parse_date("2023-02-30"), None);
        assert_eq!(parse_date("2023-11-30x"), None);
    }

    #[test]
    fn write_then_parse_is_identity() {
        let recs = parse_records(LINE.as_bytes(), &taxonomy()).unwrap();
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        assert_eq!(parse_records(buf.as_slice(), &taxonomy()).unwrap(), recs);
    }
}
