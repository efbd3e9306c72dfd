use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::{PaperRecord, Taxonomy};
use crate::error::{Error, Result};
use crate::text::clean_tokenize;

pub const DEFAULT_TOP_KEYWORDS: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub key: String,
    pub count: usize,
}

/// Plot-ready histograms over a corpus.
///
/// * `per_month`: `YYYY-MM` buckets, contiguous from the first to the last month.
/// * `per_class`: every taxonomy class in taxonomy order, zeros included.
/// * `per_category`: arXiv categories, most frequent first.
/// * `top_keywords`: most frequent summary tokens after cleaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub record_count: usize,
    pub per_month: Vec<Bucket>,
    pub per_class: Vec<Bucket>,
    pub per_category: Vec<Bucket>,
    pub top_keywords: Vec<Bucket>,
}

pub fn corpus_stats(
    records: &[PaperRecord],
    taxonomy: &Taxonomy,
    top_k: usize,
) -> Result<StatsReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput("corpus_stats needs at least one record".into()));
    }

    let month_index = |r: &PaperRecord| r.release_date.year() * 12 + r.release_date.month0() as i32;
    let mut months: BTreeMap<i32, usize> = BTreeMap::new();
    for r in records {
        *months.entry(month_index(r)).or_default() += 1;
    }
    let (first, last) = (*months.keys().next().unwrap(), *months.keys().last().unwrap());
    let per_month = (first..=last)
        .map(|m| Bucket {
            key: format!("{:04}-{:02}", m.div_euclid(12), m.rem_euclid(12) + 1),
            count: months.get(&m).copied().unwrap_or(0),
        })
        .collect();

    let mut class_counts = vec![0usize; taxonomy.len()];
    for r in records {
        let id = taxonomy.id(&r.taxonomy_label).ok_or_else(|| {
            Error::validation(format!("unknown taxonomy label {:?}", r.taxonomy_label))
        })?;
        class_counts[id] += 1;
    }
    let per_class = taxonomy
        .classes()
        .iter()
        .zip(class_counts)
        .map(|(name, count)| Bucket { key: name.clone(), count })
        .collect();

    let mut categories: HashMap<&str, usize> = HashMap::new();
    for r in records {
        for c in &r.categories {
            *categories.entry(c).or_default() += 1;
        }
    }

    let mut keywords: HashMap<String, usize> = HashMap::new();
    for r in records {
        for tok in clean_tokenize(&r.summary) {
            *keywords.entry(tok).or_default() += 1;
        }
    }
    let mut top_keywords = sorted_desc(keywords.into_iter());
    top_keywords.truncate(top_k);

    Ok(StatsReport {
        record_count: records.len(),
        per_month,
        per_class,
        per_category: sorted_desc(categories.into_iter().map(|(k, v)| (k.to_string(), v))),
        top_keywords,
    })
}

fn sorted_desc(counts: impl Iterator<Item = (String, usize)>) -> Vec<Bucket> {
    let mut out: Vec<Bucket> = counts.map(|(key, count)| Bucket { key, count }).collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.key.cmp(&b.key)));
    out
}

impl StatsReport {
    /// Long-format CSV with header `series,key,count`, where `series` is one of
    /// `month`, `class`, `category`, `keyword`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["series", "key", "count"])?;
        let series = [
            ("month", &self.per_month),
            ("class", &self.per_class),
            ("category", &self.per_category),
            ("keyword", &self.top_keywords),
        ];
        for (name, buckets) in series {
            for b in buckets {
                w.write_record([name, b.key.as_str(), &b.count.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_date;

    fn rec(id: &str, date: &str, cats: &[&str], label: &str, summary: &str) -> PaperRecord {
        PaperRecord {
            paper_id: id.into(),
            title: "t".into(),
            authors: vec![],
            release_date: parse_date(date).unwrap(),
            links: vec![],
            categories: cats.iter().map(|c| c.to_string()).collect(),
            summary: summary.into(),
            taxonomy_label: label.into(),
        }
    }

    #[test]
    fn single_record_has_one_nonzero_bucket_per_histogram() {
        let tax = Taxonomy::bundled();
        let report =
            corpus_stats(&[rec("a", "2023-03-04", &["cs.CL"], "Law", "models")], &tax, 30)
                .unwrap();
        for hist in [&report.per_month, &report.per_class, &report.per_category, &report.top_keywords] {
            let nonzero: Vec<_> = hist.iter().filter(|b| b.count > 0).collect();
            assert_eq!(nonzero.len(), 1);
            assert_eq!(hist.iter().map(|b| b.count).sum::<usize>(), 1);
        }
    }

    #[test]
    fn category_counts_and_month_gaps() {
        let tax = Taxonomy::bundled();
        let recs = [
            rec("a", "2023-01-04", &["cs.CL"], "Law", ""),
            rec("b", "2023-03-04", &["cs.CL", "cs.AI"], "Law", ""),
            rec("c", "2023-03-09", &["cs.CL"], "Others", ""),
        ];
        let report = corpus_stats(&recs, &tax, 30).unwrap();
        assert_eq!(
            report.per_category,
            vec![Bucket { key: "cs.CL".into(), count: 3 }, Bucket { key: "cs.AI".into(), count: 1 }]
        );
        let months: Vec<_> = report.per_month.iter().map(|b| (b.key.as_str(), b.count)).collect();
        assert_eq!(months, [("2023-01", 1), ("2023-02", 0), ("2023-03", 2)]);
        assert_eq!(report.per_class.iter().map(|b| b.count).sum::<usize>(), 3);
    }

    #[test]
    fn empty_input_is_error() {
        assert!(corpus_stats(&[], &Taxonomy::bundled(), 30).is_err());
    }

    #[test]
    fn csv_has_header() {
        let tax = Taxonomy::bundled();
        let report = corpus_stats(&[rec("a", "2023-03-04", &["cs.CL"], "Law", "x")], &tax, 30).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("series,key,count\n"));
        assert!(text.contains("category,cs.CL,1"));
    }
}
