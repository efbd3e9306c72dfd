//! Paper metadata: records, the taxonomy, subsets, and descriptive statistics.

mod record;
mod stats;
mod taxonomy;

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use record::{parse_date, parse_records, read_records, write_records, PaperRecord};
pub use stats::{corpus_stats, Bucket, StatsReport, DEFAULT_TOP_KEYWORDS};
pub use taxonomy::{ClassId, Taxonomy};

use crate::error::{Error, Result};

/// A named filter over a corpus: an inclusive release-date cutoff and a set of
/// taxonomy classes to drop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSpec {
    pub name: String,
    pub cutoff_date: Option<NaiveDate>,
    pub removed_classes: BTreeSet<String>,
}

impl SubsetSpec {
    pub fn all(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            cutoff_date: None,
            removed_classes: BTreeSet::new(),
        }
    }

    /// Everything released up to January 2024.
    pub fn data_jan24() -> Self {
        Self::all("Data_Jan24")
    }

    /// Papers released up to the end of November 2023.
    pub fn data_nov23() -> Self {
        Self {
            cutoff_date: NaiveDate::from_ymd_opt(2023, 11, 30),
            ..Self::all("Data_Nov23")
        }
    }

    /// The full corpus without its five smallest classes.
    pub fn data_subset() -> Self {
        Self {
            removed_classes: ["Law", "Finance", "Education", "Hardware Architecture", "Others"]
                .into_iter()
                .map(String::from)
                .collect(),
            ..Self::all("Data_subset")
        }
    }

    /// Looks up one of the named presets (case-insensitive, with or without
    /// the `data_` prefix).
    pub fn preset(name: &str) -> Option<Self> {
        let key = name.to_ascii_lowercase();
        match key.trim_start_matches("data_") {
            "jan24" | "all" => Some(Self::data_jan24()),
            "nov23" => Some(Self::data_nov23()),
            "subset" => Some(Self::data_subset()),
            _ => None,
        }
    }

    pub fn keeps(&self, record: &PaperRecord) -> bool {
        self.cutoff_date.is_none_or(|cut| record.release_date <= cut)
            && !self.removed_classes.contains(&record.taxonomy_label)
    }
}

/// Filters `records` by `spec`, preserving order.
pub fn build_subset(
    records: &[PaperRecord],
    spec: &SubsetSpec,
    taxonomy: &Taxonomy,
) -> Result<Vec<PaperRecord>> {
    if let Some(unknown) = spec.removed_classes.iter().find(|c| !taxonomy.contains(c)) {
        return Err(Error::validation(format!(
            "subset {:?} removes unknown class {unknown:?}",
            spec.name
        )));
    }
    Ok(records.iter().filter(|r| spec.keeps(r)).cloned().collect())
}

/// Maps each record's label to its taxonomy id.
pub fn label_ids(records: &[PaperRecord], taxonomy: &Taxonomy) -> Result<Vec<ClassId>> {
    records
        .iter()
        .map(|r| {
            taxonomy.id(&r.taxonomy_label).ok_or_else(|| {
                Error::validation(format!("unknown taxonomy label {:?}", r.taxonomy_label))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(id: usize, date: &str, label: &str) -> PaperRecord {
        PaperRecord {
            paper_id: format!("p{id}"),
            title: String::new(),
            authors: vec![],
            release_date: parse_date(date).unwrap(),
            links: vec![],
            categories: vec!["cs.CL".into()],
            summary: String::new(),
            taxonomy_label: label.into(),
        }
    }

    #[test]
    fn empty_filter_is_identity() {
        let tax = Taxonomy::bundled();
        let recs = vec![record(0, "2023-01-01", "Law"), record(1, "2024-01-02", "Others")];
        assert_eq!(build_subset(&recs, &SubsetSpec::all("x"), &tax).unwrap(), recs);
    }

    #[test]
    fn cutoff_is_inclusive() {
        let tax = Taxonomy::bundled();
        let recs = vec![
            record(0, "2023-11-30", "Law"),
            record(1, "2023-12-01", "Law"),
            record(2, "2023-07-15", "Law"),
        ];
        let out = build_subset(&recs, &SubsetSpec::data_nov23(), &tax).unwrap();
        let ids: Vec<_> = out.iter().map(|r| r.paper_id.as_str()).collect();
        assert_eq!(ids, ["p0", "p2"]);
    }

    #[test]
    fn unknown_removed_class_is_rejected() {
        let tax = Taxonomy::bundled();
        let mut spec = SubsetSpec::all("bad");
        spec.removed_classes.insert("Astrology".into());
        assert!(build_subset(&[], &spec, &tax).is_err());
    }

    #[test]
    fn presets_resolve() {
        assert_eq!(SubsetSpec::preset("Data_Nov23"), Some(SubsetSpec::data_nov23()));
        assert_eq!(SubsetSpec::preset("subset").unwrap().removed_classes.len(), 5);
        assert!(SubsetSpec::preset("nope").is_none());
    }

    proptest! {
        #[test]
        fn subset_is_idempotent_and_counts_add_up(
            labels in proptest::collection::vec(0usize..16, 0..60),
            removed in proptest::collection::btree_set(0usize..16, 0..6),
        ) {
            let tax = Taxonomy::bundled();
            let recs: Vec<_> = labels
                .iter()
                .enumerate()
                .map(|(i, &l)| record(i, "2023-05-05", tax.name(l).unwrap()))
                .collect();
            let spec = SubsetSpec {
                removed_classes: removed.iter().map(|&c| tax.name(c).unwrap().to_string()).collect(),
                ..SubsetSpec::all("p")
            };
            let once = build_subset(&recs, &spec, &tax).unwrap();
            let twice = build_subset(&once, &spec, &tax).unwrap();
            prop_assert_eq!(&once, &twice);
            let dropped = recs.iter().filter(|r| spec.removed_classes.contains(&r.taxonomy_label)).count();
            prop_assert_eq!(once.len() + dropped, recs.len());
        }
    }
}
