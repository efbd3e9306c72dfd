use std::collections::{BTreeSet, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{clean_tokenize, tfidf_with, IdfMode};
use crate::corpus::PaperRecord;
use crate::error::{Error, Result};

pub const TITLE_BLOCK: &str = "title-tfidf";
pub const SUMMARY_BLOCK: &str = "summary-tfidf";
pub const CATEGORY_BLOCK: &str = "category-onehot";

/// A named, half-open column range `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureBlock {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

/// Dense feature matrix with named column blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub columns: Vec<String>,
    pub blocks: Vec<FeatureBlock>,
}

impl FeatureMatrix {
    pub fn single_block(name: &str, values: Array2<f64>, columns: Vec<String>) -> Self {
        let cols = values.ncols();
        Self {
            values,
            columns,
            blocks: vec![FeatureBlock { name: name.into(), start: 0, end: cols }],
        }
    }

    /// All-ones `rows x cols` matrix.
    pub fn ones(rows: usize, cols: usize) -> Self {
        let columns = (0..cols).map(|c| format!("one:{c}")).collect();
        Self::single_block("ones", Array2::ones((rows, cols)), columns)
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn block(&self, name: &str) -> Option<&FeatureBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Concatenates blocks along the feature axis.
    pub fn concat(parts: Vec<FeatureMatrix>) -> Result<Self> {
        let rows = parts.first().map(FeatureMatrix::rows).unwrap_or(0);
        if let Some(bad) = parts.iter().find(|p| p.rows() != rows) {
            return Err(Error::Shape(format!(
                "cannot concatenate blocks with {} and {} rows",
                rows,
                bad.rows()
            )));
        }
        let views: Vec<_> = parts.iter().map(|p| p.values.view()).collect();
        let values = if views.is_empty() {
            Array2::zeros((0, 0))
        } else {
            concatenate(Axis(1), &views).map_err(|e| Error::Shape(e.to_string()))?
        };
        let mut columns = Vec::with_capacity(values.ncols());
        let mut blocks = Vec::new();
        let mut offset = 0;
        for part in parts {
            for b in part.blocks {
                blocks.push(FeatureBlock {
                    name: b.name,
                    start: b.start + offset,
                    end: b.end + offset,
                });
            }
            offset += part.values.ncols();
            columns.extend(part.columns);
        }
        Ok(Self { values, columns, blocks })
    }

    fn layout_comment(&self) -> String {
        let parts: Vec<String> = self
            .blocks
            .iter()
            .map(|b| format!("{}={}..{}", b.name, b.start, b.end))
            .collect();
        format!("# blocks: {}", parts.join(";"))
    }

    /// CSV export: a `# blocks: name=start..end;...` comment line, a header
    /// `row_id,<column names>`, then one row per entity.
    pub fn write_csv<W: Write>(&self, mut out: W, row_ids: &[String]) -> Result<()> {
        self.check_ids(row_ids)?;
        writeln!(out, "{}", self.layout_comment())?;
        let mut w = csv::Writer::from_writer(out);
        let header = std::iter::once("row_id").chain(self.columns.iter().map(String::as_str));
        w.write_record(header)?;
        for (id, row) in row_ids.iter().zip(self.values.rows()) {
            let fields = std::iter::once(id.clone()).chain(row.iter().map(|v| v.to_string()));
            w.write_record(fields)?;
        }
        w.flush()?;
        Ok(())
    }

    fn check_ids(&self, row_ids: &[String]) -> Result<()> {
        if row_ids.len() != self.rows() {
            return Err(Error::Shape(format!(
                "{} row ids for {} feature rows",
                row_ids.len(),
                self.rows()
            )));
        }
        Ok(())
    }

    /// Binary export: `<stem>.bin` holds row-major little-endian f64 values,
    /// `<stem>.json` the [`FeatureSidecar`].
    pub fn write_binary(&self, stem: impl AsRef<Path>, row_ids: &[String]) -> Result<()> {
        self.check_ids(row_ids)?;
        let stem = stem.as_ref();
        let mut bin = std::io::BufWriter::new(std::fs::File::create(stem.with_extension("bin"))?);
        for v in self.values.iter() {
            bin.write_all(&v.to_le_bytes())?;
        }
        bin.flush()?;
        let sidecar = FeatureSidecar {
            format: "row-major-f64-le".into(),
            rows: self.rows(),
            cols: self.cols(),
            blocks: self.blocks.clone(),
            columns: self.columns.clone(),
            row_ids: row_ids.to_vec(),
        };
        let json = std::fs::File::create(stem.with_extension("json"))?;
        serde_json::to_writer_pretty(json, &sidecar)?;
        Ok(())
    }

    pub fn read_binary(stem: impl AsRef<Path>) -> Result<(Self, Vec<String>)> {
        let stem = stem.as_ref();
        let json_path = stem.with_extension("json");
        let sidecar: FeatureSidecar =
            serde_json::from_reader(std::fs::File::open(&json_path)?)?;
        let bin_path = stem.with_extension("bin");
        let mut bytes = Vec::new();
        std::fs::File::open(&bin_path)?.read_to_end(&mut bytes)?;
        if bytes.len() != sidecar.rows * sidecar.cols * 8 {
            return Err(Error::format(&bin_path, "size does not match sidecar shape"));
        }
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let values = Array2::from_shape_vec((sidecar.rows, sidecar.cols), data)
            .map_err(|e| Error::format(&bin_path, e.to_string()))?;
        Ok((
            Self { values, columns: sidecar.columns, blocks: sidecar.blocks },
            sidecar.row_ids,
        ))
    }
}

/// JSON metadata accompanying a binary feature export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub format: String,
    pub rows: usize,
    pub cols: usize,
    pub blocks: Vec<FeatureBlock>,
    pub columns: Vec<String>,
    pub row_ids: Vec<String>,
}

/// Sorted union of all categories in `records`.
pub fn category_universe(records: &[PaperRecord]) -> Vec<String> {
    let set: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| r.categories.iter().map(String::as_str))
        .collect();
    set.into_iter().map(String::from).collect()
}

/// Multi-hot category encoding over `universe`.
pub fn one_hot_categories(records: &[PaperRecord], universe: &[String]) -> Result<FeatureMatrix> {
    one_hot_masked(records, universe, &HashSet::new())
}

/// Like [`one_hot_categories`] but leaves `masked` categories as zeros.
pub(crate) fn one_hot_masked(
    records: &[PaperRecord],
    universe: &[String],
    masked: &HashSet<&str>,
) -> Result<FeatureMatrix> {
    let mut values = Array2::zeros((records.len(), universe.len()));
    for (row, record) in records.iter().enumerate() {
        for cat in &record.categories {
            let col = universe.iter().position(|u| u == cat).ok_or_else(|| {
                Error::validation(format!(
                    "category {cat:?} of paper {:?} is not in the category universe",
                    record.paper_id
                ))
            })?;
            if !masked.contains(cat.as_str()) {
                values[[row, col]] = 1.0;
            }
        }
    }
    let columns = universe.iter().map(|c| format!("category:{c}")).collect();
    Ok(FeatureMatrix::single_block(CATEGORY_BLOCK, values, columns))
}

/// A corpus with no tokens at all yields a zero-width block.
fn tfidf_block(docs: &[Vec<String>], name: &str, prefix: &str, mode: IdfMode) -> Result<FeatureMatrix> {
    if docs.iter().all(Vec::is_empty) {
        return Ok(FeatureMatrix::single_block(name, Array2::zeros((docs.len(), 0)), Vec::new()));
    }
    let t = tfidf_with(docs, mode)?;
    let columns = t.vocabulary.tokens().iter().map(|tok| format!("{prefix}:{tok}")).collect();
    Ok(FeatureMatrix::single_block(name, t.values, columns))
}

/// Paper features: title TF-IDF, summary TF-IDF and category one-hot, each
/// with its own vocabulary, concatenated in that order.
pub fn paper_features(records: &[PaperRecord], mode: IdfMode) -> Result<FeatureMatrix> {
    paper_features_masked(records, mode, &HashSet::new())
}

pub(crate) fn paper_features_masked(
    records: &[PaperRecord],
    mode: IdfMode,
    masked_categories: &HashSet<&str>,
) -> Result<FeatureMatrix> {
    let titles: Vec<_> = records.iter().map(|r| clean_tokenize(&r.title)).collect();
    let summaries: Vec<_> = records.iter().map(|r| clean_tokenize(&r.summary)).collect();
    let universe = category_universe(records);
    FeatureMatrix::concat(vec![
        tfidf_block(&titles, TITLE_BLOCK, "title", mode)?,
        tfidf_block(&summaries, SUMMARY_BLOCK, "summary", mode)?,
        one_hot_masked(records, &universe, masked_categories)?,
    ])
}
