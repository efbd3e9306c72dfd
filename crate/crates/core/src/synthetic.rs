//! Seeded synthetic corpora in which arXiv-style categories carry the label
//! signal while text and authorship do not.

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{PaperRecord, Taxonomy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub papers: usize,
    /// Labels are the first `classes` taxonomy classes, assigned round-robin.
    pub classes: usize,
    /// Categories owned by each class; a paper holds one or two of its own.
    pub categories_per_class: usize,
    /// Probability that a paper also gets a category of another class.
    pub category_noise: f64,
    pub vocabulary: usize,
    pub title_words: usize,
    pub summary_words: usize,
    /// Authors are drawn from one pool shared by every class.
    pub author_pool: usize,
    pub authors_per_paper: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            papers: 150,
            classes: 5,
            categories_per_class: 2,
            category_noise: 0.1,
            vocabulary: 120,
            title_words: 6,
            summary_words: 40,
            author_pool: 20,
            authors_per_paper: 3,
            seed: 0,
        }
    }
}

/// Category code `syn.<class><letter>`, e.g. `syn.2b`.
pub fn category_code(class: usize, index: usize) -> String {
    format!("syn.{class}{}", (b'a' + index as u8) as char)
}

fn word(i: usize) -> String {
    // Letters only so tokenization keeps each word intact.
    let mut s = String::from("lex");
    let mut n = i;
    loop {
        s.push((b'a' + (n % 26) as u8) as char);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    s
}

pub fn generate(spec: &SyntheticSpec, taxonomy: &Taxonomy) -> Result<Vec<PaperRecord>> {
    if spec.classes < 2 || spec.classes > taxonomy.len() {
        return Err(Error::Config(format!("classes must be in 2..={}", taxonomy.len())));
    }
    if spec.papers < spec.classes || spec.categories_per_class == 0 || spec.categories_per_class > 26 {
        return Err(Error::Config("synthetic corpus too small or too many categories per class".into()));
    }
    if spec.vocabulary == 0 || spec.author_pool < spec.authors_per_paper || spec.authors_per_paper == 0 {
        return Err(Error::Config("vocabulary and author pool must be non-empty".into()));
    }
    if !(0.0..=1.0).contains(&spec.category_noise) {
        return Err(Error::Config("category_noise must be in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vocab: Vec<String> = (0..spec.vocabulary).map(word).collect();
    let authors: Vec<String> = (0..spec.author_pool).map(|i| format!("Author {}", word(i))).collect();
    let start = NaiveDate::from_ymd_opt(2023, 1, 1).expect("valid date");
    let text = |rng: &mut ChaCha8Rng, n: usize| -> String {
        (0..n).map(|_| vocab[rng.gen_range(0..vocab.len())].as_str()).collect::<Vec<_>>().join(" ")
    };

    let mut out = Vec::with_capacity(spec.papers);
    for i in 0..spec.papers {
        let class = i % spec.classes;
        let own = spec.categories_per_class;
        let mut categories = vec![category_code(class, rng.gen_range(0..own))];
        if own > 1 && rng.gen_bool(0.5) {
            let extra = category_code(class, rng.gen_range(0..own));
            if extra != categories[0] {
                categories.push(extra);
            }
        }
        if rng.gen_bool(spec.category_noise) {
            let other = (class + rng.gen_range(1..spec.classes)) % spec.classes;
            categories.push(category_code(other, rng.gen_range(0..own)));
        }
        let paper_authors: Vec<String> = authors
            .choose_multiple(&mut rng, spec.authors_per_paper)
            .cloned()
            .collect();
        let paper_id = format!("syn.{i:05}");
        out.push(PaperRecord {
            links: vec![format!("https://example.org/abs/{paper_id}")],
            paper_id,
            title: text(&mut rng, spec.title_words),
            authors: paper_authors,
            release_date: start + Duration::days(rng.gen_range(0..395)),
            categories,
            summary: text(&mut rng, spec.summary_words),
            taxonomy_label: taxonomy.classes()[class].clone(),
        });
    }
    Ok(out)
}
