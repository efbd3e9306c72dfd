//! Zero-shot and hinted taxonomy classification through a chat model.

mod transport;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use transport::{
    ChatRequest, FnTransport, ReplayTransport, Transcript, TranscriptStore, Transport,
};
#[cfg(feature = "live")]
pub use transport::HttpTransport;

use crate::corpus::{ClassId, PaperRecord, Taxonomy};
use crate::error::{Error, Result};
use crate::eval::{accuracy, weighted_f1, MeanStd};

pub const DEFAULT_TEMPLATE: &str = "\
You are classifying survey papers about large language models into a fixed taxonomy.
Choose exactly one class from this list:
{classes}
{hints}Answer with the class name only.

Title: {title}
Summary: {summary}
";

pub const DEFAULT_REPETITIONS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub classes: Vec<String>,
    pub template: String,
    pub hints: Option<BTreeMap<String, Vec<String>>>,
}

impl PromptSpec {
    /// Default template over the taxonomy's classes; with `use_hints`, the
    /// taxonomy's keyword hints are included.
    pub fn new(taxonomy: &Taxonomy, use_hints: bool) -> Result<Self> {
        let hints = use_hints.then(|| taxonomy.hints().clone());
        Self::with_template(taxonomy, DEFAULT_TEMPLATE, hints)
    }

    pub fn with_template(
        taxonomy: &Taxonomy,
        template: &str,
        hints: Option<BTreeMap<String, Vec<String>>>,
    ) -> Result<Self> {
        if template.matches("{classes}").count() != 1 {
            return Err(Error::Config("prompt template needs exactly one {classes} placeholder".into()));
        }
        for key in ["{title}", "{summary}"] {
            if !template.contains(key) {
                return Err(Error::Config(format!("prompt template lacks {key}")));
            }
        }
        if hints.is_some() && !template.contains("{hints}") {
            return Err(Error::Config("hints requested but template lacks {hints}".into()));
        }
        if let Some(c) = taxonomy.classes().iter().find(|c| template.contains(c.as_str())) {
            return Err(Error::Config(format!("template names class {c:?} outside the class list")));
        }
        if let Some(h) = &hints {
            if let Some(k) = h.keys().find(|k| !taxonomy.contains(k)) {
                return Err(Error::validation(format!("hint for unknown class {k:?}")));
            }
        }
        Ok(Self { classes: taxonomy.classes().to_vec(), template: template.to_string(), hints })
    }
}

/// Renders the prompt for `record`. Classes are listed one per line as
/// `- <name>`; hints, when enabled, follow as `- <name>: kw1, kw2` lines under
/// a `Keywords that indicate each class:` heading.
pub fn build_prompt(spec: &PromptSpec, record: &PaperRecord) -> String {
    let classes: Vec<String> = spec.classes.iter().map(|c| format!("- {c}")).collect();
    let hints = match &spec.hints {
        Some(h) if !h.is_empty() => {
            let mut s = String::from("Keywords that indicate each class:\n");
            for c in &spec.classes {
                if let Some(words) = h.get(c).filter(|w| !w.is_empty()) {
                    s.push_str(&format!("- {c}: {}\n", words.join(", ")));
                }
            }
            s
        }
        _ => String::new(),
    };
    spec.template
        .replace("{classes}", &classes.join("\n"))
        .replace("{hints}", &hints)
        .replace("{title}", record.title.trim())
        .replace("{summary}", record.summary.trim())
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric()
}

/// Finds a class name in `response`, case-insensitively and on word
/// boundaries. The match starting earliest wins; among matches at the same
/// position the longest wins, then the lowest class id.
pub fn parse_class(response: &str, classes: &[String]) -> Option<ClassId> {
    let hay = response.to_ascii_lowercase();
    let bytes = hay.as_bytes();
    let mut best: Option<(usize, usize, ClassId)> = None;
    for (id, name) in classes.iter().enumerate() {
        let needle = name.to_ascii_lowercase();
        if needle.is_empty() {
            continue;
        }
        let mut from = 0;
        while let Some(pos) = hay[from..].find(&needle) {
            let start = from + pos;
            let end = start + needle.len();
            let left_ok = start == 0 || !is_word_byte(bytes[start - 1]);
            let right_ok = end == bytes.len() || !is_word_byte(bytes[end]);
            if left_ok && right_ok {
                let cand = (start, needle.len(), id);
                let better = match best {
                    None => true,
                    Some((s, l, i)) => start < s || (start == s && (needle.len() > l || (needle.len() == l && id < i))),
                };
                if better {
                    best = Some(cand);
                }
                break;
            }
            from = start + hay[start..].chars().next().map_or(1, char::len_utf8);
        }
    }
    best.map(|(_, _, id)| id)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JudgeOptions {
    pub repetitions: usize,
    /// Extra attempts after a transport failure.
    pub max_retries: usize,
    pub retry_delay_ms: u64,
    /// Requests in flight at once.
    pub concurrency: usize,
}

impl Default for JudgeOptions {
    fn default() -> Self {
        Self { repetitions: DEFAULT_REPETITIONS, max_retries: 2, retry_delay_ms: 500, concurrency: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepetitionMetrics {
    pub repetition: usize,
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRun {
    pub hints: bool,
    /// Ordered by repetition, then record order.
    pub transcripts: Vec<Transcript>,
    pub per_repetition: Vec<RepetitionMetrics>,
    pub accuracy: MeanStd,
    pub weighted_f1: MeanStd,
}

fn ask(transport: &dyn Transport, request: &ChatRequest, options: &JudgeOptions) -> (Result<String>, usize) {
    let mut attempts = 0;
    loop {
        attempts += 1;
        match transport.complete(request) {
            Ok(r) => return (Ok(r), attempts),
            Err(e) if attempts > options.max_retries || !transport.retryable() => return (Err(e), attempts),
            Err(e) => {
                log::warn!("{} rep {}: {e}; retrying", request.paper_id, request.repetition);
                std::thread::sleep(Duration::from_millis(options.retry_delay_ms));
            }
        }
    }
}

/// Classifies every record `options.repetitions` times. Transport failures
/// (after retries) and unparseable replies count as wrong answers.
pub fn judge(
    records: &[PaperRecord],
    taxonomy: &Taxonomy,
    spec: &PromptSpec,
    transport: &dyn Transport,
    options: &JudgeOptions,
) -> Result<JudgeRun> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no records to judge".into()));
    }
    if options.repetitions == 0 {
        return Err(Error::Config("repetitions must be >= 1".into()));
    }
    let truth: Vec<ClassId> = crate::corpus::label_ids(records, taxonomy)?;
    let prompts: Vec<String> = records.iter().map(|r| build_prompt(spec, r)).collect();
    let jobs = records.len() * options.repetitions;
    let slots: Vec<Mutex<Option<Transcript>>> = (0..jobs).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..options.concurrency.clamp(1, jobs) {
            scope.spawn(|| loop {
                let job = next.fetch_add(1, Ordering::Relaxed);
                if job >= jobs {
                    break;
                }
                let (rep, idx) = (job / records.len(), job % records.len());
                let request = ChatRequest {
                    paper_id: records[idx].paper_id.clone(),
                    repetition: rep,
                    prompt: prompts[idx].clone(),
                };
                let (result, attempts) = ask(transport, &request, options);
                let (response, error) = match result {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                let parsed = response
                    .as_deref()
                    .and_then(|r| parse_class(r, &spec.classes))
                    .map(|id| spec.classes[id].clone());
                *slots[job].lock().unwrap() = Some(Transcript {
                    paper_id: request.paper_id,
                    repetition: rep,
                    prompt: request.prompt,
                    response,
                    error,
                    parsed,
                    attempts,
                });
            });
        }
    });
    let transcripts: Vec<Transcript> = slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every job ran"))
        .collect();

    // Anything outside the taxonomy never equals a truth id.
    let failed = taxonomy.len();
    let mut per_repetition = Vec::with_capacity(options.repetitions);
    for (rep, chunk) in transcripts.chunks(records.len()).enumerate() {
        let pred: Vec<ClassId> = chunk
            .iter()
            .map(|t| t.parsed.as_deref().and_then(|c| taxonomy.id(c)).unwrap_or(failed))
            .collect();
        per_repetition.push(RepetitionMetrics {
            repetition: rep,
            accuracy: accuracy(&pred, &truth)?,
            weighted_f1: weighted_f1(&pred, &truth)?,
            failures: chunk.iter().filter(|t| t.parsed.is_none()).count(),
        });
    }
    let acc: Vec<f64> = per_repetition.iter().map(|m| m.accuracy).collect();
    let f1: Vec<f64> = per_repetition.iter().map(|m| m.weighted_f1).collect();
    Ok(JudgeRun {
        hints: spec.hints.is_some(),
        transcripts,
        per_repetition,
        accuracy: MeanStd::of(&acc),
        weighted_f1: MeanStd::of(&f1),
    })
}

impl JudgeRun {
    /// Saves every transcript into `store`.
    pub fn record(&self, store: &TranscriptStore) -> Result<()> {
        self.transcripts.iter().try_for_each(|t| store.save(t))
    }
}
