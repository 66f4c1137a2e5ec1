//! Corpus loading, validation, and summary statistics.
//!
//! A corpus is a UTF-8 file with one JSON record per line. Each record is a
//! [`TextExcerpt`]: a source text with a topic label, an optional reference
//! simplification, and zero or more five-option multiple-choice questions.
//! Development corpora may omit MCQs entirely; study corpora carry exactly
//! two per text (see [`Corpus::require_study_shape`]).

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The six topic areas a text may belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Topic {
    PubMed,
    Bio,
    Law,
    Finance,
    LitPhil,
    AeroCS,
}

impl Topic {
    /// All topics in canonical order.
    pub const ALL: [Topic; 6] = [
        Topic::PubMed,
        Topic::Bio,
        Topic::Law,
        Topic::Finance,
        Topic::LitPhil,
        Topic::AeroCS,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Topic::PubMed => "PubMed",
            Topic::Bio => "Bio",
            Topic::Law => "Law",
            Topic::Finance => "Finance",
            Topic::LitPhil => "LitPhil",
            Topic::AeroCS => "AeroCS",
        }
    }
}

impl FromStr for Topic {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, CorpusError> {
        Topic::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| CorpusError::UnknownTopic { line: 0, topic: s.to_string() })
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A five-option multiple-choice question keyed to its excerpt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mcq {
    pub question_id: String,
    pub question: String,
    pub options: Vec<String>,
    pub answer_index: usize,
}

/// One source text with provenance and optional MCQs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextExcerpt {
    pub id: String,
    pub topic: Topic,
    pub source_url: String,
    pub original_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simplified_text: Option<String>,
    #[serde(default)]
    pub mcqs: Vec<Mcq>,
}

impl TextExcerpt {
    /// Word count of the original text: maximal runs of non-whitespace.
    pub fn word_count(&self) -> usize {
        self.original_text.split_whitespace().count()
    }
}

/// An ordered, validated collection of excerpts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    excerpts: Vec<TextExcerpt>,
}

/// Summary statistics over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub n_texts: usize,
    pub mean_words: f64,
    pub sd_words: f64,
    /// topic -> (texts, questions), in canonical topic order.
    pub per_topic_counts: BTreeMap<Topic, (usize, usize)>,
}

/// How to treat record fields outside the schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Unknown fields are an error.
    Strict,
    /// Unknown fields are ignored; each produces a warning.
    #[default]
    Lenient,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error reading corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: parse failure: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown topic {topic:?}")]
    UnknownTopic { line: usize, topic: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: question {question_id:?}: option count \u{2260} 5 (got {got})")]
    OptionCount { line: usize, question_id: String, got: usize },
    #[error("line {line}: question {question_id:?}: answer_index {got} out of range [0,4]")]
    AnswerIndex { line: usize, question_id: String, got: usize },
    #[error("line {line}: unknown field {field:?} (strict mode)")]
    UnknownField { line: usize, field: String },
    #[error("line {line}: original_text is empty")]
    EmptyText { line: usize },
    #[error("excerpt {id:?}: expected exactly 2 MCQs for a study corpus, got {got}")]
    StudyShape { id: String, got: usize },
}

const EXCERPT_FIELDS: [&str; 6] =
    ["id", "topic", "source_url", "original_text", "simplified_text", "mcqs"];
const MCQ_FIELDS: [&str; 4] = ["question_id", "question", "options", "answer_index"];

impl Corpus {
    /// Build a corpus from excerpts, checking every invariant.
    pub fn new(excerpts: Vec<TextExcerpt>) -> Result<Self, CorpusError> {
        let mut corpus = Corpus { excerpts: Vec::with_capacity(excerpts.len()) };
        for (i, e) in excerpts.into_iter().enumerate() {
            corpus.push_checked(e, i + 1)?;
        }
        Ok(corpus)
    }

    fn push_checked(&mut self, excerpt: TextExcerpt, line: usize) -> Result<(), CorpusError> {
        if excerpt.original_text.is_empty() {
            return Err(CorpusError::EmptyText { line });
        }
        if self.excerpts.iter().any(|e| e.id == excerpt.id) {
            return Err(CorpusError::DuplicateId { line, id: excerpt.id });
        }
        let mut seen_q: HashSet<&str> =
            self.excerpts.iter().flat_map(|e| &e.mcqs).map(|q| q.question_id.as_str()).collect();
        for q in &excerpt.mcqs {
            if q.options.len() != 5 {
                return Err(CorpusError::OptionCount {
                    line,
                    question_id: q.question_id.clone(),
                    got: q.options.len(),
                });
            }
            if q.answer_index > 4 {
                return Err(CorpusError::AnswerIndex {
                    line,
                    question_id: q.question_id.clone(),
                    got: q.answer_index,
                });
            }
            if !seen_q.insert(q.question_id.as_str()) {
                return Err(CorpusError::DuplicateId { line, id: q.question_id.clone() });
            }
        }
        self.excerpts.push(excerpt);
        Ok(())
    }

    /// Load a line-delimited corpus file. Returns the corpus plus one
    /// warning per unknown field tolerated in lenient mode.
    pub fn load(
        path: impl AsRef<Path>,
        strictness: Strictness,
    ) -> Result<(Self, Vec<String>), CorpusError> {
        let content = fs::read_to_string(path)?;
        Self::parse(&content, strictness)
    }

    /// Parse corpus records from an in-memory string (one JSON object per line).
    pub fn parse(
        content: &str,
        strictness: Strictness,
    ) -> Result<(Self, Vec<String>), CorpusError> {
        let mut corpus = Corpus::default();
        let mut warnings = Vec::new();
        for (idx, raw_line) in content.lines().enumerate() {
            let line = idx + 1;
            if raw_line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(raw_line)
                .map_err(|e| CorpusError::Parse { line, message: e.to_string() })?;
            let excerpt = excerpt_from_value(value, line, strictness, &mut warnings)?;
            corpus.push_checked(excerpt, line)?;
        }
        Ok((corpus, warnings))
    }

    /// Serialize as line-delimited records, one per excerpt, order preserved.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.excerpts {
            out.push_str(&serde_json::to_string(e).expect("excerpt serializes"));
            out.push('\n');
        }
        out
    }

    /// Write the corpus to a file in the load format.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    pub fn excerpts(&self) -> &[TextExcerpt] {
        &self.excerpts
    }

    /// Looks up one excerpt by id.
    pub fn excerpt(&self, id: &str) -> Option<&TextExcerpt> {
        self.excerpts.iter().find(|e| e.id == id)
    }

    pub fn len(&self) -> usize {
        self.excerpts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.excerpts.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TextExcerpt> {
        self.excerpts.iter().find(|e| e.id == id)
    }

    /// Map question_id -> answer_index over every MCQ in the corpus.
    pub fn answer_key(&self) -> BTreeMap<String, usize> {
        self.excerpts
            .iter()
            .flat_map(|e| &e.mcqs)
            .map(|q| (q.question_id.clone(), q.answer_index))
            .collect()
    }

    /// Map question_id -> owning excerpt id.
    pub fn question_owner(&self) -> BTreeMap<String, String> {
        self.excerpts
            .iter()
            .flat_map(|e| e.mcqs.iter().map(move |q| (q.question_id.clone(), e.id.clone())))
            .collect()
    }

    /// Error unless every excerpt carries exactly 2 MCQs.
    pub fn require_study_shape(&self) -> Result<(), CorpusError> {
        for e in &self.excerpts {
            if e.mcqs.len() != 2 {
                return Err(CorpusError::StudyShape { id: e.id.clone(), got: e.mcqs.len() });
            }
        }
        Ok(())
    }

    /// Word-count statistics and per-topic tallies.
    ///
    /// SD uses the n-1 (sample) denominator; mean and SD report 0 for
    /// corpora with fewer than one / two texts respectively.
    pub fn stats(&self) -> CorpusStats {
        let n = self.excerpts.len();
        let counts: Vec<f64> = self.excerpts.iter().map(|e| e.word_count() as f64).collect();
        let mean = if n == 0 { 0.0 } else { counts.iter().sum::<f64>() / n as f64 };
        let sd = if n <= 1 {
            0.0
        } else {
            let ss: f64 = counts.iter().map(|c| (c - mean) * (c - mean)).sum();
            (ss / (n as f64 - 1.0)).sqrt()
        };
        let mut per_topic: BTreeMap<Topic, (usize, usize)> = BTreeMap::new();
        for e in &self.excerpts {
            let entry = per_topic.entry(e.topic).or_insert((0, 0));
            entry.0 += 1;
            entry.1 += e.mcqs.len();
        }
        CorpusStats { n_texts: n, mean_words: mean, sd_words: sd, per_topic_counts: per_topic }
    }
}

fn excerpt_from_value(
    value: serde_json::Value,
    line: usize,
    strictness: Strictness,
    warnings: &mut Vec<String>,
) -> Result<TextExcerpt, CorpusError> {
    let obj = value
        .as_object()
        .ok_or_else(|| CorpusError::Parse { line, message: "record is not an object".into() })?;

    check_fields(obj.keys(), &EXCERPT_FIELDS, line, strictness, warnings)?;

    let get_str = |key: &str| -> Result<String, CorpusError> {
        obj.get(key).and_then(|v| v.as_str()).map(str::to_string).ok_or_else(|| {
            CorpusError::Parse { line, message: format!("missing or non-string field {key:?}") }
        })
    };

    let topic_str = get_str("topic")?;
    let topic = Topic::from_str(&topic_str)
        .map_err(|_| CorpusError::UnknownTopic { line, topic: topic_str })?;

    let simplified_text = match obj.get("simplified_text") {
        None | Some(serde_json::Value::Null) => None,
        Some(serde_json::Value::String(s)) => Some(s.clone()),
        Some(_) => {
            return Err(CorpusError::Parse {
                line,
                message: "simplified_text must be a string".into(),
            })
        }
    };

    let mut mcqs = Vec::new();
    if let Some(raw_mcqs) = obj.get("mcqs") {
        let arr = raw_mcqs.as_array().ok_or_else(|| CorpusError::Parse {
            line,
            message: "mcqs must be an array".into(),
        })?;
        for raw_q in arr {
            let qobj = raw_q.as_object().ok_or_else(|| CorpusError::Parse {
                line,
                message: "mcq entry is not an object".into(),
            })?;
            check_fields(qobj.keys(), &MCQ_FIELDS, line, strictness, warnings)?;
            let mcq: Mcq = serde_json::from_value(raw_q.clone())
                .map_err(|e| CorpusError::Parse { line, message: e.to_string() })?;
            mcqs.push(mcq);
        }
    }

    Ok(TextExcerpt {
        id: get_str("id")?,
        topic,
        source_url: get_str("source_url")?,
        original_text: get_str("original_text")?,
        simplified_text,
        mcqs,
    })
}

fn check_fields<'a>(
    keys: impl Iterator<Item = &'a String>,
    known: &[&str],
    line: usize,
    strictness: Strictness,
    warnings: &mut Vec<String>,
) -> Result<(), CorpusError> {
    for key in keys {
        if !known.contains(&key.as_str()) {
            match strictness {
                Strictness::Strict => {
                    return Err(CorpusError::UnknownField { line, field: key.clone() })
                }
                Strictness::Lenient => {
                    warnings.push(format!("line {line}: ignoring unknown field {key:?}"));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn excerpt(id: &str, topic: Topic, text: &str) -> TextExcerpt {
        TextExcerpt {
            id: id.to_string(),
            topic,
            source_url: format!("https://example.org/{id}"),
            original_text: text.to_string(),
            simplified_text: None,
            mcqs: Vec::new(),
        }
    }

    fn mcq(qid: &str, answer: usize) -> Mcq {
        Mcq {
            question_id: qid.to_string(),
            question: "Which?".to_string(),
            options: (0..5).map(|i| format!("opt{i}")).collect(),
            answer_index: answer,
        }
    }

    #[test]
    fn loads_two_records_in_order() {
        let content = concat!(
            r#"{"id":"t1","topic":"Bio","source_url":"u1","original_text":"one"}"#,
            "\n",
            r#"{"id":"t2","topic":"Law","source_url":"u2","original_text":"two"}"#,
            "\n"
        );
        let (corpus, warnings) = Corpus::parse(content, Strictness::Strict).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.excerpts()[0].id, "t1");
        assert_eq!(corpus.excerpts()[1].id, "t2");
    }

    #[test]
    fn four_options_rejected() {
        let content = r#"{"id":"t1","topic":"Bio","source_url":"u","original_text":"x","mcqs":[{"question_id":"q1","question":"?","options":["a","b","c","d"],"answer_index":0}]}"#;
        let err = Corpus::parse(content, Strictness::Strict).unwrap_err();
        match err {
            CorpusError::OptionCount { line, got, .. } => {
                assert_eq!(line, 1);
                assert_eq!(got, 4);
            }
            other => panic!("expected OptionCount, got {other:?}"),
        }
    }

    #[test]
    fn answer_index_out_of_range_rejected() {
        let mut e = excerpt("t1", Topic::Bio, "x");
        e.mcqs.push(mcq("q1", 5));
        let err = Corpus::new(vec![e]).unwrap_err();
        assert!(matches!(err, CorpusError::AnswerIndex { got: 5, .. }));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err =
            Corpus::new(vec![excerpt("t1", Topic::Bio, "a"), excerpt("t1", Topic::Law, "b")])
                .unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId { .. }));

        let mut e1 = excerpt("t1", Topic::Bio, "a");
        e1.mcqs.push(mcq("q1", 0));
        let mut e2 = excerpt("t2", Topic::Bio, "b");
        e2.mcqs.push(mcq("q1", 1));
        let err = Corpus::new(vec![e1, e2]).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId { .. }));
    }

    #[test]
    fn unknown_topic_rejected_with_line() {
        let content = r#"{"id":"t1","topic":"Sports","source_url":"u","original_text":"x"}"#;
        let err = Corpus::parse(content, Strictness::Strict).unwrap_err();
        assert!(matches!(err, CorpusError::UnknownTopic { line: 1, .. }));
    }

    #[test]
    fn parse_failure_reports_line_number() {
        let content = "{\"id\":\"t1\",\"topic\":\"Bio\",\"source_url\":\"u\",\"original_text\":\"x\"}\nnot json\n";
        let err = Corpus::parse(content, Strictness::Strict).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 2, .. }));
    }

    #[test]
    fn unknown_field_strict_vs_lenient() {
        let content =
            r#"{"id":"t1","topic":"Bio","source_url":"u","original_text":"x","extra":1}"#;
        let err = Corpus::parse(content, Strictness::Strict).unwrap_err();
        assert!(matches!(err, CorpusError::UnknownField { .. }));

        let (corpus, warnings) = Corpus::parse(content, Strictness::Lenient).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("extra"));
    }

    #[test]
    fn stats_hand_computed_pair() {
        // words 3 and 5; sample SD = sqrt(((3-4)^2 + (5-4)^2) / 1) = sqrt(2)
        let corpus = Corpus::new(vec![
            excerpt("a", Topic::Bio, "a b c"),
            excerpt("b", Topic::Bio, "a b c d e"),
        ])
        .unwrap();
        let stats = corpus.stats();
        assert_eq!(stats.n_texts, 2);
        assert_eq!(stats.mean_words, 4.0);
        assert!((stats.sd_words - 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn stats_single_text() {
        let corpus = Corpus::new(vec![excerpt("a", Topic::Bio, "hello")]).unwrap();
        let stats = corpus.stats();
        assert_eq!(stats.n_texts, 1);
        assert_eq!(stats.mean_words, 1.0);
        assert_eq!(stats.sd_words, 0.0);
    }

    #[test]
    fn stats_empty_corpus() {
        let stats = Corpus::default().stats();
        assert_eq!(stats.n_texts, 0);
        assert_eq!(stats.mean_words, 0.0);
        assert_eq!(stats.sd_words, 0.0);
        assert!(stats.per_topic_counts.is_empty());
    }

    #[test]
    fn empty_original_text_rejected() {
        let err = Corpus::new(vec![excerpt("a", Topic::Bio, "")]).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyText { .. }));
    }

    #[test]
    fn study_shape_requires_two_mcqs() {
        let mut e = excerpt("a", Topic::Bio, "x");
        e.mcqs.push(mcq("q1", 0));
        let corpus = Corpus::new(vec![e]).unwrap();
        assert!(matches!(
            corpus.require_study_shape(),
            Err(CorpusError::StudyShape { got: 1, .. })
        ));
    }

    #[test]
    fn per_topic_counts_sum_to_totals() {
        let mut e1 = excerpt("a", Topic::Bio, "x");
        e1.mcqs.push(mcq("q1", 0));
        e1.mcqs.push(mcq("q2", 1));
        let e2 = excerpt("b", Topic::Law, "y z");
        let corpus = Corpus::new(vec![e1, e2]).unwrap();
        let stats = corpus.stats();
        let (texts, questions) = stats
            .per_topic_counts
            .values()
            .fold((0, 0), |(t, q), (dt, dq)| (t + dt, q + dq));
        assert_eq!(texts, stats.n_texts);
        assert_eq!(questions, 2);
    }

    fn arb_topic() -> impl Strategy<Value = Topic> {
        prop::sample::select(Topic::ALL.to_vec())
    }

    fn arb_excerpt(idx: usize) -> impl Strategy<Value = TextExcerpt> {
        (
            arb_topic(),
            "[a-z ]{1,40}",
            prop::option::of("[a-z ]{1,20}"),
            prop::collection::vec((0usize..5, "[a-z]{1,8}"), 0..3),
        )
            .prop_map(move |(topic, text, simplified, qs)| TextExcerpt {
                id: format!("t{idx}"),
                topic,
                source_url: format!("https://example.org/{idx}"),
                original_text: if text.trim().is_empty() { "x".into() } else { text },
                simplified_text: simplified,
                mcqs: qs
                    .into_iter()
                    .enumerate()
                    .map(|(j, (answer, q))| Mcq {
                        question_id: format!("t{idx}-q{j}"),
                        question: q,
                        options: (0..5).map(|i| format!("o{i}")).collect(),
                        answer_index: answer,
                    })
                    .collect(),
            })
    }

    fn arb_corpus() -> impl Strategy<Value = Corpus> {
        prop::collection::vec(prop::num::u8::ANY, 0..8).prop_flat_map(|sizes| {
            let strategies: Vec<_> = sizes.iter().enumerate().map(|(i, _)| arb_excerpt(i)).collect();
            strategies.prop_map(|excerpts| Corpus::new(excerpts).unwrap())
        })
    }

    proptest! {
        #[test]
        fn roundtrip_save_load(corpus in arb_corpus()) {
            let bytes = corpus.to_jsonl();
            let (loaded, warnings) = Corpus::parse(&bytes, Strictness::Strict).unwrap();
            prop_assert!(warnings.is_empty());
            prop_assert_eq!(&loaded, &corpus);
            // canonical form is a fixed point
            prop_assert_eq!(loaded.to_jsonl(), bytes);
        }

        #[test]
        fn stats_permutation_invariant(corpus in arb_corpus(), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = corpus.excerpts().to_vec();
            shuffled.shuffle(&mut rng);
            let permuted = Corpus::new(shuffled).unwrap();
            let a = corpus.stats();
            let b = permuted.stats();
            prop_assert!((a.mean_words - b.mean_words).abs() < 1e-9);
            prop_assert!((a.sd_words - b.sd_words).abs() < 1e-9);
            prop_assert_eq!(a.per_topic_counts, b.per_topic_counts);
        }
    }
}
