//! Randomized comprehension-study machinery.
//!
//! Covers the offline analysis half of a six-arm reading study: screening
//! participants, assigning arms in a randomized complete block design
//! (blocked by topic), ingesting response files, scoring accuracy and
//! Likert answers, contrasting arms with two-sample t statistics, and
//! emitting plot-ready CSV tables.
//!
//! Arms 1 and 4 are controls (original text); 2/5 show the simplified text
//! and 3/6 show both. Arms 1-3 are open book (text visible while
//! answering), arms 4-6 closed book.

pub mod report;
pub mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Topic;
use stats::{EffectEstimate, PerQuestionTable, TestMethod};

/// One of the six study arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum StudyArm {
    OriginalOpen,
    SimplifiedOpen,
    BothOpen,
    OriginalClosed,
    SimplifiedClosed,
    BothClosed,
}

impl StudyArm {
    /// All arms in numeric order 1-6.
    pub const ALL: [StudyArm; 6] = [
        StudyArm::OriginalOpen,
        StudyArm::SimplifiedOpen,
        StudyArm::BothOpen,
        StudyArm::OriginalClosed,
        StudyArm::SimplifiedClosed,
        StudyArm::BothClosed,
    ];

    pub fn number(self) -> u8 {
        match self {
            StudyArm::OriginalOpen => 1,
            StudyArm::SimplifiedOpen => 2,
            StudyArm::BothOpen => 3,
            StudyArm::OriginalClosed => 4,
            StudyArm::SimplifiedClosed => 5,
            StudyArm::BothClosed => 6,
        }
    }

    pub fn is_control(self) -> bool {
        matches!(self, StudyArm::OriginalOpen | StudyArm::OriginalClosed)
    }

    pub fn condition(self) -> Condition {
        match self {
            StudyArm::OriginalOpen | StudyArm::SimplifiedOpen | StudyArm::BothOpen => {
                Condition::Open
            }
            _ => Condition::Closed,
        }
    }

    pub fn material(self) -> Material {
        match self {
            StudyArm::OriginalOpen | StudyArm::OriginalClosed => Material::Original,
            StudyArm::SimplifiedOpen | StudyArm::SimplifiedClosed => Material::Simplified,
            StudyArm::BothOpen | StudyArm::BothClosed => Material::Both,
        }
    }
}

impl TryFrom<u8> for StudyArm {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, String> {
        StudyArm::ALL
            .into_iter()
            .find(|a| a.number() == value)
            .ok_or_else(|| format!("study arm must be 1-6, got {value}"))
    }
}

impl From<StudyArm> for u8 {
    fn from(arm: StudyArm) -> u8 {
        arm.number()
    }
}

/// What the participant read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    Original,
    Simplified,
    Both,
}

/// Whether the text stayed visible while answering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Open,
    Closed,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Open => "open",
            Condition::Closed => "closed",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Self-reported age, bucketed as collected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgeBucket {
    #[serde(rename = "under_18")]
    Under18,
    #[serde(rename = "18_to_24")]
    From18To24,
    #[serde(rename = "25_to_34")]
    From25To34,
    #[serde(rename = "35_to_44")]
    From35To44,
    #[serde(rename = "45_to_54")]
    From45To54,
    #[serde(rename = "55_to_64")]
    From55To64,
    #[serde(rename = "65_to_74")]
    From65To74,
    #[serde(rename = "75_or_over")]
    From75,
    #[serde(rename = "undisclosed")]
    Undisclosed,
}

impl AgeBucket {
    /// The enrollment-target group this bucket counts toward, if any.
    /// Buckets 55 and over share one target.
    pub fn quota_group(self) -> Option<usize> {
        match self {
            AgeBucket::From18To24 => Some(0),
            AgeBucket::From25To34 => Some(1),
            AgeBucket::From35To44 => Some(2),
            AgeBucket::From45To54 => Some(3),
            AgeBucket::From55To64 | AgeBucket::From65To74 | AgeBucket::From75 => Some(4),
            AgeBucket::Under18 | AgeBucket::Undisclosed => None,
        }
    }
}

/// Self-reported gender, as analyzed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Man,
    Woman,
    NonbinaryOrUndisclosed,
}

/// Everything a participant self-reports before randomization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub age_bucket: AgeBucket,
    pub gender: Gender,
    pub native_english: bool,
    pub english_primary: bool,
    pub english_confidence: String,
    pub education: String,
    /// Self-reported domains of educational background, matched against the
    /// per-topic exclusion lists after normalization.
    pub expertise: BTreeSet<String>,
    pub consent: bool,
}

/// A participant in one topic block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub participant_id: String,
    pub topic: Topic,
    pub demographics: Demographics,
    /// Assigned only after screening in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<StudyArm>,
    pub attention_pass: bool,
}

/// The first screening rule a participant fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    /// Neither a native speaker nor a primary English user.
    Language,
    Age,
    Consent,
    /// Self-reported background in the topic's exclusion domain.
    Expertise { domain: String },
}

impl fmt::Display for Exclusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exclusion::Language => f.write_str("language"),
            Exclusion::Age => f.write_str("age"),
            Exclusion::Consent => f.write_str("consent"),
            Exclusion::Expertise { domain } => write!(f, "expertise ({domain})"),
        }
    }
}

/// Expertise domains that exclude a participant from a topic block,
/// in canonical normalized form.
pub fn exclusion_domains(topic: Topic) -> &'static [&'static str] {
    match topic {
        Topic::PubMed | Topic::Bio => &["biology", "life sciences", "healthcare/medicine"],
        Topic::Law => &["law"],
        Topic::Finance => &["finance/economics/accounting"],
        Topic::LitPhil => &["literature/philosophy"],
        Topic::AeroCS => &["aerospace", "computer science", "robotics"],
    }
}

/// Canonicalizes a self-reported domain: lowercase, trimmed, with
/// whitespace collapsed around `/` separators.
pub fn normalize_domain(raw: &str) -> String {
    raw.to_ascii_lowercase()
        .split('/')
        .map(str::trim)
        .collect::<Vec<_>>()
        .join("/")
        .trim()
        .to_string()
}

/// Applies the screening rules in order: language, age, consent, topic
/// expertise. Returns the first failing rule, or None when eligible.
///
/// The language rule excludes only participants who are neither native
/// speakers nor primary English users; either one suffices to pass.
pub fn screen(record: &ParticipantRecord, topic: Topic) -> Option<Exclusion> {
    let d = &record.demographics;
    if !d.native_english && !d.english_primary {
        return Some(Exclusion::Language);
    }
    if d.age_bucket == AgeBucket::Under18 {
        return Some(Exclusion::Age);
    }
    if !d.consent {
        return Some(Exclusion::Consent);
    }
    let normalized: BTreeSet<String> = d.expertise.iter().map(|s| normalize_domain(s)).collect();
    for domain in exclusion_domains(topic) {
        if normalized.contains(*domain) {
            return Some(Exclusion::Expertise { domain: (*domain).to_string() });
        }
    }
    None
}

fn block_rng(seed: u64, topic: Topic) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(topic.as_str().as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// Randomized complete block design: within each topic block, participants
/// are shuffled with a generator derived from (seed, topic), then dealt
/// round-robin to arms 1-6, so per-block arm counts differ by at most one.
///
/// Deterministic given the seed; blocks are independent, so adding a
/// participant to one topic never moves assignments in another.
pub fn assign_arms(records: &[ParticipantRecord], seed: u64) -> BTreeMap<String, StudyArm> {
    let mut by_topic: BTreeMap<Topic, Vec<&str>> = BTreeMap::new();
    for record in records {
        by_topic.entry(record.topic).or_default().push(&record.participant_id);
    }
    let mut assignments = BTreeMap::new();
    for (topic, mut ids) in by_topic {
        ids.sort_unstable();
        ids.dedup();
        let mut rng = block_rng(seed, topic);
        ids.shuffle(&mut rng);
        for (i, id) in ids.iter().enumerate() {
            assignments.insert((*id).to_string(), StudyArm::ALL[i % 6]);
        }
    }
    assignments
}

/// One answered multiple-choice question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqResponse {
    pub participant_id: String,
    pub question_id: String,
    /// Selected option, 0-4.
    pub selected_index: u8,
    /// selected_index equals the answer key's index.
    pub correct: bool,
    /// In [-2, 2]; +2 is most confident.
    pub confidence_likert: i8,
}

/// One post-text task-load answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskLoadResponse {
    pub participant_id: String,
    pub text_id: String,
    /// In [-2, 2]; +2 is easiest.
    pub ease_likert: i8,
}

/// An MCQ response with its study context attached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqRow {
    pub topic: Topic,
    pub arm: StudyArm,
    pub attention_pass: bool,
    pub response: McqResponse,
}

/// A task-load response with its study context attached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EaseRow {
    pub topic: Topic,
    pub arm: StudyArm,
    pub attention_pass: bool,
    pub response: TaskLoadResponse,
}

/// Every ingested response, split by kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseSet {
    pub mcq: Vec<McqRow>,
    pub ease: Vec<EaseRow>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawResponseLine {
    participant_id: String,
    topic: Topic,
    arm: StudyArm,
    #[serde(default)]
    question_id: Option<String>,
    #[serde(default)]
    selected_index: Option<u8>,
    #[serde(default)]
    confidence_label: Option<String>,
    #[serde(default)]
    text_id: Option<String>,
    #[serde(default)]
    ease_label: Option<String>,
    attention_pass: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown question id {question_id:?}")]
    UnknownQuestion { line: usize, question_id: String },
    #[error("line {line}: participant {participant_id:?} reappears with a different topic or arm")]
    ArmConflict { line: usize, participant_id: String },
    #[error("unknown {scale} label {label:?}")]
    UnknownLikertLabel { label: String, scale: &'static str },
}

impl ResponseSet {
    /// Parses the line-delimited responses format. A line answers either
    /// one MCQ (question_id, selected_index, confidence_label) or one
    /// task-load question (text_id, ease_label), never both. `correct` is
    /// derived from the answer key.
    pub fn parse(
        input: &str,
        answer_key: &BTreeMap<String, usize>,
    ) -> Result<ResponseSet, StudyError> {
        let mut set = ResponseSet::default();
        let mut seen: BTreeMap<String, (Topic, StudyArm)> = BTreeMap::new();
        for (idx, raw_line) in input.lines().enumerate() {
            let line = idx + 1;
            if raw_line.trim().is_empty() {
                continue;
            }
            let raw: RawResponseLine = serde_json::from_str(raw_line)
                .map_err(|e| StudyError::Malformed { line, message: e.to_string() })?;

            match seen.entry(raw.participant_id.clone()) {
                std::collections::btree_map::Entry::Vacant(v) => {
                    v.insert((raw.topic, raw.arm));
                }
                std::collections::btree_map::Entry::Occupied(o) => {
                    if *o.get() != (raw.topic, raw.arm) {
                        return Err(StudyError::ArmConflict {
                            line,
                            participant_id: raw.participant_id,
                        });
                    }
                }
            }

            let is_mcq = raw.question_id.is_some();
            let is_ease = raw.text_id.is_some();
            match (is_mcq, is_ease) {
                (true, true) => {
                    return Err(StudyError::Malformed {
                        line,
                        message: "line carries both question_id and text_id".into(),
                    })
                }
                (false, false) => {
                    return Err(StudyError::Malformed {
                        line,
                        message: "line carries neither question_id nor text_id".into(),
                    })
                }
                (true, false) => {
                    let question_id = raw.question_id.unwrap();
                    let selected_index = raw.selected_index.ok_or(StudyError::Malformed {
                        line,
                        message: "MCQ line lacks selected_index".into(),
                    })?;
                    if selected_index > 4 {
                        return Err(StudyError::Malformed {
                            line,
                            message: format!("selected_index {selected_index} out of range 0-4"),
                        });
                    }
                    let label = raw.confidence_label.ok_or(StudyError::Malformed {
                        line,
                        message: "MCQ line lacks confidence_label".into(),
                    })?;
                    let confidence_likert = map_likert(&label, LikertScale::Confidence)
                        .map_err(|e| StudyError::Malformed { line, message: e.to_string() })?;
                    let answer = *answer_key.get(&question_id).ok_or_else(|| {
                        StudyError::UnknownQuestion { line, question_id: question_id.clone() }
                    })?;
                    set.mcq.push(McqRow {
                        topic: raw.topic,
                        arm: raw.arm,
                        attention_pass: raw.attention_pass,
                        response: McqResponse {
                            participant_id: raw.participant_id,
                            question_id,
                            selected_index,
                            correct: usize::from(selected_index) == answer,
                            confidence_likert,
                        },
                    });
                }
                (false, true) => {
                    let text_id = raw.text_id.unwrap();
                    let label = raw.ease_label.ok_or(StudyError::Malformed {
                        line,
                        message: "task-load line lacks ease_label".into(),
                    })?;
                    let ease_likert = map_likert(&label, LikertScale::Ease)
                        .map_err(|e| StudyError::Malformed { line, message: e.to_string() })?;
                    set.ease.push(EaseRow {
                        topic: raw.topic,
                        arm: raw.arm,
                        attention_pass: raw.attention_pass,
                        response: TaskLoadResponse {
                            participant_id: raw.participant_id,
                            text_id,
                            ease_likert,
                        },
                    });
                }
            }
        }
        Ok(set)
    }

    /// Participants with any failed attention check; they are dropped from
    /// every analysis.
    pub fn failed_attention(&self) -> BTreeSet<String> {
        let mut failed = BTreeSet::new();
        for row in &self.mcq {
            if !row.attention_pass {
                failed.insert(row.response.participant_id.clone());
            }
        }
        for row in &self.ease {
            if !row.attention_pass {
                failed.insert(row.response.participant_id.clone());
            }
        }
        failed
    }
}

/// One participant's MCQ accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub participant_id: String,
    pub topic: Topic,
    pub arm: StudyArm,
    pub answered: usize,
    pub n_correct: usize,
    pub accuracy: f64,
}

/// Per-participant accuracy over the retained responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    /// One row per retained participant, ascending participant id.
    pub rows: Vec<AccuracyRow>,
    /// All MCQ responses ingested, before attention filtering.
    pub total_responses: usize,
    pub dropped_participants: BTreeSet<String>,
    /// MCQ responses belonging to dropped participants.
    pub dropped_responses: usize,
}

/// Drops attention-check failures, then scores each remaining participant
/// as correct answers over answered questions.
pub fn score_responses(set: &ResponseSet) -> AccuracyTable {
    let dropped_participants = set.failed_attention();
    let mut per_participant: BTreeMap<&str, (Topic, StudyArm, usize, usize)> = BTreeMap::new();
    let mut dropped_responses = 0usize;
    for row in &set.mcq {
        let id = row.response.participant_id.as_str();
        if dropped_participants.contains(id) {
            dropped_responses += 1;
            continue;
        }
        let entry = per_participant.entry(id).or_insert((row.topic, row.arm, 0, 0));
        entry.2 += 1;
        if row.response.correct {
            entry.3 += 1;
        }
    }
    let rows = per_participant
        .into_iter()
        .map(|(id, (topic, arm, answered, n_correct))| AccuracyRow {
            participant_id: id.to_string(),
            topic,
            arm,
            answered,
            n_correct,
            accuracy: n_correct as f64 / answered as f64,
        })
        .collect();
    AccuracyTable {
        rows,
        total_responses: set.mcq.len(),
        dropped_participants,
        dropped_responses,
    }
}

/// The two bipolar five-point scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LikertScale {
    Confidence,
    Ease,
}

impl LikertScale {
    pub fn as_str(self) -> &'static str {
        match self {
            LikertScale::Confidence => "confidence",
            LikertScale::Ease => "ease",
        }
    }
}

/// Canonical answer options, most positive first.
pub fn likert_labels(scale: LikertScale) -> [&'static str; 5] {
    match scale {
        LikertScale::Confidence => [
            "Very confident",
            "Somewhat confident",
            "Neither confident nor unconfident",
            "Somewhat unconfident",
            "Very unconfident",
        ],
        LikertScale::Ease => [
            "Very easy",
            "Somewhat easy",
            "Neither easy nor difficult",
            "Somewhat difficult",
            "Very difficult",
        ],
    }
}

/// Maps an answer label to its integer in [-2, 2]; +2 is the most
/// positive pole (very confident / very easy). Case-insensitive.
pub fn map_likert(label: &str, scale: LikertScale) -> Result<i8, StudyError> {
    let trimmed = label.trim();
    likert_labels(scale)
        .iter()
        .position(|candidate| candidate.eq_ignore_ascii_case(trimmed))
        .map(|i| 2 - i as i8)
        .ok_or_else(|| StudyError::UnknownLikertLabel {
            label: label.to_string(),
            scale: scale.as_str(),
        })
}

/// Which rows feed a Likert contrast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikertUnit {
    /// One value per participant: the mean over their responses.
    PerParticipantMean,
    /// One value per response, pooled.
    PerResponse,
}

/// One analysis value with its study context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub participant_id: String,
    pub topic: Topic,
    pub arm: StudyArm,
    pub value: f64,
}

fn likert_values<I>(rows: I, failed: &BTreeSet<String>, unit: LikertUnit) -> Vec<MetricValue>
where
    I: Iterator<Item = (Topic, StudyArm, String, i8)>,
{
    match unit {
        LikertUnit::PerResponse => rows
            .filter(|(_, _, id, _)| !failed.contains(id))
            .map(|(topic, arm, participant_id, v)| MetricValue {
                participant_id,
                topic,
                arm,
                value: f64::from(v),
            })
            .collect(),
        LikertUnit::PerParticipantMean => {
            let mut per: BTreeMap<String, (Topic, StudyArm, f64, usize)> = BTreeMap::new();
            for (topic, arm, id, v) in rows {
                if failed.contains(&id) {
                    continue;
                }
                let entry = per.entry(id).or_insert((topic, arm, 0.0, 0));
                entry.2 += f64::from(v);
                entry.3 += 1;
            }
            per.into_iter()
                .map(|(participant_id, (topic, arm, sum, n))| MetricValue {
                    participant_id,
                    topic,
                    arm,
                    value: sum / n as f64,
                })
                .collect()
        }
    }
}

/// Confidence values for contrasts, attention failures dropped.
pub fn confidence_values(set: &ResponseSet, unit: LikertUnit) -> Vec<MetricValue> {
    let failed = set.failed_attention();
    likert_values(
        set.mcq.iter().map(|r| {
            (r.topic, r.arm, r.response.participant_id.clone(), r.response.confidence_likert)
        }),
        &failed,
        unit,
    )
}

/// Task-load ease values for contrasts, attention failures dropped.
pub fn ease_values(set: &ResponseSet, unit: LikertUnit) -> Vec<MetricValue> {
    let failed = set.failed_attention();
    likert_values(
        set.ease.iter().map(|r| {
            (r.topic, r.arm, r.response.participant_id.clone(), r.response.ease_likert)
        }),
        &failed,
        unit,
    )
}

/// Enrollment targets: age-group shares and a 1:1 man:woman ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotaRow {
    pub label: String,
    pub count: usize,
    pub share: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotaReport {
    pub age: Vec<QuotaRow>,
    pub gender: Vec<QuotaRow>,
    pub tolerance: f64,
    pub all_green: bool,
}

const AGE_QUOTA_LABELS: [&str; 5] = ["18_to_24", "25_to_34", "35_to_44", "45_to_54", "55_plus"];
const AGE_QUOTA_TARGETS: [f64; 5] = [0.16, 0.17, 0.16, 0.16, 0.35];

/// Compares achieved demographic shares against the enrollment targets.
///
/// Age shares are computed over participants with a disclosed adult age;
/// gender shares over all records. A row is flagged when it has a target
/// and deviates from it by more than `tolerance` (absolute share).
pub fn check_quotas(records: &[ParticipantRecord], tolerance: f64) -> QuotaReport {
    let mut age_counts = [0usize; 5];
    let mut age_total = 0usize;
    let mut gender_counts: BTreeMap<Gender, usize> = BTreeMap::new();
    for record in records {
        if let Some(group) = record.demographics.age_bucket.quota_group() {
            age_counts[group] += 1;
            age_total += 1;
        }
        *gender_counts.entry(record.demographics.gender).or_insert(0) += 1;
    }

    let age = AGE_QUOTA_LABELS
        .iter()
        .zip(AGE_QUOTA_TARGETS)
        .zip(age_counts)
        .map(|((label, target), count)| {
            let share = if age_total == 0 { 0.0 } else { count as f64 / age_total as f64 };
            QuotaRow {
                label: (*label).to_string(),
                count,
                share,
                target: Some(target),
                flagged: (share - target).abs() > tolerance,
            }
        })
        .collect::<Vec<_>>();

    let total = records.len();
    let gender_rows = [
        (Gender::Man, "man", Some(0.5)),
        (Gender::Woman, "woman", Some(0.5)),
        (Gender::NonbinaryOrUndisclosed, "nonbinary_or_undisclosed", None),
    ];
    let gender = gender_rows
        .into_iter()
        .map(|(g, label, target)| {
            let count = gender_counts.get(&g).copied().unwrap_or(0);
            let share = if total == 0 { 0.0 } else { count as f64 / total as f64 };
            QuotaRow {
                label: label.to_string(),
                count,
                share,
                target,
                flagged: target.is_some_and(|t| (share - t).abs() > tolerance),
            }
        })
        .collect::<Vec<_>>();

    let all_green = age.iter().chain(gender.iter()).all(|row| !row.flagged);
    QuotaReport { age, gender, tolerance, all_green }
}

/// Analysis knobs; defaults match the primary analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub method: TestMethod,
    pub likert_unit: LikertUnit,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            method: TestMethod::Pooled,
            likert_unit: LikertUnit::PerParticipantMean,
        }
    }
}

/// One simplified-vs-original contrast at a scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopedEffect {
    pub condition: Condition,
    /// "overall" or a topic label.
    pub scope: String,
    /// None when either group is too small.
    pub estimate: Option<EffectEstimate>,
}

/// One both-texts-vs-original contrast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuppEffect {
    pub metric: String,
    pub condition: Condition,
    pub scope: String,
    pub estimate: Option<EffectEstimate>,
}

/// Everything the report emitter needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyAnalysis {
    pub accuracy: Vec<ScopedEffect>,
    pub confidence: Vec<ScopedEffect>,
    pub ease: Vec<ScopedEffect>,
    /// Per-question accuracy under original vs simplified, one table per
    /// condition.
    pub scatter: Vec<(Condition, PerQuestionTable)>,
    pub supplementary: Vec<SuppEffect>,
}

fn contrast_values(
    values: &[MetricValue],
    arm: StudyArm,
    topic: Option<Topic>,
) -> Vec<f64> {
    values
        .iter()
        .filter(|v| v.arm == arm && topic.is_none_or(|t| v.topic == t))
        .map(|v| v.value)
        .collect()
}

fn scoped_effects(
    metric: &str,
    values: &[MetricValue],
    control_of: impl Fn(Condition) -> StudyArm,
    treatment_of: impl Fn(Condition) -> StudyArm,
    method: TestMethod,
) -> Vec<ScopedEffect> {
    let mut out = Vec::new();
    for condition in [Condition::Open, Condition::Closed] {
        let scopes = std::iter::once(None).chain(Topic::ALL.into_iter().map(Some));
        for topic in scopes {
            let control = contrast_values(values, control_of(condition), topic);
            let treatment = contrast_values(values, treatment_of(condition), topic);
            let estimate =
                stats::compare_arms(metric, &control, &treatment, method).ok();
            out.push(ScopedEffect {
                condition,
                scope: topic.map_or_else(|| "overall".to_string(), |t| t.as_str().to_string()),
                estimate,
            });
        }
    }
    out
}

/// Runs the full contrast suite over a response set: simplified vs original
/// per condition and scope for accuracy, confidence, and ease; per-question
/// accuracy scatter with a least-squares fit; and both-texts vs original
/// supplementary contrasts.
pub fn analyze_study(set: &ResponseSet, config: &AnalysisConfig) -> StudyAnalysis {
    let accuracy_table = score_responses(set);
    let accuracy_values: Vec<MetricValue> = accuracy_table
        .rows
        .iter()
        .map(|r| MetricValue {
            participant_id: r.participant_id.clone(),
            topic: r.topic,
            arm: r.arm,
            value: r.accuracy,
        })
        .collect();
    let confidence = confidence_values(set, config.likert_unit);
    let ease = ease_values(set, config.likert_unit);

    let original_of = |c: Condition| match c {
        Condition::Open => StudyArm::OriginalOpen,
        Condition::Closed => StudyArm::OriginalClosed,
    };
    let simplified_of = |c: Condition| match c {
        Condition::Open => StudyArm::SimplifiedOpen,
        Condition::Closed => StudyArm::SimplifiedClosed,
    };
    let both_of = |c: Condition| match c {
        Condition::Open => StudyArm::BothOpen,
        Condition::Closed => StudyArm::BothClosed,
    };

    let mut supplementary = Vec::new();
    for (metric, values) in [
        ("accuracy", &accuracy_values),
        ("confidence", &confidence),
        ("ease", &ease),
    ] {
        for effect in scoped_effects(metric, values, original_of, both_of, config.method) {
            supplementary.push(SuppEffect {
                metric: metric.to_string(),
                condition: effect.condition,
                scope: effect.scope,
                estimate: effect.estimate,
            });
        }
    }

    let failed = set.failed_attention();
    let scatter = [Condition::Open, Condition::Closed]
        .into_iter()
        .map(|condition| {
            let pairs_for = |arm: StudyArm| -> Vec<(String, bool)> {
                set.mcq
                    .iter()
                    .filter(|r| r.arm == arm && !failed.contains(&r.response.participant_id))
                    .map(|r| (r.response.question_id.clone(), r.response.correct))
                    .collect()
            };
            let table = stats::per_question_table(
                &pairs_for(original_of(condition)),
                &pairs_for(simplified_of(condition)),
            );
            (condition, table)
        })
        .collect();

    StudyAnalysis {
        accuracy: scoped_effects(
            "accuracy",
            &accuracy_values,
            original_of,
            simplified_of,
            config.method,
        ),
        confidence: scoped_effects(
            "confidence",
            &confidence,
            original_of,
            simplified_of,
            config.method,
        ),
        ease: scoped_effects("ease", &ease, original_of, simplified_of, config.method),
        scatter,
        supplementary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demographics() -> Demographics {
        Demographics {
            age_bucket: AgeBucket::From25To34,
            gender: Gender::Woman,
            native_english: true,
            english_primary: true,
            english_confidence: "Extremely confident".into(),
            education: "College".into(),
            expertise: BTreeSet::new(),
            consent: true,
        }
    }

    fn participant(id: &str, topic: Topic) -> ParticipantRecord {
        ParticipantRecord {
            participant_id: id.into(),
            topic,
            demographics: demographics(),
            arm: None,
            attention_pass: true,
        }
    }

    #[test]
    fn screen_passes_non_native_primary_user() {
        let mut record = participant("p1", Topic::PubMed);
        record.demographics.native_english = false;
        record.demographics.english_primary = true;
        assert_eq!(screen(&record, Topic::PubMed), None);
    }

    #[test]
    fn screen_language_requires_both_failures() {
        let mut record = participant("p1", Topic::Law);
        record.demographics.native_english = false;
        record.demographics.english_primary = false;
        assert_eq!(screen(&record, Topic::Law), Some(Exclusion::Language));
    }

    #[test]
    fn screen_rejects_missing_consent() {
        let mut record = participant("p1", Topic::Law);
        record.demographics.consent = false;
        assert_eq!(screen(&record, Topic::Law), Some(Exclusion::Consent));
    }

    #[test]
    fn screen_rejects_minors() {
        let mut record = participant("p1", Topic::Law);
        record.demographics.age_bucket = AgeBucket::Under18;
        assert_eq!(screen(&record, Topic::Law), Some(Exclusion::Age));
    }

    #[test]
    fn screen_rejects_topic_expertise() {
        let mut record = participant("p1", Topic::PubMed);
        record.demographics.expertise.insert("Healthcare/Medicine".into());
        assert_eq!(
            screen(&record, Topic::PubMed),
            Some(Exclusion::Expertise { domain: "healthcare/medicine".into() })
        );
        // the same background is fine in an unrelated topic block
        assert_eq!(screen(&record, Topic::Law), None);
    }

    #[test]
    fn screen_names_first_failing_rule() {
        let mut record = participant("p1", Topic::Law);
        record.demographics.native_english = false;
        record.demographics.english_primary = false;
        record.demographics.age_bucket = AgeBucket::Under18;
        record.demographics.consent = false;
        record.demographics.expertise.insert("law".into());
        assert_eq!(screen(&record, Topic::Law), Some(Exclusion::Language));
        record.demographics.english_primary = true;
        assert_eq!(screen(&record, Topic::Law), Some(Exclusion::Age));
        record.demographics.age_bucket = AgeBucket::From45To54;
        assert_eq!(screen(&record, Topic::Law), Some(Exclusion::Consent));
        record.demographics.consent = true;
        assert_eq!(
            screen(&record, Topic::Law),
            Some(Exclusion::Expertise { domain: "law".into() })
        );
    }

    #[test]
    fn domain_normalization() {
        assert_eq!(normalize_domain(" Literature / Philosophy "), "literature/philosophy");
        assert_eq!(normalize_domain("LAW"), "law");
        assert_eq!(normalize_domain("life sciences"), "life sciences");
    }

    #[test]
    fn assign_arms_divisible_block_is_exactly_balanced() {
        let records: Vec<ParticipantRecord> =
            (0..12).map(|i| participant(&format!("p{i:02}"), Topic::Bio)).collect();
        let assignments = assign_arms(&records, 7);
        assert_eq!(assignments.len(), 12);
        for arm in StudyArm::ALL {
            assert_eq!(assignments.values().filter(|a| **a == arm).count(), 2);
        }
    }

    #[test]
    fn assign_arms_remainder_block_near_balanced() {
        let records: Vec<ParticipantRecord> =
            (0..7).map(|i| participant(&format!("p{i}"), Topic::Finance)).collect();
        let assignments = assign_arms(&records, 7);
        let counts: Vec<usize> = StudyArm::ALL
            .iter()
            .map(|arm| assignments.values().filter(|a| *a == arm).count())
            .collect();
        let max = counts.iter().max().unwrap();
        let min = counts.iter().min().unwrap();
        assert_eq!(counts.iter().sum::<usize>(), 7);
        assert_eq!(max - min, 1);
    }

    #[test]
    fn assign_arms_deterministic_and_seed_sensitive() {
        let records: Vec<ParticipantRecord> =
            (0..30).map(|i| participant(&format!("p{i:02}"), Topic::Law)).collect();
        let a = assign_arms(&records, 42);
        let b = assign_arms(&records, 42);
        assert_eq!(a, b);
        let c = assign_arms(&records, 43);
        assert_ne!(a, c, "different seeds should shuffle differently");
    }

    #[test]
    fn assign_arms_blocks_are_independent() {
        let mut records: Vec<ParticipantRecord> =
            (0..13).map(|i| participant(&format!("law{i:02}"), Topic::Law)).collect();
        let before = assign_arms(&records, 9);
        records.push(participant("bio00", Topic::Bio));
        let after = assign_arms(&records, 9);
        for record in records.iter().filter(|r| r.topic == Topic::Law) {
            assert_eq!(
                before.get(&record.participant_id),
                after.get(&record.participant_id),
                "adding a Bio participant must not move Law assignments"
            );
        }
    }

    #[test]
    fn assign_arms_input_order_irrelevant() {
        let mut records: Vec<ParticipantRecord> =
            (0..11).map(|i| participant(&format!("p{i:02}"), Topic::PubMed)).collect();
        let a = assign_arms(&records, 3);
        records.reverse();
        let b = assign_arms(&records, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn likert_examples() {
        assert_eq!(map_likert("Very confident", LikertScale::Confidence).unwrap(), 2);
        assert_eq!(
            map_likert("Neither easy nor difficult", LikertScale::Ease).unwrap(),
            0
        );
        assert_eq!(map_likert("Somewhat difficult", LikertScale::Ease).unwrap(), -1);
        assert_eq!(map_likert("Very unconfident", LikertScale::Confidence).unwrap(), -2);
        assert_eq!(map_likert("  very easy  ", LikertScale::Ease).unwrap(), 2);
        assert!(map_likert("Kind of easy", LikertScale::Ease).is_err());
        assert!(map_likert("Very easy", LikertScale::Confidence).is_err());
    }

    #[test]
    fn likert_is_bijective_and_antisymmetric() {
        for scale in [LikertScale::Confidence, LikertScale::Ease] {
            let labels = likert_labels(scale);
            let values: Vec<i8> =
                labels.iter().map(|l| map_likert(l, scale).unwrap()).collect();
            assert_eq!(values, [2, 1, 0, -1, -2]);
            // antonym labels sit mirrored in the list and negate
            for i in 0..5 {
                assert_eq!(values[i], -values[4 - i]);
            }
        }
    }

    fn mcq_row(id: &str, arm: StudyArm, qid: &str, correct: bool, attention: bool) -> McqRow {
        McqRow {
            topic: Topic::PubMed,
            arm,
            attention_pass: attention,
            response: McqResponse {
                participant_id: id.into(),
                question_id: qid.into(),
                selected_index: if correct { 0 } else { 1 },
                correct,
                confidence_likert: if correct { 2 } else { -1 },
            },
        }
    }

    #[test]
    fn score_responses_ratio() {
        let mut set = ResponseSet::default();
        for q in 0..10 {
            set.mcq.push(mcq_row("p1", StudyArm::OriginalOpen, &format!("q{q}"), q < 6, true));
        }
        let table = score_responses(&set);
        assert_eq!(table.rows.len(), 1);
        assert!((table.rows[0].accuracy - 0.6).abs() < 1e-12);
        assert_eq!(table.rows[0].answered, 10);
        assert_eq!(table.total_responses, 10);
        assert!(table.dropped_participants.is_empty());
    }

    #[test]
    fn score_responses_drops_attention_failures() {
        let mut set = ResponseSet::default();
        set.mcq.push(mcq_row("good", StudyArm::OriginalOpen, "q0", true, true));
        set.mcq.push(mcq_row("bad", StudyArm::OriginalOpen, "q0", true, true));
        // one failed check poisons every row of that participant
        set.mcq.push(mcq_row("bad", StudyArm::OriginalOpen, "q1", true, false));
        let table = score_responses(&set);
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].participant_id, "good");
        assert_eq!(table.dropped_participants.len(), 1);
        assert_eq!(table.dropped_responses, 2);
        assert_eq!(table.total_responses, 3);
        // retained answered counts plus dropped rows cover everything
        let answered: usize = table.rows.iter().map(|r| r.answered).sum();
        assert_eq!(answered + table.dropped_responses, table.total_responses);
    }

    #[test]
    fn full_topic_block_totals() {
        // one topic block sized like the largest study block: 783
        // participants, 10 questions each
        let mut set = ResponseSet::default();
        for p in 0..783 {
            let arm = StudyArm::ALL[p % 6];
            for q in 0..10 {
                set.mcq.push(McqRow {
                    topic: Topic::PubMed,
                    arm,
                    attention_pass: true,
                    response: McqResponse {
                        participant_id: format!("p{p:04}"),
                        question_id: format!("q{q}"),
                        selected_index: 0,
                        correct: (p + q) % 2 == 0,
                        confidence_likert: 1,
                    },
                });
            }
        }
        let table = score_responses(&set);
        assert_eq!(table.total_responses, 7_830);
        assert_eq!(table.rows.len(), 783);
        let answered: usize = table.rows.iter().map(|r| r.answered).sum();
        assert_eq!(answered, 7_830);
    }

    #[test]
    fn parse_mixed_jsonl() {
        let key: BTreeMap<String, usize> = [("q1".to_string(), 2usize)].into();
        let input = concat!(
            r#"{"participant_id": "p1", "topic": "PubMed", "arm": 2, "question_id": "q1", "selected_index": 2, "confidence_label": "Very confident", "attention_pass": true}"#,
            "\n",
            r#"{"participant_id": "p1", "topic": "PubMed", "arm": 2, "text_id": "t1", "ease_label": "Somewhat easy", "attention_pass": true}"#,
            "\n",
        );
        let set = ResponseSet::parse(input, &key).unwrap();
        assert_eq!(set.mcq.len(), 1);
        assert_eq!(set.ease.len(), 1);
        assert!(set.mcq[0].response.correct);
        assert_eq!(set.mcq[0].response.confidence_likert, 2);
        assert_eq!(set.mcq[0].arm, StudyArm::SimplifiedOpen);
        assert_eq!(set.ease[0].response.ease_likert, 1);
    }

    #[test]
    fn parse_derives_incorrect_flag() {
        let key: BTreeMap<String, usize> = [("q1".to_string(), 2usize)].into();
        let input = r#"{"participant_id": "p1", "topic": "Law", "arm": 1, "question_id": "q1", "selected_index": 3, "confidence_label": "Somewhat unconfident", "attention_pass": true}"#;
        let set = ResponseSet::parse(input, &key).unwrap();
        assert!(!set.mcq[0].response.correct);
        assert_eq!(set.mcq[0].response.confidence_likert, -1);
    }

    #[test]
    fn parse_rejects_unknown_question() {
        let key = BTreeMap::new();
        let input = r#"{"participant_id": "p1", "topic": "Law", "arm": 1, "question_id": "mystery", "selected_index": 0, "confidence_label": "Very confident", "attention_pass": true}"#;
        match ResponseSet::parse(input, &key) {
            Err(StudyError::UnknownQuestion { line: 1, question_id }) => {
                assert_eq!(question_id, "mystery");
            }
            other => panic!("expected UnknownQuestion, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_malformed_lines() {
        let key: BTreeMap<String, usize> = [("q1".to_string(), 0usize)].into();
        // neither kind
        let neither = r#"{"participant_id": "p1", "topic": "Law", "arm": 1, "attention_pass": true}"#;
        assert!(matches!(
            ResponseSet::parse(neither, &key),
            Err(StudyError::Malformed { line: 1, .. })
        ));
        // both kinds at once
        let both = r#"{"participant_id": "p1", "topic": "Law", "arm": 1, "question_id": "q1", "selected_index": 0, "confidence_label": "Very confident", "text_id": "t1", "ease_label": "Very easy", "attention_pass": true}"#;
        assert!(matches!(
            ResponseSet::parse(both, &key),
            Err(StudyError::Malformed { line: 1, .. })
        ));
        // out-of-range option
        let bad_index = r#"{"participant_id": "p1", "topic": "Law", "arm": 1, "question_id": "q1", "selected_index": 5, "confidence_label": "Very confident", "attention_pass": true}"#;
        assert!(matches!(
            ResponseSet::parse(bad_index, &key),
            Err(StudyError::Malformed { line: 1, .. })
        ));
        // arm out of range
        let bad_arm = r#"{"participant_id": "p1", "topic": "Law", "arm": 7, "question_id": "q1", "selected_index": 0, "confidence_label": "Very confident", "attention_pass": true}"#;
        assert!(matches!(
            ResponseSet::parse(bad_arm, &key),
            Err(StudyError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn parse_rejects_arm_conflicts() {
        let key: BTreeMap<String, usize> = [("q1".to_string(), 0usize)].into();
        let input = concat!(
            r#"{"participant_id": "p1", "topic": "Law", "arm": 1, "question_id": "q1", "selected_index": 0, "confidence_label": "Very confident", "attention_pass": true}"#,
            "\n",
            r#"{"participant_id": "p1", "topic": "Law", "arm": 2, "question_id": "q1", "selected_index": 0, "confidence_label": "Very confident", "attention_pass": true}"#,
        );
        assert!(matches!(
            ResponseSet::parse(input, &key),
            Err(StudyError::ArmConflict { line: 2, .. })
        ));
    }

    #[test]
    fn likert_units_differ_when_participants_answer_unevenly() {
        let mut set = ResponseSet::default();
        // p1 answers once (+2); p2 answers three times (-2 each)
        set.mcq.push(mcq_row_conf("p1", 2));
        set.mcq.push(mcq_row_conf("p2", -2));
        set.mcq.push(mcq_row_conf("p2", -2));
        set.mcq.push(mcq_row_conf("p2", -2));
        let per_participant = confidence_values(&set, LikertUnit::PerParticipantMean);
        assert_eq!(per_participant.len(), 2);
        let mean_of_means: f64 =
            per_participant.iter().map(|v| v.value).sum::<f64>() / 2.0;
        assert!((mean_of_means - 0.0).abs() < 1e-12);
        let pooled = confidence_values(&set, LikertUnit::PerResponse);
        assert_eq!(pooled.len(), 4);
        let pooled_mean: f64 = pooled.iter().map(|v| v.value).sum::<f64>() / 4.0;
        assert!((pooled_mean - (-1.0)).abs() < 1e-12);
    }

    fn mcq_row_conf(id: &str, confidence: i8) -> McqRow {
        McqRow {
            topic: Topic::PubMed,
            arm: StudyArm::SimplifiedOpen,
            attention_pass: true,
            response: McqResponse {
                participant_id: id.into(),
                question_id: "q0".into(),
                selected_index: 0,
                correct: true,
                confidence_likert: confidence,
            },
        }
    }

    #[test]
    fn quotas_all_green_on_exact_match() {
        // 100 disclosed adults split 16/17/16/16/35, genders split 50/50
        let mut records = Vec::new();
        let buckets = [
            (AgeBucket::From18To24, 16),
            (AgeBucket::From25To34, 17),
            (AgeBucket::From35To44, 16),
            (AgeBucket::From45To54, 16),
            (AgeBucket::From55To64, 35),
        ];
        let mut i = 0;
        for (bucket, n) in buckets {
            for _ in 0..n {
                let mut r = participant(&format!("p{i:03}"), Topic::Bio);
                r.demographics.age_bucket = bucket;
                r.demographics.gender = if i % 2 == 0 { Gender::Man } else { Gender::Woman };
                records.push(r);
                i += 1;
            }
        }
        let report = check_quotas(&records, 0.02);
        assert!(report.all_green, "{report:?}");
    }

    #[test]
    fn quotas_flag_extreme_age_skew() {
        let mut records = Vec::new();
        for i in 0..50 {
            let mut r = participant(&format!("p{i:03}"), Topic::Bio);
            r.demographics.age_bucket = AgeBucket::From18To24;
            records.push(r);
        }
        let report = check_quotas(&records, 0.02);
        assert!(!report.all_green);
        assert!(report.age[0].flagged, "18-24 share 100% vs target 16%");
        assert!(report.age[4].flagged, "55+ share 0% vs target 35%");
    }

    #[test]
    fn quotas_reproduce_cohort_gender_shares() {
        // cohort shaped like the collected study demographics
        let mut records = Vec::new();
        let mut push = |gender: Gender, n: usize| {
            for _ in 0..n {
                let mut r = participant(&format!("p{:05}", records.len()), Topic::Bio);
                r.demographics.gender = gender;
                records.push(r);
            }
        };
        push(Gender::Man, 2_313);
        push(Gender::Woman, 2_462);
        push(Gender::NonbinaryOrUndisclosed, 38);
        let report = check_quotas(&records, 0.05);
        let shares: Vec<i64> =
            report.gender.iter().map(|r| (r.share * 100.0).round() as i64).collect();
        assert_eq!(shares, [48, 51, 1]);
        assert!(!report.gender[2].flagged, "no target on the nonbinary row");
    }

    #[test]
    fn study_arm_serde_roundtrip() {
        for arm in StudyArm::ALL {
            let json = serde_json::to_string(&arm).unwrap();
            assert_eq!(json, arm.number().to_string());
            let back: StudyArm = serde_json::from_str(&json).unwrap();
            assert_eq!(back, arm);
        }
        assert!(serde_json::from_str::<StudyArm>("0").is_err());
        assert!(serde_json::from_str::<StudyArm>("7").is_err());
    }

    #[test]
    fn arm_properties() {
        assert!(StudyArm::OriginalOpen.is_control());
        assert!(StudyArm::OriginalClosed.is_control());
        assert_eq!(StudyArm::ALL.iter().filter(|a| a.is_control()).count(), 2);
        assert_eq!(StudyArm::BothOpen.condition(), Condition::Open);
        assert_eq!(StudyArm::SimplifiedClosed.condition(), Condition::Closed);
        assert_eq!(StudyArm::SimplifiedClosed.material(), Material::Simplified);
        assert_eq!(StudyArm::BothClosed.material(), Material::Both);
    }

    #[test]
    fn analyze_study_shapes_and_missing_arms() {
        // open-book data only: closed-book contrasts must be present but
        // empty
        let mut set = ResponseSet::default();
        for p in 0..8 {
            let arm =
                if p % 2 == 0 { StudyArm::OriginalOpen } else { StudyArm::SimplifiedOpen };
            for q in 0..4 {
                set.mcq.push(McqRow {
                    topic: Topic::PubMed,
                    arm,
                    attention_pass: true,
                    response: McqResponse {
                        participant_id: format!("p{p}"),
                        question_id: format!("q{q}"),
                        selected_index: 0,
                        correct: (p + q) % 3 != 0,
                        confidence_likert: if p % 2 == 0 { 0 } else { 1 },
                    },
                });
            }
        }
        let analysis = analyze_study(&set, &AnalysisConfig::default());
        // 2 conditions x (overall + 6 topics)
        assert_eq!(analysis.accuracy.len(), 14);
        assert_eq!(analysis.confidence.len(), 14);
        assert_eq!(analysis.ease.len(), 14);
        assert_eq!(analysis.supplementary.len(), 42);
        let open_overall = &analysis.accuracy[0];
        assert_eq!(open_overall.condition, Condition::Open);
        assert_eq!(open_overall.scope, "overall");
        assert!(open_overall.estimate.is_some());
        let closed_overall =
            analysis.accuracy.iter().find(|e| e.condition == Condition::Closed).unwrap();
        assert!(closed_overall.estimate.is_none(), "no closed-book data");
        // scatter has both conditions; only open has rows
        assert_eq!(analysis.scatter.len(), 2);
        assert_eq!(analysis.scatter[0].0, Condition::Open);
        assert!(!analysis.scatter[0].1.rows.is_empty());
        assert!(analysis.scatter[1].1.rows.is_empty());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // per-block counts stay within 1 of each other and every
            // participant gets exactly one arm
            #[test]
            fn rcbd_balance(sizes in proptest::collection::vec(1usize..40, 1..6), seed in 0u64..500) {
                let mut records = Vec::new();
                for (t, n) in sizes.iter().enumerate() {
                    for i in 0..*n {
                        records.push(participant(&format!("t{t}p{i:03}"), Topic::ALL[t]));
                    }
                }
                let assignments = assign_arms(&records, seed);
                prop_assert_eq!(assignments.len(), records.len());
                for (t, n) in sizes.iter().enumerate() {
                    let topic = Topic::ALL[t];
                    let counts: Vec<usize> = StudyArm::ALL.iter().map(|arm| {
                        records.iter()
                            .filter(|r| r.topic == topic)
                            .filter(|r| assignments.get(&r.participant_id) == Some(arm))
                            .count()
                    }).collect();
                    prop_assert_eq!(counts.iter().sum::<usize>(), *n);
                    let max = counts.iter().max().unwrap();
                    let min = counts.iter().min().unwrap();
                    prop_assert!(max - min <= 1, "counts {:?}", counts);
                }
            }
        }
    }
}
