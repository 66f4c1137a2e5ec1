//! Core library for a self-refining text simplification pipeline.
//!
//! The pipeline rewrites difficult prose for a general audience, judges each
//! rewrite for readability and fidelity with model-based evaluators, scores
//! candidate prompts on a corpus, and iteratively proposes better prompts
//! until scores plateau. A companion study module analyzes randomized
//! comprehension experiments over the same corpus.
//!
//! Modules:
//! - [`corpus`]: excerpt/question data model, JSONL persistence, stats
//! - [`gateway`]: backend abstraction, record/replay cache, scripted mock
//! - [`prompts`]: versioned prompt assets for every model role
//! - [`readability`]: 1-10 readability rating via option likelihoods
//! - [`fidelity`]: claim-level error taxonomy, weights, and scoring
//! - [`simplifier`]: prompt candidates and rewrite generation
//! - [`refine`]: prompt scoring, leaderboard, refinement loop
//! - [`study`]: randomized-study assignment, screening, and analysis

pub mod corpus;
pub mod fidelity;
pub mod gateway;
pub mod prompts;
pub mod readability;
pub mod refine;
pub mod simplifier;
pub mod study;

pub use corpus::{Corpus, CorpusError, CorpusStats, Mcq, Strictness, TextExcerpt, Topic};
pub use fidelity::{
    AtomicClaim, ClaimAlignment, ErrorCategory, ErrorFinding, ErrorKind, FidelityError,
    FidelityReport,
};
pub use gateway::{
    Backend, BackendError, CachedResponse, Completion, DecodeParams, FinishReason, Gateway,
    GatewayError, Matcher, MockBackend, MockRule, ModelRole, OptionDistribution, ReplyOutcome,
    RetryPolicy, RoleKind, ScriptError, ScriptResponse, TranscriptCache,
};
pub use prompts::PromptAsset;
pub use readability::{ReadabilityError, ReadabilityRating};
pub use refine::{
    EvalContext, IterationRecord, Leaderboard, LeaderboardEntry, PerTextEval, PromptScore,
    RefineConfig, RefineError, RefineOutcome, StopReason,
};
pub use simplifier::{FewShot, PromptCandidate, PromptOrigin, Rewrite, SimplifierError};
pub use study::stats::{EffectEstimate, OlsFit, PerQuestionTable, StatsError, TestMethod};
pub use study::{
    AccuracyTable, AnalysisConfig, Condition, Demographics, Exclusion, McqResponse,
    ParticipantRecord, ResponseSet, StudyAnalysis, StudyArm, StudyError, TaskLoadResponse,
};
