//! Prompt candidates and rewrite generation for the simplifier role.
//!
//! A candidate is instructions plus ordered few-shot pairs. Rendering uses
//! fenced sentinel lines (`<<<EXAMPLE_INPUT>>>` and friends) as delimiters so
//! corpus text can never masquerade as template structure. The same sentinel
//! format doubles as the on-disk candidate file format, which makes a
//! refinement run's final_prompt.txt directly loadable for batch rewriting.

use serde::{Deserialize, Serialize};

use crate::gateway::{FinishReason, Gateway, GatewayError, ModelRole};

/// Identifies the fixed rendering layout in run provenance.
pub const TEMPLATE_VERSION: &str = "simplify-template-v1";

const SHOT_INPUT: &str = "<<<EXAMPLE_INPUT>>>";
const SHOT_OUTPUT: &str = "<<<EXAMPLE_OUTPUT>>>";
const SHOT_END: &str = "<<<END_EXAMPLE>>>";
const FINAL_INPUT: &str = "<<<INPUT>>>";
const FINAL_OUTPUT: &str = "<<<OUTPUT>>>";

/// How a candidate came to exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptOrigin {
    Seed,
    Improved { iteration: u32 },
    Manual,
}

/// One worked example shown to the simplifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShot {
    pub input: String,
    pub output: String,
}

/// Instructions plus few-shot examples; the unit the refinement loop scores.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptCandidate {
    pub prompt_id: String,
    pub instructions: String,
    pub few_shots: Vec<FewShot>,
    pub origin: PromptOrigin,
}

/// One generated rewrite with full provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rewrite {
    pub original_id: String,
    pub text: String,
    pub prompt_id: String,
    /// Resolves in the transcript cache to the exact request/response pair.
    pub transcript_key: String,
}

#[derive(Debug, thiserror::Error)]
pub enum SimplifierError {
    #[error("input text is empty")]
    EmptyInput,
    #[error("invalid prompt candidate: {0}")]
    InvalidCandidate(String),
    #[error("simplifier backend request failed: {0}")]
    Gateway(#[from] GatewayError),
    #[error("simplifier returned an unusable completion ({finish:?})")]
    BadFinish { finish: FinishReason },
    #[error("simplifier returned an empty rewrite")]
    EmptyRewrite,
    #[error("candidate file line {line}: {message}")]
    CandidateFile { line: usize, message: String },
}

impl PromptCandidate {
    pub fn new(
        prompt_id: impl Into<String>,
        instructions: impl Into<String>,
        few_shots: Vec<FewShot>,
        origin: PromptOrigin,
    ) -> Result<Self, SimplifierError> {
        let candidate = PromptCandidate {
            prompt_id: prompt_id.into(),
            instructions: instructions.into(),
            few_shots,
            origin,
        };
        candidate.validate()?;
        Ok(candidate)
    }

    /// The shipped seed instructions as a candidate.
    pub fn seed() -> Self {
        PromptCandidate {
            prompt_id: "seed".into(),
            instructions: crate::prompts::SEED_PROMPT.text.trim().to_string(),
            few_shots: Vec::new(),
            origin: PromptOrigin::Seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimplifierError> {
        if self.prompt_id.trim().is_empty() {
            return Err(SimplifierError::InvalidCandidate("empty prompt_id".into()));
        }
        if self.instructions.trim().is_empty() {
            return Err(SimplifierError::InvalidCandidate("empty instructions".into()));
        }
        for (i, shot) in self.few_shots.iter().enumerate() {
            if shot.input.trim().is_empty() || shot.output.trim().is_empty() {
                return Err(SimplifierError::InvalidCandidate(format!(
                    "few-shot {i} has an empty side"
                )));
            }
        }
        Ok(())
    }

    /// Serializes to the sentinel-fenced candidate file format.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        out.push_str(self.instructions.trim());
        out.push('\n');
        for shot in &self.few_shots {
            out.push('\n');
            out.push_str(SHOT_INPUT);
            out.push('\n');
            out.push_str(shot.input.trim());
            out.push('\n');
            out.push_str(SHOT_OUTPUT);
            out.push('\n');
            out.push_str(shot.output.trim());
            out.push('\n');
            out.push_str(SHOT_END);
            out.push('\n');
        }
        out
    }

    /// Parses the candidate file format written by [`Self::to_file_string`].
    pub fn from_file_string(
        prompt_id: impl Into<String>,
        origin: PromptOrigin,
        content: &str,
    ) -> Result<Self, SimplifierError> {
        enum State {
            Instructions,
            Input,
            Output,
        }
        let mut state = State::Instructions;
        let mut instructions: Vec<&str> = Vec::new();
        let mut shots = Vec::new();
        let mut current: Vec<&str> = Vec::new();
        let mut pending_input: Option<String> = None;

        for (idx, line) in content.lines().enumerate() {
            let lineno = idx + 1;
            match line.trim_end() {
                SHOT_INPUT => match state {
                    State::Instructions => {
                        state = State::Input;
                        current.clear();
                    }
                    _ => {
                        return Err(SimplifierError::CandidateFile {
                            line: lineno,
                            message: format!("unexpected {SHOT_INPUT} inside an example"),
                        })
                    }
                },
                SHOT_OUTPUT => match state {
                    State::Input => {
                        pending_input = Some(current.join("\n"));
                        current.clear();
                        state = State::Output;
                    }
                    _ => {
                        return Err(SimplifierError::CandidateFile {
                            line: lineno,
                            message: format!("{SHOT_OUTPUT} without an open example input"),
                        })
                    }
                },
                SHOT_END => match state {
                    State::Output => {
                        shots.push(FewShot {
                            input: pending_input.take().expect("input recorded"),
                            output: current.join("\n"),
                        });
                        current.clear();
                        state = State::Instructions;
                    }
                    _ => {
                        return Err(SimplifierError::CandidateFile {
                            line: lineno,
                            message: format!("{SHOT_END} without an open example output"),
                        })
                    }
                },
                _ => match state {
                    State::Instructions => instructions.push(line),
                    _ => current.push(line),
                },
            }
        }
        if !matches!(state, State::Instructions) {
            return Err(SimplifierError::CandidateFile {
                line: content.lines().count(),
                message: "unterminated example block".into(),
            });
        }
        PromptCandidate::new(prompt_id, instructions.join("\n").trim().to_string(), shots, origin)
    }
}

/// Deterministic prompt layout: instructions, then the examples in order,
/// then the input text behind the final sentinels.
pub fn render_prompt(candidate: &PromptCandidate, input_text: &str) -> String {
    let mut out = String::new();
    out.push_str(candidate.instructions.trim_end());
    out.push('\n');
    for shot in &candidate.few_shots {
        out.push('\n');
        out.push_str(SHOT_INPUT);
        out.push('\n');
        out.push_str(&shot.input);
        out.push('\n');
        out.push_str(SHOT_OUTPUT);
        out.push('\n');
        out.push_str(&shot.output);
        out.push('\n');
        out.push_str(SHOT_END);
        out.push('\n');
    }
    out.push('\n');
    out.push_str(FINAL_INPUT);
    out.push('\n');
    out.push_str(input_text);
    out.push('\n');
    out.push_str(FINAL_OUTPUT);
    out.push('\n');
    out
}

/// Rewrites `text` under `candidate`. Only surrounding whitespace is
/// stripped from the completion; the autoevals judge the raw output.
pub fn simplify(
    gateway: &Gateway,
    role: &ModelRole,
    candidate: &PromptCandidate,
    original_id: &str,
    text: &str,
) -> Result<Rewrite, SimplifierError> {
    if text.trim().is_empty() {
        return Err(SimplifierError::EmptyInput);
    }
    candidate.validate()?;
    let prompt = render_prompt(candidate, text);
    let completion = gateway.complete(role, &prompt)?;
    if completion.finish_reason != FinishReason::Complete {
        return Err(SimplifierError::BadFinish { finish: completion.finish_reason });
    }
    let rewritten = completion.text.trim();
    if rewritten.is_empty() {
        return Err(SimplifierError::EmptyRewrite);
    }
    Ok(Rewrite {
        original_id: original_id.to_string(),
        text: rewritten.to_string(),
        prompt_id: candidate.prompt_id.clone(),
        transcript_key: completion.transcript_key,
    })
}
