//! `simploop eval readability|fidelity`: single-shot judge runs.

use simploop_core::fidelity::evaluate_fidelity;
use simploop_core::gateway::{ModelRole, RoleKind};
use simploop_core::prompts::READABILITY_RUBRIC;
use simploop_core::readability::rate_readability;

use crate::backends::BACKEND_ID;
use crate::commands::{build_runtime, read_to_string};
use crate::errors::CliError;
use crate::{EvalAction, GlobalOpts};

pub fn run(global: &GlobalOpts, action: EvalAction) -> Result<(), CliError> {
    let runtime = build_runtime(global)?;
    match action {
        EvalAction::Readability { text_file } => {
            let text = read_to_string(&text_file)?;
            let role = ModelRole::new(RoleKind::ReadabilityJudge, BACKEND_ID);
            let rating = rate_readability(&runtime.gateway, &role, &READABILITY_RUBRIC, &text)?;
            println!("{}", serde_json::to_string_pretty(&rating).expect("rating serializes"));
        }
        EvalAction::Fidelity { original, rewrite } => {
            let original_text = read_to_string(&original)?;
            let rewrite_text = read_to_string(&rewrite)?;
            let role = ModelRole::new(RoleKind::FidelityJudge, BACKEND_ID);
            let report =
                evaluate_fidelity(&runtime.gateway, &role, &original_text, &rewrite_text)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
    }
    Ok(())
}
