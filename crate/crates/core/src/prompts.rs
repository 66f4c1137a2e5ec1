//! Versioned prompt assets for the model roles.
//!
//! Every prompt sent to a judge, the simplifier seed, and the improver is a
//! named, versioned asset compiled into the binary. Assets are templates
//! with `<<<NAME>>>` placeholders filled at call time; the sentinel syntax
//! never collides with corpus text. Each asset's content hash goes into run
//! provenance so a transcript can always be traced to the exact prompt text
//! that produced it.
//!
//! The leading `## TASK:` marker line gives mock scripts a stable pattern to
//! match each pipeline stage on.

use sha2::{Digest, Sha256};

/// A named, versioned prompt template.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptAsset {
    pub name: &'static str,
    pub version: &'static str,
    pub text: &'static str,
}

impl PromptAsset {
    /// SHA-256 hex of the template text; recorded in provenance.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }

    /// Replaces each `<<<KEY>>>` placeholder with its value. Keys are given
    /// without the sentinel brackets.
    pub fn fill(&self, substitutions: &[(&str, &str)]) -> String {
        fill_template(self.text, substitutions)
    }
}

/// Rubric for the readability judge; placeholder `TEXT`.
pub const READABILITY_RUBRIC: PromptAsset = PromptAsset {
    name: "readability_rubric",
    version: "v1",
    text: include_str!("../assets/readability_rubric.txt"),
};

/// Atomic-claim decomposition; placeholder `ORIGINAL`.
pub const CLAIM_DECOMPOSE: PromptAsset = PromptAsset {
    name: "claim_decompose",
    version: "v1",
    text: include_str!("../assets/claim_decompose.txt"),
};

/// Claim-to-excerpt mapping; placeholders `CLAIMS`, `REWRITE`.
pub const CLAIM_MAP: PromptAsset = PromptAsset {
    name: "claim_map",
    version: "v1",
    text: include_str!("../assets/claim_map.txt"),
};

/// Fidelity error classification; placeholders `ORIGINAL`, `REWRITE`,
/// `ALIGNMENT`.
pub const ERROR_CLASSIFY: PromptAsset = PromptAsset {
    name: "error_classify",
    version: "v1",
    text: include_str!("../assets/error_classify.txt"),
};

/// Prompt-improver instructions; placeholders `CURRENT_PROMPT`, `HISTORY`,
/// `FEEDBACK`.
pub const PROMPT_IMPROVE: PromptAsset = PromptAsset {
    name: "prompt_improve",
    version: "v1",
    text: include_str!("../assets/prompt_improve.txt"),
};

/// Seed instructions for the simplifier role.
pub const SEED_PROMPT: PromptAsset = PromptAsset {
    name: "seed_prompt",
    version: "v1",
    text: include_str!("../assets/seed_prompt.txt"),
};

/// Appended to a judge prompt for the single repair round; placeholder
/// `PROBLEM`.
pub const REPAIR_SUFFIX: PromptAsset = PromptAsset {
    name: "repair_suffix",
    version: "v1",
    text: include_str!("../assets/repair_suffix.txt"),
};

/// All shipped assets, for provenance listings.
pub const ALL_ASSETS: [&PromptAsset; 7] = [
    &READABILITY_RUBRIC,
    &CLAIM_DECOMPOSE,
    &CLAIM_MAP,
    &ERROR_CLASSIFY,
    &PROMPT_IMPROVE,
    &SEED_PROMPT,
    &REPAIR_SUFFIX,
];

/// Replaces each `<<<KEY>>>` with its value, in one pass per key.
pub fn fill_template(template: &str, substitutions: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in substitutions {
        out = out.replace(&format!("<<<{key}>>>"), value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assets_contain_their_placeholders() {
        assert!(READABILITY_RUBRIC.text.contains("<<<TEXT>>>"));
        assert!(CLAIM_DECOMPOSE.text.contains("<<<ORIGINAL>>>"));
        assert!(CLAIM_MAP.text.contains("<<<CLAIMS>>>"));
        assert!(CLAIM_MAP.text.contains("<<<REWRITE>>>"));
        assert!(ERROR_CLASSIFY.text.contains("<<<ORIGINAL>>>"));
        assert!(ERROR_CLASSIFY.text.contains("<<<REWRITE>>>"));
        assert!(ERROR_CLASSIFY.text.contains("<<<ALIGNMENT>>>"));
        assert!(PROMPT_IMPROVE.text.contains("<<<CURRENT_PROMPT>>>"));
        assert!(PROMPT_IMPROVE.text.contains("<<<HISTORY>>>"));
        assert!(PROMPT_IMPROVE.text.contains("<<<FEEDBACK>>>"));
        assert!(REPAIR_SUFFIX.text.contains("<<<PROBLEM>>>"));
    }

    #[test]
    fn judge_assets_carry_distinct_task_markers() {
        let markers: Vec<&str> = [READABILITY_RUBRIC, CLAIM_DECOMPOSE, CLAIM_MAP, ERROR_CLASSIFY, PROMPT_IMPROVE]
            .iter()
            .map(|a| a.text.lines().next().unwrap())
            .collect();
        for marker in &markers {
            assert!(marker.starts_with("## TASK: "), "bad marker line {marker:?}");
        }
        let unique: std::collections::HashSet<&&str> = markers.iter().collect();
        assert_eq!(unique.len(), markers.len());
    }

    #[test]
    fn fill_replaces_all_occurrences() {
        let out = fill_template("a <<<X>>> b <<<X>>> c <<<Y>>>", &[("X", "1"), ("Y", "2")]);
        assert_eq!(out, "a 1 b 1 c 2");
    }

    #[test]
    fn fill_leaves_unknown_sentinels_alone() {
        let out = fill_template("keep <<<OTHER>>>", &[("X", "1")]);
        assert_eq!(out, "keep <<<OTHER>>>");
    }

    #[test]
    fn hashes_are_stable_and_distinct() {
        let h1 = READABILITY_RUBRIC.sha256();
        let h2 = READABILITY_RUBRIC.sha256();
        assert_eq!(h1, h2);
        assert_eq!(h1.len(), 64);
        let all: std::collections::HashSet<String> =
            ALL_ASSETS.iter().map(|a| a.sha256()).collect();
        assert_eq!(all.len(), ALL_ASSETS.len());
    }

    #[test]
    fn filled_rubric_embeds_the_text() {
        let out = READABILITY_RUBRIC.fill(&[("TEXT", "Water is wet.")]);
        assert!(out.contains("Water is wet."));
        assert!(!out.contains("<<<TEXT>>>"));
    }
}
