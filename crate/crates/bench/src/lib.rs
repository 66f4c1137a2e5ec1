//! Deterministic input builders for the pipeline benchmarks.
//!
//! Sizes default to one full-study topic block so the numbers reflect
//! production shapes, not toy ones.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simploop_core::study::{AgeBucket, Gender};
use simploop_core::{
    Demographics, ErrorFinding, ErrorKind, FewShot, ParticipantRecord, PromptCandidate, Topic,
};

/// Per-participant metric samples on the Likert score scale [-2, 2].
pub fn likert_samples(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| f64::from(rng.gen_range(-2i8..=2))).collect()
}

/// Per-participant accuracy means over a ten-question block.
pub fn accuracy_samples(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| f64::from(rng.gen_range(0u8..=10)) / 10.0).collect()
}

/// One screened topic block at full study size.
pub fn participants(n: usize) -> Vec<ParticipantRecord> {
    (0..n)
        .map(|i| ParticipantRecord {
            participant_id: format!("p{i:04}"),
            topic: Topic::PubMed,
            demographics: Demographics {
                age_bucket: AgeBucket::From25To34,
                gender: if i % 2 == 0 { Gender::Woman } else { Gender::Man },
                native_english: true,
                english_primary: true,
                english_confidence: "Very confident".to_string(),
                education: "Bachelor's degree".to_string(),
                expertise: BTreeSet::new(),
                consent: true,
            },
            arm: None,
            attention_pass: true,
        })
        .collect()
}

/// One finding of every kind, so scoring walks the whole weight table.
pub fn mixed_findings() -> Vec<ErrorFinding> {
    ErrorKind::ALL
        .into_iter()
        .map(|kind| ErrorFinding {
            kind,
            subject: "c1".to_string(),
            rationale: "benchmark fixture".to_string(),
        })
        .collect()
}

/// A prompt candidate with the few-shot budget filled.
pub fn shot_candidate() -> PromptCandidate {
    let mut candidate = PromptCandidate::seed();
    for i in 0..4 {
        candidate.few_shots.push(FewShot {
            input: format!("Example input {i}: {}", passage()),
            output: format!("Example output {i}: a short plain rewrite."),
        });
    }
    candidate
}

/// A paragraph at the corpus median length.
pub fn passage() -> String {
    "Mitochondrial biogenesis is regulated by a transcriptional cascade in which \
     PGC-1alpha coactivates nuclear respiratory factors, which in turn induce the \
     mitochondrial transcription factor A required for replication of the organellar \
     genome. Exercise, caloric restriction, and cold exposure each activate this \
     cascade through distinct signaling intermediates, including AMP-activated \
     protein kinase and the sirtuin family of NAD-dependent deacetylases. "
        .repeat(3)
}
