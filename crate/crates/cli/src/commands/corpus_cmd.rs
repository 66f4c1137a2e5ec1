//! `simploop corpus stats|validate`.

use crate::commands::load_corpus;
use crate::errors::CliError;
use crate::{CorpusAction, GlobalOpts};

pub fn run(global: &GlobalOpts, action: CorpusAction) -> Result<(), CliError> {
    match action {
        CorpusAction::Stats { file } => {
            let (corpus, _) = load_corpus(&file, global.strict)?;
            let stats = corpus.stats();
            println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
        }
        CorpusAction::Validate { file } => {
            let (corpus, _) = load_corpus(&file, global.strict)?;
            let questions: usize = corpus.excerpts().iter().map(|e| e.mcqs.len()).sum();
            eprintln!("ok: {} texts, {questions} questions", corpus.len());
        }
    }
    Ok(())
}
