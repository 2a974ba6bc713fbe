use serde::{Deserialize, Serialize};

use super::Corpus;

/// Which text span becomes one row of the embedding matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    #[default]
    Sentence,
    Turn,
}

/// A modeled text unit: one or more non-empty sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelUnit {
    pub text: String,
    pub lemmas: Vec<String>,
    /// Indices into `Corpus::sentences`.
    pub sentences: Vec<usize>,
}

pub fn model_units(corpus: &Corpus, granularity: Granularity) -> Vec<ModelUnit> {
    let mut units: Vec<ModelUnit> = Vec::new();
    let mut last_turn: Option<(&str, usize)> = None;
    for i in corpus.modeled_sentences() {
        let s = &corpus.sentences[i];
        let key = (s.doc_id.as_str(), s.turn_index);
        match (granularity, units.last_mut()) {
            (Granularity::Turn, Some(unit)) if last_turn == Some(key) => {
                unit.text.push_str(". ");
                unit.text.push_str(&s.raw);
                unit.lemmas.extend(s.lemmas.iter().cloned());
                unit.sentences.push(i);
            }
            _ => units.push(ModelUnit {
                text: s.raw.clone(),
                lemmas: s.lemmas.clone(),
                sentences: vec![i],
            }),
        }
        last_turn = Some(key);
    }
    units
}
