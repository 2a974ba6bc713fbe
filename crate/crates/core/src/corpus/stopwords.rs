use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SuffixStemmer;
use crate::error::{Error, Result};

const ENGLISH: &str = include_str!("../../data/english_stopwords.txt");
const ADDITIONAL: &str = include_str!("../../data/additional_stopwords.txt");

/// Base and user-supplied stop words; the union is applied.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopWordSet {
    pub base: BTreeSet<String>,
    pub additional: BTreeSet<String>,
}

impl StopWordSet {
    pub fn new<'a>(
        base: impl IntoIterator<Item = &'a str>,
        additional: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        Self {
            base: base.into_iter().map(str::to_lowercase).collect(),
            additional: additional.into_iter().map(str::to_lowercase).collect(),
        }
    }

    /// English function words, each also under its stemmed form so they
    /// match lemmas produced by [`SuffixStemmer`], plus the shipped
    /// additional list of interview filler words.
    pub fn english_default() -> Self {
        let stemmer = SuffixStemmer;
        let base = ENGLISH
            .lines()
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .flat_map(|w| [w.to_string(), stemmer.stem(w)])
            .collect();
        Self {
            base,
            additional: parse_stopword_text(ADDITIONAL),
        }
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.base.contains(lemma) || self.additional.contains(lemma)
    }

    pub fn with_additional<'a>(mut self, words: impl IntoIterator<Item = &'a str>) -> Self {
        self.additional
            .extend(words.into_iter().map(|w| w.trim().to_lowercase()).filter(|w| !w.is_empty()));
        self
    }

    pub fn len(&self) -> usize {
        self.base.union(&self.additional).count()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty() && self.additional.is_empty()
    }
}

fn parse_stopword_text(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

/// One lowercase lemma per line, LF terminated, sorted and deduplicated so
/// that export, import and export again yields identical bytes.
pub fn export_stopword_file<S: AsRef<str>>(lemmas: &[S]) -> String {
    let set: BTreeSet<String> = lemmas
        .iter()
        .map(|l| l.as_ref().trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect();
    let mut out = String::new();
    for lemma in set {
        out.push_str(&lemma);
        out.push('\n');
    }
    out
}

pub fn import_stopword_file(text: &str) -> BTreeSet<String> {
    parse_stopword_text(text)
}

impl StopWordSet {
    pub fn load_additional(mut self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.additional.extend(import_stopword_file(&text));
        Ok(self)
    }
}
