use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Maps a lowercase token to its lemma. An empty lemma drops the token.
pub trait Lemmatizer: Send + Sync {
    fn lemmatize(&self, token: &str) -> Result<String>;
}

/// Rule-based English suffix stemmer.
///
/// Tokens that do not end in one of the handled ASCII suffixes (including all
/// non-Latin tokens) are returned unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct SuffixStemmer;

fn has_vowel(s: &str) -> bool {
    s.chars().enumerate().any(|(i, c)| {
        matches!(c, 'a' | 'e' | 'i' | 'o' | 'u') || (c == 'y' && i > 0)
    })
}

fn undouble(stem: &str) -> &str {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 2
        && b[n - 1] == b[n - 2]
        && b[n - 1].is_ascii_alphabetic()
        && !matches!(b[n - 1], b'a' | b'e' | b'i' | b'o' | b'u' | b'l' | b's' | b'z')
    {
        &stem[..n - 1]
    } else {
        stem
    }
}

impl SuffixStemmer {
    pub fn stem(&self, word: &str) -> String {
        if word.chars().count() <= 3 {
            return word.to_string();
        }
        if let Some(stem) = word.strip_suffix("sses") {
            return format!("{stem}ss");
        }
        if word.len() > 4 {
            if let Some(stem) = word.strip_suffix("ies").or_else(|| word.strip_suffix("ied")) {
                return format!("{stem}y");
            }
        }
        for suffix in ["ing", "ed"] {
            if let Some(stem) = word.strip_suffix(suffix) {
                if stem.len() >= 3 && has_vowel(stem) {
                    return undouble(stem).to_string();
                }
                return word.to_string();
            }
        }
        if let Some(stem) = word.strip_suffix('s') {
            if !stem.ends_with('s') && !stem.ends_with('u') && !stem.ends_with('i') {
                return stem.to_string();
            }
        }
        word.to_string()
    }
}

impl Lemmatizer for SuffixStemmer {
    fn lemmatize(&self, token: &str) -> Result<String> {
        Ok(self.stem(token))
    }
}

/// External lemma table: one `surface<TAB>lemma` pair per line. Tokens that
/// are not in the table pass through unchanged. This is the hook for
/// languages the built-in stemmer does not cover.
#[derive(Debug, Clone, Default)]
pub struct DictionaryLemmatizer {
    table: HashMap<String, String>,
}

impl DictionaryLemmatizer {
    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let table = pairs
            .into_iter()
            .map(|(s, l)| (s.into().to_lowercase(), l.into().to_lowercase()))
            .collect();
        Self { table }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut table = HashMap::new();
        for (no, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (surface, lemma) = line.split_once('\t').ok_or_else(|| {
                Error::LemmatizerUnavailable(format!("line {}: expected surface<TAB>lemma", no + 1))
            })?;
            table.insert(surface.trim().to_lowercase(), lemma.trim().to_lowercase());
        }
        Ok(Self { table })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::LemmatizerUnavailable(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

impl Lemmatizer for DictionaryLemmatizer {
    fn lemmatize(&self, token: &str) -> Result<String> {
        Ok(self
            .table
            .get(token)
            .cloned()
            .unwrap_or_else(|| token.to_string()))
    }
}
