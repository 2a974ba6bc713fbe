//! Transcript parsing and preprocessing.
//!
//! A [`Corpus`] is never mutated in place: every transformation returns a new
//! value, so a corpus can be shared freely between threads and jobs.

mod lemma;
mod stopwords;
mod units;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lemma::{DictionaryLemmatizer, Lemmatizer, SuffixStemmer};
pub use stopwords::{export_stopword_file, import_stopword_file, StopWordSet};
pub use units::{model_units, Granularity, ModelUnit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeakerRole {
    Interviewer,
    Respondent,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub doc_id: String,
    pub turn_index: usize,
    pub role: SpeakerRole,
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub doc_id: String,
    pub turn_index: usize,
    pub sentence_index: usize,
    pub raw: String,
    pub lemmas: Vec<String>,
}

impl Sentence {
    /// Sentences left without lemmas stay in the corpus so that citation
    /// coordinates are stable, but they are never modeled.
    pub fn is_empty(&self) -> bool {
        self.lemmas.is_empty()
    }
}

/// Speaker-prefix rules used by [`parse_transcript`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerRules {
    pub interviewer: Vec<String>,
    pub respondent: Vec<String>,
}

impl Default for SpeakerRules {
    fn default() -> Self {
        Self {
            interviewer: vec!["Interviewer:".into(), "I:".into(), "Q:".into()],
            respondent: vec!["Respondent:".into(), "R:".into(), "A:".into()],
        }
    }
}

impl SpeakerRules {
    /// Returns the role and the remainder of the line when it starts with a
    /// known prefix. Matching is ASCII case-insensitive and prefers the
    /// longest prefix.
    fn classify<'a>(&self, line: &'a str) -> Option<(SpeakerRole, &'a str)> {
        let candidates = self
            .interviewer
            .iter()
            .map(|p| (SpeakerRole::Interviewer, p))
            .chain(self.respondent.iter().map(|p| (SpeakerRole::Respondent, p)));
        let mut best: Option<(SpeakerRole, usize)> = None;
        for (role, prefix) in candidates {
            let n = prefix.len();
            if line.len() >= n
                && line.is_char_boundary(n)
                && line[..n].eq_ignore_ascii_case(prefix)
                && best.is_none_or(|(_, m)| n > m)
            {
                best = Some((role, n));
            }
        }
        best.map(|(role, n)| (role, &line[n..]))
    }

    fn prefix_for(&self, role: SpeakerRole) -> Option<&str> {
        match role {
            SpeakerRole::Interviewer => self.interviewer.first().map(String::as_str),
            SpeakerRole::Respondent => self.respondent.first().map(String::as_str),
            SpeakerRole::Unknown => None,
        }
    }
}

/// Splits a raw transcript into turns, one per non-empty line.
///
/// A line starting with a known prefix takes that role (prefix stripped);
/// other lines inherit the role of the previous line, or `Unknown` at the
/// start of the file. A bare prefix line switches the role without producing
/// a turn.
pub fn parse_transcript(doc_id: &str, raw: &str, rules: &SpeakerRules) -> Result<Document> {
    let mut turns = Vec::new();
    let mut role = SpeakerRole::Unknown;
    for line in raw.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let text = match rules.classify(line) {
            Some((r, rest)) => {
                role = r;
                rest.trim()
            }
            None => line,
        };
        if text.is_empty() {
            continue;
        }
        turns.push(Turn {
            doc_id: doc_id.to_string(),
            turn_index: turns.len(),
            role,
            raw_text: text.to_string(),
        });
    }
    if turns.is_empty() {
        return Err(Error::EmptyTranscript);
    }
    Ok(Document {
        id: doc_id.to_string(),
        turns,
    })
}

impl Document {
    /// Renders the document back into transcript text that
    /// [`parse_transcript`] reads as the same turns.
    pub fn to_transcript(&self, rules: &SpeakerRules) -> String {
        let mut out = String::new();
        for turn in &self.turns {
            if let Some(prefix) = rules.prefix_for(turn.role) {
                out.push_str(prefix);
                out.push(' ');
            }
            out.push_str(&turn.raw_text);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub language: String,
    pub documents: Vec<Document>,
    /// Flat sentence list in (document, turn, sentence) order; empty until
    /// [`tokenize_lemmatize`] runs.
    pub sentences: Vec<Sentence>,
    pub lemmatized: bool,
}

impl Corpus {
    pub fn new(language: impl Into<String>, documents: Vec<Document>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for doc in &documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::invalid(format!("duplicate document id {:?}", doc.id)));
            }
        }
        Ok(Self {
            language: language.into(),
            documents,
            sentences: Vec::new(),
            lemmatized: false,
        })
    }

    /// Parses each `(doc_id, text)` pair and collects the results.
    pub fn from_texts<'a, I>(texts: I, rules: &SpeakerRules) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let docs = texts
            .into_iter()
            .map(|(id, raw)| parse_transcript(id, raw, rules))
            .collect::<Result<Vec<_>>>()?;
        Corpus::new("en", docs)
    }

    pub fn turns(&self) -> impl Iterator<Item = &Turn> {
        self.documents.iter().flat_map(|d| d.turns.iter())
    }

    pub fn count_role(&self, role: SpeakerRole) -> usize {
        self.turns().filter(|t| t.role == role).count()
    }

    /// Indices into `sentences` of the sentences that carry lemmas.
    pub fn modeled_sentences(&self) -> Vec<usize> {
        self.sentences
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.is_empty())
            .map(|(i, _)| i)
            .collect()
    }
}

/// Drops interviewer turns (and their sentences) unless `keep` is set.
pub fn filter_interviewer(corpus: &Corpus, keep: bool) -> Corpus {
    if keep {
        return corpus.clone();
    }
    let documents = corpus
        .documents
        .iter()
        .map(|d| Document {
            id: d.id.clone(),
            turns: d
                .turns
                .iter()
                .filter(|t| t.role != SpeakerRole::Interviewer)
                .cloned()
                .collect(),
        })
        .collect::<Vec<_>>();
    let kept: BTreeSet<(&str, usize)> = documents
        .iter()
        .flat_map(|d| d.turns.iter().map(|t| (t.doc_id.as_str(), t.turn_index)))
        .collect();
    let sentences = corpus
        .sentences
        .iter()
        .filter(|s| kept.contains(&(s.doc_id.as_str(), s.turn_index)))
        .cloned()
        .collect();
    Corpus {
        language: corpus.language.clone(),
        documents,
        sentences,
        lemmatized: corpus.lemmatized,
    }
}

/// Splits on terminal punctuation; keeps every non-blank segment.
pub fn split_sentences(text: &str) -> Vec<&str> {
    text.split(['.', '!', '?'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Maximal runs of alphabetic characters, lowercased.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn tokenize_lemmatize(corpus: &Corpus, lemmatizer: &dyn Lemmatizer) -> Result<Corpus> {
    let mut sentences = Vec::new();
    for turn in corpus.turns() {
        for (sentence_index, raw) in split_sentences(&turn.raw_text).into_iter().enumerate() {
            let lemmas = tokenize(raw)
                .iter()
                .map(|tok| lemmatizer.lemmatize(tok).map(|l| l.to_lowercase()))
                .filter(|l| !matches!(l, Ok(s) if s.is_empty()))
                .collect::<Result<Vec<_>>>()?;
            sentences.push(Sentence {
                doc_id: turn.doc_id.clone(),
                turn_index: turn.turn_index,
                sentence_index,
                raw: raw.to_string(),
                lemmas,
            });
        }
    }
    Ok(Corpus {
        language: corpus.language.clone(),
        documents: corpus.documents.clone(),
        sentences,
        lemmatized: true,
    })
}

pub fn apply_stopwords(corpus: &Corpus, stops: &StopWordSet) -> Corpus {
    let mut out = corpus.clone();
    for sentence in &mut out.sentences {
        sentence.lemmas.retain(|l| !stops.contains(l));
    }
    out
}

/// Lemma counts over all sentences, sorted by count descending then lemma
/// ascending, truncated to `limit`.
pub fn frequency_table(corpus: &Corpus, limit: usize) -> Vec<(String, usize)> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for lemma in corpus.sentences.iter().flat_map(|s| s.lemmas.iter()) {
        *counts.entry(lemma.as_str()).or_default() += 1;
    }
    let mut table: Vec<(String, usize)> = counts
        .into_iter()
        .map(|(l, c)| (l.to_string(), c))
        .collect();
    table.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    table.truncate(limit);
    table
}

/// Parse, optionally drop the interviewer, lemmatize and remove stop words.
pub fn preprocess(
    corpus: &Corpus,
    keep_interviewer: bool,
    lemmatizer: &dyn Lemmatizer,
    stops: &StopWordSet,
) -> Result<Corpus> {
    let filtered = filter_interviewer(corpus, keep_interviewer);
    let lemmatized = tokenize_lemmatize(&filtered, lemmatizer)?;
    Ok(apply_stopwords(&lemmatized, stops))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(raw: &str) -> Result<Document> {
        parse_transcript("d", raw, &SpeakerRules::default())
    }

    fn roles(doc: &Document) -> Vec<SpeakerRole> {
        doc.turns.iter().map(|t| t.role).collect()
    }

    #[test]
    fn prefixes_assign_roles() {
        let doc = parse("I: How is work?\nR: Fine.").unwrap();
        assert_eq!(
            roles(&doc),
            vec![SpeakerRole::Interviewer, SpeakerRole::Respondent]
        );
        assert_eq!(doc.turns[0].raw_text, "How is work?");
        assert_eq!(doc.turns[1].raw_text, "Fine.");
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(parse(""), Err(Error::EmptyTranscript)));
        assert!(matches!(parse("  \n\n "), Err(Error::EmptyTranscript)));
    }

    #[test]
    fn unprefixed_lines_inherit_role() {
        let raw = "Interviewer: Tell me about your family.\n\
                   Respondent: My parents were teachers.\n\
                   They always pushed me to study.\n\
                   \n\
                   I: And now?\n\
                   A: Now I work in a bank.\n\
                   It is fine.";
        let doc = parse(raw).unwrap();
        use SpeakerRole::*;
        assert_eq!(
            roles(&doc),
            vec![Interviewer, Respondent, Respondent, Interviewer, Respondent, Respondent]
        );
        let idx: Vec<_> = doc.turns.iter().map(|t| t.turn_index).collect();
        assert_eq!(idx, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn lines_before_any_prefix_are_unknown() {
        let doc = parse("Transcript 4\nR: yes").unwrap();
        assert_eq!(roles(&doc), vec![SpeakerRole::Unknown, SpeakerRole::Respondent]);
    }

    #[test]
    fn prefix_match_is_case_insensitive_and_longest() {
        let doc = parse("interviewer: hello\nr: hi").unwrap();
        assert_eq!(doc.turns[0].raw_text, "hello");
        assert_eq!(doc.turns[1].role, SpeakerRole::Respondent);
    }

    #[test]
    fn serialize_round_trip() {
        let raw = "intro line\nI: Q one?\nR: answer\nmore answer\nQ: two";
        let rules = SpeakerRules::default();
        let doc = parse(raw).unwrap();
        let again = parse_transcript("d", &doc.to_transcript(&rules), &rules).unwrap();
        assert_eq!(doc, again);
    }

    fn corpus(raw: &str) -> Corpus {
        Corpus::from_texts([("d", raw)], &SpeakerRules::default()).unwrap()
    }

    #[test]
    fn filter_interviewer_counts() {
        let c = corpus("I: a\nR: b\nI: c\nR: d\nR: e");
        let f = filter_interviewer(&c, false);
        assert_eq!(f.turns().count(), 3);
        assert_eq!(f.count_role(SpeakerRole::Respondent), 3);
        let idx: Vec<_> = f.turns().map(|t| t.turn_index).collect();
        assert_eq!(idx, vec![1, 3, 4]);
        assert_eq!(filter_interviewer(&c, true), c);

        let no_interviewer = corpus("R: a\nb");
        assert_eq!(filter_interviewer(&no_interviewer, false), no_interviewer);
    }

    #[test]
    fn filter_interviewer_drops_lemmatized_sentences() {
        let c = tokenize_lemmatize(&corpus("I: why. how.\nR: fine."), &SuffixStemmer).unwrap();
        let f = filter_interviewer(&c, false);
        assert_eq!(f.sentences.len(), 1);
        assert_eq!(f.sentences[0].lemmas, vec!["fine"]);
    }

    fn lemmas_of(text: &str) -> Vec<Vec<String>> {
        let c = tokenize_lemmatize(&corpus(text), &SuffixStemmer).unwrap();
        c.sentences.into_iter().map(|s| s.lemmas).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(lemmas_of("Working works worked."), vec![vec!["work"; 3]]);
        assert_eq!(lemmas_of("Yes."), vec![vec!["yes"]]);
        assert_eq!(lemmas_of("2024!!!"), vec![Vec::<String>::new()]);
        assert_eq!(lemmas_of("One. Two! Three?").len(), 3);
    }

    #[test]
    fn sentence_coordinates() {
        let c = tokenize_lemmatize(&corpus("R: a b. c d\nI: e? f"), &SuffixStemmer).unwrap();
        let coords: Vec<_> = c
            .sentences
            .iter()
            .map(|s| (s.turn_index, s.sentence_index))
            .collect();
        assert_eq!(coords, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    struct Broken;
    impl Lemmatizer for Broken {
        fn lemmatize(&self, _: &str) -> Result<String> {
            Err(Error::LemmatizerUnavailable("hook offline".into()))
        }
    }

    #[test]
    fn lemmatizer_failure_propagates() {
        let err = tokenize_lemmatize(&corpus("R: hi"), &Broken).unwrap_err();
        assert!(matches!(err, Error::LemmatizerUnavailable(_)));
    }

    #[test]
    fn stopwords_remove_and_flag() {
        let c = tokenize_lemmatize(&corpus("R: probably work. probably."), &SuffixStemmer).unwrap();
        let stops = StopWordSet::new([], ["probably"]);
        let s = apply_stopwords(&c, &stops);
        assert_eq!(s.sentences[0].lemmas, vec!["work"]);
        assert!(s.sentences[1].is_empty());
        assert_eq!(s.sentences.len(), 2);
        assert_eq!(s.modeled_sentences(), vec![0]);
        assert_eq!(apply_stopwords(&c, &StopWordSet::default()), c);
    }

    #[test]
    fn frequency_examples() {
        let c = tokenize_lemmatize(&corpus("R: a a b"), &SuffixStemmer).unwrap();
        assert_eq!(
            frequency_table(&c, 10),
            vec![("a".to_string(), 2), ("b".to_string(), 1)]
        );
        assert_eq!(frequency_table(&c, 1).len(), 1);
        let empty = Corpus::new("en", vec![]).unwrap();
        assert!(frequency_table(&empty, 10).is_empty());
    }

    #[test]
    fn duplicate_document_ids_rejected() {
        let d = parse("R: x").unwrap();
        assert!(Corpus::new("en", vec![d.clone(), d]).is_err());
    }
}
