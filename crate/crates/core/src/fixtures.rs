//! Synthetic interview corpora with planted topics, for tests, benchmarks
//! and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{preprocess, Corpus, SpeakerRules, StopWordSet, SuffixStemmer};
use crate::error::Result;

const CONSONANTS: &[u8] = b"bdfgklmnprtvz";
const VOWELS: &[u8] = b"aeiou";

/// A pseudo-word of three consonant–vowel syllables, unique per index.
/// Such words end in a vowel, so the stemmer leaves them untouched.
pub fn pseudo_word(index: usize) -> String {
    let base = CONSONANTS.len() * VOWELS.len();
    let mut x = index;
    let mut out = String::with_capacity(6);
    for _ in 0..3 {
        let syl = x % base;
        x /= base;
        out.push(CONSONANTS[syl / VOWELS.len()] as char);
        out.push(VOWELS[syl % VOWELS.len()] as char);
    }
    out
}

#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    /// `(document id, transcript text)` pairs.
    pub documents: Vec<(String, String)>,
    /// Planted topic of every respondent sentence, in corpus order.
    pub labels: Vec<usize>,
    pub vocabularies: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy)]
pub struct PlantedSpec {
    pub topics: usize,
    pub words_per_topic: usize,
    pub sentences_per_topic: usize,
    pub words_per_sentence: usize,
    pub documents: usize,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            topics: 4,
            words_per_topic: 30,
            sentences_per_topic: 50,
            words_per_sentence: 8,
            documents: 10,
            seed: 7,
        }
    }
}

/// Sentences draw their words uniformly from one topic's vocabulary;
/// topics are interleaved in corpus order. Each document opens with an
/// interviewer question that default preprocessing removes.
pub fn planted(spec: PlantedSpec) -> PlantedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vocabularies: Vec<Vec<String>> = (0..spec.topics)
        .map(|t| {
            (0..spec.words_per_topic)
                .map(|w| pseudo_word(t * spec.words_per_topic + w))
                .collect()
        })
        .collect();
    let total = spec.topics * spec.sentences_per_topic;
    let mut labels = Vec::with_capacity(total);
    let mut lines = Vec::with_capacity(total);
    for s in 0..total {
        let topic = s % spec.topics;
        let words: Vec<&str> = (0..spec.words_per_sentence)
            .map(|_| vocabularies[topic][rng.random_range(0..spec.words_per_topic)].as_str())
            .collect();
        labels.push(topic);
        lines.push(format!("R: {}.", words.join(" ")));
    }
    let docs = spec.documents.clamp(1, total.max(1));
    let per_doc = total.div_ceil(docs);
    let documents = lines
        .chunks(per_doc.max(1))
        .enumerate()
        .map(|(i, chunk)| {
            let mut text = String::from("I: Could you tell me about that?\n");
            for line in chunk {
                text.push_str(line);
                text.push('\n');
            }
            (format!("interview_{i:02}"), text)
        })
        .collect();
    PlantedCorpus {
        documents,
        labels,
        vocabularies,
    }
}

impl PlantedCorpus {
    pub fn raw_corpus(&self) -> Result<Corpus> {
        Corpus::from_texts(
            self.documents.iter().map(|(id, t)| (id.as_str(), t.as_str())),
            &SpeakerRules::default(),
        )
    }

    /// Interviewer removed, stemmed, default stop words applied.
    pub fn corpus(&self) -> Result<Corpus> {
        preprocess(
            &self.raw_corpus()?,
            false,
            &SuffixStemmer,
            &StopWordSet::english_default(),
        )
    }
}

/// Fraction of units whose cluster's majority planted label matches their
/// own. Noise (`< 0`) counts as a miss.
pub fn purity(assignments: &[i64], truth: &[usize]) -> f64 {
    use std::collections::BTreeMap;
    let mut table: BTreeMap<i64, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&a, &t) in assignments.iter().zip(truth) {
        if a >= 0 {
            *table.entry(a).or_default().entry(t).or_default() += 1;
        }
    }
    let hits: usize = table
        .values()
        .map(|row| row.values().copied().max().unwrap_or(0))
        .sum();
    hits as f64 / assignments.len().max(1) as f64
}
