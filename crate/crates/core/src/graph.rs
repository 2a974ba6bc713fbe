//! Concept graph over topic keywords, central vertices, and the citation
//! index that maps a lemma back to the sentences that contain it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::topics::{Keyword, TopicModelResult};

/// JSON schema of the exported graph.
pub const GRAPH_SCHEMA: &str = include_str!("../schema/graph.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphTopic {
    pub id: usize,
    pub keywords: Vec<Keyword>,
    pub central: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub lemma: String,
    /// Largest weight across the topics that list the lemma.
    pub weight: f64,
    pub topics: Vec<usize>,
    pub central_for: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
}

/// Topics by id, vertices by lemma, edges by (source, target) with
/// `source < target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptGraph {
    pub topics: Vec<GraphTopic>,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
}

impl ConceptGraph {
    pub fn vertex(&self, lemma: &str) -> Option<&Vertex> {
        self.vertices
            .binary_search_by(|v| v.lemma.as_str().cmp(lemma))
            .ok()
            .map(|i| &self.vertices[i])
    }

    pub fn neighbors(&self, lemma: &str) -> Vec<&str> {
        self.edges
            .iter()
            .filter_map(|e| {
                if e.source == lemma {
                    Some(e.target.as_str())
                } else if e.target == lemma {
                    Some(e.source.as_str())
                } else {
                    None
                }
            })
            .collect()
    }
}

/// Highest-weight keyword of each topic, ties to the smaller lemma.
/// Topics without keywords are skipped.
pub fn central_vertices(result: &TopicModelResult) -> Vec<(usize, String)> {
    result
        .topics
        .iter()
        .filter_map(|t| {
            t.keywords
                .iter()
                .fold(None::<&Keyword>, |best, k| match best {
                    Some(b) if b.weight > k.weight || (b.weight == k.weight && b.lemma <= k.lemma) => Some(b),
                    _ => Some(k),
                })
                .map(|k| (t.id, k.lemma.clone()))
        })
        .collect()
}

/// Vertices are the union of all keyword lists; two lemmas are joined when
/// they appear in the same topic's list.
pub fn build_graph(result: &TopicModelResult) -> Result<ConceptGraph> {
    if result.topics.iter().all(|t| t.keywords.is_empty()) {
        return Err(Error::NoTopics);
    }
    let centrals = central_vertices(result);
    let mut vertices: BTreeMap<&str, Vertex> = BTreeMap::new();
    let mut edges: BTreeSet<Edge> = BTreeSet::new();
    for t in &result.topics {
        for k in &t.keywords {
            let v = vertices.entry(&k.lemma).or_insert_with(|| Vertex {
                lemma: k.lemma.clone(),
                weight: k.weight,
                topics: Vec::new(),
                central_for: Vec::new(),
            });
            v.weight = v.weight.max(k.weight);
            if !v.topics.contains(&t.id) {
                v.topics.push(t.id);
            }
        }
        let lemmas: BTreeSet<&str> = t.keywords.iter().map(|k| k.lemma.as_str()).collect();
        let lemmas: Vec<&str> = lemmas.into_iter().collect();
        for (i, a) in lemmas.iter().enumerate() {
            for b in &lemmas[i + 1..] {
                edges.insert(Edge {
                    source: a.to_string(),
                    target: b.to_string(),
                });
            }
        }
    }
    for (id, lemma) in &centrals {
        if let Some(v) = vertices.get_mut(lemma.as_str()) {
            v.central_for.push(*id);
        }
    }
    let mut topics: Vec<GraphTopic> = result
        .topics
        .iter()
        .filter_map(|t| {
            centrals.iter().find(|(id, _)| *id == t.id).map(|(_, c)| GraphTopic {
                id: t.id,
                keywords: t.keywords.clone(),
                central: c.clone(),
            })
        })
        .collect();
    topics.sort_by_key(|t| t.id);
    let mut vertices: Vec<Vertex> = vertices.into_values().collect();
    for v in &mut vertices {
        v.topics.sort_unstable();
        v.central_for.sort_unstable();
    }
    Ok(ConceptGraph {
        topics,
        vertices,
        edges: edges.into_iter().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Citation {
    pub doc: String,
    pub turn: usize,
    pub sentence: usize,
    pub text: String,
}

/// Sentences containing a lemma, in corpus order.
pub fn citations_for(lemma: &str, corpus: &Corpus) -> Vec<Citation> {
    corpus
        .sentences
        .iter()
        .filter(|s| s.lemmas.iter().any(|l| l == lemma))
        .map(|s| Citation {
            doc: s.doc_id.clone(),
            turn: s.turn_index,
            sentence: s.sentence_index,
            text: s.raw.clone(),
        })
        .collect()
}

/// Lemma to citations, built once from a lemmatized corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationIndex(BTreeMap<String, Vec<Citation>>);

impl CitationIndex {
    pub fn build(corpus: &Corpus) -> Self {
        let mut index: BTreeMap<String, Vec<Citation>> = BTreeMap::new();
        for s in &corpus.sentences {
            let distinct: BTreeSet<&String> = s.lemmas.iter().collect();
            for lemma in distinct {
                index.entry(lemma.clone()).or_default().push(Citation {
                    doc: s.doc_id.clone(),
                    turn: s.turn_index,
                    sentence: s.sentence_index,
                    text: s.raw.clone(),
                });
            }
        }
        Self(index)
    }

    /// Keeps only the lemmas that are vertices of `graph`.
    pub fn restrict_to(&self, graph: &ConceptGraph) -> Self {
        Self(
            graph
                .vertices
                .iter()
                .filter_map(|v| self.0.get(&v.lemma).map(|c| (v.lemma.clone(), c.clone())))
                .collect(),
        )
    }

    pub fn get(&self, lemma: &str) -> &[Citation] {
        self.0.get(lemma).map_or(&[], Vec::as_slice)
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Pretty-printed graph JSON with a trailing newline; byte-deterministic
/// for a given graph.
pub fn export_graph_json(graph: &ConceptGraph) -> Result<String> {
    let mut s = serde_json::to_string_pretty(graph)?;
    s.push('\n');
    Ok(s)
}

pub fn write_graph_json(graph: &ConceptGraph, path: &Path) -> Result<()> {
    std::fs::write(path, export_graph_json(graph)?).map_err(|e| Error::io(path, e))
}
