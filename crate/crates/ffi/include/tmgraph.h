/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef TMGRAPH_H
#define TMGRAPH_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum TmStatus {
  TM_STATUS_OK = 0,
  TM_STATUS_NULL_ARGUMENT = 1,
  TM_STATUS_INVALID_UTF8 = 2,
  TM_STATUS_INVALID_ARGUMENT = 3,
  TM_STATUS_EMPTY_INPUT = 4,
  TM_STATUS_TOO_FEW_DOCUMENTS = 5,
  TM_STATUS_NO_TOPICS = 6,
  TM_STATUS_PROVIDER = 7,
  TM_STATUS_FORMAT = 8,
  TM_STATUS_IO = 9,
  TM_STATUS_PANIC = 99,
} TmStatus;

typedef enum TmArtifact {
  TM_ARTIFACT_TOPICS = 0,
  TM_ARTIFACT_METRICS = 1,
  TM_ARTIFACT_GRAPH = 2,
} TmArtifact;

/**
 * A preprocessed corpus.
 */
typedef struct TmCorpus TmCorpus;

/**
 * A finished model run and its serialized artifacts.
 */
typedef struct TmRun TmRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *tm_last_error(void);

/**
 * Library version as a static string.
 */
const char *tm_version(void);

void tm_string_free(char *s);

/**
 * Parses `count` transcripts (`I:`/`R:` speaker prefixes) and preprocesses
 * them with the default stop words. `ids` may be null, in which case
 * documents are named `doc_0`, `doc_1`, ...
 */
enum TmStatus tm_corpus_new(const char *const *ids,
                            const char *const *texts,
                            size_t count,
                            bool keep_interviewer,
                            struct TmCorpus **out);

void tm_corpus_free(struct TmCorpus *corpus);

/**
 * Number of sentences that will be modeled.
 */
enum TmStatus tm_corpus_sentence_count(const struct TmCorpus *corpus, size_t *out);

/**
 * JSON array of `{"lemma", "count"}`, most frequent first.
 */
enum TmStatus tm_corpus_frequencies(const struct TmCorpus *corpus, size_t limit, char **out);

/**
 * JSON array of the sentences containing `lemma`.
 */
enum TmStatus tm_corpus_citations(const struct TmCorpus *corpus, const char *lemma, char **out);

/**
 * Fits one model with default settings. `method` is one of `lda`,
 * `embed_kmeans`, `embed_hdbscan`, `lda_embed_kmeans`, `lda_embed_hdbscan`.
 */
enum TmStatus tm_run_new(const struct TmCorpus *corpus,
                         const char *method,
                         size_t num_topics,
                         uint64_t seed,
                         struct TmRun **out);

/**
 * Fits one model from a JSON pipeline configuration; omitted fields take
 * their defaults.
 */
enum TmStatus tm_run_with_config(const struct TmCorpus *corpus,
                                 const char *config_json,
                                 struct TmRun **out);

void tm_run_free(struct TmRun *run);

enum TmStatus tm_run_topic_count(const struct TmRun *run, size_t *out);

/**
 * One of the run's JSON artifacts, byte-identical to the files the CLI
 * writes and the service serves.
 */
enum TmStatus tm_run_artifact(const struct TmRun *run, enum TmArtifact kind, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TMGRAPH_H */
