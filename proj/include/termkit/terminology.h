#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "termkit/corpus.h"

namespace termkit {

enum class AnnotateMode { append, replace };

std::string to_string(AnnotateMode mode);
AnnotateMode annotate_mode_from_string(const std::string& s);

struct AnnotationConfig {
  double probability = 0.10;  // per-candidate selection probability
  std::uint64_t seed = 0;
  AnnotateMode mode = AnnotateMode::append;
};

// A source token sequence that may contain marker regions
// `srcword __target__ trgword+ __done__` (append mode).
struct AnnotatedSource {
  std::vector<std::string> tokens;

  bool operator==(const AnnotatedSource&) const = default;
};

// Bijective-link terminology candidates: a link (i, j) qualifies iff i and j
// each occur in exactly one link of the sentence. Case-folded identical
// source/target tokens are filtered out. Output is sorted by source index.
std::vector<TermConstraint> extract_bijective(const SentencePair& pair,
                                              const AlignmentLinkSet& links);

// Append mode inserts `__target__ trg __done__` right after the constrained
// source token; replace mode substitutes the token with the target term.
// Multi-token target terms occupy one marker region.
AnnotatedSource annotate_inline(const SentencePair& pair,
                                const std::vector<TermConstraint>& constraints,
                                AnnotateMode mode);

// Inverse of append-mode annotation: returns the plain source tokens and the
// recovered constraints (indices relative to the stripped source).
std::pair<std::vector<std::string>, std::vector<TermConstraint>> parse_annotated(
    const AnnotatedSource& annotated);

// Per-candidate Bernoulli(p) selection keyed by (seed, sentence id,
// src_index), so the same seed reproduces the same annotated corpus
// regardless of iteration order or worker count.
bool candidate_selected(std::uint64_t seed, const std::string& id, std::size_t src_index,
                        double probability);

struct SampledAnnotations {
  std::vector<AnnotatedSource> annotated;
  std::vector<std::vector<TermConstraint>> selected;  // per pair, source order
};

// Extracts bijective candidates per pair, keeps each with the configured
// probability, and annotates the survivors; unsampled pairs pass through
// untouched. Alignments must positionally match the corpus.
SampledAnnotations sample_annotations(const std::vector<SentencePair>& corpus,
                                      const std::vector<AlignmentLinkSet>& alignments,
                                      const AnnotationConfig& config);

// Annotated sources only, for callers that do not need the selection.
std::vector<AnnotatedSource> sample_training_annotations(
    const std::vector<SentencePair>& corpus, const std::vector<AlignmentLinkSet>& alignments,
    const AnnotationConfig& config);

}  // namespace termkit
