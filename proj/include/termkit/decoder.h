#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "termkit/corpus.h"
#include "termkit/terminology.h"

namespace termkit {

// Next-token distribution over a finite vocabulary that includes kEndToken.
using Distribution = std::map<std::string, double>;

// Conditional sequence model contract: deterministic for identical
// (source, prefix), distribution sums to 1 and is non-negative.
// Implementations must be immutable or internally synchronized; decoding
// runs many sentences in parallel against one scorer.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual Distribution next_distribution(const std::vector<std::string>& source,
                                         const std::vector<std::string>& prefix) const = 0;
};

struct ScorerRule {
  std::string source_key;  // "*" matches any source
  std::vector<std::string> prefix;
  Distribution dist;
};

// Deterministic table-driven scorer for tests and desk-scale demos. Rules
// are matched in order on (joined source, exact prefix); unmatched prefixes
// fall back to the default distribution.
//
// With copy_markers set, decoding first reproduces every marker payload of
// the annotated source, in source order, one token per step with probability
// one; once all payloads are consumed the table takes over. This is the toy
// analogue of a translation model trained to copy inline annotations.
class TableScorer : public Scorer {
 public:
  TableScorer(std::vector<std::string> vocabulary, std::vector<ScorerRule> rules,
              Distribution default_dist, bool copy_markers = false);

  static TableScorer load(const std::string& path);

  Distribution next_distribution(const std::vector<std::string>& source,
                                 const std::vector<std::string>& prefix) const override;

  bool copy_markers() const { return copy_markers_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }

 private:
  std::vector<std::string> vocabulary_;
  std::vector<ScorerRule> rules_;
  Distribution default_dist_;
  bool copy_markers_;
};

struct BeamConfig {
  int beam_size = 4;
  int max_len = 32;
  std::set<std::string> forbidden;
  double override_threshold = 0.95;
  bool length_norm = false;
};

// Zeroes every forbidden token whose probability is at or below the
// threshold; a forbidden token carrying more than the threshold's share of
// the step's mass is left untouched. No renormalization.
Distribution apply_negative_constraints(const Distribution& dist,
                                        const std::set<std::string>& forbidden, double threshold);

// Beam search with negative constraints. Returns the best finished
// hypothesis (score ties break lexicographically on the token sequence);
// hypotheses reaching max_len are force-finished without an end-token score.
// Throws NoFinishedHypothesis when masking exhausts every path.
Hypothesis beam_search(const Scorer& scorer, const AnnotatedSource& source,
                       const BeamConfig& config);

}  // namespace termkit
