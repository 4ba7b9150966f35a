#pragma once

#include <set>
#include <string>
#include <vector>

#include "termkit/aligner.h"
#include "termkit/corpus.h"
#include "termkit/decoder.h"

namespace termkit {

struct ViolationReport {
  std::string hypothesis_id;
  std::vector<TermConstraint> unmet;       // first-round violations
  std::set<std::string> violating_tokens;  // accumulated ban set
};

struct NcdConfig {
  int max_iterations = 1;  // additional re-decodes allowed after the first pass
  BeamConfig beam;
  double posterior_threshold = 0.5;
};

// Constraints whose target term does not appear in the hypothesis under the
// shared term-presence rule, in constraint order.
std::vector<TermConstraint> find_violations(const std::vector<TermConstraint>& constraints,
                                            const Hypothesis& hyp);

// Aligns the plain source to the hypothesis and returns the hypothesis
// tokens linked to each unmet constraint's source position, minus any token
// that case-folds to an expected target term. May be empty when alignment
// finds no link for a violated position.
std::set<std::string> locate_violating_tokens(const AlignerModel& model,
                                              const SentencePair& source, const Hypothesis& hyp,
                                              const std::vector<TermConstraint>& unmet,
                                              double threshold);

struct NcdResult {
  Hypothesis hyp;
  ViolationReport report;
  int decoder_calls = 0;
};

// The violation -> localize -> re-decode loop. Returns the input hypothesis
// untouched when no constraint is violated or nothing is actionable;
// otherwise runs up to max_iterations rounds with an accumulating forbidden
// set and returns the final round's hypothesis with stage NCD.
NcdResult refine_ncd(const Scorer& scorer, const AlignerModel& model, const std::string& id,
                     const AnnotatedSource& source,
                     const std::vector<TermConstraint>& constraints, const Hypothesis& first_hyp,
                     const NcdConfig& config);

}  // namespace termkit
