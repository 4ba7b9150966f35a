#pragma once

#include <map>
#include <string>
#include <vector>

#include "termkit/corpus.h"

namespace termkit {

enum class AlignerVariant { model1, diagonal };

std::string to_string(AlignerVariant variant);
AlignerVariant aligner_variant_from_string(const std::string& s);

struct AlignerConfig {
  int iterations = 5;
  AlignerVariant variant = AlignerVariant::model1;
  double diagonal_tension = 4.0;  // diagonal variant only
  double null_prob = 0.08;        // prior mass on the NULL source token
  double posterior_threshold = 0.5;
  int jobs = 1;
};

// IBM Model 1 translation table plus the config it was trained with.
// Rows are kept in sorted maps so iteration, dumps, and normalization are
// deterministic across runs and worker counts.
struct AlignerModel {
  AlignerConfig config;
  std::map<std::string, std::map<std::string, double>> lexicon;  // src -> trg -> t(trg|src)
  std::map<std::string, double> null_lexicon;                    // trg -> t(trg|NULL)
  std::vector<double> log_likelihoods;                           // one per EM iteration

  // Query-time lookups: unknown pairs receive 1e-9 so downstream alignment
  // of novel hypothesis tokens never hits a zero denominator.
  double lex_prob(const std::string& src, const std::string& trg) const;
  double null_lex_prob(const std::string& trg) const;
};

// EM training. Log-likelihood (recorded per iteration, computed with the
// parameters in force during that iteration's E-step) is non-decreasing.
// Throws EmptyCorpus / EmptySentence on inadmissible input.
AlignerModel train(const std::vector<SentencePair>& corpus, const AlignerConfig& config);

// One link per target position, argmax over source positions against the
// NULL alternative. Source ties break toward the smaller index; NULL is
// retained on an exact NULL-vs-source tie.
AlignmentLinkSet viterbi_align(const AlignerModel& model, const SentencePair& pair);

// Includes (i, j) iff the Model 1 posterior p(i|j) reaches the threshold.
AlignmentLinkSet posterior_align(const AlignerModel& model, const SentencePair& pair,
                                 double threshold);

// Versioned JSON dump with sorted lexicon rows and the config snapshot.
void save_model(const AlignerModel& model, const std::string& path);
AlignerModel load_model(const std::string& path);

}  // namespace termkit
