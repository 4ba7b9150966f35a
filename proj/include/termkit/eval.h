#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "termkit/corpus.h"

namespace termkit {

struct SentenceRecall {
  std::string id;
  std::size_t total = 0;
  std::size_t matched = 0;
};

struct RecallReport {
  std::size_t total_constraints = 0;
  std::size_t matched = 0;
  double recall = 1.0;  // matched / total; 0/0 counts as 1.0
  std::vector<SentenceRecall> per_sentence;
};

// Micro-averaged terminology recall: the fraction of dictionary constraints
// whose target term occurs in the corresponding hypothesis. Every dictionary
// id must have a hypothesis.
RecallReport term_recall(const std::vector<HypothesisEntry>& hyps, const TermDictionary& dict);

struct BleuReport {
  double score = 0.0;  // 0..100
  std::array<double, 4> precisions{};
  double brevity_penalty = 0.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
};

// Corpus-level BLEU-4 over pre-tokenized sentences: clipped n-gram counts,
// exponential brevity penalty, single reference, no smoothing (score is 0
// whenever any n-gram precision is 0).
BleuReport bleu(const std::vector<std::vector<std::string>>& hyps,
                const std::vector<std::vector<std::string>>& refs);

struct SystemReport {
  std::string mode;    // dictionary mode the system ran under
  std::string model;   // base system label, e.g. "TAT" or "LLM"
  std::string refine;  // refinement label, "-" when none
  RecallReport recall;
  std::optional<BleuReport> bleu;
};

struct ComparisonReport {
  std::vector<SystemReport> rows;  // sorted by (mode, model, refine)
};

ComparisonReport make_report(std::vector<SystemReport> rows);

std::string report_to_json(const ComparisonReport& report);
ComparisonReport report_from_json(const std::string& text);

// Fixed-width table with recall as a percentage (2 decimals) and BLEU where
// present.
std::string render_report(const ComparisonReport& report);

// "82.31" style percentage rendering shared by the CLI and the table.
std::string format_percent(double fraction);

}  // namespace termkit
