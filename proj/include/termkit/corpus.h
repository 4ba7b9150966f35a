#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace termkit {

// One tokenized parallel sentence. Corpora are stored pre-tokenized; the
// target side may be empty (untranslated test input).
struct SentencePair {
  std::string id;
  std::vector<std::string> src_tokens;
  std::vector<std::string> trg_tokens;

  bool operator==(const SentencePair&) const = default;
};

struct AlignmentLink {
  std::size_t src;
  std::size_t trg;

  auto operator<=>(const AlignmentLink&) const = default;
};

using AlignmentLinkSet = std::set<AlignmentLink>;

// A required source-span -> target-term mapping for one sentence.
struct TermConstraint {
  std::size_t src_index = 0;
  std::string src_term;
  std::string trg_term;

  bool operator==(const TermConstraint&) const = default;
};

enum class DictMode { terminology, random, none };

std::string to_string(DictMode mode);
DictMode dict_mode_from_string(const std::string& s);

struct DictEntry {
  std::string id;
  std::vector<TermConstraint> terms;

  bool operator==(const DictEntry&) const = default;
};

// Per-sentence terminology constraints, keyed by sentence id. Entry order
// follows the file. Mode `none` implies every constraint list is empty.
class TermDictionary {
 public:
  TermDictionary() = default;
  explicit TermDictionary(DictMode mode) : mode_(mode) {}

  DictMode mode() const { return mode_; }
  void set_mode(DictMode mode) { mode_ = mode; }

  void add(DictEntry entry);  // throws DuplicateId
  const std::vector<TermConstraint>* find(const std::string& id) const;
  const std::vector<DictEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  bool operator==(const TermDictionary& other) const {
    return mode_ == other.mode_ && entries_ == other.entries_;
  }

 private:
  DictMode mode_ = DictMode::none;
  std::vector<DictEntry> entries_;
  std::map<std::string, std::size_t> index_;
};

enum class Stage { TAT, NCD, LLM, external };

std::string to_string(Stage stage);
Stage stage_from_string(const std::string& s);

// A decoded target sequence with its cumulative natural-log score and the
// pipeline stage that produced it.
struct Hypothesis {
  std::vector<std::string> trg_tokens;
  double log_score = 0.0;
  Stage stage = Stage::external;

  bool operator==(const Hypothesis&) const = default;
};

struct HypothesisEntry {
  std::string id;
  Hypothesis hyp;

  bool operator==(const HypothesisEntry&) const = default;
};

// --- Pharaoh alignment interchange ---

// Parses whitespace-separated "i-j" tokens; duplicates collapse.
// Throws MalformedLink on anything else.
AlignmentLinkSet parse_pharaoh(const std::string& line);

// Emits links sorted by (src, trg), space-separated.
std::string serialize_pharaoh(const AlignmentLinkSet& links);

// --- JSONL file formats ---

// Corpus records: {"id": string, "src": string, "trg": string|null}.
// With allow_markers=false any reserved marker token is a ParseError; with
// allow_markers=true the source side may carry well-formed annotation
// regions (the target side never may).
std::vector<SentencePair> load_corpus(const std::string& path, bool allow_markers = false);
void save_corpus(const std::vector<SentencePair>& corpus, const std::string& path);

// Alignment file: header line "#ids-match", then line k holds the Pharaoh
// string for corpus record k.
std::vector<AlignmentLinkSet> load_alignments(const std::string& path);
void save_alignments(const std::vector<AlignmentLinkSet>& alignments, const std::string& path);

// Dictionary records: {"id", "mode", "terms": [{"src_index", "src", "trg"}]}.
// All records must carry the same mode.
TermDictionary load_dictionary(const std::string& path);
void save_dictionary(const TermDictionary& dict, const std::string& path);

// Hypothesis records: {"id", "stage", "trg", "log_score"}.
std::vector<HypothesisEntry> load_hypotheses(const std::string& path);
void save_hypotheses(const std::vector<HypothesisEntry>& hyps, const std::string& path);

}  // namespace termkit
