#pragma once

#include <string>
#include <vector>

namespace termkit {

// Inline annotation markers. These may never occur as plain corpus tokens.
inline constexpr const char* kTargetMarker = "__target__";
inline constexpr const char* kDoneMarker = "__done__";

// End-of-sequence symbol used by decoder vocabularies.
inline constexpr const char* kEndToken = "</s>";

bool is_reserved_marker(const std::string& token);

// Splits on ASCII whitespace; no empty tokens.
std::vector<std::string> split_whitespace(const std::string& text);

// Joins tokens with single spaces.
std::string join_tokens(const std::vector<std::string>& tokens);

// Baseline tokenizer: whitespace split, then leading/trailing ASCII
// punctuation is detached into separate tokens. Underscore counts as a word
// character so annotation markers survive intact. No case changes.
std::vector<std::string> tokenize(const std::string& text);

// ASCII case folding.
std::string fold_case(const std::string& s);

// The term-presence rule shared by violation detection and recall scoring:
// the term is baseline-tokenized and searched as a contiguous, case-folded
// token subsequence of the hypothesis.
bool term_matches(const std::vector<std::string>& hyp_tokens, const std::string& trg_term);

}  // namespace termkit
