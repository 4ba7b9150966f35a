#include "termkit/text.h"

#include <cctype>

namespace termkit {

namespace {

bool detachable_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0 && c != '_';
}

}  // namespace

bool is_reserved_marker(const std::string& token) {
  return token == kTargetMarker || token == kDoneMarker;
}

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  for (const std::string& chunk : split_whitespace(text)) {
    std::size_t begin = 0;
    std::size_t end = chunk.size();
    std::vector<std::string> trailing;
    while (end - begin > 1 && detachable_punct(chunk[begin])) {
      out.push_back(chunk.substr(begin, 1));
      ++begin;
    }
    while (end - begin > 1 && detachable_punct(chunk[end - 1])) {
      trailing.push_back(chunk.substr(end - 1, 1));
      --end;
    }
    out.push_back(chunk.substr(begin, end - begin));
    for (auto it = trailing.rbegin(); it != trailing.rend(); ++it) out.push_back(*it);
  }
  return out;
}

std::string fold_case(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool term_matches(const std::vector<std::string>& hyp_tokens, const std::string& trg_term) {
  std::vector<std::string> needle = tokenize(trg_term);
  if (needle.empty()) return true;
  if (needle.size() > hyp_tokens.size()) return false;
  for (std::string& t : needle) t = fold_case(t);
  for (std::size_t start = 0; start + needle.size() <= hyp_tokens.size(); ++start) {
    bool all = true;
    for (std::size_t k = 0; k < needle.size(); ++k) {
      if (fold_case(hyp_tokens[start + k]) != needle[k]) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

}  // namespace termkit
