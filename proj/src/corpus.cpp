#include "termkit/corpus.h"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "termkit/errors.h"
#include "termkit/text.h"

namespace termkit {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

json parse_record(const std::string& path, std::size_t line_no, const std::string& line) {
  json rec;
  try {
    rec = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(path, line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!rec.is_object()) throw ParseError(path, line_no, "record is not a JSON object");
  return rec;
}

std::string require_string(const json& rec, const char* key, const std::string& path,
                           std::size_t line_no) {
  if (!rec.contains(key) || !rec[key].is_string())
    throw ParseError(path, line_no, std::string("missing or non-string field '") + key + "'");
  return rec[key].get<std::string>();
}

// Balance/nesting check for a source side that may carry annotation regions.
void check_marker_regions(const std::vector<std::string>& tokens, const std::string& path,
                          std::size_t line_no) {
  bool open = false;
  for (const std::string& tok : tokens) {
    if (tok == kTargetMarker) {
      if (open) throw ParseError(path, line_no, "nested annotation markers");
      open = true;
    } else if (tok == kDoneMarker) {
      if (!open) throw ParseError(path, line_no, "unbalanced annotation markers");
      open = false;
    }
  }
  if (open) throw ParseError(path, line_no, "unbalanced annotation markers");
}

void reject_markers(const std::vector<std::string>& tokens, const std::string& path,
                    std::size_t line_no) {
  for (const std::string& tok : tokens)
    if (is_reserved_marker(tok))
      throw ParseError(path, line_no, "reserved marker '" + tok + "' in plain corpus");
}

}  // namespace

std::string to_string(DictMode mode) {
  switch (mode) {
    case DictMode::terminology: return "terminology";
    case DictMode::random: return "random";
    case DictMode::none: return "none";
  }
  return "none";
}

DictMode dict_mode_from_string(const std::string& s) {
  if (s == "terminology") return DictMode::terminology;
  if (s == "random") return DictMode::random;
  if (s == "none") return DictMode::none;
  throw Error("unknown dictionary mode: '" + s + "'");
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::TAT: return "TAT";
    case Stage::NCD: return "NCD";
    case Stage::LLM: return "LLM";
    case Stage::external: return "external";
  }
  return "external";
}

Stage stage_from_string(const std::string& s) {
  if (s == "TAT") return Stage::TAT;
  if (s == "NCD") return Stage::NCD;
  if (s == "LLM") return Stage::LLM;
  if (s == "external") return Stage::external;
  throw Error("unknown hypothesis stage: '" + s + "'");
}

void TermDictionary::add(DictEntry entry) {
  auto [it, inserted] = index_.emplace(entry.id, entries_.size());
  if (!inserted) throw DuplicateId(entry.id);
  entries_.push_back(std::move(entry));
}

const std::vector<TermConstraint>* TermDictionary::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return nullptr;
  return &entries_[it->second].terms;
}

AlignmentLinkSet parse_pharaoh(const std::string& line) {
  AlignmentLinkSet links;
  for (const std::string& tok : split_whitespace(line)) {
    std::size_t dash = tok.find('-');
    if (dash == std::string::npos || dash == 0 || dash + 1 >= tok.size())
      throw MalformedLink(tok);
    const std::string left = tok.substr(0, dash);
    const std::string right = tok.substr(dash + 1);
    for (const std::string& part : {left, right})
      for (char c : part)
        if (c < '0' || c > '9') throw MalformedLink(tok);
    try {
      links.insert({std::stoull(left), std::stoull(right)});
    } catch (const std::exception&) {
      throw MalformedLink(tok);
    }
  }
  return links;
}

std::string serialize_pharaoh(const AlignmentLinkSet& links) {
  std::string out;
  for (const AlignmentLink& link : links) {
    if (!out.empty()) out += ' ';
    out += std::to_string(link.src) + "-" + std::to_string(link.trg);
  }
  return out;
}

std::vector<SentencePair> load_corpus(const std::string& path, bool allow_markers) {
  std::ifstream in = open_in(path);
  std::vector<SentencePair> corpus;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec = parse_record(path, line_no, line);
    SentencePair pair;
    pair.id = require_string(rec, "id", path, line_no);
    pair.src_tokens = split_whitespace(require_string(rec, "src", path, line_no));
    if (rec.contains("trg") && !rec["trg"].is_null())
      pair.trg_tokens = split_whitespace(require_string(rec, "trg", path, line_no));
    if (!seen_ids.insert(pair.id).second) throw DuplicateId(pair.id);
    reject_markers(pair.trg_tokens, path, line_no);
    if (allow_markers) {
      check_marker_regions(pair.src_tokens, path, line_no);
    } else {
      reject_markers(pair.src_tokens, path, line_no);
    }
    corpus.push_back(std::move(pair));
  }
  return corpus;
}

void save_corpus(const std::vector<SentencePair>& corpus, const std::string& path) {
  std::ofstream out = open_out(path);
  for (const SentencePair& pair : corpus) {
    json rec;
    rec["id"] = pair.id;
    rec["src"] = join_tokens(pair.src_tokens);
    if (pair.trg_tokens.empty())
      rec["trg"] = nullptr;
    else
      rec["trg"] = join_tokens(pair.trg_tokens);
    out << rec.dump() << '\n';
  }
}

std::vector<AlignmentLinkSet> load_alignments(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != "#ids-match")
    throw ParseError(path, 1, "expected '#ids-match' header line");
  std::vector<AlignmentLinkSet> alignments;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    try {
      alignments.push_back(parse_pharaoh(line));
    } catch (const MalformedLink& e) {
      throw ParseError(path, line_no, e.what());
    }
  }
  return alignments;
}

void save_alignments(const std::vector<AlignmentLinkSet>& alignments, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "#ids-match\n";
  for (const AlignmentLinkSet& links : alignments) out << serialize_pharaoh(links) << '\n';
}

TermDictionary load_dictionary(const std::string& path) {
  std::ifstream in = open_in(path);
  TermDictionary dict;
  std::string line;
  std::size_t line_no = 0;
  bool mode_set = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec = parse_record(path, line_no, line);
    DictEntry entry;
    entry.id = require_string(rec, "id", path, line_no);
    DictMode mode;
    try {
      mode = dict_mode_from_string(require_string(rec, "mode", path, line_no));
    } catch (const Error& e) {
      throw ParseError(path, line_no, e.what());
    }
    if (!mode_set) {
      dict.set_mode(mode);
      mode_set = true;
    } else if (mode != dict.mode()) {
      throw ParseError(path, line_no, "records with differing modes in one dictionary");
    }
    if (!rec.contains("terms") || !rec["terms"].is_array())
      throw ParseError(path, line_no, "missing or non-array field 'terms'");
    for (const json& term : rec["terms"]) {
      if (!term.is_object() || !term.contains("src_index") ||
          !term["src_index"].is_number_integer() || term["src_index"].get<long long>() < 0)
        throw ParseError(path, line_no, "term needs a non-negative integer 'src_index'");
      TermConstraint constraint;
      constraint.src_index = term["src_index"].get<std::size_t>();
      constraint.src_term = require_string(term, "src", path, line_no);
      constraint.trg_term = require_string(term, "trg", path, line_no);
      entry.terms.push_back(std::move(constraint));
    }
    if (mode == DictMode::none && !entry.terms.empty())
      throw ParseError(path, line_no, "mode 'none' record carries constraints");
    try {
      dict.add(std::move(entry));
    } catch (const DuplicateId&) {
      throw ParseError(path, line_no, "duplicate sentence id '" + rec["id"].get<std::string>() + "'");
    }
  }
  return dict;
}

void save_dictionary(const TermDictionary& dict, const std::string& path) {
  std::ofstream out = open_out(path);
  for (const DictEntry& entry : dict.entries()) {
    json terms = json::array();
    for (const TermConstraint& c : entry.terms) {
      json t;
      t["src_index"] = c.src_index;
      t["src"] = c.src_term;
      t["trg"] = c.trg_term;
      terms.push_back(std::move(t));
    }
    json rec;
    rec["id"] = entry.id;
    rec["mode"] = to_string(dict.mode());
    rec["terms"] = std::move(terms);
    out << rec.dump() << '\n';
  }
}

std::vector<HypothesisEntry> load_hypotheses(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<HypothesisEntry> hyps;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec = parse_record(path, line_no, line);
    HypothesisEntry entry;
    entry.id = require_string(rec, "id", path, line_no);
    if (!seen_ids.insert(entry.id).second) throw DuplicateId(entry.id);
    try {
      entry.hyp.stage = stage_from_string(require_string(rec, "stage", path, line_no));
    } catch (const Error& e) {
      throw ParseError(path, line_no, e.what());
    }
    entry.hyp.trg_tokens = split_whitespace(require_string(rec, "trg", path, line_no));
    if (!rec.contains("log_score") || !rec["log_score"].is_number())
      throw ParseError(path, line_no, "missing or non-numeric field 'log_score'");
    entry.hyp.log_score = rec["log_score"].get<double>();
    hyps.push_back(std::move(entry));
  }
  return hyps;
}

void save_hypotheses(const std::vector<HypothesisEntry>& hyps, const std::string& path) {
  std::ofstream out = open_out(path);
  for (const HypothesisEntry& entry : hyps) {
    json rec;
    rec["id"] = entry.id;
    rec["stage"] = to_string(entry.hyp.stage);
    rec["trg"] = join_tokens(entry.hyp.trg_tokens);
    rec["log_score"] = entry.hyp.log_score;
    out << rec.dump() << '\n';
  }
}

}  // namespace termkit
