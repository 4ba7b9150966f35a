#include "termkit/decoder.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "termkit/errors.h"
#include "termkit/text.h"

namespace termkit {

using nlohmann::json;

namespace {

void validate_distribution(const Distribution& dist, const std::set<std::string>& vocab,
                           const std::string& context) {
  double total = 0.0;
  for (const auto& [token, p] : dist) {
    if (p < 0.0) throw Error(context + ": negative probability for '" + token + "'");
    if (!vocab.empty() && !vocab.count(token))
      throw Error(context + ": token '" + token + "' not in vocabulary");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-9)
    throw Error(context + ": distribution sums to " + std::to_string(total));
}

struct BeamItem {
  std::vector<std::string> tokens;
  double score = 0.0;
};

bool better(const BeamItem& a, const BeamItem& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

}  // namespace

TableScorer::TableScorer(std::vector<std::string> vocabulary, std::vector<ScorerRule> rules,
                         Distribution default_dist, bool copy_markers)
    : vocabulary_(std::move(vocabulary)),
      rules_(std::move(rules)),
      default_dist_(std::move(default_dist)),
      copy_markers_(copy_markers) {
  std::set<std::string> vocab(vocabulary_.begin(), vocabulary_.end());
  if (!vocab.count(kEndToken))
    throw Error(std::string("scorer vocabulary must include '") + kEndToken + "'");
  for (std::size_t r = 0; r < rules_.size(); ++r)
    validate_distribution(rules_[r].dist, vocab, "rule " + std::to_string(r));
  validate_distribution(default_dist_, vocab, "default distribution");
}

TableScorer TableScorer::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ParseError(path, 0, std::string("invalid JSON: ") + e.what());
  }
  std::vector<ScorerRule> rules;
  for (const json& rule : doc.value("rules", json::array())) {
    ScorerRule r;
    r.source_key = rule.value("source", "*");
    r.prefix = rule.value("prefix", std::vector<std::string>{});
    r.dist = rule.at("dist").get<Distribution>();
    rules.push_back(std::move(r));
  }
  return TableScorer(doc.at("vocabulary").get<std::vector<std::string>>(), std::move(rules),
                     doc.at("default").get<Distribution>(), doc.value("copy_markers", false));
}

Distribution TableScorer::next_distribution(const std::vector<std::string>& source,
                                            const std::vector<std::string>& prefix) const {
  if (copy_markers_) {
    auto [plain, constraints] = parse_annotated(AnnotatedSource{source});
    std::vector<std::string> pending;
    for (const TermConstraint& c : constraints) {
      for (const std::string& tok : split_whitespace(c.trg_term)) pending.push_back(tok);
    }
    if (prefix.size() < pending.size()) return {{pending[prefix.size()], 1.0}};
  }
  const std::string source_key = join_tokens(source);
  for (const ScorerRule& rule : rules_) {
    if (rule.source_key != "*" && rule.source_key != source_key) continue;
    if (rule.prefix == prefix) return rule.dist;
  }
  return default_dist_;
}

Distribution apply_negative_constraints(const Distribution& dist,
                                        const std::set<std::string>& forbidden,
                                        double threshold) {
  Distribution out = dist;
  for (const std::string& token : forbidden) {
    auto it = out.find(token);
    if (it != out.end() && it->second <= threshold) it->second = 0.0;
  }
  return out;
}

Hypothesis beam_search(const Scorer& scorer, const AnnotatedSource& source,
                       const BeamConfig& config) {
  std::vector<BeamItem> live{BeamItem{}};
  std::vector<BeamItem> finished;

  while (!live.empty()) {
    std::vector<BeamItem> candidates;
    for (const BeamItem& item : live) {
      Distribution dist = scorer.next_distribution(source.tokens, item.tokens);
      Distribution masked =
          apply_negative_constraints(dist, config.forbidden, config.override_threshold);
      for (const auto& [token, p] : masked) {
        if (p <= 0.0) continue;
        if (token == kEndToken) {
          finished.push_back({item.tokens, item.score + std::log(p)});
        } else {
          BeamItem next{item.tokens, item.score + std::log(p)};
          next.tokens.push_back(token);
          candidates.push_back(std::move(next));
        }
      }
    }
    std::sort(candidates.begin(), candidates.end(), better);
    if (candidates.size() > static_cast<std::size_t>(config.beam_size))
      candidates.resize(static_cast<std::size_t>(config.beam_size));
    live = std::move(candidates);
    if (!live.empty() && live.front().tokens.size() >= static_cast<std::size_t>(config.max_len)) {
      // Length budget exhausted: bank what survives, without an end score.
      for (BeamItem& item : live) finished.push_back(std::move(item));
      live.clear();
    }
  }

  if (finished.empty()) throw NoFinishedHypothesis();

  auto rank = [&](const BeamItem& item) {
    if (!config.length_norm) return item.score;
    return item.score / static_cast<double>(std::max<std::size_t>(1, item.tokens.size()));
  };
  const BeamItem* best = &finished.front();
  for (const BeamItem& item : finished) {
    double a = rank(item);
    double b = rank(*best);
    if (a > b || (a == b && item.tokens < best->tokens)) best = &item;
  }
  return Hypothesis{best->tokens, best->score, Stage::TAT};
}

}  // namespace termkit
