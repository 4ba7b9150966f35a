// Shared test support: random TableScorer instances and an exhaustive
// beam-search oracle, both written against the documented decoding contract
// rather than the library internals.
#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "termkit/decoder.h"
#include "termkit/text.h"

namespace termkit::testing {

struct RandomScorerCase {
  TableScorer scorer;
  BeamConfig beam;  // saturating beam with random forbidden set
};

inline Distribution random_distribution(std::mt19937_64& rng,
                                        const std::vector<std::string>& vocab) {
  std::exponential_distribution<double> draw(1.0);
  Distribution dist;
  double total = 0.0;
  for (const auto& tok : vocab) {
    double w = (rng() % 4 == 0) ? 0.0 : draw(rng);  // sprinkle exact zeros
    dist[tok] = w;
    total += w;
  }
  if (total == 0.0) {
    dist[kEndToken] = 1.0;
    return dist;
  }
  for (auto& [tok, w] : dist) w /= total;
  return dist;
}

// vocab <= 6 tokens (incl. end), max_len <= 5, a few prefix rules, random
// default distribution, random forbidden set.
inline RandomScorerCase make_random_scorer_case(std::mt19937_64& rng) {
  static const std::vector<std::string> letters{"a", "b", "c", "d", "e"};
  std::vector<std::string> vocab;
  const std::size_t n_letters = 1 + rng() % letters.size();
  for (std::size_t i = 0; i < n_letters; ++i) vocab.push_back(letters[i]);
  vocab.push_back(kEndToken);

  std::vector<ScorerRule> rules;
  const std::size_t n_rules = rng() % 5;
  for (std::size_t r = 0; r < n_rules; ++r) {
    ScorerRule rule;
    rule.source_key = "*";
    const std::size_t plen = rng() % 3;
    for (std::size_t i = 0; i < plen; ++i)
      rule.prefix.push_back(letters[rng() % n_letters]);
    rule.dist = random_distribution(rng, vocab);
    rules.push_back(std::move(rule));
  }

  RandomScorerCase out{
      TableScorer(vocab, std::move(rules), random_distribution(rng, vocab)), BeamConfig{}};
  out.beam.beam_size = 4000;  // saturating for vocab <= 6, max_len <= 5
  out.beam.max_len = 1 + static_cast<int>(rng() % 5);
  const std::size_t n_forbidden = rng() % 3;
  for (std::size_t i = 0; i < n_forbidden; ++i)
    out.beam.forbidden.insert(letters[rng() % n_letters]);
  return out;
}

struct OracleResult {
  bool found = false;
  std::vector<std::string> tokens;
  double score = 0.0;
};

// Exhaustive enumeration of every finishable sequence under the documented
// semantics: a forbidden token is unavailable unless its probability exceeds
// the override threshold; sequences may finish via the end token (scored) or
// by running into max_len (unscored); best = (score desc, tokens lex asc).
inline OracleResult oracle_best(const Scorer& scorer, const std::vector<std::string>& source,
                                const BeamConfig& cfg) {
  OracleResult best;
  auto consider = [&](const std::vector<std::string>& tokens, double score) {
    if (!best.found || score > best.score ||
        (score == best.score && tokens < best.tokens)) {
      best.found = true;
      best.tokens = tokens;
      best.score = score;
    }
  };
  std::vector<std::string> prefix;
  std::function<void(double)> walk = [&](double score) {
    if (static_cast<int>(prefix.size()) == cfg.max_len) {
      consider(prefix, score);
      return;
    }
    const Distribution dist = scorer.next_distribution(source, prefix);
    for (const auto& [tok, p] : dist) {
      if (p <= 0.0) continue;
      if (cfg.forbidden.count(tok) > 0 && p <= cfg.override_threshold) continue;
      if (tok == kEndToken) {
        consider(prefix, score + std::log(p));
      } else {
        prefix.push_back(tok);
        walk(score + std::log(p));
        prefix.pop_back();
      }
    }
  };
  walk(0.0);
  return best;
}

}  // namespace termkit::testing
