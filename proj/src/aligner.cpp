#include "termkit/aligner.h"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "termkit/errors.h"
#include "termkit/parallel.h"

namespace termkit {

using nlohmann::json;

namespace {

constexpr double kUnknownProb = 1e-9;

struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

// Source-position prior weights for target position j; they sum to
// 1 - null_prob. The diagonal variant reweights by exp(-lambda * |i/m - j/n|)
// and renormalizes per target position.
void source_priors(const AlignerConfig& config, std::size_t m, std::size_t n, std::size_t j,
                   std::vector<double>& out) {
  out.resize(m);
  const double mass = 1.0 - config.null_prob;
  if (config.variant == AlignerVariant::model1) {
    const double w = mass / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = w;
    return;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double d = std::fabs(static_cast<double>(i) / static_cast<double>(m) -
                         static_cast<double>(j) / static_cast<double>(n));
    out[i] = std::exp(-config.diagonal_tension * d);
    total += out[i];
  }
  for (std::size_t i = 0; i < m; ++i) out[i] = mass * out[i] / total;
}

using CountTable = std::map<std::string, std::map<std::string, double>>;

struct ShardCounts {
  CountTable counts;
  std::map<std::string, double> null_counts;
  KahanSum log_likelihood;
};

}  // namespace

std::string to_string(AlignerVariant variant) {
  return variant == AlignerVariant::model1 ? "model1" : "diagonal";
}

AlignerVariant aligner_variant_from_string(const std::string& s) {
  if (s == "model1") return AlignerVariant::model1;
  if (s == "diagonal") return AlignerVariant::diagonal;
  throw Error("unknown aligner variant: '" + s + "'");
}

double AlignerModel::lex_prob(const std::string& src, const std::string& trg) const {
  auto row = lexicon.find(src);
  if (row == lexicon.end()) return kUnknownProb;
  auto it = row->second.find(trg);
  return it == row->second.end() ? kUnknownProb : it->second;
}

double AlignerModel::null_lex_prob(const std::string& trg) const {
  auto it = null_lexicon.find(trg);
  return it == null_lexicon.end() ? kUnknownProb : it->second;
}

AlignerModel train(const std::vector<SentencePair>& corpus, const AlignerConfig& config) {
  if (corpus.empty()) throw EmptyCorpus();
  for (const SentencePair& pair : corpus)
    if (pair.src_tokens.empty() || pair.trg_tokens.empty()) throw EmptySentence(pair.id);

  std::set<std::string> trg_vocab;
  for (const SentencePair& pair : corpus)
    trg_vocab.insert(pair.trg_tokens.begin(), pair.trg_tokens.end());
  const double uniform_init = 1.0 / static_cast<double>(trg_vocab.size());

  AlignerModel model;
  model.config = config;

  // During the first iteration every translation probability is the uniform
  // init; afterwards absent pairs are exact zeros (they can never gain counts).
  auto train_prob = [&](const std::string& src, const std::string& trg) -> double {
    if (model.lexicon.empty()) return uniform_init;
    auto row = model.lexicon.find(src);
    if (row == model.lexicon.end()) return 0.0;
    auto it = row->second.find(trg);
    return it == row->second.end() ? 0.0 : it->second;
  };
  auto train_null_prob = [&](const std::string& trg) -> double {
    if (model.lexicon.empty() && model.null_lexicon.empty()) return uniform_init;
    auto it = model.null_lexicon.find(trg);
    return it == model.null_lexicon.end() ? 0.0 : it->second;
  };

  const std::vector<ShardRange> shards = shard_ranges(corpus.size());

  for (int iteration = 0; iteration < config.iterations; ++iteration) {
    std::vector<ShardCounts> shard_counts(shards.size());

    parallel_for_shards(shards.size(), config.jobs, [&](std::size_t s) {
      ShardCounts& local = shard_counts[s];
      std::vector<double> priors;
      for (std::size_t k = shards[s].begin; k < shards[s].end; ++k) {
        const SentencePair& pair = corpus[k];
        const std::size_t m = pair.src_tokens.size();
        const std::size_t n = pair.trg_tokens.size();
        for (std::size_t j = 0; j < n; ++j) {
          const std::string& trg = pair.trg_tokens[j];
          source_priors(config, m, n, j, priors);
          const double null_score = config.null_prob * train_null_prob(trg);
          KahanSum denom;
          denom.add(null_score);
          for (std::size_t i = 0; i < m; ++i)
            denom.add(priors[i] * train_prob(pair.src_tokens[i], trg));
          local.log_likelihood.add(std::log(denom.sum));
          for (std::size_t i = 0; i < m; ++i) {
            double score = priors[i] * train_prob(pair.src_tokens[i], trg);
            if (score > 0.0) local.counts[pair.src_tokens[i]][trg] += score / denom.sum;
          }
          if (null_score > 0.0) local.null_counts[trg] += null_score / denom.sum;
        }
      }
    });

    // Merge in shard order, then normalize rows.
    CountTable counts;
    std::map<std::string, double> null_counts;
    KahanSum log_likelihood;
    for (const ShardCounts& local : shard_counts) {
      for (const auto& [src, row] : local.counts)
        for (const auto& [trg, c] : row) counts[src][trg] += c;
      for (const auto& [trg, c] : local.null_counts) null_counts[trg] += c;
      log_likelihood.add(local.log_likelihood.sum);
    }
    model.log_likelihoods.push_back(log_likelihood.sum);

    model.lexicon.clear();
    for (const auto& [src, row] : counts) {
      KahanSum total;
      for (const auto& [trg, c] : row) total.add(c);
      if (total.sum <= 0.0) continue;
      auto& out_row = model.lexicon[src];
      for (const auto& [trg, c] : row) out_row[trg] = c / total.sum;
    }
    model.null_lexicon.clear();
    KahanSum null_total;
    for (const auto& [trg, c] : null_counts) null_total.add(c);
    if (null_total.sum > 0.0)
      for (const auto& [trg, c] : null_counts) model.null_lexicon[trg] = c / null_total.sum;
  }
  return model;
}

AlignmentLinkSet viterbi_align(const AlignerModel& model, const SentencePair& pair) {
  AlignmentLinkSet links;
  const std::size_t m = pair.src_tokens.size();
  const std::size_t n = pair.trg_tokens.size();
  std::vector<double> priors;
  for (std::size_t j = 0; j < n; ++j) {
    const std::string& trg = pair.trg_tokens[j];
    source_priors(model.config, m, n, j, priors);
    double best = model.config.null_prob * model.null_lex_prob(trg);
    bool aligned = false;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < m; ++i) {
      double score = priors[i] * model.lex_prob(pair.src_tokens[i], trg);
      if (score > best) {
        best = score;
        best_i = i;
        aligned = true;
      }
    }
    if (aligned) links.insert({best_i, j});
  }
  return links;
}

AlignmentLinkSet posterior_align(const AlignerModel& model, const SentencePair& pair,
                                 double threshold) {
  AlignmentLinkSet links;
  const std::size_t m = pair.src_tokens.size();
  const std::size_t n = pair.trg_tokens.size();
  std::vector<double> priors;
  std::vector<double> scores(m);
  for (std::size_t j = 0; j < n; ++j) {
    const std::string& trg = pair.trg_tokens[j];
    source_priors(model.config, m, n, j, priors);
    KahanSum denom;
    denom.add(model.config.null_prob * model.null_lex_prob(trg));
    for (std::size_t i = 0; i < m; ++i) {
      scores[i] = priors[i] * model.lex_prob(pair.src_tokens[i], trg);
      denom.add(scores[i]);
    }
    for (std::size_t i = 0; i < m; ++i)
      if (scores[i] / denom.sum >= threshold) links.insert({i, j});
  }
  return links;
}

void save_model(const AlignerModel& model, const std::string& path) {
  json doc;
  doc["format"] = "termkit-aligner";
  doc["version"] = 1;
  doc["config"] = {{"iterations", model.config.iterations},
                   {"variant", to_string(model.config.variant)},
                   {"diagonal_tension", model.config.diagonal_tension},
                   {"null_prob", model.config.null_prob},
                   {"posterior_threshold", model.config.posterior_threshold}};
  doc["log_likelihoods"] = model.log_likelihoods;
  json lexicon = json::array();
  for (const auto& [src, row] : model.lexicon)
    for (const auto& [trg, p] : row) lexicon.push_back({src, trg, p});
  doc["lexicon"] = std::move(lexicon);
  json null_lexicon = json::array();
  for (const auto& [trg, p] : model.null_lexicon) null_lexicon.push_back({trg, p});
  doc["null_lexicon"] = std::move(null_lexicon);

  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << doc.dump(2) << '\n';
}

AlignerModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ParseError(path, 0, std::string("invalid JSON: ") + e.what());
  }
  if (doc.value("format", "") != "termkit-aligner" || doc.value("version", 0) != 1)
    throw ParseError(path, 0, "not a termkit-aligner v1 model file");

  AlignerModel model;
  const json& cfg = doc.at("config");
  model.config.iterations = cfg.at("iterations").get<int>();
  model.config.variant = aligner_variant_from_string(cfg.at("variant").get<std::string>());
  model.config.diagonal_tension = cfg.at("diagonal_tension").get<double>();
  model.config.null_prob = cfg.at("null_prob").get<double>();
  model.config.posterior_threshold = cfg.at("posterior_threshold").get<double>();
  model.log_likelihoods = doc.at("log_likelihoods").get<std::vector<double>>();
  for (const json& row : doc.at("lexicon"))
    model.lexicon[row.at(0).get<std::string>()][row.at(1).get<std::string>()] =
        row.at(2).get<double>();
  for (const json& row : doc.at("null_lexicon"))
    model.null_lexicon[row.at(0).get<std::string>()] = row.at(1).get<double>();
  return model;
}

}  // namespace termkit
