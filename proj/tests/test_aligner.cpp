#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "termkit/aligner.h"
#include "termkit/errors.h"

using namespace termkit;

namespace {

std::vector<SentencePair> make_corpus(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::vector<SentencePair> corpus;
  int k = 0;
  for (const auto& [src, trg] : pairs) {
    SentencePair pair;
    pair.id = "p" + std::to_string(k++);
    std::istringstream s(src), t(trg);
    std::string w;
    while (s >> w) pair.src_tokens.push_back(w);
    while (t >> w) pair.trg_tokens.push_back(w);
    corpus.push_back(std::move(pair));
  }
  return corpus;
}

// Straight-line reference EM over dense matrices, written independently of
// the library implementation (indexed vocabularies, plain double sums).
struct ReferenceModel {
  std::map<std::string, int> src_ids, trg_ids;
  std::vector<std::vector<double>> t;  // rows: src words then NULL; cols: trg words
  std::vector<double> log_likelihoods;

  double prob(const std::string& src, const std::string& trg) const {
    auto s = src_ids.find(src);
    auto g = trg_ids.find(trg);
    if (s == src_ids.end() || g == trg_ids.end()) return 0.0;
    return t[static_cast<std::size_t>(s->second)][static_cast<std::size_t>(g->second)];
  }
  double null_prob_of(const std::string& trg) const {
    auto g = trg_ids.find(trg);
    if (g == trg_ids.end()) return 0.0;
    return t.back()[static_cast<std::size_t>(g->second)];
  }
};

ReferenceModel reference_em(const std::vector<SentencePair>& corpus, const AlignerConfig& cfg) {
  ReferenceModel ref;
  for (const auto& pair : corpus) {
    for (const auto& w : pair.src_tokens)
      ref.src_ids.emplace(w, static_cast<int>(ref.src_ids.size()));
    for (const auto& w : pair.trg_tokens)
      ref.trg_ids.emplace(w, static_cast<int>(ref.trg_ids.size()));
  }
  const std::size_t S = ref.src_ids.size(), T = ref.trg_ids.size();
  ref.t.assign(S + 1, std::vector<double>(T, 1.0 / static_cast<double>(T)));

  auto prior_weight = [&](std::size_t m, std::size_t n, std::size_t i, std::size_t j) {
    const double mass = 1.0 - cfg.null_prob;
    if (cfg.variant == AlignerVariant::model1) return mass / static_cast<double>(m);
    double total = 0.0, mine = 0.0;
    for (std::size_t ii = 0; ii < m; ++ii) {
      double d = std::fabs(static_cast<double>(ii) / static_cast<double>(m) -
                           static_cast<double>(j) / static_cast<double>(n));
      double w = std::exp(-cfg.diagonal_tension * d);
      total += w;
      if (ii == i) mine = w;
    }
    return mass * mine / total;
  };

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    std::vector<std::vector<double>> counts(S + 1, std::vector<double>(T, 0.0));
    double ll = 0.0;
    for (const auto& pair : corpus) {
      const std::size_t m = pair.src_tokens.size(), n = pair.trg_tokens.size();
      for (std::size_t j = 0; j < n; ++j) {
        const int f = ref.trg_ids.at(pair.trg_tokens[j]);
        double denom = cfg.null_prob * ref.t[S][static_cast<std::size_t>(f)];
        for (std::size_t i = 0; i < m; ++i) {
          const int e = ref.src_ids.at(pair.src_tokens[i]);
          denom += prior_weight(m, n, i, j) * ref.t[static_cast<std::size_t>(e)]
                                                   [static_cast<std::size_t>(f)];
        }
        ll += std::log(denom);
        for (std::size_t i = 0; i < m; ++i) {
          const int e = ref.src_ids.at(pair.src_tokens[i]);
          counts[static_cast<std::size_t>(e)][static_cast<std::size_t>(f)] +=
              prior_weight(m, n, i, j) *
              ref.t[static_cast<std::size_t>(e)][static_cast<std::size_t>(f)] / denom;
        }
        counts[S][static_cast<std::size_t>(f)] +=
            cfg.null_prob * ref.t[S][static_cast<std::size_t>(f)] / denom;
      }
    }
    ref.log_likelihoods.push_back(ll);
    for (std::size_t e = 0; e <= S; ++e) {
      double total = 0.0;
      for (double c : counts[e]) total += c;
      if (total <= 0.0) {
        for (double& v : ref.t[e]) v = 0.0;
        continue;
      }
      for (std::size_t f = 0; f < T; ++f) ref.t[e][f] = counts[e][f] / total;
    }
  }
  return ref;
}

std::vector<SentencePair> random_corpus(std::mt19937_64& rng, int max_pairs = 8,
                                        int max_len = 5) {
  static const std::vector<std::string> src_words{"da", "ein", "haus", "buch", "gut", "alt"};
  static const std::vector<std::string> trg_words{"the", "a", "house", "book", "good", "old"};
  std::uniform_int_distribution<int> n_pairs(1, max_pairs), len(1, max_len);
  std::vector<SentencePair> corpus;
  const int pairs = n_pairs(rng);
  for (int p = 0; p < pairs; ++p) {
    SentencePair pair;
    pair.id = "r" + std::to_string(p);
    const int m = len(rng), n = len(rng);
    for (int i = 0; i < m; ++i) pair.src_tokens.push_back(src_words[rng() % src_words.size()]);
    for (int j = 0; j < n; ++j) pair.trg_tokens.push_back(trg_words[rng() % trg_words.size()]);
    corpus.push_back(std::move(pair));
  }
  return corpus;
}

const std::vector<SentencePair>& classic_fixture() {
  static const auto corpus = make_corpus(
      {{"das haus", "the house"}, {"das buch", "the book"}, {"ein buch", "a book"}});
  return corpus;
}

std::string argmax_trg(const AlignerModel& model, const std::string& src) {
  const auto& row = model.lexicon.at(src);
  std::string best;
  double best_p = -1.0;
  for (const auto& [trg, p] : row) {
    if (p > best_p) {
      best_p = p;
      best = trg;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("single co-occurrence forces certainty") {
  AlignerConfig cfg;
  cfg.iterations = 1;
  auto model = train(make_corpus({{"a", "x"}}), cfg);
  CHECK(model.lex_prob("a", "x") == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("two-pair corpus disambiguates a and b") {
  AlignerConfig cfg;
  cfg.iterations = 10;
  auto model = train(make_corpus({{"a b", "x y"}, {"a", "x"}}), cfg);
  CHECK(model.lex_prob("a", "x") > 0.95);
  CHECK(model.lex_prob("b", "y") > 0.95);
}

TEST_CASE("classic fixture learns the expected argmax translations") {
  AlignerConfig cfg;
  cfg.iterations = 20;
  auto model = train(classic_fixture(), cfg);
  CHECK(argmax_trg(model, "das") == "the");
  CHECK(argmax_trg(model, "buch") == "book");
  REQUIRE(model.log_likelihoods.size() == 20);
  for (std::size_t i = 1; i < model.log_likelihoods.size(); ++i)
    CHECK(model.log_likelihoods[i] >= model.log_likelihoods[i - 1] - 1e-9);
}

TEST_CASE("lexicon rows stay stochastic") {
  AlignerConfig cfg;
  cfg.iterations = 7;
  auto model = train(classic_fixture(), cfg);
  for (const auto& [src, row] : model.lexicon) {
    double total = 0.0;
    for (const auto& [trg, p] : row) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      total += p;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("EM agrees with the dense reference implementation") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    auto corpus = random_corpus(rng);
    AlignerConfig cfg;
    cfg.iterations = 4;
    cfg.variant = (trial % 2 == 0) ? AlignerVariant::model1 : AlignerVariant::diagonal;
    cfg.null_prob = (trial % 3 == 0) ? 0.0 : 0.08;
    cfg.diagonal_tension = 4.0;

    auto model = train(corpus, cfg);
    auto ref = reference_em(corpus, cfg);

    REQUIRE(model.log_likelihoods.size() == ref.log_likelihoods.size());
    for (std::size_t i = 0; i < ref.log_likelihoods.size(); ++i)
      CHECK(model.log_likelihoods[i] == doctest::Approx(ref.log_likelihoods[i]).epsilon(1e-9));

    for (const auto& [src, row] : model.lexicon)
      for (const auto& [trg, p] : row)
        CHECK(p == doctest::Approx(ref.prob(src, trg)).epsilon(1e-9));
    // And nothing in the reference is missing from the model.
    for (const auto& [src, sid] : ref.src_ids)
      for (const auto& [trg, tid] : ref.trg_ids)
        if (ref.prob(src, trg) > 1e-12)
          CHECK(model.lex_prob(src, trg) == doctest::Approx(ref.prob(src, trg)).epsilon(1e-9));
    for (const auto& [trg, tid] : ref.trg_ids)
      if (ref.null_prob_of(trg) > 1e-12)
        CHECK(model.null_lex_prob(trg) == doctest::Approx(ref.null_prob_of(trg)).epsilon(1e-9));
  }
}

TEST_CASE("log-likelihood never decreases across iterations") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    auto corpus = random_corpus(rng);
    AlignerConfig cfg;
    cfg.iterations = 8;
    cfg.variant = (trial % 2 == 0) ? AlignerVariant::model1 : AlignerVariant::diagonal;
    cfg.null_prob = (trial % 4 == 0) ? 0.0 : 0.08;
    auto model = train(corpus, cfg);
    for (std::size_t i = 1; i < model.log_likelihoods.size(); ++i)
      CHECK(model.log_likelihoods[i] >= model.log_likelihoods[i - 1] - 1e-9);
  }
}

TEST_CASE("training is invariant to the worker count") {
  std::mt19937_64 rng(4242);
  std::vector<SentencePair> corpus;
  for (int p = 0; p < 600; ++p) {  // several shards' worth
    auto chunk = random_corpus(rng, 1, 5);
    chunk[0].id = "w" + std::to_string(p);
    corpus.push_back(chunk[0]);
  }
  AlignerConfig cfg;
  cfg.iterations = 3;
  cfg.jobs = 1;
  auto one = train(corpus, cfg);
  cfg.jobs = 4;
  auto four = train(corpus, cfg);

  auto dir = std::filesystem::temp_directory_path() / "termkit_aligner_tests";
  std::filesystem::create_directories(dir);
  save_model(one, (dir / "one.json").string());
  save_model(four, (dir / "four.json").string());
  std::ifstream a(dir / "one.json"), b(dir / "four.json");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
  CHECK(one.log_likelihoods == four.log_likelihoods);
}

TEST_CASE("viterbi on the classic fixture") {
  AlignerConfig cfg;
  cfg.iterations = 20;
  auto model = train(classic_fixture(), cfg);
  auto links = viterbi_align(model, classic_fixture()[0]);  // das haus / the house
  CHECK(links == AlignmentLinkSet{{0, 0}, {1, 1}});
}

TEST_CASE("viterbi breaks source ties toward the smaller index") {
  AlignerModel model;
  model.config.null_prob = 0.0;
  model.lexicon["a"]["x"] = 1.0;
  SentencePair pair{"t", {"a", "a"}, {"x"}};
  CHECK(viterbi_align(model, pair) == AlignmentLinkSet{{0, 0}});
}

TEST_CASE("NULL wins exact ties and dominates unknown words") {
  // Unknown target word: source score is prior * 1e-9; NULL score is
  // null_prob * 1e-9. With null_prob > prior mass per word, NULL wins.
  AlignerModel model;
  model.config.null_prob = 0.6;
  model.lexicon["a"]["x"] = 1.0;
  SentencePair pair{"t", {"a"}, {"zzz"}};
  CHECK(viterbi_align(model, pair).empty());

  // Exact tie between NULL and a source word keeps the position unaligned.
  AlignerModel tie;
  tie.config.null_prob = 0.5;
  tie.lexicon["a"]["x"] = 1.0;
  tie.null_lexicon["x"] = 1.0;
  SentencePair tp{"t", {"a"}, {"x"}};
  // null: 0.5 * 1.0 = 0.5; source: (1 - 0.5)/1 * 1.0 = 0.5 — a dead heat.
  CHECK(viterbi_align(tie, tp).empty());
}

TEST_CASE("posterior on the classic fixture at threshold 0.5") {
  AlignerConfig cfg;
  cfg.iterations = 20;
  auto model = train(classic_fixture(), cfg);
  auto links = posterior_align(model, classic_fixture()[1], 0.5);  // das buch / the book
  CHECK(links == AlignmentLinkSet{{0, 0}, {1, 1}});
}

TEST_CASE("posterior links grow as the threshold drops") {
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 20; ++trial) {
    auto corpus = random_corpus(rng);
    AlignerConfig cfg;
    cfg.iterations = 5;
    auto model = train(corpus, cfg);
    for (const auto& pair : corpus) {
      auto strict = posterior_align(model, pair, 0.7);
      auto mid = posterior_align(model, pair, 0.3);
      auto loose = posterior_align(model, pair, 0.05);
      for (const auto& link : strict) CHECK(mid.count(link) == 1);
      for (const auto& link : mid) CHECK(loose.count(link) == 1);
    }
  }
}

TEST_CASE("posterior threshold 1.0 keeps only certain links") {
  AlignerModel model;
  model.config.null_prob = 0.0;
  model.lexicon["a"]["x"] = 1.0;
  model.lexicon["b"]["y"] = 1.0;
  SentencePair pair{"t", {"a"}, {"x"}};
  CHECK(posterior_align(model, pair, 1.0) == AlignmentLinkSet{{0, 0}});
}

TEST_CASE("unknown words smooth to 1e-9") {
  AlignerModel model;
  model.lexicon["a"]["x"] = 1.0;
  CHECK(model.lex_prob("unseen", "x") == doctest::Approx(1e-9));
  CHECK(model.lex_prob("a", "unseen") == doctest::Approx(1e-9));
  CHECK(model.null_lex_prob("unseen") == doctest::Approx(1e-9));
}

TEST_CASE("model persistence round-trips") {
  AlignerConfig cfg;
  cfg.iterations = 6;
  cfg.variant = AlignerVariant::diagonal;
  cfg.diagonal_tension = 2.5;
  auto model = train(classic_fixture(), cfg);

  auto dir = std::filesystem::temp_directory_path() / "termkit_aligner_tests";
  std::filesystem::create_directories(dir);
  auto path = (dir / "model_rt.json").string();
  save_model(model, path);
  auto loaded = load_model(path);
  CHECK(loaded.lexicon == model.lexicon);
  CHECK(loaded.null_lexicon == model.null_lexicon);
  CHECK(loaded.log_likelihoods == model.log_likelihoods);
  CHECK(loaded.config.variant == model.config.variant);
  CHECK(loaded.config.diagonal_tension == model.config.diagonal_tension);
}

TEST_CASE("load_model rejects foreign files") {
  auto dir = std::filesystem::temp_directory_path() / "termkit_aligner_tests";
  std::filesystem::create_directories(dir);
  auto path = (dir / "bogus.json").string();
  std::ofstream(path) << "{\"format\":\"other\",\"version\":1}\n";
  CHECK_THROWS_AS(load_model(path), ParseError);
}

TEST_CASE("empty inputs are rejected") {
  AlignerConfig cfg;
  CHECK_THROWS_AS(train({}, cfg), EmptyCorpus);
  CHECK_THROWS_AS(train(make_corpus({{"", "x"}}), cfg), EmptySentence);
  CHECK_THROWS_AS(train(make_corpus({{"a", ""}}), cfg), EmptySentence);
}

TEST_CASE("diagonal prior pulls alignments toward the diagonal") {
  // One ambiguous pair: under Model 1 both sources are symmetric; the
  // diagonal prior must break the symmetry toward matching positions.
  AlignerConfig cfg;
  cfg.iterations = 1;
  cfg.variant = AlignerVariant::diagonal;
  auto model = train(make_corpus({{"a b", "x y"}}), cfg);
  CHECK(model.lex_prob("a", "x") > model.lex_prob("b", "x"));
  CHECK(model.lex_prob("b", "y") > model.lex_prob("a", "y"));
}
