#include "termkit/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

#include <json.hpp>

#include "termkit/errors.h"
#include "termkit/text.h"

namespace termkit {

using nlohmann::json;

RecallReport term_recall(const std::vector<HypothesisEntry>& hyps, const TermDictionary& dict) {
  std::map<std::string, const Hypothesis*> by_id;
  for (const auto& entry : hyps) by_id[entry.id] = &entry.hyp;

  RecallReport report;
  for (const auto& record : dict.entries()) {
    auto it = by_id.find(record.id);
    if (it == by_id.end()) throw MissingHypothesis(record.id);
    SentenceRecall sentence;
    sentence.id = record.id;
    for (const auto& term : record.terms) {
      ++sentence.total;
      if (term_matches(it->second->trg_tokens, term.trg_term)) ++sentence.matched;
    }
    report.total_constraints += sentence.total;
    report.matched += sentence.matched;
    report.per_sentence.push_back(std::move(sentence));
  }
  report.recall = report.total_constraints == 0
                      ? 1.0
                      : static_cast<double>(report.matched) /
                            static_cast<double>(report.total_constraints);
  return report;
}

namespace {

// n-grams joined on an unprintable separator so token boundaries stay exact.
std::map<std::string, std::size_t> ngram_counts(const std::vector<std::string>& tokens,
                                                std::size_t n) {
  std::map<std::string, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      if (k) key += '\x1f';
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

BleuReport bleu(const std::vector<std::vector<std::string>>& hyps,
                const std::vector<std::vector<std::string>>& refs) {
  if (hyps.size() != refs.size()) throw LengthMismatch(hyps.size(), refs.size());

  BleuReport report;
  std::array<std::size_t, 4> matched{};
  std::array<std::size_t, 4> total{};
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    report.hyp_length += hyps[s].size();
    report.ref_length += refs[s].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto hyp_counts = ngram_counts(hyps[s], n);
      const auto ref_counts = ngram_counts(refs[s], n);
      for (const auto& [gram, count] : hyp_counts) {
        total[n - 1] += count;
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }

  bool any_zero = false;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    report.precisions[n] = total[n] == 0 ? 0.0
                                         : static_cast<double>(matched[n]) /
                                               static_cast<double>(total[n]);
    if (report.precisions[n] <= 0.0) {
      any_zero = true;
    } else {
      log_sum += std::log(report.precisions[n]);
    }
  }

  if (report.hyp_length == 0) {
    report.brevity_penalty = 0.0;
  } else if (report.hyp_length >= report.ref_length) {
    report.brevity_penalty = 1.0;
  } else {
    report.brevity_penalty = std::exp(1.0 - static_cast<double>(report.ref_length) /
                                                static_cast<double>(report.hyp_length));
  }

  report.score = any_zero ? 0.0 : 100.0 * report.brevity_penalty * std::exp(log_sum / 4.0);
  return report;
}

ComparisonReport make_report(std::vector<SystemReport> rows) {
  std::sort(rows.begin(), rows.end(), [](const SystemReport& a, const SystemReport& b) {
    return std::tie(a.mode, a.model, a.refine) < std::tie(b.mode, b.model, b.refine);
  });
  return ComparisonReport{std::move(rows)};
}

namespace {

json recall_to_json(const RecallReport& r) {
  json sentences = json::array();
  for (const auto& s : r.per_sentence)
    sentences.push_back(json{{"id", s.id}, {"total", s.total}, {"matched", s.matched}});
  return json{{"total_constraints", r.total_constraints},
              {"matched", r.matched},
              {"recall", r.recall},
              {"per_sentence", sentences}};
}

RecallReport recall_from_json(const json& j) {
  RecallReport r;
  r.total_constraints = j.at("total_constraints").get<std::size_t>();
  r.matched = j.at("matched").get<std::size_t>();
  r.recall = j.at("recall").get<double>();
  for (const auto& s : j.at("per_sentence")) {
    r.per_sentence.push_back(SentenceRecall{s.at("id").get<std::string>(),
                                            s.at("total").get<std::size_t>(),
                                            s.at("matched").get<std::size_t>()});
  }
  return r;
}

json bleu_to_json(const BleuReport& r) {
  return json{{"score", r.score},
              {"precisions", r.precisions},
              {"brevity_penalty", r.brevity_penalty},
              {"hyp_length", r.hyp_length},
              {"ref_length", r.ref_length}};
}

BleuReport bleu_from_json(const json& j) {
  BleuReport r;
  r.score = j.at("score").get<double>();
  r.precisions = j.at("precisions").get<std::array<double, 4>>();
  r.brevity_penalty = j.at("brevity_penalty").get<double>();
  r.hyp_length = j.at("hyp_length").get<std::size_t>();
  r.ref_length = j.at("ref_length").get<std::size_t>();
  return r;
}

}  // namespace

std::string report_to_json(const ComparisonReport& report) {
  json rows = json::array();
  for (const auto& row : report.rows) {
    json j{{"mode", row.mode},
           {"model", row.model},
           {"refine", row.refine},
           {"recall", recall_to_json(row.recall)}};
    if (row.bleu.has_value()) j["bleu"] = bleu_to_json(*row.bleu);
    rows.push_back(std::move(j));
  }
  return json{{"rows", rows}}.dump(2);
}

ComparisonReport report_from_json(const std::string& text) {
  json doc = json::parse(text);
  std::vector<SystemReport> rows;
  for (const auto& j : doc.at("rows")) {
    SystemReport row;
    row.mode = j.at("mode").get<std::string>();
    row.model = j.at("model").get<std::string>();
    row.refine = j.at("refine").get<std::string>();
    row.recall = recall_from_json(j.at("recall"));
    if (j.contains("bleu")) row.bleu = bleu_from_json(j.at("bleu"));
    rows.push_back(std::move(row));
  }
  return make_report(std::move(rows));
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
  return buf;
}

std::string render_report(const ComparisonReport& report) {
  std::vector<std::array<std::string, 5>> cells;
  cells.push_back({"Mode", "Model", "Refine", "Recall", "BLEU"});
  for (const auto& row : report.rows) {
    char bleu_buf[32] = "-";
    if (row.bleu.has_value()) std::snprintf(bleu_buf, sizeof(bleu_buf), "%.2f", row.bleu->score);
    cells.push_back(
        {row.mode, row.model, row.refine, format_percent(row.recall.recall), bleu_buf});
  }

  std::array<std::size_t, 5> width{};
  for (const auto& row : cells)
    for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], row[c].size());

  std::string out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < 5; ++c) {
      if (c) out += "  ";
      out += row[c];
      if (c + 1 < 5) out.append(width[c] - row[c].size(), ' ');
    }
    out += '\n';
  }
  return out;
}

}  // namespace termkit
