#include "termkit/refine_ncd.h"

#include <algorithm>

#include "termkit/terminology.h"
#include "termkit/text.h"

namespace termkit {

std::vector<TermConstraint> find_violations(const std::vector<TermConstraint>& constraints,
                                            const Hypothesis& hyp) {
  std::vector<TermConstraint> unmet;
  for (const auto& c : constraints) {
    if (!term_matches(hyp.trg_tokens, c.trg_term)) unmet.push_back(c);
  }
  return unmet;
}

std::set<std::string> locate_violating_tokens(const AlignerModel& model,
                                              const SentencePair& source, const Hypothesis& hyp,
                                              const std::vector<TermConstraint>& unmet,
                                              double threshold) {
  std::set<std::string> expected;
  for (const auto& c : unmet) {
    for (const auto& tok : tokenize(c.trg_term)) expected.insert(fold_case(tok));
  }

  SentencePair pair;
  pair.id = source.id;
  pair.src_tokens = source.src_tokens;
  pair.trg_tokens = hyp.trg_tokens;
  const AlignmentLinkSet links = posterior_align(model, pair, threshold);

  std::set<std::string> tokens;
  for (const auto& c : unmet) {
    for (const auto& link : links) {
      if (link.src != static_cast<std::size_t>(c.src_index)) continue;
      const std::string& tok = hyp.trg_tokens[link.trg];
      if (expected.count(fold_case(tok)) == 0) tokens.insert(tok);
    }
  }
  return tokens;
}

NcdResult refine_ncd(const Scorer& scorer, const AlignerModel& model, const std::string& id,
                     const AnnotatedSource& source,
                     const std::vector<TermConstraint>& constraints, const Hypothesis& first_hyp,
                     const NcdConfig& config) {
  NcdResult result;
  result.hyp = first_hyp;
  result.report.hypothesis_id = id;
  result.report.unmet = find_violations(constraints, first_hyp);
  if (result.report.unmet.empty()) return result;

  auto [plain_tokens, parsed] = parse_annotated(source);
  SentencePair plain;
  plain.id = id;
  plain.src_tokens = plain_tokens;

  BeamConfig beam = config.beam;
  std::vector<TermConstraint> unmet = result.report.unmet;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    plain.trg_tokens = result.hyp.trg_tokens;
    const std::set<std::string> located =
        locate_violating_tokens(model, plain, result.hyp, unmet, config.posterior_threshold);
    std::size_t before = beam.forbidden.size();
    beam.forbidden.insert(located.begin(), located.end());
    if (beam.forbidden.size() == before) break;  // nothing new to ban
    result.report.violating_tokens.insert(located.begin(), located.end());

    result.hyp = beam_search(scorer, source, beam);
    result.hyp.stage = Stage::NCD;
    ++result.decoder_calls;

    unmet = find_violations(constraints, result.hyp);
    if (unmet.empty()) break;
  }
  return result;
}

}  // namespace termkit
