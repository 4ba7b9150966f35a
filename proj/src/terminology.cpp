#include "termkit/terminology.h"

#include <map>
#include <set>

#include "termkit/errors.h"
#include "termkit/text.h"

namespace termkit {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void validate_constraints(const SentencePair& pair,
                          const std::vector<TermConstraint>& constraints, AnnotateMode mode) {
  std::set<std::size_t> seen;
  for (const TermConstraint& c : constraints) {
    if (c.src_index >= pair.src_tokens.size())
      throw IndexOutOfRange(c.src_index, pair.src_tokens.size());
    if (!seen.insert(c.src_index).second) throw DuplicateIndex(c.src_index);
    if (mode == AnnotateMode::append && pair.src_tokens[c.src_index] != c.src_term)
      throw SourceMismatch(c.src_term, pair.src_tokens[c.src_index]);
    if (split_whitespace(c.trg_term).empty())
      throw MalformedAnnotation("empty target term for source index " +
                                std::to_string(c.src_index));
  }
}

}  // namespace

std::string to_string(AnnotateMode mode) {
  return mode == AnnotateMode::append ? "append" : "replace";
}

AnnotateMode annotate_mode_from_string(const std::string& s) {
  if (s == "append") return AnnotateMode::append;
  if (s == "replace") return AnnotateMode::replace;
  throw Error("unknown annotation mode: '" + s + "'");
}

std::vector<TermConstraint> extract_bijective(const SentencePair& pair,
                                              const AlignmentLinkSet& links) {
  std::map<std::size_t, std::size_t> src_degree;
  std::map<std::size_t, std::size_t> trg_degree;
  for (const AlignmentLink& link : links) {
    if (link.src >= pair.src_tokens.size())
      throw IndexOutOfRange(link.src, pair.src_tokens.size());
    if (link.trg >= pair.trg_tokens.size())
      throw IndexOutOfRange(link.trg, pair.trg_tokens.size());
    ++src_degree[link.src];
    ++trg_degree[link.trg];
  }
  std::vector<TermConstraint> constraints;
  for (const AlignmentLink& link : links) {
    if (src_degree[link.src] != 1 || trg_degree[link.trg] != 1) continue;
    const std::string& src = pair.src_tokens[link.src];
    const std::string& trg = pair.trg_tokens[link.trg];
    if (fold_case(src) == fold_case(trg)) continue;  // trivial mapping
    constraints.push_back({link.src, src, trg});
  }
  // Links iterate sorted by (src, trg), so constraints are already in
  // ascending source-index order.
  return constraints;
}

AnnotatedSource annotate_inline(const SentencePair& pair,
                                const std::vector<TermConstraint>& constraints,
                                AnnotateMode mode) {
  validate_constraints(pair, constraints, mode);
  std::map<std::size_t, const TermConstraint*> by_index;
  for (const TermConstraint& c : constraints) by_index[c.src_index] = &c;

  AnnotatedSource out;
  out.tokens.reserve(pair.src_tokens.size() + 3 * constraints.size());
  for (std::size_t i = 0; i < pair.src_tokens.size(); ++i) {
    auto it = by_index.find(i);
    if (it == by_index.end()) {
      out.tokens.push_back(pair.src_tokens[i]);
      continue;
    }
    const std::vector<std::string> payload = split_whitespace(it->second->trg_term);
    if (mode == AnnotateMode::append) {
      out.tokens.push_back(pair.src_tokens[i]);
      out.tokens.push_back(kTargetMarker);
      out.tokens.insert(out.tokens.end(), payload.begin(), payload.end());
      out.tokens.push_back(kDoneMarker);
    } else {
      out.tokens.insert(out.tokens.end(), payload.begin(), payload.end());
    }
  }
  return out;
}

std::pair<std::vector<std::string>, std::vector<TermConstraint>> parse_annotated(
    const AnnotatedSource& annotated) {
  std::vector<std::string> plain;
  std::vector<TermConstraint> constraints;
  bool open = false;
  std::vector<std::string> payload;
  for (const std::string& tok : annotated.tokens) {
    if (tok == kTargetMarker) {
      if (open) throw NestedMarkers();
      if (plain.empty()) throw MalformedAnnotation("marker region without a source token");
      open = true;
      payload.clear();
    } else if (tok == kDoneMarker) {
      if (!open) throw UnbalancedMarkers("'__done__' without matching '__target__'");
      if (payload.empty()) throw MalformedAnnotation("empty marker payload");
      const std::size_t index = plain.size() - 1;
      constraints.push_back({index, plain[index], join_tokens(payload)});
      open = false;
    } else if (open) {
      payload.push_back(tok);
    } else {
      plain.push_back(tok);
    }
  }
  if (open) throw UnbalancedMarkers("unterminated '__target__' region");
  return {std::move(plain), std::move(constraints)};
}

bool candidate_selected(std::uint64_t seed, const std::string& id, std::size_t src_index,
                        double probability) {
  std::uint64_t h =
      splitmix64(seed ^ splitmix64(fnv1a(id) ^ splitmix64(static_cast<std::uint64_t>(src_index))));
  double u = static_cast<double>(h >> 11) * 0x1.0p-53;  // uniform in [0, 1)
  return u < probability;
}

SampledAnnotations sample_annotations(const std::vector<SentencePair>& corpus,
                                      const std::vector<AlignmentLinkSet>& alignments,
                                      const AnnotationConfig& config) {
  if (corpus.size() != alignments.size())
    throw LengthMismatch(corpus.size(), alignments.size());
  SampledAnnotations out;
  out.annotated.reserve(corpus.size());
  out.selected.reserve(corpus.size());
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    const SentencePair& pair = corpus[k];
    std::vector<TermConstraint> candidates = extract_bijective(pair, alignments[k]);
    std::vector<TermConstraint> selected;
    for (const TermConstraint& c : candidates)
      if (candidate_selected(config.seed, pair.id, c.src_index, config.probability))
        selected.push_back(c);
    out.annotated.push_back(annotate_inline(pair, selected, config.mode));
    out.selected.push_back(std::move(selected));
  }
  return out;
}

std::vector<AnnotatedSource> sample_training_annotations(
    const std::vector<SentencePair>& corpus, const std::vector<AlignmentLinkSet>& alignments,
    const AnnotationConfig& config) {
  return sample_annotations(corpus, alignments, config).annotated;
}

}  // namespace termkit
