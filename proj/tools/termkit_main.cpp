// termkit: terminology-constrained translation pipeline tools.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "termkit/aligner.h"
#include "termkit/corpus.h"
#include "termkit/decoder.h"
#include "termkit/errors.h"
#include "termkit/eval.h"
#include "termkit/llm_refine.h"
#include "termkit/parallel.h"
#include "termkit/pipeline.h"
#include "termkit/refine_ncd.h"
#include "termkit/terminology.h"
#include "termkit/text.h"

namespace {

using namespace termkit;
using nlohmann::json;

int cmd_align(const std::string& corpus_path, const std::string& out_alignments,
              const std::string& out_model, const AlignerConfig& config, bool posterior,
              bool verbose) {
  const auto corpus = load_corpus(corpus_path);
  const AlignerModel model = train(corpus, config);
  if (verbose) {
    for (std::size_t i = 0; i < model.log_likelihoods.size(); ++i)
      std::fprintf(stderr, "iteration %zu: log-likelihood %.6f\n", i + 1,
                   model.log_likelihoods[i]);
  }
  std::vector<AlignmentLinkSet> alignments;
  alignments.reserve(corpus.size());
  for (const auto& pair : corpus)
    alignments.push_back(posterior ? posterior_align(model, pair, config.posterior_threshold)
                                   : viterbi_align(model, pair));
  save_alignments(alignments, out_alignments);
  if (!out_model.empty()) save_model(model, out_model);
  return 0;
}

int cmd_extract(const std::string& corpus_path, const std::string& alignments_path,
                const std::string& out_path) {
  const auto corpus = load_corpus(corpus_path);
  const auto alignments = load_alignments(alignments_path);
  if (corpus.size() != alignments.size())
    throw LengthMismatch(corpus.size(), alignments.size());
  TermDictionary dict(DictMode::terminology);
  for (std::size_t k = 0; k < corpus.size(); ++k)
    dict.add(DictEntry{corpus[k].id, extract_bijective(corpus[k], alignments[k])});
  save_dictionary(dict, out_path);
  return 0;
}

int cmd_annotate(const std::string& corpus_path, const std::string& alignments_path,
                 const std::string& dict_path, const std::string& out_path,
                 const std::string& out_dict_path, const AnnotationConfig& config) {
  auto corpus = load_corpus(corpus_path);
  if (!dict_path.empty()) {
    const TermDictionary dict = load_dictionary(dict_path);
    static const std::vector<TermConstraint> kNone;
    for (auto& pair : corpus) {
      const auto* terms = dict.find(pair.id);
      pair.src_tokens = annotate_inline(pair, terms ? *terms : kNone, config.mode).tokens;
    }
    save_corpus(corpus, out_path);
    return 0;
  }
  const auto alignments = load_alignments(alignments_path);
  SampledAnnotations sampled = sample_annotations(corpus, alignments, config);
  if (!out_dict_path.empty()) {
    TermDictionary dict(DictMode::terminology);
    for (std::size_t k = 0; k < corpus.size(); ++k)
      dict.add(DictEntry{corpus[k].id, std::move(sampled.selected[k])});
    save_dictionary(dict, out_dict_path);
  }
  for (std::size_t k = 0; k < corpus.size(); ++k)
    corpus[k].src_tokens = std::move(sampled.annotated[k].tokens);
  save_corpus(corpus, out_path);
  return 0;
}

int cmd_decode(const std::string& corpus_path, const std::string& scorer_path,
               const std::string& out_path, const BeamConfig& beam, int jobs) {
  const auto corpus = load_corpus(corpus_path, /*allow_markers=*/true);
  const TableScorer scorer = TableScorer::load(scorer_path);
  std::vector<HypothesisEntry> hyps(corpus.size());
  const auto shards = shard_ranges(corpus.size());
  parallel_for_shards(shards.size(), jobs, [&](std::size_t s) {
    for (std::size_t k = shards[s].begin; k < shards[s].end; ++k) {
      hyps[k].id = corpus[k].id;
      hyps[k].hyp = beam_search(scorer, AnnotatedSource{corpus[k].src_tokens}, beam);
    }
  });
  save_hypotheses(hyps, out_path);
  return 0;
}

int cmd_refine_ncd(const std::string& corpus_path, const std::string& dict_path,
                   const std::string& hyps_path, const std::string& model_path,
                   const std::string& scorer_path, const std::string& out_path,
                   const std::string& violations_path, const NcdConfig& config, int jobs) {
  const auto corpus = load_corpus(corpus_path, /*allow_markers=*/true);
  const TermDictionary dict = load_dictionary(dict_path);
  const auto first = load_hypotheses(hyps_path);
  const AlignerModel model = load_model(model_path);
  const TableScorer scorer = TableScorer::load(scorer_path);

  std::map<std::string, const Hypothesis*> first_by_id;
  for (const auto& entry : first) first_by_id[entry.id] = &entry.hyp;

  std::vector<HypothesisEntry> refined(corpus.size());
  std::vector<NcdResult> results(corpus.size());
  static const std::vector<TermConstraint> kNone;
  const auto shards = shard_ranges(corpus.size());
  parallel_for_shards(shards.size(), jobs, [&](std::size_t s) {
    for (std::size_t k = shards[s].begin; k < shards[s].end; ++k) {
      auto it = first_by_id.find(corpus[k].id);
      if (it == first_by_id.end()) throw MissingHypothesis(corpus[k].id);
      const auto* terms = dict.find(corpus[k].id);
      results[k] = refine_ncd(scorer, model, corpus[k].id,
                              AnnotatedSource{corpus[k].src_tokens}, terms ? *terms : kNone,
                              *it->second, config);
      refined[k] = HypothesisEntry{corpus[k].id, results[k].hyp};
    }
  });

  save_hypotheses(refined, out_path);
  if (!violations_path.empty()) {
    std::ofstream file(violations_path);
    if (!file) throw IoError("cannot write " + violations_path);
    for (const auto& r : results) {
      json unmet = json::array();
      for (const auto& c : r.report.unmet)
        unmet.push_back(json{{"src_index", c.src_index}, {"src", c.src_term}, {"trg", c.trg_term}});
      json banned = json::array();
      for (const auto& tok : r.report.violating_tokens) banned.push_back(tok);
      file << json{{"id", r.report.hypothesis_id}, {"unmet", unmet}, {"banned", banned}}.dump()
           << '\n';
    }
  }
  return 0;
}

int cmd_refine_llm(const std::string& corpus_path, const std::string& dict_path,
                   const std::string& hyps_path, const std::string& out_path,
                   const std::string& lang, const BackendConfig& backend) {
  const auto corpus = load_corpus(corpus_path, /*allow_markers=*/true);
  std::optional<TermDictionary> dict;
  if (!dict_path.empty()) dict = load_dictionary(dict_path);

  std::map<std::string, const Hypothesis*> initial_by_id;
  std::vector<HypothesisEntry> initial;
  if (!hyps_path.empty()) {
    initial = load_hypotheses(hyps_path);
    for (const auto& entry : initial) initial_by_id[entry.id] = &entry.hyp;
  }

  std::vector<LlmTask> tasks;
  tasks.reserve(corpus.size());
  for (const auto& pair : corpus) {
    LlmTask task;
    task.id = pair.id;
    auto [plain, constraints] = parse_annotated(AnnotatedSource{pair.src_tokens});
    (void)constraints;
    task.source_text = join_tokens(plain);
    if (dict.has_value()) {
      if (const auto* terms = dict->find(pair.id))
        for (const auto& c : *terms) task.constraints.emplace_back(c.src_term, c.trg_term);
    }
    auto it = initial_by_id.find(pair.id);
    if (it != initial_by_id.end()) task.initial = *it->second;
    tasks.push_back(std::move(task));
  }

  ChatClient client(backend);
  const auto outcomes = refine_batch(client, tasks, lang);

  std::vector<HypothesisEntry> hyps;
  std::size_t failures = 0;
  for (const auto& outcome : outcomes) {
    if (outcome.hyp.has_value()) {
      hyps.push_back(HypothesisEntry{outcome.id, *outcome.hyp});
    } else {
      ++failures;
      std::fprintf(stderr, "refine-llm: %s failed: %s\n", outcome.id.c_str(),
                   outcome.error.c_str());
    }
  }
  save_hypotheses(hyps, out_path);
  return failures == 0 ? 0 : 1;
}

int cmd_eval(const std::string& hyps_path, const std::string& dict_path,
             const std::string& refs_path, const std::string& out_path, const std::string& mode,
             const std::string& model_label, const std::string& refine_label) {
  const auto hyps = load_hypotheses(hyps_path);
  const TermDictionary dict = load_dictionary(dict_path);

  SystemReport row;
  row.mode = mode.empty() ? to_string(dict.mode()) : mode;
  row.model = model_label;
  row.refine = refine_label;
  row.recall = term_recall(hyps, dict);

  if (!refs_path.empty()) {
    const auto refs = load_corpus(refs_path);
    std::map<std::string, const std::vector<std::string>*> ref_by_id;
    for (const auto& pair : refs)
      if (!pair.trg_tokens.empty()) ref_by_id[pair.id] = &pair.trg_tokens;
    std::vector<std::vector<std::string>> hyp_tokens, ref_tokens;
    bool complete = true;
    for (const auto& entry : hyps) {
      auto it = ref_by_id.find(entry.id);
      if (it == ref_by_id.end()) {
        complete = false;
        break;
      }
      hyp_tokens.push_back(entry.hyp.trg_tokens);
      ref_tokens.push_back(*it->second);
    }
    if (complete && !hyps.empty()) row.bleu = bleu(hyp_tokens, ref_tokens);
  }

  const ComparisonReport report = make_report({row});
  if (!out_path.empty()) {
    std::ofstream file(out_path);
    if (!file) throw IoError("cannot write " + out_path);
    file << report_to_json(report) << '\n';
  }
  std::fputs(render_report(report).c_str(), stdout);
  return 0;
}

int cmd_pipeline(const std::string& config_path, std::optional<std::uint64_t> seed,
                 std::optional<int> jobs, bool verbose) {
  PipelineConfig config = load_pipeline_config(config_path);
  if (seed.has_value()) {
    config.seed = *seed;
    config.annotate.seed = *seed;
  }
  if (jobs.has_value()) config.jobs = *jobs;
  const PipelineResult result = run_pipeline(config, verbose);
  std::printf("pipeline complete: %zu stage(s), manifest %s\n", result.stages.size(),
              result.manifest_path.c_str());
  if (result.llm_failures > 0)
    std::printf("llm failures: %zu (within tolerance)\n", result.llm_failures);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"terminology-constrained translation pipeline toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  bool verbose = false;
  app.add_flag("--verbose", verbose, "log progress to stderr");

  // align
  auto* align = app.add_subcommand("align", "train a lexical aligner and write alignments");
  std::string al_corpus, al_out = "alignments.txt", al_model;
  AlignerConfig al_cfg;
  std::string al_variant = "model1";
  bool al_posterior = false;
  align->add_option("--corpus", al_corpus, "corpus JSONL")->required();
  align->add_option("--out-alignments", al_out, "output Pharaoh file");
  align->add_option("--out-model", al_model, "output model JSON");
  align->add_option("--iterations", al_cfg.iterations, "EM iterations");
  align->add_option("--variant", al_variant, "model1 | diagonal");
  align->add_option("--tension", al_cfg.diagonal_tension, "diagonal prior tension");
  align->add_option("--null-prob", al_cfg.null_prob, "NULL alignment probability");
  align->add_option("--threshold", al_cfg.posterior_threshold, "posterior link threshold");
  align->add_flag("--posterior", al_posterior, "posterior links instead of Viterbi");
  align->add_option("--jobs", al_cfg.jobs, "worker threads");

  // extract
  auto* extract = app.add_subcommand("extract", "extract bijective terminology candidates");
  std::string ex_corpus, ex_alignments, ex_out = "dictionary.jsonl";
  extract->add_option("--corpus", ex_corpus, "corpus JSONL")->required();
  extract->add_option("--alignments", ex_alignments, "Pharaoh alignments")->required();
  extract->add_option("--out", ex_out, "output dictionary JSONL");

  // annotate
  auto* annotate = app.add_subcommand("annotate", "inline-annotate source sentences");
  std::string an_corpus, an_alignments, an_dict, an_out = "annotated.jsonl", an_out_dict;
  AnnotationConfig an_cfg;
  std::string an_mode = "append";
  annotate->add_option("--corpus", an_corpus, "corpus JSONL")->required();
  annotate->add_option("--alignments", an_alignments, "alignments for sampled annotation");
  annotate->add_option("--dict", an_dict, "dictionary to apply in full");
  annotate->add_option("--out", an_out, "output annotated corpus JSONL");
  annotate->add_option("--out-dict", an_out_dict, "write the sampled constraints here");
  annotate->add_option("--probability", an_cfg.probability, "per-candidate sampling probability");
  annotate->add_option("--seed", an_cfg.seed, "sampling seed");
  annotate->add_option("--mode", an_mode, "append | replace");

  // decode
  auto* decode = app.add_subcommand("decode", "beam-decode a corpus with a table scorer");
  std::string de_corpus, de_scorer, de_out = "hyps.jsonl";
  BeamConfig de_beam;
  std::vector<std::string> de_forbid;
  int de_jobs = 1;
  decode->add_option("--corpus", de_corpus, "corpus JSONL (may be annotated)")->required();
  decode->add_option("--scorer", de_scorer, "table scorer fixture JSON")->required();
  decode->add_option("--out", de_out, "output hypotheses JSONL");
  decode->add_option("--beam", de_beam.beam_size, "beam size");
  decode->add_option("--max-len", de_beam.max_len, "maximum target length");
  decode->add_option("--forbid", de_forbid, "forbidden target tokens");
  decode->add_option("--threshold", de_beam.override_threshold,
                     "probability-mass override threshold");
  decode->add_flag("--length-norm", de_beam.length_norm, "length-normalized selection");
  decode->add_option("--jobs", de_jobs, "worker threads");

  // refine-ncd
  auto* ncd = app.add_subcommand("refine-ncd", "negatively constrained re-decoding");
  std::string nc_corpus, nc_dict, nc_hyps, nc_model, nc_scorer, nc_out = "hyps_ncd.jsonl",
                                                                nc_violations;
  NcdConfig nc_cfg;
  int nc_jobs = 1;
  ncd->add_option("--corpus", nc_corpus, "corpus JSONL (may be annotated)")->required();
  ncd->add_option("--dict", nc_dict, "dictionary JSONL")->required();
  ncd->add_option("--hyps", nc_hyps, "first-pass hypotheses JSONL")->required();
  ncd->add_option("--model", nc_model, "aligner model JSON")->required();
  ncd->add_option("--scorer", nc_scorer, "table scorer fixture JSON")->required();
  ncd->add_option("--out", nc_out, "output hypotheses JSONL");
  ncd->add_option("--violations", nc_violations, "violations report JSONL");
  ncd->add_option("--max-iterations", nc_cfg.max_iterations, "refinement rounds");
  ncd->add_option("--posterior-threshold", nc_cfg.posterior_threshold,
                  "alignment posterior threshold");
  ncd->add_option("--beam", nc_cfg.beam.beam_size, "beam size");
  ncd->add_option("--max-len", nc_cfg.beam.max_len, "maximum target length");
  ncd->add_option("--threshold", nc_cfg.beam.override_threshold,
                  "probability-mass override threshold");
  ncd->add_option("--jobs", nc_jobs, "worker threads");

  // refine-llm
  auto* llm = app.add_subcommand("refine-llm", "prompt-based translation refinement");
  std::string ll_corpus, ll_dict, ll_hyps, ll_out = "hyps_llm.jsonl", ll_lang = "English";
  BackendConfig ll_backend;
  llm->add_option("--corpus", ll_corpus, "corpus JSONL")->required();
  llm->add_option("--dict", ll_dict, "dictionary JSONL with constraints");
  llm->add_option("--hypotheses", ll_hyps, "initial hypotheses JSONL (two-step refinement)");
  llm->add_option("--out", ll_out, "output hypotheses JSONL");
  llm->add_option("--endpoint", ll_backend.endpoint,
                  "chat endpoint URL or mock:<script.json>")
      ->required();
  llm->add_option("--model", ll_backend.model, "backend model identifier");
  llm->add_option("--key-env", ll_backend.api_key_env, "env var holding the api key");
  llm->add_option("--lang", ll_lang, "target language name used in prompts");
  llm->add_option("--timeout", ll_backend.timeout_seconds, "request timeout seconds");
  llm->add_option("--retries", ll_backend.max_retries, "max retries per request");
  llm->add_option("--max-inflight", ll_backend.max_in_flight, "max concurrent requests");
  llm->add_option("--temperature", ll_backend.temperature, "sampling temperature");
  llm->add_option("--rpm", ll_backend.requests_per_minute, "request rate limit (0 = none)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "terminology recall and BLEU");
  std::string ev_hyps, ev_dict, ev_refs, ev_out, ev_mode, ev_model = "TAT", ev_refine = "-";
  eval_cmd->add_option("--hyps", ev_hyps, "hypotheses JSONL")->required();
  eval_cmd->add_option("--dict", ev_dict, "dictionary JSONL")->required();
  eval_cmd->add_option("--refs", ev_refs, "reference corpus JSONL");
  eval_cmd->add_option("--out", ev_out, "report JSON path");
  eval_cmd->add_option("--mode", ev_mode, "mode label override");
  eval_cmd->add_option("--model", ev_model, "model label");
  eval_cmd->add_option("--refine", ev_refine, "refinement label");

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "run a configured stage list");
  std::string pi_config;
  std::optional<std::uint64_t> pi_seed;
  std::optional<int> pi_jobs;
  pipeline->add_option("--config", pi_config, "pipeline config JSON")->required();
  pipeline->add_option("--seed", pi_seed, "override the config seed");
  pipeline->add_option("--jobs", pi_jobs, "override the config parallelism");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*align) {
      al_cfg.variant = aligner_variant_from_string(al_variant);
      return cmd_align(al_corpus, al_out, al_model, al_cfg, al_posterior, verbose);
    }
    if (*extract) return cmd_extract(ex_corpus, ex_alignments, ex_out);
    if (*annotate) {
      an_cfg.mode = annotate_mode_from_string(an_mode);
      if (an_dict.empty() && an_alignments.empty())
        throw Error("annotate needs --dict or --alignments");
      return cmd_annotate(an_corpus, an_alignments, an_dict, an_out, an_out_dict, an_cfg);
    }
    if (*decode) {
      de_beam.forbidden.insert(de_forbid.begin(), de_forbid.end());
      return cmd_decode(de_corpus, de_scorer, de_out, de_beam, de_jobs);
    }
    if (*ncd)
      return cmd_refine_ncd(nc_corpus, nc_dict, nc_hyps, nc_model, nc_scorer, nc_out,
                            nc_violations, nc_cfg, nc_jobs);
    if (*llm) return cmd_refine_llm(ll_corpus, ll_dict, ll_hyps, ll_out, ll_lang, ll_backend);
    if (*eval_cmd) return cmd_eval(ev_hyps, ev_dict, ev_refs, ev_out, ev_mode, ev_model, ev_refine);
    if (*pipeline) return cmd_pipeline(pi_config, pi_seed, pi_jobs, verbose);
  } catch (const StageFailure& e) {
    std::fprintf(stderr, "error in stage %s: %s\n", e.stage().c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
