#include "termkit/pipeline.h"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include <json.hpp>

#include "termkit/digest.h"
#include "termkit/errors.h"
#include "termkit/eval.h"
#include "termkit/parallel.h"
#include "termkit/text.h"

namespace termkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kModelFile = "model.json";
constexpr const char* kAlignmentsFile = "alignments.txt";
constexpr const char* kDictionaryFile = "dictionary.jsonl";
constexpr const char* kAnnotatedFile = "annotated.jsonl";
constexpr const char* kHypsTatFile = "hyps_tat.jsonl";
constexpr const char* kHypsNcdFile = "hyps_ncd.jsonl";
constexpr const char* kViolationsFile = "violations.jsonl";
constexpr const char* kHypsLlmFile = "hyps_llm.jsonl";
constexpr const char* kLlmFailuresFile = "llm_failures.jsonl";
constexpr const char* kReportJsonFile = "report.json";
constexpr const char* kReportTextFile = "report.txt";
constexpr const char* kManifestFile = "manifest.json";

const std::set<std::string> kStageNames = {"align", "extract", "annotate", "decode",
                                           "ncd",   "llm",     "eval"};

void expect_keys(const json& obj, const std::set<std::string>& allowed, const std::string& path,
                 const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (allowed.count(key) == 0)
      throw ParseError(path, 0, "unknown key in " + where + ": " + key);
  }
}

}  // namespace

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path, 0, e.what());
  }
  if (!doc.is_object()) throw ParseError(path, 0, "config must be a JSON object");

  expect_keys(doc,
              {"corpus", "refs", "alignments", "dictionary", "hypotheses", "model", "scorer",
               "out_dir", "seed", "jobs", "lang", "llm_failure_tolerance", "stages", "aligner",
               "annotate", "beam", "ncd", "backend"},
              path, "config");

  PipelineConfig cfg;
  try {
    if (doc.contains("corpus")) cfg.corpus_path = doc.at("corpus").get<std::string>();
    if (doc.contains("refs")) cfg.refs_path = doc.at("refs").get<std::string>();
    if (doc.contains("alignments")) cfg.alignments_path = doc.at("alignments").get<std::string>();
    if (doc.contains("dictionary")) cfg.dictionary_path = doc.at("dictionary").get<std::string>();
    if (doc.contains("hypotheses")) cfg.hypotheses_path = doc.at("hypotheses").get<std::string>();
    if (doc.contains("model")) cfg.model_path = doc.at("model").get<std::string>();
    if (doc.contains("scorer")) cfg.scorer_path = doc.at("scorer").get<std::string>();
    if (doc.contains("out_dir")) cfg.out_dir = doc.at("out_dir").get<std::string>();
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("jobs")) cfg.jobs = doc.at("jobs").get<int>();
    if (doc.contains("lang")) cfg.lang = doc.at("lang").get<std::string>();
    if (doc.contains("llm_failure_tolerance"))
      cfg.llm_failure_tolerance = doc.at("llm_failure_tolerance").get<std::size_t>();
    if (doc.contains("stages"))
      cfg.stages = doc.at("stages").get<std::vector<std::string>>();

    if (doc.contains("aligner")) {
      const json& a = doc.at("aligner");
      expect_keys(a, {"iterations", "variant", "diagonal_tension", "null_prob",
                      "posterior_threshold"},
                  path, "aligner");
      if (a.contains("iterations")) cfg.aligner.iterations = a.at("iterations").get<int>();
      if (a.contains("variant"))
        cfg.aligner.variant = aligner_variant_from_string(a.at("variant").get<std::string>());
      if (a.contains("diagonal_tension"))
        cfg.aligner.diagonal_tension = a.at("diagonal_tension").get<double>();
      if (a.contains("null_prob")) cfg.aligner.null_prob = a.at("null_prob").get<double>();
      if (a.contains("posterior_threshold"))
        cfg.aligner.posterior_threshold = a.at("posterior_threshold").get<double>();
    }
    if (doc.contains("annotate")) {
      const json& a = doc.at("annotate");
      expect_keys(a, {"probability", "mode", "from_dictionary"}, path, "annotate");
      if (a.contains("probability")) cfg.annotate.probability = a.at("probability").get<double>();
      if (a.contains("mode"))
        cfg.annotate.mode = annotate_mode_from_string(a.at("mode").get<std::string>());
      if (a.contains("from_dictionary"))
        cfg.annotate_from_dictionary = a.at("from_dictionary").get<bool>();
    }
    if (doc.contains("beam")) {
      const json& b = doc.at("beam");
      expect_keys(b, {"beam_size", "max_len", "forbidden", "override_threshold", "length_norm"},
                  path, "beam");
      if (b.contains("beam_size")) cfg.beam.beam_size = b.at("beam_size").get<int>();
      if (b.contains("max_len")) cfg.beam.max_len = b.at("max_len").get<int>();
      if (b.contains("forbidden"))
        for (const auto& tok : b.at("forbidden"))
          cfg.beam.forbidden.insert(tok.get<std::string>());
      if (b.contains("override_threshold"))
        cfg.beam.override_threshold = b.at("override_threshold").get<double>();
      if (b.contains("length_norm")) cfg.beam.length_norm = b.at("length_norm").get<bool>();
    }
    if (doc.contains("ncd")) {
      const json& n = doc.at("ncd");
      expect_keys(n, {"max_iterations", "posterior_threshold"}, path, "ncd");
      if (n.contains("max_iterations")) cfg.ncd.max_iterations = n.at("max_iterations").get<int>();
      if (n.contains("posterior_threshold"))
        cfg.ncd.posterior_threshold = n.at("posterior_threshold").get<double>();
    }
    if (doc.contains("backend")) {
      const json& b = doc.at("backend");
      expect_keys(b,
                  {"endpoint", "model", "key_env", "timeout_seconds", "max_retries",
                   "max_in_flight", "temperature", "requests_per_minute"},
                  path, "backend");
      if (b.contains("endpoint")) cfg.backend.endpoint = b.at("endpoint").get<std::string>();
      if (b.contains("model")) cfg.backend.model = b.at("model").get<std::string>();
      if (b.contains("key_env")) cfg.backend.api_key_env = b.at("key_env").get<std::string>();
      if (b.contains("timeout_seconds"))
        cfg.backend.timeout_seconds = b.at("timeout_seconds").get<double>();
      if (b.contains("max_retries")) cfg.backend.max_retries = b.at("max_retries").get<int>();
      if (b.contains("max_in_flight"))
        cfg.backend.max_in_flight = b.at("max_in_flight").get<int>();
      if (b.contains("temperature")) cfg.backend.temperature = b.at("temperature").get<double>();
      if (b.contains("requests_per_minute"))
        cfg.backend.requests_per_minute = b.at("requests_per_minute").get<int>();
    }
  } catch (const json::exception& e) {
    throw ParseError(path, 0, e.what());
  }

  cfg.annotate.seed = cfg.seed;
  cfg.ncd.beam = cfg.beam;
  cfg.config_digest = sha256_hex(doc.dump());
  return cfg;
}

namespace {

struct PipelineState {
  std::vector<SentencePair> corpus;
  std::vector<SentencePair> refs;
  std::vector<AlignmentLinkSet> alignments;
  bool have_alignments = false;
  AlignerModel model;
  bool have_model = false;
  TermDictionary dictionary;
  bool have_dictionary = false;
  std::vector<AnnotatedSource> annotated;
  bool have_annotated = false;
  std::vector<HypothesisEntry> hyps;
  bool have_hyps = false;
  std::string base_model_label = "external";
  std::vector<std::string> refinements;
  std::size_t llm_failures = 0;
};

// The committed write pattern: produce <path>.partial, then rename. A crash
// or exception mid-write leaves only the .partial file behind.
void commit_write(const fs::path& target, const std::function<void(const std::string&)>& writer) {
  const std::string partial = target.string() + ".partial";
  writer(partial);
  fs::rename(partial, target);
}

std::string joined_src(const SentencePair& pair) { return join_tokens(pair.src_tokens); }

// Plain source text for prompts, with any marker regions stripped.
std::string plain_source_text(const SentencePair& pair) {
  AnnotatedSource annotated{pair.src_tokens};
  auto [plain, constraints] = parse_annotated(annotated);
  (void)constraints;
  return join_tokens(plain);
}

void validate_stage_order(const PipelineConfig& cfg) {
  if (cfg.stages.empty()) throw Error("config: stages must be a non-empty array");
  for (const auto& s : cfg.stages)
    if (kStageNames.count(s) == 0) throw Error("config: unknown stage: " + s);

  std::set<std::string> done;
  auto have = [&](const char* stage, const std::string& ext) {
    return done.count(stage) > 0 || !ext.empty();
  };
  for (const auto& s : cfg.stages) {
    if (s == "extract" && !have("align", cfg.alignments_path))
      throw Error("config: extract needs an align stage or an alignments path");
    if (s == "annotate") {
      if (cfg.annotate_from_dictionary) {
        if (!have("extract", cfg.dictionary_path))
          throw Error("config: annotate from dictionary needs extract or a dictionary path");
      } else if (!have("align", cfg.alignments_path)) {
        throw Error("config: annotate sampling needs an align stage or an alignments path");
      }
    }
    if ((s == "decode" || s == "ncd") && cfg.scorer_path.empty())
      throw Error("config: " + s + " needs a scorer path");
    if (s == "ncd") {
      if (!have("align", cfg.model_path))
        throw Error("config: ncd needs an align stage or a model path");
      if (!have("extract", cfg.dictionary_path) && !done.count("annotate"))
        throw Error("config: ncd needs a dictionary (extract stage or dictionary path)");
      if (!have("decode", cfg.hypotheses_path))
        throw Error("config: ncd needs a decode stage or a hypotheses path");
    }
    if (s == "llm" && cfg.backend.endpoint.empty())
      throw Error("config: llm needs backend.endpoint");
    if (s == "eval") {
      if (!have("extract", cfg.dictionary_path) && !done.count("annotate"))
        throw Error("config: eval needs a dictionary (extract stage or dictionary path)");
      bool hyp_source = done.count("decode") || done.count("ncd") || done.count("llm") ||
                        !cfg.hypotheses_path.empty();
      if (!hyp_source) throw Error("config: eval needs hypotheses");
    }
    done.insert(s);
  }
}

// Loads (and thereby parses) every configured input before any stage runs.
void validate_inputs(const PipelineConfig& cfg, PipelineState& state) {
  if (cfg.corpus_path.empty()) throw Error("config: corpus is required");
  state.corpus = load_corpus(cfg.corpus_path, /*allow_markers=*/true);
  if (!cfg.refs_path.empty()) state.refs = load_corpus(cfg.refs_path);
  if (!cfg.alignments_path.empty()) {
    state.alignments = load_alignments(cfg.alignments_path);
    if (state.alignments.size() != state.corpus.size())
      throw LengthMismatch(state.corpus.size(), state.alignments.size());
    state.have_alignments = true;
  }
  if (!cfg.dictionary_path.empty()) {
    state.dictionary = load_dictionary(cfg.dictionary_path);
    state.have_dictionary = true;
  }
  if (!cfg.hypotheses_path.empty()) {
    state.hyps = load_hypotheses(cfg.hypotheses_path);
    state.have_hyps = true;
    state.base_model_label = "external";
  }
  if (!cfg.model_path.empty()) {
    state.model = load_model(cfg.model_path);
    state.have_model = true;
  }
  if (!cfg.scorer_path.empty()) (void)TableScorer::load(cfg.scorer_path);
  static const std::string kMockPrefix = "mock:";
  if (cfg.backend.endpoint.rfind(kMockPrefix, 0) == 0)
    (void)MockTransport(cfg.backend.endpoint.substr(kMockPrefix.size()));
}

json manifest_inputs(const PipelineConfig& cfg) {
  json inputs = json::object();
  auto put = [&](const char* role, const std::string& p) {
    if (!p.empty()) inputs[role] = json{{"path", p}, {"sha256", sha256_file(p)}};
  };
  put("corpus", cfg.corpus_path);
  put("refs", cfg.refs_path);
  put("alignments", cfg.alignments_path);
  put("dictionary", cfg.dictionary_path);
  put("hypotheses", cfg.hypotheses_path);
  put("model", cfg.model_path);
  put("scorer", cfg.scorer_path);
  static const std::string kMockPrefix = "mock:";
  if (cfg.backend.endpoint.rfind(kMockPrefix, 0) == 0)
    put("mock_script", cfg.backend.endpoint.substr(kMockPrefix.size()));
  return inputs;
}

void stage_align(const PipelineConfig& cfg, PipelineState& state, const fs::path& out,
                 StageRecord& record) {
  AlignerConfig aligner = cfg.aligner;
  aligner.jobs = cfg.jobs;
  state.model = train(state.corpus, aligner);
  state.have_model = true;

  state.alignments.clear();
  state.alignments.reserve(state.corpus.size());
  for (const auto& pair : state.corpus) state.alignments.push_back(viterbi_align(state.model, pair));
  state.have_alignments = true;

  commit_write(out / kModelFile,
               [&](const std::string& p) { save_model(state.model, p); });
  commit_write(out / kAlignmentsFile,
               [&](const std::string& p) { save_alignments(state.alignments, p); });
  record.outputs = {kModelFile, kAlignmentsFile};
}

void stage_extract(const PipelineConfig& cfg, PipelineState& state, const fs::path& out,
                   StageRecord& record) {
  (void)cfg;
  TermDictionary dict(DictMode::terminology);
  for (std::size_t k = 0; k < state.corpus.size(); ++k) {
    DictEntry entry;
    entry.id = state.corpus[k].id;
    entry.terms = extract_bijective(state.corpus[k], state.alignments[k]);
    dict.add(std::move(entry));
  }
  state.dictionary = std::move(dict);
  state.have_dictionary = true;
  commit_write(out / kDictionaryFile,
               [&](const std::string& p) { save_dictionary(state.dictionary, p); });
  record.outputs = {kDictionaryFile};
}

void stage_annotate(const PipelineConfig& cfg, PipelineState& state, const fs::path& out,
                    StageRecord& record) {
  state.annotated.clear();
  state.annotated.reserve(state.corpus.size());

  if (cfg.annotate_from_dictionary) {
    static const std::vector<TermConstraint> kNone;
    for (const auto& pair : state.corpus) {
      const auto* terms = state.dictionary.find(pair.id);
      state.annotated.push_back(annotate_inline(pair, terms ? *terms : kNone, cfg.annotate.mode));
    }
  } else {
    SampledAnnotations sampled = sample_annotations(state.corpus, state.alignments, cfg.annotate);
    state.annotated = std::move(sampled.annotated);
    TermDictionary dict(DictMode::terminology);
    for (std::size_t k = 0; k < state.corpus.size(); ++k)
      dict.add(DictEntry{state.corpus[k].id, std::move(sampled.selected[k])});
    state.dictionary = std::move(dict);
    state.have_dictionary = true;
    commit_write(out / kDictionaryFile,
                 [&](const std::string& p) { save_dictionary(state.dictionary, p); });
    record.outputs.push_back(kDictionaryFile);
  }

  std::vector<SentencePair> annotated_corpus = state.corpus;
  for (std::size_t k = 0; k < annotated_corpus.size(); ++k)
    annotated_corpus[k].src_tokens = state.annotated[k].tokens;
  state.have_annotated = true;
  commit_write(out / kAnnotatedFile,
               [&](const std::string& p) { save_corpus(annotated_corpus, p); });
  record.outputs.push_back(kAnnotatedFile);
}

std::vector<AnnotatedSource> decode_sources(const PipelineState& state) {
  if (state.have_annotated) return state.annotated;
  std::vector<AnnotatedSource> sources;
  sources.reserve(state.corpus.size());
  for (const auto& pair : state.corpus) sources.push_back(AnnotatedSource{pair.src_tokens});
  return sources;
}

void stage_decode(const PipelineConfig& cfg, PipelineState& state, const fs::path& out,
                  StageRecord& record) {
  const TableScorer scorer = TableScorer::load(cfg.scorer_path);
  const std::vector<AnnotatedSource> sources = decode_sources(state);

  std::vector<HypothesisEntry> hyps(state.corpus.size());
  const auto shards = shard_ranges(state.corpus.size(), kShardSize);
  parallel_for_shards(shards.size(), cfg.jobs, [&](std::size_t s) {
    for (std::size_t k = shards[s].begin; k < shards[s].end; ++k) {
      hyps[k].id = state.corpus[k].id;
      hyps[k].hyp = beam_search(scorer, sources[k], cfg.beam);
    }
  });

  state.hyps = std::move(hyps);
  state.have_hyps = true;
  state.base_model_label = "TAT";
  commit_write(out / kHypsTatFile,
               [&](const std::string& p) { save_hypotheses(state.hyps, p); });
  record.outputs = {kHypsTatFile};
}

void stage_ncd(const PipelineConfig& cfg, PipelineState& state, const fs::path& out,
               StageRecord& record) {
  const TableScorer scorer = TableScorer::load(cfg.scorer_path);
  const std::vector<AnnotatedSource> sources = decode_sources(state);

  std::map<std::string, const Hypothesis*> first_by_id;
  for (const auto& entry : state.hyps) first_by_id[entry.id] = &entry.hyp;

  NcdConfig ncd = cfg.ncd;
  ncd.beam = cfg.beam;

  std::vector<HypothesisEntry> refined(state.corpus.size());
  std::vector<NcdResult> results(state.corpus.size());
  static const std::vector<TermConstraint> kNone;
  const auto shards = shard_ranges(state.corpus.size(), kShardSize);
  parallel_for_shards(shards.size(), cfg.jobs, [&](std::size_t s) {
    for (std::size_t k = shards[s].begin; k < shards[s].end; ++k) {
      const SentencePair& pair = state.corpus[k];
      auto it = first_by_id.find(pair.id);
      if (it == first_by_id.end()) throw MissingHypothesis(pair.id);
      const auto* terms = state.dictionary.find(pair.id);
      results[k] = refine_ncd(scorer, state.model, pair.id, sources[k], terms ? *terms : kNone,
                              *it->second, ncd);
      refined[k].id = pair.id;
      refined[k].hyp = results[k].hyp;
    }
  });

  state.hyps = std::move(refined);
  state.have_hyps = true;
  state.refinements.push_back("NCD");

  commit_write(out / kHypsNcdFile,
               [&](const std::string& p) { save_hypotheses(state.hyps, p); });
  commit_write(out / kViolationsFile, [&](const std::string& p) {
    std::ofstream file(p);
    if (!file) throw IoError("cannot write " + p);
    for (const auto& r : results) {
      json unmet = json::array();
      for (const auto& c : r.report.unmet)
        unmet.push_back(json{{"src_index", c.src_index}, {"src", c.src_term}, {"trg", c.trg_term}});
      json banned = json::array();
      for (const auto& tok : r.report.violating_tokens) banned.push_back(tok);
      file << json{{"id", r.report.hypothesis_id}, {"unmet", unmet}, {"banned", banned}}.dump()
           << '\n';
    }
  });
  record.outputs = {kHypsNcdFile, kViolationsFile};
}

void stage_llm(const PipelineConfig& cfg, PipelineState& state, const fs::path& out,
               StageRecord& record) {
  ChatClient client(cfg.backend);

  std::map<std::string, const Hypothesis*> initial_by_id;
  if (state.have_hyps)
    for (const auto& entry : state.hyps) initial_by_id[entry.id] = &entry.hyp;

  std::vector<LlmTask> tasks;
  tasks.reserve(state.corpus.size());
  for (const auto& pair : state.corpus) {
    LlmTask task;
    task.id = pair.id;
    task.source_text = plain_source_text(pair);
    if (state.have_dictionary) {
      if (const auto* terms = state.dictionary.find(pair.id)) {
        for (const auto& c : *terms) task.constraints.emplace_back(c.src_term, c.trg_term);
      }
    }
    auto it = initial_by_id.find(pair.id);
    if (it != initial_by_id.end()) task.initial = *it->second;
    tasks.push_back(std::move(task));
  }

  if (!state.have_hyps) state.base_model_label = "LLM";
  state.refinements.push_back("LLM");

  const std::vector<LlmOutcome> outcomes = refine_batch(client, tasks, cfg.lang);

  std::vector<HypothesisEntry> hyps;
  std::vector<std::pair<std::string, std::string>> failures;
  for (const auto& outcome : outcomes) {
    if (outcome.hyp.has_value()) {
      hyps.push_back(HypothesisEntry{outcome.id, *outcome.hyp});
    } else {
      failures.emplace_back(outcome.id, outcome.error);
    }
  }

  state.llm_failures = failures.size();
  state.hyps = std::move(hyps);
  state.have_hyps = true;

  commit_write(out / kHypsLlmFile,
               [&](const std::string& p) { save_hypotheses(state.hyps, p); });
  record.outputs = {kHypsLlmFile};
  if (!failures.empty()) {
    commit_write(out / kLlmFailuresFile, [&](const std::string& p) {
      std::ofstream file(p);
      if (!file) throw IoError("cannot write " + p);
      for (const auto& [id, error] : failures)
        file << json{{"id", id}, {"error", error}}.dump() << '\n';
    });
    record.outputs.push_back(kLlmFailuresFile);
  }

  // Failures below the tolerance are recorded but not fatal; tolerance 0
  // makes any failure fatal.
  if (state.llm_failures > 0 && state.llm_failures >= cfg.llm_failure_tolerance)
    throw Error(std::to_string(state.llm_failures) + " sentence(s) failed (tolerance " +
                std::to_string(cfg.llm_failure_tolerance) + ")");
}

void stage_eval(const PipelineConfig& cfg, PipelineState& state, const fs::path& out,
                StageRecord& record) {
  SystemReport row;
  row.mode = to_string(state.dictionary.mode());
  row.model = state.base_model_label;
  if (state.refinements.empty()) {
    row.refine = "-";
  } else {
    std::string refine;
    for (const auto& r : state.refinements) {
      if (!refine.empty()) refine += "+";
      refine += r;
    }
    // LLM-only runs translate and refine in one stage; the base label
    // already says LLM, the refine column still records the second pass.
    row.refine = refine;
  }
  row.recall = term_recall(state.hyps, state.dictionary);

  const std::vector<SentencePair>& refs = state.refs.empty() ? state.corpus : state.refs;
  std::map<std::string, const std::vector<std::string>*> ref_by_id;
  for (const auto& pair : refs)
    if (!pair.trg_tokens.empty()) ref_by_id[pair.id] = &pair.trg_tokens;

  std::vector<std::vector<std::string>> hyp_tokens;
  std::vector<std::vector<std::string>> ref_tokens;
  bool refs_complete = !state.hyps.empty();
  for (const auto& entry : state.hyps) {
    auto it = ref_by_id.find(entry.id);
    if (it == ref_by_id.end()) {
      refs_complete = false;
      break;
    }
    hyp_tokens.push_back(entry.hyp.trg_tokens);
    ref_tokens.push_back(*it->second);
  }
  if (refs_complete) row.bleu = bleu(hyp_tokens, ref_tokens);

  const ComparisonReport report = make_report({row});
  commit_write(out / kReportJsonFile, [&](const std::string& p) {
    std::ofstream file(p);
    if (!file) throw IoError("cannot write " + p);
    file << report_to_json(report) << '\n';
  });
  commit_write(out / kReportTextFile, [&](const std::string& p) {
    std::ofstream file(p);
    if (!file) throw IoError("cannot write " + p);
    file << render_report(report);
  });
  record.outputs = {kReportJsonFile, kReportTextFile};
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, bool verbose) {
  validate_stage_order(config);
  PipelineState state;
  validate_inputs(config, state);

  const fs::path out(config.out_dir);
  fs::create_directories(out);

  PipelineResult result;
  json stage_manifest = json::array();
  for (const auto& name : config.stages) {
    StageRecord record;
    record.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (name == "align") stage_align(config, state, out, record);
      else if (name == "extract") stage_extract(config, state, out, record);
      else if (name == "annotate") stage_annotate(config, state, out, record);
      else if (name == "decode") stage_decode(config, state, out, record);
      else if (name == "ncd") stage_ncd(config, state, out, record);
      else if (name == "llm") stage_llm(config, state, out, record);
      else stage_eval(config, state, out, record);
    } catch (const std::exception& e) {
      throw StageFailure(name, e.what());
    }
    const auto t1 = std::chrono::steady_clock::now();
    record.duration_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    if (verbose)
      std::fprintf(stderr, "[%s] %.1f ms -> %s\n", record.name.c_str(), record.duration_ms,
                   join_tokens(record.outputs).c_str());
    stage_manifest.push_back(json{{"name", record.name},
                                  {"duration_ms", record.duration_ms},
                                  {"outputs", record.outputs}});
    result.stages.push_back(std::move(record));
  }
  result.llm_failures = state.llm_failures;

  json manifest{{"config_digest", config.config_digest},
                {"seed", config.seed},
                {"inputs", manifest_inputs(config)},
                {"stages", stage_manifest},
                {"llm_failures", state.llm_failures}};
  const fs::path manifest_path = out / kManifestFile;
  commit_write(manifest_path, [&](const std::string& p) {
    std::ofstream file(p);
    if (!file) throw IoError("cannot write " + p);
    file << manifest.dump(2) << '\n';
  });
  result.manifest_path = manifest_path.string();
  return result;
}

}  // namespace termkit
