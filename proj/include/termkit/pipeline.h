#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "termkit/aligner.h"
#include "termkit/decoder.h"
#include "termkit/llm_refine.h"
#include "termkit/refine_ncd.h"
#include "termkit/terminology.h"

namespace termkit {

// One JSON document describing inputs, the stage list, and per-stage
// settings. Stages: align, extract, annotate, decode, ncd, llm, eval.
struct PipelineConfig {
  std::string corpus_path;
  std::string refs_path;        // optional reference corpus for BLEU
  std::string alignments_path;  // optional external alignments
  std::string dictionary_path;  // optional external dictionary
  std::string hypotheses_path;  // optional external first-pass hypotheses
  std::string model_path;       // optional pre-trained aligner model
  std::string scorer_path;      // table-scorer fixture for decode/ncd
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string lang = "English";
  std::size_t llm_failure_tolerance = 0;
  std::vector<std::string> stages;

  AlignerConfig aligner;
  AnnotationConfig annotate;
  bool annotate_from_dictionary = false;  // apply a dictionary instead of sampling
  BeamConfig beam;
  NcdConfig ncd;
  BackendConfig backend;

  std::string config_digest;  // sha256 of the canonical config document
};

PipelineConfig load_pipeline_config(const std::string& path);

struct StageRecord {
  std::string name;
  double duration_ms = 0.0;
  std::vector<std::string> outputs;  // artifact file names relative to out_dir
};

struct PipelineResult {
  std::vector<StageRecord> stages;
  std::size_t llm_failures = 0;
  std::string manifest_path;
};

// Validates every referenced input (existence and parse) before running any
// stage, then executes the stages in order, each writing its artifact under
// out_dir through a ".partial" temporary. A manifest.json records the config
// digest, seed, input digests, and per-stage timing. Reruns with identical
// config, inputs, and seed are byte-identical apart from timings.
PipelineResult run_pipeline(const PipelineConfig& config, bool verbose = false);

}  // namespace termkit
