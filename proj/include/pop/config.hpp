#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pop/corpus.hpp"
#include "pop/gateway.hpp"
#include "pop/pipeline.hpp"

namespace pop {

struct EndpointConfig {
  std::string base_url;
  std::string model;
  std::string api_key_env;
  int max_context = 32768;
};

struct StageConfig {
  double temperature = 1.0;
  double top_p = 1.0;
  int max_new_tokens = 1024;
};

struct RetryConfig {
  int max_retries = 5;
  int base_delay_ms = 1000;
  double factor = 2.0;
  double jitter = 0.2;
};

/// One document capturing every knob of a run; the config hash of its
/// canonical serialization is embedded in every output record.
struct RunConfig {
  TaskId task = TaskId::kInstructionFollowing;

  std::string corpus_path;
  CorpusFormat corpus_format = CorpusFormat::kJsonlField;
  std::optional<std::string> text_field;
  bool corpus_strict = false;

  std::map<Role, EndpointConfig> endpoints;

  std::size_t n_questions = 0;  // I; 0 = task default (4096 / 8192 creative)
  int answers_per_question = 32;  // J
  int max_criteria = 5;           // K
  int exemplar_count = 10;        // m
  std::uint64_t seed = 0;

  StageConfig proposer_stage{1.0, 1.0, 6144};
  StageConfig solver_stage{1.0, 1.0, 6144};
  StageConfig rubric_stage{0.0, 1.0, 8192};
  StageConfig grading_stage{0.0, 1.0, 4096};

  JudgeMode judge_mode = JudgeMode::kRubricGrounded;
  bool ground_question = true;
  bool ground_rubric = true;

  int parallelism = 8;       // requests in flight per batch
  int example_workers = 4;   // examples in flight
  RetryConfig retry;

  std::string output_dir = "out";
  std::string template_dir;
  std::string trace_dir;
  std::string backend = "http";  // http | mock
  std::string mock_script;       // replay script path when backend == mock

  std::size_t categorize_sample = 200;
  std::size_t categorize_batch_size = 20;
  int diagnostics_bins = 10;

  /// I after applying the task default.
  std::size_t resolved_questions() const {
    if (n_questions > 0) return n_questions;
    return task == TaskId::kCreativeWriting ? 8192 : 4096;
  }
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config_file(const std::string& path);

/// Every validation problem at once, empty when the config is runnable.
std::vector<std::string> validate_config(const RunConfig& config);

/// Subset for commands that only talk to endpoints (regrade, categorize):
/// backend, stage parameters and retry policy, but no corpus/sampling.
std::vector<std::string> validate_inference_config(const RunConfig& config);

/// FNV-1a 64 of the canonical serialization, as 16 hex digits.
std::string config_hash(const RunConfig& config);

}  // namespace pop
