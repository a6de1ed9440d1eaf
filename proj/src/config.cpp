#include "pop/config.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace pop {

using json = nlohmann::json;

namespace {

StageConfig stage_from_json(const json& j, StageConfig defaults) {
  StageConfig stage = defaults;
  stage.temperature = j.value("temperature", stage.temperature);
  stage.top_p = j.value("top_p", stage.top_p);
  stage.max_new_tokens = j.value("max_new_tokens", stage.max_new_tokens);
  return stage;
}

json stage_to_json(const StageConfig& stage) {
  return json{{"temperature", stage.temperature},
              {"top_p", stage.top_p},
              {"max_new_tokens", stage.max_new_tokens}};
}

EndpointConfig endpoint_from_json(const json& j) {
  EndpointConfig endpoint;
  endpoint.base_url = j.value("base_url", std::string{});
  endpoint.model = j.value("model", std::string{});
  endpoint.api_key_env = j.value("api_key_env", std::string{});
  endpoint.max_context = j.value("max_context", 32768);
  return endpoint;
}

json endpoint_to_json(const EndpointConfig& endpoint) {
  return json{{"base_url", endpoint.base_url},
              {"model", endpoint.model},
              {"api_key_env", endpoint.api_key_env},
              {"max_context", endpoint.max_context}};
}

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig config;
  if (j.contains("task")) {
    auto task = task_id_from_string(j["task"].get<std::string>());
    if (!task)
      throw std::runtime_error("unknown task: " + j["task"].get<std::string>());
    config.task = *task;
  }

  if (j.contains("corpus")) {
    const json& corpus = j["corpus"];
    config.corpus_path = corpus.value("path", std::string{});
    if (corpus.contains("format")) {
      auto format =
          corpus_format_from_string(corpus["format"].get<std::string>());
      if (!format)
        throw std::runtime_error("unknown corpus format: " +
                                 corpus["format"].get<std::string>());
      config.corpus_format = *format;
    }
    if (corpus.contains("text_field") && corpus["text_field"].is_string())
      config.text_field = corpus["text_field"].get<std::string>();
    config.corpus_strict = corpus.value("strict", false);
  }

  if (j.contains("endpoints")) {
    for (const auto& [key, value] : j["endpoints"].items()) {
      auto role = role_from_string(key);
      if (!role) throw std::runtime_error("unknown endpoint role: " + key);
      config.endpoints[*role] = endpoint_from_json(value);
    }
  }

  if (j.contains("sampling")) {
    const json& sampling = j["sampling"];
    config.n_questions = sampling.value("questions", config.n_questions);
    config.answers_per_question =
        sampling.value("answers_per_question", config.answers_per_question);
    config.max_criteria = sampling.value("max_criteria", config.max_criteria);
    config.exemplar_count =
        sampling.value("exemplar_count", config.exemplar_count);
    config.seed = sampling.value("seed", config.seed);
    if (sampling.contains("stages")) {
      const json& stages = sampling["stages"];
      if (stages.contains("proposer"))
        config.proposer_stage =
            stage_from_json(stages["proposer"], config.proposer_stage);
      if (stages.contains("solver"))
        config.solver_stage =
            stage_from_json(stages["solver"], config.solver_stage);
      if (stages.contains("rubric"))
        config.rubric_stage =
            stage_from_json(stages["rubric"], config.rubric_stage);
      if (stages.contains("grading"))
        config.grading_stage =
            stage_from_json(stages["grading"], config.grading_stage);
    }
  }

  if (j.contains("judge")) {
    const json& judge = j["judge"];
    if (judge.contains("mode")) {
      auto mode = judge_mode_from_string(judge["mode"].get<std::string>());
      if (!mode)
        throw std::runtime_error("unknown judge mode: " +
                                 judge["mode"].get<std::string>());
      config.judge_mode = *mode;
    }
    config.ground_question =
        judge.value("ground_question", config.ground_question);
    config.ground_rubric = judge.value("ground_rubric", config.ground_rubric);
  }

  if (j.contains("run")) {
    const json& run = j["run"];
    config.parallelism = run.value("parallelism", config.parallelism);
    config.example_workers =
        run.value("example_workers", config.example_workers);
    config.output_dir = run.value("output_dir", config.output_dir);
    config.template_dir = run.value("template_dir", config.template_dir);
    config.trace_dir = run.value("trace_dir", config.trace_dir);
    config.backend = run.value("backend", config.backend);
    config.mock_script = run.value("mock_script", config.mock_script);
  }

  if (j.contains("retry")) {
    const json& retry = j["retry"];
    config.retry.max_retries = retry.value("max_retries", config.retry.max_retries);
    config.retry.base_delay_ms =
        retry.value("base_delay_ms", config.retry.base_delay_ms);
    config.retry.factor = retry.value("factor", config.retry.factor);
    config.retry.jitter = retry.value("jitter", config.retry.jitter);
  }

  if (j.contains("diagnostics")) {
    const json& diag = j["diagnostics"];
    config.categorize_sample =
        diag.value("categorize_sample", config.categorize_sample);
    config.categorize_batch_size =
        diag.value("categorize_batch_size", config.categorize_batch_size);
    config.diagnostics_bins = diag.value("bins", config.diagnostics_bins);
  }

  return config;
}

json config_to_json(const RunConfig& config) {
  json endpoints = json::object();
  for (const auto& [role, endpoint] : config.endpoints)
    endpoints[to_string(role)] = endpoint_to_json(endpoint);

  json corpus{{"path", config.corpus_path},
              {"format", to_string(config.corpus_format)},
              {"strict", config.corpus_strict}};
  if (config.text_field) corpus["text_field"] = *config.text_field;

  return json{
      {"task", to_string(config.task)},
      {"corpus", corpus},
      {"endpoints", endpoints},
      {"sampling",
       json{{"questions", config.n_questions},
            {"answers_per_question", config.answers_per_question},
            {"max_criteria", config.max_criteria},
            {"exemplar_count", config.exemplar_count},
            {"seed", config.seed},
            {"stages",
             json{{"proposer", stage_to_json(config.proposer_stage)},
                  {"solver", stage_to_json(config.solver_stage)},
                  {"rubric", stage_to_json(config.rubric_stage)},
                  {"grading", stage_to_json(config.grading_stage)}}}}},
      {"judge",
       json{{"mode", to_string(config.judge_mode)},
            {"ground_question", config.ground_question},
            {"ground_rubric", config.ground_rubric}}},
      {"run",
       json{{"parallelism", config.parallelism},
            {"example_workers", config.example_workers},
            {"output_dir", config.output_dir},
            {"template_dir", config.template_dir},
            {"trace_dir", config.trace_dir},
            {"backend", config.backend},
            {"mock_script", config.mock_script}}},
      {"retry",
       json{{"max_retries", config.retry.max_retries},
            {"base_delay_ms", config.retry.base_delay_ms},
            {"factor", config.retry.factor},
            {"jitter", config.retry.jitter}}},
      {"diagnostics",
       json{{"categorize_sample", config.categorize_sample},
            {"categorize_batch_size", config.categorize_batch_size},
            {"bins", config.diagnostics_bins}}},
  };
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded())
    throw std::runtime_error("config file is not valid JSON: " + path);
  return config_from_json(j);
}

namespace {

void append_inference_errors(const RunConfig& config,
                             std::vector<std::string>& errors,
                             bool require_pipeline_endpoints) {
  auto need = [&](bool ok, const std::string& message) {
    if (!ok) errors.push_back(message);
  };

  need(config.parallelism >= 1, "run.parallelism must be >= 1");
  need(config.backend == "http" || config.backend == "mock",
       "run.backend must be \"http\" or \"mock\"");
  need(config.retry.max_retries >= 0, "retry.max_retries must be >= 0");
  need(config.retry.factor >= 1.0, "retry.factor must be >= 1");
  need(config.retry.jitter >= 0.0 && config.retry.jitter < 1.0,
       "retry.jitter must be in [0,1)");

  const struct {
    const StageConfig& stage;
    const char* name;
  } stages[] = {
      {config.proposer_stage, "proposer"},
      {config.solver_stage, "solver"},
      {config.rubric_stage, "rubric"},
      {config.grading_stage, "grading"},
  };
  for (const auto& s : stages) {
    need(s.stage.temperature >= 0.0,
         std::string("stages.") + s.name + ".temperature must be >= 0");
    need(s.stage.top_p > 0.0 && s.stage.top_p <= 1.0,
         std::string("stages.") + s.name + ".top_p must be in (0,1]");
    need(s.stage.max_new_tokens > 0,
         std::string("stages.") + s.name + ".max_new_tokens must be > 0");
  }

  if (config.backend == "http" && require_pipeline_endpoints) {
    for (Role role : {Role::kProposer, Role::kSolver, Role::kVerifier}) {
      auto it = config.endpoints.find(role);
      if (it == config.endpoints.end() || it->second.base_url.empty())
        errors.push_back("endpoints." + to_string(role) +
                         ".base_url is required for the http backend");
      else if (it->second.model.empty())
        errors.push_back("endpoints." + to_string(role) + ".model is required");
    }
  }
  if (config.backend == "mock") {
    need(!config.mock_script.empty(),
         "run.mock_script is required for the mock backend");
  }
}

}  // namespace

std::vector<std::string> validate_config(const RunConfig& config) {
  std::vector<std::string> errors;
  auto need = [&](bool ok, const std::string& message) {
    if (!ok) errors.push_back(message);
  };

  need(config.resolved_questions() >= 1, "sampling.questions (I) must be >= 1");
  need(config.answers_per_question >= 2,
       "sampling.answers_per_question (J) must be >= 2");
  need(config.max_criteria >= 1, "sampling.max_criteria (K) must be >= 1");
  need(config.exemplar_count >= 1 && config.exemplar_count <= 10,
       "sampling.exemplar_count (m) must be in 1..10");
  need(!config.corpus_path.empty(), "corpus.path is required");
  need(!(config.corpus_format == CorpusFormat::kJsonlField &&
         (!config.text_field || config.text_field->empty())),
       "corpus.text_field is required for the jsonl-field format");
  need(config.example_workers >= 1, "run.example_workers must be >= 1");
  need(config.diagnostics_bins >= 1, "diagnostics.bins must be >= 1");
  append_inference_errors(config, errors, /*require_pipeline_endpoints=*/true);
  return errors;
}

std::vector<std::string> validate_inference_config(const RunConfig& config) {
  std::vector<std::string> errors;
  append_inference_errors(config, errors, /*require_pipeline_endpoints=*/false);
  return errors;
}

std::string config_hash(const RunConfig& config) {
  json j = config_to_json(config);
  // Output locations do not shape the data; two otherwise identical runs
  // into different directories must hash identically.
  j["run"].erase("output_dir");
  j["run"].erase("trace_dir");
  std::string canonical = j.dump();
  std::uint64_t hash = 1469598103934665603ull;  // FNV-1a 64
  for (unsigned char c : canonical) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return std::string(buf);
}

}  // namespace pop
