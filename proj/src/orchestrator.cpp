#include "pop/orchestrator.hpp"

#include <atomic>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "pop/http_backend.hpp"
#include "pop/mock_backend.hpp"
#include "pop/pairing.hpp"
#include "pop/serialization.hpp"

namespace pop {

using json = nlohmann::json;

PipelineSettings settings_from_config(const RunConfig& config) {
  PipelineSettings settings;
  if (config.template_dir.empty()) {
    settings.task = default_task_spec(config.task);
    settings.shared = default_shared_templates();
  } else {
    settings.task = load_task_spec(config.template_dir, config.task);
    settings.shared = load_shared_templates(config.template_dir, config.task);
  }

  auto endpoint_for = [&](Role role) {
    RoleEndpoint endpoint;
    endpoint.role = role;
    auto it = config.endpoints.find(role);
    if (it != config.endpoints.end()) {
      endpoint.base_url = it->second.base_url;
      endpoint.model_name = it->second.model;
      endpoint.api_key_env = it->second.api_key_env;
      endpoint.max_context = it->second.max_context;
    }
    return endpoint;
  };
  settings.proposer = endpoint_for(Role::kProposer);
  settings.solver = endpoint_for(Role::kSolver);
  settings.verifier = endpoint_for(Role::kVerifier);

  settings.proposer_params = {config.proposer_stage.temperature,
                              config.proposer_stage.top_p,
                              config.proposer_stage.max_new_tokens};
  settings.solver_params = {config.solver_stage.temperature,
                            config.solver_stage.top_p,
                            config.solver_stage.max_new_tokens};
  settings.rubric_params = {config.rubric_stage.temperature,
                            config.rubric_stage.top_p,
                            config.rubric_stage.max_new_tokens};
  settings.grading_params = {config.grading_stage.temperature,
                             config.grading_stage.top_p,
                             config.grading_stage.max_new_tokens};

  settings.answers_per_question = config.answers_per_question;
  settings.max_criteria = config.max_criteria;
  settings.exemplar_count = config.exemplar_count;
  settings.judge_mode = config.judge_mode;
  settings.ground_question = config.ground_question;
  settings.ground_rubric = config.ground_rubric;
  settings.parallelism = config.parallelism;
  settings.config_hash = config_hash(config);
  return settings;
}

std::shared_ptr<MockBackend> load_mock_script(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open mock script " + path);
  json script = json::parse(in, nullptr, false);
  if (script.is_discarded())
    throw std::runtime_error("mock script is not valid JSON: " + path);

  auto mock = std::make_shared<MockBackend>();
  const json& entries = script.is_array() ? script : script.at("entries");
  for (const auto& entry : entries) {
    std::vector<MockBackend::Reply> replies;
    for (const auto& r : entry.at("replies")) {
      MockBackend::Reply reply;
      if (r.contains("fail")) {
        std::string kind = r["fail"].get<std::string>();
        if (kind == "transient") reply.fail_transient = true;
        else reply.fail_terminal = true;
      } else {
        reply.text = r.value("text", std::string{});
        if (r.value("finish_reason", std::string{"stop"}) == "length")
          reply.finish_reason = FinishReason::kLength;
      }
      replies.push_back(std::move(reply));
    }
    mock->script(entry.at("match").get<std::string>(), std::move(replies),
                 entry.value("repeat_last", false));
  }
  return mock;
}

std::shared_ptr<Backend> make_backend(const RunConfig& config) {
  if (config.backend == "mock") return load_mock_script(config.mock_script);
  return std::make_shared<HttpBackend>();
}

Gateway make_gateway(const RunConfig& config, std::shared_ptr<Backend> backend,
                     Gateway::SleepFn sleep) {
  RetryPolicy policy;
  policy.max_retries = config.retry.max_retries;
  policy.base_delay = std::chrono::milliseconds(config.retry.base_delay_ms);
  policy.factor = config.retry.factor;
  policy.jitter = config.retry.jitter;
  return Gateway(std::move(backend), policy, std::move(sleep));
}

RunReport run_synthesize(const RunConfig& config, Gateway& gateway,
                         bool resume, TraceSink* trace) {
  RunReport report;
  report.config_hash = config_hash(config);
  report.judge_mode = to_string(config.judge_mode);
  report.requested = config.resolved_questions();

  CorpusHandle corpus =
      load_corpus(config.corpus_path, config.corpus_format, config.text_field,
                  config.corpus_strict);
  SampleResult sample =
      sample_documents(corpus, report.requested, config.seed);
  report.sampled = sample.documents.size();
  report.corpus_exhausted = sample.exhausted;

  CheckpointStore store(config.output_dir);
  if (store.has_raw_file() && !resume)
    throw std::runtime_error(
        store.raw_path() +
        " already exists; pass --resume to continue that run");
  std::set<std::size_t> completed;
  if (resume) completed = store.completed_draw_indices();

  PipelineSettings settings = settings_from_config(config);

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < sample.documents.size(); ++i) {
    if (completed.count(i)) {
      ++report.skipped_completed;
      continue;
    }
    todo.push_back(i);
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> succeeded{0};
  std::atomic<std::size_t> failed{0};
  auto worker = [&]() {
    while (true) {
      std::size_t slot = next.fetch_add(1);
      if (slot >= todo.size()) break;
      std::size_t draw_index = todo[slot];
      ExampleResult result;
      try {
        result = run_example(gateway, settings, sample.documents[draw_index],
                             draw_index, trace);
      } catch (const std::exception& e) {
        result.failure = ExampleFailure{draw_index,
                                        sample.documents[draw_index].id,
                                        "internal", e.what()};
      }
      if (result.ok()) {
        store.append(*result.example);
        succeeded.fetch_add(1);
      } else {
        store.append_failure(*result.failure);
        failed.fetch_add(1);
        std::cerr << "example " << result.failure->example_id << " failed at "
                  << result.failure->stage << ": " << result.failure->reason
                  << "\n";
      }
    }
  };

  std::size_t n_threads = std::min<std::size_t>(
      static_cast<std::size_t>(config.example_workers), todo.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  report.succeeded = succeeded.load();
  report.failed = failed.load();

  store.finalize();

  // Filtering verdicts for the run report / exit status.
  for (const auto& example : store.load_all()) {
    ValidationVerdict verdict = validate_example(example);
    if (!verdict.accepted) {
      ++report.rejected_by_reason[to_string(verdict.reasons.front())];
      continue;
    }
    ++report.accepted;
    PairOutcome outcome = pair_example(example, settings.task);
    if (outcome.ok()) ++report.paired;
    else ++report.rejected_by_reason[to_string(*outcome.reason)];
  }
  return report;
}

void write_run_report(const RunReport& report, const std::string& path) {
  json j{
      {"config_hash", report.config_hash},
      {"judge_mode", report.judge_mode},
      {"requested", report.requested},
      {"sampled", report.sampled},
      {"corpus_exhausted", report.corpus_exhausted},
      {"skipped_completed", report.skipped_completed},
      {"succeeded", report.succeeded},
      {"failed", report.failed},
      {"accepted", report.accepted},
      {"paired", report.paired},
      {"rejected", report.rejected_by_reason},
  };
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace pop
