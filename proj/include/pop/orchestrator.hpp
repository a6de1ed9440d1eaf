#pragma once

#include <map>
#include <memory>
#include <string>

#include "pop/checkpoint.hpp"
#include "pop/config.hpp"
#include "pop/gateway.hpp"
#include "pop/pipeline.hpp"

namespace pop {

/// Materializes endpoints, templates and stage parameters from a config.
PipelineSettings settings_from_config(const RunConfig& config);

/// http or mock (driven by a JSON replay script) per config.backend.
std::shared_ptr<Backend> make_backend(const RunConfig& config);

/// Replay script loader: [{"match": "...", "repeat_last": bool,
/// "replies": [{"text": "..."} | {"fail": "transient"|"terminal"} |
/// {"text": "...", "finish_reason": "length"}]}[]
std::shared_ptr<class MockBackend> load_mock_script(const std::string& path);

Gateway make_gateway(const RunConfig& config, std::shared_ptr<Backend> backend,
                     Gateway::SleepFn sleep = {});

struct RunReport {
  std::string config_hash;
  std::string judge_mode;
  std::size_t requested = 0;          // I
  std::size_t sampled = 0;            // documents drawn (<= I when exhausted)
  bool corpus_exhausted = false;
  std::size_t skipped_completed = 0;  // resumed examples, zero calls issued
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  std::size_t accepted = 0;           // examples passing the filter
  std::size_t paired = 0;             // examples that also yield a pair
  std::map<std::string, std::size_t> rejected_by_reason;
};

/// The full sampling loop with checkpoint/resume: samples I documents,
/// skips draw indices already checkpointed (when resume is set), runs the
/// rest across example workers, canonicalizes the checkpoint, and tallies
/// filtering verdicts. Refuses to touch a populated output directory
/// unless resume is set.
RunReport run_synthesize(const RunConfig& config, Gateway& gateway,
                         bool resume, TraceSink* trace = nullptr);

void write_run_report(const RunReport& report, const std::string& path);

}  // namespace pop
