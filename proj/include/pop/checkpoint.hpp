#pragma once

#include <fstream>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "pop/pipeline.hpp"

namespace pop {

/// Per-example checkpointing under one output directory. Completed
/// examples append to raw_examples.jsonl as they finish (any order, one
/// flushed line each); finalize() rewrites the file in canonical
/// draw-index order so an uninterrupted run and any chain of resumed runs
/// produce byte-identical files. Failures append to failures.jsonl.
class CheckpointStore {
 public:
  explicit CheckpointStore(std::string dir);

  std::string raw_path() const;
  std::string failures_path() const;
  bool has_raw_file() const;

  /// Draw indices already present in raw_examples.jsonl; corrupt lines are
  /// skipped (their examples re-execute).
  std::set<std::size_t> completed_draw_indices() const;

  void append(const RawExample& example);
  void append_failure(const ExampleFailure& failure);

  /// Canonicalize: sort by draw index, drop duplicate indices (first
  /// occurrence wins), atomically replace the file.
  void finalize();

  std::vector<RawExample> load_all(bool skip_corrupt = true) const;

 private:
  void ensure_raw_open();
  void ensure_failures_open();

  std::string dir_;
  std::mutex mutex_;
  std::ofstream raw_out_;
  std::ofstream failures_out_;
};

/// Thread-safe JSONL mirror of every request/response for audit.
class FileTraceSink : public TraceSink {
 public:
  explicit FileTraceSink(const std::string& path);
  void record(const std::string& request_id, Role role,
              const ChatRequest& request, const std::string& outcome) override;

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

}  // namespace pop
