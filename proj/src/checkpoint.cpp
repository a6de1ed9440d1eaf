#include "pop/checkpoint.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pop/serialization.hpp"

namespace fs = std::filesystem;

namespace pop {

CheckpointStore::CheckpointStore(std::string dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
}

std::string CheckpointStore::raw_path() const {
  return (fs::path(dir_) / "raw_examples.jsonl").string();
}

std::string CheckpointStore::failures_path() const {
  return (fs::path(dir_) / "failures.jsonl").string();
}

bool CheckpointStore::has_raw_file() const { return fs::exists(raw_path()); }

std::set<std::size_t> CheckpointStore::completed_draw_indices() const {
  std::set<std::size_t> indices;
  if (!fs::exists(raw_path())) return indices;
  for (const auto& example : load_raw_examples(raw_path(), /*skip_corrupt=*/true))
    indices.insert(example.draw_index);
  return indices;
}

void CheckpointStore::ensure_raw_open() {
  if (!raw_out_.is_open()) {
    raw_out_.open(raw_path(), std::ios::binary | std::ios::app);
    if (!raw_out_)
      throw std::runtime_error("cannot open checkpoint file " + raw_path());
  }
}

void CheckpointStore::ensure_failures_open() {
  if (!failures_out_.is_open()) {
    failures_out_.open(failures_path(), std::ios::binary | std::ios::app);
    if (!failures_out_)
      throw std::runtime_error("cannot open failures file " + failures_path());
  }
}

void CheckpointStore::append(const RawExample& example) {
  std::lock_guard<std::mutex> lock(mutex_);
  ensure_raw_open();
  raw_out_ << to_json(example).dump() << "\n";
  raw_out_.flush();
}

void CheckpointStore::append_failure(const ExampleFailure& failure) {
  std::lock_guard<std::mutex> lock(mutex_);
  ensure_failures_open();
  failures_out_ << to_json(failure).dump() << "\n";
  failures_out_.flush();
}

void CheckpointStore::finalize() {
  std::lock_guard<std::mutex> lock(mutex_);
  if (!fs::exists(raw_path())) return;
  if (raw_out_.is_open()) raw_out_.close();

  auto examples = load_raw_examples(raw_path(), /*skip_corrupt=*/true);
  std::stable_sort(examples.begin(), examples.end(),
                   [](const RawExample& a, const RawExample& b) {
                     return a.draw_index < b.draw_index;
                   });
  std::set<std::size_t> seen;
  std::string tmp = raw_path() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    for (const auto& example : examples) {
      if (!seen.insert(example.draw_index).second) continue;
      out << to_json(example).dump() << "\n";
    }
    out.flush();
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  fs::rename(tmp, raw_path());
}

std::vector<RawExample> CheckpointStore::load_all(bool skip_corrupt) const {
  if (!fs::exists(raw_path())) return {};
  return load_raw_examples(raw_path(), skip_corrupt);
}

FileTraceSink::FileTraceSink(const std::string& path) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_) throw std::runtime_error("cannot open trace file " + path);
}

void FileTraceSink::record(const std::string& request_id, Role role,
                           const ChatRequest& request,
                           const std::string& outcome) {
  nlohmann::json j{
      {"request_id", request_id},
      {"role", to_string(role)},
      {"system", request.system},
      {"user", request.user},
      {"temperature", request.temperature},
      {"outcome", outcome},
  };
  std::lock_guard<std::mutex> lock(mutex_);
  out_ << j.dump() << "\n";
  out_.flush();
}

}  // namespace pop
