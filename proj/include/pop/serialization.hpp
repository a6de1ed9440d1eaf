#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pop/pipeline.hpp"

namespace pop {

struct PreferencePair;

inline constexpr const char* kRawExampleSchema = "raw_example.v1";
inline constexpr const char* kFailureSchema = "failure.v1";

nlohmann::json to_json(const Document& doc);
Document document_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RawExample& example);
RawExample raw_example_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ExampleFailure& failure);
ExampleFailure failure_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PreferencePair& pair);
PreferencePair pair_from_json(const nlohmann::json& j);

/// Reads a raw_examples.jsonl file; malformed lines raise with the line
/// number unless `skip_corrupt` is set, in which case they are dropped with
/// a note to stderr (the resume path relies on this).
std::vector<RawExample> load_raw_examples(const std::string& path,
                                          bool skip_corrupt = false);

std::vector<PreferencePair> load_pairs(const std::string& path);

}  // namespace pop
