#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pop {

// Extraction of <tag>...</tag> blocks from model completions. Matching is
// case-insensitive and tolerant of prose around the blocks; the first
// well-formed occurrence wins.
std::optional<std::string> extract_tag(std::string_view text,
                                       std::string_view tag);

// Every non-overlapping occurrence, in document order.
std::vector<std::string> extract_all_tags(std::string_view text,
                                          std::string_view tag);

// First decimal integer (optionally signed) in the text.
std::optional<long> first_int(std::string_view text);

}  // namespace pop
