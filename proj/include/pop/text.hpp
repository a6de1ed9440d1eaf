#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace pop {

// A word is a maximal run of non-whitespace bytes. Multi-byte UTF-8
// sequences never contain ASCII whitespace, so this is UTF-8 safe.
std::vector<std::string_view> split_words(std::string_view text);

std::size_t word_count(std::string_view text);

// First min(limit, n) words rejoined with single spaces.
std::string truncate_words(std::string_view text, std::size_t limit);

std::string_view trim(std::string_view text);

std::string to_lower(std::string_view text);

// Case-insensitive substring search; npos when absent.
std::size_t find_ci(std::string_view haystack, std::string_view needle,
                    std::size_t from = 0);

bool contains_ci(std::string_view haystack, std::string_view needle);

}  // namespace pop
