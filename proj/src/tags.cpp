#include "pop/tags.hpp"

#include <cctype>
#include <limits>

#include "pop/text.hpp"

namespace pop {

namespace {

struct TagBlock {
  std::size_t body_begin;
  std::size_t body_end;
  std::size_t close_end;
};

std::optional<TagBlock> find_block(std::string_view text, std::string_view tag,
                                   std::size_t from) {
  std::string open = "<" + std::string(tag) + ">";
  std::string close = "</" + std::string(tag) + ">";
  std::size_t o = find_ci(text, open, from);
  if (o == std::string_view::npos) return std::nullopt;
  std::size_t body = o + open.size();
  std::size_t c = find_ci(text, close, body);
  if (c == std::string_view::npos) return std::nullopt;
  return TagBlock{body, c, c + close.size()};
}

}  // namespace

std::optional<std::string> extract_tag(std::string_view text,
                                       std::string_view tag) {
  auto block = find_block(text, tag, 0);
  if (!block) return std::nullopt;
  return std::string(trim(text.substr(block->body_begin,
                                      block->body_end - block->body_begin)));
}

std::vector<std::string> extract_all_tags(std::string_view text,
                                          std::string_view tag) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    auto block = find_block(text, tag, pos);
    if (!block) break;
    out.emplace_back(trim(text.substr(block->body_begin,
                                      block->body_end - block->body_begin)));
    pos = block->close_end;
  }
  return out;
}

std::optional<long> first_int(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    bool digit = std::isdigit(static_cast<unsigned char>(c)) != 0;
    bool sign = (c == '-' || c == '+') && i + 1 < text.size() &&
                std::isdigit(static_cast<unsigned char>(text[i + 1])) != 0;
    if (!digit && !sign) continue;
    std::size_t j = i + (sign ? 1 : 0);
    long value = 0;
    bool overflow = false;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
      if (value > (std::numeric_limits<long>::max() - 9) / 10) overflow = true;
      if (!overflow) value = value * 10 + (text[j] - '0');
      ++j;
    }
    if (overflow) return std::nullopt;
    return c == '-' ? -value : value;
  }
  return std::nullopt;
}

}  // namespace pop
