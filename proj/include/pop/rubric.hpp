#pragma once

#include <optional>
#include <string>
#include <vector>

namespace pop {

/// One weighted criterion of a question-specific rubric. The gold label is
/// a ground-truth fact lifted from the grounding document, when one exists.
struct Criterion {
  std::string name;
  std::string description;
  std::optional<std::string> gold_label;
  int weight = 1;  // >= 1
};

struct Rubric {
  std::vector<Criterion> criteria;  // 1 <= size <= K

  int total_weight() const {
    int sum = 0;
    for (const auto& c : criteria) sum += c.weight;
    return sum;
  }
};

/// Plain-text block used when embedding a rubric into grading prompts:
/// one numbered entry per criterion with description, optional gold label
/// and weight.
std::string format_rubric(const Rubric& rubric);

}  // namespace pop
