#include "pop/pairing.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pop/serialization.hpp"
#include "pop/text.hpp"

namespace pop {

std::string to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::kQuestionUnextractable: return "question_unextractable";
    case RejectReason::kRubricUnextractable: return "rubric_unextractable";
    case RejectReason::kBadFormat: return "bad_format";
    case RejectReason::kZeroValidAnswers: return "zero_valid_answers";
    case RejectReason::kNoDistinctScores: return "no_distinct_scores";
    case RejectReason::kLengthGapExceeded: return "length_gap_exceeded";
  }
  return "unknown";
}

std::vector<GradedAnswer> graded_answers(const RawExample& example) {
  std::vector<GradedAnswer> graded;
  for (const auto& report : example.reports) {
    if (report.malformed) continue;
    const CandidateAnswer* answer = nullptr;
    for (const auto& a : example.answers) {
      if (a.index == report.answer_index) {
        answer = &a;
        break;
      }
    }
    if (!answer || !answer->valid) continue;
    graded.push_back({report.answer_index, answer, report.aggregate});
  }
  return graded;
}

ValidationVerdict validate_example(const RawExample& example) {
  ValidationVerdict verdict;
  auto add = [&](RejectReason reason) {
    for (auto r : verdict.reasons)
      if (r == reason) return;
    verdict.reasons.push_back(reason);
  };

  if (trim(example.question.text).empty())
    add(RejectReason::kQuestionUnextractable);

  auto mode = judge_mode_from_string(example.judge_mode);
  bool needs_rubric = !mode || judge_mode_uses_rubric(*mode);
  std::size_t n_valid = 0;
  for (const auto& a : example.answers)
    if (a.valid) ++n_valid;

  if (needs_rubric && example.rubric.criteria.empty() && n_valid > 0)
    add(RejectReason::kRubricUnextractable);

  // Structural consistency of the record itself.
  if (example.reports.size() != n_valid) {
    add(RejectReason::kBadFormat);
  } else {
    std::set<int> seen;
    for (const auto& report : example.reports) {
      if (!seen.insert(report.answer_index).second)
        add(RejectReason::kBadFormat);
      bool known_valid = false;
      for (const auto& a : example.answers)
        if (a.index == report.answer_index && a.valid) known_valid = true;
      if (!known_valid) add(RejectReason::kBadFormat);
      if (needs_rubric && !report.malformed) {
        if (report.per_criterion.size() != example.rubric.criteria.size())
          add(RejectReason::kBadFormat);
        for (const auto& eval : report.per_criterion)
          if (eval.rating < 0 || eval.rating > 2)
            add(RejectReason::kBadFormat);
      }
    }
  }
  for (const auto& criterion : example.rubric.criteria)
    if (criterion.weight < 1) add(RejectReason::kBadFormat);

  if (graded_answers(example).empty()) add(RejectReason::kZeroValidAnswers);

  verdict.accepted = verdict.reasons.empty();
  return verdict;
}

PairOutcome pair_example(const RawExample& example, const TaskSpec& task) {
  std::vector<GradedAnswer> graded = graded_answers(example);
  PairOutcome outcome;
  if (graded.empty()) {
    outcome.reason = RejectReason::kZeroValidAnswers;
    return outcome;
  }

  // Ties break toward the lowest answer index; graded is index-ascending.
  const GradedAnswer* best = &graded.front();
  const GradedAnswer* worst = &graded.front();
  for (const auto& g : graded) {
    if (g.score > best->score) best = &g;
    if (g.score < worst->score) worst = &g;
  }
  if (best->score == worst->score) {
    outcome.reason = RejectReason::kNoDistinctScores;
    return outcome;
  }
  std::size_t gap = best->answer->word_count > worst->answer->word_count
                        ? best->answer->word_count - worst->answer->word_count
                        : worst->answer->word_count - best->answer->word_count;
  if (gap > kMaxPairWordGap) {
    outcome.reason = RejectReason::kLengthGapExceeded;
    return outcome;
  }

  PreferencePair pair;
  pair.example_id = example.example_id;
  pair.question = example.question.text;
  pair.prompt = render_answer_prompt(task, example.question.text).user;
  pair.chosen = best->answer->text;
  pair.rejected = worst->answer->text;
  pair.chosen_score = best->score;
  pair.rejected_score = worst->score;
  pair.chosen_words = best->answer->word_count;
  pair.rejected_words = worst->answer->word_count;
  pair.chosen_index = best->answer_index;
  pair.rejected_index = worst->answer_index;
  pair.judge_mode = example.judge_mode;
  pair.config_hash = example.config_hash;
  outcome.pair = std::move(pair);
  return outcome;
}

namespace {

RejectReason first_reason(const std::vector<RejectReason>& reasons) {
  // Priority follows the validation order; reasons is already collected in
  // that order, so the front is the primary one.
  return reasons.front();
}

}  // namespace

PairingSummary build_dpo_dataset(const std::vector<RawExample>& raw_dataset,
                                 const TaskSpec& task, std::ostream& out) {
  PairingSummary summary;
  std::set<std::string> seen_ids;
  for (const auto& example : raw_dataset) {
    if (!seen_ids.insert(example.example_id).second) {
      ++summary.duplicates_skipped;
      continue;
    }
    ++summary.total_examples;
    ValidationVerdict verdict = validate_example(example);
    if (!verdict.accepted) {
      ++summary.rejected_by_reason[to_string(first_reason(verdict.reasons))];
      continue;
    }
    PairOutcome outcome = pair_example(example, task);
    if (!outcome.ok()) {
      ++summary.rejected_by_reason[to_string(*outcome.reason)];
      continue;
    }
    ++summary.accepted;
    out << to_json(*outcome.pair).dump() << "\n";
  }
  return summary;
}

PairingSummary build_dpo_dataset_file(const std::string& raw_path,
                                      const TaskSpec& task,
                                      const std::string& out_path,
                                      const std::string& summary_path) {
  std::vector<RawExample> dataset = load_raw_examples(raw_path);
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  PairingSummary summary = build_dpo_dataset(dataset, task, out);
  out.flush();
  if (!out) throw std::runtime_error("short write to " + out_path);

  nlohmann::json report;
  report["total_examples"] = summary.total_examples;
  report["accepted"] = summary.accepted;
  report["duplicates_skipped"] = summary.duplicates_skipped;
  report["rejected"] = summary.rejected_by_reason;
  std::ofstream summary_out(summary_path, std::ios::binary | std::ios::trunc);
  if (!summary_out) throw std::runtime_error("cannot write " + summary_path);
  summary_out << report.dump(2) << "\n";
  return summary;
}

double dpo_loss(double logp_chosen_policy, double logp_rejected_policy,
                double logp_chosen_ref, double logp_rejected_ref, double beta) {
  if (!(beta > 0.0)) throw std::domain_error("dpo_loss: beta must be > 0");
  for (double v : {logp_chosen_policy, logp_rejected_policy, logp_chosen_ref,
                   logp_rejected_ref}) {
    if (!std::isfinite(v))
      throw std::domain_error("dpo_loss: non-finite log-probability");
  }
  double margin = beta * ((logp_chosen_policy - logp_chosen_ref) -
                          (logp_rejected_policy - logp_rejected_ref));
  // -log sigmoid(m) == softplus(-m), in the overflow-safe split form.
  double x = -margin;
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace pop
