#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pop/pipeline.hpp"
#include "pop/templates.hpp"

namespace pop {

/// The unit of DPO output: one question with its extremal answer pair.
/// `prompt` is the rendered solver user prompt, so external trainers see
/// the exact conditioning used at sampling time.
struct PreferencePair {
  std::string example_id;
  std::string question;
  std::string prompt;
  std::string chosen;
  std::string rejected;
  double chosen_score = 0.0;
  double rejected_score = 0.0;
  std::size_t chosen_words = 0;
  std::size_t rejected_words = 0;
  int chosen_index = 0;
  int rejected_index = 0;
  std::string judge_mode;
  std::string config_hash;
};

enum class RejectReason {
  kQuestionUnextractable,
  kRubricUnextractable,
  kBadFormat,
  kZeroValidAnswers,
  kNoDistinctScores,
  kLengthGapExceeded,
};

std::string to_string(RejectReason reason);

struct ValidationVerdict {
  bool accepted = false;
  std::vector<RejectReason> reasons;  // accepted iff empty
};

/// One gradable answer: valid, with a well-formed evaluation report.
struct GradedAnswer {
  int answer_index = 0;
  const CandidateAnswer* answer = nullptr;
  double score = 0.0;
};

/// Valid answers paired with their non-malformed reports, ascending by
/// answer index.
std::vector<GradedAnswer> graded_answers(const RawExample& example);

/// Structural screen: drops malformed answers/reports, then rejects the
/// example when the question or (for rubric judge modes) rubric is missing,
/// the record is internally inconsistent, or no graded answer remains.
ValidationVerdict validate_example(const RawExample& example);

struct PairOutcome {
  std::optional<PreferencePair> pair;
  std::optional<RejectReason> reason;
  bool ok() const { return pair.has_value(); }
};

/// Extremal pairing: chosen = argmax score, rejected = argmin score, ties
/// broken by lowest answer index; rejected when the scores are equal or the
/// word-count gap exceeds 100.
PairOutcome pair_example(const RawExample& example, const TaskSpec& task);

inline constexpr std::size_t kMaxPairWordGap = 100;

struct PairingSummary {
  std::size_t total_examples = 0;
  std::size_t accepted = 0;
  std::size_t duplicates_skipped = 0;
  std::map<std::string, std::size_t> rejected_by_reason;
};

/// Streams accepted pairs as JSONL to `out` in input order (one JSON object
/// per line, keys sorted) and tallies a rejection summary. Duplicate
/// example ids after the first occurrence are skipped.
PairingSummary build_dpo_dataset(const std::vector<RawExample>& raw_dataset,
                                 const TaskSpec& task, std::ostream& out);

/// File-based variant: reads raw_examples.jsonl, writes dpo_dataset.jsonl
/// and a rejection-summary JSON next to it.
PairingSummary build_dpo_dataset_file(const std::string& raw_path,
                                      const TaskSpec& task,
                                      const std::string& out_path,
                                      const std::string& summary_path);

/// DPO objective for one preference pair, given policy and reference
/// log-probabilities of both responses: -log sigmoid(beta * margin),
/// computed as softplus(-beta * margin). Strictly decreasing in the margin.
double dpo_loss(double logp_chosen_policy, double logp_rejected_policy,
                double logp_chosen_ref, double logp_rejected_ref, double beta);

}  // namespace pop
