#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pop/gateway.hpp"
#include "pop/pairing.hpp"
#include "pop/pipeline.hpp"

namespace pop {

/// Dataset-level statistics over accepted examples (means per question)
/// and over pairs (chosen/rejected means). Per-question std is the
/// population standard deviation.
struct DatasetStats {
  std::size_t n_questions = 0;
  double mean_valid_answers = 0.0;
  double mean_criteria = 0.0;
  double mean_score = 0.0;
  double mean_per_question_std = 0.0;
  double mean_chosen_score = 0.0;
  double mean_rejected_score = 0.0;
};

DatasetStats dataset_stats(const std::vector<RawExample>& raw_dataset,
                           const std::vector<PreferencePair>& pairs);

struct ScoreBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double fraction = 0.0;
  double mean_of_means = 0.0;
  double mean_of_stds = 0.0;
};

/// Groups answers by question, computes per-question score mean/std, and
/// bins the questions by mean into n_bins equal-width bins over [0,2].
/// Empty input yields an empty report.
std::vector<ScoreBin> score_distribution_bins(
    const std::vector<RawExample>& raw_dataset, int n_bins = 10,
    double lower = 0.0, double upper = 2.0);

/// Rank percentiles in [0,100]: the highest score maps to 0, the lowest to
/// 100; ties share the mean of their positions; a single element maps to 0.
std::vector<double> percentile_ranks(const std::vector<double>& scores);

/// Spearman's rank correlation: Pearson correlation of tie-adjusted (mean)
/// ranks. Requires aligned lists of length >= 2; a constant list has no
/// defined correlation and throws std::domain_error.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

enum class GoldMode { kFreshRubric, kSameRubric };

std::string to_string(GoldMode mode);

/// Gold aggregate scores keyed by (example_id, answer_index); covers the
/// answers graded by the primary run, minus per-answer regrade failures.
struct GoldReport {
  GoldMode mode = GoldMode::kSameRubric;
  std::map<std::pair<std::string, int>, double> scores;
  std::vector<std::string> failures;  // "<example_id>/<answer_index>: why"
};

/// Percentage of pairs whose gold score of chosen >= gold score of rejected
/// (equivalently gold rank of chosen <= gold rank of rejected; ties count as
/// agreement). Pairs without gold coverage drop out of the denominator;
/// `counted_out` (when given) receives the denominator size.
double pairwise_ranking_accuracy(const std::vector<PreferencePair>& pairs,
                                 const GoldReport& gold,
                                 std::size_t* counted_out = nullptr);

/// Regrades the primary run's answers on the gold endpoint
/// (settings.verifier). same_rubric reuses each example's rubric and reruns
/// grading only; fresh_rubric regenerates the rubric first, then grades.
GoldReport regrade_with_gold(Gateway& gateway,
                             const PipelineSettings& gold_settings,
                             const std::vector<RawExample>& raw_dataset,
                             GoldMode mode, TraceSink* trace = nullptr);

enum class CategorizeKind { kQuestionTopics, kMetaCriteria };

/// Raised when the label-elicitation response yields no labels; the raw
/// completion is preserved for inspection.
class LabelSetError : public std::runtime_error {
 public:
  LabelSetError(const std::string& what, std::string raw)
      : std::runtime_error(what), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

struct Categorization {
  std::vector<std::string> labels;       // elicited label set
  std::vector<std::string> assignments;  // one per item; "Other" if needed
  std::vector<std::string> warnings;
};

/// Two-phase labeling on the categorizer endpoint: a label set elicited
/// from a seeded sample of at most n_sample items, then batched assignment
/// of every item to exactly one label ("Other" when unassignable).
Categorization categorize(Gateway& gateway, const PipelineSettings& settings,
                          const std::vector<std::string>& items,
                          CategorizeKind kind, std::size_t n_sample = 200,
                          std::uint64_t seed = 0, std::size_t batch_size = 20,
                          TraceSink* trace = nullptr);

// Report emission for external plotting.
void write_bins_csv(const std::vector<ScoreBin>& bins, const std::string& path);
void write_stats_json(const DatasetStats& stats, const std::string& path,
                      const std::string& config_hash,
                      const std::string& judge_mode);

}  // namespace pop
