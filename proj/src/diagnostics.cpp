#include "pop/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pop/tags.hpp"
#include "pop/text.hpp"

namespace pop {

namespace {

struct QuestionScores {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

std::optional<QuestionScores> question_scores(const RawExample& example) {
  auto graded = graded_answers(example);
  if (graded.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& g : graded) sum += g.score;
  double mean = sum / static_cast<double>(graded.size());
  double var = 0.0;
  for (const auto& g : graded) var += (g.score - mean) * (g.score - mean);
  var /= static_cast<double>(graded.size());
  return QuestionScores{mean, std::sqrt(var)};
}

double mean_of(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

// Mean (tie-adjusted) ranks, ascending: smallest value gets rank 1.
std::vector<double> mean_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(values.size(), 0.0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() &&
           values[order[j + 1]] == values[order[i]])
      ++j;
    double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  double n = static_cast<double>(a.size());
  double mean_a = mean_of(a);
  double mean_b = mean_of(b);
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - mean_a) * (b[i] - mean_b);
    var_a += (a[i] - mean_a) * (a[i] - mean_a);
    var_b += (b[i] - mean_b) * (b[i] - mean_b);
  }
  (void)n;
  return cov / std::sqrt(var_a * var_b);
}

}  // namespace

DatasetStats dataset_stats(const std::vector<RawExample>& raw_dataset,
                           const std::vector<PreferencePair>& pairs) {
  DatasetStats stats;
  std::vector<double> valid_counts, criteria_counts, means, stds;
  for (const auto& example : raw_dataset) {
    if (!validate_example(example).accepted) continue;
    auto graded = graded_answers(example);
    auto scores = question_scores(example);
    valid_counts.push_back(static_cast<double>(graded.size()));
    criteria_counts.push_back(
        static_cast<double>(example.rubric.criteria.size()));
    if (scores) {
      means.push_back(scores->mean);
      stds.push_back(scores->stddev);
    }
  }
  stats.n_questions = valid_counts.size();
  stats.mean_valid_answers = mean_of(valid_counts);
  stats.mean_criteria = mean_of(criteria_counts);
  stats.mean_score = mean_of(means);
  stats.mean_per_question_std = mean_of(stds);

  std::vector<double> chosen, rejected;
  for (const auto& pair : pairs) {
    chosen.push_back(pair.chosen_score);
    rejected.push_back(pair.rejected_score);
  }
  stats.mean_chosen_score = mean_of(chosen);
  stats.mean_rejected_score = mean_of(rejected);
  return stats;
}

std::vector<ScoreBin> score_distribution_bins(
    const std::vector<RawExample>& raw_dataset, int n_bins, double lower,
    double upper) {
  if (n_bins < 1) throw std::invalid_argument("n_bins must be >= 1");
  if (!(upper > lower)) throw std::invalid_argument("empty bin range");

  std::vector<QuestionScores> questions;
  for (const auto& example : raw_dataset) {
    if (!validate_example(example).accepted) continue;
    if (auto scores = question_scores(example)) questions.push_back(*scores);
  }
  if (questions.empty()) return {};

  double width = (upper - lower) / n_bins;
  std::vector<ScoreBin> bins(static_cast<std::size_t>(n_bins));
  std::vector<std::vector<QuestionScores>> grouped(bins.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    bins[b].lower = lower + width * static_cast<double>(b);
    bins[b].upper = lower + width * static_cast<double>(b + 1);
  }
  for (const auto& q : questions) {
    auto idx = static_cast<long>(std::floor((q.mean - lower) / width));
    idx = std::clamp<long>(idx, 0, n_bins - 1);
    grouped[static_cast<std::size_t>(idx)].push_back(q);
  }
  for (std::size_t b = 0; b < bins.size(); ++b) {
    bins[b].count = grouped[b].size();
    bins[b].fraction =
        static_cast<double>(grouped[b].size()) / questions.size();
    std::vector<double> ms, ss;
    for (const auto& q : grouped[b]) {
      ms.push_back(q.mean);
      ss.push_back(q.stddev);
    }
    bins[b].mean_of_means = mean_of(ms);
    bins[b].mean_of_stds = mean_of(ss);
  }
  return bins;
}

std::vector<double> percentile_ranks(const std::vector<double>& scores) {
  if (scores.empty()) return {};
  if (scores.size() == 1) return {0.0};
  // Rank descending: higher score, smaller percentile.
  std::vector<double> negated;
  negated.reserve(scores.size());
  for (double s : scores) negated.push_back(-s);
  std::vector<double> ranks = mean_ranks(negated);  // 1-based
  std::vector<double> out;
  out.reserve(scores.size());
  double denom = static_cast<double>(scores.size() - 1);
  for (double r : ranks) out.push_back(100.0 * (r - 1.0) / denom);
  return out;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("spearman: length mismatch");
  if (a.size() < 2)
    throw std::invalid_argument("spearman: need at least two observations");
  auto constant = [](const std::vector<double>& v) {
    for (double x : v)
      if (x != v.front()) return false;
    return true;
  };
  if (constant(a) || constant(b))
    throw std::domain_error("spearman: correlation undefined for constant list");
  return pearson(mean_ranks(a), mean_ranks(b));
}

std::string to_string(GoldMode mode) {
  return mode == GoldMode::kFreshRubric ? "fresh_rubric" : "same_rubric";
}

double pairwise_ranking_accuracy(const std::vector<PreferencePair>& pairs,
                                 const GoldReport& gold,
                                 std::size_t* counted_out) {
  std::size_t counted = 0;
  std::size_t agree = 0;
  for (const auto& pair : pairs) {
    auto chosen = gold.scores.find({pair.example_id, pair.chosen_index});
    auto rejected = gold.scores.find({pair.example_id, pair.rejected_index});
    if (chosen == gold.scores.end() || rejected == gold.scores.end()) continue;
    ++counted;
    if (chosen->second >= rejected->second) ++agree;
  }
  if (counted_out) *counted_out = counted;
  if (counted == 0) return 0.0;
  return 100.0 * static_cast<double>(agree) / static_cast<double>(counted);
}

GoldReport regrade_with_gold(Gateway& gateway,
                             const PipelineSettings& gold_settings,
                             const std::vector<RawExample>& raw_dataset,
                             GoldMode mode, TraceSink* trace) {
  GoldReport report;
  report.mode = mode;

  for (const auto& example : raw_dataset) {
    auto graded = graded_answers(example);
    if (graded.empty()) continue;

    Rubric rubric = example.rubric;
    if (mode == GoldMode::kFreshRubric) {
      std::vector<CandidateAnswer> pool;
      for (const auto& g : graded) pool.push_back(*g.answer);
      std::optional<Document> doc;
      if (gold_settings.ground_rubric) doc = example.doc;
      try {
        auto exemplars = select_rubric_exemplars(
            pool, static_cast<std::size_t>(gold_settings.exemplar_count));
        auto fresh = generate_rubric(gateway, gold_settings, doc,
                                     example.question.text,
                                     example.ref_answer.text, exemplars, trace,
                                     example.example_id + "/gold/rubric");
        if (!fresh.ok()) {
          report.failures.push_back(example.example_id +
                                    ": gold rubric parse failure");
          continue;
        }
        rubric = fresh.value().rubric;
      } catch (const std::exception& e) {
        report.failures.push_back(example.example_id + ": " + e.what());
        continue;
      }
    } else if (rubric.criteria.empty()) {
      report.failures.push_back(example.example_id + ": no rubric to reuse");
      continue;
    }

    std::vector<ChatRequest> requests;
    for (const auto& g : graded) {
      PromptPair prompt = render_grading_prompt(
          gold_settings.shared, example.question.text, rubric, g.answer->text,
          TokenBudget{gold_settings.verifier.max_context,
                      gold_settings.grading_params.max_new_tokens});
      ChatRequest request;
      request.system = prompt.system;
      request.user = prompt.user;
      request.temperature = gold_settings.grading_params.temperature;
      request.top_p = gold_settings.grading_params.top_p;
      request.max_new_tokens = gold_settings.grading_params.max_new_tokens;
      requests.push_back(std::move(request));
    }
    auto batch = gateway.complete_batch(gold_settings.verifier, requests,
                                        gold_settings.parallelism);
    for (const auto& item : batch) {
      const auto& g = graded[item.index];
      std::string request_id = example.example_id + "/gold/grade/" +
                               std::to_string(g.answer_index);
      if (trace)
        trace->record(request_id, gold_settings.verifier.role,
                      requests[item.index],
                      item.ok() ? item.response->text : "error: " + item.error);
      if (!item.ok()) {
        report.failures.push_back(example.example_id + "/" +
                                  std::to_string(g.answer_index) + ": " +
                                  item.error);
        continue;
      }
      EvaluationReport graded_report =
          parse_grading_output(item.response->text, rubric, g.answer_index);
      if (graded_report.malformed) {
        report.failures.push_back(example.example_id + "/" +
                                  std::to_string(g.answer_index) +
                                  ": unparseable gold report");
        continue;
      }
      report.scores[{example.example_id, g.answer_index}] =
          graded_report.aggregate;
    }
  }
  return report;
}

namespace {

constexpr const char* kTopicLabelSystem =
    R"(You will be given a sample of questions. Identify the common topics covering them: between 5 and 15 short topic names. Output one <label> block per topic, nothing else.)";

constexpr const char* kCriteriaLabelSystem =
    R"(You will be given a sample of grading criteria. Identify the common meta-criteria covering them: between 5 and 15 short names (e.g. Relevance, Accuracy, Clarity). Output one <label> block per meta-criterion, nothing else.)";

constexpr const char* kAssignSystem =
    R"(You will be given a list of labels and a numbered list of items. Assign each item exactly one label from the list. Output one block per item:
<assignment><index>item number</index><label>chosen label</label></assignment>)";

std::string items_block(const std::vector<std::string>& items,
                        std::size_t begin, std::size_t end) {
  std::ostringstream out;
  for (std::size_t i = begin; i < end; ++i)
    out << (i - begin + 1) << ". " << items[i] << "\n";
  return out.str();
}

}  // namespace

Categorization categorize(Gateway& gateway, const PipelineSettings& settings,
                          const std::vector<std::string>& items,
                          CategorizeKind kind, std::size_t n_sample,
                          std::uint64_t seed, std::size_t batch_size,
                          TraceSink* trace) {
  Categorization result;
  if (items.empty()) return result;
  if (batch_size == 0) batch_size = 20;

  RoleEndpoint endpoint = settings.verifier;
  endpoint.role = Role::kCategorizer;

  // Phase 1: elicit the label set from a seeded sample.
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(n_sample, order.size()));
  std::sort(order.begin(), order.end());

  std::ostringstream sample;
  for (std::size_t i = 0; i < order.size(); ++i)
    sample << (i + 1) << ". " << items[order[i]] << "\n";

  ChatRequest label_request;
  label_request.system = kind == CategorizeKind::kQuestionTopics
                             ? kTopicLabelSystem
                             : kCriteriaLabelSystem;
  label_request.user = sample.str();
  label_request.temperature = 0.0;
  label_request.max_new_tokens = settings.grading_params.max_new_tokens;
  ChatResponse label_response = gateway.complete(endpoint, label_request);
  if (trace)
    trace->record("categorize/labels", Role::kCategorizer, label_request,
                  label_response.text);
  result.labels = extract_all_tags(label_response.text, "label");
  result.labels.erase(
      std::remove_if(result.labels.begin(), result.labels.end(),
                     [](const std::string& l) { return l.empty(); }),
      result.labels.end());
  if (result.labels.empty())
    throw LabelSetError("no <label> blocks in categorizer response",
                        label_response.text);

  // Phase 2: assign every item exactly one label, in batches.
  std::ostringstream label_list;
  for (const auto& label : result.labels) label_list << "- " << label << "\n";

  result.assignments.assign(items.size(), "Other");
  std::size_t batch_no = 0;
  for (std::size_t begin = 0; begin < items.size(); begin += batch_size) {
    std::size_t end = std::min(begin + batch_size, items.size());
    ChatRequest request;
    request.system = kAssignSystem;
    request.user = "Labels:\n" + label_list.str() + "\nItems:\n" +
                   items_block(items, begin, end);
    request.temperature = 0.0;
    request.max_new_tokens = settings.grading_params.max_new_tokens;
    ChatResponse response = gateway.complete(endpoint, request);
    if (trace)
      trace->record("categorize/assign/" + std::to_string(batch_no++),
                    Role::kCategorizer, request, response.text);

    for (const auto& block : extract_all_tags(response.text, "assignment")) {
      auto index_text = extract_tag(block, "index");
      auto label = extract_tag(block, "label");
      if (!index_text || !label) continue;
      auto index = first_int(*index_text);
      if (!index || *index < 1 ||
          static_cast<std::size_t>(*index) > end - begin)
        continue;
      std::size_t item_pos = begin + static_cast<std::size_t>(*index) - 1;
      bool known = std::find(result.labels.begin(), result.labels.end(),
                             *label) != result.labels.end();
      if (known) {
        result.assignments[item_pos] = *label;
      } else {
        result.warnings.push_back("item " + std::to_string(item_pos) +
                                  " assigned unknown label \"" + *label +
                                  "\"; coerced to Other");
      }
    }
  }
  return result;
}

void write_bins_csv(const std::vector<ScoreBin>& bins, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "bin_lower,bin_upper,count,fraction,mean_of_means,mean_of_stds\n";
  for (const auto& bin : bins) {
    out << bin.lower << "," << bin.upper << "," << bin.count << ","
        << bin.fraction << "," << bin.mean_of_means << "," << bin.mean_of_stds
        << "\n";
  }
}

void write_stats_json(const DatasetStats& stats, const std::string& path,
                      const std::string& config_hash,
                      const std::string& judge_mode) {
  nlohmann::json j{
      {"n_questions", stats.n_questions},
      {"mean_valid_answers", stats.mean_valid_answers},
      {"mean_criteria", stats.mean_criteria},
      {"mean_score", stats.mean_score},
      {"mean_per_question_std", stats.mean_per_question_std},
      {"mean_chosen_score", stats.mean_chosen_score},
      {"mean_rejected_score", stats.mean_rejected_score},
      {"std_definition", "population"},
      {"config_hash", config_hash},
      {"judge_mode", judge_mode},
  };
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace pop
