#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "pop/pairing.hpp"
#include "pop/text.hpp"
#include "test_util.hpp"

using namespace pop;

namespace {

// no_rubric-mode fixture: reports carry bare aggregates, no rubric needed.
RawExample base_example(const std::string& id) {
  RawExample example;
  example.example_id = id;
  example.judge_mode = "no_rubric";
  example.config_hash = "feedfacefeedface";
  example.doc.id = id;
  example.doc.text = testutil::words(50);
  example.doc.word_count = 50;
  example.question.text = "What is it?";
  example.question.task_id = TaskId::kHealthcareQa;
  example.ref_answer.text = "It is.";
  return example;
}

void add_answer(RawExample& example, double score, std::size_t n_words,
                bool valid = true, bool malformed_report = false) {
  CandidateAnswer answer;
  answer.index = static_cast<int>(example.answers.size());
  answer.text = testutil::words(n_words, "a" + std::to_string(answer.index) + "_");
  answer.word_count = n_words;
  answer.valid = valid;
  example.answers.push_back(answer);
  if (!valid) return;
  EvaluationReport report;
  report.answer_index = answer.index;
  report.aggregate = score;
  report.malformed = malformed_report;
  example.reports.push_back(report);
}

RawExample rubric_example(const std::string& id) {
  RawExample example = base_example(id);
  example.judge_mode = "rubric_grounded";
  example.rubric.criteria.push_back({"crit", "desc", std::nullopt, 1});
  return example;
}

void add_rubric_answer(RawExample& example, int rating, std::size_t n_words) {
  CandidateAnswer answer;
  answer.index = static_cast<int>(example.answers.size());
  answer.text = testutil::words(n_words, "a" + std::to_string(answer.index) + "_");
  answer.word_count = n_words;
  answer.valid = true;
  example.answers.push_back(answer);
  EvaluationReport report;
  report.answer_index = answer.index;
  report.per_criterion.push_back({"thoughts", rating, true});
  report.aggregate = static_cast<double>(rating);
  example.reports.push_back(report);
}

TaskSpec task() { return default_task_spec(TaskId::kHealthcareQa); }

}  // namespace

TEST_CASE("word_count counts maximal non-whitespace runs") {
  CHECK(word_count("a b  c") == 3);
  CHECK(word_count("") == 0);
  CHECK(word_count("  x  ") == 1);
  CHECK(word_count("one\ttwo\nthree") == 3);
}

TEST_CASE("validate_example") {
  SUBCASE("parsed question, rubric, three graded answers: accepted") {
    RawExample example = rubric_example("e1");
    add_rubric_answer(example, 2, 100);
    add_rubric_answer(example, 1, 110);
    add_rubric_answer(example, 0, 120);
    auto verdict = validate_example(example);
    CHECK(verdict.accepted);
    CHECK(verdict.reasons.empty());
  }
  SUBCASE("every report malformed: zero_valid_answers") {
    RawExample example = rubric_example("e2");
    add_rubric_answer(example, 2, 100);
    add_rubric_answer(example, 1, 110);
    for (auto& report : example.reports) report.malformed = true;
    auto verdict = validate_example(example);
    CHECK_FALSE(verdict.accepted);
    REQUIRE(verdict.reasons.size() == 1);
    CHECK(verdict.reasons[0] == RejectReason::kZeroValidAnswers);
  }
  SUBCASE("missing rubric in a rubric judge mode") {
    RawExample example = rubric_example("e3");
    add_rubric_answer(example, 2, 100);
    example.rubric.criteria.clear();
    for (auto& report : example.reports) report.per_criterion.clear();
    auto verdict = validate_example(example);
    CHECK_FALSE(verdict.accepted);
    CHECK(verdict.reasons.front() == RejectReason::kRubricUnextractable);
  }
  SUBCASE("no_rubric mode does not require a rubric") {
    RawExample example = base_example("e4");
    add_answer(example, 7.0, 100);
    add_answer(example, 3.0, 120);
    CHECK(validate_example(example).accepted);
  }
  SUBCASE("empty question") {
    RawExample example = base_example("e5");
    add_answer(example, 1.0, 100);
    add_answer(example, 0.5, 110);
    example.question.text = "   ";
    auto verdict = validate_example(example);
    CHECK_FALSE(verdict.accepted);
    CHECK(verdict.reasons.front() == RejectReason::kQuestionUnextractable);
  }
  SUBCASE("report/answer misalignment is bad_format") {
    RawExample example = rubric_example("e6");
    add_rubric_answer(example, 2, 100);
    add_rubric_answer(example, 1, 110);
    example.reports.pop_back();  // one report short
    auto verdict = validate_example(example);
    CHECK_FALSE(verdict.accepted);
    CHECK(verdict.reasons.front() == RejectReason::kBadFormat);
  }
  SUBCASE("out-of-range rating is bad_format") {
    RawExample example = rubric_example("e7");
    add_rubric_answer(example, 2, 100);
    add_rubric_answer(example, 1, 110);
    example.reports[0].per_criterion[0].rating = 9;
    auto verdict = validate_example(example);
    CHECK_FALSE(verdict.accepted);
    CHECK(verdict.reasons.front() == RejectReason::kBadFormat);
  }
}

TEST_CASE("pair_example") {
  SUBCASE("argmax tie breaks to the lowest index, gap within bounds") {
    RawExample example = base_example("p1");
    add_answer(example, 1.5, 200);
    add_answer(example, 0.5, 210);
    add_answer(example, 1.5, 600);
    auto outcome = pair_example(example, task());
    REQUIRE(outcome.ok());
    CHECK(outcome.pair->chosen_index == 0);  // tie -> lowest index
    CHECK(outcome.pair->rejected_index == 1);
    CHECK(outcome.pair->chosen_score == 1.5);
    CHECK(outcome.pair->rejected_score == 0.5);
    CHECK(outcome.pair->chosen_words == 200);
    CHECK(outcome.pair->rejected_words == 210);
    CHECK(outcome.pair->question == "What is it?");
    CHECK(outcome.pair->prompt.find("What is it?") != std::string::npos);
  }
  SUBCASE("all scores equal: no_distinct_scores") {
    RawExample example = base_example("p2");
    add_answer(example, 1.0, 100);
    add_answer(example, 1.0, 120);
    add_answer(example, 1.0, 140);
    auto outcome = pair_example(example, task());
    REQUIRE_FALSE(outcome.ok());
    CHECK(*outcome.reason == RejectReason::kNoDistinctScores);
  }
  SUBCASE("word gap over 100: length_gap_exceeded") {
    RawExample example = base_example("p3");
    add_answer(example, 2.0, 500);
    add_answer(example, 0.0, 250);
    auto outcome = pair_example(example, task());
    REQUIRE_FALSE(outcome.ok());
    CHECK(*outcome.reason == RejectReason::kLengthGapExceeded);
  }
  SUBCASE("gap of exactly 100 words passes") {
    RawExample example = base_example("p4");
    add_answer(example, 2.0, 300);
    add_answer(example, 0.0, 200);
    CHECK(pair_example(example, task()).ok());
  }
  SUBCASE("single graded answer cannot pair") {
    RawExample example = base_example("p5");
    add_answer(example, 1.0, 100);
    auto outcome = pair_example(example, task());
    REQUIRE_FALSE(outcome.ok());
    CHECK(*outcome.reason == RejectReason::kNoDistinctScores);
  }
  SUBCASE("malformed reports are dropped before the argmax") {
    RawExample example = base_example("p6");
    add_answer(example, 9.0, 100, true, /*malformed_report=*/true);
    add_answer(example, 1.0, 110);
    add_answer(example, 0.0, 130);
    auto outcome = pair_example(example, task());
    REQUIRE(outcome.ok());
    CHECK(outcome.pair->chosen_index == 1);  // the malformed 9.0 is ignored
  }
}

TEST_CASE("build_dpo_dataset streams pairs and tallies rejections") {
  std::vector<RawExample> dataset;
  {
    RawExample accept = base_example("d1");
    add_answer(accept, 2.0, 100);
    add_answer(accept, 0.0, 150);
    dataset.push_back(accept);

    RawExample equal = base_example("d2");
    add_answer(equal, 1.0, 100);
    add_answer(equal, 1.0, 110);
    dataset.push_back(equal);

    RawExample gap = base_example("d3");
    add_answer(gap, 2.0, 400);
    add_answer(gap, 0.0, 100);
    dataset.push_back(gap);
  }

  std::ostringstream out;
  auto summary = build_dpo_dataset(dataset, task(), out);
  CHECK(summary.total_examples == 3);
  CHECK(summary.accepted == 1);
  CHECK(summary.rejected_by_reason.at("no_distinct_scores") == 1);
  CHECK(summary.rejected_by_reason.at("length_gap_exceeded") == 1);

  std::string text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  CHECK(text.find("\"example_id\":\"d1\"") != std::string::npos);
}

TEST_CASE("build_dpo_dataset on an empty dataset") {
  std::ostringstream out;
  auto summary = build_dpo_dataset({}, task(), out);
  CHECK(summary.total_examples == 0);
  CHECK(summary.accepted == 0);
  CHECK(out.str().empty());
}

TEST_CASE("duplicate example ids are skipped idempotently") {
  RawExample example = base_example("dup");
  add_answer(example, 2.0, 100);
  add_answer(example, 0.0, 120);
  std::vector<RawExample> dataset = {example, example};
  std::ostringstream out;
  auto summary = build_dpo_dataset(dataset, task(), out);
  CHECK(summary.accepted == 1);
  CHECK(summary.duplicates_skipped == 1);
  std::string text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
}

TEST_CASE("dataset emission is order-stable") {
  std::vector<RawExample> dataset;
  for (int i = 0; i < 6; ++i) {
    RawExample example = base_example("s" + std::to_string(i));
    add_answer(example, 2.0, 100 + i);
    add_answer(example, 0.5, 140 + i);
    dataset.push_back(example);
  }
  std::ostringstream first, second;
  build_dpo_dataset(dataset, task(), first);
  build_dpo_dataset(dataset, task(), second);
  CHECK(first.str() == second.str());
}

TEST_CASE("every emitted pair satisfies the pairing invariants (fuzz)") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> n_answers(0, 6);
  std::uniform_int_distribution<int> rating(0, 2);
  std::uniform_int_distribution<std::size_t> n_words(1, 260);
  std::uniform_int_distribution<int> coin(0, 3);

  int emitted = 0;
  for (int it = 0; it < 2000; ++it) {
    RawExample example = base_example("f" + std::to_string(it));
    int n = n_answers(rng);
    for (int j = 0; j < n; ++j)
      add_answer(example, static_cast<double>(rating(rng)), n_words(rng),
                 coin(rng) != 0, coin(rng) == 1);
    auto outcome = pair_example(example, task());
    if (!outcome.ok()) continue;
    ++emitted;
    const PreferencePair& pair = *outcome.pair;
    REQUIRE(pair.chosen_score > pair.rejected_score);
    std::size_t gap = pair.chosen_words > pair.rejected_words
                          ? pair.chosen_words - pair.rejected_words
                          : pair.rejected_words - pair.chosen_words;
    REQUIRE(gap <= kMaxPairWordGap);
  }
  CHECK(emitted > 50);  // the generator must actually exercise emission
}

TEST_CASE("dpo_loss values") {
  const double ln2 = std::log(2.0);
  SUBCASE("zero margin gives ln 2") {
    CHECK(std::abs(dpo_loss(0, 0, 0, 0, 1.0) - ln2) <= 1e-12);
    CHECK(std::abs(dpo_loss(3.5, 1.25, 3.5, 1.25, 0.42) - ln2) <= 1e-12);
  }
  SUBCASE("chosen log-ratio 1, rejected 0, beta 1: softplus(-1)") {
    long double oracle = std::log1p(std::exp(-1.0L));
    double got = dpo_loss(1.0, 0.0, 0.0, 0.0, 1.0);
    CHECK(std::abs(got - static_cast<double>(oracle)) <= 1e-9);
    CHECK(got == doctest::Approx(0.3132617).epsilon(1e-6));
  }
  SUBCASE("loss approaches 0 monotonically as the margin grows") {
    double prev = dpo_loss(-20.0, 0, 0, 0, 1.0);
    for (double m = -19.9; m <= 20.0; m += 0.1) {
      double current = dpo_loss(m, 0, 0, 0, 1.0);
      CHECK(current < prev);
      prev = current;
    }
    CHECK(prev < 1e-8);
  }
  SUBCASE("beta rescaling identity is exact") {
    for (double beta : {0.01, 0.25, 1.0, 5.0}) {
      for (double m : {-3.0, -0.5, 0.0, 0.7, 12.0}) {
        CHECK(dpo_loss(m, 0, 0, 0, beta) == dpo_loss(beta * m, 0, 0, 0, 1.0));
      }
    }
  }
  SUBCASE("convexity: loss(m) + loss(-m) >= 2 ln 2, equality at 0") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> m_dist(-30.0, 30.0);
    for (int i = 0; i < 1000; ++i) {
      double m = m_dist(rng);
      CHECK(dpo_loss(m, 0, 0, 0, 1.0) + dpo_loss(-m, 0, 0, 0, 1.0) >=
            2 * ln2 - 1e-12);
    }
  }
  SUBCASE("invalid inputs") {
    CHECK_THROWS_AS(dpo_loss(0, 0, 0, 0, 0.0), std::domain_error);
    CHECK_THROWS_AS(dpo_loss(0, 0, 0, 0, -1.0), std::domain_error);
    CHECK_THROWS_AS(dpo_loss(std::nan(""), 0, 0, 0, 1.0), std::domain_error);
    CHECK_THROWS_AS(
        dpo_loss(std::numeric_limits<double>::infinity(), 0, 0, 0, 1.0),
        std::domain_error);
  }
  SUBCASE("large margins do not overflow") {
    CHECK(std::isfinite(dpo_loss(1000.0, 0, 0, 0, 1.0)));
    CHECK(std::isfinite(dpo_loss(-1000.0, 0, 0, 0, 1.0)));
    CHECK(dpo_loss(-1000.0, 0, 0, 0, 1.0) == doctest::Approx(1000.0));
  }
}
