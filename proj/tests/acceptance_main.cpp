// Acceptance suite: runs every acceptance criterion and prints one
// PASS/FAIL line per criterion. Exit code is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "pop/checkpoint.hpp"
#include "pop/config.hpp"
#include "pop/diagnostics.hpp"
#include "pop/judges.hpp"
#include "pop/mock_backend.hpp"
#include "pop/orchestrator.hpp"
#include "pop/pairing.hpp"
#include "pop/serialization.hpp"
#include "pop/text.hpp"
#include "test_util.hpp"

using namespace pop;
using testutil::TempDir;

namespace {

class Checker {
 public:
  void require(bool condition, const std::string& what) {
    ++checks_;
    if (condition) return;
    ++failures_;
    if (details_.size() < 4) details_.push_back(what);
  }
  bool passed() const { return failures_ == 0; }
  long checks() const { return checks_; }
  std::string details() const {
    std::ostringstream out;
    for (const auto& d : details_) out << "\n      - " << d;
    if (failures_ > static_cast<long>(details_.size()))
      out << "\n      - (and " << failures_ - details_.size() << " more)";
    return out.str();
  }

 private:
  long checks_ = 0;
  long failures_ = 0;
  std::vector<std::string> details_;
};

Gateway fast_gateway(std::shared_ptr<Backend> backend) {
  RetryPolicy policy;
  policy.max_retries = 2;
  policy.base_delay = std::chrono::milliseconds(1);
  return Gateway(std::move(backend), policy, [](std::chrono::milliseconds) {});
}

// ---------------------------------------------------------------------------
// 1. Score aggregation against a brute-force oracle.

void criterion_1(Checker& check) {
  auto started = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240811);
  std::uniform_int_distribution<int> k_dist(1, 5);
  std::uniform_int_distribution<int> w_dist(1, 9);
  std::uniform_int_distribution<int> s_dist(0, 2);

  for (int it = 0; it < 10000; ++it) {
    int k = k_dist(rng);
    Rubric rubric;
    std::vector<int> ratings;
    long double num = 0.0L, den = 0.0L;
    for (int i = 0; i < k; ++i) {
      int w = w_dist(rng);
      int s = s_dist(rng);
      rubric.criteria.push_back({"c" + std::to_string(i), "", std::nullopt, w});
      ratings.push_back(s);
      num += static_cast<long double>(w) * s;
      den += w;
    }
    double oracle = static_cast<double>(num / den);
    double got = aggregate_score(rubric, ratings);
    check.require(std::abs(got - oracle) <= 1e-12,
                  "aggregate mismatch at case " + std::to_string(it));
  }
  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  check.require(elapsed.count() < 1000,
                "10k oracle cases took " + std::to_string(elapsed.count()) +
                    " ms (budget 1000)");
}

// ---------------------------------------------------------------------------
// 2. DPO loss utility.

void criterion_2(Checker& check) {
  const double ln2 = std::log(2.0);
  check.require(std::abs(dpo_loss(0, 0, 0, 0, 1.0) - ln2) <= 1e-12,
                "zero-margin loss is not ln 2");
  check.require(std::abs(dpo_loss(2.5, -1.0, 2.5, -1.0, 0.01) - ln2) <= 1e-12,
                "zero-margin loss (nontrivial logps) is not ln 2");

  // High-precision oracle for softplus(-1) = ln(1 + e^-1).
  long double oracle = std::log1p(std::exp(-1.0L));
  double got = dpo_loss(1.0, 0.0, 0.0, 0.0, 1.0);
  check.require(std::abs(got - static_cast<double>(oracle)) <= 1e-9,
                "loss at margin 1 deviates from softplus(-1)");
  check.require(std::abs(got - 0.31326168751822287) <= 1e-9,
                "loss at margin 1 deviates from the frozen constant");

  double prev = dpo_loss(-20.0, 0, 0, 0, 1.0);
  bool monotone = true;
  for (int step = 1; step <= 400; ++step) {
    double m = -20.0 + 0.1 * step;
    double current = dpo_loss(m, 0, 0, 0, 1.0);
    if (!(current < prev)) monotone = false;
    prev = current;
  }
  check.require(monotone, "loss is not strictly decreasing over [-20,20]");

  bool exact = true;
  for (double beta : {0.01, 0.1, 1.0, 3.0, 17.0})
    for (double m : {-15.0, -2.0, -0.3, 0.0, 0.4, 1.0, 9.0})
      if (dpo_loss(m, 0, 0, 0, beta) != dpo_loss(beta * m, 0, 0, 0, 1.0))
        exact = false;
  check.require(exact, "beta-rescaling identity is not exact");
}

// ---------------------------------------------------------------------------
// 3. Spearman against a brute-force oracle.

double spearman_oracle(const std::vector<double>& a,
                       const std::vector<double>& b) {
  auto rank_of = [](const std::vector<double>& v) {
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double below = 0, equal = 0;
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (v[j] < v[i]) ++below;
        if (v[j] == v[i]) ++equal;
      }
      ranks[i] = below + (equal + 1.0) / 2.0;
    }
    return ranks;
  };
  auto ra = rank_of(a);
  auto rb = rank_of(b);
  double n = static_cast<double>(a.size());
  double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

void criterion_3(Checker& check) {
  std::vector<double> values = {-7.25, -1.0, 0.5, 3.0, 11.5};
  std::vector<double> reference = {1, 2, 3, 4, 5};
  std::sort(values.begin(), values.end());
  int permutations = 0;
  do {
    ++permutations;
    check.require(
        std::abs(spearman(values, reference) -
                 spearman_oracle(values, reference)) <= 1e-12,
        "permutation " + std::to_string(permutations) + " deviates");
  } while (std::next_permutation(values.begin(), values.end()));
  check.require(permutations == 120, "expected 120 permutations");

  std::mt19937_64 rng(333);
  std::uniform_int_distribution<int> value(0, 4);
  std::uniform_int_distribution<int> size(2, 16);
  int done = 0;
  while (done < 1000) {
    int n = size(rng);
    std::vector<double> a, b;
    for (int i = 0; i < n; ++i) {
      a.push_back(value(rng));
      b.push_back(value(rng));
    }
    auto constant = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(),
                         [&](double x) { return x == v.front(); });
    };
    if (constant(a) || constant(b)) continue;
    ++done;
    check.require(std::abs(spearman(a, b) - spearman_oracle(a, b)) <= 1e-12,
                  "tie case " + std::to_string(done) + " deviates");
  }
}

// ---------------------------------------------------------------------------
// 4. Filtering / pairing fidelity on a labeled 50-example dataset + fuzz.

RawExample synth_example(const std::string& id) {
  RawExample example;
  example.example_id = id;
  example.judge_mode = "rubric_grounded";
  example.doc.id = id;
  example.doc.text = testutil::words(50);
  example.doc.word_count = 50;
  example.question.text = "question for " + id;
  example.ref_answer.text = "ref";
  example.rubric.criteria.push_back({"crit", "d", std::nullopt, 1});
  return example;
}

std::string id_of(const RawExample& example, int index) {
  return example.example_id + "a" + std::to_string(index) + "_";
}

void synth_answer(RawExample& example, int rating, std::size_t n_words,
                  bool valid = true, bool malformed = false) {
  CandidateAnswer answer;
  answer.index = static_cast<int>(example.answers.size());
  answer.text = testutil::words(n_words, id_of(example, answer.index));
  answer.word_count = n_words;
  answer.valid = valid;
  example.answers.push_back(answer);
  if (!valid) return;
  EvaluationReport report;
  report.answer_index = answer.index;
  report.per_criterion.push_back({"t", rating, true});
  report.aggregate = rating;
  report.malformed = malformed;
  example.reports.push_back(report);
}

void criterion_4(Checker& check) {
  // 50 examples with a known class each.
  std::vector<RawExample> dataset;
  std::vector<std::string> expected;  // "" means accepted
  auto push = [&](RawExample example, const std::string& verdict) {
    dataset.push_back(std::move(example));
    expected.push_back(verdict);
  };

  for (int i = 0; i < 10; ++i) {  // accepted
    RawExample e = synth_example("ok" + std::to_string(i));
    synth_answer(e, 2, 120);
    synth_answer(e, 0, 150);
    synth_answer(e, 1, 130);
    push(std::move(e), "");
  }
  for (int i = 0; i < 8; ++i) {  // question missing
    RawExample e = synth_example("noq" + std::to_string(i));
    synth_answer(e, 2, 120);
    synth_answer(e, 0, 130);
    e.question.text = "";
    push(std::move(e), "question_unextractable");
  }
  for (int i = 0; i < 8; ++i) {  // rubric missing
    RawExample e = synth_example("norub" + std::to_string(i));
    synth_answer(e, 2, 120);
    synth_answer(e, 0, 130);
    e.rubric.criteria.clear();
    for (auto& r : e.reports) r.per_criterion.clear();
    push(std::move(e), "rubric_unextractable");
  }
  for (int i = 0; i < 6; ++i) {  // structural damage
    RawExample e = synth_example("bad" + std::to_string(i));
    synth_answer(e, 2, 120);
    synth_answer(e, 0, 130);
    if (i % 2 == 0) e.reports.pop_back();
    else e.reports[0].per_criterion[0].rating = 5;
    push(std::move(e), "bad_format");
  }
  for (int i = 0; i < 6; ++i) {  // nothing gradable
    RawExample e = synth_example("zero" + std::to_string(i));
    synth_answer(e, 2, 120, true, /*malformed=*/true);
    synth_answer(e, 0, 130, /*valid=*/false);
    push(std::move(e), "zero_valid_answers");
  }
  for (int i = 0; i < 6; ++i) {  // all scores equal
    RawExample e = synth_example("flat" + std::to_string(i));
    synth_answer(e, 1, 120);
    synth_answer(e, 1, 130);
    synth_answer(e, 1, 140);
    push(std::move(e), "no_distinct_scores");
  }
  for (int i = 0; i < 6; ++i) {  // extremes too far apart in length
    RawExample e = synth_example("gap" + std::to_string(i));
    synth_answer(e, 2, 400);
    synth_answer(e, 0, 120);
    push(std::move(e), "length_gap_exceeded");
  }
  check.require(dataset.size() == 50, "fixture must hold 50 examples");

  TaskSpec task = default_task_spec(TaskId::kHealthcareQa);
  std::map<std::string, std::size_t> tallied;
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    ValidationVerdict verdict = validate_example(dataset[i]);
    std::string got;
    if (!verdict.accepted) {
      got = to_string(verdict.reasons.front());
    } else {
      PairOutcome outcome = pair_example(dataset[i], task);
      if (outcome.ok()) ++accepted;
      else got = to_string(*outcome.reason);
    }
    if (!got.empty()) ++tallied[got];
    check.require(got == expected[i], dataset[i].example_id + ": expected " +
                                          (expected[i].empty() ? "accepted"
                                                               : expected[i]) +
                                          ", got " +
                                          (got.empty() ? "accepted" : got));
  }
  check.require(accepted == 10, "hand-tabulated accepted count is 10");
  check.require(tallied["question_unextractable"] == 8, "8 question rejects");
  check.require(tallied["rubric_unextractable"] == 8, "8 rubric rejects");
  check.require(tallied["bad_format"] == 6, "6 bad_format rejects");
  check.require(tallied["zero_valid_answers"] == 6, "6 zero-valid rejects");
  check.require(tallied["no_distinct_scores"] == 6, "6 equal-score rejects");
  check.require(tallied["length_gap_exceeded"] == 6, "6 length-gap rejects");

  // The emitted file matches the same partition.
  std::ostringstream out;
  PairingSummary summary = build_dpo_dataset(dataset, task, out);
  check.require(summary.accepted == 10, "summary accepted != 10");
  check.require(summary.rejected_by_reason == tallied,
                "summary partition deviates from per-example tally");

  // Fuzz: every emitted pair satisfies both invariants.
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> n_answers(0, 8);
  std::uniform_int_distribution<int> rating(0, 2);
  std::uniform_int_distribution<std::size_t> n_words(1, 240);
  std::uniform_int_distribution<int> coin(0, 4);
  std::size_t violations = 0;
  std::size_t emitted = 0;
  for (int it = 0; it < 10000; ++it) {
    RawExample example = synth_example("fuzz" + std::to_string(it));
    int n = n_answers(rng);
    for (int j = 0; j < n; ++j)
      synth_answer(example, rating(rng), n_words(rng), coin(rng) != 0,
                   coin(rng) == 0);
    PairOutcome outcome = pair_example(example, task);
    if (!outcome.ok()) continue;
    ++emitted;
    const PreferencePair& pair = *outcome.pair;
    std::size_t gap = pair.chosen_words > pair.rejected_words
                          ? pair.chosen_words - pair.rejected_words
                          : pair.rejected_words - pair.chosen_words;
    if (!(pair.chosen_score > pair.rejected_score) || gap > kMaxPairWordGap)
      ++violations;
  }
  check.require(violations == 0,
                std::to_string(violations) + " invariant violations in fuzz");
  check.require(emitted > 500, "fuzz emitted too few pairs to be meaningful");
}

// ---------------------------------------------------------------------------
// 5. Exemplar subsampling for n in 1..64.

void criterion_5(Checker& check) {
  std::mt19937_64 rng(555);
  std::uniform_int_distribution<std::size_t> wc(1, 400);
  for (std::size_t n = 1; n <= 64; ++n) {
    std::vector<CandidateAnswer> answers;
    for (std::size_t i = 0; i < n; ++i) {
      CandidateAnswer a;
      a.index = static_cast<int>(i);
      a.word_count = wc(rng);  // duplicates possible; ties break by index
      a.text = "t" + std::to_string(i);
      a.valid = true;
      answers.push_back(a);
    }

    // Direct recomputation, independent of the library path.
    std::vector<CandidateAnswer> sorted = answers;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const CandidateAnswer& a, const CandidateAnswer& b) {
                       if (a.word_count != b.word_count)
                         return a.word_count < b.word_count;
                       return a.index < b.index;
                     });
    std::vector<int> expected_indices;
    if (n <= 10) {
      for (const auto& a : sorted) expected_indices.push_back(a.index);
    } else {
      for (std::size_t i = 0; i < 10; ++i)
        expected_indices.push_back(sorted[i * n / 10].index);
    }

    auto picked = select_rubric_exemplars(answers, 10);
    bool match = picked.size() == expected_indices.size();
    if (match) {
      for (std::size_t i = 0; i < picked.size(); ++i)
        if (picked[i].index != expected_indices[i]) match = false;
    }
    check.require(match, "subsample deviates at n=" + std::to_string(n));
  }
}

// ---------------------------------------------------------------------------
// 6. Pairwise judge call count and anchor choice for n in 2..12.

void criterion_6(Checker& check) {
  PipelineSettings settings;
  settings.task = default_task_spec(TaskId::kHealthcareQa);
  settings.shared = default_shared_templates();
  settings.verifier.role = Role::kVerifier;
  settings.parallelism = 1;

  std::mt19937_64 rng(666);
  std::uniform_int_distribution<std::size_t> wc(5, 300);
  for (std::size_t n = 2; n <= 12; ++n) {
    std::vector<CandidateAnswer> answers;
    for (std::size_t i = 0; i < n; ++i) {
      CandidateAnswer a;
      a.index = static_cast<int>(i);
      a.word_count = wc(rng);
      a.text = testutil::words(a.word_count, "n" + std::to_string(n) + "a" +
                                                 std::to_string(i) + "_");
      a.valid = true;
      answers.push_back(a);
    }

    auto mock = std::make_shared<MockBackend>();
    mock->script_always("comparing two candidate answers",
                        "<score_a>6</score_a><score_b>5</score_b>");
    Gateway gateway = fast_gateway(mock);
    auto outcomes = pairwise_rank_answers(gateway, settings, "q?", answers);

    check.require(mock->call_count() == 2 * (n - 1),
                  "n=" + std::to_string(n) + ": " +
                      std::to_string(mock->call_count()) + " calls, expected " +
                      std::to_string(2 * (n - 1)));

    // Lower-median-length anchor, recomputed independently.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       if (answers[a].word_count != answers[b].word_count)
                         return answers[a].word_count < answers[b].word_count;
                       return a < b;
                     });
    int expected_anchor = static_cast<int>(order[(n - 1) / 2]);
    int got_anchor = -1;
    for (const auto& outcome : outcomes)
      if (outcome.is_anchor) got_anchor = outcome.candidate_index;
    check.require(got_anchor == expected_anchor,
                  "n=" + std::to_string(n) + ": anchor " +
                      std::to_string(got_anchor) + ", expected " +
                      std::to_string(expected_anchor));
  }
}

// ---------------------------------------------------------------------------
// 7+8. End-to-end golden run over a 20-document fixture corpus.

constexpr int kGoldenDocs = 20;
constexpr int kGoldenAnswers = 4;
constexpr std::size_t kCallsPerExample = 1 + kGoldenAnswers + 1 + kGoldenAnswers;

std::string golden_corpus(const TempDir& dir) {
  std::ostringstream out;
  for (int i = 0; i < kGoldenDocs; ++i)
    out << "doc" << i << "tok "
        << testutil::words(59, "d" + std::to_string(i) + "w") << "\n";
  std::string path = dir.str("corpus.txt");
  testutil::write_file(path, out.str());
  return path;
}

std::string golden_question(int i) {
  return "QX" + std::to_string(i) + "QZ what does record " + std::to_string(i) +
         " establish?";
}

// Record classes: i%7==3 -> all-equal scores; i%7==5 -> length gap; the
// other 14 records pair up cleanly.
void golden_script(MockBackend& mock, int i, bool ground_rubric) {
  std::string question_reply =
      "<question>" + golden_question(i) +
      "</question><reference_answer>the record establishes facts"
      "</reference_answer>";
  std::string rubric_reply =
      "<criterion><name>fidelity</name><description>matches the record"
      "</description><gold_label>doc" + std::to_string(i) +
      "tok</gold_label><weight>2</weight></criterion>"
      "<criterion><name>clarity</name><description>readable</description>"
      "<weight>1</weight></criterion>";
  if (ground_rubric) {
    mock.script("Knowledge:\ndoc" + std::to_string(i) + "tok",
                {MockBackend::Reply::ok(question_reply),
                 MockBackend::Reply::ok(rubric_reply)});
  } else {
    // The rubric request carries "None" instead of the document; only the
    // question request matches the knowledge token.
    mock.script("Knowledge:\ndoc" + std::to_string(i) + "tok",
                {MockBackend::Reply::ok(question_reply)});
  }

  int cls = i % 7;
  std::vector<MockBackend::Reply> queue;
  for (int j = 0; j < kGoldenAnswers; ++j) {
    std::ostringstream answer;
    answer << "record " << i << " candidate " << j << " body";
    int pad = j;
    if (cls == 5 && j == 0) pad += 150;  // stretch the future winner
    for (int w = 0; w < pad; ++w) answer << " pad" << w;
    queue.push_back(MockBackend::Reply::ok(answer.str()));
  }
  for (int j = 0; j < kGoldenAnswers; ++j) {
    int r1, r2;
    if (cls == 3) {
      r1 = r2 = 1;
    } else if (cls == 5) {
      r1 = r2 = (j == 0) ? 2 : 0;
    } else {
      r1 = (i + j) % 3;
      r2 = (i + 2 * j) % 3;
    }
    queue.push_back(MockBackend::Reply::ok(
        "<evaluation><rating>" + std::to_string(r1) +
        "</rating></evaluation><evaluation><rating>" + std::to_string(r2) +
        "</rating></evaluation>"));
  }
  mock.script(golden_question(i), std::move(queue));
}

std::shared_ptr<MockBackend> golden_mock(bool ground_rubric = true) {
  auto mock = std::make_shared<MockBackend>();
  if (!ground_rubric) {
    // Shared entry for all ungrounded rubric requests; inserted first so it
    // beats the per-question entries that would otherwise swallow them.
    std::string rubric_reply =
        "<criterion><name>fidelity</name><description>matches</description>"
        "<weight>2</weight></criterion>"
        "<criterion><name>clarity</name><description>readable</description>"
        "<weight>1</weight></criterion>";
    mock->script_always("Knowledge:\nNone", rubric_reply);
  }
  for (int i = 0; i < kGoldenDocs; ++i) golden_script(*mock, i, ground_rubric);
  return mock;
}

RunConfig golden_config(const TempDir& dir, const std::string& corpus,
                        const std::string& out_name) {
  RunConfig config;
  config.task = TaskId::kHealthcareQa;
  config.corpus_path = corpus;
  config.corpus_format = CorpusFormat::kPlainLines;
  config.n_questions = kGoldenDocs;
  config.answers_per_question = kGoldenAnswers;
  config.seed = 7;
  config.parallelism = 1;
  config.example_workers = 1;
  config.output_dir = dir.str(out_name);
  config.backend = "mock";
  config.mock_script = "in-process";
  return config;
}

struct GoldenRun {
  std::string raw_bytes;
  std::string dpo_bytes;
  PairingSummary summary;
  std::shared_ptr<MockBackend> mock;
};

GoldenRun execute_golden(const TempDir& dir, const std::string& out_name,
                         bool ground_rubric = true) {
  RunConfig config = golden_config(dir, dir.str("corpus.txt"), out_name);
  config.ground_rubric = ground_rubric;
  auto mock = golden_mock(ground_rubric);
  Gateway gateway = fast_gateway(mock);
  run_synthesize(config, gateway, /*resume=*/false);

  TaskSpec task = default_task_spec(config.task);
  std::string raw = config.output_dir + "/raw_examples.jsonl";
  std::string dpo = config.output_dir + "/dpo_dataset.jsonl";
  GoldenRun run;
  run.summary = build_dpo_dataset_file(raw, task, dpo,
                                       config.output_dir + "/summary.json");
  run.raw_bytes = testutil::read_file(raw);
  run.dpo_bytes = testutil::read_file(dpo);
  run.mock = mock;
  return run;
}

void criterion_7(Checker& check, GoldenRun& first_out) {
  auto started = std::chrono::steady_clock::now();
  TempDir dir;
  golden_corpus(dir);

  GoldenRun run1 = execute_golden(dir, "run1");
  GoldenRun run2 = execute_golden(dir, "run2");
  GoldenRun run3 = execute_golden(dir, "run3");

  check.require(!run1.dpo_bytes.empty(), "golden run produced no pairs");
  check.require(run1.dpo_bytes == run2.dpo_bytes,
                "run 2 dpo_dataset.jsonl differs from run 1");
  check.require(run1.dpo_bytes == run3.dpo_bytes,
                "run 3 dpo_dataset.jsonl differs from run 1");
  check.require(run1.raw_bytes == run2.raw_bytes,
                "raw checkpoint files differ between runs");
  // Hand-tabulated pipeline shape: 20 records, 3 all-equal (i%7==3),
  // 3 over the length gap (i%7==5), 14 paired.
  check.require(run1.summary.accepted == 14,
                "expected 14 pairs, got " +
                    std::to_string(run1.summary.accepted));
  check.require(run1.summary.rejected_by_reason["no_distinct_scores"] == 3,
                "expected 3 equal-score rejects");
  check.require(run1.summary.rejected_by_reason["length_gap_exceeded"] == 3,
                "expected 3 length-gap rejects");

  // Kill-and-resume: keep the first 12 checkpointed examples, rerun.
  RunConfig config = golden_config(dir, dir.str("corpus.txt"), "resume");
  {
    auto mock = golden_mock();
    Gateway gateway = fast_gateway(mock);
    run_synthesize(config, gateway, false);
  }
  std::string raw_path = config.output_dir + "/raw_examples.jsonl";
  {
    std::istringstream in(testutil::read_file(raw_path));
    std::ostringstream truncated;
    std::string line;
    for (int i = 0; i < 12 && std::getline(in, line); ++i)
      truncated << line << "\n";
    testutil::write_file(raw_path, truncated.str());
  }
  auto resume_mock = golden_mock();
  Gateway resume_gateway = fast_gateway(resume_mock);
  RunReport report = run_synthesize(config, resume_gateway, /*resume=*/true);
  check.require(report.skipped_completed == 12, "resume skipped != 12");
  check.require(resume_mock->call_count() == 8 * kCallsPerExample,
                "resume issued " + std::to_string(resume_mock->call_count()) +
                    " calls, expected " +
                    std::to_string(8 * kCallsPerExample));
  check.require(testutil::read_file(raw_path) == run1.raw_bytes,
                "resumed raw file differs from the uninterrupted run");

  TaskSpec task = default_task_spec(config.task);
  build_dpo_dataset_file(raw_path, task, config.output_dir + "/dpo.jsonl",
                         config.output_dir + "/summary.json");
  check.require(testutil::read_file(config.output_dir + "/dpo.jsonl") ==
                    run1.dpo_bytes,
                "resumed dpo dataset differs from the uninterrupted run");

  auto elapsed = std::chrono::duration_cast<std::chrono::seconds>(
      std::chrono::steady_clock::now() - started);
  check.require(elapsed.count() < 30, "golden criterion took " +
                                          std::to_string(elapsed.count()) +
                                          " s (budget 30)");
  first_out = std::move(run1);
}

void criterion_8(Checker& check, const GoldenRun& grounded) {
  // Collect the fixture documents from the checkpoint itself.
  std::vector<std::string> doc_texts;
  {
    std::istringstream in(grounded.raw_bytes);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      doc_texts.push_back(
          raw_example_from_json(nlohmann::json::parse(line)).doc.text);
    }
  }
  check.require(doc_texts.size() == kGoldenDocs, "expected 20 documents");

  auto contains_any_doc = [&](const std::string& text) {
    for (const auto& doc : doc_texts)
      if (text.find(doc) != std::string::npos) return true;
    return false;
  };

  std::size_t solver_requests = 0, solver_with_doc = 0;
  std::size_t rubric_requests = 0, rubric_with_doc = 0;
  for (const auto& request : grounded.mock->requests()) {
    std::string joined = request.system + "\n" + request.user;
    if (request.system.find("knowledgeable medical assistant") !=
        std::string::npos) {
      ++solver_requests;
      if (contains_any_doc(joined)) ++solver_with_doc;
    }
    if (request.system.find("designing a grading rubric") != std::string::npos) {
      ++rubric_requests;
      if (contains_any_doc(joined)) ++rubric_with_doc;
    }
  }
  check.require(solver_requests == kGoldenDocs * kGoldenAnswers,
                "unexpected solver request count");
  check.require(solver_with_doc == 0,
                std::to_string(solver_with_doc) +
                    " solver requests leaked document text");
  check.require(rubric_requests == kGoldenDocs,
                "unexpected rubric request count");
  check.require(rubric_with_doc == rubric_requests,
                "grounded rubric requests missing document text");

  // Ungrounded rerun: the knowledge slot must be the literal "None".
  TempDir dir;
  golden_corpus(dir);
  GoldenRun ungrounded = execute_golden(dir, "nog", /*ground_rubric=*/false);
  std::size_t none_rubrics = 0, total_rubrics = 0, with_doc = 0;
  for (const auto& request : ungrounded.mock->requests()) {
    if (request.system.find("designing a grading rubric") == std::string::npos)
      continue;
    ++total_rubrics;
    if (request.user.find("Knowledge:\nNone") != std::string::npos)
      ++none_rubrics;
    if (contains_any_doc(request.user)) ++with_doc;
  }
  check.require(total_rubrics == kGoldenDocs,
                "ungrounded run rubric request count");
  check.require(none_rubrics == total_rubrics,
                "some ungrounded rubric requests lack the literal None");
  check.require(with_doc == 0,
                "ungrounded rubric requests still carry document text");
}

// ---------------------------------------------------------------------------
// 9. Diagnostics shape reproduction.

void criterion_9(Checker& check) {
  // Planted bins: 10 questions at mean 0.11, 20 at 1.05, 10 at 1.93 with
  // std 0.05 each; equal-width bins over [0,2] put them in bins 0, 5, 9.
  std::vector<RawExample> dataset;
  auto plant = [&](const std::string& prefix, int count, double mean) {
    for (int i = 0; i < count; ++i) {
      RawExample example = synth_example(prefix + std::to_string(i));
      example.judge_mode = "no_rubric";
      example.rubric.criteria.clear();
      synth_answer(example, 0, 100);
      synth_answer(example, 0, 100);
      example.reports[0].per_criterion.clear();
      example.reports[1].per_criterion.clear();
      example.reports[0].aggregate = mean - 0.05;
      example.reports[1].aggregate = mean + 0.05;
      dataset.push_back(example);
    }
  };
  plant("lo", 10, 0.11);
  plant("mid", 20, 1.05);
  plant("hi", 10, 1.93);
  std::shuffle(dataset.begin(), dataset.end(), std::mt19937_64(99));

  auto bins = score_distribution_bins(dataset, 10);
  check.require(bins.size() == 10, "expected 10 bins");
  check.require(bins[0].fraction == 0.25, "bin 0 fraction != 0.25 exactly");
  check.require(bins[5].fraction == 0.5, "bin 5 fraction != 0.5 exactly");
  check.require(bins[9].fraction == 0.25, "bin 9 fraction != 0.25 exactly");
  for (int b : {1, 2, 3, 4, 6, 7, 8})
    check.require(bins[b].count == 0,
                  "bin " + std::to_string(b) + " unexpectedly occupied");
  check.require(std::abs(bins[0].mean_of_stds - 0.05) <= 1e-12,
                "bin 0 mean-of-stds deviates from the planted 0.05");
  check.require(std::abs(bins[5].mean_of_means - 1.05) <= 1e-12,
                "bin 5 mean-of-means deviates from the planted 1.05");

  // Contrarian gold grader on a 10-pair fixture: it inverts the primary
  // ranking on exactly 3 of 10 questions -> accuracy 70%.
  std::vector<RawExample> graded;
  std::vector<PreferencePair> pairs;
  auto mock = std::make_shared<MockBackend>();
  TaskSpec task = default_task_spec(TaskId::kHealthcareQa);
  for (int i = 0; i < 10; ++i) {
    RawExample example = synth_example("pairfix" + std::to_string(i));
    synth_answer(example, 2, 120);
    synth_answer(example, 0, 140);
    PairOutcome outcome = pair_example(example, task);
    pairs.push_back(*outcome.pair);

    bool contrarian = i < 3;
    mock->script(id_of(example, 0),
                 {MockBackend::Reply::ok(contrarian
                                             ? "<evaluation><rating>0</rating>"
                                               "</evaluation>"
                                             : "<evaluation><rating>2</rating>"
                                               "</evaluation>")});
    mock->script(id_of(example, 1),
                 {MockBackend::Reply::ok(contrarian
                                             ? "<evaluation><rating>2</rating>"
                                               "</evaluation>"
                                             : "<evaluation><rating>1</rating>"
                                               "</evaluation>")});
    graded.push_back(std::move(example));
  }

  PipelineSettings settings;
  settings.task = task;
  settings.shared = default_shared_templates();
  settings.verifier.role = Role::kGoldVerifier;
  settings.parallelism = 1;
  Gateway gateway = fast_gateway(mock);
  GoldReport gold =
      regrade_with_gold(gateway, settings, graded, GoldMode::kSameRubric);
  check.require(gold.scores.size() == 20, "gold report must cover 20 answers");
  double accuracy = pairwise_ranking_accuracy(pairs, gold);
  check.require(accuracy == 70.0, "hand-tabulated accuracy 70.0, got " +
                                      std::to_string(accuracy));
}

// ---------------------------------------------------------------------------
// 10. Document gate.

void criterion_10(Checker& check) {
  TempDir dir;
  std::ostringstream out;
  out << testutil::words(49, "a") << "\n"
      << testutil::words(50, "b") << "\n"
      << testutil::words(1024, "c") << "\n"
      << testutil::words(1200, "d") << "\n";
  testutil::write_file(dir.str("gate.txt"), out.str());
  auto handle = load_corpus(dir.str("gate.txt"), CorpusFormat::kPlainLines);
  check.require(handle.record_count() == 4, "expected 4 records");

  check.require(!validate_and_truncate(handle.record_text(0)).has_value(),
                "49-word record must be rejected");
  auto b = validate_and_truncate(handle.record_text(1));
  check.require(b.has_value() && b->word_count == 50,
                "50-word record must be accepted intact");
  auto c = validate_and_truncate(handle.record_text(2));
  check.require(c.has_value() && c->word_count == 1024,
                "1024-word record must be accepted intact");
  auto d = validate_and_truncate(handle.record_text(3));
  check.require(d.has_value() && d->word_count == 1024,
                "1200-word record must truncate to 1024");
  check.require(d.has_value() &&
                    d->text == testutil::words(1024, "d"),
                "truncation must keep the first 1024 words");

  // The sampler applies the same gate: only 3 valid documents exist.
  auto sample = sample_documents(handle, 4, 3);
  check.require(sample.documents.size() == 3 && sample.exhausted,
                "sampler must yield 3 docs and flag exhaustion");
}

struct AcceptanceCriterion {
  int number;
  std::string name;
  std::function<void(Checker&)> run;
};

}  // namespace

int main() {
  GoldenRun golden;
  std::vector<AcceptanceCriterion> criteria = {
      {1, "score aggregation matches the brute-force oracle", criterion_1},
      {2, "preference loss utility (ln2, softplus, monotone, beta)",
       criterion_2},
      {3, "rank correlation matches the oracle on permutations and ties",
       criterion_3},
      {4, "filtering/pairing partition and invariant fuzz", criterion_4},
      {5, "exemplar subsampling for n in 1..64", criterion_5},
      {6, "pairwise judge cost 2(n-1) and lower-median anchor", criterion_6},
      {7, "golden run: byte-identical outputs and kill/resume",
       [&](Checker& c) { criterion_7(c, golden); }},
      {8, "privilege asymmetry audit over the request trace",
       [&](Checker& c) { criterion_8(c, golden); }},
      {9, "diagnostics shape: planted bins and contrarian gold accuracy",
       criterion_9},
      {10, "document gate at 49/50/1024/1200 words", criterion_10},
  };

  int failures = 0;
  for (auto& criterion : criteria) {
    Checker check;
    auto started = std::chrono::steady_clock::now();
    try {
      criterion.run(check);
    } catch (const std::exception& e) {
      check.require(false, std::string("unhandled exception: ") + e.what());
    }
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - started)
                  .count();
    std::printf("%s  criterion %2d: %s (%ld checks, %lld ms)%s\n",
                check.passed() ? "PASS" : "FAIL", criterion.number,
                criterion.name.c_str(), check.checks(),
                static_cast<long long>(ms),
                check.passed() ? "" : check.details().c_str());
    if (!check.passed()) ++failures;
  }
  if (failures == 0) std::printf("acceptance: all %zu criteria passed\n",
                                 criteria.size());
  else std::printf("acceptance: %d criteria FAILED\n", failures);
  return failures;
}
