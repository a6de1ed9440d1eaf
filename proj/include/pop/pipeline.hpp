#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pop/corpus.hpp"
#include "pop/gateway.hpp"
#include "pop/parsed.hpp"
#include "pop/rubric.hpp"
#include "pop/templates.hpp"

namespace pop {

enum class JudgeMode {
  kRubricGrounded,    // rubric generation sees the document (default)
  kRubricUngrounded,  // same prompts, knowledge slot set to "None"
  kNoRubric,          // single holistic 0-10 rating, document retained
  kPairwiseAnchor,    // anchor-based pairwise 0-10 judging
};

std::string to_string(JudgeMode mode);
std::optional<JudgeMode> judge_mode_from_string(std::string_view name);

bool judge_mode_uses_rubric(JudgeMode mode);

struct Question {
  std::string text;
  TaskId task_id = TaskId::kCustom;
  std::string source_doc_id;
};

struct ReferenceAnswer {
  std::string text;
};

struct CandidateAnswer {
  int index = 0;
  std::string text;
  std::size_t word_count = 0;
  // false iff stage parsing failed or the response was length-truncated
  bool valid = false;
};

struct CriterionEval {
  std::string thoughts;
  int rating = 0;  // {0,1,2}; forced to 0 when not extracted
  bool extracted = false;
};

struct EvaluationReport {
  int answer_index = 0;
  std::vector<CriterionEval> per_criterion;  // aligned with rubric order
  double aggregate = 0.0;
  // No rating could be extracted at all / the grading call failed; such
  // reports are dropped by the downstream filter.
  bool malformed = false;
};

struct StageProvenance {
  std::string question_request_id;
  std::vector<std::string> answer_request_ids;
  std::string rubric_request_id;
  std::vector<std::string> grading_request_ids;
};

/// One Algorithm-style record: everything sampled for one document.
struct RawExample {
  std::size_t draw_index = 0;
  std::string example_id;
  std::string config_hash;
  std::string judge_mode;
  Document doc;
  Question question;
  ReferenceAnswer ref_answer;
  std::vector<CandidateAnswer> answers;
  Rubric rubric;
  std::vector<EvaluationReport> reports;  // one per valid answer, by index
  StageProvenance provenance;
};

struct ExampleFailure {
  std::size_t draw_index = 0;
  std::string example_id;
  std::string stage;  // question_synthesis | question_answering | ...
  std::string reason;
};

// ---------------------------------------------------------------------------
// Stage parsers.

/// Extracts the <question> and <reference_answer> blocks. Tag matching is
/// case-insensitive, order-insensitive, first occurrence wins.
Parsed<std::pair<Question, ReferenceAnswer>> parse_question_output(
    const std::string& raw);

struct RubricParse {
  Rubric rubric;
  bool truncated = false;  // more than max_criteria blocks were present
};

/// Extracts <criterion> blocks into a rubric. Blocks without a name are
/// skipped; weights default to 1 when missing or non-positive; criteria
/// beyond max_criteria are dropped with the truncated flag set. Zero
/// extractable criteria is a parse failure.
Parsed<RubricParse> parse_rubric_output(const std::string& raw,
                                        int max_criteria);

/// Extracts per-criterion <evaluation> blocks, aligned with the rubric by
/// position; a mismatched <name> only logs a consistency warning through
/// `warn`. Ratings are the first integer of the <rating> block; values
/// outside {0,1,2} or missing blocks yield rating 0, extracted=false. A
/// completely unparseable report comes back malformed.
EvaluationReport parse_grading_output(
    const std::string& raw, const Rubric& rubric, int answer_index,
    const std::function<void(const std::string&)>& warn = {});

// ---------------------------------------------------------------------------
// Scoring.

/// Weight-normalized mean of per-criterion ratings: sum(w*s) / sum(w).
/// Requires one rating per criterion and positive total weight.
double aggregate_score(const Rubric& rubric, const std::vector<int>& ratings);

/// Length-stratified subsample for the rubric prompt: valid answers sorted
/// ascending by word count (ties by index); positions floor(i*n/m) for
/// i=0..m-1 when n > m, otherwise all. Result is ordered by length.
std::vector<CandidateAnswer> select_rubric_exemplars(
    const std::vector<CandidateAnswer>& answers, std::size_t m = 10);

// ---------------------------------------------------------------------------
// Stage execution.

struct StageParams {
  double temperature = 1.0;
  double top_p = 1.0;
  int max_new_tokens = 1024;
};

struct PipelineSettings {
  TaskSpec task;
  SharedTemplates shared;
  RoleEndpoint proposer;
  RoleEndpoint solver;
  RoleEndpoint verifier;
  StageParams proposer_params{1.0, 1.0, 6144};
  StageParams solver_params{1.0, 1.0, 6144};
  StageParams rubric_params{0.0, 1.0, 8192};
  StageParams grading_params{0.0, 1.0, 4096};
  int answers_per_question = 32;  // J
  int max_criteria = 5;           // K
  int exemplar_count = 10;        // m
  JudgeMode judge_mode = JudgeMode::kRubricGrounded;
  bool ground_question = true;
  bool ground_rubric = true;
  int parallelism = 8;
  std::string config_hash;
};

/// Optional mirror of every request/response for audit.
class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void record(const std::string& request_id, Role role,
                      const ChatRequest& request, const std::string& outcome) = 0;
};

/// J independent solver calls; per-call failures and truncated responses
/// become valid=false entries kept for accounting. Requires J >= 2.
std::vector<CandidateAnswer> generate_answers(Gateway& gateway,
                                              const PipelineSettings& settings,
                                              const Question& question,
                                              int j_count,
                                              TraceSink* trace = nullptr,
                                              const std::string& id_prefix = {});

/// One verifier call generating the rubric from doc/question/reference
/// answer/exemplars; honors the grounding toggle via `doc`.
Parsed<RubricParse> generate_rubric(Gateway& gateway,
                                    const PipelineSettings& settings,
                                    const std::optional<Document>& doc,
                                    const std::string& question,
                                    const std::string& ref_answer,
                                    const std::vector<CandidateAnswer>& exemplars,
                                    TraceSink* trace = nullptr,
                                    const std::string& request_id = {});

/// One verifier call grading a single answer against the rubric.
EvaluationReport grade_answer(Gateway& gateway, const PipelineSettings& settings,
                              const std::string& question, const Rubric& rubric,
                              const CandidateAnswer& answer,
                              TraceSink* trace = nullptr,
                              const std::string& request_id = {});

struct ExampleResult {
  std::optional<RawExample> example;
  std::optional<ExampleFailure> failure;
  bool ok() const { return example.has_value(); }
};

/// Runs the four stages for one document. Terminal transport errors and
/// stage-1 parse failures mark the example failed; per-answer problems are
/// recorded inside the example instead.
ExampleResult run_example(Gateway& gateway, const PipelineSettings& settings,
                          const Document& doc, std::size_t draw_index,
                          TraceSink* trace = nullptr);

}  // namespace pop
