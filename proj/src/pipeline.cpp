#include "pop/pipeline.hpp"

#include <algorithm>
#include <stdexcept>

#include "pop/judges.hpp"
#include "pop/tags.hpp"
#include "pop/text.hpp"

namespace pop {

namespace {

TokenBudget budget_for(const RoleEndpoint& endpoint, const StageParams& params) {
  return TokenBudget{endpoint.max_context, params.max_new_tokens};
}

ChatRequest make_request(const PromptPair& prompt, const StageParams& params) {
  ChatRequest request;
  request.system = prompt.system;
  request.user = prompt.user;
  request.temperature = params.temperature;
  request.top_p = params.top_p;
  request.max_new_tokens = params.max_new_tokens;
  return request;
}

void trace_outcome(TraceSink* trace, const std::string& request_id, Role role,
                   const ChatRequest& request, const std::string& outcome) {
  if (trace) trace->record(request_id, role, request, outcome);
}

}  // namespace

std::string to_string(JudgeMode mode) {
  switch (mode) {
    case JudgeMode::kRubricGrounded: return "rubric_grounded";
    case JudgeMode::kRubricUngrounded: return "rubric_ungrounded";
    case JudgeMode::kNoRubric: return "no_rubric";
    case JudgeMode::kPairwiseAnchor: return "pairwise_anchor";
  }
  return "unknown";
}

std::optional<JudgeMode> judge_mode_from_string(std::string_view name) {
  if (name == "rubric_grounded") return JudgeMode::kRubricGrounded;
  if (name == "rubric_ungrounded") return JudgeMode::kRubricUngrounded;
  if (name == "no_rubric") return JudgeMode::kNoRubric;
  if (name == "pairwise_anchor") return JudgeMode::kPairwiseAnchor;
  return std::nullopt;
}

bool judge_mode_uses_rubric(JudgeMode mode) {
  return mode == JudgeMode::kRubricGrounded ||
         mode == JudgeMode::kRubricUngrounded;
}

Parsed<std::pair<Question, ReferenceAnswer>> parse_question_output(
    const std::string& raw) {
  auto question = extract_tag(raw, "question");
  auto ref = extract_tag(raw, "reference_answer");
  if (!question || question->empty())
    return Parsed<std::pair<Question, ReferenceAnswer>>::failure(
        "no <question> block", raw);
  if (!ref || ref->empty())
    return Parsed<std::pair<Question, ReferenceAnswer>>::failure(
        "no <reference_answer> block", raw);
  Question q;
  q.text = *question;
  ReferenceAnswer r;
  r.text = *ref;
  return Parsed<std::pair<Question, ReferenceAnswer>>::success({q, r});
}

Parsed<RubricParse> parse_rubric_output(const std::string& raw,
                                        int max_criteria) {
  RubricParse out;
  for (const std::string& block : extract_all_tags(raw, "criterion")) {
    Criterion criterion;
    auto name = extract_tag(block, "name");
    if (!name || name->empty()) continue;  // unusable block
    criterion.name = *name;
    criterion.description = extract_tag(block, "description").value_or("");
    auto gold = extract_tag(block, "gold_label");
    if (gold && !gold->empty()) criterion.gold_label = *gold;
    criterion.weight = 1;
    if (auto weight_block = extract_tag(block, "weight")) {
      if (auto w = first_int(*weight_block); w && *w >= 1)
        criterion.weight = static_cast<int>(*w);
    }
    out.rubric.criteria.push_back(std::move(criterion));
  }
  if (out.rubric.criteria.empty())
    return Parsed<RubricParse>::failure("no <criterion> blocks", raw);
  if (out.rubric.criteria.size() > static_cast<std::size_t>(max_criteria)) {
    out.rubric.criteria.resize(static_cast<std::size_t>(max_criteria));
    out.truncated = true;
  }
  return Parsed<RubricParse>::success(std::move(out));
}

EvaluationReport parse_grading_output(
    const std::string& raw, const Rubric& rubric, int answer_index,
    const std::function<void(const std::string&)>& warn) {
  EvaluationReport report;
  report.answer_index = answer_index;

  std::vector<std::string> blocks = extract_all_tags(raw, "evaluation");
  std::vector<std::pair<std::string, std::optional<std::string>>> entries;
  if (!blocks.empty()) {
    for (const auto& block : blocks)
      entries.emplace_back(extract_tag(block, "thoughts").value_or(""),
                           extract_tag(block, "rating"));
  } else {
    // Tolerate completions that skip the wrapper and emit bare ratings.
    for (const auto& rating : extract_all_tags(raw, "rating"))
      entries.emplace_back("", rating);
  }
  if (entries.empty()) {
    report.malformed = true;
    report.per_criterion.assign(rubric.criteria.size(), CriterionEval{});
    return report;
  }

  if (warn) {
    for (std::size_t k = 0; k < blocks.size() && k < rubric.criteria.size(); ++k) {
      auto name = extract_tag(blocks[k], "name");
      if (name && !name->empty() &&
          to_lower(*name) != to_lower(rubric.criteria[k].name))
        warn("criterion name mismatch at position " + std::to_string(k + 1) +
             ": got \"" + *name + "\", rubric has \"" +
             rubric.criteria[k].name + "\"");
    }
  }

  std::vector<int> ratings;
  for (std::size_t k = 0; k < rubric.criteria.size(); ++k) {
    CriterionEval eval;
    if (k < entries.size()) {
      eval.thoughts = entries[k].first;
      if (entries[k].second) {
        if (auto value = first_int(*entries[k].second);
            value && *value >= 0 && *value <= 2) {
          eval.rating = static_cast<int>(*value);
          eval.extracted = true;
        }
      }
    }
    ratings.push_back(eval.rating);
    report.per_criterion.push_back(std::move(eval));
  }
  report.aggregate = aggregate_score(rubric, ratings);
  return report;
}

double aggregate_score(const Rubric& rubric, const std::vector<int>& ratings) {
  if (ratings.size() != rubric.criteria.size())
    throw std::invalid_argument(
        "aggregate_score: " + std::to_string(ratings.size()) +
        " ratings for " + std::to_string(rubric.criteria.size()) + " criteria");
  long weight_sum = 0;
  long weighted = 0;
  for (std::size_t k = 0; k < ratings.size(); ++k) {
    weight_sum += rubric.criteria[k].weight;
    weighted += static_cast<long>(rubric.criteria[k].weight) * ratings[k];
  }
  if (weight_sum <= 0)
    throw std::invalid_argument("aggregate_score: non-positive total weight");
  return static_cast<double>(weighted) / static_cast<double>(weight_sum);
}

std::vector<CandidateAnswer> select_rubric_exemplars(
    const std::vector<CandidateAnswer>& answers, std::size_t m) {
  std::vector<CandidateAnswer> valid;
  for (const auto& a : answers)
    if (a.valid) valid.push_back(a);
  if (valid.empty())
    throw std::invalid_argument("select_rubric_exemplars: no valid answers");

  std::sort(valid.begin(), valid.end(), [](const auto& a, const auto& b) {
    if (a.word_count != b.word_count) return a.word_count < b.word_count;
    return a.index < b.index;
  });
  std::size_t n = valid.size();
  if (n <= m) return valid;
  std::vector<CandidateAnswer> picked;
  picked.reserve(m);
  for (std::size_t i = 0; i < m; ++i) picked.push_back(valid[i * n / m]);
  return picked;
}

std::vector<CandidateAnswer> generate_answers(Gateway& gateway,
                                              const PipelineSettings& settings,
                                              const Question& question,
                                              int j_count, TraceSink* trace,
                                              const std::string& id_prefix) {
  if (j_count < 2)
    throw std::invalid_argument("generate_answers requires J >= 2");

  PromptPair prompt =
      render_answer_prompt(settings.task, question.text,
                           budget_for(settings.solver, settings.solver_params));
  std::vector<ChatRequest> requests;
  requests.reserve(static_cast<std::size_t>(j_count));
  for (int j = 0; j < j_count; ++j) {
    ChatRequest request = make_request(prompt, settings.solver_params);
    request.seed = static_cast<std::uint64_t>(j);
    requests.push_back(std::move(request));
  }

  auto batch = gateway.complete_batch(settings.solver, requests,
                                      settings.parallelism);
  std::vector<CandidateAnswer> answers(static_cast<std::size_t>(j_count));
  for (const auto& item : batch) {
    CandidateAnswer& answer = answers[item.index];
    answer.index = static_cast<int>(item.index);
    std::string request_id =
        id_prefix + "/answer/" + std::to_string(item.index);
    if (!item.ok()) {
      answer.valid = false;
      trace_outcome(trace, request_id, settings.solver.role,
                    requests[item.index], "error: " + item.error);
      continue;
    }
    answer.text = std::string(trim(item.response->text));
    answer.word_count = word_count(answer.text);
    answer.valid = !answer.text.empty() &&
                   item.response->finish_reason == FinishReason::kStop;
    trace_outcome(trace, request_id, settings.solver.role,
                  requests[item.index], item.response->text);
  }
  return answers;
}

Parsed<RubricParse> generate_rubric(Gateway& gateway,
                                    const PipelineSettings& settings,
                                    const std::optional<Document>& doc,
                                    const std::string& question,
                                    const std::string& ref_answer,
                                    const std::vector<CandidateAnswer>& exemplars,
                                    TraceSink* trace,
                                    const std::string& request_id) {
  std::vector<std::string> texts;
  texts.reserve(exemplars.size());
  for (const auto& e : exemplars) texts.push_back(e.text);
  PromptPair prompt = render_rubric_prompt(
      settings.shared, doc, question, ref_answer, texts, settings.max_criteria,
      budget_for(settings.verifier, settings.rubric_params));
  ChatRequest request = make_request(prompt, settings.rubric_params);
  ChatResponse response = gateway.complete(settings.verifier, request);
  trace_outcome(trace, request_id, settings.verifier.role, request,
                response.text);
  return parse_rubric_output(response.text, settings.max_criteria);
}

EvaluationReport grade_answer(Gateway& gateway, const PipelineSettings& settings,
                              const std::string& question, const Rubric& rubric,
                              const CandidateAnswer& answer, TraceSink* trace,
                              const std::string& request_id) {
  PromptPair prompt = render_grading_prompt(
      settings.shared, question, rubric, answer.text,
      budget_for(settings.verifier, settings.grading_params));
  ChatRequest request = make_request(prompt, settings.grading_params);
  ChatResponse response = gateway.complete(settings.verifier, request);
  trace_outcome(trace, request_id, settings.verifier.role, request,
                response.text);
  return parse_grading_output(response.text, rubric, answer.index);
}

namespace {

std::vector<EvaluationReport> grade_answers_with_rubric(
    Gateway& gateway, const PipelineSettings& settings,
    const std::string& question, const Rubric& rubric,
    const std::vector<const CandidateAnswer*>& valid, TraceSink* trace,
    const std::string& id_prefix, StageProvenance& provenance) {
  std::vector<ChatRequest> requests;
  requests.reserve(valid.size());
  for (const CandidateAnswer* answer : valid) {
    PromptPair prompt = render_grading_prompt(
        settings.shared, question, rubric, answer->text,
        budget_for(settings.verifier, settings.grading_params));
    requests.push_back(make_request(prompt, settings.grading_params));
  }
  auto batch =
      gateway.complete_batch(settings.verifier, requests, settings.parallelism);

  std::vector<EvaluationReport> reports;
  reports.resize(valid.size());
  for (const auto& item : batch) {
    const CandidateAnswer& answer = *valid[item.index];
    std::string request_id = id_prefix + "/grade/" + std::to_string(answer.index);
    provenance.grading_request_ids.push_back(request_id);
    if (!item.ok()) {
      EvaluationReport report;
      report.answer_index = answer.index;
      report.malformed = true;
      report.per_criterion.assign(rubric.criteria.size(), CriterionEval{});
      reports[item.index] = std::move(report);
      trace_outcome(trace, request_id, settings.verifier.role,
                    requests[item.index], "error: " + item.error);
      continue;
    }
    reports[item.index] =
        parse_grading_output(item.response->text, rubric, answer.index);
    trace_outcome(trace, request_id, settings.verifier.role,
                  requests[item.index], item.response->text);
  }
  return reports;
}

std::vector<EvaluationReport> grade_answers_without_rubric(
    Gateway& gateway, const PipelineSettings& settings,
    const std::optional<Document>& doc, const std::string& question,
    const std::vector<const CandidateAnswer*>& valid, TraceSink* trace,
    const std::string& id_prefix, StageProvenance& provenance) {
  std::vector<ChatRequest> requests;
  requests.reserve(valid.size());
  for (const CandidateAnswer* answer : valid) {
    PromptPair prompt = render_norubric_grading_prompt(
        settings.shared, doc, question, answer->text,
        budget_for(settings.verifier, settings.grading_params));
    requests.push_back(make_request(prompt, settings.grading_params));
  }
  auto batch =
      gateway.complete_batch(settings.verifier, requests, settings.parallelism);

  std::vector<EvaluationReport> reports;
  reports.resize(valid.size());
  for (const auto& item : batch) {
    const CandidateAnswer& answer = *valid[item.index];
    std::string request_id = id_prefix + "/grade/" + std::to_string(answer.index);
    provenance.grading_request_ids.push_back(request_id);
    EvaluationReport report;
    report.answer_index = answer.index;
    if (item.ok()) {
      auto rating = parse_norubric_rating(item.response->text);
      if (rating.ok()) {
        report.aggregate = static_cast<double>(rating.value());
      } else {
        report.malformed = true;
      }
      trace_outcome(trace, request_id, settings.verifier.role,
                    requests[item.index], item.response->text);
    } else {
      report.malformed = true;
      trace_outcome(trace, request_id, settings.verifier.role,
                    requests[item.index], "error: " + item.error);
    }
    reports[item.index] = std::move(report);
  }
  return reports;
}

}  // namespace

ExampleResult run_example(Gateway& gateway, const PipelineSettings& settings,
                          const Document& doc, std::size_t draw_index,
                          TraceSink* trace) {
  RawExample example;
  example.draw_index = draw_index;
  example.example_id = doc.id;
  example.config_hash = settings.config_hash;
  example.doc = doc;

  JudgeMode mode = settings.judge_mode;
  if (mode == JudgeMode::kRubricGrounded && !settings.ground_rubric)
    mode = JudgeMode::kRubricUngrounded;
  example.judge_mode = to_string(mode);

  std::string stage = "question_synthesis";
  auto fail = [&](const std::string& reason) {
    ExampleResult result;
    result.failure =
        ExampleFailure{draw_index, example.example_id, stage, reason};
    return result;
  };

  try {
    // Question synthesis.
    std::optional<Document> question_doc;
    if (settings.ground_question) question_doc = doc;
    PromptPair prompt =
        render_question_prompt(settings.task, question_doc,
                               budget_for(settings.proposer,
                                          settings.proposer_params));
    ChatRequest request = make_request(prompt, settings.proposer_params);
    ChatResponse response = gateway.complete(settings.proposer, request);
    example.provenance.question_request_id = example.example_id + "/question";
    trace_outcome(trace, example.provenance.question_request_id,
                  settings.proposer.role, request, response.text);
    auto parsed = parse_question_output(response.text);
    if (!parsed.ok()) return fail(parsed.reason());
    example.question = parsed.value().first;
    example.question.task_id = settings.task.task_id;
    example.question.source_doc_id = doc.id;
    example.ref_answer = parsed.value().second;

    // Question answering.
    stage = "question_answering";
    example.answers =
        generate_answers(gateway, settings, example.question,
                         settings.answers_per_question, trace,
                         example.example_id);
    for (std::size_t j = 0; j < example.answers.size(); ++j)
      example.provenance.answer_request_ids.push_back(
          example.example_id + "/answer/" + std::to_string(j));

    std::vector<const CandidateAnswer*> valid;
    for (const auto& a : example.answers)
      if (a.valid) valid.push_back(&a);
    if (valid.empty()) {
      // Nothing to grade; the filter rejects this example downstream.
      ExampleResult result;
      result.example = std::move(example);
      return result;
    }

    if (judge_mode_uses_rubric(mode)) {
      // Rubric generation.
      stage = "rubric_generation";
      std::vector<CandidateAnswer> owned;
      for (const auto* a : valid) owned.push_back(*a);
      auto exemplars = select_rubric_exemplars(
          owned, static_cast<std::size_t>(settings.exemplar_count));
      std::optional<Document> rubric_doc;
      if (mode == JudgeMode::kRubricGrounded) rubric_doc = doc;
      example.provenance.rubric_request_id = example.example_id + "/rubric";
      auto rubric = generate_rubric(gateway, settings, rubric_doc,
                                    example.question.text,
                                    example.ref_answer.text, exemplars, trace,
                                    example.provenance.rubric_request_id);
      if (!rubric.ok()) return fail(rubric.reason());
      example.rubric = rubric.value().rubric;

      // Answer grading.
      stage = "answer_grading";
      example.reports = grade_answers_with_rubric(
          gateway, settings, example.question.text, example.rubric, valid,
          trace, example.example_id, example.provenance);
    } else if (mode == JudgeMode::kNoRubric) {
      stage = "answer_grading";
      std::optional<Document> grading_doc;
      if (settings.ground_rubric) grading_doc = doc;
      example.reports = grade_answers_without_rubric(
          gateway, settings, grading_doc, example.question.text, valid, trace,
          example.example_id, example.provenance);
    } else {  // pairwise anchor judge
      stage = "answer_grading";
      std::vector<CandidateAnswer> owned;
      for (const auto* a : valid) owned.push_back(*a);
      auto outcomes =
          pairwise_rank_answers(gateway, settings, example.question.text,
                                owned, trace, example.example_id);
      for (const auto& outcome : outcomes) {
        EvaluationReport report;
        report.answer_index = outcome.candidate_index;
        report.aggregate = outcome.relative;
        report.malformed = outcome.malformed;
        example.reports.push_back(std::move(report));
        if (!outcome.is_anchor) {
          example.provenance.grading_request_ids.push_back(
              example.example_id + "/grade/" +
              std::to_string(outcome.candidate_index) + "/ab");
          example.provenance.grading_request_ids.push_back(
              example.example_id + "/grade/" +
              std::to_string(outcome.candidate_index) + "/ba");
        }
      }
    }

    std::sort(example.reports.begin(), example.reports.end(),
              [](const auto& a, const auto& b) {
                return a.answer_index < b.answer_index;
              });
    ExampleResult result;
    result.example = std::move(example);
    return result;
  } catch (const ContextOverflowError& e) {
    return fail(std::string("context overflow: ") + e.what());
  } catch (const RenderError& e) {
    return fail(std::string("render error: ") + e.what());
  } catch (const TransportError& e) {
    return fail(std::string("transport error: ") + e.what());
  } catch (const AuthError& e) {
    return fail(std::string("auth error: ") + e.what());
  } catch (const SchemaError& e) {
    return fail(std::string("schema error: ") + e.what());
  } catch (const UnscriptedRequestError& e) {
    return fail(e.what());
  }
}

}  // namespace pop
