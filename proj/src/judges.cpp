#include "pop/judges.hpp"

#include <algorithm>
#include <stdexcept>

#include "pop/tags.hpp"

namespace pop {

namespace {

std::optional<int> score_in_range(const std::optional<std::string>& block) {
  if (!block) return std::nullopt;
  auto value = first_int(*block);
  if (!value || *value < 0 || *value > 10) return std::nullopt;
  return static_cast<int>(*value);
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

}  // namespace

Parsed<int> parse_norubric_rating(const std::string& raw) {
  auto rating = score_in_range(extract_tag(raw, "rating"));
  if (!rating)
    return Parsed<int>::failure("no rating in 0..10", raw);
  return Parsed<int>::success(*rating);
}

Parsed<std::pair<int, int>> parse_pairwise_scores(const std::string& raw) {
  auto a = score_in_range(extract_tag(raw, "score_a"));
  auto b = score_in_range(extract_tag(raw, "score_b"));
  if (!a || !b)
    return Parsed<std::pair<int, int>>::failure(
        "missing or out-of-range score_a/score_b", raw);
  return Parsed<std::pair<int, int>>::success({*a, *b});
}

Parsed<int> grade_without_rubric(Gateway& gateway,
                                 const PipelineSettings& settings,
                                 const std::optional<Document>& doc,
                                 const std::string& question,
                                 const CandidateAnswer& answer,
                                 TraceSink* trace,
                                 const std::string& request_id) {
  PromptPair prompt = render_norubric_grading_prompt(
      settings.shared, doc, question, answer.text,
      TokenBudget{settings.verifier.max_context,
                  settings.grading_params.max_new_tokens});
  ChatRequest request = make_request(prompt, settings.grading_params);
  ChatResponse response = gateway.complete(settings.verifier, request);
  if (trace)
    trace->record(request_id, settings.verifier.role, request, response.text);
  return parse_norubric_rating(response.text);
}

std::size_t select_anchor(const std::vector<CandidateAnswer>& answers) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < answers.size(); ++i)
    if (answers[i].valid) order.push_back(i);
  if (order.empty())
    throw std::invalid_argument("select_anchor: no valid answers");
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (answers[a].word_count != answers[b].word_count)
      return answers[a].word_count < answers[b].word_count;
    return answers[a].index < answers[b].index;
  });
  return order[(order.size() - 1) / 2];  // lower median
}

std::vector<PairwiseOutcome> pairwise_rank_answers(
    Gateway& gateway, const PipelineSettings& settings,
    const std::string& question, const std::vector<CandidateAnswer>& answers,
    TraceSink* trace, const std::string& id_prefix) {
  std::vector<const CandidateAnswer*> valid;
  for (const auto& a : answers)
    if (a.valid) valid.push_back(&a);
  if (valid.size() < 2)
    throw std::invalid_argument(
        "pairwise_rank_answers requires >= 2 valid answers");

  std::size_t anchor_pos = select_anchor(answers);
  const CandidateAnswer& anchor = answers[anchor_pos];

  // Two requests per non-anchor candidate: (candidate, anchor) then
  // (anchor, candidate).
  std::vector<const CandidateAnswer*> candidates;
  std::vector<ChatRequest> requests;
  TokenBudget budget{settings.verifier.max_context,
                     settings.grading_params.max_new_tokens};
  for (const CandidateAnswer* candidate : valid) {
    if (candidate->index == anchor.index) continue;
    candidates.push_back(candidate);
    requests.push_back(make_request(
        render_pairwise_grading_prompt(settings.shared, question,
                                       candidate->text, anchor.text, budget),
        settings.grading_params));
    requests.push_back(make_request(
        render_pairwise_grading_prompt(settings.shared, question, anchor.text,
                                       candidate->text, budget),
        settings.grading_params));
  }

  auto batch =
      gateway.complete_batch(settings.verifier, requests, settings.parallelism);

  std::vector<PairwiseOutcome> outcomes;
  outcomes.reserve(valid.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto& ab = batch[2 * c];
    const auto& ba = batch[2 * c + 1];
    PairwiseOutcome outcome;
    outcome.candidate_index = candidates[c]->index;
    std::string base = id_prefix + "/grade/" +
                       std::to_string(outcome.candidate_index);
    if (trace) {
      trace->record(base + "/ab", settings.verifier.role, requests[2 * c],
                    ab.ok() ? ab.response->text : "error: " + ab.error);
      trace->record(base + "/ba", settings.verifier.role, requests[2 * c + 1],
                    ba.ok() ? ba.response->text : "error: " + ba.error);
    }
    if (!ab.ok() || !ba.ok()) {
      outcome.malformed = true;
      outcomes.push_back(outcome);
      continue;
    }
    auto scores_ab = parse_pairwise_scores(ab.response->text);
    auto scores_ba = parse_pairwise_scores(ba.response->text);
    if (!scores_ab.ok() || !scores_ba.ok()) {
      outcome.malformed = true;
      outcomes.push_back(outcome);
      continue;
    }
    outcome.s_cand_order_ab = scores_ab.value().first;
    outcome.s_anchor_order_ab = scores_ab.value().second;
    outcome.s_anchor_order_ba = scores_ba.value().first;
    outcome.s_cand_order_ba = scores_ba.value().second;
    outcome.relative =
        ((outcome.s_cand_order_ab - outcome.s_anchor_order_ab) +
         (outcome.s_cand_order_ba - outcome.s_anchor_order_ba)) /
        2.0;
    outcomes.push_back(outcome);
  }

  PairwiseOutcome anchor_outcome;
  anchor_outcome.candidate_index = anchor.index;
  anchor_outcome.is_anchor = true;
  anchor_outcome.relative = 0.0;
  outcomes.push_back(anchor_outcome);

  std::sort(outcomes.begin(), outcomes.end(), [](const auto& a, const auto& b) {
    return a.candidate_index < b.candidate_index;
  });
  return outcomes;
}

}  // namespace pop
