#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pop/corpus.hpp"
#include "pop/gateway.hpp"
#include "pop/parsed.hpp"
#include "pop/pipeline.hpp"

namespace pop {

/// Both-order comparison of one candidate against the anchor. `relative`
/// is the mean over the two orderings of (candidate score - anchor score);
/// the anchor itself gets relative = 0 without any calls.
struct PairwiseOutcome {
  int candidate_index = 0;
  int s_cand_order_ab = 0;    // candidate shown first
  int s_anchor_order_ab = 0;
  int s_cand_order_ba = 0;    // anchor shown first
  int s_anchor_order_ba = 0;
  double relative = 0.0;
  bool is_anchor = false;
  bool malformed = false;
};

/// First integer of the <rating> block, constrained to 0..10.
Parsed<int> parse_norubric_rating(const std::string& raw);

/// <score_a>/<score_b> pair, each constrained to 0..10.
Parsed<std::pair<int, int>> parse_pairwise_scores(const std::string& raw);

/// Grounded, rubric-free pointwise judge: one verifier call, holistic 0-10
/// rating. Unparseable or out-of-range ratings come back as failures.
Parsed<int> grade_without_rubric(Gateway& gateway,
                                 const PipelineSettings& settings,
                                 const std::optional<Document>& doc,
                                 const std::string& question,
                                 const CandidateAnswer& answer,
                                 TraceSink* trace = nullptr,
                                 const std::string& request_id = {});

/// Position of the anchor within `answers`: the element at position
/// floor((n-1)/2) of the length-sorted (ties by index) list. Requires at
/// least one valid answer.
std::size_t select_anchor(const std::vector<CandidateAnswer>& answers);

/// Anchor-based O(n) pairwise judging: every non-anchor candidate is
/// compared against the anchor in both presentation orders, 2(n-1) calls
/// total. Per-comparison parse failures mark that candidate malformed.
std::vector<PairwiseOutcome> pairwise_rank_answers(
    Gateway& gateway, const PipelineSettings& settings,
    const std::string& question, const std::vector<CandidateAnswer>& answers,
    TraceSink* trace = nullptr, const std::string& id_prefix = {});

}  // namespace pop
