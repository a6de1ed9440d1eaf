// pop: corpus-grounded self-play synthesis of DPO preference datasets.
//
// Subcommands: synthesize | pair | diagnose | regrade | templates

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pop/checkpoint.hpp"
#include "pop/config.hpp"
#include "pop/diagnostics.hpp"
#include "pop/orchestrator.hpp"
#include "pop/pairing.hpp"
#include "pop/serialization.hpp"
#include "pop/templates.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string corpus;
  std::string corpus_format;
  std::string text_field;
  std::string output_dir;
  std::string template_dir;
  std::string trace_dir;
  std::string judge_mode;
  std::string backend;
  std::string mock_script;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool no_ground_rubric = false;
  bool no_ground_question = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Run config JSON file");
  cmd->add_option("--corpus", flags.corpus, "Corpus path (overrides config)");
  cmd->add_option("--corpus-format", flags.corpus_format,
                  "jsonl-field | plain-lines | directory-of-text-files");
  cmd->add_option("--text-field", flags.text_field,
                  "JSON field holding record text (jsonl-field)");
  cmd->add_option("--output-dir", flags.output_dir, "Output directory");
  cmd->add_option("--template-dir", flags.template_dir,
                  "Prompt template asset directory");
  cmd->add_option("--trace-dir", flags.trace_dir,
                  "Mirror every request/response under this directory");
  cmd->add_option("--judge-mode", flags.judge_mode,
                  "rubric_grounded | rubric_ungrounded | no_rubric | "
                  "pairwise_anchor");
  cmd->add_option("--backend", flags.backend, "http | mock");
  cmd->add_option("--mock-script", flags.mock_script,
                  "Replay script for the mock backend");
  cmd->add_option("--seed", flags.seed, "Sampling seed")
      ->each([&flags](const std::string&) { flags.seed_set = true; });
  cmd->add_flag("--no-ground-rubric", flags.no_ground_rubric,
                "Set the rubric knowledge slot to \"None\"");
  cmd->add_flag("--no-ground-question", flags.no_ground_question,
                "Set the question knowledge slot to \"None\"");
}

pop::RunConfig resolve_config(const CommonFlags& flags) {
  pop::RunConfig config;
  if (!flags.config_path.empty())
    config = pop::load_config_file(flags.config_path);
  if (!flags.corpus.empty()) config.corpus_path = flags.corpus;
  if (!flags.corpus_format.empty()) {
    auto format = pop::corpus_format_from_string(flags.corpus_format);
    if (!format)
      throw std::runtime_error("unknown corpus format: " + flags.corpus_format);
    config.corpus_format = *format;
  }
  if (!flags.text_field.empty()) config.text_field = flags.text_field;
  if (!flags.output_dir.empty()) config.output_dir = flags.output_dir;
  if (!flags.template_dir.empty()) config.template_dir = flags.template_dir;
  if (!flags.trace_dir.empty()) config.trace_dir = flags.trace_dir;
  if (!flags.judge_mode.empty()) {
    auto mode = pop::judge_mode_from_string(flags.judge_mode);
    if (!mode) throw std::runtime_error("unknown judge mode: " + flags.judge_mode);
    config.judge_mode = *mode;
  }
  if (!flags.backend.empty()) config.backend = flags.backend;
  if (!flags.mock_script.empty()) config.mock_script = flags.mock_script;
  if (flags.seed_set) config.seed = flags.seed;
  if (flags.no_ground_rubric) config.ground_rubric = false;
  if (flags.no_ground_question) config.ground_question = false;
  return config;
}

int report_config_errors(const std::vector<std::string>& errors) {
  if (errors.empty()) return 0;
  std::cerr << "config is not runnable:\n";
  for (const auto& e : errors) std::cerr << "  - " << e << "\n";
  return 2;
}

int check_config(const pop::RunConfig& config) {
  return report_config_errors(pop::validate_config(config));
}

int check_inference_config(const pop::RunConfig& config) {
  return report_config_errors(pop::validate_inference_config(config));
}

std::unique_ptr<pop::FileTraceSink> make_trace(const pop::RunConfig& config) {
  if (config.trace_dir.empty()) return nullptr;
  fs::create_directories(config.trace_dir);
  return std::make_unique<pop::FileTraceSink>(
      (fs::path(config.trace_dir) / "requests.jsonl").string());
}

int cmd_synthesize(const CommonFlags& flags, bool resume) {
  pop::RunConfig config = resolve_config(flags);
  if (int rc = check_config(config)) return rc;

  auto trace = make_trace(config);
  pop::Gateway gateway = pop::make_gateway(config, pop::make_backend(config));
  pop::RunReport report =
      pop::run_synthesize(config, gateway, resume, trace.get());
  pop::write_run_report(
      report, (fs::path(config.output_dir) / "run_report.json").string());

  json usage = json::object();
  for (const auto& [role, u] : gateway.usage().snapshot()) {
    usage[pop::to_string(role)] = {{"calls", u.calls},
                                   {"prompt_tokens", u.prompt_tokens},
                                   {"completion_tokens", u.completion_tokens},
                                   {"retries", u.retries},
                                   {"failures", u.failures}};
  }
  std::ofstream usage_out(
      (fs::path(config.output_dir) / "usage.json").string(),
      std::ios::binary | std::ios::trunc);
  usage_out << usage.dump(2) << "\n";

  std::cout << "sampled " << report.sampled << "/" << report.requested
            << " documents"
            << (report.corpus_exhausted ? " (corpus exhausted)" : "") << "\n"
            << "completed " << report.succeeded << ", failed " << report.failed
            << ", skipped (already done) " << report.skipped_completed << "\n"
            << "accepted after filtering: " << report.accepted
            << ", pairable: " << report.paired << "\n";
  for (const auto& [role, u] : gateway.usage().snapshot())
    std::cout << "  " << pop::to_string(role) << ": " << u.calls << " calls, "
              << u.retries << " retries, " << u.failures << " failures\n";
  return report.accepted >= 1 ? 0 : 1;
}

int cmd_pair(const CommonFlags& flags, std::string raw_path,
             std::string out_path, std::string summary_path) {
  pop::RunConfig config = resolve_config(flags);
  fs::path out_dir(config.output_dir);
  if (raw_path.empty()) raw_path = (out_dir / "raw_examples.jsonl").string();
  if (out_path.empty()) out_path = (out_dir / "dpo_dataset.jsonl").string();
  if (summary_path.empty())
    summary_path = (out_dir / "pairing_summary.json").string();

  pop::TaskSpec task = config.template_dir.empty()
                           ? pop::default_task_spec(config.task)
                           : pop::load_task_spec(config.template_dir, config.task);
  pop::PairingSummary summary =
      pop::build_dpo_dataset_file(raw_path, task, out_path, summary_path);
  std::cout << "pairs written: " << summary.accepted << " of "
            << summary.total_examples << " examples ("
            << summary.duplicates_skipped << " duplicates skipped)\n";
  for (const auto& [reason, count] : summary.rejected_by_reason)
    std::cout << "  rejected " << reason << ": " << count << "\n";
  return 0;
}

int cmd_diagnose(const CommonFlags& flags, std::string raw_path,
                 std::string pairs_path, bool with_stats, bool with_bins,
                 bool with_categorize) {
  pop::RunConfig config = resolve_config(flags);
  fs::path out_dir(config.output_dir);
  if (raw_path.empty()) raw_path = (out_dir / "raw_examples.jsonl").string();
  if (pairs_path.empty()) pairs_path = (out_dir / "dpo_dataset.jsonl").string();

  auto raw = pop::load_raw_examples(raw_path, /*skip_corrupt=*/true);
  std::vector<pop::PreferencePair> pairs;
  if (fs::exists(pairs_path)) pairs = pop::load_pairs(pairs_path);

  bool any = with_stats || with_bins || with_categorize;
  if (!any) with_stats = with_bins = true;

  std::string hash = pop::config_hash(config);
  if (with_stats) {
    pop::DatasetStats stats = pop::dataset_stats(raw, pairs);
    pop::write_stats_json(stats, (out_dir / "dataset_stats.json").string(),
                          hash, pop::to_string(config.judge_mode));
    std::cout << "questions " << stats.n_questions << ", mean answers "
              << stats.mean_valid_answers << ", mean criteria "
              << stats.mean_criteria << ", mean score " << stats.mean_score
              << "\n";
  }
  if (with_bins) {
    auto bins = pop::score_distribution_bins(raw, config.diagnostics_bins);
    pop::write_bins_csv(bins, (out_dir / "score_bins.csv").string());
    std::cout << "score bins written (" << bins.size() << " bins)\n";
  }
  if (with_categorize) {
    if (int rc = check_inference_config(config)) return rc;
    auto trace = make_trace(config);
    pop::Gateway gateway = pop::make_gateway(config, pop::make_backend(config));
    pop::PipelineSettings settings = pop::settings_from_config(config);
    if (auto it = config.endpoints.find(pop::Role::kCategorizer);
        it != config.endpoints.end()) {
      settings.verifier.base_url = it->second.base_url;
      settings.verifier.model_name = it->second.model;
      settings.verifier.api_key_env = it->second.api_key_env;
      settings.verifier.max_context = it->second.max_context;
    }

    std::vector<std::string> questions, criteria;
    for (const auto& example : raw) {
      if (!pop::validate_example(example).accepted) continue;
      questions.push_back(example.question.text);
      for (const auto& c : example.rubric.criteria) criteria.push_back(c.name);
    }
    auto dump = [&](const pop::Categorization& cat,
                    const std::vector<std::string>& items,
                    const std::string& path) {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out << "item,label\n";
      for (std::size_t i = 0; i < items.size(); ++i) {
        std::string item = items[i];
        for (char& c : item)
          if (c == ',' || c == '\n') c = ' ';
        out << item << "," << cat.assignments[i] << "\n";
      }
      for (const auto& w : cat.warnings) std::cerr << "warning: " << w << "\n";
    };
    auto topics = pop::categorize(gateway, settings, questions,
                                  pop::CategorizeKind::kQuestionTopics,
                                  config.categorize_sample, config.seed,
                                  config.categorize_batch_size, trace.get());
    dump(topics, questions, (out_dir / "question_topics.csv").string());
    auto meta = pop::categorize(gateway, settings, criteria,
                                pop::CategorizeKind::kMetaCriteria,
                                config.categorize_sample, config.seed,
                                config.categorize_batch_size, trace.get());
    dump(meta, criteria, (out_dir / "meta_criteria.csv").string());
    std::cout << "categorization written (" << topics.labels.size()
              << " topics, " << meta.labels.size() << " meta-criteria)\n";
  }
  return 0;
}

int cmd_regrade(const CommonFlags& flags, std::string raw_path,
                std::string pairs_path, const std::string& mode_name) {
  pop::RunConfig config = resolve_config(flags);
  if (int rc = check_inference_config(config)) return rc;
  fs::path out_dir(config.output_dir);
  if (raw_path.empty()) raw_path = (out_dir / "raw_examples.jsonl").string();
  if (pairs_path.empty()) pairs_path = (out_dir / "dpo_dataset.jsonl").string();

  pop::GoldMode mode = pop::GoldMode::kSameRubric;
  if (mode_name == "fresh_rubric") mode = pop::GoldMode::kFreshRubric;
  else if (mode_name != "same_rubric")
    throw std::runtime_error("regrade mode must be fresh_rubric or same_rubric");

  auto it = config.endpoints.find(pop::Role::kGoldVerifier);
  if (it == config.endpoints.end() && config.backend == "http")
    throw std::runtime_error("regrade requires an endpoints.gold_verifier entry");

  auto trace = make_trace(config);
  pop::Gateway gateway = pop::make_gateway(config, pop::make_backend(config));
  pop::PipelineSettings settings = pop::settings_from_config(config);
  if (it != config.endpoints.end()) {
    settings.verifier.role = pop::Role::kGoldVerifier;
    settings.verifier.base_url = it->second.base_url;
    settings.verifier.model_name = it->second.model;
    settings.verifier.api_key_env = it->second.api_key_env;
    settings.verifier.max_context = it->second.max_context;
  }

  auto raw = pop::load_raw_examples(raw_path, /*skip_corrupt=*/true);
  pop::GoldReport gold =
      pop::regrade_with_gold(gateway, settings, raw, mode, trace.get());

  // Per-answer scores plus pooled percentile ranks for the correlation.
  std::vector<double> primary_pooled, gold_pooled;
  std::ofstream scores_out((out_dir / "gold_scores.jsonl").string(),
                           std::ios::binary | std::ios::trunc);
  for (const auto& example : raw) {
    std::vector<double> primary, gold_scores;
    std::vector<int> indices;
    for (const auto& g : pop::graded_answers(example)) {
      auto found = gold.scores.find({example.example_id, g.answer_index});
      if (found == gold.scores.end()) continue;
      primary.push_back(g.score);
      gold_scores.push_back(found->second);
      indices.push_back(g.answer_index);
    }
    for (std::size_t i = 0; i < indices.size(); ++i) {
      scores_out << json{{"example_id", example.example_id},
                         {"answer_index", indices[i]},
                         {"primary_score", primary[i]},
                         {"gold_score", gold_scores[i]},
                         {"mode", pop::to_string(mode)}}
                        .dump()
                 << "\n";
    }
    if (primary.size() >= 2) {
      auto p = pop::percentile_ranks(primary);
      auto g = pop::percentile_ranks(gold_scores);
      primary_pooled.insert(primary_pooled.end(), p.begin(), p.end());
      gold_pooled.insert(gold_pooled.end(), g.begin(), g.end());
    }
  }

  json summary{{"mode", pop::to_string(mode)},
               {"config_hash", pop::config_hash(config)},
               {"graded_answers", gold.scores.size()},
               {"failures", gold.failures.size()}};
  std::size_t counted = 0;
  if (fs::exists(pairs_path)) {
    auto pairs = pop::load_pairs(pairs_path);
    double accuracy = pop::pairwise_ranking_accuracy(pairs, gold, &counted);
    summary["pairwise_ranking_accuracy"] = accuracy;
    summary["pairs_counted"] = counted;

    // One row per pair for external plotting.
    std::ofstream pairs_csv((out_dir / "gold_pairs.csv").string(),
                            std::ios::binary | std::ios::trunc);
    pairs_csv << "example_id,chosen_index,rejected_index,chosen_score,"
                 "rejected_score,gold_chosen,gold_rejected,gold_agrees\n";
    for (const auto& pair : pairs) {
      auto chosen = gold.scores.find({pair.example_id, pair.chosen_index});
      auto rejected = gold.scores.find({pair.example_id, pair.rejected_index});
      if (chosen == gold.scores.end() || rejected == gold.scores.end())
        continue;
      pairs_csv << pair.example_id << "," << pair.chosen_index << ","
                << pair.rejected_index << "," << pair.chosen_score << ","
                << pair.rejected_score << "," << chosen->second << ","
                << rejected->second << ","
                << (chosen->second >= rejected->second ? 1 : 0) << "\n";
    }
  }
  bool constant = true;
  for (double v : primary_pooled)
    if (v != primary_pooled.front()) { constant = false; break; }
  bool gold_constant = true;
  for (double v : gold_pooled)
    if (v != gold_pooled.front()) { gold_constant = false; break; }
  if (primary_pooled.size() >= 2 && !constant && !gold_constant)
    summary["spearman"] = pop::spearman(primary_pooled, gold_pooled);

  std::ofstream summary_out((out_dir / "gold_summary.json").string(),
                            std::ios::binary | std::ios::trunc);
  summary_out << summary.dump(2) << "\n";
  std::cout << summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corpus-grounded self-play synthesis of DPO preference data"};
  app.require_subcommand(1);

  CommonFlags flags;
  bool resume = false;
  std::string raw_path, pairs_path, out_path, summary_path;
  std::string regrade_mode = "same_rubric";
  bool with_stats = false, with_bins = false, with_categorize = false;
  std::string export_dir = "templates";

  CLI::App* synthesize =
      app.add_subcommand("synthesize", "Run the sampling loop");
  add_common_flags(synthesize, flags);
  synthesize->add_flag("--resume", resume,
                       "Continue a partially complete output directory");

  CLI::App* pair = app.add_subcommand("pair", "Build the DPO dataset");
  add_common_flags(pair, flags);
  pair->add_option("--raw", raw_path, "raw_examples.jsonl path");
  pair->add_option("--out", out_path, "dpo_dataset.jsonl path");
  pair->add_option("--summary", summary_path, "rejection summary JSON path");

  CLI::App* diagnose = app.add_subcommand("diagnose", "Dataset diagnostics");
  add_common_flags(diagnose, flags);
  diagnose->add_option("--raw", raw_path, "raw_examples.jsonl path");
  diagnose->add_option("--pairs", pairs_path, "dpo_dataset.jsonl path");
  diagnose->add_flag("--stats", with_stats, "Dataset statistics");
  diagnose->add_flag("--bins", with_bins, "Score distribution bins");
  diagnose->add_flag("--categorize", with_categorize,
                     "Topic / meta-criteria categorization (needs endpoint)");

  CLI::App* regrade =
      app.add_subcommand("regrade", "Regrade answers on a gold endpoint");
  add_common_flags(regrade, flags);
  regrade->add_option("--raw", raw_path, "raw_examples.jsonl path");
  regrade->add_option("--pairs", pairs_path, "dpo_dataset.jsonl path");
  regrade->add_option("--mode", regrade_mode, "fresh_rubric | same_rubric");

  CLI::App* templates =
      app.add_subcommand("templates", "Export editable prompt templates");
  templates->add_option("--dir", export_dir, "Destination directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synthesize->parsed()) return cmd_synthesize(flags, resume);
    if (pair->parsed()) return cmd_pair(flags, raw_path, out_path, summary_path);
    if (diagnose->parsed())
      return cmd_diagnose(flags, raw_path, pairs_path, with_stats, with_bins,
                          with_categorize);
    if (regrade->parsed())
      return cmd_regrade(flags, raw_path, pairs_path, regrade_mode);
    if (templates->parsed()) {
      pop::export_template_assets(export_dir);
      std::cout << "templates written to " << export_dir << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
