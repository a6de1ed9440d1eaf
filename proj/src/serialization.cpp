#include "pop/serialization.hpp"

#include <fstream>
#include <iostream>
#include <stdexcept>

#include "pop/pairing.hpp"

namespace pop {

using json = nlohmann::json;

json to_json(const Document& doc) {
  return json{{"id", doc.id},
              {"text", doc.text},
              {"word_count", doc.word_count},
              {"source", doc.source}};
}

Document document_from_json(const json& j) {
  Document doc;
  doc.id = j.at("id").get<std::string>();
  doc.text = j.at("text").get<std::string>();
  doc.word_count = j.at("word_count").get<std::size_t>();
  doc.source = j.value("source", std::string{});
  return doc;
}

namespace {

json to_json(const Criterion& criterion) {
  json j{{"name", criterion.name},
         {"description", criterion.description},
         {"weight", criterion.weight}};
  if (criterion.gold_label) j["gold_label"] = *criterion.gold_label;
  return j;
}

Criterion criterion_from_json(const json& j) {
  Criterion criterion;
  criterion.name = j.at("name").get<std::string>();
  criterion.description = j.value("description", std::string{});
  criterion.weight = j.value("weight", 1);
  if (j.contains("gold_label") && j["gold_label"].is_string())
    criterion.gold_label = j["gold_label"].get<std::string>();
  return criterion;
}

json to_json(const CandidateAnswer& answer) {
  return json{{"index", answer.index},
              {"text", answer.text},
              {"word_count", answer.word_count},
              {"valid", answer.valid}};
}

CandidateAnswer answer_from_json(const json& j) {
  CandidateAnswer answer;
  answer.index = j.at("index").get<int>();
  answer.text = j.value("text", std::string{});
  answer.word_count = j.value("word_count", std::size_t{0});
  answer.valid = j.value("valid", false);
  return answer;
}

json to_json(const EvaluationReport& report) {
  json evals = json::array();
  for (const auto& eval : report.per_criterion) {
    evals.push_back(json{{"thoughts", eval.thoughts},
                         {"rating", eval.rating},
                         {"extracted", eval.extracted}});
  }
  return json{{"answer_index", report.answer_index},
              {"per_criterion", evals},
              {"aggregate", report.aggregate},
              {"malformed", report.malformed}};
}

EvaluationReport report_from_json(const json& j) {
  EvaluationReport report;
  report.answer_index = j.at("answer_index").get<int>();
  report.aggregate = j.value("aggregate", 0.0);
  report.malformed = j.value("malformed", false);
  if (j.contains("per_criterion")) {
    for (const auto& e : j["per_criterion"]) {
      CriterionEval eval;
      eval.thoughts = e.value("thoughts", std::string{});
      eval.rating = e.value("rating", 0);
      eval.extracted = e.value("extracted", false);
      report.per_criterion.push_back(std::move(eval));
    }
  }
  return report;
}

}  // namespace

json to_json(const RawExample& example) {
  json answers = json::array();
  for (const auto& a : example.answers) answers.push_back(to_json(a));
  json criteria = json::array();
  for (const auto& c : example.rubric.criteria) criteria.push_back(to_json(c));
  json reports = json::array();
  for (const auto& r : example.reports) reports.push_back(to_json(r));

  return json{
      {"schema", kRawExampleSchema},
      {"draw_index", example.draw_index},
      {"example_id", example.example_id},
      {"config_hash", example.config_hash},
      {"judge_mode", example.judge_mode},
      {"doc", to_json(example.doc)},
      {"question", example.question.text},
      {"task", to_string(example.question.task_id)},
      {"ref_answer", example.ref_answer.text},
      {"answers", answers},
      {"rubric", json{{"criteria", criteria}}},
      {"reports", reports},
      {"provenance",
       json{{"question", example.provenance.question_request_id},
            {"answers", example.provenance.answer_request_ids},
            {"rubric", example.provenance.rubric_request_id},
            {"gradings", example.provenance.grading_request_ids}}},
  };
}

RawExample raw_example_from_json(const json& j) {
  if (j.value("schema", std::string{}) != kRawExampleSchema)
    throw std::runtime_error("unexpected raw example schema: " +
                             j.value("schema", std::string{"<missing>"}));
  RawExample example;
  example.draw_index = j.at("draw_index").get<std::size_t>();
  example.example_id = j.at("example_id").get<std::string>();
  example.config_hash = j.value("config_hash", std::string{});
  example.judge_mode = j.value("judge_mode", std::string{});
  example.doc = document_from_json(j.at("doc"));
  example.question.text = j.at("question").get<std::string>();
  example.question.source_doc_id = example.doc.id;
  if (auto task = task_id_from_string(j.value("task", std::string{})))
    example.question.task_id = *task;
  example.ref_answer.text = j.value("ref_answer", std::string{});
  for (const auto& a : j.value("answers", json::array()))
    example.answers.push_back(answer_from_json(a));
  if (j.contains("rubric")) {
    for (const auto& c : j["rubric"].value("criteria", json::array()))
      example.rubric.criteria.push_back(criterion_from_json(c));
  }
  for (const auto& r : j.value("reports", json::array()))
    example.reports.push_back(report_from_json(r));
  if (j.contains("provenance")) {
    const auto& p = j["provenance"];
    example.provenance.question_request_id =
        p.value("question", std::string{});
    example.provenance.rubric_request_id = p.value("rubric", std::string{});
    for (const auto& id : p.value("answers", json::array()))
      example.provenance.answer_request_ids.push_back(id.get<std::string>());
    for (const auto& id : p.value("gradings", json::array()))
      example.provenance.grading_request_ids.push_back(id.get<std::string>());
  }
  return example;
}

json to_json(const ExampleFailure& failure) {
  return json{{"schema", kFailureSchema},
              {"draw_index", failure.draw_index},
              {"example_id", failure.example_id},
              {"stage", failure.stage},
              {"reason", failure.reason}};
}

ExampleFailure failure_from_json(const json& j) {
  ExampleFailure failure;
  failure.draw_index = j.at("draw_index").get<std::size_t>();
  failure.example_id = j.at("example_id").get<std::string>();
  failure.stage = j.value("stage", std::string{});
  failure.reason = j.value("reason", std::string{});
  return failure;
}

json to_json(const PreferencePair& pair) {
  return json{
      {"example_id", pair.example_id},
      {"question", pair.question},
      {"prompt", pair.prompt},
      {"chosen", pair.chosen},
      {"rejected", pair.rejected},
      {"chosen_score", pair.chosen_score},
      {"rejected_score", pair.rejected_score},
      {"chosen_words", pair.chosen_words},
      {"rejected_words", pair.rejected_words},
      {"chosen_index", pair.chosen_index},
      {"rejected_index", pair.rejected_index},
      {"judge_mode", pair.judge_mode},
      {"config_hash", pair.config_hash},
  };
}

PreferencePair pair_from_json(const json& j) {
  PreferencePair pair;
  pair.example_id = j.at("example_id").get<std::string>();
  pair.question = j.value("question", std::string{});
  pair.prompt = j.value("prompt", std::string{});
  pair.chosen = j.at("chosen").get<std::string>();
  pair.rejected = j.at("rejected").get<std::string>();
  pair.chosen_score = j.at("chosen_score").get<double>();
  pair.rejected_score = j.at("rejected_score").get<double>();
  pair.chosen_words = j.value("chosen_words", std::size_t{0});
  pair.rejected_words = j.value("rejected_words", std::size_t{0});
  pair.chosen_index = j.value("chosen_index", 0);
  pair.rejected_index = j.value("rejected_index", 0);
  pair.judge_mode = j.value("judge_mode", std::string{});
  pair.config_hash = j.value("config_hash", std::string{});
  return pair;
}

std::vector<RawExample> load_raw_examples(const std::string& path,
                                          bool skip_corrupt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<RawExample> examples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json parsed = json::parse(line, nullptr, false);
    if (parsed.is_discarded()) {
      if (!skip_corrupt)
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": invalid JSON");
      std::cerr << path << ":" << line_no << ": skipping corrupt line\n";
      continue;
    }
    try {
      examples.push_back(raw_example_from_json(parsed));
    } catch (const std::exception& e) {
      if (!skip_corrupt)
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " +
                                 e.what());
      std::cerr << path << ":" << line_no << ": skipping corrupt line ("
                << e.what() << ")\n";
    }
  }
  return examples;
}

std::vector<PreferencePair> load_pairs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<PreferencePair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json parsed = json::parse(line, nullptr, false);
    if (parsed.is_discarded())
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": invalid JSON");
    pairs.push_back(pair_from_json(parsed));
  }
  return pairs;
}

}  // namespace pop
