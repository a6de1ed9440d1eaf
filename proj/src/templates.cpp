#include "pop/templates.hpp"

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pop/text.hpp"

namespace fs = std::filesystem;

namespace pop {

namespace {

// ---------------------------------------------------------------------------
// Built-in stage templates. These are editable assets first (see
// export_template_assets); the copies here keep the engine functional
// without a template directory.

constexpr const char* kQuestionSystemHealthcare =
    R"(You are an expert medical educator who writes challenging long-form questions.

You will be given a piece of knowledge text. Synthesize exactly one question about it, together with a reference answer.

Requirements:
- The answer to the question must be derivable from the text alone.
- The question should require a detailed, long-form answer, not a single fact.
- The question must be self-contained: someone without the text must be able to understand what is asked.
- Do not mention the text, the passage, or the document in the question.
- Write a thorough reference answer using the information in the text.

Output format:
<question>the question</question>
<reference_answer>the reference answer</reference_answer>)";

constexpr const char* kQuestionSystemCreative =
    R"(You are an imaginative writing instructor who designs creative writing prompts.

You will be given a piece of knowledge text. Synthesize exactly one creative writing task that builds upon the text, together with a reference response.

Requirements:
- The task should build upon the ideas, setting, characters, or themes of the text; it does not need a single correct answer.
- The task should elicit a substantial piece of writing (a story, scene, or essay), not a one-line reply.
- The task must be self-contained and understandable without the text.
- Do not mention the text, the passage, or the document in the task.
- Write a strong reference response yourself.

Output format:
<question>the writing task</question>
<reference_answer>the reference response</reference_answer>)";

constexpr const char* kQuestionSystemInstruction =
    R"(You are an expert at designing instructions that test how well an assistant follows directions.

You will be given a piece of knowledge text. Synthesize exactly one instruction that builds upon the text, together with a reference response.

Requirements:
- The instruction should build upon the content of the text and include concrete constraints (length, structure, tone, format, or content requirements).
- The instruction must be self-contained and understandable without the text.
- Do not mention the text, the passage, or the document in the instruction.
- Write a reference response that satisfies every constraint.

Output format:
<question>the instruction</question>
<reference_answer>the reference response</reference_answer>)";

constexpr const char* kQuestionUser =
    R"(Knowledge:
{knowledge}

Synthesize the question and reference answer now. Remember the output format:
<question>...</question>
<reference_answer>...</reference_answer>)";

constexpr const char* kAnswerSystemHealthcare =
    R"(You are a knowledgeable medical assistant. Answer the user's question thoroughly and accurately in well-organized long form.)";

constexpr const char* kAnswerSystemCreative =
    R"(You are a talented writer. Complete the user's writing task with a polished, engaging piece of writing.)";

constexpr const char* kAnswerSystemInstruction =
    R"(You are a helpful assistant. Follow the user's instruction exactly, satisfying every stated constraint.)";

constexpr const char* kAnswerUser = R"({question})";

constexpr const char* kRubricSystem =
    R"(You are an expert evaluator designing a grading rubric for one specific question.

You will be given knowledge text, the question, a reference answer, and several candidate answers of varying quality.

Write at most {max_criteria} criteria. For each criterion:
- Give it a short name and a description of what separates good responses from bad ones.
- If the knowledge text contains a ground-truth fact the answer must match, extract that fact verbatim into a gold label. Otherwise omit the gold label and use the knowledge text to inform the description.
- Assign a positive integer weight reflecting how important the criterion is.

Only include criteria that meaningfully distinguish high-quality answers from low-quality ones. Do not include criteria that every candidate answer trivially satisfies or fails. If the knowledge is "None", rely on the question and answers alone.

Output format, one block per criterion:
<criterion>
<name>short name</name>
<description>what good and bad answers look like</description>
<gold_label>ground-truth fact from the knowledge (omit this tag if none)</gold_label>
<weight>positive integer</weight>
</criterion>)";

constexpr const char* kRubricUser =
    R"(Knowledge:
{knowledge}

Question:
{question}

Reference answer:
{reference_answer}

Candidate answers:
{exemplar_answers}

Write the rubric now: at most {max_criteria} criteria, in <criterion> blocks.)";

constexpr const char* kGradingSystem =
    R"(You are a strict grader. Grade one candidate answer against the rubric, criterion by criterion, in the order the criteria are listed.

For each criterion, first write your thoughts on how well the answer satisfies the criterion's description and gold label, then give a rating:
- 0 (Bad/Do not match gold)
- 1 (Medium/Partially match gold)
- 2 (Good/Fully match gold)

Output format, one block per criterion, in rubric order:
<evaluation>
<name>criterion name</name>
<thoughts>your reasoning</thoughts>
<rating>0, 1, or 2</rating>
</evaluation>)";

constexpr const char* kGradingUser =
    R"(Question:
{question}

Rubric:
{rubric}

Candidate answer:
{answer}

Grade the candidate answer now, one <evaluation> block per criterion, in order.)";

constexpr const char* kNorubricSystem =
    R"(You are a strict grader. You will be given knowledge text, a question, and one candidate answer.

Judge the overall quality of the answer on a rating scale of 0 to 10, where 0 is unusable and 10 is excellent. Use the knowledge text to check factual claims. First write your thoughts, then give the rating.

Output format:
<thoughts>your reasoning</thoughts>
<rating>integer from 0 to 10</rating>)";

constexpr const char* kNorubricUser =
    R"(Knowledge:
{knowledge}

Question:
{question}

Candidate answer:
{answer}

Judge the answer now.)";

constexpr const char* kPairwiseSystem =
    R"(You are a strict grader comparing two candidate answers to the same question.

Give both answers a score from 0 to 10, where 0 is unusable and 10 is excellent. Judge each answer on its own merits and in contrast with the other. First write your thoughts, then give both scores.

Output format:
<thoughts>your reasoning</thoughts>
<score_a>integer from 0 to 10 for Answer A</score_a>
<score_b>integer from 0 to 10 for Answer B</score_b>)";

constexpr const char* kPairwiseUser =
    R"(Question:
{question}

Answer A:
{answer_a}

Answer B:
{answer_b}

Score both answers now.)";

bool slot_char(char c) {
  return (c >= 'a' && c <= 'z') || c == '_';
}

std::string read_file_or(const fs::path& path, const std::string& fallback) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return fallback;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write template asset: " + path.string());
  out << content;
}

PromptPair finish(std::string system, std::string user,
                  const std::optional<TokenBudget>& budget) {
  PromptPair pair;
  pair.system = std::move(system);
  pair.user = std::move(user);
  pair.est_tokens = estimate_tokens(pair.system, pair.user);
  if (budget) {
    long available = static_cast<long>(budget->max_context) -
                     static_cast<long>(budget->max_new_tokens);
    if (pair.est_tokens > available)
      throw ContextOverflowError("prompt estimate " +
                                 std::to_string(pair.est_tokens) +
                                 " tokens exceeds budget " +
                                 std::to_string(available));
  }
  return pair;
}

std::string knowledge_slot(const std::optional<Document>& doc) {
  return doc ? doc->text : std::string("None");
}

}  // namespace

std::string to_string(TaskId id) {
  switch (id) {
    case TaskId::kHealthcareQa: return "healthcare_qa";
    case TaskId::kCreativeWriting: return "creative_writing";
    case TaskId::kInstructionFollowing: return "instruction_following";
    case TaskId::kCustom: return "custom";
  }
  return "unknown";
}

std::optional<TaskId> task_id_from_string(std::string_view name) {
  if (name == "healthcare_qa") return TaskId::kHealthcareQa;
  if (name == "creative_writing") return TaskId::kCreativeWriting;
  if (name == "instruction_following") return TaskId::kInstructionFollowing;
  if (name == "custom") return TaskId::kCustom;
  return std::nullopt;
}

std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& slots) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    char c = tmpl[i];
    if (c != '{') {
      out.push_back(c);
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < tmpl.size() && slot_char(tmpl[j])) ++j;
    if (j > i + 1 && j < tmpl.size() && tmpl[j] == '}') {
      std::string name(tmpl.substr(i + 1, j - i - 1));
      auto it = slots.find(name);
      if (it == slots.end())
        throw RenderError("missing slot value for {" + name + "}");
      out.append(it->second);
      i = j + 1;
    } else {
      out.push_back(c);  // not a slot pattern, literal brace
      ++i;
    }
  }
  return out;
}

long estimate_tokens(std::string_view system, std::string_view user) {
  double chars = static_cast<double>(system.size() + user.size());
  return static_cast<long>(std::ceil(chars / 3.5));
}

TaskSpec default_task_spec(TaskId id) {
  TaskSpec spec;
  spec.task_id = id;
  switch (id) {
    case TaskId::kHealthcareQa:
      spec.grounding_mode = GroundingMode::kDerivable;
      spec.question_system_template = kQuestionSystemHealthcare;
      spec.answer_system_template = kAnswerSystemHealthcare;
      break;
    case TaskId::kCreativeWriting:
      spec.grounding_mode = GroundingMode::kBuildUpon;
      spec.question_system_template = kQuestionSystemCreative;
      spec.answer_system_template = kAnswerSystemCreative;
      break;
    case TaskId::kInstructionFollowing:
    case TaskId::kCustom:
      spec.grounding_mode = GroundingMode::kBuildUpon;
      spec.question_system_template = kQuestionSystemInstruction;
      spec.answer_system_template = kAnswerSystemInstruction;
      break;
  }
  spec.question_user_template = kQuestionUser;
  spec.answer_user_template = kAnswerUser;
  return spec;
}

SharedTemplates default_shared_templates() {
  SharedTemplates shared;
  shared.rubric_system = kRubricSystem;
  shared.rubric_user = kRubricUser;
  shared.grading_system = kGradingSystem;
  shared.grading_user = kGradingUser;
  shared.norubric_system = kNorubricSystem;
  shared.norubric_user = kNorubricUser;
  shared.pairwise_system = kPairwiseSystem;
  shared.pairwise_user = kPairwiseUser;
  return shared;
}

void export_template_assets(const std::string& dir) {
  const TaskId tasks[] = {TaskId::kHealthcareQa, TaskId::kCreativeWriting,
                          TaskId::kInstructionFollowing, TaskId::kCustom};
  SharedTemplates shared = default_shared_templates();
  for (TaskId id : tasks) {
    fs::path task_dir = fs::path(dir) / to_string(id);
    fs::create_directories(task_dir);
    TaskSpec spec = default_task_spec(id);
    write_file(task_dir / "question.system.txt", spec.question_system_template);
    write_file(task_dir / "question.user.txt", spec.question_user_template);
    write_file(task_dir / "answer.system.txt", spec.answer_system_template);
    write_file(task_dir / "answer.user.txt", spec.answer_user_template);
    write_file(task_dir / "rubric.system.txt", shared.rubric_system);
    write_file(task_dir / "rubric.user.txt", shared.rubric_user);
    write_file(task_dir / "grading.system.txt", shared.grading_system);
    write_file(task_dir / "grading.user.txt", shared.grading_user);
    write_file(task_dir / "norubric_grading.system.txt", shared.norubric_system);
    write_file(task_dir / "norubric_grading.user.txt", shared.norubric_user);
    write_file(task_dir / "pairwise_grading.system.txt", shared.pairwise_system);
    write_file(task_dir / "pairwise_grading.user.txt", shared.pairwise_user);
  }
}

TaskSpec load_task_spec(const std::string& dir, TaskId id) {
  TaskSpec spec = default_task_spec(id);
  fs::path task_dir = fs::path(dir) / to_string(id);
  spec.question_system_template =
      read_file_or(task_dir / "question.system.txt", spec.question_system_template);
  spec.question_user_template =
      read_file_or(task_dir / "question.user.txt", spec.question_user_template);
  spec.answer_system_template =
      read_file_or(task_dir / "answer.system.txt", spec.answer_system_template);
  spec.answer_user_template =
      read_file_or(task_dir / "answer.user.txt", spec.answer_user_template);
  return spec;
}

SharedTemplates load_shared_templates(const std::string& dir, TaskId id) {
  SharedTemplates shared = default_shared_templates();
  fs::path task_dir = fs::path(dir) / to_string(id);
  shared.rubric_system = read_file_or(task_dir / "rubric.system.txt", shared.rubric_system);
  shared.rubric_user = read_file_or(task_dir / "rubric.user.txt", shared.rubric_user);
  shared.grading_system =
      read_file_or(task_dir / "grading.system.txt", shared.grading_system);
  shared.grading_user = read_file_or(task_dir / "grading.user.txt", shared.grading_user);
  shared.norubric_system =
      read_file_or(task_dir / "norubric_grading.system.txt", shared.norubric_system);
  shared.norubric_user =
      read_file_or(task_dir / "norubric_grading.user.txt", shared.norubric_user);
  shared.pairwise_system =
      read_file_or(task_dir / "pairwise_grading.system.txt", shared.pairwise_system);
  shared.pairwise_user =
      read_file_or(task_dir / "pairwise_grading.user.txt", shared.pairwise_user);
  return shared;
}

std::string format_rubric(const Rubric& rubric) {
  std::ostringstream out;
  for (std::size_t k = 0; k < rubric.criteria.size(); ++k) {
    const Criterion& c = rubric.criteria[k];
    out << "Criterion " << (k + 1) << ": " << c.name << " (weight " << c.weight
        << ")\n";
    out << "Description: " << c.description << "\n";
    if (c.gold_label) out << "Gold label: " << *c.gold_label << "\n";
    if (k + 1 < rubric.criteria.size()) out << "\n";
  }
  return out.str();
}

PromptPair render_question_prompt(const TaskSpec& task,
                                  const std::optional<Document>& doc,
                                  const std::optional<TokenBudget>& budget) {
  std::map<std::string, std::string> slots{{"knowledge", knowledge_slot(doc)}};
  return finish(render_template(task.question_system_template, slots),
                render_template(task.question_user_template, slots), budget);
}

PromptPair render_answer_prompt(const TaskSpec& task, const std::string& question,
                                const std::optional<TokenBudget>& budget) {
  if (trim(question).empty())
    throw RenderError("cannot render answer prompt for an empty question");
  std::map<std::string, std::string> slots{{"question", question}};
  return finish(render_template(task.answer_system_template, slots),
                render_template(task.answer_user_template, slots), budget);
}

PromptPair render_rubric_prompt(const SharedTemplates& shared,
                                const std::optional<Document>& doc,
                                const std::string& question,
                                const std::string& ref_answer,
                                const std::vector<std::string>& exemplar_answers,
                                int max_criteria,
                                const std::optional<TokenBudget>& budget) {
  if (exemplar_answers.empty() || exemplar_answers.size() > 10)
    throw std::invalid_argument("rubric prompt takes 1..10 exemplar answers, got " +
                                std::to_string(exemplar_answers.size()));
  std::ostringstream exemplars;
  for (std::size_t j = 0; j < exemplar_answers.size(); ++j) {
    exemplars << "Candidate answer " << (j + 1) << ":\n" << exemplar_answers[j];
    if (j + 1 < exemplar_answers.size()) exemplars << "\n\n";
  }
  std::map<std::string, std::string> slots{
      {"knowledge", knowledge_slot(doc)},
      {"question", question},
      {"reference_answer", ref_answer},
      {"exemplar_answers", exemplars.str()},
      {"max_criteria", std::to_string(max_criteria)},
  };
  return finish(render_template(shared.rubric_system, slots),
                render_template(shared.rubric_user, slots), budget);
}

PromptPair render_grading_prompt(const SharedTemplates& shared,
                                 const std::string& question,
                                 const Rubric& rubric, const std::string& answer,
                                 const std::optional<TokenBudget>& budget) {
  std::map<std::string, std::string> slots{
      {"question", question},
      {"rubric", format_rubric(rubric)},
      {"answer", answer},
  };
  return finish(render_template(shared.grading_system, slots),
                render_template(shared.grading_user, slots), budget);
}

PromptPair render_norubric_grading_prompt(
    const SharedTemplates& shared, const std::optional<Document>& doc,
    const std::string& question, const std::string& answer,
    const std::optional<TokenBudget>& budget) {
  std::map<std::string, std::string> slots{
      {"knowledge", knowledge_slot(doc)},
      {"question", question},
      {"answer", answer},
  };
  return finish(render_template(shared.norubric_system, slots),
                render_template(shared.norubric_user, slots), budget);
}

PromptPair render_pairwise_grading_prompt(
    const SharedTemplates& shared, const std::string& question,
    const std::string& answer_a, const std::string& answer_b,
    const std::optional<TokenBudget>& budget) {
  std::map<std::string, std::string> slots{
      {"question", question},
      {"answer_a", answer_a},
      {"answer_b", answer_b},
  };
  return finish(render_template(shared.pairwise_system, slots),
                render_template(shared.pairwise_user, slots), budget);
}

}  // namespace pop
