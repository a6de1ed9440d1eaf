#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pop/corpus.hpp"
#include "pop/rubric.hpp"

namespace pop {

enum class TaskId {
  kHealthcareQa,
  kCreativeWriting,
  kInstructionFollowing,
  kCustom,
};

std::string to_string(TaskId id);
std::optional<TaskId> task_id_from_string(std::string_view name);

/// derivable: the task has ground-truth answers and questions must be
/// answerable from the grounding text alone. build_upon: open-ended tasks
/// whose questions only need to build on the text.
enum class GroundingMode { kDerivable, kBuildUpon };

struct TaskSpec {
  TaskId task_id = TaskId::kCustom;
  GroundingMode grounding_mode = GroundingMode::kBuildUpon;
  std::string question_system_template;
  std::string question_user_template;
  std::string answer_system_template;
  std::string answer_user_template;
};

/// Stage templates that do not vary by task.
struct SharedTemplates {
  std::string rubric_system;
  std::string rubric_user;
  std::string grading_system;
  std::string grading_user;
  std::string norubric_system;
  std::string norubric_user;
  std::string pairwise_system;
  std::string pairwise_user;
};

struct PromptPair {
  std::string system;
  std::string user;
  long est_tokens = 0;
};

class RenderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ContextOverflowError : public RenderError {
 public:
  using RenderError::RenderError;
};

/// Context budget for the stage the prompt targets; when provided, a prompt
/// estimated over max_context - max_new_tokens raises ContextOverflowError.
struct TokenBudget {
  int max_context = 32768;
  int max_new_tokens = 0;
};

/// Substitutes {name} slots. A slot present in the template but absent from
/// `slots` is a missing-slot error; braces that do not form a slot pattern
/// pass through verbatim.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& slots);

/// Conservative token estimate: ceil(chars / 3.5).
long estimate_tokens(std::string_view system, std::string_view user);

TaskSpec default_task_spec(TaskId id);
SharedTemplates default_shared_templates();

/// Default templates as editable assets: <dir>/<task>/<stage>.{system,user}.txt.
void export_template_assets(const std::string& dir);

/// Loads a task's templates from an asset directory laid out as
/// <dir>/<task>/<stage>.{system,user}.txt, falling back to the built-in
/// defaults for any missing file.
TaskSpec load_task_spec(const std::string& dir, TaskId id);
SharedTemplates load_shared_templates(const std::string& dir, TaskId id);

// ---------------------------------------------------------------------------
// Stage renderers. All are pure: identical inputs yield identical prompts.

/// Question synthesis: embeds the document (or the literal "None" when the
/// question stage runs ungrounded) and asks for a question plus reference
/// answer in <question>/<reference_answer> blocks.
PromptPair render_question_prompt(const TaskSpec& task,
                                  const std::optional<Document>& doc,
                                  const std::optional<TokenBudget>& budget = {});

/// Question answering: embeds only the question, never the document.
PromptPair render_answer_prompt(const TaskSpec& task, const std::string& question,
                                const std::optional<TokenBudget>& budget = {});

/// Rubric generation over doc (or "None"), question, reference answer and
/// 1..10 exemplar answers; asks for at most max_criteria weighted criteria.
PromptPair render_rubric_prompt(const SharedTemplates& shared,
                                const std::optional<Document>& doc,
                                const std::string& question,
                                const std::string& ref_answer,
                                const std::vector<std::string>& exemplar_answers,
                                int max_criteria,
                                const std::optional<TokenBudget>& budget = {});

/// Rubric-based grading of one answer: per-criterion thoughts then a rating
/// in {0,1,2}.
PromptPair render_grading_prompt(const SharedTemplates& shared,
                                 const std::string& question,
                                 const Rubric& rubric, const std::string& answer,
                                 const std::optional<TokenBudget>& budget = {});

/// Rubric-free grading: one holistic 0-10 rating, document access retained.
PromptPair render_norubric_grading_prompt(
    const SharedTemplates& shared, const std::optional<Document>& doc,
    const std::string& question, const std::string& answer,
    const std::optional<TokenBudget>& budget = {});

/// Pairwise grading: scores both answers 0-10, order as given.
PromptPair render_pairwise_grading_prompt(
    const SharedTemplates& shared, const std::string& question,
    const std::string& answer_a, const std::string& answer_b,
    const std::optional<TokenBudget>& budget = {});

}  // namespace pop
