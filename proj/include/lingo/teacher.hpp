#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lingo/rng.hpp"
#include "lingo/vocabulary.hpp"
#include "lingo/world.hpp"

namespace lingo {

enum class InteractionForm { kQuestionAnswer = 0, kStatementRepeat = 1, kLearnerStatement = 2 };

inline constexpr InteractionForm kInteractionForms[] = {InteractionForm::kQuestionAnswer,
                                                        InteractionForm::kStatementRepeat,
                                                        InteractionForm::kLearnerStatement};

std::string_view form_name(InteractionForm form);
std::optional<InteractionForm> parse_form(std::string_view name);

struct Focus {
  ObjectId object = 0;
  Direction direction = Direction::kNorth;
  auto operator<=>(const Focus&) const = default;
};

enum class Setting { kStandard, kCompositionalGeneralization, kKnowledgeTransfer };

std::string_view setting_name(Setting setting);
std::optional<Setting> parse_setting(std::string_view name);

// Which (object, direction) pairs or whole objects are kept out of
// question-answer interactions during training.
struct ActivityConfig {
  Setting setting = Setting::kStandard;
  std::uint64_t seed = 0;
  std::set<Focus> inactive_qa_pairs;
  std::set<ObjectId> inactive_qa_objects;

  bool is_inactive(const Focus& focus) const {
    return inactive_qa_pairs.contains(focus) || inactive_qa_objects.contains(focus.object);
  }
  bool has_inactive() const { return !inactive_qa_pairs.empty() || !inactive_qa_objects.empty(); }
  bool operator==(const ActivityConfig&) const = default;
};

// compositional_generalization marks round(fraction * objects * 4) pairs,
// knowledge_transfer marks round(fraction * objects) objects.
ActivityConfig build_activity_config(Setting setting, std::size_t num_objects,
                                     double fraction_inactive, std::uint64_t seed);

// How a teacher picks the focus of focus-bearing interactions.
enum class FocusPolicy {
  kTraining,  // question-answer never targets inactive foci
  kMixed,     // any focus present in the world
  kHeldOut,   // only inactive foci
};

enum class StatementTemplate { kObjectFirst = 0, kDirectionFirst = 1 };  // "X is on the D" / "on the D is X"
enum class QuestionTemplate { kWhat = 0, kWhere = 1 };                    // "what is on the D" / "where is X"

struct TeacherTurn {
  Utterance utterance;
  InteractionForm form = InteractionForm::kLearnerStatement;
  Focus focus;
};

struct Feedback {
  Utterance sentence;
  double reward = -1.0;
};

class Teacher {
 public:
  Teacher(Vocabulary vocab, std::vector<std::string> objects, ActivityConfig activity = {},
          FocusPolicy policy = FocusPolicy::kTraining);

  const Vocabulary& vocabulary() const { return vocab_; }
  const std::vector<std::string>& objects() const { return objects_; }
  const ActivityConfig& activity() const { return activity_; }
  FocusPolicy policy() const { return policy_; }

  TeacherTurn generate(const WorldState& world, Rng& rng) const;
  TeacherTurn generate(const WorldState& world, InteractionForm form, Rng& rng) const;

  // Foci of the world the given form may target under the focus policy.
  std::vector<Focus> eligible_foci(const WorldState& world, InteractionForm form) const;

  Utterance question(QuestionTemplate tmpl, const Focus& focus) const;
  Utterance statement(StatementTemplate tmpl, const Focus& focus) const;

  // {"X is on the D", "on the D is X"}; throws ContractError when the focus
  // is not placed in the world.
  std::vector<Utterance> expected_answer_set(const WorldState& world, const Focus& focus) const;

  // +1 iff the response equals some member token-for-token, else -1.
  static double judge_response(const Utterance& response, const std::vector<Utterance>& expected);

  Utterance compose_feedback(const std::vector<Utterance>& expected, double reward, Rng& rng) const;
  Utterance compose_feedback(const std::vector<Utterance>& expected, double reward,
                             std::size_t form_index, bool with_prefix) const;

  // Judges a learner response to a turn. For learner statements any present
  // object stated correctly earns +1 and the feedback restates that object.
  Feedback respond(const WorldState& world, const TeacherTurn& turn, const Utterance& response,
                   Rng& rng) const;

  // Focus a learner statement correctly describes, if any.
  std::optional<Focus> matched_statement(const WorldState& world, const Utterance& response) const;

 private:
  Utterance words(const std::vector<std::string>& ws) const;

  Vocabulary vocab_;
  std::vector<std::string> objects_;
  ActivityConfig activity_;
  FocusPolicy policy_;
};

}  // namespace lingo
