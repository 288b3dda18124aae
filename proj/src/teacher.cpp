#include "lingo/teacher.hpp"

#include <algorithm>
#include <cmath>

#include "lingo/errors.hpp"

namespace lingo {

std::string_view form_name(InteractionForm form) {
  switch (form) {
    case InteractionForm::kQuestionAnswer: return "question_answer";
    case InteractionForm::kStatementRepeat: return "statement_repeat";
    case InteractionForm::kLearnerStatement: return "learner_statement";
  }
  return "?";
}

std::optional<InteractionForm> parse_form(std::string_view name) {
  for (InteractionForm f : kInteractionForms) {
    if (form_name(f) == name) return f;
  }
  return std::nullopt;
}

std::string_view setting_name(Setting setting) {
  switch (setting) {
    case Setting::kStandard: return "standard";
    case Setting::kCompositionalGeneralization: return "compositional_generalization";
    case Setting::kKnowledgeTransfer: return "knowledge_transfer";
  }
  return "?";
}

std::optional<Setting> parse_setting(std::string_view name) {
  for (Setting s : {Setting::kStandard, Setting::kCompositionalGeneralization,
                    Setting::kKnowledgeTransfer}) {
    if (setting_name(s) == name) return s;
  }
  return std::nullopt;
}

ActivityConfig build_activity_config(Setting setting, std::size_t num_objects,
                                     double fraction_inactive, std::uint64_t seed) {
  if (!(fraction_inactive >= 0.0 && fraction_inactive < 1.0)) {
    throw ConfigError("fraction_inactive must lie in [0, 1), got " +
                      std::to_string(fraction_inactive));
  }
  ActivityConfig config;
  config.setting = setting;
  config.seed = seed;
  Rng rng(seed);
  if (setting == Setting::kCompositionalGeneralization) {
    const std::size_t total = num_objects * kDirections.size();
    const auto count = static_cast<std::size_t>(std::lround(fraction_inactive * static_cast<double>(total)));
    if (count >= total) {
      throw ConfigError("fraction_inactive leaves no active object-direction pair for question-answer");
    }
    for (std::size_t index : rng.sample_without_replacement(total, count)) {
      config.inactive_qa_pairs.insert(Focus{index / 4, kDirections[index % 4]});
    }
  } else if (setting == Setting::kKnowledgeTransfer) {
    const auto count = static_cast<std::size_t>(std::lround(fraction_inactive * static_cast<double>(num_objects)));
    if (count >= num_objects) {
      throw ConfigError("fraction_inactive leaves no active object for question-answer");
    }
    for (std::size_t index : rng.sample_without_replacement(num_objects, count)) {
      config.inactive_qa_objects.insert(index);
    }
  }
  return config;
}

Teacher::Teacher(Vocabulary vocab, std::vector<std::string> objects, ActivityConfig activity,
                 FocusPolicy policy)
    : vocab_(std::move(vocab)), objects_(std::move(objects)), activity_(std::move(activity)),
      policy_(policy) {
  for (const std::string& o : objects_) vocab_.id(o);
  for (const Focus& f : activity_.inactive_qa_pairs) {
    if (f.object >= objects_.size()) throw ConfigError("inactive pair references unknown object");
  }
  for (ObjectId o : activity_.inactive_qa_objects) {
    if (o >= objects_.size()) throw ConfigError("inactive object id out of range");
  }
}

std::vector<Focus> Teacher::eligible_foci(const WorldState& world, InteractionForm form) const {
  std::vector<Focus> foci;
  for (Direction d : kDirections) {
    const Focus focus{world.at(d), d};
    bool ok = true;
    if (form != InteractionForm::kLearnerStatement) {
      const bool inactive = activity_.is_inactive(focus);
      if (policy_ == FocusPolicy::kHeldOut) {
        ok = inactive;
      } else if (policy_ == FocusPolicy::kTraining && form == InteractionForm::kQuestionAnswer) {
        ok = !inactive;
      }
    }
    if (ok) foci.push_back(focus);
  }
  return foci;
}

Utterance Teacher::words(const std::vector<std::string>& ws) const {
  std::vector<TokenId> ids;
  ids.reserve(ws.size() + 1);
  for (const std::string& w : ws) ids.push_back(vocab_.id(w));
  return Utterance::from_ids(vocab_, std::move(ids));
}

Utterance Teacher::question(QuestionTemplate tmpl, const Focus& focus) const {
  const std::string dir(direction_name(focus.direction));
  if (tmpl == QuestionTemplate::kWhat) return words({"what", "is", "on", "the", dir});
  return words({"where", "is", objects_.at(focus.object)});
}

Utterance Teacher::statement(StatementTemplate tmpl, const Focus& focus) const {
  const std::string dir(direction_name(focus.direction));
  const std::string& obj = objects_.at(focus.object);
  if (tmpl == StatementTemplate::kObjectFirst) return words({obj, "is", "on", "the", dir});
  return words({"on", "the", dir, "is", obj});
}

TeacherTurn Teacher::generate(const WorldState& world, InteractionForm form, Rng& rng) const {
  const auto foci = eligible_foci(world, form);
  if (foci.empty()) {
    throw ConfigError(std::string("no eligible focus for ") + std::string(form_name(form)));
  }
  TeacherTurn turn;
  turn.form = form;
  turn.focus = foci[rng.uniform_index(foci.size())];
  switch (form) {
    case InteractionForm::kQuestionAnswer:
      turn.utterance = question(static_cast<QuestionTemplate>(rng.uniform_index(2)), turn.focus);
      break;
    case InteractionForm::kStatementRepeat:
      turn.utterance = statement(static_cast<StatementTemplate>(rng.uniform_index(2)), turn.focus);
      break;
    case InteractionForm::kLearnerStatement:
      turn.utterance = words({std::string(kSilenceToken)});
      break;
  }
  return turn;
}

TeacherTurn Teacher::generate(const WorldState& world, Rng& rng) const {
  std::vector<InteractionForm> feasible;
  for (InteractionForm f : kInteractionForms) {
    if (!eligible_foci(world, f).empty()) feasible.push_back(f);
  }
  if (feasible.empty()) throw ConfigError("no interaction form is feasible for this world");
  // Drawing uniformly among feasible forms is the same law as redrawing an
  // infeasible form until a feasible one comes up.
  return generate(world, feasible[rng.uniform_index(feasible.size())], rng);
}

std::vector<Utterance> Teacher::expected_answer_set(const WorldState& world,
                                                    const Focus& focus) const {
  if (world.at(focus.direction) != focus.object) {
    throw ContractError("expected_answer_set: focus " + objects_.at(focus.object) + "@" +
                        std::string(direction_name(focus.direction)) + " is not in the world");
  }
  return {statement(StatementTemplate::kObjectFirst, focus),
          statement(StatementTemplate::kDirectionFirst, focus)};
}

double Teacher::judge_response(const Utterance& response, const std::vector<Utterance>& expected) {
  for (const Utterance& e : expected) {
    if (e.tokens == response.tokens) return 1.0;
  }
  return -1.0;
}

Utterance Teacher::compose_feedback(const std::vector<Utterance>& expected, double reward,
                                    std::size_t form_index, bool with_prefix) const {
  if (expected.empty()) throw ContractError("compose_feedback: empty expected set");
  const Utterance& base = expected.at(form_index);
  if (!with_prefix) return base;
  std::vector<TokenId> ids;
  ids.push_back(vocab_.id(reward > 0 ? "yes" : "no"));
  ids.insert(ids.end(), base.tokens.begin(), base.tokens.end());
  return Utterance::from_ids(vocab_, std::move(ids));
}

Utterance Teacher::compose_feedback(const std::vector<Utterance>& expected, double reward,
                                    Rng& rng) const {
  if (expected.empty()) throw ContractError("compose_feedback: empty expected set");
  const std::size_t form_index = rng.uniform_index(expected.size());
  const bool with_prefix = rng.bernoulli(0.5);
  return compose_feedback(expected, reward, form_index, with_prefix);
}

std::optional<Focus> Teacher::matched_statement(const WorldState& world,
                                                const Utterance& response) const {
  for (Direction d : kDirections) {
    const Focus focus{world.at(d), d};
    if (judge_response(response, expected_answer_set(world, focus)) > 0) return focus;
  }
  return std::nullopt;
}

Feedback Teacher::respond(const WorldState& world, const TeacherTurn& turn,
                          const Utterance& response, Rng& rng) const {
  Focus focus = turn.focus;
  double reward;
  if (turn.form == InteractionForm::kLearnerStatement) {
    const auto matched = matched_statement(world, response);
    reward = matched ? 1.0 : -1.0;
    if (matched) focus = *matched;
  } else {
    reward = judge_response(response, expected_answer_set(world, focus));
  }
  const auto expected = expected_answer_set(world, focus);
  return Feedback{compose_feedback(expected, reward, rng), reward};
}

}  // namespace lingo
