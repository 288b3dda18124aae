#include "lingo/session.hpp"

#include "json.hpp"
#include <ostream>

#include "lingo/errors.hpp"

namespace lingo {

double Session::mean_reward() const {
  if (transcript.empty()) return 0.0;
  double total = 0.0;
  for (const Interaction& i : transcript) total += i.feedback.reward;
  return total / static_cast<double>(transcript.size());
}

Session run_session(const WorldState& world, const Teacher& teacher, Agent& agent, Mode mode,
                    std::size_t max_steps, Rng& rng, std::span<const InteractionForm> forced_forms) {
  if (!(agent.vocabulary() == teacher.vocabulary())) {
    throw ContractError("run_session: agent and teacher vocabularies differ");
  }
  if (!forced_forms.empty() && forced_forms.size() < max_steps) {
    throw ContractError("run_session: fewer forced forms than steps");
  }
  Session session;
  session.world = world;
  session.max_steps = max_steps;
  const Scene scene = render_scene(world, teacher.objects().size());
  agent.begin_session(world, scene);
  for (std::size_t t = 0; t < max_steps; ++t) {
    Interaction step;
    step.turn = forced_forms.empty() ? teacher.generate(world, rng)
                                     : teacher.generate(world, forced_forms[t], rng);
    step.response = agent.respond(step.turn.utterance, mode, rng);
    step.feedback = teacher.respond(world, step.turn, step.response, rng);
    agent.observe_feedback(step.feedback);
    session.transcript.push_back(std::move(step));
    session.step_index = t + 1;
  }
  return session;
}

void write_transcript(std::ostream& out, const Session& session) {
  for (std::size_t t = 0; t < session.transcript.size(); ++t) {
    const Interaction& i = session.transcript[t];
    nlohmann::json record = {{"step", t},
                             {"teacher", i.turn.utterance.surface},
                             {"learner", i.response.surface},
                             {"feedback", i.feedback.sentence.surface},
                             {"reward", i.feedback.reward},
                             {"form", form_name(i.turn.form)}};
    out << record.dump() << '\n';
  }
}

LearnerAgent::LearnerAgent(const Learner& learner, Options options)
    : learner_(learner), options_(options), state_(learner.initial_state()) {}

void LearnerAgent::begin_session(const WorldState&, const Scene& scene) {
  scene_ = scene;
  state_ = learner_.initial_state();
  responses_.clear();
}

Utterance LearnerAgent::respond(const Utterance& teacher_utterance, Mode mode, Rng& rng) {
  ad::NoGradScope no_grad;
  state_ = learner_.encode(teacher_utterance, state_, scene_);
  Response r = learner_.respond(state_, scene_, mode == Mode::kTrain, rng, options_.beam_width,
                                options_.max_len, options_.bypass_controller);
  Utterance out = r.decoded.utterance;
  responses_.push_back(std::move(r));
  return out;
}

void LearnerAgent::observe_feedback(const Feedback& feedback) {
  ad::NoGradScope no_grad;
  state_ = learner_.encode(feedback.sentence, state_, scene_);
}

}  // namespace lingo
