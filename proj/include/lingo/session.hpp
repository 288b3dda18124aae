#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "lingo/learner.hpp"
#include "lingo/teacher.hpp"
#include "lingo/world.hpp"

namespace lingo {

enum class Mode { kTrain, kEval };

// Anything that can hold up its side of a teacher dialogue.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual const Vocabulary& vocabulary() const = 0;
  // Called once per session; dialogue state starts from zero.
  virtual void begin_session(const WorldState& world, const Scene& scene) = 0;
  virtual Utterance respond(const Utterance& teacher_utterance, Mode mode, Rng& rng) = 0;
  virtual void observe_feedback(const Feedback& feedback) = 0;
};

struct Interaction {
  TeacherTurn turn;
  Utterance response;
  Feedback feedback;
};

struct Session {
  WorldState world;
  std::size_t step_index = 0;
  std::size_t max_steps = 3;
  std::vector<Interaction> transcript;

  double mean_reward() const;
};

// Plays max_steps interactions in one world. forced_forms, when nonempty,
// fixes the interaction form of each step in order.
Session run_session(const WorldState& world, const Teacher& teacher, Agent& agent, Mode mode,
                    std::size_t max_steps, Rng& rng,
                    std::span<const InteractionForm> forced_forms = {});

// One JSON record per interaction: step, teacher, learner, feedback, reward, form.
void write_transcript(std::ostream& out, const Session& session);

// Learner-backed agent; keeps h_last across the steps of a session.
class LearnerAgent : public Agent {
 public:
  struct Options {
    std::size_t beam_width = 3;
    std::size_t max_len = 8;
    bool bypass_controller = false;
  };

  LearnerAgent(const Learner& learner, Options options);

  const Vocabulary& vocabulary() const override { return learner_.vocabulary(); }
  void begin_session(const WorldState& world, const Scene& scene) override;
  Utterance respond(const Utterance& teacher_utterance, Mode mode, Rng& rng) override;
  void observe_feedback(const Feedback& feedback) override;

  const AgentState& state() const { return state_; }
  // Control samples and decode details of the current session, one per response.
  const std::vector<Response>& responses() const { return responses_; }

 private:
  const Learner& learner_;
  Options options_;
  Scene scene_;
  AgentState state_;
  std::vector<Response> responses_;
};

}  // namespace lingo
