#pragma once

// Joint imitation + reinforcement training with a value baseline, a target
// value network, experience replay and Adagrad.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "lingo/config.hpp"
#include "lingo/learner.hpp"
#include "lingo/session.hpp"
#include "lingo/teacher.hpp"

namespace lingo {

// What is needed to recompute one learner decision under current parameters.
struct Transition {
  WorldState world;
  Utterance question;          // teacher turn at this step
  Utterance feedback;          // teacher feedback sentence that followed
  std::vector<double> h_prev;  // h_last before the turn was encoded
  std::vector<double> k;       // control vector the response was decoded from
  double reward = 0.0;
  std::size_t step_index = 0;
  bool terminal = false;
  // Next decision point; unused when terminal.
  Utterance next_question;
  std::vector<double> next_h_prev;

  bool operator==(const Transition&) const = default;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  // Evicts the oldest items once full.
  void push(std::span<const Transition> fresh);
  // Uniform sample of min(n, size) distinct items.
  std::vector<Transition> sample(std::size_t n, Rng& rng) const;

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<Transition>& items() const { return items_; }

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

std::vector<Transition> replay_push_sample(ReplayBuffer& buffer,
                                           std::span<const Transition> fresh, std::size_t n,
                                           Rng& rng);

struct LossBreakdown {
  double imitation = 0.0;
  double reinforce = 0.0;
  double value = 0.0;
  bool updated = false;  // false when too few transitions were available
  bool operator==(const LossBreakdown&) const = default;
};

struct ImitationItem {
  Utterance sentence;
  Tensor h_prev;
  Scene scene;
};

// Mean negative teacher-forced log-probability.
Tensor imitation_loss(const Learner& learner, std::span<const ImitationItem> batch);

// r + gamma * v_next - v_cur, with the bootstrap dropped at terminal steps.
double td_error(double reward, bool terminal, double gamma, double v_target_next, double v_cur);

// Forward values of one transition under current parameters.
struct TransitionEval {
  Tensor h_cur;        // state the response was produced from
  Tensor v_cur;        // live value at h_cur
  double v_target_next = 0.0;
  ControlSample control;
  Scene scene;
};

TransitionEval evaluate_transition(const Learner& learner, const ValueNet& value,
                                   const ValueNet& target, const Transition& t);

// Mean of -log p(k | c) * stop(delta).
Tensor reinforce_loss(const Learner& learner, const ValueNet& value, const ValueNet& target,
                      std::span<const Transition> batch, double gamma);

// Mean of (r + lambda * V_target(next) - V(cur))^2.
Tensor value_loss(const Learner& learner, const ValueNet& value, const ValueNet& target,
                  std::span<const Transition> batch, double lambda);

// Copies value into target when step is a multiple of period; returns
// whether a copy happened.
bool sync_target(const ValueNet& value, ValueNet& target, std::size_t step, std::size_t period);

struct StepRecord {
  std::size_t step = 0;  // sessions played so far, including this one
  LossBreakdown losses;
  double mean_reward = 0.0;
};

nlohmann::json to_json(const StepRecord& record);

// Loss weights and decoding mode implied by a baseline kind.
struct BaselineWiring {
  LossWeights weights;
  bool bypass_controller = false;
  bool explore = true;
};
BaselineWiring baseline_wiring(AgentKind kind, const LossWeights& configured);

class Trainer {
 public:
  explicit Trainer(const ExperimentConfig& config);

  // Plays one training session, stores its transitions and, once enough
  // transitions exist, takes one Adagrad step on a replayed batch.
  StepRecord train_step();
  // Runs until max_train_sessions sessions have been played, appending one
  // record per session to metrics (when given) and checkpointing every
  // checkpoint_every sessions into checkpoint_dir (when nonempty).
  void train(std::ostream* metrics, std::size_t max_sessions);

  const ExperimentConfig& config() const { return config_; }
  const Learner& learner() const { return learner_; }
  Learner& mutable_learner() { return learner_; }
  const ValueNet& value() const { return value_; }
  const ValueNet& target() const { return target_; }
  const Teacher& teacher() const { return teacher_; }
  const ActivityConfig& activity() const { return activity_; }
  const ReplayBuffer& replay() const { return replay_; }
  const BaselineWiring& wiring() const { return wiring_; }

  std::size_t sessions() const { return sessions_; }
  std::size_t updates() const { return updates_; }
  std::size_t sync_count() const { return sync_count_; }
  const Rng& rng() const { return rng_; }

  // Every trainable tensor with a stable name, learner first.
  std::vector<NamedTensor> named_parameters() const;
  std::vector<NamedTensor> named_accumulators() const;
  std::vector<NamedTensor> named_target() const;

  void save(const std::filesystem::path& path) const;
  // Restores a checkpoint written by a trainer with the same config shape.
  void load(const std::filesystem::path& path);

 private:
  std::vector<Transition> play_session(double& mean_reward);
  // Imitation and value terms use the replayed batch; the policy-gradient
  // term uses fresh (the session just played) unless replay_reinforce is set.
  LossBreakdown update(std::span<const Transition> batch, std::span<const Transition> fresh);

  ExperimentConfig config_;
  BaselineWiring wiring_;
  ActivityConfig activity_;
  Teacher teacher_;
  Learner learner_;
  ValueNet value_;
  ValueNet target_;
  ad::Adagrad optimizer_;  // language model and value network
  ad::Adagrad controller_optimizer_;
  ReplayBuffer replay_;
  Rng rng_;
  std::size_t sessions_ = 0;
  std::size_t updates_ = 0;
  std::size_t sync_count_ = 0;
};

}  // namespace lingo
