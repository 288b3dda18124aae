#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lingo/session.hpp"
#include "lingo/training.hpp"

namespace lingo {

enum class Configuration { kMixed, kHeldOut };

std::string_view configuration_name(Configuration c);
std::optional<Configuration> parse_configuration(std::string_view name);

struct FormTally {
  std::size_t correct = 0;
  std::size_t judged = 0;
  double accuracy() const { return judged == 0 ? 0.0 : static_cast<double>(correct) / judged; }
};

struct EvalReport {
  Setting setting = Setting::kStandard;
  Configuration configuration = Configuration::kMixed;
  std::size_t n_sessions = 0;
  std::size_t correct = 0;
  std::size_t judged = 0;
  double accuracy = 0.0;
  std::map<InteractionForm, FormTally> per_form;
  double mean_reward = 0.0;

  double form_accuracy(InteractionForm form) const;
};

nlohmann::json to_json(const EvalReport& report);

// Builds a fresh agent; called once per worker thread.
using AgentFactory = std::function<std::unique_ptr<Agent>()>;

struct EvalOptions {
  Configuration configuration = Configuration::kMixed;
  std::size_t n_sessions = 1000;
  std::uint64_t seed = 0;
  std::size_t session_steps = 3;
  std::size_t threads = 1;
};

// Plays n_sessions test sessions and judges every response. Each session's
// randomness depends only on (seed, session index), so the report does not
// depend on the thread count. held_out requires a nonempty inactive set.
EvalReport evaluate(const AgentFactory& make_agent, const std::vector<std::string>& objects,
                    const ActivityConfig& activity, const EvalOptions& options);

// The world each test session runs in; held_out worlds contain at least one
// inactive focus.
WorldState test_world(const Teacher& teacher, std::size_t session_index, std::uint64_t seed);

// Deterministic decoding of a trained learner: mean control, fixed beam.
AgentFactory learner_agent_factory(const Learner& learner, std::size_t beam_width,
                                   std::size_t max_len, bool bypass_controller);

// A trainer wired for one of the three compared approaches.
std::unique_ptr<Trainer> make_baseline_agent(AgentKind kind, ExperimentConfig config);

// Answers every turn with a member of the expected answer set.
class OracleAgent : public Agent {
 public:
  OracleAgent(Vocabulary vocab, std::vector<std::string> objects);
  const Vocabulary& vocabulary() const override { return teacher_.vocabulary(); }
  void begin_session(const WorldState& world, const Scene& scene) override;
  Utterance respond(const Utterance& teacher_utterance, Mode mode, Rng& rng) override;
  void observe_feedback(const Feedback&) override {}

 private:
  Teacher teacher_;
  WorldState world_;
};

// Always says ".".
class SilentAgent : public Agent {
 public:
  explicit SilentAgent(Vocabulary vocab) : vocab_(std::move(vocab)) {}
  const Vocabulary& vocabulary() const override { return vocab_; }
  void begin_session(const WorldState&, const Scene&) override {}
  Utterance respond(const Utterance&, Mode, Rng&) override;
  void observe_feedback(const Feedback&) override {}

 private:
  Vocabulary vocab_;
};

// Trailing moving average of mean_reward over `window` consecutive records
// of a metrics log; one point per record once the window is full.
std::vector<std::pair<std::size_t, double>> reward_curve(const std::filesystem::path& metrics_log,
                                                         std::size_t window);

}  // namespace lingo
