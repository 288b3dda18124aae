#pragma once

// Experiment configuration: everything a run needs, in one JSON document.
// Unknown keys and out-of-range values are rejected with the offending field
// named, and every key can be overridden from the environment as
// LINGO_<SECTION>__<KEY> (or LINGO_<KEY> for top-level keys).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lingo/learner.hpp"
#include "lingo/teacher.hpp"

namespace lingo {

enum class AgentKind { kJoint, kImitationOnly, kReinforceOnly };

std::string_view agent_kind_name(AgentKind kind);
std::optional<AgentKind> parse_agent_kind(std::string_view name);

struct LossWeights {
  double imitation = 1.0;
  double reinforce = 1.0;
  double value = 1.0;
  bool operator==(const LossWeights&) const = default;
};

struct TrainConfig {
  double lr = 0.05;
  double controller_lr = 0.005;  // residual transform and std network
  double adagrad_eps = 1e-8;
  std::size_t batch_size = 16;
  double gamma = 0.99;
  double lambda = 0.99;
  std::size_t target_sync_period = 2000;
  std::size_t replay_capacity = 10000;
  // Policy-gradient term on replayed transitions instead of the latest
  // session. Replayed control samples go stale as h and the controller move.
  bool replay_reinforce = false;
  std::size_t max_train_sessions = 6000;
  AgentKind agent = AgentKind::kJoint;
  LossWeights weights;
  ValueInput value_input = ValueInput::kStateAndScene;
  std::size_t value_width = 64;
  std::size_t checkpoint_every = 1000;  // sessions; 0 disables periodic checkpoints
  bool operator==(const TrainConfig&) const = default;
};

struct ActivitySpec {
  Setting setting = Setting::kStandard;
  double fraction_inactive = 0.25;
  std::uint64_t seed = 0;
  // When present these replace the sampled inactive sets.
  std::optional<std::vector<std::pair<std::string, std::string>>> inactive_pairs;
  std::optional<std::vector<std::string>> inactive_objects;
  bool operator==(const ActivitySpec&) const = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::vector<std::string> objects = {kDefaultObjects.begin(), kDefaultObjects.end()};
  ModelDims model;
  TrainConfig train;
  ActivitySpec activity;
  std::size_t session_steps = 3;
  std::size_t beam_width = 3;
  std::size_t max_len = 8;
  std::size_t eval_sessions = 1000;
  std::size_t eval_threads = 1;
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::filesystem::path metrics_log = "metrics.jsonl";
  bool operator==(const ExperimentConfig&) const = default;

  Vocabulary vocabulary() const { return Vocabulary::for_objects(objects); }
  // Model dims with num_objects tied to the lexicon.
  ModelDims dims() const;
  // Sampled or explicit inactive sets, resolved against the lexicon.
  ActivityConfig activity_config() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
// Throws ConfigError naming the first offending field.
ExperimentConfig config_from_json(const nlohmann::json& doc);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

// Applies LINGO_* variables from envp-style "KEY=VALUE" strings on top of doc.
void apply_env_overrides(nlohmann::json& doc, const std::vector<std::string>& environment);
std::vector<std::string> process_environment();

// Range and consistency checks; throws ConfigError.
void validate(const ExperimentConfig& config);

nlohmann::json activity_to_json(const ActivityConfig& activity,
                                const std::vector<std::string>& objects);
ActivityConfig activity_from_json(const nlohmann::json& doc,
                                  const std::vector<std::string>& objects);

}  // namespace lingo
