#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lingo/config.hpp"
#include "lingo/evaluation.hpp"

namespace lingo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct GlobalOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> checkpoint;
};

// Defaults, then the config file (or the config stored in the checkpoint
// when no file is given), then LINGO_* variables, then --seed.
ExperimentConfig resolve_config(const GlobalOptions& global);

struct TrainOptions {
  std::optional<std::size_t> sessions;
  std::optional<AgentKind> agent;
};
int cmd_train(const GlobalOptions& global, const TrainOptions& options, std::ostream& out);

struct EvalCliOptions {
  std::optional<Setting> setting;
  Configuration configuration = Configuration::kMixed;
  std::optional<std::size_t> n_sessions;
  std::filesystem::path report = "eval_report.json";
  bool oracle = false;
};
int cmd_eval(const GlobalOptions& global, const EvalCliOptions& options, std::ostream& out);

struct ChatOptions {
  std::filesystem::path transcript = "chat_transcript.jsonl";
};
int cmd_chat(const GlobalOptions& global, const ChatOptions& options, std::istream& in,
             std::ostream& out);

struct InspectOptions {
  std::filesystem::path dialogue;
  std::optional<std::filesystem::path> output;  // stdout when absent
  bool zero_init = false;
};
int cmd_inspect_attention(const GlobalOptions& global, const InspectOptions& options,
                          std::ostream& out);

struct PlotOptions {
  std::vector<std::filesystem::path> metrics;
  std::size_t window = 500;
  std::filesystem::path output = "reward.svg";
};
int cmd_plot(const PlotOptions& options, std::ostream& out);

// Bad flags or flag combinations; maps to the usage exit code.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScriptLine {
  std::size_t line = 0;
  bool feedback = false;  // heard by the learner without a reply
  Utterance utterance;
};

// One scripted dialogue: a world followed by the lines spoken in it.
struct ScriptedSession {
  std::size_t line = 0;
  WorldState world;
  std::vector<ScriptLine> lines;
};

// "world north=A south=B east=C west=D" starts a session, "teacher <words>"
// asks for a learner reply and "feedback <words>" is only listened to.
// Blank lines and lines starting with '#' are skipped. Throws ParseError
// carrying the offending line number.
std::vector<ScriptedSession> parse_dialogue_script(std::istream& in, const Vocabulary& vocab,
                                                   const std::vector<std::string>& objects);

WorldState parse_world_spec(const std::vector<std::string>& fields,
                            const std::vector<std::string>& objects);

std::string render_svg(const std::vector<std::pair<std::string, std::vector<std::pair<std::size_t, double>>>>& curves,
                       std::size_t window);

}  // namespace lingo::cli
