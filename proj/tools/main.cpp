#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "lingo/errors.hpp"

using namespace lingo;
using namespace lingo::cli;

int main(int argc, char** argv) {
  CLI::App app{"lingo: an agent that learns to talk about a small grid world by chatting with a teacher"};
  app.fallthrough();
  app.require_subcommand(0, 1);

  GlobalOptions global;
  std::string config_path, checkpoint_path;
  std::uint64_t seed = 0;
  bool print_config = false;
  auto* config_opt = app.add_option("--config", config_path, "experiment config (JSON, comments allowed)");
  auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
  auto* checkpoint_opt =
      app.add_option("--checkpoint", checkpoint_path,
                     "model checkpoint; train resumes from it, other verbs load it");
  app.add_flag("--print-effective-config", print_config,
               "print the fully resolved config and exit");

  std::vector<std::string> agent_names, setting_names;
  for (AgentKind k : {AgentKind::kJoint, AgentKind::kImitationOnly, AgentKind::kReinforceOnly}) {
    agent_names.emplace_back(agent_kind_name(k));
  }
  for (Setting s : {Setting::kStandard, Setting::kCompositionalGeneralization, Setting::kKnowledgeTransfer}) {
    setting_names.emplace_back(setting_name(s));
  }

  TrainOptions train_options;
  std::size_t sessions = 0;
  std::string agent;
  auto* train = app.add_subcommand("train", "train an agent, writing metrics and checkpoints");
  auto* sessions_opt = train->add_option("--sessions", sessions, "total sessions to reach (default: config)");
  auto* agent_opt = train->add_option("--agent", agent, "which approach to train")->check(CLI::IsMember(agent_names));

  EvalCliOptions eval_options;
  std::string setting, configuration = "mixed";
  std::size_t n_sessions = 0;
  std::string report = eval_options.report.string();
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on fresh test sessions");
  auto* setting_opt = eval->add_option("--setting", setting, "activity setting (default: config)")
                          ->check(CLI::IsMember(setting_names));
  eval->add_option("--configuration", configuration, "mixed or held_out")
      ->check(CLI::IsMember({"mixed", "held_out"}));
  auto* n_opt = eval->add_option("-n,--sessions", n_sessions, "test sessions (default: config)");
  eval->add_option("--report", report, "where to write the JSON report");
  eval->add_flag("--oracle", eval_options.oracle, "evaluate the rule-based oracle instead of a checkpoint");

  ChatOptions chat_options;
  std::string transcript = chat_options.transcript.string();
  auto* chat = app.add_subcommand("chat", "play the teacher yourself");
  chat->add_option("--transcript", transcript, "where to save the dialogue on exit");

  InspectOptions inspect_options;
  std::string dialogue, inspect_out;
  auto* inspect = app.add_subcommand("inspect-attention", "dump attention maps for a scripted dialogue");
  inspect->add_option("dialogue", dialogue, "script of world/teacher/feedback lines")->required();
  auto* inspect_out_opt = inspect->add_option("--out", inspect_out, "JSONL output (default: stdout)");
  inspect->add_flag("--zero-init", inspect_options.zero_init, "zero every parameter first");

  PlotOptions plot_options;
  std::vector<std::string> metrics;
  std::string plot_out = plot_options.output.string();
  auto* plot = app.add_subcommand("plot", "draw smoothed reward curves from metrics logs as SVG");
  plot->add_option("metrics", metrics, "metrics logs, one curve each")->required();
  plot->add_option("--window", plot_options.window, "moving-average window in sessions");
  plot->add_option("--out", plot_out, "SVG output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  if (*config_opt) global.config = config_path;
  if (*seed_opt) global.seed = seed;
  if (*checkpoint_opt) global.checkpoint = checkpoint_path;

  try {
    if (print_config) {
      std::cout << to_json(resolve_config(global)).dump(2) << '\n';
      return kExitOk;
    }
    if (*train) {
      if (*sessions_opt) train_options.sessions = sessions;
      if (*agent_opt) train_options.agent = parse_agent_kind(agent);
      return cmd_train(global, train_options, std::cout);
    }
    if (*eval) {
      if (*setting_opt) eval_options.setting = parse_setting(setting);
      eval_options.configuration = *parse_configuration(configuration);
      if (*n_opt) eval_options.n_sessions = n_sessions;
      eval_options.report = report;
      return cmd_eval(global, eval_options, std::cout);
    }
    if (*chat) {
      chat_options.transcript = transcript;
      return cmd_chat(global, chat_options, std::cin, std::cout);
    }
    if (*inspect) {
      inspect_options.dialogue = dialogue;
      if (*inspect_out_opt) inspect_options.output = inspect_out;
      return cmd_inspect_attention(global, inspect_options, std::cout);
    }
    if (*plot) {
      plot_options.metrics.assign(metrics.begin(), metrics.end());
      plot_options.output = plot_out;
      return cmd_plot(plot_options, std::cout);
    }
    std::cerr << app.help();
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
