#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "lingo/checkpoint.hpp"
#include "lingo/errors.hpp"
#include "lingo/session.hpp"
#include "lingo/training.hpp"

namespace lingo::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::unique_ptr<Trainer> restore(const ExperimentConfig& config, const fs::path& checkpoint) {
  auto trainer = std::make_unique<Trainer>(config);
  trainer->load(checkpoint);
  return trainer;
}

std::unique_ptr<Trainer> require_checkpoint(const GlobalOptions& global,
                                            const ExperimentConfig& config, const char* verb) {
  if (!global.checkpoint) throw UsageError(std::string(verb) + " needs --checkpoint");
  return restore(config, *global.checkpoint);
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

}  // namespace

ExperimentConfig resolve_config(const GlobalOptions& global) {
  json doc = json::object();
  if (global.config) {
    doc = read_json_file(*global.config);
  } else if (global.checkpoint && fs::exists(*global.checkpoint)) {
    doc = read_checkpoint(*global.checkpoint).meta.at("config");
  }
  apply_env_overrides(doc, process_environment());
  ExperimentConfig config = config_from_json(doc);
  if (global.seed) config.seed = *global.seed;
  return config;
}

// ---------------------------------------------------------------- train

int cmd_train(const GlobalOptions& global, const TrainOptions& options, std::ostream& out) {
  ExperimentConfig config = resolve_config(global);
  if (options.agent) config.train.agent = *options.agent;
  const std::size_t total = options.sessions.value_or(config.train.max_train_sessions);

  Trainer trainer(config);
  if (global.checkpoint) trainer.load(*global.checkpoint);
  const bool resumed = trainer.sessions() > 0;

  if (!config.checkpoint_dir.empty()) {
    fs::create_directories(config.checkpoint_dir);
    save_config(config, config.checkpoint_dir / "config.json");
  }
  std::ofstream metrics;
  if (!config.metrics_log.empty()) {
    ensure_parent(config.metrics_log);
    metrics.open(config.metrics_log, resumed ? std::ios::app : std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot open metrics log " + config.metrics_log.string());
  }

  const std::size_t start = trainer.sessions();
  trainer.train(metrics.is_open() ? &metrics : nullptr, total);
  out << "trained sessions " << start << ".." << trainer.sessions() << " ("
      << trainer.updates() << " updates, agent " << agent_kind_name(config.train.agent) << ")\n";
  if (!config.checkpoint_dir.empty() && config.train.checkpoint_every > 0) {
    out << "checkpoint " << (config.checkpoint_dir / "latest.ckpt").string() << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const GlobalOptions& global, const EvalCliOptions& options, std::ostream& out) {
  ExperimentConfig config = resolve_config(global);
  if (options.setting) config.activity.setting = *options.setting;
  const ActivityConfig activity = config.activity_config();
  if (options.configuration == Configuration::kHeldOut && !activity.has_inactive()) {
    throw ConfigError("held_out evaluation needs inactive foci, but the " +
                      std::string(setting_name(activity.setting)) + " setting has none");
  }

  EvalOptions eval;
  eval.configuration = options.configuration;
  eval.n_sessions = options.n_sessions.value_or(config.eval_sessions);
  eval.seed = config.seed;
  eval.session_steps = config.session_steps;
  eval.threads = config.eval_threads;

  std::unique_ptr<Trainer> trainer;
  AgentFactory factory;
  if (options.oracle) {
    factory = [&config]() -> std::unique_ptr<Agent> {
      return std::make_unique<OracleAgent>(config.vocabulary(), config.objects);
    };
  } else {
    trainer = require_checkpoint(global, config, "eval");
    factory = learner_agent_factory(trainer->learner(), config.beam_width, config.max_len,
                                    trainer->wiring().bypass_controller);
  }
  const EvalReport report = evaluate(factory, config.objects, activity, eval);

  ensure_parent(options.report);
  std::ofstream file(options.report);
  if (!file) throw std::runtime_error("cannot write report " + options.report.string());
  file << to_json(report).dump(2) << '\n';

  out << std::fixed << std::setprecision(4) << "accuracy " << report.accuracy << " ("
      << report.correct << "/" << report.judged << ", " << setting_name(report.setting) << ", "
      << configuration_name(report.configuration) << ")\n";
  for (const auto& [form, tally] : report.per_form) {
    out << "  " << form_name(form) << ' ' << tally.accuracy() << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------- chat

namespace {

// The teacher turn a human utterance corresponds to, when it follows one of
// the scripted templates and agrees with the world.
std::optional<TeacherTurn> known_turn(const Teacher& teacher, const WorldState& world,
                                      const Utterance& u, Rng& rng) {
  const Vocabulary& vocab = teacher.vocabulary();
  if (u.tokens.size() == 2 && u.tokens[0] == vocab.id(kSilenceToken)) {
    // the focus only matters for the correction given after a wrong statement
    TeacherTurn turn = teacher.generate(world, InteractionForm::kLearnerStatement, rng);
    turn.utterance = u;
    return turn;
  }
  for (Direction d : kDirections) {
    const Focus focus{world.at(d), d};
    for (QuestionTemplate q : {QuestionTemplate::kWhat, QuestionTemplate::kWhere}) {
      if (teacher.question(q, focus) == u) return TeacherTurn{u, InteractionForm::kQuestionAnswer, focus};
    }
    for (StatementTemplate s : {StatementTemplate::kObjectFirst, StatementTemplate::kDirectionFirst}) {
      if (teacher.statement(s, focus) == u) return TeacherTurn{u, InteractionForm::kStatementRepeat, focus};
    }
  }
  return std::nullopt;
}

std::string spoken_vocabulary(const Vocabulary& vocab) {
  std::string words;
  for (TokenId id = 0; id < vocab.size(); ++id) {
    if (!vocab.generatable(id) || id == vocab.eos()) continue;
    if (!words.empty()) words += ' ';
    words += vocab.token(id);
  }
  return words;
}

constexpr const char* kChatHelp =
    "type a sentence as the teacher, e.g. 'what is on the east' or '.'\n"
    "  +1 / -1        score the last reply when it was not judged automatically\n"
    "  :world         show the current world\n"
    "  :world north=A south=B east=C west=D   start over in the given world\n"
    "  :new           start over in a freshly sampled world\n"
    "  :quit          save the transcript and leave\n";

}  // namespace

int cmd_chat(const GlobalOptions& global, const ChatOptions& options, std::istream& in,
             std::ostream& out) {
  const ExperimentConfig config = resolve_config(global);
  const auto trainer = require_checkpoint(global, config, "chat");
  const Vocabulary vocab = config.vocabulary();
  const Teacher teacher(vocab, config.objects);
  Rng rng(config.seed);

  std::vector<Session> sessions;
  std::unique_ptr<LearnerAgent> agent;
  bool pending = false;
  auto start = [&](const WorldState& world) {
    Session s;
    s.world = world;
    s.max_steps = 0;
    sessions.push_back(std::move(s));
    agent = std::make_unique<LearnerAgent>(
        trainer->learner(), LearnerAgent::Options{config.beam_width, config.max_len,
                                                  trainer->wiring().bypass_controller});
    agent->begin_session(world, render_scene(world, config.objects.size()));
    pending = false;
    out << "world: " << describe_world(world, config.objects) << '\n';
  };
  start(sample_world(config.objects.size(), rng));
  out << kChatHelp;

  std::string raw;
  while (out << "> " << std::flush, std::getline(in, raw)) {
    const std::string line = trim(raw);
    Session& session = sessions.back();
    if (line.empty()) {
      out << kChatHelp;
      continue;
    }
    if (line == ":quit" || line == ":q") break;
    if (line == ":world") {
      out << "world: " << describe_world(session.world, config.objects) << '\n';
      continue;
    }
    if (line == ":new") {
      start(sample_world(config.objects.size(), rng));
      continue;
    }
    if (line.starts_with(":world ")) {
      std::vector<std::string> fields = split_words(line);
      fields.erase(fields.begin());
      try {
        start(parse_world_spec(fields, config.objects));
      } catch (const std::invalid_argument& e) {
        out << "cannot use that world: " << e.what() << '\n';
      }
      continue;
    }
    if (line == "+1" || line == "-1") {
      if (!pending) {
        out << "nothing to score\n";
        continue;
      }
      session.transcript.back().feedback.reward = line == "+1" ? 1.0 : -1.0;
      pending = false;
      out << "reward " << line << " recorded\n";
      continue;
    }

    Utterance utterance;
    try {
      utterance = Utterance::parse(vocab, line);
      for (std::size_t i = 0; i + 1 < utterance.tokens.size(); ++i) {
        if (!vocab.generatable(utterance.tokens[i]) || utterance.tokens[i] == vocab.eos()) {
          throw VocabularyError("'" + vocab.token(utterance.tokens[i]) + "' cannot be spoken");
        }
      }
    } catch (const VocabularyError& e) {
      out << e.what() << "\nvocabulary: " << spoken_vocabulary(vocab) << '\n';
      continue;
    }

    Interaction step;
    step.response = agent->respond(utterance, Mode::kEval, rng);
    out << "learner: " << step.response.surface << '\n';
    if (const auto turn = known_turn(teacher, session.world, utterance, rng)) {
      step.turn = *turn;
      step.feedback = teacher.respond(session.world, *turn, step.response, rng);
      agent->observe_feedback(step.feedback);
      out << "teacher: " << step.feedback.sentence.surface << "  ["
          << (step.feedback.reward > 0 ? "+1" : "-1") << "]\n";
      pending = false;
    } else {
      step.turn = TeacherTurn{utterance, InteractionForm::kLearnerStatement, {}};
      step.feedback = Feedback{Utterance::from_ids(vocab, {}), 0.0};
      out << "(not a known template; type +1 or -1 to score this reply)\n";
      pending = true;
    }
    session.transcript.push_back(std::move(step));
    session.step_index = session.max_steps = session.transcript.size();
  }

  ensure_parent(options.transcript);
  std::ofstream file(options.transcript);
  if (!file) throw std::runtime_error("cannot write transcript " + options.transcript.string());
  for (const Session& s : sessions) write_transcript(file, s);
  out << "\ntranscript saved to " << options.transcript.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- inspect-attention

WorldState parse_world_spec(const std::vector<std::string>& fields,
                            const std::vector<std::string>& objects) {
  WorldState world;
  std::array<bool, 4> seen{};
  for (const std::string& field : fields) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("expected direction=object, got '" + field + "'");
    const auto d = parse_direction(field.substr(0, eq));
    if (!d) throw std::invalid_argument("unknown direction '" + field.substr(0, eq) + "'");
    const std::string name = field.substr(eq + 1);
    const auto it = std::find(objects.begin(), objects.end(), name);
    if (it == objects.end()) throw std::invalid_argument("unknown object '" + name + "'");
    const int slot = static_cast<int>(*d);
    if (seen[slot]) throw std::invalid_argument(std::string(direction_name(*d)) + " given twice");
    seen[slot] = true;
    world.placement[slot] = static_cast<ObjectId>(it - objects.begin());
  }
  for (Direction d : kDirections) {
    if (!seen[static_cast<int>(d)]) throw std::invalid_argument(std::string(direction_name(d)) + " is missing");
  }
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) {
      if (world.placement[a] == world.placement[b]) {
        throw std::invalid_argument("object '" + objects[world.placement[a]] + "' placed twice");
      }
    }
  }
  return world;
}

std::vector<ScriptedSession> parse_dialogue_script(std::istream& in, const Vocabulary& vocab,
                                                   const std::vector<std::string>& objects) {
  std::vector<ScriptedSession> sessions;
  std::string raw;
  for (std::size_t n = 1; std::getline(in, raw); ++n) {
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> words = split_words(line);
    const std::string keyword = words.front();
    words.erase(words.begin());
    if (keyword == "world") {
      try {
        sessions.push_back({n, parse_world_spec(words, objects), {}});
      } catch (const std::invalid_argument& e) {
        throw ParseError(e.what(), n);
      }
    } else if (keyword == "teacher" || keyword == "feedback") {
      if (sessions.empty()) throw ParseError(keyword + " line before any world line", n);
      if (words.empty()) throw ParseError("empty " + keyword + " sentence", n);
      std::string sentence;
      for (const std::string& w : words) sentence += (sentence.empty() ? "" : " ") + w;
      try {
        sessions.back().lines.push_back({n, keyword == "feedback", Utterance::parse(vocab, sentence)});
      } catch (const VocabularyError& e) {
        throw ParseError(e.what(), n);
      }
    } else {
      throw ParseError("expected 'world', 'teacher' or 'feedback', got '" + keyword + "'", n);
    }
  }
  return sessions;
}

int cmd_inspect_attention(const GlobalOptions& global, const InspectOptions& options,
                          std::ostream& out) {
  const ExperimentConfig config = resolve_config(global);
  std::ifstream script(options.dialogue);
  if (!script) throw UsageError("cannot open dialogue file " + options.dialogue.string());
  const Vocabulary vocab = config.vocabulary();
  const std::vector<ScriptedSession> sessions = parse_dialogue_script(script, vocab, config.objects);

  Trainer trainer(config);
  if (global.checkpoint) {
    trainer.load(*global.checkpoint);
  } else {
    std::cerr << "note: no --checkpoint, inspecting a freshly initialized model\n";
  }
  if (options.zero_init) trainer.mutable_learner().zero_all();
  const Learner& learner = trainer.learner();

  std::ofstream file;
  if (options.output) {
    ensure_parent(*options.output);
    file.open(*options.output);
    if (!file) throw std::runtime_error("cannot write " + options.output->string());
  }
  std::ostream& sink = options.output ? static_cast<std::ostream&>(file) : out;

  Rng rng(config.seed);
  std::size_t records = 0;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    const ScriptedSession& session = sessions[s];
    LearnerAgent agent(learner, {config.beam_width, config.max_len, trainer.wiring().bypass_controller});
    agent.begin_session(session.world, render_scene(session.world, config.objects.size()));
    for (const ScriptLine& line : session.lines) {
      if (line.feedback) {
        agent.observe_feedback(Feedback{line.utterance, 0.0});
        continue;
      }
      const Utterance reply = agent.respond(line.utterance, Mode::kEval, rng);
      const VisualAttention& visual = agent.responses().back().decoded.visual;
      const auto attention = visual.attention.values();
      json grid = json::array();
      for (std::size_t r = 0; r < kGridSide; ++r) {
        grid.push_back(std::vector<double>(attention.begin() + r * kGridSide,
                                           attention.begin() + (r + 1) * kGridSide));
      }
      const std::size_t best = static_cast<std::size_t>(
          std::max_element(attention.begin(), attention.end()) - attention.begin());
      json direction = nullptr;
      for (Direction d : kDirections) {
        if (direction_cell(d) == best) direction = direction_name(d);
      }
      json tokens = json::array();
      for (std::size_t i = 0; i + 1 < reply.tokens.size(); ++i) tokens.push_back(vocab.token(reply.tokens[i]));
      const auto gate = visual.gate.values();
      sink << json{{"session", s},
                   {"line", line.line},
                   {"world", describe_world(session.world, config.objects)},
                   {"teacher", line.utterance.surface},
                   {"learner", reply.surface},
                   {"tokens", tokens},
                   {"attention", grid},
                   {"argmax", {{"cell", best}, {"row", best / kGridSide}, {"col", best % kGridSide},
                               {"direction", direction}}},
                   {"gate", std::vector<double>(gate.begin(), gate.end())}}
                  .dump()
           << '\n';
      ++records;
    }
  }
  if (options.output) out << records << " records written to " << options.output->string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- plot

std::string render_svg(
    const std::vector<std::pair<std::string, std::vector<std::pair<std::size_t, double>>>>& curves,
    std::size_t window) {
  constexpr double kW = 720, kH = 400, kLeft = 60, kRight = 170, kTop = 30, kBottom = 50;
  constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::size_t max_step = 1;
  for (const auto& [name, points] : curves) {
    for (const auto& p : points) max_step = std::max(max_step, p.first);
  }
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto x_of = [&](double step) { return kLeft + pw * step / static_cast<double>(max_step); };
  auto y_of = [&](double reward) { return kTop + ph * (1.0 - (reward + 1.0) / 2.0); };

  std::ostringstream svg;
  svg << std::fixed << std::setprecision(1);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kLeft << "\" y=\"18\">mean training reward, window " << window << "</text>\n";
  for (double r : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    svg << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << y_of(r) << "\" y2=\""
        << y_of(r) << "\" stroke=\"#ddd\"/>\n"
        << "<text x=\"" << kLeft - 8 << "\" y=\"" << y_of(r) + 4 << "\" text-anchor=\"end\">" << r
        << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double step = max_step * i / 4.0;
    svg << "<text x=\"" << x_of(step) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
        << static_cast<std::size_t>(step) << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 10
      << "\" text-anchor=\"middle\">sessions</text>\n"
      << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#333\"/>\n";
  svg << std::setprecision(2);
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const char* color = kColors[c % std::size(kColors)];
    svg << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << color << "\" points=\"";
    for (const auto& [step, reward] : curves[c].second) svg << x_of(step) << ',' << y_of(reward) << ' ';
    svg << "\"/>\n";
    const double ly = kTop + 16 + 18.0 * c;
    svg << "<line x1=\"" << kLeft + pw + 12 << "\" x2=\"" << kLeft + pw + 32 << "\" y1=\"" << ly - 4
        << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << kLeft + pw + 38 << "\" y=\"" << ly << "\">" << curves[c].first << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

int cmd_plot(const PlotOptions& options, std::ostream& out) {
  if (options.metrics.empty()) throw UsageError("plot needs at least one metrics log");
  if (options.window == 0) throw UsageError("--window must be positive");
  std::vector<std::pair<std::string, std::vector<std::pair<std::size_t, double>>>> curves;
  for (const fs::path& log : options.metrics) {
    curves.emplace_back(log.stem().string(), reward_curve(log, options.window));
  }
  const std::string svg = render_svg(curves, options.window);
  ensure_parent(options.output);
  std::ofstream file(options.output);
  if (!file) throw std::runtime_error("cannot write " + options.output.string());
  file << svg;
  out << "wrote " << options.output.string() << " (" << curves.size() << " curves)\n";
  return kExitOk;
}

}  // namespace lingo::cli
