#include "lingo/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <thread>

#include "lingo/errors.hpp"

namespace lingo {

std::string_view configuration_name(Configuration c) {
  return c == Configuration::kHeldOut ? "held_out" : "mixed";
}

std::optional<Configuration> parse_configuration(std::string_view name) {
  if (name == "mixed") return Configuration::kMixed;
  if (name == "held_out") return Configuration::kHeldOut;
  return std::nullopt;
}

double EvalReport::form_accuracy(InteractionForm form) const {
  const auto it = per_form.find(form);
  return it == per_form.end() ? 0.0 : it->second.accuracy();
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json per_form = nlohmann::json::object();
  nlohmann::json per_form_counts = nlohmann::json::object();
  for (const auto& [form, tally] : r.per_form) {
    per_form[std::string(form_name(form))] = tally.accuracy();
    per_form_counts[std::string(form_name(form))] = {{"correct", tally.correct},
                                                     {"judged", tally.judged}};
  }
  return {{"setting", setting_name(r.setting)},
          {"configuration", configuration_name(r.configuration)},
          {"n_sessions", r.n_sessions},
          {"accuracy", r.accuracy},
          {"correct", r.correct},
          {"judged", r.judged},
          {"per_form_accuracy", per_form},
          {"per_form_counts", per_form_counts},
          {"mean_reward", r.mean_reward}};
}

namespace {

Rng session_rng(std::uint64_t seed, std::size_t index) {
  Rng mix(seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
  return Rng(mix.next_u64());
}

struct Partial {
  std::size_t correct = 0;
  std::size_t judged = 0;
  double reward = 0.0;
  std::map<InteractionForm, FormTally> per_form;
};

}  // namespace

WorldState test_world(const Teacher& teacher, std::size_t session_index, std::uint64_t seed) {
  Rng rng = session_rng(seed, session_index);
  const std::size_t n = teacher.objects().size();
  for (;;) {
    WorldState world = sample_world(n, rng);
    if (teacher.policy() != FocusPolicy::kHeldOut ||
        !teacher.eligible_foci(world, InteractionForm::kQuestionAnswer).empty()) {
      return world;
    }
  }
}

EvalReport evaluate(const AgentFactory& make_agent, const std::vector<std::string>& objects,
                    const ActivityConfig& activity, const EvalOptions& options) {
  if (options.n_sessions == 0) throw ContractError("evaluate: n_sessions must be at least 1");
  if (options.configuration == Configuration::kHeldOut && !activity.has_inactive()) {
    throw ConfigError("held_out evaluation needs inactive pairs or objects; the '" +
                      std::string(setting_name(activity.setting)) + "' setting has none");
  }
  const Vocabulary vocab = Vocabulary::for_objects(objects);
  const Teacher teacher(vocab, objects, activity,
                        options.configuration == Configuration::kHeldOut ? FocusPolicy::kHeldOut
                                                                         : FocusPolicy::kMixed);
  const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, options.n_sessions));
  std::vector<Partial> partials(threads);
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&](std::size_t w) {
    try {
      std::unique_ptr<Agent> agent = make_agent();
      Partial& p = partials[w];
      for (std::size_t i = w; i < options.n_sessions; i += threads) {
        const WorldState world = test_world(teacher, i, options.seed);
        Rng rng = session_rng(options.seed ^ 0xa5a5a5a5ULL, i);
        const Session s =
            run_session(world, teacher, *agent, Mode::kEval, options.session_steps, rng);
        for (const Interaction& step : s.transcript) {
          const bool ok = step.feedback.reward > 0.0;
          p.correct += ok;
          ++p.judged;
          p.reward += step.feedback.reward;
          FormTally& t = p.per_form[step.turn.form];
          t.correct += ok;
          ++t.judged;
        }
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker, w);
  }
  if (failure) std::rethrow_exception(failure);

  EvalReport report;
  report.setting = activity.setting;
  report.configuration = options.configuration;
  report.n_sessions = options.n_sessions;
  double reward = 0.0;
  // summing in worker order keeps the result independent of scheduling
  for (const Partial& p : partials) {
    report.correct += p.correct;
    report.judged += p.judged;
    reward += p.reward;
    for (const auto& [form, t] : p.per_form) {
      report.per_form[form].correct += t.correct;
      report.per_form[form].judged += t.judged;
    }
  }
  report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.judged);
  report.mean_reward = reward / static_cast<double>(report.judged);
  return report;
}

AgentFactory learner_agent_factory(const Learner& learner, std::size_t beam_width,
                                   std::size_t max_len, bool bypass_controller) {
  return [&learner, beam_width, max_len, bypass_controller]() -> std::unique_ptr<Agent> {
    return std::make_unique<LearnerAgent>(
        learner, LearnerAgent::Options{beam_width, max_len, bypass_controller});
  };
}

std::unique_ptr<Trainer> make_baseline_agent(AgentKind kind, ExperimentConfig config) {
  config.train.agent = kind;
  return std::make_unique<Trainer>(config);
}

OracleAgent::OracleAgent(Vocabulary vocab, std::vector<std::string> objects)
    : teacher_(std::move(vocab), std::move(objects)) {}

void OracleAgent::begin_session(const WorldState& world, const Scene&) { world_ = world; }

Utterance OracleAgent::respond(const Utterance& teacher_utterance, Mode, Rng&) {
  const std::vector<std::string> words = split_words(teacher_utterance.surface);
  const auto& objects = teacher_.objects();
  auto object_of = [&](const std::string& w) -> std::optional<ObjectId> {
    const auto it = std::find(objects.begin(), objects.end(), w);
    if (it == objects.end()) return std::nullopt;
    return static_cast<ObjectId>(it - objects.begin());
  };
  std::optional<Focus> focus;
  for (const std::string& w : words) {
    if (const auto d = parse_direction(w)) {
      focus = Focus{world_.at(*d), *d};
      break;
    }
    if (const auto o = object_of(w); o && world_.where(*o)) {
      focus = Focus{*o, *world_.where(*o)};
      break;
    }
  }
  // silence: state whatever is in the north
  if (!focus) focus = Focus{world_.at(Direction::kNorth), Direction::kNorth};
  return teacher_.statement(StatementTemplate::kObjectFirst, *focus);
}

Utterance SilentAgent::respond(const Utterance&, Mode, Rng&) {
  return Utterance::parse(vocab_, ".");
}

std::vector<std::pair<std::size_t, double>> reward_curve(const std::filesystem::path& metrics_log,
                                                         std::size_t window) {
  if (window == 0) throw ContractError("reward_curve: window must be at least 1");
  std::ifstream in(metrics_log);
  if (!in) throw ParseError("cannot open " + metrics_log.string(), 0);
  std::vector<std::pair<std::size_t, double>> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto record = nlohmann::json::parse(line);
      raw.emplace_back(record.at("step").get<std::size_t>(),
                       record.at("mean_reward").get<double>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed metrics record: ") + e.what(), line_no);
    }
  }
  std::vector<std::pair<std::size_t, double>> out;
  double running = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    running += raw[i].second;
    if (i >= window) running -= raw[i - window].second;
    if (i + 1 >= window) out.emplace_back(raw[i].first, running / static_cast<double>(window));
  }
  return out;
}

}  // namespace lingo
