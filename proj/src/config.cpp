#include "lingo/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "lingo/errors.hpp"

extern char** environ;

namespace lingo {

using nlohmann::json;

std::string_view agent_kind_name(AgentKind kind) {
  switch (kind) {
    case AgentKind::kJoint: return "joint";
    case AgentKind::kImitationOnly: return "imitation_only";
    case AgentKind::kReinforceOnly: return "reinforce_only";
  }
  return "?";
}

std::optional<AgentKind> parse_agent_kind(std::string_view name) {
  for (AgentKind k : {AgentKind::kJoint, AgentKind::kImitationOnly, AgentKind::kReinforceOnly}) {
    if (agent_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

namespace {

std::string_view value_input_name(ValueInput v) {
  return v == ValueInput::kSceneOnly ? "scene_only" : "state_and_scene";
}

std::size_t object_index(const std::vector<std::string>& objects, const std::string& name,
                         const std::string& field) {
  const auto it = std::find(objects.begin(), objects.end(), name);
  if (it == objects.end()) throw ConfigError(field + ": unknown object '" + name + "'");
  return static_cast<std::size_t>(it - objects.begin());
}

// Reads doc[key] into out when present; type errors name the full field path.
template <typename T>
void read(const json& doc, const std::string& section, const char* key, T& out) {
  const auto it = doc.find(key);
  if (it == doc.end()) return;
  const std::string field = section.empty() ? key : section + "." + key;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(field + ": expected true or false");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!it->is_number_unsigned()) throw ConfigError(field + ": expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError(field + ": expected a number");
    }
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

void reject_unknown(const json& doc, const std::string& section,
                    std::initializer_list<const char*> known) {
  if (!doc.is_object()) {
    throw ConfigError((section.empty() ? std::string("config") : section) + ": expected an object");
  }
  for (const auto& [key, _] : doc.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError((section.empty() ? key : section + "." + key) + ": unknown key");
    }
  }
}

template <typename E, typename Parse>
void read_enum(const json& doc, const std::string& section, const char* key, E& out, Parse parse) {
  std::string name;
  read(doc, section, key, name);
  if (name.empty()) return;
  const auto parsed = parse(name);
  if (!parsed) throw ConfigError(section + "." + key + ": unknown value '" + name + "'");
  out = *parsed;
}

}  // namespace

ModelDims ExperimentConfig::dims() const {
  ModelDims d = model;
  d.num_objects = objects.size();
  return d;
}

ActivityConfig ExperimentConfig::activity_config() const {
  ActivityConfig a = build_activity_config(activity.setting, objects.size(),
                                           activity.fraction_inactive, activity.seed);
  if (activity.inactive_pairs) {
    a.inactive_qa_pairs.clear();
    for (const auto& [object, direction] : *activity.inactive_pairs) {
      const auto d = parse_direction(direction);
      if (!d) throw ConfigError("activity.inactive_pairs: unknown direction '" + direction + "'");
      a.inactive_qa_pairs.insert(
          Focus{object_index(objects, object, "activity.inactive_pairs"), *d});
    }
  }
  if (activity.inactive_objects) {
    a.inactive_qa_objects.clear();
    for (const std::string& object : *activity.inactive_objects) {
      a.inactive_qa_objects.insert(object_index(objects, object, "activity.inactive_objects"));
    }
  }
  return a;
}

json to_json(const ExperimentConfig& c) {
  json model = {{"hidden", c.model.hidden},
                {"embed", c.model.embed},
                {"object_features", c.model.object_features},
                {"direction_maps", c.model.direction_maps},
                {"attention_kernel", c.model.attention_kernel},
                {"controller_hidden", c.model.controller_hidden},
                {"init_scale", c.model.init_scale},
                {"min_std", c.model.min_std},
                {"init_std", c.model.init_std}};
  json train = {{"lr", c.train.lr},
                {"controller_lr", c.train.controller_lr},
                {"adagrad_eps", c.train.adagrad_eps},
                {"batch_size", c.train.batch_size},
                {"gamma", c.train.gamma},
                {"lambda", c.train.lambda},
                {"target_sync_period", c.train.target_sync_period},
                {"replay_capacity", c.train.replay_capacity},
                {"replay_reinforce", c.train.replay_reinforce},
                {"max_train_sessions", c.train.max_train_sessions},
                {"agent", agent_kind_name(c.train.agent)},
                {"imitation_weight", c.train.weights.imitation},
                {"reinforce_weight", c.train.weights.reinforce},
                {"value_weight", c.train.weights.value},
                {"value_input", value_input_name(c.train.value_input)},
                {"value_width", c.train.value_width},
                {"checkpoint_every", c.train.checkpoint_every}};
  json activity = {{"setting", setting_name(c.activity.setting)},
                   {"fraction_inactive", c.activity.fraction_inactive},
                   {"seed", c.activity.seed}};
  if (c.activity.inactive_pairs) {
    json pairs = json::array();
    for (const auto& [o, d] : *c.activity.inactive_pairs) pairs.push_back({o, d});
    activity["inactive_pairs"] = pairs;
  }
  if (c.activity.inactive_objects) activity["inactive_objects"] = *c.activity.inactive_objects;
  return {{"seed", c.seed},
          {"objects", c.objects},
          {"model", model},
          {"train", train},
          {"activity", activity},
          {"session", {{"max_steps", c.session_steps}}},
          {"decode", {{"beam_width", c.beam_width}, {"max_len", c.max_len}}},
          {"eval", {{"n_sessions", c.eval_sessions}, {"threads", c.eval_threads}}},
          {"paths",
           {{"checkpoint_dir", c.checkpoint_dir.string()}, {"metrics_log", c.metrics_log.string()}}}};
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig c;
  reject_unknown(doc, "",
                 {"seed", "objects", "model", "train", "activity", "session", "decode", "eval",
                  "paths"});
  read(doc, "", "seed", c.seed);
  read(doc, "", "objects", c.objects);

  if (const auto m = doc.find("model"); m != doc.end()) {
    reject_unknown(*m, "model",
                   {"hidden", "embed", "object_features", "direction_maps", "attention_kernel",
                    "controller_hidden", "init_scale", "min_std", "init_std"});
    read(*m, "model", "hidden", c.model.hidden);
    read(*m, "model", "embed", c.model.embed);
    read(*m, "model", "object_features", c.model.object_features);
    read(*m, "model", "direction_maps", c.model.direction_maps);
    read(*m, "model", "attention_kernel", c.model.attention_kernel);
    read(*m, "model", "controller_hidden", c.model.controller_hidden);
    read(*m, "model", "init_scale", c.model.init_scale);
    read(*m, "model", "min_std", c.model.min_std);
    read(*m, "model", "init_std", c.model.init_std);
  }
  if (const auto t = doc.find("train"); t != doc.end()) {
    reject_unknown(*t, "train",
                   {"lr", "controller_lr", "adagrad_eps", "batch_size", "gamma", "lambda", "target_sync_period",
                    "replay_capacity", "replay_reinforce", "max_train_sessions", "agent", "imitation_weight",
                    "reinforce_weight", "value_weight", "value_input", "value_width",
                    "checkpoint_every"});
    read(*t, "train", "lr", c.train.lr);
    read(*t, "train", "controller_lr", c.train.controller_lr);
    read(*t, "train", "adagrad_eps", c.train.adagrad_eps);
    read(*t, "train", "batch_size", c.train.batch_size);
    read(*t, "train", "gamma", c.train.gamma);
    // lambda follows gamma unless given explicitly
    c.train.lambda = c.train.gamma;
    read(*t, "train", "lambda", c.train.lambda);
    read(*t, "train", "target_sync_period", c.train.target_sync_period);
    read(*t, "train", "replay_capacity", c.train.replay_capacity);
    read(*t, "train", "replay_reinforce", c.train.replay_reinforce);
    read(*t, "train", "max_train_sessions", c.train.max_train_sessions);
    read_enum(*t, "train", "agent", c.train.agent, parse_agent_kind);
    read(*t, "train", "imitation_weight", c.train.weights.imitation);
    read(*t, "train", "reinforce_weight", c.train.weights.reinforce);
    read(*t, "train", "value_weight", c.train.weights.value);
    read_enum(*t, "train", "value_input", c.train.value_input,
              [](std::string_view s) -> std::optional<ValueInput> {
                if (s == "state_and_scene") return ValueInput::kStateAndScene;
                if (s == "scene_only") return ValueInput::kSceneOnly;
                return std::nullopt;
              });
    read(*t, "train", "value_width", c.train.value_width);
    read(*t, "train", "checkpoint_every", c.train.checkpoint_every);
  }
  if (const auto a = doc.find("activity"); a != doc.end()) {
    reject_unknown(*a, "activity",
                   {"setting", "fraction_inactive", "seed", "inactive_pairs", "inactive_objects"});
    read_enum(*a, "activity", "setting", c.activity.setting, parse_setting);
    read(*a, "activity", "fraction_inactive", c.activity.fraction_inactive);
    read(*a, "activity", "seed", c.activity.seed);
    if (const auto p = a->find("inactive_pairs"); p != a->end()) {
      std::vector<std::pair<std::string, std::string>> pairs;
      if (!p->is_array()) throw ConfigError("activity.inactive_pairs: expected a list");
      for (const json& item : *p) {
        if (!item.is_array() || item.size() != 2 || !item[0].is_string() || !item[1].is_string()) {
          throw ConfigError("activity.inactive_pairs: expected [object, direction] pairs");
        }
        pairs.emplace_back(item[0].get<std::string>(), item[1].get<std::string>());
      }
      c.activity.inactive_pairs = std::move(pairs);
    }
    if (const auto o = a->find("inactive_objects"); o != a->end()) {
      std::vector<std::string> objects;
      read(*a, "activity", "inactive_objects", objects);
      c.activity.inactive_objects = std::move(objects);
    }
  }
  if (const auto s = doc.find("session"); s != doc.end()) {
    reject_unknown(*s, "session", {"max_steps"});
    read(*s, "session", "max_steps", c.session_steps);
  }
  if (const auto d = doc.find("decode"); d != doc.end()) {
    reject_unknown(*d, "decode", {"beam_width", "max_len"});
    read(*d, "decode", "beam_width", c.beam_width);
    read(*d, "decode", "max_len", c.max_len);
  }
  if (const auto e = doc.find("eval"); e != doc.end()) {
    reject_unknown(*e, "eval", {"n_sessions", "threads"});
    read(*e, "eval", "n_sessions", c.eval_sessions);
    read(*e, "eval", "threads", c.eval_threads);
  }
  if (const auto p = doc.find("paths"); p != doc.end()) {
    reject_unknown(*p, "paths", {"checkpoint_dir", "metrics_log"});
    std::string dir = c.checkpoint_dir.string();
    std::string log = c.metrics_log.string();
    read(*p, "paths", "checkpoint_dir", dir);
    read(*p, "paths", "metrics_log", log);
    c.checkpoint_dir = dir;
    c.metrics_log = log;
  }
  validate(c);
  return c;
}

void validate(const ExperimentConfig& c) {
  auto require = [](bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
  };
  require(c.objects.size() >= 4, "objects: at least 4 objects are needed to fill a world");
  std::set<std::string> unique(c.objects.begin(), c.objects.end());
  require(unique.size() == c.objects.size(), "objects: duplicate object name");
  require(c.model.hidden >= 1, "model.hidden: must be at least 1");
  require(c.model.embed >= 1, "model.embed: must be at least 1");
  require(c.model.object_features >= 1, "model.object_features: must be at least 1");
  require(c.model.direction_maps >= 1, "model.direction_maps: must be at least 1");
  require(c.model.attention_kernel % 2 == 1 && c.model.attention_kernel <= 3,
          "model.attention_kernel: must be 1 or 3");
  require(c.model.controller_hidden >= 1, "model.controller_hidden: must be at least 1");
  require(std::isfinite(c.model.init_scale) && c.model.init_scale >= 0.0,
          "model.init_scale: must be finite and non-negative");
  require(std::isfinite(c.model.min_std) && c.model.min_std > 0.0, "model.min_std: must be > 0");
  require(std::isfinite(c.model.init_std) && c.model.init_std >= 0.0,
          "model.init_std: must be finite and non-negative");
  require(std::isfinite(c.train.lr) && c.train.lr > 0.0, "train.lr: must be > 0");
  require(std::isfinite(c.train.controller_lr) && c.train.controller_lr > 0.0,
          "train.controller_lr: must be > 0");
  require(std::isfinite(c.train.adagrad_eps) && c.train.adagrad_eps > 0.0,
          "train.adagrad_eps: must be > 0");
  require(c.train.batch_size >= 1, "train.batch_size: must be at least 1");
  require(c.train.gamma >= 0.0 && c.train.gamma <= 1.0, "train.gamma: must lie in [0, 1]");
  require(c.train.lambda >= 0.0 && c.train.lambda <= 1.0, "train.lambda: must lie in [0, 1]");
  require(c.train.target_sync_period >= 1, "train.target_sync_period: must be at least 1");
  require(c.train.replay_capacity >= c.train.batch_size,
          "train.replay_capacity: must be at least train.batch_size");
  require(c.train.value_width >= 1, "train.value_width: must be at least 1");
  for (double w : {c.train.weights.imitation, c.train.weights.reinforce, c.train.weights.value}) {
    require(std::isfinite(w) && w >= 0.0, "train: loss weights must be finite and non-negative");
  }
  require(c.activity.fraction_inactive >= 0.0 && c.activity.fraction_inactive < 1.0,
          "activity.fraction_inactive: must lie in [0, 1)");
  require(c.session_steps >= 1, "session.max_steps: must be at least 1");
  require(c.beam_width >= 1, "decode.beam_width: must be at least 1");
  require(c.max_len >= 1, "decode.max_len: must be at least 1");
  require(c.eval_sessions >= 1, "eval.n_sessions: must be at least 1");
  require(c.eval_threads >= 1, "eval.threads: must be at least 1");
  // resolving the activity checks object names and feasibility
  (void)c.activity_config();
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  apply_env_overrides(doc, process_environment());
  return config_from_json(doc);
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path.string() + ": cannot write config file");
  out << to_json(config).dump(2) << '\n';
}

std::vector<std::string> process_environment() {
  std::vector<std::string> out;
  for (char** e = environ; e && *e; ++e) out.emplace_back(*e);
  return out;
}

void apply_env_overrides(json& doc, const std::vector<std::string>& environment) {
  constexpr std::string_view kPrefix = "LINGO_";
  if (doc.is_null()) doc = json::object();
  for (const std::string& entry : environment) {
    if (!entry.starts_with(kPrefix)) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string key = entry.substr(kPrefix.size(), eq - kPrefix.size());
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    const std::string raw = entry.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;  // bare words are strings
    }
    const auto sep = key.find("__");
    if (sep == std::string::npos) {
      doc[key] = value;
    } else {
      doc[key.substr(0, sep)][key.substr(sep + 2)] = value;
    }
  }
}

json activity_to_json(const ActivityConfig& activity, const std::vector<std::string>& objects) {
  json pairs = json::array();
  for (const Focus& f : activity.inactive_qa_pairs) {
    pairs.push_back({objects.at(f.object), direction_name(f.direction)});
  }
  json inactive_objects = json::array();
  for (ObjectId o : activity.inactive_qa_objects) inactive_objects.push_back(objects.at(o));
  return {{"setting", setting_name(activity.setting)},
          {"seed", activity.seed},
          {"inactive_pairs", pairs},
          {"inactive_objects", inactive_objects}};
}

ActivityConfig activity_from_json(const json& doc, const std::vector<std::string>& objects) {
  ActivityConfig a;
  read_enum(doc, "activity", "setting", a.setting, parse_setting);
  read(doc, "activity", "seed", a.seed);
  for (const json& p : doc.value("inactive_pairs", json::array())) {
    const auto d = parse_direction(p.at(1).get<std::string>());
    if (!d) throw ConfigError("activity.inactive_pairs: unknown direction");
    a.inactive_qa_pairs.insert(
        Focus{object_index(objects, p.at(0).get<std::string>(), "activity.inactive_pairs"), *d});
  }
  for (const json& o : doc.value("inactive_objects", json::array())) {
    a.inactive_qa_objects.insert(
        object_index(objects, o.get<std::string>(), "activity.inactive_objects"));
  }
  return a;
}

}  // namespace lingo
