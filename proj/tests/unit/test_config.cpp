#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "../support/cases.hpp"
#include "lingo/config.hpp"
#include "lingo/errors.hpp"

using namespace lingo;
using nlohmann::json;

namespace {

std::string error_of(const json& doc) {
  try {
    config_from_json(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("defaults survive a json round trip") {
  const ExperimentConfig defaults;
  CHECK(config_from_json(to_json(defaults)) == defaults);
  CHECK(config_from_json(json::object()) == defaults);
  CHECK(to_json(config_from_json(to_json(defaults))) == to_json(defaults));
}

TEST_CASE("a customised config round trips through a file") {
  ExperimentConfig c = testing::micro_config(42);
  c.train.agent = AgentKind::kReinforceOnly;
  c.train.value_input = ValueInput::kSceneOnly;
  c.activity.setting = Setting::kKnowledgeTransfer;
  c.activity.inactive_objects = std::vector<std::string>{"banana"};
  c.activity.inactive_pairs = std::vector<std::pair<std::string, std::string>>{{"apple", "east"}};
  c.metrics_log = "runs/m.jsonl";
  const auto path = std::filesystem::temp_directory_path() / "lingo_config_rt.json";
  save_config(c, path);
  const ExperimentConfig back = load_config(path);
  CHECK(back == c);
  save_config(back, path);
  std::ifstream in(path);
  CHECK(json::parse(in) == to_json(c));

  const ActivityConfig a = back.activity_config();
  CHECK(a.inactive_qa_objects == std::set<ObjectId>{1});
  CHECK(a.inactive_qa_pairs == std::set<Focus>{{0, Direction::kEast}});
  CHECK(activity_from_json(activity_to_json(a, back.objects), back.objects) == a);
}

TEST_CASE("lambda follows gamma unless set") {
  CHECK(config_from_json({{"train", {{"gamma", 0.9}}}}).train.lambda == 0.9);
  CHECK(config_from_json({{"train", {{"gamma", 0.9}, {"lambda", 0.5}}}}).train.lambda == 0.5);
}

TEST_CASE("malformed configs name the offending field") {
  CHECK(error_of({{"trian", json::object()}}).find("trian") != std::string::npos);
  CHECK(error_of({{"train", {{"lr", -1.0}}}}).find("train.lr") != std::string::npos);
  CHECK(error_of({{"train", {{"lr", "fast"}}}}).find("train.lr") != std::string::npos);
  CHECK(error_of({{"train", {{"batch_size", 0}}}}).find("train.batch_size") != std::string::npos);
  CHECK(error_of({{"train", {{"gamma", 1.5}}}}).find("train.gamma") != std::string::npos);
  CHECK(error_of({{"train", {{"agent", "telepathy"}}}}).find("train.agent") != std::string::npos);
  CHECK(error_of({{"model", {{"hidden", -3}}}}).find("model.hidden") != std::string::npos);
  CHECK(error_of({{"model", {{"depth", 3}}}}).find("model.depth") != std::string::npos);
  CHECK(error_of({{"objects", {"a", "b", "c"}}}).find("objects") != std::string::npos);
  CHECK(error_of({{"objects", {"a", "b", "c", "c"}}}).find("objects") != std::string::npos);
  CHECK(error_of({{"activity", {{"fraction_inactive", 1.0}}}}).find("activity.fraction_inactive") !=
        std::string::npos);
  CHECK(error_of({{"activity", {{"inactive_objects", {"durian"}}}}}).find("durian") != std::string::npos);
  CHECK(error_of({{"activity", {{"setting", "telepathy"}}}}).find("activity.setting") !=
        std::string::npos);
  CHECK(error_of({{"decode", {{"beam_width", 0}}}}).find("decode.beam_width") != std::string::npos);
  CHECK(error_of(json::array()).find("config") != std::string::npos);

  const auto path = std::filesystem::temp_directory_path() / "lingo_bad.json";
  std::ofstream(path) << "{ \"seed\": ";
  CHECK_THROWS_AS(load_config(path), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/lingo.json"), ConfigError);
}

TEST_CASE("environment overrides") {
  json doc = to_json(ExperimentConfig{});
  apply_env_overrides(doc, {"LINGO_SEED=9", "LINGO_TRAIN__LR=0.5", "LINGO_TRAIN__AGENT=imitation_only",
                            "LINGO_ACTIVITY__SETTING=knowledge_transfer", "PATH=/bin",
                            "LINGO_PATHS__METRICS_LOG=out.jsonl", "LINGO_NOEQUALS"});
  const ExperimentConfig c = config_from_json(doc);
  CHECK(c.seed == 9);
  CHECK(c.train.lr == 0.5);
  CHECK(c.train.agent == AgentKind::kImitationOnly);
  CHECK(c.activity.setting == Setting::kKnowledgeTransfer);
  CHECK(c.metrics_log == "out.jsonl");

  json empty;
  apply_env_overrides(empty, {"LINGO_DECODE__BEAM_WIDTH=5"});
  CHECK(config_from_json(empty).beam_width == 5);

  json bad = json::object();
  apply_env_overrides(bad, {"LINGO_TRAIN__WARP=1"});
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
}

TEST_CASE("agent kinds and dims") {
  for (AgentKind k : {AgentKind::kJoint, AgentKind::kImitationOnly, AgentKind::kReinforceOnly}) {
    CHECK(parse_agent_kind(agent_kind_name(k)) == k);
  }
  CHECK_FALSE(parse_agent_kind("both").has_value());
  ExperimentConfig c;
  c.objects = {"a", "b", "c", "d", "e"};
  CHECK(c.dims().num_objects == 5);
  CHECK(c.vocabulary().find("e").has_value());
}
