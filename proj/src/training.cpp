#include "lingo/training.hpp"

#include <ostream>

#include "lingo/checkpoint.hpp"
#include "lingo/errors.hpp"

namespace lingo {

using ad::NoGradScope;
using ad::Tape;
using ad::TapeScope;

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ContractError("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(std::span<const Transition> fresh) {
  for (const Transition& t : fresh) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(t);
  }
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  std::vector<Transition> out;
  const std::size_t k = std::min(n, items_.size());
  out.reserve(k);
  for (std::size_t i : rng.sample_without_replacement(items_.size(), k)) out.push_back(items_[i]);
  return out;
}

std::vector<Transition> replay_push_sample(ReplayBuffer& buffer,
                                           std::span<const Transition> fresh, std::size_t n,
                                           Rng& rng) {
  if (n == 0) throw ContractError("replay_push_sample: n must be at least 1");
  buffer.push(fresh);
  return buffer.sample(n, rng);
}

Tensor imitation_loss(const Learner& learner, std::span<const ImitationItem> batch) {
  if (batch.empty()) throw ContractError("imitation_loss: empty batch");
  std::vector<Tensor> terms;
  terms.reserve(batch.size());
  for (const ImitationItem& item : batch) {
    terms.push_back(learner.sentence_log_prob(item.sentence, AgentState{item.h_prev}, item.scene));
  }
  return scalar_mul(sum(concat(std::span<const Tensor>(terms))),
                    -1.0 / static_cast<double>(batch.size()));
}

double td_error(double reward, bool terminal, double gamma, double v_target_next, double v_cur) {
  return reward + (terminal ? 0.0 : gamma * v_target_next) - v_cur;
}

namespace {

Tensor constant(const std::vector<double>& values) {
  return Tensor({values.size()}, values);
}

// Bootstrap value of the next decision point under the target network.
double target_next_value(const Learner& learner, const ValueNet& target, const Transition& t,
                         const Scene& scene) {
  if (t.terminal) return 0.0;
  NoGradScope no_grad;
  const AgentState next =
      learner.encode(t.next_question, AgentState{constant(t.next_h_prev)}, scene);
  return target.forward(next.h_last, scene).item();
}

Tensor batch_mean(const std::vector<Tensor>& terms) {
  return scalar_mul(sum(concat(std::span<const Tensor>(terms))),
                    1.0 / static_cast<double>(terms.size()));
}

}  // namespace

TransitionEval evaluate_transition(const Learner& learner, const ValueNet& value,
                                   const ValueNet& target, const Transition& t) {
  TransitionEval out;
  out.scene = render_scene(t.world, learner.dims().num_objects);
  const AgentState cur = learner.encode(t.question, AgentState{constant(t.h_prev)}, out.scene);
  out.h_cur = cur.h_last;
  out.v_cur = value.forward(cur.h_last, out.scene);
  out.v_target_next = target_next_value(learner, target, t, out.scene);
  out.control = learner.control_for(cur, constant(t.k));
  return out;
}

Tensor reinforce_loss(const Learner& learner, const ValueNet& value, const ValueNet& target,
                      std::span<const Transition> batch, double gamma) {
  if (batch.empty()) throw ContractError("reinforce_loss: empty batch");
  std::vector<Tensor> terms;
  for (const Transition& t : batch) {
    const TransitionEval e = evaluate_transition(learner, value, target, t);
    const double delta = td_error(t.reward, t.terminal, gamma, e.v_target_next, e.v_cur.item());
    terms.push_back(scalar_mul(e.control.log_prob, -delta));
  }
  return batch_mean(terms);
}

Tensor value_loss(const Learner& learner, const ValueNet& value, const ValueNet& target,
                  std::span<const Transition> batch, double lambda) {
  if (batch.empty()) throw ContractError("value_loss: empty batch");
  std::vector<Tensor> terms;
  for (const Transition& t : batch) {
    const TransitionEval e = evaluate_transition(learner, value, target, t);
    const double y = t.reward + (t.terminal ? 0.0 : lambda * e.v_target_next);
    terms.push_back(square(subtract(Tensor::scalar(y), e.v_cur)));
  }
  return batch_mean(terms);
}

bool sync_target(const ValueNet& value, ValueNet& target, std::size_t step, std::size_t period) {
  if (period == 0) throw ContractError("sync_target: period must be at least 1");
  if (step % period != 0) return false;
  target.copy_from(value);
  return true;
}

nlohmann::json to_json(const StepRecord& r) {
  return {{"step", r.step},
          {"updated", r.losses.updated},
          {"imitation", r.losses.imitation},
          {"reinforce", r.losses.reinforce},
          {"value", r.losses.value},
          {"mean_reward", r.mean_reward}};
}

BaselineWiring baseline_wiring(AgentKind kind, const LossWeights& configured) {
  BaselineWiring w;
  w.weights = configured;
  switch (kind) {
    case AgentKind::kJoint:
      break;
    case AgentKind::kImitationOnly:
      w.weights.reinforce = 0.0;
      w.weights.value = 0.0;
      w.bypass_controller = true;
      w.explore = false;
      break;
    case AgentKind::kReinforceOnly:
      w.weights.imitation = 0.0;
      break;
  }
  return w;
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  Rng r(seed ^ salt);
  return r.next_u64();
}

}  // namespace

Trainer::Trainer(const ExperimentConfig& config)
    : config_(config),
      wiring_(baseline_wiring(config.train.agent, config.train.weights)),
      activity_(config.activity_config()),
      teacher_(config.vocabulary(), config.objects, activity_, FocusPolicy::kTraining),
      learner_(config.vocabulary(), config.dims(), derive_seed(config.seed, 0x1ea12e7)),
      value_(config.model.hidden, config.objects.size(), config.train.value_width,
             config.model.init_scale, config.train.value_input,
             derive_seed(config.seed, 0x7a1e)),
      target_(value_),
      optimizer_({}, config.train.lr, config.train.adagrad_eps),
      controller_optimizer_({}, config.train.controller_lr, config.train.adagrad_eps),
      replay_(config.train.replay_capacity),
      rng_(derive_seed(config.seed, 0x5e55)) {
  validate(config_);
  // the copy constructor shares tensors; the target needs its own storage
  target_ = ValueNet(config.model.hidden, config.objects.size(), config.train.value_width,
                     config.model.init_scale, config.train.value_input, 0);
  target_.copy_from(value_);
  sync_count_ = 1;
  std::vector<Tensor> main, controller;
  for (auto& [_, t] : learner_.language_parameters()) main.push_back(t);
  for (auto& [_, t] : value_.parameters()) main.push_back(t);
  for (auto& [_, t] : learner_.controller_parameters()) controller.push_back(t);
  optimizer_ = ad::Adagrad(std::move(main), config.train.lr, config.train.adagrad_eps);
  controller_optimizer_ =
      ad::Adagrad(std::move(controller), config.train.controller_lr, config.train.adagrad_eps);
}

std::vector<NamedTensor> Trainer::named_parameters() const {
  std::vector<NamedTensor> out = learner_.parameters();
  for (auto& [name, t] : value_.parameters()) out.emplace_back("value." + name, t);
  return out;
}

std::vector<NamedTensor> Trainer::named_accumulators() const {
  std::vector<NamedTensor> out;
  for (const auto& [name, param] : named_parameters()) {
    for (const ad::Adagrad* opt : {&optimizer_, &controller_optimizer_}) {
      const auto& params = opt->params();
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].same_node(param)) out.emplace_back("adagrad." + name, opt->accumulators()[i]);
      }
    }
  }
  return out;
}

std::vector<NamedTensor> Trainer::named_target() const {
  std::vector<NamedTensor> out;
  for (auto& [name, t] : target_.parameters()) out.emplace_back("target." + name, t);
  return out;
}

std::vector<Transition> Trainer::play_session(double& mean_reward) {
  NoGradScope no_grad;
  const WorldState world = sample_world(config_.objects.size(), rng_);
  const Scene scene = render_scene(world, config_.objects.size());
  AgentState state = learner_.initial_state();
  std::vector<Transition> out;
  double total = 0.0;
  for (std::size_t step = 0; step < config_.session_steps; ++step) {
    const TeacherTurn turn = teacher_.generate(world, rng_);
    Transition t;
    t.world = world;
    t.question = turn.utterance;
    t.h_prev.assign(state.h_last.values().begin(), state.h_last.values().end());
    t.step_index = step;
    t.terminal = step + 1 == config_.session_steps;
    if (!out.empty()) {
      out.back().next_question = t.question;
      out.back().next_h_prev = t.h_prev;
    }
    const AgentState cur = learner_.encode(turn.utterance, state, scene);
    const Response r = learner_.respond(cur, scene, wiring_.explore, rng_, config_.beam_width,
                                        config_.max_len, wiring_.bypass_controller);
    t.k.assign(r.control.sample.values().begin(), r.control.sample.values().end());
    const Feedback fb = teacher_.respond(world, turn, r.decoded.utterance, rng_);
    t.feedback = fb.sentence;
    t.reward = fb.reward;
    total += fb.reward;
    state = learner_.encode(fb.sentence, cur, scene);
    out.push_back(std::move(t));
  }
  mean_reward = total / static_cast<double>(config_.session_steps);
  return out;
}

LossBreakdown Trainer::update(std::span<const Transition> batch,
                              std::span<const Transition> fresh) {
  const TrainConfig& tc = config_.train;
  optimizer_.zero_grad();
  controller_optimizer_.zero_grad();
  Tape tape;
  LossBreakdown losses;
  {
    TapeScope scope(tape);
    std::vector<Tensor> imitation, reinforce, value;
    for (const Transition& t : batch) {
      const Scene scene = render_scene(t.world, config_.objects.size());
      // predicting the turn yields the encoded state as a by-product
      const SentencePass q = learner_.teacher_forced(t.question, AgentState{constant(t.h_prev)}, scene);
      const SentencePass f = learner_.teacher_forced(t.feedback, q.final_state, scene);
      imitation.push_back(q.log_prob);
      imitation.push_back(f.log_prob);

      const Tensor v_cur = value_.forward(q.final_state.h_last, scene);
      const double v_next = target_next_value(learner_, target_, t, scene);
      if (tc.replay_reinforce) {
        const ControlSample control = learner_.control_for(q.final_state, constant(t.k));
        const double delta = td_error(t.reward, t.terminal, tc.gamma, v_next, v_cur.item());
        reinforce.push_back(scalar_mul(control.log_prob, -delta));
      }
      const double y = t.reward + (t.terminal ? 0.0 : tc.lambda * v_next);
      value.push_back(square(subtract(Tensor::scalar(y), v_cur)));
    }
    const Tensor li = scalar_mul(batch_mean(imitation), -1.0);
    const Tensor lr = tc.replay_reinforce ? batch_mean(reinforce)
                                          : reinforce_loss(learner_, value_, target_, fresh, tc.gamma);
    const Tensor lv = batch_mean(value);
    losses.imitation = li.item();
    losses.reinforce = lr.item();
    losses.value = lv.item();
    const Tensor total = add(add(scalar_mul(li, wiring_.weights.imitation),
                                 scalar_mul(lr, wiring_.weights.reinforce)),
                             scalar_mul(lv, wiring_.weights.value));
    tape.backward(total);
  }
  optimizer_.step();
  controller_optimizer_.step();
  losses.updated = true;
  return losses;
}

StepRecord Trainer::train_step() {
  StepRecord record;
  const std::vector<Transition> fresh = play_session(record.mean_reward);
  replay_.push(fresh);
  ++sessions_;
  record.step = sessions_;
  if (replay_.size() >= config_.train.batch_size) {
    const std::vector<Transition> batch = replay_.sample(config_.train.batch_size, rng_);
    record.losses = update(batch, fresh);
    ++updates_;
    if (sync_target(value_, target_, updates_, config_.train.target_sync_period)) ++sync_count_;
  }
  return record;
}

void Trainer::train(std::ostream* metrics, std::size_t max_sessions) {
  const std::size_t every = config_.train.checkpoint_every;
  while (sessions_ < max_sessions) {
    const StepRecord record = train_step();
    if (metrics) *metrics << to_json(record).dump() << '\n' << std::flush;
    if (every > 0 && !config_.checkpoint_dir.empty() &&
        (sessions_ % every == 0 || sessions_ == max_sessions)) {
      save(config_.checkpoint_dir / "latest.ckpt");
    }
  }
}

namespace {

nlohmann::json tokens_json(const Utterance& u) { return u.tokens; }

Utterance tokens_from(const Vocabulary& vocab, const nlohmann::json& j) {
  return Utterance::from_ids(vocab, j.get<std::vector<TokenId>>());
}

Blob to_blob(const std::string& name, const Tensor& t) {
  return Blob{name, t.shape(), {t.values().begin(), t.values().end()}};
}

void restore_tensor(const CheckpointContents& c, const std::string& name, Tensor& t) {
  const Blob& b = c.blob(name);
  if (b.shape != t.shape()) {
    throw CheckpointError("tensor '" + name + "' has shape " + ad::shape_string(b.shape) +
                          " in the checkpoint but " + ad::shape_string(t.shape()) +
                          " in the configured model");
  }
  std::copy(b.values.begin(), b.values.end(), t.mutable_values().begin());
}

}  // namespace

void Trainer::save(const std::filesystem::path& path) const {
  CheckpointContents c;
  c.meta = {{"config", to_json(config_)},
            {"sessions", sessions_},
            {"updates", updates_},
            {"sync_count", sync_count_},
            {"rng", rng_.state()}};
  for (const auto& [name, t] : named_parameters()) c.blobs.push_back(to_blob(name, t));
  for (const auto& [name, t] : named_accumulators()) c.blobs.push_back(to_blob(name, t));
  for (const auto& [name, t] : named_target()) c.blobs.push_back(to_blob(name, t));

  const std::size_t H = config_.model.hidden;
  nlohmann::json replay = nlohmann::json::array();
  Blob h_prev{"replay.h_prev", {replay_.size(), H}, {}};
  Blob k{"replay.k", {replay_.size(), H}, {}};
  Blob next_h{"replay.next_h_prev", {replay_.size(), H}, {}};
  for (const Transition& t : replay_.items()) {
    replay.push_back({{"world", t.world.placement},
                      {"episode_seed", t.world.episode_seed},
                      {"question", tokens_json(t.question)},
                      {"feedback", tokens_json(t.feedback)},
                      {"reward", t.reward},
                      {"step_index", t.step_index},
                      {"terminal", t.terminal},
                      {"next_question", tokens_json(t.next_question)}});
    h_prev.values.insert(h_prev.values.end(), t.h_prev.begin(), t.h_prev.end());
    k.values.insert(k.values.end(), t.k.begin(), t.k.end());
    if (t.terminal) {
      next_h.values.insert(next_h.values.end(), H, 0.0);
    } else {
      next_h.values.insert(next_h.values.end(), t.next_h_prev.begin(), t.next_h_prev.end());
    }
  }
  c.meta["replay"] = std::move(replay);
  c.blobs.push_back(std::move(h_prev));
  c.blobs.push_back(std::move(k));
  c.blobs.push_back(std::move(next_h));
  write_checkpoint(path, c);
}

void Trainer::load(const std::filesystem::path& path) {
  const CheckpointContents c = read_checkpoint(path);
  ExperimentConfig saved;
  try {
    saved = config_from_json(c.meta.at("config"));
  } catch (const std::exception& e) {
    throw CheckpointError(path.string() + ": embedded config unreadable: " + e.what());
  }
  if (saved.objects != config_.objects || !(saved.dims() == config_.dims()) ||
      saved.train.value_width != config_.train.value_width ||
      saved.train.value_input != config_.train.value_input) {
    throw CheckpointError(path.string() +
                          ": checkpoint was written for a different model shape or lexicon");
  }
  auto restore_all = [&](const std::vector<NamedTensor>& named) {
    for (auto [name, t] : named) restore_tensor(c, name, t);
  };
  restore_all(named_parameters());
  restore_all(named_accumulators());
  restore_all(named_target());

  const std::size_t H = config_.model.hidden;
  const auto& records = c.meta.at("replay");
  const Blob& h_prev = c.blob("replay.h_prev");
  const Blob& k = c.blob("replay.k");
  const Blob& next_h = c.blob("replay.next_h_prev");
  const Vocabulary& vocab = learner_.vocabulary();
  ReplayBuffer replay(config_.train.replay_capacity);
  std::vector<Transition> items;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    Transition t;
    t.world.placement = r.at("world").get<std::array<ObjectId, 4>>();
    t.world.episode_seed = r.at("episode_seed").get<std::uint64_t>();
    t.question = tokens_from(vocab, r.at("question"));
    t.feedback = tokens_from(vocab, r.at("feedback"));
    t.reward = r.at("reward").get<double>();
    t.step_index = r.at("step_index").get<std::size_t>();
    t.terminal = r.at("terminal").get<bool>();
    const auto slice = [&](const Blob& b) {
      return std::vector<double>(b.values.begin() + static_cast<std::ptrdiff_t>(i * H),
                                 b.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * H));
    };
    t.h_prev = slice(h_prev);
    t.k = slice(k);
    if (!t.terminal) {
      t.next_question = tokens_from(vocab, r.at("next_question"));
      t.next_h_prev = slice(next_h);
    }
    items.push_back(std::move(t));
  }
  replay.push(items);
  replay_ = std::move(replay);
  sessions_ = c.meta.at("sessions").get<std::size_t>();
  updates_ = c.meta.at("updates").get<std::size_t>();
  sync_count_ = c.meta.at("sync_count").get<std::size_t>();
  rng_.restore(c.meta.at("rng").get<std::string>());
}

}  // namespace lingo
