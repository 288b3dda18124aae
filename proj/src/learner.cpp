#include "lingo/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lingo/errors.hpp"

namespace lingo {

using namespace ad;

namespace {

Tensor zeros(Shape shape) { return build_tensor(shape, Zeros{}, true); }

Tensor linear(const Tensor& w, const Tensor& x, const Tensor& b) { return add(matmul(w, x), b); }

void set_all(const Tensor& t, double value) {
  Tensor copy = t;
  for (double& v : copy.mutable_values()) v = value;
}

}  // namespace

Tensor GruCell::step(const Tensor& x, const Tensor& h) const {
  const Tensor z = sigmoid(add(add(matmul(w_z, x), matmul(u_z, h)), b_z));
  const Tensor r = sigmoid(add(add(matmul(w_r, x), matmul(u_r, h)), b_r));
  const Tensor n = tanh(add(add(matmul(w_n, x), matmul(u_n, hadamard(r, h))), b_n));
  // (1 - z) * n + z * h
  return add(n, hadamard(z, subtract(h, n)));
}

void GruCell::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.emplace_back(prefix + "w_z", w_z);
  out.emplace_back(prefix + "u_z", u_z);
  out.emplace_back(prefix + "b_z", b_z);
  out.emplace_back(prefix + "w_r", w_r);
  out.emplace_back(prefix + "u_r", u_r);
  out.emplace_back(prefix + "b_r", b_r);
  out.emplace_back(prefix + "w_n", w_n);
  out.emplace_back(prefix + "u_n", u_n);
  out.emplace_back(prefix + "b_n", b_n);
}

Tensor gaussian_log_prob(const Tensor& k, const Tensor& c, const Tensor& std) {
  if (k.shape() != c.shape() || std.shape() != c.shape()) {
    throw ShapeError("gaussian_log_prob: shapes " + shape_string(k.shape()) + ", " +
                     shape_string(c.shape()) + ", " + shape_string(std.shape()) + " differ");
  }
  for (double s : std.values()) {
    if (!(s > 0.0)) throw DomainError("gaussian_log_prob: standard deviation must be positive");
  }
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const Tensor quad = scalar_mul(hadamard(square(subtract(k, c)), reciprocal(square(std))), 0.5);
  const Tensor per_dim = add(quad, log(std));
  const Tensor total = add(sum(per_dim), Tensor::scalar(half_log_2pi * static_cast<double>(c.size())));
  return negate(total);
}

Learner::Learner(Vocabulary vocab, ModelDims dims, std::uint64_t seed)
    : vocab_(std::move(vocab)), dims_(dims) {
  if (dims_.attention_kernel % 2 == 0) throw ConfigError("attention_kernel must be odd");
  Rng rng(seed);
  const double s = dims_.init_scale;
  const std::size_t H = dims_.hidden, I = dims_.rnn_input(), V = vocab_.size();
  const std::size_t F = dims_.object_features, D = dims_.direction_maps, K = dims_.attention_kernel;

  embedding_ = uniform_tensor({V, dims_.embed}, s, rng);
  for (auto* gate : {&cell_.w_z, &cell_.w_r, &cell_.w_n}) *gate = uniform_tensor({H, I}, s, rng);
  for (auto* gate : {&cell_.u_z, &cell_.u_r, &cell_.u_n}) *gate = uniform_tensor({H, H}, s, rng);
  for (auto* bias : {&cell_.b_z, &cell_.b_r, &cell_.b_n}) *bias = zeros({H});

  object_embedding_ = uniform_tensor({F, dims_.num_objects, 1, 1}, s, rng);
  direction_maps_ = uniform_tensor({D, kGridSide, kGridSide}, s, rng);
  filter_w_ = uniform_tensor({(F + D) * K * K, H}, s, rng);
  filter_b_ = zeros({(F + D) * K * K});
  gate_w_ = uniform_tensor({F + D, H}, s, rng);
  gate_b_ = zeros({F + D});

  out_w_h_ = uniform_tensor({V, H}, s, rng);
  out_w_v_ = uniform_tensor({V, F + D}, s, rng);
  out_b_ = zeros({V});

  tau_w1_ = uniform_tensor({dims_.controller_hidden, H}, s, rng);
  tau_b1_ = zeros({dims_.controller_hidden});
  tau_w2_ = zeros({H, dims_.controller_hidden});
  tau_b2_ = zeros({H});
  std_w_ = zeros({H, H});
  std_b_ = build_tensor({H}, Constant{dims_.init_std}, true);
}

AgentState Learner::initial_state() const {
  return AgentState{build_tensor({dims_.hidden}, Zeros{})};
}

VisualAttention Learner::visual_attend(const Scene& scene, const Tensor& h0) const {
  const std::size_t C = dims_.num_objects, FD = dims_.visual(), K = dims_.attention_kernel;
  if (scene.grid.shape() != Shape{C, kGridSide, kGridSide}) {
    throw ShapeError("visual_attend: scene " + shape_string(scene.grid.shape()) + " but model expects " +
                     shape_string({C, kGridSide, kGridSide}));
  }
  if (h0.shape() != Shape{dims_.hidden}) {
    throw ShapeError("visual_attend: state " + shape_string(h0.shape()) + " but hidden size is " +
                     std::to_string(dims_.hidden));
  }
  const Tensor objects = spatial_conv(scene.grid, object_embedding_);
  const Tensor combined = concat({objects, direction_maps_}, 0);
  const Tensor filter = reshape(linear(filter_w_, h0, filter_b_), {1, FD, K, K});
  const Tensor logits = reshape(spatial_conv(combined, filter), {kGridCells});
  VisualAttention out;
  out.attention = softmax(logits);
  const Tensor pooled = matmul(reshape(combined, {FD, kGridCells}), out.attention);
  out.gate = sigmoid(linear(gate_w_, h0, gate_b_));
  out.features = hadamard(out.gate, pooled);
  return out;
}

Tensor Learner::input_vector(TokenId token, const Tensor& visual) const {
  return concat({embedding_lookup(embedding_, token), visual});
}

Tensor Learner::word_logits(const Tensor& h, const Tensor& visual_projection) const {
  return add(matmul(out_w_h_, h), visual_projection);
}

Tensor Learner::word_distribution(const Tensor& h, const Scene& scene, const Tensor& h0) const {
  const VisualAttention vis = visual_attend(scene, h0);
  return softmax(word_logits(h, linear(out_w_v_, vis.features, out_b_)));
}

SentencePass Learner::teacher_forced(const Utterance& sentence, const AgentState& state_in,
                                     const Scene& scene) const {
  if (sentence.tokens.empty() || sentence.tokens.back() != vocab_.eos()) {
    throw ContractError("teacher_forced: sentence must end with <eos>");
  }
  for (TokenId t : sentence.tokens) {
    if (t >= vocab_.size()) throw VocabularyError("token id " + std::to_string(t) + " out of range");
  }
  SentencePass pass;
  pass.visual = visual_attend(scene, state_in.h_last);
  const Tensor projection = linear(out_w_v_, pass.visual.features, out_b_);
  const std::size_t V = vocab_.size();
  std::vector<Tensor> picks;
  picks.reserve(sentence.tokens.size());
  Tensor h = state_in.h_last;
  TokenId input = vocab_.bos();
  // the state that predicts <eos> is the one after the last content token
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    h = cell_.step(input_vector(input, pass.visual.features), h);
    const Tensor logp = log_softmax(word_logits(h, projection));
    picks.push_back(embedding_lookup(reshape(logp, {V, 1}), sentence.tokens[i]));
    input = sentence.tokens[i];
  }
  pass.final_state.h_last = h;
  pass.log_prob = sum(concat(std::span<const Tensor>(picks)));
  return pass;
}

AgentState Learner::encode(const Utterance& sentence, const AgentState& state_in,
                           const Scene& scene) const {
  const VisualAttention vis = visual_attend(scene, state_in.h_last);
  Tensor h = state_in.h_last;
  h = cell_.step(input_vector(vocab_.bos(), vis.features), h);
  for (TokenId t : sentence.tokens) {
    if (t >= vocab_.size()) throw VocabularyError("token id " + std::to_string(t) + " out of range");
    if (t == vocab_.eos()) break;
    h = cell_.step(input_vector(t, vis.features), h);
  }
  return AgentState{h};
}

Tensor Learner::sentence_log_prob(const Utterance& sentence, const AgentState& state_in,
                                  const Scene& scene) const {
  return teacher_forced(sentence, state_in, scene).log_prob;
}

ControlSample Learner::control_for(const AgentState& state, const Tensor& sample) const {
  const Tensor h = stop_gradient(state.h_last);
  const Tensor hidden = relu(linear(tau_w1_, h, tau_b1_));
  ControlSample out;
  out.mean = add(linear(tau_w2_, hidden, tau_b2_), h);
  out.std = add(relu(linear(std_w_, out.mean, std_b_)),
                build_tensor({dims_.hidden}, Constant{dims_.min_std}));
  out.sample = sample.defined() ? stop_gradient(sample) : stop_gradient(out.mean);
  out.log_prob = gaussian_log_prob(out.sample, out.mean, out.std);
  return out;
}

ControlSample Learner::control(const AgentState& state, bool explore, Rng& rng) const {
  ControlSample out = control_for(state, Tensor{});
  if (explore) {
    std::vector<double> k(out.mean.size());
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = out.mean[i] + out.std[i] * rng.normal();
    out.sample = Tensor(out.mean.shape(), std::move(k));
    out.log_prob = gaussian_log_prob(out.sample, out.mean, out.std);
  }
  return out;
}

namespace {

bool better(const BeamHypothesis& a, const BeamHypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

}  // namespace

DecodeResult Learner::decode(const Tensor& initial, const Scene& scene, std::size_t beam_width,
                             std::size_t max_len) const {
  if (beam_width < 1) throw ContractError("decode: beam_width must be >= 1");
  if (max_len < 1) throw ContractError("decode: max_len must be >= 1");
  NoGradScope no_grad;
  DecodeResult result;
  const Tensor k = stop_gradient(initial);
  result.visual = visual_attend(scene, k);
  const Tensor projection = linear(out_w_v_, result.visual.features, out_b_);
  const TokenId eos = vocab_.eos();

  std::vector<BeamHypothesis> beam{BeamHypothesis{{}, 0.0, false, k}};
  for (std::size_t step = 0; step < max_len; ++step) {
    std::vector<BeamHypothesis> pool;
    for (const BeamHypothesis& hyp : beam) {
      if (hyp.finished) {
        pool.push_back(hyp);
        continue;
      }
      const TokenId last = hyp.tokens.empty() ? vocab_.bos() : hyp.tokens.back();
      const Tensor h = cell_.step(input_vector(last, result.visual.features), hyp.state);
      const Tensor logp = log_softmax(word_logits(h, projection));
      for (TokenId t = 0; t < vocab_.size(); ++t) {
        if (!vocab_.generatable(t)) continue;
        BeamHypothesis next{hyp.tokens, hyp.score + logp[t], t == eos, h};
        next.tokens.push_back(t);
        pool.push_back(std::move(next));
      }
    }
    const std::size_t keep = std::min(beam_width, pool.size());
    std::partial_sort(pool.begin(), pool.begin() + static_cast<long>(keep), pool.end(), better);
    pool.resize(keep);
    beam = std::move(pool);
    if (std::all_of(beam.begin(), beam.end(), [](const auto& h) { return h.finished; })) break;
  }
  for (BeamHypothesis& hyp : beam) {
    if (!hyp.finished) {
      hyp.tokens.push_back(eos);
      hyp.finished = true;
    }
  }
  const auto best = std::min_element(beam.begin(), beam.end(), better);
  result.utterance = Utterance::from_ids(vocab_, best->tokens);
  result.score = best->score;
  return result;
}

DecodeResult Learner::greedy_decode(const Tensor& initial, const Scene& scene,
                                    std::size_t max_len) const {
  NoGradScope no_grad;
  DecodeResult result;
  Tensor h = stop_gradient(initial);
  result.visual = visual_attend(scene, h);
  const Tensor projection = linear(out_w_v_, result.visual.features, out_b_);
  std::vector<TokenId> tokens;
  TokenId last = vocab_.bos();
  for (std::size_t step = 0; step < max_len; ++step) {
    h = cell_.step(input_vector(last, result.visual.features), h);
    const Tensor logp = log_softmax(word_logits(h, projection));
    TokenId arg = vocab_.size();
    for (TokenId t = 0; t < vocab_.size(); ++t) {
      if (vocab_.generatable(t) && (arg == vocab_.size() || logp[t] > logp[arg])) arg = t;
    }
    result.score += logp[arg];
    tokens.push_back(arg);
    last = arg;
    if (arg == vocab_.eos()) break;
  }
  result.utterance = Utterance::from_ids(vocab_, std::move(tokens));
  return result;
}

Response Learner::respond(const AgentState& state, const Scene& scene, bool explore, Rng& rng,
                          std::size_t beam_width, std::size_t max_len,
                          bool bypass_controller) const {
  Response out;
  if (bypass_controller) {
    const Tensor h = stop_gradient(state.h_last);
    out.control = ControlSample{h, h, build_tensor(h.shape(), Constant{dims_.min_std}),
                                Tensor::scalar(0.0)};
  } else {
    out.control = control(state, explore, rng);
  }
  out.decoded = decode(out.control.sample, scene, beam_width, max_len);
  return out;
}

std::vector<NamedTensor> Learner::language_parameters() const {
  std::vector<NamedTensor> out;
  out.emplace_back("lm.embedding", embedding_);
  cell_.collect("lm.cell.", out);
  out.emplace_back("visual.object_embedding", object_embedding_);
  out.emplace_back("visual.direction_maps", direction_maps_);
  out.emplace_back("visual.filter_w", filter_w_);
  out.emplace_back("visual.filter_b", filter_b_);
  out.emplace_back("visual.gate_w", gate_w_);
  out.emplace_back("visual.gate_b", gate_b_);
  out.emplace_back("lm.out_w_h", out_w_h_);
  out.emplace_back("lm.out_w_v", out_w_v_);
  out.emplace_back("lm.out_b", out_b_);
  return out;
}

std::vector<NamedTensor> Learner::controller_parameters() const {
  return {{"ctrl.tau_w1", tau_w1_}, {"ctrl.tau_b1", tau_b1_}, {"ctrl.tau_w2", tau_w2_},
          {"ctrl.tau_b2", tau_b2_}, {"ctrl.std_w", std_w_},   {"ctrl.std_b", std_b_}};
}

std::vector<NamedTensor> Learner::parameters() const {
  auto out = language_parameters();
  for (auto& p : controller_parameters()) out.push_back(std::move(p));
  return out;
}

void Learner::zero_attention_filter() {
  set_all(filter_w_, 0.0);
  set_all(filter_b_, 0.0);
}

void Learner::zero_residual() {
  for (const Tensor& t : {tau_w1_, tau_b1_, tau_w2_, tau_b2_}) set_all(t, 0.0);
}

void Learner::zero_all() {
  for (const auto& [name, t] : parameters()) set_all(t, 0.0);
}

// ---------------------------------------------------------------------------

ValueNet::ValueNet(std::size_t hidden_state, std::size_t num_objects, std::size_t width,
                   double init_scale, ValueInput input, std::uint64_t seed)
    : input_(input) {
  Rng rng(seed);
  const std::size_t in = input == ValueInput::kStateAndScene ? hidden_state + num_objects : num_objects;
  w1_ = uniform_tensor({width, in}, init_scale, rng);
  b1_ = zeros({width});
  w2_ = uniform_tensor({1, width}, init_scale, rng);
  b2_ = zeros({1});
}

Tensor ValueNet::forward(const Tensor& h_last, const Scene& scene) const {
  const std::size_t C = scene.grid.dim(0);
  const Tensor pooled = stop_gradient(sum(reshape(scene.grid, {C, kGridCells}), 1));
  const Tensor x = input_ == ValueInput::kStateAndScene ? concat({stop_gradient(h_last), pooled})
                                                       : pooled;
  return linear(w2_, relu(linear(w1_, x, b1_)), b2_);
}

std::vector<NamedTensor> ValueNet::parameters() const {
  return {{"w1", w1_}, {"b1", b1_}, {"w2", w2_}, {"b2", b2_}};
}

void ValueNet::copy_from(const ValueNet& other) {
  if (other.input_ != input_) throw ContractError("ValueNet::copy_from: input kinds differ");
  const auto src = other.parameters();
  auto dst = parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i].second.assign(src[i].second);
}

}  // namespace lingo
