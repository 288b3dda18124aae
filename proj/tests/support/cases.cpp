#include "cases.hpp"

#include <cmath>
#include <functional>
#include <optional>

namespace lingo::testing {

using namespace lingo::ad;

Tensor random_tensor(const Shape& shape, Rng& rng, double scale, double gap) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) {
    do {
      x = rng.uniform(-scale, scale);
    } while (std::abs(x) < gap);
  }
  return Tensor(shape, std::move(v));
}

std::vector<Tensor> tensors_of(const std::vector<NamedTensor>& named) {
  std::vector<Tensor> out;
  for (const auto& [_, t] : named) out.push_back(t);
  return out;
}

double primitive_fd_error(Primitive op, std::uint64_t seed, double h) {
  Rng rng(seed);
  auto dim = [&] { return 1 + rng.uniform_index(4); };
  std::vector<Tensor> inputs;
  PrimitiveArgs args;
  switch (op) {
    case Primitive::kMatmul: {
      const std::size_t m = dim(), k = dim(), n = dim();
      inputs.push_back(random_tensor({m, k}, rng));
      inputs.push_back(rng.bernoulli(0.5) ? random_tensor({k}, rng) : random_tensor({k, n}, rng));
      break;
    }
    case Primitive::kAdd:
    case Primitive::kHadamard: {
      const Shape s = {dim(), dim()};
      inputs.push_back(random_tensor(s, rng));
      inputs.push_back(random_tensor(s, rng));
      break;
    }
    case Primitive::kScalarMul:
      args.scalar = rng.uniform(-3.0, 3.0);
      inputs.push_back(random_tensor({dim(), dim()}, rng));
      break;
    case Primitive::kRelu:
      inputs.push_back(random_tensor({dim(), dim()}, rng, 1.0, 0.01));
      break;
    case Primitive::kTanh:
    case Primitive::kSigmoid:
    case Primitive::kSquare:
    case Primitive::kNegate:
      inputs.push_back(random_tensor({dim(), dim()}, rng, 2.0));
      break;
    case Primitive::kSoftmax:
    case Primitive::kLogSoftmax:
    case Primitive::kSum:
    case Primitive::kMean: {
      const Shape s = {dim(), dim(), dim()};
      args.axis = rng.uniform_index(3);
      inputs.push_back(random_tensor(s, rng, 2.0));
      break;
    }
    case Primitive::kEmbeddingLookup: {
      const std::size_t V = 2 + rng.uniform_index(5), E = dim(), n = dim();
      inputs.push_back(random_tensor({V, E}, rng));
      // repeated ids exercise gradient accumulation into one row
      for (std::size_t i = 0; i < n; ++i) args.indices.push_back(rng.uniform_index(V));
      break;
    }
    case Primitive::kConcat: {
      args.axis = rng.uniform_index(2);
      const std::size_t parts = 1 + rng.uniform_index(3);
      const std::size_t rows = dim(), cols = dim();
      for (std::size_t i = 0; i < parts; ++i) {
        inputs.push_back(args.axis == 0 ? random_tensor({dim(), cols}, rng)
                                        : random_tensor({rows, dim()}, rng));
      }
      break;
    }
    case Primitive::kSpatialConv: {
      const std::size_t C = dim(), O = dim(), k = rng.bernoulli(0.5) ? 1 : 3;
      inputs.push_back(random_tensor({C, 3, 3}, rng));
      inputs.push_back(random_tensor({O, C, k, k}, rng));
      break;
    }
    case Primitive::kLog:
    case Primitive::kReciprocal: {
      Tensor x = random_tensor({dim(), dim()}, rng);
      for (double& v : x.mutable_values()) v = 0.5 + std::abs(v);
      inputs.push_back(x);
      break;
    }
    case Primitive::kReshape: {
      const std::size_t a = dim(), b = dim();
      inputs.push_back(random_tensor({a, b}, rng));
      args.shape = {b, a};
      break;
    }
  }
  // a random linear read-out makes every output coordinate matter
  Tensor readout;
  auto loss = [&]() {
    const Tensor y = apply_primitive(op, inputs, args);
    const Tensor flat = reshape(y, {y.size()});
    if (!readout.defined()) {
      Rng r(seed ^ 0xfeedULL);
      readout = random_tensor({y.size()}, r);
    }
    return sum(hadamard(flat, readout));
  };
  return finite_diff_check(loss, inputs, h);
}

ExperimentConfig micro_config(std::uint64_t seed) {
  ExperimentConfig c;
  c.seed = seed;
  c.objects = {"apple", "banana", "cherry", "orange"};
  c.model.hidden = 5;
  c.model.embed = 3;
  c.model.object_features = 3;
  c.model.direction_maps = 2;
  c.model.controller_hidden = 4;
  c.model.init_scale = 0.5;
  c.train.value_width = 4;
  c.train.batch_size = 2;
  c.checkpoint_dir = "";
  return c;
}

MicroSetup micro_setup(std::uint64_t seed, std::size_t batch_size) {
  const ExperimentConfig c = micro_config(seed);
  Rng rng(seed * 7919 + 1);
  MicroSetup s{c,
               Learner(c.vocabulary(), c.dims(), seed),
               ValueNet(c.model.hidden, c.objects.size(), c.train.value_width, 0.5,
                        ValueInput::kStateAndScene, seed + 1),
               ValueNet(c.model.hidden, c.objects.size(), c.train.value_width, 0.5,
                        ValueInput::kStateAndScene, seed + 2),
               {},
               {}};
  // random controller weights so every path carries gradient; nonzero std
  // biases keep samples comfortably away from the relu kink
  for (auto& [name, t] : s.learner.controller_parameters()) {
    if (name == "ctrl.std_b") {
      for (double& v : t.mutable_values()) v = 0.2 + 0.1 * rng.uniform01();
    } else if (name == "ctrl.tau_w2") {
      for (double& v : t.mutable_values()) v = rng.uniform(-0.5, 0.5);
    } else if (name == "ctrl.std_w") {
      for (double& v : t.mutable_values()) v = rng.uniform(-0.05, 0.05);
    }
  }
  const Teacher teacher(c.vocabulary(), c.objects);
  NoGradScope no_grad;
  for (std::size_t i = 0; i < batch_size; ++i) {
    Transition t;
    t.world = sample_world(c.objects.size(), rng);
    const Scene scene = render_scene(t.world, c.objects.size());
    const TeacherTurn turn = teacher.generate(t.world, rng);
    const Tensor h_prev = random_tensor({c.model.hidden}, rng, 0.5);
    t.question = turn.utterance;
    t.h_prev.assign(h_prev.values().begin(), h_prev.values().end());
    const AgentState cur = s.learner.encode(t.question, AgentState{h_prev}, scene);
    const ControlSample control = s.learner.control(cur, true, rng);
    t.k.assign(control.sample.values().begin(), control.sample.values().end());
    const Response r = s.learner.respond(cur, scene, false, rng, 2, 4);
    const Feedback fb = teacher.respond(t.world, turn, r.decoded.utterance, rng);
    t.feedback = fb.sentence;
    t.reward = fb.reward;
    t.step_index = i % 3;
    t.terminal = rng.bernoulli(0.3);
    if (!t.terminal) {
      t.next_question = teacher.generate(t.world, rng).utterance;
      const Tensor next = random_tensor({c.model.hidden}, rng, 0.5);
      t.next_h_prev.assign(next.values().begin(), next.values().end());
    }
    s.imitation.push_back(ImitationItem{t.question, h_prev, scene});
    s.imitation.push_back(ImitationItem{t.feedback, cur.h_last, scene});
    s.batch.push_back(std::move(t));
  }
  return s;
}

double composite_fd_error(Composite which, std::uint64_t seed, double h) {
  MicroSetup s = micro_setup(seed, 2);
  const double gamma = s.config.train.gamma, lambda = s.config.train.lambda;
  std::vector<Tensor> params;
  std::function<Tensor()> loss;
  switch (which) {
    case Composite::kImitation:
      params = tensors_of(s.learner.language_parameters());
      loss = [&] { return imitation_loss(s.learner, s.imitation); };
      break;
    case Composite::kReinforce:
      params = tensors_of(s.learner.controller_parameters());
      loss = [&] { return reinforce_loss(s.learner, s.value, s.target, s.batch, gamma); };
      break;
    case Composite::kValue:
      params = tensors_of(s.value.parameters());
      loss = [&] { return value_loss(s.learner, s.value, s.target, s.batch, lambda); };
      break;
  }
  return finite_diff_check(loss, params, h);
}

std::vector<double> oracle_next_log_probs(const Learner& learner, const Scene& scene,
                                          const Tensor& k, const std::vector<TokenId>& prefix) {
  NoGradScope no_grad;
  const Vocabulary& vocab = learner.vocabulary();
  const VisualAttention vis = learner.visual_attend(scene, k);
  Tensor h = k;
  std::vector<TokenId> inputs{vocab.bos()};
  inputs.insert(inputs.end(), prefix.begin(), prefix.end());
  for (TokenId t : inputs) {
    h = learner.action_cell().step(concat({embedding_lookup(learner.embedding(), t), vis.features}), h);
  }
  const Tensor p = learner.word_distribution(h, scene, k);
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(p[i]);
  return out;
}

std::vector<TokenId> oracle_greedy(const Learner& learner, const Scene& scene, const Tensor& k,
                                   std::size_t max_len) {
  const Vocabulary& vocab = learner.vocabulary();
  std::vector<TokenId> tokens;
  while (tokens.size() < max_len) {
    const std::vector<double> logp = oracle_next_log_probs(learner, scene, k, tokens);
    std::optional<TokenId> best;
    for (TokenId t = 0; t < logp.size(); ++t) {
      if (vocab.generatable(t) && (!best || logp[t] > logp[*best])) best = t;
    }
    tokens.push_back(*best);
    if (*best == vocab.eos()) return tokens;
  }
  tokens.push_back(vocab.eos());
  return tokens;
}

ScoredSequence oracle_exhaustive(const Learner& learner, const Scene& scene, const Tensor& k,
                                 std::size_t max_len) {
  const Vocabulary& vocab = learner.vocabulary();
  std::optional<ScoredSequence> best;
  auto offer = [&](std::vector<TokenId> tokens, double score) {
    if (!best || score > best->score || (score == best->score && tokens < best->tokens)) {
      best = ScoredSequence{std::move(tokens), score};
    }
  };
  // depth-first over every prefix
  std::function<void(std::vector<TokenId>&, double)> visit = [&](std::vector<TokenId>& prefix,
                                                                 double score) {
    if (prefix.size() == max_len) {
      std::vector<TokenId> cut = prefix;
      cut.push_back(vocab.eos());
      offer(std::move(cut), score);
      return;
    }
    const std::vector<double> logp = oracle_next_log_probs(learner, scene, k, prefix);
    for (TokenId t = 0; t < logp.size(); ++t) {
      if (!vocab.generatable(t)) continue;
      prefix.push_back(t);
      if (t == vocab.eos()) {
        offer(prefix, score + logp[t]);
      } else {
        visit(prefix, score + logp[t]);
      }
      prefix.pop_back();
    }
  };
  std::vector<TokenId> root;
  visit(root, 0.0);
  return *best;
}

Vocabulary micro_vocabulary() {
  return Vocabulary({std::string(kPadToken), std::string(kBosToken), std::string(kEosToken), "a", "b"});
}

}  // namespace lingo::testing
