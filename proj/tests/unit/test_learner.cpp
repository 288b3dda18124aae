#include <doctest.h>

#include <cmath>
#include <numbers>

#include "../support/cases.hpp"
#include "lingo/errors.hpp"
#include "lingo/learner.hpp"

using namespace lingo;
using namespace lingo::ad;
using lingo::testing::random_tensor;

namespace {

struct Model {
  ExperimentConfig config = testing::micro_config(3);
  Learner learner{config.vocabulary(), config.dims(), 3};
  Rng rng{17};
  Scene scene() { return render_scene(sample_world(config.objects.size(), rng), config.objects.size()); }
  Tensor state() { return random_tensor({config.model.hidden}, rng, 1.0); }
  Utterance say(const std::string& s) const { return Utterance::parse(learner.vocabulary(), s); }
};

double total(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v;
  return s;
}

bool same(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

}  // namespace

TEST_CASE("attention is a distribution over the nine cells") {
  Model m;
  for (int i = 0; i < 50; ++i) {
    const VisualAttention v = m.learner.visual_attend(m.scene(), m.state());
    CHECK(v.attention.shape() == Shape{9});
    CHECK(total(v.attention) == doctest::Approx(1.0).epsilon(1e-12));
    for (double a : v.attention.values()) CHECK(a >= 0.0);
    for (double g : v.gate.values()) CHECK((g > 0.0 && g < 1.0));
  }
  CHECK_THROWS_AS(m.learner.visual_attend(m.scene(), Tensor::vector({1, 2})), ShapeError);
}

TEST_CASE("a zero filter attends uniformly") {
  Model m;
  m.learner.zero_attention_filter();
  const VisualAttention v = m.learner.visual_attend(m.scene(), m.state());
  for (double a : v.attention.values()) CHECK(a == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("zero weights give a uniform word distribution") {
  Model m;
  m.learner.zero_all();
  const std::size_t V = m.learner.vocabulary().size();
  const Tensor p = m.learner.word_distribution(m.state(), m.scene(), m.state());
  for (double v : p.values()) CHECK(v == doctest::Approx(1.0 / V).epsilon(1e-12));
  const Utterance eos = Utterance::from_ids(m.learner.vocabulary(), {});
  CHECK(m.learner.sentence_log_prob(eos, m.learner.initial_state(), m.scene()).item() ==
        doctest::Approx(std::log(1.0 / V)).epsilon(1e-12));
}

TEST_CASE("word distribution sums to one") {
  Model m;
  for (int i = 0; i < 50; ++i) {
    const Tensor p = m.learner.word_distribution(m.state(), m.scene(), m.state());
    CHECK(std::abs(total(p) - 1.0) <= 1e-12);
  }
}

TEST_CASE("sentence log-probability factorizes over steps") {
  Model m;
  for (const char* text : {"where is apple", "on the north is banana", ".", "yes"}) {
    const Scene scene = m.scene();
    const Tensor h0 = m.state();
    const Utterance u = m.say(text);
    const double logp = m.learner.sentence_log_prob(u, AgentState{h0}, scene).item();
    CHECK(logp <= 0.0);
    // teacher forcing from h0 walks the same path as the decoder from k = h0
    double product = 1.0;
    std::vector<TokenId> prefix;
    for (TokenId t : u.tokens) {
      product *= std::exp(testing::oracle_next_log_probs(m.learner, scene, h0, prefix)[t]);
      prefix.push_back(t);
    }
    CHECK(std::exp(logp) == doctest::Approx(product).epsilon(1e-10));
  }
  Utterance open = m.say("where is apple");
  open.tokens.pop_back();
  CHECK_THROWS_AS(m.learner.sentence_log_prob(open, m.learner.initial_state(), m.scene()),
                  ContractError);
}

TEST_CASE("encoding is pure and history sensitive") {
  Model m;
  const Scene scene = m.scene();
  const Utterance dot = m.say(".");
  const AgentState zero = m.learner.initial_state();
  for (double v : zero.h_last.values()) CHECK(v == 0.0);
  const AgentState a = m.learner.encode(dot, zero, scene);
  const AgentState b = m.learner.encode(dot, zero, scene);
  CHECK(same(a.h_last, b.h_last));
  CHECK_FALSE(same(a.h_last, zero.h_last));
  const AgentState carried = m.learner.encode(dot, a, scene);
  CHECK_FALSE(same(carried.h_last, a.h_last));
}

TEST_CASE("gaussian log-probability") {
  const Tensor one = Tensor::vector({1.0});
  const Tensor zero = Tensor::vector({0.0});
  CHECK(gaussian_log_prob(zero, zero, one).item() == doctest::Approx(-kHalfLog2Pi).epsilon(1e-12));
  CHECK(gaussian_log_prob(one, zero, one).item() ==
        doctest::Approx(-0.5 - kHalfLog2Pi).epsilon(1e-12));
  CHECK_THROWS_AS(gaussian_log_prob(zero, zero, zero), DomainError);
  CHECK_THROWS_AS(gaussian_log_prob(zero, zero, Tensor::vector({-1.0})), DomainError);

  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const Tensor k = random_tensor({4}, rng);
    const Tensor c = random_tensor({4}, rng);
    Tensor s = random_tensor({4}, rng);
    for (double& v : s.mutable_values()) v = 0.3 + std::abs(v);
    const double err = finite_diff_check(
        [&](const Tensor& x) { return gaussian_log_prob(k, x, s); }, c, 1e-5);
    CHECK(err <= 1e-6);
  }
}

TEST_CASE("control without exploration") {
  Model m;
  const AgentState s{m.state()};
  m.learner.zero_residual();
  const ControlSample c = m.learner.control(s, false, m.rng);
  CHECK(same(c.sample, s.h_last));
  CHECK(same(c.mean, s.h_last));
  double expected = 0.0;
  for (double sd : c.std.values()) expected -= kHalfLog2Pi + std::log(sd);
  CHECK(c.log_prob.item() == doctest::Approx(expected).epsilon(1e-12));
  for (double sd : c.std.values()) CHECK(sd >= m.config.model.min_std);
}

TEST_CASE("sampled controls centre on the mean") {
  testing::MicroSetup setup = testing::micro_setup(5);
  Rng rng(6);
  const AgentState s{random_tensor({setup.config.model.hidden}, rng)};
  const ControlSample ref = setup.learner.control(s, false, rng);
  const std::size_t n = 10000, H = setup.config.model.hidden;
  std::vector<double> mean(H, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const ControlSample c = setup.learner.control(s, true, rng);
    for (std::size_t j = 0; j < H; ++j) mean[j] += c.sample[j] / n;
  }
  for (std::size_t j = 0; j < H; ++j) {
    CHECK(std::abs(mean[j] - ref.mean[j]) <= 4.0 * ref.std[j] / std::sqrt(double(n)));
  }
}

TEST_CASE("decoded sentences are terminated and bounded") {
  Model m;
  for (std::size_t len : {1u, 3u, 8u}) {
    for (std::size_t beam : {1u, 2u, 5u}) {
      const DecodeResult d = m.learner.decode(m.state(), m.scene(), beam, len);
      CHECK(d.utterance.tokens.back() == m.learner.vocabulary().eos());
      CHECK(d.utterance.tokens.size() <= len + 1);
      for (TokenId t : d.utterance.tokens) CHECK(m.learner.vocabulary().generatable(t));
    }
  }
  CHECK_THROWS_AS(m.learner.decode(m.state(), m.scene(), 0, 3), ContractError);
  CHECK_THROWS_AS(m.learner.decode(m.state(), m.scene(), 1, 0), ContractError);
}

TEST_CASE("a beam of one is greedy decoding") {
  Model m;
  for (int i = 0; i < 200; ++i) {
    const Tensor k = m.state();
    const Scene scene = m.scene();
    const auto expected = testing::oracle_greedy(m.learner, scene, k, 6);
    CHECK(m.learner.decode(k, scene, 1, 6).utterance.tokens == expected);
    CHECK(m.learner.greedy_decode(k, scene, 6).utterance.tokens == expected);
  }
}

TEST_CASE("an exhaustive beam finds the best sequence") {
  ExperimentConfig c = testing::micro_config(8);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Learner learner(testing::micro_vocabulary(), c.dims(), seed);
    Rng rng(seed);
    const Scene scene = render_scene(sample_world(4, rng), 4);
    const Tensor k = random_tensor({c.model.hidden}, rng, 2.0);
    const testing::ScoredSequence best = testing::oracle_exhaustive(learner, scene, k, 2);
    const DecodeResult d = learner.decode(k, scene, 9, 2);
    CHECK(d.utterance.tokens == best.tokens);
    CHECK(d.score == doctest::Approx(best.score).epsilon(1e-12));
  }
}

TEST_CASE("encoder and decoder share one cell") {
  Model m;
  CHECK(&m.learner.encoder_cell() == &m.learner.action_cell());
  const Scene scene = m.scene();
  const Tensor k = m.state();
  const auto before = testing::oracle_next_log_probs(m.learner, scene, k, {});
  const AgentState enc_before = m.learner.encode(m.say("."), AgentState{k}, scene);
  Tensor w = m.learner.encoder_cell().w_n;  // handle onto the shared weights
  for (double& v : w.mutable_values()) v += 0.3;
  const auto after = testing::oracle_next_log_probs(m.learner, scene, k, {});
  const AgentState enc_after = m.learner.encode(m.say("."), AgentState{k}, scene);
  CHECK(before != after);
  CHECK_FALSE(same(enc_before.h_last, enc_after.h_last));
}

TEST_CASE("an identity controller reproduces the imitation decoder") {
  Model m;
  m.learner.zero_residual();
  for (int i = 0; i < 20; ++i) {
    const AgentState s{m.state()};
    const Scene scene = m.scene();
    const Response via = m.learner.respond(s, scene, false, m.rng, 3, 6, false);
    const Response direct = m.learner.respond(s, scene, false, m.rng, 3, 6, true);
    CHECK(via.decoded.utterance == direct.decoded.utterance);
    CHECK(via.decoded.score == direct.decoded.score);
  }
}

TEST_CASE("responses without exploration are deterministic") {
  Model m;
  const AgentState s{m.state()};
  const Scene scene = m.scene();
  Rng a(1), b(2);
  CHECK(m.learner.respond(s, scene, false, a, 3, 8).decoded.utterance ==
        m.learner.respond(s, scene, false, b, 3, 8).decoded.utterance);
}

TEST_CASE("word distribution cross-entropy matches finite differences") {
  Model m;
  for (int i = 0; i < 10; ++i) {
    const Scene scene = m.scene();
    const Tensor h = m.state(), h0 = m.state();
    const TokenId target = m.rng.uniform_index(m.learner.vocabulary().size());
    std::vector<Tensor> params = testing::tensors_of(m.learner.language_parameters());
    const double err = finite_diff_check(
        [&] {
          const Tensor p = m.learner.word_distribution(h, scene, h0);
          return negate(log(embedding_lookup(reshape(p, {p.size(), 1}), target)));
        },
        params, 1e-5);
    CHECK(err <= 1e-5);
  }
}

TEST_CASE("the value net reads the state without sending gradient into it") {
  ValueNet v(5, 4, 3, 0.5, ValueInput::kStateAndScene, 1);
  Rng rng(2);
  const Scene scene = render_scene(sample_world(4, rng), 4);
  Tensor h = random_tensor({5}, rng);
  h.set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(v.forward(h, scene));
  }
  for (double g : h.grad()) CHECK(g == 0.0);
  ValueNet scene_only(5, 4, 3, 0.5, ValueInput::kSceneOnly, 1);
  CHECK(scene_only.forward(h, scene).shape() == Shape{1});
}
