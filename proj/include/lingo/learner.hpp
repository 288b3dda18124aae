#pragma once

// The hierarchical-RNN learner: a visual encoder with spatial attention, a
// gated recurrent cell shared by the encoding and action passes, and a
// controller (residual transform plus Gaussian policy) that turns the
// dialogue state into the initial state of the action pass.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lingo/autodiff.hpp"
#include "lingo/rng.hpp"
#include "lingo/vocabulary.hpp"
#include "lingo/world.hpp"

namespace lingo {

using ad::Tensor;

struct ModelDims {
  std::size_t num_objects = 8;  // object channels of the scene
  std::size_t hidden = 64;
  std::size_t embed = 32;
  std::size_t object_features = 16;
  std::size_t direction_maps = 8;
  std::size_t attention_kernel = 1;  // odd side of the generated spatial filter
  std::size_t controller_hidden = 64;
  double init_scale = 0.08;
  double min_std = 0.01;
  double init_std = 0.1;  // std bias at initialization; tau starts as the identity

  std::size_t visual() const { return object_features + direction_maps; }
  std::size_t rnn_input() const { return embed + visual(); }
  bool operator==(const ModelDims&) const = default;
};

using NamedTensor = std::pair<std::string, Tensor>;

struct GruCell {
  Tensor w_z, u_z, b_z;
  Tensor w_r, u_r, b_r;
  Tensor w_n, u_n, b_n;

  Tensor step(const Tensor& x, const Tensor& h) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct VisualAttention {
  Tensor features;   // gated, attention-pooled vector [F_obj + D]
  Tensor attention;  // softmax over the 9 grid cells, row-major [9]
  Tensor gate;       // sigmoid mask [F_obj + D]
};

struct AgentState {
  Tensor h_last;  // [H]
};

struct ControlSample {
  Tensor mean;      // c = tau(h) + h
  Tensor sample;    // k; equals mean without exploration
  Tensor std;       // gamma(c) + min_std
  Tensor log_prob;  // scalar, log N(k; c, diag(std^2))
};

struct BeamHypothesis {
  std::vector<TokenId> tokens;  // generated tokens, no <bos>
  double score = 0.0;           // cumulative log-probability
  bool finished = false;        // last token is <eos>
  Tensor state;
};

struct DecodeResult {
  Utterance utterance;
  double score = 0.0;
  VisualAttention visual;  // attention used by the action pass
};

struct Response {
  DecodeResult decoded;
  ControlSample control;
};

struct SentencePass {
  AgentState final_state;  // state after the last content token
  Tensor log_prob;         // scalar, teacher-forced sum over positions
  VisualAttention visual;
};

// -sum_j [(k_j - c_j)^2 / (2 std_j^2) + ln std_j + ln(2 pi) / 2]
Tensor gaussian_log_prob(const Tensor& k, const Tensor& c, const Tensor& std);

class Learner {
 public:
  Learner(Vocabulary vocab, ModelDims dims, std::uint64_t seed);

  const ModelDims& dims() const { return dims_; }
  const Vocabulary& vocabulary() const { return vocab_; }

  AgentState initial_state() const;

  VisualAttention visual_attend(const Scene& scene, const Tensor& h0) const;

  AgentState encode(const Utterance& sentence, const AgentState& state_in, const Scene& scene) const;

  // Runs the shared cell over <bos> + content tokens from state_in,
  // accumulating the log-probability of every next token including <eos>.
  SentencePass teacher_forced(const Utterance& sentence, const AgentState& state_in,
                              const Scene& scene) const;

  Tensor sentence_log_prob(const Utterance& sentence, const AgentState& state_in,
                           const Scene& scene) const;

  Tensor word_logits(const Tensor& h, const Tensor& visual_projection) const;
  Tensor word_distribution(const Tensor& h, const Scene& scene, const Tensor& h0) const;

  // Controller output for the given state; with explore the sample is drawn
  // from the Gaussian policy, otherwise it is the mean.
  ControlSample control(const AgentState& state, bool explore, Rng& rng) const;
  // Recomputes mean, std and log-probability of a stored sample.
  ControlSample control_for(const AgentState& state, const Tensor& sample) const;

  DecodeResult decode(const Tensor& initial, const Scene& scene, std::size_t beam_width,
                      std::size_t max_len) const;
  DecodeResult greedy_decode(const Tensor& initial, const Scene& scene, std::size_t max_len) const;

  // With bypass_controller the action pass starts from h_last directly.
  Response respond(const AgentState& state, const Scene& scene, bool explore, Rng& rng,
                   std::size_t beam_width, std::size_t max_len,
                   bool bypass_controller = false) const;

  // Parameters updated by the imitation term: embeddings, cell, visual
  // encoder and the output projection.
  std::vector<NamedTensor> language_parameters() const;
  // Residual transform tau and the std network gamma.
  std::vector<NamedTensor> controller_parameters() const;
  std::vector<NamedTensor> parameters() const;

  const GruCell& encoder_cell() const { return cell_; }
  const GruCell& action_cell() const { return cell_; }
  const Tensor& embedding() const { return embedding_; }

  // Zeroes the linear map generating the attention filter from h0.
  void zero_attention_filter();
  // Zeroes the residual transform so that c = h.
  void zero_residual();
  // Zeroes every parameter (uniform word distribution, uniform attention).
  void zero_all();

 private:
  struct RunResult {
    Tensor h;
    Tensor log_prob;
    VisualAttention visual;
  };
  Tensor input_vector(TokenId token, const Tensor& visual) const;

  Vocabulary vocab_;
  ModelDims dims_;

  Tensor embedding_;  // [V, E]
  GruCell cell_;

  Tensor object_embedding_;  // [F_obj, C_obj, 1, 1]: 1x1 convolution
  Tensor direction_maps_;    // [D, 3, 3]
  Tensor filter_w_, filter_b_;
  Tensor gate_w_, gate_b_;

  Tensor out_w_h_, out_w_v_, out_b_;

  Tensor tau_w1_, tau_b1_, tau_w2_, tau_b2_;
  Tensor std_w_, std_b_;
};

enum class ValueInput { kStateAndScene, kSceneOnly };

// Two-layer rectified network mapping (h_last, pooled scene) to a scalar.
class ValueNet {
 public:
  ValueNet(std::size_t hidden_state, std::size_t num_objects, std::size_t width, double init_scale,
           ValueInput input, std::uint64_t seed);

  // Input state is gradient-stopped; gradients reach only this net.
  Tensor forward(const Tensor& h_last, const Scene& scene) const;

  std::vector<NamedTensor> parameters() const;
  void copy_from(const ValueNet& other);
  ValueInput input() const { return input_; }

 private:
  ValueInput input_;
  Tensor w1_, b1_, w2_, b2_;
};

}  // namespace lingo
