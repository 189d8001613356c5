#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ccid/feature_pipeline.hpp"
#include "ccid/protocol.hpp"

/// Bidirectional multi-layer GRU with additive attention pooling and a linear
/// classifier head, with a hand-written reverse pass.
///
/// Per direction the cell is
///   z  = sigmoid(Wz x + Uz h + bz)
///   r  = sigmoid(Wr x + Ur h + br)
///   h~ = tanh(Wh x + Uh (r * h) + bh)
///   h' = (1 - z) * h + z * h~
/// with h0 = 0. Each layer concatenates the forward pass and the pass over the
/// reversed sequence into a 2H-wide output per step. Attention pools the top
/// layer's outputs a_t with e_t = v . tanh(Wa a_t), alpha = softmax(e),
/// context = sum_t alpha_t a_t, and logits = Wo context + bo.
namespace ccid::nn {

struct ModelConfig {
  std::size_t input_size = features::kNumFeatures;
  std::size_t hidden_size = 512;
  std::size_t num_layers = 3;
  /// Inner width of the attention projection; 0 means hidden_size.
  std::size_t attention_size = 0;
  std::size_t num_classes = kNumProtocols;
  double dropout = 0.4;

  std::size_t attention_width() const { return attention_size == 0 ? hidden_size : attention_size; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Name and location of one parameter tensor inside the flat buffer.
/// Matrices are row-major.
struct TensorInfo {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 1;

  std::size_t size() const { return rows * cols; }
};

/// Slice of one GRU direction: W (3H x I), U (3H x H), b (3H), gate rows in
/// z, r, h order.
struct GruView {
  std::span<const double> w;
  std::span<const double> u;
  std::span<const double> b;
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
};

/// All weights in one contiguous buffer. Gradients use the same type and
/// layout, which keeps the optimizer and checkpoint code tensor-agnostic.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> tensor(std::size_t i);
  std::span<const double> tensor(std::size_t i) const;

  // Tensor indices.
  std::size_t gru_w(std::size_t layer, std::size_t dir) const { return 3 * (2 * layer + dir); }
  std::size_t gru_u(std::size_t layer, std::size_t dir) const { return gru_w(layer, dir) + 1; }
  std::size_t gru_b(std::size_t layer, std::size_t dir) const { return gru_w(layer, dir) + 2; }
  std::size_t attn_w() const { return 6 * config_.num_layers; }
  std::size_t attn_v() const { return attn_w() + 1; }
  std::size_t head_w() const { return attn_w() + 2; }
  std::size_t head_b() const { return attn_w() + 3; }

  GruView gru(std::size_t layer, std::size_t dir) const;

  void set_zero();
  bool all_finite() const;

  bool operator==(const ModelParams& other) const {
    return config_ == other.config_ && data_ == other.data_;
  }

 private:
  ModelConfig config_;
  std::vector<TensorInfo> tensors_;
  std::vector<double> data_;
};

enum class HeadInit { Uniform, Zero };

/// Weights ~ U(-1/sqrt(H), 1/sqrt(H)), biases zero. With HeadInit::Zero the
/// classifier head weights are zero as well, so the initial prediction is
/// uniform over the classes.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed, HeadInit head = HeadInit::Uniform);

/// One GRU step. Throws ccid::Error on dimension mismatch.
std::vector<double> gru_cell(std::span<const double> x, std::span<const double> h, const GruView& params);

/// Dense row-major matrix used in ForwardTrace.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct DirectionTrace {
  Matrix z, r, candidate, h_prev, rh, h;  // all T x H, indexed by time step
};

struct LayerTrace {
  Matrix input;      // T x I, after dropout
  Matrix out;        // T x 2H, [forward | backward]
  Matrix drop_mask;  // T x 2H scale factors applied to `out` before the next layer; empty if none
  std::array<DirectionTrace, 2> dirs;
};

/// Every activation the reverse pass needs.
struct ForwardTrace {
  std::vector<LayerTrace> layers;
  Matrix attn_hidden;            // T x A, tanh(Wa a_t)
  std::vector<double> scores;    // e_t
  std::vector<double> weights;   // alpha_t
  std::vector<double> context;   // 2H
  std::vector<double> logits;    // C
};

struct ForwardResult {
  std::vector<double> logits;
  ForwardTrace trace;
};

/// Forward pass over a steps x input_size row-major sequence. Dropout masks
/// (training only) are drawn from `dropout_seed`. Throws ccid::NumericError
/// naming the layer and step of the first non-finite activation.
ForwardResult forward(std::span<const double> sequence, std::size_t steps, const ModelParams& params,
                      bool training, std::uint64_t dropout_seed);

struct Example {
  std::span<const double> sequence;
  std::size_t steps = 0;
  int label = 0;
};

struct LossAndGrads {
  double loss = 0.0;
  ModelParams grads;
};

/// Mean cross-entropy over the batch and its exact gradient. Sample i uses
/// dropout seed derive_seed(seed, i). Per-sample gradients are summed in batch
/// order, so the result does not depend on `threads`.
LossAndGrads loss_and_grads(std::span<const Example> batch, const ModelParams& params, bool training,
                            std::uint64_t seed, unsigned threads = 1);

std::vector<Example> as_examples(std::span<const features::SequenceSample> samples);

/// Numerically stable softmax (max-subtracted).
std::vector<double> softmax(std::span<const double> logits);

/// -log softmax(logits)[label].
double cross_entropy(std::span<const double> logits, int label);

struct Prediction {
  ProtocolLabel label = ProtocolLabel::Vegas;
  std::array<double, kNumProtocols> probabilities{};
};

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

/// Evaluation-mode forward (no dropout) and argmax over the class posterior.
Prediction predict(std::span<const double> sequence, std::size_t steps, const ModelParams& params);

}  // namespace ccid::nn
