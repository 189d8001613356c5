#include "ccid/neural.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <thread>

#include "ccid/error.hpp"
#include "ccid/rng.hpp"

namespace ccid::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using Vec = Eigen::VectorXd;
using MapVec = Eigen::Map<Vec>;
using CMapVec = Eigen::Map<const Vec>;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

CMapMat cmap(const Matrix& m) { return CMapMat(m.data.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols)); }
MapMat map(Matrix& m) { return MapMat(m.data.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols)); }

CMapMat cmap(std::span<const double> s, std::size_t rows, std::size_t cols) {
  return CMapMat(s.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MapMat map(std::span<double> s, std::size_t rows, std::size_t cols) {
  return MapMat(s.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

}  // namespace

void ModelConfig::validate() const {
  if (input_size == 0) throw Error("input size must be positive");
  if (hidden_size == 0) throw Error("hidden size must be positive");
  if (num_layers == 0) throw Error("at least one GRU layer is required");
  if (num_classes != kNumProtocols) throw Error("the classifier head must have 4 classes");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("dropout must be in [0, 1)");
}

ModelParams::ModelParams(const ModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t H = config.hidden_size;
  const std::size_t A = config.attention_width();
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
    tensors_.push_back(TensorInfo{std::move(name), offset, rows, cols});
    offset += rows * cols;
  };
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const std::size_t in = l == 0 ? config.input_size : 2 * H;
    for (std::size_t d = 0; d < 2; ++d) {
      const std::string prefix = "gru.l" + std::to_string(l) + (d == 0 ? ".fwd" : ".bwd");
      add(prefix + ".W", 3 * H, in);
      add(prefix + ".U", 3 * H, H);
      add(prefix + ".b", 3 * H, 1);
    }
  }
  add("attn.W", A, 2 * H);
  add("attn.v", A, 1);
  add("head.W", config.num_classes, 2 * H);
  add("head.b", config.num_classes, 1);
  data_.assign(offset, 0.0);
}

std::span<double> ModelParams::tensor(std::size_t i) {
  const auto& t = tensors_.at(i);
  return std::span<double>(data_).subspan(t.offset, t.size());
}

std::span<const double> ModelParams::tensor(std::size_t i) const {
  const auto& t = tensors_.at(i);
  return std::span<const double>(data_).subspan(t.offset, t.size());
}

GruView ModelParams::gru(std::size_t layer, std::size_t dir) const {
  GruView v;
  v.w = tensor(gru_w(layer, dir));
  v.u = tensor(gru_u(layer, dir));
  v.b = tensor(gru_b(layer, dir));
  v.hidden_size = config_.hidden_size;
  v.input_size = tensors_[gru_w(layer, dir)].cols;
  return v;
}

void ModelParams::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

bool ModelParams::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed, HeadInit head) {
  ModelParams p(config);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.hidden_size));
  for (std::size_t i = 0; i < p.tensors().size(); ++i) {
    const auto& info = p.tensors()[i];
    const bool is_bias = info.cols == 1 && i != p.attn_v();
    const bool zero = is_bias || (head == HeadInit::Zero && i == p.head_w());
    for (double& v : p.tensor(i)) v = zero ? 0.0 : rng.uniform(-bound, bound);
  }
  return p;
}

std::vector<double> gru_cell(std::span<const double> x, std::span<const double> h, const GruView& g) {
  const std::size_t H = g.hidden_size;
  const std::size_t I = g.input_size;
  if (x.size() != I) throw Error("gru_cell: input has " + std::to_string(x.size()) + " values, expected " + std::to_string(I));
  if (h.size() != H) throw Error("gru_cell: hidden has " + std::to_string(h.size()) + " values, expected " + std::to_string(H));
  if (g.w.size() != 3 * H * I || g.u.size() != 3 * H * H || g.b.size() != 3 * H)
    throw Error("gru_cell: parameter shapes do not match input/hidden sizes");

  const auto W = cmap(g.w, 3 * H, I);
  const auto U = cmap(g.u, 3 * H, H);
  const CMapVec b(g.b.data(), static_cast<Eigen::Index>(3 * H));
  const CMapVec xv(x.data(), static_cast<Eigen::Index>(I));
  const CMapVec hv(h.data(), static_cast<Eigen::Index>(H));
  const auto Hi = static_cast<Eigen::Index>(H);

  const Vec gx = W * xv + b;
  const Vec zr = gx.head(2 * Hi) + U.topRows(2 * Hi) * hv;
  const Vec z = zr.head(Hi).unaryExpr(&sigmoid);
  const Vec r = zr.tail(Hi).unaryExpr(&sigmoid);
  const Vec rh = r.cwiseProduct(hv);
  const Vec cand = (gx.tail(Hi) + U.bottomRows(Hi) * rh).array().tanh().matrix();
  const Vec out = (Vec::Ones(Hi) - z).cwiseProduct(hv) + z.cwiseProduct(cand);
  return std::vector<double>(out.data(), out.data() + out.size());
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double cross_entropy(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw Error("label " + std::to_string(label) + " outside 0.." + std::to_string(logits.size() - 1));
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - m);
  return -(logits[static_cast<std::size_t>(label)] - m - std::log(sum));
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

namespace {

void run_direction(const CMapMat& X, const GruView& g, bool reverse, DirectionTrace& dt, std::size_t layer) {
  const auto T = X.rows();
  const auto H = static_cast<Eigen::Index>(g.hidden_size);
  const auto W = cmap(g.w, g.hidden_size * 3, g.input_size);
  const auto U = cmap(g.u, g.hidden_size * 3, g.hidden_size);
  const CMapVec b(g.b.data(), 3 * H);

  RowMat G = X * W.transpose();
  G.rowwise() += b.transpose();

  for (Matrix* m : {&dt.z, &dt.r, &dt.candidate, &dt.h_prev, &dt.rh, &dt.h})
    *m = Matrix(static_cast<std::size_t>(T), g.hidden_size);
  auto Z = map(dt.z), R = map(dt.r), C = map(dt.candidate), HP = map(dt.h_prev), RH = map(dt.rh), Hs = map(dt.h);

  Vec h = Vec::Zero(H);
  for (Eigen::Index k = 0; k < T; ++k) {
    const Eigen::Index t = reverse ? T - 1 - k : k;
    HP.row(t) = h.transpose();
    const Vec zr = G.row(t).head(2 * H).transpose() + U.topRows(2 * H) * h;
    const Vec z = zr.head(H).unaryExpr(&sigmoid);
    const Vec r = zr.tail(H).unaryExpr(&sigmoid);
    const Vec rh = r.cwiseProduct(h);
    const Vec cand = (G.row(t).tail(H).transpose() + U.bottomRows(H) * rh).array().tanh().matrix();
    h = (Vec::Ones(H) - z).cwiseProduct(h) + z.cwiseProduct(cand);
    if (!h.allFinite())
      throw NumericError("non-finite activation in GRU layer " + std::to_string(layer) +
                         (reverse ? " (backward direction)" : " (forward direction)") + " at step " +
                         std::to_string(t));
    Z.row(t) = z.transpose();
    R.row(t) = r.transpose();
    C.row(t) = cand.transpose();
    RH.row(t) = rh.transpose();
    Hs.row(t) = h.transpose();
  }
}

/// Reverse pass of one direction. dH holds dLoss/dh_t for every step; adds
/// parameter gradients into gW/gU/gB and input gradients into dX.
void back_direction(const CMapMat& X, const GruView& g, bool reverse, const DirectionTrace& dt, const RowMat& dH,
                    std::span<double> gW, std::span<double> gU, std::span<double> gB, RowMat& dX) {
  const auto T = X.rows();
  const auto H = static_cast<Eigen::Index>(g.hidden_size);
  const auto W = cmap(g.w, g.hidden_size * 3, g.input_size);
  const auto U = cmap(g.u, g.hidden_size * 3, g.hidden_size);
  const auto Z = cmap(dt.z), R = cmap(dt.r), C = cmap(dt.candidate), HP = cmap(dt.h_prev), RH = cmap(dt.rh);

  RowMat DG(T, 3 * H);
  Vec carry = Vec::Zero(H);
  for (Eigen::Index k = T - 1; k >= 0; --k) {
    const Eigen::Index t = reverse ? T - 1 - k : k;
    const Vec dh = dH.row(t).transpose() + carry;
    const Vec z = Z.row(t).transpose(), r = R.row(t).transpose();
    const Vec c = C.row(t).transpose(), hp = HP.row(t).transpose();

    const Vec dz = dh.cwiseProduct(c - hp);
    const Vec dc = dh.cwiseProduct(z);
    Vec dhp = dh.cwiseProduct(Vec::Ones(H) - z);
    const Vec dac = dc.array() * (1.0 - c.array().square());
    const Vec drh = U.bottomRows(H).transpose() * dac;
    const Vec dr = drh.cwiseProduct(hp);
    dhp += drh.cwiseProduct(r);
    const Vec daz = dz.array() * z.array() * (1.0 - z.array());
    const Vec dar = dr.array() * r.array() * (1.0 - r.array());
    DG.row(t).segment(0, H) = daz.transpose();
    DG.row(t).segment(H, H) = dar.transpose();
    DG.row(t).segment(2 * H, H) = dac.transpose();
    dhp += U.topRows(2 * H).transpose() * DG.row(t).head(2 * H).transpose();
    carry = dhp;
  }

  auto gw = map(gW, g.hidden_size * 3, g.input_size);
  auto gu = map(gU, g.hidden_size * 3, g.hidden_size);
  MapVec gb(gB.data(), 3 * H);
  gw.noalias() += DG.transpose() * X;
  gb += DG.colwise().sum().transpose();
  gu.topRows(2 * H).noalias() += DG.leftCols(2 * H).transpose() * HP;
  gu.bottomRows(H).noalias() += DG.rightCols(H).transpose() * RH;
  dX.noalias() += DG * W;
}

void check_finite(std::span<const double> v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i])) throw NumericError(std::string("non-finite ") + what + " at index " + std::to_string(i));
}

}  // namespace

ForwardResult forward(std::span<const double> sequence, std::size_t steps, const ModelParams& params, bool training,
                      std::uint64_t dropout_seed) {
  const auto& cfg = params.config();
  if (steps == 0) throw Error("sequence must have at least one step");
  if (sequence.size() != steps * cfg.input_size)
    throw Error("sequence has " + std::to_string(sequence.size()) + " values, expected " + std::to_string(steps) +
                " x " + std::to_string(cfg.input_size));

  const std::size_t H = cfg.hidden_size;
  const std::size_t A = cfg.attention_width();
  const auto T = static_cast<Eigen::Index>(steps);

  ForwardResult res;
  auto& tr = res.trace;
  tr.layers.resize(cfg.num_layers);

  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    auto& L = tr.layers[l];
    if (l == 0) {
      L.input = Matrix(steps, cfg.input_size);
      std::copy(sequence.begin(), sequence.end(), L.input.data.begin());
    } else {
      const auto& prev = tr.layers[l - 1];
      L.input = prev.out;
      if (!prev.drop_mask.data.empty())
        for (std::size_t i = 0; i < L.input.data.size(); ++i) L.input.data[i] *= prev.drop_mask.data[i];
    }
    const auto X = cmap(L.input);
    for (std::size_t d = 0; d < 2; ++d) run_direction(X, params.gru(l, d), d == 1, L.dirs[d], l);

    L.out = Matrix(steps, 2 * H);
    auto out = map(L.out);
    out.leftCols(static_cast<Eigen::Index>(H)) = cmap(L.dirs[0].h);
    out.rightCols(static_cast<Eigen::Index>(H)) = cmap(L.dirs[1].h);

    const bool between_layers = l + 1 < cfg.num_layers;
    if (training && between_layers && cfg.dropout > 0.0) {
      Rng rng(derive_seed(dropout_seed, l));
      const double keep = 1.0 - cfg.dropout;
      L.drop_mask = Matrix(steps, 2 * H);
      for (double& m : L.drop_mask.data) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
    }
  }

  // Attention pooling over the top layer.
  const auto Atop = cmap(tr.layers.back().out);
  const auto Wa = cmap(params.tensor(params.attn_w()), A, 2 * H);
  const CMapVec v(params.tensor(params.attn_v()).data(), static_cast<Eigen::Index>(A));
  tr.attn_hidden = Matrix(steps, A);
  auto P = map(tr.attn_hidden);
  P = (Atop * Wa.transpose()).array().tanh().matrix();
  const Vec e = P * v;
  tr.scores.assign(e.data(), e.data() + T);
  tr.weights = softmax(tr.scores);
  const CMapVec alpha(tr.weights.data(), T);
  const Vec ctx = Atop.transpose() * alpha;
  tr.context.assign(ctx.data(), ctx.data() + ctx.size());

  const auto Wo = cmap(params.tensor(params.head_w()), cfg.num_classes, 2 * H);
  const CMapVec bo(params.tensor(params.head_b()).data(), static_cast<Eigen::Index>(cfg.num_classes));
  const Vec logits = Wo * ctx + bo;
  tr.logits.assign(logits.data(), logits.data() + logits.size());
  check_finite(tr.scores, "attention score");
  check_finite(tr.logits, "logit");
  res.logits = tr.logits;
  return res;
}

namespace {

/// Gradient of cross-entropy for one example (not divided by batch size).
double example_grads(const Example& ex, const ModelParams& params, bool training, std::uint64_t seed,
                     ModelParams& g) {
  const auto& cfg = params.config();
  const std::size_t H = cfg.hidden_size;
  const std::size_t A = cfg.attention_width();
  const std::size_t C = cfg.num_classes;

  auto fr = forward(ex.sequence, ex.steps, params, training, seed);
  const auto& tr = fr.trace;
  const double loss = cross_entropy(tr.logits, ex.label);

  // Head.
  auto p = softmax(tr.logits);
  p[static_cast<std::size_t>(ex.label)] -= 1.0;
  const CMapVec dlogits(p.data(), static_cast<Eigen::Index>(C));
  const CMapVec ctx(tr.context.data(), static_cast<Eigen::Index>(2 * H));
  map(g.tensor(params.head_w()), C, 2 * H).noalias() += dlogits * ctx.transpose();
  MapVec(g.tensor(params.head_b()).data(), static_cast<Eigen::Index>(C)) += dlogits;
  const Vec dctx = cmap(params.tensor(params.head_w()), C, 2 * H).transpose() * dlogits;

  // Attention.
  const auto Atop = cmap(tr.layers.back().out);
  const auto P = cmap(tr.attn_hidden);
  const CMapVec alpha(tr.weights.data(), static_cast<Eigen::Index>(tr.weights.size()));
  const Vec dalpha = Atop * dctx;
  const Vec de = alpha.cwiseProduct(dalpha.array().matrix() - Vec::Constant(alpha.size(), alpha.dot(dalpha)));
  const CMapVec v(params.tensor(params.attn_v()).data(), static_cast<Eigen::Index>(A));
  MapVec(g.tensor(params.attn_v()).data(), static_cast<Eigen::Index>(A)) += P.transpose() * de;
  const RowMat dpre = (de * v.transpose()).array() * (1.0 - P.array().square());
  map(g.tensor(params.attn_w()), A, 2 * H).noalias() += dpre.transpose() * Atop;
  RowMat dA = alpha * dctx.transpose();
  dA.noalias() += dpre * cmap(params.tensor(params.attn_w()), A, 2 * H);

  // Layers, top to bottom.
  for (std::size_t li = cfg.num_layers; li-- > 0;) {
    const auto& L = tr.layers[li];
    const auto X = cmap(L.input);
    RowMat dX = RowMat::Zero(X.rows(), X.cols());
    for (std::size_t d = 0; d < 2; ++d) {
      const RowMat dH = dA.middleCols(static_cast<Eigen::Index>(d * H), static_cast<Eigen::Index>(H));
      back_direction(X, params.gru(li, d), d == 1, L.dirs[d], dH, g.tensor(params.gru_w(li, d)),
                     g.tensor(params.gru_u(li, d)), g.tensor(params.gru_b(li, d)), dX);
    }
    if (li > 0) {
      const auto& below = tr.layers[li - 1];
      if (!below.drop_mask.data.empty()) dX = dX.cwiseProduct(cmap(below.drop_mask));
      dA = std::move(dX);
    }
  }
  return loss;
}

}  // namespace

LossAndGrads loss_and_grads(std::span<const Example> batch, const ModelParams& params, bool training,
                            std::uint64_t seed, unsigned threads) {
  if (batch.empty()) throw Error("batch must not be empty");
  for (const auto& ex : batch)
    if (ex.label < 0 || ex.label >= static_cast<int>(params.config().num_classes))
      throw Error("label " + std::to_string(ex.label) + " outside 0..3");

  LossAndGrads out{0.0, ModelParams(params.config())};
  const std::size_t n = batch.size();
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));

  std::vector<ModelParams> scratch(workers, ModelParams(params.config()));
  std::vector<double> losses(workers);
  std::vector<std::exception_ptr> errors(workers);

  auto total = out.grads.data();
  for (std::size_t base = 0; base < n; base += workers) {
    const std::size_t chunk = std::min(workers, n - base);
    auto work = [&](std::size_t k) {
      try {
        scratch[k].set_zero();
        losses[k] = example_grads(batch[base + k], params, training, derive_seed(seed, base + k), scratch[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    };
    if (chunk == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t k = 0; k < chunk; ++k) pool.emplace_back(work, k);
      for (auto& t : pool) t.join();
    }
    for (std::size_t k = 0; k < chunk; ++k) {
      if (errors[k]) std::rethrow_exception(errors[k]);
      out.loss += losses[k];
      auto src = scratch[k].data();
      for (std::size_t i = 0; i < total.size(); ++i) total[i] += src[i];
    }
  }

  const double inv = 1.0 / static_cast<double>(n);
  out.loss *= inv;
  for (double& v : total) v *= inv;
  return out;
}

std::vector<Example> as_examples(std::span<const features::SequenceSample> samples) {
  std::vector<Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(Example{s.features, s.length, index_of(s.label)});
  return out;
}

Prediction predict(std::span<const double> sequence, std::size_t steps, const ModelParams& params) {
  const auto fr = forward(sequence, steps, params, false, 0);
  const auto p = softmax(fr.logits);
  Prediction out;
  out.label = label_from_index(static_cast<int>(argmax(fr.logits)));
  std::copy(p.begin(), p.end(), out.probabilities.begin());
  return out;
}

}  // namespace ccid::nn
