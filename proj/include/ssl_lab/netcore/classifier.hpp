#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssl_lab/corpus.hpp"
#include "ssl_lab/error.hpp"
#include "ssl_lab/matrix.hpp"
#include "ssl_lab/random.hpp"

namespace ssl_lab {

// ---------------------------------------------------------------------------
// Inputs

/// Token ids and masks for a batch, flattened row-major (sample × position).
struct TokenBatch {
  std::size_t seq_len = 0;
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> mask;

  std::size_t size() const noexcept { return seq_len == 0 ? 0 : ids.size() / seq_len; }

  void push(const EncodedSample& s) {
    if (seq_len == 0) seq_len = s.token_ids.size();
    require(s.token_ids.size() == seq_len && s.attention_mask.size() == seq_len, ErrorKind::ShapeMismatch,
            "samples in a batch must share one sequence length");
    ids.insert(ids.end(), s.token_ids.begin(), s.token_ids.end());
    mask.insert(mask.end(), s.attention_mask.begin(), s.attention_mask.end());
  }

  static TokenBatch from_samples(std::span<const EncodedSample> samples) {
    TokenBatch b;
    for (const auto& s : samples) b.push(s);
    return b;
  }

  static TokenBatch gather(const std::vector<EncodedSample>& pool, std::span<const std::size_t> indices) {
    TokenBatch b;
    for (std::size_t i : indices) b.push(pool.at(i));
    return b;
  }

  TokenBatch select(std::span<const std::size_t> rows) const {
    TokenBatch b;
    b.seq_len = seq_len;
    for (std::size_t r : rows) {
      b.ids.insert(b.ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(r * seq_len),
                   ids.begin() + static_cast<std::ptrdiff_t>((r + 1) * seq_len));
      b.mask.insert(b.mask.end(), mask.begin() + static_cast<std::ptrdiff_t>(r * seq_len),
                    mask.begin() + static_cast<std::ptrdiff_t>((r + 1) * seq_len));
    }
    return b;
  }

  static TokenBatch concat(const TokenBatch& a, const TokenBatch& b) {
    if (a.size() == 0) return b;
    if (b.size() == 0) return a;
    require(a.seq_len == b.seq_len, ErrorKind::ShapeMismatch, "cannot concatenate batches of different lengths");
    TokenBatch out = a;
    out.ids.insert(out.ids.end(), b.ids.begin(), b.ids.end());
    out.mask.insert(out.mask.end(), b.mask.begin(), b.mask.end());
    return out;
  }
};

/// Zero-mean Gaussian noise on the pooled embedding; `dropout_on` gates the
/// head's dropout layers in train mode.
struct NoiseSpec {
  double sigma = 0.0;
  bool dropout_on = true;

  static NoiseSpec clean() { return {0.0, true}; }
};

// ---------------------------------------------------------------------------
// Model

struct ClassifierConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 64;
  std::vector<std::size_t> hidden_dims = {128, 64};
  std::size_t num_classes = kNumClasses;
  double dropout_rate = 0.2;
  double leaky_slope = 0.01;

  void validate() const {
    require(vocab_size >= 1 && embed_dim >= 1 && num_classes >= 1, ErrorKind::InvalidArgument,
            "classifier dimensions must be >= 1");
    for (std::size_t h : hidden_dims) require(h >= 1, ErrorKind::InvalidArgument, "hidden dims must be >= 1");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0, ErrorKind::InvalidArgument, "dropout_rate must be in [0,1)");
  }

  friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

struct Dense {
  Matrix weight;  // in × out
  Matrix bias;    // 1 × out

  Dense() = default;
  Dense(std::size_t in, std::size_t out, Rng& rng) : weight(in, out), bias(1, out) {
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-a, a);
    for (double& w : weight.values()) w = dist(rng);
  }

  std::size_t in() const { return weight.rows(); }
  std::size_t out() const { return weight.cols(); }

  Matrix apply(const Matrix& x) const {
    Matrix y = matmul(x, weight);
    add_row_vector(y, bias);
    return y;
  }

  friend bool operator==(const Dense&, const Dense&) = default;
};

enum class ParamGroup { Encoder, Head };

/// Embedding table, masked mean pooling, and an MLP head. Hidden state h^0 is
/// the (optionally noised) pooled embedding; h^l for l in 1..H are the
/// post-activation, post-dropout outputs of the hidden layers.
class Classifier {
 public:
  Classifier() = default;

  Classifier(ClassifierConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const double a = std::sqrt(6.0 / static_cast<double>(cfg_.vocab_size + cfg_.embed_dim));
    embedding_ = Matrix(cfg_.vocab_size, cfg_.embed_dim);
    std::uniform_real_distribution<double> dist(-a, a);
    for (double& w : embedding_.values()) w = dist(rng);
    std::size_t in = cfg_.embed_dim;
    for (std::size_t h : cfg_.hidden_dims) {
      layers_.emplace_back(in, h, rng);
      in = h;
    }
    layers_.emplace_back(in, cfg_.num_classes, rng);
  }

  const ClassifierConfig& config() const noexcept { return cfg_; }
  std::size_t num_hidden() const noexcept { return cfg_.hidden_dims.size(); }
  std::size_t num_classes() const noexcept { return cfg_.num_classes; }
  std::size_t feature_dim() const noexcept { return cfg_.embed_dim; }

  const Matrix& embedding() const noexcept { return embedding_; }
  Matrix& embedding() noexcept { return embedding_; }
  const std::vector<Dense>& layers() const noexcept { return layers_; }
  std::vector<Dense>& layers() noexcept { return layers_; }

  std::vector<Matrix*> parameters() {
    std::vector<Matrix*> p{&embedding_};
    for (auto& l : layers_) {
      p.push_back(&l.weight);
      p.push_back(&l.bias);
    }
    return p;
  }

  std::vector<const Matrix*> parameters() const {
    std::vector<const Matrix*> p{&embedding_};
    for (const auto& l : layers_) {
      p.push_back(&l.weight);
      p.push_back(&l.bias);
    }
    return p;
  }

  std::vector<ParamGroup> parameter_groups() const {
    std::vector<ParamGroup> g(1 + 2 * layers_.size(), ParamGroup::Head);
    g[0] = ParamGroup::Encoder;
    return g;
  }

  /// Root-mean-square L2 norm of the embedding rows.
  double embedding_rms_norm() const {
    double sum = 0.0;
    for (double v : embedding_.values()) sum += v * v;
    return std::sqrt(sum / static_cast<double>(embedding_.rows()));
  }

  friend bool operator==(const Classifier&, const Classifier&) = default;

 private:
  ClassifierConfig cfg_;
  Matrix embedding_;
  std::vector<Dense> layers_;
};

// ---------------------------------------------------------------------------
// Forward pass

struct BranchCache {
  bool from_tokens = true;
  TokenBatch tokens;
  std::vector<double> inv_count;
  std::vector<Matrix> hidden;  // h^0..h^mix
  std::vector<Matrix> pre;     // pre-activations of layers 1..mix
  std::vector<Matrix> drop;    // inverted-dropout masks (empty matrix when inactive)
};

struct ForwardTrace {
  std::vector<BranchCache> branches;  // one, or two when mixed
  std::size_t mix_layer = 0;
  double lambda = 1.0;
  std::vector<Matrix> hidden;  // h^0..h^H; entries below mix_layer come from the first branch
  std::vector<Matrix> pre;     // indexed by layer-1, populated for layers above mix_layer
  std::vector<Matrix> drop;
  Matrix logits;
  Matrix probs;
  bool train_mode = false;
  double sigma = 0.0;

  std::size_t batch_size() const noexcept { return logits.rows(); }
  std::size_t num_layers() const noexcept { return hidden.size(); }
};

namespace detail {

inline double leaky(double x, double slope) { return x > 0.0 ? x : slope * x; }
inline double leaky_grad(double x, double slope) { return x > 0.0 ? 1.0 : slope; }

inline Matrix pooled_embedding(const Classifier& model, const TokenBatch& batch, std::vector<double>& inv_count) {
  const std::size_t n = batch.size();
  const std::size_t e = model.feature_dim();
  const std::size_t vocab = model.config().vocab_size;
  Matrix pooled(n, e);
  inv_count.assign(n, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    std::size_t count = 0;
    auto out = pooled.row(b);
    for (std::size_t t = 0; t < batch.seq_len; ++t) {
      if (!batch.mask[b * batch.seq_len + t]) continue;
      const std::int32_t id = batch.ids[b * batch.seq_len + t];
      require(id >= 0 && static_cast<std::size_t>(id) < vocab, ErrorKind::TokenOutOfRange,
              "token id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(vocab));
      const auto row = model.embedding().row(static_cast<std::size_t>(id));
      for (std::size_t k = 0; k < e; ++k) out[k] += row[k];
      ++count;
    }
    require(count > 0, ErrorKind::InvalidArgument, "sample without any unmasked token");
    inv_count[b] = 1.0 / static_cast<double>(count);
    for (double& v : out) v *= inv_count[b];
  }
  return pooled;
}

inline void add_noise(Matrix& h0, double sigma, Rng& rng) {
  if (sigma <= 0.0) return;
  std::normal_distribution<double> dist(0.0, sigma);
  for (double& v : h0.values()) v += dist(rng);
}

/// One hidden layer: affine, leaky ReLU, inverted dropout.
inline Matrix hidden_layer(const Classifier& model, std::size_t layer, const Matrix& input, bool dropout_active,
                           Rng& rng, Matrix& pre_out, Matrix& drop_out) {
  const Dense& dense = model.layers()[layer - 1];
  pre_out = dense.apply(input);
  Matrix h(pre_out.rows(), pre_out.cols());
  const double slope = model.config().leaky_slope;
  for (std::size_t i = 0; i < h.size(); ++i) h.values()[i] = leaky(pre_out.values()[i], slope);
  const double rate = model.config().dropout_rate;
  if (dropout_active && rate > 0.0) {
    drop_out = Matrix(h.rows(), h.cols());
    const double keep = 1.0 - rate;
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double m = uniform01(rng) < keep ? 1.0 / keep : 0.0;
      drop_out.values()[i] = m;
      h.values()[i] *= m;
    }
  } else {
    drop_out = Matrix();
  }
  return h;
}

inline BranchCache run_prefix(const Classifier& model, Matrix h0, BranchCache cache, std::size_t upto,
                              const NoiseSpec& noise, bool train_mode, Rng& rng) {
  add_noise(h0, noise.sigma, rng);
  cache.hidden.push_back(std::move(h0));
  const bool dropout_active = train_mode && noise.dropout_on;
  for (std::size_t l = 1; l <= upto; ++l) {
    Matrix pre, drop;
    Matrix h = hidden_layer(model, l, cache.hidden.back(), dropout_active, rng, pre, drop);
    cache.pre.push_back(std::move(pre));
    cache.drop.push_back(std::move(drop));
    cache.hidden.push_back(std::move(h));
  }
  return cache;
}

inline BranchCache token_branch(const Classifier& model, const TokenBatch& batch, std::size_t upto,
                                const NoiseSpec& noise, bool train_mode, Rng& rng) {
  BranchCache cache;
  cache.from_tokens = true;
  cache.tokens = batch;
  Matrix pooled = pooled_embedding(model, batch, cache.inv_count);
  return run_prefix(model, std::move(pooled), std::move(cache), upto, noise, train_mode, rng);
}

inline BranchCache feature_branch(const Classifier& model, const Matrix& features, std::size_t upto,
                                  const NoiseSpec& noise, bool train_mode, Rng& rng) {
  require(features.cols() == model.feature_dim(), ErrorKind::ShapeMismatch,
          "feature width " + std::to_string(features.cols()) + " != embed_dim " + std::to_string(model.feature_dim()));
  BranchCache cache;
  cache.from_tokens = false;
  return run_prefix(model, features, std::move(cache), upto, noise, train_mode, rng);
}

inline void finish_forward(const Classifier& model, ForwardTrace& trace, Matrix mixed, const NoiseSpec& noise,
                           bool train_mode, Rng& rng) {
  const std::size_t H = model.num_hidden();
  trace.hidden.resize(trace.mix_layer);
  for (std::size_t l = 0; l < trace.mix_layer; ++l) trace.hidden[l] = trace.branches.front().hidden[l];
  trace.hidden.push_back(std::move(mixed));
  trace.pre.assign(H, Matrix());
  trace.drop.assign(H, Matrix());
  for (std::size_t l = 0; l < trace.mix_layer; ++l) {
    trace.pre[l] = trace.branches.front().pre[l];
    trace.drop[l] = trace.branches.front().drop[l];
  }
  const bool dropout_active = train_mode && noise.dropout_on;
  for (std::size_t l = trace.mix_layer + 1; l <= H; ++l) {
    Matrix h = hidden_layer(model, l, trace.hidden.back(), dropout_active, rng, trace.pre[l - 1], trace.drop[l - 1]);
    trace.hidden.push_back(std::move(h));
  }
  trace.logits = model.layers().back().apply(trace.hidden.back());
  trace.probs = softmax_rows(trace.logits);
  trace.train_mode = train_mode;
  trace.sigma = noise.sigma;
}

}  // namespace detail

inline ForwardTrace forward(const Classifier& model, const TokenBatch& batch, const NoiseSpec& noise, bool train_mode,
                            Rng& rng) {
  ForwardTrace trace;
  trace.mix_layer = model.num_hidden();
  trace.branches.push_back(detail::token_branch(model, batch, trace.mix_layer, noise, train_mode, rng));
  Matrix top = trace.branches.front().hidden.back();
  detail::finish_forward(model, trace, std::move(top), noise, train_mode, rng);
  return trace;
}

/// Forward starting from h^0 (features of pooled-embedding width), e.g. the
/// output of a generator.
inline ForwardTrace forward_features(const Classifier& model, const Matrix& features, const NoiseSpec& noise,
                                     bool train_mode, Rng& rng) {
  ForwardTrace trace;
  trace.mix_layer = model.num_hidden();
  trace.branches.push_back(detail::feature_branch(model, features, trace.mix_layer, noise, train_mode, rng));
  Matrix top = trace.branches.front().hidden.back();
  detail::finish_forward(model, trace, std::move(top), noise, train_mode, rng);
  return trace;
}

/// Manifold Mixup: both batches run to `layer`, their hidden states are
/// combined as lambda·h_a + (1−lambda)·h_b, and the forward continues.
inline ForwardTrace forward_mixed(const Classifier& model, const TokenBatch& batch_a, const TokenBatch& batch_b,
                                  double lambda, std::size_t layer, const NoiseSpec& noise, bool train_mode, Rng& rng) {
  require(batch_a.size() == batch_b.size(), ErrorKind::ShapeMismatch,
          "mixup batch sizes differ: " + std::to_string(batch_a.size()) + " vs " + std::to_string(batch_b.size()));
  require(lambda >= 0.0 && lambda <= 1.0, ErrorKind::InvalidArgument, "mixup lambda must lie in [0,1]");
  require(layer <= model.num_hidden(), ErrorKind::InvalidArgument, "mixup layer out of range");
  ForwardTrace trace;
  trace.mix_layer = layer;
  trace.lambda = lambda;
  trace.branches.push_back(detail::token_branch(model, batch_a, layer, noise, train_mode, rng));
  trace.branches.push_back(detail::token_branch(model, batch_b, layer, noise, train_mode, rng));
  const Matrix& ha = trace.branches[0].hidden.back();
  const Matrix& hb = trace.branches[1].hidden.back();
  Matrix mixed(ha.rows(), ha.cols());
  for (std::size_t i = 0; i < mixed.size(); ++i)
    mixed.values()[i] = lambda * ha.values()[i] + (1.0 - lambda) * hb.values()[i];
  detail::finish_forward(model, trace, std::move(mixed), noise, train_mode, rng);
  return trace;
}

// ---------------------------------------------------------------------------
// Backward pass

/// Gradients aligned with Classifier::parameters(), plus dL/dh^0 for every
/// branch that started from features rather than tokens.
struct Gradients {
  std::vector<Matrix> tensors;
  std::vector<Matrix> input_grads;

  static Gradients zeros_like(const Classifier& model) {
    Gradients g;
    for (const Matrix* p : model.parameters()) g.tensors.emplace_back(p->rows(), p->cols());
    return g;
  }

  Gradients& operator+=(const Gradients& other) {
    if (tensors.empty()) {
      tensors = other.tensors;
      return *this;
    }
    require(tensors.size() == other.tensors.size(), ErrorKind::ShapeMismatch, "gradient sets differ in length");
    for (std::size_t i = 0; i < tensors.size(); ++i) tensors[i] += other.tensors[i];
    return *this;
  }

  Gradients& operator*=(double s) {
    for (auto& t : tensors) t *= s;
    return *this;
  }
};

namespace detail {

inline void layer_backward(const Classifier& model, std::size_t layer, const Matrix& input, const Matrix& pre,
                           const Matrix& drop, Matrix& grad, Gradients& out) {
  const double slope = model.config().leaky_slope;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    double g = grad.values()[i];
    if (!drop.empty()) g *= drop.values()[i];
    grad.values()[i] = g * leaky_grad(pre.values()[i], slope);
  }
  const Dense& dense = model.layers()[layer - 1];
  out.tensors[2 * layer - 1] += matmul_at_b(input, grad);
  out.tensors[2 * layer] += column_sums(grad);
  grad = matmul_a_bt(grad, dense.weight);
}

inline void branch_backward(const Classifier& model, const BranchCache& branch, Matrix grad, Gradients& out,
                            const Matrix* extra_h0 = nullptr) {
  for (std::size_t l = branch.pre.size(); l >= 1; --l)
    layer_backward(model, l, branch.hidden[l - 1], branch.pre[l - 1], branch.drop[l - 1], grad, out);
  if (extra_h0 != nullptr) grad += *extra_h0;
  if (!branch.from_tokens) {
    out.input_grads.push_back(std::move(grad));
    return;
  }
  Matrix& demb = out.tensors[0];
  const std::size_t e = model.feature_dim();
  const TokenBatch& batch = branch.tokens;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto g = grad.row(b);
    const double scale = branch.inv_count[b];
    for (std::size_t t = 0; t < batch.seq_len; ++t) {
      if (!batch.mask[b * batch.seq_len + t]) continue;
      auto row = demb.row(static_cast<std::size_t>(batch.ids[b * batch.seq_len + t]));
      for (std::size_t k = 0; k < e; ++k) row[k] += scale * g[k];
    }
  }
}

}  // namespace detail

/// Exact gradients of a scalar loss given dL/dlogits, optionally with an
/// extra dL/dh^0 (single-branch traces only, e.g. from a projection head).
inline Gradients backward(const Classifier& model, const ForwardTrace& trace, const Matrix& dlogits,
                          const Matrix* dh0_extra = nullptr) {
  require(dlogits.rows() == trace.batch_size() && dlogits.cols() == model.num_classes(), ErrorKind::ShapeMismatch,
          "dlogits shape " + shape_string(dlogits));
  Gradients out = Gradients::zeros_like(model);
  const std::size_t H = model.num_hidden();
  const Dense& head = model.layers().back();
  out.tensors[2 * (H + 1) - 1] += matmul_at_b(trace.hidden[H], dlogits);
  out.tensors[2 * (H + 1)] += column_sums(dlogits);
  Matrix grad = matmul_a_bt(dlogits, head.weight);
  for (std::size_t l = H; l > trace.mix_layer; --l)
    detail::layer_backward(model, l, trace.hidden[l - 1], trace.pre[l - 1], trace.drop[l - 1], grad, out);

  if (trace.branches.size() == 1) {
    detail::branch_backward(model, trace.branches.front(), std::move(grad), out, dh0_extra);
    return out;
  }

  require(dh0_extra == nullptr, ErrorKind::InvalidArgument, "extra h0 gradient is not defined for mixed traces");
  Matrix grad_b = grad;
  grad *= trace.lambda;
  grad_b *= 1.0 - trace.lambda;
  detail::branch_backward(model, trace.branches[0], std::move(grad), out);
  detail::branch_backward(model, trace.branches[1], std::move(grad_b), out);
  return out;
}

// ---------------------------------------------------------------------------
// Losses

enum class LossKind { CrossEntropy, SquaredError };

struct LogitLoss {
  double loss = 0.0;
  Matrix dlogits;
};

inline void check_targets(const Matrix& targets, std::size_t rows, std::size_t cols) {
  require(targets.rows() == rows && targets.cols() == cols, ErrorKind::ShapeMismatch,
          "targets shape " + shape_string(targets));
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (double v : targets.row(r)) s += v;
    require(std::abs(s - 1.0) <= 1e-6, ErrorKind::NonNormalizedTarget,
            "target row " + std::to_string(r) + " sums to " + std::to_string(s));
  }
}

/// Weighted mean over the batch: (1/N) Σ_i w_i ℓ_i, and its gradient w.r.t. the logits.
inline LogitLoss logit_loss(const Matrix& logits, const Matrix& probs, const Matrix& targets,
                            std::span<const double> weights, LossKind kind) {
  const std::size_t n = logits.rows(), c = logits.cols();
  check_targets(targets, n, c);
  require(weights.size() == n, ErrorKind::ShapeMismatch, "sample weight count != batch size");
  LogitLoss out;
  out.dlogits = Matrix(n, c);
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights[i];
    require(w >= 0.0, ErrorKind::InvalidArgument, "sample weights must be non-negative");
    auto z = logits.row(i);
    auto p = probs.row(i);
    auto t = targets.row(i);
    auto d = out.dlogits.row(i);
    if (kind == LossKind::CrossEntropy) {
      const double lse = log_sum_exp(z);
      double li = 0.0;
      for (std::size_t k = 0; k < c; ++k)
        if (t[k] != 0.0) li -= t[k] * (z[k] - lse);
      out.loss += w * li * inv_n;
      for (std::size_t k = 0; k < c; ++k) d[k] = w * inv_n * (p[k] - t[k]);
    } else {
      double li = 0.0, dot = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        const double diff = p[k] - t[k];
        li += diff * diff;
        dot += p[k] * 2.0 * diff;
      }
      out.loss += w * li * inv_n;
      for (std::size_t k = 0; k < c; ++k) d[k] = w * inv_n * p[k] * (2.0 * (p[k] - t[k]) - dot);
    }
  }
  return out;
}

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

inline LossAndGradients loss_and_gradients(const Classifier& model, const ForwardTrace& trace, const Matrix& targets,
                                           std::span<const double> sample_weights, LossKind kind) {
  LogitLoss ll = logit_loss(trace.logits, trace.probs, targets, sample_weights, kind);
  return {ll.loss, backward(model, trace, ll.dlogits)};
}

inline Matrix one_hot(std::span<const std::size_t> labels, std::size_t num_classes) {
  Matrix m(labels.size(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] < num_classes, ErrorKind::InvalidArgument, "label out of range");
    m(i, labels[i]) = 1.0;
  }
  return m;
}

/// Eval-mode class probabilities over the real classes (a trailing extra
/// class, such as a GAN's fake class, is dropped and the rest renormalized).
inline Matrix predict_probs(const Classifier& model, const TokenBatch& batch, std::size_t real_classes = kNumClasses) {
  Rng unused(0);
  ForwardTrace t = forward(model, batch, NoiseSpec::clean(), false, unused);
  if (model.num_classes() == real_classes) return t.probs;
  require(model.num_classes() > real_classes, ErrorKind::ShapeMismatch, "model has fewer outputs than real classes");
  Matrix out(t.probs.rows(), real_classes);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < real_classes; ++c) s += t.probs(r, c);
    for (std::size_t c = 0; c < real_classes; ++c) out(r, c) = t.probs(r, c) / s;
  }
  return out;
}

/// Eval-mode pooled embeddings (h^0 without noise).
inline Matrix pooled_features(const Classifier& model, const TokenBatch& batch) {
  std::vector<double> inv;
  return detail::pooled_embedding(model, batch, inv);
}

}  // namespace ssl_lab
