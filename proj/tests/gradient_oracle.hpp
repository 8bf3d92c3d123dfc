#pragma once

// Randomized analytic-vs-finite-difference gradient comparison for the
// classifier, covering architecture, batch, noise, dropout, mixup layer, loss
// kind, and an extra gradient injected at h^0.

#include <algorithm>
#include <cmath>

#include "ssl_lab/netcore/classifier.hpp"
#include "test_support.hpp"

namespace ssl_lab::testing {

struct GradientCase {
  double max_rel_error = 0.0;
  std::size_t parameters = 0;
  bool mixed = false;
  bool noisy = false;
  bool dropout = false;
  bool extra_h0 = false;
};

inline double kink_margin(const ForwardTrace& t) {
  double m = 1e300;
  auto scan = [&](const Matrix& pre) {
    for (double v : pre.values()) m = std::min(m, std::abs(v));
  };
  for (const auto& p : t.pre)
    if (!p.empty()) scan(p);
  for (const auto& b : t.branches)
    for (const auto& p : b.pre) scan(p);
  return m;
}

inline GradientCase run_gradient_case(std::uint64_t seed) {
  Rng gen = make_rng(seed, Stream::Auxiliary);
  ClassifierConfig cfg;
  cfg.vocab_size = 4 + uniform_index(gen, 10);
  cfg.embed_dim = 2 + uniform_index(gen, 5);
  cfg.hidden_dims.clear();
  const std::size_t depth = uniform_index(gen, 4);
  for (std::size_t i = 0; i < depth; ++i) cfg.hidden_dims.push_back(2 + uniform_index(gen, 6));
  cfg.num_classes = 2 + uniform_index(gen, 4);
  cfg.dropout_rate = uniform01(gen) < 0.5 ? 0.0 : 0.3;

  Rng init = make_rng(seed, Stream::Init);
  Classifier model(cfg, init);
  // Zero-initialized biases put every unit whose input row was fully dropped
  // exactly on the kink; check at a generic point instead.
  {
    auto params = model.parameters();
    for (std::size_t t = 2; t < params.size(); t += 2)
      for (double& v : params[t]->values()) v = 0.2 * (uniform01(init) - 0.5);
  }
  const std::size_t n = 1 + uniform_index(gen, 5);
  const std::size_t seq = 1 + uniform_index(gen, 6);
  const bool mixed = uniform01(gen) < 0.5;
  const std::size_t layer = uniform_index(gen, depth + 1);
  const double lambda = uniform01(gen);
  const NoiseSpec noise{uniform01(gen) < 0.5 ? 0.0 : 0.2, true};
  const bool train = uniform01(gen) < 0.7;
  const LossKind kind = uniform01(gen) < 0.5 ? LossKind::CrossEntropy : LossKind::SquaredError;
  const bool extra = !mixed && uniform01(gen) < 0.5;

  Matrix targets = random_distribution_rows(n, cfg.num_classes, gen);
  std::vector<double> weights(n);
  for (double& w : weights) w = uniform01(gen) * 2.0;
  Matrix probe(n, cfg.embed_dim);  // linear functional on h^0 for the extra-gradient path
  for (double& v : probe.values()) v = uniform01(gen) - 0.5;

  TokenBatch a, b;
  std::uint64_t fwd_seed = 0;
  auto run = [&](ForwardTrace& trace) {
    Rng r(fwd_seed);
    trace = mixed ? forward_mixed(model, a, b, lambda, layer, noise, train, r) : forward(model, a, noise, train, r);
  };
  // Re-draw inputs and the dropout/noise stream until no pre-activation sits on
  // the leaky-ReLU kink at FD resolution.
  ForwardTrace trace;
  for (int attempt = 0; attempt < 200; ++attempt) {
    fwd_seed = gen();
    a = random_batch(n, cfg.vocab_size, seq, gen);
    b = random_batch(n, cfg.vocab_size, seq, gen);
    run(trace);
    if (kink_margin(trace) > 1e-3) break;
  }

  auto loss = [&]() {
    ForwardTrace t;
    run(t);
    double l = logit_loss(t.logits, t.probs, targets, weights, kind).loss;
    if (extra)
      for (std::size_t i = 0; i < probe.size(); ++i) l += probe.values()[i] * t.hidden[0].values()[i];
    return l;
  };

  LogitLoss ll = logit_loss(trace.logits, trace.probs, targets, weights, kind);
  Gradients g = backward(model, trace, ll.dlogits, extra ? &probe : nullptr);
  auto numeric = finite_difference(model.parameters(), loss);

  GradientCase out;
  out.max_rel_error = max_relative_error(g.tensors, numeric);
  for (const Matrix* p : model.parameters()) out.parameters += p->size();
  out.mixed = mixed;
  out.noisy = noise.sigma > 0.0;
  out.dropout = train && cfg.dropout_rate > 0.0;
  out.extra_h0 = extra;
  return out;
}

}  // namespace ssl_lab::testing
