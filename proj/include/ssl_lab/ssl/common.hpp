#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ssl_lab/augment.hpp"
#include "ssl_lab/corpus.hpp"
#include "ssl_lab/metrics.hpp"
#include "ssl_lab/netcore/classifier.hpp"
#include "ssl_lab/netcore/optimizer.hpp"
#include "ssl_lab/random.hpp"
#include "ssl_lab/ssl/config.hpp"

namespace ssl_lab {

struct TrainData {
  std::vector<EncodedSample> labeled;
  std::vector<EncodedSample> unlabeled;  // labels, if present, are ignored
};

struct StepRecord {
  std::size_t step = 0;  // optimizer steps taken so far, across phases
  std::size_t epoch = 0;
  std::string phase;
  std::vector<std::pair<std::string, double>> terms;
  std::optional<double> mask_rate;
  std::vector<double> thresholds;
  std::vector<std::pair<std::string, double>> info;  // schedule values and diagnostics, not losses

  void add(std::string name, double value) { terms.emplace_back(std::move(name), value); }
  void note(std::string name, double value) { info.emplace_back(std::move(name), value); }
};

/// Describes a forward pass whose mode matters for the record, e.g. teacher
/// pseudo-labeling.
struct ForwardFlags {
  std::string purpose;
  bool train_mode = false;
  double sigma = 0.0;
  bool dropout_active = false;
  std::size_t rows = 0;
};

struct TrainHooks {
  std::function<void(const StepRecord&, const Classifier& live)> on_step;
  std::function<void(const ForwardFlags&)> on_forward;
  std::function<void(std::size_t epoch, const Classifier& eval_model)> on_epoch;
  std::function<void(const std::string&)> on_warning;
};

struct RunSpec {
  ClassifierConfig model;
  MethodConfig method;
  AugmenterSpec augment;
  std::uint64_t seed = 0;
  TrainHooks hooks;
};

struct TrainResult {
  Classifier model;  // the evaluation model (teacher for MeanTeacher, discriminator for SGAN)
  std::size_t steps = 0;
  std::size_t epochs = 0;
};

/// Per-coordinate noise std for the weak and strong views. The configured
/// factors are relative to the RMS embedding norm, spread over the embedding
/// coordinates.
struct ViewNoise {
  double weak = 0.0;
  double strong = 0.0;
};

inline ViewNoise view_noise(const Classifier& model, const AugmenterSpec& aug) {
  if (aug.kind == AugmentKind::None) return {};
  const double scale = model.embedding_rms_norm() / std::sqrt(static_cast<double>(model.feature_dim()));
  return {aug.sigma_weak * scale, aug.sigma_strong * scale};
}

inline std::vector<std::size_t> label_indices(const std::vector<EncodedSample>& samples) {
  std::vector<std::size_t> y;
  y.reserve(samples.size());
  for (const auto& s : samples) {
    require(s.label.has_value(), ErrorKind::InvalidArgument, "labeled sample " + std::to_string(s.id) + " has no label");
    y.push_back(class_index(*s.label));
  }
  return y;
}

/// Draws unlabeled indices in reshuffled passes, wrapping around as needed.
class CyclicSampler {
 public:
  CyclicSampler(std::size_t n, Rng& rng) : n_(n), rng_(&rng) {}

  std::vector<std::size_t> next(std::size_t k) {
    std::vector<std::size_t> out;
    if (n_ == 0) return out;
    out.reserve(k);
    while (out.size() < k) {
      if (pos_ == order_.size()) {
        order_.resize(n_);
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::shuffle(order_.begin(), order_.end(), *rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::size_t n_;
  Rng* rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

inline std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  return out;
}

inline std::size_t batches_per_epoch(std::size_t n, std::size_t batch_size) { return (n + batch_size - 1) / batch_size; }

/// Eval-mode probabilities over the real classes, in chunks.
inline Matrix predict_all(const Classifier& model, const std::vector<EncodedSample>& samples, std::size_t chunk = 512) {
  Matrix out(samples.size(), kNumClasses);
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::size_t end = std::min(samples.size(), start + chunk);
    TokenBatch b = TokenBatch::from_samples(std::span(samples).subspan(start, end - start));
    const Matrix p = predict_probs(model, b);
    for (std::size_t r = 0; r < p.rows(); ++r) std::copy(p.row(r).begin(), p.row(r).end(), out.row(start + r).begin());
  }
  return out;
}

inline ConfusionMatrix confusion(const Classifier& model, const std::vector<EncodedSample>& samples) {
  ConfusionMatrix cm(kNumClasses);
  const Matrix p = predict_all(model, samples);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    require(samples[i].label.has_value(), ErrorKind::InvalidArgument, "evaluation sample without a label");
    cm.update(class_index(*samples[i].label), argmax(p.row(i)));
  }
  return cm;
}

inline MetricsReport evaluate(const Classifier& model, const std::vector<EncodedSample>& samples) {
  return report(confusion(model, samples));
}

struct LabeledTerm {
  double loss = 0.0;
  Gradients grads;
};

/// State shared by every strategy: the run's rng streams, hooks and step
/// counter. The labeled stream drives labeled batch order and the labeled
/// forward; everything touching unlabeled data uses the unlabeled stream.
class Session {
 public:
  Session(const TrainData& data, const RunSpec& spec)
      : data(data), spec(spec), labeled_targets(one_hot(label_indices(data.labeled), kNumClasses)),
        labeled_rng(make_rng(spec.seed, Stream::Labeled)), unlabeled_rng(make_rng(spec.seed, Stream::Unlabeled)),
        aux_rng(make_rng(spec.seed, Stream::Auxiliary)), generator_rng(make_rng(spec.seed, Stream::Generator)) {
    spec.method.validate();
    spec.augment.validate();
    require(!data.labeled.empty(), ErrorKind::InvalidArgument, "training needs at least one labeled sample");
  }

  const TrainData& data;
  const RunSpec& spec;
  Matrix labeled_targets;
  Rng labeled_rng;
  Rng unlabeled_rng;
  Rng aux_rng;
  Rng generator_rng;
  std::size_t step = 0;
  std::size_t epoch = 0;

  const MethodConfig& cfg() const { return spec.method; }
  bool manifold_mixup() const { return spec.augment.kind == AugmentKind::ManifoldMixup; }

  /// Fresh classifier from the init stream; `salt` distinguishes re-inits.
  Classifier init_model(std::size_t num_classes = kNumClasses, std::uint64_t salt = 0) const {
    ClassifierConfig mc = spec.model;
    mc.num_classes = num_classes;
    Rng rng = make_rng(spec.seed, Stream::Init, salt);
    return Classifier(mc, rng);
  }

  /// Weighted CE on a labeled batch in train mode. Under manifold mixup the
  /// batch is mixed with a permutation of itself at a random layer.
  LabeledTerm labeled_term(const Classifier& model, const TokenBatch& batch, const Matrix& targets,
                           std::span<const double> weights, const NoiseSpec& noise) {
    if (!manifold_mixup()) {
      ForwardTrace t = forward(model, batch, noise, true, labeled_rng);
      auto lg = loss_and_gradients(model, t, targets, weights, LossKind::CrossEntropy);
      return {lg.loss, std::move(lg.grads)};
    }
    const std::size_t n = batch.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), labeled_rng);
    const double lambda = sample_mixup(spec.augment.mixup_alpha, labeled_rng);
    const std::size_t layer = uniform_index(labeled_rng, model.num_hidden() + 1);
    ForwardTrace t = forward_mixed(model, batch, batch.select(perm), lambda, layer, noise, true, labeled_rng);
    Matrix mixed(n, targets.cols());
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < targets.cols(); ++c)
        mixed(i, c) = lambda * targets(i, c) + (1.0 - lambda) * targets(perm[i], c);
      w[i] = lambda * weights[i] + (1.0 - lambda) * weights[perm[i]];
    }
    auto lg = loss_and_gradients(model, t, mixed, w, LossKind::CrossEntropy);
    return {lg.loss, std::move(lg.grads)};
  }

  /// The supervised term on labeled rows `idx` with the weak view.
  LabeledTerm supervised_term(const Classifier& model, std::span<const std::size_t> idx, const NoiseSpec& noise) {
    TokenBatch b = TokenBatch::gather(data.labeled, idx);
    const Matrix t = select_rows(labeled_targets, idx);
    const std::vector<double> w(idx.size(), 1.0);
    return labeled_term(model, b, t, w, noise);
  }

  void emit_step(StepRecord& rec, const Classifier& live) {
    rec.step = step;
    rec.epoch = epoch;
    for (const auto& [name, v] : rec.terms)
      require(std::isfinite(v), ErrorKind::NonConvergence,
              "loss term '" + name + "' is not finite at step " + std::to_string(step));
    if (spec.hooks.on_step) spec.hooks.on_step(rec, live);
  }

  void emit_epoch(const Classifier& eval_model) {
    if (spec.hooks.on_epoch) spec.hooks.on_epoch(epoch, eval_model);
  }

  void emit_forward(ForwardFlags f) {
    if (spec.hooks.on_forward) spec.hooks.on_forward(f);
  }

  void warn(const std::string& msg) {
    if (spec.hooks.on_warning) spec.hooks.on_warning(msg);
  }
};

}  // namespace ssl_lab
