#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ssl_lab/error.hpp"
#include "ssl_lab/matrix.hpp"
#include "ssl_lab/netcore/classifier.hpp"

namespace ssl_lab {

struct GroupHyper {
  double learning_rate = 5e-3;
  double weight_decay = 1e-3;

  friend bool operator==(const GroupHyper&, const GroupHyper&) = default;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Two-group split used by every classifier: the embedding (encoder) is
/// trained slowly without decay, the head with decoupled decay.
struct OptimizerSettings {
  GroupHyper encoder{1e-5, 0.0};
  GroupHyper head{5e-3, 1e-3};

  friend bool operator==(const OptimizerSettings&, const OptimizerSettings&) = default;
};

/// Adaptive moments with bias correction followed by decoupled weight decay.
class AdamW {
 public:
  AdamW() = default;

  AdamW(std::span<const Matrix* const> params, std::vector<GroupHyper> per_param, AdamHyper hyper = {})
      : hyper_(hyper), groups_(std::move(per_param)) {
    require(groups_.size() == params.size(), ErrorKind::ShapeMismatch, "one group per parameter required");
    for (const Matrix* p : params) {
      first_.emplace_back(p->rows(), p->cols());
      second_.emplace_back(p->rows(), p->cols());
    }
  }

  std::uint64_t steps() const noexcept { return step_; }
  const std::vector<Matrix>& first_moments() const noexcept { return first_; }
  const std::vector<Matrix>& second_moments() const noexcept { return second_; }
  const std::vector<GroupHyper>& groups() const noexcept { return groups_; }

  void step(std::span<Matrix* const> params, std::span<const Matrix> grads) {
    require(params.size() == first_.size() && grads.size() == first_.size(), ErrorKind::ShapeMismatch,
            "optimizer expects " + std::to_string(first_.size()) + " parameter tensors");
    ++step_;
    const double b1 = hyper_.beta1, b2 = hyper_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Matrix& p = *params[i];
      const Matrix& g = grads[i];
      require(p.same_shape(g) && p.same_shape(first_[i]), ErrorKind::ShapeMismatch,
              "gradient " + std::to_string(i) + " has shape " + shape_string(g) + ", parameter " + shape_string(p));
      const double lr = groups_[i].learning_rate;
      const double decay = lr * groups_[i].weight_decay;
      auto pv = p.values();
      auto gv = g.values();
      auto m = first_[i].values();
      auto v = second_[i].values();
      for (std::size_t k = 0; k < pv.size(); ++k) {
        m[k] = b1 * m[k] + (1.0 - b1) * gv[k];
        v[k] = b2 * v[k] + (1.0 - b2) * gv[k] * gv[k];
        const double mhat = m[k] / c1;
        const double vhat = v[k] / c2;
        pv[k] -= lr * mhat / (std::sqrt(vhat) + hyper_.eps);
        if (decay != 0.0) pv[k] -= decay * pv[k];
      }
    }
  }

 private:
  AdamHyper hyper_;
  std::vector<GroupHyper> groups_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  std::uint64_t step_ = 0;
};

inline AdamW make_optimizer(const Classifier& model, const OptimizerSettings& settings) {
  std::vector<GroupHyper> per_param;
  for (ParamGroup g : model.parameter_groups()) per_param.push_back(g == ParamGroup::Encoder ? settings.encoder : settings.head);
  auto params = model.parameters();
  return AdamW(params, std::move(per_param));
}

inline void apply_step(AdamW& opt, Classifier& model, const Gradients& grads) {
  auto params = model.parameters();
  opt.step(params, grads.tensors);
}

/// Exponential moving average of another model's parameters.
template <class Model>
class EmaShadow {
 public:
  EmaShadow(const Model& source, double decay) : shadow_(source), decay_(decay) {
    require(decay >= 0.0 && decay <= 1.0, ErrorKind::InvalidArgument, "EMA decay must lie in [0,1]");
  }

  double decay() const noexcept { return decay_; }
  const Model& model() const noexcept { return shadow_; }
  Model& model() noexcept { return shadow_; }

  void update(const Model& source) {
    auto dst = shadow_.parameters();
    auto src = source.parameters();
    require(dst.size() == src.size(), ErrorKind::ShapeMismatch, "EMA source has a different parameter count");
    for (std::size_t i = 0; i < dst.size(); ++i) {
      require(dst[i]->same_shape(*src[i]), ErrorKind::ShapeMismatch, "EMA parameter shape mismatch");
      auto s = dst[i]->values();
      auto p = src[i]->values();
      for (std::size_t k = 0; k < s.size(); ++k) s[k] = decay_ * s[k] + (1.0 - decay_) * p[k];
    }
  }

 private:
  Model shadow_;
  double decay_;
};

}  // namespace ssl_lab
