#pragma once

#include <vector>

#include "ssl_lab/matrix.hpp"
#include "ssl_lab/netcore/classifier.hpp"
#include "ssl_lab/random.hpp"

namespace ssl_lab {

/// Plain feed-forward stack (leaky ReLU between layers, linear output). Used
/// for the contrastive projection head and the GAN generator.
class Mlp {
 public:
  Mlp() = default;

  Mlp(std::vector<std::size_t> dims, Rng& rng, double leaky_slope = 0.01) : dims_(std::move(dims)), slope_(leaky_slope) {
    require(dims_.size() >= 2, ErrorKind::InvalidArgument, "an MLP needs input and output widths");
    for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
      require(dims_[i] >= 1 && dims_[i + 1] >= 1, ErrorKind::InvalidArgument, "MLP widths must be >= 1");
      layers_.emplace_back(dims_[i], dims_[i + 1], rng);
    }
  }

  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }

  std::vector<Matrix*> parameters() {
    std::vector<Matrix*> p;
    for (auto& l : layers_) {
      p.push_back(&l.weight);
      p.push_back(&l.bias);
    }
    return p;
  }

  std::vector<const Matrix*> parameters() const {
    std::vector<const Matrix*> p;
    for (const auto& l : layers_) {
      p.push_back(&l.weight);
      p.push_back(&l.bias);
    }
    return p;
  }

  struct Trace {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
    Matrix output;
  };

  Trace forward(const Matrix& x) const {
    require(x.cols() == input_dim(), ErrorKind::ShapeMismatch, "MLP input width mismatch");
    Trace t;
    Matrix h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      t.inputs.push_back(h);
      Matrix pre = layers_[i].apply(h);
      h = pre;
      if (i + 1 < layers_.size())
        for (double& v : h.values()) v = v > 0.0 ? v : slope_ * v;
      t.pre.push_back(std::move(pre));
    }
    t.output = std::move(h);
    return t;
  }

  struct Backward {
    std::vector<Matrix> grads;  // aligned with parameters()
    Matrix input_grad;
  };

  Backward backward(const Trace& t, const Matrix& dout) const {
    Backward b;
    b.grads.resize(2 * layers_.size());
    Matrix g = dout;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      if (i + 1 < layers_.size()) {
        const Matrix& pre = t.pre[i];
        for (std::size_t k = 0; k < g.size(); ++k) g.values()[k] *= pre.values()[k] > 0.0 ? 1.0 : slope_;
      }
      b.grads[2 * i] = matmul_at_b(t.inputs[i], g);
      b.grads[2 * i + 1] = column_sums(g);
      g = matmul_a_bt(g, layers_[i].weight);
    }
    b.input_grad = std::move(g);
    return b;
  }

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<std::size_t> dims_;
  double slope_ = 0.01;
  std::vector<Dense> layers_;
};

/// Row-wise L2 normalization and its vector-Jacobian product.
inline Matrix l2_normalize_rows(const Matrix& x, std::vector<double>* norms = nullptr) {
  Matrix out(x.rows(), x.cols());
  if (norms) norms->assign(x.rows(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double n = 0.0;
    for (double v : x.row(r)) n += v * v;
    n = std::sqrt(n);
    require(n > 0.0, ErrorKind::ZeroFeatureRow, "cannot normalize a zero row");
    if (norms) (*norms)[r] = n;
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c) / n;
  }
  return out;
}

inline Matrix l2_normalize_backward(const Matrix& normalized, const std::vector<double>& norms, const Matrix& dnormalized) {
  Matrix out(normalized.rows(), normalized.cols());
  for (std::size_t r = 0; r < normalized.rows(); ++r) {
    double dot = 0.0;
    for (std::size_t c = 0; c < normalized.cols(); ++c) dot += normalized(r, c) * dnormalized(r, c);
    for (std::size_t c = 0; c < normalized.cols(); ++c)
      out(r, c) = (dnormalized(r, c) - normalized(r, c) * dot) / norms[r];
  }
  return out;
}

}  // namespace ssl_lab
