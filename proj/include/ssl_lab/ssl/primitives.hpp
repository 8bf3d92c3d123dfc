#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ssl_lab/error.hpp"
#include "ssl_lab/matrix.hpp"

namespace ssl_lab {

struct PseudoLabels {
  std::vector<std::size_t> labels;
  std::vector<double> confidence;
  std::vector<std::uint8_t> mask;

  std::size_t count() const {
    std::size_t n = 0;
    for (auto m : mask) n += m;
    return n;
  }
  double rate() const { return mask.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(mask.size()); }
};

/// argmax (first wins ties) with mask max-prob >= tau.
inline PseudoLabels pseudo_label(const Matrix& probs, double tau) {
  PseudoLabels out;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const std::size_t c = argmax(probs.row(r));
    out.labels.push_back(c);
    out.confidence.push_back(probs(r, c));
    out.mask.push_back(probs(r, c) >= tau ? 1 : 0);
  }
  return out;
}

/// Per-class thresholds: sample r passes iff its max prob >= thresholds[argmax].
inline PseudoLabels pseudo_label(const Matrix& probs, const std::vector<double>& thresholds) {
  require(thresholds.size() == probs.cols(), ErrorKind::ShapeMismatch, "one threshold per class expected");
  PseudoLabels out = pseudo_label(probs, 0.0);
  for (std::size_t r = 0; r < probs.rows(); ++r) out.mask[r] = out.confidence[r] >= thresholds[out.labels[r]] ? 1 : 0;
  return out;
}

inline std::vector<double> sharpen(std::span<const double> p, double temperature) {
  require(temperature > 0.0, ErrorKind::InvalidArgument, "sharpening temperature must be positive");
  std::vector<double> q(p.size());
  const double inv_t = 1.0 / temperature;
  // scale by the max first so tiny probabilities do not underflow to an all-zero row
  const double top = *std::max_element(p.begin(), p.end());
  double s = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    q[c] = top > 0.0 ? std::pow(p[c] / top, inv_t) : 1.0;
    s += q[c];
  }
  for (double& v : q) v /= s;
  return q;
}

inline Matrix sharpen_rows(const Matrix& probs, double temperature) {
  Matrix out(probs.rows(), probs.cols());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const auto q = sharpen(probs.row(r), temperature);
    std::copy(q.begin(), q.end(), out.row(r).begin());
  }
  return out;
}

/// Sigmoid-shaped ramp-up: max_weight * exp(-5 (1 - min(1, step/ramp))^2).
inline double consistency_weight(std::size_t step, std::size_t ramp_steps, double max_weight) {
  if (ramp_steps == 0) return max_weight;
  const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(ramp_steps));
  if (t >= 1.0) return max_weight;
  const double u = 1.0 - t;
  return max_weight * std::exp(-5.0 * u * u);
}

/// Self-adaptive global and per-class confidence thresholds.
class FreeMatchThresholds {
 public:
  FreeMatchThresholds(std::size_t num_classes, double momentum)
      : momentum_(momentum), tau_(1.0 / static_cast<double>(num_classes)),
        class_mean_(num_classes, 1.0 / static_cast<double>(num_classes)),
        label_hist_(num_classes, 1.0 / static_cast<double>(num_classes)) {
    require(num_classes >= 1 && momentum >= 0.0 && momentum <= 1.0, ErrorKind::InvalidArgument, "bad threshold state");
  }

  /// Pins every class threshold to `tau`; updates become no-ops.
  void freeze(double tau) {
    frozen_ = true;
    tau_ = tau;
    std::fill(class_mean_.begin(), class_mean_.end(), 1.0 / static_cast<double>(class_mean_.size()));
    std::fill(label_hist_.begin(), label_hist_.end(), 1.0 / static_cast<double>(label_hist_.size()));
  }

  bool frozen() const noexcept { return frozen_; }
  double global() const noexcept { return tau_; }
  const std::vector<double>& class_mean() const noexcept { return class_mean_; }
  /// EMA of the argmax histogram of the weak-view predictions.
  const std::vector<double>& label_hist() const noexcept { return label_hist_; }

  void update(const Matrix& probs) {
    if (frozen_ || probs.rows() == 0) return;
    require(probs.cols() == class_mean_.size(), ErrorKind::ShapeMismatch, "threshold update width mismatch");
    const double n = static_cast<double>(probs.rows());
    double mean_max = 0.0;
    std::vector<double> mean(class_mean_.size(), 0.0), hist(class_mean_.size(), 0.0);
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      auto row = probs.row(r);
      const auto top = std::max_element(row.begin(), row.end());
      mean_max += *top;
      hist[static_cast<std::size_t>(top - row.begin())] += 1.0;
      for (std::size_t c = 0; c < row.size(); ++c) mean[c] += row[c];
    }
    tau_ = momentum_ * tau_ + (1.0 - momentum_) * mean_max / n;
    for (std::size_t c = 0; c < mean.size(); ++c) {
      class_mean_[c] = momentum_ * class_mean_[c] + (1.0 - momentum_) * mean[c] / n;
      label_hist_[c] = momentum_ * label_hist_[c] + (1.0 - momentum_) * hist[c] / n;
    }
  }

  std::vector<double> thresholds() const {
    const double top = *std::max_element(class_mean_.begin(), class_mean_.end());
    std::vector<double> t(class_mean_.size());
    for (std::size_t c = 0; c < t.size(); ++c) t[c] = class_mean_[c] == top ? tau_ : tau_ * class_mean_[c] / top;
    return t;
  }

 private:
  double momentum_;
  double tau_;
  std::vector<double> class_mean_;
  std::vector<double> label_hist_;
  bool frozen_ = false;
};

/// Self-adaptive fairness: sum_k a_k log(b_k + eps), the negative cross
/// entropy of a = SumNorm(class_mean / label_hist) against
/// b = SumNorm(pbar / hbar), where pbar is the mean of the masked rows of
/// `probs` and hbar the histogram of their argmax. Classes with an empty
/// histogram bin get a zero scale. Returns the loss and dL/dprobs.
struct FairnessTerm {
  double loss = 0.0;
  Matrix dprobs;
};

inline FairnessTerm fairness_term(const Matrix& probs, const PseudoLabels& pl, std::span<const double> class_mean,
                                  std::span<const double> label_hist) {
  constexpr double kEps = 1e-12;
  const std::size_t c = probs.cols();
  require(class_mean.size() == c && label_hist.size() == c, ErrorKind::ShapeMismatch, "fairness state width mismatch");
  FairnessTerm out;
  out.dprobs = Matrix(probs.rows(), c);
  const std::size_t m = pl.count();
  if (m == 0) return out;
  std::vector<double> a(c, 0.0), pbar(c, 0.0), hist(c, 0.0);
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    if (!pl.mask[r]) continue;
    auto row = probs.row(r);
    for (std::size_t k = 0; k < c; ++k) pbar[k] += row[k];
    hist[static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin())] += 1.0;
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  double a_sum = 0.0, u_sum = 0.0;
  std::vector<double> scale(c, 0.0), u(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    pbar[k] *= inv_m;
    hist[k] *= inv_m;
    if (label_hist[k] > 0.0) a[k] = class_mean[k] / label_hist[k];
    a_sum += a[k];
    if (hist[k] > 0.0) scale[k] = 1.0 / hist[k];
    u[k] = pbar[k] * scale[k];
    u_sum += u[k];
  }
  if (a_sum <= 0.0 || u_sum <= 0.0) return out;
  std::vector<double> dl_du(c, 0.0);
  double cross = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    a[k] /= a_sum;
    const double b = u[k] / u_sum;
    out.loss += a[k] * std::log(b + kEps);
    cross += a[k] * b / (b + kEps);
  }
  for (std::size_t k = 0; k < c; ++k) dl_du[k] = (a[k] / (u[k] / u_sum + kEps) - cross) / u_sum;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    if (!pl.mask[r]) continue;
    for (std::size_t k = 0; k < c; ++k) out.dprobs(r, k) = dl_du[k] * scale[k] * inv_m;
  }
  return out;
}

struct ContrastiveTerm {
  double loss = 0.0;
  Matrix dz;  // dL/dprojections
  std::size_t anchors = 0;
};

/// Supervised-contrastive loss over confident samples. Anchors are rows with
/// confidence >= threshold; positives are other anchors sharing the anchor's
/// pseudo-label; the denominator runs over every other row. Anchors without
/// a positive add 0 but still count in the mean.
inline ContrastiveTerm contrastive_loss(const Matrix& z, std::span<const std::size_t> labels,
                                        std::span<const double> confidence, double threshold, double temperature) {
  require(temperature > 0.0, ErrorKind::InvalidArgument, "temperature must be positive");
  require(labels.size() == z.rows() && confidence.size() == z.rows(), ErrorKind::ShapeMismatch,
          "contrastive inputs disagree in length");
  const std::size_t n = z.rows();
  ContrastiveTerm out;
  out.dz = Matrix(n, z.cols());
  std::vector<std::uint8_t> anchor(n);
  for (std::size_t i = 0; i < n; ++i) {
    anchor[i] = confidence[i] >= threshold;
    out.anchors += anchor[i];
  }
  if (out.anchors == 0) return out;
  const Matrix sim = matmul_a_bt(z, z);
  const double inv_t = 1.0 / temperature;
  const double inv_a = 1.0 / static_cast<double>(out.anchors);
  std::vector<double> e(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!anchor[i]) continue;
    bool has_pos = false;
    for (std::size_t j = 0; j < n; ++j) has_pos |= j != i && anchor[j] && labels[j] == labels[i];
    if (!has_pos) continue;
    // shift by the max similarity for stability; it cancels in the ratio
    double top = -1e300;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) top = std::max(top, sim(i, j) * inv_t);
    double all = 0.0, pos = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      e[j] = std::exp(sim(i, j) * inv_t - top);
      all += e[j];
      if (anchor[j] && labels[j] == labels[i]) pos += e[j];
    }
    out.loss -= inv_a * std::log(pos / all);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const bool is_pos = anchor[j] && labels[j] == labels[i];
      const double ds = inv_a * inv_t * (e[j] / all - (is_pos ? e[j] / pos : 0.0));  // dL/dsim(i,j)
      for (std::size_t k = 0; k < z.cols(); ++k) {
        out.dz(i, k) += ds * z(j, k);
        out.dz(j, k) += ds * z(i, k);
      }
    }
  }
  return out;
}

}  // namespace ssl_lab
