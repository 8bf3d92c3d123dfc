#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"

#include "ssl_lab/error.hpp"

namespace ssl_lab {

/// Rows are true classes, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes) : n_(num_classes), counts_(num_classes * num_classes, 0) {
    require(num_classes >= 1, ErrorKind::InvalidArgument, "confusion matrix needs at least one class");
  }

  static ConfusionMatrix from_counts(const std::vector<std::vector<std::uint64_t>>& rows) {
    ConfusionMatrix cm(rows.size());
    for (std::size_t t = 0; t < rows.size(); ++t) {
      require(rows[t].size() == rows.size(), ErrorKind::ShapeMismatch, "confusion matrix must be square");
      for (std::size_t p = 0; p < rows.size(); ++p) cm.counts_[t * cm.n_ + p] = rows[t][p];
    }
    return cm;
  }

  std::size_t num_classes() const noexcept { return n_; }

  void update(std::size_t true_label, std::size_t predicted_label) {
    require(true_label < n_ && predicted_label < n_, ErrorKind::InvalidArgument,
            "label out of range (" + std::to_string(true_label) + ", " + std::to_string(predicted_label) + ")");
    ++counts_[true_label * n_ + predicted_label];
  }

  std::uint64_t count(std::size_t true_label, std::size_t predicted_label) const {
    return counts_.at(true_label * n_ + predicted_label);
  }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    require(other.n_ == n_, ErrorKind::ShapeMismatch, "cannot merge confusion matrices of different sizes");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;  // macro
  double recall = 0.0;     // macro
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;

  nlohmann::json to_json() const {
    return {{"accuracy", accuracy}, {"precision", precision}, {"recall", recall},
            {"micro_f1", micro_f1}, {"macro_f1", macro_f1},   {"per_class_f1", per_class_f1}};
  }

  static MetricsReport from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.micro_f1 = j.at("micro_f1").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    if (j.contains("per_class_f1")) r.per_class_f1 = j["per_class_f1"].get<std::vector<double>>();
    return r;
  }

  static std::string csv_header() { return "Accuracy,Precision,Recall,Micro-F1,Macro-F1"; }

  /// Percentages with two decimals, in the table column order.
  std::string csv_row() const {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.2f,%.2f,%.2f,%.2f,%.2f", 100 * accuracy, 100 * precision, 100 * recall,
                  100 * micro_f1, 100 * macro_f1);
    return buf;
  }
};

inline double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

inline double harmonic_f1(double p, double r) {
  if (p == r) return p;  // keeps micro-F1 bit-equal to accuracy
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

inline MetricsReport report(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  require(total > 0, ErrorKind::InvalidArgument, "cannot report on an empty confusion matrix");
  const std::size_t n = cm.num_classes();
  MetricsReport r;
  double trace = 0.0, tp_sum = 0.0, fp_sum = 0.0, fn_sum = 0.0;
  double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    double tp = static_cast<double>(cm.count(c, c));
    double fp = 0.0, fn = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == c) continue;
      fp += static_cast<double>(cm.count(k, c));
      fn += static_cast<double>(cm.count(c, k));
    }
    const double precision = safe_ratio(tp, tp + fp);
    const double recall = safe_ratio(tp, tp + fn);
    const double f1 = harmonic_f1(precision, recall);
    r.per_class_f1.push_back(f1);
    p_sum += precision;
    r_sum += recall;
    f_sum += f1;
    trace += tp;
    tp_sum += tp;
    fp_sum += fp;
    fn_sum += fn;
  }
  const double dn = static_cast<double>(n);
  r.accuracy = trace / static_cast<double>(total);
  r.precision = p_sum / dn;
  r.recall = r_sum / dn;
  r.macro_f1 = f_sum / dn;
  r.micro_f1 = harmonic_f1(safe_ratio(tp_sum, tp_sum + fp_sum), safe_ratio(tp_sum, tp_sum + fn_sum));
  return r;
}

}  // namespace ssl_lab
