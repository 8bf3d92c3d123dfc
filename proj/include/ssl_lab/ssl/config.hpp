#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "json.hpp"

#include "ssl_lab/error.hpp"
#include "ssl_lab/netcore/optimizer.hpp"

namespace ssl_lab {

enum class Method { Supervised, FixMatch, FixMatchCr, FreeMatch, MixMatch, MeanTeacher, NoisyStudent, LabelProp, Sgan };

inline constexpr Method kAllMethods[] = {Method::Supervised, Method::FixMatch,    Method::FixMatchCr,
                                         Method::FreeMatch,  Method::MixMatch,    Method::MeanTeacher,
                                         Method::NoisyStudent, Method::LabelProp, Method::Sgan};

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::Supervised: return "supervised";
    case Method::FixMatch: return "fixmatch";
    case Method::FixMatchCr: return "fixmatch_cr";
    case Method::FreeMatch: return "freematch";
    case Method::MixMatch: return "mixmatch";
    case Method::MeanTeacher: return "meanteacher";
    case Method::NoisyStudent: return "noisystudent";
    case Method::LabelProp: return "labelprop";
    case Method::Sgan: return "sgan";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : kAllMethods)
    if (method_name(m) == s) return m;
  throw Error(ErrorKind::Config, "unknown method '" + std::string(s) + "'");
}

namespace detail {

/// Reads known keys from a JSON object and rejects everything else.
class FieldReader {
 public:
  FieldReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    require(j.is_object(), ErrorKind::Config, where_ + " must be a JSON object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Config, where_ + "." + key + ": " + e.what());
    }
  }

  template <class T>
  void read(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    T v{};
    read(key, v);
    out = v;
  }

  bool has(const char* key) const { return j_.contains(key); }
  const nlohmann::json& at(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items())
      require(seen_.count(item.key()) > 0, ErrorKind::Config, "unknown key '" + where_ + "." + item.key() + "'");
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline void check(bool cond, const std::string& what) { require(cond, ErrorKind::Config, what); }

}  // namespace detail

struct FixMatchConfig {
  double confidence_threshold = 0.9;
  double unsupervised_weight = 1.0;
};

struct CrConfig {
  double contrastive_weight = 1.0;
  double unsup_threshold = 0.7;
  double contrastive_threshold = 0.7;
  double unsupervised_weight = 1.0;
  std::size_t projection_dim = 32;
  std::size_t projection_hidden = 64;
  double projection_lr = 1e-3;
  double temperature = 0.07;
};

struct FreeMatchConfig {
  double fairness_weight = 0.01;
  double unsupervised_weight = 1.0;
  double threshold_ema = 0.999;
  std::optional<double> frozen_threshold;  // pins every class threshold when set
  std::size_t batch_size = 32;
};

struct MixMatchConfig {
  double raw_weight = 4.0;  // divided by the number of classes
  double beta_alpha = 0.3;
  std::size_t n_guesses = 2;
  double sharpen_t = 0.5;
};

struct MeanTeacherConfig {
  double ema_decay = 0.99;
  double consistency_max_weight = 1.0;
  double ramp_fraction = 0.25;
};

struct NoisyStudentConfig {
  std::size_t teacher_epochs = 20;
  std::size_t iterations = 3;
  std::size_t student_epochs = 20;
};

struct LabelPropConfig {
  std::size_t supervised_epochs = 5;
  std::size_t propagation_epochs = 5;
  std::size_t k = 50;
  double alpha = 0.99;
  double gamma = 3.0;
  std::size_t feature_layer = 0;  // 0 = pooled embedding, l = hidden layer l
};

struct SganConfig {
  std::size_t epochs = 40;
  double learning_rate = 1e-3;
  double weight_decay = 1e-3;
  std::size_t noise_dim = 32;
  std::size_t generator_hidden = 128;
};

struct MethodConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  std::size_t unlabeled_ratio = 1;
  OptimizerSettings optimizer;
  FixMatchConfig fixmatch;
  CrConfig cr;
  FreeMatchConfig freematch;
  MixMatchConfig mixmatch;
  MeanTeacherConfig meanteacher;
  NoisyStudentConfig noisystudent;
  LabelPropConfig labelprop;
  SganConfig sgan;

  /// Epoch counts of zero are accepted here (they return the initial model);
  /// experiment configs require >= 1.
  void validate() const {
    using detail::check;
    auto unit = [](double t) { return t > 0.0 && t <= 1.0; };
    check(batch_size >= 1 && freematch.batch_size >= 1, "batch sizes must be >= 1");
    check(unlabeled_ratio >= 1, "unlabeled_ratio must be >= 1");
    check(optimizer.encoder.learning_rate >= 0 && optimizer.head.learning_rate >= 0 &&
              optimizer.encoder.weight_decay >= 0 && optimizer.head.weight_decay >= 0,
          "optimizer rates must be >= 0");
    check(unit(fixmatch.confidence_threshold), "fixmatch.confidence_threshold must lie in (0,1]");
    check(fixmatch.unsupervised_weight >= 0, "fixmatch.unsupervised_weight must be >= 0");
    check(unit(cr.unsup_threshold) && unit(cr.contrastive_threshold), "cr thresholds must lie in (0,1]");
    check(cr.contrastive_weight >= 0 && cr.unsupervised_weight >= 0, "cr weights must be >= 0");
    check(cr.projection_dim >= 1 && cr.projection_hidden >= 1, "cr projection sizes must be >= 1");
    check(cr.projection_lr >= 0 && cr.temperature > 0, "cr projection_lr >= 0 and temperature > 0 required");
    check(freematch.fairness_weight >= 0 && freematch.unsupervised_weight >= 0, "freematch weights must be >= 0");
    check(freematch.threshold_ema >= 0 && freematch.threshold_ema <= 1, "freematch.threshold_ema must lie in [0,1]");
    check(!freematch.frozen_threshold || unit(*freematch.frozen_threshold), "freematch.frozen_threshold must lie in (0,1]");
    check(mixmatch.raw_weight >= 0 && mixmatch.beta_alpha > 0 && mixmatch.n_guesses >= 1 && mixmatch.sharpen_t > 0,
          "invalid mixmatch settings");
    check(meanteacher.ema_decay >= 0 && meanteacher.ema_decay <= 1, "meanteacher.ema_decay must lie in [0,1]");
    check(meanteacher.consistency_max_weight >= 0 && meanteacher.ramp_fraction >= 0, "invalid meanteacher schedule");
    check(labelprop.k >= 1 && labelprop.alpha > 0 && labelprop.alpha < 1 && labelprop.gamma >= 1,
          "invalid labelprop settings (k >= 1, alpha in (0,1), gamma >= 1)");
    check(sgan.learning_rate >= 0 && sgan.weight_decay >= 0 && sgan.noise_dim >= 1 &&
              sgan.generator_hidden >= 1,
          "invalid sgan settings");
  }
};

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const GroupHyper& g) { return {{"learning_rate", g.learning_rate}, {"weight_decay", g.weight_decay}}; }

inline void from_json_checked(const nlohmann::json& j, GroupHyper& g, const std::string& where) {
  detail::FieldReader r(j, where);
  r.read("learning_rate", g.learning_rate);
  r.read("weight_decay", g.weight_decay);
  r.finish();
}

inline nlohmann::json to_json(const MethodConfig& c) {
  nlohmann::json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["unlabeled_ratio"] = c.unlabeled_ratio;
  j["optimizer"] = {{"encoder", to_json(c.optimizer.encoder)}, {"head", to_json(c.optimizer.head)}};
  j["fixmatch"] = {{"confidence_threshold", c.fixmatch.confidence_threshold},
                   {"unsupervised_weight", c.fixmatch.unsupervised_weight}};
  j["fixmatch_cr"] = {{"contrastive_weight", c.cr.contrastive_weight},
                      {"unsup_threshold", c.cr.unsup_threshold},
                      {"contrastive_threshold", c.cr.contrastive_threshold},
                      {"unsupervised_weight", c.cr.unsupervised_weight},
                      {"projection_dim", c.cr.projection_dim},
                      {"projection_hidden", c.cr.projection_hidden},
                      {"projection_lr", c.cr.projection_lr},
                      {"temperature", c.cr.temperature}};
  j["freematch"] = {{"fairness_weight", c.freematch.fairness_weight},
                    {"unsupervised_weight", c.freematch.unsupervised_weight},
                    {"threshold_ema", c.freematch.threshold_ema},
                    {"frozen_threshold", c.freematch.frozen_threshold ? nlohmann::json(*c.freematch.frozen_threshold)
                                                                      : nlohmann::json(nullptr)},
                    {"batch_size", c.freematch.batch_size}};
  j["mixmatch"] = {{"raw_weight", c.mixmatch.raw_weight},
                   {"beta_alpha", c.mixmatch.beta_alpha},
                   {"n_guesses", c.mixmatch.n_guesses},
                   {"sharpen_t", c.mixmatch.sharpen_t}};
  j["meanteacher"] = {{"ema_decay", c.meanteacher.ema_decay},
                      {"consistency_max_weight", c.meanteacher.consistency_max_weight},
                      {"ramp_fraction", c.meanteacher.ramp_fraction}};
  j["noisystudent"] = {{"teacher_epochs", c.noisystudent.teacher_epochs},
                       {"iterations", c.noisystudent.iterations},
                       {"student_epochs", c.noisystudent.student_epochs}};
  j["labelprop"] = {{"supervised_epochs", c.labelprop.supervised_epochs},
                    {"propagation_epochs", c.labelprop.propagation_epochs},
                    {"k", c.labelprop.k},
                    {"alpha", c.labelprop.alpha},
                    {"gamma", c.labelprop.gamma},
                    {"feature_layer", c.labelprop.feature_layer}};
  j["sgan"] = {{"epochs", c.sgan.epochs},
               {"learning_rate", c.sgan.learning_rate},
               {"weight_decay", c.sgan.weight_decay},
               {"noise_dim", c.sgan.noise_dim},
               {"generator_hidden", c.sgan.generator_hidden}};
  return j;
}

/// Overlays `j` on `c`; missing keys keep their current values.
inline void from_json_checked(const nlohmann::json& j, MethodConfig& c, const std::string& where = "method_config") {
  detail::FieldReader r(j, where);
  r.read("epochs", c.epochs);
  r.read("batch_size", c.batch_size);
  r.read("unlabeled_ratio", c.unlabeled_ratio);
  if (r.has("optimizer")) {
    detail::FieldReader o(r.at("optimizer"), where + ".optimizer");
    if (o.has("encoder")) from_json_checked(o.at("encoder"), c.optimizer.encoder, where + ".optimizer.encoder");
    if (o.has("head")) from_json_checked(o.at("head"), c.optimizer.head, where + ".optimizer.head");
    o.finish();
  }
  if (r.has("fixmatch")) {
    detail::FieldReader s(r.at("fixmatch"), where + ".fixmatch");
    s.read("confidence_threshold", c.fixmatch.confidence_threshold);
    s.read("unsupervised_weight", c.fixmatch.unsupervised_weight);
    s.finish();
  }
  if (r.has("fixmatch_cr")) {
    detail::FieldReader s(r.at("fixmatch_cr"), where + ".fixmatch_cr");
    s.read("contrastive_weight", c.cr.contrastive_weight);
    s.read("unsup_threshold", c.cr.unsup_threshold);
    s.read("contrastive_threshold", c.cr.contrastive_threshold);
    s.read("unsupervised_weight", c.cr.unsupervised_weight);
    s.read("projection_dim", c.cr.projection_dim);
    s.read("projection_hidden", c.cr.projection_hidden);
    s.read("projection_lr", c.cr.projection_lr);
    s.read("temperature", c.cr.temperature);
    s.finish();
  }
  if (r.has("freematch")) {
    detail::FieldReader s(r.at("freematch"), where + ".freematch");
    s.read("fairness_weight", c.freematch.fairness_weight);
    s.read("unsupervised_weight", c.freematch.unsupervised_weight);
    s.read("threshold_ema", c.freematch.threshold_ema);
    s.read("frozen_threshold", c.freematch.frozen_threshold);
    s.read("batch_size", c.freematch.batch_size);
    s.finish();
  }
  if (r.has("mixmatch")) {
    detail::FieldReader s(r.at("mixmatch"), where + ".mixmatch");
    s.read("raw_weight", c.mixmatch.raw_weight);
    s.read("beta_alpha", c.mixmatch.beta_alpha);
    s.read("n_guesses", c.mixmatch.n_guesses);
    s.read("sharpen_t", c.mixmatch.sharpen_t);
    s.finish();
  }
  if (r.has("meanteacher")) {
    detail::FieldReader s(r.at("meanteacher"), where + ".meanteacher");
    s.read("ema_decay", c.meanteacher.ema_decay);
    s.read("consistency_max_weight", c.meanteacher.consistency_max_weight);
    s.read("ramp_fraction", c.meanteacher.ramp_fraction);
    s.finish();
  }
  if (r.has("noisystudent")) {
    detail::FieldReader s(r.at("noisystudent"), where + ".noisystudent");
    s.read("teacher_epochs", c.noisystudent.teacher_epochs);
    s.read("iterations", c.noisystudent.iterations);
    s.read("student_epochs", c.noisystudent.student_epochs);
    s.finish();
  }
  if (r.has("labelprop")) {
    detail::FieldReader s(r.at("labelprop"), where + ".labelprop");
    s.read("supervised_epochs", c.labelprop.supervised_epochs);
    s.read("propagation_epochs", c.labelprop.propagation_epochs);
    s.read("k", c.labelprop.k);
    s.read("alpha", c.labelprop.alpha);
    s.read("gamma", c.labelprop.gamma);
    s.read("feature_layer", c.labelprop.feature_layer);
    s.finish();
  }
  if (r.has("sgan")) {
    detail::FieldReader s(r.at("sgan"), where + ".sgan");
    s.read("epochs", c.sgan.epochs);
    s.read("learning_rate", c.sgan.learning_rate);
    s.read("weight_decay", c.sgan.weight_decay);
    s.read("noise_dim", c.sgan.noise_dim);
    s.read("generator_hidden", c.sgan.generator_hidden);
    s.finish();
  }
  r.finish();
}

}  // namespace ssl_lab
