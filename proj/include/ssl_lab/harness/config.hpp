#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ssl_lab/augment.hpp"
#include "ssl_lab/corpus.hpp"
#include "ssl_lab/netcore/checkpoint.hpp"
#include "ssl_lab/ssl/config.hpp"

namespace ssl_lab {

struct DataPaths {
  std::string train;
  std::string validation;
  std::string test;
  std::string unlabeled;  // optional
  std::string entities;   // optional, surface<TAB>PERS|ORG
  std::string synonyms;   // optional, used by the eda augmenter
};

/// Classifier shape; the vocabulary size comes from the data.
struct ModelSettings {
  std::size_t embed_dim = 64;
  std::vector<std::size_t> hidden_dims = {128, 64};
  double dropout_rate = 0.2;
  double leaky_slope = 0.01;

  ClassifierConfig classifier(std::size_t vocab_size) const {
    ClassifierConfig c;
    c.vocab_size = vocab_size;
    c.embed_dim = embed_dim;
    c.hidden_dims = hidden_dims;
    c.dropout_rate = dropout_rate;
    c.leaky_slope = leaky_slope;
    return c;
  }
};

struct ExperimentConfig {
  DataPaths data;
  PreprocessConfig preprocess;
  ModelSettings model;
  Method method = Method::Supervised;
  MethodConfig method_config;
  AugmenterSpec augment;
  std::vector<std::uint64_t> seeds = {1};
  std::string output_dir = "runs";
  std::string base_dir = ".";  // relative paths resolve here; not part of the document

  std::string resolve(const std::string& path) const {
    if (path.empty()) return path;
    const std::filesystem::path p(path);
    return p.is_absolute() ? path : (std::filesystem::path(base_dir) / p).lexically_normal().string();
  }

  /// Shape and value checks; `check_files` also requires referenced files to exist.
  void validate(bool check_files = true) const {
    auto check = [](bool ok, const std::string& what) { require(ok, ErrorKind::Config, what); };
    preprocess.validate();
    ClassifierConfig probe = model.classifier(1);
    try {
      probe.validate();
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, std::string("model: ") + e.what());
    }
    method_config.validate();
    augment.validate();
    const MethodConfig& m = method_config;
    check(m.epochs >= 1, "method_config.epochs must be >= 1");
    if (method == Method::NoisyStudent)
      check(m.noisystudent.teacher_epochs >= 1 && m.noisystudent.student_epochs >= 1 && m.noisystudent.iterations >= 1,
            "noisystudent epochs and iterations must be >= 1");
    if (method == Method::LabelProp)
      check(m.labelprop.supervised_epochs >= 1 && m.labelprop.propagation_epochs >= 1,
            "labelprop epoch counts must be >= 1");
    if (method == Method::Sgan) check(m.sgan.epochs >= 1, "sgan.epochs must be >= 1");
    check(!seeds.empty(), "seeds must list at least one seed");
    check(!output_dir.empty(), "output_dir must be set");
    check(!data.train.empty() && !data.validation.empty() && !data.test.empty(),
          "data.train, data.validation and data.test are required");
    if (!check_files) return;
    auto exists = [&](const std::string& key, const std::string& path) {
      if (path.empty()) return;
      check(std::filesystem::is_regular_file(resolve(path)), key + ": file '" + resolve(path) + "' not found");
    };
    exists("data.train", data.train);
    exists("data.validation", data.validation);
    exists("data.test", data.test);
    exists("data.unlabeled", data.unlabeled);
    exists("data.entities", data.entities);
    exists("data.synonyms", data.synonyms);
    if (augment.kind == AugmentKind::Cache) exists("augment.path", augment.path);
  }
};

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const AugmenterSpec& a) {
  return {{"kind", augment_kind_name(a.kind)},
          {"sigma_weak", a.sigma_weak},
          {"sigma_strong", a.sigma_strong},
          {"eda_alpha", a.eda_alpha},
          {"n_aug", a.n_aug},
          {"mixup_alpha", a.mixup_alpha},
          {"mode", augment_mode_name(a.mode)},
          {"path", a.path},
          {"endpoint", a.endpoint},
          {"variants_per_sample", a.variants_per_sample},
          {"timeout_seconds", a.timeout_seconds},
          {"retries", a.retries}};
}

inline void from_json_checked(const nlohmann::json& j, AugmenterSpec& a, const std::string& where = "augment") {
  detail::FieldReader r(j, where);
  std::string kind(augment_kind_name(a.kind)), mode(augment_mode_name(a.mode));
  r.read("kind", kind);
  r.read("mode", mode);
  a.kind = parse_augment_kind(kind);
  a.mode = parse_augment_mode(mode);
  r.read("sigma_weak", a.sigma_weak);
  r.read("sigma_strong", a.sigma_strong);
  r.read("eda_alpha", a.eda_alpha);
  r.read("n_aug", a.n_aug);
  r.read("mixup_alpha", a.mixup_alpha);
  r.read("path", a.path);
  r.read("endpoint", a.endpoint);
  r.read("variants_per_sample", a.variants_per_sample);
  r.read("timeout_seconds", a.timeout_seconds);
  r.read("retries", a.retries);
  r.finish();
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"data",
           {{"train", c.data.train},
            {"validation", c.data.validation},
            {"test", c.data.test},
            {"unlabeled", c.data.unlabeled},
            {"entities", c.data.entities},
            {"synonyms", c.data.synonyms}}},
          {"preprocess",
           {{"max_len", c.preprocess.max_len},
            {"vocab_size", c.preprocess.vocab_size},
            {"collapse_run_len", c.preprocess.collapse_run_len}}},
          {"model",
           {{"embed_dim", c.model.embed_dim},
            {"hidden_dims", c.model.hidden_dims},
            {"dropout_rate", c.model.dropout_rate},
            {"leaky_slope", c.model.leaky_slope}}},
          {"method", method_name(c.method)},
          {"method_config", to_json(c.method_config)},
          {"augment", to_json(c.augment)},
          {"seeds", c.seeds},
          {"output_dir", c.output_dir}};
}

/// Overlays `j` on `c`. Unknown keys anywhere are rejected.
inline void from_json_checked(const nlohmann::json& j, ExperimentConfig& c) {
  detail::FieldReader r(j, "config");
  if (r.has("data")) {
    detail::FieldReader d(r.at("data"), "config.data");
    d.read("train", c.data.train);
    d.read("validation", c.data.validation);
    d.read("test", c.data.test);
    d.read("unlabeled", c.data.unlabeled);
    d.read("entities", c.data.entities);
    d.read("synonyms", c.data.synonyms);
    d.finish();
  }
  if (r.has("preprocess")) {
    detail::FieldReader p(r.at("preprocess"), "config.preprocess");
    p.read("max_len", c.preprocess.max_len);
    p.read("vocab_size", c.preprocess.vocab_size);
    p.read("collapse_run_len", c.preprocess.collapse_run_len);
    p.finish();
  }
  if (r.has("model")) {
    detail::FieldReader m(r.at("model"), "config.model");
    m.read("embed_dim", c.model.embed_dim);
    m.read("hidden_dims", c.model.hidden_dims);
    m.read("dropout_rate", c.model.dropout_rate);
    m.read("leaky_slope", c.model.leaky_slope);
    m.finish();
  }
  if (r.has("method")) {
    std::string name;
    r.read("method", name);
    c.method = parse_method(name);
  }
  if (r.has("method_config")) from_json_checked(r.at("method_config"), c.method_config, "config.method_config");
  if (r.has("augment")) from_json_checked(r.at("augment"), c.augment, "config.augment");
  r.read("seeds", c.seeds);
  r.read("output_dir", c.output_dir);
  r.finish();
}

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::string& base_dir = ".") {
  ExperimentConfig c;
  c.base_dir = base_dir;
  from_json_checked(j, c);
  return c;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, path + ": " + e.what());
  }
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  const auto base = std::filesystem::path(path).parent_path();
  return parse_experiment_config(read_json_file(path), base.empty() ? "." : base.string());
}

// ---------------------------------------------------------------------------
// Hashing

/// The fields that can change a run's outcome: seeds and the output location
/// are dropped, and so are method sections and augmenter fields the chosen
/// method and augmenter never read.
inline nlohmann::json semantic_json(const ExperimentConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("seeds");
  j.erase("output_dir");
  nlohmann::json& mc = j["method_config"];
  static const std::pair<Method, const char*> kSections[] = {
      {Method::FixMatch, "fixmatch"},       {Method::FixMatchCr, "fixmatch_cr"},   {Method::FreeMatch, "freematch"},
      {Method::MixMatch, "mixmatch"},       {Method::MeanTeacher, "meanteacher"}, {Method::NoisyStudent, "noisystudent"},
      {Method::LabelProp, "labelprop"},     {Method::Sgan, "sgan"}};
  for (const auto& [m, key] : kSections)
    if (m != c.method) mc.erase(key);

  nlohmann::json& a = j["augment"];
  const AugmentKind k = c.augment.kind;
  if (k == AugmentKind::None) {
    a.erase("sigma_weak");
    a.erase("sigma_strong");
  }
  if (k != AugmentKind::Eda) {
    a.erase("eda_alpha");
    a.erase("n_aug");
    j["data"].erase("synonyms");
  }
  if (k != AugmentKind::ManifoldMixup) a.erase("mixup_alpha");
  if (k != AugmentKind::Cache) a.erase("path");
  if (k != AugmentKind::Http) {
    a.erase("endpoint");
    a.erase("timeout_seconds");
    a.erase("retries");
  }
  if (k != AugmentKind::Cache && k != AugmentKind::Http) {
    a.erase("mode");
    a.erase("variants_per_sample");
  }
  return j;
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// 16 hex digits over the canonical (sorted-key, compact) semantic document.
inline std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(semantic_json(c).dump())));
  return buf;
}

}  // namespace ssl_lab
