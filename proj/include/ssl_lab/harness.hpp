#pragma once

#include "ssl_lab/harness/config.hpp"
#include "ssl_lab/harness/runner.hpp"
#include "ssl_lab/harness/synth.hpp"

namespace ssl_lab {

/// Training settings for the from-scratch encoder on the synthetic corpus.
/// The embedding table trains at the head rate, runs are longer, each
/// labeled batch is paired with four unlabeled ones, and the FreeMatch
/// threshold EMA spans a few dozen steps instead of a thousand.
inline MethodConfig desk_method_config() {
  MethodConfig m;
  m.optimizer.encoder.learning_rate = m.optimizer.head.learning_rate;
  m.epochs = 60;
  m.unlabeled_ratio = 4;
  m.freematch.threshold_ema = 0.9;
  return m;
}

/// Experiment config for a corpus written by write_synthetic_corpus, with
/// paths relative to that directory.
inline ExperimentConfig desk_config() {
  ExperimentConfig c;
  c.data.train = SyntheticLayout::train;
  c.data.validation = SyntheticLayout::validation;
  c.data.test = SyntheticLayout::test;
  c.data.unlabeled = SyntheticLayout::unlabeled;
  c.data.entities = SyntheticLayout::entities;
  c.data.synonyms = SyntheticLayout::synonyms;
  c.method = Method::Supervised;
  c.method_config = desk_method_config();
  c.augment.kind = AugmentKind::Gaussian;
  c.seeds = {1, 2, 3, 4, 5};
  c.output_dir = "runs";
  return c;
}

/// The six augmentation columns of the comparison table.
inline std::vector<GridAugmenter> desk_augmenters() {
  std::vector<GridAugmenter> out;
  AugmenterSpec base;
  base.kind = AugmentKind::Gaussian;
  out.push_back({"-", base});
  AugmenterSpec a = base;
  a.kind = AugmentKind::Cache;
  a.mode = AugmentMode::Paraphrase;
  a.path = SyntheticLayout::paraphrase;
  out.push_back({"Paraphrase", a});
  a = base;
  a.kind = AugmentKind::Eda;
  out.push_back({"EDA", a});
  a = base;
  a.kind = AugmentKind::Cache;
  a.mode = AugmentMode::Generate;
  a.path = SyntheticLayout::generate;
  out.push_back({"Generative", a});
  a = base;
  a.kind = AugmentKind::ManifoldMixup;
  out.push_back({"Manifold Mixup", a});
  a = base;
  a.kind = AugmentKind::Cache;
  a.mode = AugmentMode::Backtranslate;
  a.path = SyntheticLayout::backtranslate;
  out.push_back({"Back-translation", a});
  return out;
}

inline nlohmann::json grid_json(const std::vector<Method>& methods, const std::vector<GridAugmenter>& augmenters,
                                const std::string& base_path) {
  nlohmann::json j;
  j["base"] = base_path;
  j["methods"] = nlohmann::json::array();
  for (Method m : methods) j["methods"].push_back(method_name(m));
  j["augmenters"] = nlohmann::json::array();
  for (const auto& a : augmenters) j["augmenters"].push_back({{"label", a.label}, {"augment", to_json(a.spec)}});
  return j;
}

}  // namespace ssl_lab
