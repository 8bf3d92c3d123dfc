#pragma once

#include <fstream>
#include <string>

#include "json.hpp"

#include "ssl_lab/error.hpp"
#include "ssl_lab/netcore/classifier.hpp"

namespace ssl_lab {

inline constexpr const char* kCheckpointFormat = "ssl-lab-classifier";
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json classifier_config_json(const ClassifierConfig& c) {
  return {{"vocab_size", c.vocab_size},     {"embed_dim", c.embed_dim},       {"hidden_dims", c.hidden_dims},
          {"num_classes", c.num_classes},   {"dropout_rate", c.dropout_rate}, {"leaky_slope", c.leaky_slope}};
}

inline ClassifierConfig classifier_config_from_json(const nlohmann::json& j) {
  ClassifierConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  return c;
}

/// Config plus flat parameter arrays in Classifier::parameters() order.
/// Doubles are written in shortest round-trip form, so load(save(m)) == m.
inline nlohmann::json checkpoint_json(const Classifier& model) {
  nlohmann::json params = nlohmann::json::array();
  for (const Matrix* p : model.parameters()) {
    params.push_back({{"rows", p->rows()},
                      {"cols", p->cols()},
                      {"values", std::vector<double>(p->values().begin(), p->values().end())}});
  }
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"config", classifier_config_json(model.config())},
          {"parameters", params}};
}

inline Classifier classifier_from_checkpoint(const nlohmann::json& j) {
  require(j.value("format", "") == kCheckpointFormat, ErrorKind::Parse, "not a classifier checkpoint");
  require(j.value("version", 0) == kCheckpointVersion, ErrorKind::Parse,
          "unsupported checkpoint version " + std::to_string(j.value("version", 0)));
  Rng rng(0);
  Classifier model(classifier_config_from_json(j.at("config")), rng);
  auto params = model.parameters();
  const auto& arr = j.at("parameters");
  require(arr.size() == params.size(), ErrorKind::Parse, "checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = arr[i];
    require(e.at("rows").get<std::size_t>() == params[i]->rows() && e.at("cols").get<std::size_t>() == params[i]->cols(),
            ErrorKind::Parse, "checkpoint tensor " + std::to_string(i) + " has the wrong shape");
    const auto values = e.at("values").get<std::vector<double>>();
    require(values.size() == params[i]->size(), ErrorKind::Parse, "checkpoint tensor size mismatch");
    std::copy(values.begin(), values.end(), params[i]->values().begin());
  }
  return model;
}

inline void save_checkpoint(const Classifier& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Io, "cannot write checkpoint '" + path + "'");
  out << checkpoint_json(model).dump() << '\n';
}

inline Classifier load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("checkpoint: ") + e.what());
  }
  return classifier_from_checkpoint(j);
}

}  // namespace ssl_lab
