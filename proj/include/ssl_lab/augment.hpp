#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "ssl_lab/corpus.hpp"
#include "ssl_lab/error.hpp"
#include "ssl_lab/random.hpp"
#include "ssl_lab/text.hpp"

namespace ssl_lab {

enum class AugmentKind { None, Gaussian, Eda, ManifoldMixup, Cache, Http };
enum class AugmentMode { Paraphrase, Backtranslate, Generate };

inline std::string_view augment_kind_name(AugmentKind k) {
  switch (k) {
    case AugmentKind::None: return "none";
    case AugmentKind::Gaussian: return "gaussian";
    case AugmentKind::Eda: return "eda";
    case AugmentKind::ManifoldMixup: return "manifold_mixup";
    case AugmentKind::Cache: return "cache";
    case AugmentKind::Http: return "http";
  }
  return "?";
}

inline AugmentKind parse_augment_kind(std::string_view s) {
  for (auto k : {AugmentKind::None, AugmentKind::Gaussian, AugmentKind::Eda, AugmentKind::ManifoldMixup,
                 AugmentKind::Cache, AugmentKind::Http})
    if (augment_kind_name(k) == s) return k;
  throw Error(ErrorKind::Config, "unknown augmenter kind '" + std::string(s) + "'");
}

inline std::string_view augment_mode_name(AugmentMode m) {
  switch (m) {
    case AugmentMode::Paraphrase: return "paraphrase";
    case AugmentMode::Backtranslate: return "backtranslate";
    case AugmentMode::Generate: return "generate";
  }
  return "?";
}

inline AugmentMode parse_augment_mode(std::string_view s) {
  for (auto m : {AugmentMode::Paraphrase, AugmentMode::Backtranslate, AugmentMode::Generate})
    if (augment_mode_name(m) == s) return m;
  throw Error(ErrorKind::Config, "unknown augmentation mode '" + std::string(s) + "'");
}

struct AugmenterSpec {
  AugmentKind kind = AugmentKind::Gaussian;
  // Noise std as a fraction of the RMS embedding norm.
  double sigma_weak = 0.05;
  double sigma_strong = 0.3;
  double eda_alpha = 0.1;
  std::size_t n_aug = 4;
  double mixup_alpha = 0.3;
  AugmentMode mode = AugmentMode::Paraphrase;
  std::string path;
  std::string endpoint;
  std::size_t variants_per_sample = 1;
  double timeout_seconds = 30.0;
  int retries = 2;

  void validate() const {
    require(sigma_weak >= 0.0 && sigma_weak <= sigma_strong, ErrorKind::Config, "need 0 <= sigma_weak <= sigma_strong");
    require(eda_alpha > 0.0 && eda_alpha < 1.0, ErrorKind::Config, "eda alpha must lie in (0,1)");
    require(n_aug >= 1, ErrorKind::Config, "n_aug must be >= 1");
    require(mixup_alpha > 0.0, ErrorKind::Config, "mixup alpha must be positive");
    require(variants_per_sample >= 1, ErrorKind::Config, "variants_per_sample must be >= 1");
    require(timeout_seconds > 0.0 && retries >= 0, ErrorKind::Config, "bad http timeout/retries");
    if (kind == AugmentKind::Cache) require(!path.empty(), ErrorKind::Config, "cache augmenter needs a path");
    if (kind == AugmentKind::Http) require(!endpoint.empty(), ErrorKind::Config, "http augmenter needs an endpoint");
  }

  /// Text augmenters that add labeled rows before training.
  bool expands_text() const { return kind == AugmentKind::Eda || kind == AugmentKind::Cache || kind == AugmentKind::Http; }
};

// ---------------------------------------------------------------------------
// Synonyms and EDA

class SynonymLexicon {
 public:
  void add(const std::string& word, const std::string& synonym) {
    if (word == synonym || word.empty() || synonym.empty()) return;
    auto& list = map_[word];
    if (std::find(list.begin(), list.end(), synonym) == list.end()) list.push_back(synonym);
  }

  const std::vector<std::string>* synonyms(const std::string& word) const {
    auto it = map_.find(word);
    return it == map_.end() ? nullptr : &it->second;
  }

  bool empty() const noexcept { return map_.empty(); }
  std::size_t size() const noexcept { return map_.size(); }
  const std::map<std::string, std::vector<std::string>>& entries() const noexcept { return map_; }

 private:
  std::map<std::string, std::vector<std::string>> map_;
};

/// `word<TAB>syn1,syn2,...`; entries are normalized so lookups match encoded text.
inline SynonymLexicon parse_synonyms(std::istream& in, const PreprocessConfig& cfg = {}) {
  SynonymLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    require(tab != std::string::npos, ErrorKind::Parse, "synonyms line " + std::to_string(line_no) + ": missing tab");
    const std::string word = normalize_text(line.substr(0, tab), cfg);
    std::string rest = line.substr(tab + 1);
    std::size_t start = 0;
    while (start <= rest.size()) {
      auto comma = rest.find(',', start);
      if (comma == std::string::npos) comma = rest.size();
      lex.add(word, normalize_text(rest.substr(start, comma - start), cfg));
      start = comma + 1;
    }
  }
  return lex;
}

inline SynonymLexicon load_synonyms(const std::string& path, const PreprocessConfig& cfg = {}) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open synonym lexicon '" + path + "'");
  return parse_synonyms(in, cfg);
}

enum class EdaOp { SynonymReplacement, RandomInsertion, RandomSwap, RandomDeletion };

inline std::string_view eda_op_name(EdaOp op) {
  switch (op) {
    case EdaOp::SynonymReplacement: return "synonym_replacement";
    case EdaOp::RandomInsertion: return "random_insertion";
    case EdaOp::RandomSwap: return "random_swap";
    case EdaOp::RandomDeletion: return "random_deletion";
  }
  return "?";
}

struct EdaVariant {
  std::string text;
  EdaOp op;
  std::size_t intensity = 0;  // n = max(1, round(alpha * L))
  std::size_t edits = 0;      // edit units actually applied
};

inline std::size_t eda_intensity(double alpha, std::size_t length) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(alpha * static_cast<double>(length))));
}

namespace detail {

inline std::vector<std::size_t> synonym_positions(const std::vector<std::string>& tokens, const SynonymLexicon& lex) {
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (lex.synonyms(tokens[i])) pos.push_back(i);
  return pos;
}

inline const std::string& pick(const std::vector<std::string>& v, Rng& rng) { return v[uniform_index(rng, v.size())]; }

}  // namespace detail

inline EdaVariant eda_apply(std::vector<std::string> tokens, EdaOp op, double alpha, const SynonymLexicon& lex,
                            Rng& rng) {
  const std::size_t n = eda_intensity(alpha, tokens.size());
  EdaVariant out{"", op, n, 0};
  switch (op) {
    case EdaOp::SynonymReplacement: {
      auto pos = detail::synonym_positions(tokens, lex);
      std::shuffle(pos.begin(), pos.end(), rng);
      for (std::size_t k = 0; k < std::min(n, pos.size()); ++k) {
        tokens[pos[k]] = detail::pick(*lex.synonyms(tokens[pos[k]]), rng);
        ++out.edits;
      }
      break;
    }
    case EdaOp::RandomInsertion: {
      for (std::size_t k = 0; k < n; ++k) {
        const auto pos = detail::synonym_positions(tokens, lex);
        if (pos.empty()) break;
        const std::string syn = detail::pick(*lex.synonyms(tokens[pos[uniform_index(rng, pos.size())]]), rng);
        tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(uniform_index(rng, tokens.size() + 1)), syn);
        ++out.edits;
      }
      break;
    }
    case EdaOp::RandomSwap: {
      if (tokens.size() < 2) break;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = uniform_index(rng, tokens.size());
        std::size_t j = uniform_index(rng, tokens.size() - 1);
        if (j >= i) ++j;
        std::swap(tokens[i], tokens[j]);
        ++out.edits;
      }
      break;
    }
    case EdaOp::RandomDeletion: {
      if (tokens.size() < 2) break;
      std::vector<std::string> kept;
      for (const auto& t : tokens)
        if (uniform01(rng) >= alpha) kept.push_back(t);
      if (kept.empty()) kept.push_back(tokens[uniform_index(rng, tokens.size())]);
      out.edits = tokens.size() - kept.size();
      tokens = std::move(kept);
      break;
    }
  }
  out.text = text::join(tokens);
  return out;
}

/// One uniformly chosen operation per variant. Synonym-based operations are
/// only drawn when some token of the sentence has a synonym.
inline std::vector<EdaVariant> eda_augment_detailed(const std::string& sentence, const SynonymLexicon& lex, double alpha,
                                                    std::size_t n_aug, Rng& rng) {
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::InvalidArgument, "eda alpha must lie in (0,1)");
  const auto tokens = text::tokenize(sentence);
  require(!tokens.empty(), ErrorKind::InvalidArgument, "eda needs a non-empty sentence");
  std::vector<EdaOp> ops{EdaOp::RandomSwap, EdaOp::RandomDeletion};
  if (!detail::synonym_positions(tokens, lex).empty())
    ops = {EdaOp::SynonymReplacement, EdaOp::RandomInsertion, EdaOp::RandomSwap, EdaOp::RandomDeletion};
  std::vector<EdaVariant> out;
  out.reserve(n_aug);
  for (std::size_t v = 0; v < n_aug; ++v) out.push_back(eda_apply(tokens, ops[uniform_index(rng, ops.size())], alpha, lex, rng));
  return out;
}

inline std::vector<std::string> eda_augment(const std::string& sentence, const SynonymLexicon& lex, double alpha,
                                            std::size_t n_aug, Rng& rng) {
  std::vector<std::string> out;
  for (auto& v : eda_augment_detailed(sentence, lex, alpha, n_aug, rng)) out.push_back(std::move(v.text));
  return out;
}

// ---------------------------------------------------------------------------
// Mixup coefficient

inline double sample_mixup(double alpha, Rng& rng) {
  require(alpha > 0.0, ErrorKind::InvalidArgument, "mixup alpha must be positive");
  const double lambda = sample_beta(alpha, alpha, rng);
  return std::max(lambda, 1.0 - lambda);
}

// ---------------------------------------------------------------------------
// Cache files

struct GeneratedSample {
  std::string text;
  ClassLabel label;
  friend bool operator==(const GeneratedSample&, const GeneratedSample&) = default;
};

struct AugmentCache {
  AugmentMode mode = AugmentMode::Paraphrase;
  std::map<std::int64_t, std::vector<std::string>> variants;
  std::vector<GeneratedSample> generated;

  const std::vector<std::string>& lookup(std::int64_t id) const {
    auto it = variants.find(id);
    require(it != variants.end(), ErrorKind::MissingAugmentation,
            "no " + std::string(augment_mode_name(mode)) + " variants for id " + std::to_string(id));
    return it->second;
  }

  friend bool operator==(const AugmentCache&, const AugmentCache&) = default;
};

inline AugmentCache parse_cache(std::istream& in, AugmentMode mode) {
  AugmentCache cache;
  cache.mode = mode;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = "cache line " + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Parse, where + e.what());
    }
    require(j.is_object(), ErrorKind::Parse, where + "expected an object");
    if (mode == AugmentMode::Generate) {
      require(j.contains("text") && j["text"].is_string() && j.contains("label") && j["label"].is_string(),
              ErrorKind::Parse, where + "expected string 'text' and 'label'");
      cache.generated.push_back({j["text"].get<std::string>(), parse_class_or_throw(j["label"].get<std::string>(), line_no)});
      continue;
    }
    require(j.contains("id") && j["id"].is_number_integer() && j.contains("variants") && j["variants"].is_array(),
            ErrorKind::Parse, where + "expected integer 'id' and array 'variants'");
    std::vector<std::string> vs;
    for (const auto& v : j["variants"]) {
      require(v.is_string(), ErrorKind::Parse, where + "variants must be strings");
      vs.push_back(v.get<std::string>());
    }
    require(!vs.empty(), ErrorKind::Parse, where + "empty variant list");
    const auto id = j["id"].get<std::int64_t>();
    require(cache.variants.emplace(id, std::move(vs)).second, ErrorKind::DuplicateId, where + "duplicate id " + std::to_string(id));
  }
  return cache;
}

inline AugmentCache load_cache(const std::string& path, AugmentMode mode) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open augmentation cache '" + path + "'");
  return parse_cache(in, mode);
}

inline void write_cache(std::ostream& out, const AugmentCache& cache) {
  if (cache.mode == AugmentMode::Generate) {
    for (const auto& g : cache.generated)
      out << nlohmann::json{{"text", g.text}, {"label", std::string(class_name(g.label))}}.dump() << '\n';
    return;
  }
  for (const auto& [id, vs] : cache.variants) out << nlohmann::json{{"id", id}, {"variants", vs}}.dump() << '\n';
}

inline void save_cache(const std::string& path, const AugmentCache& cache) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Io, "cannot write augmentation cache '" + path + "'");
  write_cache(out, cache);
}

// ---------------------------------------------------------------------------
// HTTP augmenter

struct HttpOptions {
  double timeout_seconds = 30.0;
  int retries = 2;
};

namespace detail {

// "http://host:port[/path]" -> ("http://host:port", "/path" or "/augment")
inline std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme = endpoint.find("://");
  const auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = endpoint.find('/', host_start);
  if (slash == std::string::npos || slash + 1 == endpoint.size())
    return {endpoint.substr(0, slash), "/augment"};
  return {endpoint.substr(0, slash), endpoint.substr(slash)};
}

}  // namespace detail

inline std::vector<std::vector<std::string>> fetch_http(const std::string& endpoint, const std::vector<std::string>& texts,
                                                        AugmentMode mode, const HttpOptions& opts = {}) {
  if (texts.empty()) return {};
  const auto [base, path] = detail::split_endpoint(endpoint);
  httplib::Client client(base);
  const auto timeout = std::chrono::duration<double>(opts.timeout_seconds);
  const auto secs = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
  client.set_connection_timeout(secs);
  client.set_read_timeout(secs);
  client.set_write_timeout(secs);
  const std::string body = nlohmann::json{{"texts", texts}, {"mode", augment_mode_name(mode)}}.dump();

  httplib::Result res;
  for (int attempt = 0; attempt <= opts.retries; ++attempt) {
    res = client.Post(path, body, "application/json");
    if (res) break;
  }
  require(static_cast<bool>(res), ErrorKind::Http,
          "augmenter at " + endpoint + " unreachable after " + std::to_string(opts.retries + 1) +
              " attempts: " + httplib::to_string(res.error()));
  require(res->status == 200, ErrorKind::Http, "augmenter at " + endpoint + " returned status " + std::to_string(res->status));

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Http, std::string("augmenter response is not JSON: ") + e.what());
  }
  require(j.is_object() && j.contains("variants") && j["variants"].is_array(), ErrorKind::Http,
          "augmenter response lacks a 'variants' array");
  require(j["variants"].size() == texts.size(), ErrorKind::Http,
          "augmenter returned " + std::to_string(j["variants"].size()) + " variant lists for " +
              std::to_string(texts.size()) + " texts");
  std::vector<std::vector<std::string>> out;
  for (const auto& list : j["variants"]) {
    require(list.is_array(), ErrorKind::Http, "augmenter variant entry is not an array");
    std::vector<std::string> vs;
    for (const auto& v : list) {
      require(v.is_string(), ErrorKind::Http, "augmenter variant is not a string");
      vs.push_back(v.get<std::string>());
    }
    out.push_back(std::move(vs));
  }
  return out;
}

/// Fetches variants for (id, text) pairs and packs them as a cache.
inline AugmentCache fetch_http_cache(const std::string& endpoint, const std::vector<RawRecord>& records, AugmentMode mode,
                                     const HttpOptions& opts = {}) {
  std::vector<std::string> texts;
  for (const auto& r : records) texts.push_back(r.text);
  auto lists = fetch_http(endpoint, texts, mode, opts);
  AugmentCache cache;
  cache.mode = mode;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (mode == AugmentMode::Generate) {
      for (auto& t : lists[i])
        if (records[i].label) cache.generated.push_back({std::move(t), *records[i].label});
    } else if (!lists[i].empty()) {
      cache.variants[records[i].id] = std::move(lists[i]);
    }
  }
  return cache;
}

}  // namespace ssl_lab
