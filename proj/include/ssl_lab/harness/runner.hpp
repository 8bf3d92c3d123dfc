#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "ssl_lab/augment.hpp"
#include "ssl_lab/corpus.hpp"
#include "ssl_lab/harness/config.hpp"
#include "ssl_lab/metrics.hpp"
#include "ssl_lab/netcore/checkpoint.hpp"
#include "ssl_lab/ssl/methods.hpp"

namespace ssl_lab {

// ---------------------------------------------------------------------------
// Data preparation

struct PreparedData {
  Vocabulary vocab;
  std::vector<RawRecord> train_raw;  // anonymized, aligned with `train`
  std::vector<EncodedSample> train;
  std::vector<EncodedSample> validation;
  std::vector<EncodedSample> test;
  std::vector<EncodedSample> unlabeled;
  std::size_t dropped = 0;  // rows empty after normalization
};

namespace detail {

inline std::vector<RawRecord> load_optional(const ExperimentConfig& cfg, const std::string& path) {
  return path.empty() ? std::vector<RawRecord>{} : load_dataset(cfg.resolve(path));
}

}  // namespace detail

/// Loads, anonymizes and encodes every split. The vocabulary is built from
/// the training and unlabeled text only.
inline PreparedData prepare_data(const ExperimentConfig& cfg) {
  PreparedData out;
  const EntityLexicon lexicon = cfg.data.entities.empty() ? EntityLexicon{} : load_entity_lexicon(cfg.resolve(cfg.data.entities));
  auto anonymized = [&](std::vector<RawRecord> recs) {
    for (auto& r : recs) r.text = anonymize(r.text, lexicon);
    return recs;
  };
  auto train = anonymized(load_dataset(cfg.resolve(cfg.data.train)));
  auto unlabeled = anonymized(detail::load_optional(cfg, cfg.data.unlabeled));
  auto validation = anonymized(load_dataset(cfg.resolve(cfg.data.validation)));
  auto test = anonymized(load_dataset(cfg.resolve(cfg.data.test)));

  std::vector<std::string> corpus;
  for (const auto* split : {&train, &unlabeled})
    for (const auto& r : *split) corpus.push_back(normalize_text(r.text, cfg.preprocess));
  out.vocab = build_vocab(corpus, cfg.preprocess);

  auto encode_split = [&](const std::vector<RawRecord>& recs, SplitName name, std::vector<RawRecord>* kept) {
    DatasetSplit split{name, {}};
    for (const auto& r : recs) {
      EncodedSample s;
      try {
        s = encode(r.text, out.vocab, cfg.preprocess);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptyAfterNormalization) throw;
        ++out.dropped;
        continue;
      }
      s.id = r.id;
      s.label = name == SplitName::Unlabeled ? std::nullopt : r.label;
      split.samples.push_back(std::move(s));
      if (kept) kept->push_back(r);
    }
    split.validate();
    return std::move(split.samples);
  };
  out.train = encode_split(train, SplitName::Train, &out.train_raw);
  out.unlabeled = encode_split(unlabeled, SplitName::Unlabeled, nullptr);
  out.validation = encode_split(validation, SplitName::Validation, nullptr);
  out.test = encode_split(test, SplitName::Test, nullptr);
  require(!out.train.empty(), ErrorKind::EmptyCorpus, "training split is empty");
  require(!out.validation.empty() && !out.test.empty(), ErrorKind::EmptyCorpus, "validation and test splits must be non-empty");
  return out;
}

/// Rows a text augmenter adds to the labeled set. Ids are negative so they
/// never collide with corpus ids.
inline std::vector<EncodedSample> augmented_rows(const ExperimentConfig& cfg, const PreparedData& data, std::uint64_t seed) {
  const AugmenterSpec& a = cfg.augment;
  std::vector<EncodedSample> out;
  if (!a.expands_text()) return out;
  std::int64_t next_id = -1;
  auto push = [&](const std::string& text, ClassLabel label) {
    EncodedSample s;
    try {
      s = encode(text, data.vocab, cfg.preprocess);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::EmptyAfterNormalization) return;
      throw;
    }
    s.id = next_id--;
    s.label = label;
    out.push_back(std::move(s));
  };

  if (a.kind == AugmentKind::Eda) {
    const SynonymLexicon lex =
        cfg.data.synonyms.empty() ? SynonymLexicon{} : load_synonyms(cfg.resolve(cfg.data.synonyms), cfg.preprocess);
    Rng rng = make_rng(seed, Stream::Augment);
    for (const auto& r : data.train_raw)
      for (const auto& v : eda_augment(normalize_text(r.text, cfg.preprocess), lex, a.eda_alpha, a.n_aug, rng))
        push(v, *r.label);
    return out;
  }

  AugmentCache cache;
  if (a.kind == AugmentKind::Cache) {
    cache = load_cache(cfg.resolve(a.path), a.mode);
  } else {
    cache = fetch_http_cache(a.endpoint, data.train_raw, a.mode, {a.timeout_seconds, a.retries});
  }
  if (a.mode == AugmentMode::Generate) {
    for (const auto& g : cache.generated) push(g.text, g.label);
    return out;
  }
  for (const auto& r : data.train_raw) {
    const auto& vs = cache.lookup(r.id);
    for (std::size_t v = 0; v < std::min(vs.size(), a.variants_per_sample); ++v) push(vs[v], *r.label);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Single runs

struct RunRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  bool ok = false;
  std::string failure;
  std::size_t best_epoch = 0;
  MetricsReport validation;
  MetricsReport test;
  std::string run_dir;
  std::string log_path;
  std::string checkpoint_path;
  std::string metrics_path;
};

struct RunOptions {
  std::string label;                      // augmentation label recorded in metrics.json
  const PreparedData* prepared = nullptr;  // reuse across runs sharing data and preprocessing
  bool write_artifacts = true;
  std::function<void(const std::string&)> on_warning;
};

inline nlohmann::json step_json(const StepRecord& r) {
  nlohmann::json j = {{"step", r.step}, {"epoch", r.epoch}, {"phase", r.phase}};
  nlohmann::json terms = nlohmann::json::object();
  for (const auto& [k, v] : r.terms) terms[k] = v;
  j["terms"] = terms;
  if (r.mask_rate) j["mask_rate"] = *r.mask_rate;
  if (!r.thresholds.empty()) j["thresholds"] = r.thresholds;
  for (const auto& [k, v] : r.info) j["info"][k] = v;
  return j;
}

inline std::filesystem::path run_directory(const ExperimentConfig& cfg, std::uint64_t seed) {
  return std::filesystem::path(cfg.resolve(cfg.output_dir)) / config_hash(cfg) / std::to_string(seed);
}

/// Trains once and evaluates the epoch with the best validation macro-F1 on
/// the test split. Errors are caught and recorded in the returned record.
inline RunRecord run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& opts = {}) {
  const auto started = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.seed = seed;
  std::ofstream log;
  try {
    cfg.validate();
    rec.config_hash = config_hash(cfg);
    const auto dir = run_directory(cfg, seed);
    rec.run_dir = dir.string();
    rec.log_path = (dir / "log.jsonl").string();
    rec.checkpoint_path = (dir / "model.ckpt").string();
    rec.metrics_path = (dir / "metrics.json").string();
    if (opts.write_artifacts) {
      std::filesystem::create_directories(dir);
      log.open(rec.log_path, std::ios::binary | std::ios::trunc);
      require(log.good(), ErrorKind::Io, "cannot write " + rec.log_path);
    }

    std::optional<PreparedData> owned;
    if (!opts.prepared) owned = prepare_data(cfg);
    const PreparedData& data = opts.prepared ? *opts.prepared : *owned;

    TrainData td;
    td.labeled = data.train;
    const auto extra = augmented_rows(cfg, data, seed);
    td.labeled.insert(td.labeled.end(), extra.begin(), extra.end());
    td.unlabeled = data.unlabeled;

    RunSpec spec;
    spec.model = cfg.model.classifier(data.vocab.size());
    spec.method = cfg.method_config;
    spec.augment = cfg.augment;
    spec.seed = seed;

    std::optional<Classifier> best;
    double best_f1 = -1.0;
    spec.hooks.on_step = [&](const StepRecord& r, const Classifier&) {
      if (log.is_open()) log << step_json(r).dump() << '\n';
    };
    spec.hooks.on_epoch = [&](std::size_t epoch, const Classifier& m) {
      const MetricsReport v = evaluate(m, data.validation);
      if (log.is_open())
        log << nlohmann::json{{"event", "epoch"}, {"epoch", epoch}, {"validation_macro_f1", v.macro_f1}}.dump() << '\n';
      if (v.macro_f1 > best_f1) {
        best_f1 = v.macro_f1;
        best = m;
        rec.best_epoch = epoch;
        rec.validation = v;
      }
    };
    spec.hooks.on_warning = [&](const std::string& msg) {
      if (log.is_open()) log << nlohmann::json{{"event", "warning"}, {"message", msg}}.dump() << '\n';
      if (opts.on_warning) opts.on_warning(msg);
    };
    if (log.is_open() && !extra.empty())
      log << nlohmann::json{{"event", "augment"}, {"added_labeled", extra.size()}}.dump() << '\n';

    TrainResult result = train(cfg.method, td, spec);
    if (!best) {  // no epoch ran
      best = std::move(result.model);
      rec.validation = evaluate(*best, data.validation);
    }
    rec.test = evaluate(*best, data.test);
    rec.ok = true;

    if (opts.write_artifacts) {
      save_checkpoint(*best, rec.checkpoint_path);
      nlohmann::json m = {{"config_hash", rec.config_hash},
                          {"method", method_name(cfg.method)},
                          {"augment", opts.label.empty() ? std::string(augment_kind_name(cfg.augment.kind)) : opts.label},
                          {"seed", seed},
                          {"best_epoch", rec.best_epoch},
                          {"epochs", result.epochs},
                          {"steps", result.steps},
                          {"labeled_rows", td.labeled.size()},
                          {"validation", rec.validation.to_json()},
                          {"test", rec.test.to_json()}};
      std::ofstream out(rec.metrics_path, std::ios::binary | std::ios::trunc);
      require(out.good(), ErrorKind::Io, "cannot write " + rec.metrics_path);
      out << m.dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.failure = e.what();
    if (log.is_open()) log << nlohmann::json{{"event", "failure"}, {"message", rec.failure}}.dump() << '\n';
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (opts.write_artifacts && !rec.run_dir.empty()) {
    nlohmann::json r = {{"config_hash", rec.config_hash}, {"seed", seed},          {"ok", rec.ok},
                        {"failure", rec.failure},         {"wall_seconds", rec.wall_seconds},
                        {"log", rec.log_path},            {"checkpoint", rec.checkpoint_path},
                        {"metrics", rec.metrics_path}};
    std::ofstream out(std::filesystem::path(rec.run_dir) / "run.json", std::ios::binary | std::ios::trunc);
    if (out.good()) out << r.dump(2) << '\n';
    std::ofstream cfg_out(std::filesystem::path(rec.run_dir) / "config.json", std::ios::binary | std::ios::trunc);
    if (cfg_out.good()) cfg_out << to_json(cfg).dump(2) << '\n';
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Grids

struct GridAugmenter {
  std::string label;
  AugmenterSpec spec;
};

struct GridVariant {
  std::string label;
  nlohmann::json overlay = nlohmann::json::object();  // applied to the base config
};

struct GridSpec {
  ExperimentConfig base;
  std::vector<Method> methods;
  std::vector<GridAugmenter> augmenters;
  std::vector<GridVariant> variants = {GridVariant{}};
  std::vector<std::uint64_t> seeds;  // empty: the base config's seeds
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population
};

inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  if (xs.empty()) return s;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) s.mean += x;
  s.mean /= n;
  for (double x : xs) s.std += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(s.std / n);
  return s;
}

struct GridCell {
  Method method = Method::Supervised;
  std::string method_label;
  std::string augment_label;
  std::string config_hash;
  std::vector<RunRecord> runs;  // in seed order
  std::vector<std::string> failures;

  std::vector<double> metric(double MetricsReport::*field) const {
    std::vector<double> xs;
    for (const auto& r : runs)
      if (r.ok) xs.push_back(r.test.*field);
    return xs;
  }
  std::size_t succeeded() const {
    return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const RunRecord& r) { return r.ok; }));
  }
};

inline std::string method_display_name(Method m) {
  switch (m) {
    case Method::Supervised: return "Supervised";
    case Method::FixMatch: return "FixMatch";
    case Method::FixMatchCr: return "FixMatch + CR";
    case Method::FreeMatch: return "FreeMatch";
    case Method::MixMatch: return "MixMatch";
    case Method::MeanTeacher: return "MeanTeacher";
    case Method::NoisyStudent: return "NoisyStudent";
    case Method::LabelProp: return "LabelPropagation";
    case Method::Sgan: return "SGAN";
  }
  return "?";
}

inline std::size_t worker_count() {
  const char* env = std::getenv("SSL_LAB_WORKERS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  require(end && *end == '\0' && v >= 1, ErrorKind::Config, std::string("SSL_LAB_WORKERS must be a positive integer, got '") + env + "'");
  return static_cast<std::size_t>(v);
}

inline ExperimentConfig cell_config(const GridSpec& g, Method m, const GridAugmenter& a, const GridVariant& v) {
  ExperimentConfig c = g.base;
  if (!v.overlay.empty()) from_json_checked(v.overlay, c);
  c.method = m;
  c.augment = a.spec;
  return c;
}

/// Runs every (method, augmenter, variant, seed) combination on up to
/// SSL_LAB_WORKERS threads. Failed runs are recorded and the grid continues.
inline std::vector<GridCell> run_grid(const GridSpec& g, std::function<void(const GridCell&, const RunRecord&)> progress = {}) {
  require(!g.methods.empty() && !g.augmenters.empty() && !g.variants.empty(), ErrorKind::Config, "empty grid");
  const std::vector<std::uint64_t> seeds = g.seeds.empty() ? g.base.seeds : g.seeds;
  require(!seeds.empty(), ErrorKind::Config, "grid needs at least one seed");

  std::vector<GridCell> cells;
  std::vector<ExperimentConfig> configs;
  for (const auto& v : g.variants)
    for (Method m : g.methods)
      for (const auto& a : g.augmenters) {
        GridCell cell;
        cell.method = m;
        cell.method_label = method_display_name(m) + (v.label.empty() ? "" : " [" + v.label + "]");
        cell.augment_label = a.label;
        cell.runs.resize(seeds.size());
        configs.push_back(cell_config(g, m, a, v));
        cells.push_back(std::move(cell));
      }

  // data is shared by every cell with the same inputs and preprocessing
  std::map<std::string, std::shared_ptr<PreparedData>> prepared;
  std::vector<std::shared_ptr<PreparedData>> cell_data(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    try {
      configs[i].validate();
      cells[i].config_hash = config_hash(configs[i]);
      const nlohmann::json j = to_json(configs[i]);
      const std::string key = j["data"].dump() + j["preprocess"].dump() + configs[i].base_dir;
      auto& slot = prepared[key];
      if (!slot) slot = std::make_shared<PreparedData>(prepare_data(configs[i]));
      cell_data[i] = slot;
    } catch (const std::exception& e) {
      cells[i].failures.push_back(e.what());
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (cell_data[i])
      for (std::size_t s = 0; s < seeds.size(); ++s) jobs.emplace_back(i, s);

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
      const auto [i, s] = jobs[j];
      RunOptions opts;
      opts.label = cells[i].augment_label;
      opts.prepared = cell_data[i].get();
      RunRecord r = run_experiment(configs[i], seeds[s], opts);
      std::lock_guard<std::mutex> lock(mu);
      if (!r.ok) cells[i].failures.push_back("seed " + std::to_string(seeds[s]) + ": " + r.failure);
      cells[i].runs[s] = std::move(r);
      if (progress) progress(cells[i], cells[i].runs[s]);
    }
  };
  const std::size_t n = std::min(worker_count(), std::max<std::size_t>(1, jobs.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (!cell_data[i]) cells[i].runs.clear();
  return cells;
}

// ---------------------------------------------------------------------------
// Tables

namespace detail {

inline constexpr double MetricsReport::*kTableColumns[] = {&MetricsReport::accuracy, &MetricsReport::precision,
                                                          &MetricsReport::recall, &MetricsReport::micro_f1,
                                                          &MetricsReport::macro_f1};

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

/// Percentages; each metric gets a mean and a population-std column.
inline std::string grid_csv(const std::vector<GridCell>& cells) {
  std::ostringstream out;
  out << "Method,Augmentation";
  for (const char* name : {"Accuracy", "Precision", "Recall", "Micro-F1", "Macro-F1"}) out << ',' << name << ',' << name << " std";
  out << ",Runs,Failed\n";
  for (const auto& c : cells) {
    out << detail::csv_field(c.method_label) << ',' << detail::csv_field(c.augment_label);
    for (auto field : detail::kTableColumns) {
      const auto xs = c.metric(field);
      if (xs.empty()) {
        out << ",,";
        continue;
      }
      const Summary s = summarize(xs);
      out << ',' << detail::fixed2(100 * s.mean) << ',' << detail::fixed2(100 * s.std);
    }
    out << ',' << c.succeeded() << ',' << c.failures.size() << '\n';
  }
  return out.str();
}

/// Aligned text rendering; notes whether cells are single runs or seed means.
inline std::string grid_table(const std::vector<GridCell>& cells) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Method", "Augmentation", "Accuracy", "Precision", "Recall", "Micro-F1", "Macro-F1"});
  std::size_t max_runs = 0;
  for (const auto& c : cells) {
    std::vector<std::string> row = {c.method_label, c.augment_label};
    const std::size_t n = c.succeeded();
    max_runs = std::max(max_runs, n);
    for (auto field : detail::kTableColumns) {
      const auto xs = c.metric(field);
      if (xs.empty()) {
        row.push_back("failed");
        continue;
      }
      const Summary s = summarize(xs);
      row.push_back(n > 1 ? detail::fixed2(100 * s.mean) + " ± " + detail::fixed2(100 * s.std) : detail::fixed2(100 * s.mean));
    }
    rows.push_back(std::move(row));
  }
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char ch : s) w += (ch & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> widths(rows.front().size(), 0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], width(r[i]));
  std::ostringstream out;
  for (std::size_t ri = 0; ri < rows.size(); ++ri) {
    for (std::size_t i = 0; i < rows[ri].size(); ++i) {
      out << rows[ri][i] << std::string(widths[i] - width(rows[ri][i]), ' ');
      out << (i + 1 < rows[ri].size() ? " | " : "\n");
    }
    if (ri == 0) {
      for (std::size_t i = 0; i < widths.size(); ++i) out << std::string(widths[i], '-') << (i + 1 < widths.size() ? "-+-" : "\n");
    }
  }
  out << (max_runs > 1 ? "(test-split percentages; mean ± population std over seeds)\n"
                       : "(test-split percentages; single run per cell)\n");
  for (const auto& c : cells)
    for (const auto& f : c.failures) out << "failure: " << c.method_label << " / " << c.augment_label << ": " << f << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Grid files

inline GridSpec parse_grid_spec(const nlohmann::json& j, const std::string& base_dir = ".") {
  detail::FieldReader r(j, "grid");
  GridSpec g;
  const nlohmann::json& base = r.at("base");
  if (base.is_string()) {
    const std::string path = (std::filesystem::path(base_dir) / base.get<std::string>()).string();
    g.base = load_experiment_config(path);
  } else {
    g.base = parse_experiment_config(base, base_dir);
  }
  std::vector<std::string> methods;
  r.read("methods", methods);
  for (const auto& m : methods) g.methods.push_back(parse_method(m));
  if (methods.empty())
    for (Method m : kAllMethods) g.methods.push_back(m);
  if (r.has("augmenters")) {
    for (const auto& a : r.at("augmenters")) {
      detail::FieldReader ar(a, "grid.augmenters[]");
      GridAugmenter ga;
      ar.read("label", ga.label);
      if (ar.has("augment")) from_json_checked(ar.at("augment"), ga.spec, "grid.augmenters[].augment");
      ar.finish();
      if (ga.label.empty()) ga.label = std::string(augment_kind_name(ga.spec.kind));
      g.augmenters.push_back(std::move(ga));
    }
  } else {
    g.augmenters.push_back({"-", g.base.augment});
  }
  if (r.has("variants")) {
    g.variants.clear();
    for (const auto& v : r.at("variants")) {
      detail::FieldReader vr(v, "grid.variants[]");
      GridVariant gv;
      vr.read("label", gv.label);
      if (vr.has("overlay")) gv.overlay = vr.at("overlay");
      vr.finish();
      g.variants.push_back(std::move(gv));
    }
  }
  r.read("seeds", g.seeds);
  std::string out_dir;
  r.read("output_dir", out_dir);
  if (!out_dir.empty()) g.base.output_dir = (std::filesystem::path(base_dir) / out_dir).lexically_normal().string();
  r.finish();
  return g;
}

inline GridSpec load_grid_spec(const std::string& path) {
  const auto base = std::filesystem::path(path).parent_path();
  return parse_grid_spec(read_json_file(path), base.empty() ? "." : base.string());
}

// ---------------------------------------------------------------------------
// Reports over finished runs

/// Collects runs/<hash>/<seed>/metrics.json into cells keyed by config hash.
inline std::vector<GridCell> collect_runs(const std::string& runs_dir) {
  std::map<std::string, GridCell> by_hash;
  require(std::filesystem::is_directory(runs_dir), ErrorKind::Io, "no runs directory '" + runs_dir + "'");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(runs_dir))
    if (e.is_regular_file() && e.path().filename() == "metrics.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const nlohmann::json j = read_json_file(f.string());
    const std::string hash = j.at("config_hash").get<std::string>();
    GridCell& c = by_hash[hash];
    c.config_hash = hash;
    c.method = parse_method(j.at("method").get<std::string>());
    c.method_label = method_display_name(c.method);
    c.augment_label = j.at("augment").get<std::string>();
    RunRecord r;
    r.ok = true;
    r.config_hash = hash;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.best_epoch = j.at("best_epoch").get<std::size_t>();
    r.validation = MetricsReport::from_json(j.at("validation"));
    r.test = MetricsReport::from_json(j.at("test"));
    r.metrics_path = f.string();
    c.runs.push_back(std::move(r));
  }
  std::vector<GridCell> cells;
  for (auto& [_, c] : by_hash) cells.push_back(std::move(c));
  std::stable_sort(cells.begin(), cells.end(), [](const GridCell& a, const GridCell& b) {
    return static_cast<int>(a.method) < static_cast<int>(b.method);
  });
  return cells;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::Io, "cannot write " + path.string());
  out << text;
}

}  // namespace ssl_lab
