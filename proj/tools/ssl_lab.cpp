// Command-line front end: data preparation, synthetic corpora, augmentation
// caches, single runs, grids and reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ssl_lab/harness.hpp"

using namespace ssl_lab;
namespace fs = std::filesystem;

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json encoded_json(const EncodedSample& s) {
  nlohmann::json j = {{"id", s.id}, {"token_ids", s.token_ids}, {"attention_mask", s.attention_mask}};
  if (s.label) j["label"] = std::string(class_name(*s.label));
  return j;
}

void print_counts(const char* name, const std::vector<EncodedSample>& rows) {
  ClassCounts c{};
  for (const auto& s : rows)
    if (s.label) ++c[class_index(*s.label)];
  std::printf("%-11s %6zu rows", name, rows.size());
  if (c[0] + c[1] + c[2] + c[3] > 0) {
    for (std::size_t k = 0; k < kNumClasses; ++k)
      std::printf("  %s %zu", std::string(class_name(class_from_index(k))).c_str(), c[k]);
    std::printf("  imbalance %.2f", imbalance_ratio(c));
  }
  std::printf("\n");
}

int cmd_prep(const std::string& config_path, const std::string& out_dir) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  cfg.validate();
  const PreparedData data = prepare_data(cfg);
  const fs::path out(out_dir);
  fs::create_directories(out);
  std::string vocab;
  for (const auto& t : data.vocab.tokens()) vocab += t + '\n';
  write_text(out / "vocab.txt", vocab);
  auto dump = [&](const char* name, const std::vector<EncodedSample>& rows) {
    std::string text;
    for (const auto& s : rows) text += encoded_json(s).dump() + '\n';
    write_text(out / (std::string(name) + ".jsonl"), text);
    print_counts(name, rows);
  };
  dump("train", data.train);
  dump("validation", data.validation);
  dump("test", data.test);
  dump("unlabeled", data.unlabeled);
  std::printf("vocabulary %zu tokens; %zu rows dropped as empty after normalization\n", data.vocab.size(), data.dropped);
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir, std::optional<std::uint64_t> seed) {
  SyntheticSpec spec;
  if (!spec_path.empty()) from_json_checked(read_json_file(spec_path), spec);
  if (seed) spec.seed = *seed;
  const SyntheticCorpus corpus = make_synthetic_corpus(spec);
  write_synthetic_corpus(corpus, out_dir);
  const fs::path out(out_dir);
  write_json(out / "synthetic.json", to_json(spec));
  write_json(out / "config.json", to_json(desk_config()));
  std::vector<Method> all(std::begin(kAllMethods), std::end(kAllMethods));
  write_json(out / "grid.json", grid_json(all, desk_augmenters(), "config.json"));
  std::printf("wrote %zu train / %zu unlabeled / %zu validation / %zu test rows to %s (%zu noisy labels)\n",
              corpus.train.size(), corpus.unlabeled.size(), corpus.validation.size(), corpus.test.size(),
              out_dir.c_str(), corpus.noisy_labels);
  return 0;
}

int cmd_augment(const std::string& config_path, const std::string& out_path, std::uint64_t seed) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  cfg.validate();
  const AugmenterSpec& a = cfg.augment;
  const PreparedData data = prepare_data(cfg);
  AugmentCache cache;
  switch (a.kind) {
    case AugmentKind::Eda: {
      // one variant list per training id, usable as a paraphrase-style cache
      const SynonymLexicon lex =
          cfg.data.synonyms.empty() ? SynonymLexicon{} : load_synonyms(cfg.resolve(cfg.data.synonyms), cfg.preprocess);
      Rng rng = make_rng(seed, Stream::Augment);
      for (const auto& r : data.train_raw)
        cache.variants[r.id] = eda_augment(normalize_text(r.text, cfg.preprocess), lex, a.eda_alpha, a.n_aug, rng);
      break;
    }
    case AugmentKind::Http: cache = fetch_http_cache(a.endpoint, data.train_raw, a.mode, {a.timeout_seconds, a.retries}); break;
    case AugmentKind::Cache: cache = load_cache(cfg.resolve(a.path), a.mode); break;
    default:
      throw Error(ErrorKind::Config, "augment needs kind eda, http or cache; '" +
                                         std::string(augment_kind_name(a.kind)) + "' works in embedding space");
  }
  save_cache(out_path, cache);
  std::printf("wrote %zu entries to %s\n", cache.mode == AugmentMode::Generate ? cache.generated.size() : cache.variants.size(),
              out_path.c_str());
  return 0;
}

/// Maps a short augmenter name onto the config's augment section.
void apply_augment_name(ExperimentConfig& cfg, const std::string& name, const std::string& path) {
  AugmenterSpec& a = cfg.augment;
  auto cache = [&](AugmentMode mode, const char* default_path) {
    const bool keep = a.kind == AugmentKind::Cache && a.mode == mode && !a.path.empty();
    a.kind = AugmentKind::Cache;
    a.mode = mode;
    if (!path.empty()) a.path = path;
    else if (!keep) a.path = default_path;
  };
  if (name == "paraphrase") cache(AugmentMode::Paraphrase, SyntheticLayout::paraphrase);
  else if (name == "backtranslate") cache(AugmentMode::Backtranslate, SyntheticLayout::backtranslate);
  else if (name == "generate") cache(AugmentMode::Generate, SyntheticLayout::generate);
  else {
    a.kind = parse_augment_kind(name);
    if (!path.empty()) a.path = path;
  }
}

void print_run(const RunRecord& r) {
  if (!r.ok) {
    std::fprintf(stderr, "run failed: %s\n", r.failure.c_str());
    return;
  }
  std::printf("seed %llu  best epoch %zu  test acc %.2f  macro-F1 %.2f  micro-F1 %.2f  (%.1fs)\n  %s\n",
              static_cast<unsigned long long>(r.seed), r.best_epoch, 100 * r.test.accuracy, 100 * r.test.macro_f1,
              100 * r.test.micro_f1, r.wall_seconds, r.metrics_path.c_str());
}

int cmd_train(const std::string& config_path, const std::string& method, const std::string& augment,
              const std::string& augment_path, const std::vector<std::uint64_t>& seeds, const std::string& out) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!method.empty()) cfg.method = parse_method(method);
  if (!augment.empty() || !augment_path.empty()) apply_augment_name(cfg, augment.empty() ? "cache" : augment, augment_path);
  if (!seeds.empty()) cfg.seeds = seeds;
  if (!out.empty()) cfg.output_dir = fs::absolute(out).string();
  cfg.validate();
  const PreparedData data = prepare_data(cfg);
  RunOptions opts;
  opts.prepared = &data;
  opts.label = augment;
  opts.on_warning = [](const std::string& m) { std::fprintf(stderr, "warning: %s\n", m.c_str()); };
  int status = 0;
  std::printf("%s, config %s\n", method_display_name(cfg.method).c_str(), config_hash(cfg).c_str());
  for (std::uint64_t s : cfg.seeds) {
    const RunRecord r = run_experiment(cfg, s, opts);
    print_run(r);
    if (!r.ok) status = 1;
  }
  return status;
}

int cmd_grid(const std::string& grid_path, const std::string& out) {
  GridSpec g = load_grid_spec(grid_path);
  if (!out.empty()) g.base.output_dir = fs::absolute(out).string();
  const std::vector<std::uint64_t>& seeds = g.seeds.empty() ? g.base.seeds : g.seeds;
  const std::size_t total = g.methods.size() * g.augmenters.size() * g.variants.size() * seeds.size();
  std::size_t done = 0;
  const auto cells = run_grid(g, [&](const GridCell& c, const RunRecord& r) {
    std::fprintf(stderr, "[%zu/%zu] %s / %s seed %llu: %s\n", ++done, total, c.method_label.c_str(), c.augment_label.c_str(),
                 static_cast<unsigned long long>(r.seed),
                 r.ok ? ("macro-F1 " + detail::fixed2(100 * r.test.macro_f1)).c_str() : r.failure.c_str());
  });
  const fs::path dir(g.base.resolve(g.base.output_dir));
  write_text(dir / "grid.csv", grid_csv(cells));
  const std::string table = grid_table(cells);
  write_text(dir / "grid.txt", table);
  std::fputs(table.c_str(), stdout);
  std::printf("wrote %s\n", (dir / "grid.csv").string().c_str());
  std::size_t failed = 0;
  for (const auto& c : cells) failed += c.failures.size();
  return failed ? 1 : 0;
}

int cmd_report(const std::string& runs_dir, const std::string& csv_path) {
  const auto cells = collect_runs(runs_dir);
  std::fputs(grid_table(cells).c_str(), stdout);
  if (!csv_path.empty()) write_text(csv_path, grid_csv(cells));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised text classification lab"};
  app.require_subcommand(1);

  std::string config, out, spec, grid, runs, method, augment, augment_path, csv;
  std::vector<std::uint64_t> seeds;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> synth_seed;

  auto* prep = app.add_subcommand("prep", "normalize, anonymize and encode the splits; write vocab and encoded rows");
  prep->add_option("-c,--config", config, "experiment config")->required()->check(CLI::ExistingFile);
  prep->add_option("-o,--out", out, "output directory")->required();

  auto* synth = app.add_subcommand("synth", "write a synthetic corpus with a matching config.json and grid.json");
  synth->add_option("-o,--out", out, "output directory")->required();
  synth->add_option("-s,--spec", spec, "corpus parameters (JSON)")->check(CLI::ExistingFile);
  synth->add_option("--seed", synth_seed, "corpus seed");

  auto* aug = app.add_subcommand("augment", "materialize EDA, HTTP or cache variants of the training split");
  aug->add_option("-c,--config", config, "experiment config")->required()->check(CLI::ExistingFile);
  aug->add_option("-o,--out", out, "cache file to write")->required();
  aug->add_option("--seed", seed, "augmentation seed");

  auto* train = app.add_subcommand("train", "train and evaluate one configuration");
  train->add_option("-c,--config", config, "experiment config")->required()->check(CLI::ExistingFile);
  train->add_option("-m,--method", method, "method name (overrides the config)");
  train->add_option("-a,--augment", augment,
                    "none|gaussian|eda|manifold_mixup|paraphrase|backtranslate|generate|http (overrides the config)");
  train->add_option("--augment-path", augment_path, "cache file for paraphrase/backtranslate/generate");
  train->add_option("-s,--seed", seeds, "seed(s) (override the config)");
  train->add_option("-o,--out", out, "runs directory (overrides output_dir)");

  auto* gridc = app.add_subcommand("grid", "run a method x augmenter grid and write grid.csv");
  gridc->add_option("-g,--grid", grid, "grid file")->required()->check(CLI::ExistingFile);
  gridc->add_option("-o,--out", out, "runs directory (overrides output_dir)");

  auto* report = app.add_subcommand("report", "tabulate finished runs");
  report->add_option("-r,--runs", runs, "runs directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--csv", csv, "also write a CSV table here");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*prep) return cmd_prep(config, out);
    if (*synth) return cmd_synth(spec, out, synth_seed);
    if (*aug) return cmd_augment(config, out, seed);
    if (*train) return cmd_train(config, method, augment, augment_path, seeds, out);
    if (*gridc) return cmd_grid(grid, out);
    if (*report) return cmd_report(runs, csv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
