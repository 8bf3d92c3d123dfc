#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ssl_lab/augment.hpp"
#include "ssl_lab/corpus.hpp"
#include "ssl_lab/error.hpp"
#include "ssl_lab/random.hpp"
#include "ssl_lab/ssl/config.hpp"

namespace ssl_lab {

/// Template corpus: each class has its own keyword list, all classes share a
/// filler vocabulary. Within a list words are drawn Zipf-distributed, so a
/// small labeled split sees the head of each list and misses most of the tail.
struct SyntheticSpec {
  std::size_t num_classes = kNumClasses;
  std::vector<double> class_proportions = {0.36, 0.28, 0.23, 0.13};
  std::size_t keywords_per_class = 150;
  std::size_t filler_words = 400;
  double keyword_rate = 0.25;      // share of tokens that are keywords
  double cross_class_rate = 0.05;  // keyword taken from another class's list
  double zipf_exponent = 1.2;
  std::size_t min_tokens = 8;
  std::size_t max_tokens = 24;
  double label_noise = 0.05;       // labeled splits only
  std::size_t labeled = 100;
  std::size_t unlabeled = 4000;
  std::size_t validation = 500;
  std::size_t test = 1000;
  std::size_t generated = 400;     // rows of the generate-mode cache
  std::size_t variants = 1;        // paraphrase / back-translation variants per labeled row
  double entity_rate = 0.05;       // chance a comment mentions a listed person or organization
  std::uint64_t seed = 7;

  void validate() const {
    require(num_classes >= 2 && num_classes <= kNumClasses, ErrorKind::InvalidArgument,
            "synthetic corpus needs 2.." + std::to_string(kNumClasses) + " classes");
    require(class_proportions.size() == num_classes, ErrorKind::InvalidArgument, "one proportion per class expected");
    for (double p : class_proportions) require(p > 0.0, ErrorKind::InvalidArgument, "class proportions must be positive");
    require(keywords_per_class >= 1 && filler_words >= 1, ErrorKind::InvalidArgument, "word lists must be non-empty");
    require(keyword_rate > 0.0 && keyword_rate <= 1.0, ErrorKind::InvalidArgument, "keyword_rate must lie in (0,1]");
    require(cross_class_rate >= 0.0 && cross_class_rate < 1.0, ErrorKind::InvalidArgument, "cross_class_rate must lie in [0,1)");
    require(zipf_exponent >= 0.0, ErrorKind::InvalidArgument, "zipf_exponent must be >= 0");
    require(min_tokens >= 1 && min_tokens <= max_tokens, ErrorKind::InvalidArgument, "need 1 <= min_tokens <= max_tokens");
    require(label_noise >= 0.0 && label_noise < 1.0, ErrorKind::InvalidArgument, "label_noise must lie in [0,1)");
    require(labeled >= 1 && unlabeled >= 1 && validation >= 1 && test >= 1, ErrorKind::InvalidArgument,
            "split counts must be >= 1");
    require(variants >= 1, ErrorKind::InvalidArgument, "variants must be >= 1");
    require(entity_rate >= 0.0 && entity_rate <= 1.0, ErrorKind::InvalidArgument, "entity_rate must lie in [0,1]");
  }
};

/// Per-class counts summing to `n`, by largest remainder (ties to the lower class).
inline std::vector<std::size_t> apportion(std::size_t n, const std::vector<double>& proportions) {
  const double total = std::accumulate(proportions.begin(), proportions.end(), 0.0);
  std::vector<std::size_t> counts(proportions.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t c = 0; c < proportions.size(); ++c) {
    const double exact = static_cast<double>(n) * proportions[c] / total;
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    used += counts[c];
    rem.emplace_back(-(exact - std::floor(exact)), c);
  }
  std::sort(rem.begin(), rem.end());
  for (std::size_t i = 0; used < n; ++i, ++used) ++counts[rem[i % rem.size()].second];
  return counts;
}

namespace detail {

struct Token {
  std::size_t word;  // index into the word table
  int cls;           // keyword class, -1 for filler
};

class CorpusModel {
 public:
  explicit CorpusModel(const SyntheticSpec& spec) : spec_(spec), rng_(make_rng(spec.seed, Stream::Generator)) {
    // pseudo-words from ascii syllables; uniqueness holds after normalization
    static const char* const kOnsets[] = {"b", "c", "d", "f", "g", "j", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "cr", "st", "tr", "pl"};
    static const char* const kVowels[] = {"a", "e", "i", "o", "u"};
    std::set<std::string> seen;
    auto fresh = [&](std::size_t syllables) {
      for (;;) {
        std::string w;
        for (std::size_t s = 0; s < syllables; ++s) {
          w += kOnsets[uniform_index(rng_, std::size(kOnsets))];
          w += kVowels[uniform_index(rng_, std::size(kVowels))];
        }
        if (uniform01(rng_) < 0.3) w += "r";
        if (seen.insert(w).second) return w;
      }
    };
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
      keywords_.emplace_back();
      for (std::size_t k = 0; k < spec.keywords_per_class; ++k) {
        keywords_[c].push_back(words_.size());
        words_.push_back(fresh(3));
      }
    }
    for (std::size_t f = 0; f < spec.filler_words; ++f) {
      filler_.push_back(words_.size());
      words_.push_back(fresh(2));
    }
    auto zipf = [&](std::size_t n) {
      std::vector<double> w(n);
      for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i + 1), spec.zipf_exponent);
      return std::discrete_distribution<std::size_t>(w.begin(), w.end());
    };
    keyword_dist_ = zipf(spec.keywords_per_class);
    filler_dist_ = zipf(spec.filler_words);
    static const char* const kFirst[] = {"Ștefan", "Ioana", "Mihai", "Andreea", "Răzvan", "Elena"};
    static const char* const kLast[] = {"Popescu", "Ionescu", "Dumitrescu", "Stănescu"};
    static const char* const kOrgs[] = {"Partidul Verde", "Clubul Sportiv Dinamo", "Banca Națională",
                                        "Uniunea Europeană"};
    for (const char* f : kFirst)
      for (const char* l : kLast) people_.push_back(std::string(f) + " " + l);
    for (const char* o : kOrgs) orgs_.push_back(o);
  }

  Rng& rng() { return rng_; }
  const std::vector<std::string>& people() const { return people_; }
  const std::vector<std::string>& orgs() const { return orgs_; }

  std::vector<Token> sentence(std::size_t cls) {
    const std::size_t len = spec_.min_tokens + uniform_index(rng_, spec_.max_tokens - spec_.min_tokens + 1);
    std::vector<Token> out;
    for (std::size_t i = 0; i < len; ++i) out.push_back(draw(cls));
    return out;
  }

  Token draw(std::size_t cls) {
    if (uniform01(rng_) < spec_.keyword_rate) {
      std::size_t from = cls;
      if (spec_.num_classes > 1 && uniform01(rng_) < spec_.cross_class_rate) {
        from = uniform_index(rng_, spec_.num_classes - 1);
        if (from >= cls) ++from;
      }
      return {keywords_[from][keyword_dist_(rng_)], static_cast<int>(from)};
    }
    return {filler_[filler_dist_(rng_)], -1};
  }

  /// The word `step` places further along the same list (wrapping).
  std::size_t neighbour(const Token& t, std::size_t step) const {
    const auto& list = t.cls >= 0 ? keywords_[static_cast<std::size_t>(t.cls)] : filler_;
    const std::size_t base = t.cls >= 0 ? list.front() : filler_.front();
    const std::size_t pos = t.word - base;
    return list[(pos + step) % list.size()];
  }

  /// Paraphrase: fresh filler, keywords kept or moved to a synonym.
  std::vector<Token> paraphrase(const std::vector<Token>& s) {
    std::vector<Token> out;
    for (const auto& t : s) {
      if (t.cls < 0) {
        if (uniform01(rng_) < 0.5) out.push_back({filler_[filler_dist_(rng_)], -1});
        else out.push_back(t);
      } else {
        out.push_back(uniform01(rng_) < 0.3 ? Token{neighbour(t, 1), t.cls} : t);
      }
    }
    return out;
  }

  /// Round-trip translation: synonym drift, local reordering, dropped filler.
  std::vector<Token> backtranslate(const std::vector<Token>& s) {
    std::vector<Token> out;
    for (const auto& t : s) {
      if (t.cls < 0 && uniform01(rng_) < 0.15) continue;
      out.push_back(uniform01(rng_) < 0.2 ? Token{neighbour(t, 2), t.cls} : t);
    }
    if (out.empty()) out.push_back(s.front());
    for (std::size_t i = 0; i + 1 < out.size(); i += 2)
      if (uniform01(rng_) < 0.3) std::swap(out[i], out[i + 1]);
    return out;
  }

  /// Surface form with casing, diacritics, repeated letters and punctuation noise.
  std::string render(const std::vector<Token>& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::string w = words_[s[i].word];
      const double u = uniform01(rng_);
      if (u < 0.05) {
        for (char& ch : w) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      } else if (u < 0.10) {
        const std::size_t p = w.find('a');
        if (p != std::string::npos) w.replace(p, 1, "ă");
      } else if (u < 0.13) {
        w += std::string(3, w.back());
      }
      if (i == 0) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
      if (!out.empty()) out += ' ';
      out += w;
      if (uniform01(rng_) < 0.04) out += ",";
    }
    const double end = uniform01(rng_);
    if (end < 0.3) out += "!!!";
    else if (end < 0.6) out += ".";
    if (uniform01(rng_) < spec_.entity_rate) {
      const bool person = uniform01(rng_) < 0.7;
      const auto& pool = person ? people_ : orgs_;
      out = pool[uniform_index(rng_, pool.size())] + " " + out;
    }
    return out;
  }

  std::vector<std::string> synonym_lines() const {
    std::vector<std::string> lines;
    for (std::size_t c = 0; c < keywords_.size(); ++c)
      for (std::size_t w : keywords_[c]) {
        const Token t{w, static_cast<int>(c)};
        lines.push_back(words_[w] + "\t" + words_[neighbour(t, 1)] + "," + words_[neighbour(t, 2)]);
      }
    for (std::size_t w : filler_) lines.push_back(words_[w] + "\t" + words_[neighbour(Token{w, -1}, 1)]);
    return lines;
  }

 private:
  SyntheticSpec spec_;
  Rng rng_;
  std::vector<std::string> words_;
  std::vector<std::vector<std::size_t>> keywords_;
  std::vector<std::size_t> filler_;
  std::discrete_distribution<std::size_t> keyword_dist_;
  std::discrete_distribution<std::size_t> filler_dist_;
  std::vector<std::string> people_;
  std::vector<std::string> orgs_;
};

}  // namespace detail

struct SyntheticCorpus {
  std::vector<RawRecord> train;
  std::vector<RawRecord> unlabeled;
  std::vector<RawRecord> validation;
  std::vector<RawRecord> test;
  AugmentCache paraphrase;
  AugmentCache backtranslate;
  AugmentCache generated;
  std::vector<std::string> synonym_lines;  // word<TAB>syn,...
  std::vector<std::string> entity_lines;   // surface<TAB>PERS|ORG
  std::size_t noisy_labels = 0;
};

inline SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec) {
  spec.validate();
  detail::CorpusModel model(spec);
  Rng& rng = model.rng();
  SyntheticCorpus out;
  out.paraphrase.mode = AugmentMode::Paraphrase;
  out.backtranslate.mode = AugmentMode::Backtranslate;
  out.generated.mode = AugmentMode::Generate;
  std::int64_t next_id = 1;

  auto noisy = [&](std::size_t cls) {
    if (uniform01(rng) >= spec.label_noise) return cls;
    ++out.noisy_labels;
    std::size_t other = uniform_index(rng, spec.num_classes - 1);
    return other >= cls ? other + 1 : other;
  };

  // Labeled splits hold exact per-class counts in a shuffled order.
  auto split = [&](std::size_t n, bool labeled, bool with_variants) {
    std::vector<std::size_t> classes;
    const auto counts = apportion(n, spec.class_proportions);
    for (std::size_t c = 0; c < counts.size(); ++c) classes.insert(classes.end(), counts[c], c);
    std::shuffle(classes.begin(), classes.end(), rng);
    std::vector<RawRecord> records;
    for (std::size_t cls : classes) {
      const auto tokens = model.sentence(cls);
      RawRecord r{next_id++, model.render(tokens), std::nullopt};
      if (labeled) r.label = class_from_index(noisy(cls));
      if (with_variants) {
        auto& para = out.paraphrase.variants[r.id];
        auto& back = out.backtranslate.variants[r.id];
        for (std::size_t v = 0; v < spec.variants; ++v) {
          para.push_back(model.render(model.paraphrase(tokens)));
          back.push_back(model.render(model.backtranslate(tokens)));
        }
      }
      records.push_back(std::move(r));
    }
    return records;
  };

  out.train = split(spec.labeled, true, true);
  out.unlabeled = split(spec.unlabeled, false, false);
  out.validation = split(spec.validation, true, false);
  out.test = split(spec.test, true, false);

  const auto gen_counts = apportion(spec.generated, spec.class_proportions);
  for (std::size_t c = 0; c < gen_counts.size(); ++c)
    for (std::size_t i = 0; i < gen_counts[c]; ++i)
      out.generated.generated.push_back({model.render(model.sentence(c)), class_from_index(noisy(c))});
  std::shuffle(out.generated.generated.begin(), out.generated.generated.end(), rng);

  out.synonym_lines = model.synonym_lines();
  for (const auto& p : model.people()) out.entity_lines.push_back(p + "\tPERS");
  for (const auto& o : model.orgs()) out.entity_lines.push_back(o + "\tORG");
  return out;
}

/// File names written by write_synthetic_corpus, relative to the output directory.
struct SyntheticLayout {
  static constexpr const char* train = "train.jsonl";
  static constexpr const char* unlabeled = "unlabeled.jsonl";
  static constexpr const char* validation = "validation.jsonl";
  static constexpr const char* test = "test.jsonl";
  static constexpr const char* paraphrase = "paraphrase.jsonl";
  static constexpr const char* backtranslate = "backtranslate.jsonl";
  static constexpr const char* generate = "generate.jsonl";
  static constexpr const char* synonyms = "synonyms.tsv";
  static constexpr const char* entities = "entities.tsv";
};

inline void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    require(out.good(), ErrorKind::Io, "cannot write " + (std::filesystem::path(dir) / name).string());
    return out;
  };
  {
    auto o = open(SyntheticLayout::train);
    write_dataset_jsonl(o, corpus.train);
  }
  {
    auto o = open(SyntheticLayout::unlabeled);
    write_dataset_jsonl(o, corpus.unlabeled);
  }
  {
    auto o = open(SyntheticLayout::validation);
    write_dataset_jsonl(o, corpus.validation);
  }
  {
    auto o = open(SyntheticLayout::test);
    write_dataset_jsonl(o, corpus.test);
  }
  {
    auto o = open(SyntheticLayout::paraphrase);
    write_cache(o, corpus.paraphrase);
  }
  {
    auto o = open(SyntheticLayout::backtranslate);
    write_cache(o, corpus.backtranslate);
  }
  {
    auto o = open(SyntheticLayout::generate);
    write_cache(o, corpus.generated);
  }
  {
    auto o = open(SyntheticLayout::synonyms);
    for (const auto& l : corpus.synonym_lines) o << l << '\n';
  }
  {
    auto o = open(SyntheticLayout::entities);
    for (const auto& l : corpus.entity_lines) o << l << '\n';
  }
}

inline nlohmann::json to_json(const SyntheticSpec& s) {
  return {{"num_classes", s.num_classes},       {"class_proportions", s.class_proportions},
          {"keywords_per_class", s.keywords_per_class}, {"filler_words", s.filler_words},
          {"keyword_rate", s.keyword_rate},     {"cross_class_rate", s.cross_class_rate},
          {"zipf_exponent", s.zipf_exponent},   {"min_tokens", s.min_tokens},
          {"max_tokens", s.max_tokens},         {"label_noise", s.label_noise},
          {"labeled", s.labeled},               {"unlabeled", s.unlabeled},
          {"validation", s.validation},         {"test", s.test},
          {"generated", s.generated},           {"variants", s.variants},
          {"entity_rate", s.entity_rate},       {"seed", s.seed}};
}

inline void from_json_checked(const nlohmann::json& j, SyntheticSpec& s, const std::string& where = "synthetic") {
  detail::FieldReader r(j, where);
  r.read("num_classes", s.num_classes);
  r.read("class_proportions", s.class_proportions);
  r.read("keywords_per_class", s.keywords_per_class);
  r.read("filler_words", s.filler_words);
  r.read("keyword_rate", s.keyword_rate);
  r.read("cross_class_rate", s.cross_class_rate);
  r.read("zipf_exponent", s.zipf_exponent);
  r.read("min_tokens", s.min_tokens);
  r.read("max_tokens", s.max_tokens);
  r.read("label_noise", s.label_noise);
  r.read("labeled", s.labeled);
  r.read("unlabeled", s.unlabeled);
  r.read("validation", s.validation);
  r.read("test", s.test);
  r.read("generated", s.generated);
  r.read("variants", s.variants);
  r.read("entity_rate", s.entity_rate);
  r.read("seed", s.seed);
  r.finish();
}

}  // namespace ssl_lab
