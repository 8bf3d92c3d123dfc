#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "ssl_lab/error.hpp"
#include "ssl_lab/text.hpp"

namespace ssl_lab {

// ---------------------------------------------------------------------------
// Labels

inline constexpr std::size_t kNumClasses = 4;

enum class ClassLabel : std::uint8_t { Other = 0, Abuse = 1, Insult = 2, Profanity = 3 };

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {"OTHER", "ABUSE", "INSULT", "PROFANITY"};

inline std::string_view class_name(ClassLabel label) { return kClassNames[static_cast<std::size_t>(label)]; }

inline std::size_t class_index(ClassLabel label) { return static_cast<std::size_t>(label); }

inline ClassLabel class_from_index(std::size_t index) {
  require(index < kNumClasses, ErrorKind::InvalidArgument, "class index out of range: " + std::to_string(index));
  return static_cast<ClassLabel>(index);
}

inline std::optional<ClassLabel> parse_class(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i)
    if (kClassNames[i] == name) return static_cast<ClassLabel>(i);
  return std::nullopt;
}

inline ClassLabel parse_class_or_throw(std::string_view name, std::size_t line) {
  auto label = parse_class(name);
  require(label.has_value(), ErrorKind::UnknownLabel,
          "line " + std::to_string(line) + ": unknown label '" + std::string(name) + "'");
  return *label;
}

// ---------------------------------------------------------------------------
// Records and configuration

struct RawRecord {
  std::int64_t id = 0;
  std::string text;
  std::optional<ClassLabel> label;

  friend bool operator==(const RawRecord&, const RawRecord&) = default;
};

struct PreprocessConfig {
  std::size_t max_len = 96;
  std::size_t vocab_size = 30000;
  std::size_t collapse_run_len = 3;

  void validate() const {
    require(max_len >= 1, ErrorKind::InvalidArgument, "max_len must be >= 1");
    require(vocab_size >= 4, ErrorKind::InvalidArgument, "vocab_size must be >= 4");
    require(collapse_run_len >= 2, ErrorKind::InvalidArgument, "collapse_run_len must be >= 2");
  }
};

enum class DatasetFormat { Jsonl, Csv };

inline DatasetFormat parse_format(std::string_view s) {
  if (s == "jsonl") return DatasetFormat::Jsonl;
  if (s == "csv") return DatasetFormat::Csv;
  throw Error(ErrorKind::InvalidArgument, "unknown dataset format '" + std::string(s) + "'");
}

inline DatasetFormat format_for_path(const std::string& path) {
  return path.size() >= 4 && path.substr(path.size() - 4) == ".csv" ? DatasetFormat::Csv : DatasetFormat::Jsonl;
}

// ---------------------------------------------------------------------------
// Loading

namespace detail {

// RFC 4180 style records; quoted fields may span lines.
inline std::vector<std::pair<std::size_t, std::vector<std::string>>> parse_csv(std::istream& in) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t row_line = 1;
  char ch;
  auto end_row = [&] {
    fields.push_back(std::move(field));
    field.clear();
    if (!(fields.size() == 1 && fields[0].empty())) rows.emplace_back(row_line, std::move(fields));
    fields.clear();
    field_started = false;
  };
  while (in.get(ch)) {
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
      field_started = false;
    } else if (ch == '\n') {
      end_row();
      ++line;
      row_line = line;
    } else if (ch != '\r') {
      field.push_back(ch);
      field_started = true;
    }
  }
  require(!in_quotes, ErrorKind::Parse, "line " + std::to_string(row_line) + ": unterminated quoted field");
  if (!field.empty() || !fields.empty()) end_row();
  return rows;
}

inline void check_record(RawRecord& rec, std::size_t line, std::unordered_set<std::int64_t>& seen) {
  require(!text::trim(rec.text).empty(), ErrorKind::Parse, "line " + std::to_string(line) + ": empty text");
  require(seen.insert(rec.id).second, ErrorKind::DuplicateId,
          "line " + std::to_string(line) + ": duplicate id " + std::to_string(rec.id));
}

}  // namespace detail

inline std::vector<RawRecord> parse_dataset(std::istream& in, DatasetFormat format) {
  std::vector<RawRecord> records;
  std::unordered_set<std::int64_t> seen;
  if (format == DatasetFormat::Jsonl) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + e.what());
      }
      require(j.is_object() && j.contains("id") && j["id"].is_number_integer() && j.contains("text") &&
                  j["text"].is_string(),
              ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected integer 'id' and string 'text'");
      RawRecord rec;
      rec.id = j["id"].get<std::int64_t>();
      rec.text = j["text"].get<std::string>();
      if (j.contains("label") && !j["label"].is_null()) {
        require(j["label"].is_string(), ErrorKind::Parse, "line " + std::to_string(line_no) + ": label must be a string");
        rec.label = parse_class_or_throw(j["label"].get<std::string>(), line_no);
      }
      detail::check_record(rec, line_no, seen);
      records.push_back(std::move(rec));
    }
    return records;
  }

  auto rows = detail::parse_csv(in);
  require(!rows.empty(), ErrorKind::Parse, "line 1: missing CSV header");
  const auto& header = rows.front().second;
  require(header.size() >= 2 && header[0] == "id" && header[1] == "text" && (header.size() < 3 || header[2] == "label") &&
              header.size() <= 3,
          ErrorKind::Parse, "line 1: CSV header must be id,text,label");
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [line_no, fields] = rows[r];
    require(fields.size() == header.size() || (header.size() == 3 && fields.size() == 2), ErrorKind::Parse,
            "line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) + " fields");
    RawRecord rec;
    std::size_t pos = 0;
    try {
      rec.id = std::stoll(fields[0], &pos);
    } catch (const std::logic_error&) {
      pos = std::string::npos;
    }
    require(pos == fields[0].size(), ErrorKind::Parse,
            "line " + std::to_string(line_no) + ": invalid id '" + fields[0] + "'");
    rec.text = fields[1];
    if (fields.size() == 3 && !fields[2].empty()) rec.label = parse_class_or_throw(fields[2], line_no);
    detail::check_record(rec, line_no, seen);
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<RawRecord> load_dataset(const std::string& path, DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open dataset '" + path + "'");
  return parse_dataset(in, format);
}

inline std::vector<RawRecord> load_dataset(const std::string& path) { return load_dataset(path, format_for_path(path)); }

inline void write_dataset_jsonl(std::ostream& out, const std::vector<RawRecord>& records) {
  for (const auto& r : records) {
    nlohmann::json j = {{"id", r.id}, {"text", r.text}};
    if (r.label) j["label"] = std::string(class_name(*r.label));
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Anonymization

enum class EntityKind { Person, Organization };

inline std::string_view entity_tag(EntityKind kind) { return kind == EntityKind::Person ? "[PERS]" : "[ORG]"; }

class EntityLexicon {
 public:
  void add(std::string_view surface, EntityKind kind) {
    std::u32string key = text::fold(text::to_u32(text::trim(surface)));
    if (key.empty()) return;
    lengths_.insert(key.size());
    entries_[std::move(key)] = kind;
  }

  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }

  std::optional<EntityKind> lookup_folded(const std::u32string& folded) const {
    auto it = entries_.find(folded);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  /// Distinct folded entry lengths, longest first.
  const std::set<std::size_t, std::greater<>>& lengths() const noexcept { return lengths_; }

 private:
  std::unordered_map<std::u32string, EntityKind> entries_;
  std::set<std::size_t, std::greater<>> lengths_;
};

/// `surface<TAB>PERS|ORG` per line.
inline EntityLexicon parse_entity_lexicon(std::istream& in) {
  EntityLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    require(tab != std::string::npos, ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected surface<TAB>kind");
    const std::string kind = text::trim(line.substr(tab + 1));
    EntityKind k;
    if (kind == "PERS") k = EntityKind::Person;
    else if (kind == "ORG") k = EntityKind::Organization;
    else throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": entity kind must be PERS or ORG");
    lex.add(line.substr(0, tab), k);
  }
  return lex;
}

inline EntityLexicon load_entity_lexicon(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open entity lexicon '" + path + "'");
  return parse_entity_lexicon(in);
}

/// Replaces every lexicon surface form (longest match first, on word
/// boundaries, ignoring case and diacritics) with its tag literal.
inline std::string anonymize(std::string_view input, const EntityLexicon& lexicon) {
  if (lexicon.empty()) return std::string(input);
  const std::u32string original = text::to_u32(input);

  std::u32string folded;
  std::vector<std::size_t> origin;  // folded index -> original index
  for (std::size_t i = 0; i < original.size(); ++i) {
    const std::u32string f = text::fold(std::u32string_view(&original[i], 1));
    for (char32_t c : f) {
      folded.push_back(c);
      origin.push_back(i);
    }
  }

  std::u32string out;
  std::size_t copied = 0;  // next original index not yet copied
  std::size_t pos = 0;
  while (pos < folded.size()) {
    const bool boundary_before = pos == 0 || !text::is_word_char(folded[pos - 1]);
    bool matched = false;
    if (boundary_before && text::is_word_char(folded[pos])) {
      for (std::size_t len : lexicon.lengths()) {
        const std::size_t end = pos + len;
        if (end > folded.size()) continue;
        if (end < folded.size() && text::is_word_char(folded[end])) continue;
        const auto kind = lexicon.lookup_folded(folded.substr(pos, len));
        if (!kind) continue;
        const std::size_t orig_begin = origin[pos];
        std::size_t orig_end = origin[end - 1] + 1;
        const std::size_t next_orig = end < folded.size() ? origin[end] : original.size();
        orig_end = std::max(orig_end, next_orig);  // swallow trailing marks that fold to nothing
        out.append(original, copied, orig_begin - copied);
        const std::u32string tag = text::to_u32(entity_tag(*kind));
        out += tag;
        copied = orig_end;
        pos = end;
        matched = true;
        break;
      }
    }
    if (!matched) ++pos;
  }
  out.append(original, copied, std::u32string::npos);
  return text::to_utf8(out);
}

// ---------------------------------------------------------------------------
// Normalization

namespace detail {

inline void remove_all(std::u32string& s, std::u32string_view needle) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t p = s.find(needle); p != std::u32string::npos; p = s.find(needle, p)) {
      s.erase(p, needle.size());
      changed = true;
    }
  }
}

}  // namespace detail

inline std::string normalize_text(std::string_view input, const PreprocessConfig& cfg) {
  // (1) diacritics, (2) case
  std::u32string s = text::fold(text::to_u32(input));

  // (3) entity tags; removing one may expose another, so repeat to a fixed point
  bool changed = true;
  while (changed) {
    const std::size_t before = s.size();
    detail::remove_all(s, U"[pers]");
    detail::remove_all(s, U"[org]");
    changed = s.size() != before;
  }

  // (4) repeated characters
  std::u32string collapsed;
  collapsed.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    const std::size_t run = j - i;
    collapsed.append(run >= cfg.collapse_run_len ? 2 : run, s[i]);
    i = j;
  }

  // (5) whitespace
  std::u32string out;
  out.reserve(collapsed.size());
  bool pending_space = false;
  for (char32_t c : collapsed) {
    if (text::is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(c);
  }
  return text::to_utf8(out);
}

// ---------------------------------------------------------------------------
// Vocabulary and encoding

inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kUnkId = 1;

class Vocabulary {
 public:
  Vocabulary() : tokens_{"<pad>", "<unk>"}, ids_{{"<pad>", kPadId}, {"<unk>", kUnkId}} {}

  std::size_t size() const noexcept { return tokens_.size(); }

  std::int32_t id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnkId : it->second;
  }

  const std::string& token(std::int32_t id) const {
    require(id >= 0 && static_cast<std::size_t>(id) < tokens_.size(), ErrorKind::TokenOutOfRange,
            "token id " + std::to_string(id));
    return tokens_[static_cast<std::size_t>(id)];
  }

  bool contains(const std::string& token) const { return ids_.count(token) > 0; }

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  /// Reconstructs a vocabulary from its id-ordered token list (ids 0 and 1 reserved).
  static Vocabulary from_tokens(const std::vector<std::string>& content_tokens) {
    Vocabulary v;
    for (const auto& t : content_tokens) v.push(t);
    return v;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  friend Vocabulary build_vocab(const std::vector<std::string>&, const PreprocessConfig&);

  void push(const std::string& token) {
    require(!ids_.count(token), ErrorKind::InvalidArgument, "duplicate vocabulary token '" + token + "'");
    ids_.emplace(token, static_cast<std::int32_t>(tokens_.size()));
    tokens_.push_back(token);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

/// `corpus` holds already-normalized strings.
inline Vocabulary build_vocab(const std::vector<std::string>& corpus, const PreprocessConfig& cfg) {
  cfg.validate();
  require(!corpus.empty(), ErrorKind::EmptyCorpus, "cannot build a vocabulary from an empty corpus");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& line : corpus)
    for (auto& tok : text::tokenize(line)) ++freq[tok];
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v;
  const std::size_t keep = std::min(ranked.size(), cfg.vocab_size - 2);
  for (std::size_t i = 0; i < keep; ++i) v.push(ranked[i].first);
  return v;
}

struct EncodedSample {
  std::int64_t id = 0;
  std::vector<std::int32_t> token_ids;
  std::vector<std::uint8_t> attention_mask;
  std::optional<ClassLabel> label;

  std::size_t real_length() const {
    return static_cast<std::size_t>(std::count(attention_mask.begin(), attention_mask.end(), std::uint8_t{1}));
  }

  friend bool operator==(const EncodedSample&, const EncodedSample&) = default;
};

inline EncodedSample encode(std::string_view raw_text, const Vocabulary& vocab, const PreprocessConfig& cfg) {
  const std::string normalized = normalize_text(raw_text, cfg);
  const auto tokens = text::tokenize(normalized);
  require(!tokens.empty(), ErrorKind::EmptyAfterNormalization, "text is empty after normalization");
  EncodedSample s;
  s.token_ids.assign(cfg.max_len, kPadId);
  s.attention_mask.assign(cfg.max_len, 0);
  const std::size_t n = std::min(tokens.size(), cfg.max_len);
  for (std::size_t i = 0; i < n; ++i) {
    s.token_ids[i] = vocab.id(tokens[i]);
    s.attention_mask[i] = 1;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Splits

enum class SplitName { Train, Validation, Test, Unlabeled };

inline std::string_view split_name(SplitName s) {
  switch (s) {
    case SplitName::Train: return "train";
    case SplitName::Validation: return "validation";
    case SplitName::Test: return "test";
    case SplitName::Unlabeled: return "unlabeled";
  }
  return "?";
}

using ClassCounts = std::array<std::size_t, kNumClasses>;

struct DatasetSplit {
  SplitName name = SplitName::Train;
  std::vector<EncodedSample> samples;

  bool labeled() const noexcept { return name != SplitName::Unlabeled; }

  ClassCounts class_counts() const {
    ClassCounts counts{};
    for (const auto& s : samples)
      if (s.label) ++counts[class_index(*s.label)];
    return counts;
  }

  void validate() const {
    for (const auto& s : samples) {
      if (labeled())
        require(s.label.has_value(), ErrorKind::InvalidArgument,
                std::string(split_name(name)) + " split sample " + std::to_string(s.id) + " has no label");
      else
        require(!s.label.has_value(), ErrorKind::InvalidArgument,
                "unlabeled split sample " + std::to_string(s.id) + " carries a label");
    }
  }
};

inline ClassCounts count_labels(const std::vector<RawRecord>& records) {
  ClassCounts counts{};
  for (const auto& r : records)
    if (r.label) ++counts[class_index(*r.label)];
  return counts;
}

/// Most frequent class count over least frequent class count.
inline double imbalance_ratio(const ClassCounts& counts) {
  for (std::size_t c = 0; c < counts.size(); ++c)
    require(counts[c] > 0, ErrorKind::ZeroClassCount, "class " + std::string(kClassNames[c]) + " has no samples");
  const auto [mn, mx] = std::minmax_element(counts.begin(), counts.end());
  return static_cast<double>(*mx) / static_cast<double>(*mn);
}

inline double imbalance_ratio(const DatasetSplit& split) {
  require(split.labeled(), ErrorKind::InvalidArgument, "imbalance ratio needs a labeled split");
  return imbalance_ratio(split.class_counts());
}

}  // namespace ssl_lab
