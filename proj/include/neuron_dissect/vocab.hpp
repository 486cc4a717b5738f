#ifndef NEURON_DISSECT_VOCAB_HPP
#define NEURON_DISSECT_VOCAB_HPP

// Concept lists, the word -> category mapping and the probe-image manifest.

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "neuron_dissect/csv.hpp"
#include "neuron_dissect/errors.hpp"
#include "neuron_dissect/io_util.hpp"

namespace neuron_dissect {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(first, last - first + 1);
}

/// Trimmed, NFC-normalized, lowercased form used for every word comparison.
inline std::string normalize_word(std::string_view word) {
  const std::string_view t = trim(word);
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) {
    throw Error(ErrorKind::kInvalidParameter, "ICU NFC normalizer unavailable");
  }
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(t.data(), static_cast<int32_t>(t.size())));
  u.toLower(icu::Locale::getRoot());
  icu::UnicodeString normalized = nfc->normalize(u, status);
  if (U_FAILURE(status)) {
    throw Error(ErrorKind::kInvalidParameter,
                "cannot normalize word '" + std::string(t) + "'");
  }
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

// ---------------------------------------------------------------------------
// ConceptList

class ConceptList {
 public:
  ConceptList() = default;

  /// Throws DuplicateWord if two entries normalize to the same word.
  explicit ConceptList(const std::vector<std::string>& words) {
    for (std::size_t i = 0; i < words.size(); ++i) add(words[i], i + 1);
  }

  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }
  const std::string& operator[](std::size_t i) const { return words_[i]; }
  const std::vector<std::string>& words() const noexcept { return words_; }

  std::optional<std::size_t> index_of(std::string_view word) const {
    const auto it = index_.find(normalize_word(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  friend ConceptList parse_concepts(std::string_view text);

  void add(std::string_view raw, std::size_t line) {
    std::string word = normalize_word(raw);
    if (word.empty()) {
      throw Error(ErrorKind::kEmptyLine,
                  "empty concept on line " + std::to_string(line))
          .with_line(line);
    }
    if (!index_.emplace(word, words_.size()).second) {
      throw Error(ErrorKind::kDuplicateWord,
                  "duplicate concept '" + word + "' on line " +
                      std::to_string(line))
          .with_line(line);
    }
    words_.push_back(std::move(word));
  }

  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// One word per LF-terminated line; the final terminator is optional.
inline ConceptList parse_concepts(std::string_view text) {
  ConceptList list;
  std::size_t line = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    ++line;
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    list.add(text.substr(pos, end - pos), line);
    pos = end + 1;
  }
  return list;
}

inline ConceptList read_concepts(const std::filesystem::path& path) {
  try {
    return parse_concepts(read_file(path));
  } catch (Error& e) {
    if (!e.path) e.path = path.string();
    throw;
  }
}

// ---------------------------------------------------------------------------
// Categories

enum class Category : std::size_t {
  kColors,
  kTexturesAndMaterials,
  kObjectsAndMachines,
  kPlacesAndBuildings,
  kNaturalElementsAndOrganisms,
  kActivities,
  kAbstract,
  kNames,
  kUnknown,
  // Engine-defined bucket for words missing from the mapping. Distinct from
  // kUnknown, which is a real category of the shipped mapping.
  kUnmapped,
};

inline constexpr std::size_t kCategoryCount = 10;

inline constexpr std::array<Category, kCategoryCount> kAllCategories = {
    Category::kColors,
    Category::kTexturesAndMaterials,
    Category::kObjectsAndMachines,
    Category::kPlacesAndBuildings,
    Category::kNaturalElementsAndOrganisms,
    Category::kActivities,
    Category::kAbstract,
    Category::kNames,
    Category::kUnknown,
    Category::kUnmapped,
};

constexpr std::string_view category_name(Category c) {
  switch (c) {
    case Category::kColors: return "Colors";
    case Category::kTexturesAndMaterials: return "Textures and materials";
    case Category::kObjectsAndMachines: return "Objects and machines";
    case Category::kPlacesAndBuildings: return "Places and buildings";
    case Category::kNaturalElementsAndOrganisms:
      return "Natural elements and organisms";
    case Category::kActivities: return "Activities";
    case Category::kAbstract: return "Abstract";
    case Category::kNames: return "Names";
    case Category::kUnknown: return "Unknown";
    case Category::kUnmapped: return "unmapped";
  }
  return "unmapped";
}

/// Case-insensitive lookup by display name.
inline std::optional<Category> parse_category(std::string_view name) {
  const std::string key = normalize_word(name);
  for (Category c : kAllCategories) {
    if (normalize_word(category_name(c)) == key) return c;
  }
  return std::nullopt;
}

template <typename T>
using PerCategory = std::array<T, kCategoryCount>;

inline constexpr std::size_t index_of(Category c) {
  return static_cast<std::size_t>(c);
}

class CategoryMap {
 public:
  Category lookup(std::string_view word) const {
    const auto it = entries_.find(normalize_word(word));
    return it == entries_.end() ? Category::kUnmapped : it->second;
  }

  std::size_t size() const noexcept { return entries_.size(); }

  PerCategory<std::size_t> counts() const {
    PerCategory<std::size_t> out{};
    for (const auto& [word, cat] : entries_) ++out[index_of(cat)];
    return out;
  }

  /// Throws DuplicateWord when `word` is already mapped.
  void insert(std::string_view word, Category category, std::size_t line = 0) {
    std::string key = normalize_word(word);
    if (key.empty()) {
      throw Error(ErrorKind::kEmptyLine,
                  "empty word on line " + std::to_string(line))
          .with_line(line);
    }
    if (!entries_.emplace(key, category).second) {
      throw Error(ErrorKind::kDuplicateWord,
                  "word '" + key + "' mapped twice (line " +
                      std::to_string(line) + ")")
          .with_line(line);
    }
  }

  const std::map<std::string, Category>& entries() const noexcept {
    return entries_;
  }

 private:
  std::map<std::string, Category> entries_;
};

/// CSV with header "word,category". An empty file is a valid empty map.
inline CategoryMap parse_category_map(std::string_view text) {
  CategoryMap map;
  const auto rows = csv::parse(text);
  bool header_seen = false;
  for (const auto& row : rows) {
    if (csv::is_blank(row)) continue;
    if (!header_seen) {
      if (row.fields.size() != 2 || normalize_word(row.fields[0]) != "word" ||
          normalize_word(row.fields[1]) != "category") {
        throw Error(ErrorKind::kCsvParse,
                    "expected header 'word,category' on line " +
                        std::to_string(row.line))
            .with_line(row.line);
      }
      header_seen = true;
      continue;
    }
    if (row.fields.size() != 2) {
      throw Error(ErrorKind::kCsvParse,
                  "expected 2 fields on line " + std::to_string(row.line))
          .with_line(row.line);
    }
    const auto category = parse_category(row.fields[1]);
    if (!category) {
      throw Error(ErrorKind::kUnknownCategory,
                  "unknown category '" + std::string(trim(row.fields[1])) +
                      "' on line " + std::to_string(row.line))
          .with_line(row.line);
    }
    map.insert(row.fields[0], *category, row.line);
  }
  return map;
}

inline CategoryMap read_category_map(const std::filesystem::path& path) {
  try {
    return parse_category_map(read_file(path));
  } catch (Error& e) {
    if (!e.path) e.path = path.string();
    throw;
  }
}

// ---------------------------------------------------------------------------
// ImageManifest

/// Probe image ids in tensor row order, with optional complexity scores.
class ImageManifest {
 public:
  ImageManifest() = default;
  explicit ImageManifest(std::vector<std::string> ids,
                         std::vector<std::optional<double>> complexity = {})
      : ids_(std::move(ids)), complexity_(std::move(complexity)) {
    if (complexity_.empty()) complexity_.resize(ids_.size());
    if (complexity_.size() != ids_.size()) {
      throw Error(ErrorKind::kShapeMismatch,
                  "complexity list length differs from id count");
    }
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (ids_[i].empty()) {
        throw Error(ErrorKind::kEmptyLine,
                    "empty image id at index " + std::to_string(i))
            .with_index(i);
      }
      if (!index_.emplace(ids_[i], i).second) {
        throw Error(ErrorKind::kDuplicateWord,
                    "duplicate image id '" + ids_[i] + "'")
            .with_index(i);
      }
      const auto& c = complexity_[i];
      if (c && !(*c >= 0.0 && *c <= 1.0)) {
        throw Error(ErrorKind::kInvalidParameter,
                    "complexity of '" + ids_[i] + "' outside [0,1]")
            .with_index(i);
      }
    }
  }

  std::size_t size() const noexcept { return ids_.size(); }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  std::optional<std::size_t> index_of(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<double> complexity(std::size_t i) const {
    return complexity_[i];
  }

  std::optional<double> complexity(std::string_view id) const {
    const auto i = index_of(id);
    if (!i) return std::nullopt;
    return complexity_[*i];
  }

  bool has_any_complexity() const {
    for (const auto& c : complexity_) {
      if (c) return true;
    }
    return false;
  }

 private:
  std::vector<std::string> ids_;
  std::vector<std::optional<double>> complexity_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// CSV with header "id" or "id,complexity"; an empty complexity cell means
/// no score for that image.
inline ImageManifest parse_manifest(std::string_view text) {
  const auto rows = csv::parse(text);
  std::vector<std::string> ids;
  std::vector<std::optional<double>> complexity;
  bool header_seen = false;
  bool has_complexity = false;
  for (const auto& row : rows) {
    if (csv::is_blank(row)) continue;
    if (!header_seen) {
      const bool ok =
          (row.fields.size() == 1 && trim(row.fields[0]) == "id") ||
          (row.fields.size() == 2 && trim(row.fields[0]) == "id" &&
           trim(row.fields[1]) == "complexity");
      if (!ok) {
        throw Error(ErrorKind::kCsvParse,
                    "expected header 'id' or 'id,complexity' on line " +
                        std::to_string(row.line))
            .with_line(row.line);
      }
      has_complexity = row.fields.size() == 2;
      header_seen = true;
      continue;
    }
    if (row.fields.size() != (has_complexity ? 2u : 1u)) {
      throw Error(ErrorKind::kCsvParse,
                  "wrong field count on line " + std::to_string(row.line))
          .with_line(row.line);
    }
    ids.emplace_back(trim(row.fields[0]));
    std::optional<double> score;
    if (has_complexity) {
      const std::string_view cell = trim(row.fields[1]);
      if (!cell.empty()) {
        try {
          std::size_t used = 0;
          score = std::stod(std::string(cell), &used);
          if (used != cell.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
          throw Error(ErrorKind::kCsvParse,
                      "bad complexity value on line " +
                          std::to_string(row.line))
              .with_line(row.line);
        }
      }
    }
    complexity.push_back(score);
  }
  return ImageManifest(std::move(ids), std::move(complexity));
}

inline ImageManifest read_manifest(const std::filesystem::path& path) {
  try {
    return parse_manifest(read_file(path));
  } catch (Error& e) {
    if (!e.path) e.path = path.string();
    throw;
  }
}

inline std::string format_manifest(const ImageManifest& manifest) {
  const bool with_scores = manifest.has_any_complexity();
  std::string out = with_scores ? "id,complexity\n" : "id\n";
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    out += csv::escape(manifest.id(i));
    if (with_scores) {
      out += ',';
      if (const auto c = manifest.complexity(i)) out += format_double(*c);
    }
    out += '\n';
  }
  return out;
}

}  // namespace neuron_dissect

#endif  // NEURON_DISSECT_VOCAB_HPP
