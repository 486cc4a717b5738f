#ifndef NEURON_DISSECT_REPORT_IO_HPP
#define NEURON_DISSECT_REPORT_IO_HPP

// Text formats exchanged between the pipeline stages:
//   labels CSV       layer,neuron,concept,score
//   top images CSV   layer,neuron,rank,image
//   reports JSON     {"layers":[{layer, neurons, tau, retained, ...}]}
//   reports CSV      one row per layer
//   long CSV         layer,category,pct
//   comparison CSV   one row per aligned layer pair

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "neuron_dissect/analysis.hpp"
#include "neuron_dissect/csv.hpp"
#include "neuron_dissect/dissect.hpp"
#include "neuron_dissect/errors.hpp"
#include "neuron_dissect/io_util.hpp"
#include "neuron_dissect/vocab.hpp"

namespace neuron_dissect {

inline std::vector<NeuronLabel> to_labels(const LayerLabeling& labeling,
                                          std::size_t layer,
                                          const ConceptList& concepts,
                                          const ImageManifest& manifest) {
  std::vector<NeuronLabel> out;
  out.reserve(labeling.neurons.size());
  for (const auto& a : labeling.neurons) {
    NeuronLabel l;
    l.layer = layer;
    l.neuron = a.neuron;
    l.word = concepts[a.concept_id];
    l.score = a.score;
    for (const std::size_t img : a.top_images) {
      l.top_images.push_back(manifest.id(img));
    }
    out.push_back(std::move(l));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Labels

inline std::string format_labels_csv(std::span<const NeuronLabel> labels) {
  std::string out = "layer,neuron,concept,score\n";
  for (const auto& l : labels) {
    out += std::to_string(l.layer) + ',' + std::to_string(l.neuron) + ',' +
           csv::escape(l.word) + ',' + format_double(l.score) + '\n';
  }
  return out;
}

inline std::string format_top_images_csv(std::span<const NeuronLabel> labels) {
  std::string out = "layer,neuron,rank,image\n";
  for (const auto& l : labels) {
    for (std::size_t r = 0; r < l.top_images.size(); ++r) {
      out += std::to_string(l.layer) + ',' + std::to_string(l.neuron) + ',' +
             std::to_string(r) + ',' + csv::escape(l.top_images[r]) + '\n';
    }
  }
  return out;
}

namespace detail {

inline std::size_t parse_index(std::string_view s, std::size_t line) {
  const std::string_view t = trim(s);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
    throw Error(ErrorKind::kCsvParse,
                "bad integer '" + std::string(t) + "' on line " +
                    std::to_string(line))
        .with_line(line);
  }
  return v;
}

inline double parse_real(std::string_view s, std::size_t line) {
  const std::string_view t = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
    throw Error(ErrorKind::kCsvParse,
                "bad number '" + std::string(t) + "' on line " +
                    std::to_string(line))
        .with_line(line);
  }
  return v;
}

inline void expect_header(const std::vector<csv::Row>& rows,
                          std::string_view header) {
  if (rows.empty()) {
    throw Error(ErrorKind::kCsvParse,
                "missing header '" + std::string(header) + "'");
  }
  std::string got;
  for (std::size_t i = 0; i < rows[0].fields.size(); ++i) {
    if (i) got += ',';
    got += trim(rows[0].fields[i]);
  }
  if (got != header) {
    throw Error(ErrorKind::kCsvParse, "expected header '" + std::string(header) +
                                          "', got '" + got + "'")
        .with_line(1);
  }
}

}  // namespace detail

/// Parses a labels CSV and, when given, its top-images companion.
inline std::vector<NeuronLabel> parse_labels(std::string_view labels_csv,
                                             std::string_view top_images_csv = {}) {
  const auto rows = csv::parse(labels_csv);
  detail::expect_header(rows, "layer,neuron,concept,score");
  std::vector<NeuronLabel> labels;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> where;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (csv::is_blank(row)) continue;
    if (row.fields.size() != 4) {
      throw Error(ErrorKind::kCsvParse,
                  "expected 4 fields on line " + std::to_string(row.line))
          .with_line(row.line);
    }
    NeuronLabel l;
    l.layer = detail::parse_index(row.fields[0], row.line);
    l.neuron = detail::parse_index(row.fields[1], row.line);
    l.word = normalize_word(row.fields[2]);
    l.score = detail::parse_real(row.fields[3], row.line);
    if (!where.emplace(std::make_pair(l.layer, l.neuron), labels.size()).second) {
      throw Error(ErrorKind::kCsvParse,
                  "neuron listed twice on line " + std::to_string(row.line))
          .with_line(row.line);
    }
    labels.push_back(std::move(l));
  }
  if (top_images_csv.empty()) return labels;

  const auto top_rows = csv::parse(top_images_csv);
  detail::expect_header(top_rows, "layer,neuron,rank,image");
  for (std::size_t i = 1; i < top_rows.size(); ++i) {
    const auto& row = top_rows[i];
    if (csv::is_blank(row)) continue;
    if (row.fields.size() != 4) {
      throw Error(ErrorKind::kCsvParse,
                  "expected 4 fields on line " + std::to_string(row.line))
          .with_line(row.line);
    }
    const auto key = std::make_pair(detail::parse_index(row.fields[0], row.line),
                                    detail::parse_index(row.fields[1], row.line));
    const std::size_t rank = detail::parse_index(row.fields[2], row.line);
    const auto it = where.find(key);
    if (it == where.end()) {
      throw Error(ErrorKind::kCsvParse,
                  "top image for unknown neuron on line " +
                      std::to_string(row.line))
          .with_line(row.line);
    }
    auto& tops = labels[it->second].top_images;
    if (rank != tops.size()) {
      throw Error(ErrorKind::kCsvParse,
                  "top image ranks out of order on line " +
                      std::to_string(row.line))
          .with_line(row.line);
    }
    tops.emplace_back(trim(row.fields[3]));
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json category_json(const PerCategory<double>& pct) {
  nlohmann::json j = nlohmann::json::object();
  for (Category c : kAllCategories) {
    j[std::string(category_name(c))] = pct[index_of(c)];
  }
  return j;
}

inline PerCategory<double> category_from_json(const nlohmann::json& j) {
  PerCategory<double> pct{};
  for (const auto& [name, value] : j.items()) {
    const auto c = parse_category(name);
    if (!c) {
      throw Error(ErrorKind::kUnknownCategory,
                  "unknown category '" + name + "' in report");
    }
    pct[index_of(*c)] = value.get<double>();
  }
  return pct;
}

inline nlohmann::json report_json(std::span<const LayerReport> reports) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json j;
    j["layer"] = r.layer;
    j["neurons"] = r.neurons;
    j["tau"] = r.tau;
    j["retained"] = r.retained;
    j["unique_concepts"] = r.unique_concepts;
    j["category_pct"] = category_json(r.category_pct);
    if (r.mean_complexity) j["mean_complexity"] = *r.mean_complexity;
    layers.push_back(std::move(j));
  }
  return {{"layers", layers}};
}

inline nlohmann::json report_json(std::span<const LayerSummary> reports) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json j;
    j["layer"] = r.layer;
    j["tau"] = r.tau;
    j["retained"] = r.retained;
    j["unique_concepts"] = r.unique_concepts;
    j["category_pct"] = category_json(r.category_pct);
    if (r.mean_complexity) j["mean_complexity"] = *r.mean_complexity;
    layers.push_back(std::move(j));
  }
  return {{"layers", layers}};
}

/// Reads either a per-model or an averaged reports JSON.
inline std::vector<LayerSummary> parse_report_summaries(std::string_view text) {
  std::vector<LayerSummary> out;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& layer : j.at("layers")) {
      LayerSummary s;
      s.layer = layer.at("layer").get<std::size_t>();
      s.tau = layer.at("tau").get<double>();
      s.retained = layer.at("retained").get<double>();
      s.unique_concepts = layer.at("unique_concepts").get<double>();
      s.category_pct = category_from_json(layer.at("category_pct"));
      if (layer.contains("mean_complexity")) {
        s.mean_complexity = layer.at("mean_complexity").get<double>();
      }
      out.push_back(s);
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kHeaderParse, std::string("invalid reports JSON: ") + e.what());
  }
  return out;
}

inline std::vector<LayerSummary> read_report_summaries(
    const std::filesystem::path& path) {
  try {
    return parse_report_summaries(read_file(path));
  } catch (Error& e) {
    if (!e.path) e.path = path.string();
    throw;
  }
}

namespace detail {

inline std::string category_header(std::string_view suffix = "") {
  std::string out;
  for (Category c : kAllCategories) {
    out += ',' + csv::escape(std::string(category_name(c)) + std::string(suffix));
  }
  return out;
}

}  // namespace detail

/// One row per layer; percentages at 0.1 precision.
template <typename Report>
std::string format_reports_csv(std::span<const Report> reports) {
  bool with_complexity = false;
  for (const auto& r : reports) with_complexity |= r.mean_complexity.has_value();
  std::string out = "layer,tau,retained,unique_concepts" + detail::category_header();
  if (with_complexity) out += ",mean_complexity";
  out += '\n';
  for (const auto& r : reports) {
    out += std::to_string(r.layer) + ',' + format_double(r.tau) + ',' +
           format_double(static_cast<double>(r.retained)) + ',' +
           format_double(static_cast<double>(r.unique_concepts));
    for (const double v : r.category_pct) out += ',' + format_fixed(v, 1);
    if (with_complexity) {
      out += ',';
      if (r.mean_complexity) out += format_double(*r.mean_complexity);
    }
    out += '\n';
  }
  return out;
}

/// Long format for plotting: layer,category,pct.
template <typename Report>
std::string format_categories_long_csv(std::span<const Report> reports) {
  std::string out = "layer,category,pct\n";
  for (const auto& r : reports) {
    for (Category c : kAllCategories) {
      out += std::to_string(r.layer) + ',' + csv::escape(category_name(c)) + ',' +
             format_fixed(r.category_pct[index_of(c)], 1) + '\n';
    }
  }
  return out;
}

template <typename Report>
std::string format_complexity_csv(std::span<const Report> reports) {
  std::string out = "layer,mean_complexity\n";
  for (const auto& r : reports) {
    if (!r.mean_complexity) continue;
    out += std::to_string(r.layer) + ',' + format_double(*r.mean_complexity) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Comparisons

inline std::string format_comparison_csv(const ModelComparison& cmp) {
  std::string out = "layer_a,layer_b,unique_concepts_delta" + detail::category_header();
  out += '\n';
  for (const auto& d : cmp.layers) {
    out += std::to_string(d.layer_a) + ',' + std::to_string(d.layer_b) + ',' +
           format_double(d.unique_concepts);
    for (const double v : d.category_pct) out += ',' + format_fixed(v, 1);
    out += '\n';
  }
  return out;
}

inline std::string format_comparison_long_csv(const ModelComparison& cmp) {
  std::string out = "layer_a,layer_b,category,delta_pct\n";
  for (const auto& d : cmp.layers) {
    for (Category c : kAllCategories) {
      out += std::to_string(d.layer_a) + ',' + std::to_string(d.layer_b) + ',' +
             csv::escape(category_name(c)) + ',' +
             format_double(d.category_pct[index_of(c)]) + '\n';
    }
  }
  return out;
}

inline nlohmann::json comparison_summary_json(const ModelComparison& cmp) {
  nlohmann::json j;
  j["layers"] = cmp.layers.size();
  if (const auto ext = extreme_shifts(cmp)) {
    auto shift = [](const CategoryShift& s) {
      return nlohmann::json{{"layer_a", s.layer_a},
                            {"layer_b", s.layer_b},
                            {"category", category_name(s.category)},
                            {"delta_pct", s.delta}};
    };
    j["largest_increase"] = shift(ext->first);
    j["largest_decrease"] = shift(ext->second);
  }
  return j;
}

/// CSV with header "layer_a,layer_b".
inline LayerMapping parse_layer_mapping(std::string_view text) {
  const auto rows = csv::parse(text);
  detail::expect_header(rows, "layer_a,layer_b");
  LayerMapping mapping;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (csv::is_blank(row)) continue;
    if (row.fields.size() != 2) {
      throw Error(ErrorKind::kCsvParse,
                  "expected 2 fields on line " + std::to_string(row.line))
          .with_line(row.line);
    }
    mapping.emplace_back(detail::parse_index(row.fields[0], row.line),
                         detail::parse_index(row.fields[1], row.line));
  }
  return mapping;
}

}  // namespace neuron_dissect

#endif  // NEURON_DISSECT_REPORT_IO_HPP
