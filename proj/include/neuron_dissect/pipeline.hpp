#ifndef NEURON_DISSECT_PIPELINE_HPP
#define NEURON_DISSECT_PIPELINE_HPP

// End-to-end stages behind the command-line tool. Each stage writes its
// outputs atomically and records the configuration plus SHA-256 hashes of
// every input in run_config.json. Nothing that varies between runs (time,
// thread count, output location) is written, so identical inputs produce
// byte-identical output trees.
//
// Output layout of `dissect` (and of `all`):
//   <out>/params.json
//   <out>/labels/layer_NN.csv
//   <out>/labels/layer_NN_top_images.csv
// `report` adds reports.json, reports.csv, categories_long.csv and, when the
// manifest carries scores, complexity.csv.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "neuron_dissect/analysis.hpp"
#include "neuron_dissect/dissect.hpp"
#include "neuron_dissect/errors.hpp"
#include "neuron_dissect/io_util.hpp"
#include "neuron_dissect/report_io.hpp"
#include "neuron_dissect/tensor_io.hpp"
#include "neuron_dissect/vocab.hpp"

namespace neuron_dissect {

namespace fs = std::filesystem;

inline constexpr std::string_view kFormatVersion = "1";

struct DissectConfig {
  fs::path image_embeddings;
  fs::path text_embeddings;
  fs::path concepts;
  fs::path manifest;
  std::vector<fs::path> activations;  // one per layer, in layer order
  SoftWpmiParams params;
};

struct ReportConfig {
  fs::path labels_dir;
  fs::path categories;
  std::optional<fs::path> manifest;
  ReportOptions options;
};

struct CompareConfig {
  std::vector<fs::path> reports_a;
  std::vector<fs::path> reports_b;
  std::optional<fs::path> layer_mapping;
};

inline std::string_view to_string(ThresholdMode m) {
  return m == ThresholdMode::kMean ? "mean" : "fixed";
}
inline std::string_view to_string(ComplexityMode m) {
  return m == ComplexityMode::kAllLabeled ? "all" : "retained";
}

namespace detail {

inline std::string layer_stem(std::size_t layer) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "layer_%02zu", layer);
  return buf;
}

inline nlohmann::json input_entry(const fs::path& p) {
  return {{"path", p.generic_string()}, {"sha256", sha256_file(p)}};
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

inline void require_file(const fs::path& p) {
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) {
    throw Error(ErrorKind::kIo, "cannot read input file " + p.string())
        .with_path(p.string());
  }
}

}  // namespace detail

inline nlohmann::json to_json(const DissectConfig& c) {
  nlohmann::json acts = nlohmann::json::array();
  for (const auto& p : c.activations) acts.push_back(detail::input_entry(p));
  return {{"image_embeddings", detail::input_entry(c.image_embeddings)},
          {"text_embeddings", detail::input_entry(c.text_embeddings)},
          {"concepts", detail::input_entry(c.concepts)},
          {"manifest", detail::input_entry(c.manifest)},
          {"activations", acts},
          {"soft_wpmi", c.params.to_json()}};
}

inline nlohmann::json to_json(const ReportOptions& o) {
  return {{"threshold_mode", to_string(o.threshold_mode)},
          {"fixed_tau", o.fixed_tau},
          {"complexity_mode", to_string(o.complexity_mode)},
          {"top_n", o.top_n}};
}

inline nlohmann::json to_json(const ReportConfig& c) {
  nlohmann::json j = {{"categories", detail::input_entry(c.categories)},
                      {"options", to_json(c.options)}};
  if (c.manifest) j["manifest"] = detail::input_entry(*c.manifest);
  return j;
}

struct DissectResult {
  std::size_t layers = 0;
  std::size_t clamped_logs = 0;
  nlohmann::json config;
};

/// Labels every layer and writes labels/, params.json.
inline DissectResult run_dissect(const DissectConfig& cfg, const fs::path& out,
                                 std::size_t threads = 0) {
  for (const auto& p : {cfg.image_embeddings, cfg.text_embeddings, cfg.concepts,
                        cfg.manifest}) {
    detail::require_file(p);
  }
  if (cfg.activations.empty()) {
    throw Error(ErrorKind::kInvalidParameter, "no activation tables given");
  }
  for (const auto& p : cfg.activations) detail::require_file(p);

  const auto images = read_tensor(cfg.image_embeddings);
  const auto texts = read_tensor(cfg.text_embeddings);
  const auto concepts = read_concepts(cfg.concepts);
  const auto manifest = read_manifest(cfg.manifest);

  if (images.rows() != manifest.size()) {
    throw Error(ErrorKind::kShapeMismatch,
                "image embeddings have " + std::to_string(images.rows()) +
                    " rows, manifest lists " + std::to_string(manifest.size()) +
                    " images")
        .with_path(cfg.image_embeddings.string());
  }
  if (texts.rows() != concepts.size()) {
    throw Error(ErrorKind::kShapeMismatch,
                "text embeddings have " + std::to_string(texts.rows()) +
                    " rows, concept list has " + std::to_string(concepts.size()) +
                    " words")
        .with_path(cfg.text_embeddings.string());
  }
  cfg.params.validate(manifest.size());
  for (const auto& [m, path] : {std::pair{&images, &cfg.image_embeddings},
                                std::pair{&texts, &cfg.text_embeddings}}) {
    try {
      detail::inverse_norms(*m);
    } catch (Error& e) {
      e.path = path->string();
      throw;
    }
  }
  if (images.cols() != texts.cols()) {
    throw Error(ErrorKind::kDimMismatch,
                "image embedding dim " + std::to_string(images.cols()) +
                    " != text embedding dim " + std::to_string(texts.cols()))
        .with_path(cfg.text_embeddings.string());
  }

  const auto p = concept_activation_matrix<double>(images, texts, threads);
  const ConceptPosteriors<double> post(p, cfg.params.temperature, threads);

  DissectResult result;
  result.config = to_json(cfg);
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t layer = 0; layer < cfg.activations.size(); ++layer) {
    const auto& path = cfg.activations[layer];
    const auto acts = read_tensor(path);
    if (acts.cols() != manifest.size()) {
      throw Error(ErrorKind::kShapeMismatch,
                  "activation table has " + std::to_string(acts.cols()) +
                      " columns, expected " + std::to_string(manifest.size()))
          .with_path(path.string());
    }
    LayerLabeling labeling;
    try {
      labeling = label_neurons(acts, post, cfg.params, threads);
    } catch (Error& e) {
      e.path = path.string();
      throw;
    }
    const auto labels = to_labels(labeling, layer, concepts, manifest);
    const std::string stem = detail::layer_stem(layer);
    const fs::path labels_rel = fs::path("labels") / (stem + ".csv");
    const fs::path tops_rel = fs::path("labels") / (stem + "_top_images.csv");
    write_file_atomic(out / labels_rel, format_labels_csv(labels));
    write_file_atomic(out / tops_rel, format_top_images_csv(labels));
    layers.push_back({{"layer", layer},
                      {"neurons", acts.rows()},
                      {"labels", labels_rel.generic_string()},
                      {"top_images", tops_rel.generic_string()},
                      {"clamped_logs", labeling.stats.clamped_logs}});
    result.clamped_logs += labeling.stats.clamped_logs;
  }
  result.layers = cfg.activations.size();

  nlohmann::json params = {{"format_version", kFormatVersion},
                           {"soft_wpmi", cfg.params.to_json()},
                           {"images", manifest.size()},
                           {"concepts", concepts.size()},
                           {"embedding_dim", images.cols()},
                           {"layers", layers},
                           {"clamped_logs", result.clamped_logs}};
  detail::write_json(out / "params.json", params);
  return result;
}

/// Labels of every layer recorded in a dissect output directory.
inline std::vector<std::vector<NeuronLabel>> read_label_dir(const fs::path& dir) {
  const fs::path params_path = dir / "params.json";
  detail::require_file(params_path);
  nlohmann::json params;
  try {
    params = nlohmann::json::parse(read_file(params_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kHeaderParse, std::string("invalid params.json: ") + e.what())
        .with_path(params_path.string());
  }
  std::vector<std::vector<NeuronLabel>> layers;
  for (const auto& layer : params.at("layers")) {
    const fs::path labels = dir / layer.at("labels").get<std::string>();
    const fs::path tops = dir / layer.at("top_images").get<std::string>();
    detail::require_file(labels);
    detail::require_file(tops);
    try {
      layers.push_back(parse_labels(read_file(labels), read_file(tops)));
    } catch (Error& e) {
      if (!e.path) e.path = labels.string();
      throw;
    }
  }
  return layers;
}

struct ReportResult {
  std::vector<LayerReport> reports;
  nlohmann::json config;
};

inline ReportResult run_report(const ReportConfig& cfg, const fs::path& out) {
  detail::require_file(cfg.categories);
  if (cfg.manifest) detail::require_file(*cfg.manifest);
  const auto categories = read_category_map(cfg.categories);
  std::optional<ImageManifest> manifest;
  if (cfg.manifest) manifest = read_manifest(*cfg.manifest);
  const auto layers = read_label_dir(cfg.labels_dir);

  ReportResult result;
  result.config = to_json(cfg);
  nlohmann::json label_inputs = nlohmann::json::array();
  for (const auto& layer : layers) {
    result.reports.push_back(build_layer_report(
        layer, categories, manifest ? &*manifest : nullptr, cfg.options));
  }
  // Label files are recorded relative to the labels directory, which may
  // itself be the output directory.
  const auto params = nlohmann::json::parse(read_file(cfg.labels_dir / "params.json"));
  for (const auto& layer : params.at("layers")) {
    for (const char* key : {"labels", "top_images"}) {
      const std::string rel = layer.at(key).get<std::string>();
      label_inputs.push_back(
          {{"path", rel}, {"sha256", sha256_file(cfg.labels_dir / rel)}});
    }
  }
  result.config["label_files"] = label_inputs;

  const std::span<const LayerReport> reports(result.reports);
  nlohmann::json report = report_json(reports);
  report["format_version"] = kFormatVersion;
  report["options"] = to_json(cfg.options);
  detail::write_json(out / "reports.json", report);
  write_file_atomic(out / "reports.csv", format_reports_csv(reports));
  write_file_atomic(out / "categories_long.csv",
                    format_categories_long_csv(reports));
  bool any_complexity = false;
  for (const auto& r : result.reports) any_complexity |= r.mean_complexity.has_value();
  if (any_complexity) {
    write_file_atomic(out / "complexity.csv", format_complexity_csv(reports));
  }
  return result;
}

inline void write_run_config(const fs::path& out, std::string_view command,
                             nlohmann::json body) {
  body["command"] = command;
  body["format_version"] = kFormatVersion;
  detail::write_json(out / "run_config.json", body);
}

inline DissectResult cmd_dissect(const DissectConfig& cfg, const fs::path& out,
                                 std::size_t threads = 0) {
  auto result = run_dissect(cfg, out, threads);
  write_run_config(out, "dissect", result.config);
  return result;
}

inline ReportResult cmd_report(const ReportConfig& cfg, const fs::path& out) {
  auto result = run_report(cfg, out);
  write_run_config(out, "report", result.config);
  return result;
}

/// Loads one reports JSON, or averages several.
inline std::vector<LayerSummary> load_reports(const std::vector<fs::path>& paths) {
  if (paths.empty()) {
    throw Error(ErrorKind::kInvalidParameter, "no reports given");
  }
  std::vector<std::vector<LayerSummary>> models;
  for (const auto& p : paths) {
    detail::require_file(p);
    models.push_back(read_report_summaries(p));
  }
  if (models.size() == 1) return models.front();
  try {
    return average_reports(models);
  } catch (Error& e) {
    e.path = paths.front().string();
    throw;
  }
}

inline ModelComparison run_compare(const CompareConfig& cfg, const fs::path& out) {
  const auto a = load_reports(cfg.reports_a);
  const auto b = load_reports(cfg.reports_b);
  std::optional<LayerMapping> mapping;
  if (cfg.layer_mapping) {
    detail::require_file(*cfg.layer_mapping);
    try {
      mapping = parse_layer_mapping(read_file(*cfg.layer_mapping));
    } catch (Error& e) {
      e.path = cfg.layer_mapping->string();
      throw;
    }
  }
  const auto cmp = compare_models(a, b, mapping);
  write_file_atomic(out / "comparison.csv", format_comparison_csv(cmp));
  write_file_atomic(out / "comparison_long.csv", format_comparison_long_csv(cmp));
  detail::write_json(out / "comparison_summary.json", comparison_summary_json(cmp));

  nlohmann::json in_a = nlohmann::json::array();
  nlohmann::json in_b = nlohmann::json::array();
  for (const auto& p : cfg.reports_a) in_a.push_back(detail::input_entry(p));
  for (const auto& p : cfg.reports_b) in_b.push_back(detail::input_entry(p));
  nlohmann::json body = {{"reports_a", in_a}, {"reports_b", in_b}};
  if (cfg.layer_mapping) body["layer_mapping"] = detail::input_entry(*cfg.layer_mapping);
  write_run_config(out, "compare", body);
  return cmp;
}

inline std::vector<LayerSummary> run_average(const std::vector<fs::path>& inputs,
                                             const fs::path& out) {
  const auto avg = load_reports(inputs);
  const std::span<const LayerSummary> view(avg);
  nlohmann::json report = report_json(view);
  report["format_version"] = kFormatVersion;
  report["averaged_over"] = inputs.size();
  detail::write_json(out / "reports.json", report);
  write_file_atomic(out / "reports.csv", format_reports_csv(view));
  write_file_atomic(out / "categories_long.csv", format_categories_long_csv(view));
  bool any_complexity = false;
  for (const auto& r : avg) any_complexity |= r.mean_complexity.has_value();
  if (any_complexity) write_file_atomic(out / "complexity.csv", format_complexity_csv(view));
  nlohmann::json in = nlohmann::json::array();
  for (const auto& p : inputs) in.push_back(detail::input_entry(p));
  write_run_config(out, "average", {{"reports", in}});
  return avg;
}

/// dissect followed by report on the same output directory.
inline ReportResult run_all(const DissectConfig& dissect, ReportConfig report,
                            const fs::path& out, std::size_t threads = 0) {
  const auto d = run_dissect(dissect, out, threads);
  report.labels_dir = out;
  if (!report.manifest) report.manifest = dissect.manifest;
  auto r = run_report(report, out);
  write_run_config(out, "all", {{"dissect", d.config}, {"report", r.config}});
  return r;
}

}  // namespace neuron_dissect

#endif  // NEURON_DISSECT_PIPELINE_HPP
