// Command-line front end: dissect, report, compare, all, average.
//
// Exit codes: 0 ok, 2 input error, 3 shape/compatibility error,
// 4 numeric error. Failures print one JSON line on stderr.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "neuron_dissect/neuron_dissect.hpp"

namespace nd = neuron_dissect;

namespace {

void add_dissect_options(CLI::App& cmd, nd::DissectConfig& cfg) {
  cmd.add_option("--image-embeddings", cfg.image_embeddings,
                 "TensorFile, probe images x embedding dim")
      ->required();
  cmd.add_option("--text-embeddings", cfg.text_embeddings,
                 "TensorFile, concepts x embedding dim")
      ->required();
  cmd.add_option("--concepts", cfg.concepts, "concept list, one word per line")
      ->required();
  cmd.add_option("--manifest", cfg.manifest, "image manifest CSV (id[,complexity])")
      ->required();
  cmd.add_option("--activations", cfg.activations,
                 "TensorFile per layer (neurons x probe images), in layer order")
      ->required();
  cmd.add_option("--top-k", cfg.params.top_k, "size of the top activating set")
      ->capture_default_str();
  cmd.add_option("--lambda", cfg.params.lambda, "weight of the log p(c) term")
      ->capture_default_str();
  cmd.add_option("--membership-hi", cfg.params.membership_hi,
                 "membership probability of the top-ranked image")
      ->capture_default_str();
  cmd.add_option("--membership-lo", cfg.params.membership_lo,
                 "membership probability of the last ranked image")
      ->capture_default_str();
  cmd.add_option("--temperature", cfg.params.temperature,
                 "softmax temperature over concept similarities")
      ->capture_default_str();
}

void add_report_options(CLI::App& cmd, nd::ReportConfig& cfg,
                        std::string& threshold_mode, std::string& complexity_mode,
                        std::string& manifest, bool with_manifest) {
  cmd.add_option("--categories", cfg.categories, "word,category CSV")->required();
  if (with_manifest) {
    cmd.add_option("--manifest", manifest,
                   "image manifest with complexity scores (optional)");
  }
  cmd.add_option("--threshold-mode", threshold_mode, "mean or fixed")
      ->check(CLI::IsMember({"mean", "fixed"}))
      ->capture_default_str();
  cmd.add_option("--fixed-tau", cfg.options.fixed_tau,
                 "cutoff used by --threshold-mode fixed")
      ->capture_default_str();
  cmd.add_option("--complexity-mode", complexity_mode,
                 "average complexity over all labeled or only retained neurons")
      ->check(CLI::IsMember({"all", "retained"}))
      ->capture_default_str();
  cmd.add_option("--top-n", cfg.options.top_n,
                 "top activating images per neuron used for complexity")
      ->capture_default_str();
}

void apply_modes(nd::ReportConfig& cfg, const std::string& threshold_mode,
                 const std::string& complexity_mode) {
  cfg.options.threshold_mode =
      threshold_mode == "fixed" ? nd::ThresholdMode::kFixed : nd::ThresholdMode::kMean;
  cfg.options.complexity_mode = complexity_mode == "retained"
                                    ? nd::ComplexityMode::kRetained
                                    : nd::ComplexityMode::kAllLabeled;
}

int report_error(const nd::Error& e) {
  nlohmann::json j = {{"error", nd::to_string(e.kind())},
                      {"exit", nd::exit_code(e.kind())},
                      {"message", e.what()}};
  if (e.path) j["path"] = *e.path;
  if (e.offset) j["offset"] = *e.offset;
  if (e.line) j["line"] = *e.line;
  if (e.index) j["index"] = *e.index;
  std::cerr << j.dump() << std::endl;
  return nd::exit_code(e.kind());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layer-wise neuron labeling and concept analysis"};
  app.require_subcommand(1);

  nd::DissectConfig dissect;
  nd::ReportConfig report;
  nd::CompareConfig compare;
  std::string threshold_mode = "mean";
  std::string complexity_mode = "all";
  std::string report_manifest;
  std::vector<std::filesystem::path> average_inputs;
  std::filesystem::path out;
  std::string layer_map;

  auto* cmd_dissect = app.add_subcommand("dissect", "label every neuron of every layer");
  add_dissect_options(*cmd_dissect, dissect);
  cmd_dissect->add_option("--out", out, "output directory")->required();

  auto* cmd_report = app.add_subcommand("report", "per-layer reports from labels");
  cmd_report->add_option("--labels", report.labels_dir, "dissect output directory")
      ->required();
  add_report_options(*cmd_report, report, threshold_mode, complexity_mode,
                     report_manifest, true);
  cmd_report->add_option("--out", out, "output directory")->required();

  auto* cmd_all = app.add_subcommand("all", "dissect then report into one directory");
  add_dissect_options(*cmd_all, dissect);
  add_report_options(*cmd_all, report, threshold_mode, complexity_mode,
                     report_manifest, false);
  cmd_all->add_option("--out", out, "output directory")->required();

  auto* cmd_compare = app.add_subcommand(
      "compare", "category deltas B - A; several reports per side are averaged");
  cmd_compare->add_option("--a", compare.reports_a, "reports.json of model A")
      ->required();
  cmd_compare->add_option("--b", compare.reports_b, "reports.json of model B")
      ->required();
  cmd_compare->add_option("--layer-map", layer_map,
                          "CSV layer_a,layer_b aligning models of different depth");
  cmd_compare->add_option("--out", out, "output directory")->required();

  auto* cmd_average = app.add_subcommand("average", "average reports over models");
  cmd_average->add_option("--reports", average_inputs, "reports.json files")
      ->required();
  cmd_average->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const nlohmann::json j = {{"error", "Usage"}, {"exit", 2}, {"message", e.what()}};
    std::cerr << j.dump() << std::endl;
    return 2;
  }

  const std::size_t threads = nd::threads_from_env();
  try {
    if (cmd_dissect->parsed()) {
      nd::cmd_dissect(dissect, out, threads);
    } else if (cmd_report->parsed()) {
      apply_modes(report, threshold_mode, complexity_mode);
      if (!report_manifest.empty()) report.manifest = report_manifest;
      nd::cmd_report(report, out);
    } else if (cmd_all->parsed()) {
      apply_modes(report, threshold_mode, complexity_mode);
      nd::run_all(dissect, report, out, threads);
    } else if (cmd_compare->parsed()) {
      if (!layer_map.empty()) compare.layer_mapping = layer_map;
      const auto cmp = nd::run_compare(compare, out);
      std::cout << nd::comparison_summary_json(cmp).dump(2) << std::endl;
    } else if (cmd_average->parsed()) {
      nd::run_average(average_inputs, out);
    }
  } catch (const nd::Error& e) {
    return report_error(e);
  } catch (const nlohmann::json::exception& e) {
    return report_error(nd::Error(nd::ErrorKind::kHeaderParse, e.what()));
  } catch (const std::exception& e) {
    return report_error(nd::Error(nd::ErrorKind::kIo, e.what()));
  }
  return 0;
}
