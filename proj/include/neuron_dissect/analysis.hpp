#ifndef NEURON_DISSECT_ANALYSIS_HPP
#define NEURON_DISSECT_ANALYSIS_HPP

// Per-layer aggregation of neuron labels: mean thresholding, concept
// counting, category distributions, image complexity, and comparisons
// between models.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "neuron_dissect/errors.hpp"
#include "neuron_dissect/vocab.hpp"

namespace neuron_dissect {

/// Interpretability cutoff suggested by a user study of the original
/// labeling method. Used only by the fixed threshold mode.
inline constexpr double kReferenceCutoff = 0.16;

struct NeuronLabel {
  std::size_t layer = 0;
  std::size_t neuron = 0;
  std::string word;
  double score = 0.0;
  /// Probe image ids, highest activation first.
  std::vector<std::string> top_images;

  friend bool operator==(const NeuronLabel&, const NeuronLabel&) = default;
};

struct LayerThreshold {
  std::size_t layer = 0;
  double tau = 0.0;
  std::size_t retained = 0;
};

struct ThresholdResult {
  LayerThreshold threshold;
  std::vector<NeuronLabel> retained;
};

enum class ThresholdMode { kMean, kFixed };
enum class ComplexityMode { kAllLabeled, kRetained };

namespace detail {

// Scores within a few ulps of tau count as >= tau, so that a layer of equal
// scores is retained whole even when the computed mean rounds above them.
inline bool at_or_above(double score, double tau, double scale) {
  const double slack = 8.0 * std::numeric_limits<double>::epsilon() * scale;
  return score >= tau - slack;
}

inline double max_abs(std::span<const NeuronLabel> labels, double tau) {
  double m = std::abs(tau);
  for (const auto& l : labels) m = std::max(m, std::abs(l.score));
  return m;
}

}  // namespace detail

/// Keeps labels whose score is at least `tau` (inclusive).
inline ThresholdResult threshold_at(std::span<const NeuronLabel> labels,
                                    double tau) {
  ThresholdResult out;
  out.threshold.layer = labels.empty() ? 0 : labels.front().layer;
  out.threshold.tau = tau;
  const double scale = detail::max_abs(labels, tau);
  for (const auto& l : labels) {
    if (detail::at_or_above(l.score, tau, scale)) out.retained.push_back(l);
  }
  out.threshold.retained = out.retained.size();
  return out;
}

/// tau = arithmetic mean of the layer's scores; keeps score >= tau.
inline ThresholdResult mean_threshold(std::span<const NeuronLabel> labels) {
  if (labels.empty()) {
    throw Error(ErrorKind::kEmptyLayer, "layer has no labels");
  }
  long double sum = 0.0L;
  for (const auto& l : labels) sum += l.score;
  const double tau =
      static_cast<double>(sum / static_cast<long double>(labels.size()));
  return threshold_at(labels, tau);
}

inline std::size_t unique_concepts(std::span<const NeuronLabel> retained) {
  std::set<std::string> words;
  for (const auto& l : retained) words.insert(normalize_word(l.word));
  return words.size();
}

/// Percentage of retained neurons per category. Every neuron counts once,
/// so ten neurons labeled "blue" are ten Colors neurons. All zeros when
/// nothing is retained.
inline PerCategory<double> category_distribution(
    std::span<const NeuronLabel> retained, const CategoryMap& map) {
  PerCategory<std::size_t> counts{};
  for (const auto& l : retained) ++counts[index_of(map.lookup(l.word))];
  PerCategory<double> pct{};
  if (retained.empty()) return pct;
  const double total = static_cast<double>(retained.size());
  for (std::size_t c = 0; c < kCategoryCount; ++c) {
    pct[c] = 100.0 * static_cast<double>(counts[c]) / total;
  }
  return pct;
}

/// Mean complexity of each neuron's first `top_n` images, averaged over
/// the given neurons.
inline double layer_complexity(std::span<const NeuronLabel> labels,
                               const ImageManifest& manifest,
                               std::size_t top_n = 5) {
  if (labels.empty()) {
    throw Error(ErrorKind::kEmptyLayer, "no neurons to average complexity over");
  }
  if (top_n == 0) {
    throw Error(ErrorKind::kInvalidParameter, "top_n must be positive");
  }
  double layer_sum = 0.0;
  for (const auto& l : labels) {
    const std::size_t n = std::min(top_n, l.top_images.size());
    if (n == 0) {
      throw Error(ErrorKind::kMissingComplexity,
                  "neuron " + std::to_string(l.neuron) + " of layer " +
                      std::to_string(l.layer) + " has no top images")
          .with_index(l.neuron);
    }
    double neuron_sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const auto& id = l.top_images[r];
      const auto score = manifest.complexity(id);
      if (!score) {
        throw Error(ErrorKind::kMissingComplexity,
                    "no complexity score for image '" + id + "'");
      }
      neuron_sum += *score;
    }
    layer_sum += neuron_sum / static_cast<double>(n);
  }
  return std::clamp(layer_sum / static_cast<double>(labels.size()), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Reports

struct LayerReport {
  std::size_t layer = 0;
  std::size_t neurons = 0;
  double tau = 0.0;
  std::size_t retained = 0;
  std::size_t unique_concepts = 0;
  PerCategory<double> category_pct{};
  std::optional<double> mean_complexity;
};

struct ReportOptions {
  ThresholdMode threshold_mode = ThresholdMode::kMean;
  double fixed_tau = kReferenceCutoff;
  ComplexityMode complexity_mode = ComplexityMode::kAllLabeled;
  std::size_t top_n = 5;
};

/// Builds the report for one layer. Complexity is computed only when
/// `manifest` is given and carries scores.
inline LayerReport build_layer_report(std::span<const NeuronLabel> labels,
                                      const CategoryMap& map,
                                      const ImageManifest* manifest,
                                      const ReportOptions& options = {}) {
  if (labels.empty()) {
    throw Error(ErrorKind::kEmptyLayer, "layer has no labels");
  }
  const ThresholdResult th = options.threshold_mode == ThresholdMode::kMean
                                 ? mean_threshold(labels)
                                 : threshold_at(labels, options.fixed_tau);
  LayerReport r;
  r.layer = labels.front().layer;
  r.neurons = labels.size();
  r.tau = th.threshold.tau;
  r.retained = th.threshold.retained;
  r.unique_concepts = unique_concepts(th.retained);
  r.category_pct = category_distribution(th.retained, map);
  if (manifest != nullptr && manifest->has_any_complexity()) {
    if (options.complexity_mode == ComplexityMode::kAllLabeled) {
      r.mean_complexity = layer_complexity(labels, *manifest, options.top_n);
    } else if (!th.retained.empty()) {
      r.mean_complexity = layer_complexity(th.retained, *manifest, options.top_n);
    }
  }
  return r;
}

/// Real-valued view of a report; the result type of averaging.
struct LayerSummary {
  std::size_t layer = 0;
  double tau = 0.0;
  double retained = 0.0;
  double unique_concepts = 0.0;
  PerCategory<double> category_pct{};
  std::optional<double> mean_complexity;
};

inline LayerSummary summarize(const LayerReport& r) {
  return {r.layer,
          r.tau,
          static_cast<double>(r.retained),
          static_cast<double>(r.unique_concepts),
          r.category_pct,
          r.mean_complexity};
}

inline std::vector<LayerSummary> summarize(std::span<const LayerReport> rs) {
  std::vector<LayerSummary> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.push_back(summarize(r));
  return out;
}

/// Elementwise mean over models. Complexity is averaged only when every
/// model has it for that layer.
inline std::vector<LayerSummary> average_reports(
    std::span<const std::vector<LayerSummary>> models) {
  if (models.empty()) {
    throw Error(ErrorKind::kInvalidParameter, "no reports to average");
  }
  const std::size_t layers = models.front().size();
  for (const auto& m : models) {
    if (m.size() != layers) {
      throw Error(ErrorKind::kLayerCountMismatch,
                  "cannot average reports with " + std::to_string(layers) +
                      " and " + std::to_string(m.size()) + " layers");
    }
  }
  const double count = static_cast<double>(models.size());
  std::vector<LayerSummary> out(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    LayerSummary& s = out[l];
    s.layer = models.front()[l].layer;
    bool all_complexity = true;
    double complexity = 0.0;
    for (const auto& m : models) {
      const LayerSummary& x = m[l];
      s.tau += x.tau;
      s.retained += x.retained;
      s.unique_concepts += x.unique_concepts;
      for (std::size_t c = 0; c < kCategoryCount; ++c) {
        s.category_pct[c] += x.category_pct[c];
      }
      if (x.mean_complexity) {
        complexity += *x.mean_complexity;
      } else {
        all_complexity = false;
      }
    }
    s.tau /= count;
    s.retained /= count;
    s.unique_concepts /= count;
    for (auto& v : s.category_pct) v /= count;
    if (all_complexity) s.mean_complexity = complexity / count;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model comparison

struct LayerDelta {
  std::size_t layer_a = 0;
  std::size_t layer_b = 0;
  /// B - A, percentage points.
  PerCategory<double> category_pct{};
  double unique_concepts = 0.0;
};

struct ModelComparison {
  std::vector<LayerDelta> layers;
};

/// Pairs of (layer index in A, layer index in B).
using LayerMapping = std::vector<std::pair<std::size_t, std::size_t>>;

inline ModelComparison compare_models(std::span<const LayerSummary> a,
                                      std::span<const LayerSummary> b,
                                      const std::optional<LayerMapping>& mapping = {}) {
  LayerMapping pairs;
  if (mapping) {
    pairs = *mapping;
    for (const auto& [ia, ib] : pairs) {
      if (ia >= a.size() || ib >= b.size()) {
        throw Error(ErrorKind::kLayerCountMismatch,
                    "layer mapping entry (" + std::to_string(ia) + ", " +
                        std::to_string(ib) + ") out of range");
      }
    }
  } else {
    if (a.size() != b.size()) {
      throw Error(ErrorKind::kLayerCountMismatch,
                  "model A has " + std::to_string(a.size()) +
                      " layers, model B has " + std::to_string(b.size()) +
                      "; supply a layer mapping");
    }
    for (std::size_t l = 0; l < a.size(); ++l) pairs.emplace_back(l, l);
  }
  ModelComparison out;
  for (const auto& [ia, ib] : pairs) {
    LayerDelta d;
    d.layer_a = a[ia].layer;
    d.layer_b = b[ib].layer;
    for (std::size_t c = 0; c < kCategoryCount; ++c) {
      d.category_pct[c] = b[ib].category_pct[c] - a[ia].category_pct[c];
    }
    d.unique_concepts = b[ib].unique_concepts - a[ia].unique_concepts;
    out.layers.push_back(d);
  }
  return out;
}

struct CategoryShift {
  std::size_t layer_a = 0;
  std::size_t layer_b = 0;
  Category category = Category::kUnmapped;
  double delta = 0.0;
};

/// Largest positive and most negative category deltas (first occurrence
/// wins on ties). Empty when the comparison has no layers.
inline std::optional<std::pair<CategoryShift, CategoryShift>> extreme_shifts(
    const ModelComparison& cmp) {
  if (cmp.layers.empty()) return std::nullopt;
  CategoryShift hi{cmp.layers[0].layer_a, cmp.layers[0].layer_b,
                   kAllCategories[0], cmp.layers[0].category_pct[0]};
  CategoryShift lo = hi;
  for (const auto& d : cmp.layers) {
    for (std::size_t c = 0; c < kCategoryCount; ++c) {
      const double v = d.category_pct[c];
      if (v > hi.delta) hi = {d.layer_a, d.layer_b, kAllCategories[c], v};
      if (v < lo.delta) lo = {d.layer_a, d.layer_b, kAllCategories[c], v};
    }
  }
  return std::make_pair(hi, lo);
}

}  // namespace neuron_dissect

#endif  // NEURON_DISSECT_ANALYSIS_HPP
