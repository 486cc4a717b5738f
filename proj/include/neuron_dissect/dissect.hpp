#ifndef NEURON_DISSECT_DISSECT_HPP
#define NEURON_DISSECT_DISSECT_HPP

// Neuron labeling by soft weighted pointwise mutual information.
//
// For neuron k with activation vector q_k over N probe images and concept c:
//
//   sim(c, q_k) = log E[p(c | B_k)] - lambda * log p(c)
//   log E[p(c | B_k)] = sum_D log(1 + p(D in B_k) * (p(c | D) - 1))
//
// p(c | D) is a temperature softmax over the row of P for image D, p(c) is
// the mean of p(c | D) over all probe images, and p(D in B_k) is a soft
// membership that is nonzero only for the top_k highest-activating images.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "neuron_dissect/errors.hpp"
#include "neuron_dissect/matrix.hpp"
#include "neuron_dissect/parallel.hpp"

namespace neuron_dissect {

/// Lower bound applied to every log argument in the expectation term.
inline constexpr double kLogClamp = 1e-12;

struct SoftWpmiParams {
  std::size_t top_k = 100;
  double lambda = 1.0;
  double membership_hi = 0.998;
  double membership_lo = 0.97;
  double temperature = 0.01;

  void validate() const {
    auto fail = [](const std::string& what) {
      throw Error(ErrorKind::kInvalidParameter, what);
    };
    if (top_k == 0) fail("top_k must be positive");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      fail("lambda must be a finite non-negative number");
    }
    if (!(membership_lo > 0.0 && membership_lo <= 1.0)) {
      fail("membership_lo must lie in (0, 1]");
    }
    if (!(membership_hi > 0.0 && membership_hi <= 1.0)) {
      fail("membership_hi must lie in (0, 1]");
    }
    if (membership_hi < membership_lo) {
      fail("membership_hi must be >= membership_lo");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
      fail("temperature must be a finite positive number");
    }
  }

  void validate(std::size_t num_images) const {
    validate();
    if (top_k > num_images) {
      throw Error(ErrorKind::kTopKTooLarge,
                  "top_k " + std::to_string(top_k) + " exceeds " +
                      std::to_string(num_images) + " probe images");
    }
  }

  nlohmann::json to_json() const {
    return {{"top_k", top_k},
            {"lambda", lambda},
            {"membership_hi", membership_hi},
            {"membership_lo", membership_lo},
            {"temperature", temperature}};
  }

  static SoftWpmiParams from_json(const nlohmann::json& j) {
    SoftWpmiParams p;
    p.top_k = j.at("top_k").get<std::size_t>();
    p.lambda = j.at("lambda").get<double>();
    p.membership_hi = j.at("membership_hi").get<double>();
    p.membership_lo = j.at("membership_lo").get<double>();
    p.temperature = j.at("temperature").get<double>();
    return p;
  }

  friend bool operator==(const SoftWpmiParams&, const SoftWpmiParams&) = default;
};

/// Counts log arguments that hit kLogClamp.
struct NumericStats {
  std::size_t clamped_logs = 0;
};

// ---------------------------------------------------------------------------
// Embeddings and the concept-activation matrix

/// Scales every row to unit L2 norm. Norms are accumulated in double.
template <typename T>
Matrix<T> normalize_rows(const Matrix<T>& m) {
  Matrix<T> out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    double sq = 0.0;
    for (const T v : row) sq += static_cast<double>(v) * static_cast<double>(v);
    if (!(sq > 0.0) || !std::isfinite(sq)) {
      throw Error(ErrorKind::kZeroRow,
                  "row " + std::to_string(r) + " has zero or non-finite norm")
          .with_index(r);
    }
    const double inv = 1.0 / std::sqrt(sq);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      dst[c] = static_cast<T>(static_cast<double>(row[c]) * inv);
    }
  }
  return out;
}

namespace detail {

inline std::vector<double> inverse_norms(const Matrix<float>& m) {
  std::vector<double> inv(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double sq = 0.0;
    for (const float v : m.row(r)) sq += static_cast<double>(v) * v;
    if (!(sq > 0.0) || !std::isfinite(sq)) {
      throw Error(ErrorKind::kZeroRow,
                  "row " + std::to_string(r) + " has zero or non-finite norm")
          .with_index(r);
    }
    inv[r] = 1.0 / std::sqrt(sq);
  }
  return inv;
}

}  // namespace detail

/// P[i][j] = <image_i, text_j> / (|image_i| |text_j|), accumulated in double
/// in ascending dimension order. Rows are computed in parallel; every entry
/// is produced by the same arithmetic regardless of the split.
///
/// `Scalar` selects the storage precision of P (double by default; float
/// halves memory for very large probe sets).
template <typename Scalar = double>
Matrix<Scalar> concept_activation_matrix(const EmbeddingMatrix& image_embs,
                                         const EmbeddingMatrix& text_embs,
                                         std::size_t threads = 0) {
  if (image_embs.cols() != text_embs.cols()) {
    throw Error(ErrorKind::kDimMismatch,
                "image embedding dim " + std::to_string(image_embs.cols()) +
                    " != text embedding dim " +
                    std::to_string(text_embs.cols()));
  }
  const std::vector<double> img_inv = detail::inverse_norms(image_embs);
  const std::vector<double> txt_inv = detail::inverse_norms(text_embs);

  // Unit text vectors in double, reused by every image row.
  const std::size_t dim = text_embs.cols();
  Matrix<double> text_unit(text_embs.rows(), dim);
  for (std::size_t j = 0; j < text_embs.rows(); ++j) {
    for (std::size_t d = 0; d < dim; ++d) {
      text_unit(j, d) = static_cast<double>(text_embs(j, d)) * txt_inv[j];
    }
  }

  Matrix<Scalar> p(image_embs.rows(), text_embs.rows());
  parallel_for(image_embs.rows(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> img(dim);
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t d = 0; d < dim; ++d) {
        img[d] = static_cast<double>(image_embs(i, d)) * img_inv[i];
      }
      for (std::size_t j = 0; j < text_unit.rows(); ++j) {
        const auto t = text_unit.row(j);
        double acc = 0.0;
        for (std::size_t d = 0; d < dim; ++d) acc += img[d] * t[d];
        p(i, j) = static_cast<Scalar>(acc);
      }
    }
  });
  return p;
}

// ---------------------------------------------------------------------------
// Posteriors p(c | D) and marginals p(c)

/// Lazily evaluated softmax posteriors over a concept-activation matrix.
/// Holds per-image log normalizers and per-concept log marginals so that
/// p(c | D) never has to be materialized for the full probe set.
template <typename Scalar = double>
class ConceptPosteriors {
 public:
  ConceptPosteriors(const Matrix<Scalar>& p, double temperature,
                    std::size_t threads = 0)
      : p_(&p), inv_temperature_(1.0 / temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
      throw Error(ErrorKind::kInvalidParameter,
                  "temperature must be a finite positive number");
    }
    if (p.rows() == 0 || p.cols() == 0) {
      throw Error(ErrorKind::kShapeMismatch,
                  "concept-activation matrix must be non-empty");
    }
    compute_normalizers(threads);
    compute_marginals(threads);
  }

  std::size_t num_images() const noexcept { return p_->rows(); }
  std::size_t num_concepts() const noexcept { return p_->cols(); }

  double log_posterior(std::size_t image, std::size_t concept_id) const {
    return static_cast<double>((*p_)(image, concept_id)) * inv_temperature_ -
           log_normalizer_[image];
  }

  double posterior(std::size_t image, std::size_t concept_id) const {
    return std::exp(log_posterior(image, concept_id));
  }

  /// log p(c): log of the mean posterior over all probe images.
  double log_marginal(std::size_t concept_id) const {
    return log_marginal_[concept_id];
  }

 private:
  void compute_normalizers(std::size_t threads) {
    const std::size_t n = p_->rows();
    log_normalizer_.assign(n, 0.0);
    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const auto row = p_->row(i);
        double peak = -std::numeric_limits<double>::infinity();
        for (const Scalar v : row) {
          peak = std::max(peak, static_cast<double>(v) * inv_temperature_);
        }
        double sum = 0.0;
        for (const Scalar v : row) {
          sum += std::exp(static_cast<double>(v) * inv_temperature_ - peak);
        }
        log_normalizer_[i] = peak + std::log(sum);
      }
    });
  }

  // Column-blocked: each worker owns a range of concepts and walks all
  // images in ascending order, so the summation order never changes.
  void compute_marginals(std::size_t threads) {
    const std::size_t n = p_->rows();
    const std::size_t m = p_->cols();
    log_marginal_.assign(m, 0.0);
    parallel_for(m, threads, [&](std::size_t begin, std::size_t end) {
      std::vector<double> peak(end - begin,
                               -std::numeric_limits<double>::infinity());
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = begin; j < end; ++j) {
          peak[j - begin] = std::max(peak[j - begin], log_posterior(i, j));
        }
      }
      std::vector<double> sum(end - begin, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = begin; j < end; ++j) {
          sum[j - begin] += std::exp(log_posterior(i, j) - peak[j - begin]);
        }
      }
      const double log_n = std::log(static_cast<double>(n));
      for (std::size_t j = begin; j < end; ++j) {
        log_marginal_[j] = peak[j - begin] + std::log(sum[j - begin]) - log_n;
      }
    });
  }

  const Matrix<Scalar>* p_;
  double inv_temperature_;
  std::vector<double> log_normalizer_;
  std::vector<double> log_marginal_;
};

/// Materialized N x M matrix of p(c_j | D_i); each row sums to 1.
template <typename Scalar>
Matrix<double> concept_posteriors(const Matrix<Scalar>& p, double temperature,
                                  std::size_t threads = 0) {
  const ConceptPosteriors<Scalar> post(p, temperature, threads);
  Matrix<double> out(p.rows(), p.cols());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (std::size_t j = 0; j < p.cols(); ++j) out(i, j) = post.posterior(i, j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Soft membership p(D in B_k)

struct Membership {
  std::size_t image = 0;
  double probability = 0.0;

  friend bool operator==(const Membership&, const Membership&) = default;
};

/// Indices of the `top_k` highest activations, strictly descending; equal
/// activations are ordered by lower image index first.
inline std::vector<std::size_t> top_activating(std::span<const float> q,
                                               std::size_t top_k) {
  if (top_k > q.size()) {
    throw Error(ErrorKind::kTopKTooLarge,
                "top_k " + std::to_string(top_k) + " exceeds " +
                    std::to_string(q.size()) + " probe images");
  }
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (std::isnan(q[i])) {
      throw Error(ErrorKind::kInvalidParameter,
                  "NaN activation at image " + std::to_string(i))
          .with_index(i);
    }
  }
  std::vector<std::size_t> order(q.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto by_rank = [&q](std::size_t a, std::size_t b) {
    return q[a] > q[b] || (q[a] == q[b] && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top_k),
                    order.end(), by_rank);
  order.resize(top_k);
  return order;
}

/// Membership probability for 0-based rank `r` of `top_k`: linear from
/// `hi` at the first rank to `lo` at the last.
inline double membership_at_rank(std::size_t r, std::size_t top_k, double hi,
                                 double lo) {
  if (top_k <= 1) return hi;
  return hi + (lo - hi) * static_cast<double>(r) /
                  static_cast<double>(top_k - 1);
}

/// Sparse p(D in B_k), ordered by rank. Depends only on the ranking of q.
inline std::vector<Membership> soft_membership(std::span<const float> q,
                                               std::size_t top_k, double hi,
                                               double lo) {
  if (top_k == 0) {
    throw Error(ErrorKind::kInvalidParameter, "top_k must be positive");
  }
  if (!(lo > 0.0 && hi <= 1.0 && hi >= lo)) {
    throw Error(ErrorKind::kInvalidParameter,
                "membership probabilities must satisfy 0 < lo <= hi <= 1");
  }
  const auto order = top_activating(q, top_k);
  std::vector<Membership> out;
  out.reserve(top_k);
  for (std::size_t r = 0; r < order.size(); ++r) {
    out.push_back({order[r], membership_at_rank(r, top_k, hi, lo)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// softWPMI

namespace detail {

inline double clamped_log(double arg, NumericStats& stats) {
  if (std::isnan(arg) || arg < -1e-9) {
    throw Error(ErrorKind::kNumericUnderflow,
                "invalid log argument " + std::to_string(arg));
  }
  if (arg < kLogClamp) {
    ++stats.clamped_logs;
    return std::log(kLogClamp);
  }
  return std::log(arg);
}

inline std::vector<Membership> by_image(std::vector<Membership> members) {
  std::sort(members.begin(), members.end(),
            [](const Membership& a, const Membership& b) { return a.image < b.image; });
  return members;
}

}  // namespace detail

/// log E[p(c | B_k)], summed over member images in ascending image index.
/// `members` must already be sorted by image index.
template <typename Scalar>
double log_expected_posterior(std::size_t concept_id,
                              std::span<const Membership> members,
                              const ConceptPosteriors<Scalar>& post,
                              NumericStats& stats) {
  double acc = 0.0;
  for (const Membership& m : members) {
    const double p = post.posterior(m.image, concept_id);
    acc += detail::clamped_log(1.0 + m.probability * (p - 1.0), stats);
  }
  return acc;
}

template <typename Scalar>
double soft_wpmi(std::size_t concept_id, std::span<const Membership> members,
                 const ConceptPosteriors<Scalar>& post, double lambda,
                 NumericStats& stats) {
  const auto sorted = detail::by_image({members.begin(), members.end()});
  return log_expected_posterior(concept_id, std::span<const Membership>(sorted),
                                post, stats) -
         lambda * post.log_marginal(concept_id);
}

/// Convenience form: scores one (concept, neuron) pair from scratch.
template <typename Scalar>
double soft_wpmi(std::size_t concept_id, std::span<const float> q,
                 const Matrix<Scalar>& p, const SoftWpmiParams& params) {
  params.validate(p.rows());
  if (q.size() != p.rows()) {
    throw Error(ErrorKind::kShapeMismatch,
                "activation vector has " + std::to_string(q.size()) +
                    " entries, P has " + std::to_string(p.rows()) + " rows");
  }
  if (concept_id >= p.cols()) {
    throw Error(ErrorKind::kInvalidParameter, "concept index out of range")
        .with_index(concept_id);
  }
  const ConceptPosteriors<Scalar> post(p, params.temperature, 1);
  const auto members = soft_membership(q, params.top_k, params.membership_hi,
                                       params.membership_lo);
  NumericStats stats;
  return soft_wpmi(concept_id, std::span<const Membership>(members), post,
                   params.lambda, stats);
}

// ---------------------------------------------------------------------------
// Labeling

struct NeuronAssignment {
  std::size_t neuron = 0;
  std::size_t concept_id = 0;
  double score = 0.0;
  /// top_k image indices ranked by activation.
  std::vector<std::size_t> top_images;
};

struct LayerLabeling {
  std::vector<NeuronAssignment> neurons;
  NumericStats stats;
};

/// Scores of every concept for one neuron, in concept order.
template <typename Scalar>
std::vector<double> neuron_scores(std::span<const float> q,
                                  const ConceptPosteriors<Scalar>& post,
                                  const SoftWpmiParams& params,
                                  NumericStats& stats,
                                  std::vector<std::size_t>* top_images = nullptr) {
  const auto ranked = soft_membership(q, params.top_k, params.membership_hi,
                                      params.membership_lo);
  if (top_images != nullptr) {
    top_images->clear();
    for (const auto& m : ranked) top_images->push_back(m.image);
  }
  const auto members = detail::by_image(ranked);
  const std::size_t m_count = post.num_concepts();
  // Image-major walk keeps the posterior row access contiguous while each
  // concept still accumulates in ascending image order.
  std::vector<double> acc(m_count, 0.0);
  for (const Membership& mem : members) {
    for (std::size_t c = 0; c < m_count; ++c) {
      const double p = post.posterior(mem.image, c);
      acc[c] += detail::clamped_log(1.0 + mem.probability * (p - 1.0), stats);
    }
  }
  for (std::size_t c = 0; c < m_count; ++c) {
    acc[c] -= params.lambda * post.log_marginal(c);
  }
  return acc;
}

/// Assigns each neuron (row of `activations`) its highest-scoring concept.
/// Ties go to the lower concept index. Output is independent of `threads`.
template <typename Scalar>
LayerLabeling label_neurons(const ActivationTable& activations,
                            const ConceptPosteriors<Scalar>& post,
                            const SoftWpmiParams& params,
                            std::size_t threads = 0) {
  params.validate(post.num_images());
  if (activations.cols() != post.num_images()) {
    throw Error(ErrorKind::kShapeMismatch,
                "activation table has " + std::to_string(activations.cols()) +
                    " columns, expected " + std::to_string(post.num_images()));
  }
  const std::size_t n_neurons = activations.rows();
  LayerLabeling out;
  out.neurons.resize(n_neurons);
  std::vector<std::size_t> clamps(n_neurons, 0);

  parallel_for(n_neurons, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      NeuronAssignment& a = out.neurons[k];
      a.neuron = k;
      NumericStats stats;
      std::vector<double> scores;
      try {
        scores = neuron_scores(activations.row(k), post, params, stats,
                               &a.top_images);
      } catch (Error& e) {
        Error wrapped(e.kind(),
                      std::string(e.what()) + " (neuron " + std::to_string(k) + ")");
        wrapped.index = k;
        throw wrapped;
      }
      std::size_t best = 0;
      for (std::size_t c = 1; c < scores.size(); ++c) {
        if (scores[c] > scores[best]) best = c;
      }
      if (std::isnan(scores[best])) {
        throw Error(ErrorKind::kNumericUnderflow,
                    "NaN score for neuron " + std::to_string(k))
            .with_index(k);
      }
      a.concept_id = best;
      a.score = scores[best];
      clamps[k] = stats.clamped_logs;
    }
  });
  for (const std::size_t c : clamps) out.stats.clamped_logs += c;
  return out;
}

template <typename Scalar>
LayerLabeling label_neurons(const ActivationTable& activations,
                            const Matrix<Scalar>& p,
                            const SoftWpmiParams& params,
                            std::size_t threads = 0) {
  params.validate(p.rows());
  const ConceptPosteriors<Scalar> post(p, params.temperature, threads);
  return label_neurons(activations, post, params, threads);
}

}  // namespace neuron_dissect

#endif  // NEURON_DISSECT_DISSECT_HPP
