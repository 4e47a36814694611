#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wdiff/array3.hpp"
#include "wdiff/diffusion.hpp"
#include "wdiff/error.hpp"

namespace wdiff {

// Rows are time steps, columns features. Local cost is the L1 distance
// between feature vectors; steps are (1,0), (0,1) and (1,1).
template <typename DA, typename DB>
typename DA::Scalar dtw(const Eigen::MatrixBase<DA>& x, const Eigen::MatrixBase<DB>& y) {
  using Scalar = typename DA::Scalar;
  const Eigen::Index n = x.rows(), m = y.rows();
  if (n == 0 || m == 0) throw Error(ErrorCode::EmptySequence, "dtw: empty sequence");
  if (x.cols() != y.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "dtw: feature widths " + std::to_string(x.cols()) + " and " +
                                              std::to_string(y.cols()));
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> prev(m), cur(m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const Scalar c = (x.row(i) - y.row(j)).cwiseAbs().sum();
      if (i == 0 && j == 0) {
        cur[j] = c;
      } else if (i == 0) {
        cur[j] = c + cur[j - 1];
      } else if (j == 0) {
        cur[j] = c + prev[j];
      } else {
        cur[j] = c + std::min({prev[j], cur[j - 1], prev[j - 1]});
      }
    }
    prev.swap(cur);
  }
  return prev[m - 1];
}

// Mean DTW from `s` to every sample of `reference`.
double mean_dtw_to_reference(const Eigen::Ref<const RowMatrix<double>>& s, const TimeSeriesBatch& reference);

struct Histogram {
  Eigen::VectorXd edges;   // bins + 1, strictly increasing
  Eigen::VectorXd masses;  // sums to 1

  Eigen::Index bins() const { return masses.size(); }
};

// Equal-width edges over [lo, hi]; a degenerate range is widened by 0.5 on
// each side.
Eigen::VectorXd equal_width_edges(double lo, double hi, Eigen::Index bins);
// The last bin is closed on the right; values outside the edges are an error.
Histogram make_histogram(const Eigen::VectorXd& values, const Eigen::VectorXd& edges);

// Natural-log Jensen-Shannon divergence, in [0, ln 2].
double js_divergence(const Histogram& p, const Histogram& q);

struct DistanceDistribution {
  Eigen::VectorXd values;
  Histogram histogram;
};

struct DtwJsOptions {
  Eigen::Index bins = 50;
  Eigen::Index ref_cap = 200;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: metric_threads()
};

struct DtwJsReport {
  double value = 0.0;
  Eigen::Index reference_size = 0;
  Eigen::Index reference_from_real = 0;  // how many references were drawn from the real set
  DistanceDistribution real;
  DistanceDistribution generated;
};

DtwJsReport dtw_js_report(const TimeSeriesBatch& real, const TimeSeriesBatch& generated, const DtwJsOptions& opts = {});
double dtw_js(const TimeSeriesBatch& real, const TimeSeriesBatch& generated, const DtwJsOptions& opts = {});

// Pearson correlation between features, pooling every (sample, time) row.
// Entries involving a zero-variance feature are 0 and the feature index is
// appended to `degenerate`.
Eigen::MatrixXd feature_correlation(const TimeSeriesBatch& batch, std::vector<Eigen::Index>* degenerate = nullptr);

struct CorrelationOptions {
  bool strict = false;  // throw DegenerateFeature instead of warning
};

// (1/10) sum_{i,j} |rho_real - rho_gen|. Warnings about constant features are
// appended to `warnings` when given.
double correlational_score(const TimeSeriesBatch& real, const TimeSeriesBatch& generated,
                           std::vector<std::string>* warnings = nullptr, const CorrelationOptions& opts = {});

// Mean squared coefficient per level, approximation last.
Eigen::VectorXd level_energy_profile(const Pyramid& p);

// Maps a batch of initial noise pyramids to time-domain samples.
using NoiseToSample = std::function<TimeSeriesBatch(const Pyramid& noise)>;

struct RpReport {
  double score = 0.0;
  double mean_random_dtw = 0.0;
  Eigen::VectorXd paired_dtw;
};

// Fraction of same-noise pairs whose DTW is below the mean DTW of randomly
// mismatched cross-model pairs.
RpReport rp_score_report(const NoiseToSample& model_a, const NoiseToSample& model_b, const PyramidShape& shape,
                         Eigen::Index n_pairs, std::uint64_t seed, int threads = 0);
double rp_score(const NoiseToSample& model_a, const NoiseToSample& model_b, const PyramidShape& shape,
                Eigen::Index n_pairs, std::uint64_t seed);

// Worker count for metric loops: hardware concurrency capped by the
// WAVELETDIFF_THREADS environment variable.
int metric_threads();

}  // namespace wdiff
