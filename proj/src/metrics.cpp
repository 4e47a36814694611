#include "wdiff/metrics.hpp"

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <thread>

#include "wdiff/rng.hpp"

namespace wdiff {

using Eigen::Index;

namespace {

// Runs fn(i) for i in [0, n); each index writes only its own slot, so the
// result does not depend on the worker count.
template <typename Fn>
void parallel_for(Index n, int threads, Fn&& fn) {
  if (threads <= 0) threads = metric_threads();
  const Index workers = std::max<Index>(1, std::min<Index>(threads, n));
  if (workers == 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (Index w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (Index i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void require_comparable(const TimeSeriesBatch& a, const TimeSeriesBatch& b, const char* what) {
  if (a.samples() == 0 || b.samples() == 0) throw Error(ErrorCode::EmptyData, std::string(what) + ": empty dataset");
  if (a.length() != b.length() || a.features() != b.features()) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": datasets have shapes " + a.shape_string() + " and " +
                                              b.shape_string());
  }
}

// Content order of samples, so seeded choices do not depend on input order.
bool sample_less(const TimeSeriesBatch& a, Index i, const TimeSeriesBatch& b, Index j) {
  const auto x = a.sample(i).reshaped<Eigen::RowMajor>();
  const auto y = b.sample(j).reshaped<Eigen::RowMajor>();
  return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
}

}  // namespace

int metric_threads() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("WAVELETDIFF_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return n;
}

double mean_dtw_to_reference(const Eigen::Ref<const RowMatrix<double>>& s, const TimeSeriesBatch& reference) {
  if (reference.samples() == 0) throw Error(ErrorCode::EmptyReference, "reference set is empty");
  double total = 0.0;
  for (Index r = 0; r < reference.samples(); ++r) total += dtw(s, reference.sample(r));
  return total / static_cast<double>(reference.samples());
}

Eigen::VectorXd equal_width_edges(double lo, double hi, Index bins) {
  if (bins < 1) throw Error(ErrorCode::BinMismatch, "histogram needs at least one bin");
  if (!(std::isfinite(lo) && std::isfinite(hi)) || hi < lo) throw Error(ErrorCode::BinMismatch, "invalid histogram range");
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  Eigen::VectorXd edges = Eigen::VectorXd::LinSpaced(bins + 1, lo, hi);
  edges[bins] = hi;
  return edges;
}

Histogram make_histogram(const Eigen::VectorXd& values, const Eigen::VectorXd& edges) {
  const Index bins = edges.size() - 1;
  if (bins < 1) throw Error(ErrorCode::BinMismatch, "histogram needs at least one bin");
  for (Index k = 0; k < bins; ++k) {
    if (!(edges[k] < edges[k + 1])) throw Error(ErrorCode::BinMismatch, "histogram edges must increase strictly");
  }
  if (values.size() == 0) throw Error(ErrorCode::EmptyData, "histogram of no values");
  Histogram h{edges, Eigen::VectorXd::Zero(bins)};
  const double lo = edges[0], hi = edges[bins];
  for (const double v : values) {
    if (!(v >= lo && v <= hi)) throw Error(ErrorCode::BinMismatch, "value outside histogram edges");
    const double* it = std::upper_bound(edges.data(), edges.data() + edges.size(), v);
    const Index k = std::min<Index>(bins - 1, static_cast<Index>(it - edges.data()) - 1);
    h.masses[k] += 1.0;
  }
  h.masses /= static_cast<double>(values.size());
  return h;
}

double js_divergence(const Histogram& p, const Histogram& q) {
  if (p.edges.size() != q.edges.size() || p.edges != q.edges) throw Error(ErrorCode::BinMismatch, "js_divergence: bin edges differ");
  if (p.masses.size() != q.masses.size()) throw Error(ErrorCode::BinMismatch, "js_divergence: bin counts differ");
  double kl_p = 0.0, kl_q = 0.0;
  for (Index k = 0; k < p.masses.size(); ++k) {
    const double m = 0.5 * (p.masses[k] + q.masses[k]);
    if (p.masses[k] > 0.0) kl_p += p.masses[k] * std::log(p.masses[k] / m);
    if (q.masses[k] > 0.0) kl_q += q.masses[k] * std::log(q.masses[k] / m);
  }
  return std::clamp(0.5 * (kl_p + kl_q), 0.0, std::log(2.0));
}

DtwJsReport dtw_js_report(const TimeSeriesBatch& real, const TimeSeriesBatch& generated, const DtwJsOptions& opts) {
  require_comparable(real, generated, "dtw_js");
  if (opts.bins < 1 || opts.ref_cap < 1) throw Error(ErrorCode::InvalidConfig, "dtw_js: bins and ref_cap must be positive");
  const Index nr = real.samples(), ng = generated.samples();

  // Union of both sets in content order, then a seeded draw without replacement.
  struct Ref {
    const TimeSeriesBatch* set;
    Index index;
  };
  std::vector<Ref> pool;
  pool.reserve(static_cast<std::size_t>(nr + ng));
  for (Index i = 0; i < nr; ++i) pool.push_back({&real, i});
  for (Index i = 0; i < ng; ++i) pool.push_back({&generated, i});
  std::stable_sort(pool.begin(), pool.end(),
                   [](const Ref& a, const Ref& b) { return sample_less(*a.set, a.index, *b.set, b.index); });
  const Index m = std::min({nr, ng, opts.ref_cap});
  NoiseStream rng(derive_seed(opts.seed, 0x4d));
  for (Index i = 0; i < m; ++i) {
    const Index j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(pool.size()) - i));
    std::swap(pool[i], pool[j]);
  }
  TimeSeriesBatch reference(m, real.length(), real.features());
  DtwJsReport rep;
  rep.reference_size = m;
  for (Index i = 0; i < m; ++i) {
    reference.sample(i) = pool[i].set->sample(pool[i].index);
    if (pool[i].set == &real) ++rep.reference_from_real;
  }
  rep.real.values.resize(nr);
  rep.generated.values.resize(ng);
  parallel_for(nr + ng, opts.threads, [&](Index i) {
    if (i < nr) {
      rep.real.values[i] = mean_dtw_to_reference(real.sample(i), reference);
    } else {
      rep.generated.values[i - nr] = mean_dtw_to_reference(generated.sample(i - nr), reference);
    }
  });

  const double lo = std::min(rep.real.values.minCoeff(), rep.generated.values.minCoeff());
  const double hi = std::max(rep.real.values.maxCoeff(), rep.generated.values.maxCoeff());
  const Eigen::VectorXd edges = equal_width_edges(lo, hi, opts.bins);
  rep.real.histogram = make_histogram(rep.real.values, edges);
  rep.generated.histogram = make_histogram(rep.generated.values, edges);
  rep.value = js_divergence(rep.real.histogram, rep.generated.histogram);
  return rep;
}

double dtw_js(const TimeSeriesBatch& real, const TimeSeriesBatch& generated, const DtwJsOptions& opts) {
  return dtw_js_report(real, generated, opts).value;
}

Eigen::MatrixXd feature_correlation(const TimeSeriesBatch& batch, std::vector<Index>* degenerate) {
  const auto rows = batch.rows();
  const Index d = batch.features();
  if (rows.rows() < 2) throw Error(ErrorCode::EmptyData, "correlation needs at least two rows");
  const Eigen::MatrixXd centered = rows.rowwise() - rows.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered;
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(d, d);
  std::vector<bool> flat(static_cast<std::size_t>(d), false);
  for (Index k = 0; k < d; ++k) {
    flat[k] = !(cov(k, k) > 0.0);
    if (flat[k] && degenerate) degenerate->push_back(k);
  }
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      if (flat[i] || flat[j]) continue;
      rho(i, j) = i == j ? 1.0 : cov(i, j) / std::sqrt(cov(i, i) * cov(j, j));
    }
  }
  return rho;
}

double correlational_score(const TimeSeriesBatch& real, const TimeSeriesBatch& generated,
                           std::vector<std::string>* warnings, const CorrelationOptions& opts) {
  if (real.features() != generated.features()) {
    throw Error(ErrorCode::ShapeMismatch, "correlational_score: feature counts differ");
  }
  std::vector<Index> flat_real, flat_gen;
  const Eigen::MatrixXd a = feature_correlation(real, &flat_real);
  const Eigen::MatrixXd b = feature_correlation(generated, &flat_gen);
  auto report = [&](const std::vector<Index>& flat, const char* which) {
    for (const Index k : flat) {
      const std::string msg = std::string(which) + " feature " + std::to_string(k) + " has zero variance";
      if (opts.strict) throw Error(ErrorCode::DegenerateFeature, msg);
      if (warnings) warnings->push_back(msg + "; its correlations count as 0");
    }
  };
  report(flat_real, "real");
  report(flat_gen, "generated");
  return (a - b).cwiseAbs().sum() / 10.0;
}

Eigen::VectorXd level_energy_profile(const Pyramid& p) {
  Eigen::VectorXd e(static_cast<Index>(p.levels.size()));
  for (std::size_t l = 0; l < p.levels.size(); ++l) {
    e[static_cast<Index>(l)] = p.levels[l].flat().squaredNorm() / static_cast<double>(std::max<Index>(1, p.levels[l].size()));
  }
  return e;
}

RpReport rp_score_report(const NoiseToSample& model_a, const NoiseToSample& model_b, const PyramidShape& shape,
                         Index n_pairs, std::uint64_t seed, int threads) {
  if (n_pairs < 2) throw Error(ErrorCode::InvalidConfig, "rp_score needs at least two pairs");
  PyramidShape s = shape;
  s.samples = n_pairs;
  NoiseStream noise_rng(derive_seed(seed, 0x52));
  const Pyramid noise = normal_pyramid(s, noise_rng);
  const TimeSeriesBatch xa = model_a(noise);
  const TimeSeriesBatch xb = model_b(noise);
  require_comparable(xa, xb, "rp_score");
  if (xa.samples() != n_pairs || xb.samples() != n_pairs) {
    throw Error(ErrorCode::ShapeMismatch, "rp_score: samplers must return one sample per noise draw");
  }

  // Each sample of A is paired with a different, seeded sample of B.
  NoiseStream pick(derive_seed(seed, 0x53));
  std::vector<Index> partner(static_cast<std::size_t>(n_pairs));
  for (Index i = 0; i < n_pairs; ++i) {
    partner[i] = (i + 1 + static_cast<Index>(pick.below(static_cast<std::uint64_t>(n_pairs - 1)))) % n_pairs;
  }

  RpReport rep;
  rep.paired_dtw.resize(n_pairs);
  Eigen::VectorXd random(n_pairs);
  parallel_for(2 * n_pairs, threads, [&](Index k) {
    if (k < n_pairs) {
      rep.paired_dtw[k] = dtw(xa.sample(k), xb.sample(k));
    } else {
      const Index i = k - n_pairs;
      random[i] = dtw(xa.sample(i), xb.sample(partner[i]));
    }
  });
  rep.mean_random_dtw = random.mean();
  rep.score = static_cast<double>((rep.paired_dtw.array() < rep.mean_random_dtw).count()) / static_cast<double>(n_pairs);
  return rep;
}

double rp_score(const NoiseToSample& model_a, const NoiseToSample& model_b, const PyramidShape& shape, Index n_pairs,
                std::uint64_t seed) {
  return rp_score_report(model_a, model_b, shape, n_pairs, seed).score;
}

}  // namespace wdiff
