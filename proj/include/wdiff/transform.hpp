#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <string>
#include <vector>

#include "wdiff/array3.hpp"
#include "wdiff/error.hpp"
#include "wdiff/filterbank.hpp"

namespace wdiff {

enum class BoundaryMode { symmetric, periodized };

BoundaryMode parse_boundary_mode(const std::string& s);
std::string to_string(BoundaryMode mode);

// Length of the next coarser level: floor((n + F - 1) / 2) with symmetric
// extension, ceil(n / 2) when periodized.
Eigen::Index coeff_len(Eigen::Index prev_len, Eigen::Index filter_len, BoundaryMode mode);

// max(3, min(7, floor(log2(T / (F - 1))))), then lowered until the coarsest
// symmetric-mode level keeps at least two coefficients.
int level_count(Eigen::Index T, Eigen::Index filter_len);

std::vector<Eigen::Index> level_lengths(Eigen::Index T, Eigen::Index filter_len, int levels, BoundaryMode mode);

// Detail levels C^(1..L) followed by the approximation A^(L), which sits at
// index L so downstream code can treat it as level L+1.
template <typename Scalar>
struct WaveletPyramid {
  std::vector<Array3<Scalar>> levels;
  std::vector<Eigen::Index> level_lengths;  // d_1..d_L
  Eigen::Index source_length = 0;
  BoundaryMode mode = BoundaryMode::symmetric;

  int depth() const { return static_cast<int>(level_lengths.size()); }
  std::size_t level_count() const { return levels.size(); }
  Array3<Scalar>& approx() { return levels.back(); }
  const Array3<Scalar>& approx() const { return levels.back(); }
  Eigen::Index samples() const { return levels.empty() ? 0 : levels.front().samples(); }
  Eigen::Index features() const { return levels.empty() ? 0 : levels.front().features(); }
};

using Pyramid = WaveletPyramid<double>;

template <typename Scalar>
bool same_structure(const WaveletPyramid<Scalar>& a, const WaveletPyramid<Scalar>& b) {
  if (a.levels.size() != b.levels.size()) return false;
  for (std::size_t l = 0; l < a.levels.size(); ++l) {
    if (!a.levels[l].same_shape(b.levels[l])) return false;
  }
  return true;
}

template <typename Scalar>
void require_same_structure(const WaveletPyramid<Scalar>& a, const WaveletPyramid<Scalar>& b, const char* what) {
  if (!same_structure(a, b)) throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": pyramid structures differ");
}

// Zero pyramid with the structure of `like`.
template <typename Scalar>
WaveletPyramid<Scalar> zeros_like(const WaveletPyramid<Scalar>& like) {
  WaveletPyramid<Scalar> out = like;
  for (auto& level : out.levels) level.flat().setZero();
  return out;
}

namespace detail {

// Half-sample symmetric reflection of an arbitrary index into [0, n).
inline Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n) {
  const Eigen::Index period = 2 * n;
  Eigen::Index r = i % period;
  if (r < 0) r += period;
  return r < n ? r : period - 1 - r;
}

inline Eigen::Index wrap_index(Eigen::Index i, Eigen::Index n) {
  Eigen::Index r = i % n;
  return r < 0 ? r + n : r;
}

// One analysis stage, correlating with the analysis filters:
// a_m = sum_k h_k x_{2m+2-F+k}, c_m = sum_k g_k x_{2m+2-F+k}.
template <typename Scalar>
void analysis_step(const VectorX<Scalar>& x, const FilterBank& fb, BoundaryMode mode, VectorX<Scalar>& approx,
                   VectorX<Scalar>& detail) {
  const Eigen::Index n = x.size();
  const Eigen::Index f = fb.length();
  const Eigen::Index out_len = coeff_len(n, f, mode);
  approx.setZero(out_len);
  detail.setZero(out_len);
  // Odd lengths are padded with a copy of the last sample when periodized.
  const Eigen::Index padded = 2 * out_len;
  for (Eigen::Index m = 0; m < out_len; ++m) {
    Scalar a = 0, c = 0;
    for (Eigen::Index k = 0; k < f; ++k) {
      const Eigen::Index i = 2 * m + 2 - f + k;
      Eigen::Index idx;
      if (mode == BoundaryMode::symmetric) {
        idx = reflect_index(i, n);
      } else {
        idx = std::min(wrap_index(i, padded), n - 1);
      }
      a += static_cast<Scalar>(fb.h[k]) * x[idx];
      c += static_cast<Scalar>(fb.g[k]) * x[idx];
    }
    approx[m] = a;
    detail[m] = c;
  }
}

// One synthesis stage producing `parent_len` samples:
// x_n = sum_m h~_{2m+1-n} a_m + g~_{2m+1-n} c_m.
template <typename Scalar>
void synthesis_step(const VectorX<Scalar>& approx, const VectorX<Scalar>& detail, const FilterBank& fb,
                    BoundaryMode mode, Eigen::Index parent_len, VectorX<Scalar>& x) {
  const Eigen::Index f = fb.length();
  const Eigen::Index d = approx.size();
  x.setZero(parent_len);
  if (mode == BoundaryMode::symmetric) {
    for (Eigen::Index n = 0; n < parent_len; ++n) {
      Scalar s = 0;
      const Eigen::Index m_hi = std::min<Eigen::Index>(d - 1, (n + f - 2) / 2);
      for (Eigen::Index m = n / 2; m <= m_hi; ++m) {
        const Eigen::Index j = 2 * m + 1 - n;
        if (j < 0 || j >= f) continue;
        s += static_cast<Scalar>(fb.h_syn[j]) * approx[m] + static_cast<Scalar>(fb.g_syn[j]) * detail[m];
      }
      x[n] = s;
    }
  } else {
    const Eigen::Index padded = 2 * d;
    for (Eigen::Index n = 0; n < parent_len; ++n) {
      Scalar s = 0;
      for (Eigen::Index j = (n + 1) % 2; j < f; j += 2) {
        const Eigen::Index m = wrap_index(n + j - 1, padded) / 2;
        s += static_cast<Scalar>(fb.h_syn[j]) * approx[m] + static_cast<Scalar>(fb.g_syn[j]) * detail[m];
      }
      x[n] = s;
    }
  }
}

}  // namespace detail

template <typename Scalar>
WaveletPyramid<Scalar> dwt(const Array3<Scalar>& batch, const FilterBank& fb, int levels, BoundaryMode mode) {
  if (levels < 1) throw Error(ErrorCode::TooManyLevels, "at least one level is required");
  if (!batch.all_finite()) throw Error(ErrorCode::ShapeMismatch, "dwt: non-finite input");
  const auto lengths = level_lengths(batch.length(), fb.length(), levels, mode);
  for (std::size_t l = 0; l < lengths.size(); ++l) {
    if (lengths[l] < 2) {
      throw Error(ErrorCode::TooManyLevels, "level " + std::to_string(l + 1) + " would have " +
                                                std::to_string(lengths[l]) + " coefficients");
    }
  }

  const Eigen::Index n_samples = batch.samples();
  const Eigen::Index n_features = batch.features();
  WaveletPyramid<Scalar> pyr;
  pyr.level_lengths = lengths;
  pyr.source_length = batch.length();
  pyr.mode = mode;
  for (const auto len : lengths) pyr.levels.emplace_back(n_samples, len, n_features);
  pyr.levels.emplace_back(n_samples, lengths.back(), n_features);

  VectorX<Scalar> current, lo, hi;
  for (Eigen::Index n = 0; n < n_samples; ++n) {
    for (Eigen::Index d = 0; d < n_features; ++d) {
      current = batch.series(n, d);
      for (int l = 0; l < levels; ++l) {
        detail::analysis_step(current, fb, mode, lo, hi);
        pyr.levels[l].series(n, d) = hi;
        current.swap(lo);
      }
      pyr.levels[levels].series(n, d) = current;
    }
  }
  return pyr;
}

template <typename Scalar>
void validate_pyramid(const WaveletPyramid<Scalar>& pyr, Eigen::Index filter_len) {
  const int depth = pyr.depth();
  if (depth < 1 || pyr.levels.size() != static_cast<std::size_t>(depth) + 1) {
    throw Error(ErrorCode::ShapeMismatch, "pyramid must hold L detail levels plus one approximation");
  }
  const auto expected = level_lengths(pyr.source_length, filter_len, depth, pyr.mode);
  if (expected != pyr.level_lengths) {
    throw Error(ErrorCode::ShapeMismatch, "level lengths inconsistent with source length " +
                                              std::to_string(pyr.source_length));
  }
  const auto& first = pyr.levels.front();
  for (int l = 0; l <= depth; ++l) {
    const auto& lv = pyr.levels[l];
    const Eigen::Index want = pyr.level_lengths[std::min(l, depth - 1)];
    if (lv.length() != want || lv.samples() != first.samples() || lv.features() != first.features()) {
      throw Error(ErrorCode::ShapeMismatch, "level " + std::to_string(l + 1) + " has shape " + lv.shape_string());
    }
  }
}

template <typename Scalar>
Array3<Scalar> idwt(const WaveletPyramid<Scalar>& pyr, const FilterBank& fb) {
  validate_pyramid(pyr, fb.length());
  const int depth = pyr.depth();
  const Eigen::Index n_samples = pyr.samples();
  const Eigen::Index n_features = pyr.features();
  Array3<Scalar> out(n_samples, pyr.source_length, n_features);

  VectorX<Scalar> current, parent, det;
  for (Eigen::Index n = 0; n < n_samples; ++n) {
    for (Eigen::Index d = 0; d < n_features; ++d) {
      current = pyr.levels[depth].series(n, d);
      for (int l = depth - 1; l >= 0; --l) {
        const Eigen::Index parent_len = l == 0 ? pyr.source_length : pyr.level_lengths[l - 1];
        det = pyr.levels[l].series(n, d);
        detail::synthesis_step(current, det, fb, pyr.mode, parent_len, parent);
        current.swap(parent);
      }
      out.series(n, d) = current;
    }
  }
  return out;
}

// Sum of squares per level; the final entry is the approximation energy.
template <typename Scalar>
VectorX<Scalar> pyramid_energy(const WaveletPyramid<Scalar>& pyr) {
  VectorX<Scalar> e(static_cast<Eigen::Index>(pyr.levels.size()));
  for (std::size_t l = 0; l < pyr.levels.size(); ++l) e[static_cast<Eigen::Index>(l)] = pyr.levels[l].flat().squaredNorm();
  return e;
}

// Family default order when only a family is configured.
FilterBank default_filter_bank(WaveletFamily family, Eigen::Index T);

struct WaveletConfig {
  std::string name = "db2";  // full name ("db4") or bare family ("db")
  int levels = 0;            // 0 selects level_count(T, F)
  BoundaryMode mode = BoundaryMode::symmetric;

  FilterBank bank(Eigen::Index T) const;
  int resolve_levels(Eigen::Index T) const;
};

}  // namespace wdiff
