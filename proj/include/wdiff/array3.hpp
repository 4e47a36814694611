#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>

#include "wdiff/error.hpp"

namespace wdiff {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Dense rank-3 array indexed (sample, time, feature), feature fastest.
// Used for time-series batches (N x T x D) and for every wavelet level
// (N x d_l x D).
template <typename Scalar>
class Array3 {
 public:
  using Series = Eigen::Map<VectorX<Scalar>, 0, Eigen::InnerStride<>>;
  using ConstSeries = Eigen::Map<const VectorX<Scalar>, 0, Eigen::InnerStride<>>;
  using Sample = Eigen::Map<RowMatrix<Scalar>>;
  using ConstSample = Eigen::Map<const RowMatrix<Scalar>>;

  Array3() = default;
  Array3(Eigen::Index n, Eigen::Index t, Eigen::Index d)
      : n_(n), t_(t), d_(d), data_(VectorX<Scalar>::Zero(n * t * d)) {}

  static Array3 Zero(Eigen::Index n, Eigen::Index t, Eigen::Index d) { return Array3(n, t, d); }
  static Array3 Constant(Eigen::Index n, Eigen::Index t, Eigen::Index d, Scalar v) {
    Array3 a(n, t, d);
    a.data_.setConstant(v);
    return a;
  }

  Eigen::Index samples() const { return n_; }
  Eigen::Index length() const { return t_; }
  Eigen::Index features() const { return d_; }
  Eigen::Index size() const { return data_.size(); }

  Scalar& operator()(Eigen::Index n, Eigen::Index t, Eigen::Index d) { return data_[(n * t_ + t) * d_ + d]; }
  Scalar operator()(Eigen::Index n, Eigen::Index t, Eigen::Index d) const { return data_[(n * t_ + t) * d_ + d]; }

  // Flat row-major storage; supports Eigen expressions over all entries.
  VectorX<Scalar>& flat() { return data_; }
  const VectorX<Scalar>& flat() const { return data_; }

  // One feature's trace over time for sample n.
  Series series(Eigen::Index n, Eigen::Index d) {
    return Series(data_.data() + n * t_ * d_ + d, t_, Eigen::InnerStride<>(d_));
  }
  ConstSeries series(Eigen::Index n, Eigen::Index d) const {
    return ConstSeries(data_.data() + n * t_ * d_ + d, t_, Eigen::InnerStride<>(d_));
  }

  // Sample n as a T x D matrix.
  Sample sample(Eigen::Index n) { return Sample(data_.data() + n * t_ * d_, t_, d_); }
  ConstSample sample(Eigen::Index n) const { return ConstSample(data_.data() + n * t_ * d_, t_, d_); }

  // All timesteps of all samples stacked as an (N*T) x D matrix.
  Sample rows() { return Sample(data_.data(), n_ * t_, d_); }
  ConstSample rows() const { return ConstSample(data_.data(), n_ * t_, d_); }

  bool same_shape(const Array3& o) const { return n_ == o.n_ && t_ == o.t_ && d_ == o.d_; }
  bool all_finite() const { return data_.allFinite(); }

  template <typename Other>
  Array3<Other> cast() const {
    Array3<Other> out(n_, t_, d_);
    out.flat() = data_.template cast<Other>();
    return out;
  }

  std::string shape_string() const {
    return "(" + std::to_string(n_) + ", " + std::to_string(t_) + ", " + std::to_string(d_) + ")";
  }

 private:
  Eigen::Index n_ = 0;
  Eigen::Index t_ = 0;
  Eigen::Index d_ = 0;
  VectorX<Scalar> data_;
};

using TimeSeriesBatch = Array3<double>;

template <typename Scalar>
void require_same_shape(const Array3<Scalar>& a, const Array3<Scalar>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + ": " + a.shape_string() + " vs " + b.shape_string());
  }
}

}  // namespace wdiff
