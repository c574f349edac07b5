#pragma once

// Dense matrix aliases and the handful of numeric kernels the attention stack
// needs: a checked product, a masked row softmax and a central-difference
// gradient oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "iekm/errors.hpp"

namespace iekm {

template <typename Scalar>
using Matrix2D = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matrix = Matrix2D<double>;

// Additive attention-mask value for dropped positions.
inline constexpr double kMaskDrop = -1e9;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, std::string_view stage) {
  if (!m.allFinite()) {
    throw NumericError("non-finite value produced by " + std::string(stage));
  }
}

template <typename A, typename B>
void require_same_shape(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b,
                        std::string_view what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape " + shape_string(a.rows(), a.cols()) +
                     " vs " + shape_string(b.rows(), b.cols()));
  }
}

template <typename A, typename B>
Matrix2D<typename A::Scalar> matmul(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_string(a.rows(), a.cols()) + " x " +
                     shape_string(b.rows(), b.cols()));
  }
  Matrix2D<typename A::Scalar> out = a * b;
  require_finite(out, "matmul");
  return out;
}

template <typename Scalar>
bool mask_keeps(Scalar mask_value) {
  return mask_value > Scalar(kMaskDrop / 2);
}

// Row-wise softmax of (scores + mask). The mask holds 0 for kept cells and
// kMaskDrop for dropped ones. Every row needs at least one kept cell.
template <typename A, typename B>
Matrix2D<typename A::Scalar> softmax_masked(const Eigen::MatrixBase<A>& scores,
                                            const Eigen::MatrixBase<B>& mask) {
  using Scalar = typename A::Scalar;
  require_same_shape(scores, mask, "softmax_masked");
  Matrix2D<Scalar> out(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Scalar row_max = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
      const Scalar m = mask(r, c);
      if (m != Scalar(0) && m != Scalar(kMaskDrop)) {
        throw ValidationError("softmax_masked: mask entries must be 0 or kMaskDrop");
      }
      if (mask_keeps(m)) row_max = std::max(row_max, Scalar(scores(r, c)));
    }
    if (!std::isfinite(row_max)) {
      throw NumericError("softmax_masked: row " + std::to_string(r) +
                         " has no kept position (degenerate attention row)");
    }
    Scalar total = 0;
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
      const Scalar e = std::exp(scores(r, c) + mask(r, c) - row_max);
      out(r, c) = e;
      total += e;
    }
    out.row(r) /= total;
  }
  require_finite(out, "softmax_masked");
  return out;
}

// A named, mutable parameter tensor that the finite-difference oracle may
// perturb in place.
template <typename Scalar>
struct ParamRef {
  std::string name;
  Matrix2D<Scalar>* value;
};

// Central differences (f(x + eps) - f(x - eps)) / 2eps for every scalar of
// every parameter. Each entry is restored before moving on.
template <typename Scalar>
std::vector<Matrix2D<Scalar>> finite_diff_gradient(const std::function<Scalar()>& loss_fn,
                                                   std::span<const ParamRef<Scalar>> params,
                                                   Scalar epsilon) {
  if (!(epsilon >= Scalar(1e-7) && epsilon <= Scalar(1e-3))) {
    throw ValidationError("finite_diff_gradient: epsilon must lie in [1e-7, 1e-3]");
  }
  std::vector<Matrix2D<Scalar>> grads;
  grads.reserve(params.size());
  for (const auto& p : params) {
    Matrix2D<Scalar>& value = *p.value;
    Matrix2D<Scalar> grad(value.rows(), value.cols());
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      Scalar& x = value.data()[i];
      const Scalar saved = x;
      x = saved + epsilon;
      const Scalar up = loss_fn();
      x = saved - epsilon;
      const Scalar down = loss_fn();
      x = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite_diff_gradient: non-finite loss when perturbing " + p.name +
                           "[" + std::to_string(i) + "]");
      }
      grad.data()[i] = (up - down) / (Scalar(2) * epsilon);
    }
    grads.push_back(std::move(grad));
  }
  return grads;
}

// |a - b| / max(|a|, |b|, floor), measured on Frobenius norms.
template <typename A, typename B>
typename A::Scalar relative_error(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b,
                                  typename A::Scalar floor = 1e-8) {
  const auto diff = (a - b).norm();
  const auto denom = std::max({a.norm(), b.norm(), floor});
  return diff / denom;
}

}  // namespace iekm
