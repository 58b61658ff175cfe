// Copyright 2026 The HNF Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HNF_MATRIXGEN_HPP_
#define HNF_MATRIXGEN_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "hnf/error.hpp"
#include "hnf/rng.hpp"

namespace hnf {

enum class WeightKind : std::uint8_t {
  RandomOrthonormal = 0,
  DctOrthonormal = 1,
  RawGaussian = 2,
};

inline constexpr bool is_orthonormal_kind(WeightKind kind) {
  return kind == WeightKind::RandomOrthonormal ||
         kind == WeightKind::DctOrthonormal;
}

inline std::string_view to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::RandomOrthonormal:
      return "random";
    case WeightKind::DctOrthonormal:
      return "dct";
    case WeightKind::RawGaussian:
      return "gaussian";
  }
  return "unknown";
}

inline WeightKind parse_weight_kind(std::string_view name) {
  if (name == "random") return WeightKind::RandomOrthonormal;
  if (name == "dct") return WeightKind::DctOrthonormal;
  if (name == "gaussian") return WeightKind::RawGaussian;
  throw ConfigError("unknown weight kind '" + std::string(name) +
                    "' (expected random, dct or gaussian)");
}

// Largest |(W^T W - I)_ij| accepted as orthonormal.
inline constexpr double kOrthonormalTolerance = 1e-10;

// A fixed, never-learned layer weight W (n x m). Immutable after
// construction; shape rules for the orthonormal kinds are enforced here,
// the orthonormality itself is guaranteed by the factories below.
class WeightMatrix {
 public:
  WeightMatrix(Eigen::MatrixXd entries, WeightKind kind,
               std::optional<std::uint64_t> seed = std::nullopt)
      : entries_(std::move(entries)), kind_(kind), seed_(seed) {
    if (entries_.rows() == 0 || entries_.cols() == 0) {
      throw DimensionError("weight matrix must have nonzero dimensions");
    }
    if (is_orthonormal_kind(kind_) && entries_.rows() < entries_.cols()) {
      throw DimensionError("orthonormal weight needs rows >= cols, got " +
                           std::to_string(entries_.rows()) + "x" +
                           std::to_string(entries_.cols()));
    }
  }

  Eigen::Index rows() const { return entries_.rows(); }
  Eigen::Index cols() const { return entries_.cols(); }
  const Eigen::MatrixXd& matrix() const { return entries_; }
  WeightKind kind() const { return kind_; }
  std::optional<std::uint64_t> seed() const { return seed_; }

  // max |(W^T W - I)_ij|
  double orthonormality_error() const {
    const Eigen::MatrixXd gram = entries_.transpose() * entries_;
    return (gram - Eigen::MatrixXd::Identity(cols(), cols()))
        .cwiseAbs()
        .maxCoeff();
  }

  bool is_numerically_orthonormal() const {
    return rows() >= cols() && orthonormality_error() <= kOrthonormalTolerance;
  }

 private:
  Eigen::MatrixXd entries_;
  WeightKind kind_;
  std::optional<std::uint64_t> seed_;
};

namespace detail {

inline void require_positive(Eigen::Index n, Eigen::Index m) {
  if (n <= 0 || m <= 0) {
    throw DimensionError("weight dimensions must be positive, got " +
                         std::to_string(n) + "x" + std::to_string(m));
  }
}

inline void require_tall(Eigen::Index n, Eigen::Index m) {
  require_positive(n, m);
  if (n < m) {
    throw DimensionError("orthonormal weight needs n >= m, got n=" +
                         std::to_string(n) + " m=" + std::to_string(m));
  }
}

// i.i.d. N(0,1), drawn in row-major order.
inline Eigen::MatrixXd gaussian_matrix(Eigen::Index n, Eigen::Index m,
                                       std::uint64_t seed) {
  NormalSource normal(seed);
  Eigen::MatrixXd a(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) a(i, j) = normal();
  }
  return a;
}

}  // namespace detail

// Thin QR of an n x m Gaussian matrix; columns are flipped so that R has a
// positive diagonal, which makes Q unique for a given draw.
inline WeightMatrix make_random_orthonormal(Eigen::Index n, Eigen::Index m,
                                            std::uint64_t seed) {
  detail::require_tall(n, m);
  const Eigen::MatrixXd a = detail::gaussian_matrix(n, m, seed);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, m);
  const auto& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < m; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return WeightMatrix(std::move(q), WeightKind::RandomOrthonormal, seed);
}

// First m columns of the n x n orthonormal DCT-II matrix
//   D[k, j] = c_k sqrt(2/n) cos(pi (2j + 1) k / (2n)),  c_0 = 1/sqrt(2).
// Applying it to an m-vector equals zero-padding to n and taking the DCT.
inline WeightMatrix make_dct_orthonormal(Eigen::Index n, Eigen::Index m) {
  detail::require_tall(n, m);
  Eigen::MatrixXd w(n, m);
  const double nd = static_cast<double>(n);
  const double scale = std::sqrt(2.0 / nd);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double ck = k == 0 ? std::numbers::sqrt2 / 2.0 : 1.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      w(k, j) = ck * scale *
                std::cos(std::numbers::pi * (2.0 * static_cast<double>(j) + 1.0) *
                         static_cast<double>(k) / (2.0 * nd));
    }
  }
  return WeightMatrix(std::move(w), WeightKind::DctOrthonormal);
}

// Unnormalized N(0,1) weight, used for the ELM front layer. Full column rank
// is not required (and not checked).
inline WeightMatrix make_raw_gaussian(Eigen::Index n, Eigen::Index m,
                                      std::uint64_t seed) {
  detail::require_positive(n, m);
  return WeightMatrix(detail::gaussian_matrix(n, m, seed),
                      WeightKind::RawGaussian, seed);
}

inline Eigen::VectorXd singular_values(const Eigen::MatrixXd& a) {
  return Eigen::BDCSVD<Eigen::MatrixXd>(a).singularValues();
}

// True iff the m-th largest singular value exceeds tol.
inline bool verify_full_column_rank(const WeightMatrix& w, double tol) {
  if (!(tol > 0.0)) throw ParameterError("rank tolerance must be positive");
  if (w.rows() < w.cols()) return false;
  // All singular values of an orthonormal W lie within 1e-10 of one.
  if (tol < 0.5 && w.is_numerically_orthonormal()) return true;
  const Eigen::VectorXd s = singular_values(w.matrix());
  return s(w.cols() - 1) > tol;
}

// Default relative tolerance: 1e-6 * sigma_max.
inline bool verify_full_column_rank(const WeightMatrix& w) {
  if (w.rows() < w.cols()) return false;
  if (w.is_numerically_orthonormal()) return true;
  const Eigen::VectorXd s = singular_values(w.matrix());
  return s(0) > 0.0 && s(w.cols() - 1) > 1e-6 * s(0);
}

// W^dagger: W^T when W is numerically orthonormal, otherwise an SVD
// pseudo-inverse with singular values below 1e-10 * sigma_max dropped.
inline Eigen::MatrixXd pseudo_inverse(const WeightMatrix& w) {
  if (w.is_numerically_orthonormal()) return w.matrix().transpose();
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(
      w.matrix(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? 1e-10 * s(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// Pseudo-inverse that refuses rank-deficient weights; the LFP inverse and the
// embedded witness are only exact when W^dagger W = I.
inline Eigen::MatrixXd left_inverse(const WeightMatrix& w) {
  if (!verify_full_column_rank(w)) {
    throw NotInvertibleError("weight matrix " + std::to_string(w.rows()) +
                             "x" + std::to_string(w.cols()) +
                             " is not full column rank");
  }
  return pseudo_inverse(w);
}

}  // namespace hnf

#endif  // HNF_MATRIXGEN_HPP_
