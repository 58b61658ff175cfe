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

#ifndef HNF_SOLVERS_HPP_
#define HNF_SOLVERS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "hnf/error.hpp"
#include "hnf/layers.hpp"
#include "hnf/matrixgen.hpp"

namespace hnf {

inline constexpr double kInfiniteBudget = std::numeric_limits<double>::infinity();

// Smallest ball budget handed to the constrained solver; only reachable when
// the previous map is exactly zero (all-zero targets).
inline constexpr double kEpsilonFloor = 1e-12;

struct SolverDiagnostics {
  std::string solver;
  int iterations = 0;
  int best_iteration = 0;
  int penalty_updates = 0;
  double final_penalty = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

// A trained linear map O (Q x d) onto the targets.
struct OutputMap {
  Eigen::MatrixXd matrix;
  double epsilon = kInfiniteBudget;  // budget on ||O||_F^2
  double train_cost = 0.0;           // (1/N) ||T - O Y||_F^2
  int layer_index = 0;               // stage whose features the map consumes
  SolverDiagnostics diagnostics;
};

// Sample-average squared error (1/N) ||T - O Y||_F^2.
inline double prediction_cost(const Eigen::MatrixXd& o, const Eigen::MatrixXd& y,
                              const Eigen::MatrixXd& t) {
  if (y.cols() == 0) throw DataError("cost over zero samples");
  return (t - o * y).squaredNorm() / static_cast<double>(y.cols());
}

namespace detail {

inline void check_training_pair(const Eigen::MatrixXd& y,
                                const Eigen::MatrixXd& t) {
  if (y.cols() == 0 || y.rows() == 0 || t.rows() == 0) {
    throw DataError("empty training data");
  }
  if (y.cols() != t.cols()) {
    throw DimensionError("features have " + std::to_string(y.cols()) +
                         " samples but targets have " +
                         std::to_string(t.cols()));
  }
  if (!y.allFinite() || !t.allFinite()) {
    throw DataError("training data contains non-finite values");
  }
}

// Y Y^T via a symmetric rank update.
inline Eigen::MatrixXd gram(const Eigen::MatrixXd& y) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(y.rows(), y.rows());
  g.selfadjointView<Eigen::Lower>().rankUpdate(y);
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

// Solves X G = B for symmetric positive semi-definite G. Cholesky when G is
// comfortably definite, eigen-decomposition pseudo-inverse otherwise.
inline Eigen::MatrixXd solve_right_psd(const Eigen::MatrixXd& g,
                                       const Eigen::MatrixXd& b) {
  const Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-12) {
    return llt.solve(b.transpose()).transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
  const Eigen::VectorXd& s = eig.eigenvalues();
  const double cutoff = static_cast<double>(g.rows()) *
                        std::numeric_limits<double>::epsilon() *
                        std::max(s.cwiseAbs().maxCoeff(), 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) inv(i) = 1.0 / s(i);
  }
  const Eigen::MatrixXd& v = eig.eigenvectors();
  return ((b * v) * inv.asDiagonal()) * v.transpose();
}

}  // namespace detail

// O = T Y^T (Y Y^T + ridge I)^-1, with a pseudo-inverse when ridge = 0 and
// Y Y^T is singular (minimum-norm least squares).
inline OutputMap least_squares(const Eigen::MatrixXd& y, const Eigen::MatrixXd& t,
                               double ridge = 0.0) {
  detail::check_training_pair(y, t);
  if (!(ridge >= 0.0)) throw ParameterError("ridge must be nonnegative");
  Eigen::MatrixXd g = detail::gram(y);
  g.diagonal().array() += ridge;
  OutputMap out;
  out.matrix = detail::solve_right_psd(g, t * y.transpose());
  out.epsilon = kInfiniteBudget;
  out.train_cost = prediction_cost(out.matrix, y, t);
  out.layer_index = 0;
  out.diagnostics.solver = "least_squares";
  return out;
}

struct ElmSolution {
  Eigen::MatrixXd features;
  OutputMap map;
};

// Extreme learning machine: features g(W1 X), unregularized least squares.
inline ElmSolution elm_solve(const WeightMatrix& w1, const Eigen::MatrixXd& x,
                             const Eigen::MatrixXd& t, Activation activation) {
  if (w1.cols() != x.rows()) {
    throw DimensionError("ELM weight has " + std::to_string(w1.cols()) +
                         " columns, input dim is " + std::to_string(x.rows()));
  }
  const ElmFront front{w1, activation};
  ElmSolution out;
  out.features = front.forward(x);
  out.map = least_squares(out.features, t, 0.0);
  out.map.layer_index = 1;
  out.map.diagnostics.solver = "elm";
  return out;
}

struct AdmmConfig {
  int iterations = 100;
  // Penalty rho of the augmented Lagrangian (the "step size").
  double penalty = 1e-7;
  // Early stop once primal + dual residual <= tolerance; 0 runs every
  // iteration.
  double tolerance = 0.0;
  // Residual balancing: rescale rho whenever one residual dominates the
  // other by more than balance_ratio.
  bool adaptive = true;
  double balance_ratio = 10.0;
  double max_penalty_step = 1e3;
};

// Lower limit on rho as a fraction of the mean diagonal of the scaled Gram
// matrix; around 1e2 units of double rounding.
inline constexpr double kRelativePenaltyFloor = 1e-14;

// Default penalty by weight kind: 1e2 for DCT weights, 1e-7 otherwise.
inline double default_penalty(WeightKind kind) {
  return kind == WeightKind::DctOrthonormal ? 1e2 : 1e-7;
}

inline void validate(const AdmmConfig& cfg) {
  if (cfg.iterations < 1) throw ParameterError("ADMM needs >= 1 iteration");
  if (!(cfg.penalty > 0.0) || !std::isfinite(cfg.penalty)) {
    throw ParameterError("ADMM penalty must be positive and finite");
  }
  if (!(cfg.tolerance >= 0.0)) {
    throw ParameterError("ADMM tolerance must be nonnegative");
  }
  if (!(cfg.balance_ratio > 1.0) || !(cfg.max_penalty_step > 1.0)) {
    throw ParameterError("ADMM balancing parameters must exceed 1");
  }
}

// Euclidean projection onto {Z : ||Z||_F <= radius}.
inline Eigen::MatrixXd project_frobenius_ball(const Eigen::MatrixXd& a,
                                              double radius) {
  const double norm = a.norm();
  if (norm <= radius) return a;
  return a * (radius / norm);
}

// min_O (1/N) ||T - O Y||_F^2  s.t. ||O||_F^2 <= eps, by ADMM on the split
// O = Z with Z confined to the Frobenius ball:
//
//   O <- ((2/N) T Y^T + rho (Z - U)) ((2/N) Y Y^T + rho I)^-1
//   Z <- Proj_ball(O + U)
//   U <- U + O - Z
//
// Returns the feasible Z-iterate of lowest cost seen, counting the starting
// point, so a feasible warm start is never made worse.
inline OutputMap admm_constrained_ls(
    const Eigen::MatrixXd& y, const Eigen::MatrixXd& t, double eps,
    const AdmmConfig& cfg,
    const std::optional<Eigen::MatrixXd>& warm_start = std::nullopt) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw ParameterError("ball budget eps must be positive and finite");
  }
  validate(cfg);
  detail::check_training_pair(y, t);
  const Eigen::Index q = t.rows();
  const Eigen::Index d = y.rows();
  const double inv_n = 1.0 / static_cast<double>(y.cols());
  const double radius = std::sqrt(eps);

  const Eigen::MatrixXd g = detail::gram(y) * (2.0 * inv_n);
  const Eigen::MatrixXd c = (t * y.transpose()) * (2.0 * inv_n);
  const double target_energy = t.squaredNorm() * inv_n;
  // Expanded cost; exact up to rounding, used only to rank iterates.
  auto cost_of = [&](const Eigen::MatrixXd& z) {
    return target_energy - (z.array() * c.array()).sum() +
           0.5 * (z.array() * (z * g).array()).sum();
  };

  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(q, d);
  if (warm_start) {
    if (warm_start->rows() != q || warm_start->cols() != d) {
      throw DimensionError("warm start has the wrong shape");
    }
    z = project_frobenius_ball(*warm_start, radius);
  }
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(q, d);
  double rho = cfg.penalty;

  // A penalty below the rounding level of G leaves G + rho I numerically
  // singular, so rho is kept above a floor relative to the mean of diag(G).
  const double g_scale = std::max(g.diagonal().mean(), std::numeric_limits<double>::min());
  const double rho_floor = kRelativePenaltyFloor * g_scale;
  Eigen::LLT<Eigen::MatrixXd> llt;
  // Factors G + rho I, raising rho (and rescaling U) until it succeeds.
  auto factor = [&](double& r) {
    r = std::max(r, rho_floor);
    for (int attempt = 0; attempt < 40; ++attempt) {
      Eigen::MatrixXd shifted = g;
      shifted.diagonal().array() += r;
      llt.compute(shifted);
      if (llt.info() == Eigen::Success) return;
      r *= 10.0;
      u /= 10.0;
    }
    throw NumericalError("ADMM system matrix is not positive definite");
  };
  factor(rho);

  Eigen::MatrixXd best = z;
  double best_cost = cost_of(z);
  SolverDiagnostics diag;
  diag.solver = "admm";

  for (int k = 1; k <= cfg.iterations; ++k) {
    const Eigen::MatrixXd rhs = c + rho * (z - u);
    const Eigen::MatrixXd o = llt.solve(rhs.transpose()).transpose();
    const Eigen::MatrixXd z_prev = std::move(z);
    z = project_frobenius_ball(o + u, radius);
    u += o - z;
    diag.iterations = k;
    diag.primal_residual = (o - z).norm();
    diag.dual_residual = rho * (z - z_prev).norm();
    if (!z.allFinite()) throw NumericalError("ADMM iterate became non-finite");

    const double cz = cost_of(z);
    if (cz < best_cost) {
      best_cost = cz;
      best = z;
      diag.best_iteration = k;
    }
    if (cfg.tolerance > 0.0 &&
        diag.primal_residual + diag.dual_residual <= cfg.tolerance) {
      break;
    }
    if (cfg.adaptive && k < cfg.iterations) {
      const double r = diag.primal_residual;
      const double s = diag.dual_residual;
      double step = 1.0;
      if (r > cfg.balance_ratio * s) {
        step = s > 0.0 ? std::sqrt(r / (cfg.balance_ratio * s)) : cfg.max_penalty_step;
        step = std::clamp(step, 2.0, cfg.max_penalty_step);
      } else if (s > cfg.balance_ratio * r) {
        step = r > 0.0 ? std::sqrt(cfg.balance_ratio * r / s) : 1.0 / cfg.max_penalty_step;
        step = std::clamp(step, 1.0 / cfg.max_penalty_step, 0.5);
      }
      if (step != 1.0) {
        rho *= step;
        u /= step;  // scaled dual U = Lambda / rho
        factor(rho);
        ++diag.penalty_updates;
      }
    }
  }
  diag.final_penalty = rho;

  OutputMap out;
  out.matrix = std::move(best);
  out.epsilon = eps;
  out.train_cost = prediction_cost(out.matrix, y, t);
  out.diagnostics = diag;
  return out;
}

namespace detail {

inline Eigen::MatrixXd previous_times_pinv(const Eigen::MatrixXd& o_prev,
                                           const WeightMatrix& w) {
  if (w.cols() != o_prev.cols()) {
    throw DimensionError("map has " + std::to_string(o_prev.cols()) +
                         " columns but the next weight expects " +
                         std::to_string(w.cols()));
  }
  return o_prev * left_inverse(w);
}

}  // namespace detail

// ||O_prev W^dagger U_n||_F^2 = 2 ||O_prev W^dagger||_F^2. U_n is not formed.
inline double embedding_budget(const Eigen::MatrixXd& o_prev,
                               const WeightMatrix& w) {
  return 2.0 * detail::previous_times_pinv(o_prev, w).squaredNorm();
}

// Budget of the first constrained layer from the raw least-squares map (or,
// for an ELM front, of the second layer from the ELM map).
inline double epsilon_first_layer(const OutputMap& o_prev, const WeightMatrix& w1) {
  return embedding_budget(o_prev.matrix, w1);
}

inline double epsilon_next_layer(const OutputMap& o_prev, const WeightMatrix& w) {
  return embedding_budget(o_prev.matrix, w);
}

// The feasible witness [M, -M], M = O_prev W^dagger. It reproduces the
// previous layer's predictions: witness * ybar^(l) = O_prev * ybar^(l-1).
inline Eigen::MatrixXd embed_previous_map(const Eigen::MatrixXd& o_prev,
                                          const WeightMatrix& w) {
  const Eigen::MatrixXd m = detail::previous_times_pinv(o_prev, w);
  Eigen::MatrixXd out(m.rows(), 2 * m.cols());
  out.leftCols(m.cols()) = m;
  out.rightCols(m.cols()) = -m;
  return out;
}

inline Eigen::MatrixXd embed_previous_map(const OutputMap& o_prev,
                                          const WeightMatrix& w) {
  return embed_previous_map(o_prev.matrix, w);
}

}  // namespace hnf

#endif  // HNF_SOLVERS_HPP_
