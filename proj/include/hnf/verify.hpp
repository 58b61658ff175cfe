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

#ifndef HNF_VERIFY_HPP_
#define HNF_VERIFY_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hnf/data.hpp"
#include "hnf/error.hpp"
#include "hnf/layers.hpp"
#include "hnf/rng.hpp"

namespace hnf {

struct InvariantCheck {
  std::string name;
  bool applicable = true;
  std::size_t trials = 0;
  std::size_t violations = 0;
  // Smallest normalized slack seen; negative means a violation.
  double worst_margin = std::numeric_limits<double>::infinity();
  std::string detail;

  bool passed() const { return !applicable || violations == 0; }

  void observe(double margin) {
    ++trials;
    if (margin < 0.0 || !std::isfinite(margin)) ++violations;
    if (!(margin >= worst_margin)) worst_margin = margin;
  }
};

struct InvariantReport {
  std::vector<InvariantCheck> checks;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const InvariantCheck& c) { return c.passed(); });
  }
  const InvariantCheck* find(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
};

struct VerifyTolerances {
  double sandwich = 1e-9;
  double identity = 1e-12;
  double norm = 1e-9;
  double inversion = 1e-6;
  double perturbation = 1e-9;
};

namespace detail {

inline bool chain_is_orthonormal(const std::vector<HnfLayer>& layers) {
  return std::all_of(layers.begin(), layers.end(), [](const HnfLayer& l) {
    return l.weight().is_numerically_orthonormal();
  });
}

}  // namespace detail

// Randomized checks of the geometric properties of the HNF chain on inputs
// drawn from `data`. With an ELM front the checks run on the HNF layers
// behind it, fed with the front's features. Only a bad argument throws;
// everything else is reported.
inline InvariantReport verify_invariants(const HnfNetwork& net, const Dataset& data,
                                               std::size_t trials, std::uint64_t seed,
                                               const VerifyTolerances& tol = {}) {
  if (trials == 0) throw ParameterError("trials must be positive");
  if (data.input_dim() != net.input_dim()) {
    throw DimensionError("dataset dim " + std::to_string(data.input_dim()) +
                         " does not match network input dim " +
                         std::to_string(net.input_dim()));
  }
  if (data.size() == 0) throw DataError("dataset is empty");

  const auto& layers = net.layers();
  const Eigen::Index q_dim = layers.empty() ? 0 : layers.front().in_dim();
  const bool ortho = detail::chain_is_orthonormal(layers);

  InvariantCheck sandwich;
  sandwich.name = "distance_sandwich";
  InvariantCheck identity;
  identity.name = "distance_identity";
  InvariantCheck norm;
  norm.name = "norm_preservation";
  InvariantCheck inversion;
  inversion.name = "inversion_round_trip";
  InvariantCheck perturb;
  perturb.name = "weight_perturbation_bound";
  InvariantCheck chain;
  chain.name = "chain_perturbation_bound";
  for (auto* c : {&sandwich, &norm, &chain}) {
    if (!ortho) {
      c->applicable = false;
      c->detail = "weights are not orthonormal";
    }
  }
  if (layers.empty()) {
    for (auto* c : {&sandwich, &identity, &norm, &inversion, &perturb, &chain}) {
      c->applicable = false;
      c->detail = "network has no HNF layers";
    }
    return {{sandwich, identity, norm, inversion, perturb, chain}};
  }

  const HnfNetwork chain_net(q_dim, layers);
  std::mt19937_64 gen(seed);
  NormalSource normal(derive_seed(seed, 1));
  std::uniform_int_distribution<Eigen::Index> pick(0, data.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto front_input = [&](Eigen::Index j) -> Eigen::VectorXd {
    Eigen::VectorXd x = data.x().col(j);
    if (net.has_front()) return net.front()->forward(Eigen::MatrixXd(x)).col(0);
    return x;
  };
  auto gaussian_like = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
    }
    return m;
  };

  std::optional<InverseMap> inverse;
  try {
    inverse.emplace(chain_net);
  } catch (const NumericalError& e) {
    inversion.detail = e.what();
  }

  for (std::size_t t = 0; t < trials; ++t) {
    const Eigen::VectorXd q1 = front_input(pick(gen));
    Eigen::VectorXd q2;
    // Half the pairs are nearby points, half are two data samples.
    if (data.size() < 2 || unit(gen) < 0.5) {
      const double scale = std::pow(10.0, -6.0 * unit(gen)) * std::max(q1.norm(), 1.0);
      Eigen::VectorXd step = gaussian_like(q_dim, 1).col(0);
      q2 = q1 + scale * step / std::max(step.norm(), 1e-300);
    } else {
      q2 = front_input(pick(gen));
    }
    const double d0 = (q1 - q2).squaredNorm();

    Eigen::VectorXd a = q1;
    Eigen::VectorXd b = q2;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const Eigen::VectorXd za = layers[l].weight().matrix() * a;
      const Eigen::VectorXd zb = layers[l].weight().matrix() * b;
      const Eigen::VectorXd na = vn_expand(za);
      const Eigen::VectorXd nb = vn_expand(zb);
      const double dl = (na - nb).squaredNorm();
      const double rhs = 0.5 * (za - zb).squaredNorm() +
                         0.5 * (za.cwiseAbs() - zb.cwiseAbs()).squaredNorm();
      const double scale = za.squaredNorm() + zb.squaredNorm();
      identity.observe(tol.identity - std::abs(dl - rhs) / std::max(scale, 1e-300));
      if (ortho && d0 > 0.0) {
        const double lower = std::ldexp(d0, -static_cast<int>(l + 1));
        const double m = std::min(dl - lower, d0 - dl) / d0;
        sandwich.observe(m + tol.sandwich);
      }
      a = na;
      b = nb;
    }

    if (ortho) {
      const double n0 = q1.squaredNorm();
      const double rel = n0 > 0.0 ? std::abs(a.squaredNorm() - n0) / n0 : a.squaredNorm();
      norm.observe(tol.norm - rel);
    }

    if (inverse) {
      const Eigen::VectorXd back = inverse->apply(a);
      const double rel = (back - q1).norm() / std::max(q1.norm(), 1e-300);
      inversion.observe(tol.inversion - rel);
    } else {
      inversion.observe(-1.0);
    }

    // Single-layer perturbation bound at a random layer, on its real input.
    {
      const std::size_t l = std::uniform_int_distribution<std::size_t>(0, layers.size() - 1)(gen);
      Eigen::VectorXd q = q1;
      for (std::size_t k = 0; k < l; ++k) q = layers[k].forward(q);
      const auto& w = layers[l].weight();
      Eigen::MatrixXd dw = gaussian_like(w.rows(), w.cols());
      dw *= std::pow(10.0, -4.0 * unit(gen)) / std::max(dw.norm(), 1e-300);
      const auto r = weight_perturbation_check(layers[l], dw, q);
      perturb.observe(r.rhs > 0.0 ? (r.rhs - r.lhs) / r.rhs + tol.perturbation
                                  : -r.lhs);
    }

    if (ortho) {
      std::vector<Eigen::MatrixXd> dws;
      const double mag = std::pow(10.0, -4.0 * unit(gen));
      for (const auto& layer : layers) {
        Eigen::MatrixXd dw = gaussian_like(layer.weight().rows(), layer.weight().cols());
        dws.push_back(dw * (mag / std::max(dw.norm(), 1e-300)));
      }
      const auto r = chain_perturbation_check(chain_net, dws, q1);
      chain.observe(r.compounded_bound > 0.0
                        ? (r.compounded_bound - r.lhs) / r.compounded_bound + tol.perturbation
                        : -r.lhs);
    }
  }
  return {{sandwich, identity, norm, inversion, perturb, chain}};
}

}  // namespace hnf

#endif  // HNF_VERIFY_HPP_
