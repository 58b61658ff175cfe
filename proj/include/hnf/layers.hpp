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

#ifndef HNF_LAYERS_HPP_
#define HNF_LAYERS_HPP_

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hnf/error.hpp"
#include "hnf/matrixgen.hpp"

namespace hnf {

// g(x) = max(x, 0), elementwise. Works on vectors and on batches stored as
// columns.
template <typename Derived>
typename Derived::PlainObject relu(const Eigen::MatrixBase<Derived>& v) {
  return v.cwiseMax(0.0);
}

// Result type of vn_expand / un_collapse: the row count changes, so it
// cannot keep a fixed compile-time size.
template <typename Derived>
using ResizedRows = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic,
                                  Derived::ColsAtCompileTime>;

// g(V_n z) = [z+; -z-]. V_n is never materialized.
template <typename Derived>
ResizedRows<Derived> vn_expand(const Eigen::MatrixBase<Derived>& z) {
  ResizedRows<Derived> out(2 * z.rows(), z.cols());
  out.topRows(z.rows()) = z.cwiseMax(0.0);
  out.bottomRows(z.rows()) = (-z).cwiseMax(0.0);
  return out;
}

// U_n ybar = top half minus bottom half; left inverse of vn_expand.
template <typename Derived>
ResizedRows<Derived> un_collapse(
    const Eigen::MatrixBase<Derived>& ybar) {
  if (ybar.rows() % 2 != 0) {
    throw DimensionError("un_collapse needs an even length, got " +
                         std::to_string(ybar.rows()));
  }
  const Eigen::Index n = ybar.rows() / 2;
  return ybar.topRows(n) - ybar.bottomRows(n);
}

enum class Activation { ReLU, Sigmoid };

inline std::string_view to_string(Activation a) {
  return a == Activation::ReLU ? "relu" : "sigmoid";
}

inline Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

inline Eigen::MatrixXd apply_activation(Activation a, const Eigen::MatrixXd& z) {
  if (a == Activation::ReLU) return relu(z);
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

// One HNF layer: q -> g(V_n W q). in_dim = m, out_dim = 2n.
class HnfLayer {
 public:
  explicit HnfLayer(WeightMatrix weight) : weight_(std::move(weight)) {}

  const WeightMatrix& weight() const { return weight_; }
  Eigen::Index in_dim() const { return weight_.cols(); }
  Eigen::Index out_dim() const { return 2 * weight_.rows(); }

  // Columns of q are samples.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& q) const {
    if (q.rows() != in_dim()) {
      throw DimensionError("layer expects input dim " +
                           std::to_string(in_dim()) + ", got " +
                           std::to_string(q.rows()));
    }
    return vn_expand(weight_.matrix() * q);
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& q) const {
    return forward(Eigen::MatrixXd(q)).col(0);
  }

 private:
  WeightMatrix weight_;
};

inline Eigen::VectorXd layer_forward(const HnfLayer& layer,
                                     const Eigen::VectorXd& q) {
  return layer.forward(q);
}

// ELM feature layer x -> g(W x) with no V expansion; W is typically a raw
// Gaussian matrix and g may be a sigmoid.
struct ElmFront {
  WeightMatrix weight;
  Activation activation = Activation::ReLU;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
    if (x.rows() != in_dim()) {
      throw DimensionError("ELM front expects input dim " +
                           std::to_string(in_dim()) + ", got " +
                           std::to_string(x.rows()));
    }
    return apply_activation(activation, weight.matrix() * x);
  }
};

// Chain of layers. Stage k (1-based) produces ybar^(k); when an ELM front is
// present it is stage 1 and the HNF layers are stages 2..L.
class HnfNetwork {
 public:
  HnfNetwork(Eigen::Index input_dim, std::vector<HnfLayer> layers,
             std::optional<ElmFront> front = std::nullopt)
      : input_dim_(input_dim),
        layers_(std::move(layers)),
        front_(std::move(front)) {
    if (input_dim_ <= 0) throw DimensionError("input dim must be positive");
    Eigen::Index dim = input_dim_;
    if (front_) {
      if (front_->in_dim() != dim) {
        throw DimensionError("ELM front input dim " +
                             std::to_string(front_->in_dim()) +
                             " does not match network input dim " +
                             std::to_string(dim));
      }
      dim = front_->out_dim();
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].in_dim() != dim) {
        throw DimensionError("layer " + std::to_string(i + 1) +
                             " input dim " +
                             std::to_string(layers_[i].in_dim()) +
                             " does not chain with previous output dim " +
                             std::to_string(dim));
      }
      dim = layers_[i].out_dim();
    }
    if (depth() == 0) throw DimensionError("network needs at least one layer");
  }

  Eigen::Index input_dim() const { return input_dim_; }
  int depth() const {
    return static_cast<int>(layers_.size()) + (front_ ? 1 : 0);
  }
  bool has_front() const { return front_.has_value(); }
  const std::optional<ElmFront>& front() const { return front_; }
  const std::vector<HnfLayer>& layers() const { return layers_; }

  // Stage index of the first V-expanded layer.
  int first_hnf_stage() const { return front_ ? 2 : 1; }

  // The HNF layer computing stage k; k must not be the ELM front.
  const HnfLayer& hnf_layer(int stage) const {
    const int idx = stage - first_hnf_stage();
    if (idx < 0 || idx >= static_cast<int>(layers_.size())) {
      throw DimensionError("no HNF layer at stage " + std::to_string(stage));
    }
    return layers_[static_cast<std::size_t>(idx)];
  }

  Eigen::Index stage_out_dim(int stage) const {
    if (stage == 0) return input_dim_;
    if (front_ && stage == 1) return front_->out_dim();
    return hnf_layer(stage).out_dim();
  }

  // ybar^(stage) from ybar^(stage-1); columns are samples.
  Eigen::MatrixXd apply_stage(int stage, const Eigen::MatrixXd& prev) const {
    if (stage < 1 || stage > depth()) {
      throw DimensionError("stage " + std::to_string(stage) +
                           " out of range 1.." + std::to_string(depth()));
    }
    if (front_ && stage == 1) return front_->forward(prev);
    return hnf_layer(stage).forward(prev);
  }

  // Features at a single stage, recomputed from the input without retaining
  // the intermediate matrices.
  Eigen::MatrixXd features_at(const Eigen::MatrixXd& x, int stage) const {
    if (x.rows() != input_dim_) {
      throw DimensionError("network expects input dim " +
                           std::to_string(input_dim_) + ", got " +
                           std::to_string(x.rows()));
    }
    Eigen::MatrixXd y = x;
    for (int k = 1; k <= stage; ++k) y = apply_stage(k, y);
    return y;
  }

  // Bytes needed to hold every intermediate feature matrix for n samples.
  std::size_t all_features_bytes(Eigen::Index n) const {
    std::size_t total = 0;
    for (int k = 1; k <= depth(); ++k) {
      total += static_cast<std::size_t>(stage_out_dim(k)) *
               static_cast<std::size_t>(n) * sizeof(double);
    }
    return total;
  }

 private:
  Eigen::Index input_dim_;
  std::vector<HnfLayer> layers_;
  std::optional<ElmFront> front_;
};

inline constexpr std::size_t kDefaultMemoryBudget = std::size_t{4} << 30;

// Every intermediate ybar^(1..L) for a batch. Throws ResourceError if the
// retained matrices would exceed the budget; use HnfNetwork::features_at to
// stream a single stage instead.
inline std::vector<Eigen::MatrixXd> network_forward_batch(
    const HnfNetwork& net, const Eigen::MatrixXd& x,
    std::size_t memory_budget = kDefaultMemoryBudget) {
  if (x.rows() != net.input_dim()) {
    throw DimensionError("network expects input dim " +
                         std::to_string(net.input_dim()) + ", got " +
                         std::to_string(x.rows()));
  }
  if (net.all_features_bytes(x.cols()) > memory_budget) {
    throw ResourceError("retaining all layer features needs " +
                        std::to_string(net.all_features_bytes(x.cols())) +
                        " bytes, budget is " + std::to_string(memory_budget));
  }
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<std::size_t>(net.depth()));
  const Eigen::MatrixXd* prev = &x;
  for (int k = 1; k <= net.depth(); ++k) {
    out.push_back(net.apply_stage(k, *prev));
    prev = &out.back();
  }
  return out;
}

inline std::vector<Eigen::VectorXd> network_forward(const HnfNetwork& net,
                                                    const Eigen::VectorXd& x) {
  std::vector<Eigen::VectorXd> out;
  for (auto& m : network_forward_batch(net, Eigen::MatrixXd(x))) {
    out.emplace_back(m.col(0));
  }
  return out;
}

// Linear inverse ybar^(L) -> x built from the Lossless Flow Property:
// ybar^(l-1) = W^(l)dagger U ybar^(l). Construction checks every weight for
// full column rank once.
class InverseMap {
 public:
  explicit InverseMap(const HnfNetwork& net) : out_dim_(net.stage_out_dim(net.depth())) {
    if (net.has_front()) {
      throw NotInvertibleError(
          "network with an ELM front layer has no linear inverse");
    }
    for (const auto& layer : net.layers()) {
      pinvs_.push_back(left_inverse(layer.weight()));
    }
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& ybar) const {
    if (ybar.rows() != out_dim_) {
      throw DimensionError("inverse expects dim " + std::to_string(out_dim_) +
                           ", got " + std::to_string(ybar.rows()));
    }
    Eigen::MatrixXd y = ybar;
    for (auto it = pinvs_.rbegin(); it != pinvs_.rend(); ++it) {
      y = (*it) * un_collapse(y);
    }
    return y;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& ybar) const {
    return apply(Eigen::MatrixXd(ybar)).col(0);
  }

 private:
  Eigen::Index out_dim_;
  std::vector<Eigen::MatrixXd> pinvs_;
};

inline Eigen::VectorXd network_invert(const HnfNetwork& net,
                                      const Eigen::VectorXd& ybar_last) {
  return InverseMap(net).apply(ybar_last);
}

struct PairDistances {
  double input_dist2 = 0.0;
  std::vector<double> per_layer_dist2;
};

inline PairDistances pair_distance_report(const HnfNetwork& net,
                                          const Eigen::VectorXd& x1,
                                          const Eigen::VectorXd& x2) {
  if (x1.size() != x2.size()) {
    throw DimensionError("pair inputs differ in length");
  }
  Eigen::MatrixXd pair(x1.size(), 2);
  pair.col(0) = x1;
  pair.col(1) = x2;
  PairDistances out;
  out.input_dist2 = (x1 - x2).squaredNorm();
  for (const auto& y : network_forward_batch(net, pair)) {
    out.per_layer_dist2.push_back((y.col(0) - y.col(1)).squaredNorm());
  }
  return out;
}

struct PerturbationCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = true;
};

// ||g(V W q) - g(V (W + dW) q)||^2 <= ||dW||_F^2 ||q||^2
inline PerturbationCheck weight_perturbation_check(const HnfLayer& layer,
                                                   const Eigen::MatrixXd& dw,
                                                   const Eigen::VectorXd& q) {
  const auto& w = layer.weight().matrix();
  if (dw.rows() != w.rows() || dw.cols() != w.cols()) {
    throw DimensionError("perturbation shape does not match weight");
  }
  if (q.size() != w.cols()) {
    throw DimensionError("perturbation check input has wrong length");
  }
  const Eigen::VectorXd base = vn_expand(w * q);
  const Eigen::VectorXd moved = vn_expand((w + dw) * q);
  PerturbationCheck out;
  out.lhs = (base - moved).squaredNorm();
  out.rhs = dw.squaredNorm() * q.squaredNorm();
  out.holds = out.lhs <= out.rhs * (1.0 + 1e-9);
  return out;
}

struct ChainPerturbationCheck {
  double lhs = 0.0;
  // prod_l ||dW_l||_F^2 ||x||^2, the literal product form.
  double product_bound = 0.0;
  // ((prod_l (1 + ||dW_l||_F)) - 1)^2 ||x||^2, obtained by chaining the
  // single-layer bound through norm preservation.
  double compounded_bound = 0.0;
  bool product_holds = true;
  bool compounded_holds = true;
};

// Perturbs every HNF layer of an orthonormal chain at once.
inline ChainPerturbationCheck chain_perturbation_check(
    const HnfNetwork& net, const std::vector<Eigen::MatrixXd>& dws,
    const Eigen::VectorXd& x) {
  if (net.has_front()) {
    throw DimensionError("chain perturbation check needs a pure HNF network");
  }
  const auto& layers = net.layers();
  if (dws.size() != layers.size()) {
    throw DimensionError("need one perturbation per layer");
  }
  Eigen::VectorXd y = x;
  Eigen::VectorXd y_moved = x;
  double product = 1.0;
  double growth = 1.0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& w = layers[l].weight().matrix();
    if (dws[l].rows() != w.rows() || dws[l].cols() != w.cols()) {
      throw DimensionError("perturbation shape does not match layer " +
                           std::to_string(l + 1));
    }
    y = vn_expand(w * y);
    y_moved = vn_expand((w + dws[l]) * y_moved);
    const double fro2 = dws[l].squaredNorm();
    product *= fro2;
    growth *= 1.0 + std::sqrt(fro2);
  }
  ChainPerturbationCheck out;
  const double x2 = x.squaredNorm();
  out.lhs = (y - y_moved).squaredNorm();
  out.product_bound = product * x2;
  out.compounded_bound = (growth - 1.0) * (growth - 1.0) * x2;
  out.product_holds = out.lhs <= out.product_bound * (1.0 + 1e-9);
  out.compounded_holds = out.lhs <= out.compounded_bound * (1.0 + 1e-9);
  return out;
}

}  // namespace hnf

#endif  // HNF_LAYERS_HPP_
