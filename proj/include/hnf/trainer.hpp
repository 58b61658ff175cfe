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

#ifndef HNF_TRAINER_HPP_
#define HNF_TRAINER_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hnf/data.hpp"
#include "hnf/error.hpp"
#include "hnf/layers.hpp"
#include "hnf/matrixgen.hpp"
#include "hnf/rng.hpp"
#include "hnf/solvers.hpp"

namespace hnf {

enum class EpsSchedule { Exact, Doubling };

inline std::string_view to_string(EpsSchedule s) {
  return s == EpsSchedule::Exact ? "exact" : "doubling";
}

inline EpsSchedule parse_eps_schedule(std::string_view name) {
  if (name == "exact") return EpsSchedule::Exact;
  if (name == "doubling") return EpsSchedule::Doubling;
  throw ConfigError("unknown eps schedule '" + std::string(name) + "'");
}

struct TrainConfig {
  Eigen::Index n1 = 0;  // first-layer width n^(1) before the V expansion
  int depth = 1;        // L, counting the ELM front when present
  WeightKind weight_kind = WeightKind::RandomOrthonormal;
  std::uint64_t seed = 0;
  bool elm_front = false;
  Activation elm_activation = Activation::ReLU;
  AdmmConfig admm;
  // Overrides admm.penalty; unset selects default_penalty(weight_kind).
  std::optional<double> admm_penalty;
  EpsSchedule eps_schedule = EpsSchedule::Exact;
  // Explicit n^(l) for l >= 2, in order. Empty means n^(l) = m^(l).
  std::vector<Eigen::Index> widths;
  std::size_t memory_budget = kDefaultMemoryBudget;
  // Start ADMM from the embedded witness of the previous layer.
  bool warm_start = true;
  bool standardize = false;

  AdmmConfig effective_admm() const {
    AdmmConfig out = admm;
    out.penalty = admm_penalty.value_or(default_penalty(weight_kind));
    return out;
  }
};

// Slack on the non-increasing cost check: a <= b + kCostSlack * (1 + b).
inline constexpr double kCostSlack = 1e-8;

inline bool cost_not_above(double a, double b) {
  return a <= b + kCostSlack * (1.0 + std::abs(b));
}

inline void validate(const TrainConfig& cfg, Eigen::Index input_dim) {
  if (cfg.depth < 1) throw ConfigError("depth must be >= 1");
  if (cfg.n1 < 1) throw ConfigError("n1 must be >= 1");
  if (!cfg.elm_front && is_orthonormal_kind(cfg.weight_kind) && cfg.n1 < input_dim) {
    throw ConfigError("orthonormal first-layer weights need n1 >= P (n1=" +
                      std::to_string(cfg.n1) + ", P=" + std::to_string(input_dim) +
                      ")");
  }
  if (!cfg.elm_front && cfg.n1 < input_dim) {
    throw ConfigError("first-layer weight must be full column rank, need n1 >= P");
  }
  if (cfg.elm_front && cfg.depth < 1) throw ConfigError("ELM mode needs depth >= 1");
  try {
    validate(cfg.effective_admm());
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (cfg.memory_budget == 0) throw ConfigError("memory budget must be positive");
}

struct LayerRecord {
  int layer = 0;
  Eigen::Index nodes_cumulative = 0;
  double epsilon = kInfiniteBudget;
  double train_cost = 0.0;
  double train_acc = 0.0;
  double test_acc = std::numeric_limits<double>::quiet_NaN();
  int admm_iters = 0;
  std::int64_t wall_ms = 0;
  // Cost of the embedded witness; NaN for the baseline.
  double witness_cost = std::numeric_limits<double>::quiet_NaN();
  bool certified = true;
};

struct TrainReport {
  LayerRecord baseline;
  std::vector<LayerRecord> per_layer;
  bool monotonicity_certified = true;
  std::string failure;  // first certification failure, if any

  // Baseline followed by every layer.
  std::vector<LayerRecord> all() const {
    std::vector<LayerRecord> out{baseline};
    out.insert(out.end(), per_layer.begin(), per_layer.end());
    return out;
  }
};

struct TrainResult {
  HnfNetwork network;
  std::vector<OutputMap> maps;  // baseline first, then one per layer
  TrainReport report;
};

// argmax per column; ties go to the lowest index.
inline std::vector<int> predict_classes(const Eigen::MatrixXd& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.cols()));
  for (Eigen::Index j = 0; j < scores.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < scores.rows(); ++i) {
      if (scores(i, j) > scores(best, j)) best = i;
    }
    out[static_cast<std::size_t>(j)] = static_cast<int>(best);
  }
  return out;
}

inline double accuracy(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& targets) {
  if (scores.cols() == 0) return std::numeric_limits<double>::quiet_NaN();
  const auto pred = predict_classes(scores);
  const auto truth = predict_classes(targets);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

namespace detail {

inline std::size_t bytes_for(Eigen::Index rows, Eigen::Index cols) {
  return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * sizeof(double);
}

// Working set of one layer solve: train/test features of this and the
// previous stage, plus the d x d Gram matrix and its shifted factor.
inline std::size_t layer_working_set(Eigen::Index d_prev, Eigen::Index d,
                                     Eigen::Index n_train, Eigen::Index n_test) {
  return bytes_for(d_prev + d, n_train + n_test) + 3 * bytes_for(d, d);
}

inline WeightMatrix make_weight(WeightKind kind, Eigen::Index n, Eigen::Index m,
                                std::uint64_t seed) {
  switch (kind) {
    case WeightKind::RandomOrthonormal:
      return make_random_orthonormal(n, m, seed);
    case WeightKind::DctOrthonormal:
      return make_dct_orthonormal(n, m);
    case WeightKind::RawGaussian:
      return make_raw_gaussian(n, m, seed);
  }
  throw ConfigError("unknown weight kind");
}

}  // namespace detail

// Width n^(stage) of an HNF layer whose input has dimension m.
inline Eigen::Index layer_width(const TrainConfig& cfg, int stage, Eigen::Index m) {
  if (stage == 1) return cfg.n1;
  const auto idx = static_cast<std::size_t>(stage - 2);
  if (idx < cfg.widths.size()) {
    if (cfg.widths[idx] < m) {
      throw ConfigError("layer " + std::to_string(stage) + " width " +
                        std::to_string(cfg.widths[idx]) +
                        " is below its input dim " + std::to_string(m));
    }
    return cfg.widths[idx];
  }
  return m;
}

inline std::uint64_t layer_seed(const TrainConfig& cfg, int stage) {
  return derive_seed(cfg.seed, static_cast<std::uint64_t>(stage));
}

// Layer-wise training. Each HNF layer solves the ball-constrained least
// squares with a budget that admits the previous predictor through the
// embedded witness; the witness cost bounds the achieved cost, which is what
// certifies the non-increasing cost sequence.
inline TrainResult train(const Dataset& input, const TrainConfig& cfg) {
  validate(cfg, input.input_dim());
  const Dataset data = cfg.standardize ? standardize(input) : input;
  const AdmmConfig admm = cfg.effective_admm();
  using Clock = std::chrono::steady_clock;
  auto elapsed_ms = [](Clock::time_point t0) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count();
  };

  const Eigen::MatrixXd t_train = data.targets(Split::Train);
  const Eigen::MatrixXd t_test = data.targets(Split::Test);
  Eigen::MatrixXd y_train = data.inputs(Split::Train);
  Eigen::MatrixXd y_test = data.inputs(Split::Test);
  const auto n_train = y_train.cols();
  const auto n_test = y_test.cols();

  TrainReport report;
  std::vector<OutputMap> maps;
  std::optional<ElmFront> front;
  std::vector<HnfLayer> layers;
  Eigen::Index nodes = 0;

  auto record_for = [&](const OutputMap& map, Eigen::Index node_count,
                        std::int64_t ms) {
    LayerRecord r;
    r.layer = map.layer_index;
    r.nodes_cumulative = node_count;
    r.epsilon = map.epsilon;
    r.train_cost = map.train_cost;
    r.train_acc = accuracy(map.matrix * y_train, t_train);
    r.test_acc = accuracy(map.matrix * y_test, t_test);
    r.admm_iters = map.diagnostics.solver == "admm" ? map.diagnostics.iterations : 0;
    r.wall_ms = ms;
    return r;
  };

  int first_stage = 1;
  {
    const auto t0 = Clock::now();
    if (cfg.elm_front) {
      if (detail::bytes_for(cfg.n1, n_train + n_test) > cfg.memory_budget) {
        throw ResourceError("layer 1 (ELM) features exceed the memory budget");
      }
      auto w1 = make_raw_gaussian(cfg.n1, data.input_dim(), layer_seed(cfg, 1));
      auto elm = elm_solve(w1, y_train, t_train, cfg.elm_activation);
      front = ElmFront{std::move(w1), cfg.elm_activation};
      y_train = std::move(elm.features);
      y_test = front->forward(y_test);
      nodes = cfg.n1;
      maps.push_back(std::move(elm.map));
      first_stage = 2;
    } else {
      maps.push_back(least_squares(y_train, t_train, 0.0));
    }
    report.baseline = record_for(maps.back(), nodes, elapsed_ms(t0));
  }

  double prev_eps = maps.back().epsilon;
  for (int stage = first_stage; stage <= cfg.depth; ++stage) {
    const auto t0 = Clock::now();
    const Eigen::Index m = y_train.rows();
    const Eigen::Index n = layer_width(cfg, stage, m);
    const Eigen::Index d = 2 * n;
    const std::size_t need = detail::layer_working_set(m, d, n_train, n_test);
    if (need > cfg.memory_budget) {
      throw ResourceError("layer " + std::to_string(stage) + " needs about " +
                          std::to_string(need) + " bytes (feature dim " +
                          std::to_string(d) + "), memory budget is " +
                          std::to_string(cfg.memory_budget));
    }
    HnfLayer layer(detail::make_weight(cfg.weight_kind, n, m, layer_seed(cfg, stage)));
    const OutputMap& prev = maps.back();

    double eps = 0.0;
    Eigen::MatrixXd witness;
    try {
      const double exact = embedding_budget(prev.matrix, layer.weight());
      const bool first_budget = stage == first_stage;
      if (cfg.eps_schedule == EpsSchedule::Exact || first_budget) {
        eps = exact;
      } else {
        // Doubling covers the witness only for orthonormal weights; other
        // kinds keep the exact budget as a floor so the witness stays feasible.
        eps = is_orthonormal_kind(cfg.weight_kind) ? 2.0 * prev_eps
                                                   : std::max(2.0 * prev_eps, exact);
      }
      witness = embed_previous_map(prev.matrix, layer.weight());
    } catch (const NumericalError& e) {
      throw NumericalError("layer " + std::to_string(stage) + ": " + e.what());
    }
    eps = std::max(eps, kEpsilonFloor);

    y_train = layer.forward(y_train);
    y_test = layer.forward(y_test);
    const double witness_cost = prediction_cost(witness, y_train, t_train);
    const bool witness_feasible = witness.squaredNorm() <= eps * (1.0 + 1e-9) + 1e-300;

    OutputMap map;
    try {
      map = admm_constrained_ls(y_train, t_train, eps, admm,
                                cfg.warm_start ? std::optional(witness) : std::nullopt);
    } catch (const Error& e) {
      throw NumericalError("layer " + std::to_string(stage) + ": " + e.what());
    }
    map.layer_index = stage;
    nodes += d;

    LayerRecord rec = record_for(map, nodes, 0);
    rec.witness_cost = witness_cost;
    rec.certified = witness_feasible && cost_not_above(map.train_cost, witness_cost) &&
                    cost_not_above(map.train_cost, prev.train_cost);
    if (!rec.certified && report.monotonicity_certified) {
      report.monotonicity_certified = false;
      report.failure = "layer " + std::to_string(stage) + ": cost " +
                       std::to_string(map.train_cost) + " vs witness " +
                       std::to_string(witness_cost) + " / previous " +
                       std::to_string(prev.train_cost) +
                       (witness_feasible ? "" : " (witness infeasible)");
    }
    prev_eps = eps;
    layers.push_back(std::move(layer));
    maps.push_back(std::move(map));
    rec.wall_ms = elapsed_ms(t0);
    report.per_layer.push_back(rec);
  }

  return TrainResult{HnfNetwork(data.input_dim(), std::move(layers), std::move(front)),
                     std::move(maps), std::move(report)};
}

struct Evaluation {
  double cost = 0.0;
  double accuracy = 0.0;
};

inline const OutputMap& map_for_layer(const std::vector<OutputMap>& maps, int layer) {
  for (const auto& m : maps) {
    if (m.layer_index == layer) return m;
  }
  throw StateError("no trained map for layer " + std::to_string(layer));
}

// Cost and accuracy of the layer's map on (x, t). Layer 0 is the raw input.
inline Evaluation evaluate(const HnfNetwork& net, const std::vector<OutputMap>& maps,
                           const Eigen::MatrixXd& x, const Eigen::MatrixXd& t,
                           int layer) {
  if (layer < 0 || layer > net.depth()) {
    throw StateError("layer " + std::to_string(layer) + " outside 0.." +
                     std::to_string(net.depth()));
  }
  // In ELM mode the baseline sits on the front's features at stage 1.
  if (layer == 0 && net.has_front()) layer = 1;
  const OutputMap& map = map_for_layer(maps, layer);
  const Eigen::MatrixXd y = net.features_at(x, layer);
  if (map.matrix.cols() != y.rows()) {
    throw DimensionError("map for layer " + std::to_string(layer) +
                         " does not match the feature dimension");
  }
  const Eigen::MatrixXd scores = map.matrix * y;
  return {(t - scores).squaredNorm() / static_cast<double>(x.cols()), accuracy(scores, t)};
}

inline Evaluation evaluate(const HnfNetwork& net, const std::vector<OutputMap>& maps,
                           const Dataset& data, int layer, Split split = Split::Train) {
  return evaluate(net, maps, data.inputs(split), data.targets(split), layer);
}

}  // namespace hnf

#endif  // HNF_TRAINER_HPP_
