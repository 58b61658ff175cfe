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

// Acceptance run: one PASS / FAIL / SKIP line per criterion, exit status 1
// if anything failed. Letter is read from HNF_TEST_DATA_DIR; Shuttle only
// when HNF_SHUTTLE_CSV points at a copy.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hnf/hnf.hpp"
#include "oracles.hpp"

namespace {

using namespace hnf;
using Clock = std::chrono::steady_clock;

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status = Status::Pass;
  std::string detail;
};

struct Tally {
  int failed = 0;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void report(Tally& tally, const std::string& id, const std::string& title,
            const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {Status::Fail, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
  if (o.status == Status::Fail) ++tally.failed;
  std::printf("[%s] %-3s %s | %s (%.1fs)\n", tag, id.c_str(), title.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

void info(const std::string& text) {
  std::printf("       %s\n", text.c_str());
  std::fflush(stdout);
}

const Dataset& letter() {
  static const Dataset d = load_csv(std::string(HNF_TEST_DATA_DIR) + "/letter.csv");
  return d;
}

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  return make_raw_gaussian(r, c, seed).matrix();
}

HnfNetwork chain(WeightKind kind, Eigen::Index p, Eigen::Index n1, int depth, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.n1 = n1;
  cfg.depth = depth;
  cfg.weight_kind = kind;
  cfg.seed = seed;
  std::vector<HnfLayer> layers;
  Eigen::Index m = p;
  for (int l = 1; l <= depth; ++l) {
    const Eigen::Index n = layer_width(cfg, l, m);
    layers.emplace_back(hnf::detail::make_weight(kind, n, m, layer_seed(cfg, l)));
    m = 2 * n;
  }
  return HnfNetwork(p, std::move(layers));
}

// Every ADMM output seen anywhere in the run, for the feasibility check.
struct FeasibilityLog {
  std::size_t solves = 0;
  double worst_ratio = 0.0;
  void add(const OutputMap& m) {
    if (!std::isfinite(m.epsilon)) return;
    ++solves;
    worst_ratio = std::max(worst_ratio, m.matrix.squaredNorm() / m.epsilon);
  }
};

FeasibilityLog feasibility;

Outcome monotone_cost() {
  const Dataset blobs = make_synthetic_blobs(8, 3, 600, 3.0, 1);
  struct Named {
    const char* name;
    const Dataset* data;
  };
  const std::vector<Named> sets{{"blobs", &blobs}, {"letter", &letter()}};
  int runs = 0;
  int bad = 0;
  double worst = -1e300;
  std::string first_failure;
  for (const auto& set : sets) {
    for (auto kind : {WeightKind::RandomOrthonormal, WeightKind::DctOrthonormal,
                      WeightKind::RawGaussian}) {
      for (auto sched : {EpsSchedule::Exact, EpsSchedule::Doubling}) {
        for (std::uint64_t seed : {1, 2, 3}) {
          TrainConfig cfg;
          cfg.n1 = 16;
          cfg.depth = 4;
          cfg.weight_kind = kind;
          cfg.eps_schedule = sched;
          cfg.seed = seed;
          const auto res = train(*set.data, cfg);
          ++runs;
          for (const auto& m : res.maps) feasibility.add(m);
          const auto recs = res.report.all();
          bool ok = res.report.monotonicity_certified;
          for (std::size_t i = 1; i < recs.size(); ++i) {
            const double prev = recs[i - 1].train_cost;
            const double slack = 1e-8 * (1.0 + prev);
            worst = std::max(worst, recs[i].train_cost - prev);
            ok = ok && recs[i].train_cost <= prev + slack &&
                 recs[i].train_cost <= recs[i].witness_cost + 1e-8 * (1.0 + recs[i].witness_cost);
          }
          if (!ok) {
            ++bad;
            if (first_failure.empty()) {
              first_failure = fmt("%s/%s/%s/seed %d: %s", set.name,
                                  std::string(to_string(kind)).c_str(),
                                  std::string(to_string(sched)).c_str(), int(seed),
                                  res.report.failure.c_str());
            }
          }
        }
      }
    }
  }
  std::string detail = fmt("%d runs (blobs+letter x 3 kinds x 2 schedules x 3 seeds, L=4), "
                           "%d uncertified, largest cost step %+.3g",
                           runs, bad, worst);
  if (!first_failure.empty()) detail += "; first: " + first_failure;
  return {bad == 0 ? Status::Pass : Status::Fail, detail};
}

Outcome norm_preservation() {
  double worst = 0.0;
  for (auto kind : {WeightKind::RandomOrthonormal, WeightKind::DctOrthonormal}) {
    const auto net = chain(kind, 16, 20, 4, 7);
    const Eigen::MatrixXd x = gaussian(16, 1000, 11);
    const Eigen::MatrixXd y = net.features_at(x, 4);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double n0 = x.col(j).squaredNorm();
      worst = std::max(worst, std::abs(y.col(j).squaredNorm() - n0) / n0);
    }
  }
  return {worst <= 1e-9 ? Status::Pass : Status::Fail,
          fmt("1000 inputs x {random, dct}, L=4, worst relative error %.2e (limit 1e-9)", worst)};
}

Outcome distance_sandwich() {
  std::mt19937_64 gen(5);
  std::size_t pairs = 0;
  std::size_t violations = 0;
  std::size_t identity_fail = 0;
  double worst_lower = 1e300;
  double worst_upper = 1e300;
  double worst_identity = 0.0;
  const Eigen::Index p = 8;
  const Eigen::Index batch = 25000;
  for (int depth = 1; depth <= 4; ++depth) {
    const auto kind = depth % 2 ? WeightKind::RandomOrthonormal : WeightKind::DctOrthonormal;
    const auto net = chain(kind, p, 10, depth, 100 + depth);
    Eigen::MatrixXd a = gaussian(p, batch, gen());
    Eigen::MatrixXd b = gaussian(p, batch, gen());
    // Half the pairs are close together, where the sign patterns mostly agree.
    const Eigen::MatrixXd step = gaussian(p, batch / 2, gen());
    for (Eigen::Index j = 0; j < batch / 2; ++j) {
      const double scale = std::pow(10.0, -1.0 - 5.0 * double(j % 97) / 97.0);
      b.col(j) = a.col(j) + scale * step.col(j);
    }
    const Eigen::VectorXd d0 = (a - b).colwise().squaredNorm().transpose();
    for (int l = 1; l <= depth; ++l) {
      const auto& w = net.layers()[static_cast<std::size_t>(l - 1)].weight().matrix();
      const Eigen::MatrixXd za = w * a;
      const Eigen::MatrixXd zb = w * b;
      a = vn_expand(za);
      b = vn_expand(zb);
      const Eigen::VectorXd dl = (a - b).colwise().squaredNorm().transpose();
      const Eigen::VectorXd rhs =
          (0.5 * (za - zb).colwise().squaredNorm() +
           0.5 * (za.cwiseAbs() - zb.cwiseAbs()).colwise().squaredNorm())
              .transpose();
      const Eigen::VectorXd scale =
          (za.colwise().squaredNorm() + zb.colwise().squaredNorm()).transpose();
      for (Eigen::Index j = 0; j < batch; ++j) {
        const double lower = (dl(j) - std::ldexp(d0(j), -l)) / d0(j);
        const double upper = (d0(j) - dl(j)) / d0(j);
        worst_lower = std::min(worst_lower, lower);
        worst_upper = std::min(worst_upper, upper);
        if (lower < -1e-9 || upper < -1e-9) ++violations;
        const double rel = std::abs(dl(j) - rhs(j)) / scale(j);
        worst_identity = std::max(worst_identity, rel);
        if (rel > 1e-12) ++identity_fail;
      }
    }
    pairs += static_cast<std::size_t>(batch);
  }
  const bool ok = violations == 0 && identity_fail == 0;
  return {ok ? Status::Pass : Status::Fail,
          fmt("%zu pairs over L=1..4: %zu bound violations (worst lower margin %.2e, upper %.2e); "
              "exact identity worst relative error %.2e over every layer input (limit 1e-12)",
              pairs, violations, worst_lower, worst_upper, worst_identity)};
}

Outcome invertibility() {
  double worst = 0.0;
  for (auto kind : {WeightKind::RandomOrthonormal, WeightKind::DctOrthonormal}) {
    const auto net = chain(kind, 16, 20, 4, 3);
    const InverseMap inv(net);
    const Eigen::MatrixXd x = gaussian(16, 1000, 17);
    const Eigen::MatrixXd back = inv.apply(net.features_at(x, 4));
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      worst = std::max(worst, (back.col(j) - x.col(j)).norm() / x.col(j).norm());
    }
  }
  return {worst <= 1e-6 ? Status::Pass : Status::Fail,
          fmt("1000 inputs x {random, dct}, L=4, worst relative error %.2e (limit 1e-6)", worst)};
}

Outcome admm_oracle() {
  std::mt19937_64 gen(99);
  double worst = 0.0;
  int bad = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(gen() % 19);
    const Eigen::Index n = 20 + static_cast<Eigen::Index>(gen() % 181);
    const Eigen::Index q = 1 + static_cast<Eigen::Index>(gen() % 6);
    const Eigen::MatrixXd y = gaussian(d, n, gen());
    const Eigen::MatrixXd t = gaussian(q, n, gen());
    const double frac = std::pow(10.0, -2.5 + 3.0 * double(gen() % 1000) / 1000.0);
    const double eps = frac * least_squares(y, t).matrix.squaredNorm();
    AdmmConfig cfg;
    cfg.iterations = 2000;
    const auto m = admm_constrained_ls(y, t, eps, cfg);
    feasibility.add(m);
    const auto ref = oracle::dual_bisection(y, t, eps);
    const double rel = std::abs(m.train_cost - ref.cost) / ref.cost;
    worst = std::max(worst, rel);
    bad += rel > 1e-3;
  }
  return {bad == 0 ? Status::Pass : Status::Fail,
          fmt("50 instances (d<=20, N<=200, 2000 iterations): worst relative gap to the dual "
              "oracle %.2e (limit 1e-3)",
              worst)};
}

Outcome witness_dominance() {
  std::mt19937_64 gen(123);
  int bad = 0;
  int zero_init_bad = 0;
  double worst = -1e300;
  const int instances = 60;
  for (int inst = 0; inst < instances; ++inst) {
    const Eigen::Index m = 3 + static_cast<Eigen::Index>(gen() % 20);
    const Eigen::Index n = m + static_cast<Eigen::Index>(gen() % 10);
    const Eigen::Index samples = 50 + static_cast<Eigen::Index>(gen() % 300);
    const auto kind = inst % 3 == 0   ? WeightKind::DctOrthonormal
                      : inst % 3 == 1 ? WeightKind::RandomOrthonormal
                                      : WeightKind::RawGaussian;
    const Eigen::MatrixXd q = gaussian(m, samples, gen()).cwiseMax(0.0);
    const Eigen::MatrixXd t = gaussian(4, samples, gen());
    const auto prev = least_squares(q, t);
    const WeightMatrix w = hnf::detail::make_weight(kind, n, m, gen());
    const Eigen::MatrixXd y = HnfLayer(w).forward(q);
    const Eigen::MatrixXd wit = embed_previous_map(prev, w);
    const double wit_cost = prediction_cost(wit, y, t);
    const double eps = std::max(embedding_budget(prev.matrix, w), kEpsilonFloor);
    AdmmConfig cfg;
    cfg.penalty = default_penalty(kind);
    const auto out = admm_constrained_ls(y, t, eps, cfg, wit);
    feasibility.add(out);
    worst = std::max(worst, out.train_cost - wit_cost);
    bad += out.train_cost > wit_cost + 1e-8;
    AdmmConfig plain = cfg;
    plain.adaptive = false;
    const auto cold = admm_constrained_ls(y, t, eps, plain);
    feasibility.add(cold);
    zero_init_bad += cold.train_cost > wit_cost + 1e-8;
  }
  info(fmt("reference: fixed penalty with zero initialization loses to the witness on %d of %d",
           zero_init_bad, instances));
  return {bad == 0 ? Status::Pass : Status::Fail,
          fmt("%d layer instances at 100 iterations: %d above witness cost + 1e-8 "
              "(largest excess %+.2e)",
              instances, bad, worst)};
}

Outcome admm_feasibility() {
  const bool ok = feasibility.worst_ratio <= 1.0 + 1e-6;
  return {ok ? Status::Pass : Status::Fail,
          fmt("%zu constrained solves, max ||O||^2/eps = %.12f (limit 1 + 1e-6)",
              feasibility.solves, feasibility.worst_ratio)};
}

Outcome epsilon_identity() {
  std::mt19937_64 gen(31);
  double worst_oracle = 0.0;
  double worst_closed = 0.0;
  for (int s = 0; s < 100; ++s) {
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(gen() % 15);
    const Eigen::Index n = m + static_cast<Eigen::Index>(gen() % 15);
    const Eigen::Index q = 1 + static_cast<Eigen::Index>(gen() % 6);
    const WeightMatrix w = s % 2 ? make_dct_orthonormal(n, m) : make_random_orthonormal(n, m, gen());
    OutputMap prev;
    prev.matrix = gaussian(q, m, gen());
    const double eps = epsilon_next_layer(prev, w);
    const double ref = oracle::materialized_budget(prev.matrix, w.matrix());
    const double scale = std::max(1.0, ref);
    worst_oracle = std::max(worst_oracle, std::abs(eps - ref) / scale);
    worst_closed = std::max(worst_closed, std::abs(eps - 2.0 * prev.matrix.squaredNorm()) / scale);
  }
  const bool ok = worst_oracle <= 1e-10 && worst_closed <= 1e-10;
  return {ok ? Status::Pass : Status::Fail,
          fmt("100 shapes: worst gap to materialized U %.2e, to 2||O||^2 %.2e (limit 1e-10)",
              worst_oracle, worst_closed)};
}

Outcome perturbation_bound() {
  std::mt19937_64 gen(77);
  NormalSource normal(78);
  std::size_t bad = 0;
  double worst = 1e300;
  for (int trial = 0; trial < 10000; ++trial) {
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(gen() % 12);
    const Eigen::Index n = m + static_cast<Eigen::Index>(gen() % 12);
    const HnfLayer layer(trial % 2 ? make_dct_orthonormal(n, m) : make_random_orthonormal(n, m, gen()));
    Eigen::MatrixXd dw(n, m);
    for (auto& v : dw.reshaped()) v = normal();
    dw *= std::pow(10.0, -4.0 + 5.0 * double(gen() % 1000) / 1000.0);
    Eigen::VectorXd q(m);
    for (auto& v : q) v = normal();
    const auto r = weight_perturbation_check(layer, dw, q);
    bad += !r.holds;
    worst = std::min(worst, (r.rhs - r.lhs) / r.rhs);
  }
  return {bad == 0 ? Status::Pass : Status::Fail,
          fmt("10000 trials, %zu violations, smallest relative slack %.2e (rounding-level negatives are within tolerance)", bad, worst)};
}

std::string layer_summary(const TrainReport& rep) {
  std::string s;
  for (const auto& r : rep.all()) {
    s += fmt("%sL%d train %.2f%% test %.2f%%", s.empty() ? "" : ", ", r.layer, 100 * r.train_acc,
             100 * r.test_acc);
  }
  return s;
}

Outcome reproduce(const Dataset& data, double threshold, const char* name) {
  TrainConfig cfg;
  cfg.n1 = 250;
  cfg.depth = 3;
  cfg.weight_kind = WeightKind::RawGaussian;
  cfg.seed = 1;
  const auto res = train(data, cfg);
  for (const auto& m : res.maps) feasibility.add(m);
  const auto recs = res.report.all();
  double worst_drop = -1e300;
  for (std::size_t i = 1; i < recs.size(); ++i) {
    worst_drop = std::max(worst_drop, 100.0 * (recs[i - 1].train_acc - recs[i].train_acc));
  }
  const double test = recs.back().test_acc;
  const bool ok = test >= threshold && worst_drop <= 0.5 && res.report.monotonicity_certified;
  return {ok ? Status::Pass : Status::Fail,
          fmt("%s n1=250 L=3 gaussian weights: final test %.2f%% (need >= %.1f%%), largest "
              "train-accuracy drop %.2f points (limit 0.5); %s",
              name, 100 * test, 100 * threshold, worst_drop, layer_summary(res.report).c_str())};
}

Outcome letter_orthonormal_reference() {
  TrainConfig cfg;
  cfg.n1 = 250;
  cfg.depth = 3;
  cfg.weight_kind = WeightKind::RandomOrthonormal;
  cfg.seed = 1;
  const auto res = train(letter(), cfg);
  info("reference, orthonormal random weights: " + layer_summary(res.report));
  return {Status::Pass, ""};
}

Outcome shuttle() {
  const char* path = std::getenv("HNF_SHUTTLE_CSV");
  if (path == nullptr || *path == '\0') {
    return {Status::Skip, "HNF_SHUTTLE_CSV not set; no Shuttle copy available"};
  }
  return reproduce(load_csv(path), 0.99, "shuttle");
}

Outcome elm_extension() {
  TrainConfig cfg;
  cfg.n1 = 1000;
  cfg.depth = 2;
  cfg.elm_front = true;
  cfg.seed = 1;
  const auto res = train(letter(), cfg);
  for (const auto& m : res.maps) feasibility.add(m);
  const auto& elm = res.report.baseline;
  const auto& l2 = res.report.per_layer.at(0);
  const bool cost_ok = l2.train_cost <= elm.train_cost + 1e-8 * (1.0 + elm.train_cost) &&
                       l2.certified;
  const bool acc_ok = l2.test_acc >= elm.test_acc - 0.005;
  return {cost_ok && acc_ok ? Status::Pass : Status::Fail,
          fmt("letter ELM n1=1000: cost %.5f -> %.5f (certified %s), test %.2f%% -> %.2f%% "
              "(floor %.2f%%)",
              elm.train_cost, l2.train_cost, l2.certified ? "yes" : "no", 100 * elm.test_acc,
              100 * l2.test_acc, 100 * elm.test_acc - 0.5)};
}

}  // namespace

int main() {
  Tally tally;
  std::printf("HNF acceptance run\n");
  report(tally, "1", "monotone training cost", monotone_cost);
  report(tally, "2", "norm preservation", norm_preservation);
  report(tally, "3", "distance sandwich and exact identity", distance_sandwich);
  report(tally, "4", "inversion round trip", invertibility);
  report(tally, "5b", "ADMM vs dual oracle", admm_oracle);
  report(tally, "5c", "ADMM witness dominance", witness_dominance);
  report(tally, "6", "epsilon schedule identity", epsilon_identity);
  report(tally, "7", "weight perturbation bound", perturbation_bound);
  report(tally, "8a", "letter accuracy", [] { return reproduce(letter(), 0.88, "letter"); });
  report(tally, "8b", "shuttle accuracy", shuttle);
  report(tally, "9", "ELM front extension", elm_extension);
  report(tally, "5a", "ADMM feasibility (all solves above)", admm_feasibility);
  if (std::getenv("HNF_ACCEPTANCE_REFERENCE") != nullptr) {
    letter_orthonormal_reference();
  }
  std::printf("%s: %d failed\n", tally.failed == 0 ? "ALL PASSED" : "FAILURES", tally.failed);
  return tally.failed == 0 ? 0 : 1;
}
