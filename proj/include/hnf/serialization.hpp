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

#ifndef HNF_SERIALIZATION_HPP_
#define HNF_SERIALIZATION_HPP_

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hnf/error.hpp"
#include "hnf/layers.hpp"
#include "hnf/matrixgen.hpp"
#include "hnf/solvers.hpp"
#include "hnf/trainer.hpp"

namespace hnf {

inline constexpr std::string_view kVersion = "0.3.1";
inline constexpr int kFormatVersion = 1;

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace detail {

template <typename T>
void put_le(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> b;
  std::memcpy(b.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  out.write(reinterpret_cast<const char*>(b.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::string& path) {
  std::array<unsigned char, sizeof(T)> b;
  if (!in.read(reinterpret_cast<char*>(b.data()), sizeof(T))) {
    throw FormatError(path + ": truncated");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  T v;
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

inline std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

inline void expect_magic(std::istream& in, std::string_view magic, const std::string& path) {
  char got[4] = {};
  if (!in.read(got, 4) || std::string_view(got, 4) != magic) {
    throw FormatError(path + ": bad magic, expected " + std::string(magic));
  }
}

inline void write_dense(std::ostream& out, const Eigen::MatrixXd& m) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_le<double>(out, m(i, j));
  }
}

inline Eigen::MatrixXd read_dense(std::istream& in, const std::string& path) {
  const auto rows = get_le<std::uint32_t>(in, path);
  const auto cols = get_le<std::uint32_t>(in, path);
  if (rows == 0 || cols == 0) throw FormatError(path + ": empty matrix");
  if (static_cast<std::uint64_t>(rows) * cols > (std::uint64_t{1} << 32)) {
    throw FormatError(path + ": implausible shape");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get_le<double>(in, path);
  }
  if (!m.allFinite()) throw FormatError(path + ": non-finite entries");
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path + ": trailing bytes");
  }
  return m;
}

inline json number_or_null(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

inline double number_or(const json& j, double fallback) {
  return j.is_null() ? fallback : j.get<double>();
}

}  // namespace detail

// Weight file: "HNFW", u8 kind, u8 has_seed, u64 seed, u32 rows, u32 cols,
// then rows*cols little-endian f64 in row-major order.
inline void save_weight(const WeightMatrix& w, const fs::path& path) {
  auto out = detail::open_out(path);
  out.write("HNFW", 4);
  detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(w.kind()));
  detail::put_le<std::uint8_t>(out, w.seed() ? 1 : 0);
  detail::put_le<std::uint64_t>(out, w.seed().value_or(0));
  detail::write_dense(out, w.matrix());
  if (!out) throw DataError("write failed: " + path.string());
}

inline WeightMatrix load_weight(const fs::path& path) {
  auto in = detail::open_in(path);
  const std::string p = path.string();
  detail::expect_magic(in, "HNFW", p);
  const auto kind = detail::get_le<std::uint8_t>(in, p);
  if (kind > static_cast<std::uint8_t>(WeightKind::RawGaussian)) {
    throw FormatError(p + ": unknown weight kind " + std::to_string(kind));
  }
  const auto has_seed = detail::get_le<std::uint8_t>(in, p);
  const auto seed = detail::get_le<std::uint64_t>(in, p);
  Eigen::MatrixXd m = detail::read_dense(in, p);
  try {
    return WeightMatrix(std::move(m), static_cast<WeightKind>(kind),
                        has_seed ? std::optional(seed) : std::nullopt);
  } catch (const DimensionError& e) {
    throw FormatError(p + ": " + e.what());
  }
}

// Map block: "HNFM", u32 rows, u32 cols, row-major f64. Metadata lives in
// the network manifest.
inline void save_map_block(const Eigen::MatrixXd& m, const fs::path& path) {
  auto out = detail::open_out(path);
  out.write("HNFM", 4);
  detail::write_dense(out, m);
  if (!out) throw DataError("write failed: " + path.string());
}

inline Eigen::MatrixXd load_map_block(const fs::path& path) {
  auto in = detail::open_in(path);
  detail::expect_magic(in, "HNFM", path.string());
  return detail::read_dense(in, path.string());
}

inline json to_json(const AdmmConfig& c) {
  return {{"iterations", c.iterations},       {"penalty", c.penalty},
          {"tolerance", c.tolerance},         {"adaptive", c.adaptive},
          {"balance_ratio", c.balance_ratio}, {"max_penalty_step", c.max_penalty_step}};
}

inline AdmmConfig admm_from_json(const json& j) {
  AdmmConfig c;
  c.iterations = j.value("iterations", c.iterations);
  c.penalty = j.value("penalty", c.penalty);
  c.tolerance = j.value("tolerance", c.tolerance);
  c.adaptive = j.value("adaptive", c.adaptive);
  c.balance_ratio = j.value("balance_ratio", c.balance_ratio);
  c.max_penalty_step = j.value("max_penalty_step", c.max_penalty_step);
  return c;
}

inline json to_json(const SolverDiagnostics& d) {
  return {{"solver", d.solver},
          {"iterations", d.iterations},
          {"best_iteration", d.best_iteration},
          {"penalty_updates", d.penalty_updates},
          {"final_penalty", d.final_penalty},
          {"primal_residual", d.primal_residual},
          {"dual_residual", d.dual_residual}};
}

inline json to_json(const TrainConfig& c) {
  json widths = json::array();
  for (auto w : c.widths) widths.push_back(w);
  json j = {{"n1", c.n1},
            {"depth", c.depth},
            {"weights", std::string(to_string(c.weight_kind))},
            {"seed", c.seed},
            {"elm", c.elm_front},
            {"elm_activation", std::string(to_string(c.elm_activation))},
            {"admm", to_json(c.effective_admm())},
            {"eps_schedule", std::string(to_string(c.eps_schedule))},
            {"widths", widths},
            {"memory_budget", c.memory_budget},
            {"warm_start", c.warm_start},
            {"standardize", c.standardize}};
  return j;
}

inline TrainConfig train_config_from_json(const json& j) {
  try {
    TrainConfig c;
    c.n1 = j.at("n1").get<Eigen::Index>();
    c.depth = j.at("depth").get<int>();
    c.weight_kind = parse_weight_kind(j.at("weights").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.elm_front = j.value("elm", false);
    c.elm_activation = parse_activation(j.value("elm_activation", std::string("relu")));
    if (j.contains("admm")) {
      c.admm = admm_from_json(j["admm"]);
      c.admm_penalty = c.admm.penalty;
    }
    c.eps_schedule = parse_eps_schedule(j.value("eps_schedule", std::string("exact")));
    for (const auto& w : j.value("widths", json::array())) c.widths.push_back(w.get<Eigen::Index>());
    c.memory_budget = j.value("memory_budget", kDefaultMemoryBudget);
    c.warm_start = j.value("warm_start", true);
    c.standardize = j.value("standardize", false);
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("train config: ") + e.what());
  }
}

struct LoadedNetwork {
  HnfNetwork network;
  std::vector<OutputMap> maps;
};

inline constexpr std::string_view kNetworkManifest = "network.json";

// Writes weights/, maps/ and network.json under dir. Paths inside the
// manifest are relative to dir.
inline void save_network(const fs::path& dir, const HnfNetwork& net,
                         const std::vector<OutputMap>& maps,
                         const AdmmConfig& solver_config) {
  json layers = json::array();
  auto add_weight = [&](int stage, const WeightMatrix& w, const char* role) {
    const std::string rel = "weights/stage_" + std::to_string(stage) + ".hnfw";
    save_weight(w, dir / rel);
    json e = {{"stage", stage},
              {"role", role},
              {"file", rel},
              {"rows", w.rows()},
              {"cols", w.cols()},
              {"kind", std::string(to_string(w.kind()))}};
    e["seed"] = w.seed() ? json(*w.seed()) : json(nullptr);
    layers.push_back(e);
  };
  int stage = 1;
  json front = nullptr;
  if (net.has_front()) {
    add_weight(stage, net.front()->weight, "elm");
    front = {{"activation", std::string(to_string(net.front()->activation))}};
    ++stage;
  }
  for (const auto& l : net.layers()) add_weight(stage++, l.weight(), "hnf");

  json map_entries = json::array();
  for (const auto& m : maps) {
    const std::string rel = "maps/layer_" + std::to_string(m.layer_index) + ".hnfm";
    save_map_block(m.matrix, dir / rel);
    map_entries.push_back({{"layer_index", m.layer_index},
                           {"file", rel},
                           {"rows", m.matrix.rows()},
                           {"cols", m.matrix.cols()},
                           {"epsilon", detail::number_or_null(m.epsilon)},
                           {"train_cost", m.train_cost},
                           {"diagnostics", to_json(m.diagnostics)}});
  }
  const json doc = {{"format_version", kFormatVersion},
                    {"input_dim", net.input_dim()},
                    {"depth", net.depth()},
                    {"elm_front", front},
                    {"layers", layers},
                    {"maps", map_entries},
                    {"solver_config", to_json(solver_config)}};
  auto out = detail::open_out(dir / kNetworkManifest);
  out << doc.dump(2) << '\n';
}

inline json read_json(const fs::path& path) {
  auto in = detail::open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline LoadedNetwork load_network(const fs::path& dir) {
  const json doc = read_json(dir / kNetworkManifest);
  try {
    if (doc.at("format_version").get<int>() != kFormatVersion) {
      throw FormatError("unsupported network format version");
    }
    std::optional<ElmFront> front;
    std::vector<HnfLayer> layers;
    for (const auto& e : doc.at("layers")) {
      WeightMatrix w = load_weight(dir / e.at("file").get<std::string>());
      if (w.rows() != e.at("rows").get<Eigen::Index>() ||
          w.cols() != e.at("cols").get<Eigen::Index>()) {
        throw FormatError("weight file shape disagrees with manifest at stage " +
                          std::to_string(e.at("stage").get<int>()));
      }
      if (e.at("role").get<std::string>() == "elm") {
        front = ElmFront{std::move(w), parse_activation(doc.at("elm_front")
                                                            .at("activation")
                                                            .get<std::string>())};
      } else {
        layers.emplace_back(std::move(w));
      }
    }
    std::vector<OutputMap> maps;
    for (const auto& e : doc.at("maps")) {
      OutputMap m;
      m.matrix = load_map_block(dir / e.at("file").get<std::string>());
      m.layer_index = e.at("layer_index").get<int>();
      m.epsilon = detail::number_or(e.at("epsilon"), kInfiniteBudget);
      m.train_cost = e.at("train_cost").get<double>();
      m.diagnostics.solver = e.at("diagnostics").value("solver", std::string());
      m.diagnostics.iterations = e.at("diagnostics").value("iterations", 0);
      maps.push_back(std::move(m));
    }
    HnfNetwork net(doc.at("input_dim").get<Eigen::Index>(), std::move(layers),
                   std::move(front));
    return {std::move(net), std::move(maps)};
  } catch (const json::exception& e) {
    throw FormatError((dir / kNetworkManifest).string() + ": " + e.what());
  } catch (const DimensionError& e) {
    throw FormatError((dir / kNetworkManifest).string() + ": " + e.what());
  }
}

// Report schema: one JSON object per line, baseline first.
inline json to_json(const LayerRecord& r) {
  return {{"layer", r.layer},
          {"nodes_cumulative", r.nodes_cumulative},
          {"epsilon", detail::number_or_null(r.epsilon)},
          {"train_cost", r.train_cost},
          {"train_acc", detail::number_or_null(r.train_acc)},
          {"test_acc", detail::number_or_null(r.test_acc)},
          {"admm_iters", r.admm_iters},
          {"wall_ms", r.wall_ms},
          {"witness_cost", detail::number_or_null(r.witness_cost)},
          {"certified", r.certified}};
}

inline LayerRecord layer_record_from_json(const json& j) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  LayerRecord r;
  r.layer = j.at("layer").get<int>();
  r.nodes_cumulative = j.at("nodes_cumulative").get<Eigen::Index>();
  r.epsilon = detail::number_or(j.at("epsilon"), kInfiniteBudget);
  r.train_cost = j.at("train_cost").get<double>();
  r.train_acc = detail::number_or(j.at("train_acc"), nan);
  r.test_acc = detail::number_or(j.at("test_acc"), nan);
  r.admm_iters = j.at("admm_iters").get<int>();
  r.wall_ms = j.at("wall_ms").get<std::int64_t>();
  r.witness_cost = detail::number_or(j.value("witness_cost", json(nullptr)), nan);
  r.certified = j.value("certified", true);
  return r;
}

inline void write_report_jsonl(const TrainReport& report, const fs::path& path) {
  auto out = detail::open_out(path);
  for (const auto& r : report.all()) out << to_json(r).dump() << '\n';
}

inline std::vector<LayerRecord> read_report_jsonl(const fs::path& path) {
  auto in = detail::open_in(path);
  std::vector<LayerRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(layer_record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty()) throw FormatError(path.string() + ": report is empty");
  return out;
}

// Shortest round-trip text for a double; empty for NaN, "inf" for infinity.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline constexpr std::string_view kReportCsvHeader =
    "layer,nodes_cumulative,epsilon,train_cost,train_acc,test_acc,admm_iters,wall_ms";

inline void write_report_csv(const std::vector<LayerRecord>& records, const fs::path& path) {
  auto out = detail::open_out(path);
  out << kReportCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.layer << ',' << r.nodes_cumulative << ',' << format_number(r.epsilon) << ','
        << format_number(r.train_cost) << ',' << format_number(r.train_acc) << ','
        << format_number(r.test_acc) << ',' << r.admm_iters << ',' << r.wall_ms << '\n';
  }
}

// Curve data: model size against accuracy, one row per report record.
inline void write_curves_csv(const std::vector<LayerRecord>& records, std::ostream& out) {
  out << "layer,nodes_cumulative,train_acc,test_acc,train_cost\n";
  for (const auto& r : records) {
    out << r.layer << ',' << r.nodes_cumulative << ',' << format_number(r.train_acc) << ','
        << format_number(r.test_acc) << ',' << format_number(r.train_cost) << '\n';
  }
}

// Where the data came from, enough to load it again.
struct DataSource {
  std::string source;  // csv:PATH[,TEST] | idx:IMG,LBL[,TIMG,TLBL] | blobs
  std::string label_column = "-1";
  char delimiter = ',';
  bool header = false;
  double train_fraction = 2.0 / 3.0;
  std::uint64_t split_seed = 0;
  Eigen::Index blob_dim = 8;
  int blob_classes = 3;
  Eigen::Index blob_samples = 600;
  double blob_separation = 4.0;
};

inline json to_json(const DataSource& s) {
  return {{"source", s.source},
          {"label_column", s.label_column},
          {"delimiter", std::string(1, s.delimiter)},
          {"header", s.header},
          {"train_fraction", s.train_fraction},
          {"split_seed", s.split_seed},
          {"blob_dim", s.blob_dim},
          {"blob_classes", s.blob_classes},
          {"blob_samples", s.blob_samples},
          {"blob_separation", s.blob_separation}};
}

inline DataSource data_source_from_json(const json& j) {
  try {
    DataSource s;
    s.source = j.at("source").get<std::string>();
    s.label_column = j.value("label_column", s.label_column);
    const auto d = j.value("delimiter", std::string(","));
    s.delimiter = d.empty() ? ',' : d[0];
    s.header = j.value("header", false);
    s.train_fraction = j.value("train_fraction", s.train_fraction);
    s.split_seed = j.value("split_seed", s.split_seed);
    s.blob_dim = j.value("blob_dim", s.blob_dim);
    s.blob_classes = j.value("blob_classes", s.blob_classes);
    s.blob_samples = j.value("blob_samples", s.blob_samples);
    s.blob_separation = j.value("blob_separation", s.blob_separation);
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("data source: ") + e.what());
  }
}

struct RunManifest {
  TrainConfig config;
  DataSource data;
  std::string network = std::string(kNetworkManifest);
  std::string report_jsonl = "report.jsonl";
  std::string report_csv = "report.csv";
  std::string started_at;
  std::string finished_at;
  std::string version = std::string(kVersion);
  std::vector<std::uint64_t> layer_seeds;
  bool monotonicity_certified = true;
};

inline constexpr std::string_view kRunManifest = "run.json";

inline json to_json(const RunManifest& m) {
  return {{"format_version", kFormatVersion},
          {"version", m.version},
          {"config", to_json(m.config)},
          {"data", to_json(m.data)},
          {"artifacts",
           {{"network", m.network},
            {"report_jsonl", m.report_jsonl},
            {"report_csv", m.report_csv}}},
          {"started_at", m.started_at},
          {"finished_at", m.finished_at},
          {"layer_seeds", m.layer_seeds},
          {"monotonicity_certified", m.monotonicity_certified}};
}

inline RunManifest run_manifest_from_json(const json& j) {
  try {
    RunManifest m;
    m.version = j.at("version").get<std::string>();
    m.config = train_config_from_json(j.at("config"));
    m.data = data_source_from_json(j.at("data"));
    const auto& a = j.at("artifacts");
    m.network = a.at("network").get<std::string>();
    m.report_jsonl = a.at("report_jsonl").get<std::string>();
    m.report_csv = a.at("report_csv").get<std::string>();
    m.started_at = j.value("started_at", std::string());
    m.finished_at = j.value("finished_at", std::string());
    m.layer_seeds = j.value("layer_seeds", std::vector<std::uint64_t>{});
    m.monotonicity_certified = j.value("monotonicity_certified", true);
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("run manifest: ") + e.what());
  }
}

inline void save_run_manifest(const RunManifest& m, const fs::path& path) {
  auto out = detail::open_out(path);
  out << to_json(m).dump(2) << '\n';
}

inline RunManifest load_run_manifest(const fs::path& path) {
  return run_manifest_from_json(read_json(path));
}

// JSON sidecar describing a dataset.
inline void save_dataset_meta(const Dataset& d, const fs::path& path) {
  const auto& m = d.meta();
  const json doc = {{"name", m.name},
                    {"source", m.source},
                    {"class_names", m.class_names},
                    {"split_seed", m.split_seed},
                    {"standardized", m.standardized},
                    {"input_dim", d.input_dim()},
                    {"num_classes", d.num_classes()},
                    {"n_train", d.n_train()},
                    {"n_test", d.n_test()}};
  auto out = detail::open_out(path);
  out << doc.dump(2) << '\n';
}

}  // namespace hnf

#endif  // HNF_SERIALIZATION_HPP_
