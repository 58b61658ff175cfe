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

#ifndef HNF_CLI_HPP_
#define HNF_CLI_HPP_

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hnf/data.hpp"
#include "hnf/error.hpp"
#include "hnf/layers.hpp"
#include "hnf/matrixgen.hpp"
#include "hnf/serialization.hpp"
#include "hnf/trainer.hpp"
#include "hnf/verify.hpp"

namespace hnf::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfig = 2,
  kData = 3,
  kSolver = 4,
  kResource = 5,
};

namespace detail {

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(',', start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::variant<int, std::string> label_column(const std::string& s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && ptr == s.data() + s.size()) return v;
  return s;
}

}  // namespace detail

inline Dataset load_dataset(const DataSource& src) {
  const auto& source = src.source;
  if (source == "blobs") {
    try {
      return make_synthetic_blobs(src.blob_dim, src.blob_classes, src.blob_samples,
                                  src.blob_separation, src.split_seed);
    } catch (const ParameterError& e) {
      throw ConfigError(e.what());
    }
  }
  if (source.rfind("csv:", 0) == 0) {
    const auto parts = detail::split_commas(source.substr(4));
    if (parts.empty() || parts.size() > 2 || parts[0].empty()) {
      throw ConfigError("--data csv:PATH[,TEST_PATH]");
    }
    CsvOptions opt;
    opt.label_column = detail::label_column(src.label_column);
    opt.delimiter = src.delimiter;
    opt.header = src.header;
    opt.train_fraction = src.train_fraction;
    opt.split_seed = src.split_seed;
    if (parts.size() == 2) opt.test_path = parts[1];
    return load_csv(parts[0], opt);
  }
  if (source.rfind("idx:", 0) == 0) {
    const auto parts = detail::split_commas(source.substr(4));
    if (parts.size() == 2) return load_idx(parts[0], parts[1]);
    if (parts.size() == 4) {
      return merge_train_test(load_idx(parts[0], parts[1]), load_idx(parts[2], parts[3]));
    }
    throw ConfigError("--data idx:IMAGES,LABELS[,TEST_IMAGES,TEST_LABELS]");
  }
  throw ConfigError("unknown data source '" + source + "'");
}

// Byte budget from HNF_MEM_BUDGET, if set.
inline std::optional<std::size_t> memory_budget_from_env() {
  const char* raw = std::getenv("HNF_MEM_BUDGET");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  const std::string s(raw);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v == 0) {
    throw ConfigError("HNF_MEM_BUDGET must be a positive byte count, got '" + s + "'");
  }
  return v;
}

// The network train() would build for cfg, without fitting any maps.
inline HnfNetwork build_untrained_network(const TrainConfig& cfg, Eigen::Index input_dim) {
  validate(cfg, input_dim);
  std::optional<ElmFront> front;
  std::vector<HnfLayer> layers;
  Eigen::Index m = input_dim;
  int stage = 1;
  if (cfg.elm_front) {
    front = ElmFront{make_raw_gaussian(cfg.n1, input_dim, layer_seed(cfg, 1)),
                     cfg.elm_activation};
    m = cfg.n1;
    stage = 2;
  }
  for (; stage <= cfg.depth; ++stage) {
    const Eigen::Index n = layer_width(cfg, stage, m);
    layers.emplace_back(hnf::detail::make_weight(cfg.weight_kind, n, m, layer_seed(cfg, stage)));
    m = 2 * n;
  }
  return HnfNetwork(input_dim, std::move(layers), std::move(front));
}

struct ModelArgs {
  TrainConfig cfg;
  std::string weights = "random";
  std::string elm_activation = "relu";
  std::string eps_schedule = "exact";
  std::optional<double> penalty;
  bool no_warm_start = false;
  bool no_adaptive = false;

  TrainConfig resolve() const {
    TrainConfig out = cfg;
    out.weight_kind = parse_weight_kind(weights);
    out.elm_activation = parse_activation(elm_activation);
    out.eps_schedule = parse_eps_schedule(eps_schedule);
    out.admm_penalty = penalty;
    out.warm_start = !no_warm_start;
    out.admm.adaptive = !no_adaptive;
    if (auto b = memory_budget_from_env()) out.memory_budget = *b;
    return out;
  }
};

inline void add_data_options(CLI::App& app, DataSource& src) {
  app.add_option("--data", src.source,
                 "csv:PATH[,TEST] | idx:IMG,LBL[,TIMG,TLBL] | blobs")
      ->capture_default_str();
  app.add_option("--label-col", src.label_column, "CSV label column: index or header name")
      ->capture_default_str();
  app.add_option("--delimiter", src.delimiter, "CSV field delimiter")->capture_default_str();
  app.add_flag("--header", src.header, "CSV has a header row");
  app.add_option("--train-fraction", src.train_fraction,
                 "training share when no test file is given")
      ->capture_default_str();
  app.add_option("--split-seed", src.split_seed, "seed of the train/test shuffle and of blobs")
      ->capture_default_str();
  app.add_option("--blob-dim", src.blob_dim)->capture_default_str();
  app.add_option("--blob-classes", src.blob_classes)->capture_default_str();
  app.add_option("--blob-samples", src.blob_samples)->capture_default_str();
  app.add_option("--blob-separation", src.blob_separation)->capture_default_str();
}

inline void add_model_options(CLI::App& app, ModelArgs& m) {
  app.add_option("--n1", m.cfg.n1, "first-layer width n1")->capture_default_str();
  app.add_option("--depth", m.cfg.depth, "number of layers L")->capture_default_str();
  app.add_option("--weights", m.weights, "random | dct | gaussian")->capture_default_str();
  app.add_option("--seed", m.cfg.seed, "weight seed")->capture_default_str();
  app.add_option("--widths", m.cfg.widths, "explicit widths for layers 2..L");
  app.add_flag("--elm", m.cfg.elm_front, "use an ELM feature layer as layer 1");
  app.add_option("--elm-activation", m.elm_activation, "relu | sigmoid")->capture_default_str();
  app.add_option("--admm-iters", m.cfg.admm.iterations)->capture_default_str();
  app.add_option("--admm-penalty", m.penalty, "default depends on --weights");
  app.add_option("--admm-tol", m.cfg.admm.tolerance, "early stop on residual sum")
      ->capture_default_str();
  app.add_flag("--no-adaptive", m.no_adaptive, "keep the ADMM penalty fixed");
  app.add_flag("--no-warm-start", m.no_warm_start, "start ADMM from zero");
  app.add_option("--eps-schedule", m.eps_schedule, "exact | doubling")->capture_default_str();
  app.add_flag("--standardize", m.cfg.standardize, "standardize features");
}

inline void print_records(std::ostream& out, const std::vector<LayerRecord>& records) {
  out << std::left << std::setw(6) << "layer" << std::setw(10) << "nodes" << std::setw(14)
      << "epsilon" << std::setw(14) << "train_cost" << std::setw(11) << "train_acc"
      << std::setw(10) << "test_acc" << "admm_iters\n";
  for (const auto& r : records) {
    out << std::left << std::setw(6) << r.layer << std::setw(10) << r.nodes_cumulative
        << std::setw(14) << std::setprecision(6) << r.epsilon << std::setw(14)
        << r.train_cost << std::setw(11) << std::setprecision(4) << r.train_acc
        << std::setw(10) << r.test_acc << r.admm_iters << '\n';
  }
}

inline int cmd_train(const DataSource& src, const ModelArgs& model, const std::string& out_dir,
                     std::ostream& out) {
  const TrainConfig cfg = model.resolve();
  if (cfg.depth < 1) throw ConfigError("depth must be >= 1");
  if (cfg.n1 < 1) throw ConfigError("n1 must be >= 1");
  RunManifest manifest;
  manifest.started_at = detail::utc_now();
  const Dataset data = load_dataset(src);
  TrainResult result = train(data, cfg);

  const fs::path dir(out_dir);
  save_network(dir, result.network, result.maps, cfg.effective_admm());
  write_report_jsonl(result.report, dir / manifest.report_jsonl);
  write_report_csv(result.report.all(), dir / manifest.report_csv);
  save_dataset_meta(data, dir / "data_meta.json");
  manifest.config = cfg;
  manifest.data = src;
  for (int k = 1; k <= cfg.depth; ++k) manifest.layer_seeds.push_back(layer_seed(cfg, k));
  manifest.monotonicity_certified = result.report.monotonicity_certified;
  manifest.finished_at = detail::utc_now();
  save_run_manifest(manifest, dir / kRunManifest);

  print_records(out, result.report.all());
  if (!result.report.monotonicity_certified) {
    throw CertificationError("monotone cost not certified: " + result.report.failure);
  }
  out << "wrote " << dir.string() << '\n';
  return kOk;
}

struct LoadedRun {
  RunManifest manifest;
  LoadedNetwork net;
  Dataset data;
};

inline LoadedRun load_run(const std::string& run_dir) {
  const fs::path dir(run_dir);
  if (!fs::exists(dir / kRunManifest)) {
    throw DataError("no run manifest at " + (dir / kRunManifest).string());
  }
  RunManifest m = load_run_manifest(dir / kRunManifest);
  LoadedNetwork net = load_network(dir);
  Dataset data = load_dataset(m.data);
  if (m.config.standardize) data = standardize(data);
  return {std::move(m), std::move(net), std::move(data)};
}

inline int cmd_eval(const std::string& run_dir, std::optional<int> layer, std::ostream& out) {
  const LoadedRun run = load_run(run_dir);
  const auto& net = run.net.network;
  const int depth = net.depth();
  if (layer && (*layer < 0 || *layer > depth)) {
    throw StateError("--layer " + std::to_string(*layer) + " outside 0.." +
                     std::to_string(depth));
  }
  out << std::left << std::setw(6) << "layer" << std::setw(16) << "train_cost"
      << std::setw(12) << "train_acc" << std::setw(16) << "test_cost" << "test_acc\n";
  for (const auto& m : run.net.maps) {
    if (layer && m.layer_index != *layer && !(*layer == 0 && net.has_front())) continue;
    const auto tr = evaluate(net, run.net.maps, run.data, m.layer_index, Split::Train);
    const auto te = evaluate(net, run.net.maps, run.data, m.layer_index, Split::Test);
    out << std::left << std::setw(6) << m.layer_index << std::setw(16)
        << std::setprecision(10) << tr.cost << std::setw(12) << std::setprecision(6)
        << tr.accuracy << std::setw(16) << std::setprecision(10) << te.cost
        << std::setprecision(6) << te.accuracy << '\n';
  }
  return kOk;
}

inline int cmd_verify(const std::optional<std::string>& run_dir, const DataSource& src,
                      const ModelArgs& model, std::size_t trials, std::uint64_t seed,
                      std::ostream& out) {
  if (trials == 0) throw ConfigError("--trials must be >= 1");
  std::optional<HnfNetwork> net;
  std::optional<Dataset> data;
  if (run_dir) {
    LoadedRun run = load_run(*run_dir);
    net.emplace(std::move(run.net.network));
    data.emplace(std::move(run.data));
  } else {
    const TrainConfig cfg = model.resolve();
    data.emplace(load_dataset(src));
    if (cfg.standardize) data = standardize(*data);
    net.emplace(build_untrained_network(cfg, data->input_dim()));
  }
  const InvariantReport report = verify_invariants(*net, *data, trials, seed);
  out << std::left << std::setw(28) << "check" << std::setw(9) << "trials" << std::setw(12)
      << "violations" << "worst_margin\n";
  for (const auto& c : report.checks) {
    out << std::left << std::setw(28) << c.name;
    if (!c.applicable) {
      out << "skipped (" << c.detail << ")\n";
      continue;
    }
    out << std::setw(9) << c.trials << std::setw(12) << c.violations << std::setprecision(6)
        << c.worst_margin;
    if (!c.detail.empty()) out << "  " << c.detail;
    out << '\n';
  }
  if (!report.all_passed()) throw CertificationError("invariant checks failed");
  return kOk;
}

inline int cmd_curves(const std::string& report_path, const std::string& out_path,
                      std::ostream& out) {
  if (report_path.empty()) throw DataError("--report is empty");
  fs::path path(report_path);
  if (fs::is_directory(path)) path /= "report.jsonl";
  const auto records = read_report_jsonl(path);
  if (out_path.empty() || out_path == "-") {
    write_curves_csv(records, out);
  } else {
    auto file = hnf::detail::open_out(out_path);
    write_curves_csv(records, file);
  }
  return kOk;
}

namespace detail {

// Expands "SUBCOMMAND ... --config FILE ..." by inserting the file's flat
// key=value entries as flags right after the subcommand, so that flags given
// on the command line (later, last one wins) override them.
inline std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  if (args.empty()) return args;
  std::optional<std::string> file;
  std::vector<std::string> rest{args.front()};
  for (std::size_t i = 1; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file");
      file = args[++i];
    } else if (a.rfind("--config=", 0) == 0) {
      file = a.substr(9);
    } else {
      rest.push_back(a);
    }
  }
  if (!file) return args;
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(*file);
  } catch (const CLI::FileError& e) {
    throw DataError(std::string("config file: ") + e.what());
  }
  std::vector<std::string> injected;
  for (const auto& item : items) {
    if (!item.parents.empty() && item.parents != std::vector<std::string>{rest.front()}) {
      throw ConfigError("config file sections are not supported: " + item.fullname());
    }
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (item.inputs.size() == 1) {
      injected.push_back("--" + item.name + "=" + item.inputs.front());
    } else {
      injected.push_back("--" + item.name);
      injected.insert(injected.end(), item.inputs.begin(), item.inputs.end());
    }
  }
  rest.insert(rest.begin() + 1, injected.begin(), injected.end());
  return rest;
}

}  // namespace detail

// Runs one command line; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Layer-wise trained HNF networks"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", std::string(kVersion));

  DataSource src;
  src.source = "blobs";
  ModelArgs model;
  model.cfg.n1 = 16;
  model.cfg.depth = 3;
  std::string out_dir = "hnf_run";
  std::string run_dir;
  std::optional<int> layer;
  std::size_t trials = 1000;
  std::uint64_t verify_seed = 0;
  std::string report_path;
  std::string curves_out;

  auto* train_cmd = app.add_subcommand("train", "train a network layer by layer");
  add_data_options(*train_cmd, src);
  add_model_options(*train_cmd, model);
  train_cmd->add_option("--out", out_dir, "output directory")->capture_default_str();

  std::string config_file;
  for (auto* cmd : {train_cmd}) {
    cmd->add_option("--config", config_file, "flat key=value file; flags override it");
  }

  auto* eval_cmd = app.add_subcommand("eval", "re-evaluate a saved run");
  eval_cmd->add_option("--run", run_dir, "run directory")->required();
  eval_cmd->add_option("--layer", layer, "only this layer");

  auto* verify_cmd = app.add_subcommand("verify", "randomized invariant checks");
  auto* run_opt = verify_cmd->add_option("--run", run_dir, "saved run (default: fresh network)");
  add_data_options(*verify_cmd, src);
  add_model_options(*verify_cmd, model);
  verify_cmd->add_option("--trials", trials)->capture_default_str();
  verify_cmd->add_option("--verify-seed", verify_seed)->capture_default_str();

  verify_cmd->add_option("--config", config_file, "flat key=value file; flags override it");

  auto* curves_cmd = app.add_subcommand("curves", "nodes vs accuracy as CSV");
  curves_cmd->add_option("--report", report_path, "report.jsonl or run directory")->required();
  curves_cmd->add_option("--out", curves_out, "output CSV (default stdout)");

  std::vector<std::string> args(argv + std::min(argc, 1), argv + argc);
  try {
    args = detail::expand_config(args);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  }
  std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(src, model, out_dir, out);
    if (eval_cmd->parsed()) return cmd_eval(run_dir, layer, out);
    if (verify_cmd->parsed()) {
      return cmd_verify(run_opt->count() ? std::optional(run_dir) : std::nullopt, src, model,
                        trials, verify_seed, out);
    }
    if (curves_cmd->parsed()) return cmd_curves(report_path, curves_out, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ParameterError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const StateError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DimensionError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalError& e) {
    err << "solver error: " << e.what() << '\n';
    return kSolver;
  } catch (const ResourceError& e) {
    err << "resource error: " << e.what() << '\n';
    return kResource;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  std::vector<const char*> argv{"hnf"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace hnf::cli

#endif  // HNF_CLI_HPP_
