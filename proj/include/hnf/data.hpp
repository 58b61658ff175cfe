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

#ifndef HNF_DATA_HPP_
#define HNF_DATA_HPP_

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hnf/error.hpp"
#include "hnf/rng.hpp"

namespace hnf {

enum class Split { Train, Test, All };

struct DatasetMeta {
  std::string name;
  std::string source;
  // Class names in index order (first appearance for CSV input).
  std::vector<std::string> class_names;
  std::uint64_t split_seed = 0;
  bool standardized = false;
};

// Inputs X (P x N) paired with one-hot targets T (Q x N) and a train/test
// partition of the columns. Immutable once built.
class Dataset {
 public:
  Dataset(Eigen::MatrixXd x, const std::vector<int>& labels, int num_classes,
          std::vector<Eigen::Index> train, std::vector<Eigen::Index> test,
          DatasetMeta meta)
      : x_(std::move(x)),
        labels_(labels),
        train_(std::move(train)),
        test_(std::move(test)),
        meta_(std::move(meta)) {
    const Eigen::Index n = x_.cols();
    if (n == 0 || x_.rows() == 0) throw DataError("dataset is empty");
    if (static_cast<Eigen::Index>(labels_.size()) != n) {
      throw DataError("label count does not match sample count");
    }
    if (num_classes < 1) throw DataError("dataset needs at least one class");
    if (!x_.allFinite()) throw DataError("dataset contains non-finite inputs");
    t_ = Eigen::MatrixXd::Zero(num_classes, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = labels_[static_cast<std::size_t>(i)];
      if (c < 0 || c >= num_classes) {
        throw DataError("label " + std::to_string(c) + " out of range");
      }
      t_(c, i) = 1.0;
    }
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (const auto* part : {&train_, &test_}) {
      for (Eigen::Index i : *part) {
        if (i < 0 || i >= n) throw DataError("split index out of range");
        if (seen[static_cast<std::size_t>(i)]++) {
          throw DataError("sample " + std::to_string(i) +
                          " appears twice in the split");
        }
      }
    }
    if (train_.size() + test_.size() != static_cast<std::size_t>(n)) {
      throw DataError("train and test splits do not cover every sample");
    }
    if (train_.empty()) throw DataError("training split is empty");
  }

  Eigen::Index input_dim() const { return x_.rows(); }
  Eigen::Index num_classes() const { return t_.rows(); }
  Eigen::Index size() const { return x_.cols(); }
  std::size_t n_train() const { return train_.size(); }
  std::size_t n_test() const { return test_.size(); }

  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::MatrixXd& t() const { return t_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<Eigen::Index>& train_indices() const { return train_; }
  const std::vector<Eigen::Index>& test_indices() const { return test_; }
  const DatasetMeta& meta() const { return meta_; }

  Eigen::MatrixXd inputs(Split s) const { return gather(x_, s); }
  Eigen::MatrixXd targets(Split s) const { return gather(t_, s); }

  std::vector<int> labels(Split s) const {
    if (s == Split::All) return labels_;
    std::vector<int> out;
    for (Eigen::Index i : indices(s)) out.push_back(labels_[static_cast<std::size_t>(i)]);
    return out;
  }

 private:
  const std::vector<Eigen::Index>& indices(Split s) const {
    return s == Split::Train ? train_ : test_;
  }

  Eigen::MatrixXd gather(const Eigen::MatrixXd& m, Split s) const {
    if (s == Split::All) return m;
    const auto& idx = indices(s);
    Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      out.col(static_cast<Eigen::Index>(j)) = m.col(idx[j]);
    }
    return out;
  }

  Eigen::MatrixXd x_;
  Eigen::MatrixXd t_;
  std::vector<int> labels_;
  std::vector<Eigen::Index> train_;
  std::vector<Eigen::Index> test_;
  DatasetMeta meta_;
};

// Seeded Fisher-Yates with j = engine() mod (i + 1). Written out because
// std::shuffle's draw sequence is implementation defined.
inline std::vector<Eigen::Index> seeded_permutation(Eigen::Index n,
                                                    std::uint64_t seed) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 engine(seed);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(engine() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  return perm;
}

struct SplitIndices {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
};

// floor(N * train_fraction) shuffled samples train, the rest test; both
// lists sorted.
inline SplitIndices shuffled_split(Eigen::Index n, double train_fraction,
                                   std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ParameterError("train fraction must lie in (0, 1]");
  }
  auto perm = seeded_permutation(n, seed);
  auto n_train = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * train_fraction));
  n_train = std::max<std::size_t>(n_train, 1);
  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

// Default train share: 2/3, i.e. 13333 of Letter's 20000 rows.
inline constexpr double kDefaultTrainFraction = 2.0 / 3.0;

struct CsvOptions {
  // Column index (negative counts from the end) or a header name.
  std::variant<int, std::string> label_column = -1;
  char delimiter = ',';
  bool header = false;
  // Optional canonical test file; when absent a seeded shuffle splits the
  // rows of the main file.
  std::optional<std::string> test_path;
  double train_fraction = kDefaultTrainFraction;
  std::uint64_t split_seed = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line,
                                                  char delimiter) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> features;
  std::vector<std::string> labels;
};

inline CsvTable read_csv_table(const std::string& path, const CsvOptions& opt,
                               std::optional<std::size_t> expected_fields) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open CSV file '" + path + "'");
  CsvTable table;
  std::string line;
  std::size_t row = 0;
  std::optional<std::size_t> n_fields = expected_fields;
  std::optional<std::size_t> label_idx;
  bool header_pending = opt.header;

  auto resolve_label = [&](const std::vector<std::string_view>& fields) {
    const auto count = fields.size();
    if (const auto* name = std::get_if<std::string>(&opt.label_column)) {
      if (table.header.empty()) {
        throw ParseError("label column given by name but CSV has no header");
      }
      const auto it = std::find(table.header.begin(), table.header.end(), *name);
      if (it == table.header.end()) {
        throw ParseError("label column '" + *name + "' not found in header");
      }
      return static_cast<std::size_t>(it - table.header.begin());
    }
    const int idx = std::get<int>(opt.label_column);
    const long resolved = idx < 0 ? static_cast<long>(count) + idx : idx;
    if (resolved < 0 || resolved >= static_cast<long>(count)) {
      throw ParseError("label column " + std::to_string(idx) +
                       " out of range for " + std::to_string(count) +
                       " fields");
    }
    return static_cast<std::size_t>(resolved);
  };

  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line, opt.delimiter);
    if (header_pending) {
      header_pending = false;
      for (auto f : fields) table.header.emplace_back(f);
      n_fields = fields.size();
      continue;
    }
    if (!n_fields) n_fields = fields.size();
    if (fields.size() != *n_fields) {
      throw ParseError(path + ": row " + std::to_string(row) + ": expected " +
                       std::to_string(*n_fields) + " fields, got " +
                       std::to_string(fields.size()));
    }
    if (fields.size() < 2) {
      throw ParseError(path + ": row " + std::to_string(row) +
                       ": need at least one feature and a label");
    }
    if (!label_idx) label_idx = resolve_label(fields);
    std::vector<double> feats;
    feats.reserve(fields.size() - 1);
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (c == *label_idx) continue;
      const auto v = parse_double(fields[c]);
      if (!v) {
        throw ParseError(path + ": row " + std::to_string(row) + ", column " +
                         std::to_string(c + 1) + ": non-numeric value '" +
                         std::string(fields[c]) + "'");
      }
      feats.push_back(*v);
    }
    table.features.push_back(std::move(feats));
    table.labels.emplace_back(fields[*label_idx]);
  }
  if (in.bad()) throw ParseError("read error on '" + path + "'");
  if (table.features.empty()) throw ParseError(path + ": no data rows");
  return table;
}

}  // namespace detail

// Features parse as reals; labels map to 0..Q-1 in first-appearance order
// (main file first, then the optional test file) and become one-hot targets.
inline Dataset load_csv(const std::string& path, const CsvOptions& opt = {}) {
  auto table = detail::read_csv_table(path, opt, std::nullopt);
  std::optional<detail::CsvTable> test_table;
  if (opt.test_path) {
    CsvOptions test_opt = opt;
    test_opt.header = opt.header;
    test_table = detail::read_csv_table(*opt.test_path, test_opt, std::nullopt);
    if (test_table->features.front().size() != table.features.front().size()) {
      throw ParseError("test CSV has a different feature count");
    }
  }

  const std::size_t p = table.features.front().size();
  const std::size_t n_main = table.features.size();
  const std::size_t n_all = n_main + (test_table ? test_table->features.size() : 0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(n_all));
  std::vector<int> labels;
  labels.reserve(n_all);
  std::map<std::string, int> index_of;
  DatasetMeta meta;
  meta.name = path;
  meta.source = "csv:" + path + (opt.test_path ? "," + *opt.test_path : "");
  meta.split_seed = opt.split_seed;

  std::size_t col = 0;
  auto absorb = [&](const detail::CsvTable& tab) {
    for (std::size_t i = 0; i < tab.features.size(); ++i, ++col) {
      for (std::size_t r = 0; r < p; ++r) {
        x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) = tab.features[i][r];
      }
      const auto [it, inserted] = index_of.try_emplace(
          tab.labels[i], static_cast<int>(meta.class_names.size()));
      if (inserted) meta.class_names.push_back(tab.labels[i]);
      labels.push_back(it->second);
    }
  };
  absorb(table);
  if (test_table) absorb(*test_table);

  SplitIndices split;
  if (test_table) {
    for (std::size_t i = 0; i < n_all; ++i) {
      (i < n_main ? split.train : split.test).push_back(static_cast<Eigen::Index>(i));
    }
  } else {
    split = shuffled_split(static_cast<Eigen::Index>(n_all), opt.train_fraction,
                           opt.split_seed);
  }
  const int q = static_cast<int>(meta.class_names.size());
  return Dataset(std::move(x), labels, q, std::move(split.train),
                 std::move(split.test), std::move(meta));
}

// Writes features (shortest round-trip decimal form) followed by the class
// name, one sample per row in column order.
inline void export_csv(const Dataset& data, const std::string& path,
                       char delimiter = ',') {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write CSV file '" + path + "'");
  std::array<char, 64> buf{};
  for (Eigen::Index j = 0; j < data.size(); ++j) {
    for (Eigen::Index i = 0; i < data.input_dim(); ++i) {
      const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), data.x()(i, j));
      out.write(buf.data(), res.ptr - buf.data());
      out.put(delimiter);
    }
    const int c = data.labels()[static_cast<std::size_t>(j)];
    const auto& names = data.meta().class_names;
    out << (static_cast<std::size_t>(c) < names.size() ? names[static_cast<std::size_t>(c)]
                                                       : std::to_string(c))
        << '\n';
  }
  if (!out) throw DataError("write error on '" + path + "'");
}

namespace detail {

inline std::vector<unsigned char> read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off,
                               const std::string& path) {
  if (off + 4 > b.size()) throw FormatError(path + ": truncated header");
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// MNIST-style IDX pair (big-endian). Pixels are scaled by 1/255; every
// sample lands in the training split.
inline Dataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  const auto img = detail::read_binary(images_path);
  const auto lbl = detail::read_binary(labels_path);
  if (detail::read_be32(img, 0, images_path) != kIdxImageMagic) {
    throw FormatError(images_path + ": bad IDX image magic");
  }
  if (detail::read_be32(lbl, 0, labels_path) != kIdxLabelMagic) {
    throw FormatError(labels_path + ": bad IDX label magic");
  }
  const std::size_t count = detail::read_be32(img, 4, images_path);
  const std::size_t rows = detail::read_be32(img, 8, images_path);
  const std::size_t cols = detail::read_be32(img, 12, images_path);
  const std::size_t label_count = detail::read_be32(lbl, 4, labels_path);
  if (count != label_count) {
    throw FormatError("IDX count mismatch: " + std::to_string(count) +
                      " images vs " + std::to_string(label_count) + " labels");
  }
  if (count == 0 || rows == 0 || cols == 0) throw FormatError("IDX file is empty");
  const std::size_t p = rows * cols;
  if (img.size() < 16 + count * p) throw FormatError(images_path + ": truncated pixel data");
  if (lbl.size() < 8 + count) throw FormatError(labels_path + ": truncated label data");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(count));
  std::vector<int> labels(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t k = 0; k < p; ++k) {
      x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
          static_cast<double>(img[16 + i * p + k]) / 255.0;
    }
    const int label = lbl[8 + i];
    if (label > 9) {
      throw FormatError(labels_path + ": label " + std::to_string(label) +
                        " at index " + std::to_string(i) + " outside 0..9");
    }
    labels[i] = label;
  }
  DatasetMeta meta;
  meta.name = images_path;
  meta.source = "idx:" + images_path + "," + labels_path;
  for (int c = 0; c < 10; ++c) meta.class_names.push_back(std::to_string(c));
  std::vector<Eigen::Index> train(count);
  for (std::size_t i = 0; i < count; ++i) train[i] = static_cast<Eigen::Index>(i);
  return Dataset(std::move(x), labels, 10, std::move(train), {}, std::move(meta));
}

// Concatenates two datasets; the first supplies the training split and the
// second the test split. Class names must agree.
inline Dataset merge_train_test(const Dataset& train, const Dataset& test) {
  if (train.input_dim() != test.input_dim() ||
      train.num_classes() != test.num_classes()) {
    throw DataError("train and test datasets have different shapes");
  }
  Eigen::MatrixXd x(train.input_dim(), train.size() + test.size());
  x << train.x(), test.x();
  std::vector<int> labels = train.labels();
  labels.insert(labels.end(), test.labels().begin(), test.labels().end());
  std::vector<Eigen::Index> tr(static_cast<std::size_t>(train.size()));
  std::vector<Eigen::Index> te(static_cast<std::size_t>(test.size()));
  for (Eigen::Index i = 0; i < train.size(); ++i) tr[static_cast<std::size_t>(i)] = i;
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    te[static_cast<std::size_t>(i)] = train.size() + i;
  }
  DatasetMeta meta = train.meta();
  meta.source += ";" + test.meta().source;
  return Dataset(std::move(x), labels, static_cast<int>(train.num_classes()),
                 std::move(tr), std::move(te), std::move(meta));
}

// Q Gaussian clusters (unit covariance) centred at (separation / sqrt 2) e_k,
// so every pair of means is `separation` apart. Class k owns samples with
// index % Q == k; a seeded shuffle puts floor(2N/3) of them in training.
inline Dataset make_synthetic_blobs(Eigen::Index p, int q, Eigen::Index n,
                                    double separation, std::uint64_t seed) {
  if (p <= 0 || q <= 0 || n <= 0) {
    throw ParameterError("blobs need positive P, Q and N");
  }
  if (q > n) throw ParameterError("blobs need Q <= N");
  if (q > p) throw ParameterError("blobs place means on coordinate axes, need Q <= P");
  if (!(separation >= 0.0) || !std::isfinite(separation)) {
    throw ParameterError("blob separation must be finite and nonnegative");
  }
  NormalSource normal(derive_seed(seed, 1));
  const double offset = separation / std::sqrt(2.0);
  Eigen::MatrixXd x(p, n);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    const int c = static_cast<int>(j % q);
    labels[static_cast<std::size_t>(j)] = c;
    for (Eigen::Index i = 0; i < p; ++i) x(i, j) = normal();
    x(c, j) += offset;
  }
  auto split = shuffled_split(n, kDefaultTrainFraction, derive_seed(seed, 2));
  DatasetMeta meta;
  meta.name = "blobs";
  meta.source = "blobs";
  meta.split_seed = seed;
  for (int c = 0; c < q; ++c) meta.class_names.push_back(std::to_string(c));
  return Dataset(std::move(x), labels, q, std::move(split.train),
                 std::move(split.test), std::move(meta));
}

// Per-feature standardization with statistics from the training split;
// zero-variance features are only centred.
inline Dataset standardize(const Dataset& data) {
  const Eigen::MatrixXd train = data.inputs(Split::Train);
  const Eigen::VectorXd mean = train.rowwise().mean();
  const Eigen::MatrixXd centred = train.colwise() - mean;
  Eigen::VectorXd sd =
      (centred.rowwise().squaredNorm() / static_cast<double>(train.cols())).cwiseSqrt();
  for (Eigen::Index i = 0; i < sd.size(); ++i) {
    if (!(sd(i) > 0.0)) sd(i) = 1.0;
  }
  Eigen::MatrixXd x = (data.x().colwise() - mean).array().colwise() / sd.array();
  DatasetMeta meta = data.meta();
  meta.standardized = true;
  return Dataset(std::move(x), data.labels(), static_cast<int>(data.num_classes()),
                 data.train_indices(), data.test_indices(), std::move(meta));
}

}  // namespace hnf

#endif  // HNF_DATA_HPP_
