#pragma once

// Labeled sample sets and their CSV form:
//   x_1,...,x_n,label,split
//   0.125,...,0.5,safe,train
// Values are written with 17 significant digits so files round-trip exactly.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nnv/errors.hpp"
#include "nnv/mlp.hpp"

namespace nnv {

enum class Split { Train, Test };

inline const char* to_string(Split s) { return s == Split::Train ? "train" : "test"; }

struct Dataset {
  Matrix inputs;  // one row per sample
  std::vector<ClassLabel> labels;
  std::vector<Split> split;

  int size() const { return static_cast<int>(labels.size()); }
  int dim() const { return static_cast<int>(inputs.cols()); }
  Vector row(int i) const { return inputs.row(i).transpose(); }

  void validate() const {
    if (inputs.rows() != static_cast<Eigen::Index>(labels.size()) || labels.size() != split.size())
      throw ShapeError("dataset columns have inconsistent lengths");
    if (inputs.size() > 0 && (inputs.minCoeff() < -1e-12 || inputs.maxCoeff() > 1.0 + 1e-12))
      throw DataError("dataset inputs leave [0,1]");
  }

  std::vector<int> indices(Split s) const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
      if (split[static_cast<std::size_t>(i)] == s) out.push_back(i);
    return out;
  }

  std::vector<Vector> rows(Split s) const {
    std::vector<Vector> out;
    for (int i : indices(s)) out.push_back(row(i));
    return out;
  }

  std::vector<ClassLabel> labels_of(Split s) const {
    std::vector<ClassLabel> out;
    for (int i : indices(s)) out.push_back(labels[static_cast<std::size_t>(i)]);
    return out;
  }

  int count(ClassLabel c, Split s) const {
    int n = 0;
    for (int i = 0; i < size(); ++i)
      n += labels[static_cast<std::size_t>(i)] == c && split[static_cast<std::size_t>(i)] == s;
    return n;
  }

  void append(const Vector& x, ClassLabel c, Split s) {
    if (size() > 0 && x.size() != dim()) throw ShapeError("appended sample has wrong dimension");
    inputs.conservativeResize(inputs.rows() + 1, x.size());
    inputs.row(inputs.rows() - 1) = x.transpose();
    labels.push_back(c);
    split.push_back(s);
  }
};

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_dataset_csv(const Dataset& d, std::ostream& out) {
  d.validate();
  for (int j = 0; j < d.dim(); ++j) out << "x_" << j + 1 << ',';
  out << "label,split\n";
  for (int i = 0; i < d.size(); ++i) {
    for (int j = 0; j < d.dim(); ++j) out << format_double(d.inputs(i, j)) << ',';
    out << to_string(d.labels[static_cast<std::size_t>(i)]) << ',' << to_string(d.split[static_cast<std::size_t>(i)]) << '\n';
  }
}

inline void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset " + path);
  write_dataset_csv(d, out);
}

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}
}  // namespace detail

inline Dataset read_dataset_csv(std::istream& in, const std::string& source = "dataset") {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv(line);
  const int n = static_cast<int>(header.size()) - 2;
  if (n < 1 || header[header.size() - 2] != "label" || header.back() != "split")
    throw DataError(source + ": header must be x_1,...,x_n,label,split");
  for (int j = 0; j < n; ++j)
    if (header[static_cast<std::size_t>(j)] != "x_" + std::to_string(j + 1))
      throw DataError(source + ": header column " + std::to_string(j + 1) + " should be x_" + std::to_string(j + 1));

  std::vector<double> values;
  Dataset d;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    const std::string where = source + " line " + std::to_string(lineno);
    if (static_cast<int>(cells.size()) != n + 2)
      throw DataError(where + ": expected " + std::to_string(n + 2) + " columns, got " + std::to_string(cells.size()));
    for (int j = 0; j < n; ++j) {
      const auto& c = cells[static_cast<std::size_t>(j)];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || ptr != c.data() + c.size()) throw DataError(where + ": bad number '" + c + "'");
      if (v < -1e-12 || v > 1.0 + 1e-12) throw DataError(where + ": x_" + std::to_string(j + 1) + " outside [0,1]");
      values.push_back(v);
    }
    const auto& lab = cells[static_cast<std::size_t>(n)];
    const auto& sp = cells[static_cast<std::size_t>(n + 1)];
    if (lab == "safe") d.labels.push_back(ClassLabel::Safe);
    else if (lab == "unsafe") d.labels.push_back(ClassLabel::Unsafe);
    else throw DataError(where + ": label must be safe or unsafe, got '" + lab + "'");
    if (sp == "train") d.split.push_back(Split::Train);
    else if (sp == "test") d.split.push_back(Split::Test);
    else throw DataError(where + ": split must be train or test, got '" + sp + "'");
  }
  d.inputs = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(d.labels.size()), n);
  return d;
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path);
  return read_dataset_csv(in, path);
}

}  // namespace nnv
