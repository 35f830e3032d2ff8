#pragma once

// JSON interchange for Network:
//   {"input_dim": n,
//    "layers": [{"weights": [[...], ...], "bias": [...]}, ...],
//    "meta": {...}}                         (optional, free-form)
// Weights are row-major with one row per output neuron; the last layer has two
// rows (safe, unsafe).

#include <fstream>
#include <string>

#include <json.hpp>

#include "nnv/errors.hpp"
#include "nnv/mlp.hpp"

namespace nnv {

inline nlohmann::json network_to_json(const Network& net) {
  nlohmann::json j;
  j["input_dim"] = net.input_dim();
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    nlohmann::json jl;
    auto& rows = jl["weights"] = nlohmann::json::array();
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) row.push_back(l.weights(r, c));
      rows.push_back(std::move(row));
    }
    jl["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
    layers.push_back(std::move(jl));
  }
  return j;
}

inline Network network_from_json(const nlohmann::json& j) {
  try {
    const int input_dim = j.at("input_dim").get<int>();
    std::vector<DenseLayer> layers;
    for (const auto& jl : j.at("layers")) {
      const auto& rows = jl.at("weights");
      const auto bias = jl.at("bias").get<std::vector<double>>();
      const auto nrows = static_cast<Eigen::Index>(rows.size());
      const auto ncols = nrows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.at(0).size());
      DenseLayer l{Matrix(nrows, ncols), Vector(static_cast<Eigen::Index>(bias.size()))};
      for (Eigen::Index r = 0; r < nrows; ++r) {
        const auto row = rows.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != ncols)
          throw ShapeError("ragged weight matrix in layer " + std::to_string(layers.size()));
        for (Eigen::Index c = 0; c < ncols; ++c) l.weights(r, c) = row[static_cast<std::size_t>(c)];
      }
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = bias[static_cast<std::size_t>(i)];
      layers.push_back(std::move(l));
    }
    return Network(input_dim, std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed network JSON: ") + e.what());
  }
}

inline void save_network(const Network& net, const std::string& path, const nlohmann::json& meta = {}) {
  auto j = network_to_json(net);
  if (!meta.is_null()) j["meta"] = meta;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write network file " + path);
  out << j.dump(1) << '\n';
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("invalid JSON in " + path + ": " + e.what());
  }
}

inline Network load_network(const std::string& path) { return network_from_json(read_json_file(path)); }

}  // namespace nnv
