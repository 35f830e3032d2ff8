#pragma once

// Run configuration for the command-line tool, read from JSON:
//   {"seed": 1, "workers": 0,
//    "paths": {"grid": ..., "dataset": ..., "network": ..., "out": ...},
//    "generate": {"samples": 10000, "train_fraction": 0.85},
//    "train": {"architecture": [4,50,50,50,2], "epochs": 500, "batch_size": 64,
//              "learning_rate": 0.001, "beta1": 0.9, "beta2": 0.999, "eps_adam": 1e-8,
//              "sparsity": 0.8, "prune_start": 100, "prune_end": 400, "prune_step": 10},
//    "verify": {"eps": 0.01, "eps_grid": [...], "power_balance": false,
//               "gap_tol": 1e-6, "time_limit": 0, "resolution": 0.005}}
// Every key is optional. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "nnv/errors.hpp"
#include "nnv/network_io.hpp"
#include "nnv/report.hpp"
#include "nnv/train.hpp"

namespace nnv {

struct RunConfig {
  std::string grid, dataset, network, out;
  std::uint64_t seed = 1;
  int workers = 0;  // 0: all cores

  int samples = 10000;
  double train_fraction = 0.85;

  std::vector<int> architecture{4, 50, 50, 50, 2};
  TrainConfig train;
  double sparsity = 0.8;

  double eps = 0.01;
  std::vector<double> eps_grid{1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1};
  bool power_balance = false;
  double gap_tol = 1e-6;
  double time_limit = 0.0;
  double resolution = 5e-3;

  void validate() const {
    if (samples < 2) throw ConfigError("samples must be at least 2");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0,1)");
    if (!(sparsity >= 0.0 && sparsity < 1.0)) throw ConfigError("sparsity must lie in [0,1)");
    if (!(eps >= 0.0)) throw ConfigError("eps must be non-negative");
    if (eps_grid.empty()) throw ConfigError("eps grid is empty");
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
      if (!(eps_grid[i] > 0.0)) throw ConfigError("eps grid values must be positive");
      if (i > 0 && !(eps_grid[i] > eps_grid[i - 1])) throw ConfigError("eps grid must be strictly ascending");
    }
    if (!(gap_tol >= 0.0)) throw ConfigError("gap_tol must be non-negative");
    if (!(time_limit >= 0.0)) throw ConfigError("time_limit must be non-negative");
    if (!(resolution > 0.0 && resolution <= 0.5)) throw ConfigError("resolution must lie in (0,0.5]");
    if (workers < 0) throw ConfigError("workers must be non-negative");
    train.validate();
  }

  TrainConfig train_config() const {
    TrainConfig c = train;
    c.seed = seed;
    return c;
  }

  /// Everything that influences results. Paths, output location and worker
  /// count are excluded.
  nlohmann::json to_json() const {
    return {{"seed", seed},
            {"generate", {{"samples", samples}, {"train_fraction", train_fraction}}},
            {"train",
             {{"architecture", architecture},
              {"epochs", train.epochs},
              {"batch_size", train.batch_size},
              {"learning_rate", train.learning_rate},
              {"beta1", train.beta1},
              {"beta2", train.beta2},
              {"eps_adam", train.eps_adam},
              {"sparsity", sparsity},
              {"prune_start", train.prune_start},
              {"prune_end", train.prune_end},
              {"prune_step", train.prune_step}}},
            {"verify",
             {{"eps", eps},
              {"eps_grid", eps_grid},
              {"power_balance", power_balance},
              {"gap_tol", gap_tol},
              {"time_limit", time_limit},
              {"resolution", resolution}}}};
  }

  std::string hash() const { return json_hash(to_json()); }
};

namespace detail {
inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ConfigError("unknown config key '" + where + k + "'");
  }
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}
}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    detail::reject_unknown(j, {"seed", "workers", "paths", "generate", "train", "verify"}, "");
    detail::read_key(j, "seed", c.seed);
    detail::read_key(j, "workers", c.workers);
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      detail::reject_unknown(p, {"grid", "dataset", "network", "out"}, "paths.");
      detail::read_key(p, "grid", c.grid);
      detail::read_key(p, "dataset", c.dataset);
      detail::read_key(p, "network", c.network);
      detail::read_key(p, "out", c.out);
    }
    if (j.contains("generate")) {
      const auto& g = j.at("generate");
      detail::reject_unknown(g, {"samples", "train_fraction"}, "generate.");
      detail::read_key(g, "samples", c.samples);
      detail::read_key(g, "train_fraction", c.train_fraction);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      detail::reject_unknown(t,
                             {"architecture", "epochs", "batch_size", "learning_rate", "beta1", "beta2", "eps_adam",
                              "sparsity", "prune_start", "prune_end", "prune_step"},
                             "train.");
      detail::read_key(t, "architecture", c.architecture);
      detail::read_key(t, "epochs", c.train.epochs);
      detail::read_key(t, "batch_size", c.train.batch_size);
      detail::read_key(t, "learning_rate", c.train.learning_rate);
      detail::read_key(t, "beta1", c.train.beta1);
      detail::read_key(t, "beta2", c.train.beta2);
      detail::read_key(t, "eps_adam", c.train.eps_adam);
      detail::read_key(t, "sparsity", c.sparsity);
      detail::read_key(t, "prune_start", c.train.prune_start);
      detail::read_key(t, "prune_end", c.train.prune_end);
      detail::read_key(t, "prune_step", c.train.prune_step);
    }
    if (j.contains("verify")) {
      const auto& v = j.at("verify");
      detail::reject_unknown(v, {"eps", "eps_grid", "power_balance", "gap_tol", "time_limit", "resolution"}, "verify.");
      detail::read_key(v, "eps", c.eps);
      detail::read_key(v, "eps_grid", c.eps_grid);
      detail::read_key(v, "power_balance", c.power_balance);
      detail::read_key(v, "gap_tol", c.gap_tol);
      detail::read_key(v, "time_limit", c.time_limit);
      detail::read_key(v, "resolution", c.resolution);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  if (!std::filesystem::exists(path)) throw DataError("config file " + path + " does not exist");
  return config_from_json(read_json_file(path));
}

}  // namespace nnv
