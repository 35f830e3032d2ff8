#pragma once

// Grid file (JSON). All powers in MW, reactances in p.u. on base_mva.
//   base_mva      system base
//   buses         [{id, type: "slack" | "pv" | "pq"}]
//   branches      [{from, to (bus ids), x, limit_mw, in_service (default true)}]
//   generators    [{bus, p_min, p_max, slack (default false)}]
//   fixed_loads   [{bus, p_mw}]
//   inputs        [{name, kind: "gen" | "load" | "wind", bus, p_min, p_max}]
//                 the order of this list defines the coordinates of x
//   contingencies [branch index (0-based into branches)]
// Extra top-level keys (name, version) are ignored.

#include <string>

#include <json.hpp>

#include "nnv/errors.hpp"
#include "nnv/grid.hpp"
#include "nnv/network_io.hpp"

namespace nnv {

inline GridModel grid_from_json(const nlohmann::json& j) {
  GridModel g;
  try {
    g.base_mva = j.at("base_mva").get<double>();
    for (const auto& b : j.at("buses")) {
      const auto type = b.at("type").get<std::string>();
      BusType t;
      if (type == "slack") t = BusType::Slack;
      else if (type == "pv") t = BusType::PV;
      else if (type == "pq") t = BusType::PQ;
      else throw DataError("unknown bus type '" + type + "'");
      g.buses.push_back({b.at("id").get<int>(), t});
    }
    for (const auto& b : j.at("branches"))
      g.branches.push_back({b.at("from").get<int>(), b.at("to").get<int>(), b.at("x").get<double>(),
                            b.at("limit_mw").get<double>(), b.value("in_service", true)});
    for (const auto& gen : j.at("generators"))
      g.generators.push_back({gen.at("bus").get<int>(), gen.at("p_min").get<double>(), gen.at("p_max").get<double>(),
                              gen.value("slack", false)});
    for (const auto& l : j.value("fixed_loads", nlohmann::json::array()))
      g.fixed_loads.push_back({l.at("bus").get<int>(), l.at("p_mw").get<double>()});
    for (const auto& in : j.at("inputs")) {
      const auto kind = in.at("kind").get<std::string>();
      InputDim d;
      if (kind == "gen") d.kind = InputKind::Gen;
      else if (kind == "load") d.kind = InputKind::Load;
      else if (kind == "wind") d.kind = InputKind::Wind;
      else throw DataError("unknown input kind '" + kind + "'");
      d.bus = in.at("bus").get<int>();
      d.p_min = in.at("p_min").get<double>();
      d.p_max = in.at("p_max").get<double>();
      d.name = in.value("name", std::string(kind) + "@" + std::to_string(d.bus));
      g.inputs.push_back(std::move(d));
    }
    g.contingencies = j.value("contingencies", std::vector<int>{});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed grid JSON: ") + e.what());
  }
  g.validate();
  return g;
}

inline GridModel load_grid(const std::string& path) { return grid_from_json(read_json_file(path)); }

}  // namespace nnv
