#pragma once

// Branch and bound over binary variables on top of the simplex solver.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "nnv/errors.hpp"
#include "nnv/lp.hpp"

namespace nnv {

/// min c.v over the LP with the listed variables restricted to {0, 1}.
struct MilpProblem {
  LinearProgram base;
  std::vector<int> binary_vars;

  void validate() const {
    base.validate();
    for (int j : binary_vars) {
      if (j < 0 || j >= base.num_vars()) throw ConfigError("binary variable index out of range");
      const auto uj = static_cast<std::size_t>(j);
      if (base.lower()[uj] < 0.0 || base.upper()[uj] > 1.0)
        throw ConfigError("binary variable " + std::to_string(j) + " is not boxed to [0, 1]");
    }
  }
};

enum class MilpStatus { Optimal, Infeasible, GapReached, NodeLimit, Cutoff };

inline const char* to_string(MilpStatus s) {
  switch (s) {
    case MilpStatus::Optimal: return "optimal";
    case MilpStatus::Infeasible: return "infeasible";
    case MilpStatus::GapReached: return "gap_reached";
    case MilpStatus::NodeLimit: return "node_limit";
    case MilpStatus::Cutoff: return "cutoff";
  }
  return "?";
}

/// A subtree discarded because its relaxation bound could not beat the incumbent.
struct PrunedNode {
  std::vector<std::pair<int, int>> fixings;  // (binary var, value)
  double bound = 0.0;
};

struct MilpSolution {
  MilpStatus status = MilpStatus::Infeasible;
  double objective = kInf;  // incumbent
  double best_bound = kInf;
  double gap = kInf;
  std::vector<double> point;
  long nodes_explored = 0;
  double wall_time = 0.0;  // seconds
  std::vector<PrunedNode> pruned;  // filled in audit mode only

  bool has_incumbent() const { return !point.empty(); }
};

struct MilpOptions {
  double abs_gap_tol = 1e-6;
  double integrality_tol = 1e-6;
  long node_limit = 0;      // 0: unlimited
  double time_limit = 0.0;  // seconds, 0: unlimited
  bool warm_start = true;
  bool audit = false;
  std::string log_path;  // CSV node log when non-empty

  /// Stop as soon as the global bound exceeds this value (status Cutoff).
  double stop_if_bound_above = kInf;
  /// Stop as soon as an incumbent at or below this value is found (status Cutoff).
  double stop_if_objective_at_most = -kInf;

  /// Optional primal heuristic: maps a node's relaxation point to a candidate
  /// full point. Candidates are checked for feasibility before acceptance.
  std::function<std::optional<std::vector<double>>(const std::vector<double>&)> heuristic;
  /// Candidate incumbent checked before the root; ignored when infeasible.
  std::vector<double> initial_point;

  LpOptions lp;
};

namespace detail {

class BranchAndBound {
 public:
  BranchAndBound(const MilpProblem& p, const MilpOptions& o) : p_(p), o_(o), lp_opts_(o.lp) {
    lp_opts_.keep_factor = o.warm_start;
  }

  MilpSolution run() {
    p_.validate();
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
    if (!o_.log_path.empty()) {
      log_.open(o_.log_path);
      if (!log_) throw DataError("cannot open MILP log " + o_.log_path);
      log_ << "node,depth,bound,incumbent\n";
    }

    SimplexSolver solver(p_.base, lp_opts_);
    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    open.push(Node{next_id_++, 0, -kInf, {}, {}, {}});

    MilpSolution out;
    if (!o_.initial_point.empty()) try_incumbent(out, o_.initial_point);
    MilpStatus stop = MilpStatus::Optimal;
    while (!open.empty()) {
      const double global_bound = std::min(open.top().bound, out.objective);
      if (out.objective - global_bound <= o_.abs_gap_tol) break;
      if (out.objective <= o_.stop_if_objective_at_most) { stop = MilpStatus::Cutoff; break; }
      if (global_bound > o_.stop_if_bound_above) { stop = MilpStatus::Cutoff; break; }
      if (o_.node_limit > 0 && out.nodes_explored >= o_.node_limit) { stop = MilpStatus::NodeLimit; break; }
      if (o_.time_limit > 0.0 && elapsed() >= o_.time_limit) { stop = MilpStatus::GapReached; break; }

      Node node = open.top();
      open.pop();
      if (node.bound >= out.objective - o_.abs_gap_tol) {
        record_prune(out, node.fixings, node.bound);
        continue;
      }

      solver.reset_bounds();
      for (auto [j, v] : node.fixings) solver.set_bounds(j, v, v);
      Basis warm;
      const Basis* warm_ptr = nullptr;
      if (o_.warm_start && !node.basis.empty()) {
        warm = node.basis;
        warm.factor = node.factor.lock();
        warm_ptr = &warm;
      }
      auto lp = solver.solve(warm_ptr);
      ++out.nodes_explored;

      if (lp.status == LpStatus::Unbounded) throw ConfigError("MILP relaxation is unbounded");
      if (lp.status == LpStatus::Infeasible) {
        log_node(node, kInf, out.objective);
        continue;
      }
      const double bound = std::max(lp.objective, node.bound);
      log_node(node, bound, out.objective);

      if (o_.heuristic) {
        if (auto cand = o_.heuristic(lp.point)) try_incumbent(out, std::move(*cand));
        if (out.objective <= o_.stop_if_objective_at_most) { stop = MilpStatus::Cutoff; open.push(node_with_bound(node, bound)); break; }
      }
      if (bound >= out.objective - o_.abs_gap_tol) {
        record_prune(out, node.fixings, bound);
        continue;
      }

      const int branch = pick_branch(lp.point);
      if (branch < 0) {
        auto pt = lp.point;
        for (int j : p_.binary_vars) pt[static_cast<std::size_t>(j)] = std::round(pt[static_cast<std::size_t>(j)]);
        out.objective = lp.objective;
        out.point = std::move(pt);
        if (out.objective <= o_.stop_if_objective_at_most) { stop = MilpStatus::Cutoff; break; }
        continue;
      }

      std::weak_ptr<const BasisFactor> factor;
      if (o_.warm_start && lp.basis.factor) {
        cache_.push_back(lp.basis.factor);
        if (cache_.size() > kFactorCache) cache_.pop_front();
        factor = lp.basis.factor;
      }
      lp.basis.factor.reset();
      for (int v : {0, 1}) {
        Node child{next_id_++, node.depth + 1, bound, node.fixings, o_.warm_start ? lp.basis : Basis{}, factor};
        child.fixings.emplace_back(branch, v);
        open.push(std::move(child));
      }
    }

    out.best_bound = open.empty() ? out.objective : std::min(open.top().bound, out.objective);
    if (stop == MilpStatus::Optimal && !open.empty() && out.objective - out.best_bound > o_.abs_gap_tol)
      stop = MilpStatus::GapReached;
    out.status = stop;
    if (stop == MilpStatus::Optimal && !out.has_incumbent()) out.status = MilpStatus::Infeasible;
    out.gap = out.has_incumbent() ? out.objective - out.best_bound : kInf;
    out.wall_time = elapsed();
    return out;
  }

 private:
  static constexpr std::size_t kFactorCache = 16;

  struct Node {
    long id;
    int depth;
    double bound;
    std::vector<std::pair<int, int>> fixings;
    Basis basis;
    std::weak_ptr<const BasisFactor> factor;
  };

  // Lowest bound first; ties go deeper, then to the older node.
  struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
      if (a.bound != b.bound) return a.bound > b.bound;
      if (a.depth != b.depth) return a.depth < b.depth;
      return a.id > b.id;
    }
  };

  static Node node_with_bound(Node n, double bound) {
    n.bound = bound;
    return n;
  }

  int pick_branch(const std::vector<double>& point) const {
    int best = -1;
    double best_frac = o_.integrality_tol;
    for (int j : p_.binary_vars) {
      const double v = point[static_cast<std::size_t>(j)];
      const double frac = std::min(v - std::floor(v), std::ceil(v) - v);
      if (frac > best_frac || (best >= 0 && frac == best_frac && j < best)) {
        best = j;
        best_frac = frac;
      }
    }
    return best;
  }

  void try_incumbent(MilpSolution& out, std::vector<double> cand) const {
    if (static_cast<int>(cand.size()) != p_.base.num_vars()) return;
    for (int j : p_.binary_vars) {
      auto& v = cand[static_cast<std::size_t>(j)];
      if (std::abs(v - std::round(v)) > o_.integrality_tol) return;
      v = std::round(v);
    }
    if (!check_feasible(p_.base, cand, lp_opts_.feasibility_tol).feasible(lp_opts_.feasibility_tol, 1e-9)) return;
    const double obj = p_.base.objective_value(cand);
    if (obj < out.objective) {
      out.objective = obj;
      out.point = std::move(cand);
    }
  }

  void record_prune(MilpSolution& out, const std::vector<std::pair<int, int>>& fixings, double bound) const {
    if (o_.audit) out.pruned.push_back(PrunedNode{fixings, bound});
  }

  void log_node(const Node& n, double bound, double incumbent) {
    if (log_) log_ << n.id << ',' << n.depth << ',' << bound << ',' << incumbent << '\n';
  }

  const MilpProblem& p_;
  const MilpOptions& o_;
  LpOptions lp_opts_;
  long next_id_ = 0;
  std::deque<std::shared_ptr<const BasisFactor>> cache_;
  std::ofstream log_;
};

}  // namespace detail

inline MilpSolution solve_milp(const MilpProblem& p, const MilpOptions& opts = {}) {
  return detail::BranchAndBound(p, opts).run();
}

/// Exhaustive oracle: solves the LP for every 0/1 assignment of the binaries.
inline MilpSolution brute_force_milp(const MilpProblem& p, const LpOptions& lp_opts = {}) {
  p.validate();
  const auto k = p.binary_vars.size();
  if (k > 20) throw ConfigError("brute_force_milp refuses more than 20 binaries");
  const auto t0 = std::chrono::steady_clock::now();
  SimplexSolver solver(p.base, lp_opts);
  MilpSolution out;
  for (unsigned long mask = 0; mask < (1UL << k); ++mask) {
    solver.reset_bounds();
    bool admissible = true;
    for (std::size_t b = 0; b < k; ++b) {
      const double v = static_cast<double>((mask >> b) & 1UL);
      const auto j = static_cast<std::size_t>(p.binary_vars[b]);
      admissible = admissible && p.base.lower()[j] <= v && v <= p.base.upper()[j];
      solver.set_bounds(p.binary_vars[b], v, v);
    }
    if (!admissible) continue;
    auto lp = solver.solve();
    ++out.nodes_explored;
    if (lp.status == LpStatus::Unbounded) throw ConfigError("MILP relaxation is unbounded");
    if (lp.status == LpStatus::Optimal && lp.objective < out.objective) {
      out.objective = lp.objective;
      out.point = std::move(lp.point);
    }
  }
  out.status = out.has_incumbent() ? MilpStatus::Optimal : MilpStatus::Infeasible;
  out.best_bound = out.objective;
  out.gap = out.has_incumbent() ? 0.0 : kInf;
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace nnv
