#pragma once

// Lossless DC network model, N-1 security labeling and the security
// constrained DC-OPF programs used as ground truth.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "nnv/dataset.hpp"
#include "nnv/errors.hpp"
#include "nnv/lp.hpp"
#include "nnv/mlp.hpp"
#include "nnv/verify.hpp"

namespace nnv {

enum class BusType { Slack, PV, PQ };
enum class InputKind { Gen, Load, Wind };

inline const char* to_string(InputKind k) {
  switch (k) {
    case InputKind::Gen: return "gen";
    case InputKind::Load: return "load";
    case InputKind::Wind: return "wind";
  }
  return "?";
}

struct Bus {
  int id = 0;
  BusType type = BusType::PQ;
};

struct Branch {
  int from = 0;  // bus ids
  int to = 0;
  double x = 0.0;         // reactance, p.u.
  double limit_mw = 0.0;  // symmetric flow limit
  bool in_service = true;
};

struct Generator {
  int bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  bool slack = false;
};

struct FixedLoad {
  int bus = 0;
  double p_mw = 0.0;
};

/// One coordinate of the normalized input vector: P = p_min + x (p_max - p_min).
struct InputDim {
  InputKind kind = InputKind::Load;
  int bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  std::string name;

  double to_mw(double x) const { return p_min + x * (p_max - p_min); }
  double to_unit(double mw) const { return (mw - p_min) / (p_max - p_min); }
  /// Sign of the contribution to the bus injection.
  double sign() const { return kind == InputKind::Load ? -1.0 : 1.0; }
};

class GridModel {
 public:
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<FixedLoad> fixed_loads;
  std::vector<InputDim> inputs;
  std::vector<int> contingencies;  // branch indices

  int num_buses() const { return static_cast<int>(buses.size()); }
  int num_inputs() const { return static_cast<int>(inputs.size()); }

  int bus_index(int id) const {
    for (int i = 0; i < num_buses(); ++i)
      if (buses[static_cast<std::size_t>(i)].id == id) return i;
    throw DataError("unknown bus id " + std::to_string(id));
  }

  const Generator& slack_generator() const {
    for (const auto& g : generators)
      if (g.slack) return g;
    throw DataError("grid has no slack generator");
  }

  void validate() const {
    if (!(base_mva > 0.0)) throw DataError("base_mva must be positive");
    if (buses.empty()) throw DataError("grid has no buses");
    int slack = 0;
    for (const auto& g : generators) {
      slack += g.slack;
      bus_index(g.bus);
      if (!(g.p_min <= g.p_max)) throw DataError("generator at bus " + std::to_string(g.bus) + " has p_min > p_max");
    }
    if (slack != 1) throw DataError("grid needs exactly one slack generator");
    for (std::size_t k = 0; k < branches.size(); ++k) {
      const auto& b = branches[k];
      bus_index(b.from);
      bus_index(b.to);
      if (b.from == b.to) throw DataError("branch " + std::to_string(k) + " is a self loop");
      if (!(b.x > 0.0)) throw DataError("branch " + std::to_string(k) + " needs positive reactance");
      if (!(b.limit_mw > 0.0)) throw DataError("branch " + std::to_string(k) + " needs a positive limit");
    }
    for (const auto& l : fixed_loads) bus_index(l.bus);
    if (inputs.empty()) throw DataError("grid has no input dimensions");
    for (const auto& in : inputs) {
      bus_index(in.bus);
      if (!(in.p_min < in.p_max) || !std::isfinite(in.p_min) || !std::isfinite(in.p_max))
        throw DataError("input '" + in.name + "' needs finite p_min < p_max");
      if (in.kind == InputKind::Gen) {
        const auto it = std::find_if(generators.begin(), generators.end(),
                                     [&](const Generator& g) { return !g.slack && g.bus == in.bus; });
        if (it == generators.end()) throw DataError("input '" + in.name + "' has no non-slack generator at its bus");
        if (in.p_min < it->p_min - 1e-9 || in.p_max > it->p_max + 1e-9)
          throw DataError("input '" + in.name + "' exceeds its generator limits");
      }
    }
    for (const auto& g : generators) {
      if (g.slack) continue;
      const bool dispatched = std::any_of(inputs.begin(), inputs.end(), [&](const InputDim& in) {
        return in.kind == InputKind::Gen && in.bus == g.bus;
      });
      if (!dispatched) throw DataError("generator at bus " + std::to_string(g.bus) + " is not an input dimension");
    }
    for (int c : contingencies)
      if (c < 0 || c >= static_cast<int>(branches.size())) throw DataError("contingency names a missing branch");
    if (!connected(-1)) throw DataError("intact topology is not connected");
  }

  /// Bus injections in MW excluding the slack generator.
  Vector injections(const Vector& x) const {
    if (x.size() != num_inputs()) throw ShapeError("operating point has wrong dimension");
    Vector p = Vector::Zero(num_buses());
    for (int i = 0; i < num_inputs(); ++i) {
      const auto& in = inputs[static_cast<std::size_t>(i)];
      p(bus_index(in.bus)) += in.sign() * in.to_mw(x(i));
    }
    for (const auto& l : fixed_loads) p(bus_index(l.bus)) -= l.p_mw;
    return p;
  }

  /// Physical MW value of every input dimension.
  Vector to_mw(const Vector& x) const {
    Vector p(num_inputs());
    for (int i = 0; i < num_inputs(); ++i) p(i) = inputs[static_cast<std::size_t>(i)].to_mw(x(i));
    return p;
  }

  /// True when branch k carries flow in the given case (-1: intact).
  bool branch_active(int k, int outage) const {
    return k != outage && branches[static_cast<std::size_t>(k)].in_service;
  }

  bool connected(int outage) const {
    const int n = num_buses();
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (int k = 0; k < static_cast<int>(branches.size()); ++k) {
      if (!branch_active(k, outage)) continue;
      const int f = bus_index(branches[static_cast<std::size_t>(k)].from);
      const int t = bus_index(branches[static_cast<std::size_t>(k)].to);
      adj[static_cast<std::size_t>(f)].push_back(t);
      adj[static_cast<std::size_t>(t)].push_back(f);
    }
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int count = 1;
    while (!q.empty()) {
      const int b = q.front();
      q.pop();
      for (int o : adj[static_cast<std::size_t>(b)])
        if (!seen[static_cast<std::size_t>(o)]) {
          seen[static_cast<std::size_t>(o)] = 1;
          ++count;
          q.push(o);
        }
    }
    return count == n;
  }

  /// Cases checked by the N-1 criterion: intact (-1) followed by each contingency.
  std::vector<int> cases() const {
    std::vector<int> c{-1};
    c.insert(c.end(), contingencies.begin(), contingencies.end());
    return c;
  }
};

struct PowerFlowResult {
  bool islanded = false;
  Vector theta;               // rad, slack bus at 0
  std::vector<double> flows;  // MW per branch, from -> to; 0 for inactive branches
  double slack_p = 0.0;       // MW
};

/// DC power flow for one case (outage = -1 for the intact grid).
inline PowerFlowResult dc_power_flow(const GridModel& g, const Vector& x, int outage = -1) {
  if (outage < -1 || outage >= static_cast<int>(g.branches.size())) throw ConfigError("outage index out of range");
  PowerFlowResult r;
  r.flows.assign(g.branches.size(), 0.0);
  const int n = g.num_buses();
  if (!g.connected(outage)) {
    r.islanded = true;
    r.theta = Vector::Zero(n);
    return r;
  }
  const Vector p = g.injections(x);
  const int s = g.bus_index(g.slack_generator().bus);
  Matrix B = Matrix::Zero(n, n);
  for (int k = 0; k < static_cast<int>(g.branches.size()); ++k) {
    if (!g.branch_active(k, outage)) continue;
    const auto& br = g.branches[static_cast<std::size_t>(k)];
    const int f = g.bus_index(br.from), t = g.bus_index(br.to);
    const double b = 1.0 / br.x;
    B(f, f) += b;
    B(t, t) += b;
    B(f, t) -= b;
    B(t, f) -= b;
  }
  std::vector<int> keep;
  for (int i = 0; i < n; ++i)
    if (i != s) keep.push_back(i);
  const auto m = static_cast<Eigen::Index>(keep.size());
  Matrix Br(m, m);
  Vector pr(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    pr(a) = p(keep[static_cast<std::size_t>(a)]) / g.base_mva;
    for (Eigen::Index b = 0; b < m; ++b) Br(a, b) = B(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(b)]);
  }
  const Vector th = Br.partialPivLu().solve(pr);
  r.theta = Vector::Zero(n);
  for (Eigen::Index a = 0; a < m; ++a) r.theta(keep[static_cast<std::size_t>(a)]) = th(a);
  for (int k = 0; k < static_cast<int>(g.branches.size()); ++k) {
    if (!g.branch_active(k, outage)) continue;
    const auto& br = g.branches[static_cast<std::size_t>(k)];
    r.flows[static_cast<std::size_t>(k)] =
        g.base_mva * (r.theta(g.bus_index(br.from)) - r.theta(g.bus_index(br.to))) / br.x;
  }
  r.slack_p = -p.sum();
  return r;
}

inline constexpr double kGridTolMw = 1e-6;

/// Safe iff every case has no islanding, the slack generator within its limits
/// and every active branch within its limit.
inline ClassLabel classify_n1(const GridModel& g, const Vector& x) {
  const auto& slack = g.slack_generator();
  for (int c : g.cases()) {
    const auto pf = dc_power_flow(g, x, c);
    if (pf.islanded) return ClassLabel::Unsafe;
    if (pf.slack_p < slack.p_min - kGridTolMw || pf.slack_p > slack.p_max + kGridTolMw) return ClassLabel::Unsafe;
    for (std::size_t k = 0; k < g.branches.size(); ++k)
      if (std::abs(pf.flows[k]) > g.branches[k].limit_mw + kGridTolMw) return ClassLabel::Unsafe;
  }
  return ClassLabel::Safe;
}

/// The N-1 criterion as precomputed affine rows a.x <= b over normalized x.
/// DC flows are linear in the injections, so this is the same test as
/// classify_n1 at a fraction of the cost; used for large sampling sweeps.
class N1Screen {
 public:
  explicit N1Screen(const GridModel& g) {
    g.validate();
    const int n = g.num_inputs();
    const Vector zero = Vector::Zero(n);
    for (int c : g.cases()) {
      if (!g.connected(c)) {
        always_unsafe_ = true;
        continue;
      }
      const auto base = dc_power_flow(g, zero, c);
      std::vector<PowerFlowResult> unit;
      for (int i = 0; i < n; ++i) unit.push_back(dc_power_flow(g, Vector::Unit(n, i), c));
      auto add = [&](auto value_of, double limit_hi, double limit_lo) {
        Vector a(n);
        const double c0 = value_of(base);
        for (int i = 0; i < n; ++i) a(i) = value_of(unit[static_cast<std::size_t>(i)]) - c0;
        rows_.push_back({a, limit_hi - c0, {}});
        rows_.push_back({-a, c0 - limit_lo, {}});
      };
      const auto& s = g.slack_generator();
      add([](const PowerFlowResult& r) { return r.slack_p; }, s.p_max, s.p_min);
      for (std::size_t k = 0; k < g.branches.size(); ++k) {
        if (!g.branch_active(static_cast<int>(k), c)) continue;
        const double lim = g.branches[k].limit_mw;
        add([k](const PowerFlowResult& r) { return r.flows[k]; }, lim, -lim);
      }
    }
    A_ = Matrix(static_cast<Eigen::Index>(rows_.size()), n);
    b_ = Vector(static_cast<Eigen::Index>(rows_.size()));
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      A_.row(static_cast<Eigen::Index>(r)) = rows_[r].a.transpose();
      b_(static_cast<Eigen::Index>(r)) = rows_[r].b;
    }
  }

  ClassLabel classify(const Vector& x) const {
    if (always_unsafe_) return ClassLabel::Unsafe;
    return ((A_ * x - b_).array() <= kGridTolMw).all() ? ClassLabel::Safe : ClassLabel::Unsafe;
  }

  const std::vector<LinearRow>& rows() const { return rows_; }
  bool always_unsafe() const { return always_unsafe_; }

 private:
  std::vector<LinearRow> rows_;
  Matrix A_;
  Vector b_;
  bool always_unsafe_ = false;
};

/// Latin hypercube sample of the input box labeled by classify_n1. Each
/// dimension gets a seeded permutation of its n strata; rows are shuffled once
/// more before the first round(n * train_fraction) become the training split.
inline Dataset generate_dataset(const GridModel& g, int n_samples, std::uint64_t seed, double train_fraction = 0.85) {
  if (n_samples < 2) throw ConfigError("generate_dataset needs at least 2 samples");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0,1)");
  g.validate();
  const int d = g.num_inputs();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix X(n_samples, d);
  std::vector<int> perm(static_cast<std::size_t>(n_samples));
  for (int j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int i = 0; i < n_samples; ++i)
      X(i, j) = std::min(1.0, (perm[static_cast<std::size_t>(i)] + u(rng)) / n_samples);
  }
  std::vector<int> order(static_cast<std::size_t>(n_samples));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_train = static_cast<int>(std::lround(train_fraction * n_samples));
  Dataset out;
  out.inputs.resize(n_samples, d);
  for (int i = 0; i < n_samples; ++i) {
    const Vector x = X.row(order[static_cast<std::size_t>(i)]).transpose();
    out.inputs.row(i) = x.transpose();
    out.labels.push_back(classify_n1(g, x));
    out.split.push_back(i < n_train ? Split::Train : Split::Test);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Security constrained DC-OPF

/// Variable layout of the preventive SC-DC-OPF LP.
struct ScdcOpf {
  LinearProgram lp;
  std::vector<int> p_in;                  // MW per input dimension, shared by all cases
  std::vector<std::vector<int>> theta;    // per case, per bus (rad)
  std::vector<int> slack_p;               // per case (MW)
  bool islanding = false;                 // some case islands the grid: never secure
};

/// Nodal balance, line limits and generator limits for every case. Non-slack
/// generators, wind and loads are single variables shared by all cases, which
/// is the preventive coupling; only angles and slack output vary per case.
inline ScdcOpf build_scdcopf(const GridModel& g) {
  g.validate();
  ScdcOpf m;
  auto& lp = m.lp;
  for (const auto& in : g.inputs) m.p_in.push_back(lp.add_variable(in.p_min, in.p_max, 0.0, "P_" + in.name));
  const auto& slack = g.slack_generator();
  const int sb = g.bus_index(slack.bus);
  Vector fixed = Vector::Zero(g.num_buses());
  for (const auto& l : g.fixed_loads) fixed(g.bus_index(l.bus)) -= l.p_mw;
  for (int c : g.cases()) {
    m.islanding = m.islanding || !g.connected(c);
    const std::string tag = c < 0 ? "intact" : "out" + std::to_string(c);
    std::vector<int> th;
    for (int b = 0; b < g.num_buses(); ++b) {
      const double lim = b == sb ? 0.0 : kInf;
      th.push_back(lp.add_variable(-lim, lim, 0.0, "theta_" + tag + "_" + std::to_string(g.buses[static_cast<std::size_t>(b)].id)));
    }
    const int ps = lp.add_variable(slack.p_min, slack.p_max, 0.0, "Pslack_" + tag);
    // base * sum_k (theta_f - theta_t)/x_k leaving each bus equals its injection.
    std::vector<std::vector<LinearTerm>> balance(static_cast<std::size_t>(g.num_buses()));
    for (int k = 0; k < static_cast<int>(g.branches.size()); ++k) {
      if (!g.branch_active(k, c)) continue;
      const auto& br = g.branches[static_cast<std::size_t>(k)];
      const int f = g.bus_index(br.from), t = g.bus_index(br.to);
      const double s = g.base_mva / br.x;
      balance[static_cast<std::size_t>(f)].push_back({th[static_cast<std::size_t>(f)], s});
      balance[static_cast<std::size_t>(f)].push_back({th[static_cast<std::size_t>(t)], -s});
      balance[static_cast<std::size_t>(t)].push_back({th[static_cast<std::size_t>(t)], s});
      balance[static_cast<std::size_t>(t)].push_back({th[static_cast<std::size_t>(f)], -s});
      lp.add_constraint({{th[static_cast<std::size_t>(f)], s}, {th[static_cast<std::size_t>(t)], -s}}, Relation::LessEqual,
                        br.limit_mw, "flow_hi_" + tag + "_" + std::to_string(k));
      lp.add_constraint({{th[static_cast<std::size_t>(f)], s}, {th[static_cast<std::size_t>(t)], -s}},
                        Relation::GreaterEqual, -br.limit_mw, "flow_lo_" + tag + "_" + std::to_string(k));
    }
    for (int b = 0; b < g.num_buses(); ++b) {
      auto terms = balance[static_cast<std::size_t>(b)];
      for (int i = 0; i < g.num_inputs(); ++i) {
        const auto& in = g.inputs[static_cast<std::size_t>(i)];
        if (g.bus_index(in.bus) == b) terms.push_back({m.p_in[static_cast<std::size_t>(i)], -in.sign()});
      }
      if (b == sb) terms.push_back({ps, -1.0});
      lp.add_constraint(std::move(terms), Relation::Equal, fixed(b), "balance_" + tag + "_" + std::to_string(g.buses[static_cast<std::size_t>(b)].id));
    }
    m.theta.push_back(std::move(th));
    m.slack_p.push_back(ps);
  }
  return m;
}

struct GroundTruthResult {
  bool feasible = false;
  double value = kInf;  // normalized units
  double mw = kInf;     // physical value where meaningful
  Vector x;             // normalized operating point achieving the optimum
  LpSolution lp;
};

namespace detail {
inline Vector unit_point(const GridModel& g, const ScdcOpf& m, const std::vector<double>& point) {
  Vector x(g.num_inputs());
  for (int i = 0; i < g.num_inputs(); ++i)
    x(i) = g.inputs[static_cast<std::size_t>(i)].to_unit(point[static_cast<std::size_t>(m.p_in[static_cast<std::size_t>(i)])]);
  return x;
}
}  // namespace detail

/// Infinity-norm distance (normalized units) from x_ref to the nearest N-1 secure point.
inline GroundTruthResult scdcopf_ground_truth_distance(const GridModel& g, const Vector& x_ref) {
  if (x_ref.size() != g.num_inputs()) throw ShapeError("reference point has wrong dimension");
  auto m = build_scdcopf(g);
  GroundTruthResult r;
  if (m.islanding) return r;
  auto& lp = m.lp;
  const int eps = lp.add_variable(0.0, kInf, 1.0, "eps");
  for (int i = 0; i < g.num_inputs(); ++i) {
    const auto& in = g.inputs[static_cast<std::size_t>(i)];
    const double range = in.p_max - in.p_min;
    const int p = m.p_in[static_cast<std::size_t>(i)];
    lp.add_constraint({{p, 1.0}, {eps, -range}}, Relation::LessEqual, in.to_mw(x_ref(i)), "dist_hi_" + in.name);
    lp.add_constraint({{p, 1.0}, {eps, range}}, Relation::GreaterEqual, in.to_mw(x_ref(i)), "dist_lo_" + in.name);
  }
  r.lp = solve_lp(lp);
  if (r.lp.status != LpStatus::Optimal) return r;
  r.feasible = true;
  r.value = r.mw = r.lp.objective;
  r.x = detail::unit_point(g, m, r.lp.point);
  return r;
}

/// Largest secure value of one input dimension. `upper_override` replaces that
/// dimension's p_max (kInf allowed) for relaxation studies; `value` stays in the
/// original normalization.
inline GroundTruthResult max_input_ground_truth(const GridModel& g, int dim,
                                                std::optional<double> upper_override = std::nullopt) {
  if (dim < 0 || dim >= g.num_inputs()) throw ConfigError("input dimension out of range");
  auto m = build_scdcopf(g);
  GroundTruthResult r;
  if (m.islanding) return r;
  const int p = m.p_in[static_cast<std::size_t>(dim)];
  if (upper_override) m.lp.set_bounds(p, g.inputs[static_cast<std::size_t>(dim)].p_min, *upper_override);
  m.lp.set_cost(p, -1.0);
  r.lp = solve_lp(m.lp);
  if (r.lp.status == LpStatus::Unbounded) {
    r.feasible = true;
    return r;
  }
  if (r.lp.status != LpStatus::Optimal) return r;
  r.feasible = true;
  r.mw = r.lp.point[static_cast<std::size_t>(p)];
  r.value = g.inputs[static_cast<std::size_t>(dim)].to_unit(r.mw);
  r.x = detail::unit_point(g, m, r.lp.point);
  return r;
}

/// Maximum wind infeed; `wind_dim` must be a wind input.
inline GroundTruthResult max_wind_ground_truth(const GridModel& g, int wind_dim,
                                               std::optional<double> upper_override = std::nullopt) {
  if (wind_dim < 0 || wind_dim >= g.num_inputs() || g.inputs[static_cast<std::size_t>(wind_dim)].kind != InputKind::Wind)
    throw ConfigError("dimension " + std::to_string(wind_dim) + " is not a wind input");
  return max_input_ground_truth(g, wind_dim, upper_override);
}

struct SamplingEstimate {
  double radius = 0.0;         // largest all-safe lattice radius
  bool covers_box = false;     // every lattice point in the box is safe
  long points_checked = 0;
  std::optional<Vector> first_unsafe;
};

/// Expands lattice shells of spacing `resolution` around x_ref until a shell
/// contains an unsafe point; the previous shell's radius is returned.
inline SamplingEstimate safe_region_sampling_estimate(const GridModel& g, const Vector& x_ref, double resolution) {
  if (!(resolution > 0.0)) throw ConfigError("resolution must be positive");
  if (x_ref.size() != g.num_inputs()) throw ShapeError("reference point has wrong dimension");
  if (classify_n1(g, x_ref) != ClassLabel::Safe) throw ConfigError("reference point is not secure");
  const N1Screen screen(g);
  const int n = g.num_inputs();
  // Lattice index range per dimension that stays inside [0,1].
  std::vector<long> kmin(static_cast<std::size_t>(n)), kmax(static_cast<std::size_t>(n));
  long reach = 0;
  for (int i = 0; i < n; ++i) {
    kmin[static_cast<std::size_t>(i)] = -static_cast<long>(std::floor(x_ref(i) / resolution + 1e-9));
    kmax[static_cast<std::size_t>(i)] = static_cast<long>(std::floor((1.0 - x_ref(i)) / resolution + 1e-9));
    reach = std::max({reach, -kmin[static_cast<std::size_t>(i)], kmax[static_cast<std::size_t>(i)]});
  }
  SamplingEstimate est;
  std::vector<long> k(static_cast<std::size_t>(n));
  Vector x(n);
  for (long shell = 1; shell <= reach; ++shell) {
    // Enumerate the box [max(kmin,-shell), min(kmax,shell)]^n, keeping points with max |k| == shell.
    for (int i = 0; i < n; ++i) k[static_cast<std::size_t>(i)] = std::max(kmin[static_cast<std::size_t>(i)], -shell);
    for (;;) {
      long norm = 0;
      for (int i = 0; i < n; ++i) norm = std::max(norm, std::abs(k[static_cast<std::size_t>(i)]));
      if (norm == shell) {
        for (int i = 0; i < n; ++i) x(i) = x_ref(i) + static_cast<double>(k[static_cast<std::size_t>(i)]) * resolution;
        ++est.points_checked;
        if (screen.classify(x) == ClassLabel::Unsafe) {
          est.radius = static_cast<double>(shell - 1) * resolution;
          est.first_unsafe = x;
          return est;
        }
      }
      int d = 0;
      for (; d < n; ++d) {
        auto& kd = k[static_cast<std::size_t>(d)];
        if (kd < std::min(kmax[static_cast<std::size_t>(d)], shell)) {
          ++kd;
          break;
        }
        kd = std::max(kmin[static_cast<std::size_t>(d)], -shell);
      }
      if (d == n) break;
    }
  }
  est.radius = static_cast<double>(reach) * resolution;
  est.covers_box = true;
  return est;
}

/// Slack generator limits written over normalized x:
/// p_min <= -(sum of injections) <= p_max.
inline std::vector<LinearRow> power_balance_constraint(const GridModel& g) {
  g.validate();
  const auto& s = g.slack_generator();
  const int n = g.num_inputs();
  double c0 = 0.0;  // slack output at x = 0
  Vector a(n);
  for (const auto& l : g.fixed_loads) c0 += l.p_mw;
  for (int i = 0; i < n; ++i) {
    const auto& in = g.inputs[static_cast<std::size_t>(i)];
    c0 -= in.sign() * in.p_min;
    a(i) = -in.sign() * (in.p_max - in.p_min);
  }
  return {LinearRow{a, s.p_max - c0, "balance_max"}, LinearRow{-a, c0 - s.p_min, "balance_min"}};
}

/// classify_n1 as a verification oracle.
inline Oracle n1_oracle(const GridModel& g) {
  return [&g](const Vector& x) -> std::optional<ClassLabel> { return classify_n1(g, x); };
}

}  // namespace nnv
