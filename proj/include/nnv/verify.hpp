#pragma once

// MILP encoding of ReLU networks and the verification programs built on it.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "nnv/errors.hpp"
#include "nnv/lp.hpp"
#include "nnv/milp.hpp"
#include "nnv/mlp.hpp"

namespace nnv {

/// Pre-activation bounds per hidden layer.
struct LayerBounds {
  std::vector<Vector> lower;
  std::vector<Vector> upper;

  int num_layers() const { return static_cast<int>(lower.size()); }

  int count_unstable() const {
    int n = 0;
    for (std::size_t k = 0; k < lower.size(); ++k)
      for (Eigen::Index i = 0; i < lower[k].size(); ++i) n += lower[k](i) < 0.0 && upper[k](i) > 0.0;
    return n;
  }
};

/// Interval arithmetic through the hidden layers for inputs in [lo, hi].
inline LayerBounds interval_bounds(const Network& net, const Vector& lo, const Vector& hi) {
  detail::check_input(net, lo.size());
  detail::check_input(net, hi.size());
  if ((lo.array() > hi.array()).any()) throw ConfigError("interval_bounds: empty input box");
  LayerBounds b;
  Vector a_lo = lo, a_hi = hi;
  const auto& layers = net.layers();
  for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
    const Matrix wp = layers[k].weights.cwiseMax(0.0);
    const Matrix wn = layers[k].weights.cwiseMin(0.0);
    Vector zl = wp * a_lo + wn * a_hi + layers[k].bias;
    Vector zu = wp * a_hi + wn * a_lo + layers[k].bias;
    a_lo = zl.cwiseMax(0.0);
    a_hi = zu.cwiseMax(0.0);
    b.lower.push_back(std::move(zl));
    b.upper.push_back(std::move(zu));
  }
  return b;
}

/// Every hidden pre-activation bounded by +-m; what the encoder uses with IA off.
inline LayerBounds constant_bounds(const Network& net, double m) {
  LayerBounds b;
  for (std::size_t k = 0; k + 1 < net.layers().size(); ++k) {
    const auto n = net.layers()[k].outputs();
    b.lower.push_back(Vector::Constant(n, -m));
    b.upper.push_back(Vector::Constant(n, m));
  }
  return b;
}

/// a.x <= b over normalized inputs.
struct LinearRow {
  Vector a;
  double b = 0.0;
  std::string name;
};

/// Input box plus optional side rows. Always kept inside [0,1]^n.
struct InputRegion {
  Vector lower;
  Vector upper;
  std::vector<LinearRow> rows;

  static InputRegion unit_box(int n, std::vector<LinearRow> rows = {}) {
    return InputRegion{Vector::Zero(n), Vector::Ones(n), std::move(rows)};
  }

  int dim() const { return static_cast<int>(lower.size()); }

  /// Intersection with the infinity-norm ball around center.
  InputRegion ball(const Vector& center, double eps) const {
    if (!(eps >= 0.0)) throw ConfigError("epsilon must be non-negative");
    if (center.size() != lower.size()) throw ShapeError("ball center has wrong dimension");
    InputRegion r = *this;
    r.lower = lower.cwiseMax((center.array() - eps).matrix());
    r.upper = upper.cwiseMin((center.array() + eps).matrix());
    return r;
  }

  void validate(int n) const {
    if (lower.size() != n || upper.size() != n) throw ShapeError("input region dimension does not match network");
    if ((lower.array() > upper.array()).any()) throw ConfigError("input region box is empty");
    for (const auto& r : rows)
      if (r.a.size() != n) throw ShapeError("side constraint '" + r.name + "' has wrong dimension");
  }

  bool contains(const Vector& x, double tol = 1e-9) const {
    if ((x.array() < lower.array() - tol).any() || (x.array() > upper.array() + tol).any()) return false;
    for (const auto& r : rows)
      if (r.a.dot(x) > r.b + tol) return false;
    return true;
  }
};

struct AffineExpr {
  std::vector<LinearTerm> terms;
  double constant = 0.0;

  double eval(const std::vector<double>& v) const {
    double s = constant;
    for (const auto& t : terms) s += t.coef * v[static_cast<std::size_t>(t.var)];
    return s;
  }
};

inline AffineExpr operator-(const AffineExpr& a, const AffineExpr& b) {
  AffineExpr r = a;
  for (auto t : b.terms) r.terms.push_back({t.var, -t.coef});
  r.constant -= b.constant;
  return r;
}

struct EncodeOptions {
  bool eliminate_stable = true;
};

/// Network as MILP variables and rows. Pre-activations are substituted as
/// affine expressions of the previous layer, so only x, z and r are variables.
struct Encoding {
  MilpProblem problem;
  std::vector<int> x;
  std::vector<std::vector<int>> z;  // -1: neuron is identically zero
  std::vector<std::vector<int>> r;  // -1: no indicator (stable neuron)
  std::array<AffineExpr, 2> logits;
  LayerBounds bounds;

  int num_binaries() const { return static_cast<int>(problem.binary_vars.size()); }

  /// Class margin y_c - y_other as an expression.
  AffineExpr margin(ClassLabel c) const {
    const int ci = static_cast<int>(c);
    return logits[static_cast<std::size_t>(ci)] - logits[static_cast<std::size_t>(1 - ci)];
  }

  Vector input(const std::vector<double>& point) const {
    Vector v(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) v(static_cast<Eigen::Index>(i)) = point[static_cast<std::size_t>(x[i])];
    return v;
  }

  /// Full variable assignment induced by running the network on xin. Variables
  /// outside the encoding (added later by a program) are left at zero.
  std::vector<double> assignment(const Network& net, const Vector& xin) const {
    std::vector<double> v(static_cast<std::size_t>(problem.base.num_vars()), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) v[static_cast<std::size_t>(x[i])] = xin(static_cast<Eigen::Index>(i));
    const auto fr = forward(net, xin);
    for (std::size_t k = 0; k < z.size(); ++k)
      for (std::size_t i = 0; i < z[k].size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        if (z[k][i] >= 0) v[static_cast<std::size_t>(z[k][i])] = fr.activations.post[k](ii);
        if (r[k][i] >= 0) v[static_cast<std::size_t>(r[k][i])] = fr.activations.pre[k](ii) > 0.0 ? 1.0 : 0.0;
      }
    return v;
  }
};

inline Encoding encode_network(const Network& net, const LayerBounds& bounds, const InputRegion& region,
                               const EncodeOptions& opts = {}) {
  region.validate(net.input_dim());
  const auto& layers = net.layers();
  if (bounds.num_layers() != static_cast<int>(layers.size()) - 1) throw ShapeError("bounds do not match network depth");
  Encoding e;
  e.bounds = bounds;
  auto& lp = e.problem.base;
  for (int i = 0; i < net.input_dim(); ++i)
    e.x.push_back(lp.add_variable(region.lower(i), region.upper(i), 0.0, "x" + std::to_string(i)));
  for (const auto& row : region.rows) {
    std::vector<LinearTerm> terms;
    for (int i = 0; i < net.input_dim(); ++i)
      if (row.a(i) != 0.0) terms.push_back({e.x[static_cast<std::size_t>(i)], row.a(i)});
    lp.add_constraint(std::move(terms), Relation::LessEqual, row.b, row.name);
  }

  std::vector<int> prev = e.x;  // variable per previous-layer unit, -1 if zero
  for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
    const auto& W = layers[k].weights;
    const auto& bias = layers[k].bias;
    const auto& lo = bounds.lower[k];
    const auto& hi = bounds.upper[k];
    if (lo.size() != W.rows() || hi.size() != W.rows()) throw ShapeError("bounds do not match layer width");
    std::vector<int> zk(static_cast<std::size_t>(W.rows()), -1), rk(static_cast<std::size_t>(W.rows()), -1);
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      const double l = lo(i), u = hi(i);
      if (!(l <= u)) throw EncodingError("layer " + std::to_string(k) + " neuron " + std::to_string(i) +
                                         " has lower bound above upper bound");
      const std::string tag = std::to_string(k) + "_" + std::to_string(i);
      std::vector<LinearTerm> pre;  // w . prev
      for (Eigen::Index j = 0; j < W.cols(); ++j) {
        const int pv = prev[static_cast<std::size_t>(j)];
        if (pv >= 0 && W(i, j) != 0.0) pre.push_back({pv, W(i, j)});
      }
      if (opts.eliminate_stable && u <= 0.0) continue;
      const int z = lp.add_variable(std::max(l, 0.0), std::max(u, 0.0), 0.0, "z" + tag);
      zk[static_cast<std::size_t>(i)] = z;
      auto with_z = [&](double zc, std::vector<LinearTerm> extra) {
        std::vector<LinearTerm> t{{z, zc}};
        for (auto p : pre) t.push_back({p.var, -p.coef});
        for (auto x : extra) t.push_back(x);
        return t;
      };
      if (opts.eliminate_stable && l >= 0.0) {
        lp.add_constraint(with_z(1.0, {}), Relation::Equal, bias(i), "act" + tag);
        continue;
      }
      const int r = lp.add_variable(0.0, 1.0, 0.0, "r" + tag);
      rk[static_cast<std::size_t>(i)] = r;
      e.problem.binary_vars.push_back(r);
      lp.add_constraint(with_z(1.0, {}), Relation::GreaterEqual, bias(i), "relu_lo" + tag);
      lp.add_constraint(with_z(1.0, {{r, -l}}), Relation::LessEqual, bias(i) - l, "relu_act" + tag);
      lp.add_constraint({{z, 1.0}, {r, -u}}, Relation::LessEqual, 0.0, "relu_off" + tag);
    }
    e.z.push_back(zk);
    e.r.push_back(std::move(rk));
    prev = std::move(zk);
  }
  const auto& out = layers.back();
  for (int c = 0; c < 2; ++c) {
    auto& ex = e.logits[static_cast<std::size_t>(c)];
    ex.constant = out.bias(c);
    for (Eigen::Index j = 0; j < out.weights.cols(); ++j) {
      const int pv = prev[static_cast<std::size_t>(j)];
      if (pv >= 0 && out.weights(c, j) != 0.0) ex.terms.push_back({pv, out.weights(c, j)});
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// Verification programs

struct QueryOptions {
  MilpOptions milp;
  bool use_ia = true;
  double big_m = 1e4;
  EncodeOptions encode;
  /// Stop a ball query once any flipping witness is found instead of
  /// minimizing the margin to optimality.
  bool stop_at_first_witness = false;
  /// Solve ball queries to optimality even once the margin is proven positive.
  bool exact_margin = false;
  /// Seeded random samples tried as starting incumbents (and, for region
  /// queries, to shrink the encoded box); 0 disables.
  int probe_samples = 512;
};

inline constexpr double kMarginTol = 1e-6;

struct SolveStats {
  MilpStatus status = MilpStatus::Infeasible;
  long nodes = 0;
  double wall_time = 0.0;
  int binaries = 0;
  double gap = kInf;
};

enum class Verdict { Certified, Falsified, Undetermined };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Certified: return "certified";
    case Verdict::Falsified: return "falsified";
    case Verdict::Undetermined: return "undetermined";
  }
  return "?";
}

struct CertifyResult {
  Verdict verdict = Verdict::Undetermined;
  ClassLabel reference = ClassLabel::Unsafe;
  double margin = -kInf;  // proven lower bound on y_ref - y_other over the ball
  double incumbent_margin = kInf;
  std::optional<Vector> witness;
  SolveStats stats;
};

struct RegionResult {
  bool class_constant = false;  // no class change anywhere in the admissible region
  ClassLabel reference = ClassLabel::Unsafe;
  double radius = kInf;
  double radius_lower_bound = kInf;
  std::optional<Vector> witness;
  SolveStats stats;
};

struct DirectionalResult {
  bool feasible = false;
  double value = -kInf;
  double bound = kInf;  // proven bound on the optimum (upper when maximizing)
  std::optional<Vector> witness;
  SolveStats stats;
};

namespace detail {

inline LayerBounds bounds_for(const Network& net, const InputRegion& reg, const QueryOptions& q) {
  return q.use_ia ? interval_bounds(net, reg.lower, reg.upper) : constant_bounds(net, q.big_m);
}

inline SolveStats stats_of(const MilpSolution& s, const Encoding& e) {
  return SolveStats{s.status, s.nodes_explored, s.wall_time, e.num_binaries(), s.gap};
}

/// Gradient of y_safe - y_unsafe with respect to the input at x.
inline Vector margin_gradient(const Network& net, const Vector& x) {
  const auto fr = forward(net, x);
  const auto& layers = net.layers();
  Vector g = (layers.back().weights.row(kSafeIndex) - layers.back().weights.row(kUnsafeIndex)).transpose();
  for (std::size_t k = layers.size() - 1; k-- > 0;) {
    g = g.cwiseProduct((fr.activations.pre[k].array() > 0.0).cast<double>().matrix());
    g = layers[k].weights.transpose() * g;
  }
  return g;
}

/// Nudges a solver point that sits on the decision boundary so that exact
/// replay lands in `want`. Tries steps of increasing size along the margin
/// gradient sign while staying inside `reg`.
inline std::optional<Vector> polish(const Network& net, const Vector& x, ClassLabel want, const InputRegion& reg) {
  Vector x0 = x.cwiseMax(reg.lower).cwiseMin(reg.upper);
  if (classify(net, x0) == want && reg.contains(x0)) return x0;
  const Vector g = margin_gradient(net, x0);
  const double dir = want == ClassLabel::Safe ? 1.0 : -1.0;
  for (double step : {1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
    Vector xs = x0 + dir * step * g.array().sign().matrix();
    xs = xs.cwiseMax(reg.lower).cwiseMin(reg.upper);
    if (classify(net, xs) == want && reg.contains(xs)) return xs;
  }
  return std::nullopt;
}

inline ClassLabel other(ClassLabel c) { return c == ClassLabel::Safe ? ClassLabel::Unsafe : ClassLabel::Safe; }

inline std::vector<LinearTerm> to_terms(const AffineExpr& e, double scale = 1.0) {
  std::vector<LinearTerm> t;
  for (auto x : e.terms) t.push_back({x.var, scale * x.coef});
  return t;
}

}  // namespace detail

namespace detail {

/// Encoding of `net` over `reg` with a class-margin row y_want - y_other >= need.
inline Encoding encode_with_class(const Network& net, const InputRegion& reg, ClassLabel want, double need,
                                  const QueryOptions& q) {
  auto enc = encode_network(net, bounds_for(net, reg, q), reg, q.encode);
  const auto m = enc.margin(want);
  enc.problem.base.add_constraint(to_terms(m), Relation::GreaterEqual, need - m.constant,
                                  std::string("class_") + to_string(want));
  return enc;
}

// Replay can land on the wrong side of a tie when the solver point sits on the
// boundary to rounding. These margins are retried before giving up.
inline constexpr double kRetryMargins[] = {1e-7, 1e-6};

}  // namespace detail

namespace detail {
/// Seeded uniform samples of the region; returns the one with the smallest
/// margin of `reference` over the other class.
inline std::optional<Vector> probe_min_margin(const Network& net, const InputRegion& region, ClassLabel reference,
                                              int samples) {
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = net.input_dim();
  std::optional<Vector> best;
  double best_margin = kInf;
  for (int s = 0; s < samples; ++s) {
    Vector x(n);
    for (int i = 0; i < n; ++i) x(i) = region.lower(i) + u(rng) * (region.upper(i) - region.lower(i));
    if (!region.contains(x)) continue;
    const auto y = logits(net, x);
    const double m = y(static_cast<int>(reference)) - y(1 - static_cast<int>(reference));
    if (m < best_margin) {
      best_margin = m;
      best = std::move(x);
    }
  }
  return best;
}
}  // namespace detail

/// min (y_ref - y_other) over the ball around x_ref (clipped to the region box).
inline CertifyResult certify_ball(const Network& net, const Vector& x_ref, double eps, const InputRegion& region,
                                  const QueryOptions& q = {}) {
  if (!(eps >= 0.0)) throw ConfigError("epsilon must be non-negative");
  region.validate(net.input_dim());
  CertifyResult res;
  res.reference = classify(net, x_ref);
  const auto ball = region.ball(x_ref, eps);
  if ((ball.lower.array() > ball.upper.array()).any()) throw ConfigError("ball does not intersect the input region");
  if (eps == 0.0) {
    const auto y = logits(net, x_ref);
    res.verdict = Verdict::Certified;
    res.margin = res.incumbent_margin = y(static_cast<int>(res.reference)) - y(1 - static_cast<int>(res.reference));
    res.stats.status = MilpStatus::Optimal;
    return res;
  }
  auto enc = encode_network(net, detail::bounds_for(net, ball, q), ball, q.encode);
  const auto margin = enc.margin(res.reference);
  for (const auto& t : margin.terms)
    enc.problem.base.set_cost(t.var, enc.problem.base.cost()[static_cast<std::size_t>(t.var)] + t.coef);
  enc.problem.base.set_objective_offset(margin.constant);

  MilpOptions mo = q.milp;
  if (q.probe_samples > 0)
    if (const auto x0 = detail::probe_min_margin(net, ball, res.reference, q.probe_samples))
      mo.initial_point = enc.assignment(net, *x0);
  if (!q.exact_margin) mo.stop_if_bound_above = std::min(mo.stop_if_bound_above, kMarginTol);
  if (q.stop_at_first_witness) mo.stop_if_objective_at_most = std::max(mo.stop_if_objective_at_most, -1e-7);
  mo.heuristic = [&](const std::vector<double>& p) -> std::optional<std::vector<double>> {
    return enc.assignment(net, enc.input(p).cwiseMax(ball.lower).cwiseMin(ball.upper));
  };
  const auto sol = solve_milp(enc.problem, mo);
  res.stats = detail::stats_of(sol, enc);
  res.margin = sol.best_bound;
  res.incumbent_margin = sol.objective;
  if (sol.status == MilpStatus::Infeasible) {
    // Only possible when side rows exclude the whole ball: vacuously certified.
    res.verdict = Verdict::Certified;
    res.margin = kInf;
    return res;
  }
  if (sol.best_bound > kMarginTol) {
    res.verdict = Verdict::Certified;
    return res;
  }
  const auto flip = detail::other(res.reference);
  if (sol.has_incumbent() && sol.objective <= kMarginTol)
    res.witness = detail::polish(net, enc.input(sol.point), flip, ball);
  for (double need : detail::kRetryMargins) {
    if (res.witness) break;
    auto alt = detail::encode_with_class(net, ball, flip, need, q);
    MilpOptions ao = q.milp;
    ao.stop_if_objective_at_most = kInf;  // any feasible point will do
    ao.heuristic = [&](const std::vector<double>& p) -> std::optional<std::vector<double>> {
      return alt.assignment(net, alt.input(p).cwiseMax(ball.lower).cwiseMin(ball.upper));
    };
    const auto s = solve_milp(alt.problem, ao);
    res.stats.nodes += s.nodes_explored;
    res.stats.wall_time += s.wall_time;
    if (s.has_incumbent()) res.witness = detail::polish(net, alt.input(s.point), flip, ball);
    if (s.status == MilpStatus::Infeasible) break;
  }
  res.verdict = res.witness ? Verdict::Falsified : Verdict::Undetermined;
  return res;
}

namespace detail {

/// True when x lies in `want` with the required margin (ties count as Unsafe).
inline bool meets_class(const Network& net, const Vector& x, ClassLabel want, double need) {
  const auto y = logits(net, x);
  const double m = y(static_cast<int>(want)) - y(1 - static_cast<int>(want));
  return want == ClassLabel::Unsafe ? m >= need : m >= need && classify_logits(y) == ClassLabel::Safe;
}

/// Primal probe for min_change_radius: seeded region samples of the other
/// class, each pulled toward x_ref by bisection. A second round resamples the
/// ball of the best distance found. Returns the closest point, whose distance
/// bounds the optimal radius from above.
inline std::optional<Vector> probe_change_radius(const Network& net, const Vector& x_ref, const InputRegion& region,
                                                 ClassLabel flip, double need, int samples) {
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = net.input_dim();
  auto ok = [&](const Vector& x) { return region.contains(x) && meets_class(net, x, flip, need); };
  auto dist = [&](const Vector& x) { return (x - x_ref).cwiseAbs().maxCoeff(); };
  std::optional<Vector> best;
  InputRegion box = region;
  for (int round = 0; round < 2; ++round) {
    std::vector<std::pair<double, Vector>> hits;
    for (int s = 0; s < samples; ++s) {
      Vector x(n);
      for (int i = 0; i < n; ++i) x(i) = box.lower(i) + u(rng) * (box.upper(i) - box.lower(i));
      if (ok(x)) hits.emplace_back(dist(x), std::move(x));
    }
    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t h = 0; h < std::min<std::size_t>(hits.size(), 16); ++h) {
      const Vector& far = hits[h].second;
      double lo = 0.0, hi = 1.0;  // far end always satisfies ok()
      for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ok(Vector(x_ref + mid * (far - x_ref))) ? hi : lo) = mid;
      }
      Vector x = x_ref + hi * (far - x_ref);
      if (!best || dist(x) < dist(*best)) best = std::move(x);
    }
    if (!best) return best;
    box = region.ball(x_ref, dist(*best));
  }
  return best;
}

}  // namespace detail

/// Smallest infinity-norm distance from x_ref to an input of the other class.
/// When a seeded probe finds a class change at distance r, the program is
/// encoded (and IA bounds computed) over the ball of radius r only; the
/// optimum lies inside that ball, so the result is unchanged.
inline RegionResult min_change_radius(const Network& net, const Vector& x_ref, const InputRegion& full_region,
                                      const QueryOptions& q = {}) {
  full_region.validate(net.input_dim());
  detail::check_input(net, x_ref.size());
  RegionResult res;
  res.reference = classify(net, x_ref);
  const auto flip = detail::other(res.reference);
  const double need = res.reference == ClassLabel::Safe ? 0.0 : kMarginTol;
  InputRegion region = full_region;
  std::optional<Vector> probe;
  if (q.probe_samples > 0) probe = detail::probe_change_radius(net, x_ref, full_region, flip, need, q.probe_samples);
  if (probe) region = full_region.ball(x_ref, (*probe - x_ref).cwiseAbs().maxCoeff() * (1.0 + 1e-9) + 1e-12);

  // Safe reference: reaching a tie already flips. Unsafe reference: safe needs a strict margin.
  auto solve = [&](double need) {
    auto enc = detail::encode_with_class(net, region, flip, need, q);
    auto& lp = enc.problem.base;
    const int eps = lp.add_variable(0.0, kInf, 1.0, "eps");
    for (int i = 0; i < net.input_dim(); ++i) {
      const int xv = enc.x[static_cast<std::size_t>(i)];
      lp.add_constraint({{xv, 1.0}, {eps, -1.0}}, Relation::LessEqual, x_ref(i), "ball_hi" + std::to_string(i));
      lp.add_constraint({{xv, 1.0}, {eps, 1.0}}, Relation::GreaterEqual, x_ref(i), "ball_lo" + std::to_string(i));
    }
    MilpOptions mo = q.milp;
    mo.heuristic = [&](const std::vector<double>& p) -> std::optional<std::vector<double>> {
      Vector x = enc.input(p).cwiseMax(region.lower).cwiseMin(region.upper);
      auto v = enc.assignment(net, x);
      v[static_cast<std::size_t>(eps)] = (x - x_ref).cwiseAbs().maxCoeff();
      return v;
    };
    if (probe) {
      mo.initial_point = enc.assignment(net, *probe);
      mo.initial_point[static_cast<std::size_t>(eps)] = (*probe - x_ref).cwiseAbs().maxCoeff();
    }
    auto sol = solve_milp(enc.problem, mo);
    return std::make_pair(std::move(enc), std::move(sol));
  };

  const auto [enc, sol] = solve(need);
  res.stats = detail::stats_of(sol, enc);
  if (sol.status == MilpStatus::Infeasible) {
    res.class_constant = true;
    return res;
  }
  res.radius_lower_bound = sol.best_bound;
  if (!sol.has_incumbent()) return res;
  res.radius = sol.objective;
  const auto shell = region.ball(x_ref, res.radius + kMarginTol);
  res.witness = detail::polish(net, enc.input(sol.point), flip, shell);
  for (double extra : detail::kRetryMargins) {
    if (res.witness) break;
    const auto [alt_enc, alt] = solve(need + extra);
    res.stats.nodes += alt.nodes_explored;
    res.stats.wall_time += alt.wall_time;
    if (alt.has_incumbent()) res.witness = detail::polish(net, alt_enc.input(alt.point), flip, shell);
  }
  return res;
}

/// Optimizes c.x + c0 over inputs the network assigns to `target`.
inline DirectionalResult directional_property(const Network& net, const Vector& c, double c0, bool maximize,
                                              ClassLabel target, const InputRegion& region,
                                              const QueryOptions& q = {}) {
  region.validate(net.input_dim());
  if (c.size() != net.input_dim()) throw ShapeError("objective has wrong dimension");
  const double sgn = maximize ? -1.0 : 1.0;
  auto solve = [&](double need) {
    auto enc = detail::encode_with_class(net, region, target, need, q);
    auto& lp = enc.problem.base;
    for (int i = 0; i < net.input_dim(); ++i) lp.set_cost(enc.x[static_cast<std::size_t>(i)], sgn * c(i));
    lp.set_objective_offset(sgn * c0);
    MilpOptions mo = q.milp;
    mo.heuristic = [&](const std::vector<double>& p) -> std::optional<std::vector<double>> {
      return enc.assignment(net, enc.input(p).cwiseMax(region.lower).cwiseMin(region.upper));
    };
    auto sol = solve_milp(enc.problem, mo);
    return std::make_pair(std::move(enc), std::move(sol));
  };

  const double need = target == ClassLabel::Safe ? kMarginTol : 0.0;
  const auto [enc, sol] = solve(need);
  DirectionalResult res;
  res.stats = detail::stats_of(sol, enc);
  if (!sol.has_incumbent()) {
    res.bound = sol.status == MilpStatus::Infeasible ? -sgn * kInf : sgn * sol.best_bound;
    return res;
  }
  res.feasible = true;
  res.value = sgn * sol.objective;
  res.bound = sgn * sol.best_bound;
  res.witness = detail::polish(net, enc.input(sol.point), target, region);
  for (double extra : detail::kRetryMargins) {
    if (res.witness) break;
    const auto [alt_enc, alt] = solve(need + extra);
    res.stats.nodes += alt.nodes_explored;
    res.stats.wall_time += alt.wall_time;
    if (alt.has_incumbent()) res.witness = detail::polish(net, alt_enc.input(alt.point), target, region);
  }
  if (res.witness) res.value = c.dot(*res.witness) + c0;
  return res;
}

// ---------------------------------------------------------------------------
// Campaigns

/// Runs f(i) for i in [0, n) on up to `workers` threads. Exceptions are
/// rethrown on the calling thread after all workers stop.
template <class F>
void parallel_for(int n, int workers, F&& f) {
  if (workers <= 0) workers = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  workers = std::min(workers, std::max(n, 1));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lk(err_mu);
          if (!err) err = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

/// Ground-truth classifier; returns nullopt when it cannot decide.
using Oracle = std::function<std::optional<ClassLabel>(const Vector&)>;

struct QueryRecord {
  int sample_id = 0;
  double eps = 0.0;
  ClassLabel label = ClassLabel::Unsafe;
  ClassLabel predicted = ClassLabel::Unsafe;
  Verdict verdict = Verdict::Undetermined;
  double margin = 0.0;
  std::optional<Vector> witness;
  std::optional<ClassLabel> witness_truth;  // oracle label of the witness
  bool unresolved = false;                  // oracle failed on the witness
  long nodes = 0;
  double wall_time = 0.0;

  bool correct() const { return label == predicted; }
  bool robust() const { return correct() && verdict == Verdict::Certified; }
  /// Witness flips the prediction although the oracle keeps the original class.
  bool adversarial() const {
    return correct() && verdict == Verdict::Falsified && witness_truth && *witness_truth == label;
  }
};

struct CampaignPoint {
  double eps = 0.0;
  double robust_fraction = 0.0;
  double misclassified_fraction = 0.0;
  double adversarial_fraction = 0.0;
  int undetermined = 0;
  int unresolved = 0;
};

struct Campaign {
  std::vector<QueryRecord> records;  // ordered by (eps, sample)
  std::vector<CampaignPoint> curve;
};

struct CampaignOptions {
  QueryOptions query;
  int workers = 0;
};

/// Certifies every sample at every epsilon. Misclassified samples are never
/// robust and are not solved. With an oracle, each falsifying witness is
/// labeled to decide whether it is an adversarial example.
inline Campaign run_campaign(const Network& net, const std::vector<Vector>& inputs,
                             const std::vector<ClassLabel>& labels, std::vector<double> eps_list,
                             const InputRegion& region, const Oracle& oracle = {}, const CampaignOptions& opts = {}) {
  if (inputs.size() != labels.size()) throw ShapeError("inputs and labels differ in length");
  for (double e : eps_list)
    if (!(e >= 0.0)) throw ConfigError("epsilon must be non-negative");
  std::sort(eps_list.begin(), eps_list.end());
  const int n = static_cast<int>(inputs.size());
  const int ne = static_cast<int>(eps_list.size());
  Campaign c;
  c.records.resize(static_cast<std::size_t>(n * ne));
  parallel_for(n * ne, opts.workers, [&](int q) {
    const int ei = q / std::max(n, 1), si = q % std::max(n, 1);
    auto& rec = c.records[static_cast<std::size_t>(q)];
    const auto& x = inputs[static_cast<std::size_t>(si)];
    rec.sample_id = si;
    rec.eps = eps_list[static_cast<std::size_t>(ei)];
    rec.label = labels[static_cast<std::size_t>(si)];
    rec.predicted = classify(net, x);
    if (!rec.correct()) return;
    const auto r = certify_ball(net, x, rec.eps, region, opts.query);
    rec.verdict = r.verdict;
    rec.margin = r.margin;
    rec.witness = r.witness;
    rec.nodes = r.stats.nodes;
    rec.wall_time = r.stats.wall_time;
    if (oracle && rec.witness) {
      try {
        rec.witness_truth = oracle(*rec.witness);
      } catch (const std::exception&) {
        rec.witness_truth.reset();
      }
      rec.unresolved = !rec.witness_truth;
    }
  });
  for (int ei = 0; ei < ne; ++ei) {
    CampaignPoint p;
    p.eps = eps_list[static_cast<std::size_t>(ei)];
    for (int si = 0; si < n; ++si) {
      const auto& rec = c.records[static_cast<std::size_t>(ei * n + si)];
      p.robust_fraction += rec.robust();
      p.misclassified_fraction += !rec.correct();
      p.adversarial_fraction += rec.adversarial();
      p.undetermined += rec.correct() && rec.verdict == Verdict::Undetermined;
      p.unresolved += rec.unresolved;
    }
    if (n > 0) {
      p.robust_fraction /= n;
      p.misclassified_fraction /= n;
      p.adversarial_fraction /= n;
    }
    c.curve.push_back(p);
  }
  return c;
}

/// Fraction of samples that are correctly classified and certified, per epsilon.
inline std::vector<CampaignPoint> adversarial_accuracy(const Network& net, const std::vector<Vector>& inputs,
                                                       const std::vector<ClassLabel>& labels,
                                                       const std::vector<double>& eps_list, const InputRegion& region,
                                                       const CampaignOptions& opts = {}) {
  return run_campaign(net, inputs, labels, eps_list, region, {}, opts).curve;
}

struct AdversarialExample {
  int sample_id = 0;
  double eps = 0.0;
  Vector x_ref;
  Vector witness;
  ClassLabel true_label = ClassLabel::Unsafe;       // oracle label of the witness
  ClassLabel predicted_label = ClassLabel::Unsafe;  // network label of the witness
};

struct MiningResult {
  std::vector<AdversarialExample> examples;
  std::vector<int> unresolved;  // samples whose witness the oracle could not label
  Campaign campaign;
};

/// Mines every epsilon in `eps_list`; the same sample may contribute one example per epsilon.
inline MiningResult find_adversarial_examples(const Network& net, const std::vector<Vector>& inputs,
                                              const std::vector<ClassLabel>& labels,
                                              const std::vector<double>& eps_list, const Oracle& oracle,
                                              const InputRegion& region, const CampaignOptions& opts = {}) {
  if (!oracle) throw ConfigError("find_adversarial_examples needs a ground-truth oracle");
  MiningResult m;
  m.campaign = run_campaign(net, inputs, labels, eps_list, region, oracle, opts);
  for (const auto& rec : m.campaign.records) {
    if (rec.unresolved) m.unresolved.push_back(rec.sample_id);
    if (!rec.adversarial()) continue;
    m.examples.push_back(AdversarialExample{rec.sample_id, rec.eps, inputs[static_cast<std::size_t>(rec.sample_id)],
                                            *rec.witness, *rec.witness_truth, classify(net, *rec.witness)});
  }
  return m;
}

inline MiningResult find_adversarial_examples(const Network& net, const std::vector<Vector>& inputs,
                                              const std::vector<ClassLabel>& labels, double eps, const Oracle& oracle,
                                              const InputRegion& region, const CampaignOptions& opts = {}) {
  return find_adversarial_examples(net, inputs, labels, std::vector<double>{eps}, oracle, region, opts);
}

}  // namespace nnv
