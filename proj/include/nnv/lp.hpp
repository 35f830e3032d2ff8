#pragma once

// Bounded-variable primal simplex.
//
// Problems are stated as
//     minimize    c'v + offset
//     subject to  a_i'v  {<=, =, >=}  rhs_i
//                 l <= v <= u          (l, u may be -inf / +inf)
// Every row gets a slack s_i so that a_i'v + s_i = rhs_i, with s_i >= 0 for
// "<=", s_i <= 0 for ">=" and s_i = 0 for "=". The slack basis is the cold
// start. Phase 1 minimises the sum of bound violations of the basic
// variables starting from whatever basis it is given, so a parent basis that
// became infeasible after a bound change is a valid warm start.
// The basis is kept as a sparse LU factorization plus product-form eta
// updates, refactorized every `refactor_interval` pivots.

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nnv/errors.hpp"

namespace nnv {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Relation : std::uint8_t { LessEqual, Equal, GreaterEqual };

inline const char* to_string(Relation r) {
  switch (r) {
    case Relation::LessEqual: return "<=";
    case Relation::Equal: return "=";
    case Relation::GreaterEqual: return ">=";
  }
  return "?";
}

struct LinearTerm {
  int var;
  double coef;
};

struct LinearConstraint {
  std::vector<LinearTerm> terms;
  Relation relation = Relation::LessEqual;
  double rhs = 0.0;
  std::string name;
};

/// Immutable once handed to a solver; safe to share between threads.
class LinearProgram {
 public:
  int add_variable(double lower = 0.0, double upper = kInf, double cost = 0.0, std::string name = {}) {
    lower_.push_back(lower);
    upper_.push_back(upper);
    cost_.push_back(cost);
    names_.push_back(name.empty() ? "v" + std::to_string(lower_.size() - 1) : std::move(name));
    return static_cast<int>(lower_.size()) - 1;
  }

  int add_constraint(std::vector<LinearTerm> terms, Relation rel, double rhs, std::string name = {}) {
    if (name.empty()) name = "r" + std::to_string(rows_.size());
    rows_.push_back({std::move(terms), rel, rhs, std::move(name)});
    return static_cast<int>(rows_.size()) - 1;
  }

  void set_cost(int var, double c) { cost_.at(static_cast<std::size_t>(var)) = c; }
  void set_bounds(int var, double lo, double hi) {
    lower_.at(static_cast<std::size_t>(var)) = lo;
    upper_.at(static_cast<std::size_t>(var)) = hi;
  }
  void set_objective_offset(double c) { offset_ = c; }

  int num_vars() const { return static_cast<int>(lower_.size()); }
  int num_constraints() const { return static_cast<int>(rows_.size()); }
  const std::vector<double>& cost() const { return cost_; }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<LinearConstraint>& constraints() const { return rows_; }
  const LinearConstraint& constraint(int i) const { return rows_.at(static_cast<std::size_t>(i)); }
  double objective_offset() const { return offset_; }

  double objective_value(const std::vector<double>& v) const {
    double s = offset_;
    for (std::size_t j = 0; j < cost_.size(); ++j) s += cost_[j] * v[j];
    return s;
  }

  double activity(int row, const std::vector<double>& v) const {
    double s = 0.0;
    for (const auto& t : rows_[static_cast<std::size_t>(row)].terms) s += t.coef * v[static_cast<std::size_t>(t.var)];
    return s;
  }

  void validate() const {
    const int n = num_vars();
    for (int j = 0; j < n; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      if (std::isnan(lower_[uj]) || std::isnan(upper_[uj]) || lower_[uj] > upper_[uj])
        throw ConfigError("variable " + names_[uj] + " has invalid bounds");
      if (!std::isfinite(cost_[uj])) throw ConfigError("variable " + names_[uj] + " has non-finite cost");
      if (lower_[uj] == kInf || upper_[uj] == -kInf) throw ConfigError("variable " + names_[uj] + " has an empty domain");
    }
    for (const auto& r : rows_) {
      if (!std::isfinite(r.rhs)) throw ConfigError("row " + r.name + " has non-finite rhs");
      for (const auto& t : r.terms) {
        if (t.var < 0 || t.var >= n) throw ConfigError("row " + r.name + " references unknown variable");
        if (!std::isfinite(t.coef)) throw ConfigError("row " + r.name + " has a non-finite coefficient");
      }
    }
  }

 private:
  std::vector<double> cost_, lower_, upper_;
  std::vector<std::string> names_;
  std::vector<LinearConstraint> rows_;
  double offset_ = 0.0;
};

/// Plain-text dump for bug reports.
inline std::string to_text(const LinearProgram& lp) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "minimize";
  for (int j = 0; j < lp.num_vars(); ++j)
    if (lp.cost()[static_cast<std::size_t>(j)] != 0.0) os << ' ' << std::showpos << lp.cost()[static_cast<std::size_t>(j)] << std::noshowpos << ' ' << lp.names()[static_cast<std::size_t>(j)];
  if (lp.objective_offset() != 0.0) os << ' ' << std::showpos << lp.objective_offset() << std::noshowpos;
  os << "\nsubject to\n";
  for (const auto& r : lp.constraints()) {
    os << "  " << r.name << ':';
    for (const auto& t : r.terms) os << ' ' << std::showpos << t.coef << std::noshowpos << ' ' << lp.names()[static_cast<std::size_t>(t.var)];
    os << ' ' << to_string(r.relation) << ' ' << r.rhs << '\n';
  }
  os << "bounds\n";
  for (int j = 0; j < lp.num_vars(); ++j)
    os << "  " << lp.lower()[static_cast<std::size_t>(j)] << " <= " << lp.names()[static_cast<std::size_t>(j)] << " <= " << lp.upper()[static_cast<std::size_t>(j)] << '\n';
  return os.str();
}

enum class LpStatus : std::uint8_t { Optimal, Infeasible, Unbounded };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
  }
  return "?";
}

enum class VarState : std::uint8_t { Basic, AtLower, AtUpper, FreeZero };

/// B = L U E_1 ... E_k: an LU factorization of a basis matrix followed by
/// the eta matrices of the column replacements made since. Copies share the
/// LU part, so snapshots are cheap.
class BasisFactor {
 public:
  using SparseMatrix = Eigen::SparseMatrix<double>;

  /// False when B is numerically singular.
  bool factorize(const SparseMatrix& B) {
    m_ = static_cast<int>(B.rows());
    etas_.clear();
    if (m_ == 0) {
      lu_.reset();
      return true;
    }
    auto lu = std::make_shared<Lu>();
    lu->analyzePattern(B);
    lu->factorize(B);
    if (lu->info() != Eigen::Success) return false;
    // Residual probe: a factorization of a nearly singular B fails to reproduce a known solution.
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m_);
    const Eigen::VectorXd back = lu->solve(Eigen::VectorXd(B * ones));
    if (!back.allFinite() || (back - ones).cwiseAbs().maxCoeff() > 1e-6) return false;
    lu_ = std::move(lu);
    return true;
  }

  int size() const { return m_; }
  int age() const { return static_cast<int>(etas_.size()); }

  /// v <- B^{-1} v
  void ftran(Eigen::VectorXd& v) const {
    if (m_ == 0) return;
    v = lu_->solve(v);
    for (const auto& e : etas_) {
      const double t = v(e.pos) / e.pivot;
      v(e.pos) = t;
      if (t == 0.0) continue;
      for (const auto& [i, a] : e.entries) v(i) -= a * t;
    }
  }

  /// v <- B^{-T} v
  void btran(Eigen::VectorXd& v) const {
    if (m_ == 0) return;
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double s = v(it->pos);
      for (const auto& [i, a] : it->entries) s -= a * v(i);
      v(it->pos) = s / it->pivot;
    }
    v = lu_->transpose().solve(v);
  }

  /// Basis column `pos` is replaced by a column whose ftran image is `alpha`.
  void update(int pos, const Eigen::VectorXd& alpha) {
    Eta e{pos, alpha(pos), {}};
    for (int i = 0; i < m_; ++i)
      if (i != pos && alpha(i) != 0.0) e.entries.emplace_back(i, alpha(i));
    etas_.push_back(std::move(e));
  }

 private:
  using Lu = Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>;
  struct Eta {
    int pos;
    double pivot;
    std::vector<std::pair<int, double>> entries;
  };
  int m_ = 0;
  std::shared_ptr<Lu> lu_;  // never modified after factorize
  std::vector<Eta> etas_;
};

/// Basis descriptor over structural variables followed by row slacks.
/// `factor`, when present, factorizes the basis matrix of `basic` and lets a
/// solver skip the initial factorization.
struct Basis {
  std::vector<VarState> state;
  std::vector<int> basic;
  std::shared_ptr<const BasisFactor> factor;

  bool empty() const { return state.empty(); }
};

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  double objective = kInf;
  std::vector<double> point;
  Basis basis;
  int iterations = 0;
};

struct LpOptions {
  double feasibility_tol = 1e-7;
  double optimality_tol = 1e-9;
  int max_iterations = 0;  // 0: automatic
  int refactor_interval = 100;
  int degenerate_streak_for_bland = 50;
  bool keep_factor = false;  // attach the final basis factorization to the solution
};

struct FeasibilityReport {
  double max_row_violation = 0.0;
  int worst_row = -1;
  double max_bound_violation = 0.0;
  int worst_var = -1;
  std::vector<std::pair<int, double>> violated_rows;  // rows above tolerance

  bool feasible(double row_tol = 1e-7, double bound_tol = 1e-9) const {
    return max_row_violation <= row_tol && max_bound_violation <= bound_tol;
  }
};

inline FeasibilityReport check_feasible(const LinearProgram& lp, const std::vector<double>& point, double tol = 1e-7) {
  if (static_cast<int>(point.size()) != lp.num_vars()) throw ShapeError("check_feasible: point has wrong dimension");
  FeasibilityReport rep;
  for (int i = 0; i < lp.num_constraints(); ++i) {
    const auto& r = lp.constraint(i);
    const double a = lp.activity(i, point);
    double viol = 0.0;
    switch (r.relation) {
      case Relation::LessEqual: viol = a - r.rhs; break;
      case Relation::GreaterEqual: viol = r.rhs - a; break;
      case Relation::Equal: viol = std::abs(a - r.rhs); break;
    }
    viol = std::max(viol, 0.0);
    if (viol > rep.max_row_violation) {
      rep.max_row_violation = viol;
      rep.worst_row = i;
    }
    if (viol > tol) rep.violated_rows.emplace_back(i, viol);
  }
  for (int j = 0; j < lp.num_vars(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    const double viol = std::max({lp.lower()[uj] - point[uj], point[uj] - lp.upper()[uj], 0.0});
    if (viol > rep.max_bound_violation) {
      rep.max_bound_violation = viol;
      rep.worst_var = j;
    }
  }
  return rep;
}

/// Reusable simplex engine over one LinearProgram. Structural bounds may be
/// overridden between solves (branch-and-bound fixes binaries this way); the
/// last factorization is kept and reused when the next warm start names the
/// same basic set.
class SimplexSolver {
 public:
  explicit SimplexSolver(const LinearProgram& lp, LpOptions opts = {}) : lp_(lp), opts_(opts) {
    lp.validate();
    n_ = lp.num_vars();
    m_ = lp.num_constraints();
    build_columns();
    lo_.resize(static_cast<std::size_t>(n_ + m_));
    hi_.resize(static_cast<std::size_t>(n_ + m_));
    reset_bounds();
  }

  int num_structural() const { return n_; }
  int num_rows() const { return m_; }

  void set_bounds(int var, double lo, double hi) {
    if (var < 0 || var >= n_) throw ShapeError("set_bounds: variable index out of range");
    if (lo > hi) throw ConfigError("set_bounds: lower bound exceeds upper bound");
    lo_[static_cast<std::size_t>(var)] = lo;
    hi_[static_cast<std::size_t>(var)] = hi;
  }

  void reset_bounds() {
    for (int j = 0; j < n_; ++j) {
      lo_[static_cast<std::size_t>(j)] = lp_.lower()[static_cast<std::size_t>(j)];
      hi_[static_cast<std::size_t>(j)] = lp_.upper()[static_cast<std::size_t>(j)];
    }
    for (int i = 0; i < m_; ++i) {
      const auto k = static_cast<std::size_t>(n_ + i);
      switch (lp_.constraint(i).relation) {
        case Relation::LessEqual: lo_[k] = 0.0; hi_[k] = kInf; break;
        case Relation::GreaterEqual: lo_[k] = -kInf; hi_[k] = 0.0; break;
        case Relation::Equal: lo_[k] = 0.0; hi_[k] = 0.0; break;
      }
    }
  }

  LpSolution solve(const Basis* warm = nullptr) {
    try {
      return run(warm, /*bland_always=*/false);
    } catch (const StallError&) {
      // Numerical trouble or cycling: restart cold with Bland's rule throughout.
      valid_factor_ = false;
      return run(nullptr, /*bland_always=*/true);
    }
  }

 private:
  static constexpr int kRefreshAge = 30;

  struct StallError : std::runtime_error {
    StallError() : std::runtime_error("simplex stalled") {}
  };

  // ---- problem data -------------------------------------------------------
  void build_columns() {
    std::vector<std::vector<std::pair<int, double>>> cols(static_cast<std::size_t>(n_));
    for (int i = 0; i < m_; ++i)
      for (const auto& t : lp_.constraint(i).terms)
        if (t.coef != 0.0) cols[static_cast<std::size_t>(t.var)].emplace_back(i, t.coef);
    col_start_.assign(static_cast<std::size_t>(n_ + 1), 0);
    for (int j = 0; j < n_; ++j) {
      auto& c = cols[static_cast<std::size_t>(j)];
      // merge duplicate row entries
      std::sort(c.begin(), c.end(), [](auto& a, auto& b) { return a.first < b.first; });
      std::vector<std::pair<int, double>> merged;
      for (const auto& e : c) {
        if (!merged.empty() && merged.back().first == e.first) merged.back().second += e.second;
        else merged.push_back(e);
      }
      for (const auto& e : merged) {
        row_idx_.push_back(e.first);
        values_.push_back(e.second);
      }
      col_start_[static_cast<std::size_t>(j + 1)] = static_cast<int>(row_idx_.size());
    }
    rhs_ = Eigen::VectorXd(m_);
    for (int i = 0; i < m_; ++i) rhs_(i) = lp_.constraint(i).rhs;
    cost_.assign(static_cast<std::size_t>(n_ + m_), 0.0);
    for (int j = 0; j < n_; ++j) cost_[static_cast<std::size_t>(j)] = lp_.cost()[static_cast<std::size_t>(j)];
  }

  double dot_column(int j, const Eigen::VectorXd& y) const {
    if (j >= n_) return y(j - n_);
    double s = 0.0;
    for (int k = col_start_[static_cast<std::size_t>(j)]; k < col_start_[static_cast<std::size_t>(j + 1)]; ++k)
      s += values_[static_cast<std::size_t>(k)] * y(row_idx_[static_cast<std::size_t>(k)]);
    return s;
  }

  // alpha = B^{-1} a_j
  void ftran(int j, Eigen::VectorXd& alpha) const {
    alpha.setZero(m_);
    if (j >= n_) {
      alpha(j - n_) = 1.0;
    } else {
      for (int k = col_start_[static_cast<std::size_t>(j)]; k < col_start_[static_cast<std::size_t>(j + 1)]; ++k)
        alpha(row_idx_[static_cast<std::size_t>(k)]) = values_[static_cast<std::size_t>(k)];
    }
    factor_.ftran(alpha);
  }

  // ---- basis handling -----------------------------------------------------
  double nonbasic_value(int j) const {
    const auto uj = static_cast<std::size_t>(j);
    switch (state_[uj]) {
      case VarState::AtLower: return lo_[uj];
      case VarState::AtUpper: return hi_[uj];
      default: return 0.0;
    }
  }

  VarState default_state(int j) const {
    const auto uj = static_cast<std::size_t>(j);
    if (std::isfinite(lo_[uj])) return VarState::AtLower;
    if (std::isfinite(hi_[uj])) return VarState::AtUpper;
    return VarState::FreeZero;
  }

  // Nonbasic states must sit on a finite bound (or at zero when free).
  void normalize_nonbasic(int j) {
    const auto uj = static_cast<std::size_t>(j);
    auto& s = state_[uj];
    if (s == VarState::Basic) return;
    if (lo_[uj] == hi_[uj]) {
      s = VarState::AtLower;
      return;
    }
    if (s == VarState::AtLower && !std::isfinite(lo_[uj])) s = default_state(j);
    else if (s == VarState::AtUpper && !std::isfinite(hi_[uj])) s = default_state(j);
    else if (s == VarState::FreeZero && (std::isfinite(lo_[uj]) || std::isfinite(hi_[uj]))) s = default_state(j);
  }

  void slack_basis() {
    const int total = n_ + m_;
    state_.assign(static_cast<std::size_t>(total), VarState::AtLower);
    basic_.resize(static_cast<std::size_t>(m_));
    for (int j = 0; j < n_; ++j) state_[static_cast<std::size_t>(j)] = default_state(j);
    for (int i = 0; i < m_; ++i) {
      state_[static_cast<std::size_t>(n_ + i)] = VarState::Basic;
      basic_[static_cast<std::size_t>(i)] = n_ + i;
    }
    BasisFactor::SparseMatrix I(m_, m_);
    I.setIdentity();
    factor_.factorize(I);
    valid_factor_ = true;
  }

  bool load_basis(const Basis& b) {
    const auto total = static_cast<std::size_t>(n_ + m_);
    if (b.state.size() != total || b.basic.size() != static_cast<std::size_t>(m_)) return false;
    int nbasic = 0;
    for (auto s : b.state) nbasic += s == VarState::Basic;
    if (nbasic != m_) return false;
    for (int v : b.basic)
      if (v < 0 || v >= n_ + m_ || b.state[static_cast<std::size_t>(v)] != VarState::Basic) return false;
    const bool same_basic = valid_factor_ && b.basic == basic_;
    state_ = b.state;
    basic_ = b.basic;
    for (int j = 0; j < n_ + m_; ++j) normalize_nonbasic(j);
    if (b.factor && b.factor->size() == m_) {
      factor_ = *b.factor;
      valid_factor_ = true;
    } else if (!same_basic) {
      valid_factor_ = false;
    }
    return true;
  }

  bool refactor() {
    if (m_ == 0) {
      valid_factor_ = true;
      return true;
    }
    std::vector<Eigen::Triplet<double>> entries;
    for (int p = 0; p < m_; ++p) {
      const int j = basic_[static_cast<std::size_t>(p)];
      if (j >= n_) {
        entries.emplace_back(j - n_, p, 1.0);
      } else {
        for (int k = col_start_[static_cast<std::size_t>(j)]; k < col_start_[static_cast<std::size_t>(j + 1)]; ++k)
          entries.emplace_back(row_idx_[static_cast<std::size_t>(k)], p, values_[static_cast<std::size_t>(k)]);
      }
    }
    BasisFactor::SparseMatrix B(m_, m_);
    B.setFromTriplets(entries.begin(), entries.end());
    if (!factor_.factorize(B)) return false;
    valid_factor_ = true;
    return true;
  }

  void compute_basic_values() {
    Eigen::VectorXd r = rhs_;
    for (int j = 0; j < n_ + m_; ++j) {
      if (state_[static_cast<std::size_t>(j)] == VarState::Basic) continue;
      const double v = nonbasic_value(j);
      x_[static_cast<std::size_t>(j)] = v;
      if (v == 0.0) continue;
      if (j >= n_) {
        r(j - n_) -= v;
      } else {
        for (int k = col_start_[static_cast<std::size_t>(j)]; k < col_start_[static_cast<std::size_t>(j + 1)]; ++k)
          r(row_idx_[static_cast<std::size_t>(k)]) -= values_[static_cast<std::size_t>(k)] * v;
      }
    }
    Eigen::VectorXd xb = r;
    factor_.ftran(xb);
    for (int p = 0; p < m_; ++p) x_[static_cast<std::size_t>(basic_[static_cast<std::size_t>(p)])] = xb(p);
  }

  double infeasibility(int j, double tol) const {
    const auto uj = static_cast<std::size_t>(j);
    if (x_[uj] < lo_[uj] - tol) return lo_[uj] - x_[uj];
    if (x_[uj] > hi_[uj] + tol) return x_[uj] - hi_[uj];
    return 0.0;
  }

  // ---- main loop ------------------------------------------------------------
  LpSolution run(const Basis* warm, bool bland_always) {
    const int total = n_ + m_;
    x_.assign(static_cast<std::size_t>(total), 0.0);
    for (int j = 0; j < n_; ++j)
      if (lo_[static_cast<std::size_t>(j)] > hi_[static_cast<std::size_t>(j)]) return infeasible_solution(0);

    if (!(warm && !warm->empty() && load_basis(*warm))) slack_basis();
    if (!valid_factor_ && !refactor()) slack_basis();
    compute_basic_values();

    const int max_iter = opts_.max_iterations > 0 ? opts_.max_iterations : 50 * (n_ + m_) + 1000;
    double ptol = 1e-9;
    int degenerate_streak = 0;
    bool bland = bland_always;
    Eigen::VectorXd cb(m_), y(m_), alpha(m_);
    int iter = 0;
    bool refreshed = false;

    for (;; ++iter) {
      if (iter > max_iter) throw StallError();
      if (factor_.age() >= opts_.refactor_interval) {
        if (!refactor()) throw StallError();
        compute_basic_values();
      }

      // Phase selection from current basic infeasibilities.
      bool phase1 = false;
      for (int p = 0; p < m_; ++p) {
        const int j = basic_[static_cast<std::size_t>(p)];
        const auto uj = static_cast<std::size_t>(j);
        double c = 0.0;
        if (x_[uj] < lo_[uj] - ptol) c = -1.0;
        else if (x_[uj] > hi_[uj] + ptol) c = 1.0;
        if (c != 0.0) phase1 = true;
        cb(p) = c;
      }
      if (!phase1)
        for (int p = 0; p < m_; ++p) cb(p) = cost_[static_cast<std::size_t>(basic_[static_cast<std::size_t>(p)])];
      y = cb;
      factor_.btran(y);

      // Pricing.
      int enter = -1;
      double best = 0.0;
      double enter_d = 0.0;
      const double dtol = phase1 ? 1e-11 : opts_.optimality_tol;
      for (int j = 0; j < total; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        const VarState s = state_[uj];
        if (s == VarState::Basic || lo_[uj] == hi_[uj]) continue;
        const double d = (phase1 ? 0.0 : cost_[uj]) - dot_column(j, y);
        bool eligible = false;
        if (s == VarState::AtLower) eligible = d < -dtol;
        else if (s == VarState::AtUpper) eligible = d > dtol;
        else eligible = std::abs(d) > dtol;
        if (!eligible) continue;
        if (bland) {
          enter = j;
          enter_d = d;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          enter = j;
          enter_d = d;
        }
      }

      if (enter < 0) {
        if (phase1) {
          double worst = 0.0;
          for (int p = 0; p < m_; ++p) worst = std::max(worst, infeasibility(basic_[static_cast<std::size_t>(p)], 0.0));
          if (worst > opts_.feasibility_tol) return infeasible_solution(iter);
          if (ptol < opts_.feasibility_tol) {
            ptol = opts_.feasibility_tol;  // accept residual infeasibility below tolerance
            --iter;
            continue;
          }
        }
        if (!refreshed && factor_.age() >= kRefreshAge) {
          // Re-derive the final point from a fresh factorization before accepting it.
          refreshed = true;
          if (!refactor()) throw StallError();
          compute_basic_values();
          continue;
        }
        return optimal_solution(iter);
      }

      const double dir = enter_d < 0.0 ? 1.0 : -1.0;
      ftran(enter, alpha);

      // Ratio test.
      const auto ue = static_cast<std::size_t>(enter);
      double tmax = hi_[ue] - lo_[ue];  // bound flip (inf when a side is infinite)
      int leave_pos = -1;
      bool leave_to_upper = false;
      double leave_alpha = 0.0;
      // Pivot tolerance relative to the column scale; tiny pivots wreck the factorization.
      const double piv_tol = 1e-9 * std::max(1.0, alpha.cwiseAbs().maxCoeff());
      for (int p = 0; p < m_; ++p) {
        const double a = alpha(p);
        if (std::abs(a) <= piv_tol) continue;
        const int j = basic_[static_cast<std::size_t>(p)];
        const auto uj = static_cast<std::size_t>(j);
        const double rate = -dir * a;
        double t = kInf;
        bool to_upper = false;
        if (rate < 0.0) {
          if (phase1 && x_[uj] > hi_[uj] + ptol) {
            t = (x_[uj] - hi_[uj]) / -rate;
            to_upper = true;
          } else if (x_[uj] >= lo_[uj] - ptol && std::isfinite(lo_[uj])) {
            t = std::max(0.0, x_[uj] - lo_[uj]) / -rate;
          }
        } else {
          if (phase1 && x_[uj] < lo_[uj] - ptol) {
            t = (lo_[uj] - x_[uj]) / rate;
          } else if (x_[uj] <= hi_[uj] + ptol && std::isfinite(hi_[uj])) {
            t = std::max(0.0, hi_[uj] - x_[uj]) / rate;
            to_upper = true;
          }
        }
        if (!std::isfinite(t)) continue;
        bool take = false;
        if (t < tmax - 1e-12) {
          take = true;
        } else if (t <= tmax + 1e-12 && leave_pos >= 0) {
          take = bland ? j < basic_[static_cast<std::size_t>(leave_pos)] : std::abs(a) > std::abs(leave_alpha);
        }
        if (take) {
          tmax = std::min(t, tmax);
          leave_pos = p;
          leave_to_upper = to_upper;
          leave_alpha = a;
        }
      }

      if (!std::isfinite(tmax)) {
        if (!phase1) return unbounded_solution(iter);
        throw StallError();
      }

      if (tmax <= 1e-12) {
        if (++degenerate_streak >= opts_.degenerate_streak_for_bland) bland = true;
      } else {
        degenerate_streak = 0;
        bland = bland_always;
      }

      // Update primal values.
      for (int p = 0; p < m_; ++p) x_[static_cast<std::size_t>(basic_[static_cast<std::size_t>(p)])] += -dir * alpha(p) * tmax;
      x_[ue] += dir * tmax;

      if (leave_pos < 0) {
        // Entering variable hits its opposite bound.
        state_[ue] = dir > 0.0 ? VarState::AtUpper : VarState::AtLower;
        x_[ue] = nonbasic_value(enter);
        continue;
      }

      const int leave = basic_[static_cast<std::size_t>(leave_pos)];
      const auto ul = static_cast<std::size_t>(leave);
      state_[ul] = leave_to_upper ? VarState::AtUpper : VarState::AtLower;
      if (lo_[ul] == hi_[ul]) state_[ul] = VarState::AtLower;
      x_[ul] = nonbasic_value(leave);
      state_[ue] = VarState::Basic;
      basic_[static_cast<std::size_t>(leave_pos)] = enter;

      if (!std::isfinite(x_[ue]) || !alpha.allFinite()) throw StallError();
      factor_.update(leave_pos, alpha);
    }
  }

  std::vector<double> structural_point() const {
    std::vector<double> p(x_.begin(), x_.begin() + n_);
    return p;
  }

  Basis export_basis() const {
    Basis b{state_, basic_, nullptr};
    if (opts_.keep_factor) b.factor = std::make_shared<const BasisFactor>(factor_);
    return b;
  }

  LpSolution optimal_solution(int iter) {
    LpSolution s;
    s.status = LpStatus::Optimal;
    s.point = structural_point();
    s.objective = lp_.objective_value(s.point);
    s.basis = export_basis();
    s.iterations = iter;
    return s;
  }

  LpSolution infeasible_solution(int iter) {
    LpSolution s;
    s.status = LpStatus::Infeasible;
    s.objective = kInf;
    s.point = structural_point();
    s.basis = export_basis();
    s.iterations = iter;
    return s;
  }

  LpSolution unbounded_solution(int iter) {
    LpSolution s;
    s.status = LpStatus::Unbounded;
    s.objective = -kInf;
    s.point = structural_point();
    s.basis = export_basis();
    s.iterations = iter;
    return s;
  }

  const LinearProgram& lp_;
  LpOptions opts_;
  int n_ = 0, m_ = 0;
  std::vector<int> col_start_, row_idx_;
  std::vector<double> values_;
  Eigen::VectorXd rhs_;
  std::vector<double> cost_, lo_, hi_, x_;
  std::vector<VarState> state_;
  std::vector<int> basic_;
  BasisFactor factor_;
  bool valid_factor_ = false;
};

inline LpSolution solve_lp(const LinearProgram& lp, const Basis* warm_start = nullptr, LpOptions opts = {}) {
  SimplexSolver solver(lp, opts);
  return solver.solve(warm_start);
}

}  // namespace nnv
