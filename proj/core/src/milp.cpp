#include "tclcoord/milp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>
#include <sstream>

#include "tclcoord/errors.hpp"

namespace tclcoord {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotAccept = 1e-9;   // smallest pivot we take willingly
constexpr double kPivotBreakdown = 1e-12;
constexpr double kDegenerateStep = 1e-10;
constexpr int kBlandTrigger = 50;       // consecutive degenerate pivots
constexpr int kRefactorPeriod = 128;

double clamp_bound(double v, std::vector<char>& flags) {
  if (std::isnan(v)) throw ModelError("variable bound is NaN");
  if (v < -MilpModel::kBoundClamp) {
    flags.back() = 1;
    return -MilpModel::kBoundClamp;
  }
  if (v > MilpModel::kBoundClamp) {
    flags.back() = 1;
    return MilpModel::kBoundClamp;
  }
  return v;
}

}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::TimeLimitSuboptimal: return "time_limit_suboptimal";
    case SolveStatus::Unknown: return "unknown";
  }
  return "?";
}

int MilpModel::add_var(double lo, double hi, bool is_integer, std::string name) {
  lower_was_infinite.push_back(0);
  lower.push_back(clamp_bound(lo, lower_was_infinite));
  upper_was_infinite.push_back(0);
  upper.push_back(clamp_bound(hi, upper_was_infinite));
  integral.push_back(is_integer ? 1 : 0);
  objective.push_back(0.0);
  var_names.push_back(std::move(name));
  return num_vars++;
}

void MilpModel::add_constraint(const std::vector<std::pair<int, double>>& terms,
                               Relation rel, double rhs) {
  Constraint c;
  c.coeffs.assign(num_vars, 0.0);
  for (const auto& [j, v] : terms) {
    if (j < 0 || j >= num_vars) throw ModelError("constraint references unknown variable");
    c.coeffs[j] += v;
  }
  c.rel = rel;
  c.rhs = rhs;
  constraints.push_back(std::move(c));
}

void MilpModel::add_dense_constraint(std::vector<double> row, Relation rel, double rhs) {
  if (static_cast<int>(row.size()) != num_vars)
    throw ModelError("constraint row length != num_vars");
  constraints.push_back(Constraint{std::move(row), rel, rhs});
}

void MilpModel::set_objective_term(int var, double coeff) {
  if (var < 0 || var >= num_vars) throw ModelError("objective references unknown variable");
  objective[var] = coeff;
}

void MilpModel::validate() const {
  if (static_cast<int>(objective.size()) != num_vars ||
      static_cast<int>(lower.size()) != num_vars ||
      static_cast<int>(upper.size()) != num_vars ||
      static_cast<int>(integral.size()) != num_vars)
    throw ModelError("model vectors disagree on num_vars");
  for (int j = 0; j < num_vars; ++j) {
    if (std::isnan(lower[j]) || std::isnan(upper[j]) || !std::isfinite(objective[j]))
      throw ModelError("non-finite bound or objective coefficient");
    if (lower[j] > upper[j]) {
      std::ostringstream os;
      os << "variable " << j << " has lower > upper (" << lower[j] << " > " << upper[j] << ")";
      throw ModelError(os.str());
    }
  }
  for (size_t i = 0; i < constraints.size(); ++i) {
    const auto& c = constraints[i];
    if (static_cast<int>(c.coeffs.size()) != num_vars)
      throw ModelError("constraint " + std::to_string(i) + " row length != num_vars");
    if (!std::isfinite(c.rhs)) throw ModelError("constraint rhs not finite");
    for (double v : c.coeffs)
      if (!std::isfinite(v)) throw ModelError("constraint coefficient not finite");
  }
}

namespace {

// ---------- bounded-variable primal simplex ----------

enum class VarState : int8_t { Basic, AtLo, AtHi };

struct LpOutcome {
  bool feasible = false;
  Eigen::VectorXd x;        // structural values
  double obj = 0.0;         // minimization objective
  Eigen::VectorXd dstruct;  // reduced costs of structurals at optimum
};

class Simplex {
 public:
  Simplex(const MilpModel& model, const std::vector<double>& lo,
          const std::vector<double>& hi)
      : model_(model), ns_(model.num_vars), m_(model.num_rows()) {
    nt_ = ns_ + m_;  // artificials appended later
    A_.resize(m_, nt_);
    A_.setZero();
    b_.resize(m_);
    lo_.assign(nt_, 0.0);
    hi_.assign(nt_, 0.0);
    cost_.assign(nt_, 0.0);
    for (int j = 0; j < ns_; ++j) {
      lo_[j] = lo[j];
      hi_[j] = hi[j];
      cost_[j] = model.sense == ObjSense::Minimize ? model.objective[j]
                                                   : -model.objective[j];
    }
    for (int i = 0; i < m_; ++i) {
      const auto& c = model.constraints[i];
      for (int j = 0; j < ns_; ++j) A_(i, j) = c.coeffs[j];
      int s = ns_ + i;
      A_(i, s) = 1.0;
      b_(i) = c.rhs;
      switch (c.rel) {
        case Relation::LessEq:    lo_[s] = 0.0;  hi_[s] = kInf; break;
        case Relation::Equal:     lo_[s] = 0.0;  hi_[s] = 0.0;  break;
        case Relation::GreaterEq: lo_[s] = -kInf; hi_[s] = 0.0; break;
      }
    }
  }

  LpOutcome run() {
    init_basis_phase1();
    solve_phase(true);
    if (!artificials_cleared()) {
      LpOutcome out;
      out.feasible = false;
      return out;
    }
    // Freeze artificials at zero and switch to the real objective.
    for (int j = ns_ + m_; j < nt_; ++j) { lo_[j] = 0.0; hi_[j] = 0.0; }
    refactorize();
    solve_phase(false);
    return extract();
  }

 private:
  const MilpModel& model_;
  int ns_, m_, nt_;
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
  std::vector<double> lo_, hi_, cost_;
  std::vector<double> phase_cost_;
  std::vector<int> basis_;
  std::vector<int> art_row_;  // artificial column -> the row it patches
  std::vector<VarState> state_;
  Eigen::MatrixXd Binv_;
  Eigen::VectorXd xB_;
  int degenerate_run_ = 0;
  bool bland_ = false;
  int pivots_since_refactor_ = 0;
  int breakdown_run_ = 0;

  double nb_value(int j) const { return state_[j] == VarState::AtHi ? hi_[j] : lo_[j]; }

  // Nonbasic start value: the finite bound nearest zero.
  VarState start_state(int j) const {
    double l = lo_[j], h = hi_[j];
    if (!std::isfinite(l)) return VarState::AtHi;
    if (!std::isfinite(h)) return VarState::AtLo;
    return std::abs(l) <= std::abs(h) ? VarState::AtLo : VarState::AtHi;
  }

  void init_basis_phase1() {
    state_.assign(nt_, VarState::AtLo);
    for (int j = 0; j < ns_; ++j) state_[j] = start_state(j);
    // Provisional slack basis; rows whose slack value falls outside the
    // slack's bounds get an artificial column instead.
    Eigen::VectorXd r = b_;
    for (int j = 0; j < ns_; ++j) {
      double v = nb_value(j);
      if (v != 0.0) r -= A_.col(j) * v;
    }
    basis_.assign(m_, -1);
    std::vector<std::pair<int, double>> artificial;  // (row, signed excess)
    for (int i = 0; i < m_; ++i) {
      int s = ns_ + i;
      if (r(i) >= lo_[s] - 1e-30 && r(i) <= hi_[s] + 1e-30) {
        basis_[i] = s;
        state_[s] = VarState::Basic;
      } else if (r(i) > hi_[s]) {
        state_[s] = VarState::AtHi;
        artificial.emplace_back(i, r(i) - hi_[s]);
      } else {
        state_[s] = VarState::AtLo;
        artificial.emplace_back(i, r(i) - lo_[s]);  // negative
      }
    }
    if (!artificial.empty()) {
      int base = nt_;
      nt_ += static_cast<int>(artificial.size());
      A_.conservativeResize(Eigen::NoChange, nt_);
      lo_.resize(nt_);
      hi_.resize(nt_);
      cost_.resize(nt_, 0.0);
      state_.resize(nt_, VarState::AtLo);
      art_row_.clear();
      for (size_t k = 0; k < artificial.size(); ++k) {
        int j = base + static_cast<int>(k);
        auto [row, excess] = artificial[k];
        A_.col(j).setZero();
        A_(row, j) = excess > 0 ? 1.0 : -1.0;
        lo_[j] = 0.0;
        hi_[j] = kInf;
        cost_[j] = 0.0;
        basis_[row] = j;
        state_[j] = VarState::Basic;
        art_row_.push_back(row);
      }
    }
    phase_cost_.assign(nt_, 0.0);
    for (int j = ns_ + m_; j < nt_; ++j) phase_cost_[j] = 1.0;
    refactorize();
  }

  double artificial_mass() const {
    double s = 0.0;
    for (int i = 0; i < m_; ++i)
      if (basis_[i] >= ns_ + m_) s += std::max(0.0, xB_(i));
    return s;
  }

  // A leftover artificial value is the residual of the row it was created
  // for; compare each against that row's own tolerance.  A single aggregate
  // ||b||-scaled test would let one huge rhs mask real infeasibility.
  bool artificials_cleared() const {
    for (int i = 0; i < m_; ++i) {
      int j = basis_[i];
      if (j < ns_ + m_) continue;
      int row = art_row_[static_cast<size_t>(j - ns_ - m_)];
      if (std::abs(xB_(i)) > kFeasibilityTol * (1.0 + std::abs(b_(row))))
        return false;
    }
    return true;
  }

  void refactorize() {
    Eigen::MatrixXd B(m_, m_);
    for (int i = 0; i < m_; ++i) B.col(i) = A_.col(basis_[i]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    Binv_ = lu.inverse();
    if (!Binv_.allFinite()) throw NumericError("simplex basis is numerically singular");
    recompute_xB();
    pivots_since_refactor_ = 0;
  }

  void recompute_xB() {
    Eigen::VectorXd rhs = b_;
    for (int j = 0; j < nt_; ++j) {
      if (state_[j] == VarState::Basic) continue;
      double v = nb_value(j);
      if (v != 0.0) rhs -= A_.col(j) * v;
    }
    xB_ = Binv_ * rhs;
    if (!xB_.allFinite()) throw NumericError("simplex iterate is not finite");
  }

  void solve_phase(bool phase1) {
    const std::vector<double>& c = phase1 ? phase_cost_ : cost_;
    Eigen::VectorXd cvec = Eigen::Map<const Eigen::VectorXd>(c.data(), nt_);
    const long max_iters = 200L * (m_ + nt_) + 1000;
    std::vector<char> skip(nt_, 0);
    for (long iter = 0; iter < max_iters; ++iter) {
      // In phase 1, done as soon as all artificial mass is gone.
      if (phase1 && artificial_mass() <= 1e-12) return;
      Eigen::VectorXd cB(m_);
      for (int i = 0; i < m_; ++i) cB(i) = cvec(basis_[i]);
      Eigen::VectorXd y = Binv_.transpose() * cB;
      Eigen::VectorXd d = cvec - A_.transpose() * y;

      int enter = -1, sigma = 0;
      double best = kPivotAccept;
      for (int j = 0; j < nt_; ++j) {
        if (state_[j] == VarState::Basic || skip[j]) continue;
        if (hi_[j] - lo_[j] < 1e-30) continue;  // fixed
        double score = 0.0;
        int s = 0;
        if (state_[j] == VarState::AtLo && d(j) < -kOptimalityTol) {
          score = -d(j);
          s = +1;
        } else if (state_[j] == VarState::AtHi && d(j) > kOptimalityTol) {
          score = d(j);
          s = -1;
        } else {
          continue;
        }
        if (bland_) {
          enter = j;
          sigma = s;
          break;  // smallest index wins
        }
        if (score > best) {
          best = score;
          enter = j;
          sigma = s;
        }
      }
      if (enter < 0) {
        if (std::any_of(skip.begin(), skip.end(), [](char v) { return v != 0; })) {
          // Everything eligible was rejected for tiny pivots; one refactor
          // retry, then give up.
          std::fill(skip.begin(), skip.end(), 0);
          if (++breakdown_run_ > 2)
            throw NumericError("simplex pivot breakdown: pivots below 1e-12 persist");
          refactorize();
          continue;
        }
        return;  // optimal for this phase
      }

      Eigen::VectorXd w = Binv_ * A_.col(enter);

      // Ratio test: entering variable moves by t in direction sigma.
      double t_best = hi_[enter] - lo_[enter];  // bound flip distance
      int leave = -1;
      double leave_pivot = 0.0;
      for (int i = 0; i < m_; ++i) {
        double wi = w(i);
        if (std::abs(wi) <= 1e-11) continue;
        double delta = -sigma * wi;  // basic i moves by delta * t
        int bj = basis_[i];
        double t_i;
        if (delta > 0) {
          if (!std::isfinite(hi_[bj])) continue;
          t_i = std::max(0.0, hi_[bj] - xB_(i)) / delta;
        } else {
          if (!std::isfinite(lo_[bj])) continue;
          t_i = std::max(0.0, xB_(i) - lo_[bj]) / (-delta);
        }
        bool better = t_i < t_best - 1e-12;
        bool tie = !better && t_i <= t_best + 1e-12;
        if (better || (tie && leave >= 0 &&
                       (bland_ ? basis_[i] < basis_[leave]
                               : std::abs(wi) > std::abs(leave_pivot)))) {
          t_best = t_i;
          leave = i;
          leave_pivot = wi;
        } else if (tie && leave < 0 && t_i <= t_best) {
          t_best = t_i;
          leave = i;
          leave_pivot = wi;
        }
      }

      if (!std::isfinite(t_best))
        throw NumericError("simplex found an unblocked direction (unexpected with boxed variables)");

      if (leave >= 0 && std::abs(leave_pivot) < kPivotBreakdown) {
        // Entering this column would require a degenerate, unstable pivot.
        skip[enter] = 1;
        continue;
      }

      degenerate_run_ = t_best <= kDegenerateStep ? degenerate_run_ + 1 : 0;
      if (degenerate_run_ >= kBlandTrigger) bland_ = true;

      // Apply the move.
      xB_.noalias() -= (sigma * t_best) * w;
      if (leave < 0) {
        // Bound flip, basis unchanged.
        state_[enter] = state_[enter] == VarState::AtLo ? VarState::AtHi : VarState::AtLo;
      } else {
        double enter_val = sigma > 0 ? lo_[enter] + t_best : hi_[enter] - t_best;
        int old = basis_[leave];
        double delta_r = -sigma * w(leave);
        state_[old] = delta_r > 0 ? VarState::AtHi : VarState::AtLo;
        basis_[leave] = enter;
        state_[enter] = VarState::Basic;
        xB_(leave) = enter_val;
        // Product-form update of Binv.
        double piv = w(leave);
        Binv_.row(leave) /= piv;
        for (int i = 0; i < m_; ++i) {
          if (i == leave) continue;
          double wi = w(i);
          if (wi != 0.0) Binv_.row(i) -= wi * Binv_.row(leave);
        }
        if (++pivots_since_refactor_ >= kRefactorPeriod) refactorize();
      }
      std::fill(skip.begin(), skip.end(), 0);
      breakdown_run_ = 0;
    }
    throw NumericError("simplex iteration limit exceeded");
  }

  LpOutcome extract() {
    LpOutcome out;
    out.feasible = true;
    out.x.resize(ns_);
    for (int j = 0; j < ns_; ++j)
      out.x(j) = state_[j] == VarState::Basic ? 0.0 : nb_value(j);
    for (int i = 0; i < m_; ++i)
      if (basis_[i] < ns_) out.x(basis_[i]) = xB_(i);
    out.obj = 0.0;
    for (int j = 0; j < ns_; ++j) out.obj += cost_[j] * out.x(j);
    // Reduced costs of structurals (minimization sense) for the clamp probe.
    Eigen::VectorXd cB(m_);
    for (int i = 0; i < m_; ++i) cB(i) = cost_[basis_[i]];
    Eigen::VectorXd y = Binv_.transpose() * cB;
    out.dstruct.resize(ns_);
    for (int j = 0; j < ns_; ++j)
      out.dstruct(j) = cost_[j] - A_.col(j).head(m_).dot(y);
    return out;
  }
};

LpOutcome solve_lp_internal(const MilpModel& model, const std::vector<double>& lo,
                            const std::vector<double>& hi) {
  Simplex s(model, lo, hi);
  return s.run();
}

// After a clamped solve, a variable pressed against a clamp that stands in
// for an infinite bound, with a reduced cost that still wants to push it
// outward, certifies an unbounded ray.
bool pushes_past_clamp(const MilpModel& model, const LpOutcome& out,
                       const std::vector<double>& lo, const std::vector<double>& hi) {
  for (int j = 0; j < model.num_vars; ++j) {
    if (model.upper_was_infinite[j] && hi[j] >= MilpModel::kBoundClamp &&
        out.x(j) >= hi[j] - 1e-3 && out.dstruct(j) < -1e-7)
      return true;
    if (model.lower_was_infinite[j] && lo[j] <= -MilpModel::kBoundClamp &&
        out.x(j) <= lo[j] + 1e-3 && out.dstruct(j) > 1e-7)
      return true;
  }
  return false;
}

double external_objective(const MilpModel& model, const std::vector<double>& x) {
  double v = 0.0;
  for (int j = 0; j < model.num_vars; ++j) v += model.objective[j] * x[j];
  return v;
}

}  // namespace

MilpSolution solve_lp(const MilpModel& model) {
  model.validate();
  auto t0 = std::chrono::steady_clock::now();
  LpOutcome out = solve_lp_internal(model, model.lower, model.upper);
  MilpSolution sol;
  sol.node_count = 1;
  if (!out.feasible) {
    sol.status = SolveStatus::Infeasible;
  } else if (pushes_past_clamp(model, out, model.lower, model.upper)) {
    sol.status = SolveStatus::Unbounded;
    sol.objective_value = model.sense == ObjSense::Minimize ? -kInf : kInf;
  } else {
    sol.status = SolveStatus::Optimal;
    sol.values.assign(out.x.data(), out.x.data() + model.num_vars);
    sol.objective_value = external_objective(model, sol.values);
  }
  sol.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

namespace {

struct BBNode {
  int parent = -1;
  int var = -1;        // branched variable
  double value = 0.0;  // new bound value
  bool is_upper = false;
  double bound = -kInf;  // parent LP objective (minimization sense)
  long long id = 0;
};

}  // namespace

MilpSolution solve_milp(const MilpModel& model, const SolveBudget& budget,
                        const std::vector<double>* warm_incumbent) {
  model.validate();
  auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  MilpSolution sol;
  bool have_incumbent = false;
  double best_obj = kInf;  // minimization sense
  std::vector<double> best_x;

  if (warm_incumbent) {
    std::string err = solution_violation(model, *warm_incumbent);
    if (!err.empty()) throw ModelError("warm incumbent rejected: " + err);
    best_x = *warm_incumbent;
    double obj = external_objective(model, best_x);
    best_obj = model.sense == ObjSense::Minimize ? obj : -obj;
    have_incumbent = true;
  }

  std::vector<BBNode> arena;
  arena.push_back(BBNode{});  // root: no bound change
  using QEntry = std::pair<double, long long>;  // (bound, arena index)
  std::priority_queue<QEntry, std::vector<QEntry>, std::greater<>> open;
  open.emplace(-kInf, 0);

  std::vector<double> lo, hi;
  bool out_of_budget = false;
  bool root_unbounded = false;

  while (!open.empty()) {
    if (sol.node_count >= budget.max_nodes || elapsed() > budget.max_seconds) {
      out_of_budget = true;
      break;
    }
    auto [bound, idx] = open.top();
    open.pop();
    if (have_incumbent && bound >= best_obj - kOptimalityTol) continue;  // pruned

    // Reconstruct this node's box from the ancestor chain.
    lo = model.lower;
    hi = model.upper;
    for (int a = static_cast<int>(idx); a > 0; a = arena[a].parent) {
      const BBNode& n = arena[a];
      if (n.is_upper)
        hi[n.var] = std::min(hi[n.var], n.value);
      else
        lo[n.var] = std::max(lo[n.var], n.value);
    }
    bool empty_box = false;
    for (int j = 0; j < model.num_vars && !empty_box; ++j)
      if (lo[j] > hi[j]) empty_box = true;
    if (empty_box) continue;

    ++sol.node_count;
    LpOutcome out = solve_lp_internal(model, lo, hi);
    if (!out.feasible) continue;
    if (idx == 0 && pushes_past_clamp(model, out, lo, hi)) {
      root_unbounded = true;
      break;
    }
    if (have_incumbent && out.obj >= best_obj - kOptimalityTol) continue;

    // Most-fractional branching variable, lowest index on ties.
    int branch = -1;
    double best_frac = kIntegralityTol;
    for (int j = 0; j < model.num_vars; ++j) {
      if (!model.integral[j]) continue;
      double f = out.x(j) - std::floor(out.x(j));
      double dist = std::min(f, 1.0 - f);
      if (dist > best_frac + 1e-12) {
        best_frac = dist;
        branch = j;
      }
    }
    if (branch < 0) {
      // Integral: new incumbent.
      if (out.obj < best_obj - kOptimalityTol) {
        best_obj = out.obj;
        best_x.assign(out.x.data(), out.x.data() + model.num_vars);
        have_incumbent = true;
      }
      continue;
    }
    double v = out.x(branch);
    BBNode down, up;
    down.parent = up.parent = static_cast<int>(idx);
    down.var = up.var = branch;
    down.is_upper = true;
    down.value = std::floor(v);
    up.is_upper = false;
    up.value = std::ceil(v);
    down.bound = up.bound = out.obj;
    down.id = static_cast<long long>(arena.size());
    arena.push_back(down);
    open.emplace(out.obj, down.id);
    up.id = static_cast<long long>(arena.size());
    arena.push_back(up);
    open.emplace(out.obj, up.id);
  }

  if (root_unbounded) {
    sol.status = SolveStatus::Unbounded;
    sol.objective_value = model.sense == ObjSense::Minimize ? -kInf : kInf;
  } else if (out_of_budget) {
    if (have_incumbent) {
      sol.status = SolveStatus::TimeLimitSuboptimal;
      sol.values = best_x;
      sol.objective_value = external_objective(model, best_x);
    } else {
      sol.status = SolveStatus::Unknown;
    }
  } else if (have_incumbent) {
    sol.status = SolveStatus::Optimal;
    sol.values = best_x;
    sol.objective_value = external_objective(model, best_x);
  } else {
    sol.status = SolveStatus::Infeasible;
  }
  sol.wall_time_s = elapsed();
  return sol;
}

FeasibilityResult check_feasible(const MilpModel& model, const SolveBudget& budget) {
  MilpModel m = model;
  std::fill(m.objective.begin(), m.objective.end(), 0.0);
  m.sense = ObjSense::Minimize;
  MilpSolution s = solve_milp(m, budget);
  FeasibilityResult r;
  switch (s.status) {
    case SolveStatus::Optimal:
    case SolveStatus::TimeLimitSuboptimal:
      r.verdict = FeasibilityResult::Verdict::Feasible;
      r.witness = std::move(s.values);
      break;
    case SolveStatus::Infeasible:
      r.verdict = FeasibilityResult::Verdict::Infeasible;
      break;
    default:
      r.verdict = FeasibilityResult::Verdict::Unknown;
      break;
  }
  return r;
}

std::string solution_violation(const MilpModel& model, const std::vector<double>& values) {
  std::ostringstream os;
  if (static_cast<int>(values.size()) != model.num_vars) {
    os << "value vector length " << values.size() << " != num_vars " << model.num_vars;
    return os.str();
  }
  for (int j = 0; j < model.num_vars; ++j) {
    double v = values[j];
    double tol = kFeasibilityTol * (1.0 + std::abs(v));
    if (v < model.lower[j] - tol || v > model.upper[j] + tol) {
      os << "variable " << j << " = " << v << " outside [" << model.lower[j] << ", "
         << model.upper[j] << "]";
      return os.str();
    }
    if (model.integral[j] && std::abs(v - std::round(v)) > kIntegralityTol) {
      os << "variable " << j << " = " << v << " violates integrality";
      return os.str();
    }
  }
  for (int i = 0; i < model.num_rows(); ++i) {
    const auto& c = model.constraints[i];
    double lhs = 0.0;
    for (int j = 0; j < model.num_vars; ++j) lhs += c.coeffs[j] * values[j];
    double tol = kFeasibilityTol * (1.0 + std::abs(c.rhs));
    bool bad = false;
    switch (c.rel) {
      case Relation::LessEq: bad = lhs > c.rhs + tol; break;
      case Relation::Equal: bad = std::abs(lhs - c.rhs) > tol; break;
      case Relation::GreaterEq: bad = lhs < c.rhs - tol; break;
    }
    if (bad) {
      os << "constraint " << i << " violated: lhs = " << lhs << ", rhs = " << c.rhs;
      return os.str();
    }
  }
  return {};
}

}  // namespace tclcoord
