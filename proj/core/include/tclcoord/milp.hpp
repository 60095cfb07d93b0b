#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace tclcoord {

// Self-contained mixed-integer linear programming core: bounded-variable
// primal simplex underneath a best-bound branch-and-bound.  Small and
// deterministic rather than fast; every consumer in this project runs at
// desk scale.

enum class Relation { LessEq, Equal, GreaterEq };
enum class ObjSense { Minimize, Maximize };

enum class SolveStatus {
  Optimal,
  Infeasible,
  Unbounded,
  // Budget ran out but an incumbent exists; values hold the incumbent.
  TimeLimitSuboptimal,
  // Budget ran out with no incumbent: feasibility unknown, not Infeasible.
  Unknown,
};

const char* to_string(SolveStatus s);

struct Constraint {
  std::vector<double> coeffs;  // dense, length == num_vars
  Relation rel = Relation::LessEq;
  double rhs = 0.0;
};

struct MilpModel {
  // Bounds beyond +-kBoundClamp (or infinities) are clamped on entry; the
  // *_was_infinite flags remember that so the solver can tell a genuinely
  // unbounded ray from a solution that merely sits on a big finite bound.
  static constexpr double kBoundClamp = 1e9;

  int num_vars = 0;
  ObjSense sense = ObjSense::Minimize;
  std::vector<double> objective;
  std::vector<Constraint> constraints;
  std::vector<double> lower, upper;
  std::vector<char> lower_was_infinite, upper_was_infinite;
  std::vector<char> integral;
  std::vector<std::string> var_names;  // optional; synthesized in dumps

  int add_var(double lo, double hi, bool is_integer, std::string name = {});
  // Terms are (var index, coefficient); unmentioned vars get 0.
  void add_constraint(const std::vector<std::pair<int, double>>& terms,
                      Relation rel, double rhs);
  void add_dense_constraint(std::vector<double> row, Relation rel, double rhs);
  void set_objective_term(int var, double coeff);

  int num_rows() const { return static_cast<int>(constraints.size()); }
  // Throws ModelError if any structural invariant is broken.
  void validate() const;
};

struct SolveBudget {
  long long max_nodes = 1'000'000;
  double max_seconds = 60.0;
};

struct MilpSolution {
  SolveStatus status = SolveStatus::Unknown;
  std::vector<double> values;  // empty unless Optimal/TimeLimitSuboptimal
  double objective_value = std::numeric_limits<double>::quiet_NaN();
  long long node_count = 0;
  double wall_time_s = 0.0;
};

// Tolerances shared by the solver and its consumers.
inline constexpr double kIntegralityTol = 1e-6;
inline constexpr double kFeasibilityTol = 1e-6;  // scaled by (1 + |rhs|)
inline constexpr double kOptimalityTol = 1e-9;   // reduced-cost certificate

// LP relaxation only (integrality flags ignored).
MilpSolution solve_lp(const MilpModel& model);

// Branch and bound: most-fractional branching (lowest index on ties),
// best-bound node selection, deterministic for a fixed model.  An optional
// warm incumbent (a known-feasible point) seeds the primal bound; it is
// validated and rejected with ModelError if it is not actually feasible.
MilpSolution solve_milp(const MilpModel& model, const SolveBudget& budget,
                        const std::vector<double>* warm_incumbent = nullptr);

struct FeasibilityResult {
  enum class Verdict { Feasible, Infeasible, Unknown } verdict;
  std::vector<double> witness;  // populated when Feasible
};

// Zero-objective solve; Unknown maps budget exhaustion without incumbent.
FeasibilityResult check_feasible(const MilpModel& model,
                                 const SolveBudget& budget);

// Returns "" when `values` satisfies bounds, rows (within kFeasibilityTol
// scaled) and integrality; otherwise a description of the first breach.
std::string solution_violation(const MilpModel& model,
                               const std::vector<double>& values);

// Fixed-column MPS dump (see docs/mps-format.md for the exact layout).
void write_fixed_mps(const MilpModel& model, std::ostream& os,
                     const std::string& name = "TCLCOORD");

}  // namespace tclcoord
