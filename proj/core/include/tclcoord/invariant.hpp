#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tclcoord/aggregate.hpp"
#include "tclcoord/milp.hpp"

namespace tclcoord {

// Closed walk through safe nodes.  nodes[l] are flattened graph indices in
// canonical rotation (smallest index first); modes[l] is the mode of nodes[l],
// which is also the mode label of the edge entering position l.
struct SafeCycle {
  int group_id = 0;
  std::vector<int> nodes;
  std::vector<int> modes;
  int length() const { return static_cast<int>(nodes.size()); }
};

// "" when the cycle is well-formed on G: nonempty, all nodes safe, and every
// consecutive pair (wrapping) is a graph edge.  Otherwise the first problem.
std::string cycle_violation(const SafeCycle& c, const AggregateGraph& G);

// All simple cycles through safe nodes, found by bounded DFS rooted at each
// cycle's smallest node index, sorted by (length, lexicographic nodes) and
// truncated to max_count.  Throws ModelError when the safe subgraph has no
// cycle at all (no controlled invariant set can exist).
std::vector<SafeCycle> enumerate_safe_cycles(const AggregateGraph& G,
                                             int max_len = 12, int max_count = 64);

// Keeps candidate order but prefers cycles introducing a new per-mode
// position-count signature; returns up to n cycles.
std::vector<SafeCycle> select_cycles(const std::vector<SafeCycle>& candidates, int n);

// One application of the cyclic down-shift: out[(l+1) % len] = beta[l],
// applied q times.  q may exceed the length (period len).
std::vector<long long> shift_occupancy(const std::vector<long long>& beta, int q);

// Number of subsystems sitting on mode-m positions of the cycle after the
// occupancy has been shifted q times.
long long mode_count(const SafeCycle& c, const std::vector<long long>& beta, int mode,
                     int q);

// A family of cycles per group plus how many subsystems ride each position.
struct CycleAssignment {
  std::vector<std::vector<SafeCycle>> cycles;            // [group][j]
  std::vector<std::vector<std::vector<long long>>> beta; // [group][j][pos]
  std::vector<long long> population;                     // per group
  void validate() const;  // shapes, nonnegativity, per-group totals
};

struct OmegaReport {
  bool ok = false;
  // Per mode: weighted worst-case occupancy over all shifts, and slack
  // against the power band (negative slack = violated side).
  std::vector<double> lower_power, upper_power;
  std::vector<double> lower_slack, upper_slack;
};

// Conservative stationarity check: sum of per-cycle worst cases against the
// power band.  Passing it certifies the rotating assignment (see
// verify_invariance); failing it does not always mean a real violation.
OmegaReport omega_check(const CycleAssignment& ca, const SafeSetSpec& s);

// Scatter-adds each cycle's occupancy onto graph nodes.
std::vector<std::vector<long long>> lift(const CycleAssignment& ca,
                                         const std::vector<const AggregateGraph*>& graphs);

// Aggregate input that realizes one shift step for `group`: every occupant
// whose next cycle position changes mode becomes a commanded switch.
std::vector<long long> shift_input(const CycleAssignment& ca, int group,
                                   const AggregateGraph& G);

struct MembershipResult {
  FeasibilityResult::Verdict verdict = FeasibilityResult::Verdict::Unknown;
  CycleAssignment witness;  // filled when Feasible
};

// Implicit invariant-set membership: does any occupancy of the selected
// cycles reproduce x exactly while staying inside the power band at every
// shift?  Encoded as an ILP; min/max over shifts are linearized exactly with
// one bounding variable pair per (group, cycle, mode).
MembershipResult membership(const std::vector<std::vector<long long>>& xs,
                            const std::vector<std::vector<SafeCycle>>& cycles,
                            const std::vector<const AggregateGraph*>& graphs,
                            const SafeSetSpec& s, const SolveBudget& budget = {});

struct InvarianceResult {
  bool ok = false;
  int fail_step = -1;
  std::string what;
};

// Replays the rotating strategy for `steps` steps (0 = one full common
// period): builds the explicit shift input, checks admissibility, steps the
// aggregate dynamics, confirms the state matches the shifted lift, and checks
// safety at every step.
InvarianceResult verify_invariance(const CycleAssignment& ca,
                                   const std::vector<const AggregateGraph*>& graphs,
                                   const std::vector<const AggMatrices*>& mats,
                                   const SafeSetSpec& s, int steps = 0);

void save_cycles(const std::vector<std::vector<SafeCycle>>& per_group,
                 std::ostream& os);
std::vector<std::vector<SafeCycle>> load_cycles(std::istream& is);

}  // namespace tclcoord
