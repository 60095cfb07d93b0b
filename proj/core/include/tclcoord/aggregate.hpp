#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tclcoord/abstraction.hpp"

namespace tclcoord {

// Node of the lockout-augmented transition graph: (mode, lockout phase, cell).
// tau counts steps since the last switch: a subsystem arrives at
// tau = min(1, lockout), climbs one layer per step, and drops to tau = 0
// (unlocked) after passing lockout; tau = 0 loops on itself.
struct NodeId {
  int mode = 0, tau = 0, cell = 0;
  bool operator==(const NodeId&) const = default;
};

struct AggEdge {
  NodeId from, to;
  int rule = 0;  // 1 unlocked-stay, 2 lockout-climb, 3 lockout-release, 4 switch
};

// Coordinate-list sparse matrix; entries are appended in build order.
struct SparseMatrix {
  int rows = 0, cols = 0;
  struct Entry {
    int row, col;
    double value;
  };
  std::vector<Entry> entries;

  void add(int r, int c, double v) { entries.push_back(Entry{r, c, v}); }
  std::vector<double> apply(const std::vector<double>& v) const;
  std::vector<long long> apply(const std::vector<long long>& v) const;
};

struct AggregateGraph {
  int group_id = 0;
  int mode_count = 0;  // M
  int cell_count = 0;  // K
  std::vector<int> lockout;      // per mode
  std::vector<int> mode_offset;  // size M+1; see node_index
  int state_dim = 0;             // K * sum_m (lockout_m + 1)
  int input_dim = 0;             // K * M * (M - 1)
  std::vector<AggEdge> edges;
  std::vector<char> node_safe;           // size state_dim
  std::vector<std::vector<int>> preds;   // per node: indices into `edges`

  // Lexicographic (mode, tau, cell) flattening.
  int node_index(int m, int tau, int k) const {
    return mode_offset[static_cast<size_t>(m)] + tau * cell_count + k;
  }
  NodeId node_at(int idx) const;

  struct InputId {
    int from_mode = 0, to_mode = 0, cell = 0;
  };
  // Lexicographic (from_mode, to_mode, cell) flattening with the diagonal
  // removed from the mode pairs.
  int input_index(int m1, int m2, int k) const {
    int pos = m2 < m1 ? m2 : m2 - 1;
    return (m1 * (mode_count - 1) + pos) * cell_count + k;
  }
  InputId input_at(int idx) const;
};

AggregateGraph build_graph(const AbstractionSpec& spec, const GroupDynamics& g,
                           int group_id = 0);

// Linear step data.  `autonomous` (A) and `switch_in` (B) are the 0/1 edge
// matrices; `switch_out` (C) removes switchers from the unlocked row their
// rule-1 edge would otherwise deliver them to, so the step is
//   x+ = A x + (B - C) u.
struct AggMatrices {
  SparseMatrix autonomous;  // state_dim x state_dim
  SparseMatrix switch_in;   // state_dim x input_dim
  SparseMatrix switch_out;  // state_dim x input_dim
};

AggMatrices build_matrices(const AggregateGraph& G);

// "" when u is admissible for x; otherwise a description of the first breach
// (negative counts, or more switchers than unlocked occupants at some (m, k)).
std::string input_violation(const AggregateGraph& G, const std::vector<long long>& x,
                            const std::vector<long long>& u);

// Applies one aggregate step; throws ModelError when u is inadmissible.
std::vector<long long> step_aggregate(const AggMatrices& M, const AggregateGraph& G,
                                      const std::vector<long long>& x,
                                      const std::vector<long long>& u);

// Power-band safety description shared by all groups: per-mode aggregate
// bounds in kW and per-group per-mode draw weights.
struct SafeSetSpec {
  std::vector<double> power_lo, power_hi;     // per mode
  std::vector<std::vector<double>> weight;    // [group][mode], kW per subsystem
  void validate() const;
};

struct SafetyViolation {
  int group = -1;  // -1 for aggregate power-band breaches
  int mode = -1, tau = -1, cell = -1;
  std::string what;
};

struct SafetyResult {
  bool safe = false;
  std::vector<SafetyViolation> violations;
  std::vector<double> mode_power;  // weighted occupancy per mode, kW
};

SafetyResult is_safe_state(const std::vector<const AggregateGraph*>& graphs,
                           const std::vector<std::vector<long long>>& xs,
                           const SafeSetSpec& s);

// One `(m1,t1,k1) -> (m2,t2,k2)` line per edge, in build order.
void write_edge_list(const AggregateGraph& G, std::ostream& os);

}  // namespace tclcoord
