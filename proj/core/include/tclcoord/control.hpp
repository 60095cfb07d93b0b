#pragma once

#include <string>
#include <vector>

#include "tclcoord/aggregate.hpp"
#include "tclcoord/invariant.hpp"
#include "tclcoord/milp.hpp"

namespace tclcoord {

enum class ControllerKind { InvSetMpc, Benchmark1, Benchmark2, Benchmark3 };
const char* to_string(ControllerKind k);

struct ControllerConfig {
  ControllerKind kind = ControllerKind::InvSetMpc;
  int horizon = 1;
  SolveBudget budget{50000, 10.0};
  std::vector<double> reference;  // kW, indexed by absolute step
  double tracking_weight = 1.0;
  // Throws ConfigError unless the reference covers steps t .. t+horizon.
  void validate(int t) const;
};

// Everything a controller step reads; graphs/matrices owned elsewhere.
// Benchmark3 expects artifacts built on the lockout-free twin of the system
// and states projected with project_no_lockout.
struct ControlArtifacts {
  std::vector<const AggregateGraph*> graphs;
  std::vector<const AggMatrices*> mats;
  std::vector<std::vector<SafeCycle>> cycles;  // per group; used by terminal kinds
  SafeSetSpec safe;
};

struct StepResult {
  SolveStatus status = SolveStatus::Unknown;
  std::vector<std::vector<long long>> input;                   // u(t), per group
  std::vector<std::vector<std::vector<long long>>> inputs_all; // [stage][group]
  std::vector<std::vector<std::vector<long long>>> predicted;  // [stage 0..h][group]
  CycleAssignment terminal;  // terminal-set witness (InvSetMpc / Benchmark3)
  bool has_terminal = false;
  double objective = 0.0;   // planned-trajectory cost, weighted
  double step_cost = 0.0;   // |consumption(x(t)) - r(t)|, unweighted
  long long node_count = 0;
  double wall_time_s = 0.0;
};

// Weighted consumption of xs against r: |sum_i sum_nodes w_i,mode * x - r|.
double tracking_cost(const std::vector<const AggregateGraph*>& graphs,
                     const std::vector<std::vector<long long>>& xs,
                     const SafeSetSpec& safe, double r);

// Pointwise clamp into [lo, hi].
std::vector<double> truncate_reference(const std::vector<double>& r, double lo,
                                       double hi);

// Occupancy of the lockout-free twin graph: counts collapse over tau.
std::vector<long long> project_no_lockout(const AggregateGraph& full,
                                          const AggregateGraph& reduced,
                                          const std::vector<long long>& x);

// One controller step as an explicit integer program, exposed so candidate
// solutions can be checked against it.  Stage states are continuous
// variables: integral inputs force integral states through the unimodular
// flow rows, so only inputs, occupancies, and extrema bounds are branched.
struct MpcProblem {
  MilpModel model;
  ControllerKind kind = ControllerKind::InvSetMpc;
  int horizon = 0;
  double weight = 1.0;
  std::vector<double> stage_ref;             // r(t+tau), tau = 0..h (Benchmark2: clamped)
  std::vector<std::vector<int>> x_base;      // [tau-1][group]
  std::vector<std::vector<int>> u_base;      // [tau][group]
  int e_base = -1;                           // h epigraph vars
  std::vector<std::vector<int>> beta_base;   // [group][cycle]
  std::vector<std::vector<std::vector<int>>> lo_base, hi_base;  // [group][cycle][mode]
};

MpcProblem build_mpc(ControllerKind kind, const std::vector<std::vector<long long>>& xs,
                     int t, const ControllerConfig& cfg, const ControlArtifacts& art);

// Feasible candidate for the problem at t+1 built from the previous optimal
// plan: drop the executed input, append one rotation of the terminal
// assignment.  Empty when prev carries no terminal data for this shape.
// Feasible candidate that switches nothing and lets temperatures drift.
// Seeds the primal bound for the stage-constrained benchmarks, whose search
// otherwise has no cheap incumbent; empty for the terminal-set kinds, and
// checked (Benchmark1 coasting can drift unsafe) before use.
std::vector<double> coast_candidate(const MpcProblem& prob,
                                    const std::vector<std::vector<long long>>& xs,
                                    const ControlArtifacts& art);

std::vector<double> shift_candidate(const MpcProblem& prob,
                                    const std::vector<std::vector<long long>>& xs,
                                    const StepResult& prev,
                                    const ControlArtifacts& art);

// Solves one receding-horizon step.  Infeasible and Unknown come back in the
// status (Benchmark1 ends runs that way); budget exhaustion with an incumbent
// returns the incumbent as TimeLimitSuboptimal.  `prev`, when given, seeds
// the branch-and-bound with the shift candidate.
StepResult mpc_step(ControllerKind kind, const std::vector<std::vector<long long>>& xs,
                    int t, const ControllerConfig& cfg, const ControlArtifacts& art,
                    const StepResult* prev = nullptr);

}  // namespace tclcoord
