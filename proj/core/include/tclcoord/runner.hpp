#pragma once

#include <string>
#include <vector>

#include "tclcoord/fleet.hpp"
#include "tclcoord/network.hpp"
#include "tclcoord/scenario.hpp"

namespace tclcoord {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRunFailure = 1;  // no safe cycle, controller died
inline constexpr int kExitBadConfig = 2;

// Everything derived offline from a scenario: dynamics, abstractions,
// transition graphs, cycle families, the safety band, and (for the
// lockout-blind benchmark) the lockout-free twin of each graph.  The
// ControlArtifacts members point into the sibling vectors, so the struct is
// movable but deliberately not copyable.
struct ScenarioBuild {
  std::vector<GroupDynamics> groups;
  std::vector<AbstractionSpec> specs;
  std::vector<AggregateGraph> graphs;
  std::vector<AggMatrices> mats;
  ControlArtifacts art;

  std::vector<GroupDynamics> reduced_groups;
  std::vector<AggregateGraph> reduced_graphs;
  std::vector<AggMatrices> reduced_mats;
  ControlArtifacts reduced_art;
  bool has_reduced = false;

  NetworkModel net;
  bool has_network = false;
  double network_bound_kw = 0.0;  // NaN unless derived from the network

  ScenarioBuild() = default;
  ScenarioBuild(const ScenarioBuild&) = delete;
  ScenarioBuild& operator=(const ScenarioBuild&) = delete;
  ScenarioBuild(ScenarioBuild&&) = default;
  ScenarioBuild& operator=(ScenarioBuild&&) = default;
};

// Builds all offline artifacts.  Throws ModelError when the safe subgraph
// has no cycle and the controller needs a terminal family; benchmark1/2
// tolerate an empty family.
ScenarioBuild build_scenario(const Scenario& sc);

struct StepRecord {
  int t = 0;
  SolveStatus status = SolveStatus::Unknown;
  double cost_kw = 0.0;         // |draw - reference| entering this step
  double consumption_kw = 0.0;  // draw of the state entering this step
  double reference_kw = 0.0;
  double slack_lo_kw = 0.0;  // consumption - lower band edge
  double slack_hi_kw = 0.0;  // upper band edge - consumption
  long long node_count = 0;
  double bound_kw = 0.0;  // network bound logged this step; NaN when off
  bool undervoltage = false;
  double wall_time_s = 0.0;  // kept out of the CSVs (not reproducible)
};

struct FleetRow {
  int t = 0, unit = 0, group = 0, mode = 0, lock = 0;
  double theta = 0.0;
};

struct RunReport {
  std::string scenario_name;
  ControllerKind kind = ControllerKind::InvSetMpc;
  int steps_requested = 0;
  int completed_steps = 0;  // fleet steps actually executed
  int infeasible_at = -1;   // first step with no plan, -1 when none
  std::string stop_reason = "completed";
  double rmse_kw = 0.0;
  int lockout_violations = 0;
  double lockout_pct_per_step = 0.0;  // 100 * violations / (steps * units)
  int deadband_violations = 0;
  int bound_violation_steps = 0;  // executed steps entering above/below band
  int undervoltage_steps = 0;
  double mean_solve_s = 0.0;
  long long total_nodes = 0;
  double network_bound_kw = 0.0;  // NaN when not derived
  int exit_code = kExitOk;

  std::vector<StepRecord> trace;
  std::vector<std::vector<double>> voltages;  // per trace row (network only)
  ViolationLog log;
  std::vector<FleetRow> fleet_rows;  // run.fleet_trace only
};

// Runs the closed loop against the fleet; no files are touched.
RunReport simulate_scenario(const Scenario& sc, const ScenarioBuild& build);

// trace.csv, violations.csv, voltages.csv (network runs), cycles.json,
// summary.txt, and the optional fleet/graph dumps, all under out_dir.
void write_artifacts(const Scenario& sc, const ScenarioBuild& build,
                     const RunReport& report, const std::string& out_dir);

// run.output_dir, made absolute: kept as-is when absolute, otherwise under
// $TCLCOORD_OUTPUT_ROOT when set, else relative to the working directory.
std::string resolve_output_dir(const Scenario& sc);

// build + simulate + write, the `run` verb.
RunReport run_scenario(const Scenario& sc);

const char* solve_status_name(SolveStatus s);

}  // namespace tclcoord
