#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tclcoord/control.hpp"

namespace tclcoord {

// One homogeneous load group as configured on disk; mirrors the
// make_tcl_group arguments plus the group's grid pitch.
struct ScenarioGroup {
  double ambient_c = 0.0;
  double a = 0.0;
  double r_thermal = 0.0;
  double p_transfer_kw = 0.0;
  double cop = 1.0;
  double domain_lo = 0.0, domain_hi = 0.0;
  double deadband_lo = 0.0, deadband_hi = 0.0;
  int lockout_on = 0, lockout_off = 0;
  int population = 0;
  double eta = 0.0;  // grid pitch; closeness and margin are shared (below)
};

struct ReferenceSpec {
  enum class Kind { Synthetic, Csv };
  Kind kind = Kind::Synthetic;
  std::string csv_path;  // relative to the scenario file
  // Synthetic generator: a seeded random walk held flat for hold_steps at a
  // time, scaled, shifted, then clamped into [lo_kw, hi_kw].
  unsigned seed = 1;
  double lo_kw = 0.0, hi_kw = 0.0;
  int hold_steps = 1;
  double step_kw = 0.0;    // max walk increment per segment
  double start_kw = -1.0;  // negative = start at the band midpoint
  double scale = 1.0;
  double offset_kw = 0.0;
};

struct BoundsSpec {
  std::vector<double> power_lo, power_hi;  // per mode, kW
  // Replace power_hi[kModeOn] with the network-safe bound at run time.
  bool derive_upper_from_network = false;
};

struct ControllerSpec {
  ControllerKind kind = ControllerKind::InvSetMpc;
  int horizon = 1;
  long long max_nodes = 50'000;
  double max_seconds = 10.0;
  int cycles_per_group = 8;
  int max_cycle_length = 12;
  double tracking_weight = 1.0;
};

struct NetworkSpec {
  bool enabled = false;
  std::string feeder_path;  // relative to the scenario file
  double v_min = -1.0;      // negative = use the feeder file's own floor
  bool recompute_bound_per_step = false;  // monitoring only; see runner
};

struct RunSpec {
  int steps = 0;
  unsigned seed = 1;
  std::string output_dir;
  bool fleet_trace = false;
  bool dump_graphs = false;
};

struct Scenario {
  std::string name = "unnamed";
  std::vector<ScenarioGroup> groups;
  double epsilon = 0.0;  // abstraction closeness, shared across groups
  double delta = 0.0;    // deadband erosion margin, shared across groups
  BoundsSpec bounds;
  ControllerSpec controller;
  ReferenceSpec reference;
  NetworkSpec network;
  RunSpec run;
  std::string base_dir;  // directory of the scenario file; not serialized

  // Throws ConfigError naming the offending field.  Re-checks the
  // quantization inequalities ((1-a)*epsilon >= eta/2 and
  // delta >= epsilon + eta/2) per group, band sanity, and that referenced
  // files exist under base_dir.
  void validate() const;
};

// Stable lowercase token for the controller kind ("invset", "benchmark1",
// ...), as used in scenario files and run summaries.
const char* controller_kind_name(ControllerKind k);

// Parses and validates a scenario file; base_dir anchors relative paths.
Scenario parse_scenario(std::istream& is, const std::string& base_dir);

// Canonical form: every field written explicitly, keys sorted.  Parsing the
// output yields a scenario identical to the input.
void save_scenario(const Scenario& sc, std::ostream& os);

// Joins base_dir and a possibly relative path.
std::string resolve_path(const std::string& base_dir, const std::string& path);

// count reference values from the synthetic generator.  Kind::Csv specs
// must go through load_reference_csv instead.
std::vector<double> generate_reference(const ReferenceSpec& ref, int count);

// One kW value per line; '#'-comment, blank, and non-numeric header lines
// are skipped.  Values are taken verbatim.
std::vector<double> load_reference_csv(std::istream& is);

}  // namespace tclcoord
