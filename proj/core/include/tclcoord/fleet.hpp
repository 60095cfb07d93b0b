#pragma once

#include <string>
#include <vector>

#include "tclcoord/aggregate.hpp"

namespace tclcoord {

// One physical unit.  `theta` follows the continuous dynamics; `cell` is the
// companion abstract state and advances through the successor table, never by
// re-quantizing theta — that keeps the fleet histogram exactly equal to the
// aggregate state the controller sees, while theta stays within epsilon of
// the cell center.
struct Subsystem {
  int group = 0;
  double theta = 0.0;
  int mode = kModeOn;
  int lock = 0;  // 0 = unlocked; else steps since the switch, up to the lockout
  int cell = 0;
  bool locked_switch = false;  // last step commanded this unit while locked
};

struct FleetModel {
  std::vector<GroupDynamics> groups;
  std::vector<const AbstractionSpec*> specs;
  std::vector<const AggregateGraph*> graphs;
  void validate() const;
};

struct FleetState {
  std::vector<Subsystem> units;  // group-major, as dealt by init_fleet
};

struct SwitchCommand {
  int unit = 0;  // index into FleetState::units
  int to_mode = 0;
};

// Deals each group's population cyclically over (mode, safe cell) pairs, with
// temperatures pinned to the cell centers and all lockout counters zero, so
// the starting histogram is exactly representable.
FleetState init_fleet(const FleetModel& model);

// Places units to realize the given occupancy exactly, reading (mode, lock,
// cell) off `graphs` — pass the graph family that indexed `xs`, which may be
// a lockout-free twin of the model's own.  Temperatures sit at cell centers.
FleetState init_fleet(const FleetModel& model,
                      const std::vector<std::vector<long long>>& xs,
                      const std::vector<const AggregateGraph*>& graphs);

// Occupancy per group over the graph's (mode, lock, cell) nodes.
std::vector<std::vector<long long>> fleet_histogram(const FleetModel& model,
                                                    const FleetState& fleet);

// Turns aggregate switch counts into per-unit commands: for each (m1,m2,k)
// bucket, a seeded-uniform sample without replacement of the resident units.
// Requires the fleet histogram to equal `xs` and u to be admissible.  With
// `ignore_lockout`, locked residents join the candidate pool (their switches
// are applied and later reported by the monitor, not blocked) and u is only
// required to fit the lock-collapsed occupancy.
std::vector<SwitchCommand> disaggregate(const FleetModel& model, const FleetState& fleet,
                                        const std::vector<std::vector<long long>>& xs,
                                        const std::vector<std::vector<long long>>& us,
                                        unsigned seed, bool ignore_lockout = false);

// Applies one step: commanded units change mode and restart their lockout,
// every unit's temperature follows its (new) mode's affine map, companion
// cells advance through the successor table, lockout counters climb and
// clear.  Commands must name distinct units and a genuinely different mode.
void step_fleet(const FleetModel& model, FleetState& fleet,
                const std::vector<SwitchCommand>& commands);

struct Violation {
  enum class Kind { Deadband, Lockout, AggregateBound } kind = Kind::Deadband;
  int group = -1;
  int unit = -1;  // units only; -1 on aggregate entries
  int mode = -1;  // aggregate entries only
  double value = 0.0;  // offending temperature or power
  double bound = 0.0;  // the limit that was crossed
  std::string what;
};

struct ViolationLog {
  struct Entry {
    int t = 0;
    Violation v;
  };
  std::vector<Entry> entries;  // append-only
  void append(int t, const std::vector<Violation>& vs);
  long long count(Violation::Kind k) const;
};

// Ground-truth constraint check on the physical fleet: temperatures against
// each group's dead-band, last step's locked switches, and per-mode weighted
// power against the band.
std::vector<Violation> monitor_fleet(const FleetModel& model, const FleetState& fleet,
                                     const SafeSetSpec& s);

// Weighted power per mode, kW (same weights the safety band uses).
std::vector<double> fleet_mode_power(const FleetModel& model, const FleetState& fleet,
                                     const SafeSetSpec& s);

// Root-mean-square tracking error between a power trace and its reference.
double rmse(const std::vector<double>& signal, const std::vector<double>& reference);

}  // namespace tclcoord
