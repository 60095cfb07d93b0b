#pragma once

#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

namespace tclcoord {

// One bus of a radial feeder.  buses[0] is the substation (slack) bus and
// has parent == -1; every other bus names its parent and carries the
// impedance of the line feeding it.  Loads are consuming (>= 0) — there is
// no generation below the substation.  That one-way flow is what makes bus
// voltages fall monotonically with load, which in turn lets the power bound
// below be a plain bisection.
struct FeederBus {
  std::string name;
  int parent = -1;
  double r = 0.0;          // line from parent, p.u.
  double x = 0.0;          // line from parent, p.u.
  double load_kw = 0.0;    // uncontrollable active load
  double load_kvar = 0.0;  // uncontrollable reactive load
  double tcl_share = 0.0;  // fraction of the aggregate TCL draw served here
};

struct NetworkModel {
  std::vector<FeederBus> buses;
  double v_slack = 1.0;            // p.u.
  double v_min = 0.95;             // p.u., scenario default floor
  double s_base_kva = 1000.0;      // kW <-> p.u. conversion base
  double tcl_power_factor = 0.97;  // lagging; TCL kvar = kW * tan(acos(pf))
  double p_cap_kw = 0.0;           // upper bracket for the bound search

  // Throws ConfigError naming the offending field.  Checks tree shape
  // (slack first, one root, no cycles), r > 0 and x > 0 on every line,
  // loads and shares >= 0, shares summing to 1 within 1e-9, and positive
  // bases, caps, and slack voltage.
  void validate() const;
};

struct PowerFlowResult {
  std::vector<std::complex<double>> v;  // per-bus phasor, slack at angle 0
  std::vector<double> v_mag;            // |v|, p.u.
  double residual = 0.0;                // largest voltage update, last sweep
  int iterations = 0;
};

struct VoltageCheck {
  bool ok = true;
  std::vector<int> violating;  // bus indices strictly below the floor
};

inline constexpr double kPowerFlowTol = 1e-8;  // max |dV| between sweeps
inline constexpr int kPowerFlowMaxIter = 100;
inline constexpr double kBoundTolKw = 0.1;  // bisection granularity

// Backward/forward sweep at a given aggregate TCL draw.  p_agg_kw >= 0 is
// split over buses by tcl_share; TCL reactive power follows
// tcl_power_factor.  Converged means residual < kPowerFlowTol; past the
// iteration cap (or on voltage collapse) throws NumericError carrying the
// last residual.
PowerFlowResult solve_power_flow(const NetworkModel& net, double p_agg_kw);

VoltageCheck check_voltages(const PowerFlowResult& res, double v_min);

// Largest aggregate TCL draw (kW) keeping every bus at or above v_min,
// located by bisection over [0, p_cap_kw] to within kBoundTolKw.  A feeder
// whose uncontrollable load alone sags below the floor is rejected
// (ModelError); a power flow that fails to converge counts as unsafe.
double compute_safe_power_bound(const NetworkModel& net, double v_min);

// Feeder description file (see data/feeder12.json).  When no bus gives
// tcl_share, the shares spread uniformly over buses with positive active
// load.  Throws ConfigError on parse or validation failure.
NetworkModel load_feeder(std::istream& is);

}  // namespace tclcoord
