#pragma once

#include <string>
#include <vector>

namespace tclcoord {

// Mode convention used across the whole library: mode 0 draws electrical
// power ("on"), mode 1 coasts toward ambient ("off").
inline constexpr int kModeOn = 0;
inline constexpr int kModeOff = 1;

// One homogeneous group of thermostatic loads sharing thermal parameters.
// The per-step temperature map is affine in theta for every mode:
//   theta' = a*theta + (1-a)*target(mode)
// where target(on) = ambient - r_thermal*p_transfer and target(off) = ambient.
struct GroupDynamics {
  int id = 0;
  int dimension = 1;
  int mode_count = 2;
  double ambient_c = 0.0;
  double a = 0.0;  // exp(-dt / (R*C)); the per-mode contraction rate
  double r_thermal = 0.0;       // °C per kW
  double p_transfer_kw = 0.0;   // thermal transfer while on
  double p_electrical_kw = 0.0; // metered draw while on (transfer / COP)
  double domain_lo = 0.0, domain_hi = 0.0;
  double deadband_lo = 0.0, deadband_hi = 0.0;
  std::vector<double> contraction;  // L_m, one per mode; equals a here
  std::vector<double> radius;       // contraction radius per mode
  std::vector<int> lockout;         // minimum dwell steps after switching in
  int population = 0;

  double mode_target(int mode) const {
    return mode == kModeOn ? ambient_c - r_thermal * p_transfer_kw : ambient_c;
  }
  double step(double theta, int mode) const {
    return a * theta + (1.0 - a) * mode_target(mode);
  }
  bool in_domain(double theta) const {
    return theta >= domain_lo && theta <= domain_hi;
  }
  bool in_deadband(double theta) const {
    return theta >= deadband_lo && theta <= deadband_hi;
  }
  void validate() const;  // throws ModelError on broken invariants
};

struct StepOutcome {
  double value;
  bool left_domain;
};

inline StepOutcome step_checked(const GroupDynamics& g, double theta, int mode) {
  double v = g.step(theta, mode);
  return StepOutcome{v, !g.in_domain(v)};
}

// Convenience constructor for the usual two-mode load.
GroupDynamics make_tcl_group(int id, double ambient_c, double a, double r_thermal,
                             double p_transfer_kw, double cop, double domain_lo,
                             double domain_hi, double deadband_lo, double deadband_hi,
                             int lockout_on, int lockout_off, int population);

}  // namespace tclcoord
