#pragma once

#include <cmath>
#include <iosfwd>
#include <string>
#include <vector>

#include "tclcoord/dynamics.hpp"

namespace tclcoord {

// Quantizer: maps theta to the center of its half-open grid cell
// [j*eta, (j+1)*eta).  Pure formula, no clamping.
inline double abstract_point(double eta, double theta) {
  return eta * std::floor(theta / eta) + 0.5 * eta;
}

struct BisimViolation {
  int mode;
  double required;  // (1 - L_m) * epsilon
  double available; // eta / 2
};

struct BisimReport {
  bool ok = false;
  std::vector<BisimViolation> violations;
  // Smallest epsilon that would satisfy (1 - L_m)*eps >= eta/2 for all modes.
  double min_epsilon = 0.0;
  // Non-fatal warnings (e.g. epsilon larger than a contraction radius).
  std::string note;
};

// Checks the quantization error bound (1 - L_m)*eps >= eta/2 for every mode.
// Equality is accepted.
BisimReport validate_bisimulation(const GroupDynamics& g, double eta, double eps);

// Uniform grid of cell centers covering [lo, hi].  Cell j spans
// [j*eta, (j+1)*eta); when hi lands exactly on a boundary the top cell is the
// one below it, so [0,1] at eta=0.5 yields centers {0.25, 0.75}.
struct GridLayout {
  long long base_cell = 0;
  std::vector<double> centers;
};
GridLayout grid_centers(double eta, double lo, double hi);

// Finite-state abstraction of one group: a uniform grid of cell centers over
// the domain, one successor table per mode, and the set of cells whose
// centers survive erosion of the deadband by delta.
struct AbstractionSpec {
  double eta = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  long long base_cell = 0;             // grid[k] sits at (base_cell + k + 1/2)*eta
  std::vector<double> grid;            // K strictly increasing centers
  std::vector<std::vector<int>> succ;  // [mode][k] -> k'
  std::vector<int> safe;               // sorted safe cell indices
  std::vector<char> safe_mask;         // size K
  // clamped[mode][k] != 0 when the true successor fell outside the domain and
  // was pinned to the boundary cell; such nodes sit next to the unsafe rim.
  std::vector<std::vector<char>> clamped;

  int cell_count() const { return static_cast<int>(grid.size()); }
  bool is_safe(int k) const { return safe_mask[static_cast<size_t>(k)] != 0; }
  // Grid cell containing theta, clamped into [0, K).
  int cell_of(double theta) const;
};

// Builds the abstraction.  Preconditions (checked, ModelError on failure):
// validate_bisimulation(g, eta, eps).ok, and delta >= eps + eta/2 + 1e-12.
// Throws if erosion leaves no safe cell.
AbstractionSpec build_abstraction(const GroupDynamics& g, double eta, double eps,
                                  double delta);

// Default safety margin: the smallest delta the builder accepts.
inline double default_delta(double eta, double eps) { return eps + 0.5 * eta + 1e-9; }

// Largest per-mode pointwise deviation |member.step - g.step| sampled at grid
// resolution eta over g's domain.
std::vector<double> model_deviation(const GroupDynamics& g, const GroupDynamics& member,
                                    double eta);

// True when `member` can ride on g's abstraction with closeness eps:
// (1 - L_m)*eps >= eta/2 + deviation_m for every mode.
bool admits_member(const GroupDynamics& g, const GroupDynamics& member, double eta,
                   double eps);

void save_abstraction(const AbstractionSpec& spec, std::ostream& os);
AbstractionSpec load_abstraction(std::istream& is);

}  // namespace tclcoord
