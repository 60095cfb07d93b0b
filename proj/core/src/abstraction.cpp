#include "tclcoord/abstraction.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "tclcoord/errors.hpp"

namespace tclcoord {

namespace {

// Snapped cell index: floor with a small forgiveness so values sitting a few
// ulps below a cell boundary land in the cell above it.
long long cell_floor(double x, double eta) {
  return static_cast<long long>(std::floor(x / eta + 1e-9));
}

}  // namespace

void GroupDynamics::validate() const {
  if (!(a >= 0.0 && a < 1.0)) throw ModelError("group dynamics: a must lie in [0, 1)");
  if (!(domain_lo < domain_hi)) throw ModelError("group dynamics: empty domain");
  if (!(deadband_lo < deadband_hi)) throw ModelError("group dynamics: empty deadband");
  if (deadband_lo < domain_lo || deadband_hi > domain_hi)
    throw ModelError("group dynamics: deadband must sit inside the domain");
  if (mode_count < 2) throw ModelError("group dynamics: need at least two modes");
  auto sz = static_cast<size_t>(mode_count);
  if (contraction.size() != sz || radius.size() != sz || lockout.size() != sz)
    throw ModelError("group dynamics: per-mode vectors must have mode_count entries");
  for (double L : contraction)
    if (!(L >= 0.0 && L < 1.0)) throw ModelError("group dynamics: contraction rate outside [0, 1)");
  for (double c : radius)
    if (!(c > 0.0)) throw ModelError("group dynamics: contraction radius must be positive");
  for (int t : lockout)
    if (t < 0) throw ModelError("group dynamics: negative lockout");
  if (population < 0) throw ModelError("group dynamics: negative population");
}

GroupDynamics make_tcl_group(int id, double ambient_c, double a, double r_thermal,
                             double p_transfer_kw, double cop, double domain_lo,
                             double domain_hi, double deadband_lo, double deadband_hi,
                             int lockout_on, int lockout_off, int population) {
  GroupDynamics g;
  g.id = id;
  g.ambient_c = ambient_c;
  g.a = a;
  g.r_thermal = r_thermal;
  g.p_transfer_kw = p_transfer_kw;
  g.p_electrical_kw = cop > 0.0 ? p_transfer_kw / cop : p_transfer_kw;
  g.domain_lo = domain_lo;
  g.domain_hi = domain_hi;
  g.deadband_lo = deadband_lo;
  g.deadband_hi = deadband_hi;
  g.contraction = {a, a};
  double width = domain_hi - domain_lo;
  g.radius = {width, width};
  g.lockout = {lockout_on, lockout_off};
  g.population = population;
  g.validate();
  return g;
}

BisimReport validate_bisimulation(const GroupDynamics& g, double eta, double eps) {
  if (!(eta > 0.0)) throw ModelError("abstraction: eta must be positive");
  if (!(eps > 0.0)) throw ModelError("abstraction: epsilon must be positive");
  BisimReport rep;
  rep.ok = true;
  double half = 0.5 * eta;
  for (int m = 0; m < g.mode_count; ++m) {
    double L = g.contraction[static_cast<size_t>(m)];
    double required = (1.0 - L) * eps;
    rep.min_epsilon = std::max(rep.min_epsilon, half / (1.0 - L));
    if (required + 1e-15 < half) {
      rep.ok = false;
      rep.violations.push_back(BisimViolation{m, required, half});
    }
  }
  double min_radius = *std::min_element(g.radius.begin(), g.radius.end());
  if (eps > min_radius) {
    rep.note = "epsilon exceeds the smallest contraction radius; the error bound "
               "only holds while trajectories stay that close";
  }
  return rep;
}

GridLayout grid_centers(double eta, double lo, double hi) {
  if (!(eta > 0.0)) throw ModelError("abstraction: eta must be positive");
  if (!(lo < hi)) throw ModelError("abstraction: empty interval");
  long long jmin = static_cast<long long>(std::floor(lo / eta + 1e-9));
  long long jmax = static_cast<long long>(std::ceil(hi / eta - 1e-9)) - 1;
  if (jmax < jmin) throw ModelError("abstraction: interval narrower than one cell");
  GridLayout layout;
  layout.base_cell = jmin;
  layout.centers.resize(static_cast<size_t>(jmax - jmin + 1));
  for (size_t k = 0; k < layout.centers.size(); ++k)
    layout.centers[k] =
        static_cast<double>(jmin + static_cast<long long>(k)) * eta + 0.5 * eta;
  return layout;
}

int AbstractionSpec::cell_of(double theta) const {
  long long j = cell_floor(theta, eta) - base_cell;
  if (j < 0) j = 0;
  long long top = static_cast<long long>(grid.size()) - 1;
  if (j > top) j = top;
  return static_cast<int>(j);
}

AbstractionSpec build_abstraction(const GroupDynamics& g, double eta, double eps,
                                  double delta) {
  g.validate();
  BisimReport rep = validate_bisimulation(g, eta, eps);
  if (!rep.ok) {
    std::ostringstream msg;
    msg << "abstraction: grid too coarse for epsilon " << eps
        << "; need epsilon >= " << rep.min_epsilon;
    throw ModelError(msg.str());
  }
  if (delta - (eps + 0.5 * eta) < 1e-12) {
    std::ostringstream msg;
    msg << "abstraction: delta " << delta << " must exceed epsilon + eta/2 = "
        << eps + 0.5 * eta;
    throw ModelError(msg.str());
  }

  AbstractionSpec spec;
  spec.eta = eta;
  spec.epsilon = eps;
  spec.delta = delta;

  GridLayout layout = grid_centers(eta, g.domain_lo, g.domain_hi);
  long long jmin = layout.base_cell;
  long long jmax = jmin + static_cast<long long>(layout.centers.size()) - 1;
  spec.base_cell = jmin;
  int K = static_cast<int>(layout.centers.size());
  spec.grid = std::move(layout.centers);

  spec.succ.assign(static_cast<size_t>(g.mode_count),
                   std::vector<int>(static_cast<size_t>(K), 0));
  spec.clamped.assign(static_cast<size_t>(g.mode_count),
                      std::vector<char>(static_cast<size_t>(K), 0));
  for (int m = 0; m < g.mode_count; ++m) {
    for (int k = 0; k < K; ++k) {
      double next = g.step(spec.grid[static_cast<size_t>(k)], m);
      long long j = cell_floor(next, eta);
      if (j < jmin) {
        j = jmin;
        spec.clamped[static_cast<size_t>(m)][static_cast<size_t>(k)] = 1;
      } else if (j > jmax) {
        j = jmax;
        spec.clamped[static_cast<size_t>(m)][static_cast<size_t>(k)] = 1;
      }
      spec.succ[static_cast<size_t>(m)][static_cast<size_t>(k)] =
          static_cast<int>(j - jmin);
    }
  }

  // Safe cells: centers inside the deadband eroded by delta on both sides.
  double lo = g.deadband_lo + delta, hi = g.deadband_hi - delta;
  spec.safe_mask.assign(static_cast<size_t>(K), 0);
  for (int k = 0; k < K; ++k) {
    double c = spec.grid[static_cast<size_t>(k)];
    if (c >= lo - 1e-9 && c <= hi + 1e-9) {
      spec.safe_mask[static_cast<size_t>(k)] = 1;
      spec.safe.push_back(k);
    }
  }
  if (spec.safe.empty())
    throw ModelError("abstraction: erosion by delta leaves no safe cell; "
                     "shrink delta or widen the deadband");
  return spec;
}

std::vector<double> model_deviation(const GroupDynamics& g, const GroupDynamics& member,
                                    double eta) {
  if (member.mode_count != g.mode_count)
    throw ModelError("model deviation: mode counts differ");
  std::vector<double> dev(static_cast<size_t>(g.mode_count), 0.0);
  int samples = static_cast<int>(std::ceil((g.domain_hi - g.domain_lo) / eta)) + 1;
  for (int m = 0; m < g.mode_count; ++m) {
    double worst = 0.0;
    for (int i = 0; i <= samples; ++i) {
      double theta = g.domain_lo +
                     (g.domain_hi - g.domain_lo) * static_cast<double>(i) /
                         static_cast<double>(samples);
      worst = std::max(worst, std::abs(member.step(theta, m) - g.step(theta, m)));
    }
    dev[static_cast<size_t>(m)] = worst;
  }
  return dev;
}

bool admits_member(const GroupDynamics& g, const GroupDynamics& member, double eta,
                   double eps) {
  std::vector<double> dev = model_deviation(g, member, eta);
  for (int m = 0; m < g.mode_count; ++m) {
    double L = g.contraction[static_cast<size_t>(m)];
    if ((1.0 - L) * eps + 1e-12 < 0.5 * eta + dev[static_cast<size_t>(m)]) return false;
  }
  return true;
}

void save_abstraction(const AbstractionSpec& spec, std::ostream& os) {
  nlohmann::json j;
  j["schema"] = "tclcoord.abstraction.v1";
  j["eta"] = spec.eta;
  j["epsilon"] = spec.epsilon;
  j["delta"] = spec.delta;
  j["base_cell"] = spec.base_cell;
  j["grid"] = spec.grid;
  j["succ"] = spec.succ;
  j["safe"] = spec.safe;
  nlohmann::json clamped = nlohmann::json::array();
  for (size_t m = 0; m < spec.clamped.size(); ++m)
    for (size_t k = 0; k < spec.clamped[m].size(); ++k)
      if (spec.clamped[m][k]) clamped.push_back({m, k});
  j["clamped"] = clamped;
  os << j.dump(2) << "\n";
}

AbstractionSpec load_abstraction(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("abstraction file: ") + e.what());
  }
  if (j.value("schema", "") != "tclcoord.abstraction.v1")
    throw ConfigError("abstraction file: unknown schema");
  AbstractionSpec spec;
  try {
    spec.eta = j.at("eta").get<double>();
    spec.epsilon = j.at("epsilon").get<double>();
    spec.delta = j.at("delta").get<double>();
    spec.base_cell = j.at("base_cell").get<long long>();
    spec.grid = j.at("grid").get<std::vector<double>>();
    spec.succ = j.at("succ").get<std::vector<std::vector<int>>>();
    spec.safe = j.at("safe").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("abstraction file: ") + e.what());
  }
  size_t K = spec.grid.size();
  spec.safe_mask.assign(K, 0);
  for (int k : spec.safe) {
    if (k < 0 || static_cast<size_t>(k) >= K)
      throw ConfigError("abstraction file: safe index out of range");
    spec.safe_mask[static_cast<size_t>(k)] = 1;
  }
  spec.clamped.assign(spec.succ.size(), std::vector<char>(K, 0));
  if (j.contains("clamped")) {
    for (const auto& pair : j.at("clamped")) {
      size_t m = pair.at(0).get<size_t>(), k = pair.at(1).get<size_t>();
      if (m >= spec.clamped.size() || k >= K)
        throw ConfigError("abstraction file: clamped index out of range");
      spec.clamped[m][k] = 1;
    }
  }
  for (const auto& row : spec.succ) {
    if (row.size() != K) throw ConfigError("abstraction file: ragged successor table");
    for (int s : row)
      if (s < 0 || static_cast<size_t>(s) >= K)
        throw ConfigError("abstraction file: successor out of range");
  }
  return spec;
}

}  // namespace tclcoord
