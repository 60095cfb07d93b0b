#include "tclcoord/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <utility>

#include "json.hpp"
#include "tclcoord/errors.hpp"

namespace tclcoord {

namespace {

// BFS order from the slack bus; parents always precede their children, so a
// single pass in this order is a forward sweep and the reverse is a
// backward sweep.
std::vector<int> sweep_order(const NetworkModel& net) {
  const int n = static_cast<int>(net.buses.size());
  std::vector<std::vector<int>> kids(static_cast<size_t>(n));
  for (int b = 1; b < n; ++b)
    kids[static_cast<size_t>(net.buses[static_cast<size_t>(b)].parent)].push_back(b);
  std::vector<int> order;
  order.reserve(static_cast<size_t>(n));
  order.push_back(0);
  for (size_t i = 0; i < order.size(); ++i)
    for (int c : kids[static_cast<size_t>(order[i])]) order.push_back(c);
  return order;
}

}  // namespace

void NetworkModel::validate() const {
  char msg[160];
  if (buses.empty()) throw ConfigError("feeder: bus list is empty");
  const int n = static_cast<int>(buses.size());
  if (buses[0].parent != -1)
    throw ConfigError("feeder: buses[0] must be the slack bus (parent -1)");
  double share_sum = 0.0;
  for (int b = 0; b < n; ++b) {
    const FeederBus& bus = buses[static_cast<size_t>(b)];
    if (b > 0) {
      if (bus.parent < 0 || bus.parent >= n || bus.parent == b) {
        std::snprintf(msg, sizeof msg,
                      "feeder: buses[%d].parent must name an upstream bus", b);
        throw ConfigError(msg);
      }
      if (bus.r <= 0.0 || bus.x <= 0.0) {
        std::snprintf(msg, sizeof msg,
                      "feeder: buses[%d] line impedance must be positive", b);
        throw ConfigError(msg);
      }
    }
    if (bus.load_kw < 0.0 || bus.load_kvar < 0.0) {
      std::snprintf(msg, sizeof msg, "feeder: buses[%d] load must be >= 0", b);
      throw ConfigError(msg);
    }
    if (bus.tcl_share < 0.0) {
      std::snprintf(msg, sizeof msg, "feeder: buses[%d].tcl_share must be >= 0", b);
      throw ConfigError(msg);
    }
    share_sum += bus.tcl_share;
  }
  if (std::abs(share_sum - 1.0) > 1e-9) {
    std::snprintf(msg, sizeof msg, "feeder: tcl shares sum to %.9f, want 1",
                  share_sum);
    throw ConfigError(msg);
  }
  // A walk up the parent chain from every bus must reach the slack bus; a
  // walk that outlives the bus count is stuck in a cycle.
  for (int b = 1; b < n; ++b) {
    int cur = b;
    int steps = 0;
    while (cur != 0 && steps++ < n) cur = buses[static_cast<size_t>(cur)].parent;
    if (cur != 0) {
      std::snprintf(msg, sizeof msg,
                    "feeder: buses[%d] is not connected to the slack bus", b);
      throw ConfigError(msg);
    }
  }
  if (v_slack <= 0.0) throw ConfigError("feeder: v_slack must be positive");
  if (v_min < 0.0 || v_min > v_slack)
    throw ConfigError("feeder: v_min must lie in [0, v_slack]");
  if (s_base_kva <= 0.0) throw ConfigError("feeder: s_base_kva must be positive");
  if (tcl_power_factor <= 0.0 || tcl_power_factor > 1.0)
    throw ConfigError("feeder: tcl_power_factor must lie in (0, 1]");
  if (p_cap_kw <= 0.0) throw ConfigError("feeder: p_cap_kw must be positive");
}

PowerFlowResult solve_power_flow(const NetworkModel& net, double p_agg_kw) {
  net.validate();
  if (!(p_agg_kw >= 0.0)) throw ModelError("aggregate TCL power must be >= 0");
  const int n = static_cast<int>(net.buses.size());
  const double q_per_p =
      std::tan(std::acos(net.tcl_power_factor));  // lagging: consuming vars

  std::vector<std::complex<double>> s(static_cast<size_t>(n));  // consumed, p.u.
  for (int b = 0; b < n; ++b) {
    const FeederBus& bus = net.buses[static_cast<size_t>(b)];
    const double p_kw = bus.load_kw + bus.tcl_share * p_agg_kw;
    const double q_kvar = bus.load_kvar + bus.tcl_share * p_agg_kw * q_per_p;
    s[static_cast<size_t>(b)] = {p_kw / net.s_base_kva, q_kvar / net.s_base_kva};
  }

  const std::vector<int> order = sweep_order(net);
  std::vector<std::complex<double>> v(static_cast<size_t>(n),
                                      {net.v_slack, 0.0});
  std::vector<std::complex<double>> flow(static_cast<size_t>(n));
  double delta = 0.0;
  for (int it = 1; it <= kPowerFlowMaxIter; ++it) {
    // Backward: nodal injection currents at the current voltages, then
    // accumulate leaves-to-root so flow[b] is the current through the line
    // into bus b (the slot at the root is just its local load current).
    for (int b = 0; b < n; ++b) {
      const size_t ub = static_cast<size_t>(b);
      flow[ub] = std::conj(s[ub] / v[ub]);
    }
    for (auto rit = order.rbegin(); rit != order.rend(); ++rit) {
      const int b = *rit;
      if (b != 0)
        flow[static_cast<size_t>(net.buses[static_cast<size_t>(b)].parent)] +=
            flow[static_cast<size_t>(b)];
    }
    // Forward: drop each line's voltage from its (already updated) parent.
    delta = 0.0;
    for (int b : order) {
      if (b == 0) continue;
      const FeederBus& bus = net.buses[static_cast<size_t>(b)];
      const std::complex<double> z{bus.r, bus.x};
      const std::complex<double> vn =
          v[static_cast<size_t>(bus.parent)] - z * flow[static_cast<size_t>(b)];
      delta = std::max(delta, std::abs(vn - v[static_cast<size_t>(b)]));
      v[static_cast<size_t>(b)] = vn;
    }
    if (!std::isfinite(delta)) {
      char msg[120];
      std::snprintf(msg, sizeof msg,
                    "power flow diverged (voltage collapse) after %d sweeps", it);
      throw NumericError(msg);
    }
    if (delta < kPowerFlowTol) {
      PowerFlowResult res;
      res.v = std::move(v);
      res.v_mag.resize(static_cast<size_t>(n));
      for (int b = 0; b < n; ++b)
        res.v_mag[static_cast<size_t>(b)] = std::abs(res.v[static_cast<size_t>(b)]);
      res.residual = delta;
      res.iterations = it;
      return res;
    }
  }
  char msg[120];
  std::snprintf(msg, sizeof msg,
                "power flow did not converge in %d sweeps; last residual %.3e",
                kPowerFlowMaxIter, delta);
  throw NumericError(msg);
}

VoltageCheck check_voltages(const PowerFlowResult& res, double v_min) {
  VoltageCheck out;
  for (int b = 0; b < static_cast<int>(res.v_mag.size()); ++b)
    if (res.v_mag[static_cast<size_t>(b)] < v_min) out.violating.push_back(b);
  out.ok = out.violating.empty();
  return out;
}

double compute_safe_power_bound(const NetworkModel& net, double v_min) {
  net.validate();
  const auto safe = [&](double p_kw) {
    try {
      return check_voltages(solve_power_flow(net, p_kw), v_min).ok;
    } catch (const NumericError&) {
      return false;  // no solution is at least as bad as a low one
    }
  };
  if (!safe(0.0))
    throw ModelError(
        "feeder breaks the voltage floor with zero aggregate TCL power");
  if (safe(net.p_cap_kw)) return net.p_cap_kw;
  double lo = 0.0;
  double hi = net.p_cap_kw;
  while (hi - lo > kBoundTolKw) {
    const double mid = 0.5 * (lo + hi);
    (safe(mid) ? lo : hi) = mid;
  }
  return lo;
}

NetworkModel load_feeder(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("feeder file: ") + e.what());
  }
  if (j.value("schema", "") != "tclcoord.feeder.v1")
    throw ConfigError("feeder file: unknown schema");
  NetworkModel net;
  try {
    net.s_base_kva = j.at("s_base_kva").get<double>();
    net.v_slack = j.value("v_slack", 1.0);
    net.v_min = j.at("v_min").get<double>();
    net.p_cap_kw = j.at("p_cap_kw").get<double>();
    net.tcl_power_factor = j.value("tcl_power_factor", 0.97);
    bool any_share = false;
    for (const auto& jb : j.at("buses")) {
      FeederBus b;
      b.name = jb.value("name", "");
      b.parent = jb.at("parent").get<int>();
      b.r = jb.value("r", 0.0);
      b.x = jb.value("x", 0.0);
      b.load_kw = jb.value("load_kw", 0.0);
      b.load_kvar = jb.value("load_kvar", 0.0);
      if (jb.contains("tcl_share")) {
        b.tcl_share = jb.at("tcl_share").get<double>();
        any_share = true;
      }
      net.buses.push_back(std::move(b));
    }
    if (!any_share) {
      int loaded = 0;
      for (const FeederBus& b : net.buses)
        if (b.load_kw > 0.0) ++loaded;
      if (loaded == 0)
        throw ConfigError(
            "feeder file: no tcl_share given and no loaded bus to spread the "
            "TCL draw over");
      for (FeederBus& b : net.buses)
        b.tcl_share = b.load_kw > 0.0 ? 1.0 / loaded : 0.0;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("feeder file: ") + e.what());
  }
  net.validate();
  return net;
}

}  // namespace tclcoord
