#include "tclcoord/fleet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "tclcoord/errors.hpp"

namespace tclcoord {

void FleetModel::validate() const {
  if (groups.empty()) throw ConfigError("fleet: no groups");
  if (specs.size() != groups.size() || graphs.size() != groups.size())
    throw ConfigError("fleet: group/spec/graph counts disagree");
  for (size_t i = 0; i < groups.size(); ++i) {
    if (specs[i] == nullptr || graphs[i] == nullptr)
      throw ConfigError("fleet: missing spec or graph for group " + std::to_string(i));
    groups[i].validate();
    const AggregateGraph& G = *graphs[i];
    if (G.cell_count != specs[i]->cell_count())
      throw ConfigError("fleet: graph and abstraction disagree on cell count");
    if (G.mode_count != groups[i].mode_count)
      throw ConfigError("fleet: graph and dynamics disagree on mode count");
    for (int m = 0; m < G.mode_count; ++m)
      if (G.lockout[static_cast<size_t>(m)] != groups[i].lockout[static_cast<size_t>(m)])
        throw ConfigError("fleet: graph and dynamics disagree on lockout");
  }
}

FleetState init_fleet(const FleetModel& model,
                      const std::vector<std::vector<long long>>& xs,
                      const std::vector<const AggregateGraph*>& graphs) {
  model.validate();
  if (xs.size() != model.groups.size() || graphs.size() != model.groups.size())
    throw ModelError("fleet: occupancy and graph counts must match the groups");
  FleetState fleet;
  for (size_t i = 0; i < model.groups.size(); ++i) {
    const AggregateGraph& G = *graphs[i];
    const AbstractionSpec& spec = *model.specs[i];
    if (xs[i].size() != static_cast<size_t>(G.state_dim))
      throw ModelError("fleet: occupancy dimension mismatch for group " +
                       std::to_string(i));
    long long placed = 0;
    for (int idx = 0; idx < G.state_dim; ++idx) {
      const long long count = xs[i][static_cast<size_t>(idx)];
      if (count < 0)
        throw ModelError("fleet: negative occupancy for group " +
                         std::to_string(i));
      if (count == 0) continue;
      const NodeId node = G.node_at(idx);
      if (node.tau > model.groups[i].lockout[static_cast<size_t>(node.mode)])
        throw ModelError("fleet: occupancy uses a lockout phase the model "
                         "does not have");
      for (long long c = 0; c < count; ++c) {
        Subsystem u;
        u.group = static_cast<int>(i);
        u.mode = node.mode;
        u.lock = node.tau;
        u.cell = node.cell;
        u.theta = spec.grid[static_cast<size_t>(node.cell)];
        fleet.units.push_back(u);
      }
      placed += count;
    }
    if (placed != model.groups[i].population)
      throw ModelError("fleet: occupancy totals " + std::to_string(placed) +
                       " units for group " + std::to_string(i) + ", want " +
                       std::to_string(model.groups[i].population));
  }
  return fleet;
}

FleetState init_fleet(const FleetModel& model) {
  model.validate();
  FleetState fleet;
  for (size_t i = 0; i < model.groups.size(); ++i) {
    const AbstractionSpec& spec = *model.specs[i];
    if (spec.safe.empty()) throw ConfigError("fleet: group has no safe cells to seed");
    const int M = model.groups[i].mode_count;
    const int S = static_cast<int>(spec.safe.size());
    for (int j = 0; j < model.groups[i].population; ++j) {
      const int pair = j % (M * S);
      Subsystem u;
      u.group = static_cast<int>(i);
      u.mode = pair / S;
      u.cell = spec.safe[static_cast<size_t>(pair % S)];
      u.theta = spec.grid[static_cast<size_t>(u.cell)];
      u.lock = 0;
      fleet.units.push_back(u);
    }
  }
  return fleet;
}

std::vector<std::vector<long long>> fleet_histogram(const FleetModel& model,
                                                    const FleetState& fleet) {
  std::vector<std::vector<long long>> xs(model.groups.size());
  for (size_t i = 0; i < model.groups.size(); ++i)
    xs[i].assign(static_cast<size_t>(model.graphs[i]->state_dim), 0);
  for (const Subsystem& u : fleet.units) {
    const AggregateGraph& G = *model.graphs[static_cast<size_t>(u.group)];
    xs[static_cast<size_t>(u.group)]
      [static_cast<size_t>(G.node_index(u.mode, u.lock, u.cell))] += 1;
  }
  return xs;
}

std::vector<SwitchCommand> disaggregate(const FleetModel& model, const FleetState& fleet,
                                        const std::vector<std::vector<long long>>& xs,
                                        const std::vector<std::vector<long long>>& us,
                                        unsigned seed, bool ignore_lockout) {
  model.validate();
  if (xs.size() != model.groups.size() || us.size() != model.groups.size())
    throw ConfigError("disaggregate: group count mismatch");
  std::vector<std::vector<long long>> hist = fleet_histogram(model, fleet);
  for (size_t i = 0; i < xs.size(); ++i)
    if (hist[i] != xs[i])
      throw ModelError("disaggregate: fleet histogram diverged from the aggregate "
                       "state for group " + std::to_string(i));

  std::mt19937 rng(seed);
  std::vector<SwitchCommand> commands;
  for (size_t i = 0; i < model.groups.size(); ++i) {
    const AggregateGraph& G = *model.graphs[i];
    if (us[i].size() != static_cast<size_t>(G.input_dim))
      throw ModelError("disaggregate: input dimension mismatch");
    if (!ignore_lockout) {
      std::string why = input_violation(G, xs[i], us[i]);
      if (!why.empty()) throw ModelError("disaggregate: " + why);
    }
    for (int m1 = 0; m1 < G.mode_count; ++m1)
      for (int m2 = 0; m2 < G.mode_count; ++m2) {
        if (m2 == m1) continue;
        for (int k = 0; k < G.cell_count; ++k) {
          const long long want =
              us[i][static_cast<size_t>(G.input_index(m1, m2, k))];
          if (want < 0) throw ModelError("disaggregate: negative switch count");
          if (want == 0) continue;
          std::vector<int> pool;
          for (size_t j = 0; j < fleet.units.size(); ++j) {
            const Subsystem& u = fleet.units[j];
            if (u.group != static_cast<int>(i) || u.mode != m1 || u.cell != k)
              continue;
            if (!ignore_lockout && u.lock != 0) continue;
            pool.push_back(static_cast<int>(j));
          }
          if (want > static_cast<long long>(pool.size())) {
            char buf[128];
            std::snprintf(buf, sizeof buf,
                          "disaggregate: %lld switches requested at (group %zu, mode "
                          "%d, cell %d) but only %zu units present",
                          want, i, m1, k, pool.size());
            throw ModelError(buf);
          }
          std::vector<int> chosen;
          std::sample(pool.begin(), pool.end(), std::back_inserter(chosen),
                      static_cast<size_t>(want), rng);
          for (int j : chosen) commands.push_back(SwitchCommand{j, m2});
        }
      }
  }
  return commands;
}

void step_fleet(const FleetModel& model, FleetState& fleet,
                const std::vector<SwitchCommand>& commands) {
  std::vector<int> target(fleet.units.size(), -1);
  for (const SwitchCommand& c : commands) {
    if (c.unit < 0 || static_cast<size_t>(c.unit) >= fleet.units.size())
      throw ModelError("step: command names a unit outside the fleet");
    if (target[static_cast<size_t>(c.unit)] != -1)
      throw ModelError("step: two commands for one unit");
    const Subsystem& u = fleet.units[static_cast<size_t>(c.unit)];
    const GroupDynamics& g = model.groups[static_cast<size_t>(u.group)];
    if (c.to_mode < 0 || c.to_mode >= g.mode_count)
      throw ModelError("step: command names an unknown mode");
    if (c.to_mode == u.mode)
      throw ModelError("step: command repeats the unit's current mode");
    target[static_cast<size_t>(c.unit)] = c.to_mode;
  }

  for (size_t j = 0; j < fleet.units.size(); ++j) {
    Subsystem& u = fleet.units[j];
    const GroupDynamics& g = model.groups[static_cast<size_t>(u.group)];
    const AbstractionSpec& spec = *model.specs[static_cast<size_t>(u.group)];
    u.locked_switch = false;
    if (target[j] != -1) {
      u.locked_switch = u.lock != 0;
      u.mode = target[j];
      u.lock = std::min(1, g.lockout[static_cast<size_t>(u.mode)]);
    } else if (u.lock != 0) {
      u.lock = u.lock == g.lockout[static_cast<size_t>(u.mode)] ? 0 : u.lock + 1;
    }
    u.theta = g.step(u.theta, u.mode);
    u.cell = spec.succ[static_cast<size_t>(u.mode)][static_cast<size_t>(u.cell)];
  }
}

void ViolationLog::append(int t, const std::vector<Violation>& vs) {
  for (const Violation& v : vs) entries.push_back(Entry{t, v});
}

long long ViolationLog::count(Violation::Kind k) const {
  long long n = 0;
  for (const Entry& e : entries)
    if (e.v.kind == k) ++n;
  return n;
}

std::vector<double> fleet_mode_power(const FleetModel& model, const FleetState& fleet,
                                     const SafeSetSpec& s) {
  if (s.weight.size() != model.groups.size())
    throw ConfigError("fleet power: weights do not cover every group");
  const int modes = model.groups[0].mode_count;
  std::vector<double> power(static_cast<size_t>(modes), 0.0);
  for (const Subsystem& u : fleet.units)
    power[static_cast<size_t>(u.mode)] +=
        s.weight[static_cast<size_t>(u.group)][static_cast<size_t>(u.mode)];
  return power;
}

std::vector<Violation> monitor_fleet(const FleetModel& model, const FleetState& fleet,
                                     const SafeSetSpec& s) {
  std::vector<Violation> out;
  char buf[160];
  for (size_t j = 0; j < fleet.units.size(); ++j) {
    const Subsystem& u = fleet.units[j];
    const GroupDynamics& g = model.groups[static_cast<size_t>(u.group)];
    if (u.theta < g.deadband_lo - 1e-12 || u.theta > g.deadband_hi + 1e-12) {
      Violation v;
      v.kind = Violation::Kind::Deadband;
      v.group = u.group;
      v.unit = static_cast<int>(j);
      v.value = u.theta;
      v.bound = u.theta < g.deadband_lo ? g.deadband_lo : g.deadband_hi;
      std::snprintf(buf, sizeof buf,
                    "unit %zu of group %d at %.4f C outside dead-band [%.4f, %.4f]",
                    j, u.group, u.theta, g.deadband_lo, g.deadband_hi);
      v.what = buf;
      out.push_back(v);
    }
    if (u.locked_switch) {
      Violation v;
      v.kind = Violation::Kind::Lockout;
      v.group = u.group;
      v.unit = static_cast<int>(j);
      std::snprintf(buf, sizeof buf, "unit %zu of group %d switched while locked", j,
                    u.group);
      v.what = buf;
      out.push_back(v);
    }
  }
  std::vector<double> power = fleet_mode_power(model, fleet, s);
  for (size_t m = 0; m < power.size(); ++m) {
    const double lo = s.power_lo[m], hi = s.power_hi[m];
    if (power[m] < lo - 1e-9 || power[m] > hi + 1e-9) {
      Violation v;
      v.kind = Violation::Kind::AggregateBound;
      v.mode = static_cast<int>(m);
      v.value = power[m];
      v.bound = power[m] < lo ? lo : hi;
      std::snprintf(buf, sizeof buf,
                    "mode %zu draws %.3f kW outside the band [%.3f, %.3f]", m,
                    power[m], lo, hi);
      v.what = buf;
      out.push_back(v);
    }
  }
  return out;
}

double rmse(const std::vector<double>& signal, const std::vector<double>& reference) {
  if (signal.size() != reference.size())
    throw ConfigError("rmse: trace lengths differ");
  if (signal.empty()) throw ConfigError("rmse: empty trace");
  double acc = 0.0;
  for (size_t t = 0; t < signal.size(); ++t) {
    const double d = signal[t] - reference[t];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(signal.size()));
}

}  // namespace tclcoord
