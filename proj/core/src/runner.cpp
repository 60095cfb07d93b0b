#include "tclcoord/runner.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <utility>

#include "tclcoord/control.hpp"
#include "tclcoord/errors.hpp"
#include "tclcoord/invariant.hpp"

namespace tclcoord {

namespace {

namespace fs = std::filesystem;

constexpr int kCycleEnumCap = 256;
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Per-step disaggregation stream: decorrelate steps without touching the
// run seed's meaning.
unsigned step_seed(unsigned base, int t) {
  unsigned h = base ^ (0x9e3779b9u + static_cast<unsigned>(t) * 0x85ebca6bu);
  h ^= h >> 16;
  h *= 0x45d9f3bu;
  h ^= h >> 16;
  return h;
}

// Even phase spread of each group's population over its cycle family:
// cycles get units in proportion to their length, and units within a cycle
// sit at evenly spaced positions.  Starting from this lifted state puts the
// run inside the terminal set, so step-0 feasibility is a property of the
// scenario rather than of the dealer's luck.
CycleAssignment spread_assignment(const std::vector<std::vector<SafeCycle>>& family,
                                  const std::vector<GroupDynamics>& groups) {
  CycleAssignment ca;
  ca.cycles = family;
  ca.beta.resize(family.size());
  for (size_t g = 0; g < family.size(); ++g) {
    const long long pop = groups[g].population;
    ca.population.push_back(pop);
    long long total_len = 0;
    for (const SafeCycle& c : family[g]) total_len += c.length();
    long long assigned = 0;
    for (size_t q = 0; q < family[g].size(); ++q) {
      const int len = family[g][q].length();
      long long n = q + 1 == family[g].size()
                        ? pop - assigned
                        : pop * len / total_len;
      assigned += n;
      std::vector<long long> beta(static_cast<size_t>(len), 0);
      for (long long i = 0; i < n; ++i)
        ++beta[static_cast<size_t>(i * len / n)];
      ca.beta[g].push_back(std::move(beta));
    }
  }
  return ca;
}

const char* violation_kind_name(Violation::Kind k) {
  switch (k) {
    case Violation::Kind::Deadband: return "deadband";
    case Violation::Kind::Lockout: return "lockout";
    case Violation::Kind::AggregateBound: return "aggregate-bound";
  }
  return "?";
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw ConfigError("cannot write " + p.string());
  return os;
}

}  // namespace

const char* solve_status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::TimeLimitSuboptimal: return "suboptimal";
    case SolveStatus::Unknown: return "unknown";
  }
  return "?";
}

ScenarioBuild build_scenario(const Scenario& sc) {
  sc.validate();
  ScenarioBuild b;
  const size_t n = sc.groups.size();
  b.network_bound_kw = kNan;

  for (size_t i = 0; i < n; ++i) {
    const ScenarioGroup& g = sc.groups[i];
    b.groups.push_back(make_tcl_group(
        static_cast<int>(i), g.ambient_c, g.a, g.r_thermal, g.p_transfer_kw,
        g.cop, g.domain_lo, g.domain_hi, g.deadband_lo, g.deadband_hi,
        g.lockout_on, g.lockout_off, g.population));
  }
  for (size_t i = 0; i < n; ++i)
    b.specs.push_back(
        build_abstraction(b.groups[i], sc.groups[i].eta, sc.epsilon, sc.delta));
  for (size_t i = 0; i < n; ++i)
    b.graphs.push_back(build_graph(b.specs[i], b.groups[i], static_cast<int>(i)));
  for (size_t i = 0; i < n; ++i) b.mats.push_back(build_matrices(b.graphs[i]));

  b.art.safe.power_lo = sc.bounds.power_lo;
  b.art.safe.power_hi = sc.bounds.power_hi;
  for (size_t i = 0; i < n; ++i)
    b.art.safe.weight.push_back({b.groups[i].p_electrical_kw, 0.0});

  if (sc.network.enabled) {
    const std::string path = resolve_path(sc.base_dir, sc.network.feeder_path);
    std::ifstream f(path);
    if (!f) throw ConfigError("scenario: network.feeder: cannot open " + path);
    b.net = load_feeder(f);
    if (sc.network.v_min >= 0.0) b.net.v_min = sc.network.v_min;
    b.has_network = true;
    if (sc.bounds.derive_upper_from_network) {
      b.network_bound_kw = compute_safe_power_bound(b.net, b.net.v_min);
      b.art.safe.power_hi[kModeOn] = b.network_bound_kw;
      if (b.art.safe.power_hi[kModeOn] < b.art.safe.power_lo[kModeOn])
        throw ModelError(
            "network-safe bound sits below the configured lower power bound");
    }
  }
  b.art.safe.validate();

  const ControllerKind kind = sc.controller.kind;
  for (size_t i = 0; i < n; ++i) {
    std::vector<SafeCycle> cands;
    try {
      cands = enumerate_safe_cycles(b.graphs[i], sc.controller.max_cycle_length,
                                    kCycleEnumCap);
    } catch (const ModelError&) {
      // Only the invariant-set controller plans on these cycles; the
      // benchmarks can run without a family.
      if (kind == ControllerKind::InvSetMpc) throw;
    }
    b.art.cycles.push_back(select_cycles(cands, sc.controller.cycles_per_group));
  }
  for (size_t i = 0; i < n; ++i) {
    b.art.graphs.push_back(&b.graphs[i]);
    b.art.mats.push_back(&b.mats[i]);
  }

  if (kind == ControllerKind::Benchmark3) {
    for (size_t i = 0; i < n; ++i) {
      GroupDynamics rg = b.groups[i];
      rg.lockout.assign(rg.lockout.size(), 0);
      b.reduced_groups.push_back(std::move(rg));
    }
    for (size_t i = 0; i < n; ++i)
      b.reduced_graphs.push_back(
          build_graph(b.specs[i], b.reduced_groups[i], static_cast<int>(i)));
    for (size_t i = 0; i < n; ++i)
      b.reduced_mats.push_back(build_matrices(b.reduced_graphs[i]));
    b.reduced_art.safe = b.art.safe;
    for (size_t i = 0; i < n; ++i) {
      const auto cands = enumerate_safe_cycles(
          b.reduced_graphs[i], sc.controller.max_cycle_length, kCycleEnumCap);
      b.reduced_art.cycles.push_back(
          select_cycles(cands, sc.controller.cycles_per_group));
      b.reduced_art.graphs.push_back(&b.reduced_graphs[i]);
      b.reduced_art.mats.push_back(&b.reduced_mats[i]);
    }
    b.has_reduced = true;
  }
  return b;
}

RunReport simulate_scenario(const Scenario& sc, const ScenarioBuild& build) {
  RunReport rep;
  rep.scenario_name = sc.name;
  rep.kind = sc.controller.kind;
  rep.steps_requested = sc.run.steps;
  rep.network_bound_kw = build.network_bound_kw;
  rep.rmse_kw = kNan;

  const int steps = sc.run.steps;
  const int h = sc.controller.horizon;

  std::vector<double> ref;
  if (sc.reference.kind == ReferenceSpec::Kind::Synthetic) {
    ref = generate_reference(sc.reference, steps + h);
  } else {
    const std::string path = resolve_path(sc.base_dir, sc.reference.csv_path);
    std::ifstream f(path);
    if (!f) throw ConfigError("scenario: reference.csv_path: cannot open " + path);
    ref = load_reference_csv(f);
    if (static_cast<int>(ref.size()) < steps + h) {
      char msg[160];
      std::snprintf(msg, sizeof msg,
                    "scenario: reference.csv_path: series has %zu values, the "
                    "run needs steps + horizon = %d",
                    ref.size(), steps + h);
      throw ConfigError(msg);
    }
  }

  ControllerConfig cfg;
  cfg.kind = sc.controller.kind;
  cfg.horizon = h;
  cfg.budget = SolveBudget{sc.controller.max_nodes, sc.controller.max_seconds};
  cfg.reference = ref;
  cfg.tracking_weight = sc.controller.tracking_weight;

  FleetModel fm;
  fm.groups = build.groups;
  for (size_t i = 0; i < build.groups.size(); ++i) {
    fm.specs.push_back(&build.specs[i]);
    fm.graphs.push_back(&build.graphs[i]);
  }
  fm.validate();
  const bool blind = sc.controller.kind == ControllerKind::Benchmark3;
  const ControlArtifacts& art = blind ? build.reduced_art : build.art;
  bool family_ok = !art.cycles.empty();
  for (const auto& per_group : art.cycles)
    if (per_group.empty()) family_ok = false;
  FleetState fleet =
      family_ok ? init_fleet(fm,
                             lift(spread_assignment(art.cycles, build.groups),
                                  art.graphs),
                             art.graphs)
                : init_fleet(fm);
  auto xs = fleet_histogram(fm, fleet);
  long long total_units = 0;
  for (const GroupDynamics& g : build.groups) total_units += g.population;

  StepResult prev;
  bool has_prev = false;
  double wall_total = 0.0;
  std::vector<double> cons_series, ref_series;

  for (int t = 0; t < steps; ++t) {
    const double consumption = fleet_mode_power(fm, fleet, build.art.safe)[kModeOn];
    StepRecord row;
    row.t = t;
    row.consumption_kw = consumption;
    row.reference_kw = ref[static_cast<size_t>(t)];
    row.cost_kw = std::abs(consumption - row.reference_kw);
    row.slack_lo_kw = consumption - build.art.safe.power_lo[kModeOn];
    row.slack_hi_kw = build.art.safe.power_hi[kModeOn] - consumption;
    row.bound_kw = build.network_bound_kw;
    if (build.has_network && sc.network.recompute_bound_per_step)
      row.bound_kw = compute_safe_power_bound(build.net, build.net.v_min);

    if (build.has_network) {
      const PowerFlowResult pf = solve_power_flow(build.net, consumption);
      rep.voltages.push_back(pf.v_mag);
      row.undervoltage = !check_voltages(pf, build.net.v_min).ok;
      if (row.undervoltage) ++rep.undervoltage_steps;
    }
    if (row.slack_lo_kw < -1e-9 || row.slack_hi_kw < -1e-9)
      ++rep.bound_violation_steps;

    std::vector<std::vector<long long>> ctrl_xs;
    if (blind) {
      for (size_t i = 0; i < xs.size(); ++i)
        ctrl_xs.push_back(project_no_lockout(build.graphs[i],
                                             build.reduced_graphs[i], xs[i]));
    } else {
      ctrl_xs = xs;
    }
    StepResult res =
        mpc_step(sc.controller.kind, ctrl_xs, t, cfg, art,
                 has_prev ? &prev : nullptr);
    row.status = res.status;
    row.node_count = res.node_count;
    row.wall_time_s = res.wall_time_s;
    wall_total += res.wall_time_s;
    rep.total_nodes += res.node_count;
    rep.trace.push_back(row);

    const bool have_plan = res.status == SolveStatus::Optimal ||
                           res.status == SolveStatus::TimeLimitSuboptimal;
    if (!have_plan) {
      rep.infeasible_at = t;
      char why[96];
      std::snprintf(why, sizeof why, "no feasible plan at step %d (%s)", t,
                    solve_status_name(res.status));
      rep.stop_reason = why;
      break;
    }

    cons_series.push_back(consumption);
    ref_series.push_back(row.reference_kw);

    const auto commands = disaggregate(fm, fleet, xs, res.input,
                                       step_seed(sc.run.seed, t), blind);
    step_fleet(fm, fleet, commands);
    xs = fleet_histogram(fm, fleet);
    rep.log.append(t, monitor_fleet(fm, fleet, build.art.safe));
    if (sc.run.fleet_trace) {
      for (size_t j = 0; j < fleet.units.size(); ++j) {
        const Subsystem& u = fleet.units[j];
        rep.fleet_rows.push_back(
            {t, static_cast<int>(j), u.group, u.mode, u.lock, u.theta});
      }
    }
    prev = std::move(res);
    has_prev = true;
    ++rep.completed_steps;
  }

  if (!cons_series.empty()) rep.rmse_kw = rmse(cons_series, ref_series);
  rep.lockout_violations =
      static_cast<int>(rep.log.count(Violation::Kind::Lockout));
  rep.deadband_violations =
      static_cast<int>(rep.log.count(Violation::Kind::Deadband));
  if (rep.completed_steps > 0 && total_units > 0)
    rep.lockout_pct_per_step =
        100.0 * rep.lockout_violations /
        (static_cast<double>(rep.completed_steps) * static_cast<double>(total_units));
  if (!rep.trace.empty())
    rep.mean_solve_s = wall_total / static_cast<double>(rep.trace.size());
  if (rep.infeasible_at >= 0 && sc.controller.kind == ControllerKind::InvSetMpc)
    rep.exit_code = kExitRunFailure;
  return rep;
}

void write_artifacts(const Scenario& sc, const ScenarioBuild& build,
                     const RunReport& rep, const std::string& out_dir) {
  fs::create_directories(out_dir);
  char buf[256];

  {
    std::ofstream os = open_out(fs::path(out_dir) / "trace.csv");
    os << "#schema=tclcoord.trace.v1\n";
    os << "t,status,cost_kw,consumption_kw,reference_kw,slack_lo_kw,"
          "slack_hi_kw,node_count,bound_kw\n";
    for (const StepRecord& r : rep.trace) {
      std::snprintf(buf, sizeof buf, "%d,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%lld,",
                    r.t, solve_status_name(r.status), r.cost_kw,
                    r.consumption_kw, r.reference_kw, r.slack_lo_kw,
                    r.slack_hi_kw, r.node_count);
      os << buf;
      if (std::isfinite(r.bound_kw)) {
        std::snprintf(buf, sizeof buf, "%.6f", r.bound_kw);
        os << buf;
      }
      os << "\n";
    }
  }

  {
    std::ofstream os = open_out(fs::path(out_dir) / "violations.csv");
    os << "#schema=tclcoord.violations.v1\n";
    os << "t,kind,group,unit,mode,value,bound\n";
    for (const ViolationLog::Entry& e : rep.log.entries) {
      std::snprintf(buf, sizeof buf, "%d,%s,%d,%d,%d,%.6f,%.6f\n", e.t,
                    violation_kind_name(e.v.kind), e.v.group, e.v.unit,
                    e.v.mode, e.v.value, e.v.bound);
      os << buf;
    }
  }

  if (build.has_network) {
    std::ofstream os = open_out(fs::path(out_dir) / "voltages.csv");
    os << "#schema=tclcoord.voltages.v1\n";
    os << "t,bus,v_mag\n";
    for (size_t i = 0; i < rep.voltages.size(); ++i) {
      for (size_t b = 0; b < rep.voltages[i].size(); ++b) {
        std::snprintf(buf, sizeof buf, "%d,%zu,%.8f\n", rep.trace[i].t, b,
                      rep.voltages[i][b]);
        os << buf;
      }
    }
  }

  {
    std::ofstream os = open_out(fs::path(out_dir) / "cycles.json");
    save_cycles(build.has_reduced ? build.reduced_art.cycles : build.art.cycles,
                os);
  }

  if (sc.run.fleet_trace) {
    std::ofstream os = open_out(fs::path(out_dir) / "fleet.csv");
    os << "#schema=tclcoord.fleet.v1\n";
    os << "t,unit,group,mode,theta,lock\n";
    for (const FleetRow& r : rep.fleet_rows) {
      std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%.6f,%d\n", r.t, r.unit,
                    r.group, r.mode, r.theta, r.lock);
      os << buf;
    }
  }

  if (sc.run.dump_graphs) {
    for (size_t i = 0; i < build.specs.size(); ++i) {
      std::snprintf(buf, sizeof buf, "abstraction_g%zu.json", i);
      std::ofstream as = open_out(fs::path(out_dir) / buf);
      save_abstraction(build.specs[i], as);
      std::snprintf(buf, sizeof buf, "graph_g%zu.txt", i);
      std::ofstream gs = open_out(fs::path(out_dir) / buf);
      write_edge_list(build.graphs[i], gs);
    }
  }

  {
    std::ofstream os = open_out(fs::path(out_dir) / "summary.txt");
    os << "scenario = " << rep.scenario_name << "\n";
    os << "controller = " << controller_kind_name(rep.kind) << "\n";
    os << "steps_completed = " << rep.completed_steps << "\n";
    os << "steps_requested = " << rep.steps_requested << "\n";
    if (rep.infeasible_at >= 0)
      os << "infeasible_at = " << rep.infeasible_at << "\n";
    else
      os << "infeasible_at = none\n";
    os << "stop_reason = " << rep.stop_reason << "\n";
    std::snprintf(buf, sizeof buf, "rmse_kw = %.6f\n", rep.rmse_kw);
    os << buf;
    os << "lockout_violations = " << rep.lockout_violations << "\n";
    std::snprintf(buf, sizeof buf, "lockout_pct_per_step = %.6f\n",
                  rep.lockout_pct_per_step);
    os << buf;
    os << "deadband_violations = " << rep.deadband_violations << "\n";
    os << "aggregate_bound_violated = "
       << (rep.bound_violation_steps > 0 ? "yes" : "no") << "\n";
    os << "aggregate_bound_violation_steps = " << rep.bound_violation_steps
       << "\n";
    os << "undervoltage_steps = " << rep.undervoltage_steps << "\n";
    std::snprintf(buf, sizeof buf, "mean_solve_time_s = %.6f\n",
                  rep.mean_solve_s);
    os << buf;
    os << "total_nodes = " << rep.total_nodes << "\n";
    if (std::isfinite(rep.network_bound_kw)) {
      std::snprintf(buf, sizeof buf, "network_bound_kw = %.6f\n",
                    rep.network_bound_kw);
      os << buf;
    } else {
      os << "network_bound_kw = none\n";
    }
  }
}

std::string resolve_output_dir(const Scenario& sc) {
  fs::path out(sc.run.output_dir);
  if (out.is_absolute()) return out.string();
  if (const char* root = std::getenv("TCLCOORD_OUTPUT_ROOT"); root && *root)
    return (fs::path(root) / out).string();
  return fs::absolute(out).string();
}

RunReport run_scenario(const Scenario& sc) {
  const ScenarioBuild build = build_scenario(sc);
  RunReport rep = simulate_scenario(sc, build);
  write_artifacts(sc, build, rep, resolve_output_dir(sc));
  return rep;
}

}  // namespace tclcoord
