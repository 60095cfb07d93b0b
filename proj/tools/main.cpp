// Command-line front end: validate scenario files, run them, and inspect the
// derived artifacts without writing a program against the library.
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "tclcoord/errors.hpp"
#include "tclcoord/invariant.hpp"
#include "tclcoord/runner.hpp"

namespace fs = std::filesystem;
using namespace tclcoord;

namespace {

int usage() {
  std::fprintf(stderr,
               "usage: tclcoord <verb> <scenario.json> [flags]\n"
               "\n"
               "verbs:\n"
               "  validate   parse and check the scenario, print its name\n"
               "  run        execute the scenario and write its artifacts\n"
               "  cycles     print the controller's cycle family as json\n"
               "  bound      print the network-safe aggregate power bound (kW)\n"
               "\n"
               "run flags:\n"
               "  --output-dir <dir>   override run.output_dir\n"
               "  --fleet-trace        also write per-unit rows (fleet.csv)\n"
               "  --dump-graphs        also write abstractions and edge lists\n"
               "\n"
               "Relative paths inside a scenario resolve against the file's\n"
               "directory; a relative output directory lands under\n"
               "TCLCOORD_OUTPUT_ROOT when that is set.\n");
  return kExitBadConfig;
}

Scenario load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path);
  return parse_scenario(f, fs::path(path).parent_path().string());
}

int do_run(Scenario sc, int argc, char** argv) {
  for (int i = 3; i < argc; ++i) {
    if (std::strcmp(argv[i], "--fleet-trace") == 0) {
      sc.run.fleet_trace = true;
    } else if (std::strcmp(argv[i], "--dump-graphs") == 0) {
      sc.run.dump_graphs = true;
    } else if (std::strcmp(argv[i], "--output-dir") == 0 && i + 1 < argc) {
      sc.run.output_dir = argv[++i];
    } else {
      std::fprintf(stderr, "unknown flag: %s\n", argv[i]);
      return usage();
    }
  }
  const std::string out = resolve_output_dir(sc);
  const RunReport rep = run_scenario(sc);
  std::printf("run: %s (%s)\n", rep.scenario_name.c_str(),
              controller_kind_name(rep.kind));
  std::printf("steps: %d/%d\n", rep.completed_steps, rep.steps_requested);
  if (rep.infeasible_at >= 0)
    std::printf("stopped: %s\n", rep.stop_reason.c_str());
  std::printf("rmse_kw: %.3f\n", rep.rmse_kw);
  std::printf("violations: lockout %d, deadband %d, band-steps %d, "
              "undervoltage-steps %d\n",
              rep.lockout_violations, rep.deadband_violations,
              rep.bound_violation_steps, rep.undervoltage_steps);
  if (std::isfinite(rep.network_bound_kw))
    std::printf("network_bound_kw: %.3f\n", rep.network_bound_kw);
  std::printf("artifacts: %s\n", out.c_str());
  return rep.exit_code;
}

int dispatch(int argc, char** argv) {
  const std::string verb = argv[1];
  const std::string path = argv[2];
  if (verb == "validate") {
    const Scenario sc = load(path);
    std::printf("ok: %s (%s, %zu group%s, %d steps)\n", sc.name.c_str(),
                controller_kind_name(sc.controller.kind), sc.groups.size(),
                sc.groups.size() == 1 ? "" : "s", sc.run.steps);
    return kExitOk;
  }
  if (verb == "run") return do_run(load(path), argc, argv);
  if (verb == "cycles") {
    const Scenario sc = load(path);
    const ScenarioBuild build = build_scenario(sc);
    save_cycles(build.has_reduced ? build.reduced_art.cycles : build.art.cycles,
                std::cout);
    return kExitOk;
  }
  if (verb == "bound") {
    const Scenario sc = load(path);
    if (!sc.network.enabled)
      throw ConfigError("scenario: bound needs a network block");
    std::ifstream f(resolve_path(sc.base_dir, sc.network.feeder_path));
    NetworkModel net = load_feeder(f);
    if (sc.network.v_min >= 0.0) net.v_min = sc.network.v_min;
    std::printf("%.3f\n", compute_safe_power_bound(net, net.v_min));
    return kExitOk;
  }
  std::fprintf(stderr, "unknown verb: %s\n", verb.c_str());
  return usage();
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) return usage();
  try {
    return dispatch(argc, argv);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitBadConfig;
  } catch (const Error& e) {
    // Model and numeric failures: the file was fine, the run was not.
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRunFailure;
  }
}
