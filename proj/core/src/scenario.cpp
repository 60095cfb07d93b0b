#include "tclcoord/scenario.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <istream>
#include <ostream>
#include <random>

#include "json.hpp"
#include "tclcoord/errors.hpp"

namespace tclcoord {

namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& path, const char* what) {
  throw ConfigError("scenario: " + path + " " + what);
}

template <typename T>
T req(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) bad_field(where + key, "is missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    bad_field(where + key, "has the wrong type");
  }
}

template <typename T>
T opt(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    bad_field(where + key, "has the wrong type");
  }
}

ControllerKind parse_kind(const std::string& s) {
  if (s == "invset") return ControllerKind::InvSetMpc;
  if (s == "benchmark1") return ControllerKind::Benchmark1;
  if (s == "benchmark2") return ControllerKind::Benchmark2;
  if (s == "benchmark3") return ControllerKind::Benchmark3;
  throw ConfigError(
      "scenario: controller.kind must be one of "
      "invset|benchmark1|benchmark2|benchmark3, got \"" +
      s + "\"");
}

}  // namespace

const char* controller_kind_name(ControllerKind k) {
  switch (k) {
    case ControllerKind::InvSetMpc: return "invset";
    case ControllerKind::Benchmark1: return "benchmark1";
    case ControllerKind::Benchmark2: return "benchmark2";
    case ControllerKind::Benchmark3: return "benchmark3";
  }
  return "?";
}

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

void Scenario::validate() const {
  char msg[200];
  if (groups.empty()) throw ConfigError("scenario: groups must not be empty");
  if (epsilon <= 0.0) throw ConfigError("scenario: abstraction.epsilon must be positive");
  if (delta <= 0.0) throw ConfigError("scenario: abstraction.delta must be positive");
  for (size_t i = 0; i < groups.size(); ++i) {
    const ScenarioGroup& g = groups[i];
    const auto field = [&](const char* name, const char* what) {
      std::snprintf(msg, sizeof msg, "scenario: groups[%zu].%s %s", i, name, what);
      throw ConfigError(msg);
    };
    if (g.population < 1) field("population", "must be >= 1");
    if (!(g.a > 0.0 && g.a < 1.0)) field("a", "must lie in (0, 1)");
    if (g.cop <= 0.0) field("cop", "must be positive");
    if (!(g.domain_lo < g.domain_hi)) field("domain_lo", "must be below domain_hi");
    if (!(g.deadband_lo < g.deadband_hi))
      field("deadband_lo", "must be below deadband_hi");
    if (g.deadband_lo < g.domain_lo || g.deadband_hi > g.domain_hi)
      field("deadband_lo", "band must sit inside the domain");
    if (g.lockout_on < 0 || g.lockout_off < 0)
      field("lockout_on", "lockouts must be >= 0");
    if (g.eta <= 0.0) field("eta", "must be positive");
    // Quantization error must fit the closeness budget, and the erosion
    // margin must strictly dominate closeness plus half a cell.
    if ((1.0 - g.a) * epsilon < 0.5 * g.eta - 1e-12)
      field("eta", "too coarse: needs (1-a)*epsilon >= eta/2");
    if (delta < epsilon + 0.5 * g.eta + 1e-12)
      field("eta", "needs delta > epsilon + eta/2");
  }

  if (bounds.power_lo.size() != 2 || bounds.power_hi.size() != 2)
    throw ConfigError("scenario: bounds.power_lo/power_hi must list exactly 2 modes");
  for (int m = 0; m < 2; ++m) {
    if (bounds.power_lo[static_cast<size_t>(m)] >
        bounds.power_hi[static_cast<size_t>(m)]) {
      std::snprintf(msg, sizeof msg,
                    "scenario: bounds.power_lo[%d] exceeds power_hi[%d]", m, m);
      throw ConfigError(msg);
    }
  }
  if (bounds.power_lo[0] < 0.0)
    throw ConfigError("scenario: bounds.power_lo[0] must be >= 0");
  if (bounds.power_lo[1] > 0.0 || bounds.power_hi[1] < 0.0)
    throw ConfigError(
        "scenario: bounds for mode 1 must bracket 0 (the off mode draws nothing)");
  if (bounds.derive_upper_from_network && !network.enabled)
    throw ConfigError(
        "scenario: bounds.derive_upper_from_network requires a network block");

  if (controller.horizon < 1)
    throw ConfigError("scenario: controller.horizon must be >= 1");
  if (controller.max_nodes < 1)
    throw ConfigError("scenario: controller.max_nodes must be >= 1");
  if (controller.max_seconds <= 0.0)
    throw ConfigError("scenario: controller.max_seconds must be positive");
  if (controller.cycles_per_group < 1)
    throw ConfigError("scenario: controller.cycles_per_group must be >= 1");
  if (controller.max_cycle_length < 1)
    throw ConfigError("scenario: controller.max_cycle_length must be >= 1");
  if (controller.tracking_weight <= 0.0)
    throw ConfigError("scenario: controller.tracking_weight must be positive");

  if (reference.kind == ReferenceSpec::Kind::Synthetic) {
    if (reference.lo_kw < 0.0 || reference.hi_kw < reference.lo_kw)
      throw ConfigError("scenario: reference band needs 0 <= lo_kw <= hi_kw");
    if (reference.hold_steps < 1)
      throw ConfigError("scenario: reference.hold_steps must be >= 1");
    if (reference.step_kw < 0.0)
      throw ConfigError("scenario: reference.step_kw must be >= 0");
    if (reference.scale <= 0.0)
      throw ConfigError("scenario: reference.scale must be positive");
  } else {
    if (reference.csv_path.empty())
      throw ConfigError("scenario: reference.csv_path is missing");
    const std::string path = resolve_path(base_dir, reference.csv_path);
    if (!std::filesystem::exists(path))
      throw ConfigError("scenario: reference.csv_path: file not found: " + path);
  }

  if (network.enabled) {
    if (network.feeder_path.empty())
      throw ConfigError("scenario: network.feeder is missing");
    const std::string path = resolve_path(base_dir, network.feeder_path);
    if (!std::filesystem::exists(path))
      throw ConfigError("scenario: network.feeder: file not found: " + path);
    if (network.v_min >= 0.0 && network.v_min > 1.5)
      throw ConfigError("scenario: network.v_min looks implausible (> 1.5 p.u.)");
  }

  if (run.steps < 1) throw ConfigError("scenario: run.steps must be >= 1");
  if (run.output_dir.empty())
    throw ConfigError("scenario: run.output_dir is missing");
}

Scenario parse_scenario(std::istream& is, const std::string& base_dir) {
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario file: ") + e.what());
  }
  if (j.value("schema", "") != "tclcoord.scenario.v1")
    throw ConfigError("scenario file: unknown schema");

  Scenario sc;
  sc.base_dir = base_dir;
  sc.name = opt<std::string>(j, "name", "unnamed", "");

  if (!j.contains("groups") || !j.at("groups").is_array() || j.at("groups").empty())
    throw ConfigError("scenario: groups must be a non-empty array");
  const json& jgroups = j.at("groups");
  for (size_t i = 0; i < jgroups.size(); ++i) {
    char prefix[48];
    std::snprintf(prefix, sizeof prefix, "groups[%zu].", i);
    const std::string where = prefix;
    const json& jg = jgroups[i];
    ScenarioGroup g;
    g.ambient_c = req<double>(jg, "ambient_c", where);
    g.a = req<double>(jg, "a", where);
    g.r_thermal = req<double>(jg, "r_thermal", where);
    g.p_transfer_kw = req<double>(jg, "p_transfer_kw", where);
    g.cop = req<double>(jg, "cop", where);
    g.domain_lo = req<double>(jg, "domain_lo", where);
    g.domain_hi = req<double>(jg, "domain_hi", where);
    g.deadband_lo = req<double>(jg, "deadband_lo", where);
    g.deadband_hi = req<double>(jg, "deadband_hi", where);
    g.lockout_on = req<int>(jg, "lockout_on", where);
    g.lockout_off = req<int>(jg, "lockout_off", where);
    g.population = req<int>(jg, "population", where);
    g.eta = req<double>(jg, "eta", where);
    sc.groups.push_back(g);
  }

  const json jabs = req<json>(j, "abstraction", "");
  sc.epsilon = req<double>(jabs, "epsilon", "abstraction.");
  sc.delta = req<double>(jabs, "delta", "abstraction.");

  const json jb = req<json>(j, "bounds", "");
  sc.bounds.power_lo = req<std::vector<double>>(jb, "power_lo", "bounds.");
  sc.bounds.power_hi = req<std::vector<double>>(jb, "power_hi", "bounds.");
  sc.bounds.derive_upper_from_network =
      opt<bool>(jb, "derive_upper_from_network", false, "bounds.");

  const json jc = req<json>(j, "controller", "");
  sc.controller.kind = parse_kind(req<std::string>(jc, "kind", "controller."));
  sc.controller.horizon = opt<int>(jc, "horizon", 1, "controller.");
  sc.controller.max_nodes =
      opt<long long>(jc, "max_nodes", 50'000, "controller.");
  sc.controller.max_seconds = opt<double>(jc, "max_seconds", 10.0, "controller.");
  sc.controller.cycles_per_group =
      opt<int>(jc, "cycles_per_group", 8, "controller.");
  sc.controller.max_cycle_length =
      opt<int>(jc, "max_cycle_length", 12, "controller.");
  sc.controller.tracking_weight =
      opt<double>(jc, "tracking_weight", 1.0, "controller.");

  const json jr = req<json>(j, "reference", "");
  const std::string rkind = opt<std::string>(jr, "kind", "synthetic", "reference.");
  if (rkind == "synthetic") {
    sc.reference.kind = ReferenceSpec::Kind::Synthetic;
  } else if (rkind == "csv") {
    sc.reference.kind = ReferenceSpec::Kind::Csv;
  } else {
    throw ConfigError("scenario: reference.kind must be synthetic|csv");
  }
  sc.reference.csv_path = opt<std::string>(jr, "csv_path", "", "reference.");
  sc.reference.seed = opt<unsigned>(jr, "seed", 1, "reference.");
  sc.reference.lo_kw = opt<double>(jr, "lo_kw", 0.0, "reference.");
  sc.reference.hi_kw = opt<double>(jr, "hi_kw", 0.0, "reference.");
  sc.reference.hold_steps = opt<int>(jr, "hold_steps", 1, "reference.");
  sc.reference.step_kw = opt<double>(jr, "step_kw", 0.0, "reference.");
  sc.reference.start_kw = opt<double>(jr, "start_kw", -1.0, "reference.");
  sc.reference.scale = opt<double>(jr, "scale", 1.0, "reference.");
  sc.reference.offset_kw = opt<double>(jr, "offset_kw", 0.0, "reference.");

  if (j.contains("network")) {
    const json jn = j.at("network");
    sc.network.enabled = opt<bool>(jn, "enabled", true, "network.");
    sc.network.feeder_path = opt<std::string>(jn, "feeder", "", "network.");
    sc.network.v_min = opt<double>(jn, "v_min", -1.0, "network.");
    sc.network.recompute_bound_per_step =
        opt<bool>(jn, "recompute_bound_per_step", false, "network.");
  }

  const json jrun = req<json>(j, "run", "");
  sc.run.steps = req<int>(jrun, "steps", "run.");
  sc.run.seed = opt<unsigned>(jrun, "seed", 1, "run.");
  sc.run.output_dir = req<std::string>(jrun, "output_dir", "run.");
  sc.run.fleet_trace = opt<bool>(jrun, "fleet_trace", false, "run.");
  sc.run.dump_graphs = opt<bool>(jrun, "dump_graphs", false, "run.");

  sc.validate();
  return sc;
}

void save_scenario(const Scenario& sc, std::ostream& os) {
  json j;
  j["schema"] = "tclcoord.scenario.v1";
  j["name"] = sc.name;
  json jgroups = json::array();
  for (const ScenarioGroup& g : sc.groups) {
    json jg;
    jg["ambient_c"] = g.ambient_c;
    jg["a"] = g.a;
    jg["r_thermal"] = g.r_thermal;
    jg["p_transfer_kw"] = g.p_transfer_kw;
    jg["cop"] = g.cop;
    jg["domain_lo"] = g.domain_lo;
    jg["domain_hi"] = g.domain_hi;
    jg["deadband_lo"] = g.deadband_lo;
    jg["deadband_hi"] = g.deadband_hi;
    jg["lockout_on"] = g.lockout_on;
    jg["lockout_off"] = g.lockout_off;
    jg["population"] = g.population;
    jg["eta"] = g.eta;
    jgroups.push_back(std::move(jg));
  }
  j["groups"] = std::move(jgroups);
  j["abstraction"] = {{"epsilon", sc.epsilon}, {"delta", sc.delta}};
  j["bounds"] = {{"power_lo", sc.bounds.power_lo},
                 {"power_hi", sc.bounds.power_hi},
                 {"derive_upper_from_network", sc.bounds.derive_upper_from_network}};
  j["controller"] = {{"kind", controller_kind_name(sc.controller.kind)},
                     {"horizon", sc.controller.horizon},
                     {"max_nodes", sc.controller.max_nodes},
                     {"max_seconds", sc.controller.max_seconds},
                     {"cycles_per_group", sc.controller.cycles_per_group},
                     {"max_cycle_length", sc.controller.max_cycle_length},
                     {"tracking_weight", sc.controller.tracking_weight}};
  j["reference"] = {
      {"kind",
       sc.reference.kind == ReferenceSpec::Kind::Synthetic ? "synthetic" : "csv"},
      {"csv_path", sc.reference.csv_path},
      {"seed", sc.reference.seed},
      {"lo_kw", sc.reference.lo_kw},
      {"hi_kw", sc.reference.hi_kw},
      {"hold_steps", sc.reference.hold_steps},
      {"step_kw", sc.reference.step_kw},
      {"start_kw", sc.reference.start_kw},
      {"scale", sc.reference.scale},
      {"offset_kw", sc.reference.offset_kw}};
  j["network"] = {{"enabled", sc.network.enabled},
                  {"feeder", sc.network.feeder_path},
                  {"v_min", sc.network.v_min},
                  {"recompute_bound_per_step", sc.network.recompute_bound_per_step}};
  j["run"] = {{"steps", sc.run.steps},
              {"seed", sc.run.seed},
              {"output_dir", sc.run.output_dir},
              {"fleet_trace", sc.run.fleet_trace},
              {"dump_graphs", sc.run.dump_graphs}};
  os << j.dump(2) << "\n";
}

std::vector<double> generate_reference(const ReferenceSpec& ref, int count) {
  if (ref.kind != ReferenceSpec::Kind::Synthetic)
    throw ConfigError("reference: csv references come from load_reference_csv");
  if (count < 0) throw ConfigError("reference: count must be >= 0");
  std::mt19937 rng(ref.seed);
  // Raw engine draws keep the stream identical across standard libraries;
  // distribution classes do not promise that.
  const auto uniform_pm1 = [&rng]() {
    return 2.0 * (static_cast<double>(rng()) / 4294967296.0) - 1.0;
  };
  const double mid = 0.5 * (ref.lo_kw + ref.hi_kw);
  double walk = ref.start_kw < 0.0 ? mid : ref.start_kw;
  std::vector<double> out;
  out.reserve(static_cast<size_t>(count));
  for (int t = 0; t < count; ++t) {
    if (t > 0 && t % ref.hold_steps == 0) walk += ref.step_kw * uniform_pm1();
    const double v = ref.scale * walk + ref.offset_kw;
    out.push_back(std::min(ref.hi_kw, std::max(ref.lo_kw, v)));
  }
  return out;
}

std::vector<double> load_reference_csv(std::istream& is) {
  std::vector<double> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos) continue;
    if (line[start] == '#') continue;
    const size_t comma = line.find(',', start);
    std::string field = line.substr(start, comma - start);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\r' ||
                              field.back() == '\t'))
      field.pop_back();
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || *end != '\0') {
      if (out.empty()) continue;  // header row
      char msg[96];
      std::snprintf(msg, sizeof msg, "reference csv: line %d is not a number",
                    lineno);
      throw ConfigError(msg);
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace tclcoord
