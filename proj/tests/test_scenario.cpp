#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "tclcoord/errors.hpp"
#include "tclcoord/scenario.hpp"

using namespace tclcoord;

namespace {

// Smallest file that passes validation; individual cases mutate it.
std::string minimal_json() {
  return R"({
    "schema": "tclcoord.scenario.v1",
    "name": "desk",
    "groups": [{
      "ambient_c": 23.9, "a": 0.75, "r_thermal": 0.7, "p_transfer_kw": 4.0,
      "cop": 2.5, "domain_lo": 20.9, "domain_hi": 24.1,
      "deadband_lo": 21.5, "deadband_hi": 23.5,
      "lockout_on": 2, "lockout_off": 1, "population": 5, "eta": 0.15
    }],
    "abstraction": {"epsilon": 0.35, "delta": 0.45},
    "bounds": {"power_lo": [0.0, 0.0], "power_hi": [1000.0, 0.0]},
    "controller": {"kind": "invset"},
    "reference": {"kind": "synthetic", "lo_kw": 0.0, "hi_kw": 8.0,
                  "step_kw": 1.5, "hold_steps": 2, "seed": 7},
    "run": {"steps": 20, "output_dir": "out"}
  })";
}

Scenario parse_string(const std::string& text, const std::string& base = ".") {
  std::istringstream is(text);
  return parse_scenario(is, base);
}

}  // namespace

TEST_CASE("a minimal scenario parses with defaults filled in") {
  const Scenario sc = parse_string(minimal_json());
  CHECK(sc.name == "desk");
  REQUIRE(sc.groups.size() == 1);
  CHECK(sc.groups[0].population == 5);
  CHECK(sc.groups[0].eta == doctest::Approx(0.15));
  CHECK(sc.epsilon == doctest::Approx(0.35));
  CHECK(sc.controller.kind == ControllerKind::InvSetMpc);
  CHECK(sc.controller.horizon == 1);             // default
  CHECK(sc.controller.max_nodes == 50'000);      // default
  CHECK(sc.controller.cycles_per_group == 8);    // default
  CHECK(sc.reference.kind == ReferenceSpec::Kind::Synthetic);
  CHECK(sc.reference.hold_steps == 2);
  CHECK(sc.reference.start_kw == doctest::Approx(-1.0));  // default: band midpoint
  CHECK(sc.reference.scale == doctest::Approx(1.0));
  CHECK_FALSE(sc.network.enabled);               // no block, no network
  CHECK_FALSE(sc.bounds.derive_upper_from_network);
  CHECK(sc.run.seed == 1u);
  CHECK_FALSE(sc.run.fleet_trace);
  CHECK(sc.base_dir == ".");
}

TEST_CASE("every controller token round-trips through its name") {
  for (const char* tok : {"invset", "benchmark1", "benchmark2", "benchmark3"}) {
    std::string text = minimal_json();
    const std::string from = "\"kind\": \"invset\"";
    text.replace(text.find(from), from.size(),
                 std::string("\"kind\": \"") + tok + "\"");
    const Scenario sc = parse_string(text);
    CHECK(std::string(controller_kind_name(sc.controller.kind)) == tok);
  }
}

TEST_CASE("save then parse is a fixed point") {
  const Scenario first = parse_string(minimal_json());
  std::ostringstream once;
  save_scenario(first, once);

  std::istringstream back(once.str());
  const Scenario second = parse_scenario(back, ".");
  std::ostringstream twice;
  save_scenario(second, twice);

  // Canonical form: a reserialized parse is byte-identical.
  CHECK(once.str() == twice.str());
  CHECK(second.name == first.name);
  CHECK(second.groups.size() == first.groups.size());
  CHECK(second.delta == doctest::Approx(first.delta));
  CHECK(second.reference.seed == first.reference.seed);
  CHECK(second.run.steps == first.run.steps);
}

TEST_CASE("validation names the offending field") {
  const auto mutate = [](const std::string& from, const std::string& to) {
    std::string text = minimal_json();
    const size_t at = text.find(from);
    REQUIRE(at != std::string::npos);
    text.replace(at, from.size(), to);
    return text;
  };

  CHECK_THROWS_WITH_AS(parse_string("{\"schema\": \"nope\"}"),
                       doctest::Contains("unknown schema"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_string(mutate("\"a\": 0.75", "\"a\": 1.25")),
                       doctest::Contains("groups[0].a"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_string(mutate("\"population\": 5", "\"population\": 0")),
                       doctest::Contains("groups[0].population"), ConfigError);
  // Cell too wide for the closeness budget: (1-a)*eps = 0.0875 < eta/2.
  CHECK_THROWS_WITH_AS(parse_string(mutate("\"eta\": 0.15", "\"eta\": 0.2")),
                       doctest::Contains("too coarse"), ConfigError);
  // Erosion margin must strictly dominate eps + eta/2 = 0.425.
  CHECK_THROWS_WITH_AS(parse_string(mutate("\"delta\": 0.45", "\"delta\": 0.42")),
                       doctest::Contains("delta > epsilon + eta/2"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_string(mutate("\"power_lo\": [0.0, 0.0]", "\"power_lo\": [0.0]")),
      doctest::Contains("exactly 2 modes"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_string(mutate("\"power_lo\": [0.0, 0.0], \"power_hi\": [1000.0, 0.0]",
                          "\"power_lo\": [0.0, 0.5], \"power_hi\": [1000.0, 0.5]")),
      doctest::Contains("bracket 0"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_string(mutate("\"kind\": \"invset\"", "\"kind\": \"pid\"")),
      doctest::Contains("invset|benchmark1|benchmark2|benchmark3"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_string(mutate("\"steps\": 20", "\"steps\": 0")),
      doctest::Contains("run.steps"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_string(mutate("\"reference\": {\"kind\": \"synthetic\"",
                          "\"reference\": {\"kind\": \"csv\"")),
      doctest::Contains("csv_path"), ConfigError);
  // Deriving a bound needs somewhere to derive it from.
  CHECK_THROWS_WITH_AS(
      parse_string(mutate("\"power_lo\": [0.0, 0.0]",
                          "\"derive_upper_from_network\": true, "
                          "\"power_lo\": [0.0, 0.0]")),
      doctest::Contains("requires a network block"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_string(mutate("\"run\":",
                          "\"network\": {\"feeder\": \"/no/such/feeder.json\"}, "
                          "\"run\":")),
      doctest::Contains("file not found"), ConfigError);
  // Missing required field is reported by its path.
  CHECK_THROWS_WITH_AS(parse_string(mutate("\"cop\": 2.5, ", "")),
                       doctest::Contains("groups[0].cop"), ConfigError);
}

TEST_CASE("the synthetic generator is seed-stable and stays in its band") {
  ReferenceSpec ref;
  ref.lo_kw = 2.0;
  ref.hi_kw = 9.0;
  ref.step_kw = 1.5;
  ref.hold_steps = 3;
  ref.seed = 11;

  const auto a = generate_reference(ref, 200);
  const auto b = generate_reference(ref, 200);
  REQUIRE(a.size() == 200);
  CHECK(a == b);
  bool moved = false;
  for (size_t t = 0; t < a.size(); ++t) {
    CHECK(a[t] >= 2.0);
    CHECK(a[t] <= 9.0);
    // The walk only moves on segment boundaries.
    if (t % 3 != 0) CHECK(a[t] == a[t - 1]);
    else if (t > 0 && a[t] != a[t - 1]) moved = true;
  }
  CHECK(moved);

  ref.seed = 12;
  CHECK(generate_reference(ref, 200) != a);
}

TEST_CASE("a zero step size emits a flat line at the anchor") {
  ReferenceSpec ref;
  ref.lo_kw = 0.0;
  ref.hi_kw = 10.0;
  ref.step_kw = 0.0;
  const auto mid = generate_reference(ref, 8);
  for (double v : mid) CHECK(v == doctest::Approx(5.0));  // band midpoint

  ref.start_kw = 7.25;
  for (double v : generate_reference(ref, 8)) CHECK(v == doctest::Approx(7.25));

  // Affine shaping applies before the clamp.
  ref.scale = 0.5;
  ref.offset_kw = 1.0;
  for (double v : generate_reference(ref, 8))
    CHECK(v == doctest::Approx(0.5 * 7.25 + 1.0));
}

TEST_CASE("an imported csv is used verbatim") {
  std::istringstream is("t,kw\n# comment\n12.5\n13,ignored-column\n  14.25\r\n");
  const auto vals = load_reference_csv(is);
  REQUIRE(vals.size() == 3);
  CHECK(vals[0] == doctest::Approx(12.5));
  CHECK(vals[1] == doctest::Approx(13.0));
  CHECK(vals[2] == doctest::Approx(14.25));

  std::istringstream bad("1.0\nnot-a-number\n3.0\n");
  CHECK_THROWS_WITH_AS(load_reference_csv(bad), doctest::Contains("line 2"),
                       ConfigError);
}

TEST_CASE("the shipped scenarios parse and validate") {
  for (const char* name : {"quickstart.json"}) {
    const std::string path =
        std::string(TCLCOORD_DATA_DIR) + "/scenarios/" + name;
    std::ifstream f(path);
    REQUIRE_MESSAGE(f.good(), path);
    const std::string dir = std::string(TCLCOORD_DATA_DIR) + "/scenarios";
    CHECK_NOTHROW(parse_scenario(f, dir));
  }
}
