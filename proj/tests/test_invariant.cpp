#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"
#include "tclcoord/errors.hpp"
#include "tclcoord/invariant.hpp"

using namespace tclcoord;

namespace {

GroupDynamics stub_group(int lock_on, int lock_off, int population = 25) {
  return make_tcl_group(0, 32.0, 0.9, 2.0, 12.0, 2.5, 5.0, 35.0, 18.0, 30.0,
                        lock_on, lock_off, population);
}

AbstractionSpec synth_spec(std::vector<std::vector<int>> succ, std::vector<int> safe) {
  AbstractionSpec spec;
  spec.eta = 0.1;
  spec.epsilon = 0.8;
  spec.delta = 0.86;
  spec.base_cell = 0;
  size_t K = succ.at(0).size();
  spec.grid.resize(K);
  for (size_t k = 0; k < K; ++k) spec.grid[k] = 0.05 + 0.1 * static_cast<double>(k);
  spec.succ = std::move(succ);
  spec.safe = std::move(safe);
  spec.safe_mask.assign(K, 0);
  for (int k : spec.safe) spec.safe_mask[static_cast<size_t>(k)] = 1;
  spec.clamped.assign(spec.succ.size(), std::vector<char>(K, 0));
  return spec;
}

SafeCycle dummy_cycle(std::vector<int> modes, int tag = 0) {
  SafeCycle c;
  c.modes = std::move(modes);
  c.nodes.resize(c.modes.size());
  std::iota(c.nodes.begin(), c.nodes.end(), tag * 100);
  return c;
}

// Three interleaved rotations on a shared 9-cell grid, lockout-free:
// a 3-cycle (on,on,off), a 2-cycle (on,off), and a 4-cycle (on,on,off,off).
struct ThreeCycleFixture {
  GroupDynamics g = stub_group(0, 0);
  AbstractionSpec spec = synth_spec({{1, 0, 0, 0, 3, 6, 0, 0, 5},
                                     {0, 2, 0, 4, 0, 0, 7, 8, 0}},
                                    {0, 1, 2, 3, 4, 5, 6, 7, 8});
  AggregateGraph G = build_graph(spec, g);
  AggMatrices M = build_matrices(G);

  CycleAssignment assignment() const {
    SafeCycle c1, c2, c3;
    c1.nodes = {G.node_index(0, 0, 0), G.node_index(0, 0, 1), G.node_index(1, 0, 2)};
    c1.modes = {0, 0, 1};
    c2.nodes = {G.node_index(0, 0, 3), G.node_index(1, 0, 4)};
    c2.modes = {0, 1};
    c3.nodes = {G.node_index(0, 0, 5), G.node_index(0, 0, 6), G.node_index(1, 0, 7),
                G.node_index(1, 0, 8)};
    c3.modes = {0, 0, 1, 1};
    CycleAssignment ca;
    ca.cycles = {{c1, c2, c3}};
    ca.beta = {{{1, 2, 3}, {4, 5}, {1, 2, 3, 4}}};
    ca.population = {25};
    return ca;
  }
  SafeSetSpec band(double cap0 = 19.0) const {
    SafeSetSpec s;
    s.power_lo = {0.0, 0.0};
    s.power_hi = {cap0, 1e9};
    s.weight = {{1.0, 1.0}};
    return s;
  }
};

}  // namespace

TEST_CASE("enumeration: self-loops come first") {
  GroupDynamics g = stub_group(0, 0);
  AbstractionSpec spec = synth_spec({{0, 1}, {0, 1}}, {0, 1});
  AggregateGraph G = build_graph(spec, g);
  std::vector<SafeCycle> cycles = enumerate_safe_cycles(G);
  REQUIRE(cycles.size() >= 4);
  // four length-1 stay cycles, ordered by node index
  for (int i = 0; i < 4; ++i) {
    CHECK(cycles[static_cast<size_t>(i)].length() == 1);
    CHECK(cycles[static_cast<size_t>(i)].nodes[0] == i);
    CHECK(cycle_violation(cycles[static_cast<size_t>(i)], G) == "");
  }
  for (size_t i = 4; i < cycles.size(); ++i) CHECK(cycles[i].length() > 1);
}

TEST_CASE("enumeration finds the five-node lockout cycle") {
  GroupDynamics g = stub_group(1, 2);
  std::vector<std::vector<int>> succ0(2, std::vector<int>(8, 0));
  succ0[0][4] = 6;
  succ0[0][6] = 7;
  succ0[1][5] = 4;
  succ0[1][6] = 5;
  succ0[1][7] = 6;
  AbstractionSpec spec = synth_spec(succ0, {4, 5, 6, 7});
  AggregateGraph G = build_graph(spec, g);
  std::vector<SafeCycle> cycles = enumerate_safe_cycles(G);

  std::vector<int> expect = {G.node_index(0, 0, 7), G.node_index(1, 1, 6),
                             G.node_index(1, 2, 5), G.node_index(1, 0, 4),
                             G.node_index(0, 1, 6)};
  bool found = false;
  for (const SafeCycle& c : cycles) {
    CHECK(cycle_violation(c, G) == "");
    if (c.nodes == expect) {
      found = true;
      CHECK(c.modes == std::vector<int>{0, 1, 1, 1, 0});
    }
  }
  CHECK(found);
}

TEST_CASE("no cycle inside the safe region raises") {
  GroupDynamics g = stub_group(0, 0);
  AbstractionSpec spec = synth_spec({{0, 0}, {0, 0}}, {1});
  AggregateGraph G = build_graph(spec, g);
  CHECK_THROWS_WITH_AS(enumerate_safe_cycles(G), doctest::Contains("no cycle"),
                       ModelError);
}

TEST_CASE("cycle selection prefers fresh mode signatures") {
  std::vector<SafeCycle> cand = {dummy_cycle({0}, 0), dummy_cycle({0}, 1),
                                 dummy_cycle({0, 1}, 2), dummy_cycle({1}, 3),
                                 dummy_cycle({0}, 4)};
  std::vector<SafeCycle> three = select_cycles(cand, 3);
  REQUIRE(three.size() == 3);
  CHECK(three[0].nodes[0] == 0);
  CHECK(three[1].nodes[0] == 200);
  CHECK(three[2].nodes[0] == 300);
  std::vector<SafeCycle> five = select_cycles(cand, 5);
  REQUIRE(five.size() == 5);
  CHECK(five[3].nodes[0] == 100);
  CHECK(five[4].nodes[0] == 400);
  CHECK(select_cycles(cand, 99).size() == 5);
}

TEST_CASE("occupancy shift") {
  CHECK(shift_occupancy({1, 2, 3}, 1) == std::vector<long long>{3, 1, 2});
  CHECK(shift_occupancy({1, 2, 3}, 3) == std::vector<long long>{1, 2, 3});
  CHECK(shift_occupancy({1, 0, 0, 0}, 2) == std::vector<long long>{0, 0, 1, 0});
  std::vector<long long> b = {4, 7, 1, 9};
  long long total = std::accumulate(b.begin(), b.end(), 0LL);
  for (int q = 0; q < 9; ++q) {
    std::vector<long long> s = shift_occupancy(b, q);
    CHECK(std::accumulate(s.begin(), s.end(), 0LL) == total);
  }
}

TEST_CASE("mode occupancy across shifts") {
  SafeCycle c = dummy_cycle({0, 0, 1});
  std::vector<long long> beta = {1, 2, 3};
  CHECK(mode_count(c, beta, 0, 0) == 3);
  CHECK(mode_count(c, beta, 0, 1) == 4);
  CHECK(mode_count(c, beta, 0, 2) == 5);
  long long best = 0;
  for (int q = 0; q < 3; ++q) best = std::max(best, mode_count(c, beta, 0, q));
  CHECK(best == 5);

  SafeCycle all_on = dummy_cycle({0, 0, 0, 0});
  std::vector<long long> b2 = {3, 1, 4, 1};
  for (int q = 0; q < 4; ++q) CHECK(mode_count(all_on, b2, 0, q) == 9);

  std::mt19937 rng(5150);
  for (int trial = 0; trial < 50; ++trial) {
    int len = 1 + static_cast<int>(rng() % 6u);
    std::vector<int> modes(static_cast<size_t>(len));
    std::vector<long long> b(static_cast<size_t>(len));
    for (auto& m : modes) m = static_cast<int>(rng() % 2u);
    long long total = 0;
    for (auto& v : b) {
      v = static_cast<long long>(rng() % 5u);
      total += v;
    }
    SafeCycle rc = dummy_cycle(modes);
    for (int q = 0; q < 2 * len; ++q) {
      CHECK(mode_count(rc, b, 0, q) + mode_count(rc, b, 1, q) == total);
      CHECK(mode_count(rc, b, 0, q) == mode_count(rc, b, 0, q + len));  // periodic
    }
  }
}

TEST_CASE("stationarity check with the three-rotation instance") {
  ThreeCycleFixture f;
  CycleAssignment ca = f.assignment();
  OmegaReport rep = omega_check(ca, f.band(19.0));
  CHECK(rep.ok);
  CHECK(rep.upper_power[0] == doctest::Approx(17.0));  // 5 + 5 + 7
  CHECK(rep.upper_slack[0] == doctest::Approx(2.0));
  CHECK(rep.lower_power[0] == doctest::Approx(10.0));  // 3 + 4 + 3

  OmegaReport tight = omega_check(ca, f.band(16.0));
  CHECK_FALSE(tight.ok);
  CHECK(tight.upper_slack[0] == doctest::Approx(-1.0));

  // vacuous bounds always pass
  SafeSetSpec vac = f.band(1e9);
  CHECK(omega_check(ca, vac).ok);
}

TEST_CASE("alternating cycle with all mass on one position fails a floor") {
  ThreeCycleFixture f;
  SafeCycle c2;
  c2.nodes = {f.G.node_index(0, 0, 3), f.G.node_index(1, 0, 4)};
  c2.modes = {0, 1};
  CycleAssignment ca;
  ca.cycles = {{c2}};
  ca.beta = {{{5, 0}}};
  ca.population = {5};
  SafeSetSpec s;
  s.power_lo = {1.0, 0.0};
  s.power_hi = {1e9, 1e9};
  s.weight = {{1.0, 1.0}};
  OmegaReport rep = omega_check(ca, s);
  CHECK_FALSE(rep.ok);
  CHECK(rep.lower_power[0] == doctest::Approx(0.0));

  // and the replay exhibits the violation within one period
  InvarianceResult res = verify_invariance(ca, {&f.G}, {&f.M}, s, 0);
  CHECK_FALSE(res.ok);
  CHECK(res.fail_step == 1);
  CHECK(res.what.find("mode 0") != std::string::npos);
}

TEST_CASE("lift scatters occupancies onto nodes") {
  ThreeCycleFixture f;
  CycleAssignment ca = f.assignment();
  std::vector<std::vector<long long>> xs = lift(ca, {&f.G});
  REQUIRE(xs.size() == 1);
  CHECK(std::accumulate(xs[0].begin(), xs[0].end(), 0LL) == 25);
  CHECK(xs[0][static_cast<size_t>(f.G.node_index(0, 0, 0))] == 1);
  CHECK(xs[0][static_cast<size_t>(f.G.node_index(1, 0, 2))] == 3);
  CHECK(xs[0][static_cast<size_t>(f.G.node_index(1, 0, 4))] == 5);
  CHECK(xs[0][static_cast<size_t>(f.G.node_index(0, 0, 6))] == 2);

  // unit occupancy -> unit vector
  CycleAssignment unit = ca;
  unit.beta = {{{0, 1, 0}, {0, 0}, {0, 0, 0, 0}}};
  unit.population = {1};
  std::vector<std::vector<long long>> ux = lift(unit, {&f.G});
  CHECK(std::accumulate(ux[0].begin(), ux[0].end(), 0LL) == 1);
  CHECK(ux[0][static_cast<size_t>(f.G.node_index(0, 0, 1))] == 1);

  // two cycles sharing a node add their entries
  SafeCycle share1, share2;
  share1.nodes = {f.G.node_index(0, 0, 0), f.G.node_index(0, 0, 1),
                  f.G.node_index(1, 0, 2)};
  share1.modes = {0, 0, 1};
  share2 = share1;
  CycleAssignment shared;
  shared.cycles = {{share1, share2}};
  shared.beta = {{{2, 0, 0}, {3, 0, 0}}};
  shared.population = {5};
  std::vector<std::vector<long long>> sx = lift(shared, {&f.G});
  CHECK(sx[0][static_cast<size_t>(f.G.node_index(0, 0, 0))] == 5);

  // linearity
  CycleAssignment sum = ca;
  for (size_t j = 0; j < sum.beta[0].size(); ++j)
    for (size_t l = 0; l < sum.beta[0][j].size(); ++l) sum.beta[0][j][l] *= 2;
  sum.population = {50};
  std::vector<std::vector<long long>> doubled = lift(sum, {&f.G});
  for (size_t idx = 0; idx < doubled[0].size(); ++idx)
    CHECK(doubled[0][idx] == 2 * xs[0][idx]);
}

TEST_CASE("rotation strategy is invariant over a full period") {
  ThreeCycleFixture f;
  CycleAssignment ca = f.assignment();
  for (size_t j = 0; j < ca.cycles[0].size(); ++j)
    CHECK(cycle_violation(ca.cycles[0][j], f.G) == "");
  InvarianceResult res = verify_invariance(ca, {&f.G}, {&f.M}, f.band(19.0), 0);
  CHECK(res.ok);
  // lcm(3, 2, 4) = 12; an explicit longer horizon also holds
  InvarianceResult longer = verify_invariance(ca, {&f.G}, {&f.M}, f.band(19.0), 48);
  CHECK(longer.ok);
}

TEST_CASE("fixed-mode self-loop is trivially invariant") {
  GroupDynamics g = stub_group(0, 0, 7);
  AbstractionSpec spec = synth_spec({{0, 1}, {0, 1}}, {0, 1});
  AggregateGraph G = build_graph(spec, g);
  AggMatrices M = build_matrices(G);
  SafeCycle loop;
  loop.nodes = {G.node_index(0, 0, 1)};
  loop.modes = {0};
  CycleAssignment ca;
  ca.cycles = {{loop}};
  ca.beta = {{{7}}};
  ca.population = {7};
  SafeSetSpec s;
  s.power_lo = {7.0, 0.0};
  s.power_hi = {7.0, 0.0};
  s.weight = {{1.0, 1.0}};
  CHECK(omega_check(ca, s).ok);
  InvarianceResult res = verify_invariance(ca, {&G}, {&M}, s, 5);
  CHECK(res.ok);
}

TEST_CASE("membership round trip and off-support rejection") {
  ThreeCycleFixture f;
  CycleAssignment ca = f.assignment();
  SafeSetSpec s = f.band(19.0);
  std::vector<std::vector<long long>> xs = lift(ca, {&f.G});

  MembershipResult res = membership(xs, ca.cycles, {&f.G}, s);
  REQUIRE(res.verdict == FeasibilityResult::Verdict::Feasible);
  CHECK(omega_check(res.witness, s).ok);
  CHECK(lift(res.witness, {&f.G}) == xs);

  std::vector<std::vector<long long>> off = xs;
  off[0][static_cast<size_t>(f.G.node_index(0, 0, 7))] += 1;  // covered by no cycle
  MembershipResult bad = membership(off, ca.cycles, {&f.G}, s);
  CHECK(bad.verdict == FeasibilityResult::Verdict::Infeasible);

  SolveBudget none;
  none.max_nodes = 0;
  MembershipResult unk = membership(xs, ca.cycles, {&f.G}, s, none);
  CHECK(unk.verdict == FeasibilityResult::Verdict::Unknown);
}

TEST_CASE("membership agrees with brute force on two 2-cycles") {
  GroupDynamics g = stub_group(0, 0, 4);
  AbstractionSpec spec = synth_spec({{0, 0, 0, 2}, {1, 0, 3, 0}}, {0, 1, 2, 3});
  AggregateGraph G = build_graph(spec, g);
  SafeCycle c1, c2;
  c1.nodes = {G.node_index(0, 0, 0), G.node_index(1, 0, 1)};
  c1.modes = {0, 1};
  c2.nodes = {G.node_index(0, 0, 2), G.node_index(1, 0, 3)};
  c2.modes = {0, 1};
  CHECK(cycle_violation(c1, G) == "");
  CHECK(cycle_violation(c2, G) == "");
  SafeSetSpec s;
  s.power_lo = {1.0, 0.0};
  s.power_hi = {3.0, 1e9};
  s.weight = {{1.0, 1.0}};

  // Every way to spread 4 subsystems over the four positions; the lift is
  // injective here, so feasibility reduces to the stationarity check.
  for (long long a = 0; a <= 4; ++a)
    for (long long b = 0; a + b <= 4; ++b)
      for (long long c = 0; a + b + c <= 4; ++c) {
        long long d = 4 - a - b - c;
        CycleAssignment ca;
        ca.cycles = {{c1, c2}};
        ca.beta = {{{a, b}, {c, d}}};
        ca.population = {4};
        bool expect = omega_check(ca, s).ok;
        std::vector<std::vector<long long>> xs = lift(ca, {&G});
        MembershipResult res = membership(xs, ca.cycles, {&G}, s);
        if (expect) {
          REQUIRE(res.verdict == FeasibilityResult::Verdict::Feasible);
        } else {
          REQUIRE(res.verdict == FeasibilityResult::Verdict::Infeasible);
        }
      }
}

TEST_CASE("sufficiency: stationarity check implies invariance") {
  std::mt19937 rng(987001);
  int done = 0, attempts = 0;
  while (done < 200 && attempts < 2000) {
    ++attempts;
    int K = 2 + static_cast<int>(rng() % 3u);
    GroupDynamics g = stub_group(static_cast<int>(rng() % 3u),
                                 static_cast<int>(rng() % 3u));
    std::vector<std::vector<int>> succ(2, std::vector<int>(static_cast<size_t>(K)));
    for (auto& row : succ)
      for (auto& v : row) v = static_cast<int>(rng() % static_cast<unsigned>(K));
    std::vector<int> safe;
    for (int k = 0; k < K; ++k)
      if (rng() % 4u != 0) safe.push_back(k);
    if (safe.empty()) safe.push_back(0);
    AbstractionSpec spec = synth_spec(succ, safe);
    AggregateGraph G = build_graph(spec, g);
    std::vector<SafeCycle> cycles;
    try {
      cycles = enumerate_safe_cycles(G, 4, 64);
    } catch (const ModelError&) {
      continue;  // this random graph has no safe cycle
    }
    std::vector<SafeCycle> chosen = select_cycles(cycles, 1 + static_cast<int>(rng() % 3u));

    CycleAssignment ca;
    ca.cycles = {chosen};
    ca.beta.resize(1);
    long long N = 1 + static_cast<long long>(rng() % 8u);
    std::vector<std::pair<size_t, size_t>> slots;
    for (size_t j = 0; j < chosen.size(); ++j) {
      ca.beta[0].push_back(std::vector<long long>(chosen[j].nodes.size(), 0));
      for (size_t l = 0; l < chosen[j].nodes.size(); ++l) slots.push_back({j, l});
    }
    for (long long n = 0; n < N; ++n) {
      auto [j, l] = slots[rng() % slots.size()];
      ++ca.beta[0][j][l];
    }
    ca.population = {N};

    SafeSetSpec s;
    s.power_lo = {0.0, 0.0};
    s.power_hi = {1e9, 1e9};
    s.weight = {{1.0, 0.6}};
    OmegaReport open = omega_check(ca, s);
    // Tighten the band to exactly the certified worst cases.
    s.power_lo = open.lower_power;
    s.power_hi = open.upper_power;
    REQUIRE(omega_check(ca, s).ok);

    AggMatrices M = build_matrices(G);
    InvarianceResult res = verify_invariance(ca, {&G}, {&M}, s, 0);
    if (!res.ok) INFO("instance ", done, ": ", res.what);
    REQUIRE(res.ok);
    ++done;
  }
  REQUIRE(done == 200);
}

TEST_CASE("cycle files round trip") {
  ThreeCycleFixture f;
  CycleAssignment ca = f.assignment();
  std::ostringstream out;
  save_cycles(ca.cycles, out);
  std::istringstream in(out.str());
  std::vector<std::vector<SafeCycle>> back = load_cycles(in);
  REQUIRE(back.size() == 1);
  REQUIRE(back[0].size() == 3);
  for (size_t j = 0; j < 3; ++j) {
    CHECK(back[0][j].nodes == ca.cycles[0][j].nodes);
    CHECK(back[0][j].modes == ca.cycles[0][j].modes);
  }
  std::istringstream junk("{\"schema\":\"nope\"}");
  CHECK_THROWS_AS(load_cycles(junk), ConfigError);
}
