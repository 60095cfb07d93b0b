#include "tclcoord/invariant.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tclcoord/errors.hpp"

namespace tclcoord {

namespace {
constexpr size_t kRawCycleCap = 100000;  // hard stop for pathological graphs
}

std::string cycle_violation(const SafeCycle& c, const AggregateGraph& G) {
  if (c.nodes.empty()) return "empty cycle";
  if (c.modes.size() != c.nodes.size()) return "mode sequence length mismatch";
  std::set<std::pair<int, int>> edge_set;
  for (const AggEdge& e : G.edges)
    edge_set.insert({G.node_index(e.from.mode, e.from.tau, e.from.cell),
                     G.node_index(e.to.mode, e.to.tau, e.to.cell)});
  std::set<int> seen;
  for (size_t l = 0; l < c.nodes.size(); ++l) {
    int idx = c.nodes[l];
    if (idx < 0 || idx >= G.state_dim) return "node index out of range";
    if (!G.node_safe[static_cast<size_t>(idx)]) {
      std::ostringstream msg;
      msg << "node " << idx << " is not safe";
      return msg.str();
    }
    if (!seen.insert(idx).second) return "node repeated (cycle must be simple)";
    if (G.node_at(idx).mode != c.modes[l]) return "mode label does not match node";
    int next = c.nodes[(l + 1) % c.nodes.size()];
    if (!edge_set.count({idx, next})) {
      std::ostringstream msg;
      msg << "no edge from node " << idx << " to node " << next;
      return msg.str();
    }
  }
  return "";
}

std::vector<SafeCycle> enumerate_safe_cycles(const AggregateGraph& G, int max_len,
                                             int max_count) {
  if (max_len < 1 || max_count < 1)
    throw ModelError("cycle enumeration: bounds must be positive");
  // Adjacency restricted to safe endpoints, neighbors sorted for determinism.
  std::vector<std::vector<int>> adj(static_cast<size_t>(G.state_dim));
  for (const AggEdge& e : G.edges) {
    int from = G.node_index(e.from.mode, e.from.tau, e.from.cell);
    int to = G.node_index(e.to.mode, e.to.tau, e.to.cell);
    if (G.node_safe[static_cast<size_t>(from)] && G.node_safe[static_cast<size_t>(to)])
      adj[static_cast<size_t>(from)].push_back(to);
  }
  for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());

  std::vector<std::vector<int>> found;
  std::vector<int> path;
  std::vector<char> on_path(static_cast<size_t>(G.state_dim), 0);
  bool truncated = false;

  // Cycles are discovered rooted at their smallest node: the DFS from root s
  // may only traverse nodes with index > s and closes only back at s.
  auto dfs = [&](auto&& self, int root, int v) -> void {
    if (truncated) return;
    for (int w : adj[static_cast<size_t>(v)]) {
      if (w == root) {
        found.push_back(path);
        if (found.size() >= kRawCycleCap) {
          truncated = true;
          return;
        }
      } else if (w > root && !on_path[static_cast<size_t>(w)] &&
                 static_cast<int>(path.size()) < max_len) {
        on_path[static_cast<size_t>(w)] = 1;
        path.push_back(w);
        self(self, root, w);
        path.pop_back();
        on_path[static_cast<size_t>(w)] = 0;
      }
    }
  };
  for (int s = 0; s < G.state_dim; ++s) {
    if (!G.node_safe[static_cast<size_t>(s)]) continue;
    path = {s};
    on_path[static_cast<size_t>(s)] = 1;
    dfs(dfs, s, s);
    on_path[static_cast<size_t>(s)] = 0;
  }

  if (found.empty())
    throw ModelError("cycle enumeration: the safe subgraph contains no cycle, so "
                     "no controlled invariant set exists for this group");

  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
  if (static_cast<int>(found.size()) > max_count)
    found.resize(static_cast<size_t>(max_count));

  std::vector<SafeCycle> cycles;
  cycles.reserve(found.size());
  for (auto& nodes : found) {
    SafeCycle c;
    c.group_id = G.group_id;
    c.nodes = std::move(nodes);
    c.modes.reserve(c.nodes.size());
    for (int idx : c.nodes) c.modes.push_back(G.node_at(idx).mode);
    cycles.push_back(std::move(c));
  }
  return cycles;
}

std::vector<SafeCycle> select_cycles(const std::vector<SafeCycle>& candidates, int n) {
  if (n <= 0) throw ModelError("cycle selection: n must be positive");
  // Signature: how many positions each mode occupies (shift-independent).
  auto signature = [](const SafeCycle& c) {
    std::map<int, int> sig;
    for (int m : c.modes) ++sig[m];
    return std::vector<std::pair<int, int>>(sig.begin(), sig.end());
  };
  std::vector<SafeCycle> out;
  std::set<std::vector<std::pair<int, int>>> taken;
  std::vector<char> used(candidates.size(), 0);
  for (size_t i = 0; i < candidates.size() && static_cast<int>(out.size()) < n; ++i) {
    auto sig = signature(candidates[i]);
    if (taken.insert(sig).second) {
      out.push_back(candidates[i]);
      used[i] = 1;
    }
  }
  for (size_t i = 0; i < candidates.size() && static_cast<int>(out.size()) < n; ++i)
    if (!used[i]) out.push_back(candidates[i]);
  return out;
}

std::vector<long long> shift_occupancy(const std::vector<long long>& beta, int q) {
  if (q < 0) throw ModelError("shift: q must be nonnegative");
  size_t len = beta.size();
  if (len == 0) return beta;
  size_t r = static_cast<size_t>(q) % len;
  std::vector<long long> out(len);
  for (size_t l = 0; l < len; ++l) out[(l + r) % len] = beta[l];
  return out;
}

long long mode_count(const SafeCycle& c, const std::vector<long long>& beta, int mode,
                     int q) {
  if (beta.size() != c.nodes.size())
    throw ModelError("mode count: occupancy length does not match cycle");
  size_t len = beta.size();
  size_t r = static_cast<size_t>(q % static_cast<int>(len));
  long long total = 0;
  for (size_t l = 0; l < len; ++l)
    if (c.modes[l] == mode) total += beta[(l + len - r) % len];
  return total;
}

void CycleAssignment::validate() const {
  if (cycles.size() != beta.size() || cycles.size() != population.size())
    throw ModelError("cycle assignment: per-group arrays differ in length");
  for (size_t i = 0; i < cycles.size(); ++i) {
    if (cycles[i].empty()) throw ModelError("cycle assignment: group without cycles");
    if (cycles[i].size() != beta[i].size())
      throw ModelError("cycle assignment: occupancy list does not match cycles");
    long long total = 0;
    for (size_t j = 0; j < cycles[i].size(); ++j) {
      if (beta[i][j].size() != cycles[i][j].nodes.size())
        throw ModelError("cycle assignment: occupancy length mismatch");
      for (long long v : beta[i][j]) {
        if (v < 0) throw ModelError("cycle assignment: negative occupancy");
        total += v;
      }
    }
    if (total != population[i])
      throw ModelError("cycle assignment: occupancies do not sum to the population");
  }
}

OmegaReport omega_check(const CycleAssignment& ca, const SafeSetSpec& s) {
  ca.validate();
  s.validate();
  size_t modes = s.power_lo.size();
  OmegaReport rep;
  rep.lower_power.assign(modes, 0.0);
  rep.upper_power.assign(modes, 0.0);
  for (size_t i = 0; i < ca.cycles.size(); ++i) {
    for (size_t j = 0; j < ca.cycles[i].size(); ++j) {
      const SafeCycle& c = ca.cycles[i][j];
      const std::vector<long long>& b = ca.beta[i][j];
      for (size_t m = 0; m < modes; ++m) {
        long long lo = mode_count(c, b, static_cast<int>(m), 0), hi = lo;
        for (int q = 1; q < c.length(); ++q) {
          long long h = mode_count(c, b, static_cast<int>(m), q);
          lo = std::min(lo, h);
          hi = std::max(hi, h);
        }
        rep.lower_power[m] += s.weight[i][m] * static_cast<double>(lo);
        rep.upper_power[m] += s.weight[i][m] * static_cast<double>(hi);
      }
    }
  }
  rep.lower_slack.resize(modes);
  rep.upper_slack.resize(modes);
  rep.ok = true;
  for (size_t m = 0; m < modes; ++m) {
    rep.lower_slack[m] = rep.lower_power[m] - s.power_lo[m];
    rep.upper_slack[m] = s.power_hi[m] - rep.upper_power[m];
    if (rep.lower_slack[m] < -1e-9 || rep.upper_slack[m] < -1e-9) rep.ok = false;
  }
  return rep;
}

std::vector<std::vector<long long>> lift(const CycleAssignment& ca,
                                         const std::vector<const AggregateGraph*>& graphs) {
  ca.validate();
  if (graphs.size() != ca.cycles.size())
    throw ModelError("lift: graph count does not match assignment");
  std::vector<std::vector<long long>> xs;
  xs.reserve(graphs.size());
  for (size_t i = 0; i < graphs.size(); ++i) {
    std::vector<long long> x(static_cast<size_t>(graphs[i]->state_dim), 0);
    for (size_t j = 0; j < ca.cycles[i].size(); ++j) {
      const SafeCycle& c = ca.cycles[i][j];
      for (size_t l = 0; l < c.nodes.size(); ++l)
        x[static_cast<size_t>(c.nodes[l])] += ca.beta[i][j][l];
    }
    xs.push_back(std::move(x));
  }
  return xs;
}

std::vector<long long> shift_input(const CycleAssignment& ca, int group,
                                   const AggregateGraph& G) {
  const auto& cycles = ca.cycles.at(static_cast<size_t>(group));
  const auto& betas = ca.beta.at(static_cast<size_t>(group));
  std::vector<long long> u(static_cast<size_t>(G.input_dim), 0);
  for (size_t j = 0; j < cycles.size(); ++j) {
    const SafeCycle& c = cycles[j];
    for (size_t l = 0; l < c.nodes.size(); ++l) {
      size_t next = (l + 1) % c.nodes.size();
      NodeId from = G.node_at(c.nodes[l]);
      NodeId to = G.node_at(c.nodes[next]);
      if (from.mode != to.mode)
        u[static_cast<size_t>(G.input_index(from.mode, to.mode, from.cell))] +=
            betas[j][l];
    }
  }
  return u;
}

MembershipResult membership(const std::vector<std::vector<long long>>& xs,
                            const std::vector<std::vector<SafeCycle>>& cycles,
                            const std::vector<const AggregateGraph*>& graphs,
                            const SafeSetSpec& s, const SolveBudget& budget) {
  s.validate();
  if (xs.size() != cycles.size() || xs.size() != graphs.size() ||
      xs.size() != s.weight.size())
    throw ModelError("membership: group count mismatch");
  size_t groups = xs.size(), modes = s.power_lo.size();

  MilpModel model;
  model.sense = ObjSense::Minimize;

  // Occupancy variables, one per cycle position.
  std::vector<std::vector<int>> beta_base(groups);
  std::vector<long long> pop(groups, 0);
  for (size_t i = 0; i < groups; ++i) {
    pop[i] = std::accumulate(xs[i].begin(), xs[i].end(), 0LL);
    beta_base[i].resize(cycles[i].size());
    for (size_t j = 0; j < cycles[i].size(); ++j) {
      beta_base[i][j] = model.num_vars;
      for (size_t l = 0; l < cycles[i][j].nodes.size(); ++l)
        model.add_var(0.0, static_cast<double>(pop[i]), true);
    }
  }
  // Shift-extrema bounding variables per (group, cycle, mode).
  std::vector<std::vector<std::vector<int>>> lo_var(groups), hi_var(groups);
  for (size_t i = 0; i < groups; ++i) {
    lo_var[i].assign(cycles[i].size(), std::vector<int>(modes, -1));
    hi_var[i].assign(cycles[i].size(), std::vector<int>(modes, -1));
    for (size_t j = 0; j < cycles[i].size(); ++j)
      for (size_t m = 0; m < modes; ++m) {
        lo_var[i][j][m] = model.num_vars;
        model.add_var(0.0, static_cast<double>(pop[i]), true);
        hi_var[i][j][m] = model.num_vars;
        model.add_var(0.0, static_cast<double>(pop[i]), true);
      }
  }

  for (size_t i = 0; i < groups; ++i) {
    // Population row.
    std::vector<std::pair<int, double>> total;
    for (size_t j = 0; j < cycles[i].size(); ++j)
      for (size_t l = 0; l < cycles[i][j].nodes.size(); ++l)
        total.push_back({beta_base[i][j] + static_cast<int>(l), 1.0});
    model.add_constraint(total, Relation::Equal, static_cast<double>(pop[i]));

    // Exact reconstruction of x at every node.
    std::vector<std::vector<std::pair<int, double>>> node_rows(
        static_cast<size_t>(graphs[i]->state_dim));
    for (size_t j = 0; j < cycles[i].size(); ++j)
      for (size_t l = 0; l < cycles[i][j].nodes.size(); ++l)
        node_rows[static_cast<size_t>(cycles[i][j].nodes[l])].push_back(
            {beta_base[i][j] + static_cast<int>(l), 1.0});
    for (int idx = 0; idx < graphs[i]->state_dim; ++idx) {
      long long want = xs[i][static_cast<size_t>(idx)];
      if (node_rows[static_cast<size_t>(idx)].empty()) {
        if (want != 0) {
          // Mass sits on a node no selected cycle covers: unreachable.
          MembershipResult out;
          out.verdict = FeasibilityResult::Verdict::Infeasible;
          return out;
        }
        continue;
      }
      model.add_constraint(node_rows[static_cast<size_t>(idx)], Relation::Equal,
                           static_cast<double>(want));
    }

    // lo <= H_{m,q} <= hi for every shift q, exact since H is a sum of betas.
    for (size_t j = 0; j < cycles[i].size(); ++j) {
      const SafeCycle& c = cycles[i][j];
      size_t len = c.nodes.size();
      for (size_t m = 0; m < modes; ++m)
        for (size_t q = 0; q < len; ++q) {
          std::vector<std::pair<int, double>> lo_row = {{lo_var[i][j][m], 1.0}};
          std::vector<std::pair<int, double>> hi_row = {{hi_var[i][j][m], 1.0}};
          for (size_t l = 0; l < len; ++l)
            if (c.modes[l] == static_cast<int>(m)) {
              int var = beta_base[i][j] + static_cast<int>((l + len - q) % len);
              lo_row.push_back({var, -1.0});
              hi_row.push_back({var, -1.0});
            }
          model.add_constraint(lo_row, Relation::LessEq, 0.0);
          model.add_constraint(hi_row, Relation::GreaterEq, 0.0);
        }
    }
  }

  // Power band over the bounding variables.
  for (size_t m = 0; m < modes; ++m) {
    std::vector<std::pair<int, double>> lo_row, hi_row;
    for (size_t i = 0; i < groups; ++i)
      for (size_t j = 0; j < cycles[i].size(); ++j) {
        lo_row.push_back({lo_var[i][j][m], s.weight[i][m]});
        hi_row.push_back({hi_var[i][j][m], s.weight[i][m]});
      }
    model.add_constraint(lo_row, Relation::GreaterEq, s.power_lo[m]);
    model.add_constraint(hi_row, Relation::LessEq, s.power_hi[m]);
  }

  FeasibilityResult fr = check_feasible(model, budget);
  MembershipResult out;
  out.verdict = fr.verdict;
  if (fr.verdict == FeasibilityResult::Verdict::Feasible) {
    CycleAssignment ca;
    ca.cycles = cycles;
    ca.population.assign(pop.begin(), pop.end());
    ca.beta.resize(groups);
    for (size_t i = 0; i < groups; ++i) {
      ca.beta[i].resize(cycles[i].size());
      for (size_t j = 0; j < cycles[i].size(); ++j) {
        ca.beta[i][j].resize(cycles[i][j].nodes.size());
        for (size_t l = 0; l < cycles[i][j].nodes.size(); ++l)
          ca.beta[i][j][l] = std::llround(
              fr.witness[static_cast<size_t>(beta_base[i][j] + static_cast<int>(l))]);
      }
    }
    ca.validate();
    out.witness = std::move(ca);
  }
  return out;
}

InvarianceResult verify_invariance(const CycleAssignment& ca,
                                   const std::vector<const AggregateGraph*>& graphs,
                                   const std::vector<const AggMatrices*>& mats,
                                   const SafeSetSpec& s, int steps) {
  ca.validate();
  if (graphs.size() != ca.cycles.size() || mats.size() != ca.cycles.size())
    throw ModelError("invariance check: group count mismatch");
  if (steps <= 0) {
    long long period = 1;
    for (const auto& group : ca.cycles)
      for (const SafeCycle& c : group) period = std::lcm(period, (long long)c.length());
    if (period > 1000000)
      throw ModelError("invariance check: combined cycle period too large");
    steps = static_cast<int>(period);
  }

  CycleAssignment cur = ca;
  std::vector<std::vector<long long>> xs = lift(cur, graphs);
  InvarianceResult res;
  for (int t = 0; t <= steps; ++t) {
    SafetyResult safety = is_safe_state(graphs, xs, s);
    if (!safety.safe) {
      res.fail_step = t;
      res.what = "unsafe state after " + std::to_string(t) +
                 " shift step(s): " + safety.violations.front().what;
      return res;
    }
    if (t == steps) break;

    CycleAssignment next = cur;
    for (size_t i = 0; i < next.beta.size(); ++i)
      for (auto& b : next.beta[i]) b = shift_occupancy(b, 1);
    std::vector<std::vector<long long>> want = lift(next, graphs);
    for (size_t i = 0; i < graphs.size(); ++i) {
      std::vector<long long> u = shift_input(cur, static_cast<int>(i), *graphs[i]);
      std::vector<long long> got;
      try {
        got = step_aggregate(*mats[i], *graphs[i], xs[i], u);
      } catch (const ModelError& e) {
        res.fail_step = t;
        res.what = std::string("shift input inadmissible: ") + e.what();
        return res;
      }
      if (got != want[i]) {
        res.fail_step = t;
        res.what = "aggregate step diverged from the shifted assignment at step " +
                   std::to_string(t);
        return res;
      }
      xs[i] = std::move(got);
    }
    cur = std::move(next);
  }
  res.ok = true;
  return res;
}

void save_cycles(const std::vector<std::vector<SafeCycle>>& per_group,
                 std::ostream& os) {
  nlohmann::json j;
  j["schema"] = "tclcoord.cycles.v1";
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& group : per_group) {
    nlohmann::json list = nlohmann::json::array();
    for (const SafeCycle& c : group) {
      nlohmann::json jc;
      jc["group_id"] = c.group_id;
      jc["nodes"] = c.nodes;
      jc["modes"] = c.modes;
      list.push_back(std::move(jc));
    }
    groups.push_back(std::move(list));
  }
  j["groups"] = std::move(groups);
  os << j.dump(2) << "\n";
}

std::vector<std::vector<SafeCycle>> load_cycles(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cycles file: ") + e.what());
  }
  if (j.value("schema", "") != "tclcoord.cycles.v1")
    throw ConfigError("cycles file: unknown schema");
  std::vector<std::vector<SafeCycle>> out;
  try {
    for (const auto& group : j.at("groups")) {
      std::vector<SafeCycle> list;
      for (const auto& jc : group) {
        SafeCycle c;
        c.group_id = jc.at("group_id").get<int>();
        c.nodes = jc.at("nodes").get<std::vector<int>>();
        c.modes = jc.at("modes").get<std::vector<int>>();
        if (c.nodes.empty() || c.nodes.size() != c.modes.size())
          throw ConfigError("cycles file: malformed cycle");
        list.push_back(std::move(c));
      }
      out.push_back(std::move(list));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cycles file: ") + e.what());
  }
  return out;
}

}  // namespace tclcoord
