#include "tclcoord/aggregate.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <sstream>

#include "tclcoord/errors.hpp"

namespace tclcoord {

namespace {

template <typename T>
std::vector<T> apply_impl(const SparseMatrix& M, const std::vector<T>& v) {
  if (static_cast<int>(v.size()) != M.cols)
    throw ModelError("sparse apply: dimension mismatch");
  std::vector<T> out(static_cast<size_t>(M.rows), T{0});
  for (const auto& e : M.entries)
    out[static_cast<size_t>(e.row)] +=
        static_cast<T>(e.value) * v[static_cast<size_t>(e.col)];
  return out;
}

}  // namespace

std::vector<double> SparseMatrix::apply(const std::vector<double>& v) const {
  return apply_impl(*this, v);
}

std::vector<long long> SparseMatrix::apply(const std::vector<long long>& v) const {
  return apply_impl(*this, v);
}

NodeId AggregateGraph::node_at(int idx) const {
  for (int m = 0; m < mode_count; ++m) {
    if (idx < mode_offset[static_cast<size_t>(m + 1)]) {
      int rel = idx - mode_offset[static_cast<size_t>(m)];
      return NodeId{m, rel / cell_count, rel % cell_count};
    }
  }
  throw ModelError("aggregate graph: node index out of range");
}

AggregateGraph::InputId AggregateGraph::input_at(int idx) const {
  int cell = idx % cell_count;
  int pair = idx / cell_count;
  int m1 = pair / (mode_count - 1);
  int pos = pair % (mode_count - 1);
  int m2 = pos < m1 ? pos : pos + 1;
  return InputId{m1, m2, cell};
}

AggregateGraph build_graph(const AbstractionSpec& spec, const GroupDynamics& g,
                           int group_id) {
  g.validate();
  const int M = g.mode_count;
  const int K = spec.cell_count();
  if (static_cast<int>(spec.succ.size()) != M)
    throw ModelError("aggregate graph: successor table does not match mode count");

  AggregateGraph G;
  G.group_id = group_id;
  G.mode_count = M;
  G.cell_count = K;
  G.lockout = g.lockout;
  G.mode_offset.assign(static_cast<size_t>(M) + 1, 0);
  for (int m = 0; m < M; ++m)
    G.mode_offset[static_cast<size_t>(m + 1)] =
        G.mode_offset[static_cast<size_t>(m)] +
        (g.lockout[static_cast<size_t>(m)] + 1) * K;
  G.state_dim = G.mode_offset.back();
  G.input_dim = K * M * (M - 1);

  auto succ = [&](int m, int k) { return spec.succ[static_cast<size_t>(m)][static_cast<size_t>(k)]; };

  for (int m = 0; m < M; ++m) {
    int bar = g.lockout[static_cast<size_t>(m)];
    for (int k = 0; k < K; ++k)  // rule 1: unlocked stays unlocked
      G.edges.push_back({NodeId{m, 0, k}, NodeId{m, 0, succ(m, k)}, 1});
    for (int tau = 1; tau < bar; ++tau)  // rule 2: climb the lockout ladder
      for (int k = 0; k < K; ++k)
        G.edges.push_back({NodeId{m, tau, k}, NodeId{m, tau + 1, succ(m, k)}, 2});
    if (bar > 0)  // rule 3: last locked layer releases
      for (int k = 0; k < K; ++k)
        G.edges.push_back({NodeId{m, bar, k}, NodeId{m, 0, succ(m, k)}, 3});
  }
  for (int m1 = 0; m1 < M; ++m1)  // rule 4: controlled switches from tau = 0
    for (int m2 = 0; m2 < M; ++m2) {
      if (m2 == m1) continue;
      int arrive = std::min(1, g.lockout[static_cast<size_t>(m2)]);
      for (int k = 0; k < K; ++k)
        G.edges.push_back({NodeId{m1, 0, k}, NodeId{m2, arrive, succ(m2, k)}, 4});
    }

  G.node_safe.assign(static_cast<size_t>(G.state_dim), 0);
  for (int idx = 0; idx < G.state_dim; ++idx)
    G.node_safe[static_cast<size_t>(idx)] =
        spec.is_safe(G.node_at(idx).cell) ? 1 : 0;

  G.preds.assign(static_cast<size_t>(G.state_dim), {});
  for (size_t e = 0; e < G.edges.size(); ++e) {
    const AggEdge& edge = G.edges[e];
    int to = G.node_index(edge.to.mode, edge.to.tau, edge.to.cell);
    G.preds[static_cast<size_t>(to)].push_back(static_cast<int>(e));
  }
  return G;
}

AggMatrices build_matrices(const AggregateGraph& G) {
  AggMatrices M;
  M.autonomous.rows = G.state_dim;
  M.autonomous.cols = G.state_dim;
  M.switch_in.rows = G.state_dim;
  M.switch_in.cols = G.input_dim;
  M.switch_out.rows = G.state_dim;
  M.switch_out.cols = G.input_dim;

  for (const AggEdge& e : G.edges) {
    int to = G.node_index(e.to.mode, e.to.tau, e.to.cell);
    if (e.rule == 4) {
      int col = G.input_index(e.from.mode, e.to.mode, e.from.cell);
      M.switch_in.add(to, col, 1.0);
    } else {
      int from = G.node_index(e.from.mode, e.from.tau, e.from.cell);
      M.autonomous.add(to, from, 1.0);
    }
  }
  // Switchers leave the rule-1 flow: remove them from the unlocked row their
  // stay-edge would have delivered them to.  Recover each mode's successor map
  // from the rule-1 edges.
  std::vector<std::vector<int>> succ(static_cast<size_t>(G.mode_count),
                                     std::vector<int>(static_cast<size_t>(G.cell_count), -1));
  for (const AggEdge& e : G.edges)
    if (e.rule == 1) succ[static_cast<size_t>(e.from.mode)][static_cast<size_t>(e.from.cell)] = e.to.cell;
  for (int col = 0; col < G.input_dim; ++col) {
    AggregateGraph::InputId id = G.input_at(col);
    int dest = succ[static_cast<size_t>(id.from_mode)][static_cast<size_t>(id.cell)];
    M.switch_out.add(G.node_index(id.from_mode, 0, dest), col, 1.0);
  }
  return M;
}

std::string input_violation(const AggregateGraph& G, const std::vector<long long>& x,
                            const std::vector<long long>& u) {
  if (static_cast<int>(x.size()) != G.state_dim) return "state dimension mismatch";
  if (static_cast<int>(u.size()) != G.input_dim) return "input dimension mismatch";
  std::ostringstream msg;
  for (size_t i = 0; i < x.size(); ++i)
    if (x[i] < 0) {
      msg << "negative count at state index " << i;
      return msg.str();
    }
  for (size_t i = 0; i < u.size(); ++i)
    if (u[i] < 0) {
      msg << "negative switch count at input index " << i;
      return msg.str();
    }
  for (int m1 = 0; m1 < G.mode_count; ++m1)
    for (int k = 0; k < G.cell_count; ++k) {
      long long total = 0;
      for (int m2 = 0; m2 < G.mode_count; ++m2) {
        if (m2 == m1) continue;
        total += u[static_cast<size_t>(G.input_index(m1, m2, k))];
      }
      long long avail = x[static_cast<size_t>(G.node_index(m1, 0, k))];
      if (total > avail) {
        msg << "switching " << total << " subsystems out of mode " << m1 << " cell "
            << k << " but only " << avail << " are unlocked there";
        return msg.str();
      }
    }
  return "";
}

std::vector<long long> step_aggregate(const AggMatrices& M, const AggregateGraph& G,
                                      const std::vector<long long>& x,
                                      const std::vector<long long>& u) {
  std::string breach = input_violation(G, x, u);
  if (!breach.empty()) throw ModelError("aggregate step: " + breach);
  std::vector<long long> next = M.autonomous.apply(x);
  std::vector<long long> in = M.switch_in.apply(u);
  std::vector<long long> out = M.switch_out.apply(u);
  for (size_t i = 0; i < next.size(); ++i) next[i] += in[i] - out[i];
  return next;
}

void SafeSetSpec::validate() const {
  if (power_lo.size() != power_hi.size())
    throw ModelError("safe set: per-mode bound vectors differ in length");
  for (size_t m = 0; m < power_lo.size(); ++m)
    if (power_lo[m] > power_hi[m])
      throw ModelError("safe set: lower power bound exceeds upper bound");
  for (const auto& w : weight)
    if (w.size() != power_lo.size())
      throw ModelError("safe set: weight vector does not match mode count");
}

SafetyResult is_safe_state(const std::vector<const AggregateGraph*>& graphs,
                           const std::vector<std::vector<long long>>& xs,
                           const SafeSetSpec& s) {
  s.validate();
  if (graphs.size() != xs.size() || graphs.size() != s.weight.size())
    throw ModelError("safe set: group count mismatch");
  SafetyResult res;
  res.mode_power.assign(s.power_lo.size(), 0.0);
  for (size_t i = 0; i < graphs.size(); ++i) {
    const AggregateGraph& G = *graphs[i];
    const std::vector<long long>& x = xs[i];
    if (static_cast<int>(x.size()) != G.state_dim)
      throw ModelError("safe set: state dimension mismatch");
    for (int idx = 0; idx < G.state_dim; ++idx) {
      long long n = x[static_cast<size_t>(idx)];
      if (n == 0) continue;
      NodeId node = G.node_at(idx);
      res.mode_power[static_cast<size_t>(node.mode)] +=
          s.weight[i][static_cast<size_t>(node.mode)] * static_cast<double>(n);
      if (!G.node_safe[static_cast<size_t>(idx)]) {
        std::ostringstream what;
        what << n << " subsystem(s) of group " << G.group_id
             << " on unsafe node (mode " << node.mode << ", lockout " << node.tau
             << ", cell " << node.cell << ")";
        res.violations.push_back(SafetyViolation{
            static_cast<int>(i), node.mode, node.tau, node.cell, what.str()});
      }
    }
  }
  for (size_t m = 0; m < res.mode_power.size(); ++m) {
    double p = res.mode_power[m];
    if (p < s.power_lo[m] - 1e-9 || p > s.power_hi[m] + 1e-9) {
      std::ostringstream what;
      what << "mode " << m << " draws " << p << " kW outside ["
           << s.power_lo[m] << ", " << s.power_hi[m] << "]";
      SafetyViolation v;
      v.mode = static_cast<int>(m);
      v.what = what.str();
      res.violations.push_back(v);
    }
  }
  res.safe = res.violations.empty();
  return res;
}

void write_edge_list(const AggregateGraph& G, std::ostream& os) {
  for (const AggEdge& e : G.edges)
    os << '(' << e.from.mode << ',' << e.from.tau << ',' << e.from.cell << ") -> ("
       << e.to.mode << ',' << e.to.tau << ',' << e.to.cell << ")\n";
}

}  // namespace tclcoord
