#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "bnls/errors.hpp"

namespace bnls {

// A discrete chance node. The CPT has one row per joint parent configuration
// (mixed-radix order, first-listed parent most significant) and one column
// per outcome.
struct Node {
  std::string id;
  std::vector<std::string> outcomes;
  std::vector<std::string> parents;
  std::vector<std::vector<double>> cpt;
};

struct ParseOptions {
  double row_sum_tol = 1e-9;
  bool renormalize_rows = false;  // divide each row by its sum on load
};

// Immutable belief network: nodes in declaration order, edges implied by
// parent lists. Validated on construction; shareable across threads.
class Network {
 public:
  explicit Network(std::vector<Node> nodes, const ParseOptions& opts = {})
      : nodes_(std::move(nodes)) {
    validate(opts);
    build_topo_order();
  }

  static Network parse(const std::string& text, const ParseOptions& opts = {});
  std::string serialize() const;

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

  int index_of(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? -1 : it->second;
  }

  int outcome_index(int node, const std::string& label) const {
    const auto& outs = nodes_[node].outcomes;
    auto it = std::find(outs.begin(), outs.end(), label);
    return it == outs.end() ? -1 : int(it - outs.begin());
  }

  const std::vector<int>& parent_indices(int node) const {
    return parent_idx_[node];
  }

  // node indices, every node after all of its parents, declaration-order
  // tie break
  const std::vector<int>& topo_order() const { return topo_; }

  // CPT row for a node given the outcome index of every node in the network
  int cpt_row(int node, const std::vector<int>& outcome_by_node) const {
    int row = 0;
    for (int p : parent_idx_[node]) {
      row = row * int(nodes_[p].outcomes.size()) + outcome_by_node[p];
    }
    return row;
  }

  // total joint-state count, saturated at 2^63-1
  std::uint64_t joint_state_count() const {
    std::uint64_t total = 1;
    for (const auto& n : nodes_) {
      std::uint64_t c = n.outcomes.size();
      if (total > UINT64_MAX / c) return UINT64_MAX;
      total *= c;
    }
    return total;
  }

 private:
  void validate(const ParseOptions& opts);
  void build_topo_order();

  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::vector<int>> parent_idx_;
  std::vector<int> topo_;
};

// Observed outcomes for a subset of nodes (the findings).
struct Evidence {
  std::map<std::string, std::string> findings;

  static Evidence parse(const std::string& text) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("evidence: ") + e.what());
    }
    Evidence ev;
    if (!j.contains("findings") || !j["findings"].is_object())
      throw ParseError("evidence: missing \"findings\" object");
    for (auto& [k, v] : j["findings"].items()) {
      if (!v.is_string()) throw ParseError("evidence: outcome for '" + k + "' must be a string");
      ev.findings[k] = v.get<std::string>();
    }
    return ev;
  }

  std::string serialize() const {
    nlohmann::json j;
    j["findings"] = nlohmann::json::object();
    for (const auto& [k, v] : findings) j["findings"][k] = v;
    return j.dump();
  }

  // resolve to (node index, outcome index) pairs, validating references
  std::vector<std::pair<int, int>> compile(const Network& net) const {
    std::vector<std::pair<int, int>> out;
    out.reserve(findings.size());
    for (const auto& [id, label] : findings) {
      int n = net.index_of(id);
      if (n < 0) throw ValidationError("evidence refers to unknown node '" + id + "'");
      int o = net.outcome_index(n, label);
      if (o < 0)
        throw ValidationError("evidence: node '" + id + "' has no outcome '" + label + "'");
      out.emplace_back(n, o);
    }
    return out;
  }
};

struct ExactResult {
  double evidence_prob = 0.0;
  bool posteriors_defined = false;
  // per node (declaration order), distribution over outcomes
  std::vector<std::vector<double>> posteriors;
};

inline std::vector<std::string> topological_order(const Network& net) {
  std::vector<std::string> ids;
  ids.reserve(net.size());
  for (int i : net.topo_order()) ids.push_back(net.nodes()[i].id);
  return ids;
}

// Brute-force joint enumeration. evidence_prob = P(F); posteriors are exact
// conditionals, flagged undefined when P(F) = 0. Summation runs in fixed
// mixed-radix order so results are bit-identical across runs. Desk-scale
// only: throws when the joint state count exceeds state_cap.
inline ExactResult exact_query(const Network& net, const Evidence& ev,
                               std::uint64_t state_cap = std::uint64_t(1) << 24) {
  const std::uint64_t total = net.joint_state_count();
  if (total > state_cap)
    throw StateCapError("joint state space (" + std::to_string(total) +
                        " states) exceeds cap " + std::to_string(state_cap) +
                        "; the enumeration oracle is desk-scale only");

  const auto findings = ev.compile(net);
  const int n = int(net.size());
  std::vector<int> state(n, 0);
  ExactResult res;
  res.posteriors.resize(n);
  for (int i = 0; i < n; ++i) res.posteriors[i].assign(net.nodes()[i].outcomes.size(), 0.0);

  for (std::uint64_t s = 0; s < total; ++s) {
    double prob = 1.0;
    for (int i = 0; i < n; ++i)
      prob *= net.nodes()[i].cpt[net.cpt_row(i, state)][state[i]];
    bool consistent = true;
    for (const auto& [fn, fo] : findings)
      if (state[fn] != fo) { consistent = false; break; }
    if (consistent) {
      res.evidence_prob += prob;
      for (int i = 0; i < n; ++i) res.posteriors[i][state[i]] += prob;
    }
    // advance mixed-radix counter, last node least significant
    for (int i = n - 1; i >= 0; --i) {
      if (++state[i] < int(net.nodes()[i].outcomes.size())) break;
      state[i] = 0;
    }
  }

  if (res.evidence_prob > 0.0) {
    res.posteriors_defined = true;
    for (auto& dist : res.posteriors)
      for (double& v : dist) v /= res.evidence_prob;
  } else {
    res.posteriors.clear();
  }
  return res;
}

// p' = prod over finding nodes of the CPT column minimum for the observed
// outcome; a lower bound on P(F)
inline double evidence_prob_lower(const Network& net, const Evidence& ev) {
  double p = 1.0;
  for (const auto& [node, outcome] : ev.compile(net)) {
    double m = 1.0;
    for (const auto& row : net.nodes()[node].cpt) m = std::min(m, row[outcome]);
    p *= m;
  }
  return p;
}

// p* = same with column maxima; an upper bound on P(F)
inline double evidence_prob_upper(const Network& net, const Evidence& ev) {
  double p = 1.0;
  for (const auto& [node, outcome] : ev.compile(net)) {
    double m = 0.0;
    for (const auto& row : net.nodes()[node].cpt) m = std::max(m, row[outcome]);
    p *= m;
  }
  return p;
}

inline void Network::validate(const ParseOptions& opts) {
  index_.clear();
  for (int i = 0; i < int(nodes_.size()); ++i) {
    if (!index_.emplace(nodes_[i].id, i).second)
      throw ValidationError("duplicate node id '" + nodes_[i].id + "'");
  }
  parent_idx_.assign(nodes_.size(), {});
  for (int i = 0; i < int(nodes_.size()); ++i) {
    Node& nd = nodes_[i];
    if (nd.outcomes.size() < 2)
      throw ValidationError("node '" + nd.id + "' needs at least 2 outcomes");
    for (std::size_t a = 0; a < nd.outcomes.size(); ++a)
      for (std::size_t b = a + 1; b < nd.outcomes.size(); ++b)
        if (nd.outcomes[a] == nd.outcomes[b])
          throw ValidationError("node '" + nd.id + "' has duplicate outcome '" +
                                nd.outcomes[a] + "'");
    std::size_t rows = 1;
    for (const auto& pid : nd.parents) {
      auto it = index_.find(pid);
      if (it == index_.end())
        throw ValidationError("node '" + nd.id + "' has dangling parent '" + pid + "'");
      parent_idx_[i].push_back(it->second);
      rows *= nodes_[it->second].outcomes.size();
    }
    if (nd.cpt.size() != rows)
      throw ValidationError("node '" + nd.id + "': CPT has " +
                            std::to_string(nd.cpt.size()) + " rows, expected " +
                            std::to_string(rows));
    for (auto& row : nd.cpt) {
      if (row.size() != nd.outcomes.size())
        throw ValidationError("node '" + nd.id + "': CPT row width mismatch");
      double sum = 0.0;
      for (double v : row) {
        if (!(v >= 0.0 && v <= 1.0))
          throw ValidationError("node '" + nd.id + "': CPT entry " +
                                std::to_string(v) + " outside [0,1]");
        sum += v;
      }
      if (std::abs(sum - 1.0) > opts.row_sum_tol) {
        if (opts.renormalize_rows && sum > 0.0) {
          for (double& v : row) v /= sum;
        } else {
          throw ValidationError("node '" + nd.id + "': row sum " + std::to_string(sum));
        }
      }
    }
  }
}

inline void Network::build_topo_order() {
  const int n = int(nodes_.size());
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> children(n);
  for (int i = 0; i < n; ++i)
    for (int p : parent_idx_[i]) {
      if (p == i) throw ValidationError("cycle detected: " + nodes_[i].id);
      children[p].push_back(i);
      ++indeg[i];
    }
  topo_.clear();
  // Kahn's algorithm; always take the lowest declaration index among ready
  // nodes so ties break deterministically
  std::vector<bool> done(n, false);
  for (int step = 0; step < n; ++step) {
    int pick = -1;
    for (int i = 0; i < n; ++i)
      if (!done[i] && indeg[i] == 0) { pick = i; break; }
    if (pick < 0) break;
    done[pick] = true;
    topo_.push_back(pick);
    for (int c : children[pick]) --indeg[c];
  }
  if (int(topo_.size()) == n) return;

  // report one cycle: walk parent edges among the unresolved nodes
  std::vector<int> seen_at(n, -1);
  int cur = 0;
  while (done[cur]) ++cur;
  std::vector<int> walk;
  while (seen_at[cur] < 0) {
    seen_at[cur] = int(walk.size());
    walk.push_back(cur);
    for (int p : parent_idx_[cur])
      if (!done[p]) { cur = p; break; }
  }
  std::string msg = "cycle detected:";
  for (std::size_t i = seen_at[cur]; i < walk.size(); ++i)
    msg += " " + nodes_[walk[i]].id;
  throw ValidationError(msg);
}

inline Network Network::parse(const std::string& text, const ParseOptions& opts) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("network: ") + e.what());
  }
  if (!j.is_object() || !j.contains("nodes") || !j["nodes"].is_array())
    throw ParseError("network: expected an object with a \"nodes\" array");
  if (j.value("version", 1) != 1) throw ParseError("network: unsupported version");
  std::vector<Node> nodes;
  for (const auto& nj : j["nodes"]) {
    Node nd;
    try {
      nd.id = nj.at("id").get<std::string>();
      nd.outcomes = nj.at("outcomes").get<std::vector<std::string>>();
      if (nj.contains("parents"))
        nd.parents = nj.at("parents").get<std::vector<std::string>>();
      nd.cpt = nj.at("cpt").get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("network node '" + nj.value("id", std::string("?")) +
                       "': " + e.what());
    }
    nodes.push_back(std::move(nd));
  }
  return Network(std::move(nodes), opts);
}

inline std::string Network::serialize() const {
  nlohmann::json j;
  j["version"] = 1;
  j["nodes"] = nlohmann::json::array();
  for (const auto& nd : nodes_) {
    nlohmann::json nj;
    nj["id"] = nd.id;
    nj["outcomes"] = nd.outcomes;
    nj["parents"] = nd.parents;
    nj["cpt"] = nd.cpt;
    j["nodes"].push_back(std::move(nj));
  }
  return j.dump();
}

}  // namespace bnls
