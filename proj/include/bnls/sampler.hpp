#pragma once

#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bnls/model.hpp"
#include "bnls/planner.hpp"

namespace bnls {

namespace detail {
// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}
}  // namespace detail

// Counter-based uniform stream: one variate per (seed, trial, node position),
// so any execution order reproduces the same trials bit-for-bit.
struct SeedSpec {
  std::uint64_t seed = 0;

  static constexpr const char* kStreamId = "splitmix64-counter-v1";

  double uniform(std::uint64_t trial, std::uint64_t node_position) const {
    std::uint64_t x = detail::mix64(seed ^ detail::mix64(trial));
    x = detail::mix64(x ^ node_position);
    return double(x >> 11) * 0x1.0p-53;
  }

  // independent substream for replication r
  SeedSpec derive(std::uint64_t r) const {
    return SeedSpec{detail::mix64(seed ^ detail::mix64(~r))};
  }
};

struct ReplanRecord {
  std::int64_t trials_run = 0;
  std::int64_t successes = 0;
  std::int64_t additional = 0;
};

struct SamplingResult {
  std::int64_t n_total = 0;
  std::int64_t k_success = 0;
  // per node (declaration order), per outcome, counts over successful trials
  std::vector<std::vector<std::int64_t>> tallies;
  bool estimates_defined = false;
  std::vector<std::vector<double>> estimates;  // tallies / K when K > 0
  std::vector<ReplanRecord> plan_history;
  bool guarantee_met_a_priori = false;
  bool heuristic = false;
  std::uint64_t seed = 0;
  std::string mode = "fixed";

  nlohmann::json to_json(const Network& net) const {
    nlohmann::json j;
    j["metadata"] = {{"seed", seed}, {"stream", SeedSpec::kStreamId}, {"mode", mode}};
    j["n_total"] = n_total;
    j["k_success"] = k_success;
    j["tallies"] = nlohmann::json::object();
    j["estimates"] = nlohmann::json::object();
    for (std::size_t i = 0; i < net.size(); ++i) {
      const auto& nd = net.nodes()[i];
      nlohmann::json t = nlohmann::json::object();
      nlohmann::json e = nlohmann::json::object();
      for (std::size_t o = 0; o < nd.outcomes.size(); ++o) {
        t[nd.outcomes[o]] = tallies[i][o];
        if (estimates_defined) e[nd.outcomes[o]] = estimates[i][o];
      }
      j["tallies"][nd.id] = std::move(t);
      if (estimates_defined) j["estimates"][nd.id] = std::move(e);
    }
    j["plan_history"] = nlohmann::json::array();
    for (const auto& r : plan_history)
      j["plan_history"].push_back(
          {{"trials_run", r.trials_run}, {"successes", r.successes}, {"additional", r.additional}});
    j["flags"] = {{"estimates_defined", estimates_defined},
                  {"guarantee_met_a_priori", guarantee_met_a_priori},
                  {"heuristic", heuristic}};
    return j;
  }
};

// One logic-sampling trial: visit nodes in topological order, pick each
// node's CPT row from its already-sampled parents, and draw the outcome by
// inverse CDF with the trial's counter-indexed uniform.
inline std::vector<int> simulate_trial(const Network& net, const SeedSpec& seed,
                                       std::int64_t trial_index) {
  std::vector<int> outcome(net.size(), -1);
  std::uint64_t pos = 0;
  for (int node : net.topo_order()) {
    const auto& row = net.nodes()[node].cpt[net.cpt_row(node, outcome)];
    const double u = seed.uniform(std::uint64_t(trial_index), pos++);
    double cum = 0.0;
    int pick = int(row.size()) - 1;  // rounding guard
    for (int o = 0; o < int(row.size()); ++o) {
      cum += row[o];
      if (u < cum) { pick = o; break; }
    }
    outcome[node] = pick;
  }
  return outcome;
}

inline bool is_successful(const std::vector<int>& sample,
                          const std::vector<std::pair<int, int>>& findings) {
  for (const auto& [node, outcome] : findings)
    if (sample[node] != outcome) return false;
  return true;
}

inline bool is_successful(const Network& net, const std::vector<int>& sample,
                          const Evidence& ev) {
  return is_successful(sample, ev.compile(net));
}

namespace detail {

struct Tally {
  std::int64_t k = 0;
  std::vector<std::vector<std::int64_t>> counts;

  explicit Tally(const Network& net) {
    counts.resize(net.size());
    for (std::size_t i = 0; i < net.size(); ++i)
      counts[i].assign(net.nodes()[i].outcomes.size(), 0);
  }
  void add(const Tally& other) {
    k += other.k;
    for (std::size_t i = 0; i < counts.size(); ++i)
      for (std::size_t o = 0; o < counts[i].size(); ++o)
        counts[i][o] += other.counts[i][o];
  }
};

inline void run_range(const Network& net, const std::vector<std::pair<int, int>>& findings,
                      const SeedSpec& seed, std::int64_t first, std::int64_t count,
                      Tally& tally) {
  for (std::int64_t t = first; t < first + count; ++t) {
    const auto sample = simulate_trial(net, seed, t);
    if (!is_successful(sample, findings)) continue;
    ++tally.k;
    for (std::size_t i = 0; i < sample.size(); ++i) ++tally.counts[i][sample[i]];
  }
}

// Trials are independent given the counter stream, so chunking across
// threads and summing integer tallies reproduces the serial result exactly.
inline Tally run_parallel(const Network& net, const std::vector<std::pair<int, int>>& findings,
                          const SeedSpec& seed, std::int64_t first, std::int64_t count,
                          int n_threads) {
  Tally total(net);
  if (n_threads <= 1 || count < 2048) {
    run_range(net, findings, seed, first, count, total);
    return total;
  }
  const int T = n_threads;
  std::vector<Tally> parts(T, Tally(net));
  std::vector<std::thread> workers;
  const std::int64_t chunk = (count + T - 1) / T;
  for (int w = 0; w < T; ++w) {
    const std::int64_t lo = first + w * chunk;
    const std::int64_t n = std::max<std::int64_t>(0, std::min(chunk, first + count - lo));
    workers.emplace_back([&, w, lo, n] { run_range(net, findings, seed, lo, n, parts[w]); });
  }
  for (auto& w : workers) w.join();
  for (const auto& p : parts) total.add(p);
  return total;
}

inline void finalize(const Network& net, const Tally& tally, SamplingResult& res) {
  res.k_success = tally.k;
  res.tallies = tally.counts;
  if (tally.k > 0) {
    res.estimates_defined = true;
    res.estimates.resize(net.size());
    for (std::size_t i = 0; i < net.size(); ++i) {
      res.estimates[i].resize(tally.counts[i].size());
      for (std::size_t o = 0; o < tally.counts[i].size(); ++o)
        res.estimates[i][o] = double(tally.counts[i][o]) / double(tally.k);
    }
  }
}

}  // namespace detail

// Fixed-count run: exactly n_trials trials, tallies over successful trials
// only. K = 0 yields flagged-undefined estimates, not an error.
inline SamplingResult run(const Network& net, const Evidence& ev, std::int64_t n_trials,
                          const SeedSpec& seed, int n_threads = 1) {
  if (n_trials < 0) throw PlanError("run: n_trials must be >= 0");
  const auto findings = ev.compile(net);
  SamplingResult res;
  res.seed = seed.seed;
  res.n_total = n_trials;
  detail::finalize(net, detail::run_parallel(net, findings, seed, 0, n_trials, n_threads), res);
  return res;
}

// Adaptive loop: plan on p_bound (p' in conservative mode), run in batches,
// and re-plan after each batch on the successes seen so far. Conservative
// mode only ever shrinks the remaining budget, so the a-priori guarantee of
// the initial plan is preserved; empirical mode is heuristic.
inline SamplingResult run_adaptive(const Network& net, const Evidence& ev,
                                   const ConvergencePlan& plan, const SeedSpec& seed,
                                   ReplanMode mode = ReplanMode::conservative,
                                   std::int64_t batch = 0, int n_threads = 1) {
  const auto findings = ev.compile(net);
  const double p_lo = evidence_prob_lower(net, ev);
  if (mode == ReplanMode::conservative && !(p_lo > 0.0))
    throw PlanError("p' = 0: cannot certify a trial count for zero-probability findings");
  const std::int64_t N = plan.n_successes_required;
  if (batch < 1) batch = std::max<std::int64_t>(64, N / 100);

  SamplingResult res;
  res.seed = seed.seed;
  res.mode = mode == ReplanMode::conservative ? "conservative" : "empirical";
  detail::Tally tally(net);
  std::int64_t m = 0;
  std::int64_t budget = -1;
  while (true) {
    const auto rp = replan(plan, p_lo, tally.k, m, mode);
    res.heuristic = res.heuristic || rp.heuristic;
    budget = (budget < 0 || mode == ReplanMode::empirical)
                 ? rp.additional
                 : std::min(budget, rp.additional);
    res.plan_history.push_back({m, tally.k, rp.additional});
    if (tally.k > N || budget <= 0) break;
    const std::int64_t t = std::min(batch, budget);
    tally.add(detail::run_parallel(net, findings, seed, m, t, n_threads));
    m += t;
    budget -= t;
  }
  res.n_total = m;
  res.guarantee_met_a_priori = mode == ReplanMode::conservative;
  detail::finalize(net, tally, res);
  return res;
}

}  // namespace bnls
