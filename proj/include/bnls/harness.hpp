#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "bnls/model.hpp"
#include "bnls/planner.hpp"
#include "bnls/sampler.hpp"

namespace bnls {

struct SweepRow {
  double sigma = 0.0;
  std::int64_t N = 0;
  double p = 0.0;
  std::int64_t g_lower = -1;  // -1 when infeasible
  std::int64_t g_upper = -1;
  bool feasible = false;
};

struct SweepTable {
  std::vector<SweepRow> rows;  // sorted by (sigma, N, p)

  std::string to_csv() const {
    std::string out = "sigma,N,p,g_lower,g_upper,feasible\n";
    char buf[160];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%.12g,%lld,%.12g,%lld,%lld,%d\n", r.sigma,
                    (long long)r.N, r.p, (long long)r.g_lower, (long long)r.g_upper,
                    r.feasible ? 1 : 0);
      out += buf;
    }
    return out;
  }
};

// default p grid from the planning figures: log-spaced over [1e-4, 1]
inline std::vector<double> default_p_grid(int points = 25, double lo = 1e-4, double hi = 1.0) {
  std::vector<double> g;
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : double(i) / double(points - 1);
    g.push_back(std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))));
  }
  g.back() = hi;
  return g;
}

// Evaluate g_upper and g_lower over the full (sigma, N, p) cross product.
// Cells whose sigma exceeds sigma_cap(p, N) are kept and marked infeasible.
inline SweepTable sweep(std::vector<double> p_grid, std::vector<std::int64_t> N_list,
                        std::vector<double> sigmas) {
  std::sort(p_grid.begin(), p_grid.end());
  std::sort(N_list.begin(), N_list.end());
  std::sort(sigmas.begin(), sigmas.end());
  SweepTable table;
  for (double sigma : sigmas)
    for (std::int64_t N : N_list)
      for (double p : p_grid) {
        SweepRow row{sigma, N, p, -1, -1, false};
        if (p >= 1.0 || sigma <= sigma_cap(p, N)) {
          row.feasible = true;
          row.g_upper = g_upper(sigma, p, N);
          row.g_lower = g_lower(sigma, p, N);
        }
        table.rows.push_back(row);
      }
  return table;
}

struct CoverageReport {
  std::int64_t replications = 0;
  double alpha = 0.0;
  double omega = 0.0;
  double sigma = 0.0;
  std::int64_t trials_per_run = 0;
  std::vector<std::string> node_ids;
  std::vector<double> per_node_coverage;  // fraction of runs with |Y - mu| <= alpha
  double all_node_coverage = 0.0;
  double success_count_coverage = 0.0;  // fraction of runs with K > N
  bool pass = false;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["replications"] = replications;
    j["alpha"] = alpha;
    j["omega"] = omega;
    j["sigma"] = sigma;
    j["trials_per_run"] = trials_per_run;
    j["per_node_coverage"] = nlohmann::json::object();
    for (std::size_t i = 0; i < node_ids.size(); ++i)
      j["per_node_coverage"][node_ids[i]] = per_node_coverage[i];
    j["all_node_coverage"] = all_node_coverage;
    j["success_count_coverage"] = success_count_coverage;
    j["pass"] = pass;
    return j;
  }
};

// Run the full protocol R times against the enumeration oracle and measure
// how often every posterior lands within alpha. Pass needs per-node coverage
// >= omega minus a 3-sigma binomial slack, and K > N coverage >= sigma minus
// the same slack.
inline CoverageReport verify_guarantee(const Network& net, const Evidence& ev,
                                       const ConvergencePlan& plan, std::int64_t R,
                                       const SeedSpec& seed, int n_threads = 1) {
  const auto oracle = exact_query(net, ev);
  if (!oracle.posteriors_defined)
    throw PlanError("zero-probability evidence: nothing to verify against");
  const double p_lo = evidence_prob_lower(net, ev);
  const std::int64_t n = g_upper(plan.sigma, p_lo, plan.n_successes_required);

  CoverageReport rep;
  rep.replications = R;
  rep.alpha = plan.alpha;
  rep.omega = plan.omega;
  rep.sigma = plan.sigma;
  rep.trials_per_run = n;
  for (const auto& nd : net.nodes()) rep.node_ids.push_back(nd.id);
  std::vector<std::int64_t> node_hits(net.size(), 0);
  std::int64_t all_hits = 0, k_hits = 0;

  for (std::int64_t r = 0; r < R; ++r) {
    const auto res = run(net, ev, n, seed.derive(std::uint64_t(r)), n_threads);
    if (res.k_success > plan.n_successes_required) ++k_hits;
    if (!res.estimates_defined) continue;
    bool all_ok = true;
    for (std::size_t i = 0; i < net.size(); ++i) {
      double err = 0.0;
      for (std::size_t o = 0; o < res.estimates[i].size(); ++o)
        err = std::max(err, std::abs(res.estimates[i][o] - oracle.posteriors[i][o]));
      if (err <= plan.alpha) ++node_hits[i]; else all_ok = false;
    }
    if (all_ok) ++all_hits;
  }

  rep.per_node_coverage.resize(net.size());
  for (std::size_t i = 0; i < net.size(); ++i)
    rep.per_node_coverage[i] = double(node_hits[i]) / double(R);
  rep.all_node_coverage = double(all_hits) / double(R);
  rep.success_count_coverage = double(k_hits) / double(R);

  const auto slack = [&](double t) { return 3.0 * std::sqrt(t * (1.0 - t) / double(R)); };
  rep.pass = rep.success_count_coverage >= plan.sigma - slack(plan.sigma);
  for (double c : rep.per_node_coverage)
    if (c < rep.omega - slack(rep.omega)) rep.pass = false;
  return rep;
}

struct ApproxErrorSummary {
  double max_fhat_err_scaled = 0.0;  // max |f_hat - f| * sqrt(npq), bound 0.14
  double max_fprime_vs_fhat = 0.0;   // max |f_prime - f_hat|, bound 5e-4
};

// Scan |f_hat - f| and |f_prime - f_hat| over a grid; N per (n) comes from
// the fractions in N_fracs (rounded), clipped to [0, n].
inline ApproxErrorSummary approx_error_scan(const std::vector<std::int64_t>& n_grid,
                                            const std::vector<double>& p_grid,
                                            const std::vector<double>& N_fracs = {0.0, 0.25, 0.5,
                                                                                  0.75, 1.0}) {
  ApproxErrorSummary s;
  for (std::int64_t n : n_grid)
    for (double p : p_grid)
      for (double frac : N_fracs) {
        const std::int64_t N = std::clamp<std::int64_t>(std::llround(frac * double(n)), 0, n);
        const double f = binom_tail(n, p, N);
        const double fh = f_hat(n, p, N);
        const double fp = f_prime(n, p, N);
        const double scale = std::sqrt(double(n) * p * (1.0 - p));
        s.max_fhat_err_scaled = std::max(s.max_fhat_err_scaled, std::abs(fh - f) * scale);
        s.max_fprime_vs_fhat = std::max(s.max_fprime_vs_fhat, std::abs(fp - fh));
      }
  return s;
}

}  // namespace bnls
