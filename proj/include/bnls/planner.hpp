#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <json.hpp>

#include "bnls/errors.hpp"

namespace bnls {

// certified slack of the normal approximation to the binomial CDF,
// scaled by sqrt(npq)
inline constexpr double kBinomApproxConst = 0.14;
// combined interval error of two polynomial-CDF evaluations (2 x 2.5e-4)
inline constexpr double kPolyCdfPairSlack = 5.0e-4;

// Per-estimate convergence request: with at least n_successes_required
// successful trials, every posterior estimate lands within alpha of truth
// with probability >= delta (Chebyshev); sigma is the confidence that the
// success count is reached, omega = delta*sigma the delivered confidence.
struct ConvergencePlan {
  double alpha = 0.0;
  double delta = 0.0;
  double sigma = 0.0;
  double omega = 0.0;
  std::int64_t n_successes_required = 0;

  static ConvergencePlan make(double alpha, double delta, double sigma);
};

inline std::int64_t required_successes(double alpha, double delta) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw PlanError("alpha must be in (0,1)");
  if (!(delta > 0.0 && delta < 1.0))
    throw PlanError("delta must be in (0,1); the bound diverges at delta = 1");
  const double rhs = 1.0 / (4.0 * (1.0 - delta) * alpha * alpha);
  // ceiling, snapping values that are integers up to rounding noise
  const double nearest = std::round(rhs);
  if (std::abs(rhs - nearest) <= 1e-9 * std::max(1.0, rhs))
    return std::int64_t(nearest);
  return std::int64_t(std::ceil(rhs));
}

inline ConvergencePlan ConvergencePlan::make(double alpha, double delta, double sigma) {
  if (!(sigma > 0.0 && sigma < 1.0)) throw PlanError("sigma must be in (0,1)");
  ConvergencePlan p;
  p.alpha = alpha;
  p.delta = delta;
  p.sigma = sigma;
  p.omega = delta * sigma;
  p.n_successes_required = required_successes(alpha, delta);
  return p;
}

// Exact binomial CDF f(n,p,N) = sum_{i<=N} C(n,i) p^i q^{n-i}, evaluated by
// a log-space term recurrence with streaming log-sum-exp. Intended for
// test-scale n (<= ~1e5).
inline double binom_tail(std::int64_t n, double p, std::int64_t N) {
  if (!(p > 0.0 && p < 1.0)) throw PlanError("binom_tail: p must be in (0,1)");
  if (n < 0) throw PlanError("binom_tail: n must be nonnegative");
  if (N < 0) return 0.0;
  if (N >= n) return 1.0;
  const double q = 1.0 - p;
  const double log_ratio = std::log(p) - std::log(q);
  double log_term = double(n) * std::log(q);  // i = 0
  double lse = log_term;
  for (std::int64_t i = 0; i < N; ++i) {
    log_term += std::log(double(n - i) / double(i + 1)) + log_ratio;
    const double hi = std::max(lse, log_term);
    lse = hi + std::log1p(std::exp(std::min(lse, log_term) - hi));
  }
  return std::min(1.0, std::exp(lse));
}

// standard normal CDF via the complementary error function; absolute error
// well below 1e-10
inline double normal_cdf_ref(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Four-coefficient polynomial CDF approximation (Patel & Read family),
// interval error <= 2.5e-4, extended to x < 0 by symmetry.
inline double normal_cdf_approx(double x) {
  if (x < 0.0) return 1.0 - normal_cdf_approx(-x);
  constexpr double c1 = 0.196854, c2 = 0.115194, c3 = 0.000344, c4 = 0.019527;
  const double b = 1.0 + x * (c1 + x * (c2 + x * (c3 + x * c4)));
  const double b2 = b * b;
  return 1.0 - 0.5 / (b2 * b2);
}

namespace detail {
template <class Cdf>
double binom_normal_form(std::int64_t n, double p, std::int64_t N, Cdf&& phi) {
  if (!(p > 0.0 && p < 1.0))
    throw PlanError("normal approximation: degenerate variance, p must be in (0,1)");
  if (n < 1) throw PlanError("normal approximation: n must be >= 1");
  const double q = 1.0 - p;
  const double sd = std::sqrt(double(n) * p * q);
  const double lo = (-double(n) * p - 0.5) / sd;
  const double hi = (double(N) - double(n) * p + 0.5) / sd;
  return std::clamp(phi(hi) - phi(lo), 0.0, 1.0);
}
}  // namespace detail

// continuity-corrected normal approximation to f(n,p,N); |f_hat - f| is
// within kBinomApproxConst / sqrt(npq)
inline double f_hat(std::int64_t n, double p, std::int64_t N) {
  return detail::binom_normal_form(n, p, N, normal_cdf_ref);
}

// same form with the polynomial CDF; |f_prime - f_hat| <= kPolyCdfPairSlack
inline double f_prime(std::int64_t n, double p, std::int64_t N) {
  return detail::binom_normal_form(n, p, N, normal_cdf_approx);
}

namespace detail {
inline std::int64_t default_bracket_top(double p, std::int64_t N) {
  const long double top = std::ceil((long double)(N) * (long double)(N) / (long double)(p));
  return std::int64_t(top);
}
}  // namespace detail

// Largest sigma certifiable with the default bracket [N, N^2/p]: values
// <= 0 mean no sigma can be certified without expanding the bracket.
inline double sigma_cap(double p, std::int64_t N) {
  if (!(p > 0.0 && p < 1.0)) throw PlanError("sigma_cap: p must be in (0,1)");
  if (N < 1) throw PlanError("sigma_cap: N must be >= 1");
  const double q = 1.0 - p;
  return (1.0 - kPolyCdfPairSlack) -
         kBinomApproxConst / (double(N) * std::sqrt(q)) -
         f_prime(detail::default_bracket_top(p, N), p, N);
}

struct SearchOptions {
  bool expand_bracket = false;  // double the top past N^2/p when sigma exceeds the cap
  std::int64_t bracket_limit = std::int64_t(1) << 46;
};

namespace detail {

enum class BoundKind { upper, lower };

// Minimal n in the bracket whose certified predicate holds, by binary search
// on the (monotone) predicate with a two-point verification at the result.
inline std::int64_t g_search(double sigma, double p, std::int64_t N, BoundKind kind,
                             const SearchOptions& opt, std::int64_t* bracket_top_out) {
  if (!(sigma > 0.0 && sigma < 1.0)) throw PlanError("sigma must be in (0,1)");
  if (!(p > 0.0 && p <= 1.0))
    throw PlanError("p = 0: cannot certify a trial count for zero-probability findings");
  if (N < 0) throw PlanError("N must be nonnegative");
  if (p == 1.0) {
    // deterministic success; K > N needs exactly N+1 trials
    if (bracket_top_out) *bracket_top_out = N + 1;
    return N + 1;
  }
  const double q = 1.0 - p;
  const auto pred = [&](std::int64_t n) {
    const double slack = kBinomApproxConst / std::sqrt(double(n) * p * q) + kPolyCdfPairSlack;
    const double thr = (kind == BoundKind::upper) ? (1.0 - sigma) - slack : (1.0 - sigma) + slack;
    return f_prime(n, p, N) <= thr;
  };

  const std::int64_t lo = std::max<std::int64_t>(N, 1);
  std::int64_t hi = std::max(default_bracket_top(p, N), lo + 1);
  if (!pred(hi)) {
    if (!opt.expand_bracket) {
      const double cap = N >= 1 ? sigma_cap(p, N) : 0.0;
      throw InfeasibleSigmaError(sigma, cap);
    }
    while (hi < opt.bracket_limit && !pred(hi))
      hi = std::min(opt.bracket_limit, hi * 2);
    if (!pred(hi))
      throw PlanError("sigma not certifiable within the bracket expansion limit");
  }
  if (bracket_top_out) *bracket_top_out = hi;
  if (pred(lo)) return lo;

  std::int64_t a = lo, b = hi;  // pred(a) false, pred(b) true
  while (b - a > 1) {
    const std::int64_t mid = a + (b - a) / 2;
    if (pred(mid)) b = mid; else a = mid;
  }
  if (!pred(b) || pred(b - 1))
    throw PlanError("bound search: predicate is not monotone near n = " + std::to_string(b));
  return b;
}

}  // namespace detail

// Upper bound g_u on the minimal total trial count n with P(K > N) >= sigma,
// planning with the success probability p (use p' when P(F) is only bounded).
inline std::int64_t g_upper(double sigma, double p, std::int64_t N,
                            const SearchOptions& opt = {},
                            std::int64_t* bracket_top_out = nullptr) {
  return detail::g_search(sigma, p, N, detail::BoundKind::upper, opt, bracket_top_out);
}

// Lower bound g_l on the same minimal trial count (slack added instead of
// subtracted); g_lower <= g_upper for identical arguments.
inline std::int64_t g_lower(double sigma, double p, std::int64_t N,
                            const SearchOptions& opt = {},
                            std::int64_t* bracket_top_out = nullptr) {
  return detail::g_search(sigma, p, N, detail::BoundKind::lower, opt, bracket_top_out);
}

enum class ReplanMode { conservative, empirical };

struct ReplanOutcome {
  std::int64_t additional = 0;  // fresh trial count covering the remaining requirement
  double p_used = 0.0;
  bool heuristic = false;  // true when planned on the empirical rate k/m
};

// Reapply the trial-count analysis after k successes in m trials: the
// remaining strict requirement is K_additional > N - k. Conservative mode
// plans on p_bound (normally p'); empirical mode plans on k/m and is
// flagged heuristic. Empirical with k = 0 falls back to conservative.
inline ReplanOutcome replan(const ConvergencePlan& plan, double p_bound,
                            std::int64_t k, std::int64_t m,
                            ReplanMode mode = ReplanMode::conservative,
                            SearchOptions opt = {true}) {
  if (k < 0 || m < k) throw PlanError("replan: need 0 <= k <= m");
  const std::int64_t N = plan.n_successes_required;
  if (k > N) return {0, p_bound, false};
  ReplanOutcome out;
  out.p_used = p_bound;
  if (mode == ReplanMode::empirical && k > 0) {
    out.p_used = std::min(1.0, double(k) / double(m));
    out.heuristic = true;
  }
  out.additional = g_upper(plan.sigma, out.p_used, N - k, opt);
  return out;
}

// Full a-priori report for one planning request; serializes with every
// input echoed so each number is reproducible.
struct BoundsReport {
  ConvergencePlan plan;
  double p_lower = 0.0;
  double p_upper = 0.0;
  std::int64_t g_upper_trials = 0;  // g_u(sigma, p_lower, N)
  std::int64_t g_lower_trials = 0;  // g_l(sigma, p_upper, N)
  double sigma_cap_at_p_lower = 0.0;
  std::int64_t bracket_low = 0;
  std::int64_t bracket_high = 0;
  bool feasible = true;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["alpha"] = plan.alpha;
    j["delta"] = plan.delta;
    j["sigma"] = plan.sigma;
    j["omega"] = plan.omega;
    j["n_successes_required"] = plan.n_successes_required;
    j["p_lower"] = p_lower;
    j["p_upper"] = p_upper;
    j["g_upper"] = g_upper_trials;
    j["g_lower"] = g_lower_trials;
    j["sigma_cap"] = sigma_cap_at_p_lower;
    j["bracket"] = {bracket_low, bracket_high};
    j["feasible"] = feasible;
    j["slack"] = {{"binom_approx_const", kBinomApproxConst},
                  {"poly_cdf_pair", kPolyCdfPairSlack}};
    return j;
  }
};

// Evaluate both bounds for a plan given p' and p*. Infeasible sigma is
// reported in the result, not thrown; p_lower = 0 still throws.
inline BoundsReport plan_bounds(const ConvergencePlan& plan, double p_lower,
                                double p_upper, const SearchOptions& opt = {}) {
  if (!(p_lower > 0.0))
    throw PlanError("p' = 0: cannot certify a trial count for zero-probability findings");
  BoundsReport rep;
  rep.plan = plan;
  rep.p_lower = p_lower;
  rep.p_upper = p_upper;
  const std::int64_t N = plan.n_successes_required;
  rep.bracket_low = std::max<std::int64_t>(N, 1);
  rep.sigma_cap_at_p_lower = p_lower < 1.0 ? sigma_cap(p_lower, N) : 1.0;
  try {
    rep.g_upper_trials = g_upper(plan.sigma, p_lower, N, opt, &rep.bracket_high);
    rep.g_lower_trials = g_lower(plan.sigma, p_upper, N, opt);
  } catch (const InfeasibleSigmaError&) {
    rep.feasible = false;
    rep.bracket_high = detail::default_bracket_top(p_lower, N);
  }
  return rep;
}

}  // namespace bnls
