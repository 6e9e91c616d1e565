#include <doctest.h>

#include <random>

#include "bnls/sampler.hpp"
#include "test_nets.hpp"

using namespace bnls;

TEST_CASE("deterministic CPTs force the unique assignment") {
  auto net = Network::parse(R"({"nodes":[
    {"id":"A","outcomes":["t","f"],"cpt":[[1.0,0.0]]},
    {"id":"B","outcomes":["t","f"],"parents":["A"],"cpt":[[0.0,1.0],[1.0,0.0]]}]})");
  for (std::uint64_t s : {0ull, 1ull, 999ull}) {
    const auto a = simulate_trial(net, SeedSpec{s}, 17);
    CHECK(a == std::vector<int>{0, 1});  // A=t, B=f
  }
}

TEST_CASE("trials are deterministic in (seed, trial index)") {
  auto net = Network::parse(testnets::kChainAB);
  const SeedSpec seed{123};
  for (std::int64_t t = 0; t < 50; ++t)
    CHECK(simulate_trial(net, seed, t) == simulate_trial(net, seed, t));
  // different trial indices decorrelate
  bool any_diff = false;
  for (std::int64_t t = 1; t < 50; ++t)
    any_diff = any_diff || simulate_trial(net, seed, t) != simulate_trial(net, seed, 0);
  CHECK(any_diff);
}

TEST_CASE("root outcome frequency matches its prior") {
  auto net = Network::parse(
      R"({"nodes":[{"id":"A","outcomes":["t","f"],"cpt":[[0.3,0.7]]}]})");
  const std::int64_t n = 100000;
  std::int64_t hits = 0;
  for (std::int64_t t = 0; t < n; ++t)
    if (simulate_trial(net, SeedSpec{5}, t)[0] == 0) ++hits;
  // 99.99% binomial interval around 0.3 is well inside +-0.01
  CHECK(double(hits) / double(n) == doctest::Approx(0.3).epsilon(0.04));
}

TEST_CASE("success test against findings") {
  auto net = Network::parse(testnets::kChainAB);
  auto ev = Evidence::parse(testnets::kEvidenceBt);
  CHECK(is_successful(net, {0, 0}, ev));        // A=t, B=t
  CHECK_FALSE(is_successful(net, {0, 1}, ev));  // A=t, B=f
  CHECK(is_successful(net, {1, 1}, Evidence{}));
}

TEST_CASE("fixed-count run") {
  auto net = Network::parse(testnets::kChainAB);
  auto ev = Evidence::parse(testnets::kEvidenceBt);

  // empty evidence: every trial succeeds
  auto all = run(net, Evidence{}, 1000, SeedSpec{1});
  CHECK(all.k_success == 1000);
  CHECK(all.estimates_defined);

  // zero trials: flagged undefined, not an error
  auto empty = run(net, ev, 0, SeedSpec{1});
  CHECK(empty.k_success == 0);
  CHECK_FALSE(empty.estimates_defined);

  auto res = run(net, ev, 200000, SeedSpec{99});
  REQUIRE(res.estimates_defined);
  CHECK(res.k_success <= res.n_total);
  CHECK(res.estimates[0][0] == doctest::Approx(8.0 / 11.0).epsilon(0.015));

  // tallies over successful trials only, summing to K per node
  for (const auto& counts : res.tallies) {
    std::int64_t s = 0;
    for (auto c : counts) s += c;
    CHECK(s == res.k_success);
  }
  for (const auto& dist : res.estimates) {
    double s = 0;
    for (double v : dist) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("parallel execution reproduces the serial result") {
  auto net = Network::parse(testnets::kChainAB);
  auto ev = Evidence::parse(testnets::kEvidenceBt);
  const auto serial = run(net, ev, 50000, SeedSpec{7}, 1);
  for (int threads : {2, 4, 7}) {
    const auto par = run(net, ev, 50000, SeedSpec{7}, threads);
    CHECK(par.k_success == serial.k_success);
    CHECK(par.tallies == serial.tallies);
    CHECK(par.to_json(net).dump() == serial.to_json(net).dump());
  }
}

TEST_CASE("success rate is unbiased") {
  auto net = Network::parse(testnets::kChainAB);
  auto ev = Evidence::parse(testnets::kEvidenceBt);
  const double p = exact_query(net, ev).evidence_prob;  // 0.55
  const std::int64_t n = 500, R = 1000;
  double mean = 0.0;
  for (std::int64_t r = 0; r < R; ++r)
    mean += double(run(net, ev, n, SeedSpec{1234}.derive(r)).k_success) / double(n);
  mean /= double(R);
  CHECK(std::abs(mean - p) <= 4.0 * std::sqrt(p * (1 - p) / double(n * R)));
}

TEST_CASE("estimates converge toward the oracle") {
  std::mt19937_64 rng(11);
  auto net = testnets::random_binary_net(rng, 6);
  auto ev = testnets::random_evidence(rng, net, 2);
  const auto oracle = exact_query(net, ev);
  REQUIRE(oracle.posteriors_defined);

  const auto max_err = [&](const SamplingResult& res) {
    double e = 0;
    for (std::size_t i = 0; i < net.size(); ++i)
      for (std::size_t o = 0; o < res.estimates[i].size(); ++o)
        e = std::max(e, std::abs(res.estimates[i][o] - oracle.posteriors[i][o]));
    return e;
  };
  // average over seeds so the halving check is not noise-dominated
  double err_small = 0, err_large = 0;
  for (std::uint64_t s = 0; s < 8; ++s) {
    err_small += max_err(run(net, ev, 20000, SeedSpec{s}));
    err_large += max_err(run(net, ev, 320000, SeedSpec{s + 100}));
  }
  CHECK(err_large <= 0.75 * err_small + 0.01);
}

TEST_CASE("adaptive conservative mode") {
  auto net = Network::parse(testnets::kChainAB);
  auto ev = Evidence::parse(testnets::kEvidenceBt);
  const auto plan = ConvergencePlan::make(0.1, 0.9, 0.9);  // N = 250
  const double p_lo = evidence_prob_lower(net, ev);
  const auto initial = g_upper(plan.sigma, p_lo, plan.n_successes_required);
  const std::int64_t batch = 64;

  const auto res = run_adaptive(net, ev, plan, SeedSpec{3}, ReplanMode::conservative, batch);
  CHECK(res.guarantee_met_a_priori);
  CHECK_FALSE(res.heuristic);
  CHECK(res.n_total <= initial + batch);
  CHECK(res.plan_history.size() >= 2);
  CHECK(res.plan_history.front().additional == initial);
  // terminated by meeting the requirement or exhausting the certified budget
  CHECK((res.k_success > plan.n_successes_required ||
         res.plan_history.back().additional == 0 || res.n_total >= initial));

  // deterministic
  const auto again = run_adaptive(net, ev, plan, SeedSpec{3}, ReplanMode::conservative, batch);
  CHECK(again.to_json(net).dump() == res.to_json(net).dump());

  // empty evidence terminates quickly with few replans
  const auto easy = run_adaptive(net, Evidence{}, plan, SeedSpec{4});
  CHECK(easy.k_success > plan.n_successes_required);
  CHECK(easy.plan_history.size() <= 12);
}

TEST_CASE("adaptive budget property over random networks") {
  std::mt19937_64 rng(21);
  const auto plan = ConvergencePlan::make(0.2, 0.8, 0.8);  // N = 32
  for (int iter = 0; iter < 25; ++iter) {
    auto net = testnets::random_binary_net(rng, 8);
    auto ev = testnets::random_evidence(rng, net, 2);
    const double p_lo = evidence_prob_lower(net, ev);
    REQUIRE(p_lo > 0.0);
    const auto initial = g_upper(plan.sigma, p_lo, plan.n_successes_required,
                                 SearchOptions{true});
    const std::int64_t batch = 64;
    const auto res =
        run_adaptive(net, ev, plan, SeedSpec{std::uint64_t(iter)}, ReplanMode::conservative, batch);
    CAPTURE(iter);
    CHECK(res.n_total <= initial + batch);
  }
}

TEST_CASE("adaptive empirical mode is flagged heuristic") {
  auto net = Network::parse(testnets::kChainAB);
  auto ev = Evidence::parse(testnets::kEvidenceBt);
  const auto plan = ConvergencePlan::make(0.1, 0.9, 0.9);
  const auto res = run_adaptive(net, ev, plan, SeedSpec{8}, ReplanMode::empirical, 64);
  CHECK(res.heuristic);
  CHECK_FALSE(res.guarantee_met_a_priori);
  CHECK(res.k_success > plan.n_successes_required);
}
