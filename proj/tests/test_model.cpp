#include <doctest.h>

#include <random>

#include "bnls/model.hpp"
#include "test_nets.hpp"

using namespace bnls;

TEST_CASE("parse minimal networks") {
  auto single = Network::parse(
      R"({"version":1,"nodes":[{"id":"A","outcomes":["t","f"],"parents":[],"cpt":[[0.5,0.5]]}]})");
  CHECK(single.size() == 1);
  CHECK(single.parent_indices(0).empty());

  auto chain = Network::parse(testnets::kChainAB);
  CHECK(chain.size() == 2);
  CHECK(chain.parent_indices(1) == std::vector<int>{0});
}

TEST_CASE("parse rejects invalid documents") {
  CHECK_THROWS_AS(Network::parse("{not json"), ParseError);

  // bad row sum, message names the offending value
  const char* bad_sum =
      R"({"nodes":[{"id":"A","outcomes":["t","f"],"cpt":[[0.6,0.6]]}]})";
  CHECK_THROWS_WITH_AS(Network::parse(bad_sum),
                       doctest::Contains("row sum 1.2"), ValidationError);

  const char* dangling =
      R"({"nodes":[{"id":"A","outcomes":["t","f"],"parents":["Z"],"cpt":[[0.5,0.5]]}]})";
  CHECK_THROWS_WITH_AS(Network::parse(dangling), doctest::Contains("dangling parent"),
                       ValidationError);

  const char* dup =
      R"({"nodes":[{"id":"A","outcomes":["t","f"],"cpt":[[0.5,0.5]]},
                   {"id":"A","outcomes":["t","f"],"cpt":[[0.5,0.5]]}]})";
  CHECK_THROWS_WITH_AS(Network::parse(dup), doctest::Contains("duplicate"), ValidationError);

  const char* self_parent =
      R"({"nodes":[{"id":"A","outcomes":["t","f"],"parents":["A"],"cpt":[[0.5,0.5],[0.5,0.5]]}]})";
  CHECK_THROWS_WITH_AS(Network::parse(self_parent), doctest::Contains("cycle"),
                       ValidationError);

  const char* cycle2 =
      R"({"nodes":[{"id":"A","outcomes":["t","f"],"parents":["B"],"cpt":[[0.5,0.5],[0.5,0.5]]},
                   {"id":"B","outcomes":["t","f"],"parents":["A"],"cpt":[[0.5,0.5],[0.5,0.5]]}]})";
  CHECK_THROWS_WITH_AS(Network::parse(cycle2), doctest::Contains("cycle"), ValidationError);
}

TEST_CASE("row renormalization is opt-in") {
  const char* off_by_rounding =
      R"({"nodes":[{"id":"A","outcomes":["t","f"],"cpt":[[0.6000001,0.4]]}]})";
  CHECK_THROWS_AS(Network::parse(off_by_rounding), ValidationError);
  ParseOptions opts;
  opts.renormalize_rows = true;
  auto net = Network::parse(off_by_rounding, opts);
  const auto& row = net.nodes()[0].cpt[0];
  CHECK(row[0] + row[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("topological order") {
  auto chain = Network::parse(R"({"nodes":[
    {"id":"A","outcomes":["t","f"],"cpt":[[0.5,0.5]]},
    {"id":"B","outcomes":["t","f"],"parents":["A"],"cpt":[[0.5,0.5],[0.5,0.5]]},
    {"id":"C","outcomes":["t","f"],"parents":["B"],"cpt":[[0.5,0.5],[0.5,0.5]]}]})");
  CHECK(topological_order(chain) == std::vector<std::string>{"A", "B", "C"});

  // diamond, declaration-order tie break
  auto diamond = Network::parse(R"({"nodes":[
    {"id":"A","outcomes":["t","f"],"cpt":[[0.5,0.5]]},
    {"id":"B","outcomes":["t","f"],"parents":["A"],"cpt":[[0.5,0.5],[0.5,0.5]]},
    {"id":"C","outcomes":["t","f"],"parents":["A"],"cpt":[[0.5,0.5],[0.5,0.5]]},
    {"id":"D","outcomes":["t","f"],"parents":["B","C"],
     "cpt":[[0.5,0.5],[0.5,0.5],[0.5,0.5],[0.5,0.5]]}]})");
  CHECK(topological_order(diamond) == std::vector<std::string>{"A", "B", "C", "D"});
}

TEST_CASE("exact query on the A->B chain") {
  auto net = Network::parse(testnets::kChainAB);
  auto ev = Evidence::parse(testnets::kEvidenceBt);
  auto res = exact_query(net, ev);
  CHECK(res.evidence_prob == doctest::Approx(0.55).epsilon(1e-12));
  CHECK(res.posteriors_defined);
  CHECK(res.posteriors[0][0] == doctest::Approx(8.0 / 11.0).epsilon(1e-12));
}

TEST_CASE("exact query edge cases") {
  auto net = Network::parse(testnets::kChainAB);

  // empty evidence: P(emptyset) = 1, posteriors are priors
  auto res = exact_query(net, Evidence{});
  CHECK(res.evidence_prob == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.posteriors[0][0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(res.posteriors[1][0] == doctest::Approx(0.55).epsilon(1e-12));

  // evidence contradicting a deterministic CPT
  auto det = Network::parse(R"({"nodes":[
    {"id":"A","outcomes":["t","f"],"cpt":[[1.0,0.0]]}]})");
  Evidence impossible;
  impossible.findings["A"] = "f";
  auto zero = exact_query(det, impossible);
  CHECK(zero.evidence_prob == 0.0);
  CHECK_FALSE(zero.posteriors_defined);

  // unknown node / outcome
  Evidence bad;
  bad.findings["Z"] = "t";
  CHECK_THROWS_AS(exact_query(net, bad), ValidationError);

  // state cap
  CHECK_THROWS_AS(exact_query(net, Evidence{}, 2), StateCapError);
}

TEST_CASE("evidence probability bounds on the chain") {
  auto net = Network::parse(testnets::kChainAB);
  auto ev = Evidence::parse(testnets::kEvidenceBt);
  CHECK(evidence_prob_lower(net, ev) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(evidence_prob_upper(net, ev) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(evidence_prob_lower(net, Evidence{}) == 1.0);
  CHECK(evidence_prob_upper(net, Evidence{}) == 1.0);
}

TEST_CASE("p' <= P(F) <= p* on random networks") {
  std::mt19937_64 rng(20260826);
  for (int iter = 0; iter < 100; ++iter) {
    auto net = testnets::random_binary_net(rng);
    auto ev = testnets::random_evidence(rng, net);
    const double p = exact_query(net, ev).evidence_prob;
    const double lo = evidence_prob_lower(net, ev);
    const double hi = evidence_prob_upper(net, ev);
    CAPTURE(iter);
    CHECK(lo <= p + 1e-12);
    CHECK(p <= hi + 1e-12);
  }
}

TEST_CASE("posteriors normalize and topo order is a valid permutation") {
  std::mt19937_64 rng(42);
  for (int iter = 0; iter < 50; ++iter) {
    auto net = testnets::random_binary_net(rng);
    auto ev = testnets::random_evidence(rng, net);
    auto res = exact_query(net, ev);
    if (res.posteriors_defined)
      for (const auto& dist : res.posteriors) {
        double s = 0;
        for (double v : dist) s += v;
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
      }

    const auto& order = net.topo_order();
    std::vector<int> pos(net.size());
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = int(i);
    CHECK(order.size() == net.size());
    for (std::size_t i = 0; i < net.size(); ++i)
      for (int par : net.parent_indices(int(i))) CHECK(pos[par] < pos[int(i)]);
  }
}

TEST_CASE("parse -> serialize -> parse round-trips") {
  std::mt19937_64 rng(7);
  for (int iter = 0; iter < 20; ++iter) {
    auto net = testnets::random_binary_net(rng);
    auto again = Network::parse(net.serialize());
    REQUIRE(again.size() == net.size());
    for (std::size_t i = 0; i < net.size(); ++i) {
      CHECK(again.nodes()[i].id == net.nodes()[i].id);
      CHECK(again.nodes()[i].outcomes == net.nodes()[i].outcomes);
      CHECK(again.nodes()[i].parents == net.nodes()[i].parents);
      CHECK(again.nodes()[i].cpt == net.nodes()[i].cpt);
    }
  }
}
