// Command-line front end: a-priori trial-count bounds, logic sampling,
// exact enumeration, figure sweeps, and empirical guarantee verification
// for discrete belief networks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bnls/harness.hpp"
#include "bnls/model.hpp"
#include "bnls/planner.hpp"
#include "bnls/sampler.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitNoSuccess = 3;
constexpr int kExitOracleCap = 4;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw bnls::ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// write temp then rename, so readers never see a partial file
void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text << "\n";
    return;
  }
  const std::string tmp = out_path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out << text << "\n";
  }
  std::filesystem::rename(tmp, out_path);
}

struct RunConfig {
  std::string net_path;
  std::string ev_path;
  double alpha = 0.0, delta = 0.0, sigma = 0.0;
  std::uint64_t seed = 0;
  std::int64_t trials = -1;
  std::string mode = "fixed";
  std::int64_t replications = 200;
  std::int64_t batch = 0;
  std::string out_path;
  std::uint64_t state_cap = std::uint64_t(1) << 24;
  bool expand_bracket = false;
  int threads = 1;

  nlohmann::json echo(const std::string& subcommand) const {
    nlohmann::json j;
    j["subcommand"] = subcommand;
    j["network"] = net_path;
    j["evidence"] = ev_path;
    if (subcommand == "bounds" || subcommand == "sample" || subcommand == "verify") {
      j["alpha"] = alpha;
      j["delta"] = delta;
      j["sigma"] = sigma;
      j["expand_bracket"] = expand_bracket;
    }
    if (subcommand == "sample") {
      j["seed"] = seed;
      j["trials"] = trials;
      j["mode"] = mode;
      j["batch"] = batch;
    }
    if (subcommand == "verify") {
      j["seed"] = seed;
      j["replications"] = replications;
    }
    if (subcommand == "exact") j["state_cap"] = state_cap;
    return j;
  }
};

bnls::Network load_net(const RunConfig& cfg) {
  return bnls::Network::parse(read_file(cfg.net_path));
}

bnls::Evidence load_ev(const RunConfig& cfg) {
  if (cfg.ev_path.empty()) return {};
  return bnls::Evidence::parse(read_file(cfg.ev_path));
}

int cmd_bounds(const RunConfig& cfg) {
  const auto net = load_net(cfg);
  const auto ev = load_ev(cfg);
  const auto plan = bnls::ConvergencePlan::make(cfg.alpha, cfg.delta, cfg.sigma);
  const double p_lo = bnls::evidence_prob_lower(net, ev);
  const double p_hi = bnls::evidence_prob_upper(net, ev);
  if (!(p_lo > 0.0)) {
    std::cerr << "bounds: p' = 0 (a finding has a zero CPT minimum); cannot certify\n";
    return kExitInfeasible;
  }
  const auto rep =
      bnls::plan_bounds(plan, p_lo, p_hi, bnls::SearchOptions{cfg.expand_bracket});
  nlohmann::json j = rep.to_json();
  j["config"] = cfg.echo("bounds");
  emit(j.dump(2), cfg.out_path);
  return rep.feasible ? kExitOk : kExitInfeasible;
}

int cmd_sample(const RunConfig& cfg) {
  const auto net = load_net(cfg);
  const auto ev = load_ev(cfg);
  const auto plan = bnls::ConvergencePlan::make(cfg.alpha, cfg.delta, cfg.sigma);
  const bnls::SeedSpec seed{cfg.seed};
  bnls::SamplingResult res;
  if (cfg.mode == "fixed") {
    std::int64_t trials = cfg.trials;
    const double p_lo = bnls::evidence_prob_lower(net, ev);
    std::int64_t g_u = -1;
    if (p_lo > 0.0)
      g_u = bnls::g_upper(plan.sigma, p_lo, plan.n_successes_required,
                          bnls::SearchOptions{cfg.expand_bracket});
    if (trials < 0) {
      if (g_u < 0) {
        std::cerr << "sample: p' = 0; pass --trials explicitly\n";
        return kExitInfeasible;
      }
      trials = g_u;
    }
    res = bnls::run(net, ev, trials, seed, cfg.threads);
    res.guarantee_met_a_priori = g_u >= 0 && trials >= g_u;
  } else {
    const auto mode = cfg.mode == "empirical" ? bnls::ReplanMode::empirical
                                              : bnls::ReplanMode::conservative;
    res = bnls::run_adaptive(net, ev, plan, seed, mode, cfg.batch, cfg.threads);
  }
  nlohmann::json j = res.to_json(net);
  j["config"] = cfg.echo("sample");
  // a-priori only: K < N remains possible after the fact
  j["note"] = "guarantee_met_a_priori certifies the plan before sampling; "
              "check k_success > n_successes_required for the realized run";
  emit(j.dump(2), cfg.out_path);
  return res.k_success > 0 ? kExitOk : kExitNoSuccess;
}

int cmd_exact(const RunConfig& cfg) {
  const auto net = load_net(cfg);
  const auto ev = load_ev(cfg);
  const auto res = bnls::exact_query(net, ev, cfg.state_cap);
  nlohmann::json j;
  j["evidence_prob"] = res.evidence_prob;
  j["posteriors_defined"] = res.posteriors_defined;
  j["posteriors"] = nlohmann::json::object();
  if (res.posteriors_defined)
    for (std::size_t i = 0; i < net.size(); ++i) {
      nlohmann::json d = nlohmann::json::object();
      for (std::size_t o = 0; o < net.nodes()[i].outcomes.size(); ++o)
        d[net.nodes()[i].outcomes[o]] = res.posteriors[i][o];
      j["posteriors"][net.nodes()[i].id] = std::move(d);
    }
  j["config"] = cfg.echo("exact");
  emit(j.dump(2), cfg.out_path);
  return kExitOk;
}

int cmd_verify(const RunConfig& cfg) {
  const auto net = load_net(cfg);
  const auto ev = load_ev(cfg);
  const auto plan = bnls::ConvergencePlan::make(cfg.alpha, cfg.delta, cfg.sigma);
  const auto rep = bnls::verify_guarantee(net, ev, plan, cfg.replications,
                                          bnls::SeedSpec{cfg.seed}, cfg.threads);
  nlohmann::json j = rep.to_json();
  j["config"] = cfg.echo("verify");
  emit(j.dump(2), cfg.out_path);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"logic sampling with a-priori trial-count bounds"};
  app.require_subcommand(1);
  RunConfig cfg;

  const auto add_plan_flags = [&](CLI::App* c) {
    c->add_option("--alpha", cfg.alpha, "interval error, in (0,1)")->required();
    c->add_option("--delta", cfg.delta, "per-estimate confidence, in (0,1)")->required();
    c->add_option("--sigma", cfg.sigma, "success-count confidence, in (0,1)")->required();
    c->add_flag("--expand-bracket", cfg.expand_bracket,
                "allow the search bracket to grow past N^2/p");
  };
  const auto add_io_flags = [&](CLI::App* c, bool ev_required) {
    c->add_option("--net", cfg.net_path, "network JSON file")->required();
    auto* e = c->add_option("--ev", cfg.ev_path, "evidence JSON file");
    if (ev_required) (void)e;  // empty evidence allowed everywhere
    c->add_option("--out", cfg.out_path, "output file (atomic write); default stdout");
  };

  auto* bounds = app.add_subcommand("bounds", "a-priori trial-count bounds");
  add_io_flags(bounds, false);
  add_plan_flags(bounds);

  auto* sample = app.add_subcommand("sample", "run logic sampling");
  add_io_flags(sample, false);
  add_plan_flags(sample);
  sample->add_option("--seed", cfg.seed, "64-bit stream seed");
  sample->add_option("--trials", cfg.trials, "trial-count override (fixed mode)");
  sample->add_option("--mode", cfg.mode, "fixed | conservative | empirical")
      ->check(CLI::IsMember({"fixed", "conservative", "empirical"}));
  sample->add_option("--batch", cfg.batch, "adaptive batch size (0 = auto)");
  sample->add_option("--threads", cfg.threads, "worker threads (does not change output)");

  auto* exact = app.add_subcommand("exact", "exact enumeration oracle");
  add_io_flags(exact, false);
  exact->add_option("--state-cap", cfg.state_cap, "joint-state cap for enumeration");

  auto* verify = app.add_subcommand("verify", "empirical coverage of the guarantee");
  add_io_flags(verify, false);
  add_plan_flags(verify);
  verify->add_option("--seed", cfg.seed, "64-bit stream seed");
  verify->add_option("--replications", cfg.replications, "independent protocol runs");
  verify->add_option("--threads", cfg.threads, "worker threads (does not change output)");

  auto* sweepc = app.add_subcommand("sweep", "g_u / g_l sweep CSV over (sigma, N, p)");
  std::vector<double> sigmas{0.5, 0.9, 0.99};
  std::vector<std::int64_t> n_list{500, 2000, 50000};
  int p_points = 25;
  double p_min = 1e-4, p_max = 1.0;
  sweepc->add_option("--sigmas", sigmas, "sigma values");
  sweepc->add_option("--N", n_list, "required-success counts");
  sweepc->add_option("--p-points", p_points, "log-spaced p grid size");
  sweepc->add_option("--p-min", p_min, "grid minimum p");
  sweepc->add_option("--p-max", p_max, "grid maximum p");
  sweepc->add_option("--out", cfg.out_path, "output CSV file; default stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (bounds->parsed()) return cmd_bounds(cfg);
    if (sample->parsed()) return cmd_sample(cfg);
    if (exact->parsed()) return cmd_exact(cfg);
    if (verify->parsed()) return cmd_verify(cfg);
    if (sweepc->parsed()) {
      const auto table =
          bnls::sweep(bnls::default_p_grid(p_points, p_min, p_max), n_list, sigmas);
      emit(table.to_csv(), cfg.out_path);
      return kExitOk;
    }
  } catch (const bnls::StateCapError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOracleCap;
  } catch (const bnls::InfeasibleSigmaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const bnls::PlanError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
