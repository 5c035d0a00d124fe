// hsc: scenario runner, detection-delay sweeps, protocol goldens and the
// live proxy / gateway servers.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hsc/live/http_origin.hpp"
#include "hsc/live/live_gateway.hpp"
#include "hsc/live/live_proxy.hpp"
#include "hsc/protocol.hpp"
#include "hsc/sensing.hpp"
#include "hsc/sim/harness.hpp"
#include "hsc/sim/report.hpp"

#ifndef HSC_SCENARIO_DIR
#define HSC_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;
using namespace hsc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitFailedTransfer = 2;

fs::path resolve_scenario(const std::string& arg) {
  if (fs::exists(arg)) return arg;
  for (const fs::path dir : {fs::path("scenarios"), fs::path(HSC_SCENARIO_DIR)}) {
    const auto candidate = dir / (arg + ".scn");
    if (fs::exists(candidate)) return candidate;
  }
  throw sim::ScenarioError("scenario not found: " + arg);
}

bool write_output(const std::optional<std::string>& path, const std::string& text) {
  if (!path) {
    std::cout << text;
    return true;
  }
  std::ofstream out(*path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) {
    std::cerr << "hsc: cannot write " << *path << "\n";
    return false;
  }
  return true;
}

struct ScenarioArgs {
  std::string scenario;
  std::optional<std::uint64_t> seed;
};

sim::Scenario load(const ScenarioArgs& args) {
  auto sc = sim::load_scenario(resolve_scenario(args.scenario));
  if (args.seed) sc.seed = *args.seed;
  sim::validate(sc);
  return sc;
}

void wait_for_signal() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  int sig = 0;
  sigwait(&set, &sig);
}

void block_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

double makespan(const sim::RunResult& r) {
  double t = 0;
  for (const auto& m : r.metrics()) t = std::max(t, m.overall_time_s);
  return t;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad number '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Session-continuity proxy toolkit"};
  app.require_subcommand(1);

  // run
  ScenarioArgs run_args;
  std::string policy;
  std::optional<std::string> out_path;
  std::string format = "csv";
  bool show_trace = false;
  auto* run = app.add_subcommand("run", "Run a scenario and write a metrics report");
  run->add_option("scenario", run_args.scenario, "Scenario file or canned scenario name")->required();
  run->add_option("--policy", policy, "Preemptive handoff policy")->check(CLI::IsMember({"on", "off"}));
  run->add_option("--seed", run_args.seed, "Seed (falls back to SW_SEED)")->envname("SW_SEED");
  run->add_option("--out", out_path, "Report path (default stdout)");
  run->add_option("--format", format, "Report format")->check(CLI::IsMember({"csv", "json"}));
  run->add_flag("--trace", show_trace, "Print the event trace to stderr");

  // compare
  ScenarioArgs cmp_args;
  std::optional<std::string> cmp_out;
  auto* compare = app.add_subcommand("compare", "Run a scenario with the policy on and off");
  compare->add_option("scenario", cmp_args.scenario, "Scenario file or canned scenario name")->required();
  compare->add_option("--seed", cmp_args.seed, "Seed (falls back to SW_SEED)")->envname("SW_SEED");
  compare->add_option("--out", cmp_out, "Report path (default stdout)");

  // delay-sweep
  std::string t_list;
  std::string lambda_list;
  std::uint64_t cycles = 100000;
  std::uint64_t sweep_seed = 0;
  std::optional<std::string> sweep_out;
  auto* sweep = app.add_subcommand("delay-sweep", "Detection delay bound vs Monte Carlo");
  sweep->add_option("--T", t_list, "Comma-separated polling intervals (s)")->required();
  sweep->add_option("--lambda", lambda_list, "Comma-separated change rates (1/s)")->required();
  sweep->add_option("--cycles", cycles, "Polling cycles per grid point");
  sweep->add_option("--seed", sweep_seed, "Seed (falls back to SW_SEED)")->envname("SW_SEED");
  sweep->add_option("--out", sweep_out, "CSV path (default stdout)");

  // golden
  std::string golden_gateway = "http://205.132.6.11/scripts/dis.dll";
  std::string golden_url = "http://www.cnn.com/draft.ppt";
  std::vector<ByteCount> golden_offsets = {0, 203223};
  auto* golden = app.add_subcommand("golden", "Print rewritten gateway requests and check round trips");
  golden->add_option("--gateway", golden_gateway, "Gateway base URL");
  golden->add_option("--url", golden_url, "Origin URL");
  golden->add_option("--offset", golden_offsets, "Session offsets");

  // servers
  std::uint16_t gw_port = 8080;
  auto* serve_gw = app.add_subcommand("serve-gateway", "Serve the gateway on loopback");
  serve_gw->add_option("--port", gw_port, "Listen port");

  live::LiveProxyConfig proxy_cfg;
  proxy_cfg.port = 8000;
  auto* serve_proxy = app.add_subcommand("serve-proxy", "Serve the client proxy on loopback");
  serve_proxy->add_option("--port", proxy_cfg.port, "Listen port");
  serve_proxy->add_option("--gateway", proxy_cfg.proxy.gateway_base, "Gateway base URL");
  serve_proxy->add_option("--workers", proxy_cfg.proxy.workers, "Concurrent remote legs")
      ->check(CLI::PositiveNumber);
  serve_proxy->add_option("--poll", proxy_cfg.poll_interval, "Interface poll interval (s)")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*run) {
      const auto sc = load(run_args);
      auto cfg = sim::apply_overrides(sc);
      if (!policy.empty()) cfg.policy_enabled = policy == "on";
      const auto result = sim::run_scenario(sc, cfg);
      if (show_trace)
        for (const auto& line : result.trace) std::cerr << line << "\n";
      const auto text = sim::render(result.metrics(), format == "csv" ? sim::ReportFormat::csv
                                                                      : sim::ReportFormat::json);
      if (!write_output(out_path, text)) return kExitInvalid;
      return result.all_completed() ? kExitOk : kExitFailedTransfer;
    }

    if (*compare) {
      const auto sc = load(cmp_args);
      auto cfg = sim::apply_overrides(sc);
      cfg.policy_enabled = true;
      const auto on = sim::run_scenario(sc, cfg);
      cfg.policy_enabled = false;
      const auto off = sim::run_scenario(sc, cfg);
      std::string text = std::string("policy,") + sim::kCsvHeader + "\n";
      for (const auto& [label, r] : {std::pair{"on", &on}, std::pair{"off", &off}}) {
        const auto csv = sim::to_csv(r->metrics());
        std::istringstream rows(csv.substr(csv.find('\n') + 1));
        for (std::string row; std::getline(rows, row);) text += std::string(label) + "," + row + "\n";
      }
      const double ratio = makespan(off) / makespan(on);
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", ratio);
      text += std::string("ratio_off_over_on,") + buf + "\n";
      if (!write_output(cmp_out, text)) return kExitInvalid;
      return on.all_completed() && off.all_completed() ? kExitOk : kExitFailedTransfer;
    }

    if (*sweep) {
      const auto ts = parse_list(t_list);
      const auto lambdas = parse_list(lambda_list);
      if (ts.empty() || lambdas.empty()) {
        std::cerr << "hsc: empty grid\n";
        return kExitInvalid;
      }
      for (const double v : ts)
        if (!(v > 0)) throw std::invalid_argument("T values must be positive");
      for (const double v : lambdas)
        if (!(v > 0)) throw std::invalid_argument("lambda values must be positive");
      if (cycles == 0) throw std::invalid_argument("cycles must be positive");
      std::string text = "T,lambda,bound,empirical_mean,stderr\n";
      for (const double T : ts) {
        for (const double lambda : lambdas) {
          const auto est = simulate_detection_delay(T, lambda, cycles, sweep_seed);
          char row[160];
          std::snprintf(row, sizeof row, "%g,%g,%.6f,%.6f,%.6f\n", T, lambda, delay_bound(T, lambda),
                        est.mean, est.std_error);
          text += row;
        }
      }
      return write_output(sweep_out, text) ? kExitOk : kExitInvalid;
    }

    if (*golden) {
      OriginRequest origin;
      origin.url = golden_url;
      bool ok = true;
      for (const auto offset : golden_offsets) {
        const auto text = rewrite_request(origin, golden_gateway, offset);
        std::cout << text;
        const auto parsed = parse_gateway_request(text);
        if (parsed.origin_url != golden_url || parsed.session_offset != offset) {
          std::cerr << "hsc: round trip mismatch at offset " << offset << "\n";
          ok = false;
        }
      }
      return ok ? kExitOk : kExitInvalid;
    }

    if (*serve_gw) {
      block_signals();
      live::HttpOrigin origin;
      live::LiveGateway gw(origin, gw_port);
      gw.start();
      std::cerr << "gateway listening on 127.0.0.1:" << gw.port() << "\n";
      wait_for_signal();
      gw.stop();
      return kExitOk;
    }

    if (*serve_proxy) {
      block_signals();
      live::LiveProxy proxy(proxy_cfg);
      proxy.start();
      std::cerr << "proxy listening on 127.0.0.1:" << proxy.port() << ", gateway "
                << proxy_cfg.proxy.gateway_base << "\n";
      wait_for_signal();
      proxy.stop();
      return kExitOk;
    }
  } catch (const sim::ScenarioError& e) {
    std::cerr << "hsc: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "hsc: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitOk;
}
