#include "hsc/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace hsc {

const char* to_string(InterfaceKind kind) noexcept {
  switch (kind) {
    case InterfaceKind::cellular: return "cellular";
    case InterfaceKind::wlan: return "wlan";
    case InterfaceKind::ethernet: return "ethernet";
  }
  return "unknown";
}

std::optional<InterfaceKind> parse_interface_kind(std::string_view text) noexcept {
  if (text == "cellular" || text == "cdma") return InterfaceKind::cellular;
  if (text == "wlan") return InterfaceKind::wlan;
  if (text == "ethernet") return InterfaceKind::ethernet;
  return std::nullopt;
}

void validate(const InterfaceDescriptor& iface) {
  if (iface.id.empty()) throw std::invalid_argument("interface id is empty");
  if (!(iface.bandwidth_capacity > 0.0))
    throw std::invalid_argument("interface " + iface.id +
                                ": bandwidth capacity must be positive");
  if (iface.cost_metric < 1)
    throw std::invalid_argument("interface " + iface.id +
                                ": cost metric must be >= 1");
  if (iface.latency < 0.0)
    throw std::invalid_argument("interface " + iface.id + ": negative latency");
}

const char* to_string(FailureCause cause) noexcept {
  switch (cause) {
    case FailureCause::none: return "none";
    case FailureCause::host_down: return "host_down";
    case FailureCause::conn_aborted: return "conn_aborted";
    case FailureCause::conn_reset: return "conn_reset";
    case FailureCause::net_down: return "net_down";
    case FailureCause::net_unreachable: return "net_unreachable";
    case FailureCause::net_reset: return "net_reset";
    case FailureCause::try_again: return "try_again";
    case FailureCause::no_recovery: return "no_recovery";
    case FailureCause::addr_not_available: return "addr_not_available";
    case FailureCause::preemptive_marker: return "preemptive";
  }
  return "unknown";
}

const char* to_string(Disposition d) noexcept {
  switch (d) {
    case Disposition::recoverable_handoff: return "recoverable_handoff";
    case Disposition::preemptive: return "preemptive";
    case Disposition::ignore: return "ignore";
  }
  return "unknown";
}

const char* to_string(NetworkEventKind kind) noexcept {
  switch (kind) {
    case NetworkEventKind::connected: return "connected";
    case NetworkEventKind::disconnected: return "disconnected";
    case NetworkEventKind::transport_failure: return "transport_failure";
    case NetworkEventKind::preemptive_candidate: return "preemptive_candidate";
  }
  return "unknown";
}

Disposition classify_failure(int cause_code) noexcept {
  switch (static_cast<FailureCause>(cause_code)) {
    case FailureCause::preemptive_marker:
      return Disposition::preemptive;
    case FailureCause::host_down:
    case FailureCause::conn_aborted:
    case FailureCause::conn_reset:
    case FailureCause::net_down:
    case FailureCause::net_unreachable:
    case FailureCause::net_reset:
    case FailureCause::try_again:
    case FailureCause::no_recovery:
    case FailureCause::addr_not_available:
      return Disposition::recoverable_handoff;
    default:
      return Disposition::ignore;
  }
}

std::vector<NetworkEvent> poll_once(const std::vector<InterfaceDescriptor>& current,
                                    const std::vector<InterfaceDescriptor>& previous,
                                    double timestamp) {
  auto present_ids = [](const std::vector<InterfaceDescriptor>& set) {
    std::vector<std::string> ids;
    for (const auto& d : set)
      if (d.available) ids.push_back(d.id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
  };
  const auto now = present_ids(current);
  const auto before = present_ids(previous);

  std::vector<std::string> appeared, vanished;
  std::set_difference(now.begin(), now.end(), before.begin(), before.end(),
                      std::back_inserter(appeared));
  std::set_difference(before.begin(), before.end(), now.begin(), now.end(),
                      std::back_inserter(vanished));

  std::vector<NetworkEvent> events;
  events.reserve(appeared.size() + vanished.size());
  for (auto& id : appeared)
    events.push_back({NetworkEventKind::connected, FailureCause::none, std::move(id), timestamp});
  for (auto& id : vanished)
    events.push_back({NetworkEventKind::disconnected, FailureCause::none, std::move(id), timestamp});
  return events;
}

double delay_bound(double T, double lambda) {
  if (!(T > 0.0) || !(lambda > 0.0))
    throw std::domain_error("delay_bound requires T > 0 and lambda > 0");
  const double x = T * lambda;
  // Bound = T * g(x), g(x) = 1/2 - 1/x + (1 - e^{-x}) / x^2. The direct form
  // cancels catastrophically for small x, where the Taylor series is used.
  double g;
  if (x < 1e-2) {
    g = x / 6.0 - x * x / 24.0 + x * x * x / 120.0 - x * x * x * x / 720.0 +
        x * x * x * x * x / 5040.0;
  } else {
    g = 0.5 - 1.0 / x - std::expm1(-x) / (x * x);
  }
  return T * g;
}

double expected_delay_nth(int n, double tau, double lambda) {
  if (n < 1) throw std::domain_error("expected_delay_nth requires n >= 1");
  if (!(tau > 0.0)) throw std::domain_error("expected_delay_nth requires tau > 0");
  if (!(lambda > 0.0)) throw std::domain_error("expected_delay_nth requires lambda > 0");
  const double x = lambda * tau;
  // 1 - Σ_{i<k} x^i e^{-x} / i! is the regularized lower incomplete gamma P(k, x).
  const double p_n = boost::math::gamma_p(static_cast<double>(n), x);
  const double p_n1 = boost::math::gamma_p(static_cast<double>(n + 1), x);
  return tau * p_n - (static_cast<double>(n) / lambda) * p_n1;
}

DelayEstimate simulate_detection_delay(double T, double lambda,
                                       std::uint64_t cycles, std::uint64_t seed) {
  if (!(T > 0.0) || !(lambda > 0.0))
    throw std::domain_error("simulate_detection_delay requires T > 0 and lambda > 0");
  if (cycles == 0) throw std::domain_error("simulate_detection_delay requires cycles >= 1");

  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(lambda);

  // Each cycle contributes (1/T)∫₀ᵀ D(τ)dτ = (1/T) Σ_j len_j² / 2 where len_j
  // runs from the j-th change to the next change or the end of the cycle.
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::uint64_t c = 0; c < cycles; ++c) {
    double reward = 0.0;
    double last = gap(rng);
    while (last < T) {
      const double next = last + gap(rng);
      const double len = std::min(next, T) - last;
      reward += 0.5 * len * len;
      last = next;
    }
    const double per_time = reward / T;
    sum += per_time;
    sum_sq += per_time * per_time;
  }
  const double n = static_cast<double>(cycles);
  DelayEstimate out;
  out.cycles = cycles;
  out.mean = sum / n;
  if (cycles > 1) {
    const double var = std::max(0.0, (sum_sq - n * out.mean * out.mean) / (n - 1.0));
    out.std_error = std::sqrt(var / n);
  }
  return out;
}

}  // namespace hsc
