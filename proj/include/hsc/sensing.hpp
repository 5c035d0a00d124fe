#pragma once

// Network awareness: failure-cause classification for the event-driven path,
// interface-set diffing for the polling path, and the detection-delay model
// for a poller with interval T facing Poisson(λ) environment changes.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hsc {

enum class InterfaceKind { cellular, wlan, ethernet };

const char* to_string(InterfaceKind kind) noexcept;
std::optional<InterfaceKind> parse_interface_kind(std::string_view text) noexcept;

struct InterfaceDescriptor {
  std::string id;
  InterfaceKind kind = InterfaceKind::ethernet;
  double bandwidth_capacity = 0.0;  // bits per second
  int cost_metric = 1;
  bool available = true;
  double latency = 0.0;  // round-trip seconds

  friend bool operator==(const InterfaceDescriptor&,
                         const InterfaceDescriptor&) = default;
};

/// Throws std::invalid_argument unless capacity > 0 and cost >= 1.
void validate(const InterfaceDescriptor& iface);

/// Transport-layer error taxonomy. Values are stable; anything outside this
/// set is an unknown code and falls through to `ignore`.
enum class FailureCause : int {
  none = 0,
  host_down = 10064,
  conn_aborted = 10053,
  conn_reset = 10054,
  net_down = 10050,
  net_unreachable = 10051,
  net_reset = 10052,
  try_again = 11002,
  no_recovery = 11003,
  addr_not_available = 10049,
  preemptive_marker = 0x7E7E,
};

const char* to_string(FailureCause cause) noexcept;

enum class Disposition { recoverable_handoff, preemptive, ignore };

const char* to_string(Disposition d) noexcept;

Disposition classify_failure(int cause_code) noexcept;
inline Disposition classify_failure(FailureCause cause) noexcept {
  return classify_failure(static_cast<int>(cause));
}

enum class NetworkEventKind { connected, disconnected, transport_failure, preemptive_candidate };

const char* to_string(NetworkEventKind kind) noexcept;

struct NetworkEvent {
  NetworkEventKind kind = NetworkEventKind::connected;
  FailureCause cause = FailureCause::none;
  std::string interface_id;
  double timestamp = 0.0;

  friend bool operator==(const NetworkEvent&, const NetworkEvent&) = default;
};

/// Emits `connected` for current∖previous and `disconnected` for
/// previous∖current, each group ordered by interface id. Interfaces are
/// matched by id; descriptors with available == false are not present.
std::vector<NetworkEvent> poll_once(const std::vector<InterfaceDescriptor>& current,
                                    const std::vector<InterfaceDescriptor>& previous,
                                    double timestamp = 0.0);

struct PollerConfig {
  double interval_T = 10.0;
  double change_rate_lambda = 0.1;
};

struct DelayModel {
  double T = 10.0;
  double lambda = 0.1;
};

/// Upper bound on the long-run mean detection delay:
/// ((Tλ)² − 2Tλ + 2 − 2e^{−Tλ}) / (2Tλ²). Throws std::domain_error for
/// non-positive inputs.
double delay_bound(double T, double lambda);
inline double delay_bound(const DelayModel& m) { return delay_bound(m.T, m.lambda); }

/// E[(τ − S_n)⁺] where S_n is the n-th arrival of a Poisson(λ) process.
double expected_delay_nth(int n, double tau, double lambda);

struct DelayEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t cycles = 0;
};

/// Monte Carlo over independent polling cycles of length T: within a cycle
/// the delay at τ is τ minus the last change time before τ, or 0 before the
/// first change. Deterministic in `seed`.
DelayEstimate simulate_detection_delay(double T, double lambda,
                                       std::uint64_t cycles, std::uint64_t seed);

}  // namespace hsc
