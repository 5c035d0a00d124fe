#pragma once

// Deterministic virtual-time run of the full proxy + gateway stack.
//
// One event loop owns everything: the virtual clock, the interface links
// (token-bucket shaped at `tick` resolution), the OS interface table the
// poller reads, the origin stub, the gateway and the proxy. Identical
// (scenario, config, faults) always produce identical results.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hsc/sim/scenario.hpp"

namespace hsc::sim {

struct TransferMetrics {
  double overall_time_s = 0.0;
  double disconnect_time_s = 0.0;
  double handoff_delay_s = 0.0;
  double detection_delay_s = 0.0;
  ByteCount useless_traffic_bytes = 0;
  std::map<std::string, ByteCount> per_interface_bytes;
  bool completed = false;

  friend bool operator==(const TransferMetrics&, const TransferMetrics&) = default;
};

/// Fires `action` once transfer `transfer` has delivered `at_bytes` to the
/// local leg; `restore` (if set) follows `restore_after` seconds later.
struct ProgressFault {
  std::size_t transfer = 0;
  ByteCount at_bytes = 0;
  Action action;
  std::optional<Action> restore;
  double restore_after = 1.0;
};

/// Breaks one origin connection for `resource_id` after `after_bytes` body
/// bytes. Several faults on one resource hit successive connections.
struct OriginFault {
  std::string resource_id;
  ByteCount after_bytes = 0;
};

struct Faults {
  std::vector<ProgressFault> on_progress;
  std::vector<OriginFault> origin;
};

struct TransferResult {
  TransferSpec spec;
  TransferMetrics metrics;
  ByteCount bytes_delivered = 0;
  bool content_matches = false;  // local leg bytes == origin resource
  bool local_leg_error = false;
  bool continuity = false;
  unsigned failures = 0;
  unsigned preemptions = 0;
  unsigned runs = 0;
  std::optional<HandoffDecision> last_decision;
  std::vector<ByteCount> request_offsets;  // Session-Offset of every dispatch
  /// Per stalled period: time from failure/preemption to the first body
  /// byte of the resumed run.
  std::vector<double> stalls;
};

struct RunResult {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<TransferResult> transfers;
  std::map<std::string, ByteCount> origin_bytes_served;
  ByteCount gateway_bytes_skipped = 0;
  std::uint64_t warnings = 0;
  double end_time = 0.0;
  std::vector<std::string> trace;

  bool all_completed() const;
  std::vector<TransferMetrics> metrics() const;
};

/// Throws ScenarioError when the scenario does not validate.
RunResult run_scenario(const Scenario& scenario, const StackConfig& config, const Faults& faults = {});

/// Bytes that reached the abandoned interface after preemptive switches,
/// within the drain window.
ByteCount measure_useless_traffic(const RunResult& run);

}  // namespace hsc::sim
