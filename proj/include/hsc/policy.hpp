#pragma once

// Interface ranking and the preemptive-handoff benefit test.

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hsc/protocol.hpp"
#include "hsc/sensing.hpp"

namespace hsc {

class NoInterfaceError : public std::runtime_error {
 public:
  NoInterfaceError() : std::runtime_error("no interface available") {}
};

/// Lowest cost metric wins; ties go to the lexicographically smallest id.
const InterfaceDescriptor& select_interface(std::span<const InterfaceDescriptor> available);

struct HandoffDecision {
  bool preempt = false;
  std::string from_interface;
  std::optional<std::string> to_interface;
  double est_remaining_current = 0.0;
  double est_remaining_candidate = 0.0;
  double est_handoff_time = 0.0;
};

/// Throughput estimate in bits/s. The default is the descriptor capacity.
using BandwidthEstimator = std::function<double(const InterfaceDescriptor&)>;

double capacity_estimate(const InterfaceDescriptor& iface);

/// Preempt iff remaining time on `current` strictly exceeds remaining time
/// on `candidate` plus the handoff time.
HandoffDecision should_preempt(ByteCount remaining_bytes,
                               const InterfaceDescriptor& current,
                               const InterfaceDescriptor& candidate,
                               double est_handoff_time,
                               const BandwidthEstimator& bandwidth = capacity_estimate);

struct HandoffDefaults {
  double to_wlan = 2.2;
  double to_ethernet = 6.3;
  double to_cellular = 2.2;
  double cross_subnet = 17.4;  // same-kind WLAN to WLAN
  double ewma_weight = 0.5;    // weight of the newest sample
};

double cold_start_handoff_time(InterfaceKind from, InterfaceKind to,
                               const HandoffDefaults& defaults = {});

/// EWMA of `history` (oldest first); cold-start default when empty.
double estimate_handoff_time(InterfaceKind from, InterfaceKind to,
                             std::span<const double> history,
                             const HandoffDefaults& defaults = {});

/// Per kind-pair record of observed handoff durations. Not synchronized;
/// owned by the proxy's serialized domain.
class HandoffHistory {
 public:
  explicit HandoffHistory(HandoffDefaults defaults = {}) : defaults_(defaults) {}

  void record(InterfaceKind from, InterfaceKind to, double seconds);
  double estimate(InterfaceKind from, InterfaceKind to) const;
  std::span<const double> samples(InterfaceKind from, InterfaceKind to) const;
  const HandoffDefaults& defaults() const noexcept { return defaults_; }

 private:
  HandoffDefaults defaults_;
  std::map<std::pair<InterfaceKind, InterfaceKind>, std::vector<double>> samples_;
};

}  // namespace hsc
