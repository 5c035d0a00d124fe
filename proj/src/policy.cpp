#include "hsc/policy.hpp"

#include <algorithm>

namespace hsc {

const InterfaceDescriptor& select_interface(std::span<const InterfaceDescriptor> available) {
  if (available.empty()) throw NoInterfaceError();
  return *std::min_element(available.begin(), available.end(),
                           [](const InterfaceDescriptor& a, const InterfaceDescriptor& b) {
                             if (a.cost_metric != b.cost_metric)
                               return a.cost_metric < b.cost_metric;
                             return a.id < b.id;
                           });
}

double capacity_estimate(const InterfaceDescriptor& iface) {
  return iface.bandwidth_capacity;
}

HandoffDecision should_preempt(ByteCount remaining_bytes,
                               const InterfaceDescriptor& current,
                               const InterfaceDescriptor& candidate,
                               double est_handoff_time,
                               const BandwidthEstimator& bandwidth) {
  const double bits = static_cast<double>(remaining_bytes) * 8.0;
  HandoffDecision d;
  d.from_interface = current.id;
  d.to_interface = candidate.id;
  d.est_remaining_current = bits / bandwidth(current);
  d.est_remaining_candidate = bits / bandwidth(candidate);
  d.est_handoff_time = est_handoff_time;
  d.preempt = d.est_remaining_current > d.est_remaining_candidate + d.est_handoff_time;
  if (!d.preempt) d.to_interface.reset();
  return d;
}

double cold_start_handoff_time(InterfaceKind from, InterfaceKind to,
                               const HandoffDefaults& defaults) {
  if (from == InterfaceKind::wlan && to == InterfaceKind::wlan) return defaults.cross_subnet;
  switch (to) {
    case InterfaceKind::wlan: return defaults.to_wlan;
    case InterfaceKind::ethernet: return defaults.to_ethernet;
    case InterfaceKind::cellular: return defaults.to_cellular;
  }
  return defaults.to_wlan;
}

double estimate_handoff_time(InterfaceKind from, InterfaceKind to,
                             std::span<const double> history,
                             const HandoffDefaults& defaults) {
  if (history.empty()) return cold_start_handoff_time(from, to, defaults);
  const double w = defaults.ewma_weight;
  double s = history.front();
  for (std::size_t i = 1; i < history.size(); ++i) s = w * history[i] + (1.0 - w) * s;
  return s;
}

void HandoffHistory::record(InterfaceKind from, InterfaceKind to, double seconds) {
  samples_[{from, to}].push_back(seconds);
}

double HandoffHistory::estimate(InterfaceKind from, InterfaceKind to) const {
  return estimate_handoff_time(from, to, samples(from, to), defaults_);
}

std::span<const double> HandoffHistory::samples(InterfaceKind from, InterfaceKind to) const {
  const auto it = samples_.find({from, to});
  if (it == samples_.end()) return {};
  return it->second;
}

}  // namespace hsc
