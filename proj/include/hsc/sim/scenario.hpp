#pragma once

// Declarative experiment script and its text format.
//
//   name = hysteresis
//   seed = 1
//   interface cdma kind=cellular bandwidth=144000 cost=5 latency=0.5 available=1
//   transfer start=0 resource=draft.ppt size=500000
//   event 30 enable wlan
//   event 40 subnet_handoff wlan_a wlan_b
//   stack.poll_interval = 10
//   policy.to_wlan = 2.2
//
// '#' starts a comment. Events must be listed in time order.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hsc/client_proxy.hpp"
#include "hsc/policy.hpp"
#include "hsc/sensing.hpp"

namespace hsc::sim {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ActionKind { enable, disable, ap_power_off, ap_power_on, nic_off, nic_on, subnet_handoff };

const char* to_string(ActionKind kind) noexcept;
std::optional<ActionKind> parse_action_kind(std::string_view text) noexcept;

struct Action {
  ActionKind kind = ActionKind::enable;
  std::string iface;
  std::string target;  // subnet_handoff only

  friend bool operator==(const Action&, const Action&) = default;
};

struct TimedAction {
  double time = 0.0;
  Action action;
};

struct TransferSpec {
  double start = 0.0;
  std::string resource_id;
  ByteCount size = 0;
};

struct ScenarioInterface {
  InterfaceDescriptor desc;
  /// Share of the nameplate capacity this host actually gets.
  double utilization = 1.0;
};

/// Knobs of the stack under test. Scenario files may override them with
/// `stack.*` and `policy.*` keys.
struct StackConfig {
  bool policy_enabled = true;
  RecoveryMode recovery = RecoveryMode::packet;
  double poll_interval = 10.0;
  std::size_t workers = 4;
  std::optional<unsigned> retry_budget;
  double drain_window = 2.0;
  double connect_event_latency = 2.0;
  double disconnect_event_latency = 10.0;
  double subnet_handoff_delay = 17.4;
  double tick = 0.01;
  double max_time = 86400.0;
  bool origin_range_support = true;
  HandoffDefaults handoff;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<ScenarioInterface> interfaces;
  std::vector<TimedAction> timeline;
  std::vector<TransferSpec> transfers;
  /// Raw `stack.*` / `policy.*` settings, applied by apply_overrides().
  std::map<std::string, std::string> overrides;

  const ScenarioInterface* find_interface(std::string_view id) const;
};

/// Throws ScenarioError with a line number on syntax errors.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

/// Throws ScenarioError for unknown interfaces, unsorted timelines,
/// invalid descriptors or bad override keys.
void validate(const Scenario& scenario);

StackConfig apply_overrides(const Scenario& scenario, StackConfig base = {});

}  // namespace hsc::sim
