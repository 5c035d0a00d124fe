#include "hsc/sim/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace hsc::sim {

namespace {

constexpr std::pair<ActionKind, std::string_view> kActionNames[] = {
    {ActionKind::enable, "enable"},
    {ActionKind::disable, "disable"},
    {ActionKind::ap_power_off, "ap_power_off"},
    {ActionKind::ap_power_on, "ap_power_on"},
    {ActionKind::nic_off, "nic_off"},
    {ActionKind::nic_on, "nic_on"},
    {ActionKind::subnet_handoff, "subnet_handoff"},
};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const auto b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw ScenarioError("line " + std::to_string(line) + ": " + msg);
}

double to_double(std::string_view v, std::size_t line, std::string_view what) {
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    fail(line, "bad number for " + std::string(what) + ": '" + std::string(v) + "'");
  return out;
}

std::uint64_t to_u64(std::string_view v, std::size_t line, std::string_view what) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    fail(line, "bad integer for " + std::string(what) + ": '" + std::string(v) + "'");
  return out;
}

bool to_bool(std::string_view v, std::size_t line, std::string_view what) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  fail(line, "bad boolean for " + std::string(what) + ": '" + std::string(v) + "'");
}

std::map<std::string_view, std::string_view> key_values(
    const std::vector<std::string_view>& ws, std::size_t first, std::size_t line) {
  std::map<std::string_view, std::string_view> kv;
  for (auto i = first; i < ws.size(); ++i) {
    const auto eq = ws[i].find('=');
    if (eq == std::string_view::npos) fail(line, "expected key=value, got '" + std::string(ws[i]) + "'");
    kv[ws[i].substr(0, eq)] = ws[i].substr(eq + 1);
  }
  return kv;
}

std::string_view required(const std::map<std::string_view, std::string_view>& kv,
                          std::string_view key, std::size_t line) {
  const auto it = kv.find(key);
  if (it == kv.end()) fail(line, "missing " + std::string(key) + "=");
  return it->second;
}

void parse_interface(Scenario& sc, const std::vector<std::string_view>& ws, std::size_t line) {
  if (ws.size() < 2) fail(line, "interface needs an id");
  ScenarioInterface si;
  si.desc.id = std::string(ws[1]);
  const auto kv = key_values(ws, 2, line);
  for (const auto& [k, v] : kv) {
    if (k == "kind") {
      const auto kind = parse_interface_kind(v);
      if (!kind) fail(line, "unknown interface kind '" + std::string(v) + "'");
      si.desc.kind = *kind;
    } else if (k == "bandwidth") {
      si.desc.bandwidth_capacity = to_double(v, line, k);
    } else if (k == "cost") {
      si.desc.cost_metric = static_cast<int>(to_u64(v, line, k));
    } else if (k == "latency") {
      si.desc.latency = to_double(v, line, k);
    } else if (k == "available") {
      si.desc.available = to_bool(v, line, k);
    } else if (k == "utilization") {
      si.utilization = to_double(v, line, k);
    } else {
      fail(line, "unknown interface key '" + std::string(k) + "'");
    }
  }
  required(kv, "kind", line);
  required(kv, "bandwidth", line);
  sc.interfaces.push_back(std::move(si));
}

void parse_transfer(Scenario& sc, const std::vector<std::string_view>& ws, std::size_t line) {
  const auto kv = key_values(ws, 1, line);
  TransferSpec t;
  t.resource_id = std::string(required(kv, "resource", line));
  t.size = to_u64(required(kv, "size", line), line, "size");
  if (const auto it = kv.find("start"); it != kv.end()) t.start = to_double(it->second, line, "start");
  for (const auto& [k, v] : kv)
    if (k != "resource" && k != "size" && k != "start")
      fail(line, "unknown transfer key '" + std::string(k) + "'");
  sc.transfers.push_back(std::move(t));
}

void parse_event(Scenario& sc, const std::vector<std::string_view>& ws, std::size_t line) {
  if (ws.size() < 4) fail(line, "event needs a time, an action and an interface");
  TimedAction ta;
  ta.time = to_double(ws[1], line, "event time");
  const auto kind = parse_action_kind(ws[2]);
  if (!kind) fail(line, "unknown action '" + std::string(ws[2]) + "'");
  ta.action.kind = *kind;
  ta.action.iface = std::string(ws[3]);
  if (*kind == ActionKind::subnet_handoff) {
    if (ws.size() != 5) fail(line, "subnet_handoff needs a source and a target interface");
    ta.action.target = std::string(ws[4]);
  } else if (ws.size() != 4) {
    fail(line, "trailing text after event");
  }
  sc.timeline.push_back(std::move(ta));
}

const std::set<std::string, std::less<>> kOverrideKeys = {
    "stack.policy", "stack.recovery", "stack.poll_interval", "stack.workers",
    "stack.retry_budget", "stack.drain_window", "stack.connect_event_latency",
    "stack.disconnect_event_latency", "stack.subnet_handoff_delay", "stack.tick",
    "stack.max_time", "stack.origin_range_support",
    "policy.to_wlan", "policy.to_ethernet", "policy.to_cellular", "policy.cross_subnet",
    "policy.ewma_weight",
};

}  // namespace

const char* to_string(ActionKind kind) noexcept {
  for (const auto& [k, name] : kActionNames)
    if (k == kind) return name.data();
  return "unknown";
}

std::optional<ActionKind> parse_action_kind(std::string_view text) noexcept {
  for (const auto& [k, name] : kActionNames)
    if (name == text) return k;
  return std::nullopt;
}

const ScenarioInterface* Scenario::find_interface(std::string_view id) const {
  const auto it = std::find_if(interfaces.begin(), interfaces.end(),
                               [&](const auto& i) { return i.desc.id == id; });
  return it == interfaces.end() ? nullptr : &*it;
}

Scenario parse_scenario(std::string_view text) {
  Scenario sc;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto ws = words(line);
    if (ws[0] == "interface") {
      parse_interface(sc, ws, line_no);
    } else if (ws[0] == "transfer") {
      parse_transfer(sc, ws, line_no);
    } else if (ws[0] == "event") {
      parse_event(sc, ws, line_no);
    } else {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) fail(line_no, "unrecognized line '" + std::string(line) + "'");
      const auto key = trim(line.substr(0, eq));
      const auto value = trim(line.substr(eq + 1));
      if (key == "name") {
        sc.name = std::string(value);
      } else if (key == "seed") {
        sc.seed = to_u64(value, line_no, "seed");
      } else if (kOverrideKeys.contains(key)) {
        sc.overrides[std::string(key)] = std::string(value);
      } else {
        fail(line_no, "unknown key '" + std::string(key) + "'");
      }
    }
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot open scenario " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  auto sc = parse_scenario(ss.str());
  if (sc.name.empty()) sc.name = path.stem().string();
  return sc;
}

void validate(const Scenario& sc) {
  std::set<std::string, std::less<>> ids;
  for (const auto& i : sc.interfaces) {
    try {
      hsc::validate(i.desc);
    } catch (const std::invalid_argument& e) {
      throw ScenarioError("interface " + i.desc.id + ": " + e.what());
    }
    if (i.desc.latency < 0) throw ScenarioError("interface " + i.desc.id + ": negative latency");
    if (!(i.utilization > 0 && i.utilization <= 1))
      throw ScenarioError("interface " + i.desc.id + ": utilization must be in (0, 1]");
    if (!ids.insert(i.desc.id).second) throw ScenarioError("duplicate interface " + i.desc.id);
  }
  double last = 0;
  for (const auto& ta : sc.timeline) {
    if (ta.time < 0) throw ScenarioError("negative event time");
    if (ta.time < last) throw ScenarioError("timeline is not sorted by time");
    last = ta.time;
    if (!ids.contains(ta.action.iface))
      throw ScenarioError(std::string(to_string(ta.action.kind)) + " references unknown interface " +
                          ta.action.iface);
    if (ta.action.kind == ActionKind::subnet_handoff) {
      if (!ids.contains(ta.action.target))
        throw ScenarioError("subnet_handoff references unknown interface " + ta.action.target);
      if (ta.action.target == ta.action.iface)
        throw ScenarioError("subnet_handoff needs two distinct interfaces");
    }
  }
  std::map<std::string, ByteCount, std::less<>> sizes;
  for (const auto& t : sc.transfers) {
    if (t.start < 0) throw ScenarioError("negative transfer start");
    if (t.resource_id.empty()) throw ScenarioError("transfer without resource");
    const auto [it, inserted] = sizes.emplace(t.resource_id, t.size);
    if (!inserted && it->second != t.size)
      throw ScenarioError("resource " + t.resource_id + " declared with two sizes");
  }
  (void)apply_overrides(sc);
}

StackConfig apply_overrides(const Scenario& sc, StackConfig cfg) {
  for (const auto& [key, value] : sc.overrides) {
    auto num = [&] { return to_double(value, 0, key); };
    auto positive = [&] {
      const double v = num();
      if (!(v > 0)) throw ScenarioError(key + " must be positive");
      return v;
    };
    auto non_negative = [&] {
      const double v = num();
      if (v < 0) throw ScenarioError(key + " must not be negative");
      return v;
    };
    try {
      if (key == "stack.policy") cfg.policy_enabled = to_bool(value, 0, key);
      else if (key == "stack.recovery") {
        if (value == "packet") cfg.recovery = RecoveryMode::packet;
        else if (value == "session") cfg.recovery = RecoveryMode::session;
        else throw ScenarioError("stack.recovery must be packet or session");
      }
      else if (key == "stack.poll_interval") cfg.poll_interval = positive();
      else if (key == "stack.workers") {
        cfg.workers = static_cast<std::size_t>(to_u64(value, 0, key));
        if (cfg.workers == 0) throw ScenarioError("stack.workers must be positive");
      }
      else if (key == "stack.retry_budget") {
        if (value == "unlimited") cfg.retry_budget.reset();
        else cfg.retry_budget = static_cast<unsigned>(to_u64(value, 0, key));
      }
      else if (key == "stack.drain_window") cfg.drain_window = non_negative();
      else if (key == "stack.connect_event_latency") cfg.connect_event_latency = non_negative();
      else if (key == "stack.disconnect_event_latency") cfg.disconnect_event_latency = non_negative();
      else if (key == "stack.subnet_handoff_delay") cfg.subnet_handoff_delay = non_negative();
      else if (key == "stack.tick") cfg.tick = positive();
      else if (key == "stack.max_time") cfg.max_time = positive();
      else if (key == "stack.origin_range_support") cfg.origin_range_support = to_bool(value, 0, key);
      else if (key == "policy.to_wlan") cfg.handoff.to_wlan = non_negative();
      else if (key == "policy.to_ethernet") cfg.handoff.to_ethernet = non_negative();
      else if (key == "policy.to_cellular") cfg.handoff.to_cellular = non_negative();
      else if (key == "policy.cross_subnet") cfg.handoff.cross_subnet = non_negative();
      else if (key == "policy.ewma_weight") {
        cfg.handoff.ewma_weight = num();
        if (!(cfg.handoff.ewma_weight > 0 && cfg.handoff.ewma_weight <= 1))
          throw ScenarioError("policy.ewma_weight must be in (0, 1]");
      }
      else throw ScenarioError("unknown setting " + key);
    } catch (const ScenarioError& e) {
      const std::string what = e.what();
      if (what.starts_with("line 0: ")) throw ScenarioError(what.substr(8));
      throw;
    }
  }
  return cfg;
}

}  // namespace hsc::sim
