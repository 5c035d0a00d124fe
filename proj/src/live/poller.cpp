#include "hsc/live/poller.hpp"

#include <ifaddrs.h>
#include <net/if.h>
#include <netinet/in.h>

#include <algorithm>
#include <chrono>
#include <string_view>

namespace hsc::live {

std::vector<InterfaceDescriptor> system_interfaces() {
  std::vector<InterfaceDescriptor> out;
  ifaddrs* list = nullptr;
  if (::getifaddrs(&list) != 0) return out;
  for (auto* a = list; a; a = a->ifa_next) {
    if (!a->ifa_addr || a->ifa_addr->sa_family != AF_INET) continue;
    if (!(a->ifa_flags & IFF_UP) || !(a->ifa_flags & IFF_RUNNING)) continue;
    const std::string_view name(a->ifa_name);
    if (std::any_of(out.begin(), out.end(), [&](const auto& d) { return d.id == name; })) continue;
    InterfaceDescriptor d;
    d.id = std::string(name);
    if (name.starts_with("wl")) {
      d.kind = InterfaceKind::wlan;
      d.bandwidth_capacity = 11e6;
      d.cost_metric = 2;
    } else if (name.starts_with("ww") || name.starts_with("ppp")) {
      d.kind = InterfaceKind::cellular;
      d.bandwidth_capacity = 144e3;
      d.cost_metric = 5;
    } else {
      d.kind = InterfaceKind::ethernet;
      d.bandwidth_capacity = 100e6;
      d.cost_metric = 1;
    }
    out.push_back(std::move(d));
  }
  ::freeifaddrs(list);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

Poller::Poller(double interval_s, Source source, Sink sink)
    : interval_s_(interval_s), source_(std::move(source)), sink_(std::move(sink)) {}

void Poller::start() {
  thread_ = std::jthread([this](std::stop_token stop) {
    const auto period = std::chrono::duration<double>(interval_s_);
    while (!stop.stop_requested()) {
      {
        std::unique_lock lock(mu_);
        if (cv_.wait_for(lock, stop, period, [] { return false; })) break;
      }
      if (stop.stop_requested()) break;
      sink_(source_());
    }
  });
}

void Poller::stop() {
  if (thread_.joinable()) {
    thread_.request_stop();
    thread_.join();
  }
}

}  // namespace hsc::live
