#pragma once

// Periodic interface discovery for live mode.

#include <condition_variable>
#include <functional>
#include <mutex>
#include <stop_token>
#include <thread>
#include <vector>

#include "hsc/sensing.hpp"

namespace hsc::live {

/// IPv4 interfaces that are up and running, classified by name prefix
/// (wl* wlan, ww*/ppp* cellular, everything else ethernet).
std::vector<InterfaceDescriptor> system_interfaces();

class Poller {
 public:
  using Source = std::function<std::vector<InterfaceDescriptor>()>;
  using Sink = std::function<void(const std::vector<InterfaceDescriptor>&)>;

  Poller(double interval_s, Source source, Sink sink);
  ~Poller() { stop(); }

  void start();
  void stop();

 private:
  double interval_s_;
  Source source_;
  Sink sink_;
  std::mutex mu_;
  std::condition_variable_any cv_;
  std::jthread thread_;
};

}  // namespace hsc::live
