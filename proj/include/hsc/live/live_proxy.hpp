#pragma once

// Client-side proxy on a loopback port. Browser connections become local
// legs; a fixed pool of workers runs remote legs against the gateway.

#include <atomic>
#include <list>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "hsc/client_proxy.hpp"
#include "hsc/live/poller.hpp"
#include "hsc/live/socket.hpp"

namespace hsc::live {

struct LiveProxyConfig {
  std::uint16_t port = 0;
  ProxyConfig proxy;
  double poll_interval = 10.0;
  double io_timeout = 30.0;
};

class LiveProxy {
 public:
  /// `source` supplies poll snapshots; defaults to system_interfaces().
  explicit LiveProxy(LiveProxyConfig config, Poller::Source source = {});
  ~LiveProxy() { stop(); }

  std::uint16_t port() const noexcept { return listener_.port(); }
  void start();
  void stop();

  ClientProxy& proxy() noexcept { return proxy_; }

 private:
  void accept_loop();
  void worker(std::stop_token stop);
  void run_remote(const Dispatch& d);

  LiveProxyConfig config_;
  HostPort gateway_;
  ClientProxy proxy_;
  Listener listener_;
  Poller::Source source_;
  Poller poller_;
  std::atomic<bool> stopping_{false};
  std::jthread acceptor_;
  std::vector<std::jthread> workers_;
};

}  // namespace hsc::live
