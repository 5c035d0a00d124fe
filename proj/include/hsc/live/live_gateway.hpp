#pragma once

// Gateway served over loopback TCP, one thread per connection.

#include <atomic>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "hsc/gateway.hpp"
#include "hsc/live/socket.hpp"

namespace hsc::live {

class LiveGateway {
 public:
  LiveGateway(Origin& origin, std::uint16_t port = 0, GatewayConfig config = {});
  ~LiveGateway() { stop(); }

  std::uint16_t port() const noexcept { return listener_.port(); }
  void start();
  void stop();

  /// Fault hook: the next relayed response is reset after at least
  /// `body_bytes` body bytes.
  void drop_next_after(ByteCount body_bytes) { drop_after_ = static_cast<std::int64_t>(body_bytes); }

  const Gateway& gateway() const noexcept { return gateway_; }

 private:
  struct Handler {
    std::shared_ptr<std::atomic<bool>> done;
    std::jthread thread;
  };

  void serve(std::uint64_t conn, Socket sock);

  Gateway gateway_;
  Listener listener_;
  std::atomic<std::int64_t> drop_after_{-1};
  std::atomic<bool> stopping_{false};
  std::jthread acceptor_;
  std::mutex mu_;
  std::map<std::uint64_t, int> open_fds_;
  std::list<Handler> handlers_;
};

}  // namespace hsc::live
