#include "hsc/live/live_gateway.hpp"

#include <sys/socket.h>

#include <array>

namespace hsc::live {

namespace {

void reset_connection(Socket& sock) {
  linger lg{1, 0};
  ::setsockopt(sock.fd(), SOL_SOCKET, SO_LINGER, &lg, sizeof lg);
  sock.close();
}

}  // namespace

LiveGateway::LiveGateway(Origin& origin, std::uint16_t port, GatewayConfig config)
    : gateway_(origin, std::move(config)), listener_(port) {}

void LiveGateway::start() {
  acceptor_ = std::jthread([this] {
    std::uint64_t next = 1;
    while (auto sock = listener_.accept()) {
      if (stopping_) break;
      std::lock_guard lock(mu_);
      handlers_.remove_if([](const Handler& h) { return h.done->load(); });
      const auto id = next++;
      open_fds_[id] = sock->fd();
      auto done = std::make_shared<std::atomic<bool>>(false);
      handlers_.push_back({done, std::jthread([this, id, done, s = std::move(*sock)]() mutable {
                             serve(id, std::move(s));
                             *done = true;
                           })});
    }
  });
}

void LiveGateway::stop() {
  if (stopping_.exchange(true)) return;
  listener_.close();
  if (acceptor_.joinable()) acceptor_.join();
  std::list<Handler> handlers;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, fd] : open_fds_) ::shutdown(fd, SHUT_RDWR);
    handlers = std::move(handlers_);
  }
  handlers.clear();
}

void LiveGateway::serve(std::uint64_t conn, Socket sock) {
  try {
    sock.set_timeouts(30.0);
    std::string rest;
    const auto head = sock.recv_header_block(rest);
    auto relay = gateway_.dispatch(head);
    const auto drop = drop_after_.exchange(-1);
    std::array<std::byte, 16384> buf{};
    while (true) {
      std::size_t n = 0;
      try {
        n = relay->read(buf);
      } catch (const UpstreamError&) {
        reset_connection(sock);
        break;
      }
      if (n == 0) break;
      sock.send_all(std::span(buf).first(n));
      if (drop >= 0 && relay->body_bytes_relayed() >= static_cast<ByteCount>(drop)) {
        reset_connection(sock);
        break;
      }
    }
  } catch (const std::exception&) {
    // Requester went away or sent garbage; nothing to report to.
  }
  std::lock_guard lock(mu_);
  open_fds_.erase(conn);
}

}  // namespace hsc::live
