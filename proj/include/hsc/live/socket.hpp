#pragma once

// Minimal RAII wrapper over blocking POSIX TCP sockets.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <system_error>

#include "hsc/protocol.hpp"
#include "hsc/sensing.hpp"

namespace hsc::live {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) noexcept : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept;
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const noexcept { return fd_; }
  explicit operator bool() const noexcept { return fd_ >= 0; }
  void close() noexcept;
  /// Unblocks readers on other threads.
  void shutdown() noexcept;

  /// Throws std::system_error.
  void send_all(std::span<const std::byte> bytes);
  void send_all(std::string_view text);
  /// 0 on orderly close; throws std::system_error on errors.
  std::size_t recv_some(std::span<std::byte> out);
  /// Reads up to and including the blank line ending a header block; any
  /// bytes read past it are returned in `rest`.
  std::string recv_header_block(std::string& rest, std::size_t limit = 64 * 1024);

  void set_timeouts(double seconds);

 private:
  int fd_ = -1;
};

/// Connects to host:port (IPv4 literal or name).
Socket connect_tcp(const std::string& host, std::uint16_t port);

class Listener {
 public:
  /// Binds 127.0.0.1:port; port 0 picks a free one.
  explicit Listener(std::uint16_t port);
  std::uint16_t port() const noexcept { return port_; }
  /// Returns nullopt once close() was called.
  std::optional<Socket> accept();
  void close() noexcept;

 private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

/// errno value of a failed socket call to the transport error taxonomy.
FailureCause cause_from_errno(int err) noexcept;

struct HostPort {
  std::string host;
  std::uint16_t port = 80;
};

/// Host and port of an absolute http:// URL.
HostPort host_port(std::string_view url);

}  // namespace hsc::live
