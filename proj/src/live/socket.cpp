#include "hsc/live/socket.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <charconv>
#include <stdexcept>

namespace hsc::live {

namespace {

[[noreturn]] void throw_errno(const char* what) {
  throw std::system_error(errno, std::generic_category(), what);
}

}  // namespace

Socket::~Socket() { close(); }

Socket::Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = std::exchange(other.fd_, -1);
  }
  return *this;
}

void Socket::close() noexcept {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Socket::shutdown() noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::send_all(std::span<const std::byte> bytes) {
  while (!bytes.empty()) {
    const auto n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("send");
    }
    bytes = bytes.subspan(static_cast<std::size_t>(n));
  }
}

void Socket::send_all(std::string_view text) { send_all(std::as_bytes(std::span(text))); }

std::size_t Socket::recv_some(std::span<std::byte> out) {
  while (true) {
    const auto n = ::recv(fd_, out.data(), out.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno != EINTR) throw_errno("recv");
  }
}

std::string Socket::recv_header_block(std::string& rest, std::size_t limit) {
  std::string buf;
  std::array<std::byte, 4096> chunk{};
  while (true) {
    const auto end = header_block_end(buf);
    if (end != std::string::npos) {
      rest = buf.substr(end);
      buf.resize(end);
      return buf;
    }
    if (buf.size() > limit) throw ProtocolError(ProtocolErrc::malformed_request, "header too large");
    const auto n = recv_some(chunk);
    if (n == 0) throw ProtocolError(ProtocolErrc::malformed_request, "connection closed in header");
    buf.append(reinterpret_cast<const char*>(chunk.data()), n);
  }
}

void Socket::set_timeouts(double seconds) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(seconds);
  tv.tv_usec = static_cast<suseconds_t>((seconds - static_cast<double>(tv.tv_sec)) * 1e6);
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

Socket connect_tcp(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const auto service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0)
    throw std::system_error(EHOSTUNREACH, std::generic_category(),
                            "resolve " + host + ": " + ::gai_strerror(rc));
  Socket s(::socket(res->ai_family, res->ai_socktype, res->ai_protocol));
  if (!s) {
    ::freeaddrinfo(res);
    throw_errno("socket");
  }
  const int rc = ::connect(s.fd(), res->ai_addr, res->ai_addrlen);
  const int err = errno;
  ::freeaddrinfo(res);
  if (rc != 0) throw std::system_error(err, std::generic_category(), "connect " + host);
  const int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return s;
}

Listener::Listener(std::uint16_t port) {
  sock_ = Socket(::socket(AF_INET, SOCK_STREAM, 0));
  if (!sock_) throw_errno("socket");
  const int one = 1;
  ::setsockopt(sock_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::bind(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) throw_errno("bind");
  if (::listen(sock_.fd(), 64) != 0) throw_errno("listen");
  socklen_t len = sizeof addr;
  ::getsockname(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

std::optional<Socket> Listener::accept() {
  while (true) {
    const int fd = ::accept(sock_.fd(), nullptr, nullptr);
    if (fd >= 0) return Socket(fd);
    if (errno == EINTR) continue;
    return std::nullopt;
  }
}

void Listener::close() noexcept {
  sock_.shutdown();
  sock_.close();
}

FailureCause cause_from_errno(int err) noexcept {
  switch (err) {
    case ECONNREFUSED:
    case EHOSTDOWN:
      return FailureCause::host_down;
    case ECONNABORTED:
    case ETIMEDOUT:
    case EAGAIN:
    case EPIPE:
      return FailureCause::conn_aborted;
    case ECONNRESET:
      return FailureCause::conn_reset;
    case ENETDOWN:
      return FailureCause::net_down;
    case ENETUNREACH:
    case EHOSTUNREACH:
      return FailureCause::net_unreachable;
    case ENETRESET:
      return FailureCause::net_reset;
    case EADDRNOTAVAIL:
      return FailureCause::addr_not_available;
    default:
      // Anything else on an established connection is treated as an abort.
      return FailureCause::conn_aborted;
  }
}

HostPort host_port(std::string_view url) {
  if (!url.starts_with("http://")) throw ProtocolError(ProtocolErrc::malformed_request, "not an http URL");
  auto [authority, path] = split_url(url);
  HostPort hp;
  const auto colon = authority.rfind(':');
  if (colon == std::string::npos) {
    hp.host = authority;
    return hp;
  }
  hp.host = authority.substr(0, colon);
  const auto digits = std::string_view(authority).substr(colon + 1);
  const auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), hp.port);
  if (ec != std::errc{} || p != digits.data() + digits.size())
    throw ProtocolError(ProtocolErrc::malformed_request, "bad port in " + std::string(url));
  return hp;
}

}  // namespace hsc::live
