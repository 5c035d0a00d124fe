#include "hsc/live/http_origin.hpp"

#include <charconv>
#include <cstring>

#include "hsc/live/socket.hpp"

namespace hsc::live {

namespace {

class SocketBody final : public ByteSource {
 public:
  SocketBody(Socket sock, std::string prefix, std::optional<ByteCount> length)
      : sock_(std::move(sock)), prefix_(std::move(prefix)), left_(length) {}

  std::size_t read(std::span<std::byte> out) override {
    if (out.empty() || (left_ && *left_ == 0)) return 0;
    if (left_ && out.size() > *left_) out = out.first(static_cast<std::size_t>(*left_));
    std::size_t n = 0;
    if (pos_ < prefix_.size()) {
      n = std::min(out.size(), prefix_.size() - pos_);
      std::memcpy(out.data(), prefix_.data() + pos_, n);
      pos_ += n;
    } else {
      try {
        n = sock_.recv_some(out);
      } catch (const std::system_error& e) {
        throw UpstreamError(UpstreamErrc::truncated, e.what());
      }
      if (n == 0 && left_) throw UpstreamError(UpstreamErrc::truncated, "origin closed early");
    }
    if (left_) *left_ -= n;
    return n;
  }

 private:
  Socket sock_;
  std::string prefix_;
  std::size_t pos_ = 0;
  std::optional<ByteCount> left_;
};

std::optional<ByteCount> parse_count(std::string_view v) {
  while (!v.empty() && v.front() == ' ') v.remove_prefix(1);
  ByteCount n = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
  if (ec != std::errc{}) return std::nullopt;
  return n;
}

}  // namespace

OriginResponse HttpOrigin::open(const std::string& url, ByteCount offset) {
  HostPort hp;
  std::string path;
  try {
    hp = host_port(url);
    path = split_url(url).second;
  } catch (const ProtocolError& e) {
    throw UpstreamError(UpstreamErrc::unreachable, e.what());
  }

  Socket sock;
  std::string head;
  std::string rest;
  try {
    sock = connect_tcp(hp.host, hp.port);
    sock.set_timeouts(timeout_s_);
    std::string req = "GET " + path + " HTTP/1.0\r\nHost: " + hp.host + "\r\n";
    if (offset > 0) req += "Range: bytes=" + std::to_string(offset) + "-\r\n";
    req += "\r\n";
    sock.send_all(req);
    head = sock.recv_header_block(rest);
  } catch (const std::exception& e) {
    throw UpstreamError(UpstreamErrc::unreachable, e.what());
  }

  OriginResponse resp;
  const auto eol = head.find("\r\n");
  const std::string_view status_line(head.data(), eol);
  const auto sp = status_line.find(' ');
  if (sp == std::string_view::npos) throw UpstreamError(UpstreamErrc::unreachable, "bad status line");
  resp.status = parse_count(status_line.substr(sp + 1, 3)).value_or(502);

  std::optional<ByteCount> length;
  std::string_view lines(head);
  lines.remove_prefix(eol + 2);
  while (!lines.empty()) {
    const auto e = lines.find("\r\n");
    const auto line = lines.substr(0, e);
    lines.remove_prefix(e == std::string_view::npos ? lines.size() : e + 2);
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    const auto name = line.substr(0, colon);
    auto value = line.substr(colon + 1);
    while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
    if (iequals(name, "Content-Length")) {
      length = parse_count(value);
    } else if (iequals(name, "Content-Range")) {
      // bytes first-last/total
      const auto space = value.find(' ');
      const auto dash = value.find('-');
      const auto slash = value.find('/');
      if (space != std::string_view::npos && dash != std::string_view::npos)
        resp.body_offset = parse_count(value.substr(space + 1, dash - space - 1)).value_or(0);
      if (slash != std::string_view::npos) resp.resource_size = parse_count(value.substr(slash + 1));
    } else if (!iequals(name, "Connection")) {
      resp.headers.emplace_back(std::string(name), std::string(value));
    }
  }
  if (resp.status == 404) throw UpstreamError(UpstreamErrc::not_found, "origin says 404");
  if (resp.status == 416) {
    // Offset at or past the end: nothing left to send.
    resp.status = 200;
    resp.body_offset = offset;
    resp.resource_size = offset;
    length = 0;
  }
  if (resp.status == 200) {
    resp.body_offset = 0;
    resp.resource_size = length;
  }
  resp.body = std::make_unique<SocketBody>(std::move(sock), std::move(rest), length);
  return resp;
}

}  // namespace hsc::live
