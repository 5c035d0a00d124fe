#include "hsc/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>

namespace hsc {

namespace {

[[noreturn]] void fail(ProtocolErrc code, const std::string& what) {
  throw ProtocolError(code, what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

struct HeaderBlock {
  std::string_view request_line;
  std::vector<std::pair<std::string_view, std::string_view>> headers;
};

HeaderBlock split_header_block(std::string_view raw) {
  const auto end = header_block_end(raw);
  if (end == std::string_view::npos)
    fail(ProtocolErrc::malformed_request, "header block is not terminated");
  std::string_view block = raw.substr(0, end - 4);

  HeaderBlock out;
  bool first = true;
  while (true) {
    const auto eol = block.find("\r\n");
    std::string_view line = block.substr(0, eol);
    if (first) {
      out.request_line = line;
      first = false;
    } else if (!line.empty()) {
      const auto colon = line.find(':');
      if (colon == std::string_view::npos || colon == 0)
        fail(ProtocolErrc::malformed_request,
             "header line without name: " + std::string(line));
      out.headers.emplace_back(trim(line.substr(0, colon)),
                               trim(line.substr(colon + 1)));
    }
    if (eol == std::string_view::npos) break;
    block.remove_prefix(eol + 2);
  }
  if (out.request_line.empty())
    fail(ProtocolErrc::malformed_request, "empty request line");
  return out;
}

struct RequestLine {
  std::string_view method;
  std::string_view target;
  std::string_view version;
};

// The version is everything after the target, so both "HTTP 1.0" and
// "HTTP/1.0" are accepted.
RequestLine split_request_line(std::string_view line) {
  const auto sp1 = line.find(' ');
  if (sp1 == std::string_view::npos)
    fail(ProtocolErrc::malformed_request, "request line has no target");
  const auto sp2 = line.find(' ', sp1 + 1);
  if (sp2 == std::string_view::npos)
    fail(ProtocolErrc::malformed_request, "request line has no version");
  RequestLine r{line.substr(0, sp1), line.substr(sp1 + 1, sp2 - sp1 - 1),
                trim(line.substr(sp2 + 1))};
  if (r.method.empty() || r.target.empty() || !r.version.starts_with("HTTP"))
    fail(ProtocolErrc::malformed_request,
         "malformed request line: " + std::string(line));
  return r;
}

bool is_unreserved(unsigned char c) {
  if (std::isalnum(c)) return true;
  switch (c) {
    case '-': case '.': case '_': case '~': case ':': case '/': case '?':
    case '@': case '!': case '$': case '\'': case '(': case ')': case '*':
    case ',': case ';':
      return true;
    default:
      return false;
  }
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

const char* to_string(ProtocolErrc code) noexcept {
  switch (code) {
    case ProtocolErrc::unsupported_method: return "unsupported-method";
    case ProtocolErrc::malformed_request: return "malformed-request";
    case ProtocolErrc::malformed_offset: return "malformed-offset";
    case ProtocolErrc::gap_detected: return "gap-detected";
  }
  return "unknown";
}

bool iequals(std::string_view a, std::string_view b) noexcept {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

bool is_absolute_url(std::string_view url) noexcept {
  const auto sep = url.find("://");
  if (sep == std::string_view::npos || sep == 0) return false;
  for (char c : url.substr(0, sep))
    if (!std::isalpha(static_cast<unsigned char>(c))) return false;
  const auto host = url.substr(sep + 3);
  return !host.empty() && host.front() != '/';
}

std::pair<std::string, std::string> split_url(std::string_view url) {
  if (!is_absolute_url(url))
    fail(ProtocolErrc::malformed_request, "not an absolute URL: " + std::string(url));
  auto rest = url.substr(url.find("://") + 3);
  const auto slash = rest.find_first_of("/?");
  if (slash == std::string_view::npos) return {std::string(rest), "/"};
  std::string path(rest.substr(slash));
  if (path.front() == '?') path.insert(path.begin(), '/');
  return {std::string(rest.substr(0, slash)), path};
}

std::string percent_encode_query_value(std::string_view raw) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(raw.size());
  for (char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_unreserved(c)) {
      out.push_back(ch);
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

std::string percent_decode(std::string_view encoded) {
  std::string out;
  out.reserve(encoded.size());
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    if (encoded[i] == '%') {
      if (i + 2 >= encoded.size())
        fail(ProtocolErrc::malformed_request, "truncated percent escape");
      const int hi = hex_value(encoded[i + 1]);
      const int lo = hex_value(encoded[i + 2]);
      if (hi < 0 || lo < 0)
        fail(ProtocolErrc::malformed_request, "invalid percent escape");
      out.push_back(static_cast<char>(hi * 16 + lo));
      i += 2;
    } else {
      out.push_back(encoded[i]);
    }
  }
  return out;
}

std::size_t header_block_end(std::string_view data) noexcept {
  const auto pos = data.find("\r\n\r\n");
  return pos == std::string_view::npos ? pos : pos + 4;
}

OriginRequest parse_origin_request(std::string_view raw) {
  const auto block = split_header_block(raw);
  const auto line = split_request_line(block.request_line);
  if (line.method != "GET")
    fail(ProtocolErrc::unsupported_method,
         "only GET is supported, got " + std::string(line.method));
  if (!is_absolute_url(line.target))
    fail(ProtocolErrc::malformed_request,
         "request target must be absolute: " + std::string(line.target));
  OriginRequest req;
  req.method = std::string(line.method);
  req.url = std::string(line.target);
  req.version = std::string(line.version);
  for (const auto& [name, value] : block.headers)
    req.headers.emplace_back(std::string(name), std::string(value));
  return req;
}

std::string serialize(const GatewayRequest& request,
                      std::span<const Header> extra_headers) {
  std::string out;
  out.reserve(128 + request.gateway_base.size() + request.origin_url.size());
  out += "GET ";
  out += request.gateway_base;
  out += "?url=";
  out += percent_encode_query_value(request.origin_url);
  out += ' ';
  out += kWireVersion;
  out += "\r\nUser-Agent: ";
  out += request.agent_tag;
  out += "\r\nSession-Offset: ";
  out += std::to_string(request.session_offset);
  out += "\r\n";
  for (const auto& [name, value] : extra_headers) {
    out += name;
    out += ": ";
    out += value;
    out += "\r\n";
  }
  out += "\r\n";
  return out;
}

std::string rewrite_request(const OriginRequest& origin,
                            std::string_view gateway_base, ByteCount offset) {
  if (origin.method != "GET")
    fail(ProtocolErrc::unsupported_method,
         "only GET is supported, got " + origin.method);
  if (!is_absolute_url(origin.url))
    fail(ProtocolErrc::malformed_request,
         "origin URL must be absolute: " + origin.url);

  GatewayRequest gw;
  gw.gateway_base = std::string(gateway_base);
  gw.origin_url = origin.url;
  gw.session_offset = offset;

  std::vector<Header> extra;
  for (const auto& h : origin.headers) {
    if (iequals(h.first, "User-Agent") || iequals(h.first, "Session-Offset"))
      continue;
    extra.push_back(h);
  }
  return serialize(gw, extra);
}

ParsedGatewayRequest parse_gateway_request(std::string_view raw) {
  const auto block = split_header_block(raw);
  const auto line = split_request_line(block.request_line);
  if (line.method != "GET")
    fail(ProtocolErrc::unsupported_method,
         "only GET is supported, got " + std::string(line.method));

  const auto q = line.target.find('?');
  if (q == std::string_view::npos)
    fail(ProtocolErrc::malformed_request, "missing url= parameter");
  std::string_view query = line.target.substr(q + 1);

  std::optional<std::string> url;
  while (!query.empty()) {
    const auto amp = query.find('&');
    const auto param = query.substr(0, amp);
    if (param.starts_with("url=")) {
      url = percent_decode(param.substr(4));
      break;
    }
    if (amp == std::string_view::npos) break;
    query.remove_prefix(amp + 1);
  }
  if (!url || url->empty())
    fail(ProtocolErrc::malformed_request, "missing url= parameter");

  ParsedGatewayRequest out;
  out.origin_url = std::move(*url);

  for (const auto& [name, value] : block.headers) {
    if (!iequals(name, "Session-Offset")) continue;
    ByteCount v = 0;
    const auto* first = value.data();
    const auto* last = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (value.empty() || ec != std::errc{} || ptr != last)
      fail(ProtocolErrc::malformed_offset,
           "Session-Offset is not a non-negative integer: " + std::string(value));
    out.session_offset = v;
    break;
  }
  return out;
}

std::span<const std::byte> Splicer::append(ByteCount start,
                                           std::span<const std::byte> payload) {
  if (start > end_)
    fail(ProtocolErrc::gap_detected,
         "fragment at " + std::to_string(start) + " leaves a gap after byte " +
             std::to_string(end_));
  const ByteCount frag_end = start + payload.size();
  if (frag_end <= end_) {
    duplicates_ += payload.size();
    return {};
  }
  const ByteCount overlap = end_ - start;
  duplicates_ += overlap;
  auto fresh = payload.subspan(static_cast<std::size_t>(overlap));
  end_ = frag_end;
  if (retain_) {
    const auto old = content_.size();
    content_.insert(content_.end(), fresh.begin(), fresh.end());
    return std::span<const std::byte>(content_).subspan(old);
  }
  return fresh;
}

SplicedStream Splicer::release() && {
  return SplicedStream{end_, std::move(content_)};
}

SplicedStream splice(std::span<const Fragment> fragments) {
  Splicer splicer;
  for (std::size_t i = 0; i < fragments.size(); ++i) {
    const auto& f = fragments[i];
    if (f.payload.empty())
      fail(ProtocolErrc::malformed_request, "empty fragment payload");
    if (i == 0 && f.start_offset != 0)
      fail(ProtocolErrc::gap_detected, "first fragment does not start at 0");
    if (i > 0 && f.start_offset < fragments[i - 1].start_offset)
      fail(ProtocolErrc::malformed_request, "fragments are not sorted");
    splicer.append(f);
  }
  return std::move(splicer).release();
}

Bytes to_bytes(std::string_view text) {
  Bytes out(text.size());
  std::transform(text.begin(), text.end(), out.begin(),
                 [](char c) { return static_cast<std::byte>(c); });
  return out;
}

std::string to_string(std::span<const std::byte> bytes) {
  std::string out(bytes.size(), '\0');
  std::transform(bytes.begin(), bytes.end(), out.begin(),
                 [](std::byte b) { return static_cast<char>(b); });
  return out;
}

}  // namespace hsc
