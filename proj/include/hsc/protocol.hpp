#pragma once

// Resume protocol spoken between the client-side proxy and the gateway.
//
// The proxy rewrites every browser request into a gateway request that
// carries the origin URL as a query parameter plus the number of entity
// bytes already delivered to the local connection:
//
//   GET http://gw/scripts/dis.dll?url=http://www.cnn.com/draft.ppt HTTP 1.0\r\n
//   User-Agent: Proxy/2.0\r\n
//   Session-Offset: 203223\r\n
//   \r\n
//
// Fragments received over successive remote connections are spliced back
// into one contiguous entity body.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hsc {

using Bytes = std::vector<std::byte>;
using ByteCount = std::uint64_t;

enum class ProtocolErrc {
  unsupported_method,
  malformed_request,
  malformed_offset,
  gap_detected,
};

const char* to_string(ProtocolErrc code) noexcept;

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(ProtocolErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ProtocolErrc code() const noexcept { return code_; }

 private:
  ProtocolErrc code_;
};

using Header = std::pair<std::string, std::string>;

/// Request as issued by the browser to the local proxy.
struct OriginRequest {
  std::string method = "GET";
  std::string url;
  std::string version = "HTTP/1.0";
  std::vector<Header> headers;

  friend bool operator==(const OriginRequest&, const OriginRequest&) = default;
};

struct GatewayRequest {
  std::string gateway_base;
  std::string origin_url;
  ByteCount session_offset = 0;
  std::string agent_tag = "Proxy/2.0";
};

struct ParsedGatewayRequest {
  std::string origin_url;
  ByteCount session_offset = 0;

  friend bool operator==(const ParsedGatewayRequest&,
                         const ParsedGatewayRequest&) = default;
};

inline constexpr std::string_view kAgentTag = "Proxy/2.0";
inline constexpr std::string_view kWireVersion = "HTTP 1.0";
inline constexpr std::string_view kDefaultDispatcherPath = "/scripts/dis.dll";

/// Absolute means scheme "://" host, with an optional path.
bool is_absolute_url(std::string_view url) noexcept;

/// Splits an absolute URL into (host[:port], path-and-query). Path defaults
/// to "/". Throws malformed_request on relative URLs.
std::pair<std::string, std::string> split_url(std::string_view url);

std::string percent_encode_query_value(std::string_view raw);
std::string percent_decode(std::string_view encoded);

bool iequals(std::string_view a, std::string_view b) noexcept;

/// Parses a browser request header block (request line + headers, ending
/// in an empty line).
OriginRequest parse_origin_request(std::string_view raw);

/// Serializes the gateway request. Origin headers other than User-Agent and
/// Session-Offset follow the two protocol headers in their original order.
std::string rewrite_request(const OriginRequest& origin,
                            std::string_view gateway_base, ByteCount offset);

std::string serialize(const GatewayRequest& request,
                      std::span<const Header> extra_headers = {});

ParsedGatewayRequest parse_gateway_request(std::string_view raw);

/// Position of the byte just past the "\r\n\r\n" terminator, or npos.
std::size_t header_block_end(std::string_view data) noexcept;

struct Fragment {
  ByteCount start_offset = 0;
  Bytes payload;
  std::string source_interface;

  ByteCount end_offset() const noexcept { return start_offset + payload.size(); }
};

struct SplicedStream {
  ByteCount total_bytes = 0;
  Bytes content;
};

/// Incremental splicer. Bytes already held win over re-sent bytes; a
/// fragment that starts past the current end is a gap and is rejected
/// without modifying state.
class Splicer {
 public:
  /// With retain_content == false only positions are tracked; the appended
  /// suffix is still returned but not kept.
  explicit Splicer(bool retain_content = true) : retain_(retain_content) {}

  /// Returns the newly appended suffix (empty if the fragment was entirely
  /// duplicate).
  std::span<const std::byte> append(ByteCount start,
                                    std::span<const std::byte> payload);
  std::span<const std::byte> append(const Fragment& fragment) {
    return append(fragment.start_offset, fragment.payload);
  }

  ByteCount size() const noexcept { return end_; }
  ByteCount duplicate_bytes() const noexcept { return duplicates_; }
  const Bytes& content() const noexcept { return content_; }
  SplicedStream release() &&;

 private:
  bool retain_;
  ByteCount end_ = 0;
  Bytes content_;
  ByteCount duplicates_ = 0;
};

/// Pieces an ordered list of fragments into one stream.
SplicedStream splice(std::span<const Fragment> fragments);

Bytes to_bytes(std::string_view text);
std::string to_string(std::span<const std::byte> bytes);

}  // namespace hsc
