#pragma once

// Information gateway: accepts rewritten proxy requests, fetches the origin
// resource from the requested offset and relays the remainder.
//
// Correctness is stateless: the offset travels in every request, so any
// dispatch can be served without memory of earlier ones. Dispatch records
// and counters exist for observability only.

#include <atomic>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "hsc/origin.hpp"
#include "hsc/protocol.hpp"

namespace hsc {

class Gateway;

struct GatewayConfig {
  std::string dispatcher_path{kDefaultDispatcherPath};
  std::size_t max_records = 4096;
};

struct DispatchRecord {
  std::uint64_t request_id = 0;
  std::string origin_url;
  ByteCount begin_offset = 0;
  ByteCount bytes_relayed = 0;
  int status = 0;
};

struct GatewayStatsSnapshot {
  std::uint64_t dispatches = 0;
  std::uint64_t bytes_relayed = 0;
  std::uint64_t bytes_skipped = 0;
  std::uint64_t upstream_errors = 0;
  std::uint64_t bad_requests = 0;
};

struct GatewayStats {
  std::atomic<std::uint64_t> dispatches{0};
  std::atomic<std::uint64_t> bytes_relayed{0};
  std::atomic<std::uint64_t> bytes_skipped{0};
  std::atomic<std::uint64_t> upstream_errors{0};
  std::atomic<std::uint64_t> bad_requests{0};

  GatewayStatsSnapshot snapshot() const;
};

/// Origin bytes [begin_offset, size). Uses the origin's range capability
/// when it was honored, otherwise reads and discards the prefix. Skipped
/// bytes are added to `skipped_counter` when given.
struct OffsetFetch {
  OriginResponse response;
  std::unique_ptr<ByteSource> stream;
  ByteCount begin_offset = 0;
  /// Bytes the stream will yield, when the resource size is known.
  std::optional<ByteCount> remaining;
};

OffsetFetch fetch_at_offset(Origin& origin, const std::string& url,
                            ByteCount begin_offset,
                            std::atomic<std::uint64_t>* skipped_counter = nullptr);

/// Response stream of one dispatch: status line and headers, then body.
/// An origin failure mid-body surfaces as UpstreamError(truncated) from
/// read(); the transport must then drop the connection without a clean end.
class RelayStream final : public ByteSource {
 public:
  ~RelayStream() override;
  std::size_t read(std::span<std::byte> out) override;

  int status() const noexcept { return status_; }
  const std::string& header_text() const noexcept { return header_; }
  ByteCount body_bytes_relayed() const noexcept { return body_relayed_; }

 private:
  friend class Gateway;
  int status_ = 200;
  std::string header_;
  std::size_t header_pos_ = 0;
  std::unique_ptr<ByteSource> body_;
  ByteCount body_relayed_ = 0;
  Gateway* owner_ = nullptr;
  std::uint64_t request_id_ = 0;
};

class Gateway {
 public:
  explicit Gateway(Origin& origin, GatewayConfig config = {});

  /// Never throws for bad input or upstream failure at open time; those
  /// produce 400 / 502 responses.
  std::unique_ptr<RelayStream> dispatch(std::string_view raw_request);

  OffsetFetch fetch_at_offset(const std::string& url, ByteCount begin_offset);

  const GatewayConfig& config() const noexcept { return config_; }
  GatewayStatsSnapshot stats() const { return stats_.snapshot(); }
  std::vector<DispatchRecord> records() const;

 private:
  friend class RelayStream;
  std::unique_ptr<RelayStream> error_response(int status, std::string_view reason);
  void close_record(std::uint64_t request_id, ByteCount relayed);

  Origin& origin_;
  GatewayConfig config_;
  GatewayStats stats_;
  mutable std::mutex records_mu_;
  std::deque<DispatchRecord> records_;
  std::atomic<std::uint64_t> next_id_{1};
};

std::string status_reason(int status);

}  // namespace hsc
