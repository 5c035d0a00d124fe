#include "hsc/gateway.hpp"

#include <algorithm>
#include <array>

namespace hsc {

std::size_t MemorySource::read(std::span<std::byte> out) {
  const std::size_t n = std::min(out.size(), data_.size() - pos_);
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(pos_), n, out.begin());
  pos_ += n;
  return n;
}

GatewayStatsSnapshot GatewayStats::snapshot() const {
  return {dispatches.load(), bytes_relayed.load(), bytes_skipped.load(),
          upstream_errors.load(), bad_requests.load()};
}

std::string status_reason(int status) {
  switch (status) {
    case 200: return "OK";
    case 206: return "Partial Content";
    case 400: return "Bad Request";
    case 404: return "Not Found";
    case 416: return "Range Not Satisfiable";
    case 502: return "Bad Gateway";
    default: return "Status";
  }
}

namespace {

class SkippingSource final : public ByteSource {
 public:
  SkippingSource(std::unique_ptr<ByteSource> inner, ByteCount skip,
                 std::atomic<std::uint64_t>* counter)
      : inner_(std::move(inner)), skip_(skip), counter_(counter) {}

  std::size_t read(std::span<std::byte> out) override {
    std::array<std::byte, 16384> scratch{};
    while (skip_ > 0) {
      const auto want = static_cast<std::size_t>(
          std::min<ByteCount>(skip_, scratch.size()));
      const auto got = inner_->read(std::span(scratch).first(want));
      if (got == 0) {
        skip_ = 0;
        return 0;
      }
      skip_ -= got;
      if (counter_) *counter_ += got;
    }
    return inner_->read(out);
  }

 private:
  std::unique_ptr<ByteSource> inner_;
  ByteCount skip_;
  std::atomic<std::uint64_t>* counter_;
};

class EmptySource final : public ByteSource {
 public:
  std::size_t read(std::span<std::byte>) override { return 0; }
};

}  // namespace

OffsetFetch fetch_at_offset(Origin& origin, const std::string& url,
                            ByteCount begin_offset,
                            std::atomic<std::uint64_t>* skipped_counter) {
  OffsetFetch out;
  out.begin_offset = begin_offset;
  out.response = origin.open(url, begin_offset);
  auto& resp = out.response;

  const auto size = resp.resource_size;
  if (size && begin_offset >= *size) {
    out.stream = std::make_unique<EmptySource>();
    out.remaining = 0;
    return out;
  }
  if (!resp.body) resp.body = std::make_unique<EmptySource>();
  if (resp.body_offset > begin_offset)
    throw UpstreamError(UpstreamErrc::truncated,
                        "origin started past the requested offset");
  if (resp.body_offset < begin_offset) {
    out.stream = std::make_unique<SkippingSource>(
        std::move(resp.body), begin_offset - resp.body_offset, skipped_counter);
  } else {
    out.stream = std::move(resp.body);
  }
  if (size) out.remaining = *size - begin_offset;
  return out;
}

RelayStream::~RelayStream() {
  if (owner_) owner_->close_record(request_id_, body_relayed_);
}

std::size_t RelayStream::read(std::span<std::byte> out) {
  if (out.empty()) return 0;
  if (header_pos_ < header_.size()) {
    const auto n = std::min(out.size(), header_.size() - header_pos_);
    std::transform(header_.begin() + static_cast<std::ptrdiff_t>(header_pos_),
                   header_.begin() + static_cast<std::ptrdiff_t>(header_pos_ + n),
                   out.begin(), [](char c) { return static_cast<std::byte>(c); });
    header_pos_ += n;
    return n;
  }
  if (!body_) return 0;
  std::size_t n = 0;
  try {
    n = body_->read(out);
  } catch (const UpstreamError&) {
    if (owner_) ++owner_->stats_.upstream_errors;
    throw;
  }
  body_relayed_ += n;
  if (owner_) owner_->stats_.bytes_relayed += n;
  return n;
}

Gateway::Gateway(Origin& origin, GatewayConfig config)
    : origin_(origin), config_(std::move(config)) {}

std::unique_ptr<RelayStream> Gateway::error_response(int status, std::string_view reason) {
  auto s = std::make_unique<RelayStream>();
  s->status_ = status;
  std::string body(reason);
  s->header_ = "HTTP/1.0 " + std::to_string(status) + " " + status_reason(status) +
               "\r\nContent-Length: " + std::to_string(body.size()) + "\r\n\r\n" + body;
  return s;
}

OffsetFetch Gateway::fetch_at_offset(const std::string& url, ByteCount begin_offset) {
  return hsc::fetch_at_offset(origin_, url, begin_offset, &stats_.bytes_skipped);
}

std::unique_ptr<RelayStream> Gateway::dispatch(std::string_view raw_request) {
  ++stats_.dispatches;
  ParsedGatewayRequest req;
  try {
    req = parse_gateway_request(raw_request);
  } catch (const ProtocolError& e) {
    ++stats_.bad_requests;
    return error_response(400, e.what());
  }

  OffsetFetch fetch;
  try {
    fetch = fetch_at_offset(req.origin_url, req.session_offset);
  } catch (const UpstreamError& e) {
    ++stats_.upstream_errors;
    return error_response(e.code() == UpstreamErrc::not_found ? 404 : 502, e.what());
  }

  const int origin_status = fetch.response.status;
  if (origin_status >= 400) {
    ++stats_.upstream_errors;
    return error_response(origin_status, "origin error");
  }

  // A resumed transfer is reported as 200 with the length of what is
  // actually relayed.
  auto s = std::make_unique<RelayStream>();
  s->status_ = 200;
  std::string header = "HTTP/1.0 200 OK\r\n";
  for (const auto& [name, value] : fetch.response.headers) {
    if (iequals(name, "Content-Length") || iequals(name, "Content-Range") ||
        iequals(name, "Transfer-Encoding"))
      continue;
    header += name + ": " + value + "\r\n";
  }
  if (fetch.remaining) header += "Content-Length: " + std::to_string(*fetch.remaining) + "\r\n";
  header += "\r\n";
  s->header_ = std::move(header);
  s->body_ = std::move(fetch.stream);
  s->owner_ = this;
  s->request_id_ = next_id_++;

  std::lock_guard lock(records_mu_);
  records_.push_back({s->request_id_, req.origin_url, req.session_offset, 0, 200});
  while (records_.size() > config_.max_records) records_.pop_front();
  return s;
}

void Gateway::close_record(std::uint64_t request_id, ByteCount relayed) {
  std::lock_guard lock(records_mu_);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->request_id == request_id) {
      it->bytes_relayed = relayed;
      return;
    }
  }
}

std::vector<DispatchRecord> Gateway::records() const {
  std::lock_guard lock(records_mu_);
  return {records_.begin(), records_.end()};
}

}  // namespace hsc
