#pragma once

// Origin-side abstractions shared by the gateway, the simulated origin stub
// and the live HTTP origin client.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsc/protocol.hpp"

namespace hsc {

enum class UpstreamErrc { unreachable, not_found, truncated };

class UpstreamError : public std::runtime_error {
 public:
  UpstreamError(UpstreamErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  UpstreamErrc code() const noexcept { return code_; }

 private:
  UpstreamErrc code_;
};

/// Pull-based byte stream. read() returns 0 only at end of stream.
class ByteSource {
 public:
  virtual ~ByteSource() = default;
  virtual std::size_t read(std::span<std::byte> out) = 0;
};

class MemorySource final : public ByteSource {
 public:
  explicit MemorySource(Bytes data) : data_(std::move(data)) {}
  std::size_t read(std::span<std::byte> out) override;

 private:
  Bytes data_;
  std::size_t pos_ = 0;
};

struct OriginResponse {
  int status = 200;
  std::vector<Header> headers;  // excluding Content-Length
  /// Full size of the resource when known.
  std::optional<ByteCount> resource_size;
  /// Resource position of the first body byte; equals the requested offset
  /// when the origin honored it, 0 otherwise.
  ByteCount body_offset = 0;
  std::unique_ptr<ByteSource> body;
};

class Origin {
 public:
  virtual ~Origin() = default;
  /// `offset` is a hint; origins without range support return from 0.
  /// Throws UpstreamError when the origin cannot be reached.
  virtual OriginResponse open(const std::string& url, ByteCount offset) = 0;
};

}  // namespace hsc
