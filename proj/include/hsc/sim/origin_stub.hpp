#pragma once

// Simulated web server. Resource content is a pure function of
// (seed, resource id, byte index), so any byte can be checked without
// keeping a copy around.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "hsc/origin.hpp"

namespace hsc::sim {

inline constexpr std::string_view kOriginHost = "http://origin.sim/";

std::string resource_url(std::string_view resource_id);

/// content[i] for the resource generated from (seed, resource_id).
std::byte content_byte(std::uint64_t seed, std::string_view resource_id, ByteCount index);
Bytes generate_content(std::uint64_t seed, std::string_view resource_id, ByteCount size);

/// FNV-1a over the bytes, used as the hash oracle in reports and tests.
std::uint64_t fnv1a(std::span<const std::byte> bytes) noexcept;
std::uint64_t content_hash(std::uint64_t seed, std::string_view resource_id, ByteCount size);

class OriginStub final : public Origin {
 public:
  explicit OriginStub(std::uint64_t seed, bool range_support = true)
      : seed_(seed), range_support_(range_support) {}

  /// Registering the same id twice with different sizes throws.
  void add_resource(const std::string& resource_id, ByteCount size);
  void set_unreachable(bool unreachable) noexcept { unreachable_ = unreachable; }
  /// Queues a break: the next not-yet-broken open of `resource_id` fails
  /// after `bytes` body bytes.
  void fail_after(const std::string& resource_id, ByteCount bytes);

  OriginResponse open(const std::string& url, ByteCount offset) override;

  std::uint64_t seed() const noexcept { return seed_; }
  /// Body bytes handed to readers, per resource and in total.
  ByteCount bytes_served(const std::string& resource_id) const;
  ByteCount bytes_served() const noexcept { return total_served_; }
  std::uint64_t opens() const noexcept { return opens_; }

 private:
  friend class StubBody;
  struct Resource {
    ByteCount size = 0;
    ByteCount served = 0;
    std::deque<ByteCount> fail_after;
  };

  std::uint64_t seed_;
  bool range_support_;
  bool unreachable_ = false;
  std::map<std::string, Resource, std::less<>> resources_;
  ByteCount total_served_ = 0;
  std::uint64_t opens_ = 0;
};

}  // namespace hsc::sim
