#include "hsc/sim/origin_stub.hpp"

#include <algorithm>

namespace hsc::sim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t id_hash(std::string_view id) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : id) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t block_word(std::uint64_t key, ByteCount block) noexcept {
  return splitmix64(key ^ splitmix64(block));
}

void fill(std::uint64_t key, ByteCount from, std::span<std::byte> out) {
  ByteCount i = from;
  std::size_t k = 0;
  while (k < out.size()) {
    const std::uint64_t w = block_word(key, i / 8);
    for (auto b = i % 8; b < 8 && k < out.size(); ++b, ++i, ++k)
      out[k] = static_cast<std::byte>((w >> (8 * b)) & 0xff);
  }
}

}  // namespace

std::string resource_url(std::string_view resource_id) {
  return std::string(kOriginHost) + std::string(resource_id);
}

std::byte content_byte(std::uint64_t seed, std::string_view resource_id, ByteCount index) {
  const std::uint64_t w = block_word(seed ^ id_hash(resource_id), index / 8);
  return static_cast<std::byte>((w >> (8 * (index % 8))) & 0xff);
}

Bytes generate_content(std::uint64_t seed, std::string_view resource_id, ByteCount size) {
  Bytes out(static_cast<std::size_t>(size));
  fill(seed ^ id_hash(resource_id), 0, out);
  return out;
}

std::uint64_t fnv1a(std::span<const std::byte> bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto b : bytes) {
    h ^= static_cast<std::uint8_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t content_hash(std::uint64_t seed, std::string_view resource_id, ByteCount size) {
  return fnv1a(generate_content(seed, resource_id, size));
}

class StubBody final : public ByteSource {
 public:
  StubBody(OriginStub& owner, std::string id, std::uint64_t key, ByteCount pos, ByteCount size,
           std::optional<ByteCount> break_at)
      : owner_(owner), id_(std::move(id)), key_(key), pos_(pos), size_(size), break_at_(break_at) {}

  std::size_t read(std::span<std::byte> out) override {
    ByteCount limit = size_;
    if (break_at_) limit = std::min(limit, *break_at_);
    if (pos_ >= limit) {
      if (break_at_ && pos_ < size_)
        throw UpstreamError(UpstreamErrc::truncated, "origin connection lost");
      return 0;
    }
    const auto n = static_cast<std::size_t>(std::min<ByteCount>(out.size(), limit - pos_));
    fill(key_, pos_, out.first(n));
    pos_ += n;
    owner_.resources_.find(id_)->second.served += n;
    owner_.total_served_ += n;
    return n;
  }

 private:
  OriginStub& owner_;
  std::string id_;
  std::uint64_t key_;
  ByteCount pos_;
  ByteCount size_;
  std::optional<ByteCount> break_at_;
};

void OriginStub::add_resource(const std::string& resource_id, ByteCount size) {
  const auto [it, inserted] = resources_.try_emplace(resource_id, Resource{size, 0, {}});
  if (!inserted && it->second.size != size)
    throw std::invalid_argument("resource " + resource_id + " registered with two sizes");
}

void OriginStub::fail_after(const std::string& resource_id, ByteCount bytes) {
  const auto it = resources_.find(resource_id);
  if (it == resources_.end()) throw std::invalid_argument("unknown resource " + resource_id);
  it->second.fail_after.push_back(bytes);
}

OriginResponse OriginStub::open(const std::string& url, ByteCount offset) {
  ++opens_;
  if (unreachable_) throw UpstreamError(UpstreamErrc::unreachable, "origin unreachable");
  if (!url.starts_with(kOriginHost)) throw UpstreamError(UpstreamErrc::unreachable, "unknown host");
  const std::string id = url.substr(kOriginHost.size());
  const auto it = resources_.find(id);
  if (it == resources_.end()) throw UpstreamError(UpstreamErrc::not_found, "no resource " + id);

  auto& res = it->second;
  OriginResponse resp;
  resp.headers = {{"Content-Type", "application/octet-stream"}};
  resp.resource_size = res.size;
  const ByteCount start = range_support_ ? std::min(offset, res.size) : 0;
  resp.status = start > 0 ? 206 : 200;
  resp.body_offset = start;
  std::optional<ByteCount> break_at;
  if (!res.fail_after.empty()) {
    break_at = start + res.fail_after.front();
    res.fail_after.pop_front();
  }
  resp.body = std::make_unique<StubBody>(*this, id, seed_ ^ id_hash(id), start, res.size, break_at);
  return resp;
}

ByteCount OriginStub::bytes_served(const std::string& resource_id) const {
  const auto it = resources_.find(resource_id);
  return it == resources_.end() ? 0 : it->second.served;
}

}  // namespace hsc::sim
