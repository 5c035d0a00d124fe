#include <gtest/gtest.h>

#include <array>
#include <map>
#include <random>
#include <thread>

#include "hsc/gateway.hpp"

using namespace hsc;

namespace {

Bytes pattern(std::size_t n, std::uint32_t seed) {
  std::mt19937 rng(seed);
  Bytes b(n);
  for (auto& x : b) x = static_cast<std::byte>(rng() & 0xff);
  return b;
}

// Map-backed origin. Optional range support and an optional cut after a
// number of body bytes on the next open.
class TestOrigin final : public Origin {
 public:
  explicit TestOrigin(bool ranges = true) : ranges_(ranges) {}

  void put(const std::string& url, Bytes data) { data_[url] = std::move(data); }
  void cut_next_after(ByteCount n) { cut_ = n; }
  void set_unreachable(bool v) { unreachable_ = v; }
  int opens() const { return opens_; }

  OriginResponse open(const std::string& url, ByteCount offset) override {
    ++opens_;
    if (unreachable_) throw UpstreamError(UpstreamErrc::unreachable, "down");
    const auto it = data_.find(url);
    if (it == data_.end()) throw UpstreamError(UpstreamErrc::not_found, url);
    const auto& all = it->second;
    const ByteCount from = ranges_ ? std::min<ByteCount>(offset, all.size()) : 0;
    OriginResponse r;
    r.status = ranges_ && offset > 0 ? 206 : 200;
    r.headers = {{"Content-Type", "application/octet-stream"}};
    r.resource_size = all.size();
    r.body_offset = from;
    Bytes body(all.begin() + static_cast<std::ptrdiff_t>(from), all.end());
    if (cut_) {
      r.body = std::make_unique<Cut>(std::move(body), *cut_);
      cut_.reset();
    } else {
      r.body = std::make_unique<MemorySource>(std::move(body));
    }
    return r;
  }

 private:
  class Cut final : public ByteSource {
   public:
    Cut(Bytes b, ByteCount at) : b_(std::move(b)), at_(at) {}
    std::size_t read(std::span<std::byte> out) override {
      if (pos_ >= at_) throw UpstreamError(UpstreamErrc::truncated, "cut");
      const auto n = std::min<std::size_t>({out.size(), b_.size() - pos_,
                                            static_cast<std::size_t>(at_ - pos_)});
      std::copy_n(b_.begin() + static_cast<std::ptrdiff_t>(pos_), n, out.begin());
      pos_ += n;
      return n;
    }

   private:
    Bytes b_;
    ByteCount at_;
    std::size_t pos_ = 0;
  };

  bool ranges_;
  std::map<std::string, Bytes> data_;
  std::optional<ByteCount> cut_;
  bool unreachable_ = false;
  int opens_ = 0;
};

Bytes drain(ByteSource& s, std::size_t chunk = 3000) {
  Bytes out;
  std::vector<std::byte> buf(chunk);
  while (const auto n = s.read(buf)) out.insert(out.end(), buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

struct Response {
  std::string head;
  Bytes body;
};

Response split_response(const Bytes& raw) {
  const auto text = to_string(raw);
  const auto end = header_block_end(text);
  EXPECT_NE(end, std::string::npos);
  return {text.substr(0, end), Bytes(raw.begin() + static_cast<std::ptrdiff_t>(end), raw.end())};
}

std::string request_for(const std::string& url, ByteCount offset) {
  OriginRequest o;
  o.url = url;
  return rewrite_request(o, "http://gw.test/scripts/dis.dll", offset);
}

const std::string kUrl = "http://origin.test/draft.ppt";

}  // namespace

TEST(Gateway, FreshRequestRelaysEverything) {
  TestOrigin origin;
  const auto data = pattern(500000, 1);
  origin.put(kUrl, data);
  Gateway gw(origin);
  auto relay = gw.dispatch(request_for(kUrl, 0));
  EXPECT_EQ(relay->status(), 200);
  const auto r = split_response(drain(*relay));
  EXPECT_TRUE(r.head.starts_with("HTTP/1.0 200 OK\r\n"));
  EXPECT_NE(r.head.find("Content-Length: 500000\r\n"), std::string::npos);
  EXPECT_NE(r.head.find("Content-Type: application/octet-stream\r\n"), std::string::npos);
  EXPECT_EQ(r.body, data);
}

TEST(Gateway, ResumedRequestRelaysSuffix) {
  TestOrigin origin;
  const auto data = pattern(500000, 2);
  origin.put(kUrl, data);
  Gateway gw(origin);
  auto relay = gw.dispatch(request_for(kUrl, 203223));
  const auto r = split_response(drain(*relay));
  ASSERT_EQ(r.body.size(), 296777u);
  EXPECT_EQ(r.body.front(), data[203223]);
  EXPECT_TRUE(std::equal(r.body.begin(), r.body.end(), data.begin() + 203223));
  EXPECT_NE(r.head.find("Content-Length: 296777\r\n"), std::string::npos);
  EXPECT_EQ(relay->body_bytes_relayed(), 296777u);
}

TEST(Gateway, OffsetAtEndIsEmptySuccess) {
  TestOrigin origin;
  origin.put(kUrl, pattern(1000, 3));
  Gateway gw(origin);
  auto relay = gw.dispatch(request_for(kUrl, 1000));
  EXPECT_EQ(relay->status(), 200);
  const auto r = split_response(drain(*relay));
  EXPECT_TRUE(r.body.empty());
  EXPECT_NE(r.head.find("Content-Length: 0\r\n"), std::string::npos);
}

TEST(Gateway, LastByteOnly) {
  for (const bool ranges : {true, false}) {
    TestOrigin origin(ranges);
    const auto data = pattern(4096, 4);
    origin.put(kUrl, data);
    Gateway gw(origin);
    auto f = gw.fetch_at_offset(kUrl, data.size() - 1);
    const auto body = drain(*f.stream);
    ASSERT_EQ(body.size(), 1u);
    EXPECT_EQ(body[0], data.back());
    EXPECT_EQ(gw.stats().bytes_skipped, ranges ? 0u : data.size() - 1);
  }
}

TEST(GatewayProperty, PrefixPlusResumeIsTheResource) {
  std::mt19937_64 rng(11);
  for (const bool ranges : {true, false}) {
    TestOrigin origin(ranges);
    const auto data = pattern(70000, 5);
    origin.put(kUrl, data);
    Gateway gw(origin);
    for (int i = 0; i < 200; ++i) {
      const ByteCount o = rng() % (data.size() + 1);
      auto f = gw.fetch_at_offset(kUrl, o);
      Bytes joined(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(o));
      const auto tail = drain(*f.stream, 1 + rng() % 9000);
      joined.insert(joined.end(), tail.begin(), tail.end());
      ASSERT_EQ(joined, data) << "offset " << o << " ranges " << ranges;
      ASSERT_EQ(f.remaining, data.size() - o);
    }
  }
}

TEST(Gateway, MalformedRequestIs400) {
  TestOrigin origin;
  Gateway gw(origin);
  for (const auto* raw : {"POST http://gw/x?url=http://a/b HTTP 1.0\r\n\r\n",
                          "GET http://gw/x?url=http://a/b HTTP 1.0\r\nSession-Offset: -5\r\n\r\n",
                          "GET http://gw/x HTTP 1.0\r\nSession-Offset: 0\r\n\r\n", "garbage"}) {
    auto relay = gw.dispatch(raw);
    EXPECT_EQ(relay->status(), 400) << raw;
    EXPECT_TRUE(to_string(drain(*relay)).starts_with("HTTP/1.0 400 "));
  }
  EXPECT_EQ(gw.stats().bad_requests, 4u);
  EXPECT_EQ(origin.opens(), 0);
}

TEST(Gateway, UpstreamErrorsMapToStatus) {
  TestOrigin origin;
  Gateway gw(origin);
  EXPECT_EQ(gw.dispatch(request_for("http://origin.test/missing", 0))->status(), 404);
  origin.set_unreachable(true);
  EXPECT_EQ(gw.dispatch(request_for(kUrl, 0))->status(), 502);
  EXPECT_EQ(gw.stats().upstream_errors, 2u);
}

TEST(Gateway, TruncatedOriginThenResume) {
  TestOrigin origin;
  const auto data = pattern(100000, 6);
  origin.put(kUrl, data);
  origin.cut_next_after(40000);
  Gateway gw(origin);

  Bytes got;
  auto relay = gw.dispatch(request_for(kUrl, 0));
  std::array<std::byte, 4096> buf{};
  std::string head;
  bool truncated = false;
  try {
    while (const auto n = relay->read(buf)) {
      head.append(reinterpret_cast<const char*>(buf.data()), n);
    }
  } catch (const UpstreamError& e) {
    truncated = e.code() == UpstreamErrc::truncated;
  }
  ASSERT_TRUE(truncated);
  const auto end = header_block_end(head);
  for (auto i = end; i < head.size(); ++i) got.push_back(static_cast<std::byte>(head[i]));
  EXPECT_EQ(got.size(), 40000u);
  EXPECT_EQ(relay->body_bytes_relayed(), 40000u);

  auto second = gw.dispatch(request_for(kUrl, got.size()));
  const auto r = split_response(drain(*second));
  got.insert(got.end(), r.body.begin(), r.body.end());
  EXPECT_EQ(got, data);
  EXPECT_EQ(gw.stats().upstream_errors, 1u);
}

TEST(Gateway, RecordsTrackRelayedBytes) {
  TestOrigin origin;
  origin.put(kUrl, pattern(5000, 7));
  Gateway gw(origin);
  {
    auto relay = gw.dispatch(request_for(kUrl, 1234));
    drain(*relay);
  }
  const auto recs = gw.records();
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].origin_url, kUrl);
  EXPECT_EQ(recs[0].begin_offset, 1234u);
  EXPECT_EQ(recs[0].bytes_relayed, 5000u - 1234u);
}

TEST(Gateway, ConcurrentDispatchesAreIndependent) {
  TestOrigin origin;
  const auto data = pattern(200000, 8);
  origin.put(kUrl, data);
  // TestOrigin is not thread-safe for opens; serialize opens only.
  std::mutex open_mu;
  class Locked final : public Origin {
   public:
    Locked(Origin& o, std::mutex& m) : o_(o), m_(m) {}
    OriginResponse open(const std::string& u, ByteCount off) override {
      std::lock_guard l(m_);
      return o_.open(u, off);
    }

   private:
    Origin& o_;
    std::mutex& m_;
  } locked(origin, open_mu);
  Gateway shared(locked);

  constexpr int kThreads = 8;
  std::vector<int> ok(kThreads, 0);
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < kThreads; ++t) {
      threads.emplace_back([&, t] {
        const ByteCount off = static_cast<ByteCount>(t) * 20000;
        auto relay = shared.dispatch(request_for(kUrl, off));
        const auto r = split_response(drain(*relay, 777 + t));
        ok[t] = std::equal(r.body.begin(), r.body.end(), data.begin() + static_cast<std::ptrdiff_t>(off),
                           data.end());
      });
    }
  }
  for (int t = 0; t < kThreads; ++t) EXPECT_TRUE(ok[t]) << t;
  ByteCount expected = 0;
  for (int t = 0; t < kThreads; ++t) expected += data.size() - static_cast<ByteCount>(t) * 20000;
  EXPECT_EQ(shared.stats().bytes_relayed, expected);
  EXPECT_EQ(shared.stats().dispatches, static_cast<std::uint64_t>(kThreads));
}
