#pragma once

// Origin reached over plain HTTP/1.0. Asks for the remainder with a Range
// header; servers that ignore it answer 200 from byte 0 and the gateway
// skips the prefix.

#include "hsc/origin.hpp"

namespace hsc::live {

class HttpOrigin final : public Origin {
 public:
  explicit HttpOrigin(double timeout_s = 30.0) : timeout_s_(timeout_s) {}
  OriginResponse open(const std::string& url, ByteCount offset) override;

 private:
  double timeout_s_;
};

}  // namespace hsc::live
