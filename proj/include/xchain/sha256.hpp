#pragma once

#include <array>
#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

namespace xchain {

using Bytes = std::vector<uint8_t>;
using Hash256 = std::array<uint8_t, 32>;

// Incremental SHA-256 (FIPS 180-4).
class Sha256 {
 public:
  Sha256();
  Sha256& update(const uint8_t* data, size_t len);
  Sha256& update(const Bytes& data) { return update(data.data(), data.size()); }
  Sha256& update(const std::string& s) {
    return update(reinterpret_cast<const uint8_t*>(s.data()), s.size());
  }
  Hash256 finish();

 private:
  void compress(const uint8_t* block);

  uint32_t state_[8];
  uint64_t total_len_ = 0;
  uint8_t buf_[64];
  size_t buf_len_ = 0;
};

Hash256 sha256(const uint8_t* data, size_t len);
Hash256 sha256(const Bytes& data);

std::string hex(const uint8_t* data, size_t len);
std::string hex(const Bytes& data);
std::string hex(const Hash256& h);

}  // namespace xchain
