#pragma once

// Shared simulator primitives: typed contract values, per-node virtual-time
// cost accounting, the protocol event trace, and the deterministic event
// queue. Wall-clock time is never consulted anywhere; node busy time driven
// by CostParams is the only clock.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "xchain/sha256.hpp"

namespace xchain {

using BlockchainId = uint32_t;
using TxId = Hash256;  // 256-bit crosschain transaction identifier

// splitmix64: deterministic, platform-stable seed expansion.
struct SplitMix64 {
  uint64_t state = 0;
  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d4a2ca9f38ab4full;
    return z ^ (z >> 31);
  }
};

// Contract value: integer or string.
struct Value {
  std::variant<int64_t, std::string> v;

  Value() : v(int64_t(0)) {}
  Value(int64_t i) : v(i) {}
  Value(int i) : v(int64_t(i)) {}
  Value(std::string s) : v(std::move(s)) {}
  Value(const char* s) : v(std::string(s)) {}

  bool is_int() const { return std::holds_alternative<int64_t>(v); }
  int64_t as_int() const {
    if (!is_int()) throw std::runtime_error("value: expected integer");
    return std::get<int64_t>(v);
  }
  const std::string& as_str() const {
    if (is_int()) throw std::runtime_error("value: expected string");
    return std::get<std::string>(v);
  }
  bool operator==(const Value&) const = default;

  nlohmann::json to_json() const;
  static Value from_json(const nlohmann::json& j);
};

using Args = std::vector<Value>;

// Canonical byte serialization helpers (big-endian, length-prefixed).
namespace ser {
void put_u8(Bytes& out, uint8_t x);
void put_u32(Bytes& out, uint32_t x);
void put_u64(Bytes& out, uint64_t x);
void put_bytes(Bytes& out, const Bytes& b);   // u32 length prefix
void put_string(Bytes& out, const std::string& s);
void put_value(Bytes& out, const Value& v);
void put_args(Bytes& out, const Args& a);
}  // namespace ser

struct CostParams {
  double base_tx_rate = 375.0;     // transactions per second
  double bls_verify_time = 0.005;  // seconds per group-signature verification

  void validate() const {
    if (base_tx_rate <= 0 || bls_verify_time < 0) {
      throw std::invalid_argument("cost params must be positive");
    }
  }
};

// A validator node is identified by (chain, 1-based validator index).
struct NodeRef {
  BlockchainId chain = 0;
  int validator_index = 0;

  std::string name() const {
    return "chain" + std::to_string(chain) + "/v" + std::to_string(validator_index);
  }
  auto operator<=>(const NodeRef&) const = default;
};

struct NodeStats {
  double busy_time = 0.0;
  uint64_t base_tx_count = 0;
  uint64_t group_verify_count = 0;
  uint64_t share_verify_count = 0;
};

class CostAccounting {
 public:
  explicit CostAccounting(CostParams params = {}) : params_(params) {}

  const CostParams& params() const { return params_; }

  void charge_base_tx(const NodeRef& node) {
    auto& s = stats_[node];
    s.busy_time += 1.0 / params_.base_tx_rate;
    s.base_tx_count += 1;
  }
  void charge_group_verify(const NodeRef& node, uint64_t count = 1) {
    auto& s = stats_[node];
    s.busy_time += params_.bls_verify_time * double(count);
    s.group_verify_count += count;
  }
  // A share verification is a full pairing check and costs the same.
  void charge_share_verify(const NodeRef& node, uint64_t count) {
    auto& s = stats_[node];
    s.busy_time += params_.bls_verify_time * double(count);
    s.share_verify_count += count;
  }

  const NodeStats& stats(const NodeRef& node) const {
    static const NodeStats zero;
    auto it = stats_.find(node);
    return it == stats_.end() ? zero : it->second;
  }
  double busy_time(const NodeRef& node) const { return stats(node).busy_time; }
  const std::map<NodeRef, NodeStats>& all() const { return stats_; }

 private:
  CostParams params_;
  std::map<NodeRef, NodeStats> stats_;
};

// One protocol event: consumed by performance checks and golden tests.
struct TraceEvent {
  double time = 0.0;
  std::string node;
  BlockchainId chain = 0;
  std::string event;
  std::string crosschain_tx_id;  // hex
  uint64_t verifications_charged = 0;

  nlohmann::json to_json() const;
};

class TraceSink {
 public:
  void emit(TraceEvent e) { events_.push_back(std::move(e)); }
  const std::vector<TraceEvent>& events() const { return events_; }
  void clear() { events_.clear(); }

 private:
  std::vector<TraceEvent> events_;
};

// Discrete-event queue ordered by (virtual time, insertion sequence).
class EventQueue {
 public:
  using Handler = std::function<void()>;

  void push(double time, Handler fn) {
    entries_.push(Entry{time, next_seq_++, std::move(fn)});
  }
  bool empty() const { return entries_.empty(); }
  size_t size() const { return entries_.size(); }
  double next_time() const { return entries_.top().time; }

  // Pops and runs the earliest event; returns false when drained.
  bool run_next() {
    if (entries_.empty()) return false;
    Entry e = entries_.top();
    entries_.pop();
    e.fn();
    return true;
  }

 private:
  struct Entry {
    double time;
    uint64_t seq;
    Handler fn;
    bool operator>(const Entry& o) const {
      if (time != o.time) return time > o.time;
      return seq > o.seq;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> entries_;
  uint64_t next_seq_ = 0;
};

std::string txid_hex(const TxId& id);

}  // namespace xchain
