#include "xchain/runtime.hpp"

namespace xchain {

nlohmann::json Value::to_json() const {
  if (is_int()) return as_int();
  return as_str();
}

Value Value::from_json(const nlohmann::json& j) {
  if (j.is_number_integer()) return Value(j.get<int64_t>());
  if (j.is_string()) return Value(j.get<std::string>());
  throw std::runtime_error("value: unsupported json type");
}

namespace ser {

void put_u8(Bytes& out, uint8_t x) { out.push_back(x); }

void put_u32(Bytes& out, uint32_t x) {
  for (int i = 3; i >= 0; --i) out.push_back(uint8_t(x >> (8 * i)));
}

void put_u64(Bytes& out, uint64_t x) {
  for (int i = 7; i >= 0; --i) out.push_back(uint8_t(x >> (8 * i)));
}

void put_bytes(Bytes& out, const Bytes& b) {
  put_u32(out, uint32_t(b.size()));
  out.insert(out.end(), b.begin(), b.end());
}

void put_string(Bytes& out, const std::string& s) {
  put_u32(out, uint32_t(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

void put_value(Bytes& out, const Value& v) {
  if (v.is_int()) {
    put_u8(out, 0x01);
    put_u64(out, uint64_t(v.as_int()));
  } else {
    put_u8(out, 0x02);
    put_string(out, v.as_str());
  }
}

void put_args(Bytes& out, const Args& a) {
  put_u32(out, uint32_t(a.size()));
  for (const auto& v : a) put_value(out, v);
}

}  // namespace ser

nlohmann::json TraceEvent::to_json() const {
  return nlohmann::json{{"time", time},
                        {"node", node},
                        {"chain", chain},
                        {"event", event},
                        {"crosschain_tx_id", crosschain_tx_id},
                        {"verifications_charged", verifications_charged}};
}

std::string txid_hex(const TxId& id) { return hex(id); }

}  // namespace xchain
