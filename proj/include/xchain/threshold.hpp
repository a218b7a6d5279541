#pragma once

// M-of-N BLS threshold signatures: a trusted dealer splits one signing key
// with a random degree-(m-1) polynomial, publishes coefficient commitments
// so every share is verifiable, and any m signature shares recombine via
// Lagrange interpolation at index 0 into a group signature that reveals
// nothing about the signer subset or the threshold.

#include <cstdint>
#include <map>
#include <vector>

#include "xchain/bn254.hpp"
#include "xchain/sha256.hpp"

namespace xchain::threshold {

struct ThresholdParams {
  int n = 0;  // total validator count
  int m = 0;  // signing threshold

  bool valid() const { return m >= 1 && n >= m; }
};

struct KeyShare {
  int signer_index = 0;  // 1-based; 0 is the interpolation target
  bn254::Fr secret_scalar;
  bn254::G2 public_share;
};

struct ShareCommitments {
  // One commitment per polynomial coefficient, degree 0 first (length m).
  std::vector<bn254::G2> coefficient_commitments;
};

struct GroupPublicKey {
  bn254::G2 point;

  Bytes to_bytes() const;
  static std::optional<GroupPublicKey> from_bytes(const Bytes& b);
  bool operator==(const GroupPublicKey& o) const { return point.eq(o.point); }
};

struct SignatureShare {
  int signer_index = 0;
  bn254::G1 point;

  Bytes to_bytes() const;
};

struct GroupSignature {
  bn254::G1 point;

  Bytes to_bytes() const;
  static std::optional<GroupSignature> from_bytes(const Bytes& b);
  bool operator==(const GroupSignature& o) const { return point.eq(o.point); }
};

struct KeySet {
  GroupPublicKey group_pk;
  ShareCommitments commitments;
  std::vector<KeyShare> shares;  // indices 1..n; dealer secret is not kept
};

// Deterministic dealer-based key generation.
KeySet keygen(const ThresholdParams& params, uint64_t seed);

// True iff the share lies on the committed polynomial and its public share
// matches its secret.
bool verify_key_share(const KeyShare& share, const ShareCommitments& commitments);

// Deterministic BLS signature share over hash-to-curve of the message.
SignatureShare sign_share(const KeyShare& share, const Bytes& message);

bool verify_signature_share(const SignatureShare& share_sig,
                            const bn254::G2& public_share, const Bytes& message);

// Combines exactly the first m shares (by list order). Throws
// std::invalid_argument on fewer than m shares or duplicate signer indices.
GroupSignature combine_shares(const std::vector<SignatureShare>& shares,
                              const ThresholdParams& params);

bool verify_group(const GroupPublicKey& group_pk, const Bytes& message,
                  const GroupSignature& sig);

struct RobustResult {
  GroupSignature signature;
  std::vector<int> bad_indices;  // signer indices of corrupted input shares
};

// First tries combine + verify on the first m shares; on failure verifies
// every supplied share individually, discards the invalid ones and
// recombines. Throws std::runtime_error if fewer than m valid shares exist.
RobustResult robust_combine(const std::vector<SignatureShare>& shares,
                            const ThresholdParams& params,
                            const GroupPublicKey& group_pk,
                            const std::map<int, bn254::G2>& public_shares,
                            const Bytes& message);

// Instrumentation: every verify_group / verify_signature_share call is
// counted, so cost-model tests can assert exact verification counts.
uint64_t group_verify_calls();
uint64_t share_verify_calls();
void reset_verify_counters();

}  // namespace xchain::threshold
