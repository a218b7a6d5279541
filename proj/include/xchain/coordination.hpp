#pragma once

// Coordination blockchain: the contract recording every crosschain
// transaction's Started/Committed/Ignored state with a block-number timeout,
// plus the registry of blockchain group public keys used to verify the
// threshold-signed Start/Commit/Ignore messages.

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "xchain/runtime.hpp"
#include "xchain/threshold.hpp"

namespace xchain::coordination {

class CoordError : public std::runtime_error {
 public:
  explicit CoordError(const std::string& what) : std::runtime_error(what) {}
};

enum class CoordState { Started, Committed, Ignored };

std::string to_string(CoordState s);

struct CoordinationEntry {
  TxId crosschain_tx_id{};
  BlockchainId originating_chain = 0;
  CoordState state = CoordState::Started;
  uint64_t timeout_block = 0;
};

// Canonical byte framings of the three threshold-signed messages.
Bytes start_message(const TxId& crosschain_tx_id, BlockchainId originating_chain,
                    uint64_t timeout_block);
Bytes commit_message(const TxId& crosschain_tx_id);
Bytes ignore_message(const TxId& crosschain_tx_id);

class CoordinationChain {
 public:
  // Every accepted contract call charges each of the chain's validators; a
  // null accounting pointer disables charging (library use).
  CoordinationChain(BlockchainId id, int n_validators,
                    CostAccounting* costs = nullptr)
      : id_(id), n_validators_(n_validators), costs_(costs) {}

  BlockchainId id() const { return id_; }
  uint64_t current_block() const { return block_; }
  uint64_t advance_block(uint64_t n = 1) { return block_ += n; }

  // Key registry: lookups always return the highest registered version.
  uint64_t register_public_key(BlockchainId chain,
                               const threshold::GroupPublicKey& group_pk);
  const threshold::GroupPublicKey& public_key(BlockchainId chain) const;
  uint64_t key_version(BlockchainId chain) const;

  CoordinationEntry start(const TxId& crosschain_tx_id,
                          BlockchainId originating_chain, uint64_t timeout_block,
                          const threshold::GroupSignature& start_msg_sig);
  CoordinationEntry commit(const TxId& crosschain_tx_id,
                           const threshold::GroupSignature& commit_msg_sig);
  CoordinationEntry ignore(const TxId& crosschain_tx_id,
                           const threshold::GroupSignature& ignore_msg_sig);

  // Stored state, except Started entries past their timeout read as Ignored.
  CoordState effective_state(const TxId& crosschain_tx_id,
                             uint64_t current_block) const;
  CoordState effective_state(const TxId& crosschain_tx_id) const {
    return effective_state(crosschain_tx_id, block_);
  }

  const CoordinationEntry& entry(const TxId& crosschain_tx_id) const;
  const CoordinationEntry* find(const TxId& crosschain_tx_id) const;

  nlohmann::json entries_dump() const;

 private:
  void charge_accepted_call();
  void verify_or_throw(BlockchainId signer_chain, const Bytes& message,
                       const threshold::GroupSignature& sig, const char* what);

  BlockchainId id_;
  int n_validators_;
  CostAccounting* costs_;
  uint64_t block_ = 0;
  std::map<BlockchainId, std::pair<uint64_t, threshold::GroupPublicKey>> keys_;
  std::map<TxId, CoordinationEntry> entries_;
};

}  // namespace xchain::coordination
