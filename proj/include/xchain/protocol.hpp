#pragma once

// Multichain-node orchestration: building and signing nested crosschain
// transaction trees, threshold-signing rounds among a chain's validators
// (with misbehaving-validator handling), and the originating-node lifecycle
// Start -> dispatch parts -> collect Ready/ViewResult -> Commit/Ignore ->
// Signalling on every chain holding locks.

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "xchain/coordination.hpp"
#include "xchain/ledger.hpp"
#include "xchain/runtime.hpp"
#include "xchain/threshold.hpp"

namespace xchain::protocol {

class ProtocolError : public std::runtime_error {
 public:
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

enum class TxKind : uint8_t { Originating = 0, Subordinate = 1, View = 2 };

std::string to_string(TxKind k);

// User-supplied shape of one call in the tree, before ids and signatures.
struct TxSpec {
  TxKind kind = TxKind::Originating;
  BlockchainId chain = 0;
  std::string target;
  std::string function;
  Args args;
  std::vector<TxSpec> subordinates;
};

// A fully built node of the signed transaction tree. The canonical byte
// serialization (see README) inlines each child's *signed* bytes, so a
// parent signature covers its whole subtree.
struct CrosschainTransaction {
  TxKind kind = TxKind::Originating;
  BlockchainId chain = 0;
  std::string target;
  std::string function;
  Args args;
  BlockchainId coordination_chain = 0;
  std::string coordination_contract;
  TxId crosschain_tx_id{};
  uint64_t timeout_block = 0;
  Bytes sender_public_key;  // compressed group public key of the sender
  std::vector<CrosschainTransaction> subordinates;
  Bytes sender_signature;  // over unsigned_bytes()

  Bytes unsigned_bytes() const;
  Bytes signed_bytes() const;
};

// The end user instigating transactions signs with a 1-of-1 key.
struct UserSigner {
  threshold::KeySet keys;

  static UserSigner create(uint64_t seed);
  Bytes public_key_bytes() const;
  Bytes sign(const Bytes& message) const;
};

// A multichain node operates one validator on each chain it participates in.
struct MultichainNode {
  std::string operator_name;
  std::map<BlockchainId, int> validators;  // chain -> 1-based validator index
};

enum class Fault { None, BadShare, Silent };

struct Outcome {
  bool committed = false;
  std::string reason;  // empty on commit
};

// Checks signatures and structural invariants over the whole tree. Throws
// ProtocolError naming the first violation.
void verify_tx_tree(const CrosschainTransaction& tx);

class Engine : public ledger::CostHook {
 public:
  Engine(coordination::CoordinationChain& coord, CostAccounting& costs,
         TraceSink* trace = nullptr)
      : coord_(coord), costs_(costs), trace_(trace) {}

  // Registers a chain: deals its threshold key set and publishes the group
  // public key on the coordination chain.
  void add_chain(ledger::Chain& chain, threshold::ThresholdParams params,
                 uint64_t key_seed);

  ledger::Chain& chain(BlockchainId id);
  const threshold::KeySet& chain_keys(BlockchainId id) const;
  int chain_validators(BlockchainId id) const;
  coordination::CoordinationChain& coordination() { return coord_; }

  void set_fault(const NodeRef& node, Fault fault);
  void clear_faults();
  const std::set<int>& deprioritized(BlockchainId chain) const;

  // Builds the signed tree: children signed depth-first, coverage of the
  // instigating node checked, transaction id derived from the spec + nonce.
  CrosschainTransaction build_crosschain_tx(const TxSpec& root,
                                            const MultichainNode& instigator,
                                            const UserSigner& user, uint64_t nonce,
                                            uint64_t timeout_blocks);

  // One signing round: the coordinating validator collects shares from the
  // chain's validators (previously-bad ones last), recombines robustly and
  // verifies the result. The verification work is charged to the coordinator.
  threshold::GroupSignature threshold_sign_round(BlockchainId chain,
                                                 int coordinator_index,
                                                 const Bytes& message);

  // Full originating-node lifecycle for a built transaction tree.
  Outcome run_originating(const CrosschainTransaction& tx,
                          const MultichainNode& instigator);

  // ledger::CostHook: a mined transaction costs one base unit on every
  // validator of that chain.
  void base_tx(BlockchainId chain) override;

  // Test hook, run after the Start message is accepted (e.g. to advance the
  // coordination chain past the timeout).
  std::function<void()> after_start_hook;

 private:
  struct ChainInfo {
    ledger::Chain* ledger = nullptr;
    threshold::ThresholdParams params;
    threshold::KeySet keys;
  };

  friend class PartDispatcher;

  const ChainInfo& info(BlockchainId id) const;
  void charge_group_verify_all(BlockchainId signer_chain,
                               BlockchainId receiver_chain, const Bytes& message,
                               const threshold::GroupSignature& sig,
                               const char* what);
  void trace(const NodeRef& node, const std::string& event, const TxId& txid,
             uint64_t verifications);

  // Processes one Subordinate part on its chain and returns after the Ready
  // message has been produced and verified on the originating chain.
  void run_subordinate(const CrosschainTransaction& part,
                       const MultichainNode& instigator,
                       BlockchainId originating_chain);
  // Serves one View part and returns its verified result to the caller.
  Value run_subordinate_view(const CrosschainTransaction& part,
                             const MultichainNode& instigator,
                             BlockchainId calling_chain);

  coordination::CoordinationChain& coord_;
  CostAccounting& costs_;
  TraceSink* trace_;
  std::map<BlockchainId, ChainInfo> chains_;
  std::map<NodeRef, Fault> faults_;
  std::map<BlockchainId, std::set<int>> deprioritized_;
};

}  // namespace xchain::protocol
