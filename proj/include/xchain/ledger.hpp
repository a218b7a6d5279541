#pragma once

// Simulated single blockchain: a registry of natively implemented contracts
// (no EVM), lockable/nonlockable locking rules, provisional state overlays
// bound to one crosschain transaction, and the trial-execution engine that
// intercepts subordinate transaction / view call sites and checks them
// against the signed subordinate records embedded in the transaction.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "xchain/runtime.hpp"

namespace xchain::ledger {

enum class Behavior {
  Token,
  Router,
  Item,
  SupplyChain,
  Provenance,
  OraclePriceFeed,
  SimpleAccount,
};

std::string to_string(Behavior b);
Behavior behavior_from_string(const std::string& s);

class ChainError : public std::runtime_error {
 public:
  explicit ChainError(const std::string& what) : std::runtime_error(what) {}
};

struct ContractState {
  std::string address;
  Behavior behavior = Behavior::Token;
  bool lockable = false;
  std::optional<TxId> lock;
  std::map<std::string, Value> committed;
  // Overlay held while locked; non-empty only when lock is set.
  std::map<std::string, Value> provisional;
};

struct LocalTransaction {
  std::string target;
  std::string function;
  Args args;
  std::string caller;
};

enum class CallKind { Transaction, View };

// A signed subordinate call embedded in a crosschain transaction part, as
// seen by the trial-execution engine.
struct SubordinateCallRecord {
  BlockchainId chain = 0;
  std::string target;
  std::string function;
  Args expected_args;
  CallKind kind = CallKind::Transaction;
  std::optional<Value> cached_result;  // set for views after dispatch
};

// The slice of an originating/subordinate transaction the ledger needs.
struct CrosschainPart {
  TxId crosschain_tx_id{};
  std::string target;
  std::string function;
  Args args;
  std::vector<SubordinateCallRecord> subordinates;  // signed order
};

// Supplied by the protocol layer: executes subordinate views remotely and
// submits signed subordinate transactions after a successful trial run.
class SubordinateDispatcher {
 public:
  virtual ~SubordinateDispatcher() = default;
  virtual Value dispatch_view(size_t subordinate_index) = 0;
  virtual void submit_transaction(size_t subordinate_index) = 0;
};

// Charges base-transaction cost units; the embedder decides which nodes pay.
class CostHook {
 public:
  virtual ~CostHook() = default;
  virtual void base_tx(BlockchainId chain) = 0;
};

struct Receipt {
  std::string target;
  std::string function;
};

enum class SignallingOutcome { Commit, Ignore };

class Chain {
 public:
  explicit Chain(BlockchainId id, CostHook* costs = nullptr)
      : id_(id), costs_(costs) {}

  BlockchainId id() const { return id_; }

  // Registers a contract; empty name picks a sequential address.
  std::string deploy(Behavior behavior, bool lockable,
                     std::map<std::string, Value> initial_state,
                     const std::string& name = "");

  // Ordinary single-chain transaction: state committed directly.
  Receipt execute_local(const LocalTransaction& tx);

  // Read-only call. `reader` makes the provisional overlay of that
  // crosschain transaction visible; everyone else sees committed state.
  Value execute_view(const std::string& target, const std::string& function,
                     const Args& args,
                     const std::optional<TxId>& reader = std::nullopt) const;

  // Listing-style processing of one originating or subordinate transaction:
  // dispatch subordinate views first, trial-execute with call-site matching
  // against the signed records, then submit subordinate transactions. On
  // success every written contract is locked and holds its overlay as
  // provisional state. Throws ChainError on any failure (nothing locked).
  void process_crosschain_part(const CrosschainPart& part,
                               SubordinateDispatcher& dispatcher);

  // Mining the signalling transaction: merge or discard the provisional
  // overlays of every contract locked by this crosschain transaction.
  Receipt apply_signalling(const TxId& crosschain_tx_id, SignallingOutcome outcome);

  // Lowest-indexed unlocked item of a router that satisfies the predicate.
  std::string select_unlocked_item(
      const std::string& router_address,
      const std::function<bool(const ContractState&)>& predicate) const;

  bool has_locks(const TxId& crosschain_tx_id) const;
  const ContractState& contract(const std::string& address) const;
  const ContractState* find(const std::string& address) const;
  const std::map<std::string, ContractState>& contracts() const { return contracts_; }

  // Canonical dump {address -> {behavior, lockable, lock, committed}}.
  nlohmann::json state_dump() const;

  // Test/fault-injection helper: lock a contract as if a foreign crosschain
  // transaction held it.
  void force_lock(const std::string& address, const TxId& crosschain_tx_id);

 private:
  friend class ExecutionContext;

  ContractState& contract_mut(const std::string& address);

  BlockchainId id_;
  CostHook* costs_;
  std::map<std::string, ContractState> contracts_;
  uint64_t next_address_ = 0;
};

// Execution environment handed to behavior implementations. In crosschain
// mode writes go to a per-transaction overlay and crosschain call sites are
// matched against the signed subordinate records.
class ExecutionContext {
 public:
  enum class Mode { Local, Crosschain, View };

  ExecutionContext(Chain& chain, Mode mode, std::optional<TxId> txid,
                   const std::vector<SubordinateCallRecord>* subordinates,
                   SubordinateDispatcher* dispatcher);

  Mode mode() const { return mode_; }
  BlockchainId chain_id() const { return chain_.id(); }

  Value get(const std::string& address, const std::string& key) const;
  std::optional<Value> try_get(const std::string& address, const std::string& key) const;
  void put(const std::string& address, const std::string& key, Value value);

  // Same-chain calls share this context (and overlay).
  void call_local(const std::string& address, const std::string& function, const Args& args);
  Value call_local_view(const std::string& address, const std::string& function,
                        const Args& args) const;

  // Crosschain call sites; only valid in Crosschain mode.
  void subcall_tx(BlockchainId chain, const std::string& target,
                  const std::string& function, const Args& args);
  Value subcall_view(BlockchainId chain, const std::string& target,
                     const std::string& function, const Args& args);

  const Chain& chain() const { return chain_; }

 private:
  friend class Chain;

  const Value* lookup(const std::string& address, const std::string& key) const;
  void check_all_subordinates_consumed() const;

  Chain& chain_;
  Mode mode_;
  std::optional<TxId> txid_;
  const std::vector<SubordinateCallRecord>* subordinates_;
  SubordinateDispatcher* dispatcher_;
  // Written keys per contract address (the provisional overlay being built).
  std::map<std::string, std::map<std::string, Value>> overlay_;
  std::vector<Value> view_results_;      // cached, in signed view order
  size_t next_view_ = 0;                 // cursor over signed views
  size_t next_tx_ = 0;                   // cursor over signed transactions
};

// Dispatches `function` on a contract; ordinary statements run against ctx.
void invoke(ExecutionContext& ctx, const ContractState& contract,
            const std::string& function, const Args& args);
Value invoke_view(const ExecutionContext& ctx, const ContractState& contract,
                  const std::string& function, const Args& args);

}  // namespace xchain::ledger
