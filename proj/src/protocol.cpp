#include "xchain/protocol.hpp"

#include <algorithm>

namespace xchain::protocol {

std::string to_string(TxKind k) {
  switch (k) {
    case TxKind::Originating: return "Originating";
    case TxKind::Subordinate: return "Subordinate";
    case TxKind::View: return "View";
  }
  throw std::logic_error("unknown transaction kind");
}

// ------------------------------------------------------------ serialization

Bytes CrosschainTransaction::unsigned_bytes() const {
  Bytes out;
  ser::put_u8(out, uint8_t(kind));
  ser::put_u32(out, chain);
  ser::put_string(out, target);
  ser::put_string(out, function);
  ser::put_args(out, args);
  ser::put_u32(out, coordination_chain);
  ser::put_string(out, coordination_contract);
  out.insert(out.end(), crosschain_tx_id.begin(), crosschain_tx_id.end());
  ser::put_u64(out, timeout_block);
  ser::put_bytes(out, sender_public_key);
  ser::put_u32(out, uint32_t(subordinates.size()));
  for (const auto& child : subordinates) ser::put_bytes(out, child.signed_bytes());
  return out;
}

Bytes CrosschainTransaction::signed_bytes() const {
  Bytes out = unsigned_bytes();
  ser::put_bytes(out, sender_signature);
  return out;
}

// ------------------------------------------------------------------- signer

UserSigner UserSigner::create(uint64_t seed) {
  return UserSigner{threshold::keygen({1, 1}, seed)};
}

Bytes UserSigner::public_key_bytes() const { return keys.group_pk.to_bytes(); }

Bytes UserSigner::sign(const Bytes& message) const {
  auto share = threshold::sign_share(keys.shares[0], message);
  return threshold::combine_shares({share}, {1, 1}).to_bytes();
}

// ------------------------------------------------------------- verification

namespace {

void verify_node(const CrosschainTransaction& tx, const CrosschainTransaction& root) {
  if (tx.coordination_chain != root.coordination_chain ||
      tx.coordination_contract != root.coordination_contract ||
      !(tx.crosschain_tx_id == root.crosschain_tx_id) ||
      tx.timeout_block != root.timeout_block) {
    throw ProtocolError("crosschain context fields differ across the tree");
  }
  if (tx.sender_public_key != root.sender_public_key) {
    throw ProtocolError("sender public key differs across the tree");
  }
  if (&tx != &root && tx.kind == TxKind::Originating) {
    throw ProtocolError("nested originating transaction");
  }
  for (const auto& child : tx.subordinates) {
    if (child.kind == TxKind::Originating) {
      throw ProtocolError("nested originating transaction");
    }
    if (tx.kind == TxKind::View && child.kind == TxKind::Subordinate) {
      throw ProtocolError("view nodes may not contain subordinate transactions");
    }
    verify_node(child, root);
  }
  auto pk = threshold::GroupPublicKey::from_bytes(tx.sender_public_key);
  auto sig = threshold::GroupSignature::from_bytes(tx.sender_signature);
  if (!pk || !sig || !threshold::verify_group(*pk, tx.unsigned_bytes(), *sig)) {
    throw ProtocolError("invalid sender signature on " + to_string(tx.kind) +
                        " part for chain " + std::to_string(tx.chain));
  }
}

void collect_chains(const TxSpec& spec, std::set<BlockchainId>& out) {
  out.insert(spec.chain);
  for (const auto& child : spec.subordinates) collect_chains(child, out);
}

void encode_spec(Bytes& out, const TxSpec& spec) {
  ser::put_u8(out, uint8_t(spec.kind));
  ser::put_u32(out, spec.chain);
  ser::put_string(out, spec.target);
  ser::put_string(out, spec.function);
  ser::put_args(out, spec.args);
  ser::put_u32(out, uint32_t(spec.subordinates.size()));
  for (const auto& child : spec.subordinates) encode_spec(out, child);
}

TxId derive_txid(const TxSpec& root, uint64_t nonce) {
  Bytes bytes;
  ser::put_string(bytes, "XTXID");
  encode_spec(bytes, root);
  ser::put_u64(bytes, nonce);
  return sha256(bytes);
}

Bytes ready_message(const TxId& txid, BlockchainId chain, const Hash256& part_hash) {
  Bytes out;
  ser::put_string(out, "XREADY");
  out.insert(out.end(), txid.begin(), txid.end());
  ser::put_u32(out, chain);
  out.insert(out.end(), part_hash.begin(), part_hash.end());
  return out;
}

Bytes view_result_message(const TxId& txid, BlockchainId chain,
                          const Hash256& part_hash, const Value& result) {
  Bytes out;
  ser::put_string(out, "XVIEWRES");
  out.insert(out.end(), txid.begin(), txid.end());
  ser::put_u32(out, chain);
  out.insert(out.end(), part_hash.begin(), part_hash.end());
  ser::put_value(out, result);
  return out;
}

ledger::CrosschainPart make_ledger_part(const CrosschainTransaction& tx) {
  ledger::CrosschainPart part;
  part.crosschain_tx_id = tx.crosschain_tx_id;
  part.target = tx.target;
  part.function = tx.function;
  part.args = tx.args;
  for (const auto& child : tx.subordinates) {
    part.subordinates.push_back(ledger::SubordinateCallRecord{
        child.chain, child.target, child.function, child.args,
        child.kind == TxKind::View ? ledger::CallKind::View
                                   : ledger::CallKind::Transaction,
        std::nullopt});
  }
  return part;
}

}  // namespace

void verify_tx_tree(const CrosschainTransaction& tx) { verify_node(tx, tx); }

// ------------------------------------------------------------------- engine

void Engine::add_chain(ledger::Chain& chain, threshold::ThresholdParams params,
                       uint64_t key_seed) {
  if (!params.valid()) throw ProtocolError("invalid threshold parameters");
  if (chains_.count(chain.id())) throw ProtocolError("chain already registered");
  ChainInfo ci;
  ci.ledger = &chain;
  ci.params = params;
  ci.keys = threshold::keygen(params, key_seed);
  coord_.register_public_key(chain.id(), ci.keys.group_pk);
  chains_.emplace(chain.id(), std::move(ci));
}

const Engine::ChainInfo& Engine::info(BlockchainId id) const {
  auto it = chains_.find(id);
  if (it == chains_.end()) {
    throw ProtocolError("chain not registered: " + std::to_string(id));
  }
  return it->second;
}

ledger::Chain& Engine::chain(BlockchainId id) { return *info(id).ledger; }

const threshold::KeySet& Engine::chain_keys(BlockchainId id) const {
  return info(id).keys;
}

int Engine::chain_validators(BlockchainId id) const { return info(id).params.n; }

void Engine::set_fault(const NodeRef& node, Fault fault) {
  if (fault == Fault::None) {
    faults_.erase(node);
  } else {
    faults_[node] = fault;
  }
}

void Engine::clear_faults() { faults_.clear(); }

const std::set<int>& Engine::deprioritized(BlockchainId chain) const {
  static const std::set<int> empty;
  auto it = deprioritized_.find(chain);
  return it == deprioritized_.end() ? empty : it->second;
}

void Engine::base_tx(BlockchainId chain) {
  int n = chain_validators(chain);
  for (int v = 1; v <= n; ++v) costs_.charge_base_tx(NodeRef{chain, v});
}

void Engine::trace(const NodeRef& node, const std::string& event, const TxId& txid,
                   uint64_t verifications) {
  if (!trace_) return;
  trace_->emit(TraceEvent{costs_.busy_time(node), node.name(), node.chain, event,
                          txid_hex(txid), verifications});
}

void Engine::charge_group_verify_all(BlockchainId signer_chain,
                                     BlockchainId receiver_chain,
                                     const Bytes& message,
                                     const threshold::GroupSignature& sig,
                                     const char* what) {
  if (!threshold::verify_group(info(signer_chain).keys.group_pk, message, sig)) {
    throw ProtocolError(std::string(what) + ": group signature verification failed");
  }
  int n = chain_validators(receiver_chain);
  for (int v = 1; v <= n; ++v) {
    costs_.charge_group_verify(NodeRef{receiver_chain, v});
  }
}

CrosschainTransaction Engine::build_crosschain_tx(const TxSpec& root,
                                                  const MultichainNode& instigator,
                                                  const UserSigner& user,
                                                  uint64_t nonce,
                                                  uint64_t timeout_blocks) {
  if (root.kind != TxKind::Originating) {
    throw ProtocolError("root of the tree must be an originating transaction");
  }
  if (timeout_blocks == 0) throw ProtocolError("timeout must be in the future");

  std::set<BlockchainId> tree_chains;
  collect_chains(root, tree_chains);
  for (BlockchainId c : tree_chains) {
    info(c);  // must be registered
    if (!instigator.validators.count(c)) {
      throw ProtocolError(instigator.operator_name +
                          " has no validator on chain " + std::to_string(c));
    }
  }

  TxId txid = derive_txid(root, nonce);
  uint64_t timeout_block = coord_.current_block() + timeout_blocks;
  Bytes user_pk = user.public_key_bytes();

  // Children are signed depth-first, so every parent's signature covers the
  // signed bytes of its whole subtree.
  std::function<CrosschainTransaction(const TxSpec&, bool)> build =
      [&](const TxSpec& spec, bool is_root) {
        if (!is_root && spec.kind == TxKind::Originating) {
          throw ProtocolError("nested originating transaction");
        }
        CrosschainTransaction tx;
        tx.kind = spec.kind;
        tx.chain = spec.chain;
        tx.target = spec.target;
        tx.function = spec.function;
        tx.args = spec.args;
        tx.coordination_chain = coord_.id();
        tx.coordination_contract = "coordination";
        tx.crosschain_tx_id = txid;
        tx.timeout_block = timeout_block;
        tx.sender_public_key = user_pk;
        for (const auto& child : spec.subordinates) {
          if (spec.kind == TxKind::View && child.kind == TxKind::Subordinate) {
            throw ProtocolError("view nodes may not contain subordinate transactions");
          }
          tx.subordinates.push_back(build(child, false));
        }
        tx.sender_signature = user.sign(tx.unsigned_bytes());
        return tx;
      };
  return build(root, true);
}

threshold::GroupSignature Engine::threshold_sign_round(BlockchainId chain,
                                                       int coordinator_index,
                                                       const Bytes& message) {
  const ChainInfo& ci = info(chain);
  if (coordinator_index < 1 || coordinator_index > ci.params.n) {
    throw ProtocolError("coordinator is not a validator of this chain");
  }

  // Ask validators with a clean history first, known-bad ones last, so a
  // misbehaving validator burns extra verifications only until detected.
  const std::set<int>& depri = deprioritized(chain);
  std::vector<int> order;
  for (int v = 1; v <= ci.params.n; ++v) {
    if (!depri.count(v)) order.push_back(v);
  }
  for (int v : depri) order.push_back(v);

  std::vector<threshold::SignatureShare> shares;
  std::map<int, bn254::G2> public_shares;
  for (int v : order) {
    public_shares[v] = ci.keys.shares[v - 1].public_share;
    auto f = faults_.find(NodeRef{chain, v});
    Fault fault = f == faults_.end() ? Fault::None : f->second;
    if (fault == Fault::Silent) continue;
    if (fault == Fault::BadShare) {
      Bytes corrupted = message;
      corrupted.push_back(0xff);
      shares.push_back(threshold::sign_share(ci.keys.shares[v - 1], corrupted));
    } else {
      shares.push_back(threshold::sign_share(ci.keys.shares[v - 1], message));
    }
  }
  if (int(shares.size()) < ci.params.m) {
    throw ProtocolError("not enough responsive validators to reach the threshold");
  }

  NodeRef coordinator{chain, coordinator_index};
  uint64_t g0 = threshold::group_verify_calls();
  uint64_t s0 = threshold::share_verify_calls();
  auto charge = [&] {
    costs_.charge_group_verify(coordinator, threshold::group_verify_calls() - g0);
    costs_.charge_share_verify(coordinator, threshold::share_verify_calls() - s0);
  };
  try {
    auto result = threshold::robust_combine(shares, ci.params, ci.keys.group_pk,
                                            public_shares, message);
    charge();
    for (int bad : result.bad_indices) deprioritized_[chain].insert(bad);
    return result.signature;
  } catch (const std::runtime_error&) {
    charge();
    throw ProtocolError("could not assemble a valid group signature");
  }
}

// Binds one transaction part to the engine so the ledger's trial execution
// can reach subordinate chains.
class PartDispatcher : public ledger::SubordinateDispatcher {
 public:
  PartDispatcher(Engine& engine, const CrosschainTransaction& part,
                 const MultichainNode& instigator, BlockchainId originating_chain)
      : engine_(engine), part_(part), instigator_(instigator),
        originating_chain_(originating_chain) {}

  Value dispatch_view(size_t i) override {
    return engine_.run_subordinate_view(part_.subordinates[i], instigator_,
                                        part_.chain);
  }
  void submit_transaction(size_t i) override {
    engine_.run_subordinate(part_.subordinates[i], instigator_, originating_chain_);
  }

 private:
  Engine& engine_;
  const CrosschainTransaction& part_;
  const MultichainNode& instigator_;
  BlockchainId originating_chain_;
};

void Engine::run_subordinate(const CrosschainTransaction& part,
                             const MultichainNode& instigator,
                             BlockchainId originating_chain) {
  const ChainInfo& ci = info(part.chain);
  PartDispatcher dispatcher(*this, part, instigator, originating_chain);
  try {
    ci.ledger->process_crosschain_part(make_ledger_part(part), dispatcher);
  } catch (const ledger::ChainError& e) {
    throw ProtocolError("subordinate transaction failed on chain " +
                        std::to_string(part.chain) + ": " + e.what());
  }

  int coordinator = instigator.validators.at(part.chain);
  Bytes msg = ready_message(part.crosschain_tx_id, part.chain,
                            sha256(part.signed_bytes()));
  auto sig = threshold_sign_round(part.chain, coordinator, msg);
  trace(NodeRef{part.chain, coordinator}, "subordinate_ready",
        part.crosschain_tx_id, 1);
  charge_group_verify_all(part.chain, originating_chain, msg, sig,
                          "subordinate ready");
}

Value Engine::run_subordinate_view(const CrosschainTransaction& part,
                                   const MultichainNode& instigator,
                                   BlockchainId calling_chain) {
  const ChainInfo& ci = info(part.chain);
  if (!part.subordinates.empty()) {
    throw ProtocolError("no installed contract serves views with subordinates");
  }
  Value result;
  try {
    result = ci.ledger->execute_view(part.target, part.function, part.args);
  } catch (const ledger::ChainError& e) {
    throw ProtocolError("subordinate view failed on chain " +
                        std::to_string(part.chain) + ": " + e.what());
  }

  int coordinator = instigator.validators.at(part.chain);
  Bytes msg = view_result_message(part.crosschain_tx_id, part.chain,
                                  sha256(part.signed_bytes()), result);
  auto sig = threshold_sign_round(part.chain, coordinator, msg);
  trace(NodeRef{part.chain, coordinator}, "view_result", part.crosschain_tx_id, 1);
  charge_group_verify_all(part.chain, calling_chain, msg, sig, "view result");
  return result;
}

Outcome Engine::run_originating(const CrosschainTransaction& tx,
                                const MultichainNode& instigator) {
  if (tx.kind != TxKind::Originating) {
    throw ProtocolError("not an originating transaction");
  }
  verify_tx_tree(tx);
  auto coord_it = instigator.validators.find(tx.chain);
  if (coord_it == instigator.validators.end()) {
    throw ProtocolError("instigator has no validator on the originating chain");
  }
  NodeRef coordinator{tx.chain, coord_it->second};
  const TxId& txid = tx.crosschain_tx_id;

  Bytes start_msg =
      coordination::start_message(txid, tx.chain, tx.timeout_block);
  auto start_sig = threshold_sign_round(tx.chain, coordinator.validator_index,
                                        start_msg);
  coord_.start(txid, tx.chain, tx.timeout_block, start_sig);
  trace(coordinator, "start", txid, 1);
  if (after_start_hook) after_start_hook();

  std::string failure;
  try {
    PartDispatcher dispatcher(*this, tx, instigator, tx.chain);
    info(tx.chain).ledger->process_crosschain_part(make_ledger_part(tx), dispatcher);
  } catch (const ledger::ChainError& e) {
    failure = e.what();
  } catch (const ProtocolError& e) {
    failure = e.what();
  }

  bool timed_out =
      coord_.effective_state(txid) == coordination::CoordState::Ignored;
  if (failure.empty() && !timed_out) {
    try {
      auto commit_sig = threshold_sign_round(
          tx.chain, coordinator.validator_index,
          coordination::commit_message(txid));
      coord_.commit(txid, commit_sig);
      trace(coordinator, "commit", txid, 1);
      for (auto& [id, ci] : chains_) {
        if (ci.ledger->has_locks(txid)) {
          ci.ledger->apply_signalling(txid, ledger::SignallingOutcome::Commit);
          trace(NodeRef{id, instigator.validators.count(id)
                                ? instigator.validators.at(id) : 1},
                "signalling_commit", txid, 0);
        }
      }
      return Outcome{true, ""};
    } catch (const coordination::CoordError&) {
      timed_out = true;  // expired between the check and the submission
    } catch (const ProtocolError& e) {
      failure = e.what();  // e.g. commit signing round failed; abort instead
    }
  }

  if (timed_out) {
    if (failure.empty()) failure = "coordination timeout";
  } else {
    // Explicit abort: threshold-sign and submit the Ignore message. If even
    // that fails the entry expires on its own; locks are still released.
    try {
      auto ignore_sig = threshold_sign_round(
          tx.chain, coordinator.validator_index,
          coordination::ignore_message(txid));
      coord_.ignore(txid, ignore_sig);
      trace(coordinator, "ignore", txid, 1);
    } catch (const std::exception&) {
    }
  }
  for (auto& [id, ci] : chains_) {
    if (ci.ledger->has_locks(txid)) {
      ci.ledger->apply_signalling(txid, ledger::SignallingOutcome::Ignore);
      trace(NodeRef{id, instigator.validators.count(id)
                            ? instigator.validators.at(id) : 1},
            "signalling_ignore", txid, 0);
    }
  }
  return Outcome{false, failure};
}

}  // namespace xchain::protocol
