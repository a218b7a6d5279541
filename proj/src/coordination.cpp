#include "xchain/coordination.hpp"

namespace xchain::coordination {

std::string to_string(CoordState s) {
  switch (s) {
    case CoordState::Started: return "Started";
    case CoordState::Committed: return "Committed";
    case CoordState::Ignored: return "Ignored";
  }
  throw std::logic_error("unknown coordination state");
}

namespace {
void put_txid(Bytes& out, const TxId& id) {
  out.insert(out.end(), id.begin(), id.end());
}
}  // namespace

Bytes start_message(const TxId& crosschain_tx_id, BlockchainId originating_chain,
                    uint64_t timeout_block) {
  Bytes out;
  ser::put_string(out, "XSTART");
  put_txid(out, crosschain_tx_id);
  ser::put_u32(out, originating_chain);
  ser::put_u64(out, timeout_block);
  return out;
}

Bytes commit_message(const TxId& crosschain_tx_id) {
  Bytes out;
  ser::put_string(out, "XCOMMIT");
  put_txid(out, crosschain_tx_id);
  return out;
}

Bytes ignore_message(const TxId& crosschain_tx_id) {
  Bytes out;
  ser::put_string(out, "XIGNORE");
  put_txid(out, crosschain_tx_id);
  return out;
}

uint64_t CoordinationChain::register_public_key(
    BlockchainId chain, const threshold::GroupPublicKey& group_pk) {
  auto& slot = keys_[chain];
  slot.first += 1;
  slot.second = group_pk;
  return slot.first;
}

const threshold::GroupPublicKey& CoordinationChain::public_key(
    BlockchainId chain) const {
  auto it = keys_.find(chain);
  if (it == keys_.end()) {
    throw CoordError("no public key registered for chain " + std::to_string(chain));
  }
  return it->second.second;
}

uint64_t CoordinationChain::key_version(BlockchainId chain) const {
  auto it = keys_.find(chain);
  return it == keys_.end() ? 0 : it->second.first;
}

void CoordinationChain::charge_accepted_call() {
  if (!costs_) return;
  for (int v = 1; v <= n_validators_; ++v) {
    NodeRef node{id_, v};
    costs_->charge_group_verify(node);
    costs_->charge_base_tx(node);
  }
}

void CoordinationChain::verify_or_throw(BlockchainId signer_chain,
                                        const Bytes& message,
                                        const threshold::GroupSignature& sig,
                                        const char* what) {
  if (!threshold::verify_group(public_key(signer_chain), message, sig)) {
    throw CoordError(std::string(what) + ": invalid group signature");
  }
}

CoordinationEntry CoordinationChain::start(
    const TxId& crosschain_tx_id, BlockchainId originating_chain,
    uint64_t timeout_block, const threshold::GroupSignature& start_msg_sig) {
  if (entries_.count(crosschain_tx_id)) {
    throw CoordError("start: crosschain transaction id already used");
  }
  if (timeout_block <= block_) {
    throw CoordError("start: timeout block is not in the future");
  }
  verify_or_throw(originating_chain,
                  start_message(crosschain_tx_id, originating_chain, timeout_block),
                  start_msg_sig, "start");
  charge_accepted_call();
  CoordinationEntry e{crosschain_tx_id, originating_chain, CoordState::Started,
                      timeout_block};
  entries_.emplace(crosschain_tx_id, e);
  return e;
}

CoordinationEntry CoordinationChain::commit(
    const TxId& crosschain_tx_id, const threshold::GroupSignature& commit_msg_sig) {
  auto it = entries_.find(crosschain_tx_id);
  if (it == entries_.end()) throw CoordError("commit: unknown crosschain transaction");
  if (it->second.state != CoordState::Started) {
    throw CoordError("commit: entry is not in the Started state");
  }
  if (block_ > it->second.timeout_block) throw CoordError("commit: entry expired");
  verify_or_throw(it->second.originating_chain, commit_message(crosschain_tx_id),
                  commit_msg_sig, "commit");
  charge_accepted_call();
  it->second.state = CoordState::Committed;
  return it->second;
}

CoordinationEntry CoordinationChain::ignore(
    const TxId& crosschain_tx_id, const threshold::GroupSignature& ignore_msg_sig) {
  auto it = entries_.find(crosschain_tx_id);
  if (it == entries_.end()) throw CoordError("ignore: unknown crosschain transaction");
  if (it->second.state != CoordState::Started) {
    throw CoordError("ignore: entry is not in the Started state");
  }
  if (block_ > it->second.timeout_block) throw CoordError("ignore: entry expired");
  verify_or_throw(it->second.originating_chain, ignore_message(crosschain_tx_id),
                  ignore_msg_sig, "ignore");
  charge_accepted_call();
  it->second.state = CoordState::Ignored;
  return it->second;
}

CoordState CoordinationChain::effective_state(const TxId& crosschain_tx_id,
                                              uint64_t current_block) const {
  const CoordinationEntry& e = entry(crosschain_tx_id);
  if (e.state == CoordState::Started && current_block > e.timeout_block) {
    return CoordState::Ignored;
  }
  return e.state;
}

const CoordinationEntry& CoordinationChain::entry(const TxId& crosschain_tx_id) const {
  auto it = entries_.find(crosschain_tx_id);
  if (it == entries_.end()) throw CoordError("unknown crosschain transaction id");
  return it->second;
}

const CoordinationEntry* CoordinationChain::find(const TxId& crosschain_tx_id) const {
  auto it = entries_.find(crosschain_tx_id);
  return it == entries_.end() ? nullptr : &it->second;
}

nlohmann::json CoordinationChain::entries_dump() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [id, e] : entries_) {
    out.push_back({{"id", txid_hex(id)},
                   {"state", to_string(e.state)},
                   {"timeout_block", e.timeout_block},
                   {"originating_chain", e.originating_chain}});
  }
  return out;
}

}  // namespace xchain::coordination
