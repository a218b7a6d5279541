#include "xchain/ledger.hpp"

#include <algorithm>

namespace xchain::ledger {

std::string to_string(Behavior b) {
  switch (b) {
    case Behavior::Token: return "Token";
    case Behavior::Router: return "Router";
    case Behavior::Item: return "Item";
    case Behavior::SupplyChain: return "SupplyChain";
    case Behavior::Provenance: return "Provenance";
    case Behavior::OraclePriceFeed: return "OraclePriceFeed";
    case Behavior::SimpleAccount: return "SimpleAccount";
  }
  throw std::logic_error("unknown behavior");
}

Behavior behavior_from_string(const std::string& s) {
  if (s == "Token") return Behavior::Token;
  if (s == "Router") return Behavior::Router;
  if (s == "Item") return Behavior::Item;
  if (s == "SupplyChain") return Behavior::SupplyChain;
  if (s == "Provenance") return Behavior::Provenance;
  if (s == "OraclePriceFeed") return Behavior::OraclePriceFeed;
  if (s == "SimpleAccount") return Behavior::SimpleAccount;
  throw ChainError("unknown behavior: " + s);
}

// ----------------------------------------------------------------- Chain

std::string Chain::deploy(Behavior behavior, bool lockable,
                          std::map<std::string, Value> initial_state,
                          const std::string& name) {
  std::string address =
      name.empty() ? "c" + std::to_string(id_) + "-" + std::to_string(next_address_++)
                   : name;
  if (contracts_.count(address)) throw ChainError("address already in use: " + address);
  ContractState c;
  c.address = address;
  c.behavior = behavior;
  c.lockable = lockable;
  c.committed = std::move(initial_state);
  contracts_.emplace(address, std::move(c));
  return address;
}

ContractState& Chain::contract_mut(const std::string& address) {
  auto it = contracts_.find(address);
  if (it == contracts_.end()) throw ChainError("no such contract: " + address);
  return it->second;
}

const ContractState& Chain::contract(const std::string& address) const {
  auto it = contracts_.find(address);
  if (it == contracts_.end()) throw ChainError("no such contract: " + address);
  return it->second;
}

const ContractState* Chain::find(const std::string& address) const {
  auto it = contracts_.find(address);
  return it == contracts_.end() ? nullptr : &it->second;
}

Receipt Chain::execute_local(const LocalTransaction& tx) {
  const ContractState& target = contract(tx.target);
  if (costs_) costs_->base_tx(id_);
  ExecutionContext ctx(*this, ExecutionContext::Mode::Local, std::nullopt, nullptr,
                       nullptr);
  invoke(ctx, target, tx.function, tx.args);
  return Receipt{tx.target, tx.function};
}

Value Chain::execute_view(const std::string& target, const std::string& function,
                          const Args& args, const std::optional<TxId>& reader) const {
  Chain& self = const_cast<Chain&>(*this);  // View mode never mutates
  ExecutionContext ctx(self, ExecutionContext::Mode::View, reader, nullptr, nullptr);
  return invoke_view(ctx, contract(target), function, args);
}

void Chain::process_crosschain_part(const CrosschainPart& part,
                                    SubordinateDispatcher& dispatcher) {
  const ContractState& target = contract(part.target);
  // The trial execution is the transaction execution (one base unit); a
  // failed trial still consumed it.
  if (costs_) costs_->base_tx(id_);

  ExecutionContext ctx(*this, ExecutionContext::Mode::Crosschain,
                       part.crosschain_tx_id, &part.subordinates, &dispatcher);

  // Dispatch all subordinate views up front and cache their results.
  for (size_t i = 0; i < part.subordinates.size(); ++i) {
    if (part.subordinates[i].kind == CallKind::View) {
      ctx.view_results_.push_back(dispatcher.dispatch_view(i));
    }
  }

  invoke(ctx, target, part.function, part.args);
  ctx.check_all_subordinates_consumed();

  // Acquire locks and retain the overlay as provisional state.
  for (auto& [address, kvs] : ctx.overlay_) {
    ContractState& c = contract_mut(address);
    c.lock = part.crosschain_tx_id;
    for (auto& [k, v] : kvs) c.provisional[k] = v;
  }

  // Hand the signed subordinate transactions over for submission.
  for (size_t i = 0; i < part.subordinates.size(); ++i) {
    if (part.subordinates[i].kind == CallKind::Transaction) {
      dispatcher.submit_transaction(i);
    }
  }
}

Receipt Chain::apply_signalling(const TxId& crosschain_tx_id,
                                SignallingOutcome outcome) {
  if (!has_locks(crosschain_tx_id)) {
    throw ChainError("no contracts locked by this crosschain transaction");
  }
  if (costs_) costs_->base_tx(id_);
  for (auto& [address, c] : contracts_) {
    if (c.lock && *c.lock == crosschain_tx_id) {
      if (outcome == SignallingOutcome::Commit) {
        for (auto& [k, v] : c.provisional) c.committed[k] = v;
      }
      c.provisional.clear();
      c.lock.reset();
    }
  }
  return Receipt{"", outcome == SignallingOutcome::Commit ? "commit" : "ignore"};
}

std::string Chain::select_unlocked_item(
    const std::string& router_address,
    const std::function<bool(const ContractState&)>& predicate) const {
  const ContractState& router = contract(router_address);
  auto count_it = router.committed.find("item_count");
  if (count_it == router.committed.end()) throw ChainError("router has no items");
  int64_t count = count_it->second.as_int();
  for (int64_t k = 0; k < count; ++k) {
    auto it = router.committed.find("item:" + std::to_string(k));
    if (it == router.committed.end()) continue;
    const ContractState* item = find(it->second.as_str());
    if (!item || item->lock.has_value()) continue;
    if (predicate(*item)) return item->address;
  }
  throw ChainError("no unlocked item available");
}

bool Chain::has_locks(const TxId& crosschain_tx_id) const {
  for (const auto& [address, c] : contracts_) {
    if (c.lock && *c.lock == crosschain_tx_id) return true;
  }
  return false;
}

nlohmann::json Chain::state_dump() const {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [address, c] : contracts_) {
    nlohmann::json committed = nlohmann::json::object();
    for (const auto& [k, v] : c.committed) committed[k] = v.to_json();
    out[address] = nlohmann::json{
        {"behavior", to_string(c.behavior)},
        {"lockable", c.lockable},
        {"lock", c.lock ? nlohmann::json(txid_hex(*c.lock)) : nlohmann::json()},
        {"committed", committed}};
  }
  return out;
}

void Chain::force_lock(const std::string& address, const TxId& crosschain_tx_id) {
  ContractState& c = contract_mut(address);
  if (!c.lockable) throw ChainError("cannot lock a nonlockable contract");
  if (c.lock) throw ChainError("contract already locked");
  c.lock = crosschain_tx_id;
}

// ------------------------------------------------------ ExecutionContext

ExecutionContext::ExecutionContext(Chain& chain, Mode mode, std::optional<TxId> txid,
                                   const std::vector<SubordinateCallRecord>* subs,
                                   SubordinateDispatcher* dispatcher)
    : chain_(chain), mode_(mode), txid_(txid), subordinates_(subs),
      dispatcher_(dispatcher) {}

const Value* ExecutionContext::lookup(const std::string& address,
                                      const std::string& key) const {
  if (mode_ == Mode::Crosschain) {
    auto a = overlay_.find(address);
    if (a != overlay_.end()) {
      auto k = a->second.find(key);
      if (k != a->second.end()) return &k->second;
    }
  }
  const ContractState& c = chain_.contract(address);
  if (txid_ && c.lock && *c.lock == *txid_) {
    auto k = c.provisional.find(key);
    if (k != c.provisional.end()) return &k->second;
  }
  auto k = c.committed.find(key);
  if (k != c.committed.end()) return &k->second;
  return nullptr;
}

Value ExecutionContext::get(const std::string& address, const std::string& key) const {
  const Value* v = lookup(address, key);
  if (!v) throw ChainError("missing state key '" + key + "' on " + address);
  return *v;
}

std::optional<Value> ExecutionContext::try_get(const std::string& address,
                                               const std::string& key) const {
  const Value* v = lookup(address, key);
  if (!v) return std::nullopt;
  return *v;
}

void ExecutionContext::put(const std::string& address, const std::string& key,
                           Value value) {
  ContractState& c = chain_.contract_mut(address);
  switch (mode_) {
    case Mode::View:
      throw ChainError("view execution cannot update state");
    case Mode::Local:
      if (c.lock) throw ChainError("contract is locked: " + address);
      c.committed[key] = std::move(value);
      return;
    case Mode::Crosschain:
      if (!c.lockable) {
        throw ChainError("crosschain update to nonlockable contract: " + address);
      }
      if (c.lock && !(*c.lock == *txid_)) {
        throw ChainError("contract already locked: " + address);
      }
      overlay_[address][key] = std::move(value);
      return;
  }
}

void ExecutionContext::call_local(const std::string& address,
                                  const std::string& function, const Args& args) {
  invoke(*this, chain_.contract(address), function, args);
}

Value ExecutionContext::call_local_view(const std::string& address,
                                        const std::string& function,
                                        const Args& args) const {
  return invoke_view(*this, chain_.contract(address), function, args);
}

void ExecutionContext::subcall_tx(BlockchainId chain, const std::string& target,
                                  const std::string& function, const Args& args) {
  if (mode_ != Mode::Crosschain || !subordinates_) {
    throw ChainError("subordinate transaction call outside crosschain execution");
  }
  // Locate the next signed subordinate transaction record.
  size_t ordinal = 0;
  for (size_t i = 0; i < subordinates_->size(); ++i) {
    const auto& rec = (*subordinates_)[i];
    if (rec.kind != CallKind::Transaction) continue;
    if (ordinal++ < next_tx_) continue;
    if (rec.chain != chain || rec.target != target || rec.function != function ||
        rec.expected_args != args) {
      throw ChainError("subordinate transaction parameters do not match signed values");
    }
    ++next_tx_;
    return;
  }
  throw ChainError("subordinate transaction call has no signed counterpart");
}

Value ExecutionContext::subcall_view(BlockchainId chain, const std::string& target,
                                     const std::string& function, const Args& args) {
  if (mode_ != Mode::Crosschain || !subordinates_) {
    throw ChainError("subordinate view call outside crosschain execution");
  }
  size_t ordinal = 0;
  for (size_t i = 0; i < subordinates_->size(); ++i) {
    const auto& rec = (*subordinates_)[i];
    if (rec.kind != CallKind::View) continue;
    if (ordinal++ < next_view_) continue;
    if (rec.chain != chain || rec.target != target || rec.function != function ||
        rec.expected_args != args) {
      throw ChainError("subordinate view parameters do not match signed values");
    }
    if (next_view_ >= view_results_.size()) {
      throw ChainError("subordinate view result missing");
    }
    return view_results_[next_view_++];
  }
  throw ChainError("subordinate view call has no signed counterpart");
}

void ExecutionContext::check_all_subordinates_consumed() const {
  size_t want_tx = 0, want_view = 0;
  for (const auto& rec : *subordinates_) {
    (rec.kind == CallKind::Transaction ? want_tx : want_view) += 1;
  }
  if (next_tx_ != want_tx || next_view_ != want_view) {
    throw ChainError("signed subordinate calls were not all made by the execution");
  }
}

// -------------------------------------------------------------- behaviors

namespace {

void need_args(const Args& args, size_t n, const char* fn) {
  if (args.size() != n) {
    throw ChainError(std::string(fn) + ": wrong argument count");
  }
}

int64_t cfg_int(const ExecutionContext& ctx, const std::string& self,
                const std::string& key) {
  return ctx.get(self, key).as_int();
}

std::string cfg_str(const ExecutionContext& ctx, const std::string& self,
                    const std::string& key) {
  return ctx.get(self, key).as_str();
}

void token_transfer(ExecutionContext& ctx, const std::string& self, const Args& args) {
  need_args(args, 3, "transfer");
  const std::string& from = args[0].as_str();
  const std::string& to = args[1].as_str();
  int64_t amount = args[2].as_int();
  if (amount < 0) throw ChainError("transfer: negative amount");
  int64_t from_bal = ctx.try_get(self, "bal:" + from).value_or(Value(0)).as_int();
  if (from_bal < amount) throw ChainError("transfer: insufficient balance");
  if (from == to) return;
  int64_t to_bal = ctx.try_get(self, "bal:" + to).value_or(Value(0)).as_int();
  ctx.put(self, "bal:" + from, from_bal - amount);
  ctx.put(self, "bal:" + to, to_bal + amount);
}

void router_book(ExecutionContext& ctx, const std::string& self, const Args& args) {
  need_args(args, 4, "book");
  const std::string& date = args[0].as_str();
  const std::string& guest = args[1].as_str();
  const std::string& payer = args[2].as_str();
  int64_t amount = args[3].as_int();
  std::string item = ctx.chain().select_unlocked_item(
      self, [&](const ContractState& c) {
        return c.committed.find("booked:" + date) == c.committed.end();
      });
  ctx.call_local(item, "book", {date, guest});
  if (amount > 0) {
    ctx.call_local(cfg_str(ctx, self, "token"), "transfer",
                   {payer, cfg_str(ctx, self, "vendor"), amount});
  }
}

void item_book(ExecutionContext& ctx, const std::string& self, const Args& args) {
  need_args(args, 2, "book");
  const std::string& date = args[0].as_str();
  if (ctx.try_get(self, "booked:" + date)) throw ChainError("book: already booked");
  ctx.put(self, "booked:" + date, args[1].as_str());
}

void item_book_trip(ExecutionContext& ctx, const std::string& self, const Args& args) {
  need_args(args, 4, "book_trip");
  const Value& date = args[0];
  const Value& guest = args[1];
  const Value& payer = args[2];
  const Value& amount = args[3];
  ctx.subcall_tx(BlockchainId(cfg_int(ctx, self, "hotel_chain")),
                 cfg_str(ctx, self, "hotel_router"), "book",
                 {date, guest, payer, amount});
  ctx.subcall_tx(BlockchainId(cfg_int(ctx, self, "train_chain")),
                 cfg_str(ctx, self, "train_router"), "book",
                 {date, guest, payer, amount});
  ctx.put(self, "trip:" + date.as_str() + ":" + guest.as_str(), "booked");
}

void item_buy_if_cheap(ExecutionContext& ctx, const std::string& self, const Args& args) {
  need_args(args, 3, "buy_if_cheap");
  const std::string& commodity = args[0].as_str();
  int64_t max_price = args[1].as_int();
  int64_t qty = args[2].as_int();
  Value price = ctx.subcall_view(BlockchainId(cfg_int(ctx, self, "oracle_chain")),
                                 cfg_str(ctx, self, "oracle_feed"), "get", {commodity});
  if (price.as_int() > max_price) throw ChainError("buy_if_cheap: price above limit");
  int64_t held = ctx.try_get(self, "position:" + commodity).value_or(Value(0)).as_int();
  ctx.put(self, "position:" + commodity, held + qty);
  ctx.put(self, "paid:" + commodity, price.as_int() * qty);
}

void supply_record_event(ExecutionContext& ctx, const std::string& self, const Args& args) {
  need_args(args, 2, "record_event");
  ctx.put(self, "event:" + args[0].as_str(), args[1]);
}

void supply_record_with_provenance(ExecutionContext& ctx, const std::string& self,
                                   const Args& args) {
  need_args(args, 3, "record_with_provenance");
  const Value& id = args[0];
  ctx.subcall_tx(BlockchainId(cfg_int(ctx, self, "provenance_chain")),
                 cfg_str(ctx, self, "provenance_contract"), "record", {id, args[2]});
  ctx.put(self, "event:" + id.as_str(), args[1]);
}

// Generic composable step used to build deeper transaction trees: read an
// upstream value through a subordinate view (when configured), forward it
// through a subordinate transaction (when configured), record it locally.
void supply_sync(ExecutionContext& ctx, const std::string& self, const Args& args) {
  need_args(args, 2, "sync");
  const Value& id = args[0];
  Value val = args[1];
  if (ctx.try_get(self, "view_chain")) {
    val = ctx.subcall_view(BlockchainId(cfg_int(ctx, self, "view_chain")),
                           cfg_str(ctx, self, "view_target"), "get", {id});
  }
  if (ctx.try_get(self, "tx_chain")) {
    std::string fn =
        ctx.try_get(self, "tx_function").value_or(Value("record")).as_str();
    ctx.subcall_tx(BlockchainId(cfg_int(ctx, self, "tx_chain")),
                   cfg_str(ctx, self, "tx_target"), fn, {id, val});
  }
  ctx.put(self, "event:" + id.as_str(), val);
}

void provenance_record(ExecutionContext& ctx, const std::string& self, const Args& args) {
  need_args(args, 2, "record");
  ctx.put(self, "prov:" + args[0].as_str(), args[1]);
}

void oracle_set(ExecutionContext& ctx, const std::string& self, const Args& args) {
  need_args(args, 2, "set");
  ctx.put(self, "price:" + args[0].as_str(), args[1]);
}

void account_open(ExecutionContext& ctx, const std::string& self, const Args& args) {
  need_args(args, 2, "open");
  ctx.put(self, args[0].as_str(), args[1]);
}

}  // namespace

void invoke(ExecutionContext& ctx, const ContractState& contract,
            const std::string& function, const Args& args) {
  const std::string& self = contract.address;
  switch (contract.behavior) {
    case Behavior::Token:
      if (function == "transfer") return token_transfer(ctx, self, args);
      break;
    case Behavior::Router:
      if (function == "book") return router_book(ctx, self, args);
      break;
    case Behavior::Item:
      if (function == "book") return item_book(ctx, self, args);
      if (function == "book_trip") return item_book_trip(ctx, self, args);
      if (function == "buy_if_cheap") return item_buy_if_cheap(ctx, self, args);
      break;
    case Behavior::SupplyChain:
      if (function == "record_event") return supply_record_event(ctx, self, args);
      if (function == "record_with_provenance") {
        return supply_record_with_provenance(ctx, self, args);
      }
      if (function == "sync") return supply_sync(ctx, self, args);
      break;
    case Behavior::Provenance:
      if (function == "record") return provenance_record(ctx, self, args);
      break;
    case Behavior::OraclePriceFeed:
      if (function == "set") return oracle_set(ctx, self, args);
      break;
    case Behavior::SimpleAccount:
      if (function == "open") return account_open(ctx, self, args);
      break;
  }
  throw ChainError("unknown function '" + function + "' on " + to_string(contract.behavior));
}

Value invoke_view(const ExecutionContext& ctx, const ContractState& contract,
                  const std::string& function, const Args& args) {
  const std::string& self = contract.address;
  switch (contract.behavior) {
    case Behavior::Token:
      if (function == "balance_of") {
        need_args(args, 1, "balance_of");
        return ctx.try_get(self, "bal:" + args[0].as_str()).value_or(Value(0));
      }
      break;
    case Behavior::Item:
      if (function == "available") {
        need_args(args, 1, "available");
        bool taken = ctx.try_get(self, "booked:" + args[0].as_str()).has_value();
        return Value(taken ? 0 : 1);
      }
      if (function == "get") {
        need_args(args, 1, "get");
        return ctx.get(self, args[0].as_str());
      }
      break;
    case Behavior::SupplyChain:
      if (function == "get") {
        need_args(args, 1, "get");
        return ctx.get(self, "event:" + args[0].as_str());
      }
      break;
    case Behavior::Provenance:
      if (function == "get") {
        need_args(args, 1, "get");
        return ctx.get(self, "prov:" + args[0].as_str());
      }
      break;
    case Behavior::OraclePriceFeed:
      if (function == "get") {
        need_args(args, 1, "get");
        return ctx.get(self, "price:" + args[0].as_str());
      }
      break;
    case Behavior::SimpleAccount:
      if (function == "query") {
        need_args(args, 1, "query");
        return ctx.get(self, args[0].as_str());
      }
      break;
    default:
      break;
  }
  throw ChainError("unknown view '" + function + "' on " + to_string(contract.behavior));
}

}  // namespace xchain::ledger
