#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "xchain/protocol.hpp"

using namespace xchain;
using namespace xchain::protocol;

namespace {

// Hotel-and-train world: agency chain 1 originates, hotel chain 2 and train
// chain 3 each host a router over lockable items plus a payment token; the
// coordination chain is id 0. Four validators per chain, threshold 3.
struct World {
  CostAccounting costs;
  coordination::CoordinationChain coord{0, 4, &costs};
  TraceSink trace;
  Engine engine{coord, costs, &trace};
  ledger::Chain agency{1, &engine}, hotel{2, &engine}, train{3, &engine};
  UserSigner user = UserSigner::create(5);
  MultichainNode enterprise{"enterprise1", {{1, 1}, {2, 1}, {3, 1}}};
  std::string travel, hotel_router, train_router, hotel_token, train_token;
  std::vector<std::string> hotel_items, train_items;

  World() {
    engine.add_chain(agency, {4, 3}, 11);
    engine.add_chain(hotel, {4, 3}, 12);
    engine.add_chain(train, {4, 3}, 13);
    hotel_router = deploy_vendor(hotel, hotel_token, hotel_items, 2);
    train_router = deploy_vendor(train, train_token, train_items, 2);
    travel = agency.deploy(ledger::Behavior::Item, true,
                           {{"hotel_chain", Value(2)},
                            {"hotel_router", Value(hotel_router)},
                            {"train_chain", Value(3)},
                            {"train_router", Value(train_router)}});
  }

  static std::string deploy_vendor(ledger::Chain& chain, std::string& token,
                                   std::vector<std::string>& items, int count) {
    token = chain.deploy(ledger::Behavior::Token, true,
                         {{"bal:guest", Value(1000)}, {"bal:vendor", Value(0)}});
    std::map<std::string, Value> cfg{{"item_count", Value(int64_t(count))},
                                     {"token", Value(token)},
                                     {"vendor", Value("vendor")}};
    for (int k = 0; k < count; ++k) {
      items.push_back(chain.deploy(ledger::Behavior::Item, true, {}));
      cfg["item:" + std::to_string(k)] = Value(items.back());
    }
    return chain.deploy(ledger::Behavior::Router, false, cfg);
  }

  TxSpec trip_spec(const std::string& date, int64_t amount = 100,
                   int64_t hotel_amount = -1) const {
    Args a{date, "guest", "guest", Value(amount)};
    Args hotel_args = a;
    if (hotel_amount >= 0) hotel_args[3] = Value(hotel_amount);
    return TxSpec{TxKind::Originating, 1, travel, "book_trip", a,
                  {TxSpec{TxKind::Subordinate, 2, hotel_router, "book", hotel_args, {}},
                   TxSpec{TxKind::Subordinate, 3, train_router, "book", a, {}}}};
  }

  CrosschainTransaction build(const TxSpec& spec, uint64_t nonce = 1,
                              uint64_t timeout = 10) {
    return engine.build_crosschain_tx(spec, enterprise, user, nonce, timeout);
  }

  int64_t vendor_balance(ledger::Chain& chain, const std::string& token) {
    return chain.execute_view(token, "balance_of", {"vendor"}).as_int();
  }
  bool any_locks() {
    for (auto* c : {&agency, &hotel, &train}) {
      for (const auto& [addr, st] : c->contracts()) {
        if (st.lock) return true;
      }
    }
    return false;
  }
  std::vector<std::string> event_names() {
    std::vector<std::string> names;
    for (const auto& e : trace.events()) names.push_back(e.event);
    return names;
  }
};

}  // namespace

TEST_CASE("building the tree signs children depth-first under one context") {
  World w;
  auto tx = w.build(w.trip_spec("jan1"));
  CHECK(tx.kind == TxKind::Originating);
  REQUIRE(tx.subordinates.size() == 2);
  CHECK(tx.subordinates[0].chain == 2);
  CHECK(tx.subordinates[1].chain == 3);
  for (const auto& child : tx.subordinates) {
    CHECK(child.crosschain_tx_id == tx.crosschain_tx_id);
    CHECK(child.timeout_block == tx.timeout_block);
    CHECK(child.coordination_chain == 0);
    CHECK(!child.sender_signature.empty());
  }
  CHECK_NOTHROW(verify_tx_tree(tx));

  SUBCASE("ids are deterministic in the spec and nonce") {
    CHECK(w.build(w.trip_spec("jan1"), 1).crosschain_tx_id == tx.crosschain_tx_id);
    CHECK_FALSE(w.build(w.trip_spec("jan1"), 2).crosschain_tx_id ==
                tx.crosschain_tx_id);
    CHECK_FALSE(w.build(w.trip_spec("feb2"), 1).crosschain_tx_id ==
                tx.crosschain_tx_id);
  }
  SUBCASE("any mutation of an embedded part breaks verification") {
    auto t1 = tx;
    t1.subordinates[0].args[3] = Value(1);
    CHECK_THROWS_AS(verify_tx_tree(t1), ProtocolError);
    auto t2 = tx;
    t2.subordinates[1].sender_signature[5] ^= 1;
    CHECK_THROWS_AS(verify_tx_tree(t2), ProtocolError);
    auto t3 = tx;
    t3.timeout_block += 1;
    CHECK_THROWS_AS(verify_tx_tree(t3), ProtocolError);
    auto t4 = tx;
    t4.subordinates[0].timeout_block += 1;  // context must be uniform
    CHECK_THROWS_AS(verify_tx_tree(t4), ProtocolError);
  }
  SUBCASE("an instigator must cover every chain in the tree") {
    MultichainNode partial{"enterprise4", {{1, 2}, {2, 2}}};
    CHECK_THROWS_WITH_AS(
        w.engine.build_crosschain_tx(w.trip_spec("jan1"), partial, w.user, 1, 10),
        "enterprise4 has no validator on chain 3", ProtocolError);
  }
  SUBCASE("view nodes may not contain subordinate transactions") {
    TxSpec bad{TxKind::Originating, 1, w.travel, "book_trip",
               {"jan1", "guest", "guest", Value(1)},
               {TxSpec{TxKind::View, 2, w.hotel_router, "book", {},
                       {TxSpec{TxKind::Subordinate, 3, w.train_router, "book", {}, {}}}}}};
    CHECK_THROWS_AS(w.build(bad), ProtocolError);
  }
}

TEST_CASE("happy path commits on every chain with exact verification counts") {
  World w;
  auto tx = w.build(w.trip_spec("jan1"));
  auto outcome = w.engine.run_originating(tx, w.enterprise);
  REQUIRE(outcome.committed);

  // State landed everywhere and no lock remains.
  CHECK(w.vendor_balance(w.hotel, w.hotel_token) == 100);
  CHECK(w.vendor_balance(w.train, w.train_token) == 100);
  CHECK(w.hotel.execute_view(w.hotel_items[0], "available", {"jan1"}).as_int() == 0);
  CHECK(w.train.execute_view(w.train_items[0], "available", {"jan1"}).as_int() == 0);
  CHECK_FALSE(w.any_locks());
  CHECK(w.coord.effective_state(tx.crosschain_tx_id) ==
        coordination::CoordState::Committed);

  // Group-signature verifications per role: the originating coordinator does
  // Start + Commit generation plus one per incoming Ready; other originating
  // validators one per Ready; coordination nodes one per contract call; each
  // subordinate coordinator one Ready generation.
  CHECK(w.costs.stats({1, 1}).group_verify_count == 4);
  for (int v = 2; v <= 4; ++v) CHECK(w.costs.stats({1, v}).group_verify_count == 2);
  for (int v = 1; v <= 4; ++v) CHECK(w.costs.stats({0, v}).group_verify_count == 2);
  CHECK(w.costs.stats({2, 1}).group_verify_count == 1);
  CHECK(w.costs.stats({3, 1}).group_verify_count == 1);
  for (int v = 2; v <= 4; ++v) {
    CHECK(w.costs.stats({2, v}).group_verify_count == 0);
    CHECK(w.costs.stats({3, v}).group_verify_count == 0);
  }

  // Base units: one originating + one signalling transaction on chain 1, one
  // subordinate + one signalling on chains 2 and 3, two contract calls on 0.
  for (BlockchainId c : {0u, 1u, 2u, 3u}) {
    for (int v = 1; v <= 4; ++v) CHECK(w.costs.stats({c, v}).base_tx_count == 2);
  }
  CHECK(w.costs.busy_time({1, 1}) == doctest::Approx(2.0 / 375.0 + 4 * 0.005));
  CHECK(w.costs.busy_time({1, 2}) == doctest::Approx(2.0 / 375.0 + 2 * 0.005));

  CHECK(w.event_names() ==
        std::vector<std::string>{"start", "subordinate_ready", "subordinate_ready",
                                 "commit", "signalling_commit", "signalling_commit",
                                 "signalling_commit"});
}

TEST_CASE("a single-chain tree degenerates to an ordinary transaction") {
  World w;
  auto acct = w.agency.deploy(ledger::Behavior::SimpleAccount, true, {});
  TxSpec spec{TxKind::Originating, 1, acct, "open", {"alice", Value(7)}, {}};
  auto outcome = w.engine.run_originating(w.build(spec), w.enterprise);
  CHECK(outcome.committed);
  CHECK(w.agency.execute_view(acct, "query", {"alice"}).as_int() == 7);
  CHECK(w.costs.stats({1, 1}).group_verify_count == 2);  // Start + Commit only
  CHECK(w.costs.stats({1, 2}).group_verify_count == 0);
}

TEST_CASE("subordinate failure rolls every chain back") {
  World w;
  TxId foreign{};
  foreign.fill(0xee);

  SUBCASE("first subordinate fails before anything else locks") {
    for (const auto& item : w.hotel_items) w.hotel.force_lock(item, foreign);
    auto outcome = w.engine.run_originating(w.build(w.trip_spec("jan1")),
                                            w.enterprise);
    CHECK_FALSE(outcome.committed);
    CHECK(outcome.reason.find("no unlocked item") != std::string::npos);
    CHECK(w.vendor_balance(w.train, w.train_token) == 0);
    CHECK(w.train.execute_view(w.train_items[0], "available", {"jan1"}).as_int() == 1);
  }
  SUBCASE("second subordinate fails after the first holds provisional state") {
    for (const auto& item : w.train_items) w.train.force_lock(item, foreign);
    auto outcome = w.engine.run_originating(w.build(w.trip_spec("jan1")),
                                            w.enterprise);
    CHECK_FALSE(outcome.committed);
    // The hotel's provisional booking and payment were discarded.
    CHECK(w.vendor_balance(w.hotel, w.hotel_token) == 0);
    CHECK(w.hotel.execute_view(w.hotel_items[0], "available", {"jan1"}).as_int() == 1);
  }

  CHECK_FALSE(w.agency.contract(w.travel).lock.has_value());
  CHECK(w.coord.entries_dump()[0].at("state") == "Ignored");
  // Ignore still costs a generation verification on the coordinator.
  CHECK(w.costs.stats({1, 1}).group_verify_count >= 2);
}

TEST_CASE("signed subordinate parameters that disagree with execution abort") {
  World w;
  // The user signs a hotel part paying 1 while the agency contract pays 100.
  auto tx = w.build(w.trip_spec("jan1", 100, 1));
  auto outcome = w.engine.run_originating(tx, w.enterprise);
  CHECK_FALSE(outcome.committed);
  CHECK(outcome.reason.find("do not match signed values") != std::string::npos);
  CHECK_FALSE(w.any_locks());
  CHECK(w.vendor_balance(w.hotel, w.hotel_token) == 0);
  CHECK(w.vendor_balance(w.train, w.train_token) == 0);
}

TEST_CASE("timeout before commit discards all provisional state") {
  World w;
  auto tx = w.build(w.trip_spec("jan1"), 1, 5);
  w.engine.after_start_hook = [&] { w.coord.advance_block(6); };
  auto outcome = w.engine.run_originating(tx, w.enterprise);
  CHECK_FALSE(outcome.committed);
  CHECK(outcome.reason == "coordination timeout");
  CHECK_FALSE(w.any_locks());
  CHECK(w.vendor_balance(w.hotel, w.hotel_token) == 0);
  CHECK(w.vendor_balance(w.train, w.train_token) == 0);
  CHECK(w.coord.effective_state(tx.crosschain_tx_id) ==
        coordination::CoordState::Ignored);
  // The stored entry is still Started: nobody could submit a valid Ignore.
  CHECK(w.coord.entry(tx.crosschain_tx_id).state ==
        coordination::CoordState::Started);
}

TEST_CASE("signing rounds absorb bad shares once and then avoid the culprit") {
  World w;
  w.engine.set_fault({1, 2}, Fault::BadShare);

  auto o1 = w.engine.run_originating(w.build(w.trip_spec("jan1"), 1), w.enterprise);
  CHECK(o1.committed);
  CHECK(w.engine.deprioritized(1) == std::set<int>{2});
  uint64_t spike = w.costs.stats({1, 1}).share_verify_count;
  CHECK(spike > 0);  // per-share fallback ran at least once
  // Nobody else did share verifications.
  for (int v = 2; v <= 4; ++v) CHECK(w.costs.stats({1, v}).share_verify_count == 0);
  for (BlockchainId c : {0u, 2u, 3u}) {
    for (int v = 1; v <= 4; ++v) CHECK(w.costs.stats({c, v}).share_verify_count == 0);
  }

  // Later rounds order the culprit last, so the fast path succeeds.
  auto o2 = w.engine.run_originating(w.build(w.trip_spec("feb2"), 2), w.enterprise);
  CHECK(o2.committed);
  CHECK(w.costs.stats({1, 1}).share_verify_count == spike);
}

TEST_CASE("signing rounds fail below the honest threshold") {
  World w;
  Bytes msg{1, 2, 3};
  SUBCASE("two silent validators of four, threshold three") {
    w.engine.set_fault({1, 2}, Fault::Silent);
    w.engine.set_fault({1, 3}, Fault::Silent);
    CHECK_THROWS_WITH_AS(w.engine.threshold_sign_round(1, 1, msg),
                         "not enough responsive validators to reach the threshold",
                         ProtocolError);
  }
  SUBCASE("two bad shares of four, threshold three") {
    w.engine.set_fault({1, 2}, Fault::BadShare);
    w.engine.set_fault({1, 3}, Fault::BadShare);
    CHECK_THROWS_WITH_AS(w.engine.threshold_sign_round(1, 1, msg),
                         "could not assemble a valid group signature", ProtocolError);
  }
  SUBCASE("one silent validator is simply skipped") {
    w.engine.set_fault({1, 4}, Fault::Silent);
    auto sig = w.engine.threshold_sign_round(1, 1, msg);
    CHECK(threshold::verify_group(w.engine.chain_keys(1).group_pk, msg, sig));
  }
}

TEST_CASE("subordinate views feed the originating execution and are charged") {
  World w;
  ledger::Chain trader{4, &w.engine}, oracle{5, &w.engine};
  w.engine.add_chain(trader, {4, 3}, 14);
  w.engine.add_chain(oracle, {4, 3}, 15);
  auto feed = oracle.deploy(ledger::Behavior::OraclePriceFeed, true, {});
  oracle.execute_local({feed, "set", {"gold", Value(50)}, "op"});
  auto desk = trader.deploy(ledger::Behavior::Item, true,
                            {{"oracle_chain", Value(5)}, {"oracle_feed", Value(feed)}});
  MultichainNode node{"trader1", {{4, 1}, {5, 1}}};
  uint64_t oracle_base_before = w.costs.stats({5, 1}).base_tx_count;

  TxSpec spec{TxKind::Originating, 4, desk, "buy_if_cheap",
              {"gold", Value(60), Value(3)},
              {TxSpec{TxKind::View, 5, feed, "get", {"gold"}, {}}}};
  auto tx = w.engine.build_crosschain_tx(spec, node, w.user, 1, 10);
  auto outcome = w.engine.run_originating(tx, node);
  REQUIRE(outcome.committed);
  CHECK(trader.execute_view(desk, "get", {"paid:gold"}).as_int() == 150);

  // Start + Commit + one view-result verification on the trader coordinator;
  // one result verification on the other trader validators; one generation
  // verification on the oracle coordinator; views mine nothing.
  CHECK(w.costs.stats({4, 1}).group_verify_count == 3);
  for (int v = 2; v <= 4; ++v) CHECK(w.costs.stats({4, v}).group_verify_count == 1);
  CHECK(w.costs.stats({5, 1}).group_verify_count == 1);
  CHECK(w.costs.stats({5, 1}).base_tx_count == oracle_base_before);
  CHECK(w.costs.stats({4, 1}).base_tx_count == 2);

  SUBCASE("a failing view aborts the whole transaction") {
    TxSpec bad{TxKind::Originating, 4, desk, "buy_if_cheap",
               {"silver", Value(60), Value(3)},
               {TxSpec{TxKind::View, 5, feed, "get", {"silver"}, {}}}};
    auto outcome2 = w.engine.run_originating(
        w.engine.build_crosschain_tx(bad, node, w.user, 2, 10), node);
    CHECK_FALSE(outcome2.committed);
    CHECK(outcome2.reason.find("subordinate view failed") != std::string::npos);
    CHECK_FALSE(trader.has_locks(tx.crosschain_tx_id));
  }
}

TEST_CASE("two nested subordinate transactions and a subordinate view commit") {
  // Chain 1 calls chain 2, whose part reads a view from chain 3 and forwards
  // the value to chain 4.
  World w;  // reuse chains 1..3 as A..C and add chain 4 as D
  ledger::Chain d{4, &w.engine};
  w.engine.add_chain(d, {4, 3}, 16);
  auto c1 = w.train.deploy(ledger::Behavior::SupplyChain, true,
                           {{"event:lot7", Value("grade-A")}});
  auto d1 = d.deploy(ledger::Behavior::Provenance, true, {});
  auto b1 = w.hotel.deploy(ledger::Behavior::SupplyChain, true,
                           {{"view_chain", Value(3)}, {"view_target", Value(c1)},
                            {"tx_chain", Value(4)}, {"tx_target", Value(d1)}});
  auto a1 = w.agency.deploy(ledger::Behavior::SupplyChain, true,
                            {{"tx_chain", Value(2)}, {"tx_target", Value(b1)},
                             {"tx_function", Value("sync")}});
  MultichainNode node{"enterprise1", {{1, 1}, {2, 1}, {3, 1}, {4, 1}}};

  TxSpec spec{TxKind::Originating, 1, a1, "sync", {"lot7", Value("seed")},
              {TxSpec{TxKind::Subordinate, 2, b1, "sync", {"lot7", Value("seed")},
                      {TxSpec{TxKind::View, 3, c1, "get", {"lot7"}, {}},
                       TxSpec{TxKind::Subordinate, 4, d1, "record",
                              {"lot7", Value("grade-A")}, {}}}}}};
  auto tx = w.engine.build_crosschain_tx(spec, node, w.user, 1, 10);
  REQUIRE(tx.subordinates[0].subordinates.size() == 2);
  auto outcome = w.engine.run_originating(tx, node);
  REQUIRE(outcome.committed);

  CHECK(w.agency.execute_view(a1, "get", {"lot7"}).as_str() == "seed");
  CHECK(w.hotel.execute_view(b1, "get", {"lot7"}).as_str() == "grade-A");
  CHECK(d.execute_view(d1, "get", {"lot7"}).as_str() == "grade-A");
  CHECK_FALSE(w.any_locks());
  CHECK_FALSE(d.has_locks(tx.crosschain_tx_id));

  // View results are verified on their calling chain (2); Ready messages all
  // flow to the originating chain (1).
  CHECK(w.costs.stats({1, 1}).group_verify_count == 4);  // Start, Commit, 2 Readies
  CHECK(w.costs.stats({1, 2}).group_verify_count == 2);  // 2 Readies
  CHECK(w.costs.stats({2, 1}).group_verify_count == 2);  // Ready generation, view res
  CHECK(w.costs.stats({2, 2}).group_verify_count == 1);  // view result
  CHECK(w.costs.stats({3, 1}).group_verify_count == 1);  // view result generation
  CHECK(w.costs.stats({4, 1}).group_verify_count == 1);  // Ready generation
}
