#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "xchain/coordination.hpp"

using namespace xchain;
using namespace xchain::coordination;

namespace {

TxId make_txid(uint8_t fill) {
  TxId id{};
  id.fill(fill);
  return id;
}

struct SigningChain {
  threshold::ThresholdParams params{4, 3};
  threshold::KeySet keys;

  explicit SigningChain(uint64_t seed) : keys(threshold::keygen(params, seed)) {}

  threshold::GroupSignature sign(const Bytes& message) const {
    std::vector<threshold::SignatureShare> shares;
    for (int i = 0; i < params.m; ++i) {
      shares.push_back(threshold::sign_share(keys.shares[i], message));
    }
    return threshold::combine_shares(shares, params);
  }
};

struct Fixture {
  CostAccounting costs;
  CoordinationChain coord{0, 4, &costs};
  SigningChain origin{101};

  Fixture() { coord.register_public_key(1, origin.keys.group_pk); }

  CoordinationEntry start(const TxId& id, uint64_t timeout) {
    return coord.start(id, 1, timeout, origin.sign(start_message(id, 1, timeout)));
  }
  CoordinationEntry commit(const TxId& id) {
    return coord.commit(id, origin.sign(commit_message(id)));
  }
  CoordinationEntry ignore(const TxId& id) {
    return coord.ignore(id, origin.sign(ignore_message(id)));
  }
  uint64_t verifies_on_every_node() const {
    uint64_t v = costs.stats(NodeRef{0, 1}).group_verify_count;
    for (int k = 2; k <= 4; ++k) {
      REQUIRE(costs.stats(NodeRef{0, k}).group_verify_count == v);
      REQUIRE(costs.stats(NodeRef{0, k}).base_tx_count == v);
    }
    return v;
  }
};

}  // namespace

TEST_CASE("public key registry is versioned and returns the newest key") {
  CoordinationChain coord(0, 4);
  CHECK_THROWS_AS(coord.public_key(7), CoordError);
  CHECK(coord.key_version(7) == 0);

  SigningChain a(1), b(2);
  CHECK(coord.register_public_key(7, a.keys.group_pk) == 1);
  CHECK(coord.public_key(7) == a.keys.group_pk);
  CHECK(coord.register_public_key(7, b.keys.group_pk) == 2);
  CHECK(coord.key_version(7) == 2);
  CHECK(coord.public_key(7) == b.keys.group_pk);
  CHECK_FALSE(coord.public_key(7) == a.keys.group_pk);
}

TEST_CASE("start records an entry and rejects bad preconditions") {
  Fixture f;
  TxId id = make_txid(0x01);
  auto e = f.start(id, 10);
  CHECK(e.state == CoordState::Started);
  CHECK(e.timeout_block == 10);
  CHECK(f.coord.entry(id).originating_chain == 1);

  SUBCASE("duplicate id is rejected") {
    CHECK_THROWS_WITH_AS(f.start(id, 12), "start: crosschain transaction id already used",
                         CoordError);
  }
  SUBCASE("timeout at or before the current block is rejected") {
    f.coord.advance_block(5);
    CHECK_THROWS_AS(f.start(make_txid(0x02), 5), CoordError);
    CHECK_THROWS_AS(f.start(make_txid(0x02), 3), CoordError);
    CHECK(f.start(make_txid(0x02), 6).state == CoordState::Started);
  }
  SUBCASE("a signature over a different id does not transfer") {
    TxId other = make_txid(0x03);
    auto sig = f.origin.sign(start_message(id, 1, 20));
    CHECK_THROWS_WITH_AS(f.coord.start(other, 1, 20, sig),
                         "start: invalid group signature", CoordError);
  }
  SUBCASE("a signature under an unregistered chain key is rejected") {
    SigningChain rogue(999);
    TxId other = make_txid(0x04);
    auto sig = rogue.sign(start_message(other, 1, 20));
    CHECK_THROWS_AS(f.coord.start(other, 1, 20, sig), CoordError);
  }
}

TEST_CASE("entries move Started to Committed or Ignored exactly once") {
  Fixture f;
  TxId id = make_txid(0x10);
  f.start(id, 10);

  SUBCASE("commit") {
    CHECK(f.commit(id).state == CoordState::Committed);
    CHECK_THROWS_AS(f.commit(id), CoordError);
    CHECK_THROWS_AS(f.ignore(id), CoordError);
    f.coord.advance_block(100);  // committed entries never expire
    CHECK(f.coord.effective_state(id) == CoordState::Committed);
  }
  SUBCASE("ignore") {
    CHECK(f.ignore(id).state == CoordState::Ignored);
    CHECK_THROWS_AS(f.commit(id), CoordError);
    CHECK(f.coord.effective_state(id) == CoordState::Ignored);
  }
  SUBCASE("commit of an unknown id fails") {
    CHECK_THROWS_AS(f.commit(make_txid(0x11)), CoordError);
    CHECK_THROWS_AS(f.coord.effective_state(make_txid(0x11)), CoordError);
  }
  SUBCASE("a tampered commit signature is rejected and the entry stays Started") {
    auto sig = f.origin.sign(ignore_message(id));
    CHECK_THROWS_AS(f.coord.commit(id, sig), CoordError);
    CHECK(f.coord.entry(id).state == CoordState::Started);
  }
}

TEST_CASE("timeouts use strict greater-than and are permanent") {
  Fixture f;
  TxId id = make_txid(0x20);
  f.start(id, 10);

  SUBCASE("commit landing exactly at the timeout block succeeds") {
    f.coord.advance_block(10);
    CHECK(f.coord.effective_state(id) == CoordState::Started);
    CHECK(f.commit(id).state == CoordState::Committed);
  }
  SUBCASE("one block past the timeout the entry is expired") {
    f.coord.advance_block(11);
    CHECK(f.coord.effective_state(id) == CoordState::Ignored);
    CHECK_THROWS_WITH_AS(f.commit(id), "commit: entry expired", CoordError);
    CHECK_THROWS_AS(f.ignore(id), CoordError);
    // Once reported Ignored by timeout, it reports Ignored forever.
    for (int i = 0; i < 5; ++i) {
      f.coord.advance_block();
      CHECK(f.coord.effective_state(id) == CoordState::Ignored);
    }
    CHECK(f.coord.entry(id).state == CoordState::Started);  // stored state
  }
  SUBCASE("effective state is evaluated against the supplied block") {
    CHECK(f.coord.effective_state(id, 10) == CoordState::Started);
    CHECK(f.coord.effective_state(id, 11) == CoordState::Ignored);
  }
}

TEST_CASE("random traces never transition out of a terminal state") {
  Fixture f;
  SplitMix64 rng{42};
  std::map<TxId, CoordState> terminal;
  for (int step = 0; step < 300; ++step) {
    TxId id = make_txid(uint8_t(rng.next() % 8));
    uint64_t op = rng.next() % 5;
    try {
      switch (op) {
        case 0: f.start(id, f.coord.current_block() + 1 + rng.next() % 6); break;
        case 1: f.commit(id); break;
        case 2: f.ignore(id); break;
        case 3: f.coord.advance_block(rng.next() % 3); break;
        default: (void)f.coord.effective_state(id); break;
      }
    } catch (const CoordError&) {
      // rejected calls must not mutate anything; checked below
    }
    if (const auto* e = f.coord.find(id)) {
      auto eff = f.coord.effective_state(id);
      auto it = terminal.find(id);
      if (it != terminal.end()) REQUIRE(eff == it->second);
      if (eff != CoordState::Started) terminal[id] = eff;
    }
  }
  CHECK(!terminal.empty());
}

TEST_CASE("each accepted call charges one verification and one base unit per node") {
  Fixture f;
  TxId id = make_txid(0x30);
  CHECK(f.verifies_on_every_node() == 0);

  f.start(id, 10);
  CHECK(f.verifies_on_every_node() == 1);

  // Rejected calls (failed preconditions or bad signatures) charge nothing.
  CHECK_THROWS_AS(f.start(id, 12), CoordError);
  CHECK_THROWS_AS(f.coord.commit(id, f.origin.sign(ignore_message(id))), CoordError);
  CHECK(f.verifies_on_every_node() == 1);

  f.commit(id);
  CHECK(f.verifies_on_every_node() == 2);
  CHECK(f.costs.stats(NodeRef{0, 1}).busy_time ==
        doctest::Approx(2 * (1.0 / 375.0 + 0.005)));
}

TEST_CASE("entry dump lists id, state, timeout and originating chain") {
  Fixture f;
  TxId a = make_txid(0x40), b = make_txid(0x41);
  f.start(a, 10);
  f.start(b, 12);
  f.ignore(b);
  auto dump = f.coord.entries_dump();
  REQUIRE(dump.size() == 2);
  CHECK(dump[0].at("id") == txid_hex(a));
  CHECK(dump[0].at("state") == "Started");
  CHECK(dump[0].at("timeout_block") == 10);
  CHECK(dump[1].at("state") == "Ignored");
  CHECK(dump[1].at("originating_chain") == 1);
}
