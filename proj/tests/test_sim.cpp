#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "xchain/sim.hpp"

using namespace xchain;
using namespace xchain::sim;

namespace {

SimConfig base_config(const std::string& scenario, int tx_count, uint64_t seed = 7) {
  SimConfig cfg;
  cfg.scenario = scenario;
  cfg.tx_count = tx_count;
  cfg.seed = seed;
  return cfg;
}

const NodeReport& node(const SimReport& r, BlockchainId chain, int validator) {
  for (const auto& n : r.nodes) {
    if (n.chain == chain && n.validator_index == validator) return n;
  }
  throw std::runtime_error("node not in report");
}

}  // namespace

TEST_CASE("config validation rejects malformed inputs") {
  CHECK_NOTHROW(base_config("HotelTrain", 1).validate());
  auto bad = base_config("Nope", 1);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = base_config("Oracle", 1);
  bad.rotation = "sometimes";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = base_config("Oracle", 1);
  bad.chains = {{1, 4, 5}};  // threshold above validator count
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = base_config("Oracle", 1);
  bad.chains = {{9, 4, 3}};  // not a chain of this scenario
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = base_config("Oracle", 1);
  bad.instigators = {"a", "b", "c", "d", "e"};  // more than 4 validators
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = base_config("Oracle", 1);
  bad.failure = "meteor";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.failure = "sub_failure2";  // needs a scenario with two subordinates
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = base_config("Oracle", 1);
  bad.byzantine = {{1, 9, "bad_share"}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("config json round-trips") {
  auto cfg = base_config("SupplyChainProvenance", 42, 99);
  cfg.rotation = "round_robin";
  cfg.instigators = {"a", "b"};
  cfg.byzantine = {{2, 3, "silent"}};
  cfg.chains = {{1, 5, 4}};
  cfg.failure = "param_tamper";
  auto back = SimConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("hotel-train run commits everything at the predicted rates") {
  auto report = run(base_config("HotelTrain", 30));
  CHECK(report.committed == 30);
  CHECK(report.ignored == 0);
  CHECK(report.atomicity_violations == 0);
  CHECK(report.nodes.size() == 4 + 3 * 4);  // coordination + three app chains
  CHECK(report.transactions.size() == 30);
  for (const auto& t : report.transactions) {
    CHECK(t.outcome == "Committed");
    CHECK(t.chains_touched == 3);
    CHECK(t.latency > 0);
  }
  auto coordinator = node(report, 1, 1);
  auto other = node(report, 1, 2);
  CHECK(coordinator.measured_tps ==
        doctest::Approx(perf::tx_rate(perf::Scenario::HotelTrain,
                                      perf::Role::OriginatingCoordinator))
            .epsilon(0.02));
  CHECK(other.measured_tps ==
        doctest::Approx(perf::tx_rate(perf::Scenario::HotelTrain,
                                      perf::Role::OriginatingOther))
            .epsilon(0.02));
  CHECK(coordinator.group_verify_count == 30 * 4);
  CHECK(other.group_verify_count == 30 * 2);
  CHECK(node(report, 0, 1).group_verify_count == 30 * 2);
  CHECK(node(report, 2, 1).group_verify_count == 30 * 1);
}

TEST_CASE("forced failure modes discard every transaction atomically") {
  for (const auto& scenario : builtin_scenarios()) {
    std::vector<std::string> modes{"sub_failure", "param_tamper", "force_timeout"};
    if (scenario == "HotelTrain") modes.push_back("sub_failure2");
    for (const std::string& mode : modes) {
      CAPTURE(scenario);
      CAPTURE(mode);
      auto cfg = base_config(scenario, 10);
      cfg.failure = mode;
      if (mode == "force_timeout") cfg.timeout_blocks = 3;
      auto report = run(cfg);
      CHECK(report.committed == 0);
      CHECK(report.ignored == 10);
      CHECK(report.atomicity_violations == 0);
    }
    auto happy = run(base_config(scenario, 10));
    CHECK(happy.committed == 10);
    CHECK(happy.atomicity_violations == 0);
  }
}

TEST_CASE("one byzantine validator costs one per-share spike and nothing more") {
  auto cfg = inject_byzantine(base_config("HotelTrain", 20), {{1, 2, "bad_share"}});
  auto report = run(cfg);
  CHECK(report.committed == 20);
  CHECK(report.atomicity_violations == 0);
  // The first signing round on chain 1 verified each of the 4 shares once;
  // afterwards the culprit is ordered last and the fast path always works.
  CHECK(node(report, 1, 1).share_verify_count == 4);
  for (const auto& n : report.nodes) {
    if (!(n.chain == 1 && n.validator_index == 1)) {
      CHECK(n.share_verify_count == 0);
    }
  }

  SUBCASE("a silent validator never even triggers the fallback") {
    auto quiet = run(inject_byzantine(base_config("HotelTrain", 10),
                                      {{2, 3, "silent"}}));
    CHECK(quiet.committed == 10);
    for (const auto& n : quiet.nodes) CHECK(n.share_verify_count == 0);
  }
  SUBCASE("faults that make the threshold unreachable are rejected") {
    CHECK_THROWS_AS(inject_byzantine(base_config("HotelTrain", 1),
                                     {{1, 1, "bad_share"}, {1, 2, "silent"}}),
                    ConfigError);
  }
}

TEST_CASE("round-robin instigation amortizes the coordinator surcharge") {
  auto cfg = base_config("HotelTrain", 40);
  cfg.instigators = {"node1", "node2"};
  cfg.rotation = "round_robin";
  auto report = run(cfg);
  REQUIRE(report.committed == 40);
  double expect = perf::amortized_rate(perf::Scenario::HotelTrain, 2);
  CHECK(node(report, 1, 1).measured_tps == doctest::Approx(expect).epsilon(0.02));
  CHECK(node(report, 1, 2).measured_tps == doctest::Approx(expect).epsilon(0.02));
}

TEST_CASE("identical config and seed reproduce byte-identical reports") {
  auto cfg = base_config("Oracle", 12, 31337);
  cfg.byzantine = {{2, 4, "bad_share"}};
  auto a = emit_report(run(cfg), "json");
  auto b = emit_report(run(cfg), "json");
  CHECK(a == b);
  CHECK(emit_report(run(cfg), "csv") == emit_report(run(cfg), "csv"));

  auto other_seed = cfg;
  other_seed.seed = 2;
  CHECK(emit_report(run(other_seed), "json") != a);
}

TEST_CASE("report formats are stable and well-formed") {
  auto report = run(base_config("SupplyChainProvenance", 5));
  auto parsed = nlohmann::json::parse(emit_report(report, "json"));
  CHECK(parsed.at("aggregate").at("committed") == 5);
  CHECK(parsed.at("aggregate").at("atomicity_violations") == 0);
  CHECK(parsed.at("nodes").size() == report.nodes.size());
  CHECK(parsed.at("transactions").size() == 5);

  auto csv = emit_report(report, "csv");
  size_t rows = std::count(csv.begin(), csv.end(), '\n');
  CHECK(rows == report.nodes.size() + report.transactions.size() + 1);
  CHECK_THROWS_AS(emit_report(report, "xml"), ConfigError);
}
