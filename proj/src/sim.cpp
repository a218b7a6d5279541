#include "xchain/sim.hpp"

#include <deque>
#include <map>
#include <set>

#include "xchain/coordination.hpp"
#include "xchain/ledger.hpp"
#include "xchain/protocol.hpp"

namespace xchain::sim {

namespace {

const std::set<std::string> kFailureModes{"", "sub_failure", "sub_failure2",
                                          "param_tamper", "force_timeout"};

std::vector<ChainSpec> default_chains(perf::Scenario s) {
  int n_app = s == perf::Scenario::HotelTrain ? 3 : 2;
  std::vector<ChainSpec> specs;
  for (int i = 1; i <= n_app; ++i) specs.push_back({BlockchainId(i), 4, 3});
  return specs;
}

std::vector<ChainSpec> resolve_chains(const SimConfig& cfg, perf::Scenario s) {
  std::vector<ChainSpec> specs = default_chains(s);
  for (const auto& over : cfg.chains) {
    bool found = false;
    for (auto& spec : specs) {
      if (spec.id == over.id) {
        spec = over;
        found = true;
      }
    }
    if (!found) {
      throw ConfigError("chain " + std::to_string(over.id) +
                        " is not part of scenario " + cfg.scenario);
    }
  }
  return specs;
}

}  // namespace

void SimConfig::validate() const {
  perf::Scenario s = [&] {
    try {
      return perf::scenario_from_string(scenario);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }();
  if (rotation != "fixed" && rotation != "round_robin") {
    throw ConfigError("rotation must be 'fixed' or 'round_robin'");
  }
  if (!kFailureModes.count(failure)) throw ConfigError("unknown failure mode: " + failure);
  if (failure == "sub_failure2" && s != perf::Scenario::HotelTrain) {
    throw ConfigError("sub_failure2 requires a scenario with two subordinates");
  }
  if (tx_count < 0) throw ConfigError("tx_count must be non-negative");
  if (timeout_blocks < 1) throw ConfigError("timeout_blocks must be at least 1");
  if (instigators.empty()) throw ConfigError("at least one instigator required");
  try {
    cost.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  auto specs = resolve_chains(*this, s);
  for (const auto& spec : specs) {
    if (spec.threshold_m < 1 || spec.threshold_m > spec.n_validators) {
      throw ConfigError("chain " + std::to_string(spec.id) +
                        ": threshold must be between 1 and the validator count");
    }
    if (int(instigators.size()) > spec.n_validators) {
      throw ConfigError("more instigators than validators on chain " +
                        std::to_string(spec.id));
    }
  }
  for (const auto& f : byzantine) {
    if (f.mode != "bad_share" && f.mode != "silent") {
      throw ConfigError("unknown byzantine mode: " + f.mode);
    }
    bool ok = false;
    for (const auto& spec : specs) {
      ok |= spec.id == f.chain && f.validator_index >= 1 &&
            f.validator_index <= spec.n_validators;
    }
    if (!ok) throw ConfigError("byzantine fault references a missing validator");
  }
}

nlohmann::json SimConfig::to_json() const {
  nlohmann::json chains_j = nlohmann::json::array();
  for (const auto& c : chains) {
    chains_j.push_back({{"id", c.id},
                        {"n_validators", c.n_validators},
                        {"threshold_m", c.threshold_m}});
  }
  nlohmann::json byz_j = nlohmann::json::array();
  for (const auto& f : byzantine) {
    byz_j.push_back({{"chain", f.chain},
                     {"validator_index", f.validator_index},
                     {"mode", f.mode}});
  }
  return nlohmann::json{
      {"scenario", scenario},
      {"chains", chains_j},
      {"coordination_chain", coordination_chain},
      {"instigators", instigators},
      {"rotation", rotation},
      {"byzantine", byz_j},
      {"tx_count", tx_count},
      {"timeout_blocks", timeout_blocks},
      {"cost", {{"base_tx_rate", cost.base_tx_rate},
                {"bls_verify_time", cost.bls_verify_time}}},
      {"seed", seed},
      {"failure", failure}};
}

SimConfig SimConfig::from_json(const nlohmann::json& j) {
  SimConfig cfg;
  cfg.scenario = j.value("scenario", cfg.scenario);
  if (j.contains("chains")) {
    for (const auto& c : j.at("chains")) {
      cfg.chains.push_back({c.at("id").get<BlockchainId>(),
                            c.value("n_validators", 4), c.value("threshold_m", 3)});
    }
  }
  cfg.coordination_chain = j.value("coordination_chain", cfg.coordination_chain);
  if (j.contains("instigators")) {
    cfg.instigators = j.at("instigators").get<std::vector<std::string>>();
  }
  cfg.rotation = j.value("rotation", cfg.rotation);
  if (j.contains("byzantine")) {
    for (const auto& f : j.at("byzantine")) {
      cfg.byzantine.push_back({f.at("chain").get<BlockchainId>(),
                               f.at("validator_index").get<int>(),
                               f.at("mode").get<std::string>()});
    }
  }
  cfg.tx_count = j.value("tx_count", cfg.tx_count);
  cfg.timeout_blocks = j.value("timeout_blocks", cfg.timeout_blocks);
  if (j.contains("cost")) {
    cfg.cost.base_tx_rate = j.at("cost").value("base_tx_rate", cfg.cost.base_tx_rate);
    cfg.cost.bls_verify_time =
        j.at("cost").value("bls_verify_time", cfg.cost.bls_verify_time);
  }
  cfg.seed = j.value("seed", cfg.seed);
  cfg.failure = j.value("failure", cfg.failure);
  return cfg;
}

SimConfig inject_byzantine(SimConfig config, const std::vector<FaultSpec>& faults) {
  for (const auto& f : faults) config.byzantine.push_back(f);
  config.validate();
  auto specs = resolve_chains(config, perf::scenario_from_string(config.scenario));
  for (const auto& spec : specs) {
    std::set<int> bad;
    for (const auto& f : config.byzantine) {
      if (f.chain == spec.id) bad.insert(f.validator_index);
    }
    if (spec.n_validators - int(bad.size()) < spec.threshold_m) {
      throw ConfigError("chain " + std::to_string(spec.id) +
                        " cannot reach its signing threshold with these faults");
    }
  }
  return config;
}

std::vector<std::string> builtin_scenarios() {
  return {"HotelTrain", "SupplyChainProvenance", "Oracle"};
}

namespace {

// The built scenario network plus everything needed to issue transactions.
struct ScenarioWorld {
  SimConfig cfg;
  perf::Scenario scenario;
  std::vector<ChainSpec> chain_specs;
  CostAccounting costs;
  coordination::CoordinationChain coord;
  TraceSink trace;
  protocol::Engine engine;
  std::deque<ledger::Chain> chains;
  std::map<BlockchainId, ledger::Chain*> by_id;
  std::vector<protocol::MultichainNode> instigators;
  protocol::UserSigner user;
  SplitMix64 rng;

  std::string root_target;  // contract the originating part calls
  std::string hotel_router, train_router;  // HotelTrain
  std::string prov_contract;               // SupplyChainProvenance
  std::string feed;                        // Oracle

  explicit ScenarioWorld(const SimConfig& c)
      : cfg(c),
        scenario(perf::scenario_from_string(c.scenario)),
        chain_specs(resolve_chains(c, scenario)),
        costs(c.cost),
        coord(c.coordination_chain, 4, &costs),
        engine(coord, costs, &trace),
        user(protocol::UserSigner::create(c.seed ^ 0xa5a5a5a5a5a5a5a5ull)),
        rng{c.seed} {
    for (const auto& spec : chain_specs) {
      chains.emplace_back(spec.id, &engine);
      by_id[spec.id] = &chains.back();
      engine.add_chain(chains.back(), {spec.n_validators, spec.threshold_m},
                       rng.next());
    }
    for (size_t k = 0; k < cfg.instigators.size(); ++k) {
      protocol::MultichainNode node{cfg.instigators[k], {}};
      for (const auto& spec : chain_specs) node.validators[spec.id] = int(k) + 1;
      instigators.push_back(std::move(node));
    }
    deploy_contracts();
    for (const auto& f : cfg.byzantine) {
      engine.set_fault(NodeRef{f.chain, f.validator_index},
                       f.mode == "silent" ? protocol::Fault::Silent
                                          : protocol::Fault::BadShare);
    }
    if (cfg.failure == "force_timeout") {
      engine.after_start_hook = [this] {
        coord.advance_block(cfg.timeout_blocks + 1);
      };
    }
  }

  void deploy_contracts() {
    TxId foreign{};
    foreign.fill(0xfe);
    switch (scenario) {
      case perf::Scenario::HotelTrain: {
        auto vendor = [&](ledger::Chain& chain, std::vector<std::string>& items) {
          auto token = chain.deploy(
              ledger::Behavior::Token, true,
              {{"bal:guest", Value(int64_t(10) * (cfg.tx_count + 1))}});
          items.push_back(chain.deploy(ledger::Behavior::Item, true, {}));
          return chain.deploy(ledger::Behavior::Router, false,
                              {{"item_count", Value(1)},
                               {"item:0", Value(items.back())},
                               {"token", Value(token)},
                               {"vendor", Value("vendor")}});
        };
        std::vector<std::string> hotel_items, train_items;
        hotel_router = vendor(*by_id[2], hotel_items);
        train_router = vendor(*by_id[3], train_items);
        root_target = by_id[1]->deploy(ledger::Behavior::Item, true,
                                       {{"hotel_chain", Value(2)},
                                        {"hotel_router", Value(hotel_router)},
                                        {"train_chain", Value(3)},
                                        {"train_router", Value(train_router)}});
        if (cfg.failure == "sub_failure") {
          for (const auto& item : hotel_items) by_id[2]->force_lock(item, foreign);
        } else if (cfg.failure == "sub_failure2") {
          for (const auto& item : train_items) by_id[3]->force_lock(item, foreign);
        }
        break;
      }
      case perf::Scenario::SupplyChainProvenance: {
        prov_contract = by_id[2]->deploy(ledger::Behavior::Provenance, true, {});
        root_target = by_id[1]->deploy(
            ledger::Behavior::SupplyChain, true,
            {{"provenance_chain", Value(2)},
             {"provenance_contract", Value(prov_contract)}});
        if (cfg.failure == "sub_failure") {
          by_id[2]->force_lock(prov_contract, foreign);
        }
        break;
      }
      case perf::Scenario::Oracle: {
        feed = by_id[2]->deploy(ledger::Behavior::OraclePriceFeed, true,
                                {{"price:gold", Value(50)},
                                 {"price:silver", Value(40)}});
        root_target = by_id[1]->deploy(ledger::Behavior::Item, true,
                                       {{"oracle_chain", Value(2)},
                                        {"oracle_feed", Value(feed)}});
        break;
      }
    }
  }

  protocol::TxSpec make_spec(int i) const {
    using protocol::TxKind;
    using protocol::TxSpec;
    bool tamper = cfg.failure == "param_tamper";
    switch (scenario) {
      case perf::Scenario::HotelTrain: {
        Args a{"d" + std::to_string(i), "guest", "guest", Value(1)};
        Args hotel_args = a;
        if (tamper) hotel_args[3] = Value(2);  // signed amount != executed amount
        return TxSpec{TxKind::Originating, 1, root_target, "book_trip", a,
                      {TxSpec{TxKind::Subordinate, 2, hotel_router, "book",
                              hotel_args, {}},
                       TxSpec{TxKind::Subordinate, 3, train_router, "book", a, {}}}};
      }
      case perf::Scenario::SupplyChainProvenance: {
        std::string id = "lot" + std::to_string(i);
        return TxSpec{TxKind::Originating, 1, root_target,
                      "record_with_provenance", {id, "ok", "pub"},
                      {TxSpec{TxKind::Subordinate, 2, prov_contract, "record",
                              {id, tamper ? Value("evil") : Value("pub")}, {}}}};
      }
      case perf::Scenario::Oracle: {
        std::string commodity = cfg.failure == "sub_failure" ? "missing" : "gold";
        return TxSpec{TxKind::Originating, 1, root_target, "buy_if_cheap",
                      {commodity, Value(60), Value(1)},
                      {TxSpec{TxKind::View, 2, feed, "get",
                              {tamper ? Value("silver") : Value(commodity)}, {}}}};
      }
    }
    throw std::logic_error("unknown scenario");
  }

  std::map<BlockchainId, std::string> snapshot() const {
    std::map<BlockchainId, std::string> out;
    for (const auto& [id, chain] : by_id) out[id] = chain->state_dump().dump();
    return out;
  }

  TxReport run_one(int i) {
    const auto& node =
        instigators[cfg.rotation == "round_robin" ? i % instigators.size() : 0];
    protocol::TxSpec spec = make_spec(i);
    auto before = snapshot();
    NodeRef coordinator{1, node.validators.at(1)};
    double busy0 = costs.busy_time(coordinator);

    TxReport report;
    report.chains_touched = scenario == perf::Scenario::HotelTrain ? 3 : 2;
    protocol::Outcome out{false, ""};
    TxId txid{};
    try {
      auto tx = engine.build_crosschain_tx(spec, node, user, rng.next(),
                                           cfg.timeout_blocks);
      txid = tx.crosschain_tx_id;
      out = engine.run_originating(tx, node);
    } catch (const std::exception& e) {
      out = {false, e.what()};
    }

    report.id = txid_hex(txid);
    report.outcome = out.committed ? "Committed" : "Ignored";
    report.reason = out.reason;
    report.latency = costs.busy_time(coordinator) - busy0;

    // All-or-nothing check: a discarded transaction must leave every chain
    // bit-identical to its pre-transaction dump, a committed one must hold no
    // leftover locks and must be Committed on the coordination chain.
    bool violated = false;
    if (out.committed) {
      for (const auto& [id, chain] : by_id) violated |= chain->has_locks(txid);
      violated |= coord.effective_state(txid) != coordination::CoordState::Committed;
    } else {
      violated = snapshot() != before;
    }
    if (violated) report.reason += " [atomicity violation]";
    atomicity_violations += violated;
    committed += out.committed;
    ignored += !out.committed;
    return report;
  }

  uint64_t committed = 0, ignored = 0, atomicity_violations = 0;
};

}  // namespace

SimReport run(const SimConfig& config) {
  config.validate();
  ScenarioWorld world(config);

  SimReport report;
  report.scenario = config.scenario;
  report.seed = config.seed;
  report.transactions.resize(config.tx_count);

  EventQueue queue;
  for (int i = 0; i < config.tx_count; ++i) {
    queue.push(double(i), [&world, &report, i] {
      report.transactions[i] = world.run_one(i);
    });
  }
  while (queue.run_next()) {
  }

  report.committed = world.committed;
  report.ignored = world.ignored;
  report.atomicity_violations = world.atomicity_violations;

  auto add_nodes = [&](BlockchainId chain, int n) {
    for (int v = 1; v <= n; ++v) {
      NodeRef ref{chain, v};
      const NodeStats& s = world.costs.stats(ref);
      NodeReport nr{ref.name(), chain, v, s.busy_time, s.base_tx_count,
                    s.group_verify_count, s.share_verify_count, 0.0};
      if (s.busy_time > 0 && report.committed > 0) {
        nr.measured_tps = double(report.committed) / s.busy_time;
      }
      report.nodes.push_back(nr);
    }
  };
  add_nodes(config.coordination_chain, 4);
  for (const auto& spec : world.chain_specs) add_nodes(spec.id, spec.n_validators);
  return report;
}

nlohmann::json SimReport::to_json() const {
  nlohmann::json nodes_j = nlohmann::json::array();
  for (const auto& n : nodes) {
    nodes_j.push_back({{"node", n.node},
                       {"chain", n.chain},
                       {"validator_index", n.validator_index},
                       {"busy_time", n.busy_time},
                       {"base_tx_count", n.base_tx_count},
                       {"group_verify_count", n.group_verify_count},
                       {"share_verify_count", n.share_verify_count},
                       {"measured_tps", n.measured_tps}});
  }
  nlohmann::json txs_j = nlohmann::json::array();
  for (const auto& t : transactions) {
    txs_j.push_back({{"id", t.id},
                     {"outcome", t.outcome},
                     {"reason", t.reason},
                     {"latency", t.latency},
                     {"chains_touched", t.chains_touched}});
  }
  return nlohmann::json{{"scenario", scenario},
                        {"seed", seed},
                        {"aggregate",
                         {{"committed", committed},
                          {"ignored", ignored},
                          {"atomicity_violations", atomicity_violations}}},
                        {"nodes", nodes_j},
                        {"transactions", txs_j}};
}

std::string emit_report(const SimReport& report, const std::string& format) {
  if (format == "json") return report.to_json().dump(2) + "\n";
  if (format != "csv") throw ConfigError("unknown report format: " + format);

  auto num = [](double x) { return nlohmann::json(x).dump(); };
  std::string out;
  for (const auto& n : report.nodes) {
    out += "node," + n.node + "," + std::to_string(n.chain) + "," +
           std::to_string(n.validator_index) + "," + num(n.busy_time) + "," +
           std::to_string(n.base_tx_count) + "," +
           std::to_string(n.group_verify_count) + "," +
           std::to_string(n.share_verify_count) + "," + num(n.measured_tps) + "\n";
  }
  for (const auto& t : report.transactions) {
    std::string reason = t.reason;
    for (auto& ch : reason) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    out += "tx," + t.id + "," + t.outcome + "," + reason + "," + num(t.latency) +
           "," + std::to_string(t.chains_touched) + "\n";
  }
  out += "aggregate," + report.scenario + "," + std::to_string(report.seed) + "," +
         std::to_string(report.committed) + "," + std::to_string(report.ignored) +
         "," + std::to_string(report.atomicity_violations) + "\n";
  return out;
}

}  // namespace xchain::sim
