#pragma once

// Deterministic simulation driver: builds one of the built-in multi-chain
// scenarios, runs a configured number of crosschain transactions through the
// protocol engine (optionally with misbehaving validators or forced failure
// modes), checks the all-or-nothing property after every transaction, and
// emits a machine-readable report.

#include <string>
#include <vector>

#include <json.hpp>

#include "xchain/perf_model.hpp"
#include "xchain/runtime.hpp"

namespace xchain::sim {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ChainSpec {
  BlockchainId id = 0;
  int n_validators = 4;
  int threshold_m = 3;
};

struct FaultSpec {
  BlockchainId chain = 0;
  int validator_index = 0;
  std::string mode;  // "bad_share" | "silent"
};

struct SimConfig {
  std::string scenario = "HotelTrain";
  std::vector<ChainSpec> chains;  // empty -> scenario defaults
  BlockchainId coordination_chain = 0;
  std::vector<std::string> instigators{"node1"};
  std::string rotation = "fixed";  // "fixed" | "round_robin"
  std::vector<FaultSpec> byzantine;
  int tx_count = 100;
  uint64_t timeout_blocks = 1000000;
  CostParams cost;
  uint64_t seed = 1;
  // Forced failure mode for fault-matrix runs:
  // "" | "sub_failure" | "param_tamper" | "force_timeout"
  std::string failure;

  void validate() const;
  nlohmann::json to_json() const;
  static SimConfig from_json(const nlohmann::json& j);
};

// Appends fault specs after checking each chain keeps at least threshold_m
// honest validators; throws ConfigError otherwise.
SimConfig inject_byzantine(SimConfig config, const std::vector<FaultSpec>& faults);

struct NodeReport {
  std::string node;
  BlockchainId chain = 0;
  int validator_index = 0;
  double busy_time = 0;
  uint64_t base_tx_count = 0;
  uint64_t group_verify_count = 0;
  uint64_t share_verify_count = 0;
  double measured_tps = 0;  // committed transactions / busy_time
};

struct TxReport {
  std::string id;
  std::string outcome;  // "Committed" | "Ignored"
  std::string reason;
  double latency = 0;  // busy time added to the originating coordinator
  int chains_touched = 0;
};

struct SimReport {
  std::string scenario;
  uint64_t seed = 0;
  std::vector<NodeReport> nodes;
  std::vector<TxReport> transactions;
  uint64_t committed = 0;
  uint64_t ignored = 0;
  uint64_t atomicity_violations = 0;

  nlohmann::json to_json() const;
};

// "json": canonical JSON with sorted keys. "csv": one row per node, per
// transaction, plus one aggregate row; first field names the record type.
std::string emit_report(const SimReport& report, const std::string& format);

SimReport run(const SimConfig& config);

std::vector<std::string> builtin_scenarios();

}  // namespace xchain::sim
