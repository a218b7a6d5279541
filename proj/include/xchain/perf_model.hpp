#pragma once

// Analytical cost model: per-role group-signature verification counts, the
// closed-form per-node transaction rate, the reference rate table for the
// three scenarios, and comparison of analytical rates against simulator
// measurements.

#include <string>
#include <vector>

#include "xchain/runtime.hpp"

namespace xchain::perf {

enum class Scenario { HotelTrain, SupplyChainProvenance, Oracle };

enum class Role {
  OriginatingCoordinator,
  OriginatingOther,
  CoordinationChainNode,
  SubordinateCoordinator,
  SubordinateViewServer,
};

std::string to_string(Scenario s);
std::string to_string(Role r);
Scenario scenario_from_string(const std::string& s);

struct ScenarioProfile {
  std::string name;
  int n_subordinate_tx = 0;
  int n_subordinate_views = 0;
};

ScenarioProfile profile(Scenario s);

// Group-signature verifications charged to one node of the given role for
// one crosschain transaction.
int verify_count(Scenario s, Role r);

// Base-rate transactions mined on that node's chain for one crosschain
// transaction (the transaction itself plus the signalling transaction).
int base_tx_count(Scenario s, Role r);

// rate = 1 / (base_tx_count / base_tx_rate + verify_count * bls_verify_time)
double tx_rate(Scenario s, Role r, const CostParams& params = {});

// Round half-up to one decimal, used for table comparisons.
double round1(double x);

struct TableRow {
  std::string scenario;
  double coordinating_node = 0;  // rounded to 1 decimal
  double other_node = 0;
};

std::vector<TableRow> reference_table(const CostParams& params = {});

// Long-run per-node rate when n multichain nodes take turns instigating:
// every node pays the other-node cost and 1/n of the coordinator's extra
// signature generations.
double amortized_rate(Scenario s, int n_rotating_instigators,
                      const CostParams& params = {});

struct Comparison {
  double analytical = 0;
  double measured = 0;
  double relative_error = 0;
};

// Committed crosschain transactions per unit of the node's busy time.
double measured_rate(const std::vector<TraceEvent>& trace,
                     const CostAccounting& costs, const NodeRef& node);

// Locates the role's node from a single-instigator trace and compares its
// measured rate to the closed form. Throws std::invalid_argument on an empty
// or commit-free trace.
Comparison compare_with_simulation(const std::vector<TraceEvent>& trace,
                                   const CostAccounting& costs, Scenario s,
                                   Role r, const CostParams& params = {});

}  // namespace xchain::perf
