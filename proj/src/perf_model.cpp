#include "xchain/perf_model.hpp"

#include <cmath>
#include <stdexcept>

namespace xchain::perf {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::HotelTrain: return "HotelTrain";
    case Scenario::SupplyChainProvenance: return "SupplyChainProvenance";
    case Scenario::Oracle: return "Oracle";
  }
  throw std::logic_error("unknown scenario");
}

std::string to_string(Role r) {
  switch (r) {
    case Role::OriginatingCoordinator: return "OriginatingCoordinator";
    case Role::OriginatingOther: return "OriginatingOther";
    case Role::CoordinationChainNode: return "CoordinationChainNode";
    case Role::SubordinateCoordinator: return "SubordinateCoordinator";
    case Role::SubordinateViewServer: return "SubordinateViewServer";
  }
  throw std::logic_error("unknown role");
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "HotelTrain") return Scenario::HotelTrain;
  if (s == "SupplyChainProvenance") return Scenario::SupplyChainProvenance;
  if (s == "Oracle") return Scenario::Oracle;
  throw std::invalid_argument("unknown scenario: " + s);
}

ScenarioProfile profile(Scenario s) {
  switch (s) {
    case Scenario::HotelTrain: return {"HotelTrain", 2, 0};
    case Scenario::SupplyChainProvenance: return {"SupplyChainProvenance", 1, 0};
    case Scenario::Oracle: return {"Oracle", 0, 1};
  }
  throw std::logic_error("unknown scenario");
}

int verify_count(Scenario s, Role r) {
  ScenarioProfile p = profile(s);
  int incoming = p.n_subordinate_tx + p.n_subordinate_views;
  switch (r) {
    case Role::OriginatingCoordinator: return incoming + 2;  // Start + Commit/Ignore
    case Role::OriginatingOther: return incoming;
    case Role::CoordinationChainNode: return 2;
    case Role::SubordinateCoordinator: return 1;  // per hosted part
    case Role::SubordinateViewServer: return 1;
  }
  throw std::logic_error("unknown role");
}

int base_tx_count(Scenario s, Role r) {
  (void)s;
  switch (r) {
    case Role::OriginatingCoordinator:
    case Role::OriginatingOther:
    case Role::SubordinateCoordinator:
      return 2;  // the mined transaction plus the signalling transaction
    case Role::CoordinationChainNode:
      return 2;  // the start and commit/ignore contract calls
    case Role::SubordinateViewServer:
      return 0;  // views mine nothing
  }
  throw std::logic_error("unknown role");
}

double tx_rate(Scenario s, Role r, const CostParams& params) {
  params.validate();
  double seconds = base_tx_count(s, r) / params.base_tx_rate +
                   verify_count(s, r) * params.bls_verify_time;
  return 1.0 / seconds;
}

double round1(double x) { return std::floor(x * 10.0 + 0.5) / 10.0; }

std::vector<TableRow> reference_table(const CostParams& params) {
  std::vector<TableRow> rows;
  for (Scenario s : {Scenario::HotelTrain, Scenario::SupplyChainProvenance,
                     Scenario::Oracle}) {
    rows.push_back({to_string(s),
                    round1(tx_rate(s, Role::OriginatingCoordinator, params)),
                    round1(tx_rate(s, Role::OriginatingOther, params))});
  }
  return rows;
}

double amortized_rate(Scenario s, int n_rotating_instigators,
                      const CostParams& params) {
  if (n_rotating_instigators < 1) {
    throw std::invalid_argument("need at least one instigator");
  }
  params.validate();
  int other = verify_count(s, Role::OriginatingOther);
  int extra = verify_count(s, Role::OriginatingCoordinator) - other;
  double seconds = base_tx_count(s, Role::OriginatingOther) / params.base_tx_rate +
                   other * params.bls_verify_time +
                   extra * params.bls_verify_time / n_rotating_instigators;
  return 1.0 / seconds;
}

namespace {

NodeRef parse_node(const TraceEvent& e) {
  auto pos = e.node.rfind("/v");
  if (pos == std::string::npos) {
    throw std::invalid_argument("unparseable node name: " + e.node);
  }
  return NodeRef{e.chain, std::stoi(e.node.substr(pos + 2))};
}

NodeRef locate(const std::vector<TraceEvent>& trace, Role r) {
  const char* wanted = nullptr;
  switch (r) {
    case Role::OriginatingCoordinator:
    case Role::OriginatingOther: wanted = "start"; break;
    case Role::SubordinateCoordinator: wanted = "subordinate_ready"; break;
    case Role::SubordinateViewServer: wanted = "view_result"; break;
    case Role::CoordinationChainNode:
      throw std::invalid_argument(
          "coordination-chain nodes do not appear in the event trace");
  }
  for (const auto& e : trace) {
    if (e.event != wanted) continue;
    NodeRef node = parse_node(e);
    if (r == Role::OriginatingOther) {
      node.validator_index = node.validator_index == 1 ? 2 : 1;
    }
    return node;
  }
  throw std::invalid_argument(std::string("no '") + wanted + "' event in trace");
}

}  // namespace

double measured_rate(const std::vector<TraceEvent>& trace,
                     const CostAccounting& costs, const NodeRef& node) {
  uint64_t commits = 0;
  for (const auto& e : trace) {
    if (e.event == "commit") ++commits;
  }
  if (commits == 0) throw std::invalid_argument("no committed transactions in trace");
  double busy = costs.busy_time(node);
  if (busy <= 0) throw std::invalid_argument("node has no recorded busy time");
  return double(commits) / busy;
}

Comparison compare_with_simulation(const std::vector<TraceEvent>& trace,
                                   const CostAccounting& costs, Scenario s,
                                   Role r, const CostParams& params) {
  if (trace.empty()) throw std::invalid_argument("empty event trace");
  Comparison c;
  c.analytical = tx_rate(s, r, params);
  c.measured = measured_rate(trace, costs, locate(trace, r));
  c.relative_error = std::abs(c.measured - c.analytical) / c.analytical;
  return c;
}

}  // namespace xchain::perf
