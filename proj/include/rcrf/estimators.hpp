#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rcrf/dataset.hpp"
#include "rcrf/step_function.hpp"

namespace rcrf {

/// Tallies of a group of responses at its distinct uncensored times.
struct NodeSummary {
  /// v_1 < ... < v_K: distinct times with at least one uncensored row.
  std::vector<double> event_times;
  /// Y(v_k).
  std::vector<std::uint64_t> at_risk;
  /// events[j-1][k] = d_j(v_k).
  std::vector<std::vector<std::uint64_t>> events;

  std::size_t size() const { return event_times.size(); }
  int event_count() const { return static_cast<int>(events.size()); }
  std::uint64_t total_events(std::size_t k) const;
};

/// Each row counts once.
NodeSummary summarize(std::span<const CompetingRiskResponse> rows, int event_count);

/// Row i counts `multiplicity[i]` times (bootstrap copies).
NodeSummary summarize(std::span<const CompetingRiskResponse> rows,
                      std::span<const std::uint32_t> multiplicity, int event_count);

/// Kaplan-Meier survival; drops at each v_k (right-continuous).
StepFunction kaplan_meier(const NodeSummary& s);

/// Aalen-Johansen cumulative incidence of `event`.
StepFunction aalen_johansen(const NodeSummary& s, int event);

/// Nelson-Aalen cumulative hazard of `event`.
StepFunction nelson_aalen(const NodeSummary& s, int event);

CompetingRiskFunctions terminal_node_functions(const NodeSummary& s);
CompetingRiskFunctions terminal_node_functions(std::span<const CompetingRiskResponse> rows, int event_count);

}  // namespace rcrf
