#include "rcrf/estimators.hpp"

#include <algorithm>
#include <numeric>

#include "rcrf/error.hpp"

namespace rcrf {

std::uint64_t NodeSummary::total_events(std::size_t k) const {
  std::uint64_t total = 0;
  for (const auto& e : events) total += e[k];
  return total;
}

NodeSummary summarize(std::span<const CompetingRiskResponse> rows, int event_count) {
  std::vector<std::uint32_t> ones(rows.size(), 1);
  return summarize(rows, ones, event_count);
}

NodeSummary summarize(std::span<const CompetingRiskResponse> rows, std::span<const std::uint32_t> multiplicity,
                      int event_count) {
  if (rows.size() != multiplicity.size()) throw DomainError("summarize: multiplicity length mismatch");
  if (event_count < 1) throw DomainError("summarize: event count must be positive");

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rows[a].time < rows[b].time; });

  NodeSummary s;
  s.events.resize(static_cast<std::size_t>(event_count));

  std::uint64_t remaining = 0;
  for (auto w : multiplicity) remaining += w;

  // Walk tie groups in increasing time; `remaining` is Y at the group's time.
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = rows[order[i]].time;
    std::size_t end = i;
    std::vector<std::uint64_t> counts(s.events.size(), 0);
    std::uint64_t group_weight = 0;
    bool any_event = false;
    while (end < order.size() && rows[order[end]].time == t) {
      const auto& r = rows[order[end]];
      const std::uint32_t w = multiplicity[order[end]];
      group_weight += w;
      if (r.event != 0 && w > 0) {
        if (r.event > event_count) throw DomainError("summarize: event code exceeds event count");
        counts[static_cast<std::size_t>(r.event - 1)] += w;
        any_event = true;
      }
      ++end;
    }
    if (any_event) {
      s.event_times.push_back(t);
      s.at_risk.push_back(remaining);
      for (std::size_t j = 0; j < counts.size(); ++j) s.events[j].push_back(counts[j]);
    }
    remaining -= group_weight;
    i = end;
  }
  return s;
}

StepFunction kaplan_meier(const NodeSummary& s) {
  std::vector<double> times;
  std::vector<double> values;
  times.reserve(s.size());
  values.reserve(s.size());
  double survival = 1.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double y = static_cast<double>(s.at_risk[k]);
    survival *= 1.0 - static_cast<double>(s.total_events(k)) / y;
    times.push_back(s.event_times[k]);
    values.push_back(survival);
  }
  return StepFunction(std::move(times), std::move(values), 1.0);
}

StepFunction aalen_johansen(const NodeSummary& s, int event) {
  if (event < 1 || event > s.event_count()) throw DomainError("aalen_johansen: event code out of range");
  const auto& d = s.events[static_cast<std::size_t>(event - 1)];
  std::vector<double> times;
  std::vector<double> values;
  double survival_before = 1.0;  // S(v_{k-1})
  double cif = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double y = static_cast<double>(s.at_risk[k]);
    if (d[k] > 0) {
      cif += survival_before * static_cast<double>(d[k]) / y;
      times.push_back(s.event_times[k]);
      values.push_back(cif);
    }
    survival_before *= 1.0 - static_cast<double>(s.total_events(k)) / y;
  }
  return StepFunction(std::move(times), std::move(values), 0.0);
}

StepFunction nelson_aalen(const NodeSummary& s, int event) {
  if (event < 1 || event > s.event_count()) throw DomainError("nelson_aalen: event code out of range");
  const auto& d = s.events[static_cast<std::size_t>(event - 1)];
  std::vector<double> times;
  std::vector<double> values;
  double hazard = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (d[k] == 0) continue;
    hazard += static_cast<double>(d[k]) / static_cast<double>(s.at_risk[k]);
    times.push_back(s.event_times[k]);
    values.push_back(hazard);
  }
  return StepFunction(std::move(times), std::move(values), 0.0);
}

CompetingRiskFunctions terminal_node_functions(const NodeSummary& s) {
  CompetingRiskFunctions out;
  out.survival = kaplan_meier(s);
  for (int j = 1; j <= s.event_count(); ++j) {
    out.cifs.push_back(aalen_johansen(s, j));
    out.chfs.push_back(nelson_aalen(s, j));
  }
  return out;
}

CompetingRiskFunctions terminal_node_functions(std::span<const CompetingRiskResponse> rows, int event_count) {
  if (rows.empty()) throw DomainError("terminal node needs at least one row");
  return terminal_node_functions(summarize(rows, event_count));
}

}  // namespace rcrf
