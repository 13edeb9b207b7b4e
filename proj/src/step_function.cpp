#include "rcrf/step_function.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <queue>

#include "rcrf/csv.hpp"
#include "rcrf/error.hpp"
#include "pairwise_sum.hpp"

namespace rcrf {

StepFunction::StepFunction(std::vector<double> times, std::vector<double> values, double initial_value)
    : times_(std::move(times)), values_(std::move(values)), initial_(initial_value) {
  if (times_.size() != values_.size()) throw DomainError("step function needs one value per jump time");
  for (std::size_t k = 1; k < times_.size(); ++k) {
    if (!(times_[k - 1] < times_[k])) throw DomainError("step function jump times must be strictly increasing");
  }
}

double StepFunction::evaluate(double t) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return initial_;
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

using detail::PairwiseSum;

StepFunction average(std::span<const StepFunction> functions) {
  if (functions.empty()) throw DomainError("cannot average an empty list of step functions");
  const double m = static_cast<double>(functions.size());

  PairwiseSum sum(functions.size());
  for (std::size_t i = 0; i < functions.size(); ++i) sum.set(i, functions[i].initial_value());
  const double initial = sum.total() / m;

  using Entry = std::pair<double, std::size_t>;  // (next jump time, function index)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  std::vector<std::size_t> cursor(functions.size(), 0);
  std::size_t total = 0;
  for (std::size_t i = 0; i < functions.size(); ++i) {
    total += functions[i].size();
    if (functions[i].size() > 0) heap.emplace(functions[i].times()[0], i);
  }

  std::vector<double> times;
  std::vector<double> values;
  times.reserve(total);
  values.reserve(total);
  double previous = initial;
  while (!heap.empty()) {
    const double t = heap.top().first;
    while (!heap.empty() && heap.top().first == t) {
      const std::size_t i = heap.top().second;
      heap.pop();
      sum.set(i, functions[i].values()[cursor[i]]);
      if (++cursor[i] < functions[i].size()) heap.emplace(functions[i].times()[cursor[i]], i);
    }
    const double value = sum.total() / m;
    if (value != previous) {
      times.push_back(t);
      values.push_back(value);
      previous = value;
    }
  }
  return StepFunction(std::move(times), std::move(values), initial);
}

CompetingRiskFunctions average(std::span<const CompetingRiskFunctions> bundles) {
  if (bundles.empty()) throw DomainError("cannot average an empty list of curve bundles");
  const auto J = static_cast<std::size_t>(bundles.front().event_count());
  std::vector<StepFunction> scratch;
  scratch.reserve(bundles.size());

  auto collect = [&](auto pick) {
    scratch.clear();
    for (const auto& b : bundles) {
      if (static_cast<std::size_t>(b.event_count()) != J) throw DomainError("bundles disagree on event count");
      scratch.push_back(pick(b));
    }
    return average(scratch);
  };

  CompetingRiskFunctions out;
  out.survival = collect([](const CompetingRiskFunctions& b) { return b.survival; });
  for (std::size_t j = 0; j < J; ++j) {
    out.cifs.push_back(collect([j](const CompetingRiskFunctions& b) { return b.cifs[j]; }));
    out.chfs.push_back(collect([j](const CompetingRiskFunctions& b) { return b.chfs[j]; }));
  }
  return out;
}

namespace {

// Visits the maximal constant pieces of f on [a, b] as (lo, hi, value).
template <typename Visit>
void for_each_piece(const StepFunction& f, double a, double b, Visit visit) {
  const auto& times = f.times();
  auto it = std::upper_bound(times.begin(), times.end(), a);
  std::size_t k = static_cast<std::size_t>(it - times.begin());
  double lo = a;
  double value = k == 0 ? f.initial_value() : f.values()[k - 1];
  while (k < times.size() && times[k] < b) {
    visit(lo, times[k], value);
    lo = times[k];
    value = f.values()[k];
    ++k;
  }
  visit(lo, b, value);
}

}  // namespace

double integrate(const StepFunction& f, double a, double b) {
  if (a > b) throw DomainError("integration bounds reversed");
  if (a == b) return 0.0;
  double total = 0.0;
  for_each_piece(f, a, b, [&](double lo, double hi, double v) { total += v * (hi - lo); });
  return total;
}

double integrated_squared_difference(const StepFunction& f, const StepFunction& g, double a, double b) {
  if (a > b) throw DomainError("integration bounds reversed");
  if (a == b) return 0.0;
  // Merge the two partitions.
  std::vector<double> cuts;
  cuts.reserve(f.size() + g.size() + 2);
  cuts.push_back(a);
  for (const auto* h : {&f, &g}) {
    for (double t : h->times()) {
      if (t > a && t < b) cuts.push_back(t);
    }
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double d = f.evaluate(cuts[k]) - g.evaluate(cuts[k]);
    total += d * d * (cuts[k + 1] - cuts[k]);
  }
  return total;
}

void write_curve(std::ostream& out, const StepFunction& f) {
  out << "0 " << format_double(f.evaluate(0.0)) << '\n';
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (f.times()[k] <= 0.0) continue;
    out << format_double(f.times()[k]) << ' ' << format_double(f.values()[k]) << '\n';
  }
}

}  // namespace rcrf
