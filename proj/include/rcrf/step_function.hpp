#pragma once

#include <iosfwd>
#include <span>
#include <vector>

namespace rcrf {

/// Right-continuous piecewise-constant function of time.
///
/// Takes `initial_value` on (-inf, times[0]) and `values[k]` on
/// [times[k], times[k+1]). Jump times are strictly increasing.
class StepFunction {
 public:
  StepFunction() = default;
  explicit StepFunction(double initial_value) : initial_(initial_value) {}
  /// Throws DomainError unless times are strictly increasing and the two
  /// vectors have equal length.
  StepFunction(std::vector<double> times, std::vector<double> values, double initial_value);

  double evaluate(double t) const;
  double operator()(double t) const { return evaluate(t); }

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }
  double initial_value() const { return initial_; }
  std::size_t size() const { return times_.size(); }
  /// Value after the last jump.
  double final_value() const { return values_.empty() ? initial_ : values_.back(); }

  friend bool operator==(const StepFunction&, const StepFunction&) = default;

 private:
  std::vector<double> times_;
  std::vector<double> values_;
  double initial_ = 0.0;
};

/// One survival curve plus J cumulative incidence and J cumulative hazard
/// curves. Index j-1 holds event j.
struct CompetingRiskFunctions {
  StepFunction survival{1.0};
  std::vector<StepFunction> cifs;
  std::vector<StepFunction> chfs;

  int event_count() const { return static_cast<int>(cifs.size()); }
  const StepFunction& cif(int event) const { return cifs.at(static_cast<std::size_t>(event - 1)); }
  const StepFunction& chf(int event) const { return chfs.at(static_cast<std::size_t>(event - 1)); }

  friend bool operator==(const CompetingRiskFunctions&, const CompetingRiskFunctions&) = default;
};

/// Pointwise arithmetic mean. The result jumps on the union of the input
/// jump times (only where its value actually changes). Computed by a k-way
/// merge of the jump lists. Throws DomainError on an empty list.
StepFunction average(std::span<const StepFunction> functions);

/// Pointwise mean of bundles that share the same number of events.
CompetingRiskFunctions average(std::span<const CompetingRiskFunctions> bundles);

/// Exact integral over [a, b]. Throws DomainError when a > b.
double integrate(const StepFunction& f, double a, double b);

/// Exact integral of (f - g)^2 over [a, b]. Throws DomainError when a > b.
double integrated_squared_difference(const StepFunction& f, const StepFunction& g, double a, double b);

/// Two-column "time value" text, starting with a row for t = 0 and then
/// one row per jump at or after 0.
void write_curve(std::ostream& out, const StepFunction& f);

}  // namespace rcrf
