#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rcrf/dataset.hpp"
#include "rcrf/step_function.hpp"

namespace rcrf {

/// Integral of the event's CIF over [0, tau]. Throws DomainError unless
/// tau > 0.
double extract_mortality(const CompetingRiskFunctions& f, int event, double tau);

/// Largest uncensored observed time; the default mortality horizon.
double largest_event_time(const Dataset& dataset);

/// Per-event naive concordance error.
///
/// mortalities[j-1][i] is row i's predicted mortality for event j. For
/// event j a pair (i, k) is comparable when row i had event j and
/// time_i < time_k; it is concordant when mortality_i > mortality_k and
/// counts one half when they are equal. The entry is nullopt when event j
/// has no comparable pair. Throws UsageError on misaligned input.
std::vector<std::optional<double>> naive_concordance(std::span<const CompetingRiskResponse> responses,
                                                     const std::vector<std::vector<double>>& mortalities);

/// The same for a single event.
std::optional<double> naive_concordance(std::span<const CompetingRiskResponse> responses,
                                        std::span<const double> mortality, int event);

struct TuningScores {
  /// Lower is better.
  std::vector<double> scores;
  /// Events whose concordance did not vary across combinations; they
  /// contribute 0.
  std::vector<int> degenerate_events;
};

/// concordance[i][j-1] is the concordance (1 - error) of parameter
/// combination i for event j. Each event column is centred and scaled by
/// its sample standard deviation, and the score of combination i is minus
/// the mean over events. Throws UsageError with fewer than two combinations
/// or ragged rows.
TuningScores standardized_tuning_error(const std::vector<std::vector<double>>& concordance);

/// A continuous curve known in closed form. `kinks` lists points where it
/// is not smooth; integration splits there.
struct EvaluableCurve {
  std::function<double(double)> value;
  std::vector<double> kinks;

  double operator()(double t) const { return value(t); }
};

/// sqrt of the integral of (truth - predicted)^2 over [0, tau].
double cif_row_error(const StepFunction& truth, const StepFunction& predicted, double tau);
double cif_row_error(const EvaluableCurve& truth, const StepFunction& predicted, double tau);

struct CifError {
  /// per_row_event[i][j-1]
  std::vector<std::vector<double>> per_row_event;
  /// Mean over rows, per event.
  std::vector<double> per_event;
  /// Mean of per_event.
  double overall = 0.0;
};

/// Aggregates already computed row errors.
CifError summarize_cif_error(std::vector<std::vector<double>> per_row_event);

/// truth[i][j-1] against predicted[i].cif(j). Throws UsageError when the
/// row or event counts disagree.
CifError cif_error(const std::vector<std::vector<StepFunction>>& truth,
                   std::span<const CompetingRiskFunctions> predicted, double tau = 20.0);
CifError cif_error(const std::vector<std::vector<EvaluableCurve>>& truth,
                   std::span<const CompetingRiskFunctions> predicted, double tau = 20.0);

}  // namespace rcrf
