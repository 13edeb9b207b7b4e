#include "rcrf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rcrf/error.hpp"
#include "rcrf/log.hpp"

namespace rcrf {

double extract_mortality(const CompetingRiskFunctions& f, int event, double tau) {
  if (!(tau > 0.0)) throw DomainError("mortality horizon must be positive");
  if (event < 1 || event > f.event_count()) {
    throw DomainError("event " + std::to_string(event) + " is outside 1.." + std::to_string(f.event_count()));
  }
  return integrate(f.cif(event), 0.0, tau);
}

double largest_event_time(const Dataset& dataset) {
  double largest = 0.0;
  for (const auto& r : dataset.responses()) {
    if (!r.censored()) largest = std::max(largest, r.time);
  }
  return largest;
}

namespace {

class CountTree {
 public:
  explicit CountTree(std::size_t n) : tree_(n + 1, 0) {}
  void add(std::size_t i) {
    for (++i; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
  }
  /// Count of inserted positions < i.
  std::uint64_t below(std::size_t i) const {
    std::uint64_t s = 0;
    for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<std::uint64_t> tree_;
};

}  // namespace

std::optional<double> naive_concordance(std::span<const CompetingRiskResponse> responses,
                                        std::span<const double> m, int event) {
  const std::size_t n = responses.size();
  if (m.size() != n) {
    throw UsageError("mortality vector for event " + std::to_string(event) + " has " + std::to_string(m.size()) +
                     " entries for " + std::to_string(n) + " responses");
  }
  std::vector<double> sorted(m.begin(), m.end());
  if (std::any_of(sorted.begin(), sorted.end(), [](double x) { return std::isnan(x); })) {
    throw DomainError("mortality is NaN");
  }
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  auto rank = [&](double x) {
    return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin());
  };

  std::vector<std::size_t> by_time(n);
  std::iota(by_time.begin(), by_time.end(), 0);
  std::sort(by_time.begin(), by_time.end(),
            [&](std::size_t a, std::size_t b) { return responses[a].time > responses[b].time; });

  // Sweep from the latest time down; rows inserted so far are strictly later.
  CountTree tree(sorted.size());
  std::uint64_t inserted = 0;
  std::uint64_t comparable = 0;
  std::uint64_t twice_concordant = 0;
  for (std::size_t g = 0; g < n;) {
    std::size_t h = g;
    while (h < n && responses[by_time[h]].time == responses[by_time[g]].time) ++h;
    for (std::size_t q = g; q < h; ++q) {
      const std::size_t i = by_time[q];
      if (responses[i].event != event) continue;
      const std::size_t r = rank(m[i]);
      const std::uint64_t lower = tree.below(r);
      const std::uint64_t equal = tree.below(r + 1) - lower;
      comparable += inserted;
      twice_concordant += 2 * lower + equal;
    }
    for (std::size_t q = g; q < h; ++q) tree.add(rank(m[by_time[q]]));
    inserted += h - g;
    g = h;
  }
  if (comparable == 0) return std::nullopt;
  return 1.0 - static_cast<double>(twice_concordant) / (2.0 * static_cast<double>(comparable));
}

std::vector<std::optional<double>> naive_concordance(std::span<const CompetingRiskResponse> responses,
                                                     const std::vector<std::vector<double>>& mortalities) {
  std::vector<std::optional<double>> errors;
  for (std::size_t e = 0; e < mortalities.size(); ++e) {
    errors.push_back(naive_concordance(responses, mortalities[e], static_cast<int>(e) + 1));
  }
  return errors;
}

TuningScores standardized_tuning_error(const std::vector<std::vector<double>>& concordance) {
  const std::size_t combos = concordance.size();
  if (combos < 2) throw UsageError("standardizing needs at least two parameter combinations");
  const std::size_t J = concordance.front().size();
  for (const auto& row : concordance) {
    if (row.size() != J) throw UsageError("every combination needs one concordance per event");
  }
  TuningScores out;
  out.scores.assign(combos, 0.0);
  for (std::size_t j = 0; j < J; ++j) {
    double mean = 0.0;
    for (const auto& row : concordance) mean += row[j];
    mean /= static_cast<double>(combos);
    double ss = 0.0;
    for (const auto& row : concordance) ss += (row[j] - mean) * (row[j] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(combos - 1));
    // Identical values can leave a rounding-sized sd; test for them directly.
    const bool constant = std::all_of(concordance.begin(), concordance.end(),
                                      [&](const auto& row) { return row[j] == concordance.front()[j]; });
    if (constant || !(sd > 0.0)) {
      out.degenerate_events.push_back(static_cast<int>(j) + 1);
      warn("concordance for event " + std::to_string(j + 1) +
           " is identical across combinations; it does not contribute to the score");
      continue;
    }
    for (std::size_t i = 0; i < combos; ++i) out.scores[i] -= (concordance[i][j] - mean) / sd;
  }
  if (J > 0) {
    for (auto& s : out.scores) s /= static_cast<double>(J);
  }
  return out;
}

double cif_row_error(const StepFunction& truth, const StepFunction& predicted, double tau) {
  if (!(tau > 0.0)) throw DomainError("error horizon must be positive");
  return std::sqrt(integrated_squared_difference(truth, predicted, 0.0, tau));
}

namespace {

// Gauss-Kronrod with a relative target plus an absolute floor per unit
// length. The floor stops the recursion once cancellation in the integrand
// dominates the error estimate.
template <typename F>
double adaptive_integral(const F& f, double a, double b, unsigned depth) {
  using Quadrature = boost::math::quadrature::gauss_kronrod<double, 15>;
  double error = 0.0;
  const double estimate = Quadrature::integrate(f, a, b, 0, 0.0, &error);
  if (depth == 0 || error <= std::max(1e-12 * std::fabs(estimate), 1e-16 * (b - a))) return estimate;
  const double mid = 0.5 * (a + b);
  return adaptive_integral(f, a, mid, depth - 1) + adaptive_integral(f, mid, b, depth - 1);
}

}  // namespace

double cif_row_error(const EvaluableCurve& truth, const StepFunction& predicted, double tau) {
  if (!(tau > 0.0)) throw DomainError("error horizon must be positive");
  std::vector<double> cuts{0.0, tau};
  for (double t : predicted.times()) {
    if (t > 0.0 && t < tau) cuts.push_back(t);
  }
  for (double t : truth.kinks) {
    if (t > 0.0 && t < tau) cuts.push_back(t);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double c = predicted.evaluate(cuts[k]);
    auto integrand = [&](double t) {
      const double d = truth(t) - c;
      return d * d;
    };
    total += adaptive_integral(integrand, cuts[k], cuts[k + 1], 8);
  }
  return std::sqrt(total);
}

CifError summarize_cif_error(std::vector<std::vector<double>> per_row_event) {
  CifError out;
  out.per_row_event = std::move(per_row_event);
  if (out.per_row_event.empty()) throw UsageError("no rows to evaluate");
  const std::size_t J = out.per_row_event.front().size();
  out.per_event.assign(J, 0.0);
  for (const auto& row : out.per_row_event) {
    if (row.size() != J) throw UsageError("every row needs one error per event");
    for (std::size_t j = 0; j < J; ++j) out.per_event[j] += row[j];
  }
  for (auto& e : out.per_event) e /= static_cast<double>(out.per_row_event.size());
  out.overall = J == 0 ? 0.0 : std::accumulate(out.per_event.begin(), out.per_event.end(), 0.0) / static_cast<double>(J);
  return out;
}

namespace {

template <typename Truth>
CifError cif_error_impl(const std::vector<std::vector<Truth>>& truth, std::span<const CompetingRiskFunctions> predicted,
                        double tau) {
  if (truth.size() != predicted.size()) {
    throw UsageError("truth has " + std::to_string(truth.size()) + " rows but there are " +
                     std::to_string(predicted.size()) + " predictions");
  }
  std::vector<std::vector<double>> errors(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].size() != static_cast<std::size_t>(predicted[i].event_count())) {
      throw UsageError("row " + std::to_string(i) + ": truth and prediction disagree on the number of events");
    }
    for (std::size_t j = 0; j < truth[i].size(); ++j) {
      errors[i].push_back(cif_row_error(truth[i][j], predicted[i].cifs[j], tau));
    }
  }
  return summarize_cif_error(std::move(errors));
}

}  // namespace

CifError cif_error(const std::vector<std::vector<StepFunction>>& truth,
                   std::span<const CompetingRiskFunctions> predicted, double tau) {
  return cif_error_impl(truth, predicted, tau);
}

CifError cif_error(const std::vector<std::vector<EvaluableCurve>>& truth,
                   std::span<const CompetingRiskFunctions> predicted, double tau) {
  return cif_error_impl(truth, predicted, tau);
}

}  // namespace rcrf
