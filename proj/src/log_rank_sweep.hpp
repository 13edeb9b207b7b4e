#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rcrf/dataset.hpp"
#include "rcrf/split_finder.hpp"

namespace rcrf::detail {

/// Per-row position in the node's sorted distinct event times: the row is
/// in the (possibly Gray-modified) risk set at v_k iff k < prefix.
std::uint32_t at_risk_prefix(const CompetingRiskResponse& r, std::span<const double> event_times,
                             SplitFinderKind kind, int event);

/// Sorted distinct uncensored times among the weighted rows.
std::vector<double> distinct_event_times(std::span<const CompetingRiskResponse> rows,
                                         std::span<const std::uint32_t> weights);

/// Incremental composite score of "left group vs. the rest" for a fixed
/// population of rows.
///
/// The single-event numerator is linear in left-group membership
/// (sum over left rows of I(event) - cumulative hazard at the row's time),
/// and the variance splits into a linear term minus a pairwise term
/// sum_{i,i' in L} w_i w_i' B(min(p_i, p_i')), which two Fenwick trees keep
/// current. Adding one row costs O(|focus| log K).
class LogRankSweep {
 public:
  LogRankSweep(std::span<const CompetingRiskResponse> rows, std::span<const std::uint32_t> weights,
               const SplitFinderSpec& spec);

  std::size_t size() const { return weights_.size(); }

  /// Empties the left group.
  void reset();

  /// Moves population row `i` into the left group.
  void add(std::size_t i);

  /// Score of the current left group against the rest of the population.
  /// Invalid when either side is empty.
  SplitScore score() const;

  double left_weight() const { return left_weight_; }
  double total_weight() const { return total_weight_; }

 private:
  class Fenwick {
   public:
    void assign(std::size_t n) { tree_.assign(n + 1, 0.0); }
    void add(std::size_t i, double v) {
      for (++i; i < tree_.size(); i += i & (~i + 1)) tree_[i] += v;
    }
    /// Sum over indices [0, i).
    double prefix(std::size_t i) const {
      double s = 0.0;
      for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
      return s;
    }

   private:
    std::vector<double> tree_;
  };

  struct EventState {
    std::vector<std::uint32_t> prefix;  // per row
    std::vector<double> row_score;      // per row: I(event) - H(prefix)
    std::vector<double> row_linear;     // per row: A(prefix)
    std::vector<double> pair_weight;    // per prefix value p: B(p)
    Fenwick weight_by_prefix;
    Fenwick weighted_pair_by_prefix;
    double numerator = 0.0;
    double linear = 0.0;
    double pairwise = 0.0;
  };

  std::vector<double> weights_;
  std::vector<EventState> events_;
  double total_weight_ = 0.0;
  double left_weight_ = 0.0;
};

/// Literal per-time evaluation of the composite statistic for two weighted
/// groups; reference path for the public scoring functions.
SplitScore direct_composite(std::span<const CompetingRiskResponse> left, std::span<const std::uint32_t> left_weights,
                            std::span<const CompetingRiskResponse> right,
                            std::span<const std::uint32_t> right_weights, SplitFinderKind kind,
                            std::span<const int> focus, std::vector<LogRankTerms>* per_event = nullptr);

}  // namespace rcrf::detail
