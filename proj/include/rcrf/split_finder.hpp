#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "rcrf/dataset.hpp"
#include "rcrf/random.hpp"

namespace rcrf {

enum class SplitFinderKind : std::uint8_t { log_rank = 0, gray = 1 };

const char* to_string(SplitFinderKind kind);

/// Which statistic scores a split, over which events.
struct SplitFinderSpec {
  SplitFinderKind kind = SplitFinderKind::log_rank;
  /// Events are 1..event_count.
  int event_count = 1;
  /// Events whose statistics are combined; nonempty subset of 1..event_count.
  std::vector<int> focus{1};

  /// Throws ConfigurationError on an empty or out-of-range focus set.
  void validate() const;
  friend bool operator==(const SplitFinderSpec&, const SplitFinderSpec&) = default;
};

/// |L^LR| (or its Gray counterpart); `valid` is false when the combined
/// variance is zero, meaning the split carries no information.
struct SplitScore {
  double value = 0.0;
  bool valid = false;
};

/// Send x <= threshold left.
struct NumericThreshold {
  double threshold = 0.0;
  friend bool operator==(const NumericThreshold&, const NumericThreshold&) = default;
};

/// Send rows whose level is in `left_levels` (sorted ids) left.
struct LevelSubset {
  std::vector<std::uint32_t> left_levels;
  bool contains(std::uint32_t level) const;
  friend bool operator==(const LevelSubset&, const LevelSubset&) = default;
};

using SplitRule = std::variant<NumericThreshold, LevelSubset>;

/// True when a non-missing cell value goes to the left child.
bool goes_left(const SplitRule& rule, double value);

struct SplitCandidate {
  std::size_t column = 0;
  SplitRule rule;
  /// Dataset row indices of the non-missing rows on each side.
  std::vector<std::size_t> left_rows;
  std::vector<std::size_t> right_rows;
  SplitScore score;
};

/// Numerator and squared standard deviation of the single-event
/// generalized log-rank statistic, summed over the distinct uncensored
/// times of L and R combined.
struct LogRankTerms {
  double numerator = 0.0;
  double variance = 0.0;
};

LogRankTerms log_rank_score_single(std::span<const CompetingRiskResponse> left,
                                   std::span<const CompetingRiskResponse> right, int event);

/// |sum_j numerator_j| / sqrt(sum_j variance_j) over the focus events.
SplitScore composite_log_rank(std::span<const CompetingRiskResponse> left,
                              std::span<const CompetingRiskResponse> right, std::span<const int> focus);

/// Y*_j(t): rows still at risk for event j in the subdistribution sense:
/// observed time >= t, or an earlier other-cause event with censor time > t.
/// Throws ConfigurationError if a row lacks a censor time.
std::size_t gray_risk_set(std::span<const CompetingRiskResponse> rows, double t, int event);

/// Same pipeline as composite_log_rank with every risk set replaced by Y*_j.
SplitScore composite_gray(std::span<const CompetingRiskResponse> left,
                          std::span<const CompetingRiskResponse> right, std::span<const int> focus);

SplitScore composite_score(std::span<const CompetingRiskResponse> left,
                           std::span<const CompetingRiskResponse> right, SplitFinderKind kind,
                           std::span<const int> focus);

/// Best split of a node over `mtry` randomly drawn columns.
///
/// `node_rows` are dataset row indices, each counted `multiplicity[i]` times
/// (bootstrap copies). With `number_of_splits == 0` every achievable split
/// is scored (numeric: each distinct value but the largest as threshold;
/// categorical: each level against the rest); otherwise that many random
/// candidates are drawn per column. Rows missing the tried column are left
/// out of scoring and of the returned row sets. Returns nothing when no
/// valid candidate exists.
std::optional<SplitCandidate> find_best_split(std::span<const std::size_t> node_rows,
                                              std::span<const std::uint32_t> multiplicity,
                                              const Dataset& dataset, const SplitFinderSpec& spec,
                                              std::size_t mtry, std::size_t number_of_splits, Random& rng);

/// Unit multiplicity.
std::optional<SplitCandidate> find_best_split(std::span<const std::size_t> node_rows, const Dataset& dataset,
                                              const SplitFinderSpec& spec, std::size_t mtry,
                                              std::size_t number_of_splits, Random& rng);

}  // namespace rcrf
