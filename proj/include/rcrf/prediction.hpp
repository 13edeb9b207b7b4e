#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rcrf/dataset.hpp"
#include "rcrf/forest.hpp"
#include "rcrf/random.hpp"
#include "rcrf/step_function.hpp"

namespace rcrf {

struct PredictionSet {
  /// One entry per input row. nullopt marks a row that was in-bag for every
  /// tree of an out-of-bag prediction.
  std::vector<std::optional<CompetingRiskFunctions>> rows;
  bool oob = false;
};

/// Averages terminal bundles of one forest quickly. Every terminal jump
/// time is mapped once onto the sorted union of all jump times, so merging
/// M curves is a bucket pass instead of a heap merge. Results are
/// bit-identical to average() over the same bundles in the same order.
class ForestAverager {
 public:
  explicit ForestAverager(const Forest& forest);

  /// Mean of the terminal bundles (tree, terminal node index), in the
  /// given order. Throws DomainError on an empty list.
  CompetingRiskFunctions average(std::span<const std::pair<std::uint32_t, std::uint32_t>> terminals) const;

 private:
  struct CurveRef {
    std::size_t offset = 0;  // into grid_index_
    std::size_t length = 0;
  };
  const Forest* forest_;
  std::vector<double> grid_;
  std::vector<std::uint32_t> grid_index_;
  // curves_[tree][node] holds 2J+1 refs for terminal nodes: survival, CIFs, CHFs.
  std::vector<std::vector<std::vector<CurveRef>>> curves_;
};

/// Converts typed values to the forest's internal cell encoding. Throws
/// SchemaError when the row does not conform to `schema`.
std::vector<double> encode_row(const Schema& schema, std::span<const CovariateValue> row);

/// Throws SchemaError unless the table's schema equals the forest's.
void check_schema(const Forest& forest, const CovariateTable& table);

/// Forest prediction for one row. Missing cells are routed with `rng`.
CompetingRiskFunctions predict_row(const Forest& forest, std::span<const CovariateValue> row, Random& rng);
CompetingRiskFunctions predict_row(const Forest& forest, const CovariateTable& table, std::size_t row, Random& rng);

/// Row i uses Random(mix_seed(seed, i)). Rows are delivered to `sink` in
/// increasing row order; `cores` only changes speed (0 = hardware).
using PredictionSink = std::function<void(std::size_t row, const std::optional<CompetingRiskFunctions>&)>;

void predict_each(const Forest& forest, const CovariateTable& table, std::uint64_t seed, std::size_t cores,
                  const PredictionSink& sink);
/// Out-of-bag variant; `dataset` must be the training data.
void predict_oob_each(const Forest& forest, const Dataset& dataset, std::uint64_t seed, std::size_t cores,
                      const PredictionSink& sink);

/// In-memory convenience wrappers. Memory grows with rows times curve
/// length, so large inputs should use the streaming forms.
PredictionSet predict(const Forest& forest, const CovariateTable& table, std::uint64_t seed = 0, std::size_t cores = 1);
/// Throws UsageError when the row count differs from the training data.
PredictionSet predict_oob(const Forest& forest, const Dataset& dataset, std::uint64_t seed = 0, std::size_t cores = 1);

}  // namespace rcrf
