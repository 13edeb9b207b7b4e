#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "rcrf/csv.hpp"
#include "rcrf/dataset.hpp"
#include "rcrf/random.hpp"
#include "rcrf/split_finder.hpp"
#include "rcrf/step_function.hpp"

namespace rcrf {

struct TrainingParameters {
  std::size_t ntree = 100;
  std::size_t mtry = 1;
  /// 0 = try every achievable split.
  std::size_t number_of_splits = 0;
  /// Nodes with fewer than 2 * node_size (bootstrap-weighted) rows are not split.
  std::size_t node_size = 5;
  std::size_t max_node_depth = 100000;
  SplitFinderSpec split_finder;
  std::uint64_t random_seed = 0;
  /// Worker threads; 0 = hardware concurrency. Does not affect the result.
  std::size_t cores = 0;
  /// When set, each finished tree is written here and training resumes
  /// from the trees already present.
  std::optional<std::filesystem::path> save_path;

  /// Throws ConfigurationError when a value is out of range for a dataset
  /// with `column_count` covariates.
  void validate(std::size_t column_count) const;
};

struct SplitNode {
  std::size_t column = 0;
  SplitRule rule;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  /// Probability that a row missing `column` is routed left at prediction.
  double missing_left_probability = 0.5;
};

struct TerminalNode {
  CompetingRiskFunctions functions;
  /// Bootstrap-weighted number of training rows in the node.
  std::uint64_t size = 0;
};

using TreeNode = std::variant<SplitNode, TerminalNode>;

class Tree {
 public:
  /// nodes[0] is the root.
  std::vector<TreeNode> nodes;
  /// Bootstrap multiplicity of every training row; 0 = out of bag.
  std::vector<std::uint32_t> in_bag_counts;
  std::uint64_t tree_seed = 0;

  /// Index of the terminal node reached by `row` of `table`. Missing cells
  /// are routed with `rng`.
  std::uint32_t route(const CovariateTable& table, std::size_t row, Random& rng) const;
  std::uint32_t route(std::span<const double> cells, Random& rng) const;

  const TerminalNode& terminal(std::uint32_t index) const { return std::get<TerminalNode>(nodes[index]); }
  std::size_t depth() const;
  std::size_t terminal_count() const;
};

struct Forest {
  std::vector<Tree> trees;
  TrainingParameters parameters;
  Schema schema;
  int event_count = 1;
  std::size_t training_rows = 0;
  std::uint64_t training_hash = 0;
  /// Largest uncensored training time; the default mortality horizon.
  double largest_event_time = 0.0;
  ResponseSpec response;
};

/// n draws with replacement from 0..n-1, as per-row counts.
std::vector<std::uint32_t> bootstrap(std::size_t n, Random& rng);

/// Grows the subtree for the given rows (dataset row indices with bootstrap
/// multiplicities) starting at `depth`. The returned nodes are an arena
/// whose first element is the subtree root.
std::vector<TreeNode> process_node(std::span<const std::size_t> rows, std::span<const std::uint32_t> multiplicity,
                                   std::size_t depth, const TrainingParameters& params, const Dataset& dataset,
                                   Random& rng);

/// Grows tree number `index` with its own stream seeded by
/// mix_seed(params.random_seed, index).
Tree grow_tree(const Dataset& dataset, const TrainingParameters& params, std::size_t index);

struct TrainingProgress {
  std::size_t tree_index = 0;
  std::size_t finished = 0;
  std::size_t total = 0;
  bool resumed = false;  // loaded from save_path instead of grown
};

using ProgressCallback = std::function<void(const TrainingProgress&)>;

/// Trains the forest. The result depends only on (dataset, params minus
/// cores/save_path).
Forest train(const Dataset& dataset, const TrainingParameters& params, const ProgressCallback& progress = {},
             const ResponseSpec& response = {});

}  // namespace rcrf
