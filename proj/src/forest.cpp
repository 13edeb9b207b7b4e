#include "rcrf/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "rcrf/error.hpp"
#include "rcrf/estimators.hpp"
#include "rcrf/persistence.hpp"

namespace rcrf {

void TrainingParameters::validate(std::size_t column_count) const {
  if (ntree < 1) throw ConfigurationError("ntree must be at least 1");
  if (mtry < 1 || mtry > column_count) {
    throw ConfigurationError("mtry must be between 1 and the number of covariates (" +
                             std::to_string(column_count) + ")");
  }
  if (node_size < 1) throw ConfigurationError("node size must be at least 1");
  if (max_node_depth < 1) throw ConfigurationError("max node depth must be at least 1");
  split_finder.validate();
}

std::uint32_t Tree::route(std::span<const double> cells, Random& rng) const {
  std::uint32_t index = 0;
  while (const auto* split = std::get_if<SplitNode>(&nodes[index])) {
    const double v = cells[split->column];
    const bool left = std::isnan(v) ? rng.bernoulli(split->missing_left_probability) : goes_left(split->rule, v);
    index = left ? split->left : split->right;
  }
  return index;
}

std::uint32_t Tree::route(const CovariateTable& table, std::size_t row, Random& rng) const {
  std::uint32_t index = 0;
  while (const auto* split = std::get_if<SplitNode>(&nodes[index])) {
    const double v = table.column(split->column).values[row];
    const bool left = std::isnan(v) ? rng.bernoulli(split->missing_left_probability) : goes_left(split->rule, v);
    index = left ? split->left : split->right;
  }
  return index;
}

std::size_t Tree::depth() const {
  if (nodes.empty()) return 0;
  std::size_t deepest = 0;
  std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [index, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (const auto* split = std::get_if<SplitNode>(&nodes[index])) {
      stack.emplace_back(split->left, d + 1);
      stack.emplace_back(split->right, d + 1);
    }
  }
  return deepest;
}

std::size_t Tree::terminal_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) {
    return std::holds_alternative<TerminalNode>(n);
  }));
}

std::vector<std::uint32_t> bootstrap(std::size_t n, Random& rng) {
  if (n < 1) throw DomainError("bootstrap needs at least one row");
  std::vector<std::uint32_t> counts(n, 0);
  for (std::size_t i = 0; i < n; ++i) ++counts[rng.index(n)];
  return counts;
}

namespace {

TerminalNode make_terminal(std::span<const std::size_t> rows, std::span<const std::uint32_t> multiplicity,
                           const Dataset& dataset) {
  std::vector<CompetingRiskResponse> responses;
  responses.reserve(rows.size());
  for (std::size_t r : rows) responses.push_back(dataset.responses()[r]);
  TerminalNode node;
  node.functions = terminal_node_functions(summarize(responses, multiplicity, dataset.event_count()));
  node.size = std::accumulate(multiplicity.begin(), multiplicity.end(), std::uint64_t{0});
  return node;
}

}  // namespace

std::vector<TreeNode> process_node(std::span<const std::size_t> rows, std::span<const std::uint32_t> multiplicity,
                                   std::size_t depth, const TrainingParameters& params, const Dataset& dataset,
                                   Random& rng) {
  if (rows.empty()) throw DomainError("process_node needs at least one row");
  if (rows.size() != multiplicity.size()) throw DomainError("process_node: multiplicity length mismatch");

  // Work buffer; every pending node owns a contiguous range of it.
  std::vector<std::size_t> buffer(rows.begin(), rows.end());
  std::vector<std::uint32_t> weights(multiplicity.begin(), multiplicity.end());
  std::vector<std::size_t> scratch_rows;
  std::vector<std::uint32_t> scratch_weights;

  struct Pending {
    std::uint32_t node;
    std::size_t begin;
    std::size_t end;
    std::size_t depth;
  };
  std::vector<TreeNode> nodes(1);
  std::vector<Pending> stack{{0, 0, buffer.size(), depth}};

  while (!stack.empty()) {
    const Pending job = stack.back();
    stack.pop_back();
    const std::span<const std::size_t> node_rows(buffer.data() + job.begin, job.end - job.begin);
    const std::span<const std::uint32_t> node_weights(weights.data() + job.begin, job.end - job.begin);
    const std::uint64_t size = std::accumulate(node_weights.begin(), node_weights.end(), std::uint64_t{0});

    std::optional<SplitCandidate> split;
    if (size >= 2 * static_cast<std::uint64_t>(params.node_size) && job.depth < params.max_node_depth) {
      split = find_best_split(node_rows, node_weights, dataset, params.split_finder, params.mtry,
                              params.number_of_splits, rng);
    }
    if (!split) {
      nodes[job.node] = make_terminal(node_rows, node_weights, dataset);
      continue;
    }

    const Column& column = dataset.covariates().column(split->column);
    double left_weight = 0.0;
    double present_weight = 0.0;
    for (std::size_t i = 0; i < node_rows.size(); ++i) {
      const double v = column.values[node_rows[i]];
      if (std::isnan(v)) continue;
      present_weight += node_weights[i];
      if (goes_left(split->rule, v)) left_weight += node_weights[i];
    }
    const double left_probability = left_weight / present_weight;

    // Stable partition; a row missing the split column picks a side with
    // probability 1/2.
    scratch_rows.clear();
    scratch_weights.clear();
    std::vector<std::size_t> right_rows;
    std::vector<std::uint32_t> right_weights;
    for (std::size_t i = 0; i < node_rows.size(); ++i) {
      const double v = column.values[node_rows[i]];
      const bool left = std::isnan(v) ? rng.bernoulli(0.5) : goes_left(split->rule, v);
      if (left) {
        scratch_rows.push_back(node_rows[i]);
        scratch_weights.push_back(node_weights[i]);
      } else {
        right_rows.push_back(node_rows[i]);
        right_weights.push_back(node_weights[i]);
      }
    }
    const std::size_t mid = job.begin + scratch_rows.size();
    std::copy(scratch_rows.begin(), scratch_rows.end(), buffer.begin() + static_cast<std::ptrdiff_t>(job.begin));
    std::copy(right_rows.begin(), right_rows.end(), buffer.begin() + static_cast<std::ptrdiff_t>(mid));
    std::copy(scratch_weights.begin(), scratch_weights.end(), weights.begin() + static_cast<std::ptrdiff_t>(job.begin));
    std::copy(right_weights.begin(), right_weights.end(), weights.begin() + static_cast<std::ptrdiff_t>(mid));

    SplitNode node;
    node.column = split->column;
    node.rule = std::move(split->rule);
    node.missing_left_probability = left_probability;
    const auto left_index = static_cast<std::uint32_t>(nodes.size());
    const auto right_index = left_index + 1;
    node.left = left_index;
    node.right = right_index;
    nodes[job.node] = std::move(node);
    nodes.emplace_back();
    nodes.emplace_back();
    // Left subtree is grown first.
    stack.push_back({right_index, mid, job.end, job.depth + 1});
    stack.push_back({left_index, job.begin, mid, job.depth + 1});
  }
  return nodes;
}

Tree grow_tree(const Dataset& dataset, const TrainingParameters& params, std::size_t index) {
  Tree tree;
  tree.tree_seed = mix_seed(params.random_seed, index);
  Random rng(tree.tree_seed);
  tree.in_bag_counts = bootstrap(dataset.rows(), rng);

  std::vector<std::size_t> rows;
  std::vector<std::uint32_t> multiplicity;
  for (std::size_t i = 0; i < tree.in_bag_counts.size(); ++i) {
    if (tree.in_bag_counts[i] > 0) {
      rows.push_back(i);
      multiplicity.push_back(tree.in_bag_counts[i]);
    }
  }
  tree.nodes = process_node(rows, multiplicity, 0, params, dataset, rng);
  return tree;
}

namespace {

void prepare_save_path(const std::filesystem::path& dir, const Forest& header) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create save path '" + dir.string() + "': " + ec.message());
  const auto probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError("save path '" + dir.string() + "' is not writable");
  }
  std::filesystem::remove(probe, ec);

  const auto meta = meta_path(dir);
  if (std::filesystem::exists(meta)) {
    std::ifstream in(meta, std::ios::binary);
    Forest existing = read_forest_meta(in);
    if (!same_setup(existing, header)) {
      throw ConfigurationError("save path '" + dir.string() +
                               "' holds a forest trained with different data or parameters");
    }
  } else {
    save_forest_meta(dir, header);
  }
}

}  // namespace

Forest train(const Dataset& dataset, const TrainingParameters& params, const ProgressCallback& progress,
             const ResponseSpec& response) {
  params.validate(dataset.covariates().column_count());
  if (params.split_finder.event_count != dataset.event_count()) {
    throw ConfigurationError("split finder is configured for " + std::to_string(params.split_finder.event_count) +
                             " event types but the data has " + std::to_string(dataset.event_count()));
  }
  if (params.split_finder.kind == SplitFinderKind::gray && !dataset.has_censor_times()) {
    throw ConfigurationError(
        "the Gray split finder requires censor times for every row; provide a censor time column");
  }

  Forest forest;
  forest.parameters = params;
  forest.schema = dataset.schema();
  forest.event_count = dataset.event_count();
  forest.training_rows = dataset.rows();
  forest.training_hash = dataset.content_hash();
  for (const auto& r : dataset.responses()) {
    if (!r.censored()) forest.largest_event_time = std::max(forest.largest_event_time, r.time);
  }
  forest.response = response;

  std::vector<std::optional<Tree>> trees(params.ntree);
  std::size_t finished = 0;
  std::mutex mutex;

  if (params.save_path) {
    prepare_save_path(*params.save_path, forest);
    for (std::size_t t = 0; t < params.ntree; ++t) {
      trees[t] = try_load_tree(*params.save_path, t);
      if (trees[t] && trees[t]->in_bag_counts.size() != dataset.rows()) trees[t].reset();
      if (trees[t]) {
        ++finished;
        if (progress) progress({t, finished, params.ntree, true});
      }
    }
  }

  std::size_t workers = params.cores == 0 ? std::thread::hardware_concurrency() : params.cores;
  workers = std::clamp<std::size_t>(workers, 1, params.ntree);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;

  auto work = [&] {
    while (!failed) {
      const std::size_t t = next++;
      if (t >= params.ntree) return;
      if (trees[t]) continue;
      try {
        Tree tree = grow_tree(dataset, params, t);
        if (params.save_path) save_tree(*params.save_path, t, tree);
        std::lock_guard lock(mutex);
        trees[t] = std::move(tree);
        ++finished;
        if (progress) progress({t, finished, params.ntree, false});
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);

  forest.trees.reserve(params.ntree);
  for (auto& t : trees) forest.trees.push_back(std::move(*t));
  return forest;
}

}  // namespace rcrf
