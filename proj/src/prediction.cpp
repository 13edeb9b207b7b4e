#include "rcrf/prediction.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "pairwise_sum.hpp"
#include "rcrf/error.hpp"

namespace rcrf {

namespace {

using TerminalRef = std::pair<std::uint32_t, std::uint32_t>;

const StepFunction& curve_of(const CompetingRiskFunctions& f, std::size_t c) {
  const std::size_t J = f.cifs.size();
  if (c == 0) return f.survival;
  if (c <= J) return f.cifs[c - 1];
  return f.chfs[c - 1 - J];
}

}  // namespace

ForestAverager::ForestAverager(const Forest& forest) : forest_(&forest) {
  const std::size_t curve_count = 2 * static_cast<std::size_t>(forest.event_count) + 1;
  for (const auto& tree : forest.trees) {
    for (const auto& node : tree.nodes) {
      if (const auto* terminal = std::get_if<TerminalNode>(&node)) {
        for (std::size_t c = 0; c < curve_count; ++c) {
          const auto& times = curve_of(terminal->functions, c).times();
          grid_.insert(grid_.end(), times.begin(), times.end());
        }
      }
    }
  }
  std::sort(grid_.begin(), grid_.end());
  grid_.erase(std::unique(grid_.begin(), grid_.end()), grid_.end());

  curves_.resize(forest.trees.size());
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    const auto& tree = forest.trees[t];
    curves_[t].resize(tree.nodes.size());
    for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
      const auto* terminal = std::get_if<TerminalNode>(&tree.nodes[n]);
      if (!terminal) continue;
      auto& refs = curves_[t][n];
      refs.resize(curve_count);
      for (std::size_t c = 0; c < curve_count; ++c) {
        const auto& times = curve_of(terminal->functions, c).times();
        refs[c] = {grid_index_.size(), times.size()};
        for (double x : times) {
          grid_index_.push_back(
              static_cast<std::uint32_t>(std::lower_bound(grid_.begin(), grid_.end(), x) - grid_.begin()));
        }
      }
    }
  }
}

CompetingRiskFunctions ForestAverager::average(std::span<const TerminalRef> terminals) const {
  if (terminals.empty()) throw DomainError("cannot average an empty list of curve bundles");
  const std::size_t J = static_cast<std::size_t>(forest_->event_count);
  const std::size_t curve_count = 2 * J + 1;
  const std::size_t m = terminals.size();
  const double denominator = static_cast<double>(m);

  detail::PairwiseSum sum(m);
  std::vector<double> initial(m);
  std::vector<std::uint32_t> counts;
  std::vector<std::uint32_t> event_slot;
  std::vector<double> event_value;

  CompetingRiskFunctions out;
  for (std::size_t c = 0; c < curve_count; ++c) {
    std::uint32_t lo = std::numeric_limits<std::uint32_t>::max();
    std::uint32_t hi = 0;
    std::size_t events = 0;
    for (std::size_t s = 0; s < m; ++s) {
      const auto [tree, node] = terminals[s];
      const auto& f = curve_of(forest_->trees[tree].terminal(node).functions, c);
      initial[s] = f.initial_value();
      const CurveRef ref = curves_[tree][node][c];
      if (ref.length > 0) {
        lo = std::min(lo, grid_index_[ref.offset]);
        hi = std::max(hi, grid_index_[ref.offset + ref.length - 1]);
        events += ref.length;
      }
    }
    sum.assign(initial);
    const double start = sum.total() / denominator;

    std::vector<double> times;
    std::vector<double> values;
    if (events > 0) {
      // Bucket the jumps by grid position.
      const std::size_t span = hi - lo + 1;
      counts.assign(span + 1, 0);
      for (std::size_t s = 0; s < m; ++s) {
        const auto [tree, node] = terminals[s];
        const CurveRef ref = curves_[tree][node][c];
        for (std::size_t k = 0; k < ref.length; ++k) ++counts[grid_index_[ref.offset + k] - lo + 1];
      }
      for (std::size_t b = 1; b <= span; ++b) counts[b] += counts[b - 1];
      event_slot.resize(events);
      event_value.resize(events);
      for (std::size_t s = 0; s < m; ++s) {
        const auto [tree, node] = terminals[s];
        const CurveRef ref = curves_[tree][node][c];
        const auto& values_of = curve_of(forest_->trees[tree].terminal(node).functions, c).values();
        for (std::size_t k = 0; k < ref.length; ++k) {
          const std::uint32_t pos = counts[grid_index_[ref.offset + k] - lo]++;
          event_slot[pos] = static_cast<std::uint32_t>(s);
          event_value[pos] = values_of[k];
        }
      }
      // counts[b] is now the end of bucket b.
      times.reserve(std::min<std::size_t>(span, events));
      values.reserve(std::min<std::size_t>(span, events));
      double previous = start;
      std::size_t begin = 0;
      for (std::size_t b = 0; b < span; ++b) {
        const std::size_t end = counts[b];
        if (end == begin) continue;
        for (std::size_t e = begin; e < end; ++e) sum.set(event_slot[e], event_value[e]);
        begin = end;
        const double value = sum.total() / denominator;
        if (value != previous) {
          times.push_back(grid_[lo + b]);
          values.push_back(value);
          previous = value;
        }
      }
    }
    StepFunction f(std::move(times), std::move(values), start);
    if (c == 0) {
      out.survival = std::move(f);
    } else if (c <= J) {
      out.cifs.push_back(std::move(f));
    } else {
      out.chfs.push_back(std::move(f));
    }
  }
  return out;
}

std::vector<double> encode_row(const Schema& schema, std::span<const CovariateValue> row) {
  if (row.size() != schema.columns.size()) {
    throw SchemaError("row has " + std::to_string(row.size()) + " values but the forest expects " +
                      std::to_string(schema.columns.size()));
  }
  std::vector<double> cells(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) {
    const auto& column = schema.columns[i];
    const auto& v = row[i];
    if (std::holds_alternative<Missing>(v)) {
      cells[i] = std::numeric_limits<double>::quiet_NaN();
    } else if (const auto* x = std::get_if<double>(&v); x && column.kind == ColumnKind::numeric) {
      cells[i] = *x;
    } else if (const auto* level = std::get_if<CategoricalLevel>(&v);
               level && column.kind == ColumnKind::categorical && level->id < column.levels.size()) {
      cells[i] = static_cast<double>(level->id);
    } else if (const auto* b = std::get_if<bool>(&v); b && column.kind == ColumnKind::boolean) {
      cells[i] = *b ? 1.0 : 0.0;
    } else {
      throw SchemaError("value for column '" + column.name + "' does not match its " + to_string(column.kind) +
                        " type");
    }
  }
  return cells;
}

void check_schema(const Forest& forest, const CovariateTable& table) {
  const Schema schema = table.schema();
  if (schema == forest.schema) return;
  if (schema.columns.size() != forest.schema.columns.size()) {
    throw SchemaError("data has " + std::to_string(schema.columns.size()) + " covariates but the forest expects " +
                      std::to_string(forest.schema.columns.size()));
  }
  for (std::size_t i = 0; i < schema.columns.size(); ++i) {
    if (!(schema.columns[i] == forest.schema.columns[i])) {
      throw SchemaError("covariate " + std::to_string(i) + " ('" + schema.columns[i].name +
                        "') does not match the forest's column '" + forest.schema.columns[i].name + "'");
    }
  }
}

namespace {

std::vector<const CompetingRiskFunctions*> reached(const Forest& forest, std::span<const double> cells, Random& rng) {
  std::vector<const CompetingRiskFunctions*> out;
  out.reserve(forest.trees.size());
  for (const auto& tree : forest.trees) out.push_back(&tree.terminal(tree.route(cells, rng)).functions);
  return out;
}

CompetingRiskFunctions average_pointers(const std::vector<const CompetingRiskFunctions*>& bundles) {
  if (bundles.empty()) throw DomainError("forest has no trees");
  if (bundles.size() == 1) return *bundles.front();
  std::vector<CompetingRiskFunctions> copies;
  copies.reserve(bundles.size());
  for (const auto* b : bundles) copies.push_back(*b);
  return average(copies);
}

}  // namespace

CompetingRiskFunctions predict_row(const Forest& forest, std::span<const CovariateValue> row, Random& rng) {
  const auto cells = encode_row(forest.schema, row);
  return average_pointers(reached(forest, cells, rng));
}

CompetingRiskFunctions predict_row(const Forest& forest, const CovariateTable& table, std::size_t row, Random& rng) {
  check_schema(forest, table);
  std::vector<double> cells(table.column_count());
  for (std::size_t c = 0; c < cells.size(); ++c) cells[c] = table.column(c).values[row];
  return average_pointers(reached(forest, cells, rng));
}

namespace {

// Computes rows in blocks; each block is filled in parallel and then handed
// to the sink in row order.
template <typename RowFn>
void run_blocks(std::size_t rows, std::size_t cores, RowFn row_fn, const PredictionSink& sink) {
  std::size_t workers = cores == 0 ? std::thread::hardware_concurrency() : cores;
  workers = std::max<std::size_t>(workers, 1);
  const std::size_t block = std::max<std::size_t>(16 * workers, 64);
  std::vector<std::optional<CompetingRiskFunctions>> results(block);

  for (std::size_t first = 0; first < rows; first += block) {
    const std::size_t count = std::min(block, rows - first);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex mutex;
    auto work = [&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          results[i] = row_fn(first + i);
        } catch (...) {
          std::lock_guard lock(mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    };
    const std::size_t active = std::min(workers, count);
    if (active <= 1) {
      work();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < active; ++w) pool.emplace_back(work);
    }
    if (error) std::rethrow_exception(error);
    for (std::size_t i = 0; i < count; ++i) {
      sink(first + i, results[i]);
      results[i].reset();
    }
  }
}

std::vector<double> row_cells(const CovariateTable& table, std::size_t row) {
  std::vector<double> cells(table.column_count());
  for (std::size_t c = 0; c < cells.size(); ++c) cells[c] = table.column(c).values[row];
  return cells;
}

}  // namespace

void predict_each(const Forest& forest, const CovariateTable& table, std::uint64_t seed, std::size_t cores,
                  const PredictionSink& sink) {
  check_schema(forest, table);
  if (forest.trees.empty()) throw DomainError("forest has no trees");
  const ForestAverager averager(forest);
  auto row_fn = [&](std::size_t row) -> std::optional<CompetingRiskFunctions> {
    Random rng(mix_seed(seed, row));
    const auto cells = row_cells(table, row);
    std::vector<TerminalRef> terminals;
    terminals.reserve(forest.trees.size());
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
      terminals.emplace_back(static_cast<std::uint32_t>(t), forest.trees[t].route(cells, rng));
    }
    return averager.average(terminals);
  };
  run_blocks(table.rows(), cores, row_fn, sink);
}

void predict_oob_each(const Forest& forest, const Dataset& dataset, std::uint64_t seed, std::size_t cores,
                      const PredictionSink& sink) {
  if (dataset.rows() != forest.training_rows) {
    throw UsageError("out-of-bag prediction needs the training data (" + std::to_string(forest.training_rows) +
                     " rows) but got " + std::to_string(dataset.rows()) + " rows");
  }
  if (forest.training_hash != 0 && dataset.content_hash() != forest.training_hash) {
    throw UsageError("out-of-bag prediction requested on data that is not the forest's training data");
  }
  const CovariateTable& table = dataset.covariates();
  check_schema(forest, table);
  const ForestAverager averager(forest);
  auto row_fn = [&](std::size_t row) -> std::optional<CompetingRiskFunctions> {
    Random rng(mix_seed(seed, row));
    const auto cells = row_cells(table, row);
    std::vector<TerminalRef> terminals;
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
      const auto& tree = forest.trees[t];
      if (tree.in_bag_counts.size() != dataset.rows()) throw UsageError("tree in-bag record does not match the data");
      if (tree.in_bag_counts[row] != 0) continue;
      terminals.emplace_back(static_cast<std::uint32_t>(t), tree.route(cells, rng));
    }
    if (terminals.empty()) return std::nullopt;
    return averager.average(terminals);
  };
  run_blocks(table.rows(), cores, row_fn, sink);
}

PredictionSet predict(const Forest& forest, const CovariateTable& table, std::uint64_t seed, std::size_t cores) {
  PredictionSet set;
  set.rows.resize(table.rows());
  predict_each(forest, table, seed, cores,
               [&](std::size_t row, const std::optional<CompetingRiskFunctions>& f) { set.rows[row] = f; });
  return set;
}

PredictionSet predict_oob(const Forest& forest, const Dataset& dataset, std::uint64_t seed, std::size_t cores) {
  PredictionSet set;
  set.oob = true;
  set.rows.resize(dataset.rows());
  predict_oob_each(forest, dataset, seed, cores,
                   [&](std::size_t row, const std::optional<CompetingRiskFunctions>& f) { set.rows[row] = f; });
  return set;
}

}  // namespace rcrf
