#include "rcrf/split_finder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "log_rank_sweep.hpp"
#include "rcrf/error.hpp"

namespace rcrf {

const char* to_string(SplitFinderKind kind) {
  switch (kind) {
    case SplitFinderKind::log_rank:
      return "logrank";
    case SplitFinderKind::gray:
      return "gray";
  }
  return "unknown";
}

void SplitFinderSpec::validate() const {
  if (event_count < 1) throw ConfigurationError("split finder needs at least one event type");
  if (focus.empty()) throw ConfigurationError("split finder needs at least one event of focus");
  std::set<int> seen;
  for (int j : focus) {
    if (j < 1 || j > event_count) {
      throw ConfigurationError("event of focus " + std::to_string(j) + " is outside 1.." +
                               std::to_string(event_count));
    }
    if (!seen.insert(j).second) throw ConfigurationError("event of focus " + std::to_string(j) + " listed twice");
  }
}

bool LevelSubset::contains(std::uint32_t level) const {
  return std::binary_search(left_levels.begin(), left_levels.end(), level);
}

bool goes_left(const SplitRule& rule, double value) {
  if (const auto* numeric = std::get_if<NumericThreshold>(&rule)) return value <= numeric->threshold;
  return std::get<LevelSubset>(rule).contains(static_cast<std::uint32_t>(value));
}

namespace detail {

namespace {

void require_censor_times(std::span<const CompetingRiskResponse> rows) {
  for (const auto& r : rows) {
    if (!r.censor_time) {
      throw ConfigurationError(
          "the Gray split finder requires a censor time for every row; provide a censor time column");
    }
  }
}

constexpr double kVarianceTolerance = 1e-10;

}  // namespace

std::uint32_t at_risk_prefix(const CompetingRiskResponse& r, std::span<const double> event_times,
                             SplitFinderKind kind, int event) {
  auto observed = static_cast<std::uint32_t>(
      std::upper_bound(event_times.begin(), event_times.end(), r.time) - event_times.begin());
  if (kind == SplitFinderKind::gray && r.event != event) {
    // Still at risk at t while uncensored (C > t) after an other-cause event.
    auto uncensored = static_cast<std::uint32_t>(
        std::lower_bound(event_times.begin(), event_times.end(), *r.censor_time) - event_times.begin());
    observed = std::max(observed, uncensored);
  }
  return observed;
}

std::vector<double> distinct_event_times(std::span<const CompetingRiskResponse> rows,
                                         std::span<const std::uint32_t> weights) {
  std::vector<double> times;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].event != 0 && weights[i] > 0) times.push_back(rows[i].time);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

LogRankSweep::LogRankSweep(std::span<const CompetingRiskResponse> rows, std::span<const std::uint32_t> weights,
                           const SplitFinderSpec& spec) {
  if (spec.kind == SplitFinderKind::gray) require_censor_times(rows);
  weights_.assign(weights.begin(), weights.end());
  total_weight_ = std::accumulate(weights_.begin(), weights_.end(), 0.0);

  const std::vector<double> times = distinct_event_times(rows, weights);
  const std::size_t K = times.size();
  std::vector<std::uint32_t> event_index(rows.size(), 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].event != 0 && weights[i] > 0) {
      event_index[i] =
          static_cast<std::uint32_t>(std::lower_bound(times.begin(), times.end(), rows[i].time) - times.begin());
    }
  }

  events_.resize(spec.focus.size());
  std::vector<double> at_risk(K + 1);
  std::vector<double> deaths(K);
  for (std::size_t f = 0; f < spec.focus.size(); ++f) {
    const int j = spec.focus[f];
    EventState& state = events_[f];
    state.prefix.resize(rows.size());
    std::fill(at_risk.begin(), at_risk.end(), 0.0);
    std::fill(deaths.begin(), deaths.end(), 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      state.prefix[i] = at_risk_prefix(rows[i], times, spec.kind, j);
      at_risk[state.prefix[i]] += weights_[i];
      if (rows[i].event == j) deaths[event_index[i]] += weights_[i];
    }
    // Y(v_k) = total weight of rows with prefix > k.
    std::vector<double> risk(K);
    double above = 0.0;
    for (std::size_t k = K; k-- > 0;) {
      above += at_risk[k + 1];
      risk[k] = above;
    }

    std::vector<double> hazard(K + 1, 0.0);
    std::vector<double> linear(K + 1, 0.0);
    state.pair_weight.assign(K + 1, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      const double y = risk[k];
      const double d = deaths[k];
      const double c = y > 1.0 ? (y - d) / (y - 1.0) : 0.0;
      hazard[k + 1] = hazard[k] + d / y;
      linear[k + 1] = linear[k] + c / y;
      state.pair_weight[k + 1] = state.pair_weight[k] + c / (y * y);
    }
    state.row_score.resize(rows.size());
    state.row_linear.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::uint32_t p = state.prefix[i];
      state.row_score[i] = (rows[i].event == j ? 1.0 : 0.0) - hazard[p];
      state.row_linear[i] = linear[p];
    }
    state.weight_by_prefix.assign(K + 1);
    state.weighted_pair_by_prefix.assign(K + 1);
  }
}

void LogRankSweep::reset() {
  left_weight_ = 0.0;
  for (auto& state : events_) {
    state.weight_by_prefix.assign(state.pair_weight.size());
    state.weighted_pair_by_prefix.assign(state.pair_weight.size());
    state.numerator = 0.0;
    state.linear = 0.0;
    state.pairwise = 0.0;
  }
}

void LogRankSweep::add(std::size_t i) {
  const double w = weights_[i];
  if (w == 0.0) return;
  for (auto& state : events_) {
    const std::uint32_t p = state.prefix[i];
    const double b = state.pair_weight[p];
    state.numerator += w * state.row_score[i];
    state.linear += w * state.row_linear[i];
    // sum over left rows r of w_r * B(min(p_r, p))
    const double below = state.weighted_pair_by_prefix.prefix(p);
    const double weight_at_or_above = left_weight_ - state.weight_by_prefix.prefix(p);
    state.pairwise += w * w * b + 2.0 * w * (below + b * weight_at_or_above);
    state.weight_by_prefix.add(p, w);
    state.weighted_pair_by_prefix.add(p, w * b);
  }
  left_weight_ += w;
}

SplitScore LogRankSweep::score() const {
  if (left_weight_ <= 0.0 || left_weight_ >= total_weight_) return {};
  double numerator = 0.0;
  double variance = 0.0;
  for (const auto& state : events_) {
    numerator += state.numerator;
    const double v = state.linear - state.pairwise;
    if (v > kVarianceTolerance * state.linear) variance += v;
  }
  if (!(variance > 0.0)) return {};
  return {std::abs(numerator) / std::sqrt(variance), true};
}

SplitScore direct_composite(std::span<const CompetingRiskResponse> left, std::span<const std::uint32_t> left_weights,
                            std::span<const CompetingRiskResponse> right,
                            std::span<const std::uint32_t> right_weights, SplitFinderKind kind,
                            std::span<const int> focus, std::vector<LogRankTerms>* per_event) {
  if (kind == SplitFinderKind::gray) {
    require_censor_times(left);
    require_censor_times(right);
  }
  std::vector<double> times;
  for (auto [rows, weights] : {std::pair{left, left_weights}, std::pair{right, right_weights}}) {
    auto t = distinct_event_times(rows, weights);
    times.insert(times.end(), t.begin(), t.end());
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  const std::size_t K = times.size();

  double numerator = 0.0;
  double variance = 0.0;
  if (per_event) per_event->clear();
  for (int j : focus) {
    std::vector<double> y_all(K + 1, 0.0), y_left(K + 1, 0.0), d_all(K, 0.0), d_left(K, 0.0);
    auto tally = [&](std::span<const CompetingRiskResponse> rows, std::span<const std::uint32_t> w, bool is_left) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (w[i] == 0) continue;
        const std::uint32_t p = at_risk_prefix(rows[i], times, kind, j);
        y_all[p] += w[i];
        if (is_left) y_left[p] += w[i];
        if (rows[i].event == j) {
          const auto k = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), rows[i].time) -
                                                  times.begin());
          d_all[k] += w[i];
          if (is_left) d_left[k] += w[i];
        }
      }
    };
    tally(left, left_weights, true);
    tally(right, right_weights, false);
    for (std::size_t k = K; k-- > 0;) {
      y_all[k] += y_all[k + 1];
      y_left[k] += y_left[k + 1];
    }
    // Undo the off-by-one: index p counts rows at risk at v_0..v_{p-1}.
    LogRankTerms terms;
    for (std::size_t k = 0; k < K; ++k) {
      const double y = y_all[k + 1];
      const double yl = y_left[k + 1];
      const double d = d_all[k];
      const double ratio = yl / y;
      terms.numerator += d_left[k] - d * ratio;
      if (y > 1.0) terms.variance += ratio * (1.0 - ratio) * ((y - d) / (y - 1.0));
    }
    numerator += terms.numerator;
    variance += terms.variance;
    if (per_event) per_event->push_back(terms);
  }
  if (!(variance > 0.0)) return {};
  return {std::abs(numerator) / std::sqrt(variance), true};
}

}  // namespace detail

namespace {

std::vector<std::uint32_t> unit_weights(std::size_t n) { return std::vector<std::uint32_t>(n, 1); }

void require_nonempty(std::span<const CompetingRiskResponse> left, std::span<const CompetingRiskResponse> right) {
  if (left.empty() || right.empty()) throw DomainError("split scoring needs two nonempty groups");
}

}  // namespace

LogRankTerms log_rank_score_single(std::span<const CompetingRiskResponse> left,
                                   std::span<const CompetingRiskResponse> right, int event) {
  require_nonempty(left, right);
  std::vector<LogRankTerms> terms;
  const int focus[] = {event};
  detail::direct_composite(left, unit_weights(left.size()), right, unit_weights(right.size()),
                           SplitFinderKind::log_rank, focus, &terms);
  return terms.front();
}

SplitScore composite_score(std::span<const CompetingRiskResponse> left, std::span<const CompetingRiskResponse> right,
                           SplitFinderKind kind, std::span<const int> focus) {
  require_nonempty(left, right);
  if (focus.empty()) throw ConfigurationError("split scoring needs at least one event of focus");
  return detail::direct_composite(left, unit_weights(left.size()), right, unit_weights(right.size()), kind, focus);
}

SplitScore composite_log_rank(std::span<const CompetingRiskResponse> left,
                              std::span<const CompetingRiskResponse> right, std::span<const int> focus) {
  return composite_score(left, right, SplitFinderKind::log_rank, focus);
}

SplitScore composite_gray(std::span<const CompetingRiskResponse> left, std::span<const CompetingRiskResponse> right,
                          std::span<const int> focus) {
  return composite_score(left, right, SplitFinderKind::gray, focus);
}

std::size_t gray_risk_set(std::span<const CompetingRiskResponse> rows, double t, int event) {
  std::size_t count = 0;
  for (const auto& r : rows) {
    if (!r.censor_time) {
      throw ConfigurationError("the Gray split finder requires a censor time for every row");
    }
    if (r.time >= t || (r.event != event && *r.censor_time > t)) ++count;
  }
  return count;
}

namespace {

// Scores of the candidates of one column, in the order they were encountered.
struct ColumnResult {
  std::optional<SplitRule> rule;
  SplitScore score;
};

struct NodeContext {
  std::span<const std::size_t> rows;
  std::span<const std::uint32_t> multiplicity;
  std::vector<CompetingRiskResponse> responses;  // aligned with rows
  const SplitFinderSpec* spec;
};

void consider(ColumnResult& best, const SplitScore& score, const SplitRule& rule) {
  if (score.valid && (!best.rule || score.value > best.score.value)) {
    best.rule = rule;
    best.score = score;
  }
}

ColumnResult best_numeric(const std::vector<std::size_t>& local, const std::vector<double>& x,
                          detail::LogRankSweep& sweep, std::size_t number_of_splits, Random& rng) {
  // `local` are sweep-population indices, x their cell values.
  std::vector<std::size_t> order(local.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

  std::vector<double> distinct;
  for (std::size_t o : order) {
    if (distinct.empty() || distinct.back() != x[o]) distinct.push_back(x[o]);
  }
  ColumnResult result;
  if (distinct.size() < 2) return result;

  // Thresholds to score, and the draw order to break ties with.
  std::vector<double> draws;
  if (number_of_splits == 0) {
    draws.assign(distinct.begin(), distinct.end() - 1);
  } else {
    draws.reserve(number_of_splits);
    for (std::size_t s = 0; s < number_of_splits; ++s) draws.push_back(x[rng.index(x.size())]);
  }
  std::vector<double> wanted(draws);
  std::sort(wanted.begin(), wanted.end());
  wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());

  std::vector<SplitScore> scores(wanted.size());
  sweep.reset();
  std::size_t pos = 0;
  for (std::size_t w = 0; w < wanted.size(); ++w) {
    while (pos < order.size() && x[order[pos]] <= wanted[w]) sweep.add(local[order[pos++]]);
    scores[w] = pos < order.size() ? sweep.score() : SplitScore{};
  }
  for (double threshold : draws) {
    const auto w = static_cast<std::size_t>(std::lower_bound(wanted.begin(), wanted.end(), threshold) - wanted.begin());
    consider(result, scores[w], NumericThreshold{threshold});
  }
  return result;
}

ColumnResult best_categorical(const std::vector<std::size_t>& local, const std::vector<double>& x,
                              detail::LogRankSweep& sweep, std::size_t number_of_splits, Random& rng) {
  std::map<std::uint32_t, std::vector<std::size_t>> by_level;
  for (std::size_t i = 0; i < local.size(); ++i) by_level[static_cast<std::uint32_t>(x[i])].push_back(local[i]);
  ColumnResult result;
  if (by_level.size() < 2) return result;

  std::vector<std::uint32_t> levels;
  for (const auto& [level, rows] : by_level) levels.push_back(level);

  auto score_subset = [&](const std::vector<std::uint32_t>& subset) {
    sweep.reset();
    for (auto level : subset) {
      for (std::size_t i : by_level[level]) sweep.add(i);
    }
    return sweep.score();
  };

  if (number_of_splits == 0) {
    for (auto level : levels) {
      std::vector<std::uint32_t> subset{level};
      consider(result, score_subset(subset), LevelSubset{subset});
    }
    return result;
  }

  std::map<std::vector<std::uint32_t>, SplitScore> cache;
  for (std::size_t s = 0; s < number_of_splits; ++s) {
    std::vector<std::uint32_t> subset;
    do {
      subset.clear();
      for (auto level : levels) {
        if (rng.bernoulli(0.5)) subset.push_back(level);
      }
    } while (subset.empty() || subset.size() == levels.size());
    auto it = cache.find(subset);
    if (it == cache.end()) it = cache.emplace(subset, score_subset(subset)).first;
    consider(result, it->second, LevelSubset{subset});
  }
  return result;
}

}  // namespace

std::optional<SplitCandidate> find_best_split(std::span<const std::size_t> node_rows,
                                              std::span<const std::uint32_t> multiplicity, const Dataset& dataset,
                                              const SplitFinderSpec& spec, std::size_t mtry,
                                              std::size_t number_of_splits, Random& rng) {
  if (node_rows.size() != multiplicity.size()) throw DomainError("find_best_split: multiplicity length mismatch");
  const std::size_t p = dataset.covariates().column_count();
  if (mtry < 1) throw ConfigurationError("mtry must be at least 1");
  if (p == 0 || node_rows.empty()) return std::nullopt;
  mtry = std::min(mtry, p);

  // Partial Fisher-Yates: the first mtry entries are the drawn columns.
  std::vector<std::size_t> columns(p);
  std::iota(columns.begin(), columns.end(), 0);
  for (std::size_t i = 0; i < mtry; ++i) std::swap(columns[i], columns[i + rng.index(p - i)]);
  columns.resize(mtry);

  std::vector<CompetingRiskResponse> responses;
  responses.reserve(node_rows.size());
  for (std::size_t r : node_rows) responses.push_back(dataset.responses()[r]);

  std::optional<detail::LogRankSweep> full_sweep;
  std::optional<SplitCandidate> best;

  for (std::size_t column_index : columns) {
    const Column& column = dataset.covariates().column(column_index);
    std::vector<std::size_t> present;  // node-local indices with a value
    std::vector<double> x;
    present.reserve(node_rows.size());
    x.reserve(node_rows.size());
    for (std::size_t i = 0; i < node_rows.size(); ++i) {
      const double v = column.values[node_rows[i]];
      if (!std::isnan(v)) {
        present.push_back(i);
        x.push_back(v);
      }
    }
    if (present.size() < 2) continue;

    // Rows missing this column are excluded, which changes the risk sets;
    // only the all-present case can share the node-level sweep.
    std::optional<detail::LogRankSweep> own_sweep;
    detail::LogRankSweep* sweep;
    std::vector<std::size_t> local;
    if (present.size() == node_rows.size()) {
      if (!full_sweep) full_sweep.emplace(responses, multiplicity, spec);
      sweep = &*full_sweep;
      local = present;
    } else {
      std::vector<CompetingRiskResponse> sub;
      std::vector<std::uint32_t> sub_weights;
      sub.reserve(present.size());
      sub_weights.reserve(present.size());
      for (std::size_t i : present) {
        sub.push_back(responses[i]);
        sub_weights.push_back(multiplicity[i]);
      }
      own_sweep.emplace(sub, sub_weights, spec);
      sweep = &*own_sweep;
      local.resize(present.size());
      std::iota(local.begin(), local.end(), 0);
    }

    ColumnResult result = column.schema.kind == ColumnKind::categorical
                              ? best_categorical(local, x, *sweep, number_of_splits, rng)
                              : best_numeric(local, x, *sweep, number_of_splits, rng);
    if (!result.rule) continue;
    if (!best || result.score.value > best->score.value) {
      SplitCandidate candidate;
      candidate.column = column_index;
      candidate.rule = *result.rule;
      candidate.score = result.score;
      best = std::move(candidate);
    }
  }

  if (best) {
    const Column& column = dataset.covariates().column(best->column);
    for (std::size_t r : node_rows) {
      const double v = column.values[r];
      if (std::isnan(v)) continue;
      (goes_left(best->rule, v) ? best->left_rows : best->right_rows).push_back(r);
    }
  }
  return best;
}

std::optional<SplitCandidate> find_best_split(std::span<const std::size_t> node_rows, const Dataset& dataset,
                                              const SplitFinderSpec& spec, std::size_t mtry,
                                              std::size_t number_of_splits, Random& rng) {
  const auto weights = unit_weights(node_rows.size());
  return find_best_split(node_rows, weights, dataset, spec, mtry, number_of_splits, rng);
}

}  // namespace rcrf
