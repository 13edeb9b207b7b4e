#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "log_rank_sweep.hpp"
#include "oracles.hpp"
#include "rcrf/error.hpp"
#include "rcrf/split_finder.hpp"
#include "support.hpp"

using namespace rcrf;
using testing::resp;

namespace {

using Rows = std::vector<CompetingRiskResponse>;

// Textbook two-sample log-rank for J = 1: observed minus expected in group
// one and the hypergeometric variance, one 2x2 table per death time.
double textbook_log_rank(const std::vector<double>& group1, const std::vector<double>& group2) {
  std::vector<double> all = group1;
  all.insert(all.end(), group2.begin(), group2.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  double o_minus_e = 0.0, v = 0.0;
  for (double t : all) {
    const double n1 = static_cast<double>(std::count_if(group1.begin(), group1.end(), [&](double x) { return x >= t; }));
    const double n2 = static_cast<double>(std::count_if(group2.begin(), group2.end(), [&](double x) { return x >= t; }));
    const double d1 = static_cast<double>(std::count(group1.begin(), group1.end(), t));
    const double d2 = static_cast<double>(std::count(group2.begin(), group2.end(), t));
    const double n = n1 + n2, d = d1 + d2;
    o_minus_e += d1 - d * n1 / n;
    if (n > 1) v += d * (n1 / n) * (n2 / n) * (n - d) / (n - 1);
  }
  return std::fabs(o_minus_e) / std::sqrt(v);
}

}  // namespace

TEST_CASE("single-event log-rank examples") {
  const Rows left{resp(1, 1)}, right{resp(2, 1)};
  const LogRankTerms t = log_rank_score_single(left, right, 1);
  CHECK(t.numerator == 0.5);
  CHECK(t.variance == 0.25);
  const std::vector<int> focus{1};
  CHECK(composite_log_rank(left, right, focus).value == 1.0);

  const Rows censored_l{resp(1, 0), resp(2, 0)}, censored_r{resp(3, 0)};
  const LogRankTerms z = log_rank_score_single(censored_l, censored_r, 1);
  CHECK(z.numerator == 0.0);
  CHECK(z.variance == 0.0);

  const LogRankTerms swapped = log_rank_score_single(right, left, 1);
  CHECK(swapped.numerator == -0.5);
  CHECK(swapped.variance == 0.25);
}

TEST_CASE("composite log-rank examples") {
  std::mt19937_64 gen(21);
  const Rows l = testing::random_responses(gen, 12, 2);
  const Rows r = testing::random_responses(gen, 9, 2);
  const std::vector<int> one{2};
  const LogRankTerms single = log_rank_score_single(l, r, 2);
  const SplitScore s = composite_log_rank(l, r, one);
  REQUIRE(single.variance > 0);
  CHECK(s.value == doctest::Approx(std::fabs(single.numerator) / std::sqrt(single.variance)).epsilon(1e-14));

  const std::vector<int> both{1, 2};
  CHECK(std::fabs(composite_log_rank(l, l, both).value) <= 1e-12);

  const Rows all_censored{resp(1, 0), resp(4, 0), resp(4, 0)};
  CHECK_FALSE(composite_log_rank(all_censored, all_censored, both).valid);
}

TEST_CASE("gray risk set examples") {
  const Rows row{resp(1, 1, 5)};
  CHECK(gray_risk_set(row, 3, 2) == 1);
  CHECK(gray_risk_set(row, 3, 1) == 0);
  const Rows late{resp(7, 1, 7), resp(7, 0, 7), resp(9, 2, 12)};
  for (int j = 1; j <= 2; ++j) CHECK(gray_risk_set(late, 7, j) == 3);
  const Rows no_censor{resp(1, 1)};
  CHECK_THROWS_AS(gray_risk_set(no_censor, 1, 1), ConfigurationError);
  std::vector<int> focus{1};
  CHECK_THROWS_AS(composite_gray(no_censor, row, focus), ConfigurationError);
}

TEST_CASE("composite Gray examples") {
  std::mt19937_64 gen(22);
  const std::vector<int> both{1, 2};
  for (int rep = 0; rep < 50; ++rep) {
    Rows l = testing::random_responses(gen, 8, 2), r = testing::random_responses(gen, 8, 2);
    for (auto* side : {&l, &r}) {
      for (auto& x : *side) x.censor_time = x.time;  // second disjunct never holds
    }
    const SplitScore g = composite_gray(l, r, both), lr = composite_log_rank(l, r, both);
    CHECK(g.valid == lr.valid);
    CHECK(g.value == lr.value);
  }
  const Rows l{resp(1, 1, 1)}, r{resp(2, 1, 2)};
  const std::vector<int> one{1};
  CHECK(composite_gray(l, r, one).value == 1.0);
  const Rows c{resp(1, 0, 1), resp(2, 0, 2)};
  CHECK_FALSE(composite_gray(c, c, one).valid);
}

TEST_CASE("composite scores match the literal oracle") {
  std::mt19937_64 gen(23);
  std::uniform_int_distribution<int> size(1, 10);
  for (int rep = 0; rep < 300; ++rep) {
    const int J = 1 + rep % 3;
    const Rows l = testing::random_responses(gen, static_cast<std::size_t>(size(gen)), J);
    const Rows r = testing::random_responses(gen, static_cast<std::size_t>(size(gen)), J);
    std::vector<int> focus;
    for (int j = 1; j <= J; ++j) {
      if (rep % 2 == 0 || j == J) focus.push_back(j);
    }
    for (bool gray : {false, true}) {
      const oracle::Score o = oracle::log_rank(testing::to_obs(l), testing::to_obs(r), focus, gray);
      const SplitScore s = gray ? composite_gray(l, r, focus) : composite_log_rank(l, r, focus);
      CHECK(s.valid == o.valid);
      if (o.valid) CHECK(std::fabs(s.value - o.value) <= 1e-12 * std::max(1.0, o.value));
    }
  }
}

TEST_CASE("score symmetry, row-permutation invariance and Y* >= Y") {
  std::mt19937_64 gen(24);
  const std::vector<int> both{1, 2};
  for (int rep = 0; rep < 100; ++rep) {
    Rows l = testing::random_responses(gen, 7, 2), r = testing::random_responses(gen, 9, 2);
    for (bool gray : {false, true}) {
      const auto kind = gray ? SplitFinderKind::gray : SplitFinderKind::log_rank;
      const SplitScore a = composite_score(l, r, kind, both);
      const SplitScore b = composite_score(r, l, kind, both);
      CHECK(a.valid == b.valid);
      CHECK(a.value == doctest::Approx(b.value).epsilon(1e-13));
      Rows lp = l, rp = r;
      std::shuffle(lp.begin(), lp.end(), gen);
      std::shuffle(rp.begin(), rp.end(), gen);
      CHECK(composite_score(lp, rp, kind, both).value == doctest::Approx(a.value).epsilon(1e-13));
    }
    Rows all = l;
    all.insert(all.end(), r.begin(), r.end());
    for (double t = 0; t <= 17; t += 0.5) {
      for (int j = 1; j <= 2; ++j) CHECK(gray_risk_set(all, t, j) >= risk_set_size(all, t));
    }
  }
}

TEST_CASE("J = 1 without censoring or ties equals the textbook two-sample log-rank") {
  // The variance used here has no d factor, so the textbook statistic is
  // only reproduced when every death time is distinct.
  std::mt19937_64 gen(25);
  std::uniform_int_distribution<int> size(2, 25);
  std::exponential_distribution<double> draw(0.3);
  const std::vector<int> one{1};
  for (int rep = 0; rep < 100; ++rep) {
    Rows l, r;
    for (int i = size(gen); i > 0; --i) l.push_back(resp(draw(gen), 1));
    for (int i = size(gen); i > 0; --i) r.push_back(resp(draw(gen), 1));
    std::vector<double> g1, g2;
    for (const auto& x : l) g1.push_back(x.time);
    for (const auto& x : r) g2.push_back(x.time);
    const SplitScore s = composite_log_rank(l, r, one);
    if (!s.valid) continue;
    CHECK(s.value == doctest::Approx(textbook_log_rank(g1, g2)).epsilon(1e-12));
  }
}

TEST_CASE("incremental sweep equals direct evaluation for every prefix") {
  std::mt19937_64 gen(26);
  for (int rep = 0; rep < 100; ++rep) {
    const int J = 1 + rep % 3;
    const Rows rows = testing::random_responses(gen, 3 + rep % 15, J);
    std::vector<std::uint32_t> weights(rows.size());
    std::uniform_int_distribution<std::uint32_t> w(1, 3);
    for (auto& x : weights) x = w(gen);
    for (auto kind : {SplitFinderKind::log_rank, SplitFinderKind::gray}) {
      SplitFinderSpec spec{kind, J, {}};
      for (int j = 1; j <= J; ++j) spec.focus.push_back(j);
      detail::LogRankSweep sweep(rows, weights, spec);
      Rows left;
      for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        sweep.add(i);
        for (std::uint32_t c = 0; c < weights[i]; ++c) left.push_back(rows[i]);
        Rows right;
        for (std::size_t k = i + 1; k < rows.size(); ++k) {
          for (std::uint32_t c = 0; c < weights[k]; ++c) right.push_back(rows[k]);
        }
        const SplitScore direct = composite_score(left, right, kind, spec.focus);
        const SplitScore fast = sweep.score();
        CHECK(fast.valid == direct.valid);
        if (direct.valid) CHECK(std::fabs(fast.value - direct.value) <= 1e-9 * std::max(1.0, direct.value));
      }
    }
  }
}

TEST_CASE("find_best_split returns the separating column") {
  // x2 separates early event-1 deaths from late ones; x1 is noise. Deaths
  // are tied within each group: with distinct times the rank-based
  // statistic peaks at an unbalanced cut instead.
  std::vector<double> x1, x2;
  Rows rows;
  std::mt19937_64 gen(27);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    x1.push_back(u(gen));
    x2.push_back(i < 10 ? u(gen) : 2 + u(gen));
    rows.push_back(resp(i < 10 ? 1 : 5, 1));
  }
  const Dataset d = testing::make_dataset({testing::numeric_column("x1", x1), testing::numeric_column("x2", x2)},
                                          rows, 1);
  std::vector<std::size_t> node(20);
  for (std::size_t i = 0; i < 20; ++i) node[i] = i;
  Random rng(1);
  SplitFinderSpec spec{SplitFinderKind::log_rank, 1, {1}};
  const auto best = find_best_split(node, d, spec, 2, 0, rng);
  REQUIRE(best);
  CHECK(best->column == 1);
  const double threshold = std::get<NumericThreshold>(best->rule).threshold;
  CHECK(threshold == *std::max_element(x2.begin(), x2.begin() + 10));
  CHECK(best->left_rows.size() == 10);
  CHECK(best->right_rows.size() == 10);
  CHECK(best->score.valid);

  // Oracle: exhaustive scoring over both columns.
  double oracle_best = 0;
  for (const auto* col : {&x1, &x2}) {
    for (double c : *col) {
      std::vector<oracle::Obs> l, r;
      for (std::size_t i = 0; i < 20; ++i) ((*col)[i] <= c ? l : r).push_back({rows[i].time, 1, rows[i].time});
      if (l.empty() || r.empty()) continue;
      oracle_best = std::max(oracle_best, oracle::log_rank(l, r, {1}, false).value);
    }
  }
  CHECK(best->score.value == doctest::Approx(oracle_best).epsilon(1e-12));
}

TEST_CASE("find_best_split with no achievable split returns nothing") {
  const Dataset d = testing::make_dataset(
      {testing::numeric_column("a", {1, 1, 1, 1}), testing::categorical_column("b", {"p", "q"}, {0, 0, 0, 0})},
      {resp(1, 1), resp(2, 1), resp(3, 0), resp(4, 1)}, 1);
  std::vector<std::size_t> node{0, 1, 2, 3};
  Random rng(2);
  SplitFinderSpec spec{SplitFinderKind::log_rank, 1, {1}};
  CHECK_FALSE(find_best_split(node, d, spec, 2, 0, rng));
  CHECK_FALSE(find_best_split(node, d, spec, 2, 5, rng));
}

TEST_CASE("random search saturates the finite candidate set") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Dataset d = testing::random_dataset(seed, 10);
    std::vector<std::size_t> node(10);
    for (std::size_t i = 0; i < 10; ++i) node[i] = i;
    SplitFinderSpec spec{SplitFinderKind::log_rank, 2, {1, 2}};
    Random a(seed), b(seed);
    const auto exhaustive = find_best_split(node, d, spec, 3, 0, a);
    const auto random = find_best_split(node, d, spec, 3, 1000000, b);
    REQUIRE(exhaustive.has_value() == random.has_value());
    if (exhaustive) CHECK(exhaustive->score.value == random->score.value);
  }
}

TEST_CASE("monotone transforms leave the best split unchanged") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Dataset d = testing::random_dataset(seed + 100, 40);
    auto cols = d.covariates().columns();
    for (auto& c : cols) {
      for (double& v : c.values) v = std::exp(3 * v) - 7;
    }
    const Dataset t(CovariateTable(cols), d.responses(), d.event_count());
    std::vector<std::size_t> node(40);
    for (std::size_t i = 0; i < 40; ++i) node[i] = i;
    SplitFinderSpec spec{SplitFinderKind::log_rank, 2, {1, 2}};
    Random a(seed), b(seed);
    const auto x = find_best_split(node, d, spec, 3, 0, a);
    const auto y = find_best_split(node, t, spec, 3, 0, b);
    REQUIRE(x.has_value() == y.has_value());
    if (!x) continue;
    CHECK(x->score.value == doctest::Approx(y->score.value).epsilon(1e-12));
    CHECK(x->column == y->column);
    CHECK(x->left_rows == y->left_rows);
    CHECK(x->right_rows == y->right_rows);
  }
}

TEST_CASE("candidate rows partition the non-missing node rows") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Dataset d = testing::random_dataset(seed + 200, 30, 2, 0.3);
    std::vector<std::size_t> node;
    for (std::size_t i = 0; i < 30; i += 1 + seed % 2) node.push_back(i);
    SplitFinderSpec spec{seed % 2 ? SplitFinderKind::gray : SplitFinderKind::log_rank, 2, {1}};
    Random rng(seed);
    const auto best = find_best_split(node, d, spec, 1 + seed % 3, seed % 4, rng);
    if (!best) continue;
    const Column& col = d.covariates().column(best->column);
    std::vector<std::size_t> joined = best->left_rows;
    joined.insert(joined.end(), best->right_rows.begin(), best->right_rows.end());
    std::sort(joined.begin(), joined.end());
    std::vector<std::size_t> expected;
    for (std::size_t i : node) {
      if (!col.is_missing(i)) expected.push_back(i);
    }
    CHECK(joined == expected);
    CHECK_FALSE(best->left_rows.empty());
    CHECK_FALSE(best->right_rows.empty());
    for (std::size_t i : best->left_rows) CHECK(goes_left(best->rule, col.values[i]));
    for (std::size_t i : best->right_rows) CHECK_FALSE(goes_left(best->rule, col.values[i]));
  }
}

TEST_CASE("categorical splits enumerate one level against the rest") {
  const Dataset d = testing::make_dataset(
      {testing::categorical_column("g", {"a", "b", "c"}, {0, 0, 1, 1, 2, 2})},
      {resp(1, 1), resp(1, 1), resp(5, 1), resp(6, 1), resp(9, 1), resp(9, 0)}, 1);
  std::vector<std::size_t> node{0, 1, 2, 3, 4, 5};
  Random rng(3);
  SplitFinderSpec spec{SplitFinderKind::log_rank, 1, {1}};
  const auto best = find_best_split(node, d, spec, 1, 0, rng);
  REQUIRE(best);
  const auto& subset = std::get<LevelSubset>(best->rule);
  CHECK(subset.left_levels.size() == 1);
  double oracle_best = 0;
  for (double level = 0; level < 3; ++level) {
    std::vector<oracle::Obs> l, r;
    for (std::size_t i : node) {
      const auto& x = d.responses()[i];
      (d.covariates().column(0).values[i] == level ? l : r).push_back({x.time, x.event, x.time});
    }
    oracle_best = std::max(oracle_best, oracle::log_rank(l, r, {1}, false).value);
  }
  CHECK(best->score.value == doctest::Approx(oracle_best).epsilon(1e-12));

  Random rng2(4);
  const auto sampled = find_best_split(node, d, spec, 1, 50, rng2);
  REQUIRE(sampled);
  const auto& s2 = std::get<LevelSubset>(sampled->rule);
  CHECK(!s2.left_levels.empty());
  CHECK(s2.left_levels.size() < 3);
}

TEST_CASE("split finder spec validation") {
  CHECK_THROWS_AS((SplitFinderSpec{SplitFinderKind::log_rank, 2, {}}.validate()), ConfigurationError);
  CHECK_THROWS_AS((SplitFinderSpec{SplitFinderKind::log_rank, 2, {3}}.validate()), ConfigurationError);
  CHECK_NOTHROW((SplitFinderSpec{SplitFinderKind::gray, 2, {2}}.validate()));
}
