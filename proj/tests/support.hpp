#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rcrf/dataset.hpp"
#include "rcrf/random.hpp"

namespace testing {

inline const double kNaN = std::numeric_limits<double>::quiet_NaN();

inline rcrf::CompetingRiskResponse resp(double time, int event) { return {time, event, std::nullopt}; }
inline rcrf::CompetingRiskResponse resp(double time, int event, double censor) { return {time, event, censor}; }

inline std::vector<oracle::Obs> to_obs(const std::vector<rcrf::CompetingRiskResponse>& rows) {
  std::vector<oracle::Obs> out;
  for (const auto& r : rows) out.push_back({r.time, r.event, r.censor_time.value_or(r.time)});
  return out;
}

/// Random responses on a coarse time grid so ties are common. Censor times
/// follow the simulation convention (equal to the time when censored,
/// otherwise drawn at or after it, sometimes before).
inline std::vector<rcrf::CompetingRiskResponse> random_responses(std::mt19937_64& gen, std::size_t n, int J,
                                                                 double censor_fraction = 0.3, int grid = 8) {
  std::uniform_int_distribution<int> tick(1, grid);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> event(1, J);
  std::vector<rcrf::CompetingRiskResponse> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = tick(gen);
    if (u(gen) < censor_fraction) {
      rows.push_back({t, 0, t});
    } else {
      rows.push_back({t, event(gen), static_cast<double>(tick(gen)) + (u(gen) < 0.5 ? grid : 0)});
    }
  }
  return rows;
}

inline rcrf::Column numeric_column(const std::string& name, std::vector<double> values) {
  return {{name, rcrf::ColumnKind::numeric, {}}, std::move(values)};
}

inline rcrf::Column categorical_column(const std::string& name, std::vector<std::string> levels,
                                       std::vector<double> ids) {
  return {{name, rcrf::ColumnKind::categorical, std::move(levels)}, std::move(ids)};
}

inline rcrf::Dataset make_dataset(std::vector<rcrf::Column> columns, std::vector<rcrf::CompetingRiskResponse> rows,
                                  int J) {
  return rcrf::Dataset(rcrf::CovariateTable(std::move(columns)), std::move(rows), J);
}

/// Random numeric covariates with an event-time signal in x1.
inline rcrf::Dataset random_dataset(std::uint64_t seed, std::size_t n, int J = 2, double missing = 0.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x1(n), x2(n), x3(n);
  std::vector<rcrf::CompetingRiskResponse> rows;
  for (std::size_t i = 0; i < n; ++i) {
    x1[i] = z(gen);
    x2[i] = z(gen);
    x3[i] = std::floor(u(gen) * 4);
    const double t = std::exp(0.8 * x1[i] + 0.3 * z(gen));
    const double c = -std::log(1 - u(gen)) * 3.0;
    const int e = 1 + static_cast<int>(u(gen) * J) % J;
    if (t < c) {
      rows.push_back({t, e, c});
    } else {
      rows.push_back({c, 0, c});
    }
    if (missing > 0 && u(gen) < missing) x2[i] = kNaN;
  }
  std::vector<rcrf::Column> columns{numeric_column("x1", x1), numeric_column("x2", x2), numeric_column("x3", x3)};
  return make_dataset(std::move(columns), std::move(rows), J);
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rcrf_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
