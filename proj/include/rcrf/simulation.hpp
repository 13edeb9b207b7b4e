#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "rcrf/dataset.hpp"
#include "rcrf/evaluation.hpp"
#include "rcrf/random.hpp"

namespace rcrf {

/// Event-time distribution of one region and event, shifted by `offset`.
///
/// weibull: shape a, scale b. exponential: rate a. lognormal: log-mean a,
/// log-sd b. half_normal: |N(0, 1)|.
struct TimeDistribution {
  enum class Kind { weibull, exponential, lognormal, half_normal };
  Kind kind = Kind::exponential;
  double a = 1.0;
  double b = 1.0;
  double offset = 0.0;

  double sample(Random& rng) const;
  double cdf(double t) const;
};

struct RegionSpec {
  int id = 0;
  /// P(event = j | X) at index j-1.
  std::array<double, 2> event_probability{};
  std::array<TimeDistribution, 2> time;

  bool contains(double x1, double x2, double x3) const;
};

/// The five regions, ordered by id (1..5).
const std::array<RegionSpec, 5>& simulation_regions();

/// Id (1..5) of the region holding the covariate vector.
int region_of(double x1, double x2, double x3);

/// CIF_j(t | region) = P(T <= t | event j) P(event j).
EvaluableCurve true_cif(const RegionSpec& region, int event);

/// Standard normal CDF.
double normal_cdf(double x);

struct SimulatedRow {
  int region = 0;
  double event_time = 0.0;  // latent T
  int event = 0;            // latent event type
  double censor_time = 0.0;
};

struct Simulation {
  Dataset data;
  std::vector<SimulatedRow> truth;

  /// True CIF curves of row i, event j at index j-1.
  std::vector<EvaluableCurve> true_cifs(std::size_t row) const;
};

/// Rows are produced in chunks of 4096, chunk c drawing from
/// Random(mix_seed(seed, c)). Covariates x1, x2, x3; observed time, status
/// and censor time. Throws DomainError when n is 0.
Simulation generate(std::size_t n, std::uint64_t seed);

/// Writes the data as CSV (x1,x2,x3,time,status,censor_time) and a sidecar
/// of region ids (row,region). Both files appear atomically.
void write_simulation(const Simulation& sim, const std::filesystem::path& data_path,
                      const std::filesystem::path& truth_path);

/// Region ids from a sidecar written by write_simulation.
std::vector<int> read_region_sidecar(const std::filesystem::path& path);

}  // namespace rcrf
