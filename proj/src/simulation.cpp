#include "rcrf/simulation.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "rcrf/csv.hpp"
#include "rcrf/error.hpp"

namespace rcrf {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double TimeDistribution::sample(Random& rng) const {
  double t = 0.0;
  switch (kind) {
    case Kind::weibull:
      t = b * std::pow(-std::log(rng.uniform_open()), 1.0 / a);
      break;
    case Kind::exponential:
      t = rng.exponential(a);
      break;
    case Kind::lognormal:
      t = std::exp(a + b * rng.standard_normal());
      break;
    case Kind::half_normal:
      t = std::abs(rng.standard_normal());
      break;
  }
  return t + offset;
}

double TimeDistribution::cdf(double t) const {
  const double x = t - offset;
  if (x <= 0.0) return 0.0;
  switch (kind) {
    case Kind::weibull:
      return -std::expm1(-std::pow(x / b, a));
    case Kind::exponential:
      return -std::expm1(-a * x);
    case Kind::lognormal:
      return normal_cdf((std::log(x) - a) / b);
    case Kind::half_normal:
      return 2.0 * normal_cdf(x) - 1.0;
  }
  return 0.0;
}

namespace {

using Kind = TimeDistribution::Kind;

constexpr double kCensorRate = 1.0 / 15.0;
constexpr std::size_t kChunk = 4096;

}  // namespace

const std::array<RegionSpec, 5>& simulation_regions() {
  static const std::array<RegionSpec, 5> regions{{
      {1, {0.4, 0.6}, {{{Kind::weibull, 5.0, 6.0, 0.0}, {Kind::exponential, 1.0, 1.0, 0.0}}}},
      {2, {0.1, 0.9}, {{{Kind::lognormal, 0.0, 1.0, 0.0}, {Kind::half_normal, 0.0, 1.0, 0.0}}}},
      {3, {0.7, 0.3}, {{{Kind::exponential, 1.0, 1.0, 0.0}, {Kind::exponential, 1.0, 1.0, 1.0}}}},
      {4, {0.6, 0.4}, {{{Kind::weibull, 1.0, 2.0, 0.0}, {Kind::lognormal, 0.0, 1.0, 0.0}}}},
      {5, {0.5, 0.5}, {{{Kind::exponential, 10.0, 1.0, 2.0}, {Kind::exponential, 0.25, 1.0, 0.0}}}},
  }};
  return regions;
}

int region_of(double x1, double x2, double x3) {
  if (x3 >= 1.0) return 5;
  if (x1 < 0.0) return x2 < 0.0 ? 1 : 2;
  return x2 < 0.0 ? 3 : 4;
}

bool RegionSpec::contains(double x1, double x2, double x3) const { return region_of(x1, x2, x3) == id; }

EvaluableCurve true_cif(const RegionSpec& region, int event) {
  if (event < 1 || event > 2) throw DomainError("simulated data has events 1 and 2 only");
  const TimeDistribution dist = region.time[static_cast<std::size_t>(event - 1)];
  const double p = region.event_probability[static_cast<std::size_t>(event - 1)];
  EvaluableCurve curve;
  curve.value = [dist, p](double t) { return p * dist.cdf(t); };
  if (dist.offset > 0.0) curve.kinks.push_back(dist.offset);
  return curve;
}

std::vector<EvaluableCurve> Simulation::true_cifs(std::size_t row) const {
  const RegionSpec& region = simulation_regions()[static_cast<std::size_t>(truth.at(row).region - 1)];
  return {true_cif(region, 1), true_cif(region, 2)};
}

Simulation generate(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("simulation needs at least one row");
  std::vector<double> x1(n), x2(n), x3(n);
  std::vector<CompetingRiskResponse> responses(n);
  std::vector<SimulatedRow> truth(n);

  for (std::size_t start = 0; start < n; start += kChunk) {
    Random rng(mix_seed(seed, start / kChunk));
    const std::size_t end = std::min(n, start + kChunk);
    for (std::size_t i = start; i < end; ++i) {
      x1[i] = rng.standard_normal();
      x2[i] = rng.standard_normal();
      x3[i] = rng.standard_normal();
      const RegionSpec& region = simulation_regions()[static_cast<std::size_t>(region_of(x1[i], x2[i], x3[i]) - 1)];
      const int event = rng.uniform() < region.event_probability[0] ? 1 : 2;
      const double t = region.time[static_cast<std::size_t>(event - 1)].sample(rng);
      const double c = rng.exponential(kCensorRate);
      // A tie between T and C counts as censored.
      const bool observed = t < c;
      responses[i] = {observed ? t : c, observed ? event : 0, c};
      truth[i] = {region.id, t, event, c};
    }
  }

  std::vector<Column> columns;
  for (auto [name, values] : {std::pair{"x1", &x1}, std::pair{"x2", &x2}, std::pair{"x3", &x3}}) {
    columns.push_back({{name, ColumnKind::numeric, {}}, std::move(*values)});
  }
  return Simulation{Dataset(CovariateTable(std::move(columns)), std::move(responses), 2), std::move(truth)};
}

namespace {

template <typename Body>
void write_text_atomically(const std::filesystem::path& target, Body body) {
  auto partial = target;
  partial += ".partial";
  {
    std::ofstream out(partial, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + partial.string() + "'");
    body(out);
    out.flush();
    if (!out) throw IoError("failed writing '" + partial.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(partial, target, ec);
  if (ec) throw IoError("cannot rename '" + partial.string() + "': " + ec.message());
}

}  // namespace

void write_simulation(const Simulation& sim, const std::filesystem::path& data_path,
                      const std::filesystem::path& truth_path) {
  const auto& cov = sim.data.covariates();
  write_text_atomically(data_path, [&](std::ostream& out) {
    out << "x1,x2,x3,time,status,censor_time\n";
    for (std::size_t i = 0; i < sim.data.rows(); ++i) {
      const auto& r = sim.data.responses()[i];
      for (std::size_t c = 0; c < 3; ++c) out << format_double(cov.column(c).values[i]) << ',';
      out << format_double(r.time) << ',' << r.event << ',' << format_double(*r.censor_time) << '\n';
    }
  });
  write_text_atomically(truth_path, [&](std::ostream& out) {
    out << "row,region\n";
    for (std::size_t i = 0; i < sim.truth.size(); ++i) out << i << ',' << sim.truth[i].region << '\n';
  });
}

std::vector<int> read_region_sidecar(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  if (table.header.size() != 2 || table.header[1] != "region") {
    throw SchemaError("'" + path.string() + "' is not a region sidecar (expected columns row,region)");
  }
  std::vector<int> regions;
  regions.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& cell = table.rows[i][1];
    int region = 0;
    try {
      region = cell ? std::stoi(*cell) : 0;
    } catch (const std::exception&) {
      region = 0;
    }
    if (region < 1 || region > 5) {
      throw ParseError(path.string() + ": row " + std::to_string(i + 1) + " has an invalid region id");
    }
    regions.push_back(region);
  }
  return regions;
}

}  // namespace rcrf
