#include "rcrf/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "rcrf/error.hpp"
#include "rcrf/log.hpp"

namespace rcrf {

const char* to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::numeric:
      return "numeric";
    case ColumnKind::categorical:
      return "categorical";
    case ColumnKind::boolean:
      return "boolean";
  }
  return "unknown";
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return i;
  }
  return std::nullopt;
}

bool Column::is_missing(std::size_t row) const { return std::isnan(values[row]); }

CovariateValue Column::value(std::size_t row) const {
  const double v = values[row];
  if (std::isnan(v)) return Missing{};
  switch (schema.kind) {
    case ColumnKind::numeric:
      return v;
    case ColumnKind::categorical:
      return CategoricalLevel{static_cast<std::uint32_t>(v)};
    case ColumnKind::boolean:
      return v != 0.0;
  }
  return Missing{};
}

CovariateTable::CovariateTable(std::vector<Column> columns) : columns_(std::move(columns)) {
  rows_ = columns_.empty() ? 0 : columns_.front().values.size();
  for (const auto& c : columns_) {
    if (c.values.size() != rows_) {
      throw SchemaError("column '" + c.schema.name + "' has " + std::to_string(c.values.size()) +
                        " values, expected " + std::to_string(rows_));
    }
    if (c.schema.kind == ColumnKind::categorical) {
      for (double v : c.values) {
        if (!std::isnan(v) && (v < 0 || v >= static_cast<double>(c.schema.levels.size()))) {
          throw SchemaError("column '" + c.schema.name + "' has a level id outside its level table");
        }
      }
    }
  }
}

Schema CovariateTable::schema() const {
  Schema s;
  s.columns.reserve(columns_.size());
  for (const auto& c : columns_) s.columns.push_back(c.schema);
  return s;
}

std::vector<CovariateValue> CovariateTable::row(std::size_t i) const {
  std::vector<CovariateValue> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(c.value(i));
  return out;
}

Dataset::Dataset(CovariateTable covariates, std::vector<CompetingRiskResponse> responses,
                 int event_count)
    : covariates_(std::move(covariates)),
      responses_(std::move(responses)),
      event_count_(event_count) {
  if (event_count_ < 1) throw DataError("number of event types must be at least 1");
  if (covariates_.column_count() > 0 && covariates_.rows() != responses_.size()) {
    throw SchemaError("covariates have " + std::to_string(covariates_.rows()) + " rows but " +
                      std::to_string(responses_.size()) + " responses were given");
  }
  bool any_event = false;
  for (std::size_t i = 0; i < responses_.size(); ++i) {
    const auto& r = responses_[i];
    if (!(r.time >= 0.0) || !std::isfinite(r.time)) {
      throw DataError("row " + std::to_string(i) + ": time must be a finite nonnegative number");
    }
    if (r.event < 0 || r.event > event_count_) {
      throw DataError("row " + std::to_string(i) + ": event code " + std::to_string(r.event) +
                      " outside 0.." + std::to_string(event_count_));
    }
    if (r.censor_time) {
      if (!(*r.censor_time >= 0.0)) {
        throw DataError("row " + std::to_string(i) + ": censor time must be nonnegative");
      }
      if (r.event == 0 && *r.censor_time != r.time) {
        throw DataError("row " + std::to_string(i) +
                        ": censored row must have censor time equal to its observed time");
      }
      if (r.event != 0 && *r.censor_time < r.time) {
        warn("row " + std::to_string(i) + ": censor time " + std::to_string(*r.censor_time) +
             " precedes the observed event time " + std::to_string(r.time));
      }
    }
    any_event = any_event || r.event != 0;
  }
  if (!any_event) throw DataError("dataset has no uncensored responses");
}

bool Dataset::has_censor_times() const {
  return std::all_of(responses_.begin(), responses_.end(),
                     [](const CompetingRiskResponse& r) { return r.censor_time.has_value(); });
}

namespace {

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001B3ULL;
    }
  }
  void u64(std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, 8);
  }
  void f64(double v) {
    // Canonical NaN so that every missing marker hashes the same.
    u64(std::isnan(v) ? 0x7FF8000000000000ULL : std::bit_cast<std::uint64_t>(v));
  }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xCBF29CE484222325ULL;
};

}  // namespace

std::uint64_t Dataset::content_hash() const {
  Fnv1a h;
  h.u64(responses_.size());
  h.u64(static_cast<std::uint64_t>(event_count_));
  for (const auto& c : covariates_.columns()) {
    h.str(c.schema.name);
    h.u64(static_cast<std::uint64_t>(c.schema.kind));
    h.u64(c.schema.levels.size());
    for (const auto& l : c.schema.levels) h.str(l);
    for (double v : c.values) h.f64(v);
  }
  for (const auto& r : responses_) {
    h.f64(r.time);
    h.u64(static_cast<std::uint64_t>(r.event));
    h.u64(r.censor_time ? 1 : 0);
    if (r.censor_time) h.f64(*r.censor_time);
  }
  return h.value();
}

std::size_t risk_set_size(std::span<const CompetingRiskResponse> rows, double t) {
  return static_cast<std::size_t>(std::count_if(
      rows.begin(), rows.end(), [t](const CompetingRiskResponse& r) { return r.time >= t; }));
}

std::size_t event_count(std::span<const CompetingRiskResponse> rows, double t, int event) {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [t, event](const CompetingRiskResponse& r) {
        return r.time == t && r.event == event;
      }));
}

}  // namespace rcrf
