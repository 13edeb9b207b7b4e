#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace rcrf {

/// Observed competing-risks outcome for one subject.
///
/// `time` is the recorded time min(T, C); `event` is 0 for censored and
/// 1..J otherwise. `censor_time` is the (possibly counterfactual) censoring
/// time C, required only by the Gray split finder.
struct CompetingRiskResponse {
  double time = 0.0;
  int event = 0;
  std::optional<double> censor_time;

  bool censored() const { return event == 0; }
  friend bool operator==(const CompetingRiskResponse&, const CompetingRiskResponse&) = default;
};

enum class ColumnKind : std::uint8_t { numeric = 0, categorical = 1, boolean = 2 };

const char* to_string(ColumnKind kind);

struct Missing {
  friend bool operator==(Missing, Missing) { return true; }
};

struct CategoricalLevel {
  std::uint32_t id = 0;
  friend bool operator==(CategoricalLevel, CategoricalLevel) = default;
};

using CovariateValue = std::variant<Missing, double, CategoricalLevel, bool>;

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  /// Level table for categorical columns; level id = index.
  std::vector<std::string> levels;

  friend bool operator==(const ColumnSchema&, const ColumnSchema&) = default;
};

struct Schema {
  std::vector<ColumnSchema> columns;

  std::optional<std::size_t> find(std::string_view name) const;
  friend bool operator==(const Schema&, const Schema&) = default;
};

/// One covariate column. Values are stored as doubles: the number itself
/// for numeric columns, 0/1 for boolean columns, the level id for
/// categorical columns. NaN marks a missing cell for every kind.
struct Column {
  ColumnSchema schema;
  std::vector<double> values;

  bool is_missing(std::size_t row) const;
  CovariateValue value(std::size_t row) const;
};

/// Covariates without responses; what prediction consumes.
class CovariateTable {
 public:
  CovariateTable() = default;
  explicit CovariateTable(std::vector<Column> columns);

  std::size_t rows() const { return rows_; }
  std::size_t column_count() const { return columns_.size(); }
  const Column& column(std::size_t i) const { return columns_[i]; }
  const std::vector<Column>& columns() const { return columns_; }
  Schema schema() const;

  /// Copy of a single row as typed values, in column order.
  std::vector<CovariateValue> row(std::size_t i) const;

 private:
  std::vector<Column> columns_;
  std::size_t rows_ = 0;
};

/// Covariates plus responses. Immutable after construction.
class Dataset {
 public:
  /// Validates the invariants: equal lengths, events in 0..event_count,
  /// event_count >= 1, at least one uncensored response.
  Dataset(CovariateTable covariates, std::vector<CompetingRiskResponse> responses,
          int event_count);

  std::size_t rows() const { return responses_.size(); }
  int event_count() const { return event_count_; }
  const CovariateTable& covariates() const { return covariates_; }
  const std::vector<CompetingRiskResponse>& responses() const { return responses_; }
  Schema schema() const { return covariates_.schema(); }

  bool has_censor_times() const;

  /// FNV-1a over schema, cell bit patterns and responses. Used to recognize
  /// the training data when out-of-bag predictions are requested.
  std::uint64_t content_hash() const;

 private:
  CovariateTable covariates_;
  std::vector<CompetingRiskResponse> responses_;
  int event_count_;
};

/// Y(t): number of rows with observed time >= t.
std::size_t risk_set_size(std::span<const CompetingRiskResponse> rows, double t);

/// d_j(t): number of rows with observed time == t and event code j.
std::size_t event_count(std::span<const CompetingRiskResponse> rows, double t, int event);

}  // namespace rcrf
