#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rcrf/dataset.hpp"

namespace rcrf {

/// Raw RFC-4180 table. A cell is nullopt when it is empty or "NA".
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::optional<std::string>>> rows;

  std::optional<std::size_t> column_index(std::string_view name) const;
};

/// Reads a CSV file (transparently gunzipped when the name ends in ".gz").
CsvTable read_csv(const std::filesystem::path& path);

/// Parses CSV text. `source` is used in error messages only.
CsvTable parse_csv(std::string_view text, const std::string& source = "<memory>");

/// Names of the response columns.
struct ResponseSpec {
  std::string time = "time";
  std::string event = "status";
  std::optional<std::string> censor_time;
};

struct LoadOptions {
  /// Forces the kind of the named columns instead of inferring it.
  std::map<std::string, ColumnKind> schema_overrides;
  /// Restricts covariates to these columns, in this order. All non-response
  /// columns are used when absent.
  std::optional<std::vector<std::string>> features;
};

/// Loads a training dataset. Column kinds are inferred (all cells numeric ->
/// numeric, otherwise categorical with levels sorted lexicographically);
/// J is the largest observed event code and the codes must cover 1..J.
Dataset load_csv(const std::filesystem::path& path, const ResponseSpec& response,
                 const LoadOptions& options = {});
Dataset dataset_from_table(const CsvTable& table, const ResponseSpec& response,
                           const LoadOptions& options = {}, const std::string& source = "<memory>");

/// Loads data against an existing model schema: columns are looked up by
/// name, categorical cells are mapped onto the schema's level tables (unseen
/// levels become missing) and event codes may be any subset of 0..event_count.
Dataset load_csv(const std::filesystem::path& path, const ResponseSpec& response,
                 const Schema& schema, int event_count);
Dataset dataset_from_table(const CsvTable& table, const ResponseSpec& response,
                           const Schema& schema, int event_count,
                           const std::string& source = "<memory>");

/// Covariates only, conformed to `schema`; response columns are not needed.
CovariateTable load_covariates_csv(const std::filesystem::path& path, const Schema& schema);
CovariateTable covariates_from_table(const CsvTable& table, const Schema& schema,
                                     const std::string& source = "<memory>");

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

/// Quotes a CSV field when it contains a delimiter, quote or newline.
std::string csv_escape(std::string_view field);

}  // namespace rcrf
