#include "rcrf/csv.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include "rcrf/error.hpp"

namespace rcrf {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string read_plain(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string read_gzip(const std::filesystem::path& path) {
  gzFile file = gzopen(path.string().c_str(), "rb");
  if (file == nullptr) throw IoError("cannot open '" + path.string() + "'");
  std::string out;
  char buffer[1 << 16];
  int n;
  while ((n = gzread(file, buffer, sizeof buffer)) > 0) out.append(buffer, static_cast<std::size_t>(n));
  const bool failed = n < 0;
  gzclose(file);
  if (failed) throw IoError("corrupt gzip stream in '" + path.string() + "'");
  return out;
}

std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<bool> parse_bool(std::string_view s) {
  static const std::set<std::string_view> yes{"1", "true", "TRUE", "True", "T", "yes", "YES"};
  static const std::set<std::string_view> no{"0", "false", "FALSE", "False", "F", "no", "NO"};
  if (yes.count(s)) return true;
  if (no.count(s)) return false;
  return std::nullopt;
}

std::size_t require_column(const CsvTable& table, const std::string& name, const std::string& source) {
  auto idx = table.column_index(name);
  if (!idx) throw SchemaError(source + ": missing column '" + name + "'");
  return *idx;
}

// Row numbers in messages are 1-based data rows (header excluded).
std::string at_row(const std::string& source, std::size_t row) {
  return source + ": data row " + std::to_string(row + 1);
}

std::vector<CompetingRiskResponse> parse_responses(const CsvTable& table, const ResponseSpec& spec,
                                                   const std::string& source) {
  const std::size_t time_col = require_column(table, spec.time, source);
  const std::size_t event_col = require_column(table, spec.event, source);
  std::optional<std::size_t> censor_col;
  if (spec.censor_time) censor_col = require_column(table, *spec.censor_time, source);

  std::vector<CompetingRiskResponse> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    CompetingRiskResponse r;
    if (!row[time_col]) throw DataError(at_row(source, i) + ": missing value in time column '" + spec.time + "'");
    auto t = parse_number(*row[time_col]);
    if (!t) throw ParseError(at_row(source, i) + ": non-numeric time '" + *row[time_col] + "'");
    if (*t < 0) throw ParseError(at_row(source, i) + ": negative time");
    r.time = *t;

    if (!row[event_col]) throw DataError(at_row(source, i) + ": missing value in event column '" + spec.event + "'");
    auto e = parse_number(*row[event_col]);
    if (!e || *e < 0 || std::floor(*e) != *e || *e > std::numeric_limits<int>::max()) {
      throw ParseError(at_row(source, i) + ": event code must be a nonnegative integer, got '" +
                       *row[event_col] + "'");
    }
    r.event = static_cast<int>(*e);

    if (censor_col) {
      if (!row[*censor_col]) {
        throw DataError(at_row(source, i) + ": missing value in censor time column '" + *spec.censor_time + "'");
      }
      auto c = parse_number(*row[*censor_col]);
      if (!c || *c < 0) throw ParseError(at_row(source, i) + ": invalid censor time '" + *row[*censor_col] + "'");
      r.censor_time = *c;
    }
    out.push_back(r);
  }
  return out;
}

Column build_inferred_column(const CsvTable& table, std::size_t col, const std::string& name,
                             std::optional<ColumnKind> forced, const std::string& source) {
  Column column;
  column.schema.name = name;
  const std::size_t n = table.rows.size();
  column.values.assign(n, kMissing);

  ColumnKind kind = ColumnKind::numeric;
  if (forced) {
    kind = *forced;
  } else {
    for (const auto& row : table.rows) {
      if (row[col] && !parse_number(*row[col])) {
        kind = ColumnKind::categorical;
        break;
      }
    }
  }
  column.schema.kind = kind;

  switch (kind) {
    case ColumnKind::numeric:
      for (std::size_t i = 0; i < n; ++i) {
        const auto& cell = table.rows[i][col];
        if (!cell) continue;
        auto v = parse_number(*cell);
        if (!v) throw ParseError(at_row(source, i) + ": non-numeric value '" + *cell + "' in column '" + name + "'");
        column.values[i] = *v;
      }
      break;
    case ColumnKind::boolean:
      for (std::size_t i = 0; i < n; ++i) {
        const auto& cell = table.rows[i][col];
        if (!cell) continue;
        auto v = parse_bool(*cell);
        if (!v) throw ParseError(at_row(source, i) + ": non-boolean value '" + *cell + "' in column '" + name + "'");
        column.values[i] = *v ? 1.0 : 0.0;
      }
      break;
    case ColumnKind::categorical: {
      std::set<std::string> levels;
      for (const auto& row : table.rows) {
        if (row[col]) levels.insert(*row[col]);
      }
      column.schema.levels.assign(levels.begin(), levels.end());
      std::unordered_map<std::string, std::uint32_t> ids;
      for (std::uint32_t k = 0; k < column.schema.levels.size(); ++k) ids[column.schema.levels[k]] = k;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& cell = table.rows[i][col];
        if (cell) column.values[i] = ids.at(*cell);
      }
      break;
    }
  }
  return column;
}

Column build_conformed_column(const CsvTable& table, std::size_t col, const ColumnSchema& schema,
                              const std::string& source) {
  Column column;
  column.schema = schema;
  const std::size_t n = table.rows.size();
  column.values.assign(n, kMissing);
  std::unordered_map<std::string, std::uint32_t> ids;
  for (std::uint32_t k = 0; k < schema.levels.size(); ++k) ids[schema.levels[k]] = k;

  for (std::size_t i = 0; i < n; ++i) {
    const auto& cell = table.rows[i][col];
    if (!cell) continue;
    switch (schema.kind) {
      case ColumnKind::numeric: {
        auto v = parse_number(*cell);
        if (!v) {
          throw SchemaError(at_row(source, i) + ": column '" + schema.name +
                            "' is numeric in the model but holds '" + *cell + "'");
        }
        column.values[i] = *v;
        break;
      }
      case ColumnKind::boolean: {
        auto v = parse_bool(*cell);
        if (!v) {
          throw SchemaError(at_row(source, i) + ": column '" + schema.name +
                            "' is boolean in the model but holds '" + *cell + "'");
        }
        column.values[i] = *v ? 1.0 : 0.0;
        break;
      }
      case ColumnKind::categorical: {
        auto it = ids.find(*cell);
        if (it != ids.end()) column.values[i] = it->second;
        break;
      }
    }
  }
  return column;
}

int checked_event_count(const std::vector<CompetingRiskResponse>& responses, const std::string& source) {
  int max_event = 0;
  std::set<int> seen;
  for (const auto& r : responses) {
    max_event = std::max(max_event, r.event);
    if (r.event != 0) seen.insert(r.event);
  }
  if (max_event == 0) throw DataError(source + ": no uncensored responses");
  for (int j = 1; j <= max_event; ++j) {
    if (!seen.count(j)) {
      throw DataError(source + ": event codes must be contiguous 1.." + std::to_string(max_event) +
                      " but code " + std::to_string(j) + " never occurs");
    }
  }
  return max_event;
}

}  // namespace

std::optional<std::size_t> CsvTable::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

CsvTable parse_csv(std::string_view text, const std::string& source) {
  CsvTable table;
  std::vector<std::optional<std::string>> record;
  std::string field;
  bool quoted_field = false;  // field was quoted; "" then means an empty string, not NA
  bool in_quotes = false;
  bool at_field_start = true;
  std::size_t line = 1;
  bool header_done = false;

  auto finish_field = [&] {
    if (!quoted_field && (field.empty() || field == "NA")) {
      record.emplace_back(std::nullopt);
    } else if (quoted_field && field.empty()) {
      record.emplace_back(std::nullopt);
    } else {
      record.emplace_back(std::move(field));
    }
    field.clear();
    quoted_field = false;
    at_field_start = true;
  };
  auto finish_record = [&] {
    finish_field();
    // Skip blank lines.
    if (record.size() == 1 && !record[0]) {
      record.clear();
      return;
    }
    if (!header_done) {
      for (auto& cell : record) table.header.push_back(cell.value_or(""));
      header_done = true;
    } else {
      if (record.size() != table.header.size()) {
        throw ParseError(source + ": line " + std::to_string(line) + " has " + std::to_string(record.size()) +
                         " fields, header has " + std::to_string(table.header.size()));
      }
      table.rows.push_back(std::move(record));
    }
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!at_field_start) throw ParseError(source + ": line " + std::to_string(line) + ": stray quote");
        in_quotes = true;
        quoted_field = true;
        at_field_start = false;
        break;
      case ',':
        finish_field();
        break;
      case '\r':
        break;
      case '\n':
        finish_record();
        ++line;
        break;
      default:
        field.push_back(c);
        at_field_start = false;
    }
  }
  if (in_quotes) throw ParseError(source + ": unterminated quoted field");
  if (!field.empty() || quoted_field || !record.empty()) finish_record();
  if (!header_done) throw ParseError(source + ": missing header row");
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  const bool gz = path.extension() == ".gz";
  const std::string text = gz ? read_gzip(path) : read_plain(path);
  return parse_csv(text, path.string());
}

Dataset dataset_from_table(const CsvTable& table, const ResponseSpec& response,
                           const LoadOptions& options, const std::string& source) {
  auto responses = parse_responses(table, response, source);
  const int J = checked_event_count(responses, source);

  std::set<std::string> response_names{response.time, response.event};
  if (response.censor_time) response_names.insert(*response.censor_time);

  std::vector<std::string> names;
  if (options.features) {
    names = *options.features;
    for (const auto& name : names) {
      if (response_names.count(name)) throw UsageError("response column '" + name + "' cannot be a feature");
    }
  } else {
    for (const auto& h : table.header) {
      if (!response_names.count(h)) names.push_back(h);
    }
  }
  for (const auto& [name, kind] : options.schema_overrides) {
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      throw SchemaError(source + ": schema override names unknown feature '" + name + "'");
    }
  }

  std::vector<Column> columns;
  columns.reserve(names.size());
  for (const auto& name : names) {
    const std::size_t col = require_column(table, name, source);
    std::optional<ColumnKind> forced;
    if (auto it = options.schema_overrides.find(name); it != options.schema_overrides.end()) forced = it->second;
    columns.push_back(build_inferred_column(table, col, name, forced, source));
  }
  return Dataset(CovariateTable(std::move(columns)), std::move(responses), J);
}

Dataset load_csv(const std::filesystem::path& path, const ResponseSpec& response, const LoadOptions& options) {
  return dataset_from_table(read_csv(path), response, options, path.string());
}

CovariateTable covariates_from_table(const CsvTable& table, const Schema& schema, const std::string& source) {
  std::vector<Column> columns;
  columns.reserve(schema.columns.size());
  for (const auto& cs : schema.columns) {
    const std::size_t col = require_column(table, cs.name, source);
    columns.push_back(build_conformed_column(table, col, cs, source));
  }
  return CovariateTable(std::move(columns));
}

Dataset dataset_from_table(const CsvTable& table, const ResponseSpec& response, const Schema& schema,
                           int event_count, const std::string& source) {
  auto responses = parse_responses(table, response, source);
  for (std::size_t i = 0; i < responses.size(); ++i) {
    if (responses[i].event > event_count) {
      throw SchemaError(at_row(source, i) + ": event code " + std::to_string(responses[i].event) +
                        " exceeds the model's " + std::to_string(event_count) + " event types");
    }
  }
  return Dataset(covariates_from_table(table, schema, source), std::move(responses), event_count);
}

Dataset load_csv(const std::filesystem::path& path, const ResponseSpec& response, const Schema& schema,
                 int event_count) {
  return dataset_from_table(read_csv(path), response, schema, event_count, path.string());
}

CovariateTable load_covariates_csv(const std::filesystem::path& path, const Schema& schema) {
  return covariates_from_table(read_csv(path), schema, path.string());
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace rcrf
