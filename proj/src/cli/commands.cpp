#include "cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "cli/config.hpp"
#include "json.hpp"
#include "rcrf/csv.hpp"
#include "rcrf/error.hpp"
#include "rcrf/evaluation.hpp"
#include "rcrf/forest.hpp"
#include "rcrf/persistence.hpp"
#include "rcrf/prediction.hpp"
#include "rcrf/simulation.hpp"

namespace rcrf::cli {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::size_t resolve_cores(std::size_t cores) {
  if (cores != 0) return cores;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

ColumnKind parse_kind(const std::string& text) {
  if (text == "numeric") return ColumnKind::numeric;
  if (text == "categorical") return ColumnKind::categorical;
  if (text == "boolean") return ColumnKind::boolean;
  throw UsageError("unknown column kind '" + text + "' (expected numeric, categorical or boolean)");
}

SplitFinderKind parse_split_finder(const std::string& text) {
  if (text == "logrank") return SplitFinderKind::log_rank;
  if (text == "gray") return SplitFinderKind::gray;
  throw UsageError("unknown split finder '" + text + "' (expected logrank or gray)");
}

ResponseSpec response_spec(const DataColumns& c) {
  ResponseSpec r;
  r.time = c.time;
  r.event = c.event;
  if (!c.censor_time.empty()) r.censor_time = c.censor_time;
  return r;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

// key = value lines, readable back through --config.
class Echo {
 public:
  explicit Echo(std::ostream& out) : out_(out) { out_ << "# resolved configuration\n"; }
  template <typename T>
  Echo& operator()(const std::string& key, const T& value) {
    std::ostringstream text;
    if constexpr (std::is_convertible_v<T, std::string>) {
      text << '"' << std::string(value) << '"';
    } else if constexpr (std::is_floating_point_v<T>) {
      text << format_double(value);
    } else if constexpr (std::is_same_v<T, bool>) {
      text << (value ? "true" : "false");
    } else {
      text << value;
    }
    out_ << key << " = " << text.str() << '\n';
    record_[key] = value;
    return *this;
  }
  Echo& list(const std::string& key, const std::vector<int>& values) {
    out_ << key << " = [" << join(values) << "]\n";
    record_[key] = values;
    return *this;
  }
  const json& record() const { return record_; }

 private:
  std::ostream& out_;
  json record_ = json::object();
};

void check_event(int event, int J, const char* flag) {
  if (event < 1 || event > J) {
    throw UsageError(std::string(flag) + " " + std::to_string(event) + " is outside the model's events 1.." +
                     std::to_string(J));
  }
}

}  // namespace

void cmd_train(const TrainOptions& o, std::ostream& out) {
  if (o.out.empty()) throw UsageError("--out is required");
  LoadOptions load;
  for (const auto& pair : o.column_kinds) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos) throw UsageError("--column-kind expects name=kind, got '" + pair + "'");
    load.schema_overrides[pair.substr(0, eq)] = parse_kind(pair.substr(eq + 1));
  }
  if (!o.features.empty()) load.features = o.features;
  const ResponseSpec response = response_spec(o.columns);
  const Dataset dataset = load_csv(o.data, response, load);

  TrainingParameters params;
  params.ntree = o.ntree;
  const std::size_t p = dataset.covariates().column_count();
  params.mtry = o.mtry.value_or(std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(p)))));
  params.number_of_splits = o.nsplit;
  params.node_size = o.node_size;
  params.max_node_depth = o.max_depth;
  params.split_finder.kind = parse_split_finder(o.split_finder);
  params.split_finder.event_count = dataset.event_count();
  params.split_finder.focus = o.focus;
  if (params.split_finder.focus.empty()) {
    for (int j = 1; j <= dataset.event_count(); ++j) params.split_finder.focus.push_back(j);
  }
  params.random_seed = o.seed;
  params.cores = resolve_cores(o.cores);
  params.save_path = o.out;
  params.validate(p);

  Echo echo(out);
  echo("data", o.data)("time", response.time)("event", response.event);
  if (response.censor_time) echo("censor-time", *response.censor_time);
  echo("ntree", params.ntree)("mtry", params.mtry)("node-size", params.node_size)("nsplit", params.number_of_splits)(
      "max-depth", params.max_node_depth)("split-finder", std::string(to_string(params.split_finder.kind)));
  echo.list("focus", params.split_finder.focus);
  echo("seed", params.random_seed)("cores", params.cores)("out", o.out);
  out << "# " << dataset.rows() << " rows, " << p << " covariates, " << dataset.event_count() << " event types\n";

  Report report(o.report);
  report.emit({{"type", "config"}, {"command", "train"}, {"config", echo.record()}});

  const auto start = Clock::now();
  std::size_t resumed = 0;
  auto progress = [&](const TrainingProgress& step) {
    if (step.resumed) ++resumed;
    if (!o.quiet) {
      out << "tree " << step.tree_index + 1 << "/" << step.total << (step.resumed ? " loaded" : " grown") << " ("
          << step.finished << " done)\n";
      out.flush();
    }
    report.emit({{"type", "tree"},
                 {"index", step.tree_index},
                 {"finished", step.finished},
                 {"total", step.total},
                 {"resumed", step.resumed}});
  };
  const Forest forest = train(dataset, params, progress, response);
  const double elapsed = seconds_since(start);
  out << "trained " << forest.trees.size() << " trees (" << resumed << " resumed) in " << format_double(elapsed)
      << " s\n";
  report.emit({{"type", "summary"},
               {"command", "train"},
               {"trees", forest.trees.size()},
               {"resumed", resumed},
               {"seconds", elapsed}});
  report.commit();
}

void cmd_predict(const PredictOptions& o, std::ostream& out) {
  if (o.model.empty() || o.data.empty() || o.out.empty()) throw UsageError("--model, --data and --out are required");
  const Forest forest = load_forest(o.model);
  const int J = forest.event_count;
  for (int j : o.cif) check_event(j, J, "--cif");
  for (int j : o.chf) check_event(j, J, "--chf");
  for (int j : o.events) check_event(j, J, "--event");
  const bool mortality = o.mortality || (o.cif.empty() && o.chf.empty() && !o.survival);
  std::vector<int> events = o.events;
  if (events.empty()) {
    for (int j = 1; j <= J; ++j) events.push_back(j);
  }
  const double tau = o.tau.value_or(forest.largest_event_time);
  if (mortality && !(tau > 0.0)) throw UsageError("--tau must be positive");
  const std::size_t cores = resolve_cores(o.cores);

  Echo echo(out);
  echo("model", o.model)("data", o.data)("out", o.out);
  echo.list("cif", o.cif).list("chf", o.chf);
  echo("survival", o.survival)("mortality", mortality);
  if (mortality) {
    echo("tau", tau);
    echo.list("event", events);
  }
  echo("oob", o.oob)("seed", o.seed)("cores", cores);
  Report report(o.report);
  report.emit({{"type", "config"}, {"command", "predict"}, {"config", echo.record()}});

  const std::filesystem::path dir(o.out);
  struct CurveOutput {
    std::unique_ptr<PartialFile> file;
    int kind;  // 0 survival, 1 cif, 2 chf
    int event;
  };
  std::vector<CurveOutput> curves;
  if (o.survival) curves.push_back({std::make_unique<PartialFile>(dir / "survival.txt"), 0, 0});
  for (int j : o.cif) curves.push_back({std::make_unique<PartialFile>(dir / ("cif_" + std::to_string(j) + ".txt")), 1, j});
  for (int j : o.chf) curves.push_back({std::make_unique<PartialFile>(dir / ("chf_" + std::to_string(j) + ".txt")), 2, j});
  std::unique_ptr<PartialFile> mortality_file;
  if (mortality) {
    mortality_file = std::make_unique<PartialFile>(dir / "mortality.csv");
    auto& m = mortality_file->stream();
    m << "row";
    for (int j : events) m << ",mortality_" << j;
    m << '\n';
  }

  std::size_t without_trees = 0;
  std::size_t rows = 0;
  auto sink = [&](std::size_t row, const std::optional<CompetingRiskFunctions>& f) {
    ++rows;
    if (!f) ++without_trees;
    for (auto& c : curves) {
      auto& s = c.file->stream();
      s << "# row " << row << '\n';
      if (!f) continue;
      const StepFunction& curve = c.kind == 0 ? f->survival : c.kind == 1 ? f->cif(c.event) : f->chf(c.event);
      write_curve(s, curve);
    }
    if (mortality_file) {
      auto& m = mortality_file->stream();
      m << row;
      for (int j : events) m << ',' << (f ? format_double(extract_mortality(*f, j, tau)) : std::string("NA"));
      m << '\n';
    }
  };

  const auto start = Clock::now();
  if (o.oob) {
    const Dataset dataset = load_csv(o.data, forest.response, forest.schema, forest.event_count);
    predict_oob_each(forest, dataset, o.seed, cores, sink);
  } else {
    const CovariateTable table = load_covariates_csv(o.data, forest.schema);
    predict_each(forest, table, o.seed, cores, sink);
  }
  for (auto& c : curves) c.file->commit();
  if (mortality_file) mortality_file->commit();
  const double elapsed = seconds_since(start);

  out << "predicted " << rows << " rows in " << format_double(elapsed) << " s";
  if (o.oob) out << " (" << without_trees << " rows have no out-of-bag trees)";
  out << '\n';
  report.emit({{"type", "summary"},
               {"command", "predict"},
               {"rows", rows},
               {"rows_without_trees", without_trees},
               {"seconds", elapsed}});
  report.commit();
}

namespace {

std::vector<CompetingRiskResponse> read_responses(const std::string& path, const DataColumns& columns) {
  const CsvTable table = read_csv(path);
  const auto time = table.column_index(columns.time);
  const auto event = table.column_index(columns.event);
  if (!time || !event) {
    throw SchemaError("'" + path + "' lacks the response columns '" + columns.time + "' and '" + columns.event + "'");
  }
  std::vector<CompetingRiskResponse> responses;
  responses.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& t = table.rows[i][*time];
    const auto& e = table.rows[i][*event];
    if (!t || !e) throw DataError(path + ": row " + std::to_string(i + 1) + " has a missing response");
    try {
      std::size_t used = 0;
      CompetingRiskResponse r;
      r.time = std::stod(*t, &used);
      if (used != t->size()) throw std::invalid_argument("trailing text");
      r.event = std::stoi(*e, &used);
      if (used != e->size()) throw std::invalid_argument("trailing text");
      responses.push_back(r);
    } catch (const std::logic_error&) {
      throw ParseError(path + ": row " + std::to_string(i + 1) + " has a non-numeric response");
    }
  }
  return responses;
}

struct MortalityTable {
  std::vector<int> events;
  std::vector<std::vector<std::optional<double>>> values;  // [event index][row]
};

MortalityTable read_mortality(const std::string& path) {
  const CsvTable table = read_csv(path);
  if (table.header.empty() || table.header[0] != "row") throw SchemaError("'" + path + "' is not a mortality table");
  MortalityTable m;
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    const std::string& name = table.header[c];
    if (name.rfind("mortality_", 0) != 0) throw SchemaError("'" + path + "': unexpected column '" + name + "'");
    m.events.push_back(std::stoi(name.substr(10)));
  }
  m.values.assign(m.events.size(), {});
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (!row[0] || *row[0] != std::to_string(i)) {
      throw DataError("'" + path + "' row " + std::to_string(i + 1) + " is out of order");
    }
    for (std::size_t c = 1; c < row.size(); ++c) {
      std::optional<double> v;
      if (row[c]) {
        try {
          v = std::stod(*row[c]);
        } catch (const std::logic_error&) {
          throw ParseError("'" + path + "' row " + std::to_string(i + 1) + " has a non-numeric mortality");
        }
      }
      m.values[c - 1].push_back(v);
    }
  }
  return m;
}

// Blocks of "# row i" followed by "time value" lines, as written by predict.
std::vector<std::optional<StepFunction>> read_curves(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::vector<std::optional<StepFunction>> curves;
  std::vector<double> times, values;
  std::optional<double> initial;
  bool open = false;
  auto flush = [&] {
    if (!open) return;
    if (initial) {
      curves.emplace_back(StepFunction(times, values, *initial));
    } else {
      curves.emplace_back(std::nullopt);
    }
    times.clear();
    values.clear();
    initial.reset();
  };
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    if (line.rfind("# row ", 0) == 0) {
      flush();
      open = true;
      if (line.substr(6) != std::to_string(curves.size())) {
        throw DataError(path.string() + ":" + std::to_string(number) + ": rows are out of order");
      }
      continue;
    }
    std::istringstream fields(line);
    double t = 0.0, v = 0.0;
    if (!open || !(fields >> t >> v)) throw ParseError(path.string() + ":" + std::to_string(number) + ": bad curve line");
    if (!initial) {
      initial = v;
    } else {
      times.push_back(t);
      values.push_back(v);
    }
  }
  flush();
  return curves;
}

}  // namespace

void cmd_evaluate(const EvaluateOptions& o, std::ostream& out) {
  if (o.truth.empty() || o.predictions.empty()) throw UsageError("--truth and --predictions are required");
  Report report(o.report);
  json summary = {{"type", "summary"}, {"command", "evaluate"}, {"mode", o.mode}};

  if (o.mode == "concordance") {
    const auto responses = read_responses(o.truth, o.columns);
    const MortalityTable m = read_mortality(o.predictions);
    const std::size_t n = m.values.empty() ? 0 : m.values.front().size();
    if (n != responses.size()) {
      throw DataError("truth has " + std::to_string(responses.size()) + " rows but the predictions have " +
                      std::to_string(n));
    }
    // Rows without a prediction (no out-of-bag trees) are dropped.
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < n; ++i) {
      const bool complete = std::all_of(m.values.begin(), m.values.end(), [&](const auto& col) { return col[i].has_value(); });
      if (complete) kept.push_back(i);
    }
    std::vector<CompetingRiskResponse> used;
    for (std::size_t i : kept) used.push_back(responses[i]);
    out << "rows evaluated: " << kept.size() << " of " << n << '\n';
    json errors = json::object();
    for (std::size_t e = 0; e < m.events.size(); ++e) {
      std::vector<double> mortality;
      for (std::size_t i : kept) mortality.push_back(*m.values[e][i]);
      const auto error = naive_concordance(used, mortality, m.events[e]);
      out << "event " << m.events[e] << ": concordance error "
          << (error ? format_double(*error) : std::string("undefined (no comparable pairs)")) << '\n';
      errors[std::to_string(m.events[e])] = error ? json(*error) : json(nullptr);
      report.emit({{"type", "metric"},
                   {"metric", "concordance_error"},
                   {"event", m.events[e]},
                   {"value", error ? json(*error) : json(nullptr)}});
    }
    summary["rows"] = kept.size();
    summary["concordance_error"] = errors;
  } else if (o.mode == "cif-error") {
    const double tau = o.tau.value_or(20.0);
    if (!(tau > 0.0)) throw UsageError("--tau must be positive");
    const std::vector<int> regions = read_region_sidecar(o.truth);
    const std::filesystem::path dir(o.predictions);
    std::vector<std::vector<std::optional<StepFunction>>> predicted;
    for (int j = 1; j <= 2; ++j) {
      predicted.push_back(read_curves(dir / ("cif_" + std::to_string(j) + ".txt")));
      if (predicted.back().size() != regions.size()) {
        throw DataError("truth has " + std::to_string(regions.size()) + " rows but cif_" + std::to_string(j) +
                        ".txt has " + std::to_string(predicted.back().size()));
      }
    }
    std::vector<std::vector<double>> per_row;
    for (std::size_t i = 0; i < regions.size(); ++i) {
      if (!predicted[0][i] || !predicted[1][i]) continue;
      const RegionSpec& region = simulation_regions()[static_cast<std::size_t>(regions[i] - 1)];
      std::vector<double> row;
      for (int j = 1; j <= 2; ++j) row.push_back(cif_row_error(true_cif(region, j), *predicted[j - 1][i], tau));
      report.emit({{"type", "row"}, {"row", i}, {"cif_error", row}});
      per_row.push_back(std::move(row));
    }
    if (per_row.empty()) throw DataError("no predicted rows to evaluate");
    const CifError error = summarize_cif_error(std::move(per_row));
    out << "rows evaluated: " << error.per_row_event.size() << " of " << regions.size() << "\ntau: "
        << format_double(tau) << '\n';
    for (std::size_t j = 0; j < error.per_event.size(); ++j) {
      out << "event " << j + 1 << ": cif error " << format_double(error.per_event[j]) << '\n';
    }
    out << "overall cif error: " << format_double(error.overall) << '\n';
    summary["rows"] = error.per_row_event.size();
    summary["tau"] = tau;
    summary["cif_error_per_event"] = error.per_event;
    summary["cif_error"] = error.overall;
  } else {
    throw UsageError("unknown --mode '" + o.mode + "' (expected concordance or cif-error)");
  }
  report.emit(summary);
  report.commit();
}

void cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  if (o.out.empty()) throw UsageError("--out is required");
  if (o.n < 1) throw UsageError("--n must be at least 1");
  std::filesystem::path truth = o.truth;
  if (truth.empty()) {
    const std::filesystem::path data(o.out);
    truth = data.parent_path() / (data.stem().string() + ".regions.csv");
  }
  const Simulation sim = generate(o.n, o.seed);
  write_simulation(sim, o.out, truth);
  std::size_t censored = 0;
  for (const auto& r : sim.data.responses()) censored += r.censored() ? 1 : 0;
  out << "wrote " << o.n << " rows to " << o.out << " (" << censored << " censored) and regions to "
      << truth.string() << '\n';
}

void cmd_benchmark(const BenchmarkOptions& o, std::ostream& out) {
  if (o.sizes.empty()) throw UsageError("--sizes needs at least one size");
  if (o.repeats < 1) throw UsageError("--repeats must be at least 1");
  TrainingParameters params;
  params.ntree = o.ntree;
  params.mtry = o.mtry;
  params.number_of_splits = o.nsplit;
  params.node_size = o.node_size;
  params.split_finder = {SplitFinderKind::log_rank, 2, {1, 2}};
  params.cores = resolve_cores(o.cores);

  Echo echo(out);
  echo("ntree", params.ntree)("nsplit", params.number_of_splits)("node-size", params.node_size)("mtry", params.mtry)(
      "repeats", o.repeats)("seed", o.seed)("cores", params.cores);
  Report report(o.report);
  report.emit({{"type", "config"}, {"command", "benchmark"}, {"config", echo.record()}});

  out << "      n        min     median        max   (seconds, train + predict)\n";
  for (std::size_t n : o.sizes) {
    std::vector<double> times;
    for (std::size_t r = 0; r < o.repeats; ++r) {
      const std::uint64_t base = mix_seed(o.seed, n);
      const Simulation train_set = generate(n, mix_seed(base, 2 * r));
      const Simulation test_set = generate(n, mix_seed(base, 2 * r + 1));
      params.random_seed = mix_seed(base, 2 * r + 1000003);

      const auto start = Clock::now();
      const Forest forest = train(train_set.data, params);
      double checksum = 0.0;
      predict_each(forest, test_set.data.covariates(), params.random_seed, params.cores,
                   [&](std::size_t, const std::optional<CompetingRiskFunctions>& f) {
                     checksum += extract_mortality(*f, 1, forest.largest_event_time);
                   });
      const double elapsed = seconds_since(start);
      times.push_back(elapsed);
      report.emit({{"type", "run"}, {"n", n}, {"repeat", r}, {"seconds", elapsed}, {"checksum", checksum}});
    }
    std::sort(times.begin(), times.end());
    const std::size_t k = times.size();
    const double median = k % 2 ? times[k / 2] : 0.5 * (times[k / 2 - 1] + times[k / 2]);
    char line[128];
    std::snprintf(line, sizeof line, "%7zu %10.2f %10.2f %10.2f\n", n, times.front(), median, times.back());
    out << line;
    out.flush();
    report.emit({{"type", "timing"}, {"n", n}, {"min", times.front()}, {"median", median}, {"max", times.back()}});
  }
  report.commit();
}

}  // namespace rcrf::cli
