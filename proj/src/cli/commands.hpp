#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace rcrf::cli {

struct DataColumns {
  std::string time = "time";
  std::string event = "status";
  std::string censor_time;
};

struct TrainOptions {
  std::string data;
  DataColumns columns;
  std::vector<std::string> features;
  /// name=kind pairs forcing a column kind.
  std::vector<std::string> column_kinds;
  std::size_t ntree = 100;
  std::optional<std::size_t> mtry;  // default: ceil(sqrt(#covariates))
  std::size_t node_size = 5;
  std::size_t nsplit = 0;
  std::size_t max_depth = 100000;
  std::string split_finder = "logrank";
  std::vector<int> focus;  // default: every event
  std::uint64_t seed = 0;
  std::size_t cores = 0;
  std::string out;
  std::string report;
  bool quiet = false;
};

struct PredictOptions {
  std::string model;
  std::string data;
  std::string out;
  std::vector<int> cif;
  std::vector<int> chf;
  bool survival = false;
  bool mortality = false;
  std::optional<double> tau;  // default: largest training event time
  std::vector<int> events;    // mortality events; default: every event
  bool oob = false;
  std::uint64_t seed = 0;
  std::size_t cores = 0;
  std::string report;
};

struct EvaluateOptions {
  std::string truth;
  std::string predictions;
  std::string mode = "concordance";
  DataColumns columns;
  std::optional<double> tau;  // cif-error horizon, default 20
  std::string report;
};

struct SimulateOptions {
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::string out;
  std::string truth;  // default: <out stem>.regions.csv
};

struct BenchmarkOptions {
  std::vector<std::size_t> sizes{1000, 10000};
  std::size_t repeats = 3;
  std::size_t ntree = 100;
  std::size_t nsplit = 1000;
  std::size_t node_size = 500;
  std::size_t mtry = 1;
  std::uint64_t seed = 0;
  std::size_t cores = 0;
  std::string report;
};

void cmd_train(const TrainOptions& o, std::ostream& out);
void cmd_predict(const PredictOptions& o, std::ostream& out);
void cmd_evaluate(const EvaluateOptions& o, std::ostream& out);
void cmd_simulate(const SimulateOptions& o, std::ostream& out);
void cmd_benchmark(const BenchmarkOptions& o, std::ostream& out);

}  // namespace rcrf::cli
