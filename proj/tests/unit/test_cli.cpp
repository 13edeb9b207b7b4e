#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli/config.hpp"
#include "doctest.h"
#include "json.hpp"
#include "rcrf/cli.hpp"
#include "rcrf/csv.hpp"
#include "rcrf/error.hpp"
#include "rcrf/evaluation.hpp"
#include "rcrf/persistence.hpp"
#include "rcrf/prediction.hpp"
#include "rcrf/simulation.hpp"
#include "support.hpp"

using namespace rcrf;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) { std::ofstream(path) << text; }

// A small simulated training set shared by several cases.
fs::path simulated(const fs::path& dir, std::size_t n = 300, int seed = 4) {
  const auto data = dir / "train.csv";
  REQUIRE(run({"simulate", "--n", std::to_string(n), "--seed", std::to_string(seed), "--out", data.string()}).code ==
          0);
  return data;
}

std::vector<std::string> train_args(const fs::path& data, const fs::path& model, std::size_t ntree = 6) {
  return {"train",    "--data",  data.string(), "--ntree", std::to_string(ntree), "--node-size", "10", "--seed",
          "15",       "--out",   model.string(), "--quiet"};
}

bool has_partial_files(const fs::path& dir) {
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.path().extension() == ".partial") return true;
  }
  return false;
}

}  // namespace

TEST_CASE("exit code mapping") {
  CHECK(cli::exit_code(UsageError("x")) == 1);
  CHECK(cli::exit_code(ConfigurationError("x")) == 1);
  CHECK(cli::exit_code(DomainError("x")) == 1);
  CHECK(cli::exit_code(SchemaError("x")) == 2);
  CHECK(cli::exit_code(ParseError("x")) == 2);
  CHECK(cli::exit_code(DataError("x")) == 2);
  CHECK(cli::exit_code(IoError("x")) == 3);
}

TEST_CASE("usage errors and help") {
  const Result help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("train") != std::string::npos);
  CHECK(run({"train", "--help"}).code == 0);
  CHECK(run({}).code == 1);
  CHECK(run({"fly"}).code == 1);
  const Result missing = run({"train", "--data", "x.csv"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("--out") != std::string::npos);
  CHECK(run({"simulate", "--n", "ten", "--out", "x.csv"}).code == 1);
}

TEST_CASE("simulate is deterministic per seed") {
  const auto dir = testing::scratch_dir("cli_simulate");
  for (const char* name : {"a", "b"}) {
    CHECK(run({"simulate", "--n", "1000", "--seed", "3", "--out", (dir / (std::string(name) + ".csv")).string()}).code ==
          0);
  }
  CHECK(run({"simulate", "--n", "1000", "--seed", "4", "--out", (dir / "c.csv").string()}).code == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.regions.csv") == slurp(dir / "b.regions.csv"));
  CHECK(slurp(dir / "a.csv") != slurp(dir / "c.csv"));
  CHECK(run({"simulate", "--n", "0", "--out", (dir / "d.csv").string()}).code == 1);
  CHECK(run({"simulate", "--n", "5", "--out", "/proc/no/such/dir/x.csv"}).code == 3);
  CHECK_FALSE(has_partial_files(dir));
}

TEST_CASE("train writes the model, resumes, and is deterministic across cores") {
  const auto dir = testing::scratch_dir("cli_train");
  const auto data = simulated(dir);
  const auto model = dir / "model";
  auto args = train_args(data, model, 8);
  args.push_back("--cores");
  args.push_back("1");
  const Result first = run(args);
  REQUIRE(first.code == 0);
  CHECK(first.out.find("ntree = 8") != std::string::npos);
  CHECK(first.out.find("trained 8 trees (0 resumed)") != std::string::npos);
  CHECK(fs::exists(model / "forest.meta"));
  for (std::size_t t = 0; t < 8; ++t) CHECK(fs::exists(tree_path(model, t)));

  for (std::size_t t = 5; t < 8; ++t) fs::remove(tree_path(model, t));
  const Result again = run(args);
  REQUIRE(again.code == 0);
  CHECK(again.out.find("trained 8 trees (5 resumed)") != std::string::npos);

  const auto other = dir / "model3";
  auto args3 = train_args(data, other, 8);
  args3.push_back("--cores");
  args3.push_back("3");
  REQUIRE(run(args3).code == 0);
  CHECK(slurp(model / "forest.meta") == slurp(other / "forest.meta"));
  for (std::size_t t = 0; t < 8; ++t) CHECK(slurp(tree_path(model, t)) == slurp(tree_path(other, t)));
  CHECK_FALSE(has_partial_files(dir));
}

TEST_CASE("train error exits") {
  const auto dir = testing::scratch_dir("cli_train_errors");
  const auto data = simulated(dir, 100);
  const auto model = dir / "model";

  CHECK(run(train_args(dir / "absent.csv", model)).code == 3);

  auto gray = train_args(data, model);
  gray.insert(gray.end(), {"--split-finder", "gray"});
  const Result g = run(gray);
  CHECK(g.code == 1);
  CHECK(g.err.find("censor") != std::string::npos);
  CHECK_FALSE(fs::exists(model / "forest.meta"));

  auto bad_finder = train_args(data, model);
  bad_finder.insert(bad_finder.end(), {"--split-finder", "best"});
  CHECK(run(bad_finder).code == 1);

  auto wrong_column = train_args(data, model);
  wrong_column.insert(wrong_column.end(), {"--time", "duration"});
  CHECK(run(wrong_column).code == 2);

  write_text(dir / "broken.csv", "x1,time,status\n1,2,1\n2,abc,0\n");
  CHECK(run(train_args(dir / "broken.csv", model)).code == 2);

  auto mtry = train_args(data, model);
  mtry.insert(mtry.end(), {"--mtry", "9"});
  CHECK(run(mtry).code == 1);

  auto gray_ok = train_args(data, dir / "gray");
  gray_ok.insert(gray_ok.end(), {"--split-finder", "gray", "--censor-time", "censor_time"});
  CHECK(run(gray_ok).code == 0);
}

TEST_CASE("config files supply flags; the command line wins") {
  const auto dir = testing::scratch_dir("cli_config");
  const auto data = simulated(dir, 150);
  write_text(dir / "plain.ini", "ntree = 3\nnode-size = 12\nseed = 5\nquiet = true\ndata = \"" + data.string() +
                                    "\"\nout = \"" + (dir / "plain").string() + "\"\n");
  const Result plain = run({"train", "--config", (dir / "plain.ini").string()});
  REQUIRE(plain.code == 0);
  CHECK(plain.out.find("ntree = 3") != std::string::npos);
  CHECK(plain.out.find("node-size = 12") != std::string::npos);
  CHECK(load_forest(dir / "plain").trees.size() == 3);

  write_text(dir / "section.ini", "[train]\nntree = 4\nseed = 5\n");
  const Result section = run({"train", "--config", (dir / "section.ini").string(), "--ntree", "2", "--data",
                              data.string(), "--out", (dir / "section").string(), "--quiet"});
  REQUIRE(section.code == 0);
  CHECK(section.out.find("ntree = 2") != std::string::npos);
  CHECK(section.out.find("seed = 5") != std::string::npos);

  // The echoed configuration reads back as a config file.
  const std::string echo = plain.out.substr(0, plain.out.find("# 150 rows"));
  write_text(dir / "echo.ini", echo);
  const Result replay = run({"train", "--config", (dir / "echo.ini").string(), "--out", (dir / "replay").string(),
                             "--quiet"});
  REQUIRE(replay.code == 0);
  for (std::size_t t = 0; t < 3; ++t) CHECK(slurp(tree_path(dir / "plain", t)) == slurp(tree_path(dir / "replay", t)));

  CHECK(run({"train", "--config", (dir / "absent.ini").string()}).code == 1);
}

TEST_CASE("RCRF_CORES supplies the worker count") {
  const auto dir = testing::scratch_dir("cli_env");
  const auto data = simulated(dir, 120);
  ::setenv("RCRF_CORES", "2", 1);
  const Result r = run(train_args(data, dir / "m", 2));
  ::unsetenv("RCRF_CORES");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("cores = 2") != std::string::npos);
}

TEST_CASE("simulate, train, predict and evaluate end to end") {
  const auto dir = testing::scratch_dir("cli_flow");
  const auto data = simulated(dir, 400, 8);
  REQUIRE(run({"simulate", "--n", "200", "--seed", "9", "--out", (dir / "test.csv").string()}).code == 0);
  const auto model = dir / "model";
  auto args = train_args(data, model, 10);
  args.insert(args.end(), {"--report", (dir / "train.jsonl").string()});
  REQUIRE(run(args).code == 0);

  // JSON-lines report with stable record types.
  std::ifstream report(dir / "train.jsonl");
  std::vector<nlohmann::json> records;
  for (std::string line; std::getline(report, line);) records.push_back(nlohmann::json::parse(line));
  REQUIRE(records.size() == 12);
  CHECK(records.front()["type"] == "config");
  CHECK(records.front()["config"]["ntree"] == 10);
  CHECK(records[1]["type"] == "tree");
  CHECK(records.back()["type"] == "summary");
  CHECK(records.back()["trees"] == 10);

  // Curve fan-out and mortality columns.
  const auto pred = dir / "pred";
  const Result p = run({"predict", "--model", model.string(), "--data", (dir / "test.csv").string(), "--out",
                        pred.string(), "--cif", "1", "--cif", "2", "--chf", "2", "--survival", "--mortality", "--tau",
                        "8", "--event", "1", "--event", "2", "--cores", "1"});
  REQUIRE(p.code == 0);
  for (const char* f : {"cif_1.txt", "cif_2.txt", "chf_2.txt", "survival.txt", "mortality.csv"}) {
    CHECK(fs::exists(pred / f));
  }
  const CsvTable mortality = read_csv(pred / "mortality.csv");
  CHECK(mortality.header == std::vector<std::string>{"row", "mortality_1", "mortality_2"});
  CHECK(mortality.rows.size() == 200);

  // Predictions match the library applied to the loaded model.
  const Forest forest = load_forest(model);
  const CovariateTable table = load_covariates_csv((dir / "test.csv").string(), forest.schema);
  const PredictionSet set = predict(forest, table, 0, 1);
  for (std::size_t i = 0; i < 200; i += 37) {
    CHECK(std::stod(*mortality.rows[i][1]) == doctest::Approx(extract_mortality(*set.rows[i], 1, 8.0)).epsilon(1e-15));
  }

  // Same predictions with more workers are byte-identical.
  const Result p4 = run({"predict", "--model", model.string(), "--data", (dir / "test.csv").string(), "--out",
                         (dir / "pred4").string(), "--cif", "1", "--cif", "2", "--chf", "2", "--survival",
                         "--mortality", "--tau", "8", "--cores", "4"});
  REQUIRE(p4.code == 0);
  for (const char* f : {"cif_1.txt", "cif_2.txt", "chf_2.txt", "survival.txt", "mortality.csv"}) {
    CHECK(slurp(pred / f) == slurp(dir / "pred4" / f));
  }

  const Result c = run({"evaluate", "--truth", (dir / "test.csv").string(), "--predictions",
                        (pred / "mortality.csv").string(), "--report", (dir / "eval.jsonl").string()});
  REQUIRE(c.code == 0);
  CHECK(c.out.find("event 1: concordance error") != std::string::npos);
  std::ifstream eval(dir / "eval.jsonl");
  nlohmann::json last;
  for (std::string line; std::getline(eval, line);) last = nlohmann::json::parse(line);
  CHECK(last["type"] == "summary");
  CHECK(last["concordance_error"]["1"].get<double>() < 0.5);

  const Result e = run({"evaluate", "--mode", "cif-error", "--truth", (dir / "test.regions.csv").string(),
                        "--predictions", pred.string()});
  REQUIRE(e.code == 0);
  CHECK(e.out.find("overall cif error") != std::string::npos);

  // OOB against the training data works; against other data it is a usage error.
  CHECK(run({"predict", "--model", model.string(), "--data", data.string(), "--out", (dir / "oob").string(), "--oob"})
            .code == 0);
  CHECK(run({"predict", "--model", model.string(), "--data", (dir / "test.csv").string(), "--out",
             (dir / "oob2").string(), "--oob"})
            .code == 1);
  CHECK(run({"predict", "--model", model.string(), "--data", data.string(), "--out", pred.string(), "--cif", "3"})
            .code == 1);
  CHECK(run({"predict", "--model", (dir / "nomodel").string(), "--data", data.string(), "--out", pred.string()})
            .code == 3);
  CHECK_FALSE(has_partial_files(dir));
}

TEST_CASE("predict rejects data with a mismatched schema") {
  const auto dir = testing::scratch_dir("cli_schema");
  const auto data = simulated(dir, 120);
  REQUIRE(run(train_args(data, dir / "m", 2)).code == 0);
  write_text(dir / "other.csv", "a,b\n1,2\n");
  CHECK(run({"predict", "--model", (dir / "m").string(), "--data", (dir / "other.csv").string(), "--out",
             (dir / "p").string()})
            .code == 2);
}

TEST_CASE("evaluate: perfect truth, constant mortality, misalignment") {
  const auto dir = testing::scratch_dir("cli_evaluate");
  write_text(dir / "truth.csv", "time,status\n1,1\n2,2\n3,0\n4,1\n");
  write_text(dir / "constant.csv", "row,mortality_1,mortality_2\n0,0.3,0.1\n1,0.3,0.1\n2,0.3,0.1\n3,0.3,0.1\n");
  const Result c = run({"evaluate", "--truth", (dir / "truth.csv").string(), "--predictions",
                        (dir / "constant.csv").string()});
  REQUIRE(c.code == 0);
  CHECK(c.out.find("event 1: concordance error 0.5") != std::string::npos);
  CHECK(c.out.find("event 2: concordance error 0.5") != std::string::npos);

  write_text(dir / "short.csv", "row,mortality_1\n0,0.3\n");
  CHECK(run({"evaluate", "--truth", (dir / "truth.csv").string(), "--predictions", (dir / "short.csv").string()})
            .code == 2);
  CHECK(run({"evaluate", "--truth", (dir / "truth.csv").string(), "--predictions", (dir / "constant.csv").string(),
             "--mode", "other"})
            .code == 1);

  // Curve files holding the exact truth (step approximations on a fine grid) give an error near zero.
  REQUIRE(run({"simulate", "--n", "3", "--seed", "1", "--out", (dir / "sim.csv").string()}).code == 0);
  const auto regions = read_region_sidecar(dir / "sim.regions.csv");
  fs::create_directories(dir / "perfect");
  for (int j = 1; j <= 2; ++j) {
    std::ofstream out(dir / "perfect" / ("cif_" + std::to_string(j) + ".txt"));
    for (std::size_t i = 0; i < regions.size(); ++i) {
      const EvaluableCurve truth = true_cif(simulation_regions()[regions[i] - 1], j);
      out << "# row " << i << "\n0 0\n";
      for (double t = 1e-4; t <= 20.0; t += 1e-4) out << format_double(t) << ' ' << format_double(truth(t)) << '\n';
    }
  }
  const Result e = run({"evaluate", "--mode", "cif-error", "--truth", (dir / "sim.regions.csv").string(),
                        "--predictions", (dir / "perfect").string(), "--report", (dir / "cif.jsonl").string()});
  REQUIRE(e.code == 0);
  std::ifstream report(dir / "cif.jsonl");
  nlohmann::json last;
  for (std::string line; std::getline(report, line);) last = nlohmann::json::parse(line);
  CHECK(last["cif_error"].get<double>() < 1e-4);
}

TEST_CASE("partial files are removed when a writer is abandoned") {
  const auto dir = testing::scratch_dir("cli_partial");
  {
    cli::PartialFile f(dir / "out.txt");
    f.stream() << "half";
    CHECK(fs::exists(dir / "out.txt.partial"));
    CHECK_FALSE(fs::exists(dir / "out.txt"));
  }
  CHECK_FALSE(fs::exists(dir / "out.txt.partial"));
  cli::PartialFile g(dir / "done.txt");
  g.stream() << "all";
  g.commit();
  CHECK(slurp(dir / "done.txt") == "all");
  CHECK_FALSE(fs::exists(dir / "done.txt.partial"));
}

TEST_CASE("benchmark prints a timing row per size") {
  const Result b = run({"benchmark", "--sizes", "300,600", "--repeats", "2", "--ntree", "3", "--nsplit", "10",
                        "--node-size", "50", "--cores", "1"});
  REQUIRE(b.code == 0);
  CHECK(b.out.find("median") != std::string::npos);
  CHECK(b.out.find("    300 ") != std::string::npos);
  CHECK(b.out.find("    600 ") != std::string::npos);
  CHECK(run({"benchmark", "--repeats", "0"}).code == 1);
}
