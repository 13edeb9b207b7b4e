#include <memory>

#include "CLI11.hpp"
#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "rcrf/cli.hpp"
#include "rcrf/error.hpp"

namespace rcrf::cli {

int exit_code(const std::exception& e) {
  if (dynamic_cast<const SchemaError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const DataError*>(&e)) {
    return kExitData;
  }
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  return kExitUsage;
}

namespace {

void add_columns(CLI::App* sub, DataColumns& c) {
  sub->add_option("--time", c.time, "Observed time column")->capture_default_str();
  sub->add_option("--event", c.event, "Event code column (0 = censored)")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Competing-risks random forests: train, predict, evaluate, simulate and benchmark.", "rcrf"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_config("--config", "", "key = value file supplying any flag of the subcommand");

  TrainOptions train;
  auto* t = app.add_subcommand("train", "Grow a forest and save it to a model directory");
  t->add_option("--data", train.data, "Training CSV (optionally .gz)")->required();
  add_columns(t, train.columns);
  t->add_option("--censor-time", train.columns.censor_time, "Censor time column (needed by the gray splitter)");
  t->add_option("--features", train.features, "Covariate columns to use (default: all)")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  t->add_option("--column-kind", train.column_kinds, "Force a column kind, name=numeric|categorical|boolean")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  t->add_option("--ntree", train.ntree)->capture_default_str();
  t->add_option("--mtry", train.mtry, "Covariates tried per split (default ceil(sqrt(p)))");
  t->add_option("--node-size", train.node_size)->capture_default_str();
  t->add_option("--nsplit", train.nsplit, "Random thresholds per covariate, 0 = all")->capture_default_str();
  t->add_option("--max-depth", train.max_depth)->capture_default_str();
  t->add_option("--split-finder", train.split_finder, "logrank or gray")->capture_default_str();
  t->add_option("--focus", train.focus, "Events combined in the split score (default: all)")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  t->add_option("--seed", train.seed)->capture_default_str();
  t->add_option("--cores", train.cores, "Worker threads, 0 = all")->envname("RCRF_CORES");
  t->add_option("--out", train.out, "Model directory; an interrupted run resumes here")->required();
  t->add_option("--report", train.report, "Write a JSON-lines report");
  t->add_flag("--quiet", train.quiet, "Suppress per-tree progress");

  PredictOptions predict;
  auto* p = app.add_subcommand("predict", "Predict curves and mortalities from a saved model");
  p->add_option("--model", predict.model, "Model directory")->required();
  p->add_option("--data", predict.data, "CSV with the model's covariates")->required();
  p->add_option("--out", predict.out, "Output directory")->required();
  p->add_option("--cif", predict.cif, "Write cif_<j>.txt")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  p->add_option("--chf", predict.chf, "Write chf_<j>.txt")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  p->add_flag("--survival", predict.survival, "Write survival.txt");
  p->add_flag("--mortality", predict.mortality, "Write mortality.csv (the default output)");
  p->add_option("--tau", predict.tau, "Mortality horizon (default: largest training event time)");
  p->add_option("--event", predict.events, "Mortality events (default: all)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  p->add_flag("--oob", predict.oob, "Out-of-bag predictions; --data must be the training data");
  p->add_option("--seed", predict.seed, "Seed for routing missing values")->capture_default_str();
  p->add_option("--cores", predict.cores, "Worker threads, 0 = all")->envname("RCRF_CORES");
  p->add_option("--report", predict.report, "Write a JSON-lines report");

  EvaluateOptions evaluate;
  auto* e = app.add_subcommand("evaluate", "Score predictions against the truth");
  e->add_option("--truth", evaluate.truth, "Data CSV (concordance) or region sidecar (cif-error)")->required();
  e->add_option("--predictions", evaluate.predictions, "mortality.csv (concordance) or prediction directory (cif-error)")
      ->required();
  e->add_option("--mode", evaluate.mode, "concordance or cif-error")->capture_default_str();
  add_columns(e, evaluate.columns);
  e->add_option("--tau", evaluate.tau, "CIF error horizon (default 20)");
  e->add_option("--report", evaluate.report, "Write a JSON-lines report");

  SimulateOptions simulate;
  auto* s = app.add_subcommand("simulate", "Generate a simulated competing-risks dataset");
  s->add_option("--n", simulate.n, "Rows")->capture_default_str();
  s->add_option("--seed", simulate.seed)->capture_default_str();
  s->add_option("--out", simulate.out, "Data CSV")->required();
  s->add_option("--truth", simulate.truth, "Region sidecar (default <out stem>.regions.csv)");

  BenchmarkOptions benchmark;
  auto* b = app.add_subcommand("benchmark", "Time train + predict on simulated data");
  b->add_option("--sizes", benchmark.sizes)->delimiter(',')->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  b->add_option("--repeats", benchmark.repeats)->capture_default_str();
  b->add_option("--ntree", benchmark.ntree)->capture_default_str();
  b->add_option("--nsplit", benchmark.nsplit)->capture_default_str();
  b->add_option("--node-size", benchmark.node_size)->capture_default_str();
  b->add_option("--mtry", benchmark.mtry)->capture_default_str();
  b->add_option("--seed", benchmark.seed)->capture_default_str();
  b->add_option("--cores", benchmark.cores, "Worker threads, 0 = all")->envname("RCRF_CORES");
  b->add_option("--report", benchmark.report, "Write a JSON-lines report");

  std::vector<std::string> args = raw_args;
  const std::string subcommand =
      normalize_arguments(args, {"train", "predict", "evaluate", "simulate", "benchmark"});
  app.config_formatter(std::make_shared<SubcommandConfig>(subcommand));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& error) {
    if (error.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << error.what() << "\nrun with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (*t) cmd_train(train, out);
    if (*p) cmd_predict(predict, out);
    if (*e) cmd_evaluate(evaluate, out);
    if (*s) cmd_simulate(simulate, out);
    if (*b) cmd_benchmark(benchmark, out);
  } catch (const std::exception& error) {
    err << "error: " << error.what() << '\n';
    return exit_code(error);
  }
  return kExitOk;
}

}  // namespace rcrf::cli
