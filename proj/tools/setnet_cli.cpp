// setnet: train single sparse MLPs, run activation x sparsity sweeps and
// export chart data from finished sweeps.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "setnet/data.hpp"
#include "setnet/sweep.hpp"

namespace {

using namespace setnet;

struct TrainArgs {
  std::string activation = "relu";
  double sparsity = 0.885;
  std::size_t epochs = 500;
  std::string dataset;
  std::uint64_t seed = 0;
  std::string out = "run";
  std::vector<std::size_t> hidden{4000, 1000, 4000};
  TrainConfig train;
  bool no_evolution = false;
  bool no_wall_time = false;
  std::string checkpoint;
  std::size_t train_limit = 0;
  std::size_t val_limit = 0;
};

CifarLoadOptions cifar_options(std::size_t train_limit, std::size_t val_limit) {
  CifarLoadOptions opts;
  if (train_limit) opts.max_train = train_limit;
  if (val_limit) opts.max_val = val_limit;
  return opts;
}

int run_train(const TrainArgs& a) {
  const auto data = load_dataset(a.dataset, cifar_options(a.train_limit, a.val_limit));
  RunSpec spec;
  spec.coords = {parse_activation(a.activation), SparsityLevel(a.sparsity), 0};
  spec.master_seed = a.seed;
  spec.hidden_dims = a.hidden;
  spec.train = a.train;
  spec.train.epochs = a.epochs;
  spec.train.evolution_enabled = !a.no_evolution;
  spec.dataset = a.dataset;
  spec.out_dir = a.out;
  spec.record_wall_time = !a.no_wall_time;
  if (!a.checkpoint.empty()) spec.checkpoint = a.checkpoint;
  spec.train.validate();

  fmt::print(stderr, "training {} at sparsity {} on {} train / {} val samples\n", a.activation,
             spec.coords.sparsity.label(), data.train.size(), data.val.size());
  const auto result = execute_run(spec, data);
  for (const auto& r : result.records) {
    fmt::print("epoch {:>4}  train_acc {:.4f}  val_acc {:.4f}  train_loss {:.4f}  val_loss {:.4f}  o {:+.4f}\n",
               r.epoch, r.train_accuracy, r.val_accuracy, r.train_loss, r.val_loss, r.overfit);
  }
  if (result.diverged) {
    fmt::print(stderr, "run diverged: {}\n", result.divergence_message);
    return 2;
  }
  return 0;
}

int run_sweep_cmd(const std::string& grid_path, std::optional<std::size_t> workers, bool resume,
                  const std::string& out, std::size_t train_limit, std::size_t val_limit) {
  std::ifstream in(grid_path);
  if (!in) throw std::runtime_error("cannot read grid config '" + grid_path + "'");
  auto grid = grid_from_json(nlohmann::json::parse(in));
  if (workers) grid.worker_count = *workers;
  if (!out.empty()) grid.output_root = out;
  grid.validate();
  const auto data = load_dataset(grid.dataset, cifar_options(train_limit, val_limit));

  SweepOptions options;
  options.resume = resume;
  options.on_run_finished = [](const RunResult& r) {
    fmt::print(stderr, "finished {} @ {} (seed {}): val_acc {:.4f}{}\n",
               to_string(r.coords.activation), r.coords.sparsity.label(), r.coords.seed_index,
               r.final_val_accuracy, r.diverged ? " [diverged]" : "");
  };
  const auto outcome = run_sweep(grid, data, options);
  fmt::print("executed {} run(s), skipped {} completed run(s)\n", outcome.executed, outcome.skipped);
  fmt::print("{}", format_sweep_table(sparsity_sweep_table(outcome.results, grid.epochs)));
  return 0;
}

int run_report(const std::string& root, const std::string& kind, const std::string& out) {
  const auto results = load_results(root);
  if (results.empty()) throw std::runtime_error("no runs found under '" + root + "'");
  emit_chart_data(results, parse_chart_kind(kind), out);
  if (parse_chart_kind(kind) == ChartKind::SparsitySweep) {
    std::size_t at = 0;
    for (const auto& r : results) {
      if (!r.records.empty()) at = std::max(at, r.records.back().epoch);
    }
    fmt::print("{}", format_sweep_table(sparsity_sweep_table(results, at)));
  }
  fmt::print(stderr, "wrote {} ({} runs)\n", out, results.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse evolutionary training of MLPs with activation/sparsity sweeps"};
  app.require_subcommand(1);

  TrainArgs t;
  auto* train_cmd = app.add_subcommand("train", "Train one network and record per-epoch metrics");
  train_cmd->add_option("--activation", t.activation, "relu|sigmoid|tanh|softplus|softsign|selu|srelu")
      ->capture_default_str();
  train_cmd->add_option("--sparsity", t.sparsity, "Fraction of absent hidden connections, 0 = dense")
      ->capture_default_str();
  train_cmd->add_option("--epochs", t.epochs)->capture_default_str();
  train_cmd->add_option("--dataset", t.dataset, "cifar10:<dir> or synthetic:<key=value,...>")->required();
  train_cmd->add_option("--seed", t.seed)->capture_default_str();
  train_cmd->add_option("--out", t.out, "Run directory")->capture_default_str();
  train_cmd->add_option("--hidden", t.hidden, "Hidden layer sizes")->capture_default_str();
  train_cmd->add_option("--lr", t.train.learning_rate)->capture_default_str();
  train_cmd->add_option("--momentum", t.train.momentum)->capture_default_str();
  train_cmd->add_option("--zeta", t.train.zeta)->capture_default_str();
  train_cmd->add_option("--batch-size", t.train.batch_size)->capture_default_str();
  train_cmd->add_option("--dropout", t.train.dropout_rate)->capture_default_str();
  train_cmd->add_flag("--no-evolution", t.no_evolution, "Keep the initial sparse topology");
  train_cmd->add_flag("--no-wall-time", t.no_wall_time, "Write 0 in wall_time_s for byte-stable CSVs");
  train_cmd->add_option("--checkpoint", t.checkpoint, "Write the final network here");
  train_cmd->add_option("--train-limit", t.train_limit, "Use only the first N CIFAR train samples");
  train_cmd->add_option("--val-limit", t.val_limit, "Use only the first N CIFAR test samples");

  std::string grid_path, sweep_out;
  std::optional<std::size_t> workers;
  bool resume = false;
  std::size_t sweep_train_limit = 0, sweep_val_limit = 0;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run an activation x sparsity grid");
  sweep_cmd->add_option("--grid-config", grid_path, "JSON grid description")->required();
  sweep_cmd->add_option("--workers", workers, "Concurrent runs");
  sweep_cmd->add_flag("--resume", resume, "Skip runs that already have a completion marker");
  sweep_cmd->add_option("--out", sweep_out, "Override the grid's output_root");
  sweep_cmd->add_option("--train-limit", sweep_train_limit);
  sweep_cmd->add_option("--val-limit", sweep_val_limit);

  std::string results_root, kind, report_out;
  auto* report_cmd = app.add_subcommand("report", "Export chart data from a results tree");
  report_cmd->add_option("--results", results_root)->required();
  report_cmd->add_option("--kind", kind, "performance|sparsity-sweep|overfitting")->required();
  report_cmd->add_option("--out", report_out, "CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return run_train(t);
    if (*sweep_cmd) {
      return run_sweep_cmd(grid_path, workers, resume, sweep_out, sweep_train_limit, sweep_val_limit);
    }
    if (*report_cmd) return run_report(results_root, kind, report_out);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
