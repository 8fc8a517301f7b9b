#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "setnet/activations.hpp"
#include "setnet/data.hpp"
#include "setnet/set_evolution.hpp"
#include "setnet/trainer.hpp"

namespace setnet {

/// Activation x sparsity x seed experiment matrix.
struct SweepGrid {
  std::vector<ActivationKind> activations{kAllActivations.begin(), kAllActivations.end()};
  std::vector<SparsityLevel> sparsity_levels = default_sparsity_levels();
  std::size_t epochs = 500;
  std::size_t seeds = 1;
  std::uint64_t master_seed = 0;
  std::filesystem::path output_root = "results";
  std::size_t worker_count = 1;
  std::vector<std::size_t> hidden_dims{4000, 1000, 4000};
  TrainConfig train;  ///< epochs, seed and evolution flag are set per run
  std::string dataset = "cifar10:data/cifar-10-batches-bin";
  bool record_wall_time = true;

  void validate() const;
};

/// Reads a grid config; unspecified fields keep their defaults.
SweepGrid grid_from_json(const nlohmann::json& j);

struct RunCoordinates {
  ActivationKind activation = ActivationKind::ReLU;
  SparsityLevel sparsity{0.0};
  std::size_t seed_index = 0;
};

struct RunResult {
  RunCoordinates coords;
  std::vector<EpochRecord> records;
  double final_train_accuracy = 0.0;
  double final_val_accuracy = 0.0;
  std::string config_hash;
  bool diverged = false;
  std::string divergence_message;
};

/// Seed of one grid cell; independent of worker scheduling.
std::uint64_t derive_run_seed(std::uint64_t master_seed, ActivationKind activation,
                              SparsityLevel sparsity, std::size_t seed_index);

/// <root>/<activation>/<sparsity label>, plus /seed-<k> when seeds > 1.
std::filesystem::path run_directory(const std::filesystem::path& root, std::size_t seed_count,
                                    const RunCoordinates& coords);

/// Everything needed to execute and record one training run.
struct RunSpec {
  RunCoordinates coords;
  std::uint64_t master_seed = 0;
  std::vector<std::size_t> hidden_dims{4000, 1000, 4000};
  TrainConfig train;
  std::string dataset;
  std::filesystem::path out_dir;
  bool record_wall_time = true;
  std::optional<std::filesystem::path> checkpoint;  ///< final network, if set
};

RunSpec run_spec_for(const SweepGrid& grid, const RunCoordinates& coords);

/// config.json content for a run (content_hash included).
nlohmann::json run_config_json(const RunSpec& spec, const Dataset& data);

/// Trains one network, writing metrics.csv row by row, config.json up front
/// and the completion marker last. Divergence truncates the series and is
/// recorded instead of thrown.
RunResult execute_run(const RunSpec& spec, const Dataset& data);

inline constexpr const char* kCompletionMarker = "DONE";
bool run_completed(const std::filesystem::path& run_dir);

struct SweepOptions {
  bool resume = false;
  std::function<void(const RunResult&)> on_run_finished;
};

struct SweepOutcome {
  std::vector<RunResult> results;  ///< grid order
  std::size_t executed = 0;
  std::size_t skipped = 0;
};

/// Runs every (activation, sparsity, seed) cell not already completed (with
/// resume) on up to worker_count threads.
SweepOutcome run_sweep(const SweepGrid& grid, const Dataset& data, const SweepOptions& options = {});

// metrics.csv: epoch,train_acc,val_acc,train_loss,val_loss,overfit,wall_time_s
inline constexpr const char* kMetricsHeader =
    "epoch,train_acc,val_acc,train_loss,val_loss,overfit,wall_time_s";
std::string format_metrics_row(const EpochRecord& rec);
/// Validates the header and overfit = train_acc - val_acc on every row.
std::vector<EpochRecord> read_metrics_csv(const std::filesystem::path& path);

/// Loads every run directory (config.json + metrics.csv) below `root`.
std::vector<RunResult> load_results(const std::filesystem::path& root);

/// (epoch, train_accuracy - val_accuracy) for every record.
std::vector<std::pair<std::size_t, double>> overfitting_series(const RunResult& result);

struct SweepTable {
  std::vector<ActivationKind> activations;      ///< canonical order
  std::vector<SparsityLevel> levels;            ///< sparsest first, dense last
  std::vector<std::vector<std::optional<double>>> val_accuracy;  ///< [activation][level]
  std::vector<std::vector<std::optional<double>>> train_accuracy;
  std::vector<std::optional<SparsityLevel>> optimal;  ///< argmax, ties to higher sparsity
};

/// Validation accuracy at `at_epoch`, averaged over seeds. Runs without that
/// epoch leave their cell absent.
SweepTable sparsity_sweep_table(const std::vector<RunResult>& results, std::size_t at_epoch);

/// Recomputes the optimal-sparsity column from the accuracy cells.
void fill_optimal(SweepTable& table);

/// Plain-text table with accuracies in percent and an "optimal" column.
std::string format_sweep_table(const SweepTable& table);

enum class ChartKind { Performance, SparsitySweep, Overfitting };
ChartKind parse_chart_kind(const std::string& name);

// Chart CSV columns:
//   performance:    activation,sparsity,seed,epoch,train_acc,val_acc
//   sparsity_sweep: activation,sparsity,epoch,val_acc,train_acc
//   overfitting:    activation,sparsity,seed,epoch,overfit
// sparsity is the fraction (0 for dense); absent sweep cells are empty.
std::string chart_header(ChartKind kind);
void emit_chart_data(const std::vector<RunResult>& results, ChartKind kind,
                     const std::filesystem::path& out_path);

}  // namespace setnet
