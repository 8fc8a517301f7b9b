#include "setnet/sweep.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "setnet/json_io.hpp"
#include "setnet/seeding.hpp"

namespace setnet {

namespace fs = std::filesystem;
using nlohmann::json;

void SweepGrid::validate() const {
  if (activations.empty()) throw std::invalid_argument("sweep grid has no activations");
  if (sparsity_levels.empty()) throw std::invalid_argument("sweep grid has no sparsity levels");
  if (seeds == 0) throw std::invalid_argument("sweep grid needs at least one seed");
  if (epochs == 0) throw std::invalid_argument("sweep grid needs at least one epoch");
  if (worker_count == 0) throw std::invalid_argument("worker count must be at least 1");
  std::set<ActivationKind> acts(activations.begin(), activations.end());
  if (acts.size() != activations.size()) throw std::invalid_argument("duplicate activation in grid");
  std::set<std::string> labels;
  for (const auto& l : sparsity_levels) {
    if (!labels.insert(l.label()).second) {
      throw std::invalid_argument("duplicate sparsity level " + l.label());
    }
  }
  train.validate();
}

SweepGrid grid_from_json(const json& j) {
  SweepGrid g;
  if (j.contains("activations")) {
    g.activations.clear();
    for (const auto& a : j.at("activations")) g.activations.push_back(parse_activation(a.get<std::string>()));
  }
  if (j.contains("sparsity_levels")) {
    g.sparsity_levels.clear();
    for (const auto& s : j.at("sparsity_levels")) {
      if (s.is_string() && s.get<std::string>() == "dense") g.sparsity_levels.emplace_back(0.0);
      else g.sparsity_levels.emplace_back(s.get<double>());
    }
  }
  g.epochs = j.value("epochs", g.epochs);
  g.seeds = j.value("seeds", g.seeds);
  g.master_seed = j.value("master_seed", g.master_seed);
  g.output_root = j.value("output_root", g.output_root.string());
  g.worker_count = j.value("workers", g.worker_count);
  g.hidden_dims = j.value("hidden_dims", g.hidden_dims);
  if (j.contains("train")) g.train = train_config_from_json(j.at("train"));
  g.dataset = j.value("dataset", g.dataset);
  g.record_wall_time = j.value("record_wall_time", g.record_wall_time);
  return g;
}

std::uint64_t derive_run_seed(std::uint64_t master_seed, ActivationKind activation,
                              SparsityLevel sparsity, std::size_t seed_index) {
  const auto micro = static_cast<std::uint64_t>(std::llround(sparsity.sparsity() * 1e6));
  std::uint64_t s = mix_seed(master_seed, to_string(activation));
  s = mix_seed(s, micro);
  return mix_seed(s, static_cast<std::uint64_t>(seed_index));
}

fs::path run_directory(const fs::path& root, std::size_t seed_count, const RunCoordinates& c) {
  auto dir = root / std::string(to_string(c.activation)) / c.sparsity.label();
  if (seed_count > 1) dir /= "seed-" + std::to_string(c.seed_index);
  return dir;
}

RunSpec run_spec_for(const SweepGrid& grid, const RunCoordinates& coords) {
  RunSpec spec;
  spec.coords = coords;
  spec.master_seed = grid.master_seed;
  spec.hidden_dims = grid.hidden_dims;
  spec.train = grid.train;
  spec.train.epochs = grid.epochs;
  if (coords.sparsity.is_dense()) spec.train.evolution_enabled = false;
  spec.dataset = grid.dataset;
  spec.out_dir = run_directory(grid.output_root, grid.seeds, coords);
  spec.record_wall_time = grid.record_wall_time;
  return spec;
}

namespace {

struct ResolvedRun {
  TrainConfig train;
  NetworkConfig network;
};

ResolvedRun resolve(const RunSpec& spec, const Dataset& data) {
  ResolvedRun r;
  r.train = spec.train;
  r.train.seed = derive_run_seed(spec.master_seed, spec.coords.activation, spec.coords.sparsity,
                                 spec.coords.seed_index);
  if (spec.coords.sparsity.is_dense()) r.train.evolution_enabled = false;
  r.network.layer_dims.clear();
  r.network.layer_dims.push_back(data.feature_count);
  r.network.layer_dims.insert(r.network.layer_dims.end(), spec.hidden_dims.begin(),
                              spec.hidden_dims.end());
  r.network.layer_dims.push_back(data.class_count);
  r.network.activation = spec.coords.activation;
  r.network.sparsity = spec.coords.sparsity.sparsity();
  r.network.dropout_rate = r.train.dropout_rate;
  r.network.seed = r.train.seed;
  return r;
}

std::string num(double v) { return fmt::format("{}", v); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace

json run_config_json(const RunSpec& spec, const Dataset& data) {
  const auto r = resolve(spec, data);
  json eps = json::array();
  json counts = json::array();
  const auto& dims = r.network.layer_dims;
  for (std::size_t l = 0; l + 2 < dims.size(); ++l) {
    eps.push_back(epsilon_from_sparsity(spec.coords.sparsity, dims[l], dims[l + 1]));
    counts.push_back(expected_param_count(spec.coords.sparsity, dims[l], dims[l + 1]));
  }
  json cfg = {
      {"activation", std::string(to_string(spec.coords.activation))},
      {"sparsity", spec.coords.sparsity.sparsity()},
      {"sparsity_label", spec.coords.sparsity.label()},
      {"seed_index", spec.coords.seed_index},
      {"master_seed", spec.master_seed},
      {"derived_seed", r.train.seed},
      {"network", to_json(r.network)},
      {"train", to_json(r.train)},
      {"epsilon_per_layer", eps},
      {"params_per_layer", counts},
      {"dataset", spec.dataset},
      {"normalization", data.normalization.scheme},
      {"record_wall_time", spec.record_wall_time},
  };
  cfg["content_hash"] = git_blob_hash(cfg.dump());
  return cfg;
}

bool run_completed(const fs::path& run_dir) { return fs::exists(run_dir / kCompletionMarker); }

std::string format_metrics_row(const EpochRecord& r) {
  return fmt::format("{},{},{},{},{},{},{}", r.epoch, num(r.train_accuracy), num(r.val_accuracy),
                     num(r.train_loss), num(r.val_loss), num(r.overfit), num(r.wall_time));
}

RunResult execute_run(const RunSpec& spec, const Dataset& data) {
  const auto r = resolve(spec, data);
  fs::create_directories(spec.out_dir);
  fs::remove(spec.out_dir / kCompletionMarker);

  const auto config = run_config_json(spec, data);
  write_text(spec.out_dir / "config.json", config.dump(2) + "\n");

  RunResult result;
  result.coords = spec.coords;
  result.config_hash = config.at("content_hash").get<std::string>();

  std::ofstream metrics(spec.out_dir / "metrics.csv", std::ios::binary | std::ios::trunc);
  if (!metrics) throw std::runtime_error("cannot write metrics in '" + spec.out_dir.string() + "'");
  metrics << kMetricsHeader << '\n';

  auto streams = TrainingStreams::from_seed(r.train.seed, r.network.layer_dims.size() - 2);
  auto net = make_network(r.network, r.train, streams);
  try {
    train(net, data, r.train, streams, [&](const EpochRecord& rec) {
      EpochRecord row = rec;
      if (!spec.record_wall_time) row.wall_time = 0.0;
      metrics << format_metrics_row(row) << '\n';
      metrics.flush();
      result.records.push_back(row);
    });
  } catch (const DivergenceError& e) {
    result.diverged = true;
    result.divergence_message = e.what();
  }
  metrics.close();
  if (!result.records.empty()) {
    result.final_train_accuracy = result.records.back().train_accuracy;
    result.final_val_accuracy = result.records.back().val_accuracy;
  }
  if (spec.checkpoint) {
    std::ofstream ck(*spec.checkpoint, std::ios::binary | std::ios::trunc);
    if (!ck) throw std::runtime_error("cannot write checkpoint '" + spec.checkpoint->string() + "'");
    save_checkpoint(ck, net);
  }
  write_text(spec.out_dir / kCompletionMarker,
             result.diverged ? "diverged: " + result.divergence_message + "\n" : "complete\n");
  return result;
}

namespace {

RunResult load_run(const fs::path& dir) {
  std::ifstream in(dir / "config.json");
  if (!in) throw std::runtime_error("missing config.json in '" + dir.string() + "'");
  const auto cfg = json::parse(in);
  RunResult r;
  r.coords.activation = parse_activation(cfg.at("activation").get<std::string>());
  r.coords.sparsity = SparsityLevel(cfg.at("sparsity").get<double>());
  r.coords.seed_index = cfg.value("seed_index", std::size_t{0});
  r.config_hash = cfg.value("content_hash", std::string());
  r.records = read_metrics_csv(dir / "metrics.csv");
  if (!r.records.empty()) {
    r.final_train_accuracy = r.records.back().train_accuracy;
    r.final_val_accuracy = r.records.back().val_accuracy;
  }
  std::ifstream marker(dir / kCompletionMarker);
  std::string status;
  std::getline(marker, status);
  if (status.rfind("diverged", 0) == 0) {
    r.diverged = true;
    r.divergence_message = status;
  }
  return r;
}

}  // namespace

SweepOutcome run_sweep(const SweepGrid& grid, const Dataset& data, const SweepOptions& options) {
  grid.validate();
  fs::create_directories(grid.output_root);
  {
    const auto probe = grid.output_root / ".write-probe";
    std::ofstream test(probe);
    if (!test) throw std::runtime_error("output root '" + grid.output_root.string() + "' is not writable");
    test.close();
    fs::remove(probe);
  }

  std::vector<RunCoordinates> cells;
  for (auto act : grid.activations) {
    for (const auto& level : grid.sparsity_levels) {
      for (std::size_t s = 0; s < grid.seeds; ++s) cells.push_back({act, level, s});
    }
  }

  SweepOutcome outcome;
  outcome.results.resize(cells.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto dir = run_directory(grid.output_root, grid.seeds, cells[i]);
    if (options.resume && run_completed(dir)) {
      outcome.results[i] = load_run(dir);
      ++outcome.skipped;
    } else {
      pending.push_back(i);
    }
  }

  std::atomic<std::size_t> next{0};
  std::mutex report_mutex;
  std::exception_ptr failure;
  const auto worker = [&] {
    for (std::size_t p = next++; p < pending.size(); p = next++) {
      try {
        const auto idx = pending[p];
        outcome.results[idx] = execute_run(run_spec_for(grid, cells[idx]), data);
        std::lock_guard lock(report_mutex);
        if (options.on_run_finished) options.on_run_finished(outcome.results[idx]);
      } catch (...) {
        std::lock_guard lock(report_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(grid.worker_count, std::max<std::size_t>(1, pending.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  outcome.executed = pending.size();
  return outcome;
}

std::vector<EpochRecord> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw std::runtime_error("'" + path.string() + "' does not start with the metrics header");
  }
  std::vector<EpochRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) {
      throw std::runtime_error("'" + path.string() + "': malformed row '" + line + "'");
    }
    EpochRecord r;
    r.epoch = std::stoul(cells[0]);
    r.train_accuracy = std::strtod(cells[1].c_str(), nullptr);
    r.val_accuracy = std::strtod(cells[2].c_str(), nullptr);
    r.train_loss = std::strtod(cells[3].c_str(), nullptr);
    r.val_loss = std::strtod(cells[4].c_str(), nullptr);
    r.overfit = std::strtod(cells[5].c_str(), nullptr);
    r.wall_time = std::strtod(cells[6].c_str(), nullptr);
    if (r.overfit != r.train_accuracy - r.val_accuracy) {
      throw std::runtime_error("'" + path.string() + "' epoch " + cells[0] +
                               ": overfit differs from train_acc - val_acc");
    }
    if (r.train_accuracy < 0 || r.train_accuracy > 1 || r.val_accuracy < 0 || r.val_accuracy > 1) {
      throw std::runtime_error("'" + path.string() + "' epoch " + cells[0] +
                               ": accuracy outside [0, 1]");
    }
    out.push_back(r);
  }
  return out;
}

std::vector<RunResult> load_results(const fs::path& root) {
  if (!fs::is_directory(root)) throw std::runtime_error("'" + root.string() + "' is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().filename() == "metrics.csv" &&
        fs::exists(entry.path().parent_path() / "config.json")) {
      dirs.push_back(entry.path().parent_path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<RunResult> out;
  out.reserve(dirs.size());
  for (const auto& d : dirs) out.push_back(load_run(d));
  return out;
}

std::vector<std::pair<std::size_t, double>> overfitting_series(const RunResult& result) {
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(result.records.size());
  for (const auto& r : result.records) out.emplace_back(r.epoch, r.train_accuracy - r.val_accuracy);
  return out;
}

namespace {

std::size_t activation_rank(ActivationKind a) {
  return static_cast<std::size_t>(std::find(kAllActivations.begin(), kAllActivations.end(), a) -
                                  kAllActivations.begin());
}

// Sparsest first; dense (0) naturally last.
bool level_before(const SparsityLevel& a, const SparsityLevel& b) {
  return a.sparsity() > b.sparsity();
}

std::vector<const RunResult*> canonical_order(const std::vector<RunResult>& results) {
  std::vector<const RunResult*> out;
  for (const auto& r : results) out.push_back(&r);
  std::sort(out.begin(), out.end(), [](const RunResult* a, const RunResult* b) {
    const auto ra = activation_rank(a->coords.activation);
    const auto rb = activation_rank(b->coords.activation);
    if (ra != rb) return ra < rb;
    if (a->coords.sparsity != b->coords.sparsity) return level_before(a->coords.sparsity, b->coords.sparsity);
    return a->coords.seed_index < b->coords.seed_index;
  });
  return out;
}

}  // namespace

void fill_optimal(SweepTable& table) {
  table.optimal.assign(table.activations.size(), std::nullopt);
  for (std::size_t a = 0; a < table.activations.size(); ++a) {
    std::optional<double> best;
    for (std::size_t l = 0; l < table.levels.size(); ++l) {
      const auto& cell = table.val_accuracy[a][l];
      if (!cell) continue;
      // Levels are sparsest first, so strict > keeps ties at the higher sparsity.
      if (!best || *cell > *best) {
        best = cell;
        table.optimal[a] = table.levels[l];
      }
    }
  }
}

SweepTable sparsity_sweep_table(const std::vector<RunResult>& results, std::size_t at_epoch) {
  SweepTable t;
  std::set<std::size_t> acts;
  for (const auto& r : results) {
    acts.insert(activation_rank(r.coords.activation));
    if (std::find(t.levels.begin(), t.levels.end(), r.coords.sparsity) == t.levels.end()) {
      t.levels.push_back(r.coords.sparsity);
    }
  }
  for (auto rank : acts) t.activations.push_back(kAllActivations[rank]);
  std::sort(t.levels.begin(), t.levels.end(), level_before);

  struct Acc { double val = 0, train = 0; std::size_t n = 0; };
  std::vector<std::vector<Acc>> acc(t.activations.size(), std::vector<Acc>(t.levels.size()));
  // Seeds are summed in canonical order so the mean is independent of completion order.
  for (const auto* r : canonical_order(results)) {
    const auto a = static_cast<std::size_t>(
        std::find(t.activations.begin(), t.activations.end(), r->coords.activation) - t.activations.begin());
    const auto l = static_cast<std::size_t>(
        std::find(t.levels.begin(), t.levels.end(), r->coords.sparsity) - t.levels.begin());
    const auto it = std::find_if(r->records.begin(), r->records.end(),
                                 [&](const EpochRecord& e) { return e.epoch == at_epoch; });
    if (it == r->records.end()) continue;
    acc[a][l].val += it->val_accuracy;
    acc[a][l].train += it->train_accuracy;
    ++acc[a][l].n;
  }
  t.val_accuracy.assign(t.activations.size(), std::vector<std::optional<double>>(t.levels.size()));
  t.train_accuracy = t.val_accuracy;
  for (std::size_t a = 0; a < t.activations.size(); ++a) {
    for (std::size_t l = 0; l < t.levels.size(); ++l) {
      const auto& c = acc[a][l];
      if (c.n == 0) continue;
      t.val_accuracy[a][l] = c.val / static_cast<double>(c.n);
      t.train_accuracy[a][l] = c.train / static_cast<double>(c.n);
    }
  }
  fill_optimal(t);
  return t;
}

std::string format_sweep_table(const SweepTable& table) {
  std::string out = fmt::format("{:<10}", "activation");
  for (const auto& l : table.levels) {
    out += fmt::format(" {:>8}", l.is_dense() ? std::string("dense") : l.label() + "%");
  }
  out += fmt::format(" {:>8}\n", "optimal");
  for (std::size_t a = 0; a < table.activations.size(); ++a) {
    out += fmt::format("{:<10}", to_string(table.activations[a]));
    for (const auto& cell : table.val_accuracy[a]) {
      out += cell ? fmt::format(" {:>8.2f}", *cell * 100.0) : fmt::format(" {:>8}", "-");
    }
    const auto& opt = table.optimal[a];
    out += fmt::format(" {:>8}\n", !opt ? std::string("-")
                                       : opt->is_dense() ? std::string("dense")
                                                         : opt->label() + "%");
  }
  return out;
}

ChartKind parse_chart_kind(const std::string& name) {
  if (name == "performance") return ChartKind::Performance;
  if (name == "sparsity-sweep" || name == "sparsity_sweep") return ChartKind::SparsitySweep;
  if (name == "overfitting") return ChartKind::Overfitting;
  throw std::invalid_argument("unknown chart kind '" + name +
                              "' (expected performance, sparsity-sweep or overfitting)");
}

std::string chart_header(ChartKind kind) {
  switch (kind) {
    case ChartKind::Performance: return "activation,sparsity,seed,epoch,train_acc,val_acc";
    case ChartKind::SparsitySweep: return "activation,sparsity,epoch,val_acc,train_acc";
    case ChartKind::Overfitting: return "activation,sparsity,seed,epoch,overfit";
  }
  return {};
}

void emit_chart_data(const std::vector<RunResult>& results, ChartKind kind, const fs::path& out_path) {
  if (results.empty()) throw std::invalid_argument("emit_chart_data: no results");
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  std::string text = chart_header(kind) + "\n";
  if (kind == ChartKind::SparsitySweep) {
    std::size_t at_epoch = 0;
    for (const auto& r : results) {
      if (!r.records.empty()) at_epoch = std::max(at_epoch, r.records.back().epoch);
    }
    const auto table = sparsity_sweep_table(results, at_epoch);
    for (std::size_t a = 0; a < table.activations.size(); ++a) {
      for (std::size_t l = 0; l < table.levels.size(); ++l) {
        const auto& v = table.val_accuracy[a][l];
        const auto& t = table.train_accuracy[a][l];
        text += fmt::format("{},{},{},{},{}\n", to_string(table.activations[a]),
                            num(table.levels[l].sparsity()), at_epoch, v ? num(*v) : "",
                            t ? num(*t) : "");
      }
    }
  } else {
    for (const auto* r : canonical_order(results)) {
      const auto act = to_string(r->coords.activation);
      const auto sp = num(r->coords.sparsity.sparsity());
      for (const auto& e : r->records) {
        if (kind == ChartKind::Performance) {
          text += fmt::format("{},{},{},{},{},{}\n", act, sp, r->coords.seed_index, e.epoch,
                              num(e.train_accuracy), num(e.val_accuracy));
        } else {
          text += fmt::format("{},{},{},{},{}\n", act, sp, r->coords.seed_index, e.epoch,
                              num(e.train_accuracy - e.val_accuracy));
        }
      }
    }
  }
  write_text(out_path, text);
}

}  // namespace setnet
