#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "elmsc/dataset.hpp"
#include "elmsc/metrics.hpp"
#include "elmsc/solver.hpp"

namespace elmsc::pipeline {

inline const std::vector<double> kDefaultLambdaGrid{1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0};
inline const std::vector<Index> kDefaultLatentGrid{50, 100, 150, 200};

struct RunConfig {
  std::optional<std::filesystem::path> manifest;
  std::optional<dataset::SyntheticSpec> synthetic;
  Index clusters = 0;  // 0: number of distinct ground-truth labels
  double lambda = 1.0;
  Index latent_dim = 100;
  int trials = 10;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;  // empty: nothing written
  solver::Ablation ablation = solver::Ablation::full;
  int workers = 1;
  bool random_params = false;
  std::vector<double> lambda_grid = kDefaultLambdaGrid;
  std::vector<Index> latent_grid = kDefaultLatentGrid;
  Index pca_components = 0;  // 0: min(6 * clusters, n - 1, min d_l)
  int kmeans_restarts = 10;
  int max_iter = 100;
  double tol = 1e-3;
};

struct TrialRecord {
  int index = 0;
  std::uint64_t seed = 0;
  std::vector<int> labels;
  std::optional<metrics::MetricTuple> metrics;
  int iterations = 0;
  bool converged = false;
  solver::Residuals final_residuals;
  solver::KktReport kkt;
  solver::ConvergenceTrace trace;
  double wall_clock_seconds = 0.0;
};

struct RunReport {
  nlohmann::json config;  // fully resolved, including defaults
  std::vector<TrialRecord> trials;
  std::optional<metrics::EvalReport> aggregate;
};

struct SweepCell {
  double lambda = 0.0;
  Index latent_dim = 0;
  bool ok = false;
  std::string error;
  std::optional<RunReport> report;
};

struct SweepReport {
  std::vector<SweepCell> cells;
  // Per metric, the largest mean over successful cells (absent when no cell
  // produced metrics).
  std::optional<metrics::MetricTuple> best;
};

/// Seed used by trial `index`: base seed + index.
std::uint64_t trial_seed(std::uint64_t base, int index);

/// One (lambda, latent_dim) cell drawn uniformly from the grids with the
/// run's base seed; a single draw covers every trial of the run.
std::pair<double, Index> draw_random_params(const RunConfig& cfg);

/// Loads the manifest or generates the synthetic dataset.
dataset::MultiViewDataset resolve_dataset(const RunConfig& cfg);

/// End-to-end trials: augmented matrix, ADMM, block aggregation, spectral
/// clustering and (when labels exist) evaluation. Writes report.json,
/// trace_<t>.csv and labels_<t>.txt when out_dir is set.
RunReport cmd_cluster(const RunConfig& cfg);

/// Cartesian (lambda, latent_dim) sweep; a failing cell is recorded and the
/// sweep continues. With random_params only the drawn cell runs. Writes
/// cell_<i>/report.json, summary.csv and sweep.json when out_dir is set.
SweepReport cmd_sweep(const RunConfig& cfg);

/// Writes a synthetic dataset and its manifest; returns the manifest path.
std::filesystem::path cmd_synth(const dataset::SyntheticSpec& spec,
                                const std::filesystem::path& out_dir);

metrics::MetricTuple cmd_eval(const std::filesystem::path& predicted,
                              const std::filesystem::path& truth);

nlohmann::json to_json(const RunReport& report);
nlohmann::json to_json(const dataset::SyntheticSpec& spec);
std::string summary_csv(const SweepReport& sweep);

/// Parses "clusters=5,per_cluster=40,views=3,latent_dim=8,view_dims=40:36:32,
/// noise=0.05,seed=0"; omitted keys keep their defaults.
dataset::SyntheticSpec parse_synthetic_spec(const std::string& text);

}  // namespace elmsc::pipeline
