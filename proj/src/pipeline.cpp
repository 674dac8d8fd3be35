#include "elmsc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "elmsc/errors.hpp"
#include "elmsc/rng.hpp"
#include "elmsc/spectral.hpp"

namespace elmsc::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

json metrics_json(const metrics::MetricTuple& m) {
  return {{"acc", m.acc}, {"nmi", m.nmi}, {"ari", m.ari}, {"f1", m.f1}};
}

json summary_json(const metrics::Summary& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"formatted", s.formatted()}};
}

Index distinct_count(const std::vector<int>& labels) {
  return static_cast<Index>(std::set<int>(labels.begin(), labels.end()).size());
}

// Runs f(i) for i in [0, count) on at most `workers` threads. The first
// exception (lowest index) is rethrown after all workers finish.
template <typename F>
void parallel_for(int count, int workers, F&& f) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  auto body = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(workers, 1, std::max(count, 1));
  if (threads == 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(body);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct ResolvedRun {
  dataset::MultiViewDataset data;
  Index clusters = 0;
  double lambda = 0.0;
  Index latent_dim = 0;
  Index pca_components = 0;
};

ResolvedRun resolve(const RunConfig& cfg) {
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  if (cfg.kmeans_restarts < 1) throw ConfigError("k-means restarts must be >= 1");
  ResolvedRun r;
  r.data = resolve_dataset(cfg);
  r.data.validate();
  r.clusters = cfg.clusters;
  if (r.clusters == 0) {
    if (!r.data.labels)
      throw ConfigError("cluster count not given and the dataset has no labels to infer it from");
    r.clusters = distinct_count(*r.data.labels);
  }
  if (r.clusters < 2) throw ConfigError("cluster count must be >= 2");
  if (r.clusters > r.data.sample_count())
    throw ConfigError("cluster count exceeds the number of samples");
  r.lambda = cfg.lambda;
  r.latent_dim = cfg.latent_dim;
  if (cfg.random_params) std::tie(r.lambda, r.latent_dim) = draw_random_params(cfg);
  r.pca_components =
      cfg.pca_components > 0 ? cfg.pca_components : dataset::default_pca_components(r.clusters, r.data);
  return r;
}

json resolved_config_json(const RunConfig& cfg, const ResolvedRun& r, const solver::ElmscConfig& sc) {
  json j;
  if (cfg.manifest) j["manifest"] = cfg.manifest->string();
  if (cfg.synthetic) j["synthetic"] = to_json(*cfg.synthetic);
  j["clusters"] = r.clusters;
  j["lambda"] = r.lambda;
  j["latent_dim"] = r.latent_dim;
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  j["seed_rule"] = "trial seed = base seed + trial index";
  j["ablation"] = solver::to_string(cfg.ablation);
  j["random_params"] = cfg.random_params;
  if (cfg.random_params) {
    j["random_params_scope"] = "one draw per run, shared by all trials";
    j["lambda_grid"] = cfg.lambda_grid;
    j["latent_grid"] = cfg.latent_grid;
  }
  j["pca_components"] = r.pca_components;
  j["kmeans_restarts"] = cfg.kmeans_restarts;
  j["normalize_embedding_rows"] = false;
  j["solver"] = {{"mu0", sc.mu0},         {"mu_max", sc.mu_max}, {"rho", sc.rho},
                 {"tol", sc.tol},         {"max_iter", sc.max_iter},
                 {"effective_lambda", sc.effective_lambda()}};
  j["views"] = r.data.view_count();
  j["samples"] = r.data.sample_count();
  return j;
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t base, int index) {
  return base + static_cast<std::uint64_t>(index);
}

std::pair<double, Index> draw_random_params(const RunConfig& cfg) {
  if (cfg.lambda_grid.empty() || cfg.latent_grid.empty())
    throw ConfigError("random parameter mode needs nonempty lambda and latent grids");
  Rng rng(derive_seed(cfg.seed, 0x52414e44ULL));
  const double lambda = cfg.lambda_grid[rng.below(cfg.lambda_grid.size())];
  const Index k = cfg.latent_grid[rng.below(cfg.latent_grid.size())];
  return {lambda, k};
}

dataset::MultiViewDataset resolve_dataset(const RunConfig& cfg) {
  if (cfg.manifest && cfg.synthetic)
    throw ConfigError("give either a manifest or a synthetic spec, not both");
  if (cfg.manifest) return dataset::load_dataset(*cfg.manifest);
  if (cfg.synthetic) return dataset::gen_synthetic(*cfg.synthetic);
  throw ConfigError("no dataset: pass a manifest or a synthetic spec");
}

RunReport cmd_cluster(const RunConfig& cfg) {
  const ResolvedRun run = resolve(cfg);
  solver::ElmscConfig sc;
  sc.lambda = run.lambda;
  sc.latent_dim = run.latent_dim;
  sc.max_iter = cfg.max_iter;
  sc.tol = cfg.tol;
  sc.ablation = cfg.ablation;
  sc.validate();

  const dataset::AugmentedMatrix aug = dataset::build_augmented(run.data, run.pca_components);
  if (sc.latent_dim > aug.xa.rows())
    throw ConfigError("latent_dim " + std::to_string(sc.latent_dim) +
                      " exceeds the total feature dimension " + std::to_string(aug.xa.rows()));

  RunReport report;
  report.config = resolved_config_json(cfg, run, sc);
  report.config["pca_retained_variance"] = aug.retained_variance;
  report.trials.resize(static_cast<std::size_t>(cfg.trials));

  parallel_for(cfg.trials, cfg.workers, [&](int t) {
    const auto start = std::chrono::steady_clock::now();
    TrialRecord& rec = report.trials[static_cast<std::size_t>(t)];
    rec.index = t;
    rec.seed = trial_seed(cfg.seed, t);
    solver::ElmscConfig trial_cfg = sc;
    trial_cfg.seed = rec.seed;
    solver::SolverOutput out = solver::run(aug, trial_cfg);
    const Matrix zhat = solver::aggregate_z(out.z, aug.view_count(), aug.samples);
    spectral::ClusterOptions co;
    co.restarts = cfg.kmeans_restarts;
    co.seed = rec.seed;
    spectral::ClusteringResult cl = spectral::cluster(zhat, run.clusters, co);
    rec.labels = std::move(cl.labels);
    if (run.data.labels) rec.metrics = metrics::evaluate(rec.labels, *run.data.labels);
    rec.iterations = out.trace.records.empty() ? 0 : out.trace.records.back().iter;
    rec.converged = out.converged;
    if (!out.trace.records.empty()) rec.final_residuals = out.trace.records.back().residuals;
    rec.kkt = out.kkt;
    rec.trace = std::move(out.trace);
    rec.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });

  if (run.data.labels) {
    std::vector<metrics::MetricTuple> per_trial;
    for (const auto& t : report.trials) per_trial.push_back(*t.metrics);
    report.aggregate = metrics::aggregate_trials(std::move(per_trial));
  }

  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    for (const auto& t : report.trials) {
      write_text(cfg.out_dir / ("trace_" + std::to_string(t.index) + ".csv"), t.trace.to_csv());
      dataset::write_labels(cfg.out_dir / ("labels_" + std::to_string(t.index) + ".txt"), t.labels);
    }
    write_text(cfg.out_dir / "report.json", to_json(report).dump(2) + "\n");
  }
  return report;
}

SweepReport cmd_sweep(const RunConfig& cfg) {
  if (cfg.lambda_grid.empty() || cfg.latent_grid.empty())
    throw ConfigError("sweep grids must be nonempty");
  std::vector<std::pair<double, Index>> grid;
  if (cfg.random_params) {
    grid.push_back(draw_random_params(cfg));
  } else {
    for (double l : cfg.lambda_grid)
      for (Index k : cfg.latent_grid) grid.emplace_back(l, k);
  }

  SweepReport sweep;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    SweepCell cell;
    cell.lambda = grid[i].first;
    cell.latent_dim = grid[i].second;
    RunConfig cell_cfg = cfg;
    cell_cfg.random_params = false;
    cell_cfg.lambda = cell.lambda;
    cell_cfg.latent_dim = cell.latent_dim;
    cell_cfg.out_dir = cfg.out_dir.empty() ? fs::path() : cfg.out_dir / ("cell_" + std::to_string(i));
    try {
      cell.report = cmd_cluster(cell_cfg);
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    sweep.cells.push_back(std::move(cell));
  }

  for (const auto& cell : sweep.cells) {
    if (!cell.ok || !cell.report->aggregate) continue;
    const auto& a = *cell.report->aggregate;
    if (!sweep.best) {
      sweep.best = metrics::MetricTuple{a.acc.mean, a.nmi.mean, a.ari.mean, a.f1.mean};
      continue;
    }
    sweep.best->acc = std::max(sweep.best->acc, a.acc.mean);
    sweep.best->nmi = std::max(sweep.best->nmi, a.nmi.mean);
    sweep.best->ari = std::max(sweep.best->ari, a.ari.mean);
    sweep.best->f1 = std::max(sweep.best->f1, a.f1.mean);
  }

  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    write_text(cfg.out_dir / "summary.csv", summary_csv(sweep));
    json j;
    j["cells"] = json::array();
    for (std::size_t i = 0; i < sweep.cells.size(); ++i) {
      const auto& c = sweep.cells[i];
      json cj = {{"cell", i}, {"lambda", c.lambda}, {"latent_dim", c.latent_dim}, {"ok", c.ok}};
      if (!c.ok) cj["error"] = c.error;
      j["cells"].push_back(cj);
    }
    j["best"] = sweep.best ? metrics_json(*sweep.best) : json(nullptr);
    j["random_params"] = cfg.random_params;
    write_text(cfg.out_dir / "sweep.json", j.dump(2) + "\n");
  }
  return sweep;
}

std::string summary_csv(const SweepReport& sweep) {
  std::string out =
      "lambda,latent_dim,status,acc_mean,acc_std,nmi_mean,nmi_std,ari_mean,ari_std,f1_mean,f1_std\n";
  char buf[512];
  for (const auto& c : sweep.cells) {
    if (c.ok && c.report->aggregate) {
      const auto& a = *c.report->aggregate;
      std::snprintf(buf, sizeof buf, "%.17g,%lld,ok,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    c.lambda, static_cast<long long>(c.latent_dim), a.acc.mean, a.acc.std,
                    a.nmi.mean, a.nmi.std, a.ari.mean, a.ari.std, a.f1.mean, a.f1.std);
    } else {
      std::snprintf(buf, sizeof buf, "%.17g,%lld,%s,,,,,,,,\n", c.lambda,
                    static_cast<long long>(c.latent_dim), c.ok ? "ok" : "failed");
    }
    out += buf;
  }
  return out;
}

fs::path cmd_synth(const dataset::SyntheticSpec& spec, const fs::path& out_dir) {
  const dataset::MultiViewDataset ds = dataset::gen_synthetic(spec);
  return dataset::save_dataset(ds, out_dir);
}

metrics::MetricTuple cmd_eval(const fs::path& predicted, const fs::path& truth) {
  const auto p = dataset::read_labels(predicted);
  const auto t = dataset::read_labels(truth);
  if (p.size() != t.size())
    throw ContractError("label files differ in length: " + std::to_string(p.size()) + " vs " +
                        std::to_string(t.size()));
  return metrics::evaluate(p, t);
}

json to_json(const RunReport& report) {
  json j;
  j["config"] = report.config;
  j["trials"] = json::array();
  for (const auto& t : report.trials) {
    json tj;
    tj["trial"] = t.index;
    tj["seed"] = t.seed;
    tj["iterations"] = t.iterations;
    tj["converged"] = t.converged;
    tj["final_residuals"] = {{"r1", t.final_residuals.r1},
                             {"r2", t.final_residuals.r2},
                             {"r3", t.final_residuals.r3}};
    tj["kkt"] = {{"primal_x", t.kkt.primal_x}, {"primal_h", t.kkt.primal_h},
                 {"primal_j", t.kkt.primal_j}, {"dual_e", t.kkt.dual_e},
                 {"dual_j", t.kkt.dual_j}};
    tj["metrics"] = t.metrics ? metrics_json(*t.metrics) : json(nullptr);
    tj["labels"] = t.labels;
    tj["wall_clock_seconds"] = t.wall_clock_seconds;
    j["trials"].push_back(std::move(tj));
  }
  if (report.aggregate) {
    const auto& a = *report.aggregate;
    j["aggregate"] = {{"acc", summary_json(a.acc)},
                      {"nmi", summary_json(a.nmi)},
                      {"ari", summary_json(a.ari)},
                      {"f1", summary_json(a.f1)}};
  } else {
    j["aggregate"] = nullptr;
  }
  return j;
}

json to_json(const dataset::SyntheticSpec& spec) {
  return {{"clusters", spec.clusters},       {"per_cluster", spec.per_cluster},
          {"views", spec.views},             {"latent_dim", spec.latent_dim},
          {"view_dims", spec.view_dims},     {"noise_sigma", spec.noise_sigma},
          {"seed", spec.seed}};
}

dataset::SyntheticSpec parse_synthetic_spec(const std::string& text) {
  dataset::SyntheticSpec spec;
  bool dims_given = false;
  std::stringstream ss(text);
  std::string item;
  try {
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("synthetic spec item '" + item + "' lacks '='");
      const std::string key = item.substr(0, eq);
      const std::string value = item.substr(eq + 1);
      if (key == "clusters") spec.clusters = std::stoll(value);
      else if (key == "per_cluster") spec.per_cluster = std::stoll(value);
      else if (key == "views") spec.views = std::stoll(value);
      else if (key == "latent_dim") spec.latent_dim = std::stoll(value);
      else if (key == "noise" || key == "noise_sigma") spec.noise_sigma = std::stod(value);
      else if (key == "seed") spec.seed = std::stoull(value);
      else if (key == "view_dims") {
        spec.view_dims.clear();
        std::stringstream ds(value);
        std::string d;
        while (std::getline(ds, d, ':')) spec.view_dims.push_back(std::stoll(d));
        dims_given = true;
      } else {
        throw ConfigError("unknown synthetic spec key '" + key + "'");
      }
    }
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ConfigError*>(&e)) throw;
    throw ConfigError("malformed synthetic spec '" + text + "'");
  }
  // Without explicit dims, give every view the default width of the first view.
  if (!dims_given && static_cast<Index>(spec.view_dims.size()) != spec.views) {
    std::vector<Index> dims;
    for (Index l = 0; l < spec.views; ++l)
      dims.push_back(l < static_cast<Index>(spec.view_dims.size()) ? spec.view_dims[l]
                                                                   : spec.view_dims.back());
    spec.view_dims = std::move(dims);
  }
  return spec;
}

}  // namespace elmsc::pipeline
