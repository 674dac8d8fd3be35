#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "elmsc/errors.hpp"
#include "elmsc/pipeline.hpp"

using namespace elmsc;
using namespace elmsc::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("elmsc_test_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

dataset::SyntheticSpec tiny_spec(double noise) {
  dataset::SyntheticSpec spec;
  spec.clusters = 2;
  spec.per_cluster = 10;
  spec.views = 2;
  spec.latent_dim = 4;
  spec.view_dims = {10, 8};
  spec.noise_sigma = noise;
  return spec;
}

RunConfig tiny_run(double noise) {
  RunConfig cfg;
  cfg.synthetic = tiny_spec(noise);
  cfg.latent_dim = 10;
  cfg.lambda = 0.1;
  cfg.trials = 1;
  cfg.pca_components = 4;
  return cfg;
}

}  // namespace

TEST_CASE("parse_synthetic_spec") {
  const auto spec = parse_synthetic_spec("clusters=4,per_cluster=12,views=2,view_dims=9:7,noise=0.1,seed=3");
  CHECK(spec.clusters == 4);
  CHECK(spec.per_cluster == 12);
  CHECK(spec.views == 2);
  CHECK(spec.view_dims == std::vector<Index>{9, 7});
  CHECK(spec.noise_sigma == 0.1);
  CHECK(spec.seed == 3);
  CHECK(parse_synthetic_spec("").clusters == 5);
  CHECK_THROWS_AS(parse_synthetic_spec("colour=red"), ConfigError);
  CHECK_THROWS_AS(parse_synthetic_spec("clusters"), ConfigError);
  CHECK_THROWS_AS(parse_synthetic_spec("clusters=many"), ConfigError);
}

TEST_CASE("cmd_synth writes a loadable dataset") {
  const fs::path dir = scratch("synth");
  const fs::path manifest = cmd_synth(tiny_spec(0.05), dir);
  const auto ds = dataset::load_dataset(manifest);
  CHECK(ds.view_count() == 2);
  CHECK(ds.sample_count() == 20);
  CHECK(ds.views[0] == dataset::gen_synthetic(tiny_spec(0.05)).views[0]);
}

TEST_CASE("trial seeds and random parameter draws") {
  CHECK(trial_seed(7, 0) == 7);
  CHECK(trial_seed(7, 3) == 10);
  RunConfig cfg;
  cfg.seed = 11;
  const auto a = draw_random_params(cfg);
  CHECK(a == draw_random_params(cfg));
  CHECK(std::find(kDefaultLambdaGrid.begin(), kDefaultLambdaGrid.end(), a.first) != kDefaultLambdaGrid.end());
  CHECK(std::find(kDefaultLatentGrid.begin(), kDefaultLatentGrid.end(), a.second) != kDefaultLatentGrid.end());
  cfg.lambda_grid.clear();
  CHECK_THROWS_AS(draw_random_params(cfg), ConfigError);
}

TEST_CASE("cmd_cluster recovers noiseless clusters and writes artifacts") {
  RunConfig cfg = tiny_run(0.0);
  cfg.out_dir = scratch("cluster");
  const RunReport report = cmd_cluster(cfg);
  REQUIRE(report.trials.size() == 1);
  REQUIRE(report.trials[0].metrics);
  CHECK(report.trials[0].metrics->acc == 1.0);
  CHECK(report.trials[0].converged);
  CHECK(fs::exists(cfg.out_dir / "trace_0.csv"));
  CHECK(fs::exists(cfg.out_dir / "labels_0.txt"));

  const auto j = nlohmann::json::parse(slurp(cfg.out_dir / "report.json"));
  CHECK(j["config"]["clusters"] == 2);
  CHECK(j["config"]["pca_components"] == 4);
  CHECK(j["config"]["solver"]["mu0"] == 1e-4);
  CHECK_FALSE(j["config"].contains("out_dir"));
  CHECK(j["trials"].size() == 1);
  CHECK(j["trials"][0].contains("wall_clock_seconds"));
  CHECK(j["trials"][0]["labels"].size() == 20);
  CHECK(j["aggregate"]["acc"]["mean"] == 1.0);
  CHECK(dataset::read_labels(cfg.out_dir / "labels_0.txt") == report.trials[0].labels);
}

TEST_CASE("cmd_cluster runs one record per trial with seeds base + t") {
  RunConfig cfg = tiny_run(0.05);
  cfg.trials = 3;
  cfg.seed = 40;
  cfg.max_iter = 15;
  cfg.workers = 2;
  const RunReport par = cmd_cluster(cfg);
  REQUIRE(par.trials.size() == 3);
  for (int t = 0; t < 3; ++t) {
    CHECK(par.trials[t].index == t);
    CHECK(par.trials[t].seed == 40u + static_cast<unsigned>(t));
  }
  CHECK(par.aggregate->trials.size() == 3);

  // The worker count does not change the outcome.
  cfg.workers = 1;
  const RunReport seq = cmd_cluster(cfg);
  for (int t = 0; t < 3; ++t) CHECK(seq.trials[t].labels == par.trials[t].labels);
}

TEST_CASE("cmd_cluster configuration and data errors") {
  RunConfig missing;
  missing.manifest = "/nonexistent/manifest.json";
  CHECK_THROWS_AS(cmd_cluster(missing), DataError);

  RunConfig neither;
  CHECK_THROWS_AS(cmd_cluster(neither), ConfigError);

  RunConfig too_big = tiny_run(0.0);
  too_big.latent_dim = 50;
  CHECK_THROWS_AS(cmd_cluster(too_big), ConfigError);

  RunConfig one_cluster = tiny_run(0.0);
  one_cluster.clusters = 1;
  CHECK_THROWS_AS(cmd_cluster(one_cluster), ConfigError);
}

TEST_CASE("cmd_sweep covers the grid and records failing cells") {
  RunConfig cfg = tiny_run(0.05);
  cfg.max_iter = 10;
  cfg.kmeans_restarts = 2;
  cfg.latent_grid = {4, 8, 12, 40};  // 40 exceeds the augmented height
  cfg.out_dir = scratch("sweep");
  const SweepReport sweep = cmd_sweep(cfg);
  REQUIRE(sweep.cells.size() == 28);
  int failed = 0;
  double best_acc = 0.0;
  for (const auto& cell : sweep.cells) {
    if (!cell.ok) {
      ++failed;
      CHECK(cell.latent_dim == 40);
      CHECK_FALSE(cell.error.empty());
      continue;
    }
    best_acc = std::max(best_acc, cell.report->aggregate->acc.mean);
  }
  CHECK(failed == 7);
  REQUIRE(sweep.best);
  CHECK(sweep.best->acc == best_acc);
  CHECK(fs::exists(cfg.out_dir / "summary.csv"));
  CHECK(fs::exists(cfg.out_dir / "sweep.json"));
  CHECK(fs::exists(cfg.out_dir / "cell_0" / "report.json"));
  CHECK(summary_csv(sweep).find("failed") != std::string::npos);
}

TEST_CASE("cmd_sweep with random parameters runs a single drawn cell") {
  RunConfig cfg = tiny_run(0.05);
  cfg.max_iter = 5;
  cfg.random_params = true;
  cfg.latent_grid = {4, 8};
  const SweepReport sweep = cmd_sweep(cfg);
  REQUIRE(sweep.cells.size() == 1);
  const auto drawn = draw_random_params(cfg);
  CHECK(sweep.cells[0].lambda == drawn.first);
  CHECK(sweep.cells[0].latent_dim == drawn.second);
}

TEST_CASE("cmd_eval") {
  const fs::path dir = scratch("eval");
  dataset::write_labels(dir / "pred.txt", {1, 1, 0, 0});
  dataset::write_labels(dir / "truth.txt", {0, 0, 1, 1});
  dataset::write_labels(dir / "short.txt", {0, 0, 1});
  const auto m = cmd_eval(dir / "pred.txt", dir / "truth.txt");
  CHECK(m.acc == 1.0);
  CHECK(m.f1 == 1.0);
  CHECK_THROWS_AS(cmd_eval(dir / "pred.txt", dir / "short.txt"), ContractError);
  CHECK_THROWS_AS(cmd_eval(dir / "pred.txt", dir / "gone.txt"), DataError);
}
