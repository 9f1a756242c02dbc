#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "gpdyn/io.hpp"

using namespace gpdyn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gpdyn_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("trajectory csv round trip is exact") {
  Rng rng(3);
  Trajectory t = Trajectory::uniform(7, 3, 0.1);
  t.states = standard_normal_matrix(rng, 7, 3) * 1e3;
  t.states(2, 1) = 1.0 / 3.0;
  t.states(4, 2) = -5e-300;
  const std::string path = (scratch("traj") / "t.csv").string();
  write_trajectory_csv(path, t);
  const Trajectory r = read_trajectory_csv(path);
  REQUIRE(r.size() == 7);
  REQUIRE(r.dim() == 3);
  CHECK(r.times == t.times);
  CHECK(r.states == t.states);

  std::ofstream(path) << "t,x0,x2\n0,1,2\n";
  CHECK_THROWS_AS(read_trajectory_csv(path), FormatError);
  std::ofstream(path) << "t,x0\n0,1\n0.1\n";
  CHECK_THROWS_AS(read_trajectory_csv(path), FormatError);
  std::ofstream(path) << "t,x0\n0,abc\n";
  CHECK_THROWS_AS(read_trajectory_csv(path), FormatError);
  CHECK_THROWS_AS(read_trajectory_csv((scratch("traj") / "missing.csv").string()), std::invalid_argument);
}

TEST_CASE("history csv round trip") {
  std::vector<EpochRecord> h{{0, 1e-2, 12.5, 0.3, 0},
                             {1, 1e-3, -1.0 / 7.0, std::numeric_limits<double>::infinity(), 2}};
  const std::string path = (scratch("hist") / "h.csv").string();
  write_history_csv(path, h);
  const auto r = read_history_csv(path);
  REQUIRE(r.size() == 2);
  CHECK(r[1].loss == h[1].loss);
  CHECK(r[1].lr == h[1].lr);
  CHECK(std::isinf(r[1].selection_error));
  CHECK(r[1].skipped == 2);
}

TEST_CASE("run config json") {
  RunConfig rc = run_config_from_json(Json{{"schema_version", 1}, {"system", "pendulum"}});
  const ExperimentConfig def = default_experiment("pendulum");
  CHECK(rc.experiment.train.epochs == def.train.epochs);
  CHECK(rc.experiment.dt == def.dt);

  rc = run_config_from_json(Json{{"schema_version", 1},
                                 {"system", "rigid_body"},
                                 {"method", "euler"},
                                 {"seed", 77},
                                 {"train", {{"epochs", 3}, {"lr_schedule", {{{"epoch", 0}, {"lr", 0.5}}}}}}});
  CHECK(rc.seed == 77);
  CHECK(rc.experiment.train.seed == 77);
  CHECK(rc.experiment.method == Method::euler);
  CHECK(rc.experiment.train.epochs == 3);
  CHECK(rc.experiment.train.lr_at(2) == 0.5);

  // Round trip through the writer.
  const RunConfig back = run_config_from_json(run_config_to_json(rc));
  CHECK(run_config_to_json(back) == run_config_to_json(rc));

  CHECK_THROWS_AS(run_config_from_json(Json{{"system", "pendulum"}}), FormatError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"schema_version", 2}, {"system", "pendulum"}}), FormatError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"schema_version", 1}}), FormatError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"schema_version", 1}, {"system", "pendulum"}, {"epochs", 3}}),
                  FormatError);
  CHECK_THROWS_AS(
      run_config_from_json(Json{{"schema_version", 1}, {"system", "pendulum"}, {"train", {{"epoch", 3}}}}),
      FormatError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"schema_version", 1}, {"system", "pendulum"}, {"dt", "x"}}),
                  FormatError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"schema_version", 1}, {"system", "moon"}}), std::invalid_argument);
  CHECK_THROWS_AS(run_config_from_json(Json{{"schema_version", 1}, {"system", "pendulum"}, {"x0", {1.0}}}),
                  std::invalid_argument);
}

TEST_CASE("checkpoint json round trip") {
  RunConfig rc;
  rc.experiment = default_experiment("non_separable");
  rc.seed = 5;
  Rng rng(2);
  Checkpoint cp;
  cp.epoch = 4;
  cp.parameters = standard_normal_vector(rng, 11);
  cp.adam_m = standard_normal_vector(rng, 11);
  cp.adam_v = standard_normal_vector(rng, 11).cwiseAbs();
  cp.adam_t = 123;
  cp.lr = 1e-3;
  cp.selection_error = std::numeric_limits<double>::infinity();

  const std::string path = (scratch("ckpt") / "c.json").string();
  write_json(path, checkpoint_to_json(cp, rc));
  RunConfig rc2;
  const Checkpoint r = checkpoint_from_json(read_json(path), &rc2);
  CHECK(r.epoch == 4);
  CHECK(r.parameters == cp.parameters);
  CHECK(r.adam_m == cp.adam_m);
  CHECK(r.adam_v == cp.adam_v);
  CHECK(r.adam_t == 123);
  CHECK(std::isnan(r.selection_error));  // non-finite values are stored as null
  CHECK(rc2.seed == 5);
  CHECK(rc2.experiment.system == "non_separable");

  Json bad = checkpoint_to_json(cp, rc);
  bad["extra"] = 1;
  CHECK_THROWS_AS(checkpoint_from_json(bad), FormatError);
  std::ofstream(path) << "{ not json";
  CHECK_THROWS_AS(read_json(path), FormatError);
}
