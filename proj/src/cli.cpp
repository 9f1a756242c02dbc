#include "gpdyn/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "gpdyn/evaluation.hpp"
#include "gpdyn/io.hpp"

namespace fs = std::filesystem;

namespace gpdyn {

namespace {

// A usage problem detected after parsing (missing inputs, conflicting flags).
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigArgs {
  std::string config;
  std::string system;
  std::string method = "sgpd";
  std::optional<std::uint64_t> seed;
};

void add_config_options(CLI::App* cmd, ConfigArgs& a) {
  cmd->add_option("--config", a.config, "run configuration JSON");
  cmd->add_option("--system", a.system, "pendulum | two_body | non_separable | rigid_body");
  cmd->add_option("--method", a.method, "sgpd | euler | heun");
  cmd->add_option("--seed", a.seed, "overrides the configured seed");
}

RunConfig resolve_config(const ConfigArgs& a) {
  RunConfig rc;
  if (!a.config.empty()) {
    rc = load_run_config(a.config);
    if (!a.system.empty() && a.system != rc.experiment.system)
      throw UsageError("--system '" + a.system + "' conflicts with the config file");
  } else {
    if (a.system.empty()) throw UsageError("either --config or --system is required");
    rc.experiment = default_experiment(a.system, method_from_string(a.method));
  }
  if (a.seed) rc.seed = *a.seed;
  rc.experiment.train.seed = rc.seed;
  return rc;
}

std::string pad4(int n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", n);
  return buf;
}

std::string pad3(int n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", n);
  return buf;
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw UsageError("no such file: " + p.string());
}

// Ground truth on the training grid and the longer prediction grid, plus the
// noisy training observations. The training truth is a prefix of the
// reference, so both come from one integration.
struct Dataset {
  Trajectory truth, noisy, reference;
};

Dataset make_dataset(const RunConfig& rc, bool zero_noise, bool with_reference) {
  const ExperimentConfig& e = rc.experiment;
  const SystemSpec& spec = system_spec(e.system);
  const int n_train = e.train_points();
  const int n_steps = with_reference ? std::max(e.predict_steps(), n_train - 1) : n_train - 1;
  Dataset d;
  const Trajectory full = reference_trajectory(spec, e.x0, e.dt, n_steps);
  d.truth = full.slice(0, n_train);
  if (with_reference) d.reference = full.slice(0, e.predict_steps() + 1);
  Rng rng = make_stream(rc.seed, "noise");
  const Vec var = zero_noise ? Vec::Zero(spec.state_dim) : e.noise_variances;
  d.noisy = add_noise(d.truth, var, rng);
  return d;
}

Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  ConfigArgs cfg;
  std::string out = "data";
  bool zero_noise = false;
};

int cmd_generate(const GenerateArgs& a) {
  const RunConfig rc = resolve_config(a.cfg);
  rc.experiment.validate();
  const Dataset d = make_dataset(rc, a.zero_noise, true);
  const fs::path out(a.out);
  fs::create_directories(out);
  write_trajectory_csv((out / "truth.csv").string(), d.truth);
  write_trajectory_csv((out / "noisy.csv").string(), d.noisy);
  write_trajectory_csv((out / "reference.csv").string(), d.reference);
  write_json((out / "config.json").string(), run_config_to_json(rc));
  const Json manifest = {
      {"schema_version", kSchemaVersion},
      {"system", rc.experiment.system},
      {"seed", rc.seed},
      {"dt", rc.experiment.dt},
      {"noise_variances", vec_to_json(*d.noisy.noise_variances)},
      {"zero_noise", a.zero_noise},
      {"train_points", d.truth.size()},
      {"reference_points", d.reference.size()},
      {"files", {{"truth", "truth.csv"}, {"noisy", "noisy.csv"}, {"reference", "reference.csv"}}},
  };
  write_json((out / "manifest.json").string(), manifest);
  std::cerr << "generate: " << rc.experiment.system << ", " << d.truth.size() << " training points, "
            << d.reference.size() << " reference points -> " << out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  ConfigArgs cfg;
  std::string out;
  std::optional<int> epochs;
  bool resume = false;
  std::string data;
  bool quiet = false;
};

Trajectory load_observations(const fs::path& dir, const RunConfig& rc) {
  require_file(dir / "noisy.csv");
  require_file(dir / "manifest.json");
  Trajectory obs = read_trajectory_csv((dir / "noisy.csv").string());
  const Json manifest = read_json((dir / "manifest.json").string());
  if (!manifest.contains("noise_variances")) throw FormatError("manifest: missing noise_variances");
  Vec var(static_cast<Eigen::Index>(manifest.at("noise_variances").size()));
  for (Eigen::Index i = 0; i < var.size(); ++i)
    var[i] = manifest.at("noise_variances").at(static_cast<std::size_t>(i)).get<double>();
  if (obs.dim() != rc.experiment.x0.size() || var.size() != obs.dim())
    throw UsageError("observations do not match the configured system");
  if (manifest.value("system", std::string()) != rc.experiment.system)
    throw UsageError("data directory was generated for another system");
  obs.noise_variances = var;
  return obs;
}

std::map<int, fs::path> list_checkpoints(const fs::path& dir) {
  std::map<int, fs::path> out;
  if (!fs::is_directory(dir)) return out;
  static const std::regex re("epoch_([0-9]+)\\.json");
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, re)) out[std::stoi(m[1])] = entry.path();
  }
  return out;
}

int cmd_train(const TrainArgs& a) {
  RunConfig rc;
  std::optional<Checkpoint> resume;
  fs::path out;
  std::vector<EpochRecord> history;

  if (a.resume) {
    if (a.out.empty()) throw UsageError("--resume requires --out pointing at an existing run");
    out = a.out;
    // Latest saved state: the newest epoch-start checkpoint or the final state.
    std::optional<std::pair<int, fs::path>> latest;
    for (const auto& [epoch, path] : list_checkpoints(out / "checkpoints")) latest = {epoch, path};
    if (fs::is_regular_file(out / "final.json")) {
      const int fe = read_json((out / "final.json").string()).at("epoch").get<int>();
      if (!latest || fe > latest->first) latest = {fe, out / "final.json"};
    }
    if (!latest) throw UsageError("nothing to resume in " + out.string());
    resume = checkpoint_from_json(read_json(latest->second.string()), &rc);
    if (a.cfg.seed && *a.cfg.seed != rc.seed) throw UsageError("--seed conflicts with the run being resumed");
    if (fs::is_regular_file(out / "history.csv"))
      for (const auto& r : read_history_csv((out / "history.csv").string()))
        if (r.epoch < resume->epoch) history.push_back(r);
  } else {
    rc = resolve_config(a.cfg);
    out = a.out.empty() ? fs::path(rc.output_dir) : fs::path(a.out);
  }
  if (a.epochs) rc.experiment.train.epochs = *a.epochs;
  rc.output_dir = out.string();
  rc.experiment.validate();
  const ExperimentConfig& e = rc.experiment;

  const Trajectory obs = a.data.empty() ? make_dataset(rc, false, false).noisy : load_observations(a.data, rc);
  if (obs.size() < e.train.window_length) throw UsageError("fewer observations than one training window");

  Rng init = make_stream(rc.seed, "init");
  const DynamicsModel model = build_model(e, init);

  fs::create_directories(out / "checkpoints");
  // A fresh run must not inherit checkpoints from an earlier one in the same place.
  if (!a.resume)
    for (const auto& [epoch, stale] : list_checkpoints(out / "checkpoints")) fs::remove(stale);
  write_json((out / "config.json").string(), run_config_to_json(rc));
  write_trajectory_csv((out / "observations.csv").string(), obs);

  const std::string history_path = (out / "history.csv").string();
  TrainHooks hooks;
  hooks.resume = resume;
  hooks.on_checkpoint = [&](const Checkpoint& cp) {
    write_json((out / "checkpoints" / ("epoch_" + pad4(cp.epoch) + ".json")).string(), checkpoint_to_json(cp, rc));
  };
  hooks.on_epoch = [&](const EpochRecord& r) {
    history.push_back(r);
    write_history_csv(history_path, history);
    if (!a.quiet)
      std::cerr << "epoch " << r.epoch << "  lr " << r.lr << "  loss " << r.loss << "  selection " << r.selection_error
                << (r.skipped ? "  skipped " + std::to_string(r.skipped) : "") << "\n";
  };
  write_history_csv(history_path, history);

  const TrainResult res = train(model, obs, e.train, hooks);
  write_json((out / "final.json").string(), checkpoint_to_json(res.final_state, rc));
  write_history_csv(history_path, history);

  // Selection over every epoch-start checkpoint on disk (earlier sessions included).
  std::vector<Checkpoint> all;
  for (const auto& [epoch, path] : list_checkpoints(out / "checkpoints"))
    if (epoch < e.train.epochs) all.push_back(checkpoint_from_json(read_json(path.string())));
  Json pointer;
  if (all.empty()) {
    pointer = {{"epoch", res.final_state.epoch}, {"checkpoint", "final.json"}, {"selection_error", nullptr}};
  } else {
    const Checkpoint& best = select_model(all, e.train);
    pointer = {{"epoch", best.epoch},
               {"checkpoint", "checkpoints/epoch_" + pad4(best.epoch) + ".json"},
               {"selection_error", num(best.selection_error)}};
  }
  pointer["rule"] = to_string(e.train.selection.rule);
  write_json((out / "selected.json").string(), pointer);
  std::cerr << "train: " << e.train.epochs << " epochs, selected epoch " << pointer["epoch"] << " -> "
            << out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- rollout

struct LoadedModel {
  RunConfig config;
  DynamicsModel model;
  std::string path;
};

// A checkpoint file, or a training directory (its selected model).
LoadedModel load_model(const std::string& where) {
  fs::path path(where);
  if (fs::is_directory(path)) {
    require_file(path / "selected.json");
    path = path / read_json((path / "selected.json").string()).at("checkpoint").get<std::string>();
  }
  require_file(path);
  RunConfig rc;
  const Checkpoint cp = checkpoint_from_json(read_json(path.string()), &rc);
  Rng rng = make_stream(rc.seed, "init");
  DynamicsModel m = build_model(rc.experiment, rng);
  if (static_cast<Eigen::Index>(m.parameter_count()) != cp.parameters.size())
    throw FormatError("checkpoint parameters do not match the configured model");
  m.set_parameters(cp.parameters);
  return {rc, m, path.string()};
}

struct RolloutArgs {
  std::string checkpoint;
  std::optional<int> steps;
  int samples = 5;
  std::optional<double> step_size;
  bool adaptive = false;
  double rtol = 1e-6;
  double atol = 1e-8;
  std::optional<std::uint64_t> seed;
  std::string out = "rollouts";
};

struct RolloutPlan {
  double h = 0.0;
  int steps = 0;
  bool adaptive = false;
  double rtol = 0.0, atol = 0.0;
  std::uint64_t seed = 0;
  int feature_count = 0;
};

SampledModel plan_draw(const LoadedModel& lm, const RolloutPlan& plan, int index) {
  Rng rng = make_stream(plan.seed, "rollout", static_cast<std::uint64_t>(index));
  const SampledModel draw = sample_model(lm.model, plan.feature_count, rng);
  Stepper st = draw.stepper();
  st.step_size = plan.h;
  return draw.with_stepper(st);
}

// Rolls out step by step so that a failure still leaves the completed prefix.
Trajectory guarded_rollout(const SampledModel& draw, const Vec& x0, const RolloutPlan& plan, bool& failed,
                           std::string& why) {
  Trajectory t = Trajectory::uniform(plan.steps + 1, x0.size(), plan.h);
  t.states.row(0) = x0.transpose();
  Vec x = x0;
  StageSolution sol;
  bool have = false;
  double h_adapt = plan.h;
  int k = 0;
  failed = false;
  try {
    for (; k < plan.steps; ++k) {
      if (plan.adaptive) {
        AdaptiveOptions opt;
        opt.initial_step = h_adapt;
        opt.solver = draw.stepper().solver;
        const Trajectory seg =
            integrate_adaptive(draw.stepper().tableau, draw, x, t.times[k], t.times[k + 1], plan.rtol, plan.atol, opt);
        x = seg.state(seg.size() - 1);
        if (seg.size() > 2) h_adapt = seg.times[seg.size() - 2] - seg.times[seg.size() - 3];
      } else {
        const Vec* warm = (draw.stepper().solver.warm_start && have) ? &sol.stages : nullptr;
        x = draw.step(x, warm, &sol);
        have = true;
      }
      if (!x.allFinite()) throw NumericalError("non-finite state");
      t.states.row(k + 1) = x.transpose();
    }
  } catch (const NonConvergence& e) {
    failed = true;
    why = e.what();
  } catch (const StepSizeUnderflow& e) {
    failed = true;
    why = e.what();
  } catch (const NumericalError& e) {
    failed = true;
    why = e.what();
  }
  if (failed) {
    why = "step " + std::to_string(k) + ": " + why;
    return t.slice(0, k + 1);
  }
  return t;
}

int cmd_rollout(const RolloutArgs& a) {
  if (a.checkpoint.empty()) throw UsageError("--checkpoint is required");
  if (a.samples < 1) throw UsageError("--samples must be positive");
  const LoadedModel lm = load_model(a.checkpoint);
  const ExperimentConfig& e = lm.config.experiment;
  RolloutPlan plan;
  plan.h = a.step_size.value_or(e.dt);
  if (!(plan.h > 0.0)) throw UsageError("--step-size must be positive");
  if (a.steps) {
    if (*a.steps < 0) throw UsageError("--steps must be non-negative");
    plan.steps = *a.steps;
  } else {
    plan.steps = static_cast<int>(std::llround(e.predict_horizon / plan.h));
  }
  plan.adaptive = a.adaptive;
  plan.rtol = a.rtol;
  plan.atol = a.atol;
  plan.seed = a.seed.value_or(lm.config.seed);
  plan.feature_count = e.train.feature_count;
  if (plan.adaptive) {
    if (lm.model.scheme != StepScheme::runge_kutta)
      throw UsageError("--adaptive needs a Runge-Kutta model; this one steps by symplectic Euler");
    if (!(plan.rtol > 0.0) || !(plan.atol > 0.0)) throw UsageError("--rtol and --atol must be positive");
  }

  const fs::path out(a.out);
  fs::create_directories(out);
  for (const auto& entry : fs::directory_iterator(out))
    if (std::regex_match(entry.path().filename().string(), std::regex("rollout_[0-9]+\\.csv"))) fs::remove(entry.path());

  int failures = 0;
  std::string first_failure;
  for (int i = 0; i < a.samples; ++i) {
    const SampledModel draw = plan_draw(lm, plan, i);
    bool failed = false;
    std::string why;
    const Trajectory t = guarded_rollout(draw, e.x0, plan, failed, why);
    write_trajectory_csv((out / ("rollout_" + pad3(i) + ".csv")).string(), t);
    if (failed) {
      ++failures;
      if (first_failure.empty()) first_failure = "rollout " + std::to_string(i) + " " + why;
    }
  }
  const Json meta = {
      {"schema_version", kSchemaVersion},
      {"system", e.system},
      {"checkpoint", fs::absolute(lm.path).string()},
      {"samples", a.samples},
      {"steps", plan.steps},
      {"step_size", plan.h},
      {"adaptive", plan.adaptive},
      {"rtol", plan.rtol},
      {"atol", plan.atol},
      {"seed", plan.seed},
      {"failed", failures},
  };
  write_json((out / "ensemble.json").string(), meta);
  if (failures > 0) {
    std::cerr << "rollout: " << failures << " of " << a.samples << " rollouts failed (" << first_failure
              << "); partial output written\n";
    return kExitNumerical;
  }
  std::cerr << "rollout: " << a.samples << " x " << plan.steps << " steps at h = " << plan.h
            << (plan.adaptive ? " (adaptive)" : "") << " -> " << out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string ensemble;
  std::string truth;
  std::string system;
  std::vector<std::string> metrics;
  std::string checkpoint;
  std::string out;
};

// Ensemble rows at the truth times (ensemble grids may be finer).
Trajectory resample(const Trajectory& r, const Trajectory& truth) {
  Trajectory out = Trajectory::uniform(truth.size(), r.dim(), 1.0);
  out.times = truth.times;
  Eigen::Index j = 0;
  for (Eigen::Index k = 0; k < truth.size(); ++k) {
    const double t = truth.times[k];
    const double tol = 1e-9 * (1.0 + std::abs(t));
    while (j < r.size() && r.times[j] < t - tol) ++j;
    if (j >= r.size() || std::abs(r.times[j] - t) > tol)
      throw UsageError("ensemble grid does not contain truth time " + format_double(t));
    out.states.row(k) = r.states.row(j);
  }
  return out;
}

int cmd_eval(const EvalArgs& a) {
  if (a.ensemble.empty()) throw UsageError("--ensemble is required");
  const fs::path dir(a.ensemble);
  if (!fs::is_directory(dir)) throw UsageError("no such directory: " + dir.string());
  Json meta = Json::object();
  if (fs::is_regular_file(dir / "ensemble.json")) meta = read_json((dir / "ensemble.json").string());

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (std::regex_match(entry.path().filename().string(), std::regex("rollout_[0-9]+\\.csv"))) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw UsageError("no rollout_*.csv files in " + dir.string());
  RolloutEnsemble ens;
  for (const auto& f : files) ens.rollouts.push_back(read_trajectory_csv(f.string()));
  ens.validate();

  std::string system = a.system.empty() ? meta.value("system", std::string()) : a.system;
  std::optional<Trajectory> truth;
  if (!a.truth.empty()) {
    require_file(a.truth);
    truth = read_trajectory_csv(a.truth);
    if (truth->dim() != ens.rollouts.front().dim()) throw UsageError("truth and ensemble dimensions differ");
    // Compare on the common horizon.
    const double t_end = ens.rollouts.front().times[ens.rollouts.front().size() - 1];
    Eigen::Index n = 0;
    while (n < truth->size() && truth->times[n] <= t_end + 1e-9 * (1.0 + std::abs(t_end))) ++n;
    *truth = truth->slice(0, n);
    if (truth->size() != ens.rollouts.front().size() ||
        (truth->times - ens.rollouts.front().times).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + std::abs(t_end)))
      for (auto& r : ens.rollouts) r = resample(r, *truth);
  }

  std::set<std::string> wanted(a.metrics.begin(), a.metrics.end());
  if (wanted.empty()) {
    if (truth) wanted.insert("l2");
    if (!system.empty()) wanted.insert("energy");
    if (ens.count() >= 2) wanted.insert("uncertainty");
    if (system == "rigid_body") wanted.insert("invariant");
  }
  for (const auto& m : wanted)
    if (!std::set<std::string>{"l2", "energy", "uncertainty", "invariant", "determinant"}.count(m))
      throw UsageError("unknown metric '" + m + "'");

  const Trajectory& grid = ens.rollouts.front();
  const Eigen::Index N = grid.size();
  std::vector<std::pair<std::string, Vec>> series;
  Json metrics = {{"schema_version", kSchemaVersion}, {"samples", ens.count()}, {"points", N}};
  if (!system.empty()) metrics["system"] = system;

  if (wanted.count("l2")) {
    if (!truth) throw UsageError("metric l2 needs --truth");
    const L2Report r = l2_error(ens, *truth);
    metrics["l2"] = {{"total", num(r.total)}, {"max", num(r.series.maxCoeff())}};
    series.emplace_back("l2", r.series);
  }
  if (wanted.count("energy")) {
    if (system.empty()) throw UsageError("metric energy needs --system");
    const SystemSpec& spec = system_spec(system);
    const Vec x0 = truth ? truth->state(0) : grid.state(0);
    const EnergyReport r = energy_stats(ens, spec.energy, spec.energy(x0));
    metrics["energy"] = {{"true", spec.energy(x0)}, {"mean", num(r.mean)}, {"error", num(r.error)}, {"std", num(r.std)}};
    series.emplace_back("energy", r.series);
  }
  if (wanted.count("invariant")) {
    Vec worst = Vec::Zero(N);
    double drift = 0.0;
    for (const auto& r : ens.rollouts) {
      worst = worst.cwiseMax((r.states.rowwise().squaredNorm().array() - 1.0).abs().matrix());
      drift = std::max(drift, invariant_drift(r));
    }
    metrics["invariant"] = {{"max_drift", num(drift)}};
    series.emplace_back("invariant_drift", worst);
  }
  if (wanted.count("determinant")) {
    const std::string ck = a.checkpoint.empty() ? meta.value("checkpoint", std::string()) : a.checkpoint;
    if (ck.empty()) throw UsageError("metric determinant needs --checkpoint");
    const LoadedModel lm = load_model(ck);
    RolloutPlan plan;
    plan.h = meta.value("step_size", lm.config.experiment.dt);
    plan.seed = meta.value("seed", lm.config.seed);
    plan.feature_count = lm.config.experiment.train.feature_count;
    // Re-create each draw; files on disk may be resampled, so use the raw ones.
    Vec worst = Vec::Zero(N);
    double max_dev = 0.0;
    for (std::size_t i = 0; i < files.size(); ++i) {
      const SampledModel draw = plan_draw(lm, plan, static_cast<int>(i));
      const Trajectory raw = read_trajectory_csv(files[i].string());
      const Trajectory on_grid = truth ? resample(raw, grid) : raw;
      const Vec det = determinant_series(draw, on_grid);
      const Vec dev = (det.array() - 1.0).abs().matrix();
      worst = worst.cwiseMax(dev);
      max_dev = std::max(max_dev, dev.maxCoeff());
    }
    metrics["determinant"] = {{"max_abs_deviation", num(max_dev)}};
    series.emplace_back("det_max_abs_dev", worst);
  }

  const fs::path out = a.out.empty() ? dir : fs::path(a.out);
  fs::create_directories(out);
  {
    std::ofstream s(out / "series.csv");
    s << "t";
    for (const auto& [name, v] : series) s << "," << name;
    s << "\n";
    for (Eigen::Index k = 0; k < N; ++k) {
      s << format_double(grid.times[k]);
      for (const auto& [name, v] : series) s << "," << format_double(v[k]);
      s << "\n";
    }
  }
  if (wanted.count("uncertainty")) {
    const UncertaintyReport u = uncertainty_stats(ens);
    std::ofstream s(out / "uncertainty.csv");
    s << "t";
    for (Eigen::Index i = 0; i < grid.dim(); ++i) s << ",mean_x" << i;
    for (Eigen::Index i = 0; i < grid.dim(); ++i) s << ",std_x" << i;
    s << "\n";
    for (Eigen::Index k = 0; k < N; ++k) {
      s << format_double(grid.times[k]);
      for (Eigen::Index i = 0; i < grid.dim(); ++i) s << "," << format_double(u.mean(k, i));
      for (Eigen::Index i = 0; i < grid.dim(); ++i) s << "," << format_double(u.std(k, i));
      s << "\n";
    }
    metrics["uncertainty"] = {{"max_std", num(u.std.maxCoeff())}, {"final_std", vec_to_json(u.std.row(N - 1).transpose())}};
  }
  write_json((out / "metrics.json").string(), metrics);
  std::cout << metrics.dump() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Gaussian-process dynamics models inside structure-preserving integrators"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "simulate a benchmark system and write training data");
  add_config_options(g, gen.cfg);
  g->add_option("--out", gen.out, "output directory");
  g->add_flag("--zero-noise", gen.zero_noise, "write noise-free observations");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model; writes checkpoints, history and the selected model");
  add_config_options(t, tr.cfg);
  t->add_option("--out", tr.out, "run directory");
  t->add_option("--epochs", tr.epochs, "overrides the configured epoch count");
  t->add_option("--data", tr.data, "directory written by generate (default: simulate from the config)");
  t->add_flag("--resume", tr.resume, "continue the run in --out from its latest checkpoint");
  t->add_flag("--quiet", tr.quiet, "no per-epoch log");

  RolloutArgs ro;
  auto* r = app.add_subcommand("rollout", "roll out independent model draws from the initial state");
  r->add_option("--checkpoint", ro.checkpoint, "checkpoint JSON or training directory")->required();
  r->add_option("--steps", ro.steps, "number of steps (default: prediction horizon)");
  r->add_option("--samples", ro.samples, "number of draws");
  r->add_option("--step-size", ro.step_size, "step size override");
  r->add_flag("--adaptive", ro.adaptive, "adaptive step-doubling integration on the output grid");
  r->add_option("--rtol", ro.rtol, "adaptive relative tolerance");
  r->add_option("--atol", ro.atol, "adaptive absolute tolerance");
  r->add_option("--seed", ro.seed, "seed for the draws (default: the run seed)");
  r->add_option("--out", ro.out, "output directory");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "metrics of a rollout ensemble");
  e->add_option("--ensemble", ev.ensemble, "directory with rollout_*.csv")->required();
  e->add_option("--truth", ev.truth, "ground-truth trajectory CSV");
  e->add_option("--system", ev.system, "system (default: from the ensemble)");
  e->add_option("--metrics", ev.metrics, "l2 energy uncertainty invariant determinant")->delimiter(',');
  e->add_option("--checkpoint", ev.checkpoint, "model for the determinant metric");
  e->add_option("--out", ev.out, "output directory (default: the ensemble directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*t) return cmd_train(tr);
    if (*r) return cmd_rollout(ro);
    if (*e) return cmd_eval(ev);
    return kExitUsage;
  } catch (const NumericalAbort& err) {
    std::cerr << "error: " << err.what() << " (epoch " << err.epoch << ")\n";
    return kExitNumerical;
  } catch (const NumericalError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitNumerical;
  } catch (const NonConvergence& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitNumerical;
  } catch (const StepSizeUnderflow& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitNumerical;
  } catch (const FormatError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const Json::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"gpdyn"};
  for (const auto& s : args) argv.push_back(s.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace gpdyn
