#include "gpdyn/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace gpdyn {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read '" + path + "'");
  return in;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    // stod rejects "nan"/"inf" spellings on some platforms.
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw FormatError(where + ": not a number: '" + s + "'");
  }
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  if (traj.times.size() != traj.size()) throw std::invalid_argument("write_trajectory_csv: times/states size mismatch");
  std::ofstream out = open_out(path);
  out << "t";
  for (Eigen::Index i = 0; i < traj.dim(); ++i) out << ",x" << i;
  out << "\n";
  for (Eigen::Index k = 0; k < traj.size(); ++k) {
    out << format_double(traj.times[k]);
    for (Eigen::Index i = 0; i < traj.dim(); ++i) out << "," << format_double(traj.states(k, i));
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file");
  const auto header = split(strip_cr(line));
  if (header.size() < 2 || header[0] != "t") throw FormatError(path + ": header must be t,x0,...");
  for (std::size_t i = 1; i < header.size(); ++i)
    if (header[i] != "x" + std::to_string(i - 1)) throw FormatError(path + ": unexpected column '" + header[i] + "'");
  const auto d = static_cast<Eigen::Index>(header.size() - 1);
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split(line);
    if (static_cast<Eigen::Index>(cells.size()) != d + 1)
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(d + 1) + " columns");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_double(c, path + ":" + std::to_string(lineno)));
    rows.push_back(std::move(row));
  }
  Trajectory t;
  t.times.resize(static_cast<Eigen::Index>(rows.size()));
  t.states.resize(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    t.times[r] = rows[k][0];
    for (Eigen::Index i = 0; i < d; ++i) t.states(r, i) = rows[k][static_cast<std::size_t>(i + 1)];
  }
  return t;
}

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream out = open_out(path);
  out << "epoch,lr,loss,selection_error,skipped\n";
  for (const auto& r : history)
    out << r.epoch << "," << format_double(r.lr) << "," << format_double(r.loss) << ","
        << format_double(r.selection_error) << "," << r.skipped << "\n";
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<EpochRecord> read_history_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "epoch,lr,loss,selection_error,skipped")
    throw FormatError(path + ": not a history file");
  std::vector<EpochRecord> out;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != 5) throw FormatError(path + ": expected 5 columns");
    EpochRecord r;
    r.epoch = static_cast<int>(parse_double(c[0], path));
    r.lr = parse_double(c[1], path);
    r.loss = parse_double(c[2], path);
    r.selection_error = parse_double(c[3], path);
    r.skipped = static_cast<int>(parse_double(c[4], path));
    out.push_back(r);
  }
  return out;
}

Json read_json(const std::string& path) {
  std::ifstream in = open_in(path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const Json& doc) {
  std::ofstream out = open_out(path);
  out << doc.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

namespace {

Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec json_vec(const Json& a, const std::string& key) {
  if (!a.is_array()) throw FormatError("'" + key + "' must be an array of numbers");
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].is_null()) v[static_cast<Eigen::Index>(i)] = std::numeric_limits<double>::quiet_NaN();
    else if (a[i].is_number()) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    else throw FormatError("'" + key + "' must be an array of numbers");
  }
  return v;
}

// null stands for a non-finite value.
Json num_json(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double json_num(const Json& j, const std::string& key) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw FormatError("'" + key + "' must be a number");
  return j.get<double>();
}

void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw FormatError(where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw FormatError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
T get(const Json& obj, const std::string& key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const Json::exception&) {
    throw FormatError(where + ": bad value for '" + key + "'");
  }
}

std::string draw_policy_name(DrawPolicy p) { return p == DrawPolicy::per_batch ? "per_batch" : "per_window"; }

DrawPolicy draw_policy_from(const std::string& s) {
  if (s == "per_batch") return DrawPolicy::per_batch;
  if (s == "per_window") return DrawPolicy::per_window;
  throw FormatError("unknown draw_policy '" + s + "'");
}

void read_train(const Json& j, TrainConfig& t) {
  const std::string w = "train";
  check_keys(j, {"batch_size", "window_length", "epochs", "lr_schedule", "elbo_factors", "feature_count", "selection",
                 "draw_policy", "max_skip_fraction"},
             w);
  if (j.contains("batch_size")) t.batch_size = get<int>(j, "batch_size", w);
  if (j.contains("window_length")) t.window_length = get<int>(j, "window_length", w);
  if (j.contains("epochs")) t.epochs = get<int>(j, "epochs", w);
  if (j.contains("feature_count")) t.feature_count = get<int>(j, "feature_count", w);
  if (j.contains("max_skip_fraction")) t.max_skip_fraction = get<double>(j, "max_skip_fraction", w);
  if (j.contains("draw_policy")) t.draws = draw_policy_from(get<std::string>(j, "draw_policy", w));
  if (j.contains("lr_schedule")) {
    const Json& s = j.at("lr_schedule");
    if (!s.is_array()) throw FormatError("train.lr_schedule must be an array");
    t.lr_schedule.clear();
    for (const auto& ph : s) {
      check_keys(ph, {"epoch", "lr"}, "train.lr_schedule entry");
      t.lr_schedule.push_back({get<int>(ph, "epoch", "lr_schedule"), get<double>(ph, "lr", "lr_schedule")});
    }
  }
  if (j.contains("elbo_factors")) {
    const Json& e = j.at("elbo_factors");
    check_keys(e, {"a", "b"}, "train.elbo_factors");
    if (e.contains("a")) t.elbo.a = get<double>(e, "a", "elbo_factors");
    if (e.contains("b")) t.elbo.b = get<double>(e, "b", "elbo_factors");
  }
  if (j.contains("selection")) {
    const Json& s = j.at("selection");
    check_keys(s, {"rule", "final_k", "n_rollouts"}, "train.selection");
    if (s.contains("rule")) {
      try {
        t.selection.rule = selection_rule_from_string(get<std::string>(s, "rule", "selection"));
      } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
      }
    }
    if (s.contains("final_k")) t.selection.final_k = get<int>(s, "final_k", "selection");
    if (s.contains("n_rollouts")) t.selection.n_rollouts = get<int>(s, "n_rollouts", "selection");
  }
}

}  // namespace

RunConfig run_config_from_json(const Json& doc) {
  const std::string w = "run config";
  check_keys(doc, {"schema_version", "system", "method", "seed", "output_dir", "x0", "dt", "train_horizon",
                   "predict_horizon", "noise_variances", "tableau", "solver", "train"},
             w);
  if (!doc.contains("schema_version")) throw FormatError(w + ": missing schema_version");
  if (get<int>(doc, "schema_version", w) != kSchemaVersion)
    throw FormatError(w + ": unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
  if (!doc.contains("system")) throw FormatError(w + ": missing system");
  const std::string system = get<std::string>(doc, "system", w);
  Method method = Method::sgpd;
  if (doc.contains("method")) method = method_from_string(get<std::string>(doc, "method", w));

  RunConfig rc;
  rc.experiment = default_experiment(system, method);
  ExperimentConfig& e = rc.experiment;
  if (doc.contains("seed")) rc.seed = get<std::uint64_t>(doc, "seed", w);
  if (doc.contains("output_dir")) rc.output_dir = get<std::string>(doc, "output_dir", w);
  if (doc.contains("x0")) e.x0 = json_vec(doc.at("x0"), "x0");
  if (doc.contains("dt")) e.dt = get<double>(doc, "dt", w);
  if (doc.contains("train_horizon")) e.train_horizon = get<double>(doc, "train_horizon", w);
  if (doc.contains("predict_horizon")) e.predict_horizon = get<double>(doc, "predict_horizon", w);
  if (doc.contains("noise_variances")) e.noise_variances = json_vec(doc.at("noise_variances"), "noise_variances");
  if (doc.contains("tableau")) {
    if (method == Method::sgpd) throw FormatError(w + ": 'tableau' applies to unstructured methods only");
    e.tableau = get<std::string>(doc, "tableau", w);
    ButcherTableau::from_name(e.tableau);
  }
  if (doc.contains("solver")) {
    const Json& s = doc.at("solver");
    check_keys(s, {"residual_tolerance", "max_iterations", "damping_init", "warm_start"}, "solver");
    if (s.contains("residual_tolerance")) e.solver.residual_tolerance = get<double>(s, "residual_tolerance", "solver");
    if (s.contains("max_iterations")) e.solver.max_iterations = get<int>(s, "max_iterations", "solver");
    if (s.contains("damping_init")) e.solver.damping_init = get<double>(s, "damping_init", "solver");
    if (s.contains("warm_start")) e.solver.warm_start = get<bool>(s, "warm_start", "solver");
  }
  if (doc.contains("train")) read_train(doc.at("train"), e.train);
  e.train.seed = rc.seed;
  e.validate();
  return rc;
}

Json run_config_to_json(const RunConfig& rc) {
  const ExperimentConfig& e = rc.experiment;
  const TrainConfig& t = e.train;
  Json sched = Json::array();
  for (const auto& ph : t.lr_schedule) sched.push_back({{"epoch", ph.start_epoch}, {"lr", ph.learning_rate}});
  Json doc = {
      {"schema_version", kSchemaVersion},
      {"system", e.system},
      {"method", to_string(e.method)},
      {"seed", rc.seed},
      {"output_dir", rc.output_dir},
      {"x0", vec_json(e.x0)},
      {"dt", e.dt},
      {"train_horizon", e.train_horizon},
      {"predict_horizon", e.predict_horizon},
      {"noise_variances", vec_json(e.noise_variances)},
      {"solver",
       {{"residual_tolerance", e.solver.residual_tolerance},
        {"max_iterations", e.solver.max_iterations},
        {"damping_init", e.solver.damping_init},
        {"warm_start", e.solver.warm_start}}},
      {"train",
       {{"batch_size", t.batch_size},
        {"window_length", t.window_length},
        {"epochs", t.epochs},
        {"lr_schedule", sched},
        {"elbo_factors", {{"a", t.elbo.a}, {"b", t.elbo.b}}},
        {"feature_count", t.feature_count},
        {"selection",
         {{"rule", to_string(t.selection.rule)}, {"final_k", t.selection.final_k}, {"n_rollouts", t.selection.n_rollouts}}},
        {"draw_policy", draw_policy_name(t.draws)},
        {"max_skip_fraction", t.max_skip_fraction}}},
  };
  if (e.method != Method::sgpd) doc["tableau"] = e.tableau;
  return doc;
}

RunConfig load_run_config(const std::string& path) { return run_config_from_json(read_json(path)); }

Json checkpoint_to_json(const Checkpoint& cp, const RunConfig& config) {
  return {
      {"schema_version", kSchemaVersion},
      {"epoch", cp.epoch},
      {"selection_error", num_json(cp.selection_error)},
      {"lr", cp.lr},
      {"parameters", vec_json(cp.parameters)},
      {"adam", {{"m", vec_json(cp.adam_m)}, {"v", vec_json(cp.adam_v)}, {"t", cp.adam_t}}},
      {"config", run_config_to_json(config)},
  };
}

Checkpoint checkpoint_from_json(const Json& doc, RunConfig* config) {
  const std::string w = "checkpoint";
  check_keys(doc, {"schema_version", "epoch", "selection_error", "lr", "parameters", "adam", "config"}, w);
  for (const char* k : {"schema_version", "epoch", "parameters", "adam", "config"})
    if (!doc.contains(k)) throw FormatError(w + ": missing '" + k + "'");
  if (get<int>(doc, "schema_version", w) != kSchemaVersion) throw FormatError(w + ": unsupported schema_version");
  Checkpoint cp;
  cp.epoch = get<int>(doc, "epoch", w);
  cp.selection_error = doc.contains("selection_error") ? json_num(doc.at("selection_error"), "selection_error")
                                                       : std::numeric_limits<double>::quiet_NaN();
  cp.lr = doc.contains("lr") ? json_num(doc.at("lr"), "lr") : 0.0;
  cp.parameters = json_vec(doc.at("parameters"), "parameters");
  const Json& adam = doc.at("adam");
  check_keys(adam, {"m", "v", "t"}, "checkpoint.adam");
  cp.adam_m = json_vec(adam.at("m"), "adam.m");
  cp.adam_v = json_vec(adam.at("v"), "adam.v");
  cp.adam_t = get<long long>(adam, "t", "adam");
  if (!cp.parameters.allFinite()) throw FormatError(w + ": non-finite parameters");
  if (config) *config = run_config_from_json(doc.at("config"));
  return cp;
}

}  // namespace gpdyn
