// vimu: command-line front end for the virtual IMU library.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "vimu/io.hpp"

namespace fs = std::filesystem;
using namespace vimu;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

struct RunOverrides {
  std::vector<int> imu_counts;
  std::optional<int> trials;
  std::vector<double> horizons;
};

struct LogOptions {
  std::vector<std::string> logs;
  std::string log_dir;
  std::string initial_pose;
};

ConfigDocument load(const CommonOptions& o) {
  ConfigDocument doc = o.config.empty() ? default_config() : parse_config(o.config);
  if (o.seed) doc.seed = *o.seed;
  return doc;
}

void add_common(CLI::App* cmd, CommonOptions& o, bool with_out = true) {
  cmd->add_option("--config", o.config, "JSON configuration (defaults to the 3x3 grid)");
  cmd->add_option("--seed", o.seed, "Random seed (overrides the config)");
  if (with_out) cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
}

void add_overrides(CLI::App* cmd, RunOverrides& r) {
  cmd->add_option("--imu-counts", r.imu_counts, "Comma-separated IMU subset sizes")->delimiter(',');
  cmd->add_option("--trials", r.trials, "Number of trials");
  cmd->add_option("--horizons", r.horizons, "Comma-separated horizons in seconds")->delimiter(',');
}

void add_log_inputs(CLI::App* cmd, LogOptions& l) {
  cmd->add_option("--logs", l.logs, "One CSV per IMU, in configuration order");
  cmd->add_option("--log-dir", l.log_dir, "Directory holding <imu id>.csv for every IMU");
}

std::vector<fs::path> log_paths(const LogOptions& l, const ImuArrayConfig& array) {
  std::vector<fs::path> paths(l.logs.begin(), l.logs.end());
  if (paths.empty()) {
    const fs::path dir = l.log_dir.empty() ? fs::path(".") : fs::path(l.log_dir);
    for (const auto& imu : array.imus) paths.push_back(dir / (imu.id + ".csv"));
  }
  return paths;
}

FusionModel model_for(const ConfigDocument& doc) {
  return doc.experiment.method == FusionMethod::ProposedWeighted ? build_fusion_weighted(doc.array)
                                                                  : build_fusion(doc.array);
}

std::vector<VirtualSample> fuse_logs(const LogOptions& l, const ConfigDocument& doc) {
  const ImuArrayConfig& array = doc.array;
  const AlignedLogs logs = ingest_logs(log_paths(l, array), array);
  for (const auto& w : logs.warnings) std::cerr << "warning: " << w << "\n";
  const FusionModel model = model_for(doc);
  std::vector<VirtualSample> out;
  out.reserve(logs.groups.size());
  for (const auto& g : logs.groups) out.push_back(fuse(model, g));
  return out;
}

template <typename Writer, typename Data>
fs::path emit(const fs::path& dir, const std::string& name, Writer write, const Data& data) {
  std::ostringstream ss;
  write(ss, data);
  const fs::path p = dir / name;
  write_text_file(p, ss.str());
  return p;
}

void print_matrix(const std::string& name, const Mat3& M) {
  std::cout << name << " =\n";
  for (int r = 0; r < 3; ++r) {
    std::cout << "  [" << format_double(M(r, 0)) << ", " << format_double(M(r, 1)) << ", "
              << format_double(M(r, 2)) << "]\n";
  }
}

int cmd_validate(const CommonOptions& o, bool dump) {
  const ConfigDocument doc = load(o);
  if (dump) {
    std::cout << dump_config(doc);
    return kExitOk;
  }
  const FusionModel m = model_for(doc);
  std::cout << "config OK: " << doc.array.size() << " IMU(s) at " << format_double(doc.array.rate_hz) << " Hz"
            << (m.colocated ? ", colocated" : "") << "\n";
  print_matrix("Q_gV", m.Q_gV);
  print_matrix("Q_wgV", m.Q_wgV);
  print_matrix("Q_aV", m.Q_aV);
  print_matrix("Q_waV", m.Q_waV);
  std::cout << "Q_gV diagonal: " << format_double(m.Q_gV(0, 0)) << " " << format_double(m.Q_gV(1, 1)) << " "
            << format_double(m.Q_gV(2, 2)) << "\n";
  return kExitOk;
}

int cmd_simulate(const CommonOptions& o, double t0, double duration, bool noise_free) {
  const ConfigDocument doc = load(o);
  const double dt = doc.array.dt();
  RecordingOptions opt;
  opt.t0 = t0;
  opt.count = static_cast<std::size_t>(std::floor(duration / dt + 1e-9)) + 1;
  opt.seed = doc.seed;
  opt.initial_bias_g_std = doc.experiment.initial_bias_g_std;
  opt.initial_bias_a_std = doc.experiment.initial_bias_a_std;
  opt.noise_scale = doc.experiment.noise_scale;
  opt.noise_free = noise_free || doc.experiment.noise_free;
  if (opt.noise_free) opt.initial_bias_g_std = opt.initial_bias_a_std = 0.0;
  const ArrayRecording rec = simulate_array(doc.array, doc.trajectory, opt);

  const fs::path dir(o.out);
  for (std::size_t i = 0; i < doc.array.size(); ++i) {
    std::vector<ImuSample> s;
    s.reserve(rec.samples.size());
    for (const auto& row : rec.samples) s.push_back(row[i]);
    emit(dir, doc.array.imus[i].id + ".csv", write_imu_csv, s);
  }
  std::vector<TrajectoryPoint> truth;
  for (const auto& k : rec.truth) {
    TrajectoryPoint p;
    p.t = k.t;
    p.x.q_GV = k.q_GV;
    p.x.p_GV = k.p_GV;
    p.x.v_GV = k.v_GV;
    truth.push_back(p);
  }
  const fs::path tp = emit(dir, "truth_pose.csv", write_pose_csv, truth);
  std::cout << "wrote " << doc.array.size() << " IMU logs (" << rec.samples.size() << " samples each) and "
            << tp.string() << "\n";
  return kExitOk;
}

int cmd_fuse(const CommonOptions& o, const LogOptions& l) {
  const ConfigDocument doc = load(o);
  const auto stream = fuse_logs(l, doc);
  const fs::path p = emit(fs::path(o.out), "virtual_imu.csv", write_virtual_csv, stream);
  std::cout << "wrote " << p.string() << " (" << stream.size() << " samples)\n";
  return kExitOk;
}

VimuState initial_state(const ConfigDocument& doc, const LogOptions& l, double t0) {
  VimuState x = doc.initial_state;
  if (l.initial_pose.empty()) return x;
  const CsvTable t = read_csv_table(fs::path(l.initial_pose));
  std::string header;
  for (const auto& h : t.header) header += (header.empty() ? "" : ",") + h;
  if (header != kPoseCsvHeader) {
    throw Error(ErrorKind::FormatError, l.initial_pose + ": header must be '" + std::string(kPoseCsvHeader) + "'");
  }
  for (const auto& r : t.rows) {
    if (std::abs(r[0] - t0) <= kAlignmentTolerance) {
      x.q_GV = UnitQuaternion::from_raw(Vec4(r[1], r[2], r[3], r[4]));
      x.p_GV = Vec3(r[5], r[6], r[7]);
      x.v_GV = Vec3(r[8], r[9], r[10]);
      return x;
    }
  }
  throw Error(ErrorKind::FormatError, l.initial_pose + ": no pose at the first fused timestamp " + format_double(t0));
}

int cmd_propagate(const CommonOptions& o, const LogOptions& l) {
  const ConfigDocument doc = load(o);
  const auto stream = fuse_logs(l, doc);
  const double t0 = stream.front().t;
  const VimuState x0 = initial_state(doc, l, t0);
  const VimuPropagator prop(model_for(doc), doc.array.gravity);
  const auto traj = prop.predict_horizon(x0, ErrorCovariance{}, stream, t0, stream.back().t - t0, false);
  const fs::path dir(o.out);
  emit(dir, "virtual_imu.csv", write_virtual_csv, stream);
  const fs::path p = emit(dir, "pose.csv", write_pose_csv, traj);
  std::cout << "wrote " << p.string() << " (" << traj.size() << " poses)\n";
  return kExitOk;
}

void apply(const RunOverrides& r, std::vector<int>& counts, int& trials, std::vector<double>& horizons) {
  if (!r.imu_counts.empty()) counts = r.imu_counts;
  if (r.trials) trials = *r.trials;
  if (!r.horizons.empty()) horizons = r.horizons;
}

int cmd_experiment(const CommonOptions& o, const RunOverrides& r) {
  const ConfigDocument doc = load(o);
  ExperimentConfig cfg = doc.experiment_config();
  apply(r, cfg.imu_counts, cfg.trials, cfg.horizons);
  const RmsReport report = run_prediction_experiment(cfg);
  const fs::path p = emit(fs::path(o.out), "rms.csv", write_rms_csv, report);
  std::printf("%9s %9s %13s %13s %13s\n", "imu_count", "horizon_s", "pos_rms_m", "rot_rms_rad", "vel_rms_mps");
  for (const auto& row : report.rows) {
    std::printf("%9d %9.3f %13.4e %13.4e %13.4e\n", row.imu_count, row.horizon_s, row.pos_rms_m, row.rot_rms_rad,
                row.vel_rms_mps);
  }
  std::cout << "wrote " << p.string() << "\n";
  return kExitOk;
}

int cmd_nees(const CommonOptions& o, const RunOverrides& r, std::optional<int> imu_count,
             std::optional<double> inflation) {
  const ConfigDocument doc = load(o);
  NeesConfig cfg = doc.nees_config();
  std::vector<int> unused;
  apply(r, unused, cfg.trials, cfg.horizons);
  if (imu_count) cfg.imu_count = *imu_count;
  if (inflation) cfg.noise_inflation = *inflation;
  const NeesReport report = nees_consistency(cfg);
  const fs::path p = emit(fs::path(o.out), "nees.csv", write_nees_csv, report);
  for (const auto& row : report.rows) {
    std::printf("horizon %.3f s: mean NEES %.3f over %d trials, %.0f%% interval [%.3f, %.3f] -> %s\n",
                row.horizon_s, row.mean_nees, row.trials, 100.0 * cfg.confidence, row.lower, row.upper,
                row.consistent ? "consistent" : "INCONSISTENT");
  }
  std::cout << "wrote " << p.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Virtual IMU fusion and propagation for rigid multi-IMU arrays"};
  app.require_subcommand(1);

  CommonOptions common;
  RunOverrides overrides;
  LogOptions logs;
  bool dump = false, noise_free = false;
  double sim_t0 = 0.0, sim_duration = 10.0;
  std::optional<int> nees_count;
  std::optional<double> nees_inflation;

  auto* validate = app.add_subcommand("validate", "Check a config and print the virtual noise covariances");
  add_common(validate, common, false);
  validate->add_flag("--dump", dump, "Print the normalized config instead");

  auto* simulate = app.add_subcommand("simulate", "Write synthetic per-IMU logs and the true pose");
  add_common(simulate, common);
  simulate->add_option("--t0", sim_t0, "Start time on the trajectory [s]")->capture_default_str();
  simulate->add_option("--duration", sim_duration, "Log length [s]")->capture_default_str();
  simulate->add_flag("--noise-free", noise_free, "Exact measurements, no noise or bias");

  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse per-IMU logs into a virtual IMU stream");
  add_common(fuse_cmd, common);
  add_log_inputs(fuse_cmd, logs);

  auto* propagate = app.add_subcommand("propagate", "Fuse logs and dead-reckon the virtual IMU pose");
  add_common(propagate, common);
  add_log_inputs(propagate, logs);
  propagate->add_option("--initial-pose", logs.initial_pose, "Pose CSV holding the state at the first sample");

  auto* experiment = app.add_subcommand("experiment", "Monte Carlo prediction error versus IMU count");
  add_common(experiment, common);
  add_overrides(experiment, overrides);

  auto* nees = app.add_subcommand("nees", "Covariance consistency check");
  add_common(nees, common);
  add_overrides(nees, overrides);
  nees->add_option("--imu-count", nees_count, "IMU subset size (0 = whole array)");
  nees->add_option("--noise-inflation", nees_inflation, "Scale on injected noise, filter unchanged");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*validate) return cmd_validate(common, dump);
    if (*simulate) return cmd_simulate(common, sim_t0, sim_duration, noise_free);
    if (*fuse_cmd) return cmd_fuse(common, logs);
    if (*propagate) return cmd_propagate(common, logs);
    if (*experiment) return cmd_experiment(common, overrides);
    if (*nees) return cmd_nees(common, overrides, nees_count, nees_inflation);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::IoError ? kExitIo : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
