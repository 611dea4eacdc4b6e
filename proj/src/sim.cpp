#include "vimu/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

#include <Eigen/Cholesky>
#include <boost/math/distributions/chi_squared.hpp>

#include "vimu/rng.hpp"

namespace vimu {

namespace {

struct AxisValue {
  double x, dx, ddx;
};

AxisValue eval_axis(const SinusoidAxis& ax, double t) {
  const double w = 2.0 * std::numbers::pi * ax.frequency_hz;
  const double arg = w * t + ax.phase_rad;
  return {ax.amplitude * std::sin(arg), ax.amplitude * w * std::cos(arg),
          -ax.amplitude * w * w * std::sin(arg)};
}

Mat3 rot_x(double a) {
  Mat3 R;
  R << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return R;
}
Mat3 rot_y(double a) {
  Mat3 R;
  R << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return R;
}
Mat3 rot_z(double a) {
  Mat3 R;
  R << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return R;
}

template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(count);
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::size_t horizon_steps(double horizon, double dt) {
  return static_cast<std::size_t>(std::llround(horizon / dt));
}

VimuState truth_state(const TrueKinematics& kin, const VirtualBiases& biases) {
  VimuState x;
  x.q_GV = kin.q_GV;
  x.p_GV = kin.p_GV;
  x.v_GV = kin.v_GV;
  x.b_gV = biases.b_gV;
  x.b_aV = biases.b_aV;
  return x;
}

struct CountSetup {
  std::vector<std::size_t> members;
  ImuArrayConfig subset;
  FusionModel model;
};

CountSetup make_setup(const ImuArrayConfig& array, const std::vector<std::size_t>& order, int count,
                      FusionMethod method) {
  CountSetup s;
  s.members.assign(order.begin(), order.begin() + count);
  s.subset = array.subset(s.members);
  switch (method) {
    case FusionMethod::Proposed:
      s.model = build_fusion(s.subset);
      break;
    case FusionMethod::ProposedWeighted:
      s.model = build_fusion_weighted(s.subset);
      break;
    case FusionMethod::NaiveAverage: {
      // Averaging ignores lever arms, which is the colocated model.
      ImuArrayConfig flat = s.subset;
      for (auto& imu : flat.imus) imu.extrinsics.p_Vi.setZero();
      s.model = build_fusion(flat);
      break;
    }
  }
  return s;
}

std::vector<VirtualSample> fuse_recording(const CountSetup& setup, const ArrayRecording& rec,
                                          FusionMethod method) {
  std::vector<VirtualSample> out;
  out.reserve(rec.samples.size());
  std::vector<ImuSample> group(setup.members.size());
  std::vector<ImuExtrinsics> ext;
  for (const auto& imu : setup.subset.imus) ext.push_back(imu.extrinsics);
  for (const auto& row : rec.samples) {
    for (std::size_t j = 0; j < setup.members.size(); ++j) group[j] = row[setup.members[j]];
    out.push_back(method == FusionMethod::NaiveAverage ? naive_average_baseline(group, ext)
                                                       : fuse(setup.model, group));
  }
  return out;
}

VirtualBiases fused_biases(const CountSetup& setup, const std::vector<ImuBiases>& all) {
  std::vector<ImuBiases> b;
  for (std::size_t i : setup.members) b.push_back(all[i]);
  return fuse_biases(setup.model, b);
}

}  // namespace

void TrajectorySpec::validate() const {
  if (!(duration_s > 0.0)) throw Error(ErrorKind::ConfigInvalid, "trajectory duration must be positive");
  for (const auto* axes : {&position, &orientation}) {
    for (const auto& ax : *axes) {
      if (!(ax.frequency_hz >= 0.0) || !std::isfinite(ax.amplitude) || !std::isfinite(ax.phase_rad)) {
        throw Error(ErrorKind::ConfigInvalid, "trajectory sinusoids need finite values and frequency >= 0");
      }
    }
  }
  if (std::abs(orientation[1].amplitude) >= 1.5) {
    throw Error(ErrorKind::ConfigInvalid, "pitch amplitude must stay below 1.5 rad");
  }
}

TrajectorySpec TrajectorySpec::default_motion() {
  TrajectorySpec s;
  s.position = {SinusoidAxis{2.0, 0.10, 0.0}, SinusoidAxis{1.5, 0.13, 0.5}, SinusoidAxis{0.5, 0.20, 1.0}};
  s.orientation = {SinusoidAxis{0.30, 0.30, 0.2}, SinusoidAxis{0.25, 0.25, 1.1},
                   SinusoidAxis{0.80, 0.15, 2.0}};
  s.duration_s = 60.0;
  return s;
}

TrueKinematics eval_trajectory(const TrajectorySpec& spec, double t) {
  if (!(t >= 0.0) || t > spec.duration_s) {
    throw Error(ErrorKind::OutOfRange, "trajectory time outside [0, duration]");
  }
  TrueKinematics k;
  k.t = t;
  for (int i = 0; i < 3; ++i) {
    const AxisValue a = eval_axis(spec.position[static_cast<std::size_t>(i)], t);
    k.p_GV[i] = spec.position_offset[i] + a.x;
    k.v_GV[i] = a.dx;
    k.a_GV[i] = a.ddx;
  }
  const AxisValue roll = eval_axis(spec.orientation[0], t);
  const AxisValue pitch = eval_axis(spec.orientation[1], t);
  const AxisValue yaw = eval_axis(spec.orientation[2], t);
  k.R_GV = rot_z(yaw.x) * rot_y(pitch.x) * rot_x(roll.x);
  k.q_GV = UnitQuaternion::from_rotation(k.R_GV);

  const double sr = std::sin(roll.x), cr = std::cos(roll.x);
  const double sp = std::sin(pitch.x), cp = std::cos(pitch.x);
  const double rd = roll.dx, pd = pitch.dx, yd = yaw.dx;
  k.omega_V = Vec3(rd - sp * yd, cr * pd + sr * cp * yd, -sr * pd + cr * cp * yd);
  k.phi_V = Vec3(roll.ddx - cp * pd * yd - sp * yaw.ddx,
                 -sr * rd * pd + cr * pitch.ddx + cr * rd * cp * yd - sr * sp * pd * yd + sr * cp * yaw.ddx,
                 -cr * rd * pd - sr * pitch.ddx - sr * rd * cp * yd - cr * sp * pd * yd + cr * cp * yaw.ddx);
  return k;
}

Vec3 true_specific_force(const TrueKinematics& kin, const Vec3& gravity) {
  return kin.R_GV.transpose() * (kin.a_GV - gravity);
}

ImuTruth exact_imu_truth(const TrueKinematics& kin, const ImuExtrinsics& ext, const Vec3& gravity) {
  const Mat3& R_iV = ext.R_iV.matrix();
  const Mat3 W = skew(kin.omega_V);
  const Vec3 lever = W * (W * ext.p_Vi) + skew(kin.phi_V) * ext.p_Vi;
  return {R_iV * kin.omega_V, R_iV * (true_specific_force(kin, gravity) + lever)};
}

VirtualSample naive_average_baseline(std::span<const ImuSample> samples,
                                     std::span<const ImuExtrinsics> extrinsics) {
  if (samples.empty() || samples.size() != extrinsics.size()) {
    throw Error(ErrorKind::CountMismatch, "naive average needs one extrinsic per sample");
  }
  VirtualSample v;
  v.t = samples.front().t;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (std::abs(samples[i].t - v.t) > kAlignmentTolerance) {
      throw Error(ErrorKind::Misaligned, "sample timestamps differ by more than 1e-6 s");
    }
    const Mat3 R_Vi = extrinsics[i].R_iV.matrix().transpose();
    v.omega_mV += R_Vi * samples[i].omega_m;
    v.accel_mV += R_Vi * samples[i].accel_m;
  }
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  v.omega_mV *= inv_n;
  v.accel_mV *= inv_n;
  return v;
}

ArrayRecording simulate_array(const ImuArrayConfig& array, const TrajectorySpec& trajectory,
                              const RecordingOptions& options) {
  array.validate();
  const double dt = array.dt();
  const std::size_t n = array.size();
  ArrayRecording rec;
  rec.t.resize(options.count);
  rec.truth.resize(options.count);
  rec.samples.assign(options.count, std::vector<ImuSample>(n));
  rec.biases.assign(options.count, std::vector<ImuBiases>(n));
  for (std::size_t k = 0; k < options.count; ++k) {
    rec.t[k] = options.t0 + static_cast<double>(k) * dt;
    rec.truth[k] = eval_trajectory(trajectory, rec.t[k]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const ImuSpec& imu = array.imus[i];
    const ImuNoiseParams injected = imu.noise.scaled(options.noise_scale);
    // Stream 0 is reserved for run-level draws.
    SubstreamRng rng(options.seed, options.run, 1 + i);
    ImuBiases b;
    b.b_g = options.initial_bias_g_std * rng.normal3();
    b.b_a = options.initial_bias_a_std * rng.normal3();
    for (std::size_t k = 0; k < options.count; ++k) {
      const ImuTruth truth = exact_imu_truth(rec.truth[k], imu.extrinsics, array.gravity);
      const NoiseDraw meas = options.noise_free ? NoiseDraw{} : rng.noise_draw();
      const NoiseDraw walk = options.noise_free ? NoiseDraw{} : rng.noise_draw();
      rec.biases[k][i] = b;
      rec.samples[k][i] = measure(rec.t[k], truth.omega, truth.specific_force, b, meas, injected, dt);
      b = step_bias(b, injected, dt, walk);
    }
  }
  return rec;
}

void ExperimentConfig::validate() const {
  array.validate();
  trajectory.validate();
  if (trials < 1 || starts_per_trial < 1) throw Error(ErrorKind::ConfigInvalid, "trials must be >= 1");
  if (imu_counts.empty()) throw Error(ErrorKind::ConfigInvalid, "imu_counts is empty");
  for (int c : imu_counts) {
    if (c < 1 || static_cast<std::size_t>(c) > array.size()) {
      throw Error(ErrorKind::ConfigInvalid, "imu count " + std::to_string(c) + " outside [1, array size]");
    }
  }
  if (horizons.empty()) throw Error(ErrorKind::ConfigInvalid, "horizons is empty");
  for (double h : horizons) {
    if (!(h > 0.0)) throw Error(ErrorKind::ConfigInvalid, "horizons must be positive");
  }
  const double h_max = *std::max_element(horizons.begin(), horizons.end());
  if (trajectory.duration_s < h_max + 4.0 * array.dt()) {
    throw Error(ErrorKind::ConfigInvalid, "trajectory shorter than the longest horizon");
  }
  if (!(noise_scale >= 0.0) || initial_bias_g_std < 0.0 || initial_bias_a_std < 0.0) {
    throw Error(ErrorKind::ConfigInvalid, "noise scale and bias spreads must be nonnegative");
  }
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig cfg;
  cfg.array = ImuArrayConfig::grid(3, 0.02);
  return cfg;
}

const RmsRow& RmsReport::at(int imu_count, double horizon_s) const {
  for (const auto& r : rows) {
    if (r.imu_count == imu_count && std::abs(r.horizon_s - horizon_s) < 1e-12) return r;
  }
  throw Error(ErrorKind::OutOfRange, "no report row for the requested count/horizon");
}

int default_thread_count() {
  if (const char* env = std::getenv("VIMU_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

RmsReport run_prediction_experiment(const ExperimentConfig& cfg) {
  return run_prediction_experiment(cfg, nullptr);
}

RmsReport run_prediction_experiment(const ExperimentConfig& cfg, std::vector<RunErrors>* per_run) {
  cfg.validate();
  const double dt = cfg.array.dt();
  const double h_max = *std::max_element(cfg.horizons.begin(), cfg.horizons.end());
  const std::size_t steps = horizon_steps(h_max, dt);
  // One sample before the start and one past the end serve as interpolation neighbors.
  const std::size_t count = steps + 3;

  const auto order = center_first_order(cfg.array);
  std::vector<CountSetup> setups;
  for (int c : cfg.imu_counts) setups.push_back(make_setup(cfg.array, order, c, cfg.method));

  const std::size_t runs = static_cast<std::size_t>(cfg.trials) * static_cast<std::size_t>(cfg.starts_per_trial);
  std::vector<RunErrors> errors(runs);
  const int threads = cfg.threads > 0 ? cfg.threads : default_thread_count();

  parallel_for(runs, threads, [&](std::size_t r) {
    SubstreamRng run_rng(cfg.seed, r, 0);
    const double t_lo = dt;
    const double t_hi = cfg.trajectory.duration_s - static_cast<double>(count) * dt;
    RecordingOptions opt;
    opt.t0 = run_rng.uniform(t_lo, t_hi) - dt;
    opt.count = count;
    opt.seed = cfg.seed;
    opt.run = r;
    opt.initial_bias_g_std = cfg.initial_bias_g_std;
    opt.initial_bias_a_std = cfg.initial_bias_a_std;
    opt.noise_scale = cfg.noise_scale;
    opt.noise_free = cfg.noise_free;
    const ArrayRecording rec = simulate_array(cfg.array, cfg.trajectory, opt);

    RunErrors& e = errors[r];
    e.pos2.assign(setups.size(), std::vector<double>(cfg.horizons.size()));
    e.rot2 = e.vel2 = e.pos2;
    for (std::size_t c = 0; c < setups.size(); ++c) {
      const CountSetup& setup = setups[c];
      const std::vector<VirtualSample> stream = fuse_recording(setup, rec, cfg.method);
      const VimuState x0 = truth_state(rec.truth[1], fused_biases(setup, rec.biases[1]));
      const VimuPropagator prop(setup.model, cfg.array.gravity);
      const auto traj = prop.predict_horizon(x0, ErrorCovariance{}, stream, rec.t[1], h_max, false);
      for (std::size_t h = 0; h < cfg.horizons.size(); ++h) {
        const std::size_t k = horizon_steps(cfg.horizons[h], dt);
        const VimuState truth = truth_state(rec.truth[1 + k], {});
        const Vec15 err = local_error(truth, traj[k].x);
        e.pos2[c][h] = err.segment<3>(idx::kPos).squaredNorm();
        e.rot2[c][h] = err.segment<3>(idx::kTheta).squaredNorm();
        e.vel2[c][h] = err.segment<3>(idx::kVel).squaredNorm();
      }
    }
  });

  RmsReport report;
  for (std::size_t c = 0; c < setups.size(); ++c) {
    for (std::size_t h = 0; h < cfg.horizons.size(); ++h) {
      double sp = 0.0, sr = 0.0, sv = 0.0;
      for (const RunErrors& e : errors) {
        sp += e.pos2[c][h];
        sr += e.rot2[c][h];
        sv += e.vel2[c][h];
      }
      const double inv = 1.0 / static_cast<double>(runs);
      report.rows.push_back({cfg.imu_counts[c], cfg.horizons[h], std::sqrt(sp * inv),
                             std::sqrt(sr * inv), std::sqrt(sv * inv)});
    }
  }
  if (per_run) *per_run = std::move(errors);
  return report;
}

std::pair<double, double> chi_square_mean_interval(int dof, int trials, double confidence) {
  const boost::math::chi_squared_distribution<double> dist(static_cast<double>(dof) * trials);
  const double alpha = 1.0 - confidence;
  return {boost::math::quantile(dist, 0.5 * alpha) / trials,
          boost::math::quantile(dist, 1.0 - 0.5 * alpha) / trials};
}

NeesReport nees_consistency(const NeesConfig& cfg) {
  const ExperimentConfig& base = cfg.base;
  ExperimentConfig check = base;
  check.horizons = cfg.horizons;
  check.imu_counts = {cfg.imu_count > 0 ? cfg.imu_count : static_cast<int>(base.array.size())};
  check.validate();
  if (cfg.trials < 100) throw Error(ErrorKind::ConfigInvalid, "NEES needs at least 100 trials");
  if (!(cfg.noise_inflation > 0.0)) throw Error(ErrorKind::ConfigInvalid, "noise inflation must be positive");

  const double dt = base.array.dt();
  const double h_max = *std::max_element(cfg.horizons.begin(), cfg.horizons.end());
  const std::size_t steps = horizon_steps(h_max, dt);
  const std::size_t count = steps + 3;
  const auto order = center_first_order(base.array);
  const CountSetup setup = make_setup(base.array, order, check.imu_counts.front(), FusionMethod::Proposed);
  const VimuPropagator prop(setup.model, base.array.gravity);

  std::vector<std::vector<double>> nees(static_cast<std::size_t>(cfg.trials),
                                        std::vector<double>(cfg.horizons.size()));
  const int threads = base.threads > 0 ? base.threads : default_thread_count();
  parallel_for(static_cast<std::size_t>(cfg.trials), threads, [&](std::size_t r) {
    SubstreamRng run_rng(base.seed, r, 0);
    RecordingOptions opt;
    opt.t0 = run_rng.uniform(dt, base.trajectory.duration_s - static_cast<double>(count) * dt) - dt;
    opt.count = count;
    opt.seed = base.seed;
    opt.run = r;
    opt.initial_bias_g_std = base.initial_bias_g_std;
    opt.initial_bias_a_std = base.initial_bias_a_std;
    opt.noise_scale = base.noise_scale * cfg.noise_inflation;
    opt.noise_free = base.noise_free;
    const ArrayRecording rec = simulate_array(base.array, base.trajectory, opt);
    const std::vector<VirtualSample> stream = fuse_recording(setup, rec, FusionMethod::Proposed);
    const VimuState x0 = truth_state(rec.truth[1], fused_biases(setup, rec.biases[1]));
    const auto traj = prop.predict_horizon(x0, ErrorCovariance{}, stream, rec.t[1], h_max, true);
    for (std::size_t h = 0; h < cfg.horizons.size(); ++h) {
      const std::size_t k = horizon_steps(cfg.horizons[h], dt);
      const VimuState truth = truth_state(rec.truth[1 + k], fused_biases(setup, rec.biases[1 + k]));
      const Vec15 e = local_error(truth, traj[k].x);
      nees[r][h] = e.dot(traj[k].P.P.ldlt().solve(e));
    }
  });

  NeesReport report;
  const auto [lo, hi] = chi_square_mean_interval(15, cfg.trials, cfg.confidence);
  for (std::size_t h = 0; h < cfg.horizons.size(); ++h) {
    double sum = 0.0;
    for (const auto& row : nees) sum += row[h];
    NeesRow row;
    row.horizon_s = cfg.horizons[h];
    row.trials = cfg.trials;
    row.mean_nees = sum / cfg.trials;
    row.lower = lo;
    row.upper = hi;
    row.consistent = row.mean_nees >= lo && row.mean_nees <= hi;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace vimu
