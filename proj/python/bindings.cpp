#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vimu/io.hpp"

namespace py = pybind11;
using namespace vimu;

namespace {

std::vector<ImuSample> samples_from_arrays(const MatX& omega, const MatX& accel, double t) {
  if (omega.cols() != 3 || accel.cols() != 3 || omega.rows() != accel.rows()) {
    throw Error(ErrorKind::InvalidArgument, "omega and accel must both be (n, 3) arrays");
  }
  std::vector<ImuSample> out(static_cast<std::size_t>(omega.rows()));
  for (Eigen::Index i = 0; i < omega.rows(); ++i) {
    out[i].t = t;
    out[i].omega_m = omega.row(i).transpose();
    out[i].accel_m = accel.row(i).transpose();
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_vimu, m) {
  m.doc() = "Virtual IMU fusion and propagation for rigid multi-IMU arrays";

  static py::exception<Error> vimu_error(m, "VimuError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = vimu_error;
      py::object inst = err(e.what());
      inst.attr("kind") = to_string(e.kind());
      PyErr_SetObject(err.ptr(), inst.ptr());
    }
  });

  py::class_<UnitQuaternion>(m, "UnitQuaternion")
      .def(py::init<>())
      .def_static("from_xyzw", [](const Vec4& q) { return UnitQuaternion::from_raw(q); }, py::arg("xyzw"))
      .def_static("from_rotation", &UnitQuaternion::from_rotation, py::arg("R_GV"))
      .def_static("from_rotation_vector", &UnitQuaternion::from_rotation_vector, py::arg("rotvec"))
      .def_property_readonly("xyzw", &UnitQuaternion::coeffs)
      .def("to_rotation", &UnitQuaternion::to_rotation)
      .def("__repr__", [](const UnitQuaternion& q) {
        return "UnitQuaternion(x=" + format_double(q.x()) + ", y=" + format_double(q.y()) +
               ", z=" + format_double(q.z()) + ", w=" + format_double(q.w()) + ")";
      });

  m.def("skew", &skew, py::arg("v"));
  m.def("omega_matrix", &omega_matrix, py::arg("w"));
  m.def("so3_exp", &so3_exp, py::arg("rotvec"));
  m.def("so3_log", &so3_log, py::arg("R"));
  m.def("pinv", &pinv, py::arg("A"));
  m.def("left_nullspace", &left_nullspace, py::arg("Y"));

  py::class_<ImuNoiseParams>(m, "ImuNoiseParams")
      .def(py::init<>())
      .def(py::init([](double g, double a, double wg, double wa) {
             ImuNoiseParams n{g, a, wg, wa};
             n.validate();
             return n;
           }),
           py::arg("sigma_g"), py::arg("sigma_a"), py::arg("sigma_wg"), py::arg("sigma_wa"))
      .def_readwrite("sigma_g", &ImuNoiseParams::sigma_g)
      .def_readwrite("sigma_a", &ImuNoiseParams::sigma_a)
      .def_readwrite("sigma_wg", &ImuNoiseParams::sigma_wg)
      .def_readwrite("sigma_wa", &ImuNoiseParams::sigma_wa);

  py::class_<ImuSpec>(m, "ImuSpec")
      .def(py::init([](std::string id, const Mat3& R_iV, const Vec3& p_Vi, const ImuNoiseParams& noise) {
             ImuSpec s;
             s.id = std::move(id);
             s.extrinsics.R_iV = Rot3(R_iV);
             s.extrinsics.p_Vi = p_Vi;
             s.noise = noise;
             return s;
           }),
           py::arg("id"), py::arg("R_iV") = Mat3::Identity(), py::arg("p_Vi") = Vec3::Zero(),
           py::arg("noise") = ImuNoiseParams{})
      .def_readonly("id", &ImuSpec::id)
      .def_property_readonly("R_iV", [](const ImuSpec& s) { return s.extrinsics.R_iV.matrix(); })
      .def_property_readonly("p_Vi", [](const ImuSpec& s) { return s.extrinsics.p_Vi; })
      .def_readonly("noise", &ImuSpec::noise);

  py::class_<ImuArrayConfig>(m, "ImuArrayConfig")
      .def(py::init([](std::vector<ImuSpec> imus, double rate_hz, const Vec3& gravity) {
             ImuArrayConfig a;
             a.imus = std::move(imus);
             a.rate_hz = rate_hz;
             a.gravity = gravity;
             a.validate();
             return a;
           }),
           py::arg("imus"), py::arg("rate_hz") = 200.0, py::arg("gravity") = Vec3(0.0, 0.0, -9.81))
      .def_static("grid", &ImuArrayConfig::grid, py::arg("n_per_side"), py::arg("pitch_m"),
                  py::arg("noise") = ImuNoiseParams{})
      .def_static("single", &ImuArrayConfig::single, py::arg("noise") = ImuNoiseParams{})
      .def_readonly("imus", &ImuArrayConfig::imus)
      .def_readonly("rate_hz", &ImuArrayConfig::rate_hz)
      .def_readonly("gravity", &ImuArrayConfig::gravity)
      .def("__len__", &ImuArrayConfig::size);

  py::class_<FusionModel>(m, "FusionModel")
      .def_readonly("n_imus", &FusionModel::n_imus)
      .def_readonly("weighted", &FusionModel::weighted)
      .def_readonly("colocated", &FusionModel::colocated)
      .def_readonly("N", &FusionModel::N)
      .def_readonly("N_pinv", &FusionModel::N_pinv)
      .def_readonly("Y", &FusionModel::Y)
      .def_readonly("Z", &FusionModel::Z)
      .def_readonly("T", &FusionModel::T)
      .def_readonly("Q_gV", &FusionModel::Q_gV)
      .def_readonly("Q_wgV", &FusionModel::Q_wgV)
      .def_readonly("Q_aV", &FusionModel::Q_aV)
      .def_readonly("Q_waV", &FusionModel::Q_waV);

  m.def("build_fusion", &build_fusion, py::arg("array"));
  m.def("build_fusion_weighted", &build_fusion_weighted, py::arg("array"));

  py::class_<VirtualSample>(m, "VirtualSample")
      .def(py::init([](double t, const Vec3& w, const Vec3& a) { return VirtualSample{t, w, a}; }),
           py::arg("t"), py::arg("omega"), py::arg("accel"))
      .def_readwrite("t", &VirtualSample::t)
      .def_readwrite("omega", &VirtualSample::omega_mV)
      .def_readwrite("accel", &VirtualSample::accel_mV);

  m.def(
      "fuse",
      [](const FusionModel& model, const MatX& omega, const MatX& accel, double t) {
        const auto s = samples_from_arrays(omega, accel, t);
        return fuse(model, s);
      },
      py::arg("model"), py::arg("omega"), py::arg("accel"), py::arg("t") = 0.0,
      "Fuses one synchronized set of samples given as (n, 3) arrays in array order.");

  py::class_<VimuState>(m, "VimuState")
      .def(py::init<>())
      .def(py::init([](const UnitQuaternion& q, const Vec3& bg, const Vec3& v, const Vec3& ba, const Vec3& p) {
             return VimuState{q, bg, v, ba, p};
           }),
           py::arg("q_GV") = UnitQuaternion{}, py::arg("b_g") = Vec3::Zero(), py::arg("v") = Vec3::Zero(),
           py::arg("b_a") = Vec3::Zero(), py::arg("p") = Vec3::Zero())
      .def_readwrite("q_GV", &VimuState::q_GV)
      .def_readwrite("b_g", &VimuState::b_gV)
      .def_readwrite("v", &VimuState::v_GV)
      .def_readwrite("b_a", &VimuState::b_aV)
      .def_readwrite("p", &VimuState::p_GV)
      .def_property_readonly("R_GV", &VimuState::R_GV);

  py::class_<TrajectoryPoint>(m, "TrajectoryPoint")
      .def_readonly("t", &TrajectoryPoint::t)
      .def_readonly("x", &TrajectoryPoint::x)
      .def_property_readonly("P", [](const TrajectoryPoint& p) { return p.P.P; });

  py::class_<VimuPropagator>(m, "VimuPropagator")
      .def(py::init<FusionModel, const Vec3&>(), py::arg("model"), py::arg("gravity"))
      .def(
          "propagate",
          [](const VimuPropagator& self, const VimuState& x, const Mat15& P, const VirtualSample& u0,
             const VirtualSample& u1, double dt) {
            ErrorCovariance c;
            c.P = P;
            const auto r = self.propagate(x, c, u0, u1, dt);
            return py::make_tuple(r.x, r.P.P);
          },
          py::arg("x"), py::arg("P"), py::arg("u0"), py::arg("u1"), py::arg("dt"),
          "One step; returns (state, covariance).")
      .def(
          "predict_horizon",
          [](const VimuPropagator& self, const VimuState& x0, const Mat15& P0,
             const std::vector<VirtualSample>& stream, double t0, double horizon, bool with_covariance) {
            ErrorCovariance c;
            c.P = P0;
            return self.predict_horizon(x0, c, stream, t0, horizon, with_covariance);
          },
          py::arg("x0"), py::arg("P0"), py::arg("stream"), py::arg("t0"), py::arg("horizon"),
          py::arg("with_covariance") = true);

  py::class_<RmsRow>(m, "RmsRow")
      .def_readonly("imu_count", &RmsRow::imu_count)
      .def_readonly("horizon_s", &RmsRow::horizon_s)
      .def_readonly("pos_rms_m", &RmsRow::pos_rms_m)
      .def_readonly("rot_rms_rad", &RmsRow::rot_rms_rad)
      .def_readonly("vel_rms_mps", &RmsRow::vel_rms_mps);

  py::class_<NeesRow>(m, "NeesRow")
      .def_readonly("horizon_s", &NeesRow::horizon_s)
      .def_readonly("trials", &NeesRow::trials)
      .def_readonly("mean_nees", &NeesRow::mean_nees)
      .def_readonly("lower", &NeesRow::lower)
      .def_readonly("upper", &NeesRow::upper)
      .def_readonly("consistent", &NeesRow::consistent);

  py::class_<ConfigDocument>(m, "Config")
      .def_readonly("array", &ConfigDocument::array)
      .def_readonly("seed", &ConfigDocument::seed)
      .def("dump", &dump_config);

  m.def("default_config", &default_config);
  m.def("load_config", &parse_config, py::arg("path"));
  m.def(
      "parse_config", [](const std::string& text) { return parse_config_text(text); }, py::arg("text"));

  m.def(
      "run_experiment",
      [](const ConfigDocument& doc, std::optional<std::vector<int>> imu_counts, std::optional<int> trials,
         std::optional<std::vector<double>> horizons, std::optional<std::uint64_t> seed, int threads) {
        ExperimentConfig cfg = doc.experiment_config();
        if (imu_counts) cfg.imu_counts = *imu_counts;
        if (trials) cfg.trials = *trials;
        if (horizons) cfg.horizons = *horizons;
        if (seed) cfg.seed = *seed;
        cfg.threads = threads;
        py::gil_scoped_release release;
        return run_prediction_experiment(cfg).rows;
      },
      py::arg("config"), py::arg("imu_counts") = py::none(), py::arg("trials") = py::none(),
      py::arg("horizons") = py::none(), py::arg("seed") = py::none(), py::arg("threads") = 0,
      "Monte Carlo prediction error study; returns one RmsRow per (imu_count, horizon).");

  m.def(
      "run_nees",
      [](const ConfigDocument& doc, std::optional<int> trials, std::optional<std::vector<double>> horizons,
         std::optional<int> imu_count, double noise_inflation) {
        NeesConfig cfg = doc.nees_config();
        if (trials) cfg.trials = *trials;
        if (horizons) cfg.horizons = *horizons;
        if (imu_count) cfg.imu_count = *imu_count;
        cfg.noise_inflation = noise_inflation;
        py::gil_scoped_release release;
        return nees_consistency(cfg).rows;
      },
      py::arg("config"), py::arg("trials") = py::none(), py::arg("horizons") = py::none(),
      py::arg("imu_count") = py::none(), py::arg("noise_inflation") = 1.0);

  m.def("chi_square_mean_interval", &chi_square_mean_interval, py::arg("dof"), py::arg("trials"),
        py::arg("confidence") = 0.95);
}
