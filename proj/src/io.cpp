#include "vimu/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/LU>

#include "json.hpp"

namespace vimu {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::SchemaError, (where.empty() ? std::string("/") : where) + ": " + what);
}

std::string child(const std::string& path, std::string_view key) { return path + "/" + std::string(key); }
std::string child(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

// Keys of `obj` must come from `allowed`.
void check_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) schema_error(path, "expected an object");
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      std::string list;
      for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
      schema_error(child(path, item.key()), "unknown key '" + item.key() + "' (allowed: " + list + ")");
    }
  }
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) schema_error(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) schema_error(path, "expected a finite number");
  return d;
}

double number_or(const json& obj, std::string_view key, const std::string& path, double fallback) {
  const auto it = obj.find(key);
  return it == obj.end() ? fallback : as_number(*it, child(path, key));
}

int int_or(const json& obj, std::string_view key, const std::string& path, int fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer()) schema_error(child(path, key), "expected an integer");
  const auto v = it->get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    schema_error(child(path, key), "integer out of range");
  }
  return static_cast<int>(v);
}

bool bool_or(const json& obj, std::string_view key, const std::string& path, bool fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_boolean()) schema_error(child(path, key), "expected true or false");
  return it->get<bool>();
}

std::vector<double> numbers(const json& v, const std::string& path, std::size_t expected = 0) {
  if (!v.is_array()) schema_error(path, "expected an array of numbers");
  if (expected != 0 && v.size() != expected) {
    schema_error(path, "expected " + std::to_string(expected) + " numbers, got " + std::to_string(v.size()));
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], child(path, i)));
  return out;
}

Vec3 vec3_or(const json& obj, std::string_view key, const std::string& path, const Vec3& fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  const auto v = numbers(*it, child(path, key), 3);
  return {v[0], v[1], v[2]};
}

// Accepts matrices that are orthonormal to within 1e-6 and snaps them to the
// nearest rotation; matrices already exact to rounding are kept as-is so that
// normalization is idempotent.
Mat3 checked_rotation(const Mat3& R, const std::string& path) {
  if (R.determinant() <= 0.0) schema_error(path, "rotation must have determinant +1");
  if (is_rotation(R, 1e-14)) return R;
  if (!is_rotation(R, 1e-6)) schema_error(path, "rotation is not orthonormal within 1e-6");
  return orthonormalize(R);
}

Mat3 parse_rotation(const json& imu, const std::string& path) {
  const auto r = imu.find("rotation");
  const auto q = imu.find("quaternion");
  if (r != imu.end() && q != imu.end()) schema_error(path, "give either 'rotation' or 'quaternion', not both");
  if (r != imu.end()) {
    const auto v = numbers(*r, child(path, "rotation"), 9);
    Mat3 R;
    R << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
    return checked_rotation(R, child(path, "rotation"));
  }
  if (q != imu.end()) {
    const auto v = numbers(*q, child(path, "quaternion"), 4);
    const Vec4 raw(v[0], v[1], v[2], v[3]);
    if (std::abs(raw.norm() - 1.0) > 1e-6) schema_error(child(path, "quaternion"), "quaternion norm differs from 1 by more than 1e-6");
    return checked_rotation(UnitQuaternion::from_raw(raw).to_rotation(), child(path, "quaternion"));
  }
  return Mat3::Identity();
}

ImuNoiseParams parse_noise(const json& obj, const std::string& path, const ImuNoiseParams& fallback) {
  check_keys(obj, path, {"sigma_g", "sigma_a", "sigma_wg", "sigma_wa"});
  ImuNoiseParams n;
  n.sigma_g = number_or(obj, "sigma_g", path, fallback.sigma_g);
  n.sigma_a = number_or(obj, "sigma_a", path, fallback.sigma_a);
  n.sigma_wg = number_or(obj, "sigma_wg", path, fallback.sigma_wg);
  n.sigma_wa = number_or(obj, "sigma_wa", path, fallback.sigma_wa);
  try {
    n.validate();
  } catch (const Error& e) {
    schema_error(path, e.what());
  }
  return n;
}

ImuArrayConfig parse_array(const json& obj, const std::string& path) {
  check_keys(obj, path, {"rate_hz", "gravity", "noise", "imus"});
  ImuArrayConfig a;
  a.rate_hz = number_or(obj, "rate_hz", path, a.rate_hz);
  a.gravity = vec3_or(obj, "gravity", path, a.gravity);
  ImuNoiseParams shared;
  if (const auto it = obj.find("noise"); it != obj.end()) shared = parse_noise(*it, child(path, "noise"), shared);
  const auto imus = obj.find("imus");
  if (imus == obj.end()) schema_error(child(path, "imus"), "missing required key 'imus'");
  if (!imus->is_array() || imus->empty()) schema_error(child(path, "imus"), "expected a nonempty array");
  for (std::size_t i = 0; i < imus->size(); ++i) {
    const std::string p = child(child(path, "imus"), i);
    const json& imu = (*imus)[i];
    check_keys(imu, p, {"id", "rotation", "quaternion", "lever_arm", "noise"});
    ImuSpec s;
    s.id = "imu" + std::to_string(i);
    if (const auto it = imu.find("id"); it != imu.end()) {
      if (!it->is_string() || it->get<std::string>().empty()) schema_error(child(p, "id"), "expected a nonempty string");
      s.id = it->get<std::string>();
    }
    s.extrinsics.R_iV = Rot3(parse_rotation(imu, p));
    s.extrinsics.p_Vi = vec3_or(imu, "lever_arm", p, Vec3::Zero());
    s.noise = shared;
    if (const auto it = imu.find("noise"); it != imu.end()) s.noise = parse_noise(*it, child(p, "noise"), shared);
    a.imus.push_back(s);
  }
  return a;
}

SinusoidAxis parse_axis(const json& obj, const std::string& path) {
  check_keys(obj, path, {"amplitude", "frequency_hz", "phase_rad"});
  return {number_or(obj, "amplitude", path, 0.0), number_or(obj, "frequency_hz", path, 0.0),
          number_or(obj, "phase_rad", path, 0.0)};
}

TrajectorySpec parse_trajectory(const json& obj, const std::string& path) {
  check_keys(obj, path, {"duration_s", "position_offset", "position", "orientation"});
  // Partially specified motion starts from rest rather than from the defaults.
  TrajectorySpec t;
  t.duration_s = number_or(obj, "duration_s", path, TrajectorySpec::default_motion().duration_s);
  t.position_offset = vec3_or(obj, "position_offset", path, Vec3::Zero());
  for (const char* key : {"position", "orientation"}) {
    const auto it = obj.find(key);
    if (it == obj.end()) continue;
    const std::string p = child(path, key);
    if (!it->is_array() || it->size() != 3) schema_error(p, "expected three per-axis sinusoids");
    auto& axes = std::string_view(key) == "position" ? t.position : t.orientation;
    for (std::size_t i = 0; i < 3; ++i) axes[i] = parse_axis((*it)[i], child(p, i));
  }
  return t;
}

FusionMethod parse_method(const json& v, const std::string& path) {
  if (v == "proposed") return FusionMethod::Proposed;
  if (v == "proposed_weighted") return FusionMethod::ProposedWeighted;
  if (v == "naive_average") return FusionMethod::NaiveAverage;
  schema_error(path, "method must be one of proposed, proposed_weighted, naive_average");
}

const char* method_name(FusionMethod m) {
  switch (m) {
    case FusionMethod::Proposed: return "proposed";
    case FusionMethod::ProposedWeighted: return "proposed_weighted";
    case FusionMethod::NaiveAverage: return "naive_average";
  }
  return "proposed";
}

// Subset sizes used when a config does not list any.
std::vector<int> default_counts(std::size_t n) {
  std::vector<int> out;
  for (int c : {1, 2, 4, 6, 9}) {
    if (static_cast<std::size_t>(c) <= n) out.push_back(c);
  }
  if (out.back() != static_cast<int>(n)) out.push_back(static_cast<int>(n));
  return out;
}

std::vector<int> int_list(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) schema_error(path, "expected a nonempty array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number_integer()) schema_error(child(path, i), "expected an integer");
    out.push_back(v[i].get<int>());
  }
  return out;
}

void parse_experiment(const json& obj, const std::string& path, ExperimentConfig& e) {
  check_keys(obj, path, {"imu_counts", "trials", "starts_per_trial", "horizons_s", "initial_bias_g_std",
                         "initial_bias_a_std", "noise_scale", "noise_free", "method"});
  if (const auto it = obj.find("imu_counts"); it != obj.end()) e.imu_counts = int_list(*it, child(path, "imu_counts"));
  e.trials = int_or(obj, "trials", path, e.trials);
  e.starts_per_trial = int_or(obj, "starts_per_trial", path, e.starts_per_trial);
  if (const auto it = obj.find("horizons_s"); it != obj.end()) e.horizons = numbers(*it, child(path, "horizons_s"));
  e.initial_bias_g_std = number_or(obj, "initial_bias_g_std", path, e.initial_bias_g_std);
  e.initial_bias_a_std = number_or(obj, "initial_bias_a_std", path, e.initial_bias_a_std);
  e.noise_scale = number_or(obj, "noise_scale", path, e.noise_scale);
  e.noise_free = bool_or(obj, "noise_free", path, e.noise_free);
  if (const auto it = obj.find("method"); it != obj.end()) e.method = parse_method(*it, child(path, "method"));
}

void parse_nees(const json& obj, const std::string& path, NeesSettings& n) {
  check_keys(obj, path, {"trials", "horizons_s", "imu_count", "noise_inflation", "confidence"});
  n.trials = int_or(obj, "trials", path, n.trials);
  if (const auto it = obj.find("horizons_s"); it != obj.end()) n.horizons = numbers(*it, child(path, "horizons_s"));
  n.imu_count = int_or(obj, "imu_count", path, n.imu_count);
  n.noise_inflation = number_or(obj, "noise_inflation", path, n.noise_inflation);
  n.confidence = number_or(obj, "confidence", path, n.confidence);
}

VimuState parse_initial_state(const json& obj, const std::string& path) {
  check_keys(obj, path, {"quaternion", "position", "velocity", "gyro_bias", "accel_bias"});
  VimuState x;
  if (const auto it = obj.find("quaternion"); it != obj.end()) {
    const auto v = numbers(*it, child(path, "quaternion"), 4);
    const Vec4 raw(v[0], v[1], v[2], v[3]);
    if (std::abs(raw.norm() - 1.0) > 1e-6) schema_error(child(path, "quaternion"), "quaternion norm differs from 1 by more than 1e-6");
    x.q_GV = UnitQuaternion::from_raw(raw);
  }
  x.p_GV = vec3_or(obj, "position", path, Vec3::Zero());
  x.v_GV = vec3_or(obj, "velocity", path, Vec3::Zero());
  x.b_gV = vec3_or(obj, "gyro_bias", path, Vec3::Zero());
  x.b_aV = vec3_or(obj, "accel_bias", path, Vec3::Zero());
  return x;
}

void validate_document(const ConfigDocument& doc) {
  try {
    doc.array.validate();
    build_fusion(doc.array);
    doc.experiment_config().validate();
    const NeesConfig n = doc.nees_config();
    if (n.trials < 100) throw Error(ErrorKind::ConfigInvalid, "nees.trials must be at least 100");
    if (n.imu_count < 0 || static_cast<std::size_t>(n.imu_count) > doc.array.size()) {
      throw Error(ErrorKind::ConfigInvalid, "nees.imu_count outside [0, array size]");
    }
    if (!(n.noise_inflation > 0.0)) throw Error(ErrorKind::ConfigInvalid, "nees.noise_inflation must be positive");
    if (!(n.confidence > 0.0 && n.confidence < 1.0)) throw Error(ErrorKind::ConfigInvalid, "nees.confidence must lie in (0, 1)");
    ExperimentConfig check = n.base;
    check.horizons = n.horizons;
    check.imu_counts = {1};
    check.validate();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SchemaError) throw;
    throw Error(ErrorKind::SchemaError, std::string("invalid configuration: ") + e.what());
  }
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json axes_json(const std::array<SinusoidAxis, 3>& axes) {
  json out = json::array();
  for (const auto& a : axes) {
    out.push_back({{"amplitude", a.amplitude}, {"frequency_hz", a.frequency_hz}, {"phase_rad", a.phase_rad}});
  }
  return out;
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  // nlohmann reports the position one past the offending character.
  return {line, col > 1 ? col - 1 : col};
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  return ss.str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void format_error(std::string_view source, std::size_t line, const std::string& what) {
  throw Error(ErrorKind::FormatError, std::string(source) + ":" + std::to_string(line) + ": " + what);
}

double parse_field(std::string_view field, std::string_view source, std::size_t line) {
  double v = 0.0;
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    format_error(source, line, "not a number: '" + std::string(field) + "'");
  }
  if (!std::isfinite(v)) format_error(source, line, "non-finite value");
  return v;
}

void put(std::ostream& out, double v) { out << format_double(v); }

template <typename... Vs>
void put_row(std::ostream& out, double first, const Vs&... rest) {
  put(out, first);
  ((out << ',', put(out, rest)), ...);
  out << '\n';
}

}  // namespace

ExperimentConfig ConfigDocument::experiment_config() const {
  ExperimentConfig e = experiment;
  e.array = array;
  e.trajectory = trajectory;
  e.seed = seed;
  return e;
}

NeesConfig ConfigDocument::nees_config() const {
  NeesConfig n;
  n.base = experiment_config();
  n.trials = nees.trials;
  n.horizons = nees.horizons;
  n.imu_count = nees.imu_count;
  n.noise_inflation = nees.noise_inflation;
  n.confidence = nees.confidence;
  return n;
}

ConfigDocument default_config() {
  ConfigDocument d;
  d.experiment = ExperimentConfig::defaults();
  d.array = d.experiment.array;
  d.trajectory = d.experiment.trajectory;
  d.seed = d.experiment.seed;
  return d;
}

ConfigDocument parse_config_text(std::string_view text, std::string_view source) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte);
    std::string detail = e.what();
    if (const auto c = detail.find("column"); c != std::string::npos) {
      if (const auto colon = detail.find(": ", c); colon != std::string::npos) detail = detail.substr(colon + 2);
    }
    throw Error(ErrorKind::ParseError, std::string(source) + ":" + std::to_string(line) + ":" +
                                           std::to_string(col) + ": malformed JSON: " + detail);
  }
  check_keys(root, "", {"seed", "array", "trajectory", "experiment", "nees", "initial_state"});

  ConfigDocument doc = default_config();
  if (const auto it = root.find("seed"); it != root.end()) {
    if (!it->is_number_unsigned()) schema_error("/seed", "expected a nonnegative integer");
    doc.seed = it->get<std::uint64_t>();
  }
  if (const auto it = root.find("array"); it != root.end()) {
    doc.array = parse_array(*it, "/array");
    doc.experiment.imu_counts = default_counts(doc.array.size());
  }
  if (const auto it = root.find("trajectory"); it != root.end()) doc.trajectory = parse_trajectory(*it, "/trajectory");
  if (const auto it = root.find("experiment"); it != root.end()) parse_experiment(*it, "/experiment", doc.experiment);
  if (const auto it = root.find("nees"); it != root.end()) parse_nees(*it, "/nees", doc.nees);
  if (const auto it = root.find("initial_state"); it != root.end()) {
    doc.initial_state = parse_initial_state(*it, "/initial_state");
  }
  validate_document(doc);
  return doc;
}

ConfigDocument parse_config(const fs::path& path) { return parse_config_text(read_file(path), path.string()); }

std::string dump_config(const ConfigDocument& doc) {
  json imus = json::array();
  for (const ImuSpec& s : doc.array.imus) {
    const Mat3& R = s.extrinsics.R_iV.matrix();
    imus.push_back({{"id", s.id},
                    {"rotation", {R(0, 0), R(0, 1), R(0, 2), R(1, 0), R(1, 1), R(1, 2), R(2, 0), R(2, 1), R(2, 2)}},
                    {"lever_arm", vec_json(s.extrinsics.p_Vi)},
                    {"noise",
                     {{"sigma_g", s.noise.sigma_g},
                      {"sigma_a", s.noise.sigma_a},
                      {"sigma_wg", s.noise.sigma_wg},
                      {"sigma_wa", s.noise.sigma_wa}}}});
  }
  const ExperimentConfig& e = doc.experiment;
  const VimuState& x = doc.initial_state;
  json root = {
      {"seed", doc.seed},
      {"array", {{"rate_hz", doc.array.rate_hz}, {"gravity", vec_json(doc.array.gravity)}, {"imus", imus}}},
      {"trajectory",
       {{"duration_s", doc.trajectory.duration_s},
        {"position_offset", vec_json(doc.trajectory.position_offset)},
        {"position", axes_json(doc.trajectory.position)},
        {"orientation", axes_json(doc.trajectory.orientation)}}},
      {"experiment",
       {{"imu_counts", e.imu_counts},
        {"trials", e.trials},
        {"starts_per_trial", e.starts_per_trial},
        {"horizons_s", e.horizons},
        {"initial_bias_g_std", e.initial_bias_g_std},
        {"initial_bias_a_std", e.initial_bias_a_std},
        {"noise_scale", e.noise_scale},
        {"noise_free", e.noise_free},
        {"method", method_name(e.method)}}},
      {"nees",
       {{"trials", doc.nees.trials},
        {"horizons_s", doc.nees.horizons},
        {"imu_count", doc.nees.imu_count},
        {"noise_inflation", doc.nees.noise_inflation},
        {"confidence", doc.nees.confidence}}},
      {"initial_state",
       {{"quaternion", {x.q_GV.x(), x.q_GV.y(), x.q_GV.z(), x.q_GV.w()}},
        {"position", vec_json(x.p_GV)},
        {"velocity", vec_json(x.v_GV)},
        {"gyro_bias", vec_json(x.b_gV)},
        {"accel_bias", vec_json(x.b_aV)}}}};
  return root.dump(2) + "\n";
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvTable read_csv_table(std::istream& in, std::string_view source) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view s = trim(line);
    if (s.empty()) continue;
    const auto fields = split(s);
    if (t.header.empty()) {
      for (auto f : fields) t.header.emplace_back(f);
      continue;
    }
    if (fields.size() != t.header.size()) {
      format_error(source, lineno, "expected " + std::to_string(t.header.size()) + " fields, got " +
                                       std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (auto f : fields) row.push_back(parse_field(f, source, lineno));
    t.rows.push_back(std::move(row));
  }
  if (in.bad()) throw Error(ErrorKind::IoError, "read failure in " + std::string(source));
  if (t.header.empty()) format_error(source, 1, "missing header");
  return t;
}

CsvTable read_csv_table(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return read_csv_table(in, path.string());
}

std::vector<ImuSample> read_imu_csv(std::istream& in, std::string_view source) {
  const CsvTable t = read_csv_table(in, source);
  std::string header;
  for (const auto& h : t.header) header += (header.empty() ? "" : ",") + h;
  if (header != kImuCsvHeader) {
    format_error(source, 1, "header must be '" + std::string(kImuCsvHeader) + "', got '" + header + "'");
  }
  std::vector<ImuSample> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    if (!out.empty() && !(r[0] > out.back().t)) {
      throw Error(ErrorKind::FormatError, std::string(source) + ": timestamps must strictly increase (t = " +
                                              format_double(r[0]) + " after " + format_double(out.back().t) + ")");
    }
    out.push_back({r[0], Vec3(r[1], r[2], r[3]), Vec3(r[4], r[5], r[6])});
  }
  return out;
}

std::vector<ImuSample> read_imu_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return read_imu_csv(in, path.string());
}

AlignedLogs ingest_logs(const std::vector<fs::path>& paths, const ImuArrayConfig& array) {
  if (paths.size() != array.size()) {
    throw Error(ErrorKind::CountMismatch, "expected " + std::to_string(array.size()) + " log files (one per IMU), got " +
                                              std::to_string(paths.size()));
  }
  std::vector<std::vector<ImuSample>> logs;
  for (const auto& p : paths) logs.push_back(read_imu_csv(p));

  AlignedLogs out;
  const std::size_t n = logs.size();
  std::vector<std::size_t> pos(n, 0);
  std::vector<bool> member(n);
  while (true) {
    double t_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (pos[i] < logs[i].size()) t_min = std::min(t_min, logs[i][pos[i]].t);
    }
    if (!std::isfinite(t_min)) break;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      member[i] = pos[i] < logs[i].size() && logs[i][pos[i]].t - t_min <= kAlignmentTolerance;
      hits += member[i] ? 1 : 0;
    }
    if (hits == n) {
      std::vector<ImuSample> group(n);
      for (std::size_t i = 0; i < n; ++i) {
        group[i] = logs[i][pos[i]];
        group[i].t = logs[0][pos[0]].t;
      }
      out.groups.push_back(std::move(group));
    } else {
      ++out.dropped_groups;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (member[i]) ++pos[i];
    }
  }
  if (out.groups.empty()) {
    throw Error(ErrorKind::EmptyIntersection, "no timestamp is present in all " + std::to_string(n) +
                                                  " logs (alignment tolerance 1e-6 s)");
  }
  if (out.dropped_groups > 0) {
    out.warnings.push_back("dropped " + std::to_string(out.dropped_groups) +
                           " sample groups missing from at least one log");
  }
  return out;
}

void write_imu_csv(std::ostream& out, const std::vector<ImuSample>& samples) {
  out << kImuCsvHeader << '\n';
  for (const auto& s : samples) {
    put_row(out, s.t, s.omega_m.x(), s.omega_m.y(), s.omega_m.z(), s.accel_m.x(), s.accel_m.y(), s.accel_m.z());
  }
}

void write_virtual_csv(std::ostream& out, const std::vector<VirtualSample>& samples) {
  out << kImuCsvHeader << '\n';
  for (const auto& s : samples) {
    put_row(out, s.t, s.omega_mV.x(), s.omega_mV.y(), s.omega_mV.z(), s.accel_mV.x(), s.accel_mV.y(),
            s.accel_mV.z());
  }
}

void write_pose_csv(std::ostream& out, const std::vector<TrajectoryPoint>& points) {
  out << kPoseCsvHeader << '\n';
  for (const auto& p : points) {
    const auto& q = p.x.q_GV;
    put_row(out, p.t, q.x(), q.y(), q.z(), q.w(), p.x.p_GV.x(), p.x.p_GV.y(), p.x.p_GV.z(), p.x.v_GV.x(),
            p.x.v_GV.y(), p.x.v_GV.z());
  }
}

void write_rms_csv(std::ostream& out, const RmsReport& report) {
  out << kRmsCsvHeader << '\n';
  for (const auto& r : report.rows) {
    out << r.imu_count << ',';
    put_row(out, r.horizon_s, r.pos_rms_m, r.rot_rms_rad, r.vel_rms_mps);
  }
}

void write_nees_csv(std::ostream& out, const NeesReport& report) {
  out << kNeesCsvHeader << '\n';
  for (const auto& r : report.rows) {
    put(out, r.horizon_s);
    out << ',' << r.trials << ',';
    put(out, r.mean_nees);
    out << ',';
    put(out, r.lower);
    out << ',';
    put(out, r.upper);
    out << ',' << (r.consistent ? 1 : 0) << '\n';
  }
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out << content;
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "write failure on " + path.string());
}

}  // namespace vimu
