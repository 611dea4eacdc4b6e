#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "vimu/sim.hpp"

namespace vimu {

/// Settings of the `nees` study as stored in a config document.
struct NeesSettings {
  int trials = 1000;
  std::vector<double> horizons{0.5};
  int imu_count = 0;
  double noise_inflation = 1.0;
  double confidence = 0.95;
};

/// Validated configuration with every default filled in.
struct ConfigDocument {
  ImuArrayConfig array;
  TrajectorySpec trajectory = TrajectorySpec::default_motion();
  /// Experiment parameters; `array` and `trajectory` above take precedence
  /// over the copies inside.
  ExperimentConfig experiment;
  NeesSettings nees;
  VimuState initial_state;
  std::uint64_t seed = 42;

  ExperimentConfig experiment_config() const;
  NeesConfig nees_config() const;
};

/// Defaults: the 3x3 grid array, default trajectory and experiment.
ConfigDocument default_config();

/// Throws IoError when the file cannot be read, ParseError (with line and
/// column) on malformed JSON and SchemaError naming the offending key.
ConfigDocument parse_config(const std::filesystem::path& path);
ConfigDocument parse_config_text(std::string_view text, std::string_view source = "<config>");

/// Normalized JSON: every field explicit, rotations as row-major matrices.
std::string dump_config(const ConfigDocument& doc);

/// Per-timestamp sample sets aligned across IMUs, in array order.
struct AlignedLogs {
  std::vector<std::vector<ImuSample>> groups;
  /// Timestamps present in some but not all logs.
  std::size_t dropped_groups = 0;
  std::vector<std::string> warnings;
};

/// Reads one CSV per IMU (header `t,gx,gy,gz,ax,ay,az`) and keeps the
/// timestamps present in every file within kAlignmentTolerance.
/// Throws IoError, FormatError, CountMismatch or EmptyIntersection.
AlignedLogs ingest_logs(const std::vector<std::filesystem::path>& paths, const ImuArrayConfig& array);

/// Single log in the IMU CSV format. Throws IoError or FormatError.
std::vector<ImuSample> read_imu_csv(const std::filesystem::path& path);
std::vector<ImuSample> read_imu_csv(std::istream& in, std::string_view source);

/// Header plus numeric rows of any CSV written by this module.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
CsvTable read_csv_table(const std::filesystem::path& path);
CsvTable read_csv_table(std::istream& in, std::string_view source);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

inline constexpr std::string_view kImuCsvHeader = "t,gx,gy,gz,ax,ay,az";
inline constexpr std::string_view kPoseCsvHeader = "t,qx,qy,qz,qw,px,py,pz,vx,vy,vz";
inline constexpr std::string_view kRmsCsvHeader = "imu_count,horizon_s,pos_rms_m,rot_rms_rad,vel_rms_mps";
inline constexpr std::string_view kNeesCsvHeader = "horizon_s,trials,mean_nees,lower,upper,consistent";

void write_imu_csv(std::ostream& out, const std::vector<ImuSample>& samples);
void write_virtual_csv(std::ostream& out, const std::vector<VirtualSample>& samples);
void write_pose_csv(std::ostream& out, const std::vector<TrajectoryPoint>& points);
void write_rms_csv(std::ostream& out, const RmsReport& report);
void write_nees_csv(std::ostream& out, const NeesReport& report);

/// Writes `content` to `path`, creating parent directories. Throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace vimu
