#pragma once

#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tweezersim/analysis.hpp"
#include "tweezersim/errors.hpp"
#include "tweezersim/protocols.hpp"
#include "tweezersim/response.hpp"

namespace tweezersim {

inline constexpr const char* kVersion = "0.1.0";

/// 17 significant digits; "nan", "inf" and "-inf" for non-finite values.
std::string format_double(double v);

// Column orders are part of the output contract; see README.
void write_shot_csv(std::ostream& os, std::span<const ShotRecord> records);
void write_spectrum_csv(std::ostream& os, std::span<const SpectrumPoint> points);
void write_response_csv(std::ostream& os, const ResponseFunction& r);
void write_detection_csv(std::ostream& os, std::span<const DetectionResult> rows);
void write_fringe_csv(std::ostream& os, std::span<const FringePoint> fringe);
void write_cooling_csv(std::ostream& os, std::span<const CoolingSummary> rows);
void write_profile_csv(std::ostream& os, const ProfileInterval& p);
void write_phase_calibration_csv(std::ostream& os, std::span<const PhaseCalibrationRow> rows);

/// Reads back a shot CSV. Rounds are regrouped per (scenario, shot).
std::vector<ShotRecord> read_shot_csv(const std::filesystem::path& path);
/// Reads a spectrum CSV with at least the detuning_hz and p_exc columns.
std::vector<SpectrumPoint> read_spectrum_csv(const std::filesystem::path& path);

/// Writes `fn(stream)` to `path`, creating parent directories.
template <class F>
void write_file(const std::filesystem::path& path, F&& fn) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  fn(os);
  os.flush();
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

void write_text(const std::filesystem::path& path, const std::string& text);

struct RunReport {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double wall_time_s = 0.0;
  nlohmann::json results = nlohmann::json::object();
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

nlohmann::json to_json(const DetectionResult& r);
nlohmann::json to_json(const GaussianPeak& g);
nlohmann::json to_json(const DoubleGaussianFit& f);
nlohmann::json to_json(const ProfileInterval& p, bool include_curve = false);
nlohmann::json to_json(const TemperatureEstimate& t);
nlohmann::json to_json(const InfidelityBudget& b);
nlohmann::json to_json(const CoolingSummary& s);
/// Finite doubles as numbers, non-finite ones as strings.
nlohmann::json json_number(double v);

}  // namespace tweezersim
