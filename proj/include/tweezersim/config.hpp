#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tweezersim/analysis.hpp"
#include "tweezersim/dynamics.hpp"
#include "tweezersim/gates.hpp"
#include "tweezersim/protocols.hpp"
#include "tweezersim/response.hpp"

namespace tweezersim {

struct TrapSection {
  double eta = 0.36;
  double frequency_hz = 35e3;
  int n_max = kDefaultNMax;
};

struct PulseSection {
  double rabi_hz = 2e3;
  EvolutionMode mode = EvolutionMode::RwaLadder;
  std::optional<double> dt_s;
};

/// One channel of the noise section. Exactly one of the three forms is set.
struct NoiseChannelConfig {
  std::optional<double> quasi_static_sigma_hz;
  std::optional<std::filesystem::path> psd_file;
  std::string psd_quantity = "angular_rate";
  std::optional<double> white_psd_rad2_per_s2_per_hz;
  double max_frequency_hz = 0.0;
  int points = 0;
};

struct ImagingSection {
  ImagingSpec spec;
  /// When set, bright_mean is solved so the single-round fidelity at P1 = 0.5
  /// equals this value, given the CNOT flip error of the gate section.
  std::optional<double> calibrate_to_fidelity;
};

enum class ProtocolKind { Readout, LossDetection, Cooling };
const char* to_string(ProtocolKind k);

struct ProtocolSection {
  ProtocolKind kind = ProtocolKind::Readout;
  std::size_t shots = 1000;
  int rounds = 4;
  double data_nbar = 0.002;
  double ancilla_nbar = 0.0;
  double heating_prob_per_round = 0.008;
  double ancilla_absent_prob = 0.0;
  bool include_absent = true;
  std::optional<double> target_shelving_fidelity;
  double data_c_down = std::sqrt(0.5);
  double data_c_up = std::sqrt(0.5);
  std::vector<double> analyzer_phases_rad{0.0};
  bool reference = false;
  std::vector<double> initial_ground_fractions{0.3, 0.5, 0.7, 0.9};
  RsbModel rsb_model = RsbModel::Ideal;
  std::optional<double> local_z_rad;
  std::optional<double> compensation_phase_rad;
};

struct ResponseSection {
  double frequency_min_hz = 10.0;
  double frequency_max_hz = 10e3;
  int points = 50;
  bool log_spacing = true;
  NoiseChannel channel = NoiseChannel::TrapFrequency;
  ResponseMethod method = ResponseMethod::ClosedForm;
  std::optional<double> duration_s;
};

struct SpectrumSection {
  double detuning_min_hz = -45e3;
  double detuning_max_hz = 45e3;
  int points = 91;
  SpectrumSide side = SpectrumSide::Both;
  std::size_t shots_per_point = 0;
  double nbar = 0.002;
  bool cooled = false;  // apply one-quantum removal to the thermal input
  double offset = 0.0;
  std::optional<double> duration_s;
};

struct FitSection {
  std::optional<std::filesystem::path> spectrum_file;
  double delta_chi2 = 1.0;
  bool heating_side_only = true;
};

struct DetectSection {
  std::optional<std::filesystem::path> shots_file;
};

struct AnalysisSection {
  std::vector<double> priors{0.5};
  std::vector<int> n_cyc{1, 2, 3, 4};
  AggregationMode aggregation = AggregationMode::Sum;
  ResponseSection response;
  SpectrumSection spectrum;
  FitSection fit;
  DetectSection detect;
};

struct OutputSection {
  std::filesystem::path directory = "out";
};

struct RunConfig {
  std::uint64_t seed = 1;
  TrapSection trap;
  PulseSection pulses;
  std::array<NoiseChannelConfig, 3> noise{};
  GateErrorSpec gates;
  ImagingSection imaging;
  ProtocolSection protocol;
  AnalysisSection analysis;
  OutputSection output;
};

/// Parses and validates a config document. Relative file paths are resolved
/// against `base_dir`. Errors carry the dotted key of the offending entry.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
/// Reads a JSON file; I/O failures raise IoError, malformed JSON ConfigError.
RunConfig load_config(const std::filesystem::path& path);
/// Canonical echo with every default filled in; parse_config(to_json(c)) == c.
nlohmann::json to_json(const RunConfig& c);

// Builders for the protocol and analysis layers.
TrapSpec make_trap(const RunConfig& c);
NoiseModel make_noise(const RunConfig& c);
SidebandDrive make_drive(const RunConfig& c);
ImagingSpec make_imaging(const RunConfig& c);
ReadoutConfig make_readout(const RunConfig& c, unsigned threads);
LossDetectionConfig make_loss_detection(const RunConfig& c, unsigned threads);
CoolingConfig make_cooling(const RunConfig& c, unsigned threads);
ResponseQuery make_response_query(const RunConfig& c);
SpectrumConfig make_spectrum(const RunConfig& c);
std::vector<double> make_spectrum_distribution(const RunConfig& c);

}  // namespace tweezersim
