#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tweezersim/core_state.hpp"
#include "tweezersim/dynamics.hpp"
#include "tweezersim/gates.hpp"
#include "tweezersim/response.hpp"

namespace tweezersim {

enum class Scenario { Present = 0, Absent = 1 };
const char* to_string(Scenario s);

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RoundRecord {
  double signal = 0.0;
  bool bright = false;  // ground truth of the imaging branch
};

struct ShotRecord {
  std::size_t shot = 0;
  Scenario scenario = Scenario::Present;
  std::uint64_t seed = 0;
  std::vector<RoundRecord> rounds;
  double phase = kNaN;              // analyzer phase, loss detection only
  double shelving_transfer = kNaN;  // |down,0> -> |up,1> probability of this shot's shelving pulse
  bool data_lost = false;
  std::string data_label;     // "up", "down", "lost"
  int data_n = -1;            // measured final motional number, -1 if not measured
  int data_initial_n = -1;    // sampled initial motional number
  bool ancilla_lost = false;
  std::string ancilla_label;  // "up"/"down", or "plus"/"minus" for cooling
  std::vector<std::string> events;
};

/// Runs f(i) for i in [0, count) on `threads` workers pulling indices from an
/// atomic counter. Results are stored by index, so the output does not depend
/// on the worker count. The first exception thrown by any shot is rethrown.
template <class F>
auto run_shots(std::size_t count, unsigned threads, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<std::optional<R>> slots(count);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        slots[i].emplace(f(i));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  std::vector<R> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

/// Per-shot seed: hash of (master seed, shot index, scenario index).
inline std::uint64_t shot_seed(std::uint64_t master, std::size_t shot, Scenario scenario) {
  return derive_seed(master, {static_cast<std::uint64_t>(shot), static_cast<std::uint64_t>(scenario)});
}

/// The CNOT of the readout circuit: local Z on data, X^{1/2} on ancilla, CZ,
/// phase-compensated X^{1/2} on ancilla. Present data flips the ancilla to
/// |down> (bright); absent data leaves it in |up>.
struct CnotPhases {
  std::optional<double> local_z;             // default -cz_single_atom_phase
  std::optional<double> compensation_phase;  // default pi + cz_single_atom_phase
};
CzOutcome apply_cnot(Register& reg, std::size_t data, std::size_t ancilla, const CnotPhases& phases, GateContext& ctx,
                     bool entangle = true);

struct ReadoutConfig {
  std::size_t shots = 1000;  // per scenario
  int rounds = 4;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  GateErrorSpec gates;
  ImagingSpec imaging;
  CnotPhases cnot;
  ThermalSpec data_motion{0.002, kDefaultNMax};
  ThermalSpec ancilla_motion{0.0, 2};
  double heating_prob_per_round = 0.008;
  double ancilla_absent_prob = 0.0;
  bool include_absent = true;
};
void validate(const ReadoutConfig& c);

struct ReadoutResult {
  std::vector<ShotRecord> records;  // present shots first, then absent
};
ReadoutResult run_repeated_readout(const ReadoutConfig& config);

struct SidebandDrive {
  TrapSpec trap = TrapSpec::from_eta(0.36, constants::two_pi * 35e3);
  double rabi = constants::two_pi * 2e3;
  NoiseModel noise;
  EvolutionMode mode = EvolutionMode::RwaLadder;
  std::optional<double> dt;  // default: default_dt of the pulse
  int n_max = kDefaultNMax;
};
void validate(const SidebandDrive& d);

struct LossDetectionConfig {
  std::size_t shots = 2000;  // per scenario; analyzer phase of shot i is grid[i mod G]
  std::uint64_t seed = 1;
  unsigned threads = 1;
  GateErrorSpec gates;
  ImagingSpec imaging;
  CnotPhases cnot;
  SidebandDrive shelving;
  /// When set, the shelving noise model is rescaled so its perturbative BSB
  /// transfer fidelity from |down,0> equals this value.
  std::optional<double> target_shelving_fidelity;
  Complex c_down{std::sqrt(0.5)};
  Complex c_up{std::sqrt(0.5)};
  std::vector<double> analyzer_phases{0.0};
  bool reference = false;  // entangling gate and imaging disabled
  bool include_absent = true;
};
void validate(const LossDetectionConfig& c);

struct FringePoint {
  double phase = 0.0;
  std::size_t shots = 0;
  double p_up = 0.0;
  double std_error = 0.0;
};

struct LossDetectionResult {
  std::vector<ShotRecord> records;
  std::vector<FringePoint> fringe;  // present shots only
  double noise_scale = 1.0;
  InfidelityBudget shelving_budget;
  double mean_shelving_transfer = kNaN;
};
LossDetectionResult run_loss_detection(const LossDetectionConfig& config);

enum class RsbModel { Ideal, Dynamics };

struct CoolingConfig {
  std::size_t shots = 2000;  // per initial temperature
  std::uint64_t seed = 1;
  unsigned threads = 1;
  GateErrorSpec gates = GateErrorSpec::ideal();
  std::vector<double> initial_ground_fractions{0.3, 0.5, 0.7, 0.9};  // p0 = 1 - q
  RsbModel rsb = RsbModel::Ideal;
  SidebandDrive drive;  // eta, n_max, and the noisy RSB pulse in Dynamics mode
  ThermalSpec ancilla_motion{0.0, 2};
};
void validate(const CoolingConfig& c);

struct CoolingSummary {
  double initial_ground_fraction = 0.0;
  double initial_nbar = 0.0;
  std::size_t shots = 0;
  double ground_fraction = 0.0;  // data in |up, 0> and present, over all shots
  double ground_stderr = 0.0;
  double ideal_ground_fraction = 0.0;  // remove_one_quantum reference
  double conditional_ground_fraction = 0.0;  // P(n = 0 | data in |up>)
  double wrong_state_fraction = 0.0;         // data in |down>
  double lost_fraction = 0.0;
  double ancilla_plus_fraction = 0.0;
  double ancilla_correlation = 0.0;  // P(ancilla label agrees with initial n == 0)
  std::vector<double> up_motional_distribution;  // histogram of n among |up> data
};

struct CoolingResult {
  std::vector<std::vector<ShotRecord>> records;  // per initial temperature
  std::vector<CoolingSummary> summaries;
};
CoolingResult run_algorithmic_cooling(const CoolingConfig& config);

/// One shot of the cooling circuit on a given register (data = 0, ancilla = 1).
void cooling_circuit(Register& reg, const LocalOp& rsb, GateContext& ctx);

enum class SpectrumSide { Red, Blue, Both };
const char* to_string(SpectrumSide s);
SpectrumSide spectrum_side_from_string(const std::string& s);

struct SpectrumConfig {
  std::vector<double> detuning_hz;
  SpectrumSide side = SpectrumSide::Both;
  std::size_t shots_per_point = 0;  // 0: exact probabilities, no sampling
  std::uint64_t seed = 1;
  double rabi = constants::two_pi * 2e3;
  double eta = 0.36;
  double trap_frequency_hz = 35e3;
  std::optional<double> duration;  // default pi / |Omega_{0,1}|
  double offset = 0.0;             // wrong-electronic-state fraction
};
void validate(const SpectrumConfig& c);

struct SpectrumPoint {
  double detuning_hz = 0.0;
  double p_exc = 0.0;
  double std_error = 0.0;
  std::size_t shots = 0;
};

struct SidebandSpectrum {
  std::vector<SpectrumPoint> points;
  SpectrumSide side = SpectrumSide::Both;
  double duration = 0.0;
  double rabi = 0.0;
  double eta = 0.0;
  double trap_frequency_hz = 0.0;
};

/// Excitation probability of one sideband family at `detuning_hz` from its
/// own resonance: sum over n of p_n times the detuned Rabi transfer.
double sideband_excitation(std::span<const double> dist, PulseKind kind, double detuning_hz, double duration,
                           double eta, double rabi);

SidebandSpectrum simulate_sideband_spectrum(std::span<const double> motional_distribution, const SpectrumConfig& c);

struct PhaseCalibrationRow {
  double phase = 0.0;
  Scenario scenario = Scenario::Present;
  double ancilla_down = 0.0;
  double data_up = 0.0;
};

struct PhaseCalibrationConfig {
  std::vector<double> phases;
  GateErrorSpec gates = GateErrorSpec::ideal();
  std::optional<double> local_z;
  int n_max = kDefaultNMax;
  std::size_t shots = 0;  // 0: a single trajectory with error branches disabled
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

std::vector<PhaseCalibrationRow> calibrate_phase(const PhaseCalibrationConfig& c);

}  // namespace tweezersim
