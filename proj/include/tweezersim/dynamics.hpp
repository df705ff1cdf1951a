#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "tweezersim/core_state.hpp"
#include "tweezersim/local_op.hpp"

namespace tweezersim {

// Internal units are angular (rad/s) with hbar = 1. Frequencies in Hz only
// appear at the I/O boundary and in PSD frequency grids.

enum class PulseKind { Carrier, RedSideband, BlueSideband, Free };

const char* to_string(PulseKind kind);
PulseKind pulse_kind_from_string(const std::string& s);

/// Motional quanta added by the ↓ -> ↑ transition of a pulse kind.
int sideband_order(PulseKind kind);

struct PulseSpec {
  PulseKind kind = PulseKind::Carrier;
  double rabi = 0.0;      // carrier Rabi frequency Omega_0, rad/s
  double detuning = 0.0;  // from the nominal resonance of `kind`, rad/s
  double phase = 0.0;     // laser phase, rad
  double duration = 0.0;  // s
};

void validate(const PulseSpec& pulse);

enum class NoiseChannel { TrapFrequency = 0, LaserFrequency = 1, LaserAmplitude = 2 };
inline constexpr std::array<NoiseChannel, 3> kNoiseChannels{
    NoiseChannel::TrapFrequency, NoiseChannel::LaserFrequency, NoiseChannel::LaserAmplitude};
const char* to_string(NoiseChannel channel);
NoiseChannel noise_channel_from_string(const std::string& s);

/// Shot-constant Gaussian offset with standard deviation sigma (rad/s).
struct QuasiStatic {
  double sigma = 0.0;
};

/// Tabulated one-sided PSD in (rad/s)^2/Hz on a strictly increasing grid (Hz).
struct SpectralDensity {
  std::vector<double> frequency_hz;
  std::vector<double> psd;

  double max_frequency() const { return frequency_hz.empty() ? 0.0 : frequency_hz.back(); }
  /// Trapezoidal integral of the PSD, i.e. the variance of the process.
  double variance() const;
  /// Uniform white spectrum of level s0 on [0, f_max] with `points` samples.
  static SpectralDensity white(double s0, double f_max, std::size_t points);
};

void validate(const SpectralDensity& psd);

using ChannelNoise = std::variant<std::monostate, QuasiStatic, SpectralDensity>;

struct NoiseModel {
  std::array<ChannelNoise, 3> channels{};

  ChannelNoise& operator[](NoiseChannel c) { return channels[static_cast<std::size_t>(c)]; }
  const ChannelNoise& operator[](NoiseChannel c) const { return channels[static_cast<std::size_t>(c)]; }
  bool empty() const;
  /// Multiplies every channel's noise amplitude by `factor` (PSDs by factor^2).
  NoiseModel scaled(double factor) const;
};

/// One sampled noise history on the step grid t_i = (i + 1/2) dt.
struct NoiseRealization {
  double dt = 0.0;
  std::size_t steps = 0;
  std::array<std::vector<double>, 3> series{};  // each of length `steps`
  std::uint64_t seed = 0;
  std::uint64_t static_seed = 0;

  double value(NoiseChannel c, std::size_t step) const {
    const auto& s = series[static_cast<std::size_t>(c)];
    return s.empty() ? 0.0 : s[step];
  }
  /// True when every channel is constant in time.
  bool time_independent() const;
};

/// Samples a noise history. Quasi-static channels draw their constants from
/// `static_seed` when given (so several pulses in one shot share them) and
/// from `seed` otherwise; spectral channels always use `seed`.
NoiseRealization sample_noise(const NoiseModel& model, double duration, double dt, std::uint64_t seed,
                              std::optional<std::uint64_t> static_seed = std::nullopt);

/// All-zero realization on the same grid rules as sample_noise.
NoiseRealization noiseless(double duration, double dt);

enum class EvolutionMode {
  RwaLadder,  // resonant couplings on the full Fock ladder, Laguerre elements
  TwoLevel,   // only the lowest coupled pair, first-order Lamb-Dicke element
};

/// Omega_0 e^{-eta^2/2} eta^{|dn|} sqrt(n_<!/n_>!) L^{|dn|}_{n_<}(eta^2). Signed.
double sideband_rabi(int n_from, int n_to, double eta, double rabi);

/// pi / (eta Omega_0): blue-sideband pi time of the two-level model.
double blue_pi_time(double eta, double rabi);

/// Rabi frequency of the lowest coupled pair under `mode`.
double lowest_pair_rabi(PulseKind kind, double eta, double rabi, EvolutionMode mode);

/// Default step: (pi / |lowest pair Rabi|) / 2000.
double default_dt(const PulseSpec& pulse, const TrapSpec& trap, EvolutionMode mode = EvolutionMode::RwaLadder);

/// Transfer probability of a two-level system driven at Rabi frequency
/// `rabi` and detuning `detuning` for time t.
double detuned_rabi_transfer(double rabi, double detuning, double t);

/// Dense Hamiltonian (hbar = 1) at time t on the 2 (n_max + 1) basis.
Eigen::MatrixXcd build_hamiltonian(const PulseSpec& pulse, const TrapSpec& trap, const NoiseRealization& noise,
                                   double t, int n_max, EvolutionMode mode = EvolutionMode::RwaLadder);

/// Time-ordered propagator of a pulse, piecewise constant over the noise grid.
LocalOp propagator(const PulseSpec& pulse, const TrapSpec& trap, const NoiseRealization& noise, int n_max,
                   EvolutionMode mode = EvolutionMode::RwaLadder);

/// Throws TruncationError if `state` has more than kTruncationThreshold
/// population in a basis state whose coupling partner lies above n_max.
void check_truncation(const HybridAtomState& state, PulseKind kind, EvolutionMode mode);
/// Same check on the marginal local populations of an atom inside a register.
void check_truncation(std::span<const double> local_populations, int n_max, PulseKind kind, EvolutionMode mode);

HybridAtomState evolve(const HybridAtomState& state, const PulseSpec& pulse, const TrapSpec& trap,
                       const NoiseRealization& noise, EvolutionMode mode = EvolutionMode::RwaLadder);

/// Exact pi rotation on every coupled pair of a sideband or carrier, using
/// the same phase convention as the Hamiltonian. Models an ideal
/// number-independent pulse.
LocalOp ideal_pi_pulse(PulseKind kind, double phase, double eta, int n_max);

enum class PsdQuantity {
  AngularRate,  // S in (rad/s)^2/Hz, stored as is
  Frequency,    // S in Hz^2/Hz, multiplied by (2 pi)^2
  Phase,        // phase PSD in rad^2/Hz, multiplied by (2 pi f)^2
};
PsdQuantity psd_quantity_from_string(const std::string& s);

/// Reads a two-column CSV (frequency Hz, S). Lines that do not start with a
/// number are skipped, so a header row is optional.
SpectralDensity load_psd_csv(const std::filesystem::path& path, PsdQuantity quantity = PsdQuantity::AngularRate);
SpectralDensity convert_psd(SpectralDensity psd, PsdQuantity quantity);

}  // namespace tweezersim
