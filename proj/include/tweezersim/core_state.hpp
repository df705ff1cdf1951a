#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "tweezersim/rng.hpp"

namespace tweezersim {

using Complex = std::complex<double>;

namespace constants {
inline constexpr double hbar = 1.054571817e-34;       // J s
inline constexpr double amu = 1.66053906660e-27;      // kg
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;
}  // namespace constants

inline constexpr int kDefaultNMax = 12;

/// Population tolerated in a truncation boundary state before an operation
/// refuses to run.
inline constexpr double kTruncationThreshold = 1e-6;

/// Rydberg never carries amplitude: an error channel that sends population
/// there converts it to a lost atom immediately.
enum class ElectronicLevel { Down, Up, Rydberg };

const char* to_string(ElectronicLevel level);

/// Pure state of one atom over (electronic level, motional Fock number), with
/// the classical lost flag. Amplitudes are laid out level-major: index
/// level * (n_max + 1) + n with Down = 0 and Up = 1.
class HybridAtomState {
 public:
  explicit HybridAtomState(int n_max = kDefaultNMax);

  int n_max() const noexcept { return n_max_; }
  std::size_t dim() const noexcept { return amplitudes_.size(); }
  bool lost() const noexcept { return lost_; }
  void set_lost(bool lost) noexcept { lost_ = lost; }

  std::size_t index(ElectronicLevel level, int n) const;
  Complex amplitude(ElectronicLevel level, int n) const { return amplitudes_[index(level, n)]; }
  Complex& amplitude(ElectronicLevel level, int n) { return amplitudes_[index(level, n)]; }

  std::span<const Complex> amplitudes() const noexcept { return amplitudes_; }
  std::span<Complex> amplitudes() noexcept { return amplitudes_; }

  double norm_squared() const;
  double population(ElectronicLevel level, int n) const { return std::norm(amplitude(level, n)); }
  double electronic_population(ElectronicLevel level) const;
  /// P(n) summed over electronic levels.
  std::vector<double> motional_distribution() const;

 private:
  int n_max_;
  std::vector<Complex> amplitudes_;
  bool lost_ = false;
};

struct ThermalSpec {
  double nbar = 0.0;
  int n_max = kDefaultNMax;

  /// Boltzmann ratio nbar / (nbar + 1).
  double q() const { return nbar / (nbar + 1.0); }
  static ThermalSpec from_ground_fraction(double p0, int n_max = kDefaultNMax);
};

struct TrapSpec {
  double omega_t = 0.0;  // rad/s
  double mass = 0.0;     // kg
  double k = 0.0;        // 1/m
  double eta = 0.0;

  /// Derives eta from the physical parameters.
  static TrapSpec from_physical(double k, double mass, double omega_t);
  /// Trap with a directly supplied Lamb-Dicke parameter.
  static TrapSpec from_eta(double eta, double omega_t);
};

/// Renormalized truncated Boltzmann distribution p_n = (1-q) q^n / (1 - q^(n_max+1)).
std::vector<double> thermal_distribution(const ThermalSpec& spec);

/// Ideal removal of one motional quantum: p'[0] = p[0] + p[1], p'[n] = p[n+1].
std::vector<double> remove_one_quantum(std::span<const double> dist);

/// eta = k sqrt(hbar / (2 m omega_t)).
double lamb_dicke(double k, double mass, double omega_t);

/// Throws ConfigError unless dist is a non-negative vector summing to one.
void validate_probability_vector(std::span<const double> dist, double tol = 1e-9);

HybridAtomState prepare_fock(ElectronicLevel level, int n, int n_max = kDefaultNMax);

/// (c_down |down> + c_up |up>) (x) |n>. Coefficients must be normalized.
HybridAtomState prepare_superposition(Complex c_down, Complex c_up, int n,
                                      int n_max = kDefaultNMax);

/// Arbitrary normalized amplitude vector in the level-major layout.
HybridAtomState prepare_amplitudes(std::span<const Complex> amplitudes, int n_max);

/// Trajectory-mode thermal preparation: samples a Fock state from
/// thermal_distribution(spec).
HybridAtomState sample_thermal(ElectronicLevel level, const ThermalSpec& spec, Rng& rng);

/// Inverse-CDF draw of an index from a probability vector.
int sample_index(std::span<const double> dist, Rng& rng);

}  // namespace tweezersim
