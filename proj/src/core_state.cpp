#include "tweezersim/core_state.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "tweezersim/errors.hpp"

namespace tweezersim {

const char* to_string(ElectronicLevel level) {
  switch (level) {
    case ElectronicLevel::Down: return "down";
    case ElectronicLevel::Up: return "up";
    case ElectronicLevel::Rydberg: return "rydberg";
  }
  return "?";
}

namespace {

void check_n_max(int n_max) {
  if (n_max < 2) throw ConfigError("n_max", "motional truncation must be >= 2, got " + std::to_string(n_max));
}

}  // namespace

HybridAtomState::HybridAtomState(int n_max) : n_max_(n_max) {
  check_n_max(n_max);
  amplitudes_.assign(2 * static_cast<std::size_t>(n_max + 1), Complex{0.0, 0.0});
  amplitudes_[0] = 1.0;
}

std::size_t HybridAtomState::index(ElectronicLevel level, int n) const {
  if (level == ElectronicLevel::Rydberg)
    throw ConfigError("level", "the Rydberg level carries no amplitude");
  if (n < 0 || n > n_max_)
    throw TruncationError("Fock index " + std::to_string(n) + " outside [0, " + std::to_string(n_max_) + "]");
  return (level == ElectronicLevel::Up ? 1u : 0u) * static_cast<std::size_t>(n_max_ + 1) +
         static_cast<std::size_t>(n);
}

double HybridAtomState::norm_squared() const {
  double s = 0.0;
  for (const auto& a : amplitudes_) s += std::norm(a);
  return s;
}

double HybridAtomState::electronic_population(ElectronicLevel level) const {
  double s = 0.0;
  for (int n = 0; n <= n_max_; ++n) s += population(level, n);
  return s;
}

std::vector<double> HybridAtomState::motional_distribution() const {
  std::vector<double> p(static_cast<std::size_t>(n_max_ + 1));
  for (int n = 0; n <= n_max_; ++n)
    p[static_cast<std::size_t>(n)] = population(ElectronicLevel::Down, n) + population(ElectronicLevel::Up, n);
  return p;
}

ThermalSpec ThermalSpec::from_ground_fraction(double p0, int n_max) {
  if (!(p0 > 0.0 && p0 <= 1.0)) throw ConfigError("p0", "ground fraction must lie in (0, 1]");
  const double q = 1.0 - p0;
  return ThermalSpec{q / (1.0 - q), n_max};
}

TrapSpec TrapSpec::from_physical(double k, double mass, double omega_t) {
  return TrapSpec{omega_t, mass, k, lamb_dicke(k, mass, omega_t)};
}

TrapSpec TrapSpec::from_eta(double eta, double omega_t) {
  if (!(eta >= 0.0)) throw ConfigError("eta", "Lamb-Dicke parameter must be non-negative");
  TrapSpec t;
  t.omega_t = omega_t;
  t.eta = eta;
  return t;
}

std::vector<double> thermal_distribution(const ThermalSpec& spec) {
  if (!(spec.nbar >= 0.0) || !std::isfinite(spec.nbar))
    throw ConfigError("nbar", "mean occupation must be finite and >= 0");
  check_n_max(spec.n_max);
  const double q = spec.q();
  std::vector<double> p(static_cast<std::size_t>(spec.n_max + 1));
  double qn = 1.0;
  for (auto& v : p) {
    v = (1.0 - q) * qn;
    qn *= q;
  }
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= total;
  return p;
}

void validate_probability_vector(std::span<const double> dist, double tol) {
  if (dist.empty()) throw ConfigError("distribution", "empty probability vector");
  double s = 0.0;
  for (double v : dist) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("distribution", "negative or non-finite probability");
    s += v;
  }
  if (std::abs(s - 1.0) > tol) throw ConfigError("distribution", "probabilities sum to " + std::to_string(s));
}

std::vector<double> remove_one_quantum(std::span<const double> dist) {
  validate_probability_vector(dist);
  std::vector<double> out(dist.size(), 0.0);
  out[0] = dist[0] + (dist.size() > 1 ? dist[1] : 0.0);
  for (std::size_t n = 1; n + 1 < dist.size(); ++n) out[n] = dist[n + 1];
  return out;
}

double lamb_dicke(double k, double mass, double omega_t) {
  if (!(mass > 0.0) || !(omega_t > 0.0) || !(k >= 0.0))
    throw ConfigError("trap", "mass and trap frequency must be positive, wavenumber non-negative");
  return k * std::sqrt(constants::hbar / (2.0 * mass * omega_t));
}

HybridAtomState prepare_fock(ElectronicLevel level, int n, int n_max) {
  HybridAtomState s(n_max);
  if (n < 0 || n > n_max)
    throw TruncationError("requested Fock state " + std::to_string(n) + " exceeds n_max " + std::to_string(n_max));
  s.amplitudes()[0] = 0.0;
  s.amplitude(level, n) = 1.0;
  return s;
}

HybridAtomState prepare_superposition(Complex c_down, Complex c_up, int n, int n_max) {
  if (std::abs(std::norm(c_down) + std::norm(c_up) - 1.0) > 1e-10)
    throw ConfigError("coefficients", "electronic superposition is not normalized");
  HybridAtomState s = prepare_fock(ElectronicLevel::Down, n, n_max);
  s.amplitude(ElectronicLevel::Down, n) = c_down;
  s.amplitude(ElectronicLevel::Up, n) = c_up;
  return s;
}

HybridAtomState prepare_amplitudes(std::span<const Complex> amplitudes, int n_max) {
  HybridAtomState s(n_max);
  if (amplitudes.size() != s.dim())
    throw ConfigError("amplitudes", "expected " + std::to_string(s.dim()) + " amplitudes");
  double norm = 0.0;
  for (const auto& a : amplitudes) norm += std::norm(a);
  if (std::abs(norm - 1.0) > 1e-10) throw ConfigError("amplitudes", "state is not normalized");
  std::copy(amplitudes.begin(), amplitudes.end(), s.amplitudes().begin());
  return s;
}

int sample_index(std::span<const double> dist, Rng& rng) {
  const double u = uniform01(rng);
  double c = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    c += dist[i];
    if (u < c) return static_cast<int>(i);
  }
  // Round-off at the top of the CDF: return the last index with support.
  for (std::size_t i = dist.size(); i-- > 0;)
    if (dist[i] > 0.0) return static_cast<int>(i);
  return 0;
}

HybridAtomState sample_thermal(ElectronicLevel level, const ThermalSpec& spec, Rng& rng) {
  const auto p = thermal_distribution(spec);
  return prepare_fock(level, sample_index(p, rng), spec.n_max);
}

}  // namespace tweezersim
